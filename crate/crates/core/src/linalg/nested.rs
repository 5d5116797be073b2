//! Multifrontal LU on a geometric nested-dissection ordering.
//!
//! The grid is split recursively along its longer side by a one-node-wide
//! separator line until pieces are small. Each tree node owns a front: the
//! variables it eliminates (separator or leaf block) and its border, i.e.
//! the nodes just outside its rectangle, all of which belong to ancestor
//! separators. Fronts are factorized children first; the Schur complement
//! of each front is extend-added into its parent.
//!
//! Pivoting is partial within the fully summed block of each front. When
//! the operator is exactly complex symmetric, fronts keep only the factored
//! pivot block and the coupling block `F21` (since `F12 = F21ᵀ`), at the
//! price of a second pivot-block solve in the backward sweep.

use crate::discretization::SparseOperator;
use crate::error::{Error, Result};
use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Rectangles with at most this many nodes are eliminated as one block.
const LEAF_NODES: usize = 32;

#[derive(Debug, Clone)]
struct Front {
    elim: Vec<usize>,
    border: Vec<usize>,
    children: Vec<usize>,
    /// General: `s × (s+t)` row-major, unit-lower `L11` below the diagonal,
    /// `U11` on and above it, then `U12`.
    /// Symmetric: `s × s`, the `L11\U11` block only.
    top: Vec<C64>,
    /// General: `L21`, `t × s`. Symmetric: the unfactored `F21`, `t × s`.
    l21: Vec<C64>,
    pivots: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct NestedDissectionLu {
    n: usize,
    symmetric: bool,
    fronts: Vec<Front>,
}

#[derive(Clone, Copy)]
struct Rect {
    x0: usize,
    x1: usize,
    y0: usize,
    y1: usize,
}

impl Rect {
    fn area(&self) -> usize {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

struct TreeBuilder {
    nx: usize,
    ny: usize,
    fronts: Vec<Front>,
}

impl TreeBuilder {
    fn border(&self, r: Rect) -> Vec<usize> {
        let mut b = Vec::new();
        if r.y0 > 0 {
            b.extend((r.x0..r.x1).map(|x| (r.y0 - 1) * self.nx + x));
        }
        for y in r.y0..r.y1 {
            if r.x0 > 0 {
                b.push(y * self.nx + r.x0 - 1);
            }
            if r.x1 < self.nx {
                b.push(y * self.nx + r.x1);
            }
        }
        if r.y1 < self.ny {
            b.extend((r.x0..r.x1).map(|x| r.y1 * self.nx + x));
        }
        b
    }

    /// Appends the subtree for `r` in post-order and returns its root id.
    fn build(&mut self, r: Rect) -> usize {
        let (w, h) = (r.x1 - r.x0, r.y1 - r.y0);
        let mut children = Vec::new();
        let elim: Vec<usize>;
        let nx = self.nx;
        if r.area() <= LEAF_NODES {
            elim = (r.y0..r.y1)
                .flat_map(|y| (r.x0..r.x1).map(move |x| y * nx + x))
                .collect();
        } else if w >= h {
            let mid = r.x0 + w / 2;
            for half in [Rect { x1: mid, ..r }, Rect { x0: mid + 1, ..r }] {
                if half.area() > 0 {
                    children.push(self.build(half));
                }
            }
            elim = (r.y0..r.y1).map(|y| y * self.nx + mid).collect();
        } else {
            let mid = r.y0 + h / 2;
            for half in [Rect { y1: mid, ..r }, Rect { y0: mid + 1, ..r }] {
                if half.area() > 0 {
                    children.push(self.build(half));
                }
            }
            elim = (r.x0..r.x1).map(|x| mid * self.nx + x).collect();
        }
        let border = self.border(r);
        self.fronts.push(Front {
            elim,
            border,
            children,
            top: Vec::new(),
            l21: Vec::new(),
            pivots: Vec::new(),
        });
        self.fronts.len() - 1
    }
}

/// `dst[..] -= l * src[..]`.
#[inline]
fn row_update(dst: &mut [C64], l: C64, src: &[C64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d -= l * *s;
    }
}

impl NestedDissectionLu {
    pub fn factor(op: &SparseOperator) -> Result<Self> {
        let g = op.grid();
        let n = op.dim();
        if n != g.len() {
            return Err(Error::invalid("operator dimension does not match its grid"));
        }
        let mut tree = TreeBuilder {
            nx: g.nx(),
            ny: g.ny(),
            fronts: Vec::new(),
        };
        tree.build(Rect {
            x0: 0,
            x1: g.nx(),
            y0: 0,
            y1: g.ny(),
        });
        let mut fronts = tree.fronts;
        let symmetric = op.entries().all(|(p, q, v)| op.get(q, p) == v);

        // position of each variable in the current front, valid when
        // stamp[v] equals the front id
        let mut pos = vec![0usize; n];
        let mut stamp = vec![usize::MAX; n];
        let mut updates: Vec<Option<Vec<C64>>> = vec![None; fronts.len()];

        for id in 0..fronts.len() {
            let s = fronts[id].elim.len();
            let t = fronts[id].border.len();
            let nf = s + t;
            for (k, &v) in fronts[id].elim.iter().chain(&fronts[id].border).enumerate() {
                pos[v] = k;
                stamp[v] = id;
            }
            let mut f = vec![ZERO; nf * nf];

            for (a, &p) in fronts[id].elim.iter().enumerate() {
                let (cols, vals) = op.row(p);
                for (&q, &v) in cols.iter().zip(vals) {
                    if stamp[q] != id {
                        continue;
                    }
                    let b = pos[q];
                    f[a * nf + b] += v;
                    if b >= s {
                        f[b * nf + a] += op.get(q, p);
                    }
                }
            }

            for &c in &fronts[id].children {
                let upd = updates[c]
                    .take()
                    .ok_or_else(|| Error::Internal("child front not yet factorized".into()))?;
                let cb = &fronts[c].border;
                let tc = cb.len();
                for (a, &va) in cb.iter().enumerate() {
                    if stamp[va] != id {
                        return Err(Error::Internal(format!(
                            "border node {va} missing from parent front"
                        )));
                    }
                    let ra = pos[va] * nf;
                    for (b, &vb) in cb.iter().enumerate() {
                        f[ra + pos[vb]] += upd[a * tc + b];
                    }
                }
            }

            let mut l21 = Vec::with_capacity(t * s);
            if symmetric {
                for i in s..nf {
                    l21.extend_from_slice(&f[i * nf..i * nf + s]);
                }
            }

            let pivots = partial_factor(&mut f, s, nf).map_err(|k| Error::SingularMatrix {
                column: fronts[id].elim[k],
            })?;

            let top = if symmetric {
                (0..s)
                    .flat_map(|i| f[i * nf..i * nf + s].iter().copied())
                    .collect()
            } else {
                f[..s * nf].to_vec()
            };
            let mut upd = Vec::with_capacity(t * t);
            for i in s..nf {
                if !symmetric {
                    l21.extend_from_slice(&f[i * nf..i * nf + s]);
                }
                upd.extend_from_slice(&f[i * nf + s..(i + 1) * nf]);
            }
            updates[id] = Some(upd);
            let front = &mut fronts[id];
            front.top = top;
            front.l21 = l21;
            front.pivots = pivots;
            front.children = Vec::new();
        }

        Ok(Self {
            n,
            symmetric,
            fronts,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn factor_entries(&self) -> usize {
        self.fronts.iter().map(|f| f.top.len() + f.l21.len()).sum()
    }

    pub fn solve(&self, rhs: &[C64]) -> Result<Vec<C64>> {
        if rhs.len() != self.n {
            return Err(Error::invalid(format!(
                "rhs has {} entries, system has {}",
                rhs.len(),
                self.n
            )));
        }
        let mut w = rhs.to_vec();
        let mut z = Vec::new();

        for fr in &self.fronts {
            let s = fr.elim.len();
            let ld = if self.symmetric {
                s
            } else {
                s + fr.border.len()
            };
            z.clear();
            z.extend(fr.elim.iter().map(|&v| w[v]));
            lower_solve(&fr.top, ld, &fr.pivots, &mut z);
            if self.symmetric {
                upper_solve(&fr.top, ld, &mut z, &[]);
            }
            for (a, &v) in fr.elim.iter().enumerate() {
                w[v] = z[a];
            }
            for (b, &v) in fr.border.iter().enumerate() {
                let row = &fr.l21[b * s..(b + 1) * s];
                let acc: C64 = row.iter().zip(&z).map(|(a, c)| a * c).sum();
                w[v] -= acc;
            }
        }

        let mut xb = Vec::new();
        let mut corr = Vec::new();
        for fr in self.fronts.iter().rev() {
            let s = fr.elim.len();
            z.clear();
            z.extend(fr.elim.iter().map(|&v| w[v]));
            xb.clear();
            xb.extend(fr.border.iter().map(|&v| w[v]));
            if self.symmetric {
                // x_E = y_E - F11⁻¹ F21ᵀ x_B
                corr.clear();
                corr.resize(s, ZERO);
                for (b, x) in xb.iter().enumerate() {
                    if *x != ZERO {
                        crate::linalg::axpy(*x, &fr.l21[b * s..(b + 1) * s], &mut corr);
                    }
                }
                lower_solve(&fr.top, s, &fr.pivots, &mut corr);
                upper_solve(&fr.top, s, &mut corr, &[]);
                for (zi, ci) in z.iter_mut().zip(&corr) {
                    *zi -= ci;
                }
            } else {
                upper_solve(&fr.top, s + xb.len(), &mut z, &xb);
            }
            for (a, &v) in fr.elim.iter().enumerate() {
                w[v] = z[a];
            }
        }
        Ok(w)
    }
}

/// `z ← L11⁻¹ P z` on the row-major factor block with leading dimension `ld`.
fn lower_solve(top: &[C64], ld: usize, pivots: &[usize], z: &mut [C64]) {
    for (k, &p) in pivots.iter().enumerate() {
        z.swap(k, p);
    }
    for i in 1..z.len() {
        let row = &top[i * ld..i * ld + i];
        let acc: C64 = row.iter().zip(&z[..i]).map(|(a, b)| a * b).sum();
        z[i] -= acc;
    }
}

/// `z ← U11⁻¹ (z - U12 xb)`; `xb` is empty when there is no `U12` block.
fn upper_solve(top: &[C64], ld: usize, z: &mut [C64], xb: &[C64]) {
    let s = z.len();
    for i in (0..s).rev() {
        let row = &top[i * ld..(i + 1) * ld];
        let mut acc = z[i];
        for j in i + 1..s {
            acc -= row[j] * z[j];
        }
        for (u, x) in row[s..s + xb.len()].iter().zip(xb) {
            acc -= u * x;
        }
        z[i] = acc / row[i];
    }
}

/// Eliminates the first `s` variables of the dense `nf × nf` front `f`,
/// leaving the Schur complement in the trailing block. Returns the pivot
/// rows, or the failing column on an exactly zero pivot.
fn partial_factor(f: &mut [C64], s: usize, nf: usize) -> std::result::Result<Vec<usize>, usize> {
    let mut pivots = Vec::with_capacity(s);
    for k in 0..s {
        let mut p = k;
        let mut best = -1.0;
        for i in k..s {
            let a = f[i * nf + k].norm();
            if a > best {
                best = a;
                p = i;
            }
        }
        if f[p * nf + k] == ZERO {
            return Err(k);
        }
        pivots.push(p);
        if p != k {
            let (head, tail) = f.split_at_mut(p * nf);
            head[k * nf..(k + 1) * nf].swap_with_slice(&mut tail[..nf]);
        }
        let inv = C64::new(1.0, 0.0) / f[k * nf + k];
        let (head, tail) = f.split_at_mut((k + 1) * nf);
        let pivot_row = &head[k * nf..];
        for i in 0..s - k - 1 {
            let row = &mut tail[i * nf..(i + 1) * nf];
            let l = row[k] * inv;
            row[k] = l;
            if l != ZERO {
                row_update(&mut row[k + 1..], l, &pivot_row[k + 1..]);
            }
        }
    }

    // border rows: L21 and the Schur complement, one row at a time
    let (head, tail) = f.split_at_mut(s * nf);
    for row in tail.chunks_exact_mut(nf) {
        for k in 0..s {
            let pivot_row = &head[k * nf..(k + 1) * nf];
            let l = row[k] / pivot_row[k];
            row[k] = l;
            if l != ZERO {
                row_update(&mut row[k + 1..], l, &pivot_row[k + 1..]);
            }
        }
    }
    Ok(pivots)
}
