//! Banded LU with partial pivoting.
//!
//! Storage follows the LAPACK `gbtrf` layout: column `j` keeps rows
//! `j-2b ..= j+b`, where the top `b` slots absorb the fill created by row
//! interchanges.

use crate::discretization::SparseOperator;
use crate::error::{Error, Result};
use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Square complex matrix with `|p - q| <= bandwidth` for all nonzeros, in
/// band storage. `order[k]` is the original index of band row/column `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix {
    n: usize,
    b: usize,
    ld: usize,
    data: Vec<C64>,
    order: Vec<usize>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        let ld = 3 * bandwidth + 1;
        Self {
            n,
            b: bandwidth,
            ld,
            data: vec![ZERO; ld * n],
            order: (0..n).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.b
    }

    /// Original index of band position `k`.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        // row i of column j sits at offset 2b + i - j
        j * self.ld + 2 * self.b + i - j
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        i.abs_diff(j) <= self.b
    }

    /// Entry at band position `(i, j)`.
    pub fn get(&self, i: usize, j: usize) -> C64 {
        if i < self.n && j < self.n && self.in_band(i, j) {
            self.data[self.slot(i, j)]
        } else {
            ZERO
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: C64) -> Result<()> {
        if i >= self.n || j >= self.n || !self.in_band(i, j) {
            return Err(Error::invalid(format!(
                "entry ({i}, {j}) outside bandwidth {} of a {}x{} band matrix",
                self.b, self.n, self.n
            )));
        }
        let s = self.slot(i, j);
        self.data[s] = v;
        Ok(())
    }

    /// `y = A x` in band ordering.
    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; self.n];
        for j in 0..self.n {
            let lo = j.saturating_sub(self.b);
            let hi = (j + self.b).min(self.n - 1);
            for (i, yi) in y.iter_mut().enumerate().take(hi + 1).skip(lo) {
                *yi += self.data[self.slot(i, j)] * x[j];
            }
        }
        y
    }

    /// Dense copy in the original (unpermuted) indexing.
    pub fn expand(&self) -> Vec<Vec<C64>> {
        let mut dense = vec![vec![ZERO; self.n]; self.n];
        for j in 0..self.n {
            let lo = j.saturating_sub(self.b);
            let hi = (j + self.b).min(self.n - 1);
            for i in lo..=hi {
                dense[self.order[i]][self.order[j]] = self.get(i, j);
            }
        }
        dense
    }
}

/// Reorders a grid operator into band form, numbering nodes along the
/// shorter grid dimension first so the bandwidth is `min(nx, ny)`.
pub fn to_banded(op: &SparseOperator) -> BandedMatrix {
    let g = op.grid();
    let (nx, ny) = (g.nx(), g.ny());
    // position of node p = iy*nx + ix in band order
    let position = |p: usize| -> usize {
        if nx <= ny {
            p
        } else {
            let (ix, iy) = (p % nx, p / nx);
            ix * ny + iy
        }
    };
    let n = op.dim();
    let b = op
        .entries()
        .map(|(p, q, _)| position(p).abs_diff(position(q)))
        .max()
        .unwrap_or(0);
    let mut m = BandedMatrix::zeros(n, b);
    for p in 0..n {
        m.order[position(p)] = p;
    }
    for (p, q, v) in op.entries() {
        let s = m.slot(position(p), position(q));
        m.data[s] = v;
    }
    m
}

/// In-place LU factors with the row interchanges applied during elimination.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedFactorization {
    lu: BandedMatrix,
    pivots: Vec<usize>,
}

impl BandedFactorization {
    pub fn dim(&self) -> usize {
        self.lu.n
    }

    pub fn factor_entries(&self) -> usize {
        self.lu.data.len()
    }
}

pub fn factor(m: &BandedMatrix) -> Result<BandedFactorization> {
    let mut lu = m.clone();
    let n = lu.n;
    let b = lu.b;
    let kv = 2 * b;
    let ld = lu.ld;
    let mut pivots = vec![0; n];
    // last column touched by a pivot row so far
    let mut ju = 0usize;

    for j in 0..n {
        let km = b.min(n - 1 - j);
        let col = j * ld + kv;
        let mut jp = 0;
        let mut best = -1.0;
        for r in 0..=km {
            let a = lu.data[col + r].norm();
            if a > best {
                best = a;
                jp = r;
            }
        }
        pivots[j] = j + jp;
        if lu.data[col + jp] == ZERO {
            return Err(Error::SingularMatrix {
                column: lu.order[j],
            });
        }
        ju = ju.max((j + b + jp).min(n - 1));

        if jp != 0 {
            for c in j..=ju {
                let base = c * ld + kv - c;
                lu.data.swap(base + j, base + j + jp);
            }
        }
        if km > 0 {
            let inv = C64::new(1.0, 0.0) / lu.data[col];
            for r in 1..=km {
                lu.data[col + r] *= inv;
            }
            for c in j + 1..=ju {
                let base = c * ld + kv - c;
                let u = lu.data[base + j];
                if u == ZERO {
                    continue;
                }
                for r in 1..=km {
                    let l = lu.data[col + r];
                    lu.data[base + j + r] -= l * u;
                }
            }
        }
    }
    Ok(BandedFactorization { lu, pivots })
}

/// Solves `A x = rhs` with `rhs` and `x` in the original indexing.
pub fn solve(f: &BandedFactorization, rhs: &[C64]) -> Result<Vec<C64>> {
    let lu = &f.lu;
    let n = lu.n;
    if rhs.len() != n {
        return Err(Error::invalid(format!(
            "rhs has {} entries, system has {n}",
            rhs.len()
        )));
    }
    let b = lu.b;
    let kv = 2 * b;
    let ld = lu.ld;
    let mut x: Vec<C64> = lu.order.iter().map(|&p| rhs[p]).collect();

    for j in 0..n {
        x.swap(j, f.pivots[j]);
        let km = b.min(n - 1 - j);
        let xj = x[j];
        if xj != ZERO {
            let col = j * ld + kv;
            for r in 1..=km {
                x[j + r] -= lu.data[col + r] * xj;
            }
        }
    }
    for j in (0..n).rev() {
        let col = j * ld + kv;
        x[j] /= lu.data[col];
        let xj = x[j];
        if xj != ZERO {
            let top = j.saturating_sub(kv);
            for i in top..j {
                x[i] -= lu.data[col + i - j] * xj;
            }
        }
    }

    let mut out = vec![ZERO; n];
    for (k, &p) in lu.order.iter().enumerate() {
        out[p] = x[k];
    }
    Ok(out)
}
