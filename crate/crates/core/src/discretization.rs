//! Second-order finite differences for the stretched Helmholtz operator.
//!
//! Rows are assembled in flux form with face-sampled coefficients and scaled
//! by `J`, i.e. row `p` holds
//!
//! ```text
//! (a11[i+½](u[i+1]-u[i]) - a11[i-½](u[i]-u[i-1]))/hx²
//!   + (a22[j+½](u[j+1]-u[j]) - a22[j-½](u[j]-u[j-1]))/hy²  +  J k² u
//! ```
//!
//! which is `J·L(u)` with `L(u) = J⁻¹ ∇·(A∇u) + k²u`. The row scaling makes
//! the matrix complex symmetric; the right-hand side is scaled the same way
//! (see [`SparseOperator::scale_source`]), which is the identity wherever
//! `J = 1`.

use crate::error::{Error, Result};
use crate::grid::{build_stretch_field, ComplexField, Grid2D, PmlParams, StretchField};
use crate::C64;

/// Row-compressed complex matrix of a 5-point operator on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    grid: Grid2D,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
    /// Per-node `J`, used to scale sources into the symmetric form.
    jacobian: Vec<C64>,
}

pub fn assemble(grid: &Grid2D, stretch: &StretchField, k_field: &[f64]) -> Result<SparseOperator> {
    if stretch.grid() != grid {
        return Err(Error::invalid(
            "stretch field was built for a different grid",
        ));
    }
    grid.check_len(k_field.len(), "wavenumber field")?;
    if let Some(p) = k_field.iter().position(|k| !k.is_finite()) {
        return Err(Error::invalid(format!("non-finite wavenumber at node {p}")));
    }

    let (nx, ny) = (grid.nx(), grid.ny());
    let ihx2 = 1.0 / (grid.hx() * grid.hx());
    let ihy2 = 1.0 / (grid.hy() * grid.hy());
    let n = grid.len();

    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(5 * n);
    let mut vals = Vec::with_capacity(5 * n);
    let mut jacobian = Vec::with_capacity(n);
    row_ptr.push(0);

    for iy in 0..ny {
        for ix in 0..nx {
            let p = grid.index(ix, iy);
            let west = stretch.a11_face(ix, iy) * ihx2;
            let east = stretch.a11_face(ix + 1, iy) * ihx2;
            let south = stretch.a22_face(ix, iy) * ihy2;
            let north = stretch.a22_face(ix, iy + 1) * ihy2;
            let jac = stretch.jacobian(ix, iy);
            let k = k_field[p];
            let center = jac * (k * k) - west - east - south - north;

            // columns in increasing order
            if iy > 0 {
                cols.push(p - nx);
                vals.push(south);
            }
            if ix > 0 {
                cols.push(p - 1);
                vals.push(west);
            }
            cols.push(p);
            vals.push(center);
            if ix + 1 < nx {
                cols.push(p + 1);
                vals.push(east);
            }
            if iy + 1 < ny {
                cols.push(p + nx);
                vals.push(north);
            }
            row_ptr.push(cols.len());
            jacobian.push(jac);
        }
    }

    Ok(SparseOperator {
        grid: *grid,
        row_ptr,
        cols,
        vals,
        jacobian,
    })
}

/// Builds the stretch field for a grid whose undamped zone is
/// `zone_x × zone_y` and assembles the operator for velocity `c` at
/// angular frequency `omega` (so `k = omega / c`).
pub fn helmholtz_operator(
    grid: &Grid2D,
    zone_x: (f64, f64),
    zone_y: (f64, f64),
    pml: &PmlParams,
    omega: f64,
    velocity: &[f64],
) -> Result<SparseOperator> {
    grid.check_len(velocity.len(), "velocity field")?;
    if let Some(p) = velocity.iter().position(|c| !(c.is_finite() && *c > 0.0)) {
        return Err(Error::InvalidData(format!(
            "velocity at node {p} is not positive"
        )));
    }
    let px = pml.profile(zone_x.0, zone_x.1, grid.n_pml() as f64 * grid.hx())?;
    let py = pml.profile(zone_y.0, zone_y.1, grid.n_pml() as f64 * grid.hy())?;
    let stretch = build_stretch_field(grid, &px, &py, omega)?;
    let k: Vec<f64> = velocity.iter().map(|c| omega / c).collect();
    assemble(grid, &stretch, &k)
}

/// Operator on the whole truncated domain of `grid`.
pub fn global_operator(
    grid: &Grid2D,
    pml: &PmlParams,
    omega: f64,
    velocity: &[f64],
) -> Result<SparseOperator> {
    let d = grid.domain();
    helmholtz_operator(grid, (-d.l_x, d.l_x), (-d.l_y, d.l_y), pml, omega, velocity)
}

/// `L·u` in the symmetric (J-scaled) form.
pub fn apply(op: &SparseOperator, u: &ComplexField) -> Result<ComplexField> {
    op.check_grid(u.grid())?;
    let mut out = ComplexField::zeros(op.grid);
    op.matvec(u.values(), out.values_mut());
    Ok(out)
}

/// `f - L·u`.
pub fn residual(op: &SparseOperator, f: &ComplexField, u: &ComplexField) -> Result<ComplexField> {
    op.check_grid(f.grid())?;
    let mut r = apply(op, u)?;
    for (ri, fi) in r.values_mut().iter_mut().zip(f.values()) {
        *ri = *fi - *ri;
    }
    Ok(r)
}

impl SparseOperator {
    /// Builds an operator from `(row, col, value)` triplets. Duplicates are
    /// summed and explicit zeros dropped.
    pub fn from_triplets(grid: &Grid2D, triplets: &[(usize, usize, C64)]) -> Result<Self> {
        let n = grid.len();
        let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); n];
        for &(r, c, v) in triplets {
            if r >= n || c >= n {
                return Err(Error::invalid(format!(
                    "triplet ({r}, {c}) outside a {n}x{n} matrix"
                )));
            }
            rows[r].push((c, v));
        }
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut merged: Vec<(usize, C64)> = Vec::with_capacity(row.len());
            for (c, v) in row {
                match merged.last_mut() {
                    Some(last) if last.0 == c => last.1 += v,
                    _ => merged.push((c, v)),
                }
            }
            for (c, v) in merged.into_iter().filter(|e| e.1 != C64::new(0.0, 0.0)) {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Ok(Self {
            grid: *grid,
            row_ptr,
            cols,
            vals,
            jacobian: vec![C64::new(1.0, 0.0); n],
        })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Column indices and values of row `p`, columns ascending.
    pub fn row(&self, p: usize) -> (&[usize], &[C64]) {
        let (a, b) = (self.row_ptr[p], self.row_ptr[p + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    pub fn get(&self, p: usize, q: usize) -> C64 {
        let (cols, vals) = self.row(p);
        match cols.binary_search(&q) {
            Ok(k) => vals[k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    /// Iterates over stored `(row, col, value)` entries.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim()).flat_map(move |p| {
            let (cols, vals) = self.row(p);
            cols.iter().zip(vals).map(move |(&q, &v)| (p, q, v))
        })
    }

    /// `y = A x` on raw slices.
    pub fn matvec(&self, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.dim());
        debug_assert_eq!(y.len(), self.dim());
        for (p, yp) in y.iter_mut().enumerate() {
            let (a, b) = (self.row_ptr[p], self.row_ptr[p + 1]);
            let mut acc = C64::new(0.0, 0.0);
            for k in a..b {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *yp = acc;
        }
    }

    /// Adds `d[p]` to every diagonal entry `(p, p)`.
    pub fn add_diagonal(&mut self, d: &[C64]) -> Result<()> {
        self.grid.check_len(d.len(), "diagonal shift")?;
        for (p, &dp) in d.iter().enumerate() {
            let (a, b) = (self.row_ptr[p], self.row_ptr[p + 1]);
            match self.cols[a..b].binary_search(&p) {
                Ok(k) => self.vals[a + k] += dp,
                Err(_) if dp == C64::new(0.0, 0.0) => {}
                Err(_) => {
                    return Err(Error::invalid(format!("row {p} has no stored diagonal")));
                }
            }
        }
        Ok(())
    }

    /// Per-node `J` the rows were scaled with.
    pub fn jacobian(&self) -> &[C64] {
        &self.jacobian
    }

    /// Maps a source `f` of `L u = f` to the right-hand side of the
    /// assembled symmetric system, `J f`.
    pub fn scale_source(&self, f: &ComplexField) -> Result<ComplexField> {
        self.check_grid(f.grid())?;
        let mut out = f.clone();
        for (v, j) in out.values_mut().iter_mut().zip(&self.jacobian) {
            *v *= *j;
        }
        Ok(out)
    }

    /// Largest `|A[p,q] - A[q,p]|` over stored entries.
    pub fn max_asymmetry(&self) -> f64 {
        self.entries()
            .map(|(p, q, v)| (v - self.get(q, p)).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    fn check_grid(&self, grid: &Grid2D) -> Result<()> {
        if *grid != self.grid {
            return Err(Error::invalid("field grid does not match operator grid"));
        }
        Ok(())
    }
}
