//! Uniform grids, complex grid fields and the uniaxial PML stretching.
//!
//! The PML is produced by complex coordinate stretching along each axis
//! separately. Along axis `j` the stretch factor is `α_j(t) = 1 + i σ_j(t) / ω`,
//! and the stretched operator `J⁻¹ ∇·(A ∇u)` uses
//! `A = diag(α₂/α₁, α₁/α₂)` and `J = α₁ α₂`.

use crate::error::{Error, Result};
use crate::C64;

/// Relative slack allowed when a node coordinate lands a rounding error
/// outside a profile's range.
const COORD_SLACK: f64 = 1e-9;

/// Physical description of the truncated computational domain.
///
/// The interior region is `[-l_x, l_x] × [-l_y, l_y]`; the PML collar of
/// thickness `l_pml` surrounds it, and `lo` is the extra overlap length used
/// by the domain decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainSpec {
    pub l_x: f64,
    pub l_y: f64,
    pub l_pml: f64,
    pub lo: f64,
}

impl DomainSpec {
    pub fn new(l_x: f64, l_y: f64, l_pml: f64, lo: f64) -> Result<Self> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(l_x) || !ok(l_y) || !ok(l_pml) {
            return Err(Error::invalid(format!(
                "domain lengths must be positive (l_x={l_x}, l_y={l_y}, l_pml={l_pml})"
            )));
        }
        if !(lo.is_finite() && lo >= 0.0) {
            return Err(Error::invalid(format!(
                "overlap length must be >= 0, got {lo}"
            )));
        }
        Ok(Self {
            l_x,
            l_y,
            l_pml,
            lo,
        })
    }

    /// `[x_min, x_max]` of the whole truncated domain, PML included.
    pub fn x_extent(&self) -> (f64, f64) {
        (-self.l_x - self.l_pml, self.l_x + self.l_pml)
    }

    pub fn y_extent(&self) -> (f64, f64) {
        (-self.l_y - self.l_pml, self.l_y + self.l_pml)
    }
}

/// A uniform tensor-product grid. Node `(ix, iy)` sits at
/// `(x0 + ix·hx, y0 + iy·hy)`; fields are stored row-major over `(y, x)`.
///
/// Unknowns live on every node. The homogeneous Dirichlet closure sits one
/// spacing beyond the outermost nodes, so stencils are simply truncated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
    x0: f64,
    y0: f64,
    n_pml: usize,
}

impl Grid2D {
    pub fn new(
        nx: usize,
        ny: usize,
        hx: f64,
        hy: f64,
        origin: (f64, f64),
        n_pml: usize,
    ) -> Result<Self> {
        if !(hx.is_finite() && hx > 0.0 && hy.is_finite() && hy > 0.0) {
            return Err(Error::invalid(format!(
                "grid spacings must be positive (hx={hx}, hy={hy})"
            )));
        }
        if n_pml < 1 || 2 * n_pml >= nx || 2 * n_pml >= ny {
            return Err(Error::invalid(format!(
                "PML width {n_pml} does not fit a {nx}x{ny} grid"
            )));
        }
        Ok(Self {
            nx,
            ny,
            hx,
            hy,
            x0: origin.0,
            y0: origin.1,
            n_pml,
        })
    }

    /// Grid covering the whole truncated domain with `cells_x × cells_y`
    /// interior cells. The PML thickness must be a whole number of cells in
    /// both directions.
    pub fn for_domain(domain: &DomainSpec, cells_x: usize, cells_y: usize) -> Result<Self> {
        if cells_x == 0 || cells_y == 0 {
            return Err(Error::invalid("interior cell counts must be positive"));
        }
        let hx = 2.0 * domain.l_x / cells_x as f64;
        let hy = 2.0 * domain.l_y / cells_y as f64;
        let n_pml = whole_cells(domain.l_pml, hx).ok_or_else(|| {
            Error::invalid(format!(
                "l_pml={} is not a whole number of x cells",
                domain.l_pml
            ))
        })?;
        if whole_cells(domain.l_pml, hy) != Some(n_pml) {
            return Err(Error::invalid(format!(
                "l_pml={} does not span {n_pml} cells in y (hy={hy})",
                domain.l_pml
            )));
        }
        let (xmin, _) = domain.x_extent();
        let (ymin, _) = domain.y_extent();
        Self::new(
            cells_x + 2 * n_pml + 1,
            cells_y + 2 * n_pml + 1,
            hx,
            hy,
            (xmin, ymin),
            n_pml,
        )
    }

    /// Grid for an interior box of `cells_x × cells_y` cells of size `h`
    /// centred on the origin, surrounded by `n_pml` PML cells.
    pub fn centered(cells_x: usize, cells_y: usize, h: f64, n_pml: usize) -> Result<Self> {
        let lx = 0.5 * cells_x as f64 * h;
        let ly = 0.5 * cells_y as f64 * h;
        let lp = n_pml as f64 * h;
        Self::new(
            cells_x + 2 * n_pml + 1,
            cells_y + 2 * n_pml + 1,
            h,
            h,
            (-lx - lp, -ly - lp),
            n_pml,
        )
    }

    /// The domain this grid discretizes (with zero overlap).
    pub fn domain(&self) -> DomainSpec {
        let cx = (self.nx - 1 - 2 * self.n_pml) as f64;
        let cy = (self.ny - 1 - 2 * self.n_pml) as f64;
        DomainSpec {
            l_x: 0.5 * cx * self.hx,
            l_y: 0.5 * cy * self.hy,
            l_pml: self.n_pml as f64 * self.hx,
            lo: 0.0,
        }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn hx(&self) -> f64 {
        self.hx
    }

    pub fn hy(&self) -> f64 {
        self.hy
    }

    pub fn origin(&self) -> (f64, f64) {
        (self.x0, self.y0)
    }

    pub fn n_pml(&self) -> usize {
        self.n_pml
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    #[inline]
    pub fn x(&self, ix: usize) -> f64 {
        self.x0 + ix as f64 * self.hx
    }

    #[inline]
    pub fn y(&self, iy: usize) -> f64 {
        self.y0 + iy as f64 * self.hy
    }

    /// Coordinates of the last node in each direction.
    pub fn far_corner(&self) -> (f64, f64) {
        (self.x(self.nx - 1), self.y(self.ny - 1))
    }

    pub(crate) fn check_len(&self, len: usize, what: &str) -> Result<()> {
        if len != self.len() {
            return Err(Error::invalid(format!(
                "{what} has {len} entries, grid {}x{} needs {}",
                self.nx,
                self.ny,
                self.len()
            )));
        }
        Ok(())
    }
}

fn whole_cells(length: f64, h: f64) -> Option<usize> {
    let n = (length / h).round();
    if n >= 1.0 && (n * h - length).abs() <= 1e-9 * length.max(h) {
        Some(n as usize)
    } else {
        None
    }
}

/// A complex grid function (wavefield, source or residual).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: Grid2D,
    values: Vec<C64>,
}

impl ComplexField {
    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            values: vec![C64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_values(grid: Grid2D, values: Vec<C64>) -> Result<Self> {
        grid.check_len(values.len(), "field")?;
        if let Some(p) = values
            .iter()
            .position(|v| !(v.re.is_finite() && v.im.is_finite()))
        {
            return Err(Error::InvalidData(format!(
                "non-finite field value at node {p}"
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn get(&self, ix: usize, iy: usize) -> C64 {
        self.values[self.grid.index(ix, iy)]
    }

    pub fn norm(&self) -> f64 {
        crate::linalg::norm(&self.values)
    }
}

/// Damping profile `σ(t)`: zero on `[lower, upper]`, ramping as
/// `sigma0 · (d / l_pml)^power` at distance `d` outside that interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaProfile {
    lower: f64,
    upper: f64,
    l_pml: f64,
    sigma0: f64,
    power: u32,
}

/// Profile symmetric about the origin with `σ = 0` for `|t| ≤ l_interior`.
pub fn build_sigma_profile(
    l_interior: f64,
    l_pml: f64,
    sigma0: f64,
    power: u32,
) -> Result<SigmaProfile> {
    if !(l_interior.is_finite() && l_interior > 0.0) {
        return Err(Error::invalid(format!(
            "l_interior must be positive, got {l_interior}"
        )));
    }
    SigmaProfile::with_bounds(-l_interior, l_interior, l_pml, sigma0, power)
}

impl SigmaProfile {
    /// Profile whose undamped zone is `[lower, upper]`, e.g. a subdomain's
    /// interior plus overlap.
    pub fn with_bounds(
        lower: f64,
        upper: f64,
        l_pml: f64,
        sigma0: f64,
        power: u32,
    ) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && upper > lower) {
            return Err(Error::invalid(format!(
                "empty undamped zone [{lower}, {upper}]"
            )));
        }
        if !(l_pml.is_finite() && l_pml > 0.0) {
            return Err(Error::invalid(format!(
                "l_pml must be positive, got {l_pml}"
            )));
        }
        if !(sigma0.is_finite() && sigma0 > 0.0) {
            return Err(Error::invalid(format!(
                "sigma0 must be positive, got {sigma0}"
            )));
        }
        if power < 1 {
            return Err(Error::invalid("ramp power must be >= 1"));
        }
        Ok(Self {
            lower,
            upper,
            l_pml,
            sigma0,
            power,
        })
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    pub fn l_pml(&self) -> f64 {
        self.l_pml
    }

    /// The range on which the profile is defined.
    pub fn range(&self) -> (f64, f64) {
        (self.lower - self.l_pml, self.upper + self.l_pml)
    }

    pub fn covers(&self, a: f64, b: f64) -> bool {
        let (lo, hi) = self.range();
        let slack = COORD_SLACK * (hi - lo);
        a >= lo - slack && b <= hi + slack
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if !self.covers(t, t) {
            let (lo, hi) = self.range();
            return Err(Error::invalid(format!(
                "σ evaluated at {t}, outside [{lo}, {hi}]"
            )));
        }
        Ok(self.eval_clamped(t))
    }

    /// Evaluates at `t` clamped into the profile's range. Used for ghost
    /// faces half a spacing beyond the last node.
    pub(crate) fn eval_clamped(&self, t: f64) -> f64 {
        let d = if t < self.lower {
            self.lower - t
        } else if t > self.upper {
            t - self.upper
        } else {
            return 0.0;
        };
        let s = (d / self.l_pml).min(1.0);
        self.sigma0 * s.powi(self.power as i32)
    }
}

/// `α = 1 + i σ / ω`.
pub fn stretch_coefficient(sigma: f64, omega: f64) -> Result<C64> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::invalid(format!(
            "angular frequency must be positive, got {omega}"
        )));
    }
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::invalid(format!(
            "σ must be non-negative, got {sigma}"
        )));
    }
    Ok(C64::new(1.0, sigma / omega))
}

/// Peak damping `C · c_max / l_pml`.
pub fn default_sigma0(factor: f64, c_max: f64, l_pml: f64) -> f64 {
    factor * c_max / l_pml
}

/// Damping parameters shared by the global PML and every subdomain PML.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmlParams {
    pub sigma0: f64,
    pub power: u32,
}

impl PmlParams {
    pub fn profile(&self, lower: f64, upper: f64, l_pml: f64) -> Result<SigmaProfile> {
        SigmaProfile::with_bounds(lower, upper, l_pml, self.sigma0, self.power)
    }
}

/// Complex stretching coefficients of a grid.
///
/// The tensor-product structure of the uniaxial PML is kept: only the 1D
/// stretch factors along each axis are stored (at nodes and at cell faces),
/// and the per-node `a11 = α₂/α₁`, `a22 = α₁/α₂`, `jinv = 1/(α₁α₂)` are
/// formed on demand. Face `f` along x lies between nodes `f-1` and `f`, so
/// faces `0` and `nx` are the ghost faces next to the Dirichlet closure.
#[derive(Debug, Clone, PartialEq)]
pub struct StretchField {
    grid: Grid2D,
    alpha_x: Vec<C64>,
    alpha_y: Vec<C64>,
    alpha_x_face: Vec<C64>,
    alpha_y_face: Vec<C64>,
}

pub fn build_stretch_field(
    grid: &Grid2D,
    profile_x: &SigmaProfile,
    profile_y: &SigmaProfile,
    omega: f64,
) -> Result<StretchField> {
    let (x0, y0) = grid.origin();
    let (x1, y1) = grid.far_corner();
    if !profile_x.covers(x0, x1) || !profile_y.covers(y0, y1) {
        return Err(Error::invalid(format!(
            "PML profiles cover {:?} x {:?}, grid spans [{x0}, {x1}] x [{y0}, {y1}]",
            profile_x.range(),
            profile_y.range()
        )));
    }
    let alpha = |p: &SigmaProfile, t: f64| stretch_coefficient(p.eval_clamped(t), omega);

    let alpha_x = (0..grid.nx())
        .map(|i| alpha(profile_x, grid.x(i)))
        .collect::<Result<_>>()?;
    let alpha_y = (0..grid.ny())
        .map(|j| alpha(profile_y, grid.y(j)))
        .collect::<Result<_>>()?;
    let alpha_x_face = (0..=grid.nx())
        .map(|f| alpha(profile_x, x0 + (f as f64 - 0.5) * grid.hx()))
        .collect::<Result<_>>()?;
    let alpha_y_face = (0..=grid.ny())
        .map(|f| alpha(profile_y, y0 + (f as f64 - 0.5) * grid.hy()))
        .collect::<Result<_>>()?;

    Ok(StretchField {
        grid: *grid,
        alpha_x,
        alpha_y,
        alpha_x_face,
        alpha_y_face,
    })
}

impl StretchField {
    /// `A = I`, `J = 1` everywhere.
    pub fn identity(grid: &Grid2D) -> Self {
        let one = C64::new(1.0, 0.0);
        Self {
            grid: *grid,
            alpha_x: vec![one; grid.nx()],
            alpha_y: vec![one; grid.ny()],
            alpha_x_face: vec![one; grid.nx() + 1],
            alpha_y_face: vec![one; grid.ny() + 1],
        }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn alpha_x(&self, ix: usize) -> C64 {
        self.alpha_x[ix]
    }

    pub fn alpha_y(&self, iy: usize) -> C64 {
        self.alpha_y[iy]
    }

    pub fn a11(&self, ix: usize, iy: usize) -> C64 {
        self.alpha_y[iy] / self.alpha_x[ix]
    }

    pub fn a22(&self, ix: usize, iy: usize) -> C64 {
        self.alpha_x[ix] / self.alpha_y[iy]
    }

    pub fn jinv(&self, ix: usize, iy: usize) -> C64 {
        C64::new(1.0, 0.0) / self.jacobian(ix, iy)
    }

    /// `J = α₁ α₂`.
    pub fn jacobian(&self, ix: usize, iy: usize) -> C64 {
        self.alpha_x[ix] * self.alpha_y[iy]
    }

    /// `a11` on x-face `face` (between nodes `face-1` and `face`) of row `iy`.
    pub fn a11_face(&self, face: usize, iy: usize) -> C64 {
        self.alpha_y[iy] / self.alpha_x_face[face]
    }

    /// `a22` on y-face `face` (between rows `face-1` and `face`) of column `ix`.
    pub fn a22_face(&self, ix: usize, face: usize) -> C64 {
        self.alpha_x[ix] / self.alpha_y_face[face]
    }

    pub fn is_identity_at(&self, ix: usize, iy: usize) -> bool {
        self.alpha_x[ix].im == 0.0 && self.alpha_y[iy].im == 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol * (1.0 + b.norm())
    }

    fn profile() -> SigmaProfile {
        build_sigma_profile(0.5, 0.15, 20.0, 2).unwrap()
    }

    #[test]
    fn sigma_vanishes_inside() {
        assert_eq!(profile().eval(0.25).unwrap(), 0.0);
        assert_eq!(profile().eval(-0.5).unwrap(), 0.0);
    }

    #[test]
    fn sigma_ramp_values() {
        let p = profile();
        assert!((p.eval(0.65).unwrap() - 20.0).abs() < 1e-12);
        assert!((p.eval(0.5 + 0.075).unwrap() - 5.0).abs() < 1e-12);
        assert_eq!(p.eval(0.6).unwrap(), p.eval(-0.6).unwrap());
    }

    #[test]
    fn sigma_outside_range_is_error() {
        assert!(profile().eval(0.7).is_err());
        assert!(build_sigma_profile(0.0, 0.1, 1.0, 2).is_err());
        assert!(build_sigma_profile(0.5, -0.1, 1.0, 2).is_err());
        assert!(build_sigma_profile(0.5, 0.1, 0.0, 2).is_err());
        assert!(build_sigma_profile(0.5, 0.1, 1.0, 0).is_err());
    }

    #[test]
    fn stretch_coefficient_values() {
        let w = 3.0;
        assert_eq!(stretch_coefficient(0.0, w).unwrap(), C64::new(1.0, 0.0));
        assert_eq!(stretch_coefficient(w, w).unwrap(), C64::new(1.0, 1.0));
        assert_eq!(stretch_coefficient(2.0 * w, w).unwrap(), C64::new(1.0, 2.0));
        assert!(stretch_coefficient(1.0, 0.0).is_err());
        assert!(stretch_coefficient(1.0, -2.0).is_err());
    }

    #[test]
    fn grid_for_domain_counts() {
        let d = DomainSpec::new(0.5, 0.5, 0.15, 0.0).unwrap();
        let g = Grid2D::for_domain(&d, 100, 100).unwrap();
        assert_eq!(g.nx(), 131);
        assert_eq!(g.n_pml(), 15);
        let span = g.far_corner().0 - g.origin().0;
        assert!((g.hx() - span / (g.nx() - 1) as f64).abs() < 1e-15);
        assert!(Grid2D::for_domain(&d, 99, 100).is_err());
    }

    #[test]
    fn identity_stretch_without_damping() {
        let d = DomainSpec::new(0.5, 0.5, 0.1, 0.0).unwrap();
        let g = Grid2D::for_domain(&d, 20, 20).unwrap();
        let s = StretchField::identity(&g);
        for iy in 0..g.ny() {
            for ix in 0..g.nx() {
                assert_eq!(s.a11(ix, iy), C64::new(1.0, 0.0));
                assert_eq!(s.jinv(ix, iy), C64::new(1.0, 0.0));
            }
        }
    }

    #[test]
    fn stretch_node_arithmetic() {
        // one node with α₁ = 1 + i and α₂ = 1
        let g = Grid2D::new(3, 3, 1.0, 1.0, (0.0, 0.0), 1).unwrap();
        let omega = 2.0;
        let px = SigmaProfile::with_bounds(0.0, 1.0, 1.0, omega, 1).unwrap();
        let py = SigmaProfile::with_bounds(-1.0, 3.0, 1.0, omega, 1).unwrap();
        let s = build_stretch_field(&g, &px, &py, omega).unwrap();
        let a = C64::new(1.0, 1.0);
        let one = C64::new(1.0, 0.0);
        assert!(close(s.alpha_x(2), a, 1e-15));
        assert!(close(s.a11(2, 1), one / a, 1e-15));
        assert!(close(s.a22(2, 1), a, 1e-15));
        assert!(close(s.jinv(2, 1), one / a, 1e-15));
    }

    #[test]
    fn short_profile_rejected() {
        let d = DomainSpec::new(0.5, 0.5, 0.1, 0.0).unwrap();
        let g = Grid2D::for_domain(&d, 20, 20).unwrap();
        let short = build_sigma_profile(0.3, 0.1, 1.0, 2).unwrap();
        let full = build_sigma_profile(0.5, 0.1, 1.0, 2).unwrap();
        assert!(build_stretch_field(&g, &short, &full, 1.0).is_err());
        assert!(build_stretch_field(&g, &full, &full, 1.0).is_ok());
    }
}
