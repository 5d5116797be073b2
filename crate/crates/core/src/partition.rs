//! Subdomain tiling and PML-extended subdomains.
//!
//! The interior region is cut into `nb_x × nb_y` tiles `[x_i, x_{i+1}] ×
//! [y_j, y_{j+1}]`. Each tile is extended by the overlap `lo` towards every
//! neighbour and then wrapped in its own PML collar of width `l_pml`:
//!
//! ```text
//! x_{i,0} = x_i - l_pml            (i = 0)      x_{i,1} = x_{i+1} + l_pml        (i = nb_x - 1)
//! x_{i,0} = x_i - lo - l_pml       (i > 0)      x_{i,1} = x_{i+1} + lo + l_pml   (otherwise)
//! ```
//!
//! On sides touching the global boundary the collar is the global PML
//! itself. All lengths are whole numbers of cells, so local grid nodes are
//! global grid nodes.
//!
//! Ownership: every global node belongs to exactly one subdomain. Tile edge
//! nodes shared by two tiles go to the lower index, and the global PML
//! strip beyond a boundary tile goes to that tile.

use std::ops::RangeInclusive;

use rayon::prelude::*;

use crate::discretization::{helmholtz_operator, SparseOperator};
use crate::error::{Error, Result, ResultExt};
use crate::grid::{ComplexField, Grid2D, PmlParams};
use crate::linalg::{DirectMethod, DirectSolver};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionParams {
    pub nb_x: usize,
    pub nb_y: usize,
    /// Extra overlap in cells (`N_OL`).
    pub n_overlap: usize,
    pub pml: PmlParams,
    pub method: DirectMethod,
    /// Worker threads for building and applying subdomain solves; 1 = serial.
    pub threads: usize,
}

/// Axis-aligned box in physical coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

/// Node ranges of one axis of a subdomain, in global node indices.
#[derive(Debug, Clone, PartialEq, Eq)]
struct AxisLayout {
    ext: RangeInclusive<usize>,
    own: RangeInclusive<usize>,
}

#[derive(Debug)]
pub struct Subdomain {
    i: usize,
    j: usize,
    interior: Rect,
    extended: Rect,
    x: AxisLayout,
    y: AxisLayout,
    grid: Grid2D,
    operator: SparseOperator,
    solver: DirectSolver,
}

impl Subdomain {
    pub fn index(&self) -> (usize, usize) {
        (self.i, self.j)
    }

    /// The tile `[x_i, x_{i+1}] × [y_j, y_{j+1}]`.
    pub fn interior(&self) -> Rect {
        self.interior
    }

    /// The PML-extended box `[x_{i,0}, x_{i,1}] × [y_{j,0}, y_{j,1}]`.
    pub fn extended(&self) -> Rect {
        self.extended
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn operator(&self) -> &SparseOperator {
        &self.operator
    }

    pub fn solver(&self) -> &DirectSolver {
        &self.solver
    }

    /// Global node ranges `(x, y)` of the extended box.
    pub fn extended_nodes(&self) -> (RangeInclusive<usize>, RangeInclusive<usize>) {
        (self.x.ext.clone(), self.y.ext.clone())
    }

    /// Global node ranges `(x, y)` owned by this subdomain.
    pub fn owned_nodes(&self) -> (RangeInclusive<usize>, RangeInclusive<usize>) {
        (self.x.own.clone(), self.y.own.clone())
    }

    /// Global `(ix, iy)` of local node `(lx, ly)`.
    pub fn local_to_global(&self, lx: usize, ly: usize) -> (usize, usize) {
        (lx + self.x.ext.start(), ly + self.y.ext.start())
    }

    /// Local `(lx, ly)` of global node `(ix, iy)`, if inside the extended box.
    pub fn global_to_local(&self, ix: usize, iy: usize) -> Option<(usize, usize)> {
        if self.x.ext.contains(&ix) && self.y.ext.contains(&iy) {
            Some((ix - self.x.ext.start(), iy - self.y.ext.start()))
        } else {
            None
        }
    }

    pub fn owns(&self, ix: usize, iy: usize) -> bool {
        self.x.own.contains(&ix) && self.y.own.contains(&iy)
    }

    /// Solves the local PML problem for a local right-hand side.
    pub fn solve(&self, rhs: &[C64]) -> Result<Vec<C64>> {
        self.solver.solve(rhs)
    }
}

#[derive(Debug)]
pub struct Partition {
    global: Grid2D,
    nb_x: usize,
    nb_y: usize,
    cells_x: usize,
    cells_y: usize,
    params: PartitionParams,
    subdomains: Vec<Subdomain>,
    pool: Option<rayon::ThreadPool>,
}

impl Partition {
    pub fn global_grid(&self) -> &Grid2D {
        &self.global
    }

    pub fn nb(&self) -> (usize, usize) {
        (self.nb_x, self.nb_y)
    }

    pub fn params(&self) -> &PartitionParams {
        &self.params
    }

    /// Interior cells per tile along `(x, y)`.
    pub fn tile_cells(&self) -> (usize, usize) {
        (self.cells_x / self.nb_x, self.cells_y / self.nb_y)
    }

    /// Subdomains in `(i, j)` order, `i` fastest.
    pub fn subdomains(&self) -> &[Subdomain] {
        &self.subdomains
    }

    pub fn subdomain(&self, i: usize, j: usize) -> &Subdomain {
        &self.subdomains[j * self.nb_x + i]
    }

    /// Runs `f` on the partition's thread pool (or inline when serial).
    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        match &self.pool {
            Some(pool) => pool.install(f),
            None => f(),
        }
    }

    /// Total stored factor entries across subdomains.
    pub fn factor_entries(&self) -> usize {
        self.subdomains
            .iter()
            .map(|s| s.solver.factor_entries())
            .sum()
    }
}

fn thread_pool(threads: usize) -> Result<Option<rayon::ThreadPool>> {
    if threads <= 1 {
        return Ok(None);
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map(Some)
        .map_err(|e| Error::invalid(format!("cannot start {threads} worker threads: {e}")))
}

/// Tile `(i, j)` of an `nb_x × nb_y` split of the interior of a centred
/// grid.
pub fn tile_interior(grid: &Grid2D, nb_x: usize, nb_y: usize, i: usize, j: usize) -> Result<Rect> {
    if i >= nb_x || j >= nb_y {
        return Err(Error::invalid(format!(
            "tile ({i}, {j}) outside a {nb_x}x{nb_y} partition"
        )));
    }
    let n_pml = grid.n_pml();
    let cells_x = grid.nx() - 1 - 2 * n_pml;
    let cells_y = grid.ny() - 1 - 2 * n_pml;
    if !cells_x.is_multiple_of(nb_x) || !cells_y.is_multiple_of(nb_y) {
        return Err(Error::invalid(format!(
            "interior of {cells_x}x{cells_y} cells does not divide into {nb_x}x{nb_y} subdomains"
        )));
    }
    let d = grid.domain();
    let (mx, my) = (cells_x / nb_x, cells_y / nb_y);
    Ok(Rect {
        x0: -d.l_x + (i * mx) as f64 * grid.hx(),
        x1: -d.l_x + ((i + 1) * mx) as f64 * grid.hx(),
        y0: -d.l_y + (j * my) as f64 * grid.hy(),
        y1: -d.l_y + ((j + 1) * my) as f64 * grid.hy(),
    })
}

/// Node layout along one axis for tile `i` of `nb`, with `cells` interior
/// cells, `m` cells per tile, `n_pml` PML cells and `n_ol` overlap cells.
fn axis_layout(i: usize, nb: usize, cells: usize, n_pml: usize, n_ol: usize) -> Result<AxisLayout> {
    let m = cells / nb;
    // interior cell coordinate k maps to global node k + n_pml
    let lo_ext = if i == 0 { 0 } else { n_ol };
    let hi_ext = if i + 1 == nb { 0 } else { n_ol };
    let start = (i * m + n_pml).checked_sub(lo_ext + n_pml).ok_or_else(|| {
        Error::Internal(format!(
            "tile {i}: extended box leaves the domain on the low side"
        ))
    })?;
    let end = (i + 1) * m + hi_ext + 2 * n_pml;
    if end > cells + 2 * n_pml {
        return Err(Error::Internal(format!(
            "tile {i}: extended box leaves the domain on the high side"
        )));
    }
    let own_start = if i == 0 { 0 } else { i * m + 1 + n_pml };
    let own_end = if i + 1 == nb {
        cells + 2 * n_pml
    } else {
        (i + 1) * m + n_pml
    };
    Ok(AxisLayout {
        ext: start..=end,
        own: own_start..=own_end,
    })
}

/// Builds all subdomains, including their factorizations.
///
/// `grid` must be centred on the origin (as produced by
/// [`Grid2D::for_domain`] or [`Grid2D::centered`]); `velocity` is the
/// global velocity field.
pub fn build_partition(
    grid: &Grid2D,
    params: &PartitionParams,
    omega: f64,
    velocity: &[f64],
) -> Result<Partition> {
    let (nb_x, nb_y) = (params.nb_x, params.nb_y);
    if nb_x == 0 || nb_y == 0 {
        return Err(Error::invalid("subdomain counts must be positive"));
    }
    grid.check_len(velocity.len(), "velocity field")?;
    let n_pml = grid.n_pml();
    let cells_x = grid.nx() - 1 - 2 * n_pml;
    let cells_y = grid.ny() - 1 - 2 * n_pml;
    tile_interior(grid, nb_x, nb_y, 0, 0)?;
    let (hx, hy) = (grid.hx(), grid.hy());
    let lo_x = params.n_overlap as f64 * hx;
    let lo_y = params.n_overlap as f64 * hy;

    let mut layouts = Vec::with_capacity(nb_x * nb_y);
    for j in 0..nb_y {
        let ly = axis_layout(j, nb_y, cells_y, n_pml, params.n_overlap)?;
        for i in 0..nb_x {
            let lx = axis_layout(i, nb_x, cells_x, n_pml, params.n_overlap)?;
            layouts.push((i, j, lx, ly.clone()));
        }
    }

    let pool = thread_pool(params.threads)?;
    let build = |(i, j, lx, ly): (usize, usize, AxisLayout, AxisLayout)| -> Result<Subdomain> {
        let tile = tile_interior(grid, nb_x, nb_y, i, j)?;
        let (xi, xi1, yj, yj1) = (tile.x0, tile.x1, tile.y0, tile.y1);
        let zone_x = (
            if i == 0 { xi } else { xi - lo_x },
            if i + 1 == nb_x { xi1 } else { xi1 + lo_x },
        );
        let zone_y = (
            if j == 0 { yj } else { yj - lo_y },
            if j + 1 == nb_y { yj1 } else { yj1 + lo_y },
        );
        let nx = lx.ext.end() - lx.ext.start() + 1;
        let ny = ly.ext.end() - ly.ext.start() + 1;
        let local = Grid2D::new(
            nx,
            ny,
            hx,
            hy,
            (grid.x(*lx.ext.start()), grid.y(*ly.ext.start())),
            n_pml,
        )?;
        let mut c = Vec::with_capacity(local.len());
        for gy in ly.ext.clone() {
            let row = gy * grid.nx();
            c.extend_from_slice(&velocity[row + lx.ext.start()..=row + lx.ext.end()]);
        }
        let operator = helmholtz_operator(&local, zone_x, zone_y, &params.pml, omega, &c)?;
        let solver = DirectSolver::factor(&operator, params.method)?;
        let (fx, fy) = local.far_corner();
        Ok(Subdomain {
            i,
            j,
            interior: tile,
            extended: Rect {
                x0: local.origin().0,
                x1: fx,
                y0: local.origin().1,
                y1: fy,
            },
            x: lx,
            y: ly,
            grid: local,
            operator,
            solver,
        })
    };
    let build_ctx = |l: (usize, usize, AxisLayout, AxisLayout)| {
        let (i, j) = (l.0, l.1);
        build(l).context(|| format!("building subdomain ({i}, {j})"))
    };

    let subdomains = match &pool {
        Some(p) => p.install(|| {
            layouts
                .into_par_iter()
                .map(build_ctx)
                .collect::<Result<Vec<_>>>()
        })?,
        None => layouts
            .into_iter()
            .map(build_ctx)
            .collect::<Result<Vec<_>>>()?,
    };

    Ok(Partition {
        global: *grid,
        nb_x,
        nb_y,
        cells_x,
        cells_y,
        params: *params,
        subdomains,
        pool,
    })
}

/// In-range members of the 3×3 block around `(i, j)`, excluding itself.
pub fn neighbors(i: usize, j: usize, nb_x: usize, nb_y: usize) -> Result<Vec<(usize, usize)>> {
    if i >= nb_x || j >= nb_y {
        return Err(Error::invalid(format!(
            "subdomain ({i}, {j}) outside a {nb_x}x{nb_y} partition"
        )));
    }
    let mut out = Vec::with_capacity(8);
    for jj in j.saturating_sub(1)..=(j + 1).min(nb_y - 1) {
        for ii in i.saturating_sub(1)..=(i + 1).min(nb_x - 1) {
            if (ii, jj) != (i, j) {
                out.push((ii, jj));
            }
        }
    }
    Ok(out)
}

/// Local field equal to `global` on the nodes `sub` owns, zero elsewhere in
/// its extended box.
pub fn restrict_to_interior(global: &ComplexField, sub: &Subdomain) -> Result<ComplexField> {
    let g = global.grid();
    if g.nx() <= *sub.x.ext.end() || g.ny() <= *sub.y.ext.end() {
        return Err(Error::invalid(
            "global field grid does not contain the subdomain",
        ));
    }
    let mut out = ComplexField::zeros(sub.grid);
    restrict_into(global.values(), g.nx(), sub, out.values_mut());
    Ok(out)
}

pub(crate) fn restrict_into(global: &[C64], global_nx: usize, sub: &Subdomain, local: &mut [C64]) {
    let lnx = sub.grid.nx();
    let (x0, y0) = (*sub.x.ext.start(), *sub.y.ext.start());
    local.fill(C64::new(0.0, 0.0));
    for gy in sub.y.own.clone() {
        let lrow = (gy - y0) * lnx;
        let grow = gy * global_nx;
        let (a, b) = (*sub.x.own.start(), *sub.x.own.end());
        local[lrow + a - x0..=lrow + b - x0].copy_from_slice(&global[grow + a..=grow + b]);
    }
}

/// Adds every node of `local` (PML collar included) into `acc`.
pub fn extend_add(local: &ComplexField, sub: &Subdomain, acc: &mut ComplexField) -> Result<()> {
    if *local.grid() != sub.grid {
        return Err(Error::Internal(
            "local field is not on the subdomain grid".into(),
        ));
    }
    let g = *acc.grid();
    if g.nx() <= *sub.x.ext.end() || g.ny() <= *sub.y.ext.end() {
        return Err(Error::Internal(
            "subdomain box exceeds the accumulator grid".into(),
        ));
    }
    extend_add_into(local.values(), sub, None, acc.values_mut(), g.nx());
    Ok(())
}

/// `acc[global(p)] += weight[p] · local[p]` over the extended box.
pub(crate) fn extend_add_into(
    local: &[C64],
    sub: &Subdomain,
    weight: Option<&[f64]>,
    acc: &mut [C64],
    global_nx: usize,
) {
    let lnx = sub.grid.nx();
    let (x0, y0) = (*sub.x.ext.start(), *sub.y.ext.start());
    for (ly, lrow) in local.chunks_exact(lnx).enumerate() {
        let grow = (ly + y0) * global_nx + x0;
        let dst = &mut acc[grow..grow + lnx];
        match weight {
            None => {
                for (d, v) in dst.iter_mut().zip(lrow) {
                    *d += v;
                }
            }
            Some(w) => {
                let wrow = &w[ly * lnx..(ly + 1) * lnx];
                for ((d, v), b) in dst.iter_mut().zip(lrow).zip(wrow) {
                    *d += v * b;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::global_operator;

    fn params(nb: usize, n_ol: usize) -> PartitionParams {
        PartitionParams {
            nb_x: nb,
            nb_y: nb,
            n_overlap: n_ol,
            pml: PmlParams {
                sigma0: 200.0,
                power: 2,
            },
            method: DirectMethod::NestedDissection,
            threads: 1,
        }
    }

    fn setup(cells: usize, n_pml: usize, nb: usize, n_ol: usize) -> (Grid2D, Partition) {
        let g = Grid2D::centered(cells, cells, 1.0 / cells as f64, n_pml).unwrap();
        let c = vec![1.0; g.len()];
        let p = build_partition(&g, &params(nb, n_ol), 20.0, &c).unwrap();
        (g, p)
    }

    #[test]
    fn neighbor_sets() {
        assert_eq!(neighbors(0, 0, 2, 2).unwrap(), vec![(1, 0), (0, 1), (1, 1)]);
        assert_eq!(neighbors(2, 2, 5, 5).unwrap().len(), 8);
        assert!(neighbors(0, 0, 1, 1).unwrap().is_empty());
        assert!(neighbors(2, 0, 2, 2).is_err());
    }

    #[test]
    fn single_subdomain_is_global_problem() {
        let (g, p) = setup(20, 4, 1, 3);
        let sub = p.subdomain(0, 0);
        assert_eq!(sub.grid(), &g);
        let op = global_operator(&g, &p.params().pml, 20.0, &vec![1.0; g.len()]).unwrap();
        assert_eq!(sub.operator(), &op);
    }

    #[test]
    fn corner_column_extensions() {
        // 5x5 tiles of 8 cells, 3 PML cells, 2 overlap cells
        let (g, p) = setup(40, 3, 5, 2);
        let h = g.hx();
        let sub = p.subdomain(0, 3);
        let ext = sub.extended();
        let int = sub.interior();
        assert!((int.x0 - ext.x0 - 3.0 * h).abs() < 1e-12);
        assert!((ext.x1 - int.x1 - 5.0 * h).abs() < 1e-12);
        assert!((int.y0 - ext.y0 - 5.0 * h).abs() < 1e-12);
        assert!((ext.y1 - int.y1 - 5.0 * h).abs() < 1e-12);
        let top = p.subdomain(4, 4);
        assert!((top.extended().x1 - top.interior().x1 - 3.0 * h).abs() < 1e-12);
    }

    #[test]
    fn tiles_cover_interior() {
        let (g, p) = setup(40, 3, 4, 1);
        let d = g.domain();
        let total: f64 = p.subdomains().iter().map(|s| s.interior().area()).sum();
        assert!((total - 4.0 * d.l_x * d.l_y).abs() < 1e-12);
        for a in p.subdomains() {
            for b in p.subdomains() {
                if a.index() != b.index() {
                    let (ia, ib) = (a.interior(), b.interior());
                    let w = (ia.x1.min(ib.x1) - ia.x0.max(ib.x0)).max(0.0);
                    let h = (ia.y1.min(ib.y1) - ia.y0.max(ib.y0)).max(0.0);
                    assert!(w * h < 1e-14);
                }
            }
        }
    }

    #[test]
    fn ownership_is_a_partition() {
        let (g, p) = setup(30, 3, 3, 2);
        for iy in 0..g.ny() {
            for ix in 0..g.nx() {
                let owners = p.subdomains().iter().filter(|s| s.owns(ix, iy)).count();
                assert_eq!(owners, 1, "node ({ix}, {iy})");
            }
        }
    }

    #[test]
    fn restriction_of_remote_support_is_zero() {
        let (g, p) = setup(30, 3, 3, 0);
        let mut f = ComplexField::zeros(g);
        let target = p.subdomain(1, 1);
        let (xs, ys) = target.owned_nodes();
        for iy in ys {
            for ix in xs.clone() {
                f.values_mut()[g.index(ix, iy)] = C64::new(1.0, 1.0);
            }
        }
        let r = restrict_to_interior(&f, p.subdomain(0, 0)).unwrap();
        assert!(r.values().iter().all(|v| v.norm() == 0.0));
        let r = restrict_to_interior(&f, target).unwrap();
        assert!(r.norm() > 0.0);
    }

    #[test]
    fn extend_add_of_ones_marks_extended_box() {
        let (g, p) = setup(30, 3, 3, 2);
        let sub = p.subdomain(1, 2);
        let ones =
            ComplexField::from_values(*sub.grid(), vec![C64::new(1.0, 0.0); sub.grid().len()])
                .unwrap();
        let mut acc = ComplexField::zeros(g);
        extend_add(&ones, sub, &mut acc).unwrap();
        let (ex, ey) = sub.extended_nodes();
        for iy in 0..g.ny() {
            for ix in 0..g.nx() {
                let expect = if ex.contains(&ix) && ey.contains(&iy) {
                    1.0
                } else {
                    0.0
                };
                assert_eq!(acc.get(ix, iy).re, expect);
            }
        }
    }

    #[test]
    fn collars_superpose() {
        let (g, p) = setup(30, 3, 3, 0);
        let mut acc = ComplexField::zeros(g);
        for sub in [p.subdomain(0, 0), p.subdomain(1, 0)] {
            let ones =
                ComplexField::from_values(*sub.grid(), vec![C64::new(1.0, 0.0); sub.grid().len()])
                    .unwrap();
            extend_add(&ones, sub, &mut acc).unwrap();
        }
        // node on the shared tile edge lies in both extended boxes
        let (_, ey) = p.subdomain(0, 0).extended_nodes();
        let edge = *p.subdomain(0, 0).owned_nodes().0.end();
        assert_eq!(acc.get(edge, *ey.start() + 5).re, 2.0);
    }

    #[test]
    fn indivisible_grid_rejected() {
        let g = Grid2D::centered(30, 30, 1.0 / 30.0, 3).unwrap();
        let err = build_partition(&g, &params(4, 0), 20.0, &vec![1.0; g.len()]).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
    }

    #[test]
    fn oversized_overlap_is_inconsistent() {
        let g = Grid2D::centered(30, 30, 1.0 / 30.0, 3).unwrap();
        let err = build_partition(&g, &params(3, 11), 20.0, &vec![1.0; g.len()]).unwrap_err();
        assert!(matches!(err, Error::Internal(_)));
    }
}
