//! The one-step overlapping preconditioner and the iterative DDM solver.
//!
//! One step: restrict the source to each tile, solve every PML-extended
//! subdomain problem, and add all local solutions (PML collars included)
//! into one global field. Repeating the step with the residual left by the
//! previous sum as the new source gives the iterative solver.
//!
//! All vectors live in the operator's row scaling; see
//! [`SparseOperator::scale_source`].

use rayon::prelude::*;

use crate::discretization::SparseOperator;
use crate::error::{Error, Result};
use crate::grid::ComplexField;
use crate::krylov::{LinearMap, ResidualHistory};
use crate::linalg::norm;
use crate::partition::{extend_add_into, neighbors, restrict_into, Partition, Subdomain};
use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);

/// `1 − (10t³ − 15t⁴ + 6t⁵)`: 1 at `t = 0`, 0 at `t = 1`, C² at both ends.
pub fn ramp(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    1.0 - t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
}

/// Cut-off weights `β_{i,j}` on each extended box: 1 on the tile, ramping to
/// 0 at the outer edge of every collar facing a neighbour. Collars on the
/// global boundary keep weight 1 since they are the global PML.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingFunction {
    weights: Vec<Vec<f64>>,
}

impl SmoothingFunction {
    /// Local weights of subdomain `k` in the partition's `(i, j)` order.
    pub fn weights(&self, k: usize) -> &[f64] {
        &self.weights[k]
    }
}

fn axis_weights(
    ext: (usize, usize),
    flat: (usize, usize),
    low_edge: bool,
    high_edge: bool,
) -> Vec<f64> {
    let (e0, e1) = ext;
    let (a, b) = (
        if low_edge { e0 } else { flat.0 },
        if high_edge { e1 } else { flat.1 },
    );
    (e0..=e1)
        .map(|g| {
            if g < a {
                ramp((a - g) as f64 / (a - e0) as f64)
            } else if g > b {
                ramp((g - b) as f64 / (e1 - b) as f64)
            } else {
                1.0
            }
        })
        .collect()
}

pub fn build_smoothing(partition: &Partition) -> SmoothingFunction {
    let (nb_x, nb_y) = partition.nb();
    let (mx, my) = partition.tile_cells();
    let n_pml = partition.global_grid().n_pml();
    let weights = partition
        .subdomains()
        .iter()
        .map(|s| {
            let (i, j) = s.index();
            let (ex, ey) = s.extended_nodes();
            let wx = axis_weights(
                (*ex.start(), *ex.end()),
                (i * mx + n_pml, (i + 1) * mx + n_pml),
                i == 0,
                i + 1 == nb_x,
            );
            let wy = axis_weights(
                (*ey.start(), *ey.end()),
                (j * my + n_pml, (j + 1) * my + n_pml),
                j == 0,
                j + 1 == nb_y,
            );
            wy.iter()
                .flat_map(|by| wx.iter().map(move |bx| bx * by))
                .collect()
        })
        .collect();
    SmoothingFunction { weights }
}

fn check_global(partition: &Partition, len: usize) -> Result<()> {
    let n = partition.global_grid().len();
    if len != n {
        return Err(Error::invalid(format!(
            "vector of length {len} on a global grid of {n} nodes"
        )));
    }
    Ok(())
}

/// Solves every subdomain with the tile restriction of `rhs` as source.
fn local_solves(partition: &Partition, rhs: &[C64]) -> Result<Vec<Vec<C64>>> {
    let nx = partition.global_grid().nx();
    let solve = |s: &Subdomain| -> Result<Vec<C64>> {
        let mut local = vec![ZERO; s.grid().len()];
        restrict_into(rhs, nx, s, &mut local);
        if local.iter().all(|v| *v == ZERO) {
            return Ok(local);
        }
        let (i, j) = s.index();
        s.solve(&local)
            .map_err(|e| e.context(format!("solving subdomain ({i}, {j})")))
    };
    partition.install(|| partition.subdomains().par_iter().map(solve).collect())
}

/// Adds the (optionally weighted) local solutions into `acc` in `(i, j)`
/// order.
fn superpose(
    partition: &Partition,
    smoothing: Option<&SmoothingFunction>,
    locals: &[Vec<C64>],
    acc: &mut [C64],
) {
    let nx = partition.global_grid().nx();
    for (k, (s, u)) in partition.subdomains().iter().zip(locals).enumerate() {
        extend_add_into(u, s, smoothing.map(|b| b.weights(k)), acc, nx);
    }
}

/// One DDM step applied to a global right-hand side: the sum of all local
/// solutions.
pub fn precondition(
    f: &ComplexField,
    partition: &Partition,
    smoothing: Option<&SmoothingFunction>,
) -> Result<ComplexField> {
    if f.grid() != partition.global_grid() {
        return Err(Error::invalid(
            "source is not on the partition's global grid",
        ));
    }
    let mut out = ComplexField::zeros(*f.grid());
    apply_step(partition, smoothing, f.values(), out.values_mut())?;
    Ok(out)
}

fn apply_step(
    partition: &Partition,
    smoothing: Option<&SmoothingFunction>,
    rhs: &[C64],
    out: &mut [C64],
) -> Result<()> {
    check_global(partition, rhs.len())?;
    let locals = local_solves(partition, rhs)?;
    out.fill(ZERO);
    superpose(partition, smoothing, &locals, out);
    Ok(())
}

/// The one-step preconditioner as a fixed linear map for GMRES.
#[derive(Debug, Clone, Copy)]
pub struct OneStepPreconditioner<'a> {
    pub partition: &'a Partition,
    pub smoothing: Option<&'a SmoothingFunction>,
}

impl LinearMap for OneStepPreconditioner<'_> {
    fn dim(&self) -> usize {
        self.partition.global_grid().len()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) -> Result<()> {
        check_global(self.partition, y.len())?;
        apply_step(self.partition, self.smoothing, x, y)
    }
}

/// State of the iterative DDM solver after step `s`.
#[derive(Debug)]
pub struct DdmState<'a> {
    partition: &'a Partition,
    operator: &'a SparseOperator,
    smoothing: Option<&'a SmoothingFunction>,
    locals: Vec<Vec<C64>>,
    sum: Vec<C64>,
    residual: Vec<C64>,
    rhs_norm: f64,
    step: usize,
}

impl<'a> DdmState<'a> {
    /// Runs step 0 for the right-hand side `b` (already row-scaled).
    pub fn start(
        partition: &'a Partition,
        operator: &'a SparseOperator,
        smoothing: Option<&'a SmoothingFunction>,
        b: &[C64],
    ) -> Result<Self> {
        check_global(partition, b.len())?;
        if operator.grid() != partition.global_grid() {
            return Err(Error::invalid(
                "operator is not on the partition's global grid",
            ));
        }
        let mut state = Self {
            partition,
            operator,
            smoothing,
            locals: Vec::new(),
            sum: vec![ZERO; b.len()],
            residual: b.to_vec(),
            rhs_norm: norm(b),
            step: 0,
        };
        state.solve_and_update()?;
        Ok(state)
    }

    fn solve_and_update(&mut self) -> Result<()> {
        self.locals = local_solves(self.partition, &self.residual)?;
        let mut inc = vec![ZERO; self.sum.len()];
        superpose(self.partition, self.smoothing, &self.locals, &mut inc);
        let mut a_inc = vec![ZERO; inc.len()];
        self.operator.matvec(&inc, &mut a_inc);
        for ((s, r), (d, ad)) in self
            .sum
            .iter_mut()
            .zip(self.residual.iter_mut())
            .zip(inc.iter().zip(&a_inc))
        {
            *s += d;
            *r -= ad;
        }
        Ok(())
    }

    /// Step `s + 1`: the residual restricted to each tile is the new source.
    pub fn advance(&mut self) -> Result<()> {
        self.solve_and_update()?;
        self.step += 1;
        Ok(())
    }

    pub fn step(&self) -> usize {
        self.step
    }

    /// `u_DDM`, the sum of all local solutions so far.
    pub fn solution(&self) -> &[C64] {
        &self.sum
    }

    /// Latest local solution of subdomain `k` in `(i, j)` order.
    pub fn local_solution(&self, k: usize) -> &[C64] {
        &self.locals[k]
    }

    /// Residual `b − A·u_DDM`.
    pub fn residual(&self) -> &[C64] {
        &self.residual
    }

    pub fn relative_residual(&self) -> f64 {
        if self.rhs_norm == 0.0 {
            0.0
        } else {
            norm(&self.residual) / self.rhs_norm
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DdmOutcome {
    pub solution: ComplexField,
    /// Relative residual after each step, starting with step 0.
    pub history: ResidualHistory,
    pub steps: usize,
    pub converged: bool,
}

/// Iterates DDM steps until the relative residual drops to `tol` or
/// `max_steps` further steps have run. `b` is the row-scaled source.
pub fn ddm_solve(
    b: &ComplexField,
    partition: &Partition,
    operator: &SparseOperator,
    smoothing: Option<&SmoothingFunction>,
    max_steps: usize,
    tol: f64,
) -> Result<DdmOutcome> {
    if b.grid() != partition.global_grid() {
        return Err(Error::invalid(
            "source is not on the partition's global grid",
        ));
    }
    let mut state = DdmState::start(partition, operator, smoothing, b.values())?;
    let mut history = vec![state.relative_residual()];
    while history[history.len() - 1] > tol && state.step() < max_steps {
        state.advance()?;
        let r = state.relative_residual();
        if !r.is_finite() {
            return Err(Error::NumericalFailure(format!(
                "DDM residual not finite at step {}",
                state.step()
            )));
        }
        history.push(r);
    }
    let converged = history[history.len() - 1] <= tol;
    Ok(DdmOutcome {
        solution: ComplexField::from_values(*b.grid(), state.sum)?,
        history: ResidualHistory::new(history)?,
        steps: state.step,
        converged,
    })
}

/// Reference form of `steps` DDM steps: each subdomain's new source is the
/// negated operator applied to its neighbours' latest (weighted, zero
/// extended) solutions, restricted to its tile. Costs one global matvec per
/// subdomain and neighbour; meant for checking [`ddm_solve`].
pub fn ddm_neighbor_form(
    b: &ComplexField,
    partition: &Partition,
    operator: &SparseOperator,
    smoothing: Option<&SmoothingFunction>,
    steps: usize,
) -> Result<ComplexField> {
    if b.grid() != partition.global_grid() {
        return Err(Error::invalid(
            "source is not on the partition's global grid",
        ));
    }
    let g = *partition.global_grid();
    let (nb_x, _) = partition.nb();
    let subs = partition.subdomains();
    let mut locals = local_solves_each(partition, |_| Ok(b.values().to_vec()))?;
    let mut sum = vec![ZERO; g.len()];
    superpose(partition, smoothing, &locals, &mut sum);

    for _ in 0..steps {
        // L(β u) for every subdomain, on the global grid
        let mut transfers = Vec::with_capacity(subs.len());
        for (k, (s, u)) in subs.iter().zip(&locals).enumerate() {
            let mut ext = vec![ZERO; g.len()];
            extend_add_into(u, s, smoothing.map(|w| w.weights(k)), &mut ext, g.nx());
            let mut lu = vec![ZERO; g.len()];
            operator.matvec(&ext, &mut lu);
            transfers.push(lu);
        }
        locals = local_solves_each(partition, |s| {
            let (i, j) = s.index();
            let mut src = vec![ZERO; g.len()];
            for (ii, jj) in neighbors(i, j, partition.nb().0, partition.nb().1)? {
                for (d, t) in src.iter_mut().zip(&transfers[jj * nb_x + ii]) {
                    *d -= t;
                }
            }
            Ok(src)
        })?;
        superpose(partition, smoothing, &locals, &mut sum);
    }
    ComplexField::from_values(g, sum)
}

/// Local solves where subdomain `s` takes its source from `global_rhs(s)`.
fn local_solves_each(
    partition: &Partition,
    global_rhs: impl Fn(&Subdomain) -> Result<Vec<C64>>,
) -> Result<Vec<Vec<C64>>> {
    let nx = partition.global_grid().nx();
    partition
        .subdomains()
        .iter()
        .map(|s| {
            let rhs = global_rhs(s)?;
            let mut local = vec![ZERO; s.grid().len()];
            restrict_into(&rhs, nx, s, &mut local);
            s.solve(&local)
        })
        .collect()
}
