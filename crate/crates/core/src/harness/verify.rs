//! Desk-scale self checks with fixed seeds.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ddm::{ddm_neighbor_form, DdmState, OneStepPreconditioner};
use crate::discretization::global_operator;
use crate::error::Result;
use crate::grid::{default_sigma0, ComplexField, Grid2D, PmlParams};
use crate::krylov::{gmres, GmresConfig};
use crate::linalg::{factor, norm, solve, BandedMatrix, DirectMethod, DirectSolver};
use crate::models::{greens_function_constant, sample_velocity, LayeredModel, VelocityModel};
use crate::partition::{
    build_partition, extend_add, restrict_to_interior, Partition, PartitionParams,
};
use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    /// Flips the sign of the `k²` term before the Green's-function check;
    /// the check must then fail.
    pub flip_k2_sign: bool,
    /// Random banded systems compared against dense elimination.
    pub dense_lu_systems: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            flip_k2_sign: false,
            dense_lu_systems: 20,
            seed: 7,
        }
    }
}

/// One check: passes when `measured <= tolerance`.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub measured: f64,
    pub tolerance: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.measured <= self.tolerance
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<22} measured {:.3e}, tolerance {:.3e}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.tolerance
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifySummary {
    pub checks: Vec<CheckResult>,
}

impl VerifySummary {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed())
    }
}

impl fmt::Display for VerifySummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        let failed = self.failures().count();
        write!(f, "{} checks, {} failed", self.checks.len(), failed)
    }
}

fn unit_pml(grid: &Grid2D, c_max: f64) -> PmlParams {
    PmlParams {
        sigma0: default_sigma0(40.0, c_max, grid.n_pml() as f64 * grid.hx()),
        power: 2,
    }
}

fn rel_diff(a: &[C64], b: &[C64]) -> f64 {
    let d: Vec<C64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&d) / norm(b)
}

/// Relative L2 misfit between the PML-truncated point-source solution and
/// the free-space solution in the annulus `5h < r < l_x/2`.
pub fn greens_misfit(cells: usize, n_pml: usize, freq: f64, flip_k2_sign: bool) -> Result<f64> {
    let h = 1.0 / cells as f64;
    let grid = Grid2D::centered(cells, cells, h, n_pml)?;
    let velocity = vec![1.0; grid.len()];
    let omega = 2.0 * std::f64::consts::PI * freq;
    let mut op = global_operator(&grid, &unit_pml(&grid, 1.0), omega, &velocity)?;
    if flip_k2_sign {
        let d: Vec<C64> = op
            .jacobian()
            .iter()
            .map(|j| j * (-2.0 * omega * omega))
            .collect();
        op.add_diagonal(&d)?;
    }
    let c = n_pml + cells / 2;
    let source = (grid.x(c), grid.y(c));
    let mut f = ComplexField::zeros(grid);
    f.values_mut()[grid.index(c, c)] = C64::new(1.0 / (h * h), 0.0);
    let u = DirectSolver::factor(&op, DirectMethod::NestedDissection)?
        .solve(op.scale_source(&f)?.values())?;
    let g = greens_function_constant(omega, source, &grid)?;
    let l_x = grid.domain().l_x;
    let (mut num, mut den) = (0.0, 0.0);
    for iy in 0..grid.ny() {
        for ix in 0..grid.nx() {
            let r = (grid.x(ix) - source.0).hypot(grid.y(iy) - source.1);
            if r > 5.0 * h && r < 0.5 * l_x {
                let p = grid.index(ix, iy);
                // Δu + k²u = δ is solved by minus the outgoing Green's function
                let exact = -g.values()[p];
                num += (u[p] - exact).norm_sqr();
                den += exact.norm_sqr();
            }
        }
    }
    Ok((num / den).sqrt())
}

/// Dense Gaussian elimination with partial pivoting; the reference for the
/// banded solver.
pub fn dense_solve(mut a: Vec<Vec<C64>>, mut b: Vec<C64>) -> Option<Vec<C64>> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].norm().total_cmp(&a[j][k].norm()))?;
        if a[p][k] == ZERO {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let l = a[i][k] / a[k][k];
            if l == ZERO {
                continue;
            }
            for j in k..n {
                let t = a[k][j];
                a[i][j] -= l * t;
            }
            let t = b[k];
            b[i] -= l * t;
        }
    }
    let mut x = vec![ZERO; n];
    for k in (0..n).rev() {
        let s: C64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    Some(x)
}

/// Worst `(relative residual, relative difference from dense elimination)`
/// over `count` random complex banded systems of size `n`, bandwidth `b`.
pub fn banded_vs_dense(count: usize, n: usize, b: usize, seed: u64) -> Result<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst_res, mut worst_diff) = (0.0f64, 0.0f64);
    for _ in 0..count {
        let mut m = BandedMatrix::zeros(n, b);
        let mut dense = vec![vec![ZERO; n]; n];
        for i in 0..n {
            for j in i.saturating_sub(b)..=(i + b).min(n - 1) {
                let v = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                m.set(i, j, v)?;
                dense[i][j] = v;
            }
        }
        let rhs: Vec<C64> = (0..n)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let x = solve(&factor(&m)?, &rhs)?;
        let ax = m.matvec(&x);
        worst_res = worst_res.max(rel_diff(&ax, &rhs));
        if let Some(reference) = dense_solve(dense, rhs) {
            worst_diff = worst_diff.max(rel_diff(&x, &reference));
        }
    }
    Ok((worst_res, worst_diff))
}

fn constant_partition(
    cells: usize,
    n_pml: usize,
    nb: usize,
    n_ol: usize,
    freq: f64,
) -> Result<(Partition, crate::discretization::SparseOperator)> {
    let grid = Grid2D::centered(cells, cells, 1.0 / cells as f64, n_pml)?;
    let velocity = vec![1.0; grid.len()];
    let pml = unit_pml(&grid, 1.0);
    let omega = 2.0 * std::f64::consts::PI * freq;
    let params = PartitionParams {
        nb_x: nb,
        nb_y: nb,
        n_overlap: n_ol,
        pml,
        method: DirectMethod::NestedDissection,
        threads: 1,
    };
    let partition = build_partition(&grid, &params, omega, &velocity)?;
    let op = global_operator(&grid, &pml, omega, &velocity)?;
    Ok((partition, op))
}

fn random_field(grid: Grid2D, seed: u64) -> Result<ComplexField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = (0..grid.len())
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    ComplexField::from_values(grid, v)
}

/// Largest deviation of `Σ extend(restrict(f))` from `f`, plus the number
/// of nodes not owned by exactly one subdomain.
pub fn partition_of_unity_defect(partition: &Partition, seed: u64) -> Result<f64> {
    let grid = *partition.global_grid();
    let f = random_field(grid, seed)?;
    let mut acc = ComplexField::zeros(grid);
    for s in partition.subdomains() {
        extend_add(&restrict_to_interior(&f, s)?, s, &mut acc)?;
    }
    let mut worst = acc
        .values()
        .iter()
        .zip(f.values())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    for iy in 0..grid.ny() {
        for ix in 0..grid.nx() {
            let owners = partition
                .subdomains()
                .iter()
                .filter(|s| s.owns(ix, iy))
                .count();
            worst += owners.abs_diff(1) as f64;
        }
    }
    Ok(worst)
}

/// Relative difference between the neighbour-sum and global-residual forms
/// of the DDM iteration after `steps` steps.
pub fn ddm_form_mismatch(
    partition: &Partition,
    op: &crate::discretization::SparseOperator,
    steps: usize,
) -> Result<f64> {
    let grid = *partition.global_grid();
    let tile = partition.subdomain(0, 0).interior();
    let source = crate::models::SourceSpec::in_tile(&tile);
    let f = crate::models::build_point_source(&grid, &source)?;
    let reference = ddm_neighbor_form(&f, partition, op, None, steps)?;
    let mut state = DdmState::start(partition, op, None, f.values())?;
    for _ in 0..steps {
        state.advance()?;
    }
    Ok(rel_diff(state.solution(), reference.values()))
}

pub fn verify_suite(opts: &VerifyOptions) -> Result<VerifySummary> {
    let mut checks = Vec::new();

    checks.push(CheckResult {
        name: "greens-function",
        measured: greens_misfit(200, 30, 6.0, opts.flip_k2_sign)?,
        tolerance: 0.05,
    });

    let (res, diff) = banded_vs_dense(opts.dense_lu_systems, 50, 7, opts.seed)?;
    checks.push(CheckResult {
        name: "banded-lu-residual",
        measured: res,
        tolerance: 1e-10,
    });
    checks.push(CheckResult {
        name: "banded-lu-vs-dense",
        measured: diff,
        tolerance: 1e-8,
    });

    let grid = Grid2D::centered(80, 80, 1.0 / 80.0, 10)?;
    let model = VelocityModel::Layered(LayeredModel::default_five_layer());
    let velocity = sample_velocity(&model, &grid)?;
    let op = global_operator(
        &grid,
        &unit_pml(&grid, 1.5),
        2.0 * std::f64::consts::PI * 8.0,
        &velocity,
    )?;
    checks.push(CheckResult {
        name: "operator-symmetry",
        measured: op.max_asymmetry() / op.max_abs(),
        tolerance: 1e-13,
    });

    let (partition, _) = constant_partition(60, 5, 3, 3, 5.0)?;
    checks.push(CheckResult {
        name: "partition-of-unity",
        measured: partition_of_unity_defect(&partition, opts.seed)?,
        tolerance: 0.0,
    });

    let (partition, op) = constant_partition(180, 20, 3, 2, 15.0)?;
    checks.push(CheckResult {
        name: "ddm-neighbour-form",
        measured: ddm_form_mismatch(&partition, &op, 3)?,
        tolerance: 1e-12,
    });

    let (partition, op) = constant_partition(100, 20, 1, 0, 10.0)?;
    let b = random_field(*partition.global_grid(), opts.seed + 1)?;
    let pc = OneStepPreconditioner {
        partition: &partition,
        smoothing: None,
    };
    let (_, stats) = gmres(&op, &pc, b.values(), &GmresConfig::default())?;
    checks.push(CheckResult {
        name: "exact-preconditioner",
        measured: if stats.converged {
            stats.n_iter as f64
        } else {
            f64::INFINITY
        },
        tolerance: 2.0,
    });

    Ok(VerifySummary { checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_solve_small() {
        let a = vec![
            vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
            vec![C64::new(2.0, 0.0), C64::new(1.0, 1.0)],
        ];
        let x = dense_solve(a, vec![C64::new(1.0, 0.0), C64::new(3.0, 1.0)]).unwrap();
        assert!((x[0] - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((x[1] - C64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn check_display() {
        let c = CheckResult {
            name: "x",
            measured: 3.0,
            tolerance: 2.0,
        };
        assert!(!c.passed());
        assert!(c.to_string().starts_with("FAIL"));
    }
}
