//! Experiment orchestration: configuration, runs, reports, field dumps and
//! the built-in verification checks.

mod config;
mod dump;
mod report;
mod verify;

use std::time::Instant;

pub use config::{parse_pair, ExperimentConfig, Mode, ModelKind};
pub use dump::{dump_field, load_field};
pub use report::{append_csv, csv_row, emit_report, ReportFormat, RunReport, CSV_HEADER};
pub use verify::{verify_suite, CheckResult, VerifyOptions, VerifySummary};

use crate::ddm::{build_smoothing, ddm_solve, OneStepPreconditioner};
use crate::discretization::{global_operator, SparseOperator};
use crate::error::{Error, Result, ResultExt};
use crate::grid::{default_sigma0, ComplexField, Grid2D, PmlParams};
use crate::krylov::{gmres, GmresConfig, ResidualHistory};
use crate::linalg::{norm, DirectSolver};
use crate::models::{build_point_source, sample_velocity, SourceSpec};
use crate::partition::{build_partition, tile_interior, PartitionParams};
use crate::C64;

/// A finished run: the report and the computed wavefield.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub solution: ComplexField,
}

/// The discrete problem described by a config: grid, velocity, PML and the
/// row-scaled right-hand side.
#[derive(Debug, Clone)]
pub struct Problem {
    pub grid: Grid2D,
    pub velocity: Vec<f64>,
    pub pml: PmlParams,
    pub omega: f64,
    pub operator: SparseOperator,
    pub rhs: ComplexField,
}

/// Builds grid, model, global operator and source for `cfg`.
pub fn build_problem(cfg: &ExperimentConfig) -> Result<Problem> {
    cfg.validate()?;
    let h = cfg.h();
    let grid = Grid2D::centered(cfg.size_x, cfg.size_y, h, cfg.n_pml)?;
    let model = cfg
        .velocity_model()
        .context(|| "building the velocity model".into())?;
    let velocity =
        sample_velocity(&model, &grid).context(|| "sampling the velocity model".into())?;
    let c_max = velocity.iter().copied().fold(0.0, f64::max);
    let pml = PmlParams {
        sigma0: default_sigma0(cfg.pml_factor, c_max, cfg.n_pml as f64 * h),
        power: cfg.pml_power,
    };
    let omega = cfg.omega();
    let operator = global_operator(&grid, &pml, omega, &velocity)
        .context(|| "assembling the global operator".into())?;
    let tile = tile_interior(&grid, cfg.nb_x, cfg.nb_y, 0, 0)?;
    let source = build_point_source(&grid, &SourceSpec::in_tile(&tile))?;
    let rhs = operator.scale_source(&source)?;
    Ok(Problem {
        grid,
        velocity,
        pml,
        omega,
        operator,
        rhs,
    })
}

fn relative_residual(op: &SparseOperator, b: &[C64], u: &[C64]) -> f64 {
    let mut au = vec![C64::new(0.0, 0.0); b.len()];
    op.matvec(u, &mut au);
    let r: Vec<C64> = b.iter().zip(&au).map(|(x, y)| x - y).collect();
    let nb = norm(b);
    if nb == 0.0 {
        0.0
    } else {
        norm(&r) / nb
    }
}

/// Runs one experiment. Non-convergence is reported, not an error.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let problem = build_problem(cfg)?;
    let Problem {
        grid,
        velocity,
        pml,
        omega,
        operator,
        rhs,
    } = problem;

    let (u, n_iter, t_setup, t_iter, converged, history) = match cfg.mode {
        Mode::Direct => {
            let t0 = Instant::now();
            let solver = DirectSolver::factor(&operator, cfg.solver)
                .context(|| "factoring the global operator".into())?;
            let t_setup = t0.elapsed();
            let t1 = Instant::now();
            let u = solver.solve(rhs.values())?;
            (
                u,
                0,
                t_setup,
                t1.elapsed(),
                true,
                ResidualHistory::new(vec![1.0])?,
            )
        }
        Mode::Pgmres | Mode::Ddm => {
            let params = PartitionParams {
                nb_x: cfg.nb_x,
                nb_y: cfg.nb_y,
                n_overlap: cfg.n_ol,
                pml,
                method: cfg.solver,
                threads: cfg.threads,
            };
            let t0 = Instant::now();
            let partition = build_partition(&grid, &params, omega, &velocity)
                .context(|| "building subdomains".into())?;
            let t_setup = t0.elapsed();
            let smoothing = cfg.smoothing.then(|| build_smoothing(&partition));
            if cfg.mode == Mode::Pgmres {
                let pc = OneStepPreconditioner {
                    partition: &partition,
                    smoothing: smoothing.as_ref(),
                };
                let gcfg = GmresConfig::new(cfg.restart, cfg.max_iters, cfg.tol)?;
                let (u, stats) =
                    gmres(&operator, &pc, rhs.values(), &gcfg).context(|| "GMRES".into())?;
                (
                    u,
                    stats.n_iter,
                    t_setup,
                    stats.t_iter,
                    stats.converged,
                    stats.history,
                )
            } else {
                let t1 = Instant::now();
                let out = ddm_solve(
                    &rhs,
                    &partition,
                    &operator,
                    smoothing.as_ref(),
                    cfg.max_iters.saturating_sub(1),
                    cfg.tol,
                )
                .context(|| "DDM iteration".into())?;
                let mut hist = vec![1.0];
                hist.extend_from_slice(out.history.as_slice());
                let t_iter = t1.elapsed();
                (
                    out.solution.into_values(),
                    out.steps + 1,
                    t_setup,
                    t_iter,
                    out.converged,
                    ResidualHistory::new(hist)?,
                )
            }
        }
    };

    let rel_res = relative_residual(&operator, rhs.values(), &u);
    if !rel_res.is_finite() {
        return Err(Error::NumericalFailure(
            "final residual is not finite".into(),
        ));
    }
    let solution = ComplexField::from_values(grid, u)?;
    let report = RunReport::new(
        cfg.clone(),
        n_iter,
        t_setup,
        t_iter,
        rel_res,
        converged,
        history,
    );
    if let Some(path) = &cfg.dump {
        dump_field(&solution, path)?;
    }
    if let Some(path) = &cfg.csv {
        append_csv(&report, path)?;
    }
    Ok(RunOutput { report, solution })
}
