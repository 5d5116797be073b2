use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use helmddm::harness::{
    emit_report, run_experiment, verify_suite, ExperimentConfig, ReportFormat, VerifyOptions,
};

const THREADS_ENV: &str = "HELMDDM_THREADS";

#[derive(Parser)]
#[command(
    name = "helmddm",
    version,
    about = "2D Helmholtz solver with an overlapping PML domain-decomposition preconditioner"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and print its report.
    Run(Box<RunArgs>),
    /// Run the built-in verification checks.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct RunArgs {
    /// key = value config file; command-line options override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Interior cells, e.g. 600x600.
    #[arg(long)]
    grid: Option<String>,
    /// Subdomains, e.g. 2x2.
    #[arg(long)]
    nb: Option<String>,
    /// Frequency ω/2π.
    #[arg(long)]
    freq: Option<String>,
    #[arg(long)]
    restart: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    #[arg(long = "max-iters")]
    max_iters: Option<String>,
    /// PML width in cells.
    #[arg(long)]
    npml: Option<String>,
    /// Extra overlap in cells.
    #[arg(long)]
    nol: Option<String>,
    /// pgmres, ddm or direct.
    #[arg(long)]
    mode: Option<String>,
    /// constant, layered or raster.
    #[arg(long)]
    model: Option<String>,
    /// Raw float32 velocity file with a .meta sidecar.
    #[arg(long)]
    raster: Option<String>,
    /// on or off.
    #[arg(long)]
    smoothing: Option<String>,
    /// Worker threads; defaults to $HELMDDM_THREADS, then 1.
    #[arg(long)]
    threads: Option<String>,
    /// nested or banded.
    #[arg(long)]
    solver: Option<String>,
    /// Append a CSV row to this file.
    #[arg(long)]
    csv: Option<String>,
    /// Write the wavefield to this file.
    #[arg(long)]
    dump: Option<String>,
    /// Any other config key, as key=value.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long, default_value = "human")]
    format: String,
}

#[derive(Args)]
struct VerifyArgs {
    /// Flip the sign of the k² term before the Green's-function check.
    #[arg(long)]
    flip_k2_sign: bool,
    #[arg(long, default_value_t = 20)]
    dense_lu_systems: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

fn build_config(args: &RunArgs) -> helmddm::Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                helmddm::Error::from(e).context(format!("reading {}", path.display()))
            })?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::default(),
    };
    let threads = args
        .threads
        .clone()
        .or_else(|| std::env::var(THREADS_ENV).ok());
    let flags = [
        ("grid", &args.grid),
        ("nb", &args.nb),
        ("freq", &args.freq),
        ("restart", &args.restart),
        ("tol", &args.tol),
        ("max_iters", &args.max_iters),
        ("npml", &args.npml),
        ("nol", &args.nol),
        ("mode", &args.mode),
        ("model", &args.model),
        ("raster", &args.raster),
        ("smoothing", &args.smoothing),
        ("threads", &threads),
        ("solver", &args.solver),
        ("csv", &args.csv),
        ("dump", &args.dump),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    for kv in &args.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| {
            helmddm::Error::InvalidParameter(format!("--set expects KEY=VALUE, got {kv:?}"))
        })?;
        cfg.set(k, v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(args: RunArgs) -> helmddm::Result<bool> {
    let format: ReportFormat = args.format.parse()?;
    let cfg = build_config(&args)?;
    let out = run_experiment(&cfg)?;
    print!("{}", emit_report(&out.report, format));
    Ok(out.report.converged)
}

fn verify(args: VerifyArgs) -> helmddm::Result<bool> {
    let opts = VerifyOptions {
        flip_k2_sign: args.flip_k2_sign,
        dense_lu_systems: args.dense_lu_systems,
        seed: args.seed,
    };
    let summary = verify_suite(&opts)?;
    println!("{summary}");
    Ok(summary.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(*args),
        Command::Verify(args) => verify(args),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
