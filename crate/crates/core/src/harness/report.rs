//! Run reports in human-readable and CSV form.

use std::fmt::Write as _;
use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;
use std::time::Duration;

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::krylov::{equivalent_sweeps, ResidualHistory};

pub const CSV_HEADER: &str =
    "size_x,size_y,nbx,nby,n_pml,n_ol,freq,restart,n_iter,equ_sweeps,t_setup_s,t_iter_s,rel_res,converged";

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub n_iter: usize,
    equ_sweeps: usize,
    /// Partition build and factorization.
    pub t_setup: Duration,
    /// Iterative (or triangular) solve only.
    pub t_iter: Duration,
    pub rel_res: f64,
    pub converged: bool,
    pub history: ResidualHistory,
}

impl RunReport {
    pub fn new(
        config: ExperimentConfig,
        n_iter: usize,
        t_setup: Duration,
        t_iter: Duration,
        rel_res: f64,
        converged: bool,
        history: ResidualHistory,
    ) -> Self {
        let equ_sweeps = equivalent_sweeps(n_iter, config.nb_x, config.nb_y);
        Self {
            config,
            n_iter,
            equ_sweeps,
            t_setup,
            t_iter,
            rel_res,
            converged,
            history,
        }
    }

    pub fn equ_sweeps(&self) -> usize {
        self.equ_sweeps
    }

    pub fn t_total(&self) -> Duration {
        self.t_setup + self.t_iter
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Human,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "human" | "text" => Ok(ReportFormat::Human),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::invalid(format!(
                "unknown report format {other:?} (human, csv)"
            ))),
        }
    }
}

/// One CSV data row without trailing newline.
pub fn csv_row(r: &RunReport) -> String {
    let c = &r.config;
    format!(
        "{},{},{},{},{},{},{},{},{},{},{:.6},{:.6},{:e},{}",
        c.size_x,
        c.size_y,
        c.nb_x,
        c.nb_y,
        c.n_pml,
        c.n_ol,
        c.freq,
        c.restart,
        r.n_iter,
        r.equ_sweeps,
        r.t_setup.as_secs_f64(),
        r.t_iter.as_secs_f64(),
        r.rel_res,
        r.converged
    )
}

/// Renders a report. CSV output carries the header line.
pub fn emit_report(r: &RunReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => format!("{CSV_HEADER}\n{}\n", csv_row(r)),
        ReportFormat::Human => {
            let c = &r.config;
            let mut s = String::new();
            let _ = writeln!(
                s,
                "{:<12} {:<7} {:>5} {:>5} {:>9} {:>7} {:>8} {:>13} {:>12} {:>12} {:>13}",
                "Size",
                "Nb",
                "n_pml",
                "N_OL",
                "Freq",
                "Restart",
                "No. Iter",
                "No. equ sweep",
                "Time Fact(s)",
                "Time Iter(s)",
                "Time solve(s)"
            );
            let _ = writeln!(
                s,
                "{:<12} {:<7} {:>5} {:>5} {:>9} {:>7} {:>8} {:>13} {:>12.2} {:>12.2} {:>13.2}",
                format!("{}x{}", c.size_x, c.size_y),
                format!("{}x{}", c.nb_x, c.nb_y),
                c.n_pml,
                c.n_ol,
                c.freq,
                c.restart,
                r.n_iter,
                r.equ_sweeps,
                r.t_setup.as_secs_f64(),
                r.t_iter.as_secs_f64(),
                r.t_total().as_secs_f64()
            );
            let _ = writeln!(
                s,
                "mode {}, model {}, relative residual {:.3e} ({})",
                c.mode,
                c.model,
                r.rel_res,
                if r.converged {
                    "converged"
                } else {
                    "not converged"
                }
            );
            s
        }
    }
}

/// Appends a CSV row to `path`, writing the header first if the file is new
/// or empty.
pub fn append_csv(r: &RunReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::from(e).context(format!("opening {}", path.display())))?;
    let mut out = String::new();
    if file.metadata()?.len() == 0 {
        out.push_str(CSV_HEADER);
        out.push('\n');
    }
    out.push_str(&csv_row(r));
    out.push('\n');
    file.write_all(out.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(n_iter: usize, nb: usize) -> RunReport {
        let config = ExperimentConfig {
            nb_x: nb,
            nb_y: nb,
            ..ExperimentConfig::default()
        };
        RunReport::new(
            config,
            n_iter,
            Duration::from_millis(1500),
            Duration::from_millis(250),
            3.5e-11,
            true,
            ResidualHistory::new(vec![1.0, 3.5e-11]).unwrap(),
        )
    }

    #[test]
    fn sweeps_follow_iterations() {
        assert_eq!(report(53, 8).equ_sweeps(), 7);
        let csv = emit_report(&report(53, 8), ReportFormat::Csv);
        let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(row[9], "7");
        assert_eq!(row.len(), CSV_HEADER.split(',').count());
    }

    #[test]
    fn human_report_shows_total_time() {
        let text = emit_report(&report(9, 2), ReportFormat::Human);
        assert!(text.contains("Time solve(s)"));
        assert!(text.contains("1.75"));
        assert!(text.contains("converged"));
    }

    #[test]
    fn csv_appends() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("runs.csv");
        append_csv(&report(9, 2), &path).unwrap();
        append_csv(&report(10, 2), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], CSV_HEADER);
        assert!(lines[2].contains(",10,5,"));
    }
}
