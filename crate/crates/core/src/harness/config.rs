//! Experiment configuration: flat `key = value` files plus overrides.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::DirectMethod;
use crate::models::{load_raster_with_sidecar, Interface, LayeredModel, VelocityModel};

/// How the global system is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// GMRES preconditioned by one DDM step.
    Pgmres,
    /// The DDM iteration on its own.
    Ddm,
    /// One direct factorization of the global system.
    Direct,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pgmres" | "gmres" => Ok(Mode::Pgmres),
            "ddm" => Ok(Mode::Ddm),
            "direct" => Ok(Mode::Direct),
            other => Err(Error::invalid(format!(
                "unknown mode {other:?} (pgmres, ddm, direct)"
            ))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Pgmres => "pgmres",
            Mode::Ddm => "ddm",
            Mode::Direct => "direct",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Constant,
    Layered,
    Raster,
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "constant" => Ok(ModelKind::Constant),
            "layered" => Ok(ModelKind::Layered),
            "raster" => Ok(ModelKind::Raster),
            other => Err(Error::invalid(format!(
                "unknown model {other:?} (constant, layered, raster)"
            ))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Constant => "constant",
            ModelKind::Layered => "layered",
            ModelKind::Raster => "raster",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    /// Velocity of the constant model.
    pub velocity: f64,
    /// Layered model interfaces, top down; the built-in five-layer model
    /// when unset.
    pub interfaces: Option<Vec<Interface>>,
    pub velocities: Option<Vec<f64>>,
    /// Raw raster file; its `.meta` sidecar gives dimensions and extent.
    pub raster: Option<PathBuf>,
    /// Interior cells along x and y.
    pub size_x: usize,
    pub size_y: usize,
    /// Physical length of the longer interior side.
    pub length: f64,
    pub n_pml: usize,
    pub n_ol: usize,
    pub nb_x: usize,
    pub nb_y: usize,
    /// Frequency `ω/2π`.
    pub freq: f64,
    pub restart: usize,
    pub tol: f64,
    pub max_iters: usize,
    pub mode: Mode,
    pub smoothing: bool,
    pub threads: usize,
    /// `σ0 = pml_factor · c_max / l_pml`.
    pub pml_factor: f64,
    pub pml_power: u32,
    pub solver: DirectMethod,
    pub csv: Option<PathBuf>,
    pub dump: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Constant,
            velocity: 1.0,
            interfaces: None,
            velocities: None,
            raster: None,
            size_x: 600,
            size_y: 600,
            length: 1.0,
            n_pml: 30,
            n_ol: 0,
            nb_x: 2,
            nb_y: 2,
            freq: 55.0,
            restart: 30,
            tol: 1e-10,
            max_iters: 1000,
            mode: Mode::Pgmres,
            smoothing: false,
            threads: 1,
            pml_factor: 40.0,
            pml_power: 2,
            solver: DirectMethod::NestedDissection,
            csv: None,
            dump: None,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::invalid(format!("{key} = {value:?} is not a valid number")))
}

/// `"600x400"` or `"600"` (square).
pub fn parse_pair(key: &str, value: &str) -> Result<(usize, usize)> {
    match value.trim().split_once(['x', 'X']) {
        Some((a, b)) => Ok((parse_num(key, a)?, parse_num(key, b)?)),
        None => {
            let n = parse_num(key, value)?;
            Ok((n, n))
        }
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => Err(Error::invalid(format!("{key} = {value:?} is not on/off"))),
    }
}

impl ExperimentConfig {
    /// Sets one option by name, using the same names as the config file.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "model" => self.model = v.parse()?,
            "velocity" => self.velocity = parse_num(key, v)?,
            "interfaces" => {
                self.interfaces = Some(
                    v.split(';')
                        .map(str::parse)
                        .collect::<Result<Vec<Interface>>>()?,
                );
            }
            "velocities" => {
                self.velocities = Some(
                    v.split(',')
                        .map(|c| parse_num(key, c))
                        .collect::<Result<Vec<f64>>>()?,
                );
            }
            "raster" => self.raster = Some(PathBuf::from(v)),
            "grid" | "size" => (self.size_x, self.size_y) = parse_pair(key, v)?,
            "length" => self.length = parse_num(key, v)?,
            "npml" | "n_pml" => self.n_pml = parse_num(key, v)?,
            "nol" | "n_ol" => self.n_ol = parse_num(key, v)?,
            "nb" => (self.nb_x, self.nb_y) = parse_pair(key, v)?,
            "freq" => self.freq = parse_num(key, v)?,
            "restart" => self.restart = parse_num(key, v)?,
            "tol" => self.tol = parse_num(key, v)?,
            "max_iters" | "max_iter" => self.max_iters = parse_num(key, v)?,
            "mode" => self.mode = v.parse()?,
            "smoothing" => self.smoothing = parse_bool(key, v)?,
            "threads" => self.threads = parse_num(key, v)?,
            "pml_factor" => self.pml_factor = parse_num(key, v)?,
            "pml_power" => self.pml_power = parse_num(key, v)?,
            "solver" => self.solver = v.parse()?,
            "csv" => self.csv = Some(PathBuf::from(v)),
            "dump" => self.dump = Some(PathBuf::from(v)),
            other => return Err(Error::invalid(format!("unknown option {other:?}"))),
        }
        Ok(())
    }

    /// Parses a config file body on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("line {}: expected key = value", n + 1)))?;
            cfg.set(k, v)
                .map_err(|e| e.context(format!("config line {}", n + 1)))?;
        }
        Ok(cfg)
    }

    /// Grid spacing: `length` over the longer side's cell count.
    pub fn h(&self) -> f64 {
        self.length / self.size_x.max(self.size_y) as f64
    }

    pub fn omega(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.freq
    }

    /// Checks everything that can be checked without touching model files
    /// or allocating grids.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(m));
        if self.size_x == 0 || self.size_y == 0 {
            return bad("grid size must be positive".into());
        }
        if self.nb_x == 0 || self.nb_y == 0 {
            return bad("subdomain counts must be positive".into());
        }
        if !self.size_x.is_multiple_of(self.nb_x) || !self.size_y.is_multiple_of(self.nb_y) {
            return bad(format!(
                "grid {}x{} does not divide into {}x{} subdomains",
                self.size_x, self.size_y, self.nb_x, self.nb_y
            ));
        }
        let m = (self.size_x / self.nb_x).min(self.size_y / self.nb_y);
        if self.n_ol > m && self.mode != Mode::Direct {
            return bad(format!(
                "overlap of {} cells exceeds the {m}-cell subdomain width",
                self.n_ol
            ));
        }
        if self.n_pml == 0 {
            return bad("PML needs at least one cell".into());
        }
        if !(self.length > 0.0 && self.length.is_finite()) {
            return bad(format!("length must be positive, got {}", self.length));
        }
        if !(self.freq > 0.0 && self.freq.is_finite()) {
            return bad(format!("frequency must be positive, got {}", self.freq));
        }
        if self.restart == 0 {
            return bad("GMRES restart must be at least 1".into());
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return bad(format!("tolerance must be positive, got {}", self.tol));
        }
        if self.threads == 0 {
            return bad("thread count must be at least 1".into());
        }
        if !(self.pml_factor > 0.0 && self.pml_factor.is_finite()) {
            return bad(format!(
                "pml_factor must be positive, got {}",
                self.pml_factor
            ));
        }
        match self.model {
            ModelKind::Constant if !(self.velocity > 0.0 && self.velocity.is_finite()) => {
                bad(format!("velocity must be positive, got {}", self.velocity))
            }
            ModelKind::Raster if self.raster.is_none() => {
                bad("raster model needs a raster file".into())
            }
            ModelKind::Layered => self.layered().map(|_| ()),
            _ => Ok(()),
        }
    }

    fn layered(&self) -> Result<LayeredModel> {
        match (&self.interfaces, &self.velocities) {
            (None, None) => Ok(LayeredModel::default_five_layer()),
            (Some(i), Some(v)) => LayeredModel::new(i.clone(), v.clone()),
            _ => Err(Error::invalid(
                "layered model needs both interfaces and velocities, or neither",
            )),
        }
    }

    /// Builds the velocity model, reading raster files if needed.
    pub fn velocity_model(&self) -> Result<VelocityModel> {
        match self.model {
            ModelKind::Constant => Ok(VelocityModel::Constant(self.velocity)),
            ModelKind::Layered => Ok(VelocityModel::Layered(self.layered()?)),
            ModelKind::Raster => {
                let path = self
                    .raster
                    .as_ref()
                    .ok_or_else(|| Error::invalid("raster model needs a raster file"))?;
                Ok(VelocityModel::Raster(load_raster_with_sidecar(path)?))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_file_and_override() {
        let text = "# table row\ngrid = 600x600\nnb = 2x2\nfreq = 55\nrestart = 30\nnpml = 30\nnol = 0\nmode = pgmres\n";
        let mut cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(
            (cfg.size_x, cfg.size_y, cfg.nb_x, cfg.nb_y),
            (600, 600, 2, 2)
        );
        assert_eq!(cfg.freq, 55.0);
        cfg.set("freq", "27.5").unwrap();
        cfg.set("nb", "3").unwrap();
        assert_eq!((cfg.freq, cfg.nb_x, cfg.nb_y), (27.5, 3, 3));
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn bad_lines_rejected() {
        assert!(ExperimentConfig::parse("grid 600").is_err());
        assert!(ExperimentConfig::parse("colour = red").is_err());
        assert!(ExperimentConfig::parse("mode = fast").is_err());
        assert!(ExperimentConfig::parse("smoothing = maybe").is_err());
    }

    #[test]
    fn validation() {
        let mut cfg = ExperimentConfig::default();
        cfg.set("nb", "7").unwrap();
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig {
            n_ol: 301,
            ..ExperimentConfig::default()
        };
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig {
            model: ModelKind::Layered,
            velocities: Some(vec![1.0, 2.0]),
            ..ExperimentConfig::default()
        };
        assert!(cfg.validate().is_err());
        cfg.set("interfaces", "0.5").unwrap();
        assert!(cfg.validate().is_ok());
        cfg.model = ModelKind::Raster;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn layered_keys() {
        let cfg = ExperimentConfig::parse(
            "model = layered\ninterfaces = 0:0.3 1:0.35; 0.7\nvelocities = 1, 2, 3\n",
        )
        .unwrap();
        match cfg.velocity_model().unwrap() {
            VelocityModel::Layered(m) => {
                assert_eq!(m.interfaces().len(), 2);
                assert_eq!(m.velocities(), &[1.0, 2.0, 3.0]);
            }
            other => panic!("unexpected model {other:?}"),
        }
    }
}
