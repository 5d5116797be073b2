//! Gridded velocity models read from raw float32 files.
//!
//! Payload: `nx·ny` little-endian `f32`, row-major with x fastest; row 0 is
//! the smallest y. The optional sidecar `<file>.meta` holds `key = value`
//! lines:
//!
//! ```text
//! nx = 384
//! ny = 122
//! x_extent = -0.5, 0.5
//! y_extent = -0.5, 0.5
//! unit = m/s
//! ```

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RasterModel {
    nx: usize,
    ny: usize,
    x_extent: (f64, f64),
    y_extent: (f64, f64),
    unit: String,
    values: Vec<f64>,
}

impl RasterModel {
    /// Raster with node `(i, j)` at `x_extent.0 + i·dx`, `y_extent.0 + j·dy`.
    pub fn new(
        nx: usize,
        ny: usize,
        x_extent: (f64, f64),
        y_extent: (f64, f64),
        values: Vec<f64>,
    ) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::invalid(format!(
                "raster needs at least 2x2 samples, got {nx}x{ny}"
            )));
        }
        for (name, (a, b)) in [("x", x_extent), ("y", y_extent)] {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(Error::invalid(format!(
                    "raster {name} extent ({a}, {b}) is not an increasing interval"
                )));
            }
        }
        if values.len() != nx * ny {
            return Err(Error::Format(format!(
                "raster holds {} values, {nx}x{ny} expected",
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidData(format!(
                "raster value {} at index {k} is not positive",
                values[k]
            )));
        }
        Ok(Self {
            nx,
            ny,
            x_extent,
            y_extent,
            unit: String::new(),
            values,
        })
    }

    pub fn with_unit(mut self, unit: impl Into<String>) -> Self {
        self.unit = unit.into();
        self
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn x_extent(&self) -> (f64, f64) {
        self.x_extent
    }

    pub fn y_extent(&self) -> (f64, f64) {
        self.y_extent
    }

    pub fn unit(&self) -> &str {
        &self.unit
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn covers(&self, x0: f64, x1: f64, y0: f64, y1: f64) -> bool {
        let tol = 1e-9 * (self.x_extent.1 - self.x_extent.0).max(self.y_extent.1 - self.y_extent.0);
        self.x_extent.0 <= x0 + tol
            && self.x_extent.1 >= x1 - tol
            && self.y_extent.0 <= y0 + tol
            && self.y_extent.1 >= y1 - tol
    }

    /// Bilinear interpolation; positions are clamped to the extent.
    pub fn interpolate(&self, x: f64, y: f64) -> f64 {
        let (i, wx) = locate(x, self.x_extent, self.nx);
        let (j, wy) = locate(y, self.y_extent, self.ny);
        let v = |i: usize, j: usize| self.values[j * self.nx + i];
        let i1 = (i + 1).min(self.nx - 1);
        let j1 = (j + 1).min(self.ny - 1);
        let lo = v(i, j) * (1.0 - wx) + v(i1, j) * wx;
        let hi = v(i, j1) * (1.0 - wx) + v(i1, j1) * wx;
        lo * (1.0 - wy) + hi * wy
    }
}

/// Cell index and fractional offset of `t`; offsets within round-off of a
/// node snap to it so that node-aligned queries return stored values.
fn locate(t: f64, (a, b): (f64, f64), n: usize) -> (usize, f64) {
    let f = ((t - a) / (b - a) * (n - 1) as f64).clamp(0.0, (n - 1) as f64);
    let r = f.round();
    let f = if (f - r).abs() < 1e-9 { r } else { f };
    let i = (f.floor() as usize).min(n - 2);
    (i, f - i as f64)
}

/// Reads a raw raster of `nx·ny` values covering `x_extent × y_extent`.
pub fn load_raster(
    path: impl AsRef<Path>,
    nx: usize,
    ny: usize,
    x_extent: (f64, f64),
    y_extent: (f64, f64),
) -> Result<RasterModel> {
    let path = path.as_ref();
    let bytes = fs::read(path)
        .map_err(|e| Error::from(e).context(format!("reading {}", path.display())))?;
    if bytes.len() != 4 * nx * ny {
        return Err(Error::Format(format!(
            "{} has {} bytes, {nx}x{ny} float32 values need {}",
            path.display(),
            bytes.len(),
            4 * nx * ny
        )));
    }
    let values = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    RasterModel::new(nx, ny, x_extent, y_extent, values)
}

pub(crate) fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

pub(crate) fn parse_meta(text: &str) -> Result<HashMap<String, String>> {
    let mut out = HashMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("line {}: expected key = value", n + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

fn meta_usize(meta: &HashMap<String, String>, key: &str) -> Result<usize> {
    let v = meta
        .get(key)
        .ok_or_else(|| Error::Format(format!("sidecar is missing {key}")))?;
    v.parse()
        .map_err(|_| Error::Format(format!("sidecar {key} = {v:?} is not a count")))
}

fn meta_extent(meta: &HashMap<String, String>, key: &str) -> Result<(f64, f64)> {
    let v = meta
        .get(key)
        .ok_or_else(|| Error::Format(format!("sidecar is missing {key}")))?;
    let bad = || Error::Format(format!("sidecar {key} = {v:?} is not a pair of numbers"));
    let (a, b) = v.split_once(',').ok_or_else(bad)?;
    Ok((
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
    ))
}

/// Reads a raster described by its `<path>.meta` sidecar.
pub fn load_raster_with_sidecar(path: impl AsRef<Path>) -> Result<RasterModel> {
    let path = path.as_ref();
    let meta_path = sidecar_path(path);
    let text = fs::read_to_string(&meta_path)
        .map_err(|e| Error::from(e).context(format!("reading {}", meta_path.display())))?;
    let meta =
        parse_meta(&text).map_err(|e| e.context(format!("parsing {}", meta_path.display())))?;
    let nx = meta_usize(&meta, "nx")?;
    let ny = meta_usize(&meta, "ny")?;
    let xe = meta_extent(&meta, "x_extent")?;
    let ye = meta_extent(&meta, "y_extent")?;
    let unit = meta.get("unit").cloned().unwrap_or_default();
    Ok(load_raster(path, nx, ny, xe, ye)?.with_unit(unit))
}

/// Writes `raster` as a raw file plus sidecar.
pub fn write_raster(raster: &RasterModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::with_capacity(4 * raster.values.len());
    for v in &raster.values {
        bytes.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    fs::write(path, bytes)?;
    let mut meta = fs::File::create(sidecar_path(path))?;
    writeln!(meta, "nx = {}", raster.nx)?;
    writeln!(meta, "ny = {}", raster.ny)?;
    writeln!(
        meta,
        "x_extent = {}, {}",
        raster.x_extent.0, raster.x_extent.1
    )?;
    writeln!(
        meta,
        "y_extent = {}, {}",
        raster.y_extent.0, raster.y_extent.1
    )?;
    writeln!(meta, "unit = {}", raster.unit)?;
    Ok(())
}
