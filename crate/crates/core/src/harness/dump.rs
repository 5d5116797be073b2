//! Raw wavefield dumps: little-endian `f64` pairs `(re, im)`, row-major
//! with x fastest, plus a `<file>.meta` sidecar describing the grid.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid2D};
use crate::models::raster::{parse_meta, sidecar_path};
use crate::C64;

pub fn dump_field(field: &ComplexField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::with_capacity(16 * field.values().len());
    for v in field.values() {
        bytes.extend_from_slice(&v.re.to_le_bytes());
        bytes.extend_from_slice(&v.im.to_le_bytes());
    }
    fs::write(path, bytes)
        .map_err(|e| Error::from(e).context(format!("writing {}", path.display())))?;
    let g = field.grid();
    let (x0, y0) = g.origin();
    let (x1, y1) = g.far_corner();
    let mut meta = fs::File::create(sidecar_path(path))?;
    writeln!(meta, "nx = {}", g.nx())?;
    writeln!(meta, "ny = {}", g.ny())?;
    writeln!(meta, "x_extent = {x0}, {x1}")?;
    writeln!(meta, "y_extent = {y0}, {y1}")?;
    writeln!(meta, "hx = {}", g.hx())?;
    writeln!(meta, "hy = {}", g.hy())?;
    writeln!(meta, "n_pml = {}", g.n_pml())?;
    writeln!(meta, "format = complex f64 le")?;
    Ok(())
}

/// Reads a dump written by [`dump_field`].
pub fn load_field(path: impl AsRef<Path>) -> Result<ComplexField> {
    let path = path.as_ref();
    let meta = parse_meta(&fs::read_to_string(sidecar_path(path))?)?;
    let get = |k: &str| {
        meta.get(k)
            .ok_or_else(|| Error::Format(format!("dump sidecar is missing {k}")))
    };
    let num = |k: &str| -> Result<f64> {
        get(k)?
            .parse()
            .map_err(|_| Error::Format(format!("bad {k} in dump sidecar")))
    };
    let count = |k: &str| -> Result<usize> {
        get(k)?
            .parse()
            .map_err(|_| Error::Format(format!("bad {k} in dump sidecar")))
    };
    let origin = |k: &str| -> Result<f64> {
        let v = get(k)?;
        let first = v.split(',').next().unwrap_or("");
        first
            .trim()
            .parse()
            .map_err(|_| Error::Format(format!("bad {k} in dump sidecar")))
    };
    let grid = Grid2D::new(
        count("nx")?,
        count("ny")?,
        num("hx")?,
        num("hy")?,
        (origin("x_extent")?, origin("y_extent")?),
        count("n_pml")?,
    )?;
    let bytes = fs::read(path)?;
    if bytes.len() != 16 * grid.len() {
        return Err(Error::Format(format!(
            "{} has {} bytes, {} expected",
            path.display(),
            bytes.len(),
            16 * grid.len()
        )));
    }
    let f = |c: &[u8]| f64::from_le_bytes(c.try_into().expect("8-byte chunk"));
    let values = bytes
        .chunks_exact(16)
        .map(|c| C64::new(f(&c[..8]), f(&c[8..])))
        .collect();
    ComplexField::from_values(grid, values)
}
