//! Discrete point sources and the free-space Green's function.

use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid2D};
use crate::models::bessel::hankel1_0;
use crate::partition::Rect;
use crate::C64;

/// Position of a point source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceSpec {
    pub x: f64,
    pub y: f64,
}

impl SourceSpec {
    /// The shot position used in all experiments: a quarter of the tile
    /// width from its left edge and a third of its height from the bottom.
    pub fn in_tile(tile: &Rect) -> Self {
        Self {
            x: tile.x0 + 0.25 * (tile.x1 - tile.x0),
            y: tile.y0 + (tile.y1 - tile.y0) / 3.0,
        }
    }

    /// Grid node nearest to the source.
    pub fn nearest_node(&self, grid: &Grid2D) -> Result<(usize, usize)> {
        let d = grid.domain();
        if self.x.abs() > d.l_x || self.y.abs() > d.l_y {
            return Err(Error::invalid(format!(
                "source ({}, {}) lies outside the interior region",
                self.x, self.y
            )));
        }
        let (x0, y0) = grid.origin();
        let ix = ((self.x - x0) / grid.hx()).round() as usize;
        let iy = ((self.y - y0) / grid.hy()).round() as usize;
        Ok((ix, iy))
    }
}

/// Discrete delta `1/(hx·hy)` at the node nearest to the source.
pub fn build_point_source(grid: &Grid2D, source: &SourceSpec) -> Result<ComplexField> {
    let (ix, iy) = source.nearest_node(grid)?;
    let mut f = ComplexField::zeros(*grid);
    f.values_mut()[grid.index(ix, iy)] = C64::new(1.0 / (grid.hx() * grid.hy()), 0.0);
    Ok(f)
}

/// `(i/4)·H0⁽¹⁾(k·|x − source|)`, the outgoing solution of
/// `−(Δ + k²)u = δ`. Nodes closer than half a cell to the source, where the
/// function is singular, are set to zero.
pub fn greens_function_constant(k: f64, source: (f64, f64), grid: &Grid2D) -> Result<ComplexField> {
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::invalid(format!(
            "wavenumber must be positive, got {k}"
        )));
    }
    let r_min = 0.5 * grid.hx().min(grid.hy());
    let mut values = Vec::with_capacity(grid.len());
    for iy in 0..grid.ny() {
        let dy = grid.y(iy) - source.1;
        for ix in 0..grid.nx() {
            let r = (grid.x(ix) - source.0).hypot(dy);
            values.push(if r < r_min {
                C64::new(0.0, 0.0)
            } else {
                C64::new(0.0, 0.25) * hankel1_0(k * r)
            });
        }
    }
    ComplexField::from_values(*grid, values)
}
