//! Velocity models, point sources and the free-space reference solution.
//!
//! Models are defined on the interior region of a grid; PML nodes take the
//! value of the nearest interior point.

pub mod bessel;
pub(crate) mod raster;
mod source;

use std::fmt;
use std::str::FromStr;

pub use raster::{load_raster, load_raster_with_sidecar, write_raster, RasterModel};
pub use source::{build_point_source, greens_function_constant, SourceSpec};

use crate::error::{Error, Result};
use crate::grid::Grid2D;

/// Piecewise-linear interface in normalized coordinates: `u ∈ [0, 1]` runs
/// left to right across the interior, depth `d ∈ [0, 1]` runs from the top
/// edge down.
#[derive(Debug, Clone, PartialEq)]
pub struct Interface {
    points: Vec<(f64, f64)>,
}

impl Interface {
    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("interface needs at least one point"));
        }
        if points.iter().any(|(u, d)| !u.is_finite() || !d.is_finite()) {
            return Err(Error::invalid("interface points must be finite"));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid(
                "interface has two points at the same horizontal position",
            ));
        }
        Ok(Self { points })
    }

    /// Horizontal interface at depth `d`.
    pub fn flat(d: f64) -> Result<Self> {
        Self::new(vec![(0.0, d)])
    }

    /// Depth at horizontal position `u`, held constant beyond the end points.
    pub fn depth(&self, u: f64) -> f64 {
        let p = &self.points;
        if u <= p[0].0 {
            return p[0].1;
        }
        if u >= p[p.len() - 1].0 {
            return p[p.len() - 1].1;
        }
        let k = p.partition_point(|q| q.0 <= u);
        let ((u0, d0), (u1, d1)) = (p[k - 1], p[k]);
        d0 + (d1 - d0) * (u - u0) / (u1 - u0)
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }
}

impl fmt::Display for Interface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, (u, d)) in self.points.iter().enumerate() {
            if k > 0 {
                write!(f, " ")?;
            }
            write!(f, "{u}:{d}")?;
        }
        Ok(())
    }
}

impl FromStr for Interface {
    type Err = Error;

    /// `"0.3"` for a flat interface, or `"u:d u:d ..."`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if !s.contains(':') {
            let d = s
                .parse()
                .map_err(|_| Error::invalid(format!("bad interface depth {s:?}")))?;
            return Self::flat(d);
        }
        let points = s
            .split_whitespace()
            .map(|pair| {
                let (u, d) = pair
                    .split_once(':')
                    .ok_or_else(|| Error::invalid(format!("bad interface point {pair:?}")))?;
                let u = u
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad position in {pair:?}")))?;
                let d = d
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad depth in {pair:?}")))?;
                Ok((u, d))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(points)
    }
}

/// Stack of layers separated by non-crossing interfaces, listed top down.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredModel {
    interfaces: Vec<Interface>,
    velocities: Vec<f64>,
}

impl LayeredModel {
    /// `velocities[k]` fills the layer above interface `k`; the last entry
    /// fills everything below the deepest interface.
    pub fn new(interfaces: Vec<Interface>, velocities: Vec<f64>) -> Result<Self> {
        if velocities.len() != interfaces.len() + 1 {
            return Err(Error::invalid(format!(
                "{} interfaces need {} velocities, got {}",
                interfaces.len(),
                interfaces.len() + 1,
                velocities.len()
            )));
        }
        if let Some(c) = velocities.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
            return Err(Error::invalid(format!(
                "layer velocity {c} is not positive"
            )));
        }
        for w in interfaces.windows(2) {
            // piecewise linear, so checking the union of breakpoints suffices
            let crossing = w[0]
                .points
                .iter()
                .chain(&w[1].points)
                .chain(&[(0.0, 0.0), (1.0, 0.0)])
                .any(|&(u, _)| w[0].depth(u) >= w[1].depth(u));
            if crossing {
                return Err(Error::invalid(
                    "layer interfaces must be listed top down and must not cross",
                ));
            }
        }
        Ok(Self {
            interfaces,
            velocities,
        })
    }

    /// Five nearly horizontal layers with velocity contrasts up to 3:1.
    pub fn default_five_layer() -> Self {
        let line =
            |a: f64, b: f64| Interface::new(vec![(0.0, a), (1.0, b)]).expect("valid interface");
        Self::new(
            vec![
                line(0.18, 0.22),
                line(0.42, 0.38),
                line(0.58, 0.63),
                line(0.80, 0.76),
            ],
            vec![0.5, 0.9, 0.7, 1.2, 1.5],
        )
        .expect("valid default model")
    }

    pub fn interfaces(&self) -> &[Interface] {
        &self.interfaces
    }

    pub fn velocities(&self) -> &[f64] {
        &self.velocities
    }

    /// Velocity at normalized position `(u, d)`; points on an interface
    /// belong to the layer above.
    pub fn velocity(&self, u: f64, d: f64) -> f64 {
        let below = self
            .interfaces
            .iter()
            .take_while(|i| d > i.depth(u))
            .count();
        self.velocities[below]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum VelocityModel {
    Constant(f64),
    Layered(LayeredModel),
    Raster(RasterModel),
}

impl VelocityModel {
    pub fn max_velocity(&self) -> f64 {
        match self {
            VelocityModel::Constant(c) => *c,
            VelocityModel::Layered(m) => m.velocities.iter().copied().fold(0.0, f64::max),
            VelocityModel::Raster(r) => r.max_value(),
        }
    }
}

/// Velocity on every node of `grid`. The grid must be centred on the
/// origin; PML nodes take the nearest interior value.
pub fn sample_velocity(model: &VelocityModel, grid: &Grid2D) -> Result<Vec<f64>> {
    let d = grid.domain();
    let clamp_x = |x: f64| x.clamp(-d.l_x, d.l_x);
    let clamp_y = |y: f64| y.clamp(-d.l_y, d.l_y);
    let mut out = Vec::with_capacity(grid.len());
    match model {
        VelocityModel::Constant(c) => {
            if !(c.is_finite() && *c > 0.0) {
                return Err(Error::invalid(format!("velocity {c} is not positive")));
            }
            out.resize(grid.len(), *c);
        }
        VelocityModel::Layered(m) => {
            for iy in 0..grid.ny() {
                let depth = (d.l_y - clamp_y(grid.y(iy))) / (2.0 * d.l_y);
                for ix in 0..grid.nx() {
                    let u = (clamp_x(grid.x(ix)) + d.l_x) / (2.0 * d.l_x);
                    out.push(m.velocity(u, depth));
                }
            }
        }
        VelocityModel::Raster(r) => {
            if !r.covers(-d.l_x, d.l_x, -d.l_y, d.l_y) {
                return Err(Error::invalid(format!(
                    "raster extent {:?} x {:?} does not cover the interior [{}, {}] x [{}, {}]",
                    r.x_extent(),
                    r.y_extent(),
                    -d.l_x,
                    d.l_x,
                    -d.l_y,
                    d.l_y
                )));
            }
            for iy in 0..grid.ny() {
                let y = clamp_y(grid.y(iy));
                for ix in 0..grid.nx() {
                    out.push(r.interpolate(clamp_x(grid.x(ix)), y));
                }
            }
        }
    }
    Ok(out)
}
