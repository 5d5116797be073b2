//! Direct solvers for the assembled 5-point systems, plus the few vector
//! kernels the iterative layers share.

mod banded;
mod nested;

pub use banded::{factor, solve, to_banded, BandedFactorization, BandedMatrix};
pub use nested::NestedDissectionLu;

use crate::discretization::SparseOperator;
use crate::error::Result;
use crate::C64;

/// Which direct method factors subdomain (and global) systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DirectMethod {
    /// Geometric nested dissection with multifrontal LU.
    #[default]
    NestedDissection,
    /// Banded LU with partial pivoting; memory grows as `n · min(nx, ny)`.
    Banded,
}

impl std::str::FromStr for DirectMethod {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nested" | "nested-dissection" => Ok(Self::NestedDissection),
            "banded" => Ok(Self::Banded),
            other => Err(crate::Error::invalid(format!(
                "unknown direct method '{other}'"
            ))),
        }
    }
}

impl std::fmt::Display for DirectMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::NestedDissection => "nested",
            Self::Banded => "banded",
        })
    }
}

/// A factorized operator ready for repeated solves.
#[derive(Debug, Clone)]
pub enum DirectSolver {
    Nested(NestedDissectionLu),
    Banded(BandedFactorization),
}

impl DirectSolver {
    pub fn factor(op: &SparseOperator, method: DirectMethod) -> Result<Self> {
        Ok(match method {
            DirectMethod::NestedDissection => Self::Nested(NestedDissectionLu::factor(op)?),
            DirectMethod::Banded => Self::Banded(factor(&to_banded(op))?),
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Nested(f) => f.dim(),
            Self::Banded(f) => f.dim(),
        }
    }

    pub fn solve(&self, rhs: &[C64]) -> Result<Vec<C64>> {
        match self {
            Self::Nested(f) => f.solve(rhs),
            Self::Banded(f) => solve(f, rhs),
        }
    }

    /// Number of stored factor entries.
    pub fn factor_entries(&self) -> usize {
        match self {
            Self::Nested(f) => f.factor_entries(),
            Self::Banded(f) => f.factor_entries(),
        }
    }
}

pub fn norm(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// `Σ conj(x_i) y_i`.
pub fn dot(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

/// `y += a x`.
pub fn axpy(a: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}
