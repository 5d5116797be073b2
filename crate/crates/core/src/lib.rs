//! Overlapping domain-decomposition preconditioning for the 2D Helmholtz
//! equation with uniaxial PML truncation.
//!
//! The pieces, bottom-up:
//!
//! * [`grid`]: uniform grids, complex fields, PML damping and stretching;
//! * [`discretization`]: the 5-point finite-difference operator;
//! * [`linalg`]: direct solvers for global and subdomain systems;
//! * [`partition`]: subdomain tiling, PML-extended subdomains, transfers;
//! * [`ddm`]: the one-step preconditioner and the iterative DDM solver;
//! * [`krylov`]: restarted, right-preconditioned GMRES;
//! * [`models`]: velocity models, point sources and the free-space oracle;
//! * [`harness`]: experiment configuration, reports and field dumps.

pub mod ddm;
pub mod discretization;
pub mod error;
pub mod grid;
pub mod harness;
pub mod krylov;
pub mod linalg;
pub mod models;
pub mod partition;

pub use error::{Error, Result};

/// Double-precision complex scalar used throughout.
pub type C64 = num_complex::Complex64;
