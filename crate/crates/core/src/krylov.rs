//! Restarted GMRES with right preconditioning.
//!
//! Iterates on `A·M` and returns `u = M·v`, so the monitored residual is the
//! residual of the original system. Arnoldi uses modified Gram-Schmidt with
//! a second pass whenever a projection removes most of the vector's norm.

use std::time::{Duration, Instant};

use crate::discretization::SparseOperator;
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm};
use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Fraction of the norm below which a second orthogonalization pass runs.
const REORTH_RATIO: f64 = 0.7;

/// A linear map on `C^n`.
pub trait LinearMap: Sync {
    fn dim(&self) -> usize;

    /// Writes `y = A x`.
    fn apply(&self, x: &[C64], y: &mut [C64]) -> Result<()>;
}

impl LinearMap for SparseOperator {
    fn dim(&self) -> usize {
        SparseOperator::dim(self)
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) -> Result<()> {
        if x.len() != self.dim() || y.len() != self.dim() {
            return Err(Error::invalid(format!(
                "vector length {} / {} does not match operator dimension {}",
                x.len(),
                y.len(),
                self.dim()
            )));
        }
        self.matvec(x, y);
        Ok(())
    }
}

/// The identity on `C^n`; "no preconditioner".
#[derive(Debug, Clone, Copy)]
pub struct Identity(pub usize);

impl LinearMap for Identity {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) -> Result<()> {
        y.copy_from_slice(x);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresConfig {
    /// Krylov vectors per cycle.
    pub restart: usize,
    /// Cap on total iterations across cycles.
    pub max_iters: usize,
    /// Relative residual target `‖b − A u‖ / ‖b‖`.
    pub tol: f64,
}

impl GmresConfig {
    pub fn new(restart: usize, max_iters: usize, tol: f64) -> Result<Self> {
        if restart == 0 {
            return Err(Error::invalid("GMRES restart must be at least 1"));
        }
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::invalid(format!(
                "GMRES tolerance must be positive, got {tol}"
            )));
        }
        Ok(Self {
            restart,
            max_iters,
            tol,
        })
    }
}

impl Default for GmresConfig {
    fn default() -> Self {
        Self {
            restart: 30,
            max_iters: 1000,
            tol: 1e-10,
        }
    }
}

/// Relative residual per iteration, starting from the initial residual.
/// Never empty.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualHistory(Vec<f64>);

impl ResidualHistory {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid(
                "residual history needs at least the initial residual",
            ));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn first(&self) -> f64 {
        self.0[0]
    }

    pub fn last(&self) -> f64 {
        self.0[self.0.len() - 1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveStats {
    pub n_iter: usize,
    /// `n_iter + 1` entries; within a cycle these are the Arnoldi estimates.
    pub history: ResidualHistory,
    pub converged: bool,
    /// True relative residual of the returned iterate.
    pub rel_res: f64,
    pub t_iter: Duration,
}

/// Rotation `[c s; -conj(s) c]` that zeroes `b` in `(a, b)`.
fn givens(a: C64, b: C64) -> (f64, C64) {
    let (na, nb) = (a.norm(), b.norm());
    if nb == 0.0 {
        return (1.0, ZERO);
    }
    if na == 0.0 {
        return (0.0, b.conj() / nb);
    }
    let t = na.hypot(nb);
    (na / t, (a / na) * b.conj() / t)
}

fn rotate(c: f64, s: C64, x: C64, y: C64) -> (C64, C64) {
    (x * c + s * y, -s.conj() * x + y * c)
}

fn check_finite(v: &[C64], what: &str) -> Result<()> {
    if v.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NumericalFailure(format!(
            "non-finite values in {what}"
        )))
    }
}

/// Solves `A u = b` with right preconditioner `M`, starting from `u = 0`.
///
/// Non-convergence within `max_iters` is reported through
/// [`SolveStats::converged`], not as an error.
pub fn gmres(
    a: &dyn LinearMap,
    m: &dyn LinearMap,
    b: &[C64],
    cfg: &GmresConfig,
) -> Result<(Vec<C64>, SolveStats)> {
    let n = b.len();
    if a.dim() != n || m.dim() != n {
        return Err(Error::invalid(format!(
            "rhs length {n} does not match operator ({}) and preconditioner ({})",
            a.dim(),
            m.dim()
        )));
    }
    let cfg = GmresConfig::new(cfg.restart, cfg.max_iters, cfg.tol)?;
    check_finite(b, "right-hand side")?;
    let start = Instant::now();
    let bnorm = norm(b);
    let mut x = vec![ZERO; n];
    if bnorm == 0.0 {
        return Ok((
            x,
            SolveStats {
                n_iter: 0,
                history: ResidualHistory(vec![0.0]),
                converged: true,
                rel_res: 0.0,
                t_iter: start.elapsed(),
            },
        ));
    }

    let k_max = cfg.restart;
    let mut history = vec![1.0];
    let mut total = 0usize;
    let mut r = b.to_vec();
    let mut w = vec![ZERO; n];
    let mut z = vec![ZERO; n];
    let (converged, rel_res) = loop {
        let beta = norm(&r);
        let rel = beta / bnorm;
        if !rel.is_finite() {
            return Err(Error::NumericalFailure(
                "residual norm is not finite".into(),
            ));
        }
        if rel <= cfg.tol {
            break (true, rel);
        }
        if total >= cfg.max_iters {
            break (false, rel);
        }

        let mut basis: Vec<Vec<C64>> = Vec::with_capacity(k_max + 1);
        basis.push(r.iter().map(|v| v / beta).collect());
        // columns of the rotated Hessenberg matrix, i.e. R
        let mut hess: Vec<Vec<C64>> = Vec::with_capacity(k_max);
        let mut rot: Vec<(f64, C64)> = Vec::with_capacity(k_max);
        let mut g = vec![ZERO; k_max + 1];
        g[0] = C64::new(beta, 0.0);
        let mut k = 0;
        while k < k_max && total < cfg.max_iters {
            m.apply(&basis[k], &mut z)?;
            a.apply(&z, &mut w)?;
            check_finite(&w, "Krylov vector")?;
            let w0 = norm(&w);
            let mut h = vec![ZERO; k + 2];
            for (hi, v) in h.iter_mut().zip(&basis) {
                *hi = dot(v, &w);
                axpy(-*hi, v, &mut w);
            }
            if norm(&w) < REORTH_RATIO * w0 {
                for (hi, v) in h.iter_mut().zip(&basis) {
                    let c = dot(v, &w);
                    *hi += c;
                    axpy(-c, v, &mut w);
                }
            }
            let hnext = norm(&w);
            h[k + 1] = C64::new(hnext, 0.0);
            for (i, &(c, s)) in rot.iter().enumerate() {
                let (p, q) = rotate(c, s, h[i], h[i + 1]);
                h[i] = p;
                h[i + 1] = q;
            }
            let (c, s) = givens(h[k], h[k + 1]);
            let (p, _) = rotate(c, s, h[k], h[k + 1]);
            h[k] = p;
            h[k + 1] = ZERO;
            let (gk, gk1) = rotate(c, s, g[k], ZERO);
            g[k] = gk;
            g[k + 1] = gk1;
            rot.push((c, s));
            h.truncate(k + 1);
            hess.push(h);
            total += 1;
            k += 1;

            let est = g[k].norm() / bnorm;
            if !est.is_finite() {
                return Err(Error::NumericalFailure(
                    "GMRES residual estimate is not finite".into(),
                ));
            }
            history.push(est);
            let breakdown = hnext <= 1e-14 * w0.max(f64::MIN_POSITIVE);
            if est <= cfg.tol || breakdown {
                break;
            }
            basis.push(w.iter().map(|v| v / hnext).collect());
        }

        // back substitution R y = g
        let mut y = vec![ZERO; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for (j, yj) in y.iter().enumerate().skip(i + 1) {
                s -= hess[j][i] * yj;
            }
            if hess[i][i] == ZERO {
                return Err(Error::NumericalFailure(
                    "singular GMRES least-squares system".into(),
                ));
            }
            y[i] = s / hess[i][i];
        }
        w.fill(ZERO);
        for (v, yi) in basis.iter().zip(&y) {
            axpy(*yi, v, &mut w);
        }
        m.apply(&w, &mut z)?;
        for (xi, zi) in x.iter_mut().zip(&z) {
            *xi += zi;
        }
        check_finite(&x, "GMRES iterate")?;

        a.apply(&x, &mut w)?;
        for ((ri, bi), wi) in r.iter_mut().zip(b).zip(&w) {
            *ri = bi - wi;
        }
    };

    Ok((
        x,
        SolveStats {
            n_iter: total,
            history: ResidualHistory(history),
            converged,
            rel_res,
            t_iter: start.elapsed(),
        },
    ))
}

/// `n_iter / max(nb_x, nb_y)`, rounded half away from zero.
pub fn equivalent_sweeps(n_iter: usize, nb_x: usize, nb_y: usize) -> usize {
    let nb = nb_x.max(nb_y).max(1);
    (n_iter as f64 / nb as f64).round() as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid2D;

    struct Dense(Vec<Vec<C64>>);

    impl LinearMap for Dense {
        fn dim(&self) -> usize {
            self.0.len()
        }

        fn apply(&self, x: &[C64], y: &mut [C64]) -> Result<()> {
            for (yi, row) in y.iter_mut().zip(&self.0) {
                *yi = row.iter().zip(x).map(|(a, b)| a * b).sum();
            }
            Ok(())
        }
    }

    fn test_matrix(n: usize) -> Dense {
        let mut a = vec![vec![ZERO; n]; n];
        for (i, row) in a.iter_mut().enumerate() {
            row[i] = C64::new(2.0 + (i % 3) as f64, 0.3 * i as f64 / n as f64);
            if i + 1 < n {
                row[i + 1] = C64::new(-0.7, 0.2);
            }
            if i > 0 {
                row[i - 1] = C64::new(-0.4, -0.1);
            }
        }
        Dense(a)
    }

    fn rhs(n: usize) -> Vec<C64> {
        (0..n)
            .map(|i| C64::new((i as f64).sin(), (0.5 * i as f64).cos()))
            .collect()
    }

    #[test]
    fn identity_converges_in_one_step() {
        let b = rhs(12);
        let (u, st) = gmres(&Identity(12), &Identity(12), &b, &GmresConfig::default()).unwrap();
        assert_eq!(st.n_iter, 1);
        assert!(st.converged);
        for (x, y) in u.iter().zip(&b) {
            assert!((x - y).norm() < 1e-14);
        }
        assert_eq!(st.history.len(), 2);
        assert_eq!(st.history.first(), 1.0);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let (u, st) = gmres(
            &Identity(5),
            &Identity(5),
            &[ZERO; 5],
            &GmresConfig::default(),
        )
        .unwrap();
        assert!(u.iter().all(|v| *v == ZERO));
        assert_eq!(st.n_iter, 0);
        assert!(st.converged);
    }

    #[test]
    fn restarted_solve_reaches_tolerance() {
        let a = test_matrix(60);
        let b = rhs(60);
        let cfg = GmresConfig::new(5, 500, 1e-10).unwrap();
        let (u, st) = gmres(&a, &Identity(60), &b, &cfg).unwrap();
        assert!(st.converged);
        assert_eq!(st.history.len(), st.n_iter + 1);
        let mut au = vec![ZERO; 60];
        a.apply(&u, &mut au).unwrap();
        let res: Vec<C64> = b.iter().zip(&au).map(|(x, y)| x - y).collect();
        assert!(norm(&res) / norm(&b) <= 1e-10);
        assert!((st.rel_res - norm(&res) / norm(&b)).abs() < 1e-12);
    }

    #[test]
    fn estimates_decrease_within_cycle() {
        let a = test_matrix(40);
        let b = rhs(40);
        let cfg = GmresConfig::new(40, 40, 1e-14).unwrap();
        let (_, st) = gmres(&a, &Identity(40), &b, &cfg).unwrap();
        for w in st.history.as_slice().windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn iteration_cap_reports_not_converged() {
        let a = test_matrix(40);
        let cfg = GmresConfig::new(3, 4, 1e-14).unwrap();
        let (_, st) = gmres(&a, &Identity(40), &rhs(40), &cfg).unwrap();
        assert!(!st.converged);
        assert_eq!(st.n_iter, 4);
        assert!(st.rel_res > 1e-14);
    }

    #[test]
    fn nan_is_a_numerical_failure() {
        let mut a = test_matrix(4);
        a.0[2][2] = C64::new(f64::NAN, 0.0);
        let err = gmres(&a, &Identity(4), &rhs(4), &GmresConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NumericalFailure(_)));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        assert!(gmres(&Identity(3), &Identity(4), &rhs(3), &GmresConfig::default()).is_err());
        assert!(GmresConfig::new(0, 10, 1e-10).is_err());
        assert!(GmresConfig::new(10, 10, 0.0).is_err());
    }

    #[test]
    fn sparse_operator_is_a_linear_map() {
        let g = Grid2D::new(3, 3, 1.0, 1.0, (0.0, 0.0), 1).unwrap();
        let diag: Vec<_> = (0..9).map(|p| (p, p, C64::new(2.0, 0.0))).collect();
        let op = SparseOperator::from_triplets(&g, &diag).unwrap();
        let (u, st) = gmres(&op, &Identity(9), &rhs(9), &GmresConfig::default()).unwrap();
        assert_eq!(st.n_iter, 1);
        for (x, y) in u.iter().zip(rhs(9)) {
            assert!((x * 2.0 - y).norm() < 1e-14);
        }
    }

    #[test]
    fn sweep_rounding() {
        assert_eq!(equivalent_sweeps(53, 8, 8), 7);
        assert_eq!(equivalent_sweeps(9, 2, 2), 5);
        assert_eq!(equivalent_sweeps(52, 8, 8), 7);
        assert_eq!(equivalent_sweeps(17, 1, 1), 17);
        assert_eq!(equivalent_sweeps(10, 4, 2), 3);
    }

    #[test]
    fn empty_history_rejected() {
        assert!(ResidualHistory::new(vec![]).is_err());
        assert_eq!(ResidualHistory::new(vec![1.0, 0.5]).unwrap().last(), 0.5);
    }
}
