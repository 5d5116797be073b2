//! Reference computations shared by the integration tests. Nothing here
//! calls into the library's numerical kernels.

#![allow(dead_code)]

use std::f64::consts::PI;

use helmddm::C64;

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * h);
    }
    s * h / 3.0
}

/// `J0(x) = (1/π) ∫_0^π cos(x sin θ) dθ`.
pub fn j0_quad(x: f64) -> f64 {
    simpson(|t| (x * t.sin()).cos(), 0.0, PI, 20_000) / PI
}

/// `Y0(x) = (1/π) ∫_0^π sin(x sin θ) dθ − (2/π) ∫_0^∞ e^{−x sinh t} dt`.
pub fn y0_quad(x: f64) -> f64 {
    let first = simpson(|t| (x * t.sin()).sin(), 0.0, PI, 20_000) / PI;
    let t_max = (45.0 / x).asinh();
    let second = simpson(|t| (-x * t.sinh()).exp(), 0.0, t_max, 40_000);
    first - 2.0 / PI * second
}

/// Dense complex Gaussian elimination with partial pivoting.
pub fn dense_lu_solve(a: &[Vec<C64>], b: &[C64]) -> Vec<C64> {
    let n = b.len();
    let mut m: Vec<Vec<C64>> = a.to_vec();
    let mut x = b.to_vec();
    for k in 0..n {
        let mut p = k;
        for i in k + 1..n {
            if m[i][k].norm() > m[p][k].norm() {
                p = i;
            }
        }
        m.swap(k, p);
        x.swap(k, p);
        let pivot = m[k][k];
        assert!(pivot.norm() > 0.0, "singular reference system");
        for i in k + 1..n {
            let l = m[i][k] / pivot;
            for j in k..n {
                let t = m[k][j];
                m[i][j] -= l * t;
            }
            let t = x[k];
            x[i] -= l * t;
        }
    }
    for k in (0..n).rev() {
        let mut s = x[k];
        for j in k + 1..n {
            s -= m[k][j] * x[j];
        }
        x[k] = s / m[k][k];
    }
    x
}

pub fn rel_err(a: &[C64], b: &[C64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}
