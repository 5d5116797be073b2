//! Order-zero Bessel functions of real positive argument.
//!
//! Power series up to `x = 12`, Hankel's asymptotic expansion beyond.

use std::f64::consts::{FRAC_PI_4, PI};

use crate::C64;

const SERIES_LIMIT: f64 = 12.0;
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `J0(x)` and `Y0(x)` together; `x > 0`.
pub fn j0_y0(x: f64) -> (f64, f64) {
    if x <= SERIES_LIMIT {
        series(x)
    } else {
        asymptotic(x)
    }
}

pub fn j0(x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    j0_y0(x.abs()).0
}

/// `Y0(x)`; NaN for `x <= 0`.
pub fn y0(x: f64) -> f64 {
    if x <= 0.0 {
        return f64::NAN;
    }
    j0_y0(x).1
}

/// `H0⁽¹⁾(x) = J0(x) + i Y0(x)`.
pub fn hankel1_0(x: f64) -> C64 {
    let (j, y) = j0_y0(x);
    C64::new(j, y)
}

fn series(x: f64) -> (f64, f64) {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut j = 1.0;
    // Σ (-1)^(k+1) H_k q^k / (k!)²
    let mut s = 0.0;
    let mut harmonic = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        term *= -q / (kf * kf);
        harmonic += 1.0 / kf;
        j += term;
        s -= harmonic * term;
        if term.abs() < 1e-18 * j.abs().max(1e-3) && k > 2 {
            break;
        }
    }
    let y = (2.0 / PI) * (((0.5 * x).ln() + EULER_GAMMA) * j + s);
    (j, y)
}

fn asymptotic(x: f64) -> (f64, f64) {
    // a_k = Π_{m=1..k} (-(2m-1)²) / (k! 8^k)
    let mut p = 1.0;
    let mut q = 0.0;
    let mut a = 1.0;
    let mut prev = f64::INFINITY;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        a *= -(odd * odd) / (k as f64 * 8.0 * x);
        if a.abs() >= prev || a.abs() < 1e-18 {
            break;
        }
        prev = a.abs();
        // even k feed P with sign (-1)^(k/2), odd k feed Q with (-1)^((k-1)/2)
        match k % 4 {
            0 => p += a,
            1 => q += a,
            2 => p -= a,
            _ => q -= a,
        }
    }
    let chi = x - FRAC_PI_4;
    let amp = (2.0 / (PI * x)).sqrt();
    let (s, c) = chi.sin_cos();
    (amp * (p * c - q * s), amp * (p * s + q * c))
}
