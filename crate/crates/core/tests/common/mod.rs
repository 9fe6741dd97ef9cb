//! Independent reference implementations used by the integration tests.
//!
//! Everything here works from the definitions (direct kernel sums, plain
//! adaptive Simpson) and shares no code with the recursions under test.

#![allow(dead_code)]

use hawkes_qla::events::EventStream;
use hawkes_qla::models::{HawkesParams, SquareMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `ε_{αβ}(t) = Σ_{T_i < t, m_i = β} c_{αβ} e^{-a_{αβ}(t - T_i)}`.
pub fn direct_epsilon(theta: &HawkesParams, times: &[f64], marks: &[usize], t: f64) -> Vec<f64> {
    let d = theta.dim();
    let mut out = vec![0.0; d * d];
    for (&ti, &b) in times.iter().zip(marks) {
        if ti >= t {
            break;
        }
        for r in 0..d {
            out[r * d + b] += theta.c()[(r, b)] * (-theta.a()[(r, b)] * (t - ti)).exp();
        }
    }
    out
}

/// `η_{αβ}(t) = Σ_{T_i < t, m_i = β} c_{αβ}(t - T_i) e^{-a_{αβ}(t - T_i)}`.
pub fn direct_eta(theta: &HawkesParams, times: &[f64], marks: &[usize], t: f64) -> Vec<f64> {
    let d = theta.dim();
    let mut out = vec![0.0; d * d];
    for (&ti, &b) in times.iter().zip(marks) {
        if ti >= t {
            break;
        }
        for r in 0..d {
            out[r * d + b] += theta.c()[(r, b)] * (t - ti) * (-theta.a()[(r, b)] * (t - ti)).exp();
        }
    }
    out
}

/// `λ^α(t-)` by direct summation over the history.
pub fn direct_intensity(theta: &HawkesParams, stream: &EventStream, alpha: usize, t: f64) -> f64 {
    let mut lam = theta.nu()[alpha];
    for (ti, b) in stream.iter() {
        if ti >= t {
            break;
        }
        lam += theta.c()[(alpha, b)] * (-theta.a()[(alpha, b)] * (t - ti)).exp();
    }
    lam
}

/// `λ^α(s)` for `s` in the inter-event interval starting at `from`: the
/// history is every event at or before `from`.
pub fn interval_intensity(theta: &HawkesParams, stream: &EventStream, alpha: usize, from: f64, s: f64) -> f64 {
    let mut lam = theta.nu()[alpha];
    for (ti, b) in stream.iter() {
        if ti > from {
            break;
        }
        lam += theta.c()[(alpha, b)] * (-theta.a()[(alpha, b)] * (s - ti)).exp();
    }
    lam
}

fn simpson_step<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64, m: f64, fm: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fb, fm) = (f(a), f(b), f(m));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(&f, a, fa, b, fb, m, fm, whole, tol, 40)
}

/// `l_T = Σ_i log λ^{m_i}(T_i-) - Σ_α ∫₀ᵀ λ^α ds`, with the integral taken by
/// adaptive Simpson on each inter-event interval, where `λ` is smooth.
pub fn brute_force_loglik(theta: &HawkesParams, stream: &EventStream) -> f64 {
    let d = theta.dim();
    let mut sum_log = 0.0;
    for (ti, m) in stream.iter() {
        sum_log += direct_intensity(theta, stream, m, ti).ln();
    }
    let mut knots = vec![0.0];
    knots.extend(stream.times());
    knots.push(stream.horizon());
    let mut integral = 0.0;
    for w in knots.windows(2) {
        for alpha in 0..d {
            let f = |x: f64| interval_intensity(theta, stream, alpha, w[0], x);
            integral += adaptive_simpson(f, w[0], w[1], 1e-14 * (w[1] - w[0]).max(1e-3));
        }
    }
    sum_log - integral
}

/// Random stationary Hawkes parameters: kernel ratios `c/a` drawn from
/// `(0.05, 0.8)` when `d = 1` and `(0.05, 0.7/d)` otherwise, so `ρ(Φ) < 0.8`.
pub fn random_hawkes(rng: &mut impl Rng, d: usize) -> HawkesParams {
    let nu: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..1.5)).collect();
    let a: Vec<f64> = (0..d * d).map(|_| rng.random_range(1.0..3.0)).collect();
    let phi_max = if d == 1 { 0.8 } else { 0.7 / d as f64 };
    let c: Vec<f64> = a.iter().map(|&ak| ak * rng.random_range(0.05..phi_max)).collect();
    HawkesParams::new(
        nu,
        SquareMatrix::from_row_major(d, c).unwrap(),
        SquareMatrix::from_row_major(d, a).unwrap(),
        None,
    )
    .unwrap()
}

/// Relative error `|x - y| / max(|y|, floor)`.
pub fn rel_err(x: f64, y: f64, floor: f64) -> f64 {
    (x - y).abs() / y.abs().max(floor)
}
