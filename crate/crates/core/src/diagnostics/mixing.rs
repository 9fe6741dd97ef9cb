use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::DiagnosticsError;
use crate::events::EventStream;
use crate::models::{HawkesParams, HawkesState};
use crate::rng::{derive_seed, stream_rng, tag};
use crate::simulation::{coupled_intensities, simulate_thinning, SimConfig};
use crate::stats::{fit_line, geometric_grid, mean, variance, LineFit};

/// Spacing of the base sampling times `s_j` along each path.
pub const SAMPLE_SPACING: f64 = 0.5;
const SMOOTHING_WINDOW: usize = 5;

pub fn default_lag_grid() -> Vec<f64> {
    geometric_grid(0.1, 50.0, 25)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingReport {
    pub lags: Vec<f64>,
    /// `ρ̂_u`: autocovariance of the total intensity, averaged over paths.
    pub covariance: Vec<f64>,
    pub stderr: Vec<f64>,
    pub variance: f64,
    pub variance_stderr: f64,
    /// `ρ̂_u / ρ̂_0`, absent when the variance is zero.
    pub ratio: Vec<Option<f64>>,
    /// `|ρ̂_u| ≤ 3·SE`.
    pub consistent_with_zero: Vec<bool>,
    /// Twice the standard error at the largest lag.
    pub noise_floor: f64,
    pub decay_rate: Option<f64>,
    /// `log ρ̂_u ≈ intercept + slope·u` over the leading lags above the
    /// noise floor.
    pub fit: Option<LineFit>,
    pub spectral_radius: f64,
    pub burn_in: f64,
    pub n_paths: usize,
    pub horizon: f64,
}

fn check_stationary(theta: &HawkesParams) -> Result<(f64, f64), DiagnosticsError> {
    let rho = theta.spectral_radius();
    match theta.default_burn_in() {
        Some(b) => Ok((rho, b)),
        None => Err(DiagnosticsError::Nonstationary(rho)),
    }
}

/// Total intensity `Σ_α λ^α(s-)` at sorted times, starting from `start`.
fn total_intensity_at(theta: &HawkesParams, start: &HawkesState, stream: &EventStream, times: &[f64]) -> Vec<f64> {
    let mut state = start.clone();
    let mut now = 0.0;
    let mut out = Vec::with_capacity(times.len());
    let mut events = stream.iter().peekable();
    for &q in times {
        while let Some(&(s, m)) = events.peek() {
            if s >= q {
                break;
            }
            state.decay(theta, s - now);
            state.jump(theta, m);
            now = s;
            events.next();
        }
        let mut probe = state.clone();
        probe.decay(theta, q - now);
        out.push(probe.total_intensity(theta));
    }
    out
}

/// Empirical stationary autocovariance of the total intensity at each lag,
/// from `n_paths` independent thinning paths of length `horizon` each
/// started after the default burn-in.
pub fn mixing_covariance(
    theta: &HawkesParams,
    lags: &[f64],
    n_paths: usize,
    horizon: f64,
    seed: u64,
) -> Result<MixingReport, DiagnosticsError> {
    let (spectral_radius, burn_in) = check_stationary(theta)?;
    if n_paths < 2 {
        return Err(DiagnosticsError::Input("need at least 2 paths".into()));
    }
    if lags.iter().any(|&u| !(u > 0.0)) {
        return Err(DiagnosticsError::Input("lags must be positive".into()));
    }
    let max_lag = lags.iter().copied().fold(0.0, f64::max);
    if !(horizon > max_lag + 2.0 * SAMPLE_SPACING) {
        return Err(DiagnosticsError::Input(format!("horizon {horizon} too short for lag {max_lag}")));
    }
    let path_seed = derive_seed(seed, &[tag::PATHS]);
    let per_path: Vec<Result<Vec<f64>, DiagnosticsError>> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let cfg = SimConfig::new(horizon, path_seed).with_stream(p as u64).with_burn_in(burn_in);
            let out = simulate_thinning(theta, HawkesState::zero(theta.dim()), &cfg)?;
            let base: Vec<f64> =
                (1..).map(|j| j as f64 * SAMPLE_SPACING).take_while(|&s| s <= horizon).collect();
            let x = total_intensity_at(theta, &out.start_state, &out.stream, &base);
            let m = mean(&x);
            let mut cov = vec![x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64];
            for &u in lags {
                let starts: Vec<f64> = base.iter().copied().take_while(|&s| s + u <= horizon).collect();
                let shifted: Vec<f64> = starts.iter().map(|s| s + u).collect();
                let y = total_intensity_at(theta, &out.start_state, &out.stream, &shifted);
                let c = x.iter().zip(&y).map(|(a, b)| (a - m) * (b - m)).sum::<f64>() / y.len() as f64;
                cov.push(c);
            }
            Ok(cov)
        })
        .collect();
    let per_path = per_path.into_iter().collect::<Result<Vec<_>, _>>()?;

    let column = |k: usize| -> (f64, f64) {
        let v: Vec<f64> = per_path.iter().map(|c| c[k]).collect();
        (mean(&v), (variance(&v) / n_paths as f64).sqrt())
    };
    let (var0, var0_se) = column(0);
    let (covariance, stderr): (Vec<f64>, Vec<f64>) = (1..=lags.len()).map(column).unzip();
    let largest = lags.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map_or(0, |(i, _)| i);
    let noise_floor = 2.0 * stderr.get(largest).copied().unwrap_or(0.0);
    // Leading run, in increasing lag, of estimates above both the floor and
    // three of their own standard errors.
    let mut order: Vec<usize> = (0..lags.len()).collect();
    order.sort_by(|&i, &j| lags[i].total_cmp(&lags[j]));
    let (xs, ys): (Vec<f64>, Vec<f64>) = order
        .iter()
        .take_while(|&&i| covariance[i] > noise_floor && covariance[i] > 3.0 * stderr[i])
        .map(|&i| (lags[i], covariance[i].ln()))
        .unzip();
    let fit = fit_line(&xs, &ys);
    Ok(MixingReport {
        lags: lags.to_vec(),
        ratio: covariance.iter().map(|c| (var0 > 0.0).then(|| c / var0)).collect(),
        consistent_with_zero: covariance.iter().zip(&stderr).map(|(c, s)| c.abs() <= 3.0 * s).collect(),
        covariance,
        stderr,
        variance: var0,
        variance_stderr: var0_se,
        noise_floor,
        decay_rate: fit.map(|f| -f.slope),
        fit,
        spectral_radius,
        burn_in,
        n_paths,
        horizon,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub t: Vec<f64>,
    /// Monte Carlo estimate of `E|λ_A(t) - λ_B(t)|` for the total intensity.
    pub mean_abs_difference: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Centred moving average over `5` grid points.
    pub smoothed: Vec<f64>,
    /// Smoothed trace never increases by more than 3 standard errors.
    pub nonincreasing: bool,
    /// Leading grid points whose estimate exceeds 3 standard errors.
    pub fit_points: usize,
    /// `log E|λ_A - λ_B| ≈ intercept + slope·t` on the fit points.
    pub fit: Option<LineFit>,
    pub decay_rate: Option<f64>,
    pub spectral_radius: f64,
    pub n_paths: usize,
}

/// Coupling of two paths with common random numbers from different states.
pub fn coupling_decay(
    theta: &HawkesParams,
    state_a: &HawkesState,
    state_b: &HawkesState,
    grid: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<CouplingReport, DiagnosticsError> {
    let (spectral_radius, _) = check_stationary(theta)?;
    if state_a.dim() != theta.dim() || state_b.dim() != theta.dim() {
        return Err(DiagnosticsError::Input("state dimension differs from parameters".into()));
    }
    if n_paths < 2 {
        return Err(DiagnosticsError::Input("need at least 2 paths".into()));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) || grid.iter().any(|&t| !(t >= 0.0)) {
        return Err(DiagnosticsError::Input("grid must be sorted and nonnegative".into()));
    }
    let path_seed = derive_seed(seed, &[tag::PATHS]);
    let diffs: Vec<Vec<f64>> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = stream_rng(path_seed, p as u64);
            coupled_intensities(theta, state_a, state_b, grid, &mut rng).iter().map(|(a, b)| (a - b).abs()).collect()
        })
        .collect();
    let n = grid.len();
    let mut mean_abs_difference = Vec::with_capacity(n);
    let mut stderr = Vec::with_capacity(n);
    for k in 0..n {
        let v: Vec<f64> = diffs.iter().map(|d| d[k]).collect();
        mean_abs_difference.push(mean(&v));
        stderr.push((variance(&v) / n_paths as f64).sqrt());
    }

    let half = SMOOTHING_WINDOW / 2;
    let window = |k: usize| k.saturating_sub(half)..(k + half + 1).min(n);
    let smoothed: Vec<f64> = (0..n).map(|k| mean(&mean_abs_difference[window(k)])).collect();
    let smoothed_se: Vec<f64> = (0..n)
        .map(|k| {
            let w = window(k);
            let len = w.len() as f64;
            stderr[w].iter().map(|s| s * s).sum::<f64>().sqrt() / len
        })
        .collect();
    let nonincreasing = (1..n).all(|k| {
        smoothed[k] <= smoothed[k - 1] + 3.0 * (smoothed_se[k].powi(2) + smoothed_se[k - 1].powi(2)).sqrt()
    });

    let fit_points =
        mean_abs_difference.iter().zip(&stderr).take_while(|(m, s)| **m > 0.0 && **m > 3.0 * **s).count();
    let ys: Vec<f64> = mean_abs_difference[..fit_points].iter().map(|m| m.ln()).collect();
    let fit = fit_line(&grid[..fit_points], &ys);
    Ok(CouplingReport {
        t: grid.to_vec(),
        mean_abs_difference,
        stderr,
        smoothed,
        nonincreasing,
        fit_points,
        decay_rate: fit.map(|f| -f.slope),
        fit,
        spectral_radius,
        n_paths,
    })
}
