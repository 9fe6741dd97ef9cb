use nalgebra::DVector;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::optimizer::{self, Bound, Settings};
use super::{check_box, log_hessian, rows, spd_inverse, EstimationError};
use crate::events::EventStream;
use crate::likelihood::{empirical_fisher, IntensityModel, LikelihoodError, Order};
use crate::models::ParamBox;
use crate::rng::{derive_seed, stream_rng, tag};
use crate::stats::normal_quantile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QmleOptions {
    pub starts: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Explicit first start; the moment-based start is used when absent.
    pub init: Option<Vec<f64>>,
}

impl Default for QmleOptions {
    fn default() -> Self {
        Self { starts: 5, tol: 1e-8, max_iter: 500, seed: 0, init: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundFlag {
    Lower,
    Upper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub param_names: Vec<String>,
    pub theta_hat: Vec<f64>,
    pub loglik: f64,
    pub horizon: f64,
    pub n_events: usize,
    /// `Γ̂_T(θ̂)`, one inner vector per row.
    pub gamma_hat: Vec<Vec<f64>>,
    /// `sqrt(diag(Γ̂⁻¹) / T)`; absent when `Γ̂` is singular.
    pub std_errors: Option<Vec<f64>>,
    pub iterations: usize,
    /// `‖∂l_T‖∞` over coordinates not held at a bound.
    pub gradient_norm: f64,
    pub tolerance: f64,
    pub converged: bool,
    pub starts_tried: usize,
    pub starts_converged: usize,
    pub at_bound: Vec<Option<BoundFlag>>,
    /// `l_T` along the accepted iterates of the winning start.
    pub history: Vec<f64>,
    pub warnings: Vec<String>,
}

struct StartResult {
    theta: Vec<f64>,
    loglik: f64,
    iterations: usize,
    gradient_norm: f64,
    converged: bool,
    history: Vec<f64>,
    bounds: Vec<Bound>,
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut r = 0.0;
    while i > 0 {
        r += (i % base) as f64 * inv;
        i /= base;
        inv /= base as f64;
    }
    r
}

const PRIMES: [u64; 24] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89];

/// Halton points in the log-box with a seed-dependent Cranley–Patterson shift.
fn quasi_random_starts(bounds: &ParamBox, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let n = bounds.len();
    let mut rng = stream_rng(derive_seed(seed, &[tag::FIT]), 0);
    let shift: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let (lo, hi) = (bounds.log_lower(), bounds.log_upper());
    (1..=count as u64)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let base = PRIMES[j % PRIMES.len()];
                    let h = (radical_inverse(i, base) + shift[j]).fract();
                    (lo[j] + h * (hi[j] - lo[j])).exp()
                })
                .collect()
        })
        .collect()
}

/// `exp(u)` with coordinates on a log-bound mapped to the exact natural bound.
fn to_natural(u: &DVector<f64>, bounds: &ParamBox, lo: &[f64], hi: &[f64]) -> Vec<f64> {
    (0..u.len())
        .map(|i| {
            if u[i] <= lo[i] {
                bounds.lower()[i]
            } else if u[i] >= hi[i] {
                bounds.upper()[i]
            } else {
                u[i].exp()
            }
        })
        .collect()
}

fn local_search(
    stream: &EventStream,
    model: &dyn IntensityModel,
    bounds: &ParamBox,
    start: &[f64],
    opts: &QmleOptions,
) -> Result<StartResult, LikelihoodError> {
    let t = stream.horizon();
    let lo = bounds.log_lower();
    let hi = bounds.log_upper();
    let theta0 = bounds.clamp(start);
    let h0 = {
        let d = model.evaluate(stream, &theta0, Order::Hessian)?;
        let g: Vec<f64> = d.gradient.expect("requested").iter().copied().collect();
        spd_inverse(&log_hessian(&theta0, &g, &d.hessian.expect("requested"), t))
    };
    let u0: Vec<f64> = theta0.iter().map(|v| v.ln()).collect();
    let mut objective = |u: &DVector<f64>| {
        let theta = to_natural(u, bounds, &lo, &hi);
        let d = model.evaluate(stream, &theta, Order::Gradient)?;
        let g = d.gradient.expect("requested");
        let gu = DVector::from_iterator(u.len(), (0..u.len()).map(|i| -theta[i] * g[i] / t));
        Ok((-d.value / t, gu))
    };
    let natural_norm = |u: &DVector<f64>, g: &DVector<f64>, b: &[Bound]| {
        (0..u.len())
            .filter(|&i| b[i] == Bound::Free)
            .map(|i| (t * g[i] / u[i].exp()).abs())
            .fold(0.0, f64::max)
    };
    let tol = opts.tol;
    let stop = |u: &DVector<f64>, f: f64, g: &DVector<f64>, b: &[Bound]| {
        natural_norm(u, g, b) <= tol * (1.0 + f.abs())
    };
    let settings = Settings { max_iter: opts.max_iter, ..Settings::default() };
    let out = optimizer::minimize(&mut objective, &u0, &lo, &hi, h0, &settings, &stop)?;
    Ok(StartResult {
        theta: to_natural(&out.x, bounds, &lo, &hi),
        loglik: -out.f * t,
        iterations: out.iterations,
        gradient_norm: natural_norm(&out.x, &out.grad, &out.bounds),
        converged: out.converged,
        history: out.history.iter().map(|f| -f * t).collect(),
        bounds: out.bounds,
    })
}

/// Higher log-likelihood wins; within rounding of each other a converged
/// start beats one that stalled.
fn better(s: &StartResult, b: &StartResult) -> bool {
    let tie = 1e-10 * (1.0 + b.loglik.abs());
    if (s.loglik - b.loglik).abs() <= tie && s.converged != b.converged {
        return s.converged;
    }
    s.loglik > b.loglik
}

/// Multistart QMLE: the best local maximum of `l_T` over the box.
pub fn qmle(
    stream: &EventStream,
    model: &dyn IntensityModel,
    bounds: &ParamBox,
    opts: &QmleOptions,
) -> Result<FitResult, EstimationError> {
    let n = model.n_params();
    check_box(bounds, n)?;
    if opts.starts == 0 {
        return Err(EstimationError::InvalidOptions("starts must be at least 1".into()));
    }
    let mut starts = vec![match &opts.init {
        Some(v) if v.len() == n => v.clone(),
        Some(v) => return Err(EstimationError::Dimension { got: v.len(), expected: n }),
        None => model.moment_start(stream),
    }];
    starts.extend(quasi_random_starts(bounds, opts.starts - 1, opts.seed));

    let results: Vec<Result<StartResult, LikelihoodError>> =
        starts.par_iter().map(|s| local_search(stream, model, bounds, s, opts)).collect();
    let mut hard_error = None;
    let mut best: Option<StartResult> = None;
    let mut starts_converged = 0;
    for r in results {
        match r {
            Ok(s) => {
                starts_converged += s.converged as usize;
                if best.as_ref().is_none_or(|b| better(&s, b)) {
                    best = Some(s);
                }
            }
            Err(LikelihoodError::ZeroIntensityAtEvent { .. }) => {}
            Err(e) => hard_error = Some(e),
        }
    }
    let Some(best) = best else {
        return Err(match hard_error {
            Some(e) => e.into(),
            None => EstimationError::NoConvergence { starts: starts.len() },
        });
    };

    let t = stream.horizon();
    let lo = bounds.lower();
    let hi = bounds.upper();
    let at_bound = best
        .theta
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v <= lo[i] {
                Some(BoundFlag::Lower)
            } else if v >= hi[i] {
                Some(BoundFlag::Upper)
            } else {
                None
            }
        })
        .collect();
    let gamma = empirical_fisher(stream, model, &best.theta)?;
    let mut warnings = Vec::new();
    let std_errors = match spd_inverse(&gamma) {
        Some(inv) => Some((0..n).map(|i| (inv[(i, i)] / t).sqrt()).collect()),
        None => {
            warnings.push(EstimationError::SingularInformation.code().to_string());
            None
        }
    };
    if !best.converged {
        warnings.push(format!("not converged after {} iterations", best.iterations));
    }
    debug_assert_eq!(best.bounds.len(), n);
    Ok(FitResult {
        param_names: model.param_names(),
        theta_hat: best.theta,
        loglik: best.loglik,
        horizon: t,
        n_events: stream.len(),
        gamma_hat: rows(&gamma),
        std_errors,
        iterations: best.iterations,
        gradient_norm: best.gradient_norm,
        tolerance: opts.tol,
        converged: best.converged,
        starts_tried: starts.len(),
        starts_converged,
        at_bound,
        history: best.history,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
}

/// Wald intervals `θ̂_i ± z_{(1+level)/2} · se_i`.
pub fn confidence_intervals(fit: &FitResult, level: f64) -> Result<Vec<ConfidenceInterval>, EstimationError> {
    if !(0.0..1.0).contains(&level) {
        return Err(EstimationError::InvalidOptions(format!("level {level} outside [0, 1)")));
    }
    let se = fit.std_errors.as_ref().ok_or(EstimationError::SingularInformation)?;
    let z = if level == 0.0 { 0.0 } else { normal_quantile(0.5 * (1.0 + level)) };
    Ok(fit
        .theta_hat
        .iter()
        .zip(se)
        .map(|(&th, &s)| ConfidenceInterval { lower: th - z * s, upper: th + z * s })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{HawkesModel, PoissonModel};

    fn poisson_stream() -> EventStream {
        let times: Vec<f64> = (1..=50).map(|i| i as f64 * 0.2 - 0.1).collect();
        EventStream::new(times, vec![0; 50], 1, 10.0).unwrap()
    }

    #[test]
    fn poisson_mle_is_count_over_horizon() {
        let m = PoissonModel::new(1);
        let fit = qmle(&poisson_stream(), &m, &m.default_box(), &QmleOptions::default()).unwrap();
        assert!((fit.theta_hat[0] - 5.0).abs() < 1e-8);
        assert!(fit.converged);
        assert!((fit.gamma_hat[0][0] - 1.0 / fit.theta_hat[0]).abs() < 1e-10);
        let ci = confidence_intervals(&fit, 0.95).unwrap();
        assert!((ci[0].lower - 3.6140).abs() < 1e-4 && (ci[0].upper - 6.3860).abs() < 1e-4);
        let point = confidence_intervals(&fit, 0.0).unwrap();
        assert_eq!((point[0].lower, point[0].upper), (fit.theta_hat[0], fit.theta_hat[0]));
        assert!(fit.history.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn empty_stream_pins_baseline_at_lower_bound() {
        let m = HawkesModel::new(1);
        let b = m.default_box();
        let fit = qmle(&EventStream::empty(1, 10.0).unwrap(), &m, &b, &QmleOptions::default()).unwrap();
        assert_eq!(fit.theta_hat[0], b.lower()[0]);
        assert_eq!(fit.at_bound[0], Some(BoundFlag::Lower));
        assert!(fit.converged);
        assert!(fit.std_errors.is_none());
        assert!(matches!(confidence_intervals(&fit, 0.9), Err(EstimationError::SingularInformation)));
    }

    #[test]
    fn halton_starts_are_deterministic_and_inside() {
        let b = HawkesModel::new(2).default_box();
        let s1 = quasi_random_starts(&b, 4, 9);
        assert_eq!(s1, quasi_random_starts(&b, 4, 9));
        assert_ne!(s1, quasi_random_starts(&b, 4, 10));
        assert!(s1.iter().all(|p| b.contains(p)));
        assert!((radical_inverse(3, 2) - 0.75).abs() < 1e-15);
    }
}
