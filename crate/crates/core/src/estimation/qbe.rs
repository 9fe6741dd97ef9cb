//! Quasi-Bayesian estimator by adaptive random-walk Metropolis.
//!
//! The chain runs on `u = log θ` restricted to the log-box. During burn-in
//! the proposal covariance tracks the empirical covariance of the chain and
//! a Robbins–Monro recursion steers the acceptance rate towards 0.234; both
//! are frozen afterwards so the retained draws come from a fixed kernel.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_box, log_hessian, qmle, spd_inverse, EstimationError, QmleOptions};
use crate::events::EventStream;
use crate::likelihood::{log_likelihood, IntensityModel, LikelihoodError, Order};
use crate::models::ParamBox;
use crate::rng::{derive_seed, stream_rng, tag, Rng};
use crate::stats::{effective_sample_size, gelman_rubin, mean, quantile_sorted, variance};

const TARGET_ACCEPTANCE: f64 = 0.234;
const QUANTILES: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

/// Prior density on the box.
#[derive(Clone, Default)]
pub enum Prior {
    /// Uniform in natural coordinates.
    #[default]
    Uniform,
    /// Uniform in `log θ`.
    LogUniform,
    /// User-supplied log density in natural coordinates (up to a constant).
    Custom { name: String, log_density: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync> },
}

impl Prior {
    pub fn describe(&self) -> String {
        match self {
            Prior::Uniform => "uniform on box".into(),
            Prior::LogUniform => "log-uniform on box".into(),
            Prior::Custom { name, .. } => format!("custom: {name}"),
        }
    }

    /// Log density of `u = log θ` up to a constant (includes the Jacobian).
    fn log_density_u(&self, theta: &[f64], u: &[f64]) -> f64 {
        let jac: f64 = u.iter().sum();
        match self {
            Prior::Uniform => jac,
            Prior::LogUniform => 0.0,
            Prior::Custom { log_density, .. } => log_density(theta) + jac,
        }
    }
}

impl fmt::Debug for Prior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcOptions {
    pub chains: usize,
    pub burn_in: usize,
    /// Post-burn-in iterations per chain; every `thin`-th is retained.
    pub iterations: usize,
    pub thin: usize,
    pub seed: u64,
    /// Starting point; a single-start QMLE is used when absent.
    pub init: Option<Vec<f64>>,
}

impl Default for McmcOptions {
    fn default() -> Self {
        Self { chains: 4, burn_in: 5000, iterations: 20000, thin: 4, seed: 0, init: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorQuantiles {
    pub q05: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesResult {
    pub param_names: Vec<String>,
    pub theta_tilde: Vec<f64>,
    pub posterior_sd: Vec<f64>,
    /// Monte Carlo standard error of each posterior-mean coordinate.
    pub mc_standard_error: Vec<f64>,
    pub acceptance_rate: f64,
    pub effective_sample_size: Vec<f64>,
    pub r_hat: Option<Vec<f64>>,
    pub quantiles: Vec<PosteriorQuantiles>,
    pub prior: String,
    pub chains: usize,
    pub draws_per_chain: usize,
    pub start: Vec<f64>,
    pub warnings: Vec<String>,
    /// Retained draws, chain after chain.
    #[serde(skip)]
    pub samples: Vec<Vec<f64>>,
}

struct Target<'a> {
    stream: &'a EventStream,
    model: &'a dyn IntensityModel,
    prior: &'a Prior,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Target<'_> {
    fn log_post(&self, u: &[f64]) -> Result<f64, LikelihoodError> {
        if u.iter().enumerate().any(|(i, &v)| v < self.lo[i] || v > self.hi[i]) {
            return Ok(f64::NEG_INFINITY);
        }
        let theta: Vec<f64> = u.iter().map(|v| v.exp()).collect();
        match log_likelihood(self.stream, self.model, &theta) {
            Ok(l) => Ok(l + self.prior.log_density_u(&theta, u)),
            Err(LikelihoodError::ZeroIntensityAtEvent { .. }) => Ok(f64::NEG_INFINITY),
            Err(e) => Err(e),
        }
    }
}

struct ChainOutput {
    draws: Vec<Vec<f64>>,
    accepted: usize,
    proposed: usize,
}

fn gaussian(rng: &mut Rng, n: usize) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

fn run_chain(
    target: &Target<'_>,
    start: &[f64],
    cov0: &DMatrix<f64>,
    opts: &McmcOptions,
    chain: usize,
) -> Result<ChainOutput, LikelihoodError> {
    let n = start.len();
    let mut rng = stream_rng(derive_seed(opts.seed, &[tag::BAYES]), chain as u64);
    let mut chol = cov0.clone().cholesky().expect("initial covariance is SPD").l();
    let mut log_scale = (2.38 / (n as f64).sqrt()).ln();
    let mut u = DVector::from_column_slice(start);
    if chain > 0 {
        let jitter = &chol * gaussian(&mut rng, n) * log_scale.exp();
        let cand = &u + jitter;
        for i in 0..n {
            u[i] = cand[i].clamp(target.lo[i], target.hi[i]);
        }
    }
    let mut lp = target.log_post(u.as_slice())?;
    if !lp.is_finite() {
        u = DVector::from_column_slice(start);
        lp = target.log_post(u.as_slice())?;
    }

    let mut run_mean = DVector::zeros(n);
    let mut run_m2 = DMatrix::zeros(n, n);
    let mut draws = Vec::with_capacity(opts.iterations / opts.thin.max(1) + 1);
    let (mut accepted, mut proposed) = (0, 0);
    let adapt_after = 50 * n.max(4);
    for it in 0..opts.burn_in + opts.iterations {
        let prop = &u + &chol * gaussian(&mut rng, n) * log_scale.exp();
        let lp_prop = target.log_post(prop.as_slice())?;
        let log_ratio = lp_prop - lp;
        let accept_prob = if log_ratio >= 0.0 { 1.0 } else { log_ratio.exp() };
        let accept = rng.random::<f64>() < accept_prob;
        if accept {
            u = prop;
            lp = lp_prop;
        }
        if it < opts.burn_in {
            let k = (it + 1) as f64;
            log_scale += (accept_prob - TARGET_ACCEPTANCE) / k.powf(0.6);
            let delta = &u - &run_mean;
            run_mean += &delta / k;
            run_m2 += &delta * (&u - &run_mean).transpose();
            if it + 1 >= adapt_after && (it + 1) % 100 == 0 {
                let mut cov = &run_m2 / (k - 1.0);
                for i in 0..n {
                    cov[(i, i)] += 1e-12;
                }
                if let Some(c) = cov.cholesky() {
                    chol = c.l();
                }
            }
        } else {
            proposed += 1;
            accepted += accept as usize;
            if (it - opts.burn_in) % opts.thin == 0 {
                draws.push(u.iter().map(|v| v.exp()).collect());
            }
        }
    }
    Ok(ChainOutput { draws, accepted, proposed })
}

/// Initial proposal covariance: the Laplace approximation in log coordinates,
/// each standard deviation capped at a quarter of the log-box width.
fn initial_covariance(
    stream: &EventStream,
    model: &dyn IntensityModel,
    theta: &[f64],
    width: &[f64],
) -> Result<DMatrix<f64>, LikelihoodError> {
    let n = theta.len();
    let t = stream.horizon();
    let d = model.evaluate(stream, theta, Order::Hessian)?;
    let g: Vec<f64> = d.gradient.expect("requested").iter().copied().collect();
    let h = log_hessian(theta, &g, &d.hessian.expect("requested"), t) * t;
    let cap: Vec<f64> = width.iter().map(|w| 0.25 * w).collect();
    let mut cov = spd_inverse(&h).unwrap_or_else(|| {
        DMatrix::from_diagonal(&DVector::from_iterator(n, cap.iter().map(|c| (0.1 * c).powi(2))))
    });
    let f: Vec<f64> = (0..n).map(|i| (cap[i] / cov[(i, i)].sqrt()).min(1.0)).collect();
    for i in 0..n {
        for j in 0..n {
            cov[(i, j)] *= f[i] * f[j];
        }
    }
    Ok(cov)
}

/// Posterior mean of `exp(l_T(θ)) p(θ)` on the box.
pub fn qbe(
    stream: &EventStream,
    model: &dyn IntensityModel,
    bounds: &ParamBox,
    prior: &Prior,
    opts: &McmcOptions,
) -> Result<BayesResult, EstimationError> {
    let n = model.n_params();
    check_box(bounds, n)?;
    if opts.chains == 0 || opts.thin == 0 || opts.iterations < opts.thin {
        return Err(EstimationError::InvalidOptions(
            "need at least one chain, thin >= 1 and iterations >= thin".into(),
        ));
    }
    let start = match &opts.init {
        Some(v) if v.len() == n => bounds.clamp(v),
        Some(v) => return Err(EstimationError::Dimension { got: v.len(), expected: n }),
        None => {
            let o = QmleOptions { starts: 1, seed: opts.seed, ..QmleOptions::default() };
            qmle(stream, model, bounds, &o)?.theta_hat
        }
    };
    let lo = bounds.log_lower();
    let hi = bounds.log_upper();
    let width: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| b - a).collect();
    let cov0 = initial_covariance(stream, model, &start, &width)?;
    let target = Target { stream, model, prior, lo, hi };
    let u0: Vec<f64> = start.iter().map(|v| v.ln()).collect();

    let outputs: Vec<ChainOutput> = (0..opts.chains)
        .into_par_iter()
        .map(|c| run_chain(&target, &u0, &cov0, opts, c))
        .collect::<Result<_, _>>()?;

    let per_chain: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|i| outputs.iter().map(|o| o.draws.iter().map(|d| d[i]).collect()).collect())
        .collect();
    let pooled: Vec<Vec<f64>> = per_chain.iter().map(|chains| chains.concat()).collect();
    let theta_tilde: Vec<f64> = pooled.iter().map(|x| mean(x)).collect();
    let posterior_sd: Vec<f64> = pooled.iter().map(|x| variance(x).max(0.0).sqrt()).collect();
    let ess: Vec<f64> = per_chain.iter().map(|c| effective_sample_size(c)).collect();
    let mcse: Vec<f64> = posterior_sd.iter().zip(&ess).map(|(s, e)| s / e.sqrt()).collect();
    let r_hat: Option<Vec<f64>> = per_chain.iter().map(|c| gelman_rubin(c)).collect();
    let quantiles = pooled
        .iter()
        .map(|x| {
            let mut s = x.clone();
            s.sort_by(f64::total_cmp);
            let q = QUANTILES.map(|p| quantile_sorted(&s, p));
            PosteriorQuantiles { q05: q[0], q25: q[1], q50: q[2], q75: q[3], q95: q[4] }
        })
        .collect();
    let accepted: usize = outputs.iter().map(|o| o.accepted).sum();
    let proposed: usize = outputs.iter().map(|o| o.proposed).sum();
    let mut warnings = Vec::new();
    let names = model.param_names();
    for (i, e) in ess.iter().enumerate() {
        if *e < 100.0 {
            warnings.push(format!("poor_mixing: ESS {e:.1} < 100 for {}", names[i]));
        }
    }
    let draws_per_chain = outputs[0].draws.len();
    Ok(BayesResult {
        param_names: names,
        theta_tilde,
        posterior_sd,
        mc_standard_error: mcse,
        acceptance_rate: accepted as f64 / proposed as f64,
        effective_sample_size: ess,
        r_hat,
        quantiles,
        prior: prior.describe(),
        chains: opts.chains,
        draws_per_chain,
        start,
        warnings,
        samples: outputs.into_iter().flat_map(|o| o.draws).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::PoissonModel;

    fn poisson_stream() -> EventStream {
        let times: Vec<f64> = (1..=50).map(|i| i as f64 * 0.2 - 0.1).collect();
        EventStream::new(times, vec![0; 50], 1, 10.0).unwrap()
    }

    #[test]
    fn deterministic_given_seed() {
        let m = PoissonModel::new(1);
        let opts = McmcOptions { chains: 2, burn_in: 300, iterations: 1000, thin: 2, seed: 4, init: None };
        let a = qbe(&poisson_stream(), &m, &m.default_box(), &Prior::Uniform, &opts).unwrap();
        let b = qbe(&poisson_stream(), &m, &m.default_box(), &Prior::Uniform, &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.samples, b.samples);
        assert!(a.acceptance_rate > 0.0 && a.acceptance_rate < 1.0);
        assert_eq!(a.samples.len(), 2 * 500);
    }

    #[test]
    fn tiny_box_confines_the_posterior_mean() {
        let m = PoissonModel::new(1);
        let b = ParamBox::around(&[3.0], 1e-6).unwrap();
        let opts = McmcOptions { chains: 2, burn_in: 200, iterations: 400, thin: 1, seed: 1, init: None };
        let r = qbe(&poisson_stream(), &m, &b, &Prior::Uniform, &opts).unwrap();
        assert!(b.contains(&r.theta_tilde), "{:?}", r.theta_tilde);
    }
}
