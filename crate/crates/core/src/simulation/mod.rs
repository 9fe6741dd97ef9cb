//! Samplers for the supported models.
//!
//! * [`simulate_thinning`]: Ogata thinning for any model exposing a bound on
//!   its total intensity that holds until the next accepted event.
//! * [`simulate_exact`]: exponential Hawkes by inversion of the
//!   inter-arrival law. Given the excitation state `ε` just after an event,
//!   the waiting time `τ` has density
//!
//!   ```text
//!   f(τ) = μ(τ) exp(-∫_0^τ μ),   μ(τ) = Σ_α ν_α + Σ_{α,β} ε_{αβ} e^{-a_{αβ} τ}
//!   ```
//!
//!   and the jumping component is `α` with probability `μ^α(τ) / μ(τ)`.
//! * [`simulate_lob`]: event-by-event simulation of the Markovian books.

mod lob;

pub use lob::{simulate_lob, LobModel, LobSimConfig, LobSimOutput, LobSummary, TrajectoryPoint, REGENERATION_MAX};

use rand::Rng as _;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::{EventError, EventStream};
use crate::models::{HawkesParams, HawkesState, PoissonParams};
use crate::rng::{derive_seed, stream_rng, tag, Rng};

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("thinning bound {bound} below intensity {intensity} at t = {time}")]
    BoundViolation { bound: f64, intensity: f64, time: f64 },
    #[error("inter-arrival root search did not converge (target {target})")]
    RootFinding { target: f64 },
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error(transparent)]
    Events(#[from] EventError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub horizon: f64,
    pub seed: u64,
    /// Replication index; selects an independent random stream of `seed`.
    pub stream: u64,
    /// Run-in time simulated from the initial state and then discarded.
    pub burn_in: f64,
    /// Hawkes state at the start of the run-in; empty history when absent.
    pub initial: Option<HawkesState>,
}

impl SimConfig {
    pub fn new(horizon: f64, seed: u64) -> Self {
        Self { horizon, seed, stream: 0, burn_in: 0.0, initial: None }
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    pub fn with_burn_in(mut self, burn_in: f64) -> Self {
        self.burn_in = burn_in;
        self
    }

    fn check(&self) -> Result<(), SimulationError> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(SimulationError::Config(format!("horizon must be > 0, got {}", self.horizon)));
        }
        if !(self.burn_in >= 0.0 && self.burn_in.is_finite()) {
            return Err(SimulationError::Config(format!("burn_in must be >= 0, got {}", self.burn_in)));
        }
        Ok(())
    }

    pub(crate) fn rng(&self) -> Rng {
        stream_rng(derive_seed(self.seed, &[tag::SIMULATE]), self.stream)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput<S> {
    pub stream: EventStream,
    /// State at time 0 of the kept window, i.e. after the run-in.
    pub start_state: S,
    /// State at the horizon.
    pub end_state: S,
    pub proposals: usize,
    pub accepted: usize,
}

/// A model that Ogata thinning can drive.
pub trait Thinnable {
    type State: Clone;
    fn dim(&self) -> usize;
    fn initial_state(&self) -> Self::State;
    /// Upper bound on the total intensity until the next event.
    fn bound(&self, state: &Self::State) -> f64;
    fn intensity(&self, state: &Self::State, out: &mut [f64]);
    fn advance(&self, state: &mut Self::State, dt: f64);
    fn jump(&self, state: &mut Self::State, mark: usize);
}

impl Thinnable for HawkesParams {
    type State = HawkesState;

    fn dim(&self) -> usize {
        HawkesParams::dim(self)
    }

    fn initial_state(&self) -> HawkesState {
        HawkesState::zero(HawkesParams::dim(self))
    }

    /// Excitations only decay between events, so the current total works.
    fn bound(&self, state: &HawkesState) -> f64 {
        state.total_intensity(self)
    }

    fn intensity(&self, state: &HawkesState, out: &mut [f64]) {
        let d = HawkesParams::dim(self);
        for (r, o) in out.iter_mut().enumerate().take(d) {
            *o = self.nu()[r] + state.epsilon.row(r).iter().sum::<f64>();
        }
    }

    fn advance(&self, state: &mut HawkesState, dt: f64) {
        state.decay(self, dt);
    }

    fn jump(&self, state: &mut HawkesState, mark: usize) {
        state.jump(self, mark);
    }
}

impl Thinnable for PoissonParams {
    type State = ();

    fn dim(&self) -> usize {
        PoissonParams::dim(self)
    }

    fn initial_state(&self) {}

    fn bound(&self, _: &()) -> f64 {
        self.rate().iter().sum()
    }

    fn intensity(&self, _: &(), out: &mut [f64]) {
        out.copy_from_slice(self.rate());
    }

    fn advance(&self, _: &mut (), _: f64) {}

    fn jump(&self, _: &mut (), _: usize) {}
}

fn exp1(rng: &mut Rng) -> f64 {
    Exp1.sample(rng)
}

/// Index `k` with `Σ_{j<k} w_j ≤ x < Σ_{j≤k} w_j`, clamped to the last
/// positive weight.
fn pick(weights: &[f64], x: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last = k;
            acc += w;
            if x < acc {
                return k;
            }
        }
    }
    last
}

/// Collects events on `(0, burn_in + horizon]`, returning those after
/// `burn_in` shifted to `(0, horizon]`.
struct Recorder {
    burn_in: f64,
    horizon: f64,
    times: Vec<f64>,
    marks: Vec<usize>,
}

impl Recorder {
    fn push(&mut self, t: f64, mark: usize) {
        if t > self.burn_in {
            let s = t - self.burn_in;
            if s > 0.0 && s <= self.horizon && self.times.last().is_none_or(|&p| s > p) {
                self.times.push(s);
                self.marks.push(mark);
            }
        }
    }

    fn finish(self, dim: usize) -> Result<EventStream, SimulationError> {
        Ok(EventStream::new(self.times, self.marks, dim, self.horizon)?)
    }
}

fn snapshot_at<M: Thinnable>(model: &M, state: &M::State, dt: f64) -> M::State {
    let mut s = state.clone();
    model.advance(&mut s, dt);
    s
}

/// Ogata thinning with the bound refreshed at every proposal.
pub fn simulate_thinning<M: Thinnable>(
    model: &M,
    initial: M::State,
    cfg: &SimConfig,
) -> Result<SimOutput<M::State>, SimulationError> {
    cfg.check()?;
    let mut rng = cfg.rng();
    let d = model.dim();
    let total = cfg.burn_in + cfg.horizon;
    let mut rec = Recorder { burn_in: cfg.burn_in, horizon: cfg.horizon, times: Vec::new(), marks: Vec::new() };
    let mut state = initial;
    let mut start_state = (cfg.burn_in == 0.0).then(|| state.clone());
    let mut lambda = vec![0.0; d];
    let (mut t, mut proposals, mut accepted) = (0.0, 0, 0);
    loop {
        let bound = model.bound(&state);
        let w = if bound > 0.0 { exp1(&mut rng) / bound } else { f64::INFINITY };
        if start_state.is_none() && t + w > cfg.burn_in {
            start_state = Some(snapshot_at(model, &state, cfg.burn_in - t));
        }
        if t + w > total {
            let end = snapshot_at(model, &state, total - t);
            return Ok(SimOutput {
                stream: rec.finish(d)?,
                start_state: start_state.expect("set before the horizon"),
                end_state: end,
                proposals,
                accepted,
            });
        }
        t += w;
        proposals += 1;
        model.advance(&mut state, w);
        model.intensity(&state, &mut lambda);
        let lam: f64 = lambda.iter().sum();
        if lam > bound * (1.0 + 1e-12) {
            return Err(SimulationError::BoundViolation { bound, intensity: lam, time: t });
        }
        let u = rng.random::<f64>() * bound;
        if u < lam {
            let k = pick(&lambda, u);
            model.jump(&mut state, k);
            rec.push(t, k);
            accepted += 1;
        }
    }
}

/// `∫_0^τ μ` and `μ(τ)` for the inter-arrival law of [`simulate_exact`].
fn cumulative_rate(theta: &HawkesParams, state: &HawkesState, tau: f64) -> (f64, f64) {
    let a = theta.a().as_slice();
    let eps = state.epsilon.as_slice();
    let mut m = theta.total_baseline() * tau;
    let mut mu = theta.total_baseline();
    for k in 0..a.len() {
        if eps[k] != 0.0 {
            let damp = (-a[k] * tau).exp();
            m += eps[k] / a[k] * -(-a[k] * tau).exp_m1();
            mu += eps[k] * damp;
        }
    }
    (m, mu)
}

/// Density `μ(t) exp(-∫_0^t μ)` of the next inter-arrival from `state`.
pub fn conditional_jump_density(state: &HawkesState, theta: &HawkesParams, t: f64) -> f64 {
    let (m, mu) = cumulative_rate(theta, state, t);
    mu * (-m).exp()
}

/// Solves `∫_0^τ μ = target` by safeguarded Newton on the bracket
/// `[target / μ(0), target / ν̄]`.
fn invert_cumulative(theta: &HawkesParams, state: &HawkesState, target: f64) -> Result<f64, SimulationError> {
    let nu = theta.total_baseline();
    let mu0 = state.total_intensity(theta);
    let (mut lo, mut hi) = (target / mu0, target / nu);
    let tol = 1e-12 * (1.0 + target);
    let mut tau = lo;
    for _ in 0..200 {
        let (m, mu) = cumulative_rate(theta, state, tau);
        let r = m - target;
        if r.abs() <= tol {
            return Ok(tau);
        }
        if r < 0.0 {
            lo = tau;
        } else {
            hi = tau;
        }
        let newton = tau - r / mu;
        tau = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= f64::EPSILON * hi {
            return Ok(tau);
        }
    }
    Err(SimulationError::RootFinding { target })
}

/// Exponential Hawkes by inter-arrival inversion.
pub fn simulate_exact(
    theta: &HawkesParams,
    initial: HawkesState,
    cfg: &SimConfig,
) -> Result<SimOutput<HawkesState>, SimulationError> {
    cfg.check()?;
    let mut rng = cfg.rng();
    let d = theta.dim();
    let total = cfg.burn_in + cfg.horizon;
    let mut rec = Recorder { burn_in: cfg.burn_in, horizon: cfg.horizon, times: Vec::new(), marks: Vec::new() };
    let mut state = initial;
    let mut start_state = (cfg.burn_in == 0.0).then(|| state.clone());
    let mut mu = vec![0.0; d];
    let mut t = 0.0;
    let mut accepted = 0;
    let a = theta.a().clone();
    loop {
        let target = exp1(&mut rng);
        let remaining = total - t;
        let (m_rem, _) = cumulative_rate(theta, &state, remaining);
        let tau = if target >= m_rem { f64::INFINITY } else { invert_cumulative(theta, &state, target)? };
        if start_state.is_none() && t + tau > cfg.burn_in {
            start_state = Some(hawkes_decayed(theta, &state, cfg.burn_in - t));
        }
        if tau == f64::INFINITY || t + tau > total {
            return Ok(SimOutput {
                stream: rec.finish(d)?,
                start_state: start_state.expect("set before the horizon"),
                end_state: hawkes_decayed(theta, &state, remaining),
                proposals: accepted,
                accepted,
            });
        }
        for (r, m) in mu.iter_mut().enumerate() {
            *m = theta.nu()[r]
                + (0..d).map(|b| state.epsilon[(r, b)] * (-a[(r, b)] * tau).exp()).sum::<f64>();
        }
        let total_mu: f64 = mu.iter().sum();
        let k = pick(&mu, rng.random::<f64>() * total_mu);
        state.decay(theta, tau);
        state.jump(theta, k);
        t += tau;
        rec.push(t, k);
        accepted += 1;
    }
}

fn hawkes_decayed(theta: &HawkesParams, state: &HawkesState, dt: f64) -> HawkesState {
    let mut s = state.clone();
    s.decay(theta, dt);
    s
}

/// Sampler choice exposed to configs and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampler {
    Thinning,
    Exact,
}

/// Simulates a Hawkes path with either sampler from `cfg.initial` (or an
/// empty history).
pub fn simulate_hawkes(
    theta: &HawkesParams,
    sampler: Sampler,
    cfg: &SimConfig,
) -> Result<SimOutput<HawkesState>, SimulationError> {
    let init = cfg.initial.clone().unwrap_or_else(|| HawkesState::zero(theta.dim()));
    if init.dim() != theta.dim() {
        return Err(SimulationError::Config(format!(
            "initial state has dimension {}, parameters {}",
            init.dim(),
            theta.dim()
        )));
    }
    match sampler {
        Sampler::Thinning => simulate_thinning(theta, init, cfg),
        Sampler::Exact => simulate_exact(theta, init, cfg),
    }
}

/// Two Hawkes paths with the same parameters from different states, driven
/// by common random numbers: both thin the same proposals against the larger
/// of their bounds and select marks from the same uniform. Returns the total
/// intensities `(λ_A(t-), λ_B(t-))` at each sorted grid time.
pub fn coupled_intensities(
    theta: &HawkesParams,
    state_a: &HawkesState,
    state_b: &HawkesState,
    grid: &[f64],
    rng: &mut Rng,
) -> Vec<(f64, f64)> {
    let d = theta.dim();
    let mut sa = state_a.clone();
    let mut sb = state_b.clone();
    let mut la = vec![0.0; d];
    let mut lb = vec![0.0; d];
    let mut out = Vec::with_capacity(grid.len());
    let mut t = 0.0;
    let mut gi = 0;
    let horizon = grid.last().copied().unwrap_or(0.0);
    loop {
        let bound = sa.total_intensity(theta).max(sb.total_intensity(theta));
        let w = exp1(rng) / bound;
        while gi < grid.len() && grid[gi] <= t + w {
            let dt = grid[gi] - t;
            out.push((hawkes_decayed(theta, &sa, dt).total_intensity(theta), hawkes_decayed(theta, &sb, dt).total_intensity(theta)));
            gi += 1;
        }
        if t + w > horizon {
            return out;
        }
        t += w;
        sa.decay(theta, w);
        sb.decay(theta, w);
        theta.intensity(&sa, &mut la);
        theta.intensity(&sb, &mut lb);
        let u = rng.random::<f64>() * bound;
        if u < la.iter().sum::<f64>() {
            sa.jump(theta, pick(&la, u));
        }
        if u < lb.iter().sum::<f64>() {
            sb.jump(theta, pick(&lb, u));
        }
    }
}
