//! Exponential Hawkes intensities.
//!
//! # The model
//! ```text
//! λ^α(t) = ν_α + Σ_β Σ_{T_i^β < t} c_{αβ} exp(-a_{αβ} (t - T_i^β))
//!        = ν_α + Σ_β ε_{αβ}(t)
//! ```
//!
//! The elementary excitations `ε_{αβ}` make the process Markovian: between
//! jumps they decay geometrically, and a jump on component `β` adds
//! `c_{·β}` to column `β`. [`HawkesState`] also carries the time-weighted
//! companion `η_{αβ}(t) = Σ (t - T_i^β) c_{αβ} exp(-a_{αβ}(t - T_i^β))`, which
//! is `-∂ε/∂a`.

use serde::{Deserialize, Serialize};

use super::{check_nonnegative, check_positive, ParamBox, ParamError, SquareMatrix};
use crate::config::{ConfigError, KvConfig};
use crate::events::EventStream;

/// The triplet `θ = (ν, C, A)` with an optional structural-zero mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HawkesParams {
    nu: Vec<f64>,
    c: SquareMatrix,
    a: SquareMatrix,
    /// Row-major `d×d`; `false` marks a kernel that is identically zero.
    mask: Option<Vec<bool>>,
}

impl HawkesParams {
    pub fn new(
        nu: Vec<f64>,
        c: SquareMatrix,
        a: SquareMatrix,
        mask: Option<Vec<bool>>,
    ) -> Result<Self, ParamError> {
        let d = nu.len();
        if d == 0 || c.dim() != d || a.dim() != d {
            return Err(ParamError::Dimension(format!(
                "nu has {d} entries, c is {0}x{0}, a is {1}x{1}",
                c.dim(),
                a.dim()
            )));
        }
        if let Some(m) = &mask {
            if m.len() != d * d {
                return Err(ParamError::Dimension(format!("mask needs {} entries", d * d)));
            }
        }
        for (i, &v) in nu.iter().enumerate() {
            check_positive(&format!("nu[{i}]"), v)?;
        }
        for r in 0..d {
            for col in 0..d {
                check_positive(&format!("a[{r},{col}]"), a[(r, col)])?;
                check_nonnegative(&format!("c[{r},{col}]"), c[(r, col)])?;
                let active = mask.as_ref().is_none_or(|m| m[r * d + col]);
                if !active && c[(r, col)] != 0.0 {
                    return Err(ParamError::OutOfDomain {
                        name: format!("c[{r},{col}]"),
                        value: c[(r, col)],
                        requirement: "exactly 0 where masked",
                    });
                }
            }
        }
        Ok(Self { nu, c, a, mask })
    }

    pub fn univariate(nu: f64, c: f64, a: f64) -> Result<Self, ParamError> {
        Self::new(vec![nu], SquareMatrix::filled(1, c), SquareMatrix::filled(1, a), None)
    }

    pub fn dim(&self) -> usize {
        self.nu.len()
    }

    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    pub fn c(&self) -> &SquareMatrix {
        &self.c
    }

    pub fn a(&self) -> &SquareMatrix {
        &self.a
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    pub fn total_baseline(&self) -> f64 {
        self.nu.iter().sum()
    }

    /// `Φ = [c_{αβ} / a_{αβ}]`, the mean number of direct offspring.
    pub fn branching_matrix(&self) -> SquareMatrix {
        let d = self.dim();
        let data = (0..d * d).map(|k| self.c.as_slice()[k] / self.a.as_slice()[k]).collect();
        SquareMatrix { dim: d, data }
    }

    pub fn spectral_radius(&self) -> f64 {
        hawkes_spectral_radius(self)
    }

    pub fn is_stationary(&self) -> bool {
        self.spectral_radius() < 1.0
    }

    /// Stationary mean intensity `(I - Φ)^{-1} ν`, when `ρ(Φ) < 1`.
    pub fn stationary_mean_intensity(&self) -> Option<Vec<f64>> {
        if !self.is_stationary() {
            return None;
        }
        let d = self.dim();
        let phi = self.branching_matrix().to_nalgebra();
        let m = nalgebra::DMatrix::<f64>::identity(d, d) - phi;
        let nu = nalgebra::DVector::from_column_slice(&self.nu);
        m.lu().solve(&nu).map(|v| v.iter().copied().collect())
    }

    pub fn from_kv(cfg: &KvConfig) -> Result<Self, ConfigError> {
        let nu: Vec<f64> = cfg.require_list("nu")?;
        let d = cfg.get::<usize>("d")?.unwrap_or(nu.len());
        if nu.len() != d {
            return Err(ConfigError::invalid("nu", format!("expected {d} values, got {}", nu.len())));
        }
        let c = SquareMatrix::from_row_major(d, cfg.require_list("c")?)
            .map_err(|e| ConfigError::invalid("c", e.to_string()))?;
        let a = SquareMatrix::from_row_major(d, cfg.require_list("a")?)
            .map_err(|e| ConfigError::invalid("a", e.to_string()))?;
        let mask = cfg
            .get_list::<u8>("mask")?
            .map(|m| m.into_iter().map(|x| x != 0).collect::<Vec<_>>());
        Self::new(nu, c, a, mask).map_err(|e| ConfigError::invalid("nu/c/a/mask", e.to_string()))
    }

    pub fn write_kv(&self, cfg: &mut KvConfig) {
        cfg.set("d", self.dim());
        cfg.set_list("nu", &self.nu);
        cfg.set_list("c", self.c.as_slice());
        cfg.set_list("a", self.a.as_slice());
        match &self.mask {
            Some(m) => cfg.set_list("mask", &m.iter().map(|&b| u8::from(b)).collect::<Vec<_>>()),
            None => cfg.remove("mask"),
        }
    }

    /// Default burn-in for stationary-start runs: `20 / (min a · (1 - ρ(Φ)))`.
    ///
    /// A heuristic multiple of the coupling time; the true geometric rate of
    /// convergence to stationarity has no closed form.
    pub fn default_burn_in(&self) -> Option<f64> {
        let rho = self.spectral_radius();
        if rho >= 1.0 {
            return None;
        }
        let amin = self.a.as_slice().iter().copied().fold(f64::INFINITY, f64::min);
        Some(20.0 / (amin * (1.0 - rho)))
    }
}

/// Spectral radius `ρ(Φ)` of the branching matrix.
pub fn hawkes_spectral_radius(theta: &HawkesParams) -> f64 {
    let phi = theta.branching_matrix().to_nalgebra();
    if phi.nrows() == 1 {
        return phi[(0, 0)].abs();
    }
    phi.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Markov state of an exponential Hawkes process at a left-limit time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HawkesState {
    pub epsilon: SquareMatrix,
    pub eta: SquareMatrix,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvolveError {
    #[error("negative time step {0}")]
    NegativeStep(f64),
    #[error("jump mark {mark} out of range for dimension {dim}")]
    BadMark { mark: usize, dim: usize },
}

impl HawkesState {
    /// Empty history at time zero.
    pub fn zero(dim: usize) -> Self {
        Self { epsilon: SquareMatrix::zeros(dim), eta: SquareMatrix::zeros(dim), t: 0.0 }
    }

    /// State with the given excitations and no time-weighted history.
    pub fn with_excitation(epsilon: SquareMatrix) -> Self {
        let d = epsilon.dim();
        Self { epsilon, eta: SquareMatrix::zeros(d), t: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.epsilon.dim()
    }

    pub fn intensity(&self, theta: &HawkesParams) -> Vec<f64> {
        let d = self.dim();
        (0..d).map(|r| theta.nu[r] + self.epsilon.row(r).iter().sum::<f64>()).collect()
    }

    pub fn total_intensity(&self, theta: &HawkesParams) -> f64 {
        theta.total_baseline() + self.epsilon.as_slice().iter().sum::<f64>()
    }

    /// Decays the state by `dt` without a jump.
    pub fn decay(&mut self, theta: &HawkesParams, dt: f64) {
        if dt == 0.0 {
            return;
        }
        let a = theta.a.as_slice();
        let eps = self.epsilon.as_mut_slice();
        let eta = self.eta.as_mut_slice();
        for k in 0..a.len() {
            let damp = (-a[k] * dt).exp();
            eta[k] = damp * (eta[k] + dt * eps[k]);
            eps[k] *= damp;
        }
        self.t += dt;
    }

    /// Registers a jump on component `mark` at the current time.
    pub fn jump(&mut self, theta: &HawkesParams, mark: usize) {
        let d = self.dim();
        for r in 0..d {
            self.epsilon[(r, mark)] += theta.c[(r, mark)];
        }
    }

    pub fn advance(
        &mut self,
        theta: &HawkesParams,
        dt: f64,
        jump_mark: Option<usize>,
    ) -> Result<(), EvolveError> {
        if !(dt >= 0.0) {
            return Err(EvolveError::NegativeStep(dt));
        }
        if let Some(m) = jump_mark {
            if m >= self.dim() {
                return Err(EvolveError::BadMark { mark: m, dim: self.dim() });
            }
        }
        self.decay(theta, dt);
        if let Some(m) = jump_mark {
            self.jump(theta, m);
        }
        Ok(())
    }
}

/// `λ(t) = ν + Σ_β ε_{·β}(t)`.
pub fn hawkes_intensity(state: &HawkesState, theta: &HawkesParams) -> Vec<f64> {
    state.intensity(theta)
}

/// Decays `state` by `dt`, then applies an optional jump.
pub fn hawkes_evolve(
    state: &HawkesState,
    theta: &HawkesParams,
    dt: f64,
    jump_mark: Option<usize>,
) -> Result<HawkesState, EvolveError> {
    let mut next = state.clone();
    next.advance(theta, dt, jump_mark)?;
    Ok(next)
}

/// Closed-form compensator `Λ^α(t)` of a stream under `θ`, starting from an
/// empty history.
pub fn hawkes_compensator(
    stream: &EventStream,
    theta: &HawkesParams,
    t: f64,
) -> Result<Vec<f64>, ParamError> {
    if !(0.0..=stream.horizon()).contains(&t) {
        return Err(ParamError::OutOfDomain {
            name: "t".into(),
            value: t,
            requirement: "within [0, horizon]",
        });
    }
    if stream.dim() != theta.dim() {
        return Err(ParamError::Dimension(format!(
            "stream has {} components, parameters {}",
            stream.dim(),
            theta.dim()
        )));
    }
    let d = theta.dim();
    let mut out: Vec<f64> = theta.nu.iter().map(|&n| n * t).collect();
    for (ti, beta) in stream.iter().take_while(|&(ti, _)| ti < t) {
        for (alpha, o) in out.iter_mut().enumerate() {
            let c = theta.c[(alpha, beta)];
            if c != 0.0 {
                let a = theta.a[(alpha, beta)];
                *o += c / a * -(-a * (t - ti)).exp_m1();
            }
        }
    }
    debug_assert_eq!(out.len(), d);
    Ok(out)
}

/// Flattened parameter layout used by estimation:
/// `(ν_1..ν_d, active c row-major, active a row-major)`.
///
/// Masked kernels are removed from the vector rather than pinned at a bound.
#[derive(Debug, Clone, PartialEq)]
pub struct HawkesModel {
    dim: usize,
    mask: Option<Vec<bool>>,
    active: Vec<(usize, usize)>,
    pair_slot: Vec<Option<usize>>,
}

impl HawkesModel {
    pub fn new(dim: usize) -> Self {
        Self::with_mask(dim, None).expect("unmasked layout is always valid")
    }

    pub fn with_mask(dim: usize, mask: Option<Vec<bool>>) -> Result<Self, ParamError> {
        if let Some(m) = &mask {
            if m.len() != dim * dim {
                return Err(ParamError::Dimension(format!("mask needs {} entries", dim * dim)));
            }
        }
        let mut active = Vec::new();
        let mut pair_slot = vec![None; dim * dim];
        for r in 0..dim {
            for c in 0..dim {
                if mask.as_ref().is_none_or(|m| m[r * dim + c]) {
                    pair_slot[r * dim + c] = Some(active.len());
                    active.push((r, c));
                }
            }
        }
        Ok(Self { dim, mask, active, pair_slot })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    /// Active `(α, β)` kernel pairs in row-major order.
    pub fn active_pairs(&self) -> &[(usize, usize)] {
        &self.active
    }

    pub fn n_params(&self) -> usize {
        self.dim + 2 * self.active.len()
    }

    pub fn nu_index(&self, alpha: usize) -> usize {
        alpha
    }

    pub fn c_index(&self, slot: usize) -> usize {
        self.dim + slot
    }

    pub fn a_index(&self, slot: usize) -> usize {
        self.dim + self.active.len() + slot
    }

    pub fn slot(&self, alpha: usize, beta: usize) -> Option<usize> {
        self.pair_slot[alpha * self.dim + beta]
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (0..self.dim).map(|i| format!("nu[{i}]")).collect();
        names.extend(self.active.iter().map(|(r, c)| format!("c[{r},{c}]")));
        names.extend(self.active.iter().map(|(r, c)| format!("a[{r},{c}]")));
        names
    }

    pub fn params(&self, theta: &[f64]) -> Result<HawkesParams, ParamError> {
        if theta.len() != self.n_params() {
            return Err(ParamError::Dimension(format!(
                "expected {} parameters, got {}",
                self.n_params(),
                theta.len()
            )));
        }
        let d = self.dim;
        let k = self.active.len();
        let mut c = SquareMatrix::zeros(d);
        let mut a = SquareMatrix::filled(d, 1.0);
        for (slot, &(r, col)) in self.active.iter().enumerate() {
            c[(r, col)] = theta[d + slot];
            a[(r, col)] = theta[d + k + slot];
        }
        HawkesParams::new(theta[..d].to_vec(), c, a, self.mask.clone())
    }

    pub fn vector(&self, p: &HawkesParams) -> Vec<f64> {
        let mut v = p.nu.clone();
        v.extend(self.active.iter().map(|&(r, c)| p.c[(r, c)]));
        v.extend(self.active.iter().map(|&(r, c)| p.a[(r, c)]));
        v
    }

    /// `ν ∈ [1e-4, 1e3]`, `c ∈ [1e-4, 1e3]`, `a ∈ [1e-3, 1e3]`.
    pub fn default_box(&self) -> ParamBox {
        let k = self.active.len();
        let mut lower = vec![1e-4; self.dim + k];
        lower.extend(std::iter::repeat_n(1e-3, k));
        ParamBox::new(lower, vec![1e3; self.n_params()]).expect("static bounds are valid")
    }
}
