//! Quasi-log-likelihood and its derivatives.
//!
//! ```text
//! l_T(θ) = Σ_α ∫_0^T log λ^α(s,θ) dN^α_s  -  Σ_α ∫_0^T λ^α(s,θ) ds
//! ```
//!
//! Every supported model implements [`IntensityModel`]: an exact evaluation
//! of `l_T`, its score and Hessian at the event times plus a closed-form
//! compensator, and a walk over the inter-event intervals that exposes
//! `λ(s)` and `∂_θ λ(s)` for quadrature-based functionals such as the
//! empirical Fisher information
//!
//! ```text
//! Γ̂_T = (1/T) Σ_α ∫_0^T ∂_θλ^α (∂_θλ^α)ᵀ / λ^α ds.
//! ```

mod hawkes;
mod lob;
mod poisson;
pub mod quadrature;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::EventStream;
use crate::models::{ParamBox, ParamError};
use quadrature::QuadratureError;

/// Intensities below this are treated as zero at an event.
pub const ZERO_INTENSITY: f64 = 1e-300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LikelihoodError {
    #[error("intensity vanishes at event {index}")]
    ZeroIntensityAtEvent { index: usize },
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("stream has {stream} components, model expects {model}")]
    Dimension { stream: usize, model: usize },
    #[error("parameter outside the box at coordinate {index}")]
    OutOfBox { index: usize },
    #[error("query time {0} outside [0, horizon]")]
    TimeOutOfRange(f64),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Order {
    Value,
    Gradient,
    Hessian,
}

/// Raw evaluation: `l_T`, `∂l_T`, `∂²l_T` (the Hessian, not its negative).
#[derive(Debug, Clone, PartialEq)]
pub struct Derivatives {
    pub value: f64,
    pub gradient: Option<DVector<f64>>,
    pub hessian: Option<DMatrix<f64>>,
}

/// Evaluates `λ(s)` and optionally `∂_θλ(s)` (row-major `d × n`) for `s`
/// inside one inter-event interval.
pub trait IntensityAt {
    fn eval(&self, s: f64, lambda: &mut [f64], grad: Option<&mut [f64]>);
}

/// One interval `(start, end]` between consecutive events (or the
/// boundaries `0` and `T`). Evaluating at `end` gives the left limit.
pub struct Interval<'a> {
    pub start: f64,
    pub end: f64,
    pub intensity: &'a dyn IntensityAt,
}

pub type Visitor<'v> = dyn FnMut(&Interval<'_>) -> Result<(), LikelihoodError> + 'v;

pub trait IntensityModel: Send + Sync {
    /// Number of stream components.
    fn dim(&self) -> usize;
    fn n_params(&self) -> usize;
    fn param_names(&self) -> Vec<String>;
    fn default_box(&self) -> ParamBox;
    /// Data-driven starting point for a local search.
    fn moment_start(&self, stream: &EventStream) -> Vec<f64>;
    fn evaluate(
        &self,
        stream: &EventStream,
        theta: &[f64],
        order: Order,
    ) -> Result<Derivatives, LikelihoodError>;
    /// `Λ(t)` for every component at each (sorted) query time.
    fn compensator_at(
        &self,
        stream: &EventStream,
        theta: &[f64],
        times: &[f64],
    ) -> Result<Vec<Vec<f64>>, LikelihoodError>;
    /// Visits the inter-event intervals of `(0, T]` in order.
    fn scan(
        &self,
        stream: &EventStream,
        theta: &[f64],
        visit: &mut Visitor<'_>,
    ) -> Result<(), LikelihoodError>;
}

pub(crate) fn check_dim(stream: &EventStream, model_dim: usize) -> Result<(), LikelihoodError> {
    if stream.dim() != model_dim {
        return Err(LikelihoodError::Dimension { stream: stream.dim(), model: model_dim });
    }
    Ok(())
}

pub(crate) fn check_times(stream: &EventStream, times: &[f64]) -> Result<(), LikelihoodError> {
    for w in times.windows(2) {
        if w[1] < w[0] {
            return Err(LikelihoodError::TimeOutOfRange(w[1]));
        }
    }
    if let Some(&t) = times.iter().find(|&&t| !(0.0..=stream.horizon()).contains(&t)) {
        return Err(LikelihoodError::TimeOutOfRange(t));
    }
    Ok(())
}

pub fn check_in_box(bounds: &ParamBox, theta: &[f64]) -> Result<(), LikelihoodError> {
    for (i, &t) in theta.iter().enumerate() {
        if !(bounds.lower()[i] <= t && t <= bounds.upper()[i]) {
            return Err(LikelihoodError::OutOfBox { index: i });
        }
    }
    Ok(())
}

/// Full evaluation at one parameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodEvaluation {
    pub value: f64,
    pub score: Vec<f64>,
    pub observed_info: DMatrix<f64>,
    pub empirical_fisher: DMatrix<f64>,
}

pub fn log_likelihood(
    stream: &EventStream,
    model: &dyn IntensityModel,
    theta: &[f64],
) -> Result<f64, LikelihoodError> {
    Ok(model.evaluate(stream, theta, Order::Value)?.value)
}

pub fn score(
    stream: &EventStream,
    model: &dyn IntensityModel,
    theta: &[f64],
) -> Result<Vec<f64>, LikelihoodError> {
    let d = model.evaluate(stream, theta, Order::Gradient)?;
    Ok(d.gradient.expect("gradient requested").iter().copied().collect())
}

/// `-∂²_θ l_T(θ)`.
pub fn observed_information(
    stream: &EventStream,
    model: &dyn IntensityModel,
    theta: &[f64],
) -> Result<DMatrix<f64>, LikelihoodError> {
    let d = model.evaluate(stream, theta, Order::Hessian)?;
    let mut info = -d.hessian.expect("hessian requested");
    symmetrize(&mut info);
    Ok(info)
}

pub fn empirical_fisher(
    stream: &EventStream,
    model: &dyn IntensityModel,
    theta: &[f64],
) -> Result<DMatrix<f64>, LikelihoodError> {
    empirical_fisher_tol(stream, model, theta, quadrature::DEFAULT_REL_TOL)
}

pub fn empirical_fisher_tol(
    stream: &EventStream,
    model: &dyn IntensityModel,
    theta: &[f64],
    rel_tol: f64,
) -> Result<DMatrix<f64>, LikelihoodError> {
    let n = model.n_params();
    let d = model.dim();
    let mut acc = vec![0.0; n * n];
    let mut lambda = vec![0.0; d];
    let mut grad = vec![0.0; d * n];
    model.scan(stream, theta, &mut |iv: &Interval<'_>| {
        quadrature::integrate(
            |s, out| {
                iv.intensity.eval(s, &mut lambda, Some(&mut grad));
                out.iter_mut().for_each(|o| *o = 0.0);
                for alpha in 0..d {
                    let lam = lambda[alpha];
                    if lam <= ZERO_INTENSITY {
                        continue;
                    }
                    let g = &grad[alpha * n..(alpha + 1) * n];
                    for i in 0..n {
                        if g[i] == 0.0 {
                            continue;
                        }
                        let gi = g[i] / lam;
                        for j in i..n {
                            out[i * n + j] += gi * g[j];
                        }
                    }
                }
            },
            iv.start,
            iv.end,
            rel_tol,
            &mut acc,
        )?;
        Ok(())
    })?;
    let t = stream.horizon();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            m[(i, j)] = acc[i * n + j] / t;
            m[(j, i)] = m[(i, j)];
        }
    }
    Ok(m)
}

pub fn evaluate_all(
    stream: &EventStream,
    model: &dyn IntensityModel,
    theta: &[f64],
) -> Result<LikelihoodEvaluation, LikelihoodError> {
    let d = model.evaluate(stream, theta, Order::Hessian)?;
    let mut info = -d.hessian.expect("hessian requested");
    symmetrize(&mut info);
    Ok(LikelihoodEvaluation {
        value: d.value,
        score: d.gradient.expect("gradient requested").iter().copied().collect(),
        observed_info: info,
        empirical_fisher: empirical_fisher(stream, model, theta)?,
    })
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// `λ(s)` at sorted times in `(0, T]`, as left limits.
pub fn intensity_at(
    stream: &EventStream,
    model: &dyn IntensityModel,
    theta: &[f64],
    times: &[f64],
) -> Result<Vec<Vec<f64>>, LikelihoodError> {
    check_times(stream, times)?;
    let d = model.dim();
    let mut out = Vec::with_capacity(times.len());
    let mut idx = 0;
    let mut lambda = vec![0.0; d];
    model.scan(stream, theta, &mut |iv: &Interval<'_>| {
        while idx < times.len() && times[idx] <= iv.end {
            let s = times[idx].max(iv.start);
            iv.intensity.eval(s, &mut lambda, None);
            out.push(lambda.clone());
            idx += 1;
        }
        Ok(())
    })?;
    Ok(out)
}

/// Normalised likelihood-ratio field `𝕐_T(θ) = (l_T(θ) - l_T(θ_ref)) / T`
/// on a grid, with the identifiability ratio
/// `χ̂₀ = min_{θ ≠ θ_ref} -𝕐_T(θ) / |θ - θ_ref|²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioFieldSample {
    pub reference: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub chi0: Option<f64>,
}

pub fn ratio_field(
    stream: &EventStream,
    model: &dyn IntensityModel,
    theta_ref: &[f64],
    grid: &[Vec<f64>],
) -> Result<RatioFieldSample, LikelihoodError> {
    let l_ref = log_likelihood(stream, model, theta_ref)?;
    let t = stream.horizon();
    let mut values = Vec::with_capacity(grid.len());
    let mut chi0: Option<f64> = None;
    for p in grid {
        let dist2: f64 = p.iter().zip(theta_ref).map(|(a, b)| (a - b) * (a - b)).sum();
        if dist2 == 0.0 {
            values.push(0.0);
            continue;
        }
        let y = (log_likelihood(stream, model, p)? - l_ref) / t;
        values.push(y);
        let ratio = -y / dist2;
        chi0 = Some(chi0.map_or(ratio, |c| c.min(ratio)));
    }
    Ok(RatioFieldSample { reference: theta_ref.to_vec(), points: grid.to_vec(), values, chi0 })
}

/// Cartesian product of per-axis value lists.
pub fn lattice(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    axes.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect()
    })
}

/// Lattice `θ_ref ⊙ (1 + k·step)` for `k ∈ {-levels..levels}` per axis.
pub fn relative_lattice(theta_ref: &[f64], step: f64, levels: usize) -> Vec<Vec<f64>> {
    let k = levels as i64;
    let axes: Vec<Vec<f64>> = theta_ref
        .iter()
        .map(|&c| (-k..=k).map(|i| c * (1.0 + i as f64 * step)).collect())
        .collect();
    lattice(&axes)
}

#[cfg(test)]
mod tests;

#[cfg(test)]
mod lattice_tests {
    use super::*;

    #[test]
    fn lattice_is_cartesian_product() {
        let g = lattice(&[vec![1.0, 2.0], vec![3.0, 4.0, 5.0]]);
        assert_eq!(g.len(), 6);
        assert_eq!(g[0], vec![1.0, 3.0]);
        assert_eq!(g[5], vec![2.0, 5.0]);
        assert_eq!(relative_lattice(&[1.0, 2.0], 0.5, 1).len(), 9);
    }
}
