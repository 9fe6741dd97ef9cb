//! Numerical probes of the assumptions behind the asymptotic theory:
//! goodness of fit by time rescaling, convergence of ergodic averages,
//! decay of intensity autocovariances, coupling of transient and warmed-up
//! paths, stationarity of the branching matrix and identifiability of the
//! likelihood ratio field.
//!
//! Every Monte Carlo verdict in a report uses a 3σ rule.

mod ergodic;
mod mixing;

pub use ergodic::{ergodic_average_trace, ergodic_average_trace_on, pooled_exponent, ErgodicTrace, Statistic, DEFAULT_TRACE_POINTS};
pub use mixing::{coupling_decay, default_lag_grid, mixing_covariance, CouplingReport, MixingReport};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::EventStream;
use crate::likelihood::{ratio_field, IntensityModel, LikelihoodError, RatioFieldSample};
use crate::simulation::SimulationError;
use crate::stats::{ks_one_sample, mean, KsResult};

pub const VERDICT_RULE: &str = "3 sigma";
pub const MIN_RESIDUALS: usize = 5;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error(transparent)]
    Likelihood(#[from] LikelihoodError),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error("parameters are not stationary: spectral radius {0} >= 1")]
    Nonstationary(f64),
    #[error("invalid diagnostic input: {0}")]
    Input(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentRescaling {
    pub component: usize,
    pub n_events: usize,
    /// Compensator increments between consecutive events of the component.
    pub residuals: Vec<f64>,
    pub residual_mean: Option<f64>,
    pub ks: Option<KsResult>,
    pub notice: Option<String>,
}

/// Time-rescaling residuals `Λ^α(T_k^α) - Λ^α(T_{k-1}^α)` (with
/// `T_0^α = 0`) tested against Exp(1).
pub fn time_rescaling_test(
    stream: &EventStream,
    model: &dyn IntensityModel,
    theta: &[f64],
) -> Result<Vec<ComponentRescaling>, DiagnosticsError> {
    let comp = model.compensator_at(stream, theta, stream.times())?;
    let d = model.dim();
    let mut last = vec![0.0; d];
    let mut residuals = vec![Vec::new(); d];
    for ((_, m), lam) in stream.iter().zip(&comp) {
        residuals[m].push(lam[m] - last[m]);
        last[m] = lam[m];
    }
    Ok(residuals
        .into_iter()
        .enumerate()
        .map(|(component, r)| {
            let n = r.len();
            let (ks, notice) = if n < MIN_RESIDUALS {
                (None, Some(format!("skipped: {n} events, need {MIN_RESIDUALS}")))
            } else {
                (Some(ks_one_sample(&r, |x| if x <= 0.0 { 0.0 } else { -(-x).exp_m1() })), None)
            };
            ComponentRescaling {
                component,
                n_events: n,
                residual_mean: (n > 0).then(|| mean(&r)),
                residuals: r,
                ks,
                notice,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentifiabilityReport {
    pub chi0: Option<f64>,
    /// Grid points with `𝕐_T ≥ 0`.
    pub violations: Vec<Vec<f64>>,
    pub n_points: usize,
    pub field: RatioFieldSample,
}

/// `χ̂₀` over a grid that excludes the reference point, with the list of
/// points where the ratio field fails to be negative.
pub fn identifiability_probe(
    stream: &EventStream,
    model: &dyn IntensityModel,
    theta_ref: &[f64],
    grid: &[Vec<f64>],
) -> Result<IdentifiabilityReport, DiagnosticsError> {
    let points: Vec<Vec<f64>> = grid.iter().filter(|p| p.as_slice() != theta_ref).cloned().collect();
    let field = ratio_field(stream, model, theta_ref, &points)?;
    let violations =
        points.iter().zip(&field.values).filter(|(_, &y)| y >= 0.0).map(|(p, _)| p.clone()).collect();
    Ok(IdentifiabilityReport { chi0: field.chi0, violations, n_points: points.len(), field })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub spectral_radius: f64,
    pub stationary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct DiagnosticsReport {
    pub rescaling: Vec<ComponentRescaling>,
    pub stationarity: Option<StationarityReport>,
    pub ergodic: Option<ErgodicTrace>,
    pub mixing: Option<MixingReport>,
    pub coupling: Option<CouplingReport>,
    pub identifiability: Option<IdentifiabilityReport>,
    pub verdict_rule: String,
}

/// `t,value,stderr` CSV; missing standard errors are left empty.
pub fn trace_csv(t: &[f64], value: &[f64], stderr: &[Option<f64>]) -> String {
    let mut out = String::from("t,value,stderr\n");
    for i in 0..t.len() {
        let se = stderr.get(i).copied().flatten().map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{}\n", t[i], value[i], se));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{HawkesModel, PoissonModel};

    #[test]
    fn poisson_residuals_are_scaled_gaps() {
        let s = EventStream::new(vec![0.5, 1.25, 2.0, 3.0, 3.5, 4.75], vec![0; 6], 1, 5.0).unwrap();
        let r = time_rescaling_test(&s, &PoissonModel::new(1), &[2.0]).unwrap();
        let expected = [1.0, 1.5, 1.5, 2.0, 1.0, 2.5];
        for (a, b) in r[0].residuals.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(r[0].ks.is_some());
        let doubled = time_rescaling_test(&s, &PoissonModel::new(1), &[4.0]).unwrap();
        assert!((doubled[0].residual_mean.unwrap() - 2.0 * r[0].residual_mean.unwrap()).abs() < 1e-14);
    }

    #[test]
    fn short_components_are_skipped_with_notice() {
        let s = EventStream::new(vec![0.5, 1.0], vec![0, 1], 2, 2.0).unwrap();
        let r = time_rescaling_test(&s, &HawkesModel::new(2), &[1.0; 10]).unwrap();
        assert!(r.iter().all(|c| c.ks.is_none() && c.notice.is_some()));
        assert_eq!(r[0].residuals.len(), 1);
    }

    #[test]
    fn probe_excludes_reference_and_flags_violations() {
        let s = EventStream::new(vec![1.0, 2.0, 3.0], vec![0; 3], 1, 3.0).unwrap();
        let m = PoissonModel::new(1);
        let rep = identifiability_probe(&s, &m, &[1.0], &[vec![0.5], vec![1.0], vec![2.0]]).unwrap();
        assert_eq!(rep.n_points, 2);
        assert!(rep.violations.is_empty());
        assert!(rep.chi0.unwrap() > 0.0);
        let off = identifiability_probe(&s, &m, &[2.0], &[vec![1.0]]).unwrap();
        assert_eq!(off.violations, vec![vec![1.0]]);
    }

    #[test]
    fn csv_layout() {
        let csv = trace_csv(&[1.0, 2.0], &[0.5, 0.25], &[None, Some(0.1)]);
        assert_eq!(csv, "t,value,stderr\n1,0.5,\n2,0.25,0.1\n");
    }
}
