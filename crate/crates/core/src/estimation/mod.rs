//! Quasi maximum likelihood and quasi-Bayesian estimation.
//!
//! Both estimators work in log coordinates `u = log θ`, so the box
//! `[lo, hi]` becomes `[log lo, log hi]` and positivity is automatic.

mod optimizer;
mod qbe;
mod qmle;

pub use optimizer::{minimize, Bound, Objective, Outcome, Settings};
pub use qbe::{qbe, BayesResult, McmcOptions, Prior};
pub use qmle::{confidence_intervals, qmle, BoundFlag, ConfidenceInterval, FitResult, QmleOptions};

use nalgebra::DMatrix;
use thiserror::Error;

use crate::likelihood::LikelihoodError;
use crate::models::ParamBox;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimationError {
    #[error("no start converged or evaluated successfully ({starts} tried)")]
    NoConvergence { starts: usize },
    #[error("empirical Fisher information is singular")]
    SingularInformation,
    #[error(transparent)]
    Likelihood(#[from] LikelihoodError),
    #[error("box has {got} coordinates, model has {expected}")]
    Dimension { got: usize, expected: usize },
    #[error("invalid option: {0}")]
    InvalidOptions(String),
}

impl EstimationError {
    /// Stable identifier for machine-readable reports.
    pub fn code(&self) -> &'static str {
        match self {
            Self::NoConvergence { .. } => "no_convergence",
            Self::SingularInformation => "singular_information",
            Self::Likelihood(LikelihoodError::ZeroIntensityAtEvent { .. }) => "zero_intensity_at_event",
            Self::Likelihood(_) => "likelihood",
            Self::Dimension { .. } => "dimension",
            Self::InvalidOptions(_) => "invalid_options",
        }
    }
}

pub(crate) fn check_box(bounds: &ParamBox, n: usize) -> Result<(), EstimationError> {
    if bounds.len() != n {
        return Err(EstimationError::Dimension { got: bounds.len(), expected: n });
    }
    Ok(())
}

/// Inverse of a symmetric positive definite matrix, `None` otherwise.
pub(crate) fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if m.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let inv = m.clone().cholesky()?.inverse();
    inv.iter().all(|v| v.is_finite()).then_some(inv)
}

/// Symmetric square root `V diag(√λ) Vᵀ` of a PSD matrix.
pub fn symmetric_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let root = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&root) * eig.eigenvectors.transpose()
}

pub(crate) fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Log-coordinate Hessian of `-l/T` given the natural gradient and Hessian of `l`.
pub(crate) fn log_hessian(theta: &[f64], grad: &[f64], hess: &DMatrix<f64>, horizon: f64) -> DMatrix<f64> {
    let n = theta.len();
    DMatrix::from_fn(n, n, |i, j| {
        let mut v = theta[i] * hess[(i, j)] * theta[j];
        if i == j {
            v += theta[i] * grad[i];
        }
        -v / horizon
    })
}
