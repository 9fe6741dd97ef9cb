//! Parametric intensity families and their parameter containers.

pub mod hawkes;
pub mod lob;
pub mod poisson;

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use hawkes::{
    hawkes_compensator, hawkes_evolve, hawkes_intensity, hawkes_spectral_radius, EvolveError, HawkesModel,
    HawkesParams, HawkesState,
};
pub use lob::{
    lob_intensity, observable_lob_intensity, LinearLobParams, LobEvent, LobLayout, LobLinearModel, LobSide,
    LobState, LobStateError,
};
pub use poisson::{poisson_intensity, PoissonModel, PoissonParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("{name} must be {requirement}, got {value}")]
    OutOfDomain { name: String, value: f64, requirement: &'static str },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid bounds for coordinate {index}: [{lower}, {upper}]")]
    Bounds { index: usize, lower: f64, upper: f64 },
}

/// Dense row-major square matrix, indexed by `(row, col)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquareMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![0.0; dim * dim] }
    }

    pub fn filled(dim: usize, value: f64) -> Self {
        Self { dim, data: vec![value; dim * dim] }
    }

    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Result<Self, ParamError> {
        if data.len() != dim * dim {
            return Err(ParamError::Dimension(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self, ParamError> {
        let dim = rows.len();
        let data: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::from_row_major(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }

    pub fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }
}

impl Index<(usize, usize)> for SquareMatrix {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.dim + c]
    }
}

impl IndexMut<(usize, usize)> for SquareMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.dim + c]
    }
}

/// Compact box `Θ = Π [lower_i, upper_i]` over a flattened parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ParamBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, ParamError> {
        if lower.len() != upper.len() {
            return Err(ParamError::Dimension("lower and upper bounds differ in length".into()));
        }
        for (i, (&lo, &hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo > 0.0 && lo < hi && hi.is_finite()) {
                return Err(ParamError::Bounds { index: i, lower: lo, upper: hi });
            }
        }
        Ok(Self { lower, upper })
    }

    /// Same bounds on every coordinate.
    pub fn uniform(n: usize, lower: f64, upper: f64) -> Result<Self, ParamError> {
        Self::new(vec![lower; n], vec![upper; n])
    }

    /// Box of half-width `radius` (relative) around `center`.
    pub fn around(center: &[f64], radius: f64) -> Result<Self, ParamError> {
        let lower = center.iter().map(|&c| c * (1.0 - radius)).collect();
        let upper = center.iter().map(|&c| c * (1.0 + radius)).collect();
        Self::new(lower, upper)
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.len()
            && theta.iter().zip(self.lower.iter().zip(&self.upper)).all(|(&t, (&lo, &hi))| lo <= t && t <= hi)
    }

    pub fn clamp(&self, theta: &[f64]) -> Vec<f64> {
        theta
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&t, (&lo, &hi))| t.clamp(lo, hi))
            .collect()
    }

    pub fn log_lower(&self) -> Vec<f64> {
        self.lower.iter().map(|x| x.ln()).collect()
    }

    pub fn log_upper(&self) -> Vec<f64> {
        self.upper.iter().map(|x| x.ln()).collect()
    }

    /// Lebesgue volume of the box, used to normalise the uniform prior.
    pub fn log_volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(lo, hi)| (hi - lo).ln()).sum()
    }
}

pub(crate) fn check_positive(name: &str, value: f64) -> Result<(), ParamError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ParamError::OutOfDomain { name: name.to_string(), value, requirement: "finite and > 0" })
    }
}

pub(crate) fn check_nonnegative(name: &str, value: f64) -> Result<(), ParamError> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ParamError::OutOfDomain { name: name.to_string(), value, requirement: "finite and >= 0" })
    }
}
