//! Homogeneous multivariate Poisson intensities.

use serde::{Deserialize, Serialize};

use super::{check_positive, ParamBox, ParamError};
use crate::config::{ConfigError, KvConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonParams {
    rate: Vec<f64>,
}

impl PoissonParams {
    pub fn new(rate: Vec<f64>) -> Result<Self, ParamError> {
        if rate.is_empty() {
            return Err(ParamError::Dimension("at least one component required".into()));
        }
        for (i, &r) in rate.iter().enumerate() {
            check_positive(&format!("rate[{i}]"), r)?;
        }
        Ok(Self { rate })
    }

    pub fn dim(&self) -> usize {
        self.rate.len()
    }

    pub fn rate(&self) -> &[f64] {
        &self.rate
    }

    pub fn from_kv(cfg: &KvConfig) -> Result<Self, ConfigError> {
        let rate: Vec<f64> = cfg.require_list("rate")?;
        Self::new(rate).map_err(|e| ConfigError::invalid("rate", e.to_string()))
    }

    pub fn write_kv(&self, cfg: &mut KvConfig) {
        cfg.set("d", self.dim());
        cfg.set_list("rate", &self.rate);
    }
}

/// Constant intensity vector; no dependence on history.
pub fn poisson_intensity(theta: &PoissonParams) -> Vec<f64> {
    theta.rate.clone()
}

/// Parameter layout for estimation: one rate per component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoissonModel {
    dim: usize,
}

impl PoissonModel {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn param_names(&self) -> Vec<String> {
        (0..self.dim).map(|i| format!("rate[{i}]")).collect()
    }

    pub fn default_box(&self) -> ParamBox {
        ParamBox::uniform(self.dim, 1e-4, 1e3).expect("static bounds are valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intensity_is_constant() {
        let p = PoissonParams::new(vec![1.5, 0.25]).unwrap();
        assert_eq!(poisson_intensity(&p), vec![1.5, 0.25]);
        assert!(PoissonParams::new(vec![0.0]).is_err());
    }
}
