//! Simulation, quasi-likelihood estimation and ergodicity diagnostics for
//! multivariate point processes with stochastic intensities.
//!
//! Event data live in [`events::EventStream`]. Parametric intensities
//! implement [`likelihood::IntensityModel`]: exponential Hawkes processes,
//! constant-rate models and linear-cancellation order books, all in
//! [`models`]. [`likelihood`] evaluates `l_T`, its score, observed and
//! empirical Fisher information and the ratio field. [`estimation`] provides
//! the multistart QMLE and the MCMC quasi-Bayesian estimator, [`simulation`]
//! the samplers, [`diagnostics`] the goodness-of-fit and mixing tools, and
//! [`harness`] the config-driven commands behind the binary.

pub mod config;
pub mod diagnostics;
pub mod estimation;
pub mod events;
pub mod harness;
pub mod likelihood;
pub mod models;
pub mod rng;
pub mod simulation;
pub mod stats;
