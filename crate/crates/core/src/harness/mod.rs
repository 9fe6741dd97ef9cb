//! Batch front end: every command reads a flat key-value config (with flag
//! overrides merged on top), runs one library operation and writes a
//! self-contained output directory holding `manifest.json` plus the
//! command's artifacts (`events.csv`, `report.json`, `rows.csv`, traces).
//!
//! # Config keys
//!
//! | key | used by | meaning |
//! |-----|---------|---------|
//! | `model` | all | `poisson`, `hawkes` or `lob-linear` |
//! | `horizon`, `seed`, `sampler`, `burn_in`, `jobs` | all | run controls |
//! | `rate` / `d nu c a mask` / `levels limit cancel market_bid market_ask` | all | parameters of the model |
//! | `events` | fit, bayes, diagnose | input CSV (`time,component`) |
//! | `lower`, `upper` | fit, bayes, mc-study | parameter box, model default otherwise |
//! | `starts`, `tol`, `max_iter`, `level` | fit, mc-study | QMLE controls |
//! | `chains`, `mcmc_burn_in`, `iterations`, `thin`, `prior` | bayes, mc-study | MCMC controls |
//! | `t_list`, `n_reps`, `estimators` | mc-study | study design |
//! | `mixing_paths`, `mixing_horizon`, `coupling_paths`, `probe_step` | diagnose | probe sizes |
//!
//! Errors carry a stable [`HarnessError::code`] and map to exit code 1
//! (input) or 2 (convergence or statistical failure).

mod study;

pub use study::{
    read_rows_csv, rows_csv, run_study, summarize, EstimatorSummary, HorizonSummary, StudyConfig, StudyReport,
    StudyRow, FAILURE_BUDGET,
};

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{ConfigError, KvConfig};
use crate::diagnostics::{
    coupling_decay, default_lag_grid, ergodic_average_trace, identifiability_probe, mixing_covariance,
    time_rescaling_test, trace_csv, DiagnosticsError, DiagnosticsReport, Statistic, StationarityReport,
    VERDICT_RULE,
};
use crate::estimation::{qbe, qmle, EstimationError, McmcOptions, Prior, QmleOptions};
use crate::events::{read_events, EventError, EventStream, ReadOptions};
use crate::likelihood::{relative_lattice, IntensityModel};
use crate::models::{
    HawkesModel, HawkesParams, HawkesState, LinearLobParams, LobLayout, LobLinearModel, LobState, ParamBox,
    PoissonModel, PoissonParams, SquareMatrix,
};
use crate::simulation::{
    simulate_hawkes, simulate_lob, simulate_thinning, LobModel, LobSimConfig, Sampler, SimConfig, SimulationError,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// p-values below this fail `diagnose`.
pub const DIAGNOSE_ALPHA: f64 = 0.01;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Events(#[from] EventError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("refusing nonstationary parameters: spectral radius {0} >= 1 violates the stationarity condition")]
    Nonstationary(f64),
    #[error("{0}")]
    Input(String),
    #[error("fit did not converge: {0}")]
    NotConverged(String),
    #[error("poor mixing: {0}")]
    PoorMixing(String),
    #[error("goodness of fit rejected: {0}")]
    GoodnessOfFit(String),
    #[error("study failed: {failed} of {total} replications failed")]
    StudyFailed { failed: usize, total: usize },
}

impl HarnessError {
    /// Stable machine-readable identifier.
    pub fn code(&self) -> &'static str {
        match self {
            Self::Config(_) => "config",
            Self::Events(_) => "events",
            Self::Estimation(e) => e.code(),
            Self::Simulation(_) => "simulation",
            Self::Diagnostics(DiagnosticsError::Nonstationary(_)) | Self::Nonstationary(_) => "nonstationary",
            Self::Diagnostics(_) => "diagnostics",
            Self::Io { .. } => "io",
            Self::Input(_) => "input",
            Self::NotConverged(_) => "not_converged",
            Self::PoorMixing(_) => "poor_mixing",
            Self::GoodnessOfFit(_) => "goodness_of_fit",
            Self::StudyFailed { .. } => "study_failed",
        }
    }

    /// 1 for input errors, 2 for convergence or statistical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Estimation(EstimationError::NoConvergence { .. } | EstimationError::SingularInformation)
            | Self::NotConverged(_)
            | Self::PoorMixing(_)
            | Self::GoodnessOfFit(_)
            | Self::StudyFailed { .. } => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Poisson,
    Hawkes,
    LobLinear,
}

impl FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "poisson" => Ok(Self::Poisson),
            "hawkes" => Ok(Self::Hawkes),
            "lob-linear" => Ok(Self::LobLinear),
            _ => Err(format!("unknown model `{s}` (poisson, hawkes, lob-linear)")),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Poisson => "poisson",
            Self::Hawkes => "hawkes",
            Self::LobLinear => "lob-linear",
        })
    }
}

pub fn parse_sampler(s: &str) -> Result<Sampler, String> {
    match s {
        "thinning" => Ok(Sampler::Thinning),
        "exact" => Ok(Sampler::Exact),
        _ => Err(format!("unknown sampler `{s}` (thinning, exact)")),
    }
}

fn sampler_name(s: Sampler) -> &'static str {
    match s {
        Sampler::Thinning => "thinning",
        Sampler::Exact => "exact",
    }
}

/// Command-line values; any that are set replace the config entries.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub horizon: Option<f64>,
    pub model: Option<ModelKind>,
    pub sampler: Option<Sampler>,
    pub jobs: Option<usize>,
    pub events: Option<PathBuf>,
    pub mask: Option<String>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut KvConfig) {
        if let Some(v) = self.seed {
            cfg.set("seed", v);
        }
        if let Some(v) = self.horizon {
            cfg.set("horizon", v);
        }
        if let Some(v) = self.model {
            cfg.set("model", v);
        }
        if let Some(v) = self.sampler {
            cfg.set("sampler", sampler_name(v));
        }
        if let Some(v) = self.jobs {
            cfg.set("jobs", v);
        }
        if let Some(v) = &self.events {
            cfg.set("events", v.display());
        }
        if let Some(v) = &self.mask {
            cfg.set("mask", v.replace(',', " "));
        }
    }
}

/// Fully parameterized model.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Poisson(PoissonParams),
    Hawkes(HawkesParams),
    LobLinear(LinearLobParams),
}

impl ModelSpec {
    pub fn from_kv(cfg: &KvConfig) -> Result<Self, ConfigError> {
        Ok(match model_kind(cfg)? {
            ModelKind::Poisson => Self::Poisson(PoissonParams::from_kv(cfg)?),
            ModelKind::Hawkes => Self::Hawkes(HawkesParams::from_kv(cfg)?),
            ModelKind::LobLinear => {
                let p = LinearLobParams::from_kv(cfg)?;
                if let Some(m) = cfg.get::<usize>("levels")? {
                    if m != p.levels() {
                        return Err(ConfigError::invalid("levels", format!("{m} levels but {} limit rates", p.levels())));
                    }
                }
                Self::LobLinear(p)
            }
        })
    }

    pub fn write_kv(&self, cfg: &mut KvConfig) {
        match self {
            Self::Poisson(p) => p.write_kv(cfg),
            Self::Hawkes(p) => p.write_kv(cfg),
            Self::LobLinear(p) => p.write_kv(cfg),
        }
    }

    pub fn intensity_model(&self) -> Box<dyn IntensityModel> {
        match self {
            Self::Poisson(p) => Box::new(PoissonModel::new(p.dim())),
            Self::Hawkes(p) => Box::new(
                HawkesModel::with_mask(p.dim(), p.mask().map(<[bool]>::to_vec)).expect("mask validated with parameters"),
            ),
            Self::LobLinear(p) => {
                let layout = LobLayout::new(p.levels()).expect("levels validated with parameters");
                Box::new(LobLinearModel::new(layout, LobState::empty(&layout)).expect("empty book is valid"))
            }
        }
    }

    /// Parameter vector in the layout of [`ModelSpec::intensity_model`].
    pub fn theta(&self) -> Vec<f64> {
        match self {
            Self::Poisson(p) => p.rate().to_vec(),
            Self::Hawkes(p) => HawkesModel::with_mask(p.dim(), p.mask().map(<[bool]>::to_vec))
                .expect("mask validated with parameters")
                .vector(p),
            Self::LobLinear(p) => p.vector(),
        }
    }

    pub fn spectral_radius(&self) -> Option<f64> {
        match self {
            Self::Hawkes(p) => Some(p.spectral_radius()),
            _ => None,
        }
    }

    pub fn check_stationary(&self) -> Result<(), HarnessError> {
        match self.spectral_radius() {
            Some(r) if !(r < 1.0) => Err(HarnessError::Nonstationary(r)),
            _ => Ok(()),
        }
    }

    /// Event stream on `(0, cfg.horizon]`; the LOB model starts from an
    /// empty book.
    pub fn simulate(&self, sampler: Sampler, cfg: &SimConfig) -> Result<EventStream, HarnessError> {
        self.check_stationary()?;
        Ok(match self {
            Self::Poisson(p) => simulate_thinning(p, (), cfg)?.stream,
            Self::Hawkes(p) => simulate_hawkes(p, sampler, cfg)?.stream,
            Self::LobLinear(p) => {
                let lob = LobSimConfig { levels: p.levels(), initial: None };
                simulate_lob(&LobModel::Linear(p.clone()), &lob, cfg)?.stream
            }
        })
    }
}

fn model_kind(cfg: &KvConfig) -> Result<ModelKind, ConfigError> {
    let s = cfg.get_str("model").ok_or_else(|| ConfigError::Missing("model".into()))?;
    s.parse().map_err(|e: String| ConfigError::invalid("model", e))
}

/// The model structure needed to evaluate a likelihood, without parameters.
pub fn structure_from_kv(cfg: &KvConfig) -> Result<Box<dyn IntensityModel>, ConfigError> {
    Ok(match model_kind(cfg)? {
        ModelKind::Poisson => {
            let d = cfg.get::<usize>("d")?.or(cfg.get_list::<f64>("rate")?.map(|r| r.len())).unwrap_or(1);
            Box::new(PoissonModel::new(d))
        }
        ModelKind::Hawkes => {
            let d = cfg.get::<usize>("d")?.or(cfg.get_list::<f64>("nu")?.map(|r| r.len())).unwrap_or(1);
            let mask = cfg.get_list::<u8>("mask")?.map(|m| m.into_iter().map(|x| x != 0).collect());
            Box::new(HawkesModel::with_mask(d, mask).map_err(|e| ConfigError::invalid("mask", e.to_string()))?)
        }
        ModelKind::LobLinear => {
            let m = match cfg.get::<usize>("levels")? {
                Some(m) => m,
                None => cfg.require_list::<f64>("limit")?.len(),
            };
            let layout = LobLayout::new(m).map_err(|e| ConfigError::invalid("levels", e.to_string()))?;
            let initial = match cfg.get_list::<u64>("initial")? {
                Some(sizes) => {
                    LobState::from_sizes(&layout, &sizes).map_err(|e| ConfigError::invalid("initial", e.to_string()))?
                }
                None => LobState::empty(&layout),
            };
            Box::new(LobLinearModel::new(layout, initial).map_err(|e| ConfigError::invalid("initial", e.to_string()))?)
        }
    })
}

/// `lower`/`upper` from the config, else the model default.
pub fn box_from_kv(cfg: &KvConfig, model: &dyn IntensityModel) -> Result<ParamBox, ConfigError> {
    match (cfg.get_list::<f64>("lower")?, cfg.get_list::<f64>("upper")?) {
        (None, None) => Ok(model.default_box()),
        (lo, hi) => {
            let def = model.default_box();
            let lo = lo.unwrap_or_else(|| def.lower().to_vec());
            let hi = hi.unwrap_or_else(|| def.upper().to_vec());
            ParamBox::new(lo, hi).map_err(|e| ConfigError::invalid("lower/upper", e.to_string()))
        }
    }
}

pub fn qmle_options_from_kv(cfg: &KvConfig) -> Result<QmleOptions, ConfigError> {
    let d = QmleOptions::default();
    Ok(QmleOptions {
        starts: cfg.get("starts")?.unwrap_or(d.starts),
        tol: cfg.get("tol")?.unwrap_or(d.tol),
        max_iter: cfg.get("max_iter")?.unwrap_or(d.max_iter),
        seed: cfg.get("seed")?.unwrap_or(d.seed),
        init: cfg.get_list("init")?,
    })
}

pub fn mcmc_options_from_kv(cfg: &KvConfig) -> Result<McmcOptions, ConfigError> {
    let d = McmcOptions::default();
    Ok(McmcOptions {
        chains: cfg.get("chains")?.unwrap_or(d.chains),
        burn_in: cfg.get("mcmc_burn_in")?.unwrap_or(d.burn_in),
        iterations: cfg.get("iterations")?.unwrap_or(d.iterations),
        thin: cfg.get("thin")?.unwrap_or(d.thin),
        seed: cfg.get("seed")?.unwrap_or(d.seed),
        init: cfg.get_list("init")?,
    })
}

pub fn prior_from_kv(cfg: &KvConfig) -> Result<Prior, ConfigError> {
    match cfg.get_str("prior").unwrap_or("uniform") {
        "uniform" => Ok(Prior::Uniform),
        "log-uniform" => Ok(Prior::LogUniform),
        other => Err(ConfigError::invalid("prior", format!("unknown prior `{other}` (uniform, log-uniform)"))),
    }
}

pub fn sampler_from_kv(cfg: &KvConfig) -> Result<Sampler, ConfigError> {
    parse_sampler(cfg.get_str("sampler").unwrap_or("thinning")).map_err(|e| ConfigError::invalid("sampler", e))
}

fn require_horizon(cfg: &KvConfig) -> Result<f64, ConfigError> {
    let t: f64 = cfg.require("horizon")?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(ConfigError::invalid("horizon", "must be a positive number of seconds"));
    }
    Ok(t)
}

/// Reads the `events` file for the configured model and horizon.
pub fn load_events(cfg: &KvConfig, model: &dyn IntensityModel) -> Result<(EventStream, PathBuf), HarnessError> {
    let path = PathBuf::from(cfg.get_str("events").ok_or_else(|| ConfigError::Missing("events".into()))?);
    let opts = ReadOptions { horizon: require_horizon(cfg)?, dim: Some(model.dim()), detie: false };
    Ok((read_events(&path, opts)?, path))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to regenerate the outputs: the resolved config (also as
/// config text), the library version and digests of inputs and outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config: BTreeMap<String, String>,
    pub config_text: String,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    /// Digest of `events.csv` when the command produced or read a stream.
    pub stream_sha256: Option<String>,
}

/// Writes the named files and the manifest into `out`.
pub fn write_outputs(
    out: &Path,
    command: &str,
    cfg: &KvConfig,
    inputs: &[PathBuf],
    files: &[(&str, String)],
) -> Result<Manifest, HarnessError> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    let mut input_digests = Vec::new();
    let mut stream_sha256 = None;
    for p in inputs {
        let bytes = fs::read(p).map_err(io_err(p))?;
        let d = sha256_hex(&bytes);
        stream_sha256.get_or_insert_with(|| d.clone());
        input_digests.push(FileDigest { path: p.display().to_string(), sha256: d });
    }
    let mut outputs = Vec::new();
    for (name, contents) in files {
        let path = out.join(name);
        fs::write(&path, contents).map_err(io_err(&path))?;
        let d = sha256_hex(contents.as_bytes());
        if *name == "events.csv" {
            stream_sha256 = Some(d.clone());
        }
        outputs.push(FileDigest { path: name.to_string(), sha256: d });
    }
    let manifest = Manifest {
        command: command.into(),
        version: VERSION.into(),
        config: cfg.entries().clone(),
        config_text: cfg.to_text(),
        inputs: input_digests,
        outputs,
        stream_sha256,
    };
    let path = out.join("manifest.json");
    fs::write(&path, to_json(&manifest)?).map_err(io_err(&path))?;
    Ok(manifest)
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, HarnessError> {
    serde_json::to_string_pretty(value).map_err(|e| HarnessError::Input(format!("serialization failed: {e}")))
}

fn sim_config(cfg: &KvConfig) -> Result<SimConfig, ConfigError> {
    let seed = cfg.get("seed")?.unwrap_or(0);
    let burn_in = cfg.get("burn_in")?.unwrap_or(0.0);
    Ok(SimConfig::new(require_horizon(cfg)?, seed).with_burn_in(burn_in))
}

/// Simulates the configured model; writes `events.csv` and the manifest.
pub fn cmd_simulate(cfg: &KvConfig, out: &Path) -> Result<EventStream, HarnessError> {
    let spec = ModelSpec::from_kv(cfg)?;
    spec.check_stationary()?;
    let stream = spec.simulate(sampler_from_kv(cfg)?, &sim_config(cfg)?)?;
    write_outputs(out, "simulate", cfg, &[], &[("events.csv", stream.to_csv())])?;
    Ok(stream)
}

/// QMLE on the `events` stream; writes the fit as `report.json`.
pub fn cmd_fit(cfg: &KvConfig, out: &Path) -> Result<crate::estimation::FitResult, HarnessError> {
    let model = structure_from_kv(cfg)?;
    let (stream, path) = load_events(cfg, model.as_ref())?;
    let bounds = box_from_kv(cfg, model.as_ref())?;
    let fit = qmle(&stream, model.as_ref(), &bounds, &qmle_options_from_kv(cfg)?)?;
    write_outputs(out, "fit", cfg, &[path], &[("report.json", to_json(&fit)?)])?;
    if !fit.converged {
        return Err(HarnessError::NotConverged(format!(
            "gradient norm {} above tolerance {}",
            fit.gradient_norm, fit.tolerance
        )));
    }
    Ok(fit)
}

/// Posterior mean by MCMC on the `events` stream.
pub fn cmd_bayes(cfg: &KvConfig, out: &Path) -> Result<crate::estimation::BayesResult, HarnessError> {
    let model = structure_from_kv(cfg)?;
    let (stream, path) = load_events(cfg, model.as_ref())?;
    let bounds = box_from_kv(cfg, model.as_ref())?;
    let res = qbe(&stream, model.as_ref(), &bounds, &prior_from_kv(cfg)?, &mcmc_options_from_kv(cfg)?)?;
    write_outputs(out, "bayes", cfg, &[path], &[("report.json", to_json(&res)?)])?;
    if let Some(w) = res.warnings.iter().find(|w| w.starts_with("poor_mixing")) {
        return Err(HarnessError::PoorMixing(w.clone()));
    }
    Ok(res)
}

/// Goodness of fit and assumption probes at the configured parameters, or
/// at the QMLE when the config has none.
pub fn cmd_diagnose(cfg: &KvConfig, out: &Path) -> Result<DiagnosticsReport, HarnessError> {
    let model = structure_from_kv(cfg)?;
    let (stream, path) = load_events(cfg, model.as_ref())?;
    let spec = ModelSpec::from_kv(cfg).ok();
    let theta = match &spec {
        Some(s) if s.theta().len() == model.n_params() => s.theta(),
        _ => {
            let bounds = box_from_kv(cfg, model.as_ref())?;
            qmle(&stream, model.as_ref(), &bounds, &qmle_options_from_kv(cfg)?)?.theta_hat
        }
    };
    let seed: u64 = cfg.get("seed")?.unwrap_or(0);
    let mut report = DiagnosticsReport {
        rescaling: time_rescaling_test(&stream, model.as_ref(), &theta)?,
        verdict_rule: VERDICT_RULE.into(),
        ..Default::default()
    };
    let trace = ergodic_average_trace(&stream, model.as_ref(), &theta, Statistic::MeanIntensity { component: 0 })?;

    let hawkes = match model_kind(cfg)? {
        ModelKind::Hawkes => {
            let m = HawkesModel::with_mask(model.dim(), cfg.get_list::<u8>("mask")?.map(|v| v.into_iter().map(|x| x != 0).collect()))
                .map_err(|e| HarnessError::Input(e.to_string()))?;
            Some(m.params(&theta).map_err(|e| HarnessError::Input(e.to_string()))?)
        }
        _ => None,
    };
    if let Some(p) = &hawkes {
        let rho = p.spectral_radius();
        report.stationarity = Some(StationarityReport { spectral_radius: rho, stationary: rho < 1.0 });
        if rho < 1.0 {
            let paths: usize = cfg.get("mixing_paths")?.unwrap_or(8);
            if paths >= 2 {
                let horizon = cfg.get("mixing_horizon")?.unwrap_or(500.0);
                report.mixing = Some(mixing_covariance(p, &default_lag_grid(), paths, horizon, seed)?);
            }
            let cpaths: usize = cfg.get("coupling_paths")?.unwrap_or(200);
            if cpaths >= 2 {
                let d = p.dim();
                let excited = SquareMatrix::from_row_major(
                    d,
                    p.c().as_slice().iter().map(|&c| if c > 0.0 { 5.0 } else { 0.0 }).collect(),
                )
                .expect("square");
                let grid: Vec<f64> = (1..=30).map(|k| 0.5 * k as f64).collect();
                report.coupling = Some(coupling_decay(
                    p,
                    &HawkesState::zero(d),
                    &HawkesState::with_excitation(excited),
                    &grid,
                    cpaths,
                    seed,
                )?);
            }
        }
    }
    let step: f64 = cfg.get("probe_step")?.unwrap_or(0.25);
    let grid = if theta.len() <= 4 {
        relative_lattice(&theta, step, 1)
    } else {
        axis_probe(&theta, step)
    };
    report.identifiability = Some(identifiability_probe(&stream, model.as_ref(), &theta, &grid)?);

    let csv = trace_csv(&trace.t, &trace.value, &trace.stderr);
    report.ergodic = Some(trace);
    write_outputs(out, "diagnose", cfg, &[path], &[("report.json", to_json(&report)?), ("trace.csv", csv)])?;
    let rejected: Vec<String> = report
        .rescaling
        .iter()
        .filter_map(|c| c.ks.as_ref().filter(|k| k.p_value < DIAGNOSE_ALPHA).map(|k| (c.component, k.p_value)))
        .map(|(c, p)| format!("component {c}: KS p = {p:.3e}"))
        .collect();
    if !rejected.is_empty() {
        return Err(HarnessError::GoodnessOfFit(rejected.join("; ")));
    }
    Ok(report)
}

/// Points moving one coordinate at a time by `±step` relative.
fn axis_probe(theta: &[f64], step: f64) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for i in 0..theta.len() {
        for s in [-step, step] {
            let mut p = theta.to_vec();
            p[i] *= 1.0 + s;
            out.push(p);
        }
    }
    out
}

/// Book simulation; `--model lob-linear` uses the linear-cancellation
/// model and `--model poisson` constant rates (`rate`, `2·levels + 2`
/// values) with regeneration of depleted queues.
pub fn cmd_lob_sim(cfg: &KvConfig, out: &Path) -> Result<crate::simulation::LobSimOutput, HarnessError> {
    let (model, levels) = match model_kind(cfg)? {
        ModelKind::LobLinear => {
            let p = LinearLobParams::from_kv(cfg)?;
            let m = p.levels();
            (LobModel::Linear(p), m)
        }
        ModelKind::Poisson => {
            let m: usize = cfg.require("levels")?;
            (LobModel::Poisson(PoissonParams::from_kv(cfg)?), m)
        }
        ModelKind::Hawkes => return Err(HarnessError::Input("lob-sim needs --model lob-linear or poisson".into())),
    };
    let initial = match cfg.get_list::<u64>("initial")? {
        Some(sizes) => {
            let layout = LobLayout::new(levels).map_err(|e| ConfigError::invalid("levels", e.to_string()))?;
            Some(LobState::from_sizes(&layout, &sizes).map_err(|e| ConfigError::invalid("initial", e.to_string()))?)
        }
        None => None,
    };
    let res = simulate_lob(&model, &LobSimConfig { levels, initial }, &sim_config(cfg)?)?;
    write_outputs(
        out,
        "lob-sim",
        cfg,
        &[],
        &[
            ("events.csv", res.stream.to_csv()),
            ("trajectory.csv", res.trajectory_csv()),
            ("report.json", to_json(&res.summary)?),
        ],
    )?;
    Ok(res)
}

/// Monte Carlo study; writes `report.json` and `rows.csv`.
pub fn cmd_mc_study(cfg: &KvConfig, out: &Path) -> Result<StudyReport, HarnessError> {
    let study = StudyConfig::from_kv(cfg)?;
    let report = run_study(&study)?;
    write_outputs(
        out,
        "mc-study",
        cfg,
        &[],
        &[("report.json", to_json(&report)?), ("rows.csv", rows_csv(&report.param_names, &report.rows))],
    )?;
    if !report.within_failure_budget {
        return Err(HarnessError::StudyFailed { failed: report.failed, total: report.rows.len() });
    }
    Ok(report)
}
