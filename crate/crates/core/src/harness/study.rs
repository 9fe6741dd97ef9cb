use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    box_from_kv, mcmc_options_from_kv, prior_from_kv, qmle_options_from_kv, sampler_from_kv, HarnessError, ModelSpec,
};
use crate::config::{ConfigError, KvConfig};
use crate::estimation::{qbe, qmle, symmetric_sqrt, McmcOptions, Prior, QmleOptions};
use crate::models::ParamBox;
use crate::rng::derive_seed;
use crate::simulation::{Sampler, SimConfig};
use crate::stats::{ks_one_sample, mean, normal_cdf, normal_quantile, raw_moment, variance};

/// The study fails when more than this fraction of replications fail.
pub const FAILURE_BUDGET: f64 = 0.10;

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub truth: ModelSpec,
    pub horizons: Vec<f64>,
    pub n_reps: usize,
    pub with_qbe: bool,
    pub seed: u64,
    pub jobs: usize,
    pub sampler: Sampler,
    pub burn_in: f64,
    pub bounds: ParamBox,
    pub qmle: QmleOptions,
    pub mcmc: McmcOptions,
    pub prior: Prior,
    /// Nominal coverage of the Wald intervals.
    pub level: f64,
}

impl StudyConfig {
    pub fn from_kv(cfg: &KvConfig) -> Result<Self, ConfigError> {
        let truth = ModelSpec::from_kv(cfg)?;
        let horizons: Vec<f64> = cfg.require_list("t_list")?;
        if horizons.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(ConfigError::invalid("t_list", "horizons must be positive"));
        }
        let estimators: Vec<String> = cfg.get_list("estimators")?.unwrap_or_else(|| vec!["qmle".into()]);
        if let Some(e) = estimators.iter().find(|e| !matches!(e.as_str(), "qmle" | "qbe")) {
            return Err(ConfigError::invalid("estimators", format!("unknown estimator `{e}` (qmle, qbe)")));
        }
        let level = cfg.get("level")?.unwrap_or(0.95);
        if !(level > 0.0 && level < 1.0) {
            return Err(ConfigError::invalid("level", "must lie in (0, 1)"));
        }
        let model = truth.intensity_model();
        Ok(Self {
            bounds: box_from_kv(cfg, model.as_ref())?,
            horizons,
            n_reps: cfg.require("n_reps")?,
            with_qbe: estimators.iter().any(|e| e == "qbe"),
            seed: cfg.get("seed")?.unwrap_or(0),
            jobs: cfg.get("jobs")?.unwrap_or_else(default_jobs),
            sampler: sampler_from_kv(cfg)?,
            burn_in: cfg.get("burn_in")?.unwrap_or(0.0),
            qmle: qmle_options_from_kv(cfg)?,
            mcmc: mcmc_options_from_kv(cfg)?,
            prior: prior_from_kv(cfg)?,
            level,
            truth,
        })
    }
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// One replication. Failed rows keep their identifiers and a reason and
/// leave every estimate empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub horizon_index: usize,
    pub horizon: f64,
    pub replication: usize,
    pub seed: u64,
    pub n_events: usize,
    pub failure: Option<String>,
    pub theta_hat: Vec<f64>,
    pub std_error: Vec<f64>,
    pub gamma_diag: Vec<f64>,
    /// `√T·Γ̂^{1/2}(θ̂ - θ*)`.
    pub z: Vec<f64>,
    /// Whether the Wald interval at the study level contains `θ*`.
    pub covered: Vec<bool>,
    pub theta_tilde: Option<Vec<f64>>,
    /// `√T·Γ̂^{1/2}(θ̃ - θ*)`.
    pub z_tilde: Option<Vec<f64>>,
}

impl StudyRow {
    fn failed(&self) -> bool {
        self.failure.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub rmse: Vec<f64>,
    pub ks_statistic: Vec<f64>,
    /// KS of each `z` coordinate against N(0, 1).
    pub ks_p_value: Vec<f64>,
    pub coverage: Option<Vec<f64>>,
    pub z_mean: Vec<f64>,
    pub z_variance: Vec<f64>,
    pub z_fourth_moment: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonSummary {
    pub horizon: f64,
    pub n_ok: usize,
    pub n_failed: usize,
    /// Absent with fewer than two successful replications.
    pub qmle: Option<EstimatorSummary>,
    pub qbe: Option<EstimatorSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub param_names: Vec<String>,
    pub theta_star: Vec<f64>,
    pub horizons: Vec<f64>,
    pub n_reps: usize,
    pub seed: u64,
    pub with_qbe: bool,
    pub level: f64,
    pub rows: Vec<StudyRow>,
    pub summary: Vec<HorizonSummary>,
    pub failed: usize,
    pub within_failure_budget: bool,
}

/// Runs `n_reps` simulate-fit replications per horizon on a pool of
/// `jobs` threads. Replication `r` at horizon index `h` uses seed
/// `derive_seed(seed, [h, r])` for simulation, QMLE starts and MCMC.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyReport, HarnessError> {
    cfg.truth.check_stationary()?;
    let model = cfg.truth.intensity_model();
    let theta_star = cfg.truth.theta();
    if cfg.bounds.len() != theta_star.len() || !cfg.bounds.contains(&theta_star) {
        return Err(HarnessError::Input("true parameters lie outside the parameter box".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.max(1))
        .build()
        .map_err(|e| HarnessError::Input(format!("thread pool: {e}")))?;
    let tasks: Vec<(usize, usize)> =
        (0..cfg.horizons.len()).flat_map(|h| (0..cfg.n_reps).map(move |r| (h, r))).collect();
    let rows: Vec<StudyRow> =
        pool.install(|| tasks.par_iter().map(|&(h, r)| replicate(cfg, model.as_ref(), &theta_star, h, r)).collect());
    let failed = rows.iter().filter(|r| r.failed()).count();
    let summary = summarize(&rows, &theta_star, &cfg.horizons, cfg.with_qbe);
    Ok(StudyReport {
        param_names: model.param_names(),
        theta_star,
        horizons: cfg.horizons.clone(),
        n_reps: cfg.n_reps,
        seed: cfg.seed,
        with_qbe: cfg.with_qbe,
        level: cfg.level,
        within_failure_budget: failed as f64 <= FAILURE_BUDGET * rows.len() as f64,
        rows,
        summary,
        failed,
    })
}

fn replicate(
    cfg: &StudyConfig,
    model: &dyn crate::likelihood::IntensityModel,
    theta_star: &[f64],
    h: usize,
    r: usize,
) -> StudyRow {
    let horizon = cfg.horizons[h];
    let seed = derive_seed(cfg.seed, &[h as u64, r as u64]);
    let mut row = StudyRow {
        horizon_index: h,
        horizon,
        replication: r,
        seed,
        n_events: 0,
        failure: None,
        theta_hat: Vec::new(),
        std_error: Vec::new(),
        gamma_diag: Vec::new(),
        z: Vec::new(),
        covered: Vec::new(),
        theta_tilde: None,
        z_tilde: None,
    };
    let stream = match cfg.truth.simulate(cfg.sampler, &SimConfig::new(horizon, seed).with_burn_in(cfg.burn_in)) {
        Ok(s) => s,
        Err(e) => {
            row.failure = Some(format!("simulation: {}", e.code()));
            return row;
        }
    };
    row.n_events = stream.len();
    let fit = match qmle(&stream, model, &cfg.bounds, &QmleOptions { seed, ..cfg.qmle.clone() }) {
        Ok(f) => f,
        Err(e) => {
            row.failure = Some(e.code().into());
            return row;
        }
    };
    let Some(se) = fit.std_errors.clone() else {
        row.failure = Some("singular_information".into());
        return row;
    };
    if !fit.converged {
        row.failure = Some("not_converged".into());
        return row;
    }
    let n = theta_star.len();
    let gamma = DMatrix::from_fn(n, n, |i, j| fit.gamma_hat[i][j]);
    let root = symmetric_sqrt(&gamma) * horizon.sqrt();
    let standardize = |theta: &[f64]| -> Vec<f64> {
        let diff = DVector::from_iterator(n, theta.iter().zip(theta_star).map(|(a, b)| a - b));
        (&root * diff).iter().copied().collect()
    };
    let q = normal_quantile(0.5 * (1.0 + cfg.level));
    row.covered = (0..n).map(|i| (fit.theta_hat[i] - theta_star[i]).abs() <= q * se[i]).collect();
    row.z = standardize(&fit.theta_hat);
    row.gamma_diag = (0..n).map(|i| gamma[(i, i)]).collect();
    row.std_error = se;
    if cfg.with_qbe {
        let opts = McmcOptions { seed, init: Some(fit.theta_hat.clone()), ..cfg.mcmc.clone() };
        match qbe(&stream, model, &cfg.bounds, &cfg.prior, &opts) {
            Ok(b) => {
                row.z_tilde = Some(standardize(&b.theta_tilde));
                row.theta_tilde = Some(b.theta_tilde);
            }
            Err(e) => {
                row.failure = Some(format!("qbe: {}", e.code()));
                row.covered.clear();
                row.z.clear();
                row.gamma_diag.clear();
                row.std_error.clear();
                return row;
            }
        }
    }
    row.theta_hat = fit.theta_hat;
    row
}

fn summarize_estimator(
    estimates: &[&[f64]],
    z: &[&[f64]],
    covered: Option<&[&[bool]]>,
    theta_star: &[f64],
) -> EstimatorSummary {
    let n = theta_star.len();
    let column = |rows: &[&[f64]], i: usize| -> Vec<f64> { rows.iter().map(|r| r[i]).collect() };
    let mut s = EstimatorSummary {
        rmse: Vec::with_capacity(n),
        ks_statistic: Vec::with_capacity(n),
        ks_p_value: Vec::with_capacity(n),
        coverage: covered.map(|_| Vec::with_capacity(n)),
        z_mean: Vec::with_capacity(n),
        z_variance: Vec::with_capacity(n),
        z_fourth_moment: Vec::with_capacity(n),
    };
    for i in 0..n {
        let est = column(estimates, i);
        s.rmse.push(mean(&est.iter().map(|e| (e - theta_star[i]).powi(2)).collect::<Vec<_>>()).sqrt());
        let zi = column(z, i);
        let ks = ks_one_sample(&zi, normal_cdf);
        s.ks_statistic.push(ks.statistic);
        s.ks_p_value.push(ks.p_value);
        s.z_mean.push(mean(&zi));
        s.z_variance.push(variance(&zi));
        s.z_fourth_moment.push(raw_moment(&zi, 4));
        if let (Some(cov), Some(out)) = (covered, s.coverage.as_mut()) {
            out.push(cov.iter().filter(|c| c[i]).count() as f64 / cov.len() as f64);
        }
    }
    s
}

/// Per-horizon summary computed from the rows alone.
pub fn summarize(rows: &[StudyRow], theta_star: &[f64], horizons: &[f64], with_qbe: bool) -> Vec<HorizonSummary> {
    horizons
        .iter()
        .enumerate()
        .map(|(h, &horizon)| {
            let at: Vec<&StudyRow> = rows.iter().filter(|r| r.horizon_index == h).collect();
            let ok: Vec<&StudyRow> = at.iter().copied().filter(|r| !r.failed()).collect();
            let enough = ok.len() >= 2;
            let qmle = enough.then(|| {
                let est: Vec<&[f64]> = ok.iter().map(|r| r.theta_hat.as_slice()).collect();
                let z: Vec<&[f64]> = ok.iter().map(|r| r.z.as_slice()).collect();
                let cov: Vec<&[bool]> = ok.iter().map(|r| r.covered.as_slice()).collect();
                summarize_estimator(&est, &z, Some(&cov), theta_star)
            });
            let qbe = (enough && with_qbe).then(|| {
                let est: Vec<&[f64]> = ok.iter().filter_map(|r| r.theta_tilde.as_deref()).collect();
                let z: Vec<&[f64]> = ok.iter().filter_map(|r| r.z_tilde.as_deref()).collect();
                summarize_estimator(&est, &z, None, theta_star)
            });
            HorizonSummary { horizon, n_ok: ok.len(), n_failed: at.len() - ok.len(), qmle, qbe }
        })
        .collect()
}

const VECTOR_COLUMNS: [&str; 7] = ["theta_hat", "std_error", "gamma_diag", "z", "covered", "theta_tilde", "z_tilde"];

/// Rows as CSV with shortest round-trip numbers, so that parsing the file
/// back reproduces every value bit for bit. Vector columns are suffixed
/// with the coordinate index; `param_names` fixes their count.
pub fn rows_csv(param_names: &[String], rows: &[StudyRow]) -> String {
    let n = param_names.len();
    let mut out = String::from("horizon_index,horizon,replication,seed,n_events,status,reason");
    for c in VECTOR_COLUMNS {
        for i in 0..n {
            out.push_str(&format!(",{c}_{i}"));
        }
    }
    out.push('\n');
    let num = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        let reason = r.failure.as_deref().unwrap_or("").replace(',', ";");
        let status = if r.failed() { "failed" } else { "ok" };
        out.push_str(&format!(
            "{},{},{},{},{},{status},{reason}",
            r.horizon_index, r.horizon, r.replication, r.seed, r.n_events
        ));
        for i in 0..n {
            out.push_str(&format!(",{}", num(r.theta_hat.get(i).copied())));
        }
        for i in 0..n {
            out.push_str(&format!(",{}", num(r.std_error.get(i).copied())));
        }
        for i in 0..n {
            out.push_str(&format!(",{}", num(r.gamma_diag.get(i).copied())));
        }
        for i in 0..n {
            out.push_str(&format!(",{}", num(r.z.get(i).copied())));
        }
        for i in 0..n {
            out.push_str(&format!(",{}", r.covered.get(i).map_or("", |&c| if c { "1" } else { "0" })));
        }
        for i in 0..n {
            out.push_str(&format!(",{}", num(r.theta_tilde.as_ref().map(|v| v[i]))));
        }
        for i in 0..n {
            out.push_str(&format!(",{}", num(r.z_tilde.as_ref().map(|v| v[i]))));
        }
        out.push('\n');
    }
    out
}

/// Parses the output of [`rows_csv`].
pub fn read_rows_csv(text: &str) -> Result<Vec<StudyRow>, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty rows file")?;
    let cols = header.split(',').count();
    let fixed = 7;
    if cols < fixed || (cols - fixed) % VECTOR_COLUMNS.len() != 0 {
        return Err(format!("unexpected header `{header}`"));
    }
    let n = (cols - fixed) / VECTOR_COLUMNS.len();
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != cols {
            return Err(format!("row {}: expected {cols} fields, found {}", k + 1, f.len()));
        }
        let bad = |what: &str| format!("row {}: bad {what}", k + 1);
        let floats = |block: usize| -> Result<Vec<f64>, String> {
            let start = fixed + block * n;
            f[start..start + n]
                .iter()
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>().map_err(|_| bad(VECTOR_COLUMNS[block])))
                .collect()
        };
        let optional = |block: usize| -> Result<Option<Vec<f64>>, String> {
            let v = floats(block)?;
            Ok((!v.is_empty()).then_some(v))
        };
        let covered = f[fixed + 4 * n..fixed + 5 * n]
            .iter()
            .filter(|s| !s.is_empty())
            .map(|s| match *s {
                "1" => Ok(true),
                "0" => Ok(false),
                _ => Err(bad("covered")),
            })
            .collect::<Result<Vec<bool>, String>>()?;
        rows.push(StudyRow {
            horizon_index: f[0].parse().map_err(|_| bad("horizon_index"))?,
            horizon: f[1].parse().map_err(|_| bad("horizon"))?,
            replication: f[2].parse().map_err(|_| bad("replication"))?,
            seed: f[3].parse().map_err(|_| bad("seed"))?,
            n_events: f[4].parse().map_err(|_| bad("n_events"))?,
            failure: match f[5] {
                "ok" => None,
                "failed" => Some(f[6].to_string()),
                _ => return Err(bad("status")),
            },
            theta_hat: floats(0)?,
            std_error: floats(1)?,
            gamma_diag: floats(2)?,
            z: floats(3)?,
            covered,
            theta_tilde: optional(5)?,
            z_tilde: optional(6)?,
        });
    }
    Ok(rows)
}
