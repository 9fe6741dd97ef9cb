use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hawkes_qla::config::KvConfig;
use hawkes_qla::harness::{self, HarnessError, ModelKind, Overrides};
use hawkes_qla::simulation::Sampler;

#[derive(Parser)]
#[command(name = "hawkes-qla", version, about = "Point-process simulation, quasi-likelihood estimation and diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an event stream.
    Simulate(Common),
    /// Quasi maximum likelihood fit of an event stream.
    Fit(Common),
    /// Quasi-Bayesian posterior mean by MCMC.
    Bayes(Common),
    /// Residual, ergodicity, mixing and identifiability diagnostics.
    Diagnose(Common),
    /// Limit order book simulation.
    LobSim(Common),
    /// Monte Carlo study of the estimators.
    McStudy(Common),
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Observation horizon in seconds.
    #[arg(long)]
    horizon: Option<f64>,
    /// poisson, hawkes or lob-linear.
    #[arg(long)]
    model: Option<ModelKind>,
    /// thinning or exact.
    #[arg(long, value_parser = harness::parse_sampler)]
    sampler: Option<Sampler>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Input event CSV.
    #[arg(long)]
    events: Option<PathBuf>,
    /// Row-major 0/1 kernel mask for the Hawkes model, e.g. `1,1,0,1`.
    #[arg(long)]
    mask: Option<String>,
}

impl Common {
    fn config(&self) -> Result<KvConfig, HarnessError> {
        let mut cfg = match &self.config {
            Some(p) => KvConfig::load(p)?,
            None => KvConfig::new(),
        };
        Overrides {
            seed: self.seed,
            horizon: self.horizon,
            model: self.model,
            sampler: self.sampler,
            jobs: self.jobs,
            events: self.events.clone(),
            mask: self.mask.clone(),
        }
        .apply(&mut cfg);
        Ok(cfg)
    }
}

fn run(cmd: &Command) -> Result<String, HarnessError> {
    let (common, name) = match cmd {
        Command::Simulate(c) => (c, "simulate"),
        Command::Fit(c) => (c, "fit"),
        Command::Bayes(c) => (c, "bayes"),
        Command::Diagnose(c) => (c, "diagnose"),
        Command::LobSim(c) => (c, "lob-sim"),
        Command::McStudy(c) => (c, "mc-study"),
    };
    let cfg = common.config()?;
    let out = &common.out;
    let summary = match cmd {
        Command::Simulate(_) => format!("{} events", harness::cmd_simulate(&cfg, out)?.len()),
        Command::Fit(_) => {
            let fit = harness::cmd_fit(&cfg, out)?;
            format!("loglik {} at {:?}", fit.loglik, fit.theta_hat)
        }
        Command::Bayes(_) => format!("posterior mean {:?}", harness::cmd_bayes(&cfg, out)?.theta_tilde),
        Command::Diagnose(_) => {
            let r = harness::cmd_diagnose(&cfg, out)?;
            let p: Vec<String> =
                r.rescaling.iter().map(|c| c.ks.as_ref().map_or("skipped".into(), |k| format!("{:.3}", k.p_value))).collect();
            format!("rescaling KS p-values [{}]", p.join(", "))
        }
        Command::LobSim(_) => format!("{} events", harness::cmd_lob_sim(&cfg, out)?.stream.len()),
        Command::McStudy(_) => {
            let r = harness::cmd_mc_study(&cfg, out)?;
            format!("{} replications, {} failed", r.rows.len(), r.failed)
        }
    };
    Ok(format!("{name}: {summary}; wrote {}", out.display()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // Usage errors are input errors; help and version are not errors.
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli.command) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
