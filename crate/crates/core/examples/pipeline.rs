//! The command pipeline as a library: simulate to CSV, fit from the file and
//! diagnose, each step writing its outputs and a manifest with SHA-256
//! digests into a directory.
//!
//! ```bash
//! cargo run --release --example pipeline
//! ```

use hawkes_qla::config::KvConfig;
use hawkes_qla::harness::{cmd_diagnose, cmd_fit, cmd_simulate};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let sim = KvConfig::parse("model = hawkes\nnu = 1\nc = 1\na = 2\nhorizon = 1000\nseed = 4\n")?;
    let stream = cmd_simulate(&sim, dir.path())?;
    println!("simulated {} events", stream.len());

    let mut cfg = KvConfig::parse("model = hawkes\nhorizon = 1000\nmixing_paths = 4\ncoupling_paths = 100\n")?;
    cfg.set("events", dir.path().join("events.csv").display());
    let fit = cmd_fit(&cfg, &dir.path().join("fit"))?;
    println!("fit {:?} -> {:.4?}", fit.param_names, fit.theta_hat);

    match cmd_diagnose(&cfg, &dir.path().join("diagnose")) {
        Ok(report) => println!("diagnostics passed; stationarity {:?}", report.stationarity),
        Err(e) => println!("diagnostics flagged: {e} (exit code {})", e.exit_code()),
    }
    for entry in std::fs::read_dir(dir.path().join("diagnose"))? {
        println!("  wrote {}", entry?.path().display());
    }
    print!("{}", std::fs::read_to_string(dir.path().join("fit/manifest.json"))?.lines().take(8).collect::<Vec<_>>().join("\n"));
    println!();
    Ok(())
}
