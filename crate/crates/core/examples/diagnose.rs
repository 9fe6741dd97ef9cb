//! Goodness of fit and ergodicity diagnostics for a fitted Hawkes model:
//! time-rescaling residuals, the ergodic-average trace and the
//! likelihood-ratio identifiability probe.
//!
//! ```bash
//! cargo run --release --example diagnose
//! ```

use hawkes_qla::diagnostics::{ergodic_average_trace, identifiability_probe, time_rescaling_test, Statistic};
use hawkes_qla::estimation::{qmle, QmleOptions};
use hawkes_qla::likelihood::relative_lattice;
use hawkes_qla::models::{HawkesModel, HawkesParams};
use hawkes_qla::simulation::{simulate_hawkes, Sampler, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let truth = HawkesParams::univariate(1.0, 1.0, 2.0)?;
    let cfg = SimConfig::new(5000.0, 2).with_burn_in(truth.default_burn_in().unwrap());
    let stream = simulate_hawkes(&truth, Sampler::Thinning, &cfg)?.stream;
    let model = HawkesModel::new(1);
    let fit = qmle(&stream, &model, &model.default_box(), &QmleOptions::default())?;

    for c in time_rescaling_test(&stream, &model, &fit.theta_hat)? {
        let ks = c.ks.expect("enough events");
        println!("component {}: {} residuals, mean {:.4}, KS p {:.3}", c.component, c.n_events, c.residual_mean.unwrap(), ks.p_value);
    }

    let trace = ergodic_average_trace(&stream, &model, &fit.theta_hat, Statistic::MeanIntensity { component: 0 })?;
    println!(
        "ergodic average {:.4} (stationary value {:.4}); fluctuation exponent {:.3} ± {:.3}",
        trace.final_value,
        truth.stationary_mean_intensity().unwrap()[0],
        trace.gamma_hat.unwrap_or(f64::NAN),
        trace.gamma_stderr.unwrap_or(f64::NAN)
    );

    let grid = relative_lattice(&fit.theta_hat, 0.25, 1);
    let id = identifiability_probe(&stream, &model, &fit.theta_hat, &grid)?;
    println!("identifiability: chi0 {:.4} over {} points, {} violations", id.chi0.unwrap(), id.n_points, id.violations.len());
    Ok(())
}
