//! Quasi maximum likelihood fit of a univariate Hawkes process with Wald
//! intervals from the empirical Fisher information.
//!
//! ```bash
//! cargo run --example fit
//! ```

use hawkes_qla::estimation::{confidence_intervals, qmle, QmleOptions};
use hawkes_qla::models::{HawkesModel, HawkesParams};
use hawkes_qla::simulation::{simulate_hawkes, Sampler, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let truth = HawkesParams::univariate(1.0, 1.0, 2.0)?;
    let stream = simulate_hawkes(&truth, Sampler::Thinning, &SimConfig::new(2000.0, 3))?.stream;
    let model = HawkesModel::new(1);
    let fit = qmle(&stream, &model, &model.default_box(), &QmleOptions::default())?;
    println!("{} events, loglik {:.3}, converged {}", fit.n_events, fit.loglik, fit.converged);
    let ci = confidence_intervals(&fit, 0.95)?;
    for (i, name) in fit.param_names.iter().enumerate() {
        println!(
            "{name:8} true {:.3}  estimate {:.4}  95% CI [{:.4}, {:.4}]",
            model.vector(&truth)[i],
            fit.theta_hat[i],
            ci[i].lower,
            ci[i].upper
        );
    }
    Ok(())
}
