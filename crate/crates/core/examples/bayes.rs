//! Quasi-Bayesian estimate (posterior mean under a uniform prior on the box)
//! next to the QMLE.
//!
//! ```bash
//! cargo run --release --example bayes
//! ```

use hawkes_qla::estimation::{qbe, qmle, McmcOptions, Prior, QmleOptions};
use hawkes_qla::models::{HawkesModel, HawkesParams};
use hawkes_qla::simulation::{simulate_hawkes, Sampler, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let truth = HawkesParams::univariate(1.0, 1.0, 2.0)?;
    let stream = simulate_hawkes(&truth, Sampler::Exact, &SimConfig::new(1000.0, 5))?.stream;
    let model = HawkesModel::new(1);
    let bounds = model.default_box();
    let fit = qmle(&stream, &model, &bounds, &QmleOptions::default())?;
    let opts = McmcOptions { chains: 2, burn_in: 2000, iterations: 8000, thin: 4, seed: 5, init: None };
    let post = qbe(&stream, &model, &bounds, &Prior::Uniform, &opts)?;
    println!("acceptance rate {:.3}, r-hat {:?}", post.acceptance_rate, post.r_hat);
    for (i, name) in post.param_names.iter().enumerate() {
        let q = &post.quantiles[i];
        println!(
            "{name:8} QMLE {:.4}  QBE {:.4} (MC se {:.4})  90% band [{:.4}, {:.4}]",
            fit.theta_hat[i], post.theta_tilde[i], post.mc_standard_error[i], q.q05, q.q95
        );
    }
    for w in &post.warnings {
        println!("warning: {w}");
    }
    Ok(())
}
