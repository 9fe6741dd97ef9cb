//! Simulate a bivariate Hawkes process with both samplers and compare the
//! event counts with the stationary mean intensity.
//!
//! ```bash
//! cargo run --example simulate
//! ```

use hawkes_qla::models::{HawkesParams, SquareMatrix};
use hawkes_qla::simulation::{simulate_hawkes, Sampler, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let theta = HawkesParams::new(
        vec![0.8, 0.5],
        SquareMatrix::from_rows(&[&[0.6, 0.4], &[0.0, 0.5]])?,
        SquareMatrix::from_rows(&[&[2.0, 1.5], &[1.0, 2.0]])?,
        None,
    )?;
    println!("spectral radius {:.3}", theta.spectral_radius());
    let mean = theta.stationary_mean_intensity().expect("stationary");
    let horizon = 2000.0;
    let cfg = SimConfig::new(horizon, 7).with_burn_in(theta.default_burn_in().unwrap());
    for sampler in [Sampler::Thinning, Sampler::Exact] {
        let out = simulate_hawkes(&theta, sampler, &cfg)?;
        let counts = out.stream.counts();
        println!(
            "{sampler:?}: counts {counts:?}, expected {:.0} and {:.0}, proposals {} accepted {}",
            mean[0] * horizon,
            mean[1] * horizon,
            out.proposals,
            out.accepted
        );
    }
    let first = simulate_hawkes(&theta, Sampler::Thinning, &SimConfig::new(5.0, 7))?;
    print!("{}", first.stream.to_csv());
    Ok(())
}
