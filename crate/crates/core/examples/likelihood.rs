//! Log quasi-likelihood, score, observed information and empirical Fisher
//! information of a bivariate Hawkes path.
//!
//! ```bash
//! cargo run --example likelihood
//! ```

use hawkes_qla::likelihood::{empirical_fisher, log_likelihood, observed_information, score};
use hawkes_qla::models::{HawkesModel, HawkesParams, SquareMatrix};
use hawkes_qla::simulation::{simulate_hawkes, Sampler, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let theta = HawkesParams::new(
        vec![0.5, 0.7],
        SquareMatrix::from_rows(&[&[0.5, 0.2], &[0.3, 0.4]])?,
        SquareMatrix::filled(2, 1.5),
        None,
    )?;
    let stream = simulate_hawkes(&theta, Sampler::Thinning, &SimConfig::new(500.0, 11))?.stream;
    let model = HawkesModel::new(2);
    let v = model.vector(&theta);
    println!("l_T = {:.6}", log_likelihood(&stream, &model, &v)?);
    for (name, g) in model.param_names().iter().zip(score(&stream, &model, &v)?) {
        println!("  dl/d{name} = {g:.4}");
    }
    let info = observed_information(&stream, &model, &v)?;
    let fisher = empirical_fisher(&stream, &model, &v)?;
    println!("observed information / T:{:.4}", info / stream.horizon());
    println!("empirical Fisher:{fisher:.4}");
    Ok(())
}
