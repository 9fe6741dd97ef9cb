//! Stationarity check through the spectral radius of the branching matrix
//! `Φ_{αβ} = c_{αβ} / a_{αβ}`.
//!
//! ```bash
//! cargo run --example spectral_radius
//! ```

use hawkes_qla::models::{HawkesParams, SquareMatrix};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cases = [
        ("univariate c=1 a=2", HawkesParams::univariate(1.0, 1.0, 2.0)?),
        ("univariate c=3 a=2", HawkesParams::univariate(1.0, 3.0, 2.0)?),
        (
            "bivariate",
            HawkesParams::new(
                vec![1.0, 1.0],
                SquareMatrix::from_rows(&[&[0.5, 0.2], &[0.3, 0.4]])?,
                SquareMatrix::filled(2, 1.0),
                None,
            )?,
        ),
    ];
    for (name, theta) in cases {
        match theta.stationary_mean_intensity() {
            Some(m) => println!("{name}: ρ = {:.4}, stationary, mean intensity {m:.4?}", theta.spectral_radius()),
            None => println!("{name}: ρ = {:.4}, not stationary", theta.spectral_radius()),
        }
    }
    Ok(())
}
