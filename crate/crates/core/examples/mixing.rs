//! Mixing and coupling probes of a stationary Hawkes process: the
//! autocovariance of the total intensity over lags and the decay of
//! `E|λ_A - λ_B|` for two coupled paths started from different states.
//!
//! ```bash
//! cargo run --release --example mixing
//! ```

use hawkes_qla::diagnostics::{coupling_decay, default_lag_grid, mixing_covariance};
use hawkes_qla::models::{HawkesParams, HawkesState, SquareMatrix};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let theta = HawkesParams::univariate(1.0, 1.0, 2.0)?;
    let lags = default_lag_grid();
    let mix = mixing_covariance(&theta, &lags, 10, 1000.0, 1)?;
    println!("stationary variance {:.4} ± {:.4}", mix.variance, mix.variance_stderr);
    for (k, u) in lags.iter().enumerate().step_by(4) {
        println!("  lag {u:7.3}: ratio {:+.4}  zero-consistent {}", mix.ratio[k].unwrap(), mix.consistent_with_zero[k]);
    }
    println!("fitted decay rate {:?} (a - c = 1)", mix.decay_rate);

    let grid: Vec<f64> = (1..=30).map(|k| 0.5 * k as f64).collect();
    let coupling = coupling_decay(
        &theta,
        &HawkesState::zero(1),
        &HawkesState::with_excitation(SquareMatrix::filled(1, 5.0)),
        &grid,
        1000,
        2,
    )?;
    let fit = coupling.fit.expect("enough points above noise");
    println!(
        "coupling: rate {:.3}, R² {:.3} on {} points, nonincreasing {}",
        coupling.decay_rate.unwrap(),
        fit.r_squared,
        coupling.fit_points,
        coupling.nonincreasing
    );
    Ok(())
}
