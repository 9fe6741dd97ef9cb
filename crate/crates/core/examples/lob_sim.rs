//! Limit order book with linear cancellations: simulate the book, then
//! recover every rate from the event stream by QMLE and by the closed form
//! `N_k / W_k`.
//!
//! ```bash
//! cargo run --release --example lob_sim
//! ```

use hawkes_qla::estimation::{qmle, QmleOptions};
use hawkes_qla::models::{LinearLobParams, LobLayout, LobLinearModel, LobState};
use hawkes_qla::simulation::{simulate_lob, LobModel, LobSimConfig, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let truth = LinearLobParams::new(vec![1.0, 1.5, 1.5, 1.0], vec![0.3, 0.25, 0.25, 0.3], 0.8, 0.8)?;
    let out = simulate_lob(
        &LobModel::Linear(truth.clone()),
        &LobSimConfig { levels: 4, initial: None },
        &SimConfig::new(3000.0, 9),
    )?;
    println!("{} events; mean queue sizes {:.3?}", out.stream.len(), out.summary.mean_size);

    let layout = LobLayout::new(4)?;
    let model = LobLinearModel::new(layout.clone(), LobState::empty(&layout))?;
    let fit = qmle(&out.stream, &model, &model.default_box(), &QmleOptions::default())?;
    let closed = model.closed_form_mle(&out.stream)?;
    for (i, name) in model.param_names().iter().enumerate() {
        println!(
            "{name:14} true {:.3}  QMLE {:.4}  closed form {:.4}",
            truth.vector()[i],
            fit.theta_hat[i],
            closed[i].unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
