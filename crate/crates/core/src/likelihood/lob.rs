//! The linear-cancellation book has `λ^k(t) = θ_k w_k(X(t-))` with
//! `w = 1` for limit orders, `|X_α|` for cancellations and the indicator of
//! a non-empty side for market orders. The likelihood therefore separates:
//!
//! ```text
//! l_T = Σ_k N_k log θ_k + Σ_i log w_{k_i}(X(T_i-)) - Σ_k θ_k W_k,   W_k = ∫_0^T w_k
//! ```

use nalgebra::{DMatrix, DVector};

use super::{
    check_dim, check_times, Derivatives, IntensityAt, IntensityModel, Interval, LikelihoodError,
    Order, Visitor, ZERO_INTENSITY,
};
use crate::events::EventStream;
use crate::models::{LinearLobParams, LobLayout, LobLinearModel, LobSide, LobState, ParamBox};

fn weights(layout: &LobLayout, state: &LobState, out: &mut [f64]) {
    let m = layout.levels();
    out[..m].iter_mut().for_each(|w| *w = 1.0);
    for a in 0..m {
        out[m + a] = state.size(a) as f64;
    }
    out[2 * m] = if state.side_nonempty(layout, LobSide::Bid) { 1.0 } else { 0.0 };
    out[2 * m + 1] = if state.side_nonempty(layout, LobSide::Ask) { 1.0 } else { 0.0 };
}

/// Replays the queue path, calling `f(start, end, w, mark)` on each interval
/// with the weights in force there and the event closing it (`None` at `T`).
fn replay<F>(model: &LobLinearModel, stream: &EventStream, mut f: F) -> Result<(), LikelihoodError>
where
    F: FnMut(f64, f64, &[f64], Option<(usize, usize)>) -> Result<(), LikelihoodError>,
{
    let layout = model.layout();
    let mut state = model.initial().clone();
    let mut w = vec![0.0; layout.n_event_types()];
    let mut start = 0.0;
    for (index, (t, k)) in stream.iter().enumerate() {
        weights(layout, &state, &mut w);
        f(start, t, &w, Some((index, k)))?;
        let event = layout.event(k).expect("mark checked against dimension");
        state
            .apply(layout, event)
            .map_err(|_| LikelihoodError::ZeroIntensityAtEvent { index })?;
        start = t;
    }
    weights(layout, &state, &mut w);
    f(start, stream.horizon(), &w, None)
}

impl LobLinearModel {
    /// Event counts `N_k` and exposures `W_k` along the observed path.
    pub fn sufficient_statistics(
        &self,
        stream: &EventStream,
    ) -> Result<(Vec<f64>, Vec<f64>), LikelihoodError> {
        check_dim(stream, self.n_params())?;
        let n = self.n_params();
        let mut counts = vec![0.0; n];
        let mut exposure = vec![0.0; n];
        replay(self, stream, |s, e, w, ev| {
            for k in 0..n {
                exposure[k] += w[k] * (e - s);
            }
            if let Some((index, k)) = ev {
                if w[k] <= 0.0 {
                    return Err(LikelihoodError::ZeroIntensityAtEvent { index });
                }
                counts[k] += 1.0;
            }
            Ok(())
        })?;
        Ok((counts, exposure))
    }

    /// Closed-form maximiser `θ_k = N_k / W_k` (`None` where `W_k = 0`).
    pub fn closed_form_mle(&self, stream: &EventStream) -> Result<Vec<Option<f64>>, LikelihoodError> {
        let (counts, exposure) = self.sufficient_statistics(stream)?;
        Ok(counts.iter().zip(&exposure).map(|(&n, &w)| (w > 0.0).then(|| n / w)).collect())
    }
}

impl IntensityModel for LobLinearModel {
    fn dim(&self) -> usize {
        self.layout().n_event_types()
    }

    fn n_params(&self) -> usize {
        LobLinearModel::n_params(self)
    }

    fn param_names(&self) -> Vec<String> {
        LobLinearModel::param_names(self)
    }

    fn default_box(&self) -> ParamBox {
        LobLinearModel::default_box(self)
    }

    fn moment_start(&self, stream: &EventStream) -> Vec<f64> {
        let bounds = LobLinearModel::default_box(self);
        match self.closed_form_mle(stream) {
            Ok(mle) => {
                let v: Vec<f64> =
                    mle.iter().zip(bounds.lower()).map(|(m, &lo)| m.unwrap_or(lo)).collect();
                bounds.clamp(&v)
            }
            Err(_) => bounds.clamp(&vec![1.0; self.n_params()]),
        }
    }

    fn evaluate(
        &self,
        stream: &EventStream,
        theta: &[f64],
        order: Order,
    ) -> Result<Derivatives, LikelihoodError> {
        let m = self.layout().levels();
        LinearLobParams::from_vector(m, theta)?;
        check_dim(stream, self.n_params())?;
        let n = self.n_params();
        let mut value = 0.0;
        let mut exposure = vec![0.0; n];
        let mut counts = vec![0.0; n];
        replay(self, stream, |s, e, w, ev| {
            for k in 0..n {
                exposure[k] += w[k] * (e - s);
            }
            if let Some((index, k)) = ev {
                let lam = theta[k] * w[k];
                if !(lam > ZERO_INTENSITY) {
                    return Err(LikelihoodError::ZeroIntensityAtEvent { index });
                }
                value += lam.ln();
                counts[k] += 1.0;
            }
            Ok(())
        })?;
        for k in 0..n {
            value -= theta[k] * exposure[k];
        }
        let gradient = (order >= Order::Gradient).then(|| {
            DVector::from_iterator(n, (0..n).map(|k| counts[k] / theta[k] - exposure[k]))
        });
        let hessian = (order >= Order::Hessian).then(|| {
            DMatrix::from_diagonal(&DVector::from_iterator(
                n,
                (0..n).map(|k| -counts[k] / (theta[k] * theta[k])),
            ))
        });
        Ok(Derivatives { value, gradient, hessian })
    }

    fn compensator_at(
        &self,
        stream: &EventStream,
        theta: &[f64],
        times: &[f64],
    ) -> Result<Vec<Vec<f64>>, LikelihoodError> {
        LinearLobParams::from_vector(self.layout().levels(), theta)?;
        check_dim(stream, self.n_params())?;
        check_times(stream, times)?;
        let n = self.n_params();
        let mut acc = vec![0.0; n];
        let mut out = Vec::with_capacity(times.len());
        let mut idx = 0;
        replay(self, stream, |s, e, w, _| {
            while idx < times.len() && times[idx] <= e {
                let q = times[idx].max(s);
                out.push((0..n).map(|k| acc[k] + theta[k] * w[k] * (q - s)).collect());
                idx += 1;
            }
            for k in 0..n {
                acc[k] += theta[k] * w[k] * (e - s);
            }
            Ok(())
        })?;
        Ok(out)
    }

    fn scan(
        &self,
        stream: &EventStream,
        theta: &[f64],
        visit: &mut Visitor<'_>,
    ) -> Result<(), LikelihoodError> {
        LinearLobParams::from_vector(self.layout().levels(), theta)?;
        check_dim(stream, self.n_params())?;
        replay(self, stream, |start, end, w, _| {
            let view = Piecewise { theta, w };
            visit(&Interval { start, end, intensity: &view })
        })
    }
}

struct Piecewise<'a> {
    theta: &'a [f64],
    w: &'a [f64],
}

impl IntensityAt for Piecewise<'_> {
    fn eval(&self, _s: f64, lambda: &mut [f64], grad: Option<&mut [f64]>) {
        let n = self.theta.len();
        for k in 0..n {
            lambda[k] = self.theta[k] * self.w[k];
        }
        if let Some(g) = grad {
            g.iter_mut().for_each(|x| *x = 0.0);
            for k in 0..n {
                g[k * n + k] = self.w[k];
            }
        }
    }
}
