use serde::{Deserialize, Serialize};

use super::DiagnosticsError;
use crate::events::EventStream;
use crate::likelihood::{quadrature, IntensityModel, Interval};
use crate::stats::{fit_line, geometric_grid, mean, variance, LineFit};

pub const DEFAULT_TRACE_POINTS: usize = 40;
const BATCHES: usize = 10;
const TAIL_EXCLUDED: f64 = 0.1;
const REL_TOL: f64 = 1e-10;

/// Functional `ψ` averaged along the path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Statistic {
    MeanIntensity { component: usize },
    MeanInverseIntensity { component: usize },
    /// `Σ_i (∂_iλ^α)² / λ^α`, the trace of the Fisher density.
    FisherDensity { component: usize },
}

impl Statistic {
    pub fn component(&self) -> usize {
        match *self {
            Self::MeanIntensity { component }
            | Self::MeanInverseIntensity { component }
            | Self::FisherDensity { component } => component,
        }
    }

    fn needs_gradient(&self) -> bool {
        matches!(self, Self::FisherDensity { .. })
    }

    fn value(&self, lambda: f64, grad: &[f64]) -> f64 {
        match self {
            Self::MeanIntensity { .. } => lambda,
            Self::MeanInverseIntensity { .. } => 1.0 / lambda,
            Self::FisherDensity { .. } => grad.iter().map(|g| g * g).sum::<f64>() / lambda,
        }
    }
}

/// Partial averages `A_t = (1/t)∫₀ᵗψ ds` and the fluctuation exponent fitted
/// from `log|A_t - A_T| ≈ const - γ̂ log t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicTrace {
    pub statistic: Statistic,
    pub t: Vec<f64>,
    pub value: Vec<f64>,
    /// Batch-means standard error of `A_t` over ten equal batches of `(0, t]`.
    pub stderr: Vec<Option<f64>>,
    /// `|A_t - A_T|`, with round-off below `64ε·|A_T|` set to zero.
    pub deviation: Vec<f64>,
    pub final_value: f64,
    pub gamma_hat: Option<f64>,
    pub gamma_stderr: Option<f64>,
    pub fit: Option<LineFit>,
}

pub fn ergodic_average_trace(
    stream: &EventStream,
    model: &dyn IntensityModel,
    theta: &[f64],
    statistic: Statistic,
) -> Result<ErgodicTrace, DiagnosticsError> {
    let t = stream.horizon();
    let grid = geometric_grid(t * 1e-3, t, DEFAULT_TRACE_POINTS);
    ergodic_average_trace_on(stream, model, theta, statistic, &grid)
}

/// As [`ergodic_average_trace`] on a caller-supplied increasing grid ending
/// at the horizon.
pub fn ergodic_average_trace_on(
    stream: &EventStream,
    model: &dyn IntensityModel,
    theta: &[f64],
    statistic: Statistic,
    grid: &[f64],
) -> Result<ErgodicTrace, DiagnosticsError> {
    let horizon = stream.horizon();
    if statistic.component() >= model.dim() {
        return Err(DiagnosticsError::Input(format!("component {} out of range", statistic.component())));
    }
    if grid.is_empty()
        || grid.windows(2).any(|w| w[1] <= w[0])
        || grid[0] <= 0.0
        || *grid.last().unwrap() != horizon
    {
        return Err(DiagnosticsError::Input("trace grid must increase from above 0 to the horizon".into()));
    }

    // Cumulative integrals at every batch boundary j·t/10 of every grid time.
    let mut queries: Vec<(f64, usize)> = Vec::with_capacity(grid.len() * BATCHES);
    for (i, &g) in grid.iter().enumerate() {
        for j in 1..=BATCHES {
            let q = if j == BATCHES { g } else { g * j as f64 / BATCHES as f64 };
            queries.push((q, i * BATCHES + j - 1));
        }
    }
    queries.sort_by(|a, b| a.0.total_cmp(&b.0));
    let cumulative = cumulative_integrals(stream, model, theta, statistic, &queries)?;

    let mut value = Vec::with_capacity(grid.len());
    let mut stderr = Vec::with_capacity(grid.len());
    for (i, &g) in grid.iter().enumerate() {
        let c = &cumulative[i * BATCHES..(i + 1) * BATCHES];
        value.push(c[BATCHES - 1] / g);
        let width = g / BATCHES as f64;
        let batches: Vec<f64> =
            (0..BATCHES).map(|j| (c[j] - if j == 0 { 0.0 } else { c[j - 1] }) / width).collect();
        stderr.push(Some((variance(&batches) / BATCHES as f64).sqrt()));
    }
    let final_value = *value.last().unwrap();
    let floor = 64.0 * f64::EPSILON * final_value.abs();
    let deviation: Vec<f64> =
        value.iter().map(|v| (v - final_value).abs()).map(|d| if d <= floor { 0.0 } else { d }).collect();

    let (xs, ys): (Vec<f64>, Vec<f64>) = grid
        .iter()
        .zip(&deviation)
        .filter(|(&g, &d)| g <= (1.0 - TAIL_EXCLUDED) * horizon && d > 0.0)
        .map(|(g, d)| (g.ln(), d.ln()))
        .unzip();
    let fit = fit_line(&xs, &ys);
    Ok(ErgodicTrace {
        statistic,
        t: grid.to_vec(),
        value,
        stderr,
        deviation,
        final_value,
        gamma_hat: fit.map(|f| -f.slope),
        gamma_stderr: fit.map(|f| f.slope_stderr),
        fit,
    })
}

/// Mean and standard error of `γ̂` across independent traces.
pub fn pooled_exponent(traces: &[ErgodicTrace]) -> Option<(f64, f64)> {
    let g: Vec<f64> = traces.iter().filter_map(|t| t.gamma_hat).collect();
    (g.len() >= 2).then(|| (mean(&g), (variance(&g) / g.len() as f64).sqrt()))
}

fn cumulative_integrals(
    stream: &EventStream,
    model: &dyn IntensityModel,
    theta: &[f64],
    statistic: Statistic,
    queries: &[(f64, usize)],
) -> Result<Vec<f64>, DiagnosticsError> {
    let d = model.dim();
    let n = model.n_params();
    let alpha = statistic.component();
    let with_grad = statistic.needs_gradient();
    let mut out = vec![0.0; queries.len()];
    let mut total = 0.0;
    let mut qi = 0;
    let mut lambda = vec![0.0; d];
    let mut grad = vec![0.0; if with_grad { d * n } else { 0 }];
    let mut failure = None;
    model.scan(stream, theta, &mut |iv: &Interval<'_>| {
        let mut piece = |a: f64, b: f64| -> f64 {
            let mut acc = [0.0];
            let f = |s: f64, o: &mut [f64]| {
                iv.intensity.eval(s, &mut lambda, with_grad.then_some(&mut grad[..]));
                let g = if with_grad { &grad[alpha * n..(alpha + 1) * n] } else { &[][..] };
                o[0] = statistic.value(lambda[alpha], g);
            };
            if let Err(e) = quadrature::integrate(f, a, b, REL_TOL, &mut acc) {
                failure.get_or_insert(e);
            }
            acc[0]
        };
        let mut from = iv.start;
        let mut partial = 0.0;
        while qi < queries.len() && queries[qi].0 <= iv.end {
            let q = queries[qi].0.max(iv.start);
            partial += piece(from, q);
            from = q;
            out[queries[qi].1] = total + partial;
            qi += 1;
        }
        partial += piece(from, iv.end);
        total += partial;
        Ok(())
    })?;
    match failure {
        Some(e) => Err(DiagnosticsError::Likelihood(e.into())),
        None => Ok(out),
    }
}
