use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{exp1, pick, SimConfig, SimulationError};
use crate::events::EventStream;
use crate::models::{
    observable_lob_intensity, LinearLobParams, LobLayout, LobState, PoissonParams,
};
use crate::rng::Rng;

/// Depleted queues of the constant-rate book are refilled with a size drawn
/// uniformly from `1..=REGENERATION_MAX`.
pub const REGENERATION_MAX: u64 = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LobModel {
    /// Linear cancellations, no regeneration, market orders suppressed
    /// against an empty side.
    Linear(LinearLobParams),
    /// Constant rates for all `2m + 2` event types, with regeneration.
    Poisson(PoissonParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LobSimConfig {
    pub levels: usize,
    /// Initial book; empty for the linear model and regenerated sizes for
    /// the constant-rate model when absent.
    pub initial: Option<LobState>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub time: f64,
    pub level: usize,
    pub size: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LobSummary {
    /// Time average of `|X_α|` per level.
    pub mean_size: Vec<f64>,
    pub max_size: Vec<u64>,
    /// Fraction of time each level spent at size `0, 1, 2, ...`.
    pub occupancy: Vec<Vec<f64>>,
    pub regenerations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LobSimOutput {
    pub layout: LobLayout,
    pub stream: EventStream,
    pub initial: LobState,
    pub final_state: LobState,
    pub trajectory: Vec<TrajectoryPoint>,
    pub summary: LobSummary,
}

impl LobSimOutput {
    /// Piecewise-constant path of `|X_level|` as `(time, size)` steps.
    pub fn level_path(&self, level: usize) -> Vec<(f64, u64)> {
        let mut path = vec![(0.0, self.initial.size(level))];
        path.extend(self.trajectory.iter().filter(|p| p.level == level).map(|p| (p.time, p.size)));
        path
    }

    /// Time-weighted `p`-quantile of `|X_level|` over `(t0, t1]`.
    pub fn window_quantile(&self, level: usize, t0: f64, t1: f64, p: f64) -> u64 {
        let path = self.level_path(level);
        let mut weight: Vec<(u64, f64)> = Vec::new();
        for (i, &(t, s)) in path.iter().enumerate() {
            let end = path.get(i + 1).map_or(self.stream.horizon(), |q| q.0);
            let overlap = end.min(t1) - t.max(t0);
            if overlap > 0.0 {
                weight.push((s, overlap));
            }
        }
        weight.sort_by_key(|w| w.0);
        let total: f64 = weight.iter().map(|w| w.1).sum();
        let mut acc = 0.0;
        for (s, w) in &weight {
            acc += w;
            if acc >= p * total {
                return *s;
            }
        }
        weight.last().map_or(0, |w| w.0)
    }

    /// Trajectory as `time,level,size` CSV.
    pub fn trajectory_csv(&self) -> String {
        let mut out = String::from("time,level,size\n");
        for p in &self.trajectory {
            out.push_str(&format!("{},{},{}\n", p.time, p.level, p.size));
        }
        out
    }
}

fn regenerate(state: &mut LobState, layout: &LobLayout, level: usize, rng: &mut Rng) -> u64 {
    let size = rng.random_range(1..=REGENERATION_MAX);
    state.queues[level] = layout.sign(level) * size as i64;
    size
}

/// Simulates a Markovian book on `(0, T]` event by event: the next event
/// time is exponential with the current total rate and the event type is
/// drawn proportionally to its rate.
pub fn simulate_lob(
    model: &LobModel,
    lob: &LobSimConfig,
    cfg: &SimConfig,
) -> Result<LobSimOutput, SimulationError> {
    cfg.check()?;
    let layout = LobLayout::new(lob.levels).map_err(|e| SimulationError::Config(e.to_string()))?;
    let m = layout.levels();
    let n_types = layout.n_event_types();
    match model {
        LobModel::Linear(p) if p.levels() != m => {
            return Err(SimulationError::Config(format!("parameters have {} levels, config {m}", p.levels())))
        }
        LobModel::Poisson(p) if p.dim() != n_types => {
            return Err(SimulationError::Config(format!("need {n_types} constant rates, got {}", p.dim())))
        }
        _ => {}
    }
    let mut rng = cfg.rng();
    let regenerating = matches!(model, LobModel::Poisson(_));
    let mut regenerations = 0;
    let mut state = match &lob.initial {
        Some(s) => {
            s.check(&layout).map_err(|e| SimulationError::Config(e.to_string()))?;
            s.clone()
        }
        None => LobState::empty(&layout),
    };
    if regenerating {
        for a in 0..m {
            if state.queues[a] == 0 {
                regenerate(&mut state, &layout, a, &mut rng);
            }
        }
    }
    let initial = state.clone();

    let horizon = cfg.horizon;
    let mut times = Vec::new();
    let mut marks = Vec::new();
    let mut trajectory = Vec::new();
    let mut area = vec![0.0; m];
    let mut max_size: Vec<u64> = (0..m).map(|a| state.size(a)).collect();
    let mut occupancy: Vec<Vec<f64>> = vec![Vec::new(); m];
    let mut t = 0.0;
    loop {
        let rates = match model {
            LobModel::Linear(p) => observable_lob_intensity(&state, p, &layout),
            LobModel::Poisson(p) => p.rate().to_vec(),
        };
        let total: f64 = rates.iter().sum();
        let w = if total > 0.0 { exp1(&mut rng) / total } else { f64::INFINITY };
        let dt = w.min(horizon - t);
        for a in 0..m {
            let s = state.size(a) as usize;
            area[a] += s as f64 * dt;
            if occupancy[a].len() <= s {
                occupancy[a].resize(s + 1, 0.0);
            }
            occupancy[a][s] += dt;
        }
        if t + w > horizon {
            break;
        }
        t += w;
        let k = pick(&rates, rng.random::<f64>() * total);
        let event = layout.event(k).expect("mark within event types");
        let level = state.apply(&layout, event).map_err(|e| SimulationError::Config(e.to_string()))?;
        times.push(t);
        marks.push(k);
        trajectory.push(TrajectoryPoint { time: t, level, size: state.size(level) });
        if regenerating && state.queues[level] == 0 {
            let size = regenerate(&mut state, &layout, level, &mut rng);
            regenerations += 1;
            trajectory.push(TrajectoryPoint { time: t, level, size });
        }
        max_size[level] = max_size[level].max(state.size(level));
    }
    for occ in occupancy.iter_mut() {
        occ.iter_mut().for_each(|v| *v /= horizon);
    }
    let summary = LobSummary {
        mean_size: area.iter().map(|a| a / horizon).collect(),
        max_size,
        occupancy,
        regenerations,
    };
    Ok(LobSimOutput {
        layout,
        stream: EventStream::new(times, marks, n_types, horizon)?,
        initial,
        final_state: state,
        trajectory,
        summary,
    })
}
