//! Markovian limit order book flows.
//!
//! The book is a fixed grid of `m` price levels holding unit-size orders.
//! Levels `0..m_b` are bids (stored as non-positive counts, best bid at
//! `m_b - 1`), levels `m_b..m` are asks (non-negative counts, best ask at
//! `m_b`). Event types are indexed as
//!
//! ```text
//! mark 0..m     limit order at level α
//! mark m..2m    cancellation at level α
//! mark 2m       market order hitting the bid side
//! mark 2m + 1   market order hitting the ask side
//! ```
//!
//! In the linear-cancellation model the cancellation intensity at level `α`
//! is `λ0^{C,α} |X_α(t-)|`, every other intensity is constant.

use serde::{Deserialize, Serialize};

use super::{check_nonnegative, ParamBox, ParamError};
use crate::config::{ConfigError, KvConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LobSide {
    Bid,
    Ask,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LobEvent {
    Limit(usize),
    Cancel(usize),
    Market(LobSide),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LobLayout {
    levels: usize,
    bid_levels: usize,
}

impl LobLayout {
    /// `levels / 2` bid levels below the ask levels.
    pub fn new(levels: usize) -> Result<Self, ParamError> {
        if levels < 2 {
            return Err(ParamError::Dimension(format!("need at least 2 levels, got {levels}")));
        }
        Ok(Self { levels, bid_levels: levels / 2 })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn bid_levels(&self) -> usize {
        self.bid_levels
    }

    pub fn is_bid(&self, level: usize) -> bool {
        level < self.bid_levels
    }

    /// Sign of a unit order at `level`: `-1` on the bid side, `+1` on the ask side.
    pub fn sign(&self, level: usize) -> i64 {
        if self.is_bid(level) {
            -1
        } else {
            1
        }
    }

    pub fn n_event_types(&self) -> usize {
        2 * self.levels + 2
    }

    pub fn mark(&self, event: LobEvent) -> usize {
        match event {
            LobEvent::Limit(a) => a,
            LobEvent::Cancel(a) => self.levels + a,
            LobEvent::Market(LobSide::Bid) => 2 * self.levels,
            LobEvent::Market(LobSide::Ask) => 2 * self.levels + 1,
        }
    }

    pub fn event(&self, mark: usize) -> Option<LobEvent> {
        let m = self.levels;
        match mark {
            k if k < m => Some(LobEvent::Limit(k)),
            k if k < 2 * m => Some(LobEvent::Cancel(k - m)),
            k if k == 2 * m => Some(LobEvent::Market(LobSide::Bid)),
            k if k == 2 * m + 1 => Some(LobEvent::Market(LobSide::Ask)),
            _ => None,
        }
    }

    pub fn event_names(&self) -> Vec<String> {
        let m = self.levels;
        let mut names: Vec<String> = (0..m).map(|a| format!("L{a}")).collect();
        names.extend((0..m).map(|a| format!("C{a}")));
        names.push("M_bid".into());
        names.push("M_ask".into());
        names
    }
}

/// Queue sizes `X`, signed per the layout convention.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LobState {
    pub queues: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LobStateError {
    #[error("cancellation at empty level {0}")]
    CancelEmpty(usize),
    #[error("market order against empty {0:?} side")]
    MarketEmpty(LobSide),
    #[error("level {0} has the wrong sign for its side")]
    WrongSign(usize),
    #[error("state has {got} levels, layout {expected}")]
    Levels { got: usize, expected: usize },
}

impl LobState {
    pub fn empty(layout: &LobLayout) -> Self {
        Self { queues: vec![0; layout.levels()] }
    }

    /// State from unsigned sizes per level.
    pub fn from_sizes(layout: &LobLayout, sizes: &[u64]) -> Result<Self, LobStateError> {
        if sizes.len() != layout.levels() {
            return Err(LobStateError::Levels { got: sizes.len(), expected: layout.levels() });
        }
        let queues = sizes.iter().enumerate().map(|(a, &s)| layout.sign(a) * s as i64).collect();
        Ok(Self { queues })
    }

    pub fn check(&self, layout: &LobLayout) -> Result<(), LobStateError> {
        if self.queues.len() != layout.levels() {
            return Err(LobStateError::Levels { got: self.queues.len(), expected: layout.levels() });
        }
        for (a, &x) in self.queues.iter().enumerate() {
            if x * layout.sign(a) < 0 {
                return Err(LobStateError::WrongSign(a));
            }
        }
        Ok(())
    }

    pub fn size(&self, level: usize) -> u64 {
        self.queues[level].unsigned_abs()
    }

    pub fn best_level(&self, layout: &LobLayout, side: LobSide) -> Option<usize> {
        match side {
            LobSide::Bid => (0..layout.bid_levels()).rev().find(|&a| self.queues[a] != 0),
            LobSide::Ask => (layout.bid_levels()..layout.levels()).find(|&a| self.queues[a] != 0),
        }
    }

    pub fn side_nonempty(&self, layout: &LobLayout, side: LobSide) -> bool {
        self.best_level(layout, side).is_some()
    }

    /// Applies a unit event; returns the level whose size changed.
    pub fn apply(&mut self, layout: &LobLayout, event: LobEvent) -> Result<usize, LobStateError> {
        match event {
            LobEvent::Limit(a) => {
                self.queues[a] += layout.sign(a);
                Ok(a)
            }
            LobEvent::Cancel(a) => {
                if self.queues[a] == 0 {
                    return Err(LobStateError::CancelEmpty(a));
                }
                self.queues[a] -= layout.sign(a);
                Ok(a)
            }
            LobEvent::Market(side) => {
                let a = self.best_level(layout, side).ok_or(LobStateError::MarketEmpty(side))?;
                self.queues[a] -= layout.sign(a);
                Ok(a)
            }
        }
    }
}

/// Rates of the linear-cancellation book.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearLobParams {
    pub limit: Vec<f64>,
    pub cancel: Vec<f64>,
    pub market_bid: f64,
    pub market_ask: f64,
}

impl LinearLobParams {
    /// Rates may be zero (degenerate books); estimation boxes keep them positive.
    pub fn new(
        limit: Vec<f64>,
        cancel: Vec<f64>,
        market_bid: f64,
        market_ask: f64,
    ) -> Result<Self, ParamError> {
        if limit.len() != cancel.len() || limit.len() < 2 {
            return Err(ParamError::Dimension(format!(
                "limit has {} levels, cancel {}; need equal and >= 2",
                limit.len(),
                cancel.len()
            )));
        }
        for (i, &v) in limit.iter().enumerate() {
            check_nonnegative(&format!("limit[{i}]"), v)?;
        }
        for (i, &v) in cancel.iter().enumerate() {
            check_nonnegative(&format!("cancel[{i}]"), v)?;
        }
        check_nonnegative("market_bid", market_bid)?;
        check_nonnegative("market_ask", market_ask)?;
        Ok(Self { limit, cancel, market_bid, market_ask })
    }

    pub fn levels(&self) -> usize {
        self.limit.len()
    }

    /// Flattened as `(limit.., cancel.., market_bid, market_ask)`.
    pub fn vector(&self) -> Vec<f64> {
        let mut v = self.limit.clone();
        v.extend_from_slice(&self.cancel);
        v.push(self.market_bid);
        v.push(self.market_ask);
        v
    }

    pub fn from_vector(levels: usize, theta: &[f64]) -> Result<Self, ParamError> {
        if theta.len() != 2 * levels + 2 {
            return Err(ParamError::Dimension(format!(
                "expected {} parameters, got {}",
                2 * levels + 2,
                theta.len()
            )));
        }
        Self::new(
            theta[..levels].to_vec(),
            theta[levels..2 * levels].to_vec(),
            theta[2 * levels],
            theta[2 * levels + 1],
        )
    }

    pub fn from_kv(cfg: &KvConfig) -> Result<Self, ConfigError> {
        let limit: Vec<f64> = cfg.require_list("limit")?;
        let cancel: Vec<f64> = cfg.require_list("cancel")?;
        let mb = cfg.get("market_bid")?.unwrap_or(0.0);
        let ma = cfg.get("market_ask")?.unwrap_or(0.0);
        Self::new(limit, cancel, mb, ma).map_err(|e| ConfigError::invalid("limit/cancel/market", e.to_string()))
    }

    pub fn write_kv(&self, cfg: &mut KvConfig) {
        cfg.set("levels", self.levels());
        cfg.set_list("limit", &self.limit);
        cfg.set_list("cancel", &self.cancel);
        cfg.set("market_bid", self.market_bid);
        cfg.set("market_ask", self.market_ask);
    }
}

/// Event-type intensities of the linear-cancellation model in state `X`.
///
/// Market rates are the posted constants; the simulator suppresses market
/// orders that meet an empty side, see [`observable_lob_intensity`].
pub fn lob_intensity(state: &LobState, theta: &LinearLobParams, layout: &LobLayout) -> Vec<f64> {
    let m = layout.levels();
    let mut out = Vec::with_capacity(layout.n_event_types());
    out.extend_from_slice(&theta.limit);
    out.extend((0..m).map(|a| theta.cancel[a] * state.size(a) as f64));
    out.push(theta.market_bid);
    out.push(theta.market_ask);
    out
}

/// Intensities of events that actually reach the stream: market orders are
/// switched off while their side of the book is empty.
pub fn observable_lob_intensity(
    state: &LobState,
    theta: &LinearLobParams,
    layout: &LobLayout,
) -> Vec<f64> {
    let mut out = lob_intensity(state, theta, layout);
    let m = layout.levels();
    if !state.side_nonempty(layout, LobSide::Bid) {
        out[2 * m] = 0.0;
    }
    if !state.side_nonempty(layout, LobSide::Ask) {
        out[2 * m + 1] = 0.0;
    }
    out
}

/// Estimation layout for the linear-cancellation model. The queue path is a
/// deterministic function of the initial book and the event stream.
#[derive(Debug, Clone, PartialEq)]
pub struct LobLinearModel {
    layout: LobLayout,
    initial: LobState,
}

impl LobLinearModel {
    pub fn new(layout: LobLayout, initial: LobState) -> Result<Self, LobStateError> {
        initial.check(&layout)?;
        Ok(Self { layout, initial })
    }

    pub fn layout(&self) -> &LobLayout {
        &self.layout
    }

    pub fn initial(&self) -> &LobState {
        &self.initial
    }

    pub fn n_params(&self) -> usize {
        self.layout.n_event_types()
    }

    pub fn param_names(&self) -> Vec<String> {
        let m = self.layout.levels();
        let mut names: Vec<String> = (0..m).map(|a| format!("limit[{a}]")).collect();
        names.extend((0..m).map(|a| format!("cancel[{a}]")));
        names.push("market_bid".into());
        names.push("market_ask".into());
        names
    }

    pub fn default_box(&self) -> ParamBox {
        ParamBox::uniform(self.n_params(), 1e-4, 1e3).expect("static bounds are valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout4() -> LobLayout {
        LobLayout::new(4).unwrap()
    }

    #[test]
    fn cancellation_vanishes_on_empty_queue() {
        let l = layout4();
        let p = LinearLobParams::new(vec![1.0; 4], vec![0.4; 4], 0.5, 0.5).unwrap();
        let s = LobState::from_sizes(&l, &[0, 3, 0, 1]).unwrap();
        let lam = lob_intensity(&s, &p, &l);
        assert_eq!(lam[4], 0.0);
        assert!((lam[5] - 1.2).abs() < 1e-15);
        assert_eq!(lam[6], 0.0);
        assert!((lam[7] - 0.4).abs() < 1e-15);
        assert_eq!(&lam[8..], &[0.5, 0.5]);
    }

    #[test]
    fn marks_round_trip() {
        let l = layout4();
        for k in 0..l.n_event_types() {
            assert_eq!(l.mark(l.event(k).unwrap()), k);
        }
        assert!(l.event(l.n_event_types()).is_none());
    }

    #[test]
    fn market_orders_hit_best_nonempty_level() {
        let l = layout4();
        let mut s = LobState::from_sizes(&l, &[2, 0, 0, 1]).unwrap();
        assert_eq!(s.apply(&l, LobEvent::Market(LobSide::Bid)).unwrap(), 0);
        assert_eq!(s.queues, vec![-1, 0, 0, 1]);
        assert_eq!(s.apply(&l, LobEvent::Market(LobSide::Ask)).unwrap(), 3);
        assert!(s.apply(&l, LobEvent::Market(LobSide::Ask)).is_err());
        assert!(s.apply(&l, LobEvent::Cancel(2)).is_err());
        s.apply(&l, LobEvent::Limit(2)).unwrap();
        assert_eq!(s.queues[2], 1);
        let obs = observable_lob_intensity(&s, &LinearLobParams::new(vec![1.0; 4], vec![1.0; 4], 0.5, 0.7).unwrap(), &l);
        assert_eq!(&obs[8..], &[0.5, 0.7]);
        let empty = LobState::empty(&l);
        let obs = observable_lob_intensity(&empty, &LinearLobParams::new(vec![1.0; 4], vec![1.0; 4], 0.5, 0.7).unwrap(), &l);
        assert_eq!(&obs[8..], &[0.0, 0.0]);
    }
}
