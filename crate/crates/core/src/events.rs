//! Multivariate event streams: validation, windowing and CSV IO.
//!
//! A stream records the jump instants `T_1 < T_2 < ...` of a `d`-dimensional
//! counting process on `(0, horizon]` together with the component that jumped
//! at each instant. Components never jump simultaneously, so ties are
//! rejected unless the caller opts into deterministic de-tying.

use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Header line of the event CSV format.
pub const CSV_HEADER: &str = "time,component";

/// Offset added to the k-th member of a tie group when de-tying.
pub const DETIE_STEP: f64 = 1.0 / (1u64 << 30) as f64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    NonPositiveHorizon,
    NonFiniteTime { index: usize },
    NonPositiveTime { index: usize },
    Tie { index: usize },
    NonMonotone { index: usize },
    MarkOutOfRange { index: usize, mark: usize },
    BeyondHorizon { index: usize },
    LengthMismatch { times: usize, marks: usize },
}

impl Violation {
    pub fn index(&self) -> Option<usize> {
        match *self {
            Violation::NonFiniteTime { index }
            | Violation::NonPositiveTime { index }
            | Violation::Tie { index }
            | Violation::NonMonotone { index }
            | Violation::MarkOutOfRange { index, .. }
            | Violation::BeyondHorizon { index } => Some(index),
            Violation::NonPositiveHorizon | Violation::LengthMismatch { .. } => None,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonPositiveHorizon => write!(f, "horizon must be positive"),
            Violation::NonFiniteTime { index } => write!(f, "non-finite time at index {index}"),
            Violation::NonPositiveTime { index } => write!(f, "non-positive time at index {index}"),
            Violation::Tie { index } => write!(f, "tie at index {index}"),
            Violation::NonMonotone { index } => write!(f, "non-monotone time at index {index}"),
            Violation::MarkOutOfRange { index, mark } => {
                write!(f, "mark {mark} out of range at index {index}")
            }
            Violation::BeyondHorizon { index } => write!(f, "time beyond horizon at index {index}"),
            Violation::LengthMismatch { times, marks } => {
                write!(f, "{times} times but {marks} marks")
            }
        }
    }
}

/// Outcome of [`validate`]: empty means the input is a well-formed stream.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum EventError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid stream: {}", format_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("invalid window ({start}, {end}] for horizon {horizon}")]
    InvalidWindow { start: f64, end: f64, horizon: f64 },
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Checks the stream invariants on raw parts without constructing a stream.
pub fn validate(times: &[f64], marks: &[usize], dim: usize, horizon: f64) -> ValidationReport {
    let mut violations = Vec::new();
    if !(horizon > 0.0) || !horizon.is_finite() {
        violations.push(Violation::NonPositiveHorizon);
    }
    if times.len() != marks.len() {
        violations.push(Violation::LengthMismatch { times: times.len(), marks: marks.len() });
    }
    for (i, &t) in times.iter().enumerate() {
        if !t.is_finite() {
            violations.push(Violation::NonFiniteTime { index: i });
            continue;
        }
        if t <= 0.0 {
            violations.push(Violation::NonPositiveTime { index: i });
        }
        if t > horizon {
            violations.push(Violation::BeyondHorizon { index: i });
        }
        if i > 0 && times[i - 1].is_finite() {
            if t == times[i - 1] {
                violations.push(Violation::Tie { index: i });
            } else if t < times[i - 1] {
                violations.push(Violation::NonMonotone { index: i });
            }
        }
    }
    for (i, &m) in marks.iter().enumerate() {
        if m >= dim {
            violations.push(Violation::MarkOutOfRange { index: i, mark: m });
        }
    }
    ValidationReport { violations }
}

/// Half-open observation window `(start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    start: f64,
    end: f64,
}

impl TimeWindow {
    pub fn new(start: f64, end: f64) -> Option<Self> {
        (start >= 0.0 && start < end && end.is_finite()).then_some(Self { start, end })
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn len(&self) -> f64 {
        self.end - self.start
    }
}

/// Immutable, validated record of a multivariate point process path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventStream {
    times: Vec<f64>,
    marks: Vec<usize>,
    dim: usize,
    horizon: f64,
}

impl EventStream {
    pub fn new(
        times: Vec<f64>,
        marks: Vec<usize>,
        dim: usize,
        horizon: f64,
    ) -> Result<Self, EventError> {
        let report = validate(&times, &marks, dim, horizon);
        if !report.is_ok() {
            return Err(EventError::Invalid(report.violations));
        }
        Ok(Self { times, marks, dim, horizon })
    }

    pub fn empty(dim: usize, horizon: f64) -> Result<Self, EventError> {
        Self::new(Vec::new(), Vec::new(), dim, horizon)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn marks(&self) -> &[usize] {
        &self.marks
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `N_T^alpha`, the number of jumps carrying mark `alpha`.
    pub fn count(&self, alpha: usize) -> usize {
        self.marks.iter().filter(|&&m| m == alpha).count()
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.dim];
        for &m in &self.marks {
            c[m] += 1;
        }
        c
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, usize)> + '_ {
        self.times.iter().copied().zip(self.marks.iter().copied())
    }

    /// Jump times of one component.
    pub fn component_times(&self, alpha: usize) -> Vec<f64> {
        self.iter().filter(|&(_, m)| m == alpha).map(|(t, _)| t).collect()
    }

    /// Events in `(start, end]`, shifted so the window starts at zero.
    pub fn restrict(&self, window: TimeWindow) -> Result<Self, EventError> {
        if window.end > self.horizon {
            return Err(EventError::InvalidWindow {
                start: window.start,
                end: window.end,
                horizon: self.horizon,
            });
        }
        let lo = self.times.partition_point(|&t| t <= window.start);
        let hi = self.times.partition_point(|&t| t <= window.end);
        let times = self.times[lo..hi].iter().map(|&t| t - window.start).collect();
        let marks = self.marks[lo..hi].to_vec();
        Self::new(times, marks, self.dim, window.len())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(16 * (self.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for (t, m) in self.iter() {
            // `Display` for f64 is the shortest string that round-trips.
            out.push_str(&format!("{t},{m}\n"));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), EventError> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Options for reading the CSV event format.
#[derive(Debug, Clone, Copy)]
pub struct ReadOptions {
    pub horizon: f64,
    /// Component count; inferred as `1 + max(mark)` when absent.
    pub dim: Option<usize>,
    /// Shift the k-th member of each tie group by `k * 2^-30` seconds.
    pub detie: bool,
}

impl ReadOptions {
    pub fn new(horizon: f64) -> Self {
        Self { horizon, dim: None, detie: false }
    }
}

pub fn read_events(path: impl AsRef<Path>, opts: ReadOptions) -> Result<EventStream, EventError> {
    let text = fs::read_to_string(path)?;
    parse_events(&text, opts)
}

pub fn parse_events(text: &str, opts: ReadOptions) -> Result<EventStream, EventError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end_matches('\r') == CSV_HEADER => {}
        Some((_, header)) => {
            return Err(EventError::Parse {
                line: 1,
                message: format!("expected header `{CSV_HEADER}`, found `{header}`"),
            })
        }
        None => {
            return Err(EventError::Parse { line: 1, message: "missing header".into() });
        }
    }

    let mut times = Vec::new();
    let mut marks = Vec::new();
    let mut line_of = Vec::new();
    for (i, raw) in lines {
        let line = i + 1;
        let row = raw.trim_end_matches('\r');
        if row.trim().is_empty() {
            continue;
        }
        let (t, m) = row.split_once(',').ok_or_else(|| EventError::Parse {
            line,
            message: "expected two comma-separated fields".into(),
        })?;
        let t: f64 = t.trim().parse().map_err(|e| EventError::Parse {
            line,
            message: format!("bad time `{t}`: {e}"),
        })?;
        let m: usize = m.trim().parse().map_err(|e| EventError::Parse {
            line,
            message: format!("bad component `{m}`: {e}"),
        })?;
        times.push(t);
        marks.push(m);
        line_of.push(line);
    }

    if opts.detie {
        detie(&mut times);
    }

    let dim = opts.dim.unwrap_or_else(|| marks.iter().max().map_or(1, |&m| m + 1));
    let report = validate(&times, &marks, dim, opts.horizon);
    if let Some(v) = report.violations.iter().find(|v| v.index().is_some()) {
        let line = line_of[v.index().unwrap()];
        return Err(EventError::Parse { line, message: v.to_string() });
    }
    if !report.is_ok() {
        return Err(EventError::Invalid(report.violations));
    }
    Ok(EventStream { times, marks, dim, horizon: opts.horizon })
}

/// Deterministic de-tying: within each run of equal times the k-th member
/// (0-based) is shifted by `k * 2^-30`.
pub fn detie(times: &mut [f64]) {
    let mut i = 0;
    while i < times.len() {
        let base = times[i];
        let mut j = i + 1;
        while j < times.len() && times[j] == base {
            times[j] = base + (j - i) as f64 * DETIE_STEP;
            j += 1;
        }
        i = j;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn well_formed_input_is_ok() {
        assert!(validate(&[1.0, 2.0, 3.0], &[0, 0, 1], 2, 5.0).is_ok());
    }

    #[test]
    fn tie_is_reported_with_index() {
        let r = validate(&[1.0, 1.0], &[0, 1], 2, 5.0);
        assert_eq!(r.violations, vec![Violation::Tie { index: 1 }]);
        assert_eq!(r.violations[0].to_string(), "tie at index 1");
    }

    #[test]
    fn beyond_horizon_is_reported() {
        let r = validate(&[1.0, 6.0], &[0, 0], 1, 5.0);
        assert_eq!(r.violations, vec![Violation::BeyondHorizon { index: 1 }]);
        assert!(r.violations[0].to_string().contains("time beyond horizon"));
    }

    #[test]
    fn mark_out_of_range() {
        let r = validate(&[1.0], &[3], 2, 5.0);
        assert_eq!(r.violations, vec![Violation::MarkOutOfRange { index: 0, mark: 3 }]);
    }

    #[test]
    fn parse_infers_dimension() {
        let s = parse_events("time,component\n0.5,0\n1.25,1\n", ReadOptions::new(2.0)).unwrap();
        assert_eq!(s.times(), &[0.5, 1.25]);
        assert_eq!(s.marks(), &[0, 1]);
        assert_eq!(s.dim(), 2);
        assert_eq!(s.horizon(), 2.0);
    }

    #[test]
    fn parse_empty_body() {
        let s = parse_events("time,component\n", ReadOptions::new(10.0)).unwrap();
        assert!(s.is_empty());
        assert_eq!(s.count(0), 0);
    }

    #[test]
    fn parse_out_of_order_reports_line() {
        let err = parse_events("time,component\n1.0,0\n0.5,0\n", ReadOptions::new(2.0)).unwrap_err();
        match err {
            EventError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parse_rejects_bad_header() {
        assert!(matches!(
            parse_events("t,c\n1,0\n", ReadOptions::new(2.0)),
            Err(EventError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn ties_rejected_unless_detied() {
        let text = "time,component\n1.0,0\n1.0,1\n1.0,0\n2.0,1\n";
        assert!(parse_events(text, ReadOptions::new(3.0)).is_err());
        let opts = ReadOptions { detie: true, ..ReadOptions::new(3.0) };
        let s = parse_events(text, opts).unwrap();
        assert_eq!(s.times(), &[1.0, 1.0 + DETIE_STEP, 1.0 + 2.0 * DETIE_STEP, 2.0]);
    }

    #[test]
    fn explicit_dim_keeps_empty_components() {
        let opts = ReadOptions { dim: Some(3), ..ReadOptions::new(2.0) };
        let s = parse_events("time,component\n0.5,0\n", opts).unwrap();
        assert_eq!(s.dim(), 3);
        assert_eq!(s.counts(), vec![1, 0, 0]);
    }

    #[test]
    fn restrict_examples() {
        let s = EventStream::new(vec![1.0, 2.0, 3.0], vec![0, 0, 0], 1, 4.0).unwrap();
        let r = s.restrict(TimeWindow::new(1.5, 3.0).unwrap()).unwrap();
        assert_eq!(r.times(), &[0.5, 1.5]);
        assert_eq!(r.horizon(), 1.5);

        let full = s.restrict(TimeWindow::new(0.0, 4.0).unwrap()).unwrap();
        assert_eq!(full, s);

        let empty = s.restrict(TimeWindow::new(3.0, 3.5).unwrap()).unwrap();
        assert!(empty.is_empty());
        assert_eq!(empty.horizon(), 0.5);

        assert!(s.restrict(TimeWindow::new(1.0, 5.0).unwrap()).is_err());
        assert!(TimeWindow::new(2.0, 2.0).is_none());
    }

    fn dyadic_stream() -> impl Strategy<Value = EventStream> {
        (prop::collection::btree_set(1u32..4096, 0..60), 1usize..4).prop_flat_map(|(ticks, d)| {
            let n = ticks.len();
            (Just(ticks), prop::collection::vec(0..d, n), Just(d))
        })
        .prop_map(|(ticks, marks, d)| {
            let times = ticks.into_iter().map(|k| k as f64 / 1024.0).collect();
            EventStream::new(times, marks, d, 4.0).unwrap()
        })
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_bit_exact(s in dyadic_stream(), jitter in 0.0f64..1e-3) {
            // Perturb away from dyadic values so the decimal path is exercised.
            let times: Vec<f64> = s.times().iter().map(|t| t * (1.0 - jitter)).collect();
            let s = EventStream::new(times, s.marks().to_vec(), s.dim(), s.horizon()).unwrap();
            let opts = ReadOptions { dim: Some(s.dim()), ..ReadOptions::new(s.horizon()) };
            let back = parse_events(&s.to_csv(), opts).unwrap();
            prop_assert_eq!(back, s);
        }

        #[test]
        fn nested_restrict_composes(s in dyadic_stream(), a in 0u32..16, b in 0u32..16, c in 0u32..16, e in 0u32..16) {
            let mut cuts = [a, b, c, e];
            cuts.sort_unstable();
            let [s1, s2, e2, e1] = cuts.map(|k| k as f64 / 4.0);
            prop_assume!(s1 < s2 && s2 < e2 && e2 < e1);
            let outer = s.restrict(TimeWindow::new(s1, e1).unwrap()).unwrap();
            let inner = outer.restrict(TimeWindow::new(s2 - s1, e2 - s1).unwrap()).unwrap();
            let direct = s.restrict(TimeWindow::new(s2, e2).unwrap()).unwrap();
            prop_assert_eq!(&inner, &direct);
            let again = direct.restrict(TimeWindow::new(0.0, e2 - s2).unwrap()).unwrap();
            prop_assert_eq!(again, direct);
        }
    }
}
