//! Return-rate series, crossing detection and classification.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("series has {times} times but a branch has {len} samples")]
    Length { times: usize, len: usize },
    #[error("series needs at least one branch")]
    NoBranches,
    #[error("times must be strictly increasing")]
    Unordered,
}

/// The two states of an initial manifold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Manifold {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl fmt::Display for Manifold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Manifold::Plus => "+",
            Manifold::Minus => "-",
        })
    }
}

/// Return-rate branches per site, `lambda_n^{+-}(t)`.
///
/// `plus[n][i]` is branch `n` of the rate to the initial state at
/// `times[i]`; `minus` holds the rates to its degenerate partner and may be
/// empty. Non-finite samples mark vanishing overlaps.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReturnRateSeries {
    pub times: Vec<f64>,
    pub plus: Vec<Vec<f64>>,
    pub minus: Vec<Vec<f64>>,
}

impl ReturnRateSeries {
    pub fn new(times: Vec<f64>, plus: Vec<Vec<f64>>, minus: Vec<Vec<f64>>) -> Result<Self, SeriesError> {
        let s = Self { times, plus, minus };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), SeriesError> {
        if self.plus.is_empty() {
            return Err(SeriesError::NoBranches);
        }
        for b in self.plus.iter().chain(&self.minus) {
            if b.len() != self.times.len() {
                return Err(SeriesError::Length { times: self.times.len(), len: b.len() });
            }
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SeriesError::Unordered);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn branches(&self, m: Manifold) -> &[Vec<f64>] {
        match m {
            Manifold::Plus => &self.plus,
            Manifold::Minus => &self.minus,
        }
    }

    pub fn manifolds(&self) -> Vec<Manifold> {
        if self.minus.is_empty() {
            vec![Manifold::Plus]
        } else {
            vec![Manifold::Plus, Manifold::Minus]
        }
    }

    /// Shifts every branch by `c`.
    pub fn shifted(&self, c: f64) -> Self {
        let shift = |v: &Vec<Vec<f64>>| v.iter().map(|b| b.iter().map(|x| x + c).collect()).collect();
        Self { times: self.times.clone(), plus: shift(&self.plus), minus: shift(&self.minus) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventKind {
    Branch,
    Manifold,
    DegeneracyStart,
    DegeneracyEnd,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::Branch => "branch",
            EventKind::Manifold => "manifold",
            EventKind::DegeneracyStart => "degeneracy_start",
            EventKind::DegeneracyEnd => "degeneracy_end",
        })
    }
}

/// A detected nonanalyticity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DQPTEvent {
    pub time: f64,
    pub kind: EventKind,
    /// For branch and degeneracy events the manifold they occur in; for
    /// manifold events the manifold whose rate is lower afterwards.
    pub manifold: Manifold,
    /// Uncertainty of `time`: the interpolation residual or half the grid
    /// step that brackets the event.
    pub confidence: f64,
}

/// A maximal interval of near-degenerate leading branches.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyInterval {
    pub manifold: Manifold,
    pub start: f64,
    pub end: f64,
}

/// Detector thresholds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorOptions {
    /// Rates closer than this (per site) count as degenerate.
    pub eps_deg: f64,
    /// Shortest degeneracy that counts as extended, in units of `1/J`.
    pub min_duration: f64,
    /// Largest value of the gap at a crossing, in units of the local grid
    /// step times the gap slope; 1 means "crossing within grid resolution".
    pub crossing_tol: f64,
    /// A kink needs a second difference this many times larger than the
    /// surrounding ones.
    pub kink_ratio: f64,
    /// Smallest slope jump reported as a kink.
    pub min_slope_jump: f64,
    /// At the edge of a degeneracy interval a kink needs a slope jump this
    /// many times larger than the slope change one step further out.
    pub edge_ratio: f64,
}

impl Default for DetectorOptions {
    fn default() -> Self {
        Self { eps_deg: 1e-3, min_duration: 0.5, crossing_tol: 1.0, kink_ratio: 10.0, min_slope_jump: 1e-2, edge_ratio: 3.0 }
    }
}

/// Everything the detector finds in one series.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    /// Sorted by time, then kind.
    pub events: Vec<DQPTEvent>,
    pub intervals: Vec<DegeneracyInterval>,
    /// Time spans skipped because a rate was not finite.
    pub gaps: Vec<(f64, f64)>,
}

impl Detection {
    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }
}

fn finite(xs: &[f64]) -> bool {
    xs.iter().all(|x| x.is_finite())
}

/// Pointwise `min(lambda_1^+, lambda_1^-)` (just `lambda_1^+` without a
/// partner).
pub fn total_rate(series: &ReturnRateSeries) -> Vec<f64> {
    match series.minus.first() {
        Some(m) => series.plus[0].iter().zip(m).map(|(a, b)| a.min(*b)).collect(),
        None => series.plus[0].clone(),
    }
}

/// Manifold and branch crossings, with branch events inside extended
/// degeneracies removed.
pub fn detect_crossings(series: &ReturnRateSeries, opts: &DetectorOptions) -> Vec<DQPTEvent> {
    let intervals = detect_extended_degeneracy(series, opts.eps_deg, opts.min_duration);
    let mut events = manifold_crossings(series, opts);
    for m in series.manifolds() {
        let inside = |t: f64| intervals.iter().any(|iv| iv.manifold == m && t > iv.start && t < iv.end);
        // edge extrapolation is more precise than the generic kink finder
        let mut found: Vec<DQPTEvent> =
            intervals.iter().filter(|iv| iv.manifold == m).flat_map(|iv| edge_kinks(series, iv, opts)).collect();
        for e in branch_crossings(series, m, opts) {
            let near = found.iter().any(|f| (f.time - e.time).abs() <= 2.0 * grid_step(series, e.time));
            if !inside(e.time) && !near {
                found.push(e);
            }
        }
        events.extend(found);
    }
    sort_events(&mut events);
    events
}

/// Slope discontinuities of the leading branch where it joins or leaves a
/// degeneracy interval.
///
/// Across such an edge the gap is zero on one side, so the crossing cannot
/// be seen as a minimum of the gap. The leading branch is extrapolated
/// linearly from either side and the lines are intersected within the
/// bracketing grid interval.
fn edge_kinks(series: &ReturnRateSeries, iv: &DegeneracyInterval, opts: &DetectorOptions) -> Vec<DQPTEvent> {
    let t = &series.times;
    let y = &series.branches(iv.manifold)[0];
    let n = t.len();
    let slope = |a: usize, b: usize| (y[b] - y[a]) / (t[b] - t[a]);
    let mut out = Vec::new();
    let s = t.partition_point(|&x| x < iv.start);
    let e = t.partition_point(|&x| x <= iv.end).saturating_sub(1);
    // (last sample of the outer line, first sample of the inner line, the
    // other outer and inner samples, one more outer sample)
    let mut edges = Vec::new();
    if s >= 3 && s + 1 < n {
        edges.push((s - 1, s, s - 2, s + 1, s - 3));
    }
    if e + 3 < n && e >= 1 {
        edges.push((e + 1, e, e + 2, e - 1, e + 3));
    }
    for (o, i, o2, i2, o3) in edges {
        let w = [o, i, o2, i2, o3];
        if !w.iter().all(|&k| y[k].is_finite()) {
            continue;
        }
        let outer = slope(o2, o);
        let inner = slope(i, i2);
        let before = (outer - slope(o3, o2)).abs();
        let jump = (inner - outer).abs();
        if jump < opts.min_slope_jump || jump < opts.edge_ratio * before {
            continue;
        }
        let (lo, hi) = if t[o] < t[i] { (t[o], t[i]) } else { (t[i], t[o]) };
        let tc = (y[i] - y[o] + outer * t[o] - inner * t[i]) / (outer - inner);
        let time = tc.clamp(lo, hi);
        out.push(DQPTEvent { time, kind: EventKind::Branch, manifold: iv.manifold, confidence: (tc - time).abs() });
    }
    out
}

/// Whether an event shows up as a nonanalyticity of [`total_rate`]: manifold
/// events always do, branch events only in the manifold whose rate is the
/// lower one at that time.
pub fn on_total_rate(series: &ReturnRateSeries, event: &DQPTEvent) -> bool {
    match event.kind {
        EventKind::Manifold => true,
        EventKind::DegeneracyStart | EventKind::DegeneracyEnd => false,
        EventKind::Branch => {
            let Some(minus) = series.minus.first() else { return true };
            let t = &series.times;
            let i = t.partition_point(|&x| x < event.time).min(t.len() - 1);
            let j = i.saturating_sub(1);
            let (p, m) = (series.plus[0][i].min(series.plus[0][j]), minus[i].min(minus[j]));
            match event.manifold {
                Manifold::Plus => p <= m,
                Manifold::Minus => m <= p,
            }
        }
    }
}

/// Runs every detector and merges the results.
pub fn detect(series: &ReturnRateSeries, opts: &DetectorOptions) -> Detection {
    let intervals = detect_extended_degeneracy(series, opts.eps_deg, opts.min_duration);
    let mut events = detect_crossings(series, opts);
    for iv in &intervals {
        let confidence = 0.5 * grid_step(series, iv.start);
        events.push(DQPTEvent { time: iv.start, kind: EventKind::DegeneracyStart, manifold: iv.manifold, confidence });
        events.push(DQPTEvent { time: iv.end, kind: EventKind::DegeneracyEnd, manifold: iv.manifold, confidence });
    }
    sort_events(&mut events);
    Detection { events, intervals, gaps: gaps(series) }
}

fn sort_events(events: &mut [DQPTEvent]) {
    events.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.kind.cmp(&b.kind)).then(a.manifold.cmp(&b.manifold)));
}

fn grid_step(series: &ReturnRateSeries, t: f64) -> f64 {
    let i = series.times.partition_point(|&x| x < t).min(series.len().saturating_sub(1));
    if series.len() < 2 {
        return 0.0;
    }
    let j = i.max(1);
    series.times[j] - series.times[j - 1]
}

fn gaps(series: &ReturnRateSeries) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut open: Option<f64> = None;
    for (i, &t) in series.times.iter().enumerate() {
        let bad = series.plus.iter().chain(&series.minus).any(|b| !b[i].is_finite());
        match (bad, open) {
            (true, None) => open = Some(t),
            (false, Some(s)) => {
                out.push((s, series.times[i - 1]));
                open = None;
            }
            _ => {}
        }
    }
    if let Some(s) = open {
        out.push((s, *series.times.last().unwrap()));
    }
    out
}

/// Sign changes of `lambda_1^+ - lambda_1^-`, with hysteresis `eps_deg` so
/// that exact degeneracies do not produce events.
fn manifold_crossings(series: &ReturnRateSeries, opts: &DetectorOptions) -> Vec<DQPTEvent> {
    let Some(minus) = series.minus.first() else { return Vec::new() };
    let plus = &series.plus[0];
    let t = &series.times;
    let d: Vec<f64> = plus.iter().zip(minus).map(|(a, b)| a - b).collect();
    let mut events = Vec::new();
    let mut last: Option<(usize, f64)> = None;
    for (j, &dj) in d.iter().enumerate() {
        if !dj.is_finite() {
            if !(plus[j].is_infinite() && minus[j].is_infinite()) && (plus[j].is_finite() || minus[j].is_finite()) {
                // one side infinite: the other is decisively lower
                let s = if plus[j].is_finite() { -1.0 } else { 1.0 };
                if let Some((i, sp)) = last {
                    if sp != s {
                        events.push(manifold_event(t, &d, i, j, s));
                    }
                }
                last = Some((j, s));
            }
            continue;
        }
        if dj.abs() <= opts.eps_deg {
            continue;
        }
        let s = dj.signum();
        if let Some((i, sp)) = last {
            if sp != s {
                events.push(manifold_event(t, &d, i, j, s));
            }
        }
        last = Some((j, s));
    }
    events
}

fn manifold_event(t: &[f64], d: &[f64], i: usize, j: usize, new_sign: f64) -> DQPTEvent {
    // last zero crossing of d between the two decisive samples
    let mut time = 0.5 * (t[i] + t[j]);
    let mut confidence = 0.5 * (t[j] - t[i]);
    for k in (i..j).rev() {
        let (a, b) = (d[k], d[k + 1]);
        if a.is_finite() && b.is_finite() && a * b <= 0.0 && a != b {
            let f = a / (a - b);
            time = t[k] + f * (t[k + 1] - t[k]);
            confidence = if k == i && k + 1 == j { 0.0 } else { 0.5 * (t[j] - t[i]) };
            break;
        }
    }
    let manifold = if new_sign > 0.0 { Manifold::Minus } else { Manifold::Plus };
    DQPTEvent { time, kind: EventKind::Manifold, manifold, confidence }
}

/// Crossings between the two leading branches of one manifold, plus kinks
/// of the leading branch that no second branch explains.
fn branch_crossings(series: &ReturnRateSeries, m: Manifold, opts: &DetectorOptions) -> Vec<DQPTEvent> {
    let branches = series.branches(m);
    let t = &series.times;
    let n = t.len();
    let mut events = Vec::new();
    if branches.len() >= 2 {
        let gap: Vec<f64> = branches[0].iter().zip(&branches[1]).map(|(a, b)| b - a).collect();
        for i in 2..n.saturating_sub(2) {
            let w = [gap[i - 2], gap[i - 1], gap[i], gap[i + 1], gap[i + 2]];
            if !finite(&w) || !(w[2] <= w[1] && w[2] < w[3]) {
                continue;
            }
            let left = (w[1] - w[0]) / (t[i - 1] - t[i - 2]);
            let right = (w[4] - w[3]) / (t[i + 2] - t[i + 1]);
            if !(left < 0.0 && right > 0.0) {
                continue;
            }
            // V through the outer pairs
            let c1 = w[1] - left * t[i - 1];
            let c2 = w[3] - right * t[i + 1];
            let tv = (c2 - c1) / (left - right);
            let gv = left * tv + c1;
            let step = 0.5 * (t[i + 1] - t[i - 1]);
            let resolution = opts.crossing_tol * step * left.abs().min(right);
            if w[2] <= resolution && gv.abs() <= resolution && (tv - t[i]).abs() <= step {
                events.push(DQPTEvent { time: tv, kind: EventKind::Branch, manifold: m, confidence: gv.abs() });
            }
        }
    }
    let lead = &branches[0];
    let second = branches.get(1);
    for (time, confidence) in kinks(t, lead, opts) {
        let i = t.partition_point(|&x| x < time).min(n - 1);
        let explained_by_gap = events.iter().any(|e| (e.time - time).abs() <= 2.0 * grid_step(series, time));
        if explained_by_gap {
            continue;
        }
        let degenerate_after = match second {
            None => true,
            Some(b) => (i..(i + 3).min(n)).all(|k| (b[k] - lead[k]).abs() < opts.eps_deg),
        };
        if degenerate_after {
            events.push(DQPTEvent { time, kind: EventKind::Branch, manifold: m, confidence });
        }
    }
    events.sort_by(|a, b| a.time.total_cmp(&b.time));
    events
}

/// Slope discontinuities of a sampled curve.
///
/// A kink shows up as an isolated spike in the second difference. The spike
/// sample and its larger neighbour bracket the kink, whose time is reported
/// as the midpoint of that grid interval.
pub fn kinks(t: &[f64], y: &[f64], opts: &DetectorOptions) -> Vec<(f64, f64)> {
    let n = t.len();
    if n < 5 {
        return Vec::new();
    }
    // d[i] is the second difference centred on sample i + 1
    let d: Vec<f64> = (1..n - 1)
        .map(|i| {
            let (h1, h2) = (t[i] - t[i - 1], t[i + 1] - t[i]);
            let s = (y[i + 1] - y[i]) / h2 - (y[i] - y[i - 1]) / h1;
            if s.is_finite() {
                s * 0.5 * (h1 + h2)
            } else {
                f64::NAN
            }
        })
        .collect();
    let mut out = Vec::new();
    let window = 12;
    for c in 0..d.len() {
        let v = d[c].abs();
        if !v.is_finite() {
            continue;
        }
        let lo = c.saturating_sub(3);
        let hi = (c + 3).min(d.len() - 1);
        if (lo..=hi).any(|k| k != c && !(d[k].abs() < v || (d[k].abs() == v && k > c))) {
            continue;
        }
        let i = c + 1;
        let step = 0.5 * (t[(i + 1).min(n - 1)] - t[i - 1]);
        if v / step < opts.min_slope_jump {
            continue;
        }
        let mut background: Vec<f64> = (c.saturating_sub(window)..(c + window + 1).min(d.len()))
            .filter(|&k| k + 2 < c || k > c + 2)
            .map(|k| d[k].abs())
            .filter(|x| x.is_finite())
            .collect();
        if background.len() < 4 {
            continue;
        }
        background.sort_by(f64::total_cmp);
        let median = background[background.len() / 2];
        if v < opts.kink_ratio * median {
            continue;
        }
        let before = if c > 0 { d[c - 1].abs() } else { 0.0 };
        let after = d.get(c + 1).map_or(0.0, |x| x.abs());
        let (a, b) = if before.is_finite() && (!after.is_finite() || before >= after) { (i - 1, i) } else { (i, i + 1) };
        let b = b.min(n - 1);
        out.push((0.5 * (t[a] + t[b]), 0.5 * (t[b] - t[a])));
    }
    out
}

/// Maximal runs with `|lambda_1 - lambda_2| < eps_deg` lasting at least
/// `min_duration`, per manifold.
pub fn detect_extended_degeneracy(series: &ReturnRateSeries, eps_deg: f64, min_duration: f64) -> Vec<DegeneracyInterval> {
    let mut out = Vec::new();
    for m in series.manifolds() {
        let b = series.branches(m);
        if b.len() < 2 {
            continue;
        }
        let mut start: Option<usize> = None;
        let n = series.len();
        for i in 0..=n {
            let close = i < n && b[0][i].is_finite() && b[1][i].is_finite() && (b[1][i] - b[0][i]).abs() < eps_deg;
            match (close, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    let (ts, te) = (series.times[s], series.times[i - 1]);
                    if te - ts >= min_duration {
                        out.push(DegeneracyInterval { manifold: m, start: ts, end: te });
                    }
                    start = None;
                }
                _ => {}
            }
        }
    }
    out.sort_by(|a, b| a.start.total_cmp(&b.start).then(a.manifold.cmp(&b.manifold)));
    out
}

/// Consecutive spacings of the selected events.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SpacingStats {
    pub spacings: Vec<f64>,
    pub mean: Option<f64>,
    /// Coefficient of variation of the spacings; 0 for a periodic sequence.
    pub regularity: Option<f64>,
}

pub fn spacing_statistics(events: &[DQPTEvent], kind_filter: Option<EventKind>, manifold: Option<Manifold>) -> SpacingStats {
    let mut times: Vec<f64> = events
        .iter()
        .filter(|e| kind_filter.is_none_or(|k| e.kind == k) && manifold.is_none_or(|m| e.manifold == m))
        .map(|e| e.time)
        .collect();
    times.sort_by(f64::total_cmp);
    if times.len() < 2 {
        return SpacingStats::default();
    }
    let spacings: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    let n = spacings.len() as f64;
    let mean = spacings.iter().sum::<f64>() / n;
    let var = spacings.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
    SpacingStats { spacings, mean: Some(mean), regularity: Some(var.sqrt() / mean) }
}

/// Versioned container for detector output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventsDocument {
    pub schema: String,
    pub version: u32,
    pub options: DetectorOptions,
    pub events: Vec<DQPTEvent>,
    pub intervals: Vec<DegeneracyInterval>,
    pub gaps: Vec<(f64, f64)>,
    pub counts: EventCounts,
}

pub const EVENTS_SCHEMA: &str = "lgtquench.events";
pub const EVENTS_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub branch: usize,
    pub manifold: usize,
    pub degeneracy_intervals: usize,
}

impl EventsDocument {
    pub fn new(detection: &Detection, options: DetectorOptions) -> Self {
        Self {
            schema: EVENTS_SCHEMA.to_string(),
            version: EVENTS_VERSION,
            options,
            events: detection.events.clone(),
            intervals: detection.intervals.clone(),
            gaps: detection.gaps.clone(),
            counts: EventCounts {
                branch: detection.count(EventKind::Branch),
                manifold: detection.count(EventKind::Manifold),
                degeneracy_intervals: detection.intervals.len(),
            },
        }
    }
}
