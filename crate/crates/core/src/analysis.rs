//! Quantitative outputs over run traces: densities, level-of-service,
//! cumulative mean density, utilization, crossing counts, transfer and
//! action times, distances, service factor, social cost, CSV export and
//! scheduled (automatic) analyses.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::Action;
use crate::engine::trace::{Frame, Trace, TraceRow};
use crate::geometry::{Point2, Polyline, Rect};
use crate::scenario::{PedFilter, ScenarioObjects};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("unknown measure line '{0}'")]
    UnknownLine(String),
    #[error("unknown measure area '{0}'")]
    UnknownArea(String),
    #[error("analysis '{0}' missing required parameter '{1}'")]
    MissingParam(String, String),
    #[error("trace-based filters support type and action; '{0}' filters need run state")]
    UnsupportedFilter(String),
    #[error("csv: {0}")]
    Csv(String),
}

/// Counting line; directional lines report signed crossings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureLine {
    pub id: String,
    pub polyline: Polyline,
    #[serde(default)]
    pub directional: bool,
}

/// Counting area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureArea {
    pub id: String,
    pub polygon: Polyline,
}

impl MeasureArea {
    pub fn area(&self) -> f64 {
        self.polygon.area()
    }
}

/// Pedestrian density comfort levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    A,
    B,
    C,
    D,
    E,
    F,
}

impl Level {
    pub fn as_char(&self) -> char {
        match self {
            Level::A => 'A',
            Level::B => 'B',
            Level::C => 'C',
            Level::D => 'D',
            Level::E => 'E',
            Level::F => 'F',
        }
    }

    pub fn index(&self) -> usize {
        *self as usize
    }
}

/// Density upper bounds (ped/m²) for levels A..E; F lies above the last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LOSScale {
    pub bounds: [f64; 5],
}

impl LOSScale {
    /// Fruin walkway modules (35/25/15/10/5 ft²/person) converted to ped/m².
    pub fn fruin_walkway() -> Self {
        LOSScale {
            bounds: [
                0.3075402976202778,
                0.43055641666838884,
                0.7175940277806481,
                1.076391041670972,
                2.152782083341944,
            ],
        }
    }

    /// Fruin stairway modules (20/15/10/7/4 ft²/person).
    pub fn fruin_stairway() -> Self {
        let f = |sqft: f64| 1.0 / (sqft * 0.09290304);
        LOSScale { bounds: [f(20.0), f(15.0), f(10.0), f(7.0), f(4.0)] }
    }

    /// Fruin queueing modules (13/10/7/3/2 ft²/person).
    pub fn fruin_queueing() -> Self {
        let f = |sqft: f64| 1.0 / (sqft * 0.09290304);
        LOSScale { bounds: [f(13.0), f(10.0), f(7.0), f(3.0), f(2.0)] }
    }
}

impl Default for LOSScale {
    fn default() -> Self {
        Self::fruin_walkway()
    }
}

/// First level whose upper bound is >= density (closed upper bound);
/// anything above the E bound is F.
pub fn los_classify(density: f64, scale: &LOSScale) -> Level {
    debug_assert!(density >= 0.0);
    const LEVELS: [Level; 5] = [Level::A, Level::B, Level::C, Level::D, Level::E];
    for (i, bound) in scale.bounds.iter().enumerate() {
        if density <= *bound {
            return LEVELS[i];
        }
    }
    Level::F
}

/// Monetizes person-time by activity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocialCostModel {
    /// Currency per person-hour.
    pub value_of_time: f64,
    /// Action name -> multiplier.
    pub weights: BTreeMap<String, f64>,
}

impl Default for SocialCostModel {
    fn default() -> Self {
        let mut weights = BTreeMap::new();
        weights.insert("walking".to_string(), 1.0);
        weights.insert("waiting".to_string(), 1.5);
        weights.insert("queuing".to_string(), 2.0);
        weights.insert("delayed".to_string(), 1.5);
        weights.insert("evacuating".to_string(), 1.0);
        SocialCostModel { value_of_time: 10.0, weights }
    }
}

// ---- filtering over traces -------------------------------------------------

/// True when the trace row passes the filter. Only type and action
/// predicates can be evaluated from a trace.
fn row_matches(filter: &PedFilter, row: &TraceRow, trace: &Trace) -> bool {
    if let Some(t) = &filter.type_name {
        if trace.type_name(row.type_idx) != t {
            return false;
        }
    }
    if let Some(a) = filter.action {
        if row.action != a {
            return false;
        }
    }
    true
}

fn check_filter_supported(filter: &PedFilter) -> Result<(), AnalysisError> {
    if filter.destination.is_some() {
        return Err(AnalysisError::UnsupportedFilter("destination".into()));
    }
    if !filter.visited.is_empty() {
        return Err(AnalysisError::UnsupportedFilter("visited".into()));
    }
    Ok(())
}

/// Agents whose first matching sample passes the filter.
fn matching_agents(trace: &Trace, filter: &PedFilter) -> Vec<u64> {
    let mut ids: Vec<u64> = Vec::new();
    for frame in &trace.frames {
        for row in &frame.rows {
            if row_matches(filter, row, trace) && !ids.contains(&row.agent) {
                ids.push(row.agent);
            }
        }
    }
    ids.sort();
    ids
}

// ---- density ---------------------------------------------------------------

fn frame_at<'a>(trace: &'a Trace, t: f64) -> Option<&'a Frame> {
    trace
        .frames
        .iter()
        .rev()
        .find(|f| f.time <= t + 1e-9)
        .or_else(|| trace.frames.first())
}

/// Agent centers inside the polygon divided by its area, at the frame at or
/// before `t`. Boundary points count as inside.
pub fn local_density(trace: &Trace, area: &MeasureArea, t: f64) -> f64 {
    let Some(frame) = frame_at(trace, t) else {
        return 0.0;
    };
    let a = area.area();
    if a <= 0.0 {
        return 0.0;
    }
    count_in_polygon(frame, &area.polygon) as f64 / a
}

fn count_in_polygon(frame: &Frame, polygon: &Polyline) -> usize {
    let bbox = polygon.bbox();
    frame
        .rows
        .iter()
        .filter(|r| bbox.contains(r.position()) && polygon.contains(r.position()))
        .count()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CmdResult {
    pub value: f64,
    /// True when the window reached before the start of the run.
    pub truncated: bool,
}

/// Cumulative mean density: mean of local density over frames in
/// [t - window, t].
pub fn cmd(trace: &Trace, area: &MeasureArea, window: f64, t: f64) -> CmdResult {
    debug_assert!(window > 0.0);
    let start = t - window;
    let run_start = trace.frames.first().map(|f| f.time).unwrap_or(0.0);
    let truncated = start < run_start - 1e-9;
    let a = area.area();
    let mut n = 0usize;
    let mut acc = 0.0;
    for frame in trace.frames_in(start.max(run_start), t) {
        acc += count_in_polygon(frame, &area.polygon) as f64 / a;
        n += 1;
    }
    CmdResult { value: if n > 0 { acc / n as f64 } else { 0.0 }, truncated }
}

// ---- utilization -------------------------------------------------------------

/// Fraction of sampled frames in the interval during which at least one
/// agent center lay within the cell.
pub fn utilization(trace: &Trace, cell: Rect, interval: (f64, f64)) -> f64 {
    let mut total = 0usize;
    let mut occupied = 0usize;
    for frame in trace.frames_in(interval.0, interval.1) {
        total += 1;
        if frame.rows.iter().any(|r| cell.contains(r.position())) {
            occupied += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        occupied as f64 / total as f64
    }
}

/// Regular grid for map-style outputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub min_x: f64,
    pub min_y: f64,
    pub cell: f64,
    pub cols: usize,
    pub rows: usize,
}

impl GridSpec {
    pub fn covering(bounds: Rect, cell: f64) -> GridSpec {
        GridSpec {
            min_x: bounds.min_x,
            min_y: bounds.min_y,
            cell,
            cols: ((bounds.width() / cell).ceil() as usize).max(1),
            rows: ((bounds.height() / cell).ceil() as usize).max(1),
        }
    }

    pub fn cell_rect(&self, cx: usize, cy: usize) -> Rect {
        Rect {
            min_x: self.min_x + cx as f64 * self.cell,
            min_y: self.min_y + cy as f64 * self.cell,
            max_x: self.min_x + (cx + 1) as f64 * self.cell,
            max_y: self.min_y + (cy + 1) as f64 * self.cell,
        }
    }

    pub fn index_of(&self, p: Point2) -> Option<usize> {
        let cx = ((p.x - self.min_x) / self.cell).floor() as isize;
        let cy = ((p.y - self.min_y) / self.cell).floor() as isize;
        if cx < 0 || cy < 0 || cx >= self.cols as isize || cy >= self.rows as isize {
            return None;
        }
        Some(cy as usize * self.cols + cx as usize)
    }
}

/// Per-cell scalar values over a grid (NaN marks absent samples).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGrid {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

/// Per-cell occupancy fraction over the interval.
pub fn utilization_grid(trace: &Trace, spec: GridSpec, interval: (f64, f64)) -> ScalarGrid {
    let mut occupied = vec![0u32; spec.cols * spec.rows];
    let mut total = 0u32;
    for frame in trace.frames_in(interval.0, interval.1) {
        total += 1;
        let mut seen = vec![false; occupied.len()];
        for row in &frame.rows {
            if let Some(idx) = spec.index_of(row.position()) {
                if !seen[idx] {
                    seen[idx] = true;
                    occupied[idx] += 1;
                }
            }
        }
    }
    let values = occupied
        .into_iter()
        .map(|o| if total == 0 { 0.0 } else { o as f64 / total as f64 })
        .collect();
    ScalarGrid { spec, values }
}

/// Agent-count density per cell at the frame at or before `t`.
pub fn density_grid(trace: &Trace, spec: GridSpec, t: f64) -> ScalarGrid {
    let mut counts = vec![0u32; spec.cols * spec.rows];
    if let Some(frame) = frame_at(trace, t) {
        for row in &frame.rows {
            if let Some(idx) = spec.index_of(row.position()) {
                counts[idx] += 1;
            }
        }
    }
    let cell_area = spec.cell * spec.cell;
    ScalarGrid {
        spec,
        values: counts.into_iter().map(|c| c as f64 / cell_area).collect(),
    }
}

/// Last time each cell was occupied (NaN when never), over the interval.
pub fn last_occupied_grid(trace: &Trace, spec: GridSpec, interval: (f64, f64)) -> ScalarGrid {
    let mut last = vec![f64::NAN; spec.cols * spec.rows];
    for frame in trace.frames_in(interval.0, interval.1) {
        for row in &frame.rows {
            if let Some(idx) = spec.index_of(row.position()) {
                last[idx] = frame.time;
            }
        }
    }
    ScalarGrid { spec, values: last }
}

// ---- crossings ---------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct CrossingEvent {
    pub agent: u64,
    pub time: f64,
    /// +1 right-to-left of the segment direction, -1 the other way.
    pub sign: i64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CrossingCounts {
    pub total: u64,
    pub positive: u64,
    pub negative: u64,
    pub rate_per_second: f64,
    pub events: Vec<CrossingEvent>,
}

fn orient(a: Point2, b: Point2, p: Point2) -> f64 {
    (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)
}

/// Crossing of the movement segment p0->p1 with one line segment a->b;
/// returns the sign when they properly cross. Left-to-right of the segment
/// direction counts as positive.
fn segment_crossing(a: Point2, b: Point2, p0: Point2, p1: Point2) -> Option<i64> {
    let side0 = orient(a, b, p0);
    let side1 = orient(a, b, p1);
    if side0 == 0.0 || side1 == 0.0 || (side0 > 0.0) == (side1 > 0.0) {
        return None;
    }
    // Intersection parameter along a->b must fall within the segment.
    let d0 = orient(p0, p1, a);
    let d1 = orient(p0, p1, b);
    if (d0 > 0.0) == (d1 > 0.0) {
        return None;
    }
    Some(if side0 > 0.0 { 1 } else { -1 })
}

/// Crossing events of agents over a measure line within the interval.
pub fn count_crossings(
    trace: &Trace,
    line: &MeasureLine,
    interval: (f64, f64),
    filter: &PedFilter,
) -> Result<CrossingCounts, AnalysisError> {
    check_filter_supported(filter)?;
    let mut out = CrossingCounts::default();
    let segments = line.polyline.segments();
    for agent in matching_agents(trace, filter) {
        let samples = trace.agent_samples(agent);
        for w in samples.windows(2) {
            let (t1, r1) = (w[1].0, w[1].1);
            if t1 < interval.0 - 1e-9 || t1 > interval.1 + 1e-9 {
                continue;
            }
            let p0 = w[0].1.position();
            let p1 = r1.position();
            for (a, b) in &segments {
                if let Some(sign) = segment_crossing(*a, *b, p0, p1) {
                    out.total += 1;
                    if sign > 0 {
                        out.positive += 1;
                    } else {
                        out.negative += 1;
                    }
                    out.events.push(CrossingEvent { agent, time: t1, sign });
                    break; // one event per movement step
                }
            }
        }
    }
    let span = interval.1 - interval.0;
    out.rate_per_second = if span > 0.0 { out.total as f64 / span } else { 0.0 };
    Ok(out)
}

/// Number of agents that cross `first` and later `second`, in that order.
pub fn count_pair_crossings(
    trace: &Trace,
    first: &MeasureLine,
    second: &MeasureLine,
    interval: (f64, f64),
    filter: &PedFilter,
) -> Result<u64, AnalysisError> {
    let a = count_crossings(trace, first, interval, filter)?;
    let b = count_crossings(trace, second, interval, filter)?;
    let mut completed = 0u64;
    for agent in matching_agents(trace, filter) {
        let ta = a.events.iter().filter(|e| e.agent == agent).map(|e| e.time).fold(
            None,
            |acc: Option<f64>, t| Some(acc.map_or(t, |m: f64| m.min(t))),
        );
        let Some(ta) = ta else { continue };
        if b.events.iter().any(|e| e.agent == agent && e.time > ta) {
            completed += 1;
        }
    }
    Ok(completed)
}

// ---- observers (line or area) -------------------------------------------------

/// A transfer-time endpoint: events are line crossings or area entries.
pub enum Observer<'a> {
    Line(&'a MeasureLine),
    Area(&'a MeasureArea),
}

impl<'a> Observer<'a> {
    /// Event times for one agent: crossings for lines, outside->inside
    /// transitions for areas.
    fn event_times(&self, samples: &[(f64, &TraceRow)]) -> Vec<f64> {
        let mut times = Vec::new();
        match self {
            Observer::Line(line) => {
                let segments = line.polyline.segments();
                for w in samples.windows(2) {
                    let p0 = w[0].1.position();
                    let p1 = w[1].1.position();
                    if segments
                        .iter()
                        .any(|(a, b)| segment_crossing(*a, *b, p0, p1).is_some())
                    {
                        times.push(w[1].0);
                    }
                }
            }
            Observer::Area(area) => {
                let mut inside = false;
                for (t, row) in samples {
                    let now = area.polygon.contains(row.position());
                    if now && !inside {
                        times.push(*t);
                    }
                    inside = now;
                }
            }
        }
        times
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TransferTimes {
    pub per_agent: Vec<(u64, f64)>,
    pub total: f64,
    pub mean: f64,
    /// Agents that passed `from` but never completed `to`.
    pub excluded: u64,
}

/// Per agent: first event at `to` after the last event at `from`.
pub fn transfer_times(
    trace: &Trace,
    from: &Observer,
    to: &Observer,
    interval: (f64, f64),
    filter: &PedFilter,
) -> Result<TransferTimes, AnalysisError> {
    check_filter_supported(filter)?;
    let mut out = TransferTimes::default();
    for agent in matching_agents(trace, filter) {
        let samples = trace.agent_samples(agent);
        let from_times: Vec<f64> = from
            .event_times(&samples)
            .into_iter()
            .filter(|t| *t >= interval.0 - 1e-9 && *t <= interval.1 + 1e-9)
            .collect();
        let Some(&last_from) = from_times.last() else {
            continue;
        };
        let to_time = to
            .event_times(&samples)
            .into_iter()
            .find(|t| *t > last_from && *t <= interval.1 + 1e-9);
        match to_time {
            Some(t) => out.per_agent.push((agent, t - last_from)),
            None => out.excluded += 1,
        }
    }
    out.total = out.per_agent.iter().map(|(_, t)| t).sum();
    out.mean = if out.per_agent.is_empty() {
        0.0
    } else {
        out.total / out.per_agent.len() as f64
    };
    Ok(out)
}

// ---- action times ----------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ActionTimes {
    /// Agent -> summed time performing the action inside the area.
    pub per_agent: Vec<(u64, f64)>,
    pub total: f64,
    pub mean: f64,
    pub max: f64,
}

/// Time spent performing `action` inside the area, per agent.
pub fn action_times(
    trace: &Trace,
    area: &MeasureArea,
    action: Action,
    interval: (f64, f64),
    filter: &PedFilter,
) -> Result<ActionTimes, AnalysisError> {
    check_filter_supported(filter)?;
    let mut out = ActionTimes::default();
    for agent in matching_agents(trace, filter) {
        let samples = trace.agent_samples(agent);
        let mut acc = 0.0;
        let mut prev_time: Option<f64> = None;
        for (t, row) in &samples {
            let step = prev_time.map(|p| t - p).unwrap_or(trace.dt);
            prev_time = Some(*t);
            if *t < interval.0 - 1e-9 || *t > interval.1 + 1e-9 {
                continue;
            }
            if row.action == action && area.polygon.contains(row.position()) {
                acc += step;
            }
        }
        if acc > 0.0 {
            out.per_agent.push((agent, acc));
        }
    }
    out.total = out.per_agent.iter().map(|(_, t)| t).sum();
    out.mean = if out.per_agent.is_empty() {
        0.0
    } else {
        out.total / out.per_agent.len() as f64
    };
    out.max = out.per_agent.iter().map(|(_, t)| *t).fold(0.0, f64::max);
    Ok(out)
}

// ---- distances ----------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Distances {
    pub per_agent: Vec<(u64, f64)>,
    pub total: f64,
    pub mean: f64,
}

/// Sum of per-step displacement while inside the area (step endpoint rule).
pub fn distances(
    trace: &Trace,
    area: &MeasureArea,
    interval: (f64, f64),
    filter: &PedFilter,
) -> Result<Distances, AnalysisError> {
    check_filter_supported(filter)?;
    let mut out = Distances::default();
    for agent in matching_agents(trace, filter) {
        let samples = trace.agent_samples(agent);
        let mut acc = 0.0;
        let mut seen = false;
        for w in samples.windows(2) {
            let (t1, r1) = (w[1].0, w[1].1);
            if t1 < interval.0 - 1e-9 || t1 > interval.1 + 1e-9 {
                continue;
            }
            if area.polygon.contains(r1.position()) {
                seen = true;
                acc += w[0].1.position().distance(&r1.position());
            }
        }
        if seen {
            out.per_agent.push((agent, acc));
        }
    }
    out.total = out.per_agent.iter().map(|(_, d)| d).sum();
    out.mean = if out.per_agent.is_empty() {
        0.0
    } else {
        out.total / out.per_agent.len() as f64
    };
    Ok(out)
}

// ---- service factor and social cost -----------------------------------------------

/// Exposure-weighted LOS: sum over levels of weight x share of
/// person-seconds spent at that level. None when nobody was exposed.
pub fn service_factor(
    trace: &Trace,
    area: &MeasureArea,
    interval: (f64, f64),
    scale: &LOSScale,
    weights: &[f64; 6],
) -> Option<f64> {
    let a = area.area();
    if a <= 0.0 {
        return None;
    }
    let mut person_seconds = [0.0f64; 6];
    let mut prev_time: Option<f64> = None;
    for frame in trace.frames_in(interval.0, interval.1) {
        let step = prev_time.map(|p| frame.time - p).unwrap_or(trace.dt);
        prev_time = Some(frame.time);
        let count = count_in_polygon(frame, &area.polygon);
        if count == 0 {
            continue;
        }
        let level = los_classify(count as f64 / a, scale);
        person_seconds[level.index()] += count as f64 * step;
    }
    let total: f64 = person_seconds.iter().sum();
    if total <= 0.0 {
        return None;
    }
    Some(
        person_seconds
            .iter()
            .zip(weights.iter())
            .map(|(ps, w)| w * ps / total)
            .sum(),
    )
}

pub const DEFAULT_SF_WEIGHTS: [f64; 6] = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];

/// Monetized person-time over the interval.
pub fn social_cost(trace: &Trace, model: &SocialCostModel, interval: (f64, f64)) -> f64 {
    let mut weighted_seconds = 0.0;
    let mut prev_time: Option<f64> = None;
    for frame in trace.frames_in(interval.0, interval.1) {
        let step = prev_time.map(|p| frame.time - p).unwrap_or(trace.dt);
        prev_time = Some(frame.time);
        for row in &frame.rows {
            let w = model.weights.get(row.action.as_str()).copied().unwrap_or(1.0);
            weighted_seconds += w * step;
        }
    }
    weighted_seconds / 3600.0 * model.value_of_time
}

// ---- tabular export ------------------------------------------------------------

/// One analysis result cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Cell {
    fn encode(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            // Debug keeps the ".0" so numeric types survive a round trip.
            Cell::Float(v) => format!("{v:?}"),
            Cell::Text(s) => s.clone(),
        }
    }

    fn decode(s: &str) -> Cell {
        if let Ok(i) = s.parse::<i64>() {
            return Cell::Int(i);
        }
        if (s.contains('.') || s.contains('e') || s.contains('E')) && s.parse::<f64>().is_ok() {
            return Cell::Float(s.parse().unwrap());
        }
        Cell::Text(s.to_string())
    }
}

/// Column-ordered analysis result.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnalysisTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl AnalysisTable {
    pub fn new(columns: &[&str]) -> Self {
        AnalysisTable {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Stable column order; `parse_analysis_csv` restores equal tables.
pub fn export_analysis_csv(table: &AnalysisTable) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&table.columns).expect("in-memory write");
    for row in &table.rows {
        w.write_record(row.iter().map(|c| c.encode())).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

pub fn parse_analysis_csv(text: &str) -> Result<AnalysisTable, AnalysisError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let columns = reader
        .headers()
        .map_err(|e| AnalysisError::Csv(e.to_string()))?
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut table = AnalysisTable { columns, rows: Vec::new() };
    for record in reader.records() {
        let record = record.map_err(|e| AnalysisError::Csv(e.to_string()))?;
        table.rows.push(record.iter().map(Cell::decode).collect());
    }
    Ok(table)
}

// ---- analysis definitions (scenario bundle `analyses` section) -------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalysisKind {
    LocalDensity,
    Cmd,
    Utilization,
    CountCrossings,
    TransferTimes,
    ActionTimes,
    Distances,
    ServiceFactor,
    SocialCost,
}

/// Declarative analysis from the scenario bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisDef {
    pub id: String,
    pub kind: AnalysisKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub area: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line2: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<Action>,
    #[serde(default, skip_serializing_if = "PedFilter::is_empty")]
    pub filter: PedFilter,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<[f64; 6]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_of_time: Option<f64>,
    /// Emit automatically every N seconds during the run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub every: Option<f64>,
}

impl AnalysisDef {
    pub fn minimal(id: &str, kind: AnalysisKind) -> Self {
        AnalysisDef {
            id: id.to_string(),
            kind,
            area: None,
            line: None,
            line2: None,
            from: None,
            to: None,
            window: None,
            at: None,
            interval: None,
            action: None,
            filter: PedFilter::default(),
            cell: None,
            weights: None,
            value_of_time: None,
            every: None,
        }
    }
}

fn find_area<'a>(objects: &'a ScenarioObjects, id: &str) -> Result<MeasureArea, AnalysisError> {
    if let Some(a) = objects.measure_areas.iter().find(|a| a.id == id) {
        return Ok(a.clone());
    }
    // Any named closed object polygon works as a measuring area.
    for (name, poly) in objects.monitored_areas() {
        if name == id && poly.closed {
            return Ok(MeasureArea { id: name, polygon: poly.clone() });
        }
    }
    Err(AnalysisError::UnknownArea(id.to_string()))
}

fn find_line<'a>(objects: &'a ScenarioObjects, id: &str) -> Result<&'a MeasureLine, AnalysisError> {
    objects
        .measure_lines
        .iter()
        .find(|l| l.id == id)
        .ok_or_else(|| AnalysisError::UnknownLine(id.to_string()))
}

fn observer<'a>(
    objects: &'a ScenarioObjects,
    id: &str,
    areas: &'a mut Vec<MeasureArea>,
) -> Result<Observer<'a>, AnalysisError> {
    if let Ok(line) = find_line(objects, id) {
        return Ok(Observer::Line(line));
    }
    let area = find_area(objects, id)?;
    areas.push(area);
    Ok(Observer::Area(areas.last().unwrap()))
}

/// Executes one analysis definition over a trace. `now` (engine-scheduled
/// emissions) caps the evaluation time.
pub fn run_analysis(
    def: &AnalysisDef,
    trace: &Trace,
    objects: &ScenarioObjects,
    now: Option<f64>,
) -> Result<AnalysisTable, AnalysisError> {
    let end_default = now.unwrap_or_else(|| trace.duration());
    let interval = def.interval.unwrap_or((0.0, end_default));
    let missing = |p: &str| AnalysisError::MissingParam(def.id.clone(), p.to_string());
    let t_eval = def.at.or(now).unwrap_or_else(|| trace.duration());

    match def.kind {
        AnalysisKind::LocalDensity => {
            let area = find_area(objects, def.area.as_deref().ok_or_else(|| missing("area"))?)?;
            let d = local_density(trace, &area, t_eval);
            let count = frame_at(trace, t_eval)
                .map(|f| count_in_polygon(f, &area.polygon))
                .unwrap_or(0);
            let mut table = AnalysisTable::new(&["time_s", "area", "count", "density_ped_m2"]);
            table.push(vec![
                Cell::Float(t_eval),
                Cell::Text(area.id.clone()),
                Cell::Int(count as i64),
                Cell::Float(d),
            ]);
            Ok(table)
        }
        AnalysisKind::Cmd => {
            let area = find_area(objects, def.area.as_deref().ok_or_else(|| missing("area"))?)?;
            let window = def.window.ok_or_else(|| missing("window"))?;
            let r = cmd(trace, &area, window, t_eval);
            let mut table =
                AnalysisTable::new(&["time_s", "area", "window_s", "cmd_ped_m2", "truncated"]);
            table.push(vec![
                Cell::Float(t_eval),
                Cell::Text(area.id.clone()),
                Cell::Float(window),
                Cell::Float(r.value),
                Cell::Int(r.truncated as i64),
            ]);
            Ok(table)
        }
        AnalysisKind::Utilization => {
            let area = find_area(objects, def.area.as_deref().ok_or_else(|| missing("area"))?)?;
            let cell = def.cell.unwrap_or(1.0);
            let spec = GridSpec::covering(area.polygon.bbox(), cell);
            let grid = utilization_grid(trace, spec, interval);
            let mut table = AnalysisTable::new(&["cell_x", "cell_y", "x_m", "y_m", "fraction"]);
            for cy in 0..spec.rows {
                for cx in 0..spec.cols {
                    let rect = spec.cell_rect(cx, cy);
                    table.push(vec![
                        Cell::Int(cx as i64),
                        Cell::Int(cy as i64),
                        Cell::Float(rect.min_x),
                        Cell::Float(rect.min_y),
                        Cell::Float(grid.values[cy * spec.cols + cx]),
                    ]);
                }
            }
            Ok(table)
        }
        AnalysisKind::CountCrossings => {
            let line = find_line(objects, def.line.as_deref().ok_or_else(|| missing("line"))?)?;
            if let Some(second_id) = def.line2.as_deref() {
                let second = find_line(objects, second_id)?;
                let completed =
                    count_pair_crossings(trace, line, second, interval, &def.filter)?;
                let mut table =
                    AnalysisTable::new(&["first", "second", "completed", "rate_per_s"]);
                let span = interval.1 - interval.0;
                table.push(vec![
                    Cell::Text(line.id.clone()),
                    Cell::Text(second.id.clone()),
                    Cell::Int(completed as i64),
                    Cell::Float(if span > 0.0 { completed as f64 / span } else { 0.0 }),
                ]);
                Ok(table)
            } else {
                let c = count_crossings(trace, line, interval, &def.filter)?;
                let mut table = AnalysisTable::new(&[
                    "line",
                    "start_s",
                    "end_s",
                    "total",
                    "positive",
                    "negative",
                    "rate_per_s",
                ]);
                table.push(vec![
                    Cell::Text(line.id.clone()),
                    Cell::Float(interval.0),
                    Cell::Float(interval.1),
                    Cell::Int(c.total as i64),
                    Cell::Int(c.positive as i64),
                    Cell::Int(c.negative as i64),
                    Cell::Float(c.rate_per_second),
                ]);
                Ok(table)
            }
        }
        AnalysisKind::TransferTimes => {
            let mut areas = Vec::new();
            let mut areas2 = Vec::new();
            let from = observer(objects, def.from.as_deref().ok_or_else(|| missing("from"))?, &mut areas)?;
            let to = observer(objects, def.to.as_deref().ok_or_else(|| missing("to"))?, &mut areas2)?;
            let r = transfer_times(trace, &from, &to, interval, &def.filter)?;
            let mut table = AnalysisTable::new(&["agent_id", "transfer_s"]);
            for (agent, t) in &r.per_agent {
                table.push(vec![Cell::Int(*agent as i64), Cell::Float(*t)]);
            }
            Ok(table)
        }
        AnalysisKind::ActionTimes => {
            let area = find_area(objects, def.area.as_deref().ok_or_else(|| missing("area"))?)?;
            let action = def.action.ok_or_else(|| missing("action"))?;
            let r = action_times(trace, &area, action, interval, &def.filter)?;
            let mut table = AnalysisTable::new(&["agent_id", "seconds"]);
            for (agent, t) in &r.per_agent {
                table.push(vec![Cell::Int(*agent as i64), Cell::Float(*t)]);
            }
            Ok(table)
        }
        AnalysisKind::Distances => {
            let area = find_area(objects, def.area.as_deref().ok_or_else(|| missing("area"))?)?;
            let r = distances(trace, &area, interval, &def.filter)?;
            let mut table = AnalysisTable::new(&["agent_id", "meters"]);
            for (agent, d) in &r.per_agent {
                table.push(vec![Cell::Int(*agent as i64), Cell::Float(*d)]);
            }
            Ok(table)
        }
        AnalysisKind::ServiceFactor => {
            let area = find_area(objects, def.area.as_deref().ok_or_else(|| missing("area"))?)?;
            let weights = def.weights.unwrap_or(DEFAULT_SF_WEIGHTS);
            let sf = service_factor(trace, &area, interval, &LOSScale::default(), &weights);
            let mut table = AnalysisTable::new(&["area", "start_s", "end_s", "service_factor"]);
            match sf {
                Some(v) => table.push(vec![
                    Cell::Text(area.id.clone()),
                    Cell::Float(interval.0),
                    Cell::Float(interval.1),
                    Cell::Float(v),
                ]),
                None => table.push(vec![
                    Cell::Text(area.id.clone()),
                    Cell::Float(interval.0),
                    Cell::Float(interval.1),
                    Cell::Text("absent".into()),
                ]),
            }
            Ok(table)
        }
        AnalysisKind::SocialCost => {
            let mut model = SocialCostModel::default();
            if let Some(vot) = def.value_of_time {
                model.value_of_time = vot;
            }
            let cost = social_cost(trace, &model, interval);
            let mut table = AnalysisTable::new(&["start_s", "end_s", "cost"]);
            table.push(vec![Cell::Float(interval.0), Cell::Float(interval.1), Cell::Float(cost)]);
            Ok(table)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::trace::Frame;

    fn area(x0: f64, y0: f64, x1: f64, y1: f64) -> MeasureArea {
        MeasureArea {
            id: "a".into(),
            polygon: Polyline::closed(vec![
                Point2::xy(x0, y0),
                Point2::xy(x1, y0),
                Point2::xy(x1, y1),
                Point2::xy(x0, y1),
            ])
            .unwrap(),
        }
    }

    fn row(agent: u64, x: f64, y: f64, action: Action) -> TraceRow {
        TraceRow { agent, type_idx: 0, x, y, action, stage: 0, speed: 0.0 }
    }

    fn trace_of(frames: Vec<Frame>) -> Trace {
        Trace { dt: 0.1, type_names: vec!["commuter".into()], frames, exits: vec![], events: vec![] }
    }

    #[test]
    fn local_density_division() {
        // 12 agents inside a 3 x 2 m area -> 2.0 ped/m².
        let rows: Vec<TraceRow> = (0..12)
            .map(|i| row(i, 0.2 + 0.2 * (i % 4) as f64, 0.3 + 0.5 * (i / 4) as f64, Action::Walking))
            .collect();
        let t = trace_of(vec![Frame { tick: 1, time: 0.1, rows }]);
        let a = area(0.0, 0.0, 3.0, 2.0);
        assert!((local_density(&t, &a, 0.1) - 2.0).abs() < 1e-12);
        // Empty area.
        let empty = area(10.0, 10.0, 11.0, 11.0);
        assert_eq!(local_density(&t, &empty, 0.1), 0.0);
    }

    #[test]
    fn boundary_agent_counts_as_inside() {
        let t = trace_of(vec![Frame {
            tick: 1,
            time: 0.1,
            rows: vec![row(1, 0.0, 0.5, Action::Walking)],
        }]);
        let a = area(0.0, 0.0, 1.0, 1.0);
        assert!((local_density(&t, &a, 0.1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn los_default_scale_examples() {
        let scale = LOSScale::default();
        assert_eq!(los_classify(0.0, &scale), Level::A);
        assert_eq!(los_classify(2.0, &scale), Level::E);
        // Exact bound maps to the lower level.
        assert_eq!(los_classify(scale.bounds[0], &scale), Level::A);
        assert_eq!(los_classify(scale.bounds[4], &scale), Level::E);
        assert_eq!(los_classify(scale.bounds[4] + 1e-9, &scale), Level::F);
    }

    #[test]
    fn los_is_monotone_in_density() {
        let scale = LOSScale::default();
        let mut prev = Level::A;
        for i in 0..200 {
            let level = los_classify(i as f64 * 0.025, &scale);
            assert!(level >= prev);
            prev = level;
        }
    }

    #[test]
    fn cmd_mean_and_truncation() {
        // Densities 1, 2, 3 over three frames in a 1 m² area.
        let a = area(0.0, 0.0, 1.0, 1.0);
        let frames = (1..=3u64)
            .map(|k| Frame {
                tick: k,
                time: k as f64 * 0.1,
                rows: (0..k).map(|i| row(i, 0.5, 0.5, Action::Walking)).collect(),
            })
            .collect();
        let t = trace_of(frames);
        let r = cmd(&t, &a, 0.2, 0.3);
        assert!((r.value - 2.0).abs() < 1e-12);
        assert!(!r.truncated);
        let r2 = cmd(&t, &a, 10.0, 0.3);
        assert!(r2.truncated);
        // Window of one step degenerates to local density.
        let r3 = cmd(&t, &a, 1e-6, 0.3);
        assert!((r3.value - local_density(&t, &a, 0.3)).abs() < 1e-12);
    }

    #[test]
    fn cmd_of_constant_density_is_exact() {
        let a = area(0.0, 0.0, 2.0, 2.0);
        let frames = (1..=50u64)
            .map(|k| Frame {
                tick: k,
                time: k as f64 * 0.1,
                rows: (0..8).map(|i| row(i, 0.3 + 0.2 * (i % 4) as f64, 0.5 + (i / 4) as f64, Action::Walking)).collect(),
            })
            .collect();
        let t = trace_of(frames);
        let r = cmd(&t, &a, 3.0, 5.0);
        assert_eq!(r.value, 2.0);
    }

    #[test]
    fn utilization_fraction() {
        let cell = Rect { min_x: 0.0, min_y: 0.0, max_x: 1.0, max_y: 1.0 };
        let frames = (1..=100u64)
            .map(|k| Frame {
                tick: k,
                time: k as f64 * 0.1,
                rows: if k <= 30 { vec![row(1, 0.5, 0.5, Action::Walking)] } else { vec![row(1, 5.0, 5.0, Action::Walking)] },
            })
            .collect();
        let t = trace_of(frames);
        assert!((utilization(&t, cell, (0.0, 10.0)) - 0.3).abs() < 1e-12);
        let never = Rect { min_x: 50.0, min_y: 50.0, max_x: 51.0, max_y: 51.0 };
        assert_eq!(utilization(&t, never, (0.0, 10.0)), 0.0);
        let always = Rect { min_x: -10.0, min_y: -10.0, max_x: 10.0, max_y: 10.0 };
        assert_eq!(utilization(&t, always, (0.0, 10.0)), 1.0);
    }

    fn line(id: &str, x: f64) -> MeasureLine {
        MeasureLine {
            id: id.into(),
            polyline: Polyline::open(vec![Point2::xy(x, -5.0), Point2::xy(x, 5.0)]).unwrap(),
            directional: true,
        }
    }

    #[test]
    fn crossing_counts_and_signs() {
        // Agent oscillates across x=1: right, left, right -> 3 events, +2/-1.
        let xs = [0.5, 1.5, 0.5, 1.5];
        let frames = xs
            .iter()
            .enumerate()
            .map(|(k, x)| Frame {
                tick: k as u64 + 1,
                time: (k + 1) as f64 * 0.1,
                rows: vec![row(1, *x, 0.0, Action::Walking)],
            })
            .collect();
        let t = trace_of(frames);
        let c = count_crossings(&t, &line("l", 1.0), (0.0, 10.0), &PedFilter::default()).unwrap();
        assert_eq!(c.total, 3);
        // Line points +y; moving +x crosses left-to-right (positive).
        assert_eq!(c.positive, 2);
        assert_eq!(c.negative, 1);
    }

    #[test]
    fn crossing_rate() {
        // 5 agents cross once each over 10 s -> 0.5 /s.
        let frames = vec![
            Frame {
                tick: 1,
                time: 1.0,
                rows: (1..=5).map(|i| row(i, 0.5, i as f64 - 3.0, Action::Walking)).collect(),
            },
            Frame {
                tick: 2,
                time: 2.0,
                rows: (1..=5).map(|i| row(i, 1.5, i as f64 - 3.0, Action::Walking)).collect(),
            },
        ];
        let t = trace_of(frames);
        let c = count_crossings(&t, &line("l", 1.0), (0.0, 10.0), &PedFilter::default()).unwrap();
        assert_eq!(c.total, 5);
        assert!((c.rate_per_second - 0.5).abs() < 1e-12);
    }

    #[test]
    fn pair_crossings_require_order() {
        // Agent crosses A (x=1) only.
        let frames = vec![
            Frame { tick: 1, time: 0.1, rows: vec![row(1, 0.5, 0.0, Action::Walking)] },
            Frame { tick: 2, time: 0.2, rows: vec![row(1, 1.5, 0.0, Action::Walking)] },
        ];
        let t = trace_of(frames);
        let a = line("A", 1.0);
        let b = line("B", 5.0);
        assert_eq!(count_pair_crossings(&t, &a, &b, (0.0, 10.0), &PedFilter::default()).unwrap(), 0);
    }

    #[test]
    fn transfer_time_hand_value() {
        // Crosses A at 10 s, B at 55 s -> 45 s.
        let mut frames = Vec::new();
        for k in 1..=600u64 {
            let time = k as f64 * 0.1;
            let x = if time < 10.0 {
                0.5
            } else if time < 55.0 {
                2.0
            } else {
                6.0
            };
            frames.push(Frame { tick: k, time, rows: vec![row(1, x, 0.0, Action::Walking)] });
        }
        let t = trace_of(frames);
        let a = line("A", 1.0);
        let b = line("B", 5.0);
        let r = transfer_times(&t, &Observer::Line(&a), &Observer::Line(&b), (0.0, 60.0), &PedFilter::default()).unwrap();
        assert_eq!(r.per_agent.len(), 1);
        assert!((r.per_agent[0].1 - 45.0).abs() < 1e-9);
    }

    #[test]
    fn transfer_time_mean_and_filter() {
        // Agents 1 and 2 take 40 s and 50 s.
        let mut frames = Vec::new();
        for k in 1..=600u64 {
            let time = k as f64 * 0.1;
            let x1 = if time < 5.0 { 0.5 } else if time < 45.0 { 2.0 } else { 6.0 };
            let x2 = if time < 5.0 { 0.5 } else if time < 55.0 { 2.0 } else { 6.0 };
            frames.push(Frame {
                tick: k,
                time,
                rows: vec![row(1, x1, 0.0, Action::Walking), row(2, x2, 1.0, Action::Walking)],
            });
        }
        let t = trace_of(frames);
        let a = line("A", 1.0);
        let b = line("B", 5.0);
        let r = transfer_times(&t, &Observer::Line(&a), &Observer::Line(&b), (0.0, 60.0), &PedFilter::default()).unwrap();
        assert_eq!(r.per_agent.len(), 2);
        assert!((r.mean - 45.0).abs() < 1e-9);
        assert!((r.total - 90.0).abs() < 1e-9);
        // Filter matching nobody: both excluded from results entirely.
        let f = PedFilter { type_name: Some("prm".into()), ..Default::default() };
        let r2 = transfer_times(&t, &Observer::Line(&a), &Observer::Line(&b), (0.0, 60.0), &f).unwrap();
        assert!(r2.per_agent.is_empty());
        assert_eq!(r2.excluded, 0);
    }

    #[test]
    fn filter_partition_is_exhaustive() {
        let mut frames = Vec::new();
        for k in 1..=600u64 {
            let time = k as f64 * 0.1;
            let x1 = if time < 5.0 { 0.5 } else if time < 45.0 { 2.0 } else { 6.0 };
            let x2 = if time < 5.0 { 0.5 } else if time < 55.0 { 2.0 } else { 6.0 };
            let mut r1 = row(1, x1, 0.0, Action::Walking);
            r1.type_idx = 0;
            let mut r2 = row(2, x2, 1.0, Action::Walking);
            r2.type_idx = 1;
            frames.push(Frame { tick: k, time, rows: vec![r1, r2] });
        }
        let mut t = trace_of(frames);
        t.type_names = vec!["commuter".into(), "prm".into()];
        let a = line("A", 1.0);
        let b = line("B", 5.0);
        let all = transfer_times(&t, &Observer::Line(&a), &Observer::Line(&b), (0.0, 60.0), &PedFilter::default()).unwrap();
        let f = PedFilter { type_name: Some("commuter".into()), ..Default::default() };
        let g = PedFilter { type_name: Some("prm".into()), ..Default::default() };
        let fa = transfer_times(&t, &Observer::Line(&a), &Observer::Line(&b), (0.0, 60.0), &f).unwrap();
        let fb = transfer_times(&t, &Observer::Line(&a), &Observer::Line(&b), (0.0, 60.0), &g).unwrap();
        let mut union: Vec<(u64, f64)> = fa.per_agent.iter().chain(fb.per_agent.iter()).cloned().collect();
        union.sort_by_key(|(id, _)| *id);
        assert_eq!(union, all.per_agent);
    }

    #[test]
    fn action_times_aggregates() {
        let a = area(0.0, 0.0, 4.0, 4.0);
        // Agent 1 queues for 20 s, agent 2 for 40 s (dt = 0.1).
        let mut frames = Vec::new();
        for k in 1..=600u64 {
            let time = k as f64 * 0.1;
            let mut rows = Vec::new();
            rows.push(row(1, 1.0, 1.0, if time <= 20.0 { Action::Queuing } else { Action::Walking }));
            rows.push(row(2, 2.0, 2.0, if time <= 40.0 { Action::Queuing } else { Action::Walking }));
            frames.push(Frame { tick: k, time, rows });
        }
        let t = trace_of(frames);
        let r = action_times(&t, &a, Action::Queuing, (0.0, 60.0), &PedFilter::default()).unwrap();
        assert_eq!(r.per_agent.len(), 2);
        assert!((r.mean - 30.0).abs() < 0.2);
        assert!((r.max - 40.0).abs() < 0.2);
        let none = action_times(&t, &a, Action::Delayed, (0.0, 60.0), &PedFilter::default()).unwrap();
        assert!(none.per_agent.is_empty());
        assert_eq!(none.total, 0.0);
    }

    #[test]
    fn distances_straight_walk() {
        let a = area(-1.0, -1.0, 60.0, 2.0);
        let mut frames = Vec::new();
        for k in 1..=400u64 {
            let time = k as f64 * 0.1;
            frames.push(Frame { tick: k, time, rows: vec![row(1, 1.25 * time, 0.0, Action::Walking)] });
        }
        let t = trace_of(frames);
        let r = distances(&t, &a, (0.0, 40.0), &PedFilter::default()).unwrap();
        let expect = 1.25 * 39.9; // first step not counted (needs a pair)
        assert!((r.per_agent[0].1 - expect).abs() / expect < 0.01);
        // Stationary agent accumulates nothing but is present.
        let mut frames2 = Vec::new();
        for k in 1..=10u64 {
            frames2.push(Frame { tick: k, time: k as f64 * 0.1, rows: vec![row(1, 1.0, 0.0, Action::Walking)] });
        }
        let t2 = trace_of(frames2);
        let r2 = distances(&t2, &a, (0.0, 10.0), &PedFilter::default()).unwrap();
        assert_eq!(r2.per_agent[0].1, 0.0);
    }

    #[test]
    fn service_factor_weighted_mean() {
        let weights = DEFAULT_SF_WEIGHTS;
        let a = area(0.0, 0.0, 10.0, 10.0); // 100 m², F needs > 215 agents
        let mut frames = Vec::new();
        for k in 1..=2u64 {
            let rows = (0..230)
                .map(|i| row(i, 0.1 + 0.04 * (i % 200) as f64, 0.1 + 0.04 * (i / 200) as f64, Action::Walking))
                .collect();
            frames.push(Frame { tick: k, time: k as f64 * 0.1, rows });
        }
        let t = trace_of(frames);
        let sf = service_factor(&t, &a, (0.0, 1.0), &LOSScale::default(), &weights).unwrap();
        assert_eq!(sf, 6.0); // all exposure at F
        // All exposure at A.
        let mut frames_a = Vec::new();
        for k in 1..=2u64 {
            frames_a.push(Frame { tick: k, time: k as f64 * 0.1, rows: vec![row(1, 5.0, 5.0, Action::Walking)] });
        }
        let ta = trace_of(frames_a);
        let sfa = service_factor(&ta, &a, (0.0, 1.0), &LOSScale::default(), &weights).unwrap();
        assert_eq!(sfa, 1.0);
        // Bounds.
        assert!(sfa >= weights[0] && sf <= weights[5]);
        // Empty area -> absent.
        let empty = trace_of(vec![]);
        assert!(service_factor(&empty, &a, (0.0, 1.0), &LOSScale::default(), &weights).is_none());
    }

    #[test]
    fn social_cost_arithmetic() {
        // 100 person-minutes walking (w=1) + 50 person-minutes queuing (w=2)
        // at 10/h -> 33.33.
        let mut frames = Vec::new();
        // One walking agent for 6000 s and one queuing agent for 3000 s,
        // 1 s frames.
        for k in 1..=6000u64 {
            let mut rows = vec![row(1, 0.0, 0.0, Action::Walking)];
            if k <= 3000 {
                rows.push(row(2, 1.0, 1.0, Action::Queuing));
            }
            frames.push(Frame { tick: k, time: k as f64, rows });
        }
        let mut t = trace_of(frames);
        t.dt = 1.0;
        let model = SocialCostModel::default();
        let cost = social_cost(&t, &model, (0.0, 6000.0));
        let expected = (6000.0 * 1.0 + 3000.0 * 2.0) / 3600.0 * 10.0;
        assert!((cost - expected).abs() / expected < 0.001, "cost {cost} vs {expected}");
        // Zero agents -> 0; doubling VoT doubles cost.
        assert_eq!(social_cost(&trace_of(vec![]), &model, (0.0, 10.0)), 0.0);
        let mut m2 = model.clone();
        m2.value_of_time *= 2.0;
        assert!((social_cost(&t, &m2, (0.0, 6000.0)) - 2.0 * cost).abs() < 1e-9);
    }

    #[test]
    fn analysis_table_roundtrip() {
        let mut table = AnalysisTable::new(&["agent_id", "seconds", "note"]);
        table.push(vec![Cell::Int(1), Cell::Float(45.0), Cell::Text("ok".into())]);
        table.push(vec![Cell::Int(2), Cell::Float(0.125), Cell::Text("with, comma".into())]);
        let text = export_analysis_csv(&table);
        let back = parse_analysis_csv(&text).unwrap();
        assert_eq!(back, table);
        // Empty table -> header only.
        let empty = AnalysisTable::new(&["a", "b"]);
        let text = export_analysis_csv(&empty);
        assert_eq!(text.lines().count(), 1);
        assert_eq!(parse_analysis_csv(&text).unwrap(), empty);
    }
}
