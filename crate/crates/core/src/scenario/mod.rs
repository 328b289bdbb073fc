//! Routing and modelling objects: sources, sinks, markers, waiting / delay /
//! queue areas, modifier zones, stairs, escalators, route specifications and
//! pedestrian filters.

pub mod validate;

pub use validate::{validate_scenario, ValidationReport};

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{Action, Agent, PedestrianType};
use crate::analysis::{MeasureArea, MeasureLine};
use crate::demand::SpreadPolicy;
use crate::geometry::{Point2, Polyline};

#[derive(Debug, Error)]
pub enum RoutingError {
    #[error("stage has no candidates")]
    EmptyStage,
    #[error("no candidate reachable from ({0}, {1})")]
    NoCandidateReachable(f64, f64),
}

/// Fixed or sampled duration, seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DurationSample {
    Fixed(f64),
    /// Truncated normal; samples are clamped into [min, max].
    Normal { mean: f64, sd: f64, min: f64, max: f64 },
}

impl DurationSample {
    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        match self {
            DurationSample::Fixed(s) => *s,
            DurationSample::Normal { mean, sd, min, max } => {
                if *sd <= 0.0 {
                    return mean.clamp(*min, *max);
                }
                let normal = rand_distr::Normal::new(*mean, *sd).expect("validated sd");
                for _ in 0..1000 {
                    let x = rand_distr::Distribution::sample(&normal, rng);
                    if x >= *min && x <= *max {
                        return x;
                    }
                }
                mean.clamp(*min, *max)
            }
        }
    }

    pub fn min_value(&self) -> f64 {
        match self {
            DurationSample::Fixed(s) => *s,
            DurationSample::Normal { min, .. } => *min,
        }
    }
}

/// Spawns pedestrians inside its polygon per the OD matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceArea {
    pub id: String,
    pub polygon: Polyline,
    /// How bin counts become injection times.
    #[serde(default = "default_arrival")]
    pub arrival: SpreadPolicy,
    /// Supply-type key; defaults to the source's own id.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supply: Option<String>,
}

fn default_arrival() -> SpreadPolicy {
    SpreadPolicy::Uniform
}

/// Absorbs agents that reach it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinkArea {
    pub id: String,
    pub polygon: Polyline,
    #[serde(default)]
    pub is_emergency_exit: bool,
}

/// Intermediate route target, polygon or line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetMarker {
    pub id: String,
    pub shape: Polyline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillRule {
    UniformRandom,
    NearestEntryFirst,
}

/// When held agents are let go again.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Release {
    AtTime(f64),
    OnEvent(String),
}

/// Holds agents distributed over its interior until released.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaitingArea {
    pub id: String,
    pub polygon: Polyline,
    pub fill_rule: FillRule,
    pub release: Release,
}

/// Holds each agent for a fixed or sampled time (ticket gates, machines).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayArea {
    pub id: String,
    pub polygon: Polyline,
    pub delay: DurationSample,
}

/// FIFO queue along a path; vertex 0 is the service head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueArea {
    pub id: String,
    pub path: Polyline,
    pub service_points: usize,
    pub service_time: DurationSample,
}

/// What a modifier zone does to matching agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZoneEffect {
    /// Continuous while inside: multiplies the preferred speed.
    SpeedFactor(f64),
    /// Continuous while inside: steers the desired direction.
    DirectionBias { direction: [f64; 2], weight: f64 },
    /// Applied once per entry.
    SetType(String),
    /// Applied once per entry: overrides the current stage target.
    SetTarget(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonitorMetric {
    Occupancy,
    Density,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionOp {
    Gt,
    Ge,
    Lt,
    Le,
}

/// Monitor predicate, e.g. occupancy of an area strictly above a count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub monitor: String,
    pub metric: MonitorMetric,
    pub op: ConditionOp,
    pub threshold: f64,
}

impl Condition {
    pub fn holds(&self, monitors: &MonitorSnapshot) -> bool {
        let Some(reading) = monitors.readings.get(&self.monitor) else {
            return false;
        };
        let value = match self.metric {
            MonitorMetric::Occupancy => reading.count as f64,
            MonitorMetric::Density => reading.density,
        };
        match self.op {
            ConditionOp::Gt => value > self.threshold,
            ConditionOp::Ge => value >= self.threshold,
            ConditionOp::Lt => value < self.threshold,
            ConditionOp::Le => value <= self.threshold,
        }
    }
}

/// Zone that biases or redirects matching agents crossing it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModifierZone {
    pub id: String,
    pub polygon: Polyline,
    pub effect: ZoneEffect,
    #[serde(default)]
    pub filter: PedFilter,
    /// Active intervals (start, end); empty means always active.
    #[serde(default)]
    pub schedule: Vec<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<Condition>,
}

impl ModifierZone {
    pub fn active(&self, clock: f64, monitors: &MonitorSnapshot) -> bool {
        let scheduled = self.schedule.is_empty()
            || self.schedule.iter().any(|(a, b)| clock >= *a && clock < *b);
        let conditioned = self.condition.as_ref().map_or(true, |c| c.holds(monitors));
        scheduled && conditioned
    }
}

/// Stair region: slows movement, direction-dependent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StairZone {
    pub id: String,
    pub polygon: Polyline,
    pub speed_factor_up: f64,
    pub speed_factor_down: f64,
    pub width: f64,
    /// Uphill direction in the plane; movement with a positive component
    /// along it uses the up factor.
    pub up: [f64; 2],
}

/// Escalator between two lines with a persons-per-minute boarding cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscalatorLink {
    pub id: String,
    pub entry: Polyline,
    pub exit: Polyline,
    pub capacity_ppm: u32,
    pub transit_time: f64,
}

/// Candidate choice policy for one route stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChoiceRule {
    /// Node id -> percentage; must sum to 100.
    Percentage(BTreeMap<String, f64>),
    LeastOccupancy,
    ShortestDistance,
    QuickestTime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub candidates: Vec<String>,
    pub choice: ChoiceRule,
}

/// Ordered stages; the final stage holds only sinks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteSpec {
    pub id: String,
    pub stages: Vec<Stage>,
}

/// Conjunctive predicates over agents; empty matches all.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PedFilter {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub type_name: Option<String>,
    /// Matches the agent's route id (its OD destination).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub destination: Option<String>,
    /// Every listed node must have been visited.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub visited: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<Action>,
}

impl PedFilter {
    pub fn matches(&self, agent: &Agent, types: &[PedestrianType]) -> bool {
        if let Some(t) = &self.type_name {
            if types.get(agent.type_idx).map(|pt| pt.name.as_str()) != Some(t.as_str()) {
                return false;
            }
        }
        if let Some(d) = &self.destination {
            if &agent.route_id != d {
                return false;
            }
        }
        if !self.visited.iter().all(|v| agent.visited.contains(v)) {
            return false;
        }
        if let Some(a) = self.action {
            if agent.action != a {
                return false;
            }
        }
        true
    }

    pub fn is_empty(&self) -> bool {
        self.type_name.is_none()
            && self.destination.is_none()
            && self.visited.is_empty()
            && self.action.is_none()
    }
}

/// Latest per-area readings published by the engine.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MonitorSnapshot {
    pub readings: BTreeMap<String, MonitorReading>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorReading {
    pub count: usize,
    pub density: f64,
}

/// All modelling and routing objects of a scenario.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScenarioObjects {
    #[serde(default)]
    pub sources: Vec<SourceArea>,
    #[serde(default)]
    pub sinks: Vec<SinkArea>,
    #[serde(default)]
    pub markers: Vec<TargetMarker>,
    #[serde(default)]
    pub waiting_areas: Vec<WaitingArea>,
    #[serde(default)]
    pub delay_areas: Vec<DelayArea>,
    #[serde(default)]
    pub queues: Vec<QueueArea>,
    #[serde(default)]
    pub zones: Vec<ModifierZone>,
    #[serde(default)]
    pub stairs: Vec<StairZone>,
    #[serde(default)]
    pub escalators: Vec<EscalatorLink>,
    #[serde(default)]
    pub measure_lines: Vec<MeasureLine>,
    #[serde(default)]
    pub measure_areas: Vec<MeasureArea>,
}

/// A route node an agent can be sent to.
#[derive(Debug, Clone, Copy)]
pub enum NodeRef<'a> {
    Sink(&'a SinkArea),
    Marker(&'a TargetMarker),
    Waiting(&'a WaitingArea),
    Delay(&'a DelayArea),
    Queue(&'a QueueArea),
    Escalator(&'a EscalatorLink),
}

impl<'a> NodeRef<'a> {
    /// Geometry an agent must reach to arrive at this node. For queues this
    /// is the tail of the path; for escalators the entry line.
    pub fn arrival_shape(&self) -> &'a Polyline {
        match self {
            NodeRef::Sink(s) => &s.polygon,
            NodeRef::Marker(m) => &m.shape,
            NodeRef::Waiting(w) => &w.polygon,
            NodeRef::Delay(d) => &d.polygon,
            NodeRef::Queue(q) => &q.path,
            NodeRef::Escalator(e) => &e.entry,
        }
    }

    pub fn arrived(&self, p: Point2, tolerance: f64) -> bool {
        let shape = match self {
            // Queue arrival means reaching the tail vertex.
            NodeRef::Queue(q) => {
                let tail = *q.path.vertices.last().unwrap();
                return p.distance(&tail) <= tolerance;
            }
            other => other.arrival_shape(),
        };
        if shape.closed {
            shape.contains(p)
        } else {
            shape
                .segments()
                .iter()
                .any(|(a, b)| crate::geometry::point_segment_distance(p, *a, *b) <= tolerance)
        }
    }
}

impl ScenarioObjects {
    pub fn node<'a>(&'a self, id: &str) -> Option<NodeRef<'a>> {
        if let Some(s) = self.sinks.iter().find(|s| s.id == id) {
            return Some(NodeRef::Sink(s));
        }
        if let Some(m) = self.markers.iter().find(|m| m.id == id) {
            return Some(NodeRef::Marker(m));
        }
        if let Some(w) = self.waiting_areas.iter().find(|w| w.id == id) {
            return Some(NodeRef::Waiting(w));
        }
        if let Some(d) = self.delay_areas.iter().find(|d| d.id == id) {
            return Some(NodeRef::Delay(d));
        }
        if let Some(q) = self.queues.iter().find(|q| q.id == id) {
            return Some(NodeRef::Queue(q));
        }
        if let Some(e) = self.escalators.iter().find(|e| e.id == id) {
            return Some(NodeRef::Escalator(e));
        }
        None
    }

    /// Areas the engine publishes occupancy/density monitors for.
    pub fn monitored_areas(&self) -> Vec<(String, &Polyline)> {
        let mut v: Vec<(String, &Polyline)> = Vec::new();
        for a in &self.measure_areas {
            v.push((a.id.clone(), &a.polygon));
        }
        for w in &self.waiting_areas {
            v.push((w.id.clone(), &w.polygon));
        }
        for d in &self.delay_areas {
            v.push((d.id.clone(), &d.polygon));
        }
        for m in &self.markers {
            if m.shape.closed {
                v.push((m.id.clone(), &m.shape));
            }
        }
        for s in &self.sinks {
            v.push((s.id.clone(), &s.polygon));
        }
        for z in &self.zones {
            v.push((z.id.clone(), &z.polygon));
        }
        v
    }

    pub fn all_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = Vec::new();
        ids.extend(self.sources.iter().map(|o| o.id.as_str()));
        ids.extend(self.sinks.iter().map(|o| o.id.as_str()));
        ids.extend(self.markers.iter().map(|o| o.id.as_str()));
        ids.extend(self.waiting_areas.iter().map(|o| o.id.as_str()));
        ids.extend(self.delay_areas.iter().map(|o| o.id.as_str()));
        ids.extend(self.queues.iter().map(|o| o.id.as_str()));
        ids.extend(self.zones.iter().map(|o| o.id.as_str()));
        ids.extend(self.stairs.iter().map(|o| o.id.as_str()));
        ids.extend(self.escalators.iter().map(|o| o.id.as_str()));
        ids.extend(self.measure_lines.iter().map(|o| o.id.as_str()));
        ids.extend(self.measure_areas.iter().map(|o| o.id.as_str()));
        ids
    }
}

/// Node-choice inputs supplied by the engine.
pub struct ChoiceContext<'a> {
    pub occupancy: &'a dyn Fn(&str) -> f64,
    /// Shortest-path distance from a position to a node, None if unreachable.
    pub nav_distance: &'a dyn Fn(&str, Point2) -> Option<f64>,
    /// Density-penalized travel time estimate, None if unreachable.
    pub travel_time: &'a dyn Fn(&str, Point2) -> Option<f64>,
}

/// Picks the next node of a stage. Ties break toward the lowest node id.
pub fn choose_next(
    stage: &Stage,
    position: Point2,
    ctx: &ChoiceContext,
    rng: &mut impl Rng,
) -> Result<String, RoutingError> {
    if stage.candidates.is_empty() {
        return Err(RoutingError::EmptyStage);
    }
    match &stage.choice {
        ChoiceRule::Percentage(map) => {
            let total: f64 = map.values().sum();
            let draw: f64 = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            // BTreeMap iteration is id-ordered, so the draw is deterministic.
            for (id, pct) in map {
                acc += *pct;
                if draw < acc {
                    return Ok(id.clone());
                }
            }
            Ok(map.keys().next_back().expect("nonempty").clone())
        }
        ChoiceRule::LeastOccupancy => {
            let mut sorted = stage.candidates.clone();
            sorted.sort();
            Ok(sorted
                .into_iter()
                .map(|id| ((ctx.occupancy)(&id), id))
                .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
                .map(|(_, id)| id)
                .expect("nonempty"))
        }
        ChoiceRule::ShortestDistance => {
            pick_min_metric(&stage.candidates, position, ctx.nav_distance)
        }
        ChoiceRule::QuickestTime => pick_min_metric(&stage.candidates, position, ctx.travel_time),
    }
}

fn pick_min_metric(
    candidates: &[String],
    position: Point2,
    metric: &dyn Fn(&str, Point2) -> Option<f64>,
) -> Result<String, RoutingError> {
    let mut sorted = candidates.to_vec();
    sorted.sort();
    sorted
        .into_iter()
        .filter_map(|id| metric(&id, position).map(|m| (m, id)))
        .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
        .map(|(_, id)| id)
        .ok_or(RoutingError::NoCandidateReachable(position.x, position.y))
}

/// One-shot zone effects (target or type changes) due this tick: agents
/// inside an active matching zone that has not fired for them since entry.
/// The caller applies the effects and records them in `zones_applied`.
pub fn evaluate_triggers<'a>(
    zones: &'a [ModifierZone],
    agents: &[Agent],
    types: &[PedestrianType],
    monitors: &MonitorSnapshot,
    clock: f64,
) -> Vec<(u64, &'a ModifierZone)> {
    let mut out = Vec::new();
    for zone in zones {
        if !matches!(zone.effect, ZoneEffect::SetType(_) | ZoneEffect::SetTarget(_)) {
            continue;
        }
        if !zone.active(clock, monitors) {
            continue;
        }
        for agent in agents {
            if agent.zones_applied.contains(&zone.id) {
                continue;
            }
            if !zone.polygon.contains(agent.position) {
                continue;
            }
            if !zone.filter.matches(agent, types) {
                continue;
            }
            out.push((agent.id, zone));
        }
    }
    out
}

/// Per-service-point FIFO bookkeeping for one queue.
#[derive(Debug, Clone)]
pub struct QueueState {
    /// Time each service point becomes free.
    pub servers_free: Vec<f64>,
    /// Agent ids currently admitted, head first.
    pub members: Vec<u64>,
    pub admitted: u64,
    pub served: u64,
}

impl QueueState {
    pub fn new(service_points: usize) -> Self {
        QueueState {
            servers_free: vec![0.0; service_points.max(1)],
            members: Vec::new(),
            admitted: 0,
            served: 0,
        }
    }

    /// Admits an agent at `arrival` and returns its service completion
    /// time: max(arrival, earliest free server) + service.
    pub fn admit(&mut self, agent: u64, arrival: f64, service: f64) -> f64 {
        let (idx, free) = self
            .servers_free
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .expect("at least one server");
        let start = arrival.max(free);
        let done = start + service.max(0.0);
        self.servers_free[idx] = done;
        self.members.push(agent);
        self.admitted += 1;
        done
    }

    pub fn leave(&mut self, agent: u64) {
        if let Some(pos) = self.members.iter().position(|m| *m == agent) {
            self.members.remove(pos);
            self.served += 1;
        }
    }

    /// 0 = head of queue.
    pub fn slot_of(&self, agent: u64) -> Option<usize> {
        self.members.iter().position(|m| *m == agent)
    }
}

/// Point along the queue path at `distance` meters from the head.
pub fn queue_slot_point(path: &Polyline, distance: f64) -> Point2 {
    let mut remaining = distance;
    for (a, b) in path.segments() {
        let len = a.distance(&b);
        if remaining <= len {
            let t = if len > 0.0 { remaining / len } else { 0.0 };
            return Point2::xy(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y));
        }
        remaining -= len;
    }
    *path.vertices.last().unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn stage(candidates: &[&str], choice: ChoiceRule) -> Stage {
        Stage { candidates: candidates.iter().map(|s| s.to_string()).collect(), choice }
    }

    fn ctx_fixed<'a>(
        occ: &'a dyn Fn(&str) -> f64,
        dist: &'a dyn Fn(&str, Point2) -> Option<f64>,
    ) -> ChoiceContext<'a> {
        ChoiceContext { occupancy: occ, nav_distance: dist, travel_time: dist }
    }

    #[test]
    fn percentage_split_converges() {
        let mut map = BTreeMap::new();
        map.insert("A".to_string(), 50.0);
        map.insert("B".to_string(), 50.0);
        let st = stage(&["A", "B"], ChoiceRule::Percentage(map));
        let occ = |_: &str| 0.0;
        let dist = |_: &str, _: Point2| Some(0.0);
        let ctx = ctx_fixed(&occ, &dist);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 10_000;
        let mut a = 0usize;
        for _ in 0..n {
            if choose_next(&st, Point2::xy(0.0, 0.0), &ctx, &mut rng).unwrap() == "A" {
                a += 1;
            }
        }
        // 3 sigma of Binomial(10000, 0.5) is 150.
        assert!((a as i64 - 5000).unsigned_abs() < 150, "split was {a}/{n}");
    }

    #[test]
    fn least_occupancy_argmin_with_tie_break() {
        let st = stage(&["B", "A"], ChoiceRule::LeastOccupancy);
        let occ = |id: &str| match id {
            "A" => 3.0,
            _ => 1.0,
        };
        let dist = |_: &str, _: Point2| Some(0.0);
        let ctx = ctx_fixed(&occ, &dist);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(choose_next(&st, Point2::xy(0.0, 0.0), &ctx, &mut rng).unwrap(), "B");
        // Tie: lowest id wins.
        let occ_tie = |_: &str| 2.0;
        let ctx = ctx_fixed(&occ_tie, &dist);
        assert_eq!(choose_next(&st, Point2::xy(0.0, 0.0), &ctx, &mut rng).unwrap(), "A");
    }

    #[test]
    fn shortest_distance_argmin() {
        let st = stage(&["A", "B"], ChoiceRule::ShortestDistance);
        let occ = |_: &str| 0.0;
        let dist = |id: &str, _: Point2| Some(if id == "A" { 10.0 } else { 12.0 });
        let ctx = ctx_fixed(&occ, &dist);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(choose_next(&st, Point2::xy(0.0, 0.0), &ctx, &mut rng).unwrap(), "A");
    }

    #[test]
    fn unreachable_candidates_error() {
        let st = stage(&["A"], ChoiceRule::ShortestDistance);
        let occ = |_: &str| 0.0;
        let dist = |_: &str, _: Point2| None;
        let ctx = ctx_fixed(&occ, &dist);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            choose_next(&st, Point2::xy(1.0, 2.0), &ctx, &mut rng),
            Err(RoutingError::NoCandidateReachable(..))
        ));
    }

    #[test]
    fn queue_single_server_fifo() {
        let mut q = QueueState::new(1);
        assert_eq!(q.admit(1, 0.0, 5.0), 5.0);
        assert_eq!(q.admit(2, 1.0, 5.0), 10.0);
        assert_eq!(q.slot_of(1), Some(0));
        q.leave(1);
        assert_eq!(q.slot_of(2), Some(0));
        assert_eq!(q.admitted, 2);
        assert_eq!(q.served, 1);
    }

    #[test]
    fn queue_two_servers_parallel() {
        let mut q = QueueState::new(2);
        assert_eq!(q.admit(1, 0.0, 5.0), 5.0);
        assert_eq!(q.admit(2, 1.0, 5.0), 6.0);
    }

    #[test]
    fn queue_no_arrivals_no_service() {
        let q = QueueState::new(3);
        assert_eq!(q.admitted, 0);
        assert_eq!(q.served, 0);
        assert!(q.members.is_empty());
    }

    #[test]
    fn queue_conservation() {
        let mut q = QueueState::new(2);
        for i in 0..10u64 {
            q.admit(i, i as f64 * 0.5, 3.0);
        }
        for i in 0..4u64 {
            q.leave(i);
        }
        assert_eq!(q.admitted, q.served + q.members.len() as u64);
    }

    #[test]
    fn condition_strictness() {
        let mut monitors = MonitorSnapshot::default();
        monitors
            .readings
            .insert("X".to_string(), MonitorReading { count: 50, density: 1.0 });
        let cond = Condition {
            monitor: "X".into(),
            metric: MonitorMetric::Occupancy,
            op: ConditionOp::Gt,
            threshold: 50.0,
        };
        assert!(!cond.holds(&monitors));
        monitors
            .readings
            .insert("X".to_string(), MonitorReading { count: 51, density: 1.0 });
        assert!(cond.holds(&monitors));
    }

    #[test]
    fn filters_compose_conjunctively() {
        let types = crate::agents::default_type_library();
        let mut agent = Agent::new(1, 0, Point2::xy(0.0, 0.0), 1.3, 0.23, "r1".into(), 0.0, 0.5);
        agent.visited.insert("m1".to_string());

        let f_type = PedFilter { type_name: Some("commuter".into()), ..Default::default() };
        let f_dest = PedFilter { destination: Some("r1".into()), ..Default::default() };
        let both = PedFilter {
            type_name: Some("commuter".into()),
            destination: Some("r1".into()),
            ..Default::default()
        };
        assert_eq!(
            both.matches(&agent, &types),
            f_type.matches(&agent, &types) && f_dest.matches(&agent, &types)
        );
        let wrong = PedFilter {
            type_name: Some("prm".into()),
            destination: Some("r1".into()),
            ..Default::default()
        };
        assert!(!wrong.matches(&agent, &types));
        assert!(PedFilter::default().matches(&agent, &types));
        let visited = PedFilter { visited: vec!["m1".into()], ..Default::default() };
        assert!(visited.matches(&agent, &types));
        let not_visited = PedFilter { visited: vec!["m1".into(), "m2".into()], ..Default::default() };
        assert!(!not_visited.matches(&agent, &types));
    }

    #[test]
    fn queue_slot_point_walks_the_path() {
        let path = Polyline::open(vec![Point2::xy(0.0, 0.0), Point2::xy(10.0, 0.0)]).unwrap();
        let p = queue_slot_point(&path, 2.5);
        assert!((p.x - 2.5).abs() < 1e-12);
        let clamped = queue_slot_point(&path, 50.0);
        assert_eq!(clamped, Point2::xy(10.0, 0.0));
    }
}
