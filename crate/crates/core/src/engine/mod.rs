//! Deterministic fixed-timestep simulation loop: spawning, navigation
//! fields, spatial hashing, zone triggers, queue/delay/waiting mechanics,
//! evacuation mode, periodic analyses and trace emission.
//!
//! Tick phases, in fixed order: (1) spawn due arrivals, (2) triggers and
//! zones, (3) queue/delay/waiting bookkeeping, (4) parallel velocity
//! computation from the previous snapshot, (5) sequential commit by agent
//! id, (6) node arrivals and sink absorption, (7) monitors, analyses and
//! trace, (8) clock advance.

pub mod nav;
pub mod spatial;
pub mod trace;

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{
    avoid_collisions, desired_velocity, sample_attributes, Action, Agent, AvoidanceParams,
    Neighbor, PedestrianType, Ride, Vec2,
};
use crate::analysis::{run_analysis, AnalysisDef, AnalysisTable};
use crate::bundle::ScenarioBundle;
use crate::demand::{spread_profile, SupplyType};
use crate::geometry::{Environment, Point2, Polyline, Rect};
use crate::scenario::{
    choose_next, queue_slot_point, ChoiceContext, FillRule, MonitorReading, MonitorSnapshot,
    NodeRef, QueueState, Release, RouteSpec, ScenarioObjects, Stage, ZoneEffect,
};
use crate::util::derive_seed;
use nav::{build_nav_field, CostModel, NavError, NavField, DEFAULT_NAV_CELL};
use spatial::SpatialHash;
use trace::{Event, Frame, Trace, TraceRow};

/// How far from a line target an agent may stop and count as arrived.
const ARRIVAL_TOLERANCE: f64 = 0.35;
/// Extra clearance demanded when placing new agents.
const SPAWN_CLEARANCE: f64 = 0.05;
const SPAWN_ATTEMPTS: usize = 30;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Nav(#[from] NavError),
    #[error("scenario: {0}")]
    Scenario(String),
}

/// Evacuation settings: when the alarm fires, how long agents take to
/// react, and the fallback familiarity for types that do not set one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvacuationConfig {
    pub trigger_time: f64,
    pub reaction: crate::scenario::DurationSample,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub familiarity_default: Option<f64>,
}

/// Default reaction window when "variable" is requested without parameters:
/// uniform-ish truncated normal over [15, 60] s.
pub fn default_variable_reaction() -> crate::scenario::DurationSample {
    crate::scenario::DurationSample::Normal { mean: 37.5, sd: 13.0, min: 15.0, max: 60.0 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub duration: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evacuation: Option<EvacuationConfig>,
    /// Navigation grid cell size, meters.
    #[serde(default = "default_nav_cell")]
    pub nav_cell: f64,
    #[serde(default)]
    pub avoidance: AvoidanceParams,
    /// Emit a trace frame every N ticks; 0 disables frames.
    #[serde(default = "default_trace_every")]
    pub trace_every: u64,
    /// Quickest-time field rebuild interval, seconds.
    #[serde(default = "default_quickest_rebuild")]
    pub quickest_rebuild: f64,
}

fn default_nav_cell() -> f64 {
    DEFAULT_NAV_CELL
}

fn default_trace_every() -> u64 {
    1
}

fn default_quickest_rebuild() -> f64 {
    5.0
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 0.1,
            duration: 60.0,
            seed: 1,
            evacuation: None,
            nav_cell: DEFAULT_NAV_CELL,
            avoidance: AvoidanceParams::default(),
            trace_every: 1,
            quickest_rebuild: 5.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if !(self.dt > 0.0 && self.dt <= 0.5) {
            return Err(EngineError::Config(format!("dt must be in (0, 0.5], got {}", self.dt)));
        }
        if !(self.duration > 0.0) {
            return Err(EngineError::Config(format!("duration must be > 0, got {}", self.duration)));
        }
        if !(self.nav_cell > 0.0) {
            return Err(EngineError::Config("nav_cell must be > 0".into()));
        }
        Ok(())
    }
}

/// Result of one run.
#[derive(Debug)]
pub struct RunOutput {
    pub trace: Trace,
    pub summary: RunSummary,
    pub auto_emissions: Vec<AutoEmission>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub ticks: u64,
    pub spawned: u64,
    pub exited: u64,
    pub alive_at_end: u64,
    pub wall_seconds: f64,
    pub sim_seconds_per_wall_second: f64,
    /// Last exit time minus alarm time, when evacuation emptied the model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub egress_time: Option<f64>,
}

/// One scheduled analysis emission (phase 7).
#[derive(Debug, Clone)]
pub struct AutoEmission {
    pub analysis_id: String,
    pub time: f64,
    pub table: AnalysisTable,
}

/// A pedestrian injection waiting to be placed.
#[derive(Debug, Clone)]
struct Pending {
    time: f64,
    source_idx: usize,
    destination: String,
}

pub struct Simulation {
    env: Environment,
    objects: ScenarioObjects,
    types: Vec<PedestrianType>,
    routes: Vec<RouteSpec>,
    supply: HashMap<String, SupplyType>,
    analyses: Vec<AnalysisDef>,
    config: SimConfig,
    bounds: Rect,
    max_radius: f64,

    tick: u64,
    ticks_total: u64,
    agents: Vec<Agent>,
    next_agent_id: u64,
    pending: VecDeque<Pending>,
    retry: Vec<Pending>,
    rng: ChaCha8Rng,
    hash: SpatialHash,
    fields: HashMap<String, NavField>,
    time_fields: HashMap<String, NavField>,
    time_fields_age: f64,
    quickest_targets: Vec<String>,
    queues: HashMap<String, QueueState>,
    escalator_waiting: HashMap<String, VecDeque<u64>>,
    escalator_boards: HashMap<String, VecDeque<f64>>,
    waiting_slots: HashMap<String, Vec<(u64, Point2)>>,
    monitors: MonitorSnapshot,
    fired_events: BTreeSet<String>,
    alarm_time: Option<f64>,
    spawned: u64,
    pub trace: Trace,
    auto_emissions: Vec<AutoEmission>,
}

impl Simulation {
    pub fn new(bundle: &ScenarioBundle, config: &SimConfig) -> Result<Self, EngineError> {
        config.validate()?;
        let env = bundle.geometry.clone();
        let objects = bundle.objects.clone();
        let types = bundle.pedestrian_types.clone();
        if types.is_empty() {
            return Err(EngineError::Scenario("no pedestrian types defined".into()));
        }
        let routes = bundle.routes.clone();

        let mut bounds = env.bbox();
        for (_, poly) in objects.monitored_areas() {
            bounds = bounds.union(poly.bbox());
        }
        for s in &objects.sources {
            bounds = bounds.union(s.polygon.bbox());
        }
        for q in &objects.queues {
            bounds = bounds.union(q.path.bbox());
        }
        for e in &objects.escalators {
            bounds = bounds.union(e.entry.bbox()).union(e.exit.bbox());
        }
        bounds = bounds.inflate(2.0);

        let max_radius = types.iter().map(|t| t.radius).fold(0.1, f64::max);
        let max_speed = types.iter().map(|t| t.speed.max).fold(1.0, f64::max);
        let hash_cell = 2.0 * max_radius + max_speed * config.dt;
        let hash = SpatialHash::new(bounds, hash_cell);

        // Demand -> pending arrivals, merged over sources in id order.
        let matrix = bundle.active_demand().map_err(|e| EngineError::Scenario(e.to_string()))?;
        let mut pending: Vec<Pending> = Vec::new();
        for (source_idx, source) in objects.sources.iter().enumerate() {
            if !matrix.bins.iter().any(|b| b.origin == source.id) {
                continue;
            }
            let policy = match source.arrival {
                crate::demand::SpreadPolicy::Uniform => crate::demand::SpreadPolicy::Uniform,
                crate::demand::SpreadPolicy::Poisson { .. } => crate::demand::SpreadPolicy::Poisson {
                    seed: derive_seed(config.seed, &source.id),
                },
            };
            let profile = spread_profile(matrix, &source.id, policy)
                .map_err(|e| EngineError::Scenario(e.to_string()))?;
            for inj in profile.entries {
                pending.push(Pending {
                    time: inj.time,
                    source_idx,
                    destination: inj.destination,
                });
            }
        }
        pending.sort_by(|a, b| {
            a.time
                .partial_cmp(&b.time)
                .unwrap()
                .then_with(|| a.source_idx.cmp(&b.source_idx))
        });

        let supply: HashMap<String, SupplyType> = bundle
            .demand_settings
            .supply_types
            .iter()
            .map(|s| (s.source.clone(), s.clone()))
            .collect();

        let mut sim = Simulation {
            env,
            objects,
            types,
            routes,
            supply,
            analyses: bundle.analyses.clone(),
            config: config.clone(),
            bounds,
            max_radius,
            tick: 0,
            ticks_total: (config.duration / config.dt).round() as u64,
            agents: Vec::new(),
            next_agent_id: 1,
            pending: pending.into(),
            retry: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            hash,
            fields: HashMap::new(),
            time_fields: HashMap::new(),
            time_fields_age: f64::NEG_INFINITY,
            quickest_targets: Vec::new(),
            queues: HashMap::new(),
            escalator_waiting: HashMap::new(),
            escalator_boards: HashMap::new(),
            waiting_slots: HashMap::new(),
            monitors: MonitorSnapshot::default(),
            fired_events: BTreeSet::new(),
            alarm_time: None,
            spawned: 0,
            trace: Trace::default(),
            auto_emissions: Vec::new(),
        };
        sim.trace.dt = config.dt;
        sim.trace.type_names = sim.types.iter().map(|t| t.name.clone()).collect();
        sim.build_fields()?;
        for q in &sim.objects.queues {
            sim.queues.insert(q.id.clone(), QueueState::new(q.service_points));
        }
        for e in &sim.objects.escalators {
            sim.escalator_waiting.insert(e.id.clone(), VecDeque::new());
            sim.escalator_boards.insert(e.id.clone(), VecDeque::new());
        }
        Ok(sim)
    }

    /// Distance fields for every route node and sink; quickest-time targets
    /// are collected for periodic rebuilds.
    fn build_fields(&mut self) -> Result<(), EngineError> {
        let mut targets: BTreeSet<String> = BTreeSet::new();
        let mut quickest: BTreeSet<String> = BTreeSet::new();
        for route in &self.routes {
            for stage in &route.stages {
                for c in &stage.candidates {
                    targets.insert(c.clone());
                    if matches!(stage.choice, crate::scenario::ChoiceRule::QuickestTime) {
                        quickest.insert(c.clone());
                    }
                }
            }
        }
        for sink in &self.objects.sinks {
            targets.insert(sink.id.clone());
        }
        for id in targets {
            let Some(node) = self.objects.node(&id) else {
                return Err(EngineError::Scenario(format!("route references unknown node '{id}'")));
            };
            let shape = field_target_shape(&node);
            let field = build_nav_field(
                &self.env,
                &id,
                &shape,
                self.bounds,
                self.config.nav_cell,
                self.max_radius,
                CostModel::Distance,
            )?;
            self.fields.insert(id, field);
        }
        self.quickest_targets = quickest.into_iter().collect();
        Ok(())
    }

    pub fn clock(&self) -> f64 {
        self.tick as f64 * self.config.dt
    }

    pub fn finished(&self) -> bool {
        self.tick >= self.ticks_total
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn spawned(&self) -> u64 {
        self.spawned
    }

    pub fn exited(&self) -> u64 {
        self.trace.exits.len() as u64
    }

    pub fn monitors(&self) -> &MonitorSnapshot {
        &self.monitors
    }

    fn event(&mut self, time: f64, kind: &str, subject: String, detail: String) {
        self.trace.events.push(Event { time, kind: kind.to_string(), subject, detail });
    }

    /// Advances the simulation by one tick.
    pub fn step(&mut self) {
        let dt = self.config.dt;
        let clock = (self.tick + 1) as f64 * dt;

        // Phase 0 bookkeeping: refresh the spatial hash (removals last tick
        // invalidated indices).
        let positions: Vec<(u32, Point2)> = self
            .agents
            .iter()
            .enumerate()
            .map(|(i, a)| (i as u32, a.position))
            .collect();
        self.hash.rebuild(positions.into_iter());

        self.phase1_spawn(clock);
        self.phase2_triggers(clock);
        self.phase3_holds(clock);
        let decisions = self.phase4_velocities(clock, dt);
        self.phase5_commit(clock, dt, decisions);
        self.phase6_arrivals(clock);
        self.phase7_outputs(clock);
        self.tick += 1;
    }

    // ---- phase 1: spawn -------------------------------------------------

    fn phase1_spawn(&mut self, clock: f64) {
        let due: Vec<Pending> = {
            let mut v = std::mem::take(&mut self.retry);
            while self
                .pending
                .front()
                .map_or(false, |p| p.time <= clock + 1e-9)
            {
                v.push(self.pending.pop_front().unwrap());
            }
            v
        };
        for p in due {
            if !self.try_spawn(&p, clock) {
                self.retry.push(p);
            }
        }
    }

    fn try_spawn(&mut self, p: &Pending, clock: f64) -> bool {
        let source = &self.objects.sources[p.source_idx];
        let source_id = source.id.clone();
        let polygon = source.polygon.clone();
        let supply_key = source.supply.clone().unwrap_or_else(|| source_id.clone());

        // Pedestrian type from the supply mix, defaulting to the first type.
        let type_idx = match self.supply.get(&supply_key) {
            Some(s) => {
                let total: f64 = s.mix.values().sum();
                let draw = self.rng.gen::<f64>() * total;
                let mut acc = 0.0;
                let mut picked = None;
                for (name, pct) in &s.mix {
                    acc += *pct;
                    if draw < acc {
                        picked = self.types.iter().position(|t| &t.name == name);
                        break;
                    }
                }
                picked.unwrap_or(0)
            }
            None => 0,
        };
        let ptype = self.types[type_idx].clone();
        let (speed, radius) = sample_attributes(&ptype, &mut self.rng);
        let familiarity_draw = self.rng.gen::<f64>();

        let Some(position) = self.sample_spawn_position(&polygon, radius) else {
            return false;
        };

        let Some(route_idx) = self.routes.iter().position(|r| r.id == p.destination) else {
            self.event(
                clock,
                "route_error",
                source_id,
                format!("no route '{}' for injected pedestrian", p.destination),
            );
            return true; // drop; retrying will never help
        };

        let id = self.next_agent_id;
        self.next_agent_id += 1;
        let mut agent = Agent::new(
            id,
            type_idx,
            position,
            speed,
            radius,
            p.destination.clone(),
            clock,
            familiarity_draw,
        );
        if self.alarm_time.is_some() {
            if let Some(evac) = self.config.evacuation.clone() {
                agent.react_at = clock + evac.reaction.sample(&mut self.rng);
            }
        }
        // First stage target.
        let stage = self.routes[route_idx].stages.first().cloned();
        match stage {
            Some(stage) => match self.choose(&stage, position) {
                Ok(node) => agent.chosen_node = Some(node),
                Err(_) => {
                    self.event(clock, "route_error", id.to_string(), "no reachable first stage".into());
                    agent.chosen_node = self.nearest_sink(position);
                }
            },
            None => {
                agent.chosen_node = self.nearest_sink(position);
            }
        }

        let idx = self.agents.len() as u32;
        self.hash.insert(idx, agent.position);
        self.agents.push(agent);
        self.spawned += 1;
        self.event(clock, "spawn", id.to_string(), format!("source={source_id}"));
        true
    }

    fn sample_spawn_position(&mut self, polygon: &Polyline, radius: f64) -> Option<Point2> {
        let bbox = polygon.bbox();
        let mut near = Vec::new();
        for _ in 0..SPAWN_ATTEMPTS {
            let x = bbox.min_x + self.rng.gen::<f64>() * bbox.width();
            let y = bbox.min_y + self.rng.gen::<f64>() * bbox.height();
            let pos = Point2::xy(x, y);
            if !polygon.contains(pos) || !self.env.walkable(pos, radius) {
                continue;
            }
            near.clear();
            self.hash
                .query_into(pos, radius + self.max_radius + SPAWN_CLEARANCE, &mut near);
            let blocked = near.iter().any(|&j| {
                let other = &self.agents[j as usize];
                pos.distance(&other.position) < radius + other.radius + SPAWN_CLEARANCE
            });
            if !blocked {
                return Some(pos);
            }
        }
        None
    }

    // ---- phase 2: triggers ----------------------------------------------

    fn phase2_triggers(&mut self, clock: f64) {
        // Evacuation alarm.
        if let Some(evac) = self.config.evacuation.clone() {
            if self.alarm_time.is_none() && clock + 1e-9 >= evac.trigger_time {
                self.alarm_time = Some(clock);
                self.fired_events.insert("alarm".to_string());
                self.event(clock, "alarm", "evacuation".into(), String::new());
                for i in 0..self.agents.len() {
                    let delay = evac.reaction.sample(&mut self.rng);
                    self.agents[i].react_at = clock + delay;
                }
            }
        }
        // Reactions: retarget to the nearest allowed emergency exit.
        if self.alarm_time.is_some() {
            for i in 0..self.agents.len() {
                if self.agents[i].reacted || clock + 1e-9 < self.agents[i].react_at {
                    continue;
                }
                self.react_agent(i, clock);
            }
        }

        // Zone membership upkeep: forget zones the agent has left.
        for agent in self.agents.iter_mut() {
            if agent.zones_applied.is_empty() {
                continue;
            }
            let pos = agent.position;
            let objects = &self.objects;
            agent.zones_applied.retain(|zid| {
                objects
                    .zones
                    .iter()
                    .find(|z| &z.id == zid)
                    .map_or(false, |z| z.polygon.contains(pos))
            });
        }

        // One-shot zone effects (monitors are last tick's snapshot).
        let applications = crate::scenario::evaluate_triggers(
            &self.objects.zones,
            &self.agents,
            &self.types,
            &self.monitors,
            clock,
        );
        let applications: Vec<(u64, String, ZoneEffect)> = applications
            .into_iter()
            .map(|(agent, zone)| (agent, zone.id.clone(), zone.effect.clone()))
            .collect();
        for (agent_id, zone_id, effect) in applications {
            let Some(idx) = self.agents.iter().position(|a| a.id == agent_id) else {
                continue;
            };
            self.agents[idx].zones_applied.insert(zone_id.clone());
            match effect {
                ZoneEffect::SetTarget(node) => {
                    self.agents[idx].chosen_node = Some(node.clone());
                    self.event(clock, "zone_effect", agent_id.to_string(), format!("{zone_id}: target={node}"));
                }
                ZoneEffect::SetType(name) => {
                    if let Some(tidx) = self.types.iter().position(|t| t.name == name) {
                        let ptype = self.types[tidx].clone();
                        let (speed, radius) = sample_attributes(&ptype, &mut self.rng);
                        let a = &mut self.agents[idx];
                        a.type_idx = tidx;
                        a.preferred_speed = speed;
                        a.radius = radius;
                        self.event(clock, "zone_effect", agent_id.to_string(), format!("{zone_id}: type={name}"));
                    }
                }
                ZoneEffect::SpeedFactor(_) | ZoneEffect::DirectionBias { .. } => {}
            }
        }
    }

    fn react_agent(&mut self, idx: usize, clock: f64) {
        let agent = &self.agents[idx];
        let evac = self.config.evacuation.as_ref().expect("alarm requires config");
        let familiarity = self.types[agent.type_idx]
            .familiarity
            .or(evac.familiarity_default)
            .unwrap_or(1.0);
        let knows_layout = agent.familiarity_draw < familiarity;

        let emergency: Vec<&crate::scenario::SinkArea> = self
            .objects
            .sinks
            .iter()
            .filter(|s| s.is_emergency_exit)
            .collect();
        let default_exit = emergency.iter().map(|s| s.id.clone()).min();
        let allowed: Vec<String> = if knows_layout {
            emergency.iter().map(|s| s.id.clone()).collect()
        } else {
            let mut v: Vec<String> = emergency
                .iter()
                .filter(|s| agent.visited.contains(&s.id))
                .map(|s| s.id.clone())
                .collect();
            if let Some(d) = default_exit {
                if !v.contains(&d) {
                    v.push(d);
                }
            }
            v
        };
        let pos = agent.position;
        let target = allowed
            .iter()
            .filter_map(|id| {
                self.fields
                    .get(id)
                    .and_then(|f| f.distance_at(pos))
                    .map(|d| (d, id.clone()))
            })
            .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then_with(|| a.1.cmp(&b.1)))
            .map(|(_, id)| id);

        let agent = &mut self.agents[idx];
        agent.reacted = true;
        agent.action = Action::Evacuating;
        agent.slot = None;
        agent.hold_until = 0.0;
        if let Some(target) = target {
            agent.chosen_node = Some(target.clone());
            let id = agent.id;
            // Drop out of any queue.
            for q in self.queues.values_mut() {
                q.leave(id);
            }
            for w in self.escalator_waiting.values_mut() {
                w.retain(|a| *a != id);
            }
            self.release_waiting_slot(id);
            self.event(clock, "react", id.to_string(), format!("target={target}"));
        } else {
            let id = agent.id;
            self.event(clock, "route_error", id.to_string(), "no reachable emergency exit".into());
        }
    }

    fn release_waiting_slot(&mut self, agent_id: u64) {
        for slots in self.waiting_slots.values_mut() {
            slots.retain(|(id, _)| *id != agent_id);
        }
    }

    // ---- phase 3: holds -------------------------------------------------

    fn phase3_holds(&mut self, clock: f64) {
        // Waiting releases by time or event.
        let fired = self.fired_events.clone();
        let mut advance: Vec<usize> = Vec::new();
        for (i, agent) in self.agents.iter().enumerate() {
            match agent.action {
                Action::Waiting => {
                    let released = if agent.hold_until.is_finite() {
                        clock + 1e-9 >= agent.hold_until
                    } else {
                        // Event-released: look the release name up.
                        self.objects
                            .waiting_areas
                            .iter()
                            .find(|w| Some(&w.id) == agent.chosen_node.as_ref())
                            .map_or(false, |w| match &w.release {
                                Release::OnEvent(e) => fired.contains(e),
                                Release::AtTime(_) => false,
                            })
                    };
                    if released {
                        advance.push(i);
                    }
                }
                Action::Delayed | Action::Queuing => {
                    if clock + 1e-9 >= agent.hold_until {
                        advance.push(i);
                    }
                }
                _ => {}
            }
        }
        for i in advance {
            let id = self.agents[i].id;
            if self.agents[i].action == Action::Queuing {
                if let Some(node) = self.agents[i].chosen_node.clone() {
                    if let Some(q) = self.queues.get_mut(&node) {
                        q.leave(id);
                    }
                    // Escalator boarding queue head: start the ride instead.
                    if self.objects.escalators.iter().any(|e| e.id == node) {
                        continue; // handled below by the boarding pass
                    }
                }
            }
            self.release_waiting_slot(id);
            self.agents[i].slot = None;
            self.advance_stage(i, clock);
        }

        // Escalator boarding: admit FIFO heads while the rolling 60 s
        // window has capacity.
        for e in self.objects.escalators.clone() {
            let boards = self.escalator_boards.get_mut(&e.id).expect("init");
            while boards.front().map_or(false, |t| *t <= clock - 60.0) {
                boards.pop_front();
            }
            loop {
                let boards_len = self.escalator_boards[&e.id].len();
                if boards_len >= e.capacity_ppm as usize {
                    break;
                }
                let Some(&next) = self.escalator_waiting[&e.id].front() else {
                    break;
                };
                let Some(idx) = self.agents.iter().position(|a| a.id == next) else {
                    self.escalator_waiting.get_mut(&e.id).unwrap().pop_front();
                    continue;
                };
                let from = self.agents[idx].position;
                let to = queue_slot_point(&e.exit, e.exit.length() / 2.0);
                self.agents[idx].ride = Some(Ride {
                    from,
                    to,
                    start: clock,
                    end: clock + e.transit_time,
                });
                self.agents[idx].action = Action::Walking;
                self.escalator_waiting.get_mut(&e.id).unwrap().pop_front();
                self.escalator_boards.get_mut(&e.id).unwrap().push_back(clock);
            }
        }

        // Queue slot reassignment: members drift toward their slot points.
        for q in self.objects.queues.clone() {
            let state = &self.queues[&q.id];
            let spacing = 2.0 * self.max_radius + 0.1;
            let slots: Vec<(u64, Point2)> = state
                .members
                .iter()
                .enumerate()
                .map(|(slot, id)| (*id, queue_slot_point(&q.path, slot as f64 * spacing)))
                .collect();
            for (id, point) in slots {
                if let Some(agent) = self.agents.iter_mut().find(|a| a.id == id) {
                    agent.slot = Some(point);
                }
            }
        }
    }

    // ---- phase 4: parallel velocity computation --------------------------

    fn phase4_velocities(&mut self, clock: f64, dt: f64) -> Vec<(Vec2, bool)> {
        struct Snapshot {
            position: Point2,
            velocity: Vec2,
            radius: f64,
        }
        let snapshot: Vec<Snapshot> = self
            .agents
            .iter()
            .map(|a| Snapshot { position: a.position, velocity: a.velocity, radius: a.radius })
            .collect();

        let env = &self.env;
        let hash = &self.hash;
        let fields = &self.fields;
        let objects = &self.objects;
        let types = &self.types;
        let monitors = &self.monitors;
        let params = self.config.avoidance;
        let agents = &self.agents;

        agents
            .par_iter()
            .enumerate()
            .map(|(i, agent)| {
                match agent.action {
                    Action::Walking | Action::Evacuating => {}
                    _ => return (Vec2::ZERO, false),
                }
                if agent.ride.is_some() {
                    return (Vec2::ZERO, false);
                }
                let Some(node) = agent.chosen_node.as_deref() else {
                    return (Vec2::ZERO, false);
                };
                let Some(field) = fields.get(node) else {
                    return (Vec2::ZERO, true);
                };

                // Effective speed: stairs and continuous zone effects.
                let mut speed = agent.preferred_speed;
                let mut bias: Option<(Vec2, f64)> = None;
                for zone in &objects.zones {
                    if !zone.polygon.contains(agent.position)
                        || !zone.active(clock, monitors)
                        || !zone.filter.matches(agent, types)
                    {
                        continue;
                    }
                    match &zone.effect {
                        ZoneEffect::SpeedFactor(f) => speed *= f,
                        ZoneEffect::DirectionBias { direction, weight } => {
                            bias = Some((Vec2::new(direction[0], direction[1]).normalized(), *weight));
                        }
                        _ => {}
                    }
                }

                let Some(mut desired) = desired_velocity(agent.position, speed, field) else {
                    return (Vec2::ZERO, true);
                };
                for stair in &objects.stairs {
                    if stair.polygon.contains(agent.position) {
                        let up = Vec2::new(stair.up[0], stair.up[1]);
                        let factor = if desired.dot(up) >= 0.0 {
                            stair.speed_factor_up
                        } else {
                            stair.speed_factor_down
                        };
                        desired = desired.scaled(factor);
                    }
                }
                if let Some((dir, weight)) = bias {
                    let mag = desired.norm();
                    if mag > 1e-12 {
                        let steered = desired.normalized().add(dir.scaled(weight)).normalized();
                        desired = steered.scaled(mag);
                    }
                }
                if desired.norm() < 1e-12 {
                    return (Vec2::ZERO, false);
                }

                let mut near: Vec<u32> = Vec::new();
                hash.query_into(agent.position, params.perception, &mut near);
                let neighbors: Vec<Neighbor> = near
                    .iter()
                    .filter(|&&j| j as usize != i)
                    .filter_map(|&j| snapshot.get(j as usize))
                    .filter(|s| s.position.distance(&agent.position) <= params.perception)
                    .map(|s| Neighbor { position: s.position, velocity: s.velocity, radius: s.radius })
                    .collect();
                let admitted =
                    avoid_collisions(agent.position, agent.radius, desired, &neighbors, env, dt, &params);
                (admitted, false)
            })
            .collect()
    }

    // ---- phase 5: sequential commit ---------------------------------------

    fn phase5_commit(&mut self, clock: f64, dt: f64, decisions: Vec<(Vec2, bool)>) {
        let max_move = self
            .types
            .iter()
            .map(|t| t.speed.max)
            .fold(0.0, f64::max)
            * dt;
        let mut near: Vec<u32> = Vec::new();
        let mut routing_errors: Vec<u64> = Vec::new();
        for i in 0..self.agents.len() {
            let (velocity, routing_error) = decisions[i];
            if routing_error {
                routing_errors.push(self.agents[i].id);
            }
            let old = self.agents[i].position;
            let mut new_pos = old;
            let mut new_vel = Vec2::ZERO;

            match self.agents[i].action {
                Action::Walking | Action::Evacuating => {
                    if let Some(ride) = self.agents[i].ride {
                        let t = ((clock - ride.start) / (ride.end - ride.start)).clamp(0.0, 1.0);
                        new_pos = Point2::xy(
                            ride.from.x + t * (ride.to.x - ride.from.x),
                            ride.from.y + t * (ride.to.y - ride.from.y),
                        );
                    } else {
                        new_pos = Point2::xy(old.x + velocity.x * dt, old.y + velocity.y * dt);
                        new_vel = velocity;
                        // Contact guard against already-committed agents.
                        near.clear();
                        self.hash.query_into(
                            new_pos,
                            self.agents[i].radius + self.max_radius + 2.0 * max_move,
                            &mut near,
                        );
                        let r_i = self.agents[i].radius;
                        for &j in &near {
                            let j = j as usize;
                            if j >= i {
                                continue;
                            }
                            let other = &self.agents[j];
                            if new_pos.distance(&other.position) < r_i + other.radius {
                                new_pos = old;
                                new_vel = Vec2::ZERO;
                                break;
                            }
                        }
                    }
                }
                Action::Waiting | Action::Queuing => {
                    // Drift to the assigned slot, no avoidance (slots are
                    // mutually clear).
                    if let Some(slot) = self.agents[i].slot {
                        let to = Vec2::new(slot.x - old.x, slot.y - old.y);
                        let d = to.norm();
                        let step = (self.agents[i].preferred_speed * dt).min(d);
                        if d > 1e-9 {
                            let dir = to.scaled(1.0 / d);
                            new_pos = Point2::xy(old.x + dir.x * step, old.y + dir.y * step);
                            new_vel = dir.scaled(step / dt);
                        }
                    }
                }
                Action::Delayed => {}
            }

            let agent = &mut self.agents[i];
            agent.distance_accumulated += old.distance(&new_pos);
            agent.position = new_pos;
            agent.velocity = new_vel;
        }
        for id in routing_errors {
            self.event(clock, "route_error", id.to_string(), "navigation field infinite".into());
        }
    }

    // ---- phase 6: arrivals and absorption ---------------------------------

    fn phase6_arrivals(&mut self, clock: f64) {
        let mut exits: Vec<usize> = Vec::new();
        for i in 0..self.agents.len() {
            // Ride completion.
            if let Some(ride) = self.agents[i].ride {
                if clock + 1e-9 >= ride.end {
                    self.agents[i].position = ride.to;
                    self.agents[i].ride = None;
                    self.advance_stage(i, clock);
                }
                continue;
            }
            if !matches!(self.agents[i].action, Action::Walking | Action::Evacuating) {
                continue;
            }
            let Some(node_id) = self.agents[i].chosen_node.clone() else {
                continue;
            };
            let Some(node) = self.objects.node(&node_id) else {
                continue;
            };
            if !node.arrived(self.agents[i].position, ARRIVAL_TOLERANCE) {
                continue;
            }
            match node {
                NodeRef::Sink(_) => exits.push(i),
                NodeRef::Marker(_) => {
                    self.advance_stage(i, clock);
                }
                NodeRef::Waiting(w) => {
                    let (fill, release, polygon, wid) =
                        (w.fill_rule, w.release.clone(), w.polygon.clone(), w.id.clone());
                    self.agents[i].visited.insert(wid.clone());
                    self.agents[i].action = Action::Waiting;
                    self.agents[i].hold_until = match release {
                        Release::AtTime(t) => t,
                        Release::OnEvent(_) => f64::INFINITY,
                    };
                    let slot = self.assign_waiting_slot(&wid, &polygon, fill, i);
                    self.agents[i].slot = slot;
                }
                NodeRef::Delay(d) => {
                    let sample = d.delay.clone();
                    let did = d.id.clone();
                    let delay = sample.sample(&mut self.rng).max(0.0);
                    self.agents[i].visited.insert(did);
                    self.agents[i].action = Action::Delayed;
                    self.agents[i].hold_until = clock + delay;
                }
                NodeRef::Queue(q) => {
                    let (qid, service) = (q.id.clone(), q.service_time.clone());
                    let sample = service.sample(&mut self.rng).max(0.0);
                    self.agents[i].visited.insert(qid.clone());
                    self.agents[i].action = Action::Queuing;
                    let id = self.agents[i].id;
                    let done = self
                        .queues
                        .get_mut(&qid)
                        .expect("queue state")
                        .admit(id, clock, sample);
                    self.agents[i].hold_until = done;
                }
                NodeRef::Escalator(e) => {
                    let eid = e.id.clone();
                    self.agents[i].visited.insert(eid.clone());
                    self.agents[i].action = Action::Queuing;
                    self.agents[i].hold_until = f64::INFINITY;
                    let id = self.agents[i].id;
                    let waiting = self.escalator_waiting.get_mut(&eid).expect("init");
                    if !waiting.contains(&id) {
                        waiting.push_back(id);
                    }
                }
            }
        }
        // Remove absorbed agents, ascending order preserved.
        for &i in exits.iter().rev() {
            let agent = self.agents.remove(i);
            self.trace.exits.push((agent.id, clock));
            let node = agent.chosen_node.unwrap_or_default();
            self.event(clock, "exit", agent.id.to_string(), format!("sink={node}"));
        }
    }

    fn assign_waiting_slot(
        &mut self,
        area_id: &str,
        polygon: &Polyline,
        fill: FillRule,
        agent_idx: usize,
    ) -> Option<Point2> {
        let spacing = 2.0 * self.max_radius + 0.05;
        let taken: Vec<Point2> = self
            .waiting_slots
            .get(area_id)
            .map(|v| v.iter().map(|(_, p)| *p).collect())
            .unwrap_or_default();
        let entry = self.agents[agent_idx].position;
        let agent_id = self.agents[agent_idx].id;
        let slot = match fill {
            FillRule::UniformRandom => {
                let bbox = polygon.bbox();
                let mut found = None;
                for _ in 0..100 {
                    let p = Point2::xy(
                        bbox.min_x + self.rng.gen::<f64>() * bbox.width(),
                        bbox.min_y + self.rng.gen::<f64>() * bbox.height(),
                    );
                    if polygon.contains(p)
                        && self.env.walkable(p, self.max_radius)
                        && taken.iter().all(|t| t.distance(&p) >= spacing)
                    {
                        found = Some(p);
                        break;
                    }
                }
                found
            }
            FillRule::NearestEntryFirst => {
                // Grid points inside the polygon, nearest to the entry point
                // first.
                let bbox = polygon.bbox();
                let mut candidates: Vec<Point2> = Vec::new();
                let mut y = bbox.min_y + spacing / 2.0;
                while y < bbox.max_y {
                    let mut x = bbox.min_x + spacing / 2.0;
                    while x < bbox.max_x {
                        let p = Point2::xy(x, y);
                        if polygon.contains(p) && self.env.walkable(p, self.max_radius) {
                            candidates.push(p);
                        }
                        x += spacing;
                    }
                    y += spacing;
                }
                candidates.sort_by(|a, b| {
                    entry
                        .distance(a)
                        .partial_cmp(&entry.distance(b))
                        .unwrap()
                        .then_with(|| a.x.total_cmp(&b.x))
                        .then_with(|| a.y.total_cmp(&b.y))
                });
                candidates
                    .into_iter()
                    .find(|p| taken.iter().all(|t| t.distance(p) >= spacing))
            }
        };
        if let Some(p) = slot {
            self.waiting_slots
                .entry(area_id.to_string())
                .or_default()
                .push((agent_id, p));
        }
        slot
    }

    /// Moves the agent to its next route stage (or the nearest sink when the
    /// route is exhausted or broken).
    fn advance_stage(&mut self, idx: usize, clock: f64) {
        if let Some(node) = self.agents[idx].chosen_node.clone() {
            self.agents[idx].visited.insert(node);
        }
        if self.agents[idx].action != Action::Evacuating {
            self.agents[idx].action = Action::Walking;
        } else {
            // Evacuating agents keep heading to their assigned exit.
            return;
        }
        self.agents[idx].slot = None;

        let route = self
            .routes
            .iter()
            .find(|r| r.id == self.agents[idx].route_id)
            .cloned();
        let next_stage = self.agents[idx].stage + 1;
        let stage: Option<Stage> =
            route.and_then(|r| r.stages.get(next_stage).cloned());
        match stage {
            Some(stage) => {
                self.agents[idx].stage = next_stage;
                let pos = self.agents[idx].position;
                match self.choose(&stage, pos) {
                    Ok(node) => self.agents[idx].chosen_node = Some(node),
                    Err(_) => {
                        let id = self.agents[idx].id;
                        self.event(clock, "route_error", id.to_string(), "no reachable candidate".into());
                        let pos = self.agents[idx].position;
                        self.agents[idx].chosen_node = self.nearest_sink(pos);
                    }
                }
            }
            None => {
                // Route exhausted without a sink; head to the nearest one.
                let pos = self.agents[idx].position;
                self.agents[idx].chosen_node = self.nearest_sink(pos);
            }
        }
    }

    fn choose(&mut self, stage: &Stage, pos: Point2) -> Result<String, crate::scenario::RoutingError> {
        let fields = &self.fields;
        let time_fields = &self.time_fields;
        let monitors = &self.monitors;
        let queues = &self.queues;
        let occupancy = move |id: &str| -> f64 {
            if let Some(q) = queues.get(id) {
                return q.members.len() as f64;
            }
            monitors.readings.get(id).map(|r| r.count as f64).unwrap_or(0.0)
        };
        let nav_distance =
            move |id: &str, p: Point2| -> Option<f64> { fields.get(id).and_then(|f| f.distance_at(p)) };
        let travel_time = move |id: &str, p: Point2| -> Option<f64> {
            if let Some(f) = time_fields.get(id) {
                return f.distance_at(p);
            }
            // Fall back to distance at nominal speed until the first rebuild.
            fields.get(id).and_then(|f| f.distance_at(p)).map(|d| d / 1.34)
        };
        let ctx = ChoiceContext {
            occupancy: &occupancy,
            nav_distance: &nav_distance,
            travel_time: &travel_time,
        };
        choose_next(stage, pos, &ctx, &mut self.rng)
    }

    fn nearest_sink(&self, pos: Point2) -> Option<String> {
        self.objects
            .sinks
            .iter()
            .filter_map(|s| {
                self.fields
                    .get(&s.id)
                    .and_then(|f| f.distance_at(pos))
                    .map(|d| (d, s.id.clone()))
            })
            .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then_with(|| a.1.cmp(&b.1)))
            .map(|(_, id)| id)
    }

    // ---- phase 7: monitors, analyses, trace --------------------------------

    fn phase7_outputs(&mut self, clock: f64) {
        // Monitors.
        let mut readings = std::collections::BTreeMap::new();
        for (name, polygon) in self.objects.monitored_areas() {
            let bbox = polygon.bbox();
            let count = self
                .agents
                .iter()
                .filter(|a| bbox.contains(a.position) && polygon.contains(a.position))
                .count();
            let area = polygon.area();
            let density = if area > 0.0 { count as f64 / area } else { 0.0 };
            readings.insert(name, MonitorReading { count, density });
        }
        self.monitors = MonitorSnapshot { readings };

        // Quickest-time field rebuilds.
        if !self.quickest_targets.is_empty()
            && clock - self.time_fields_age + 1e-9 >= self.config.quickest_rebuild
        {
            self.rebuild_time_fields();
            self.time_fields_age = clock;
        }

        // Trace frame.
        let tick = self.tick + 1;
        if self.config.trace_every > 0 && tick % self.config.trace_every == 0 {
            let rows: Vec<TraceRow> = self
                .agents
                .iter()
                .map(|a| TraceRow {
                    agent: a.id,
                    type_idx: a.type_idx,
                    x: a.position.x,
                    y: a.position.y,
                    action: a.action,
                    stage: a.stage,
                    speed: a.velocity.norm(),
                })
                .collect();
            self.trace.frames.push(Frame { tick, time: clock, rows });
        }

        // Scheduled analyses.
        let dt = self.config.dt;
        let analyses = self.analyses.clone();
        for def in &analyses {
            let Some(every) = def.every else { continue };
            if every <= 0.0 {
                continue;
            }
            let k_now = ((clock + 1e-9) / every).floor() as i64;
            let k_prev = ((clock - dt + 1e-9) / every).floor() as i64;
            if k_now >= 1 && k_now > k_prev {
                let time = k_now as f64 * every;
                match run_analysis(def, &self.trace, &self.objects, Some(time)) {
                    Ok(table) => self.auto_emissions.push(AutoEmission {
                        analysis_id: def.id.clone(),
                        time,
                        table,
                    }),
                    Err(e) => {
                        self.event(clock, "analysis_error", def.id.clone(), e.to_string());
                    }
                }
            }
        }
    }

    fn rebuild_time_fields(&mut self) {
        // Coarse density sampled from live agent positions.
        let cell = 2.0;
        let bounds = self.bounds;
        let cols = ((bounds.width() / cell).ceil() as usize).max(1);
        let rows = ((bounds.height() / cell).ceil() as usize).max(1);
        let mut counts = vec![0u32; cols * rows];
        for a in &self.agents {
            let cx = (((a.position.x - bounds.min_x) / cell).floor() as isize)
                .clamp(0, cols as isize - 1) as usize;
            let cy = (((a.position.y - bounds.min_y) / cell).floor() as isize)
                .clamp(0, rows as isize - 1) as usize;
            counts[cy * cols + cx] += 1;
        }
        let density = move |p: Point2| -> f64 {
            let cx = (((p.x - bounds.min_x) / cell).floor() as isize).clamp(0, cols as isize - 1)
                as usize;
            let cy = (((p.y - bounds.min_y) / cell).floor() as isize).clamp(0, rows as isize - 1)
                as usize;
            counts[cy * cols + cx] as f64 / (cell * cell)
        };
        for id in self.quickest_targets.clone() {
            let Some(node) = self.objects.node(&id) else { continue };
            let shape = field_target_shape(&node);
            if let Ok(field) = build_nav_field(
                &self.env,
                &id,
                &shape,
                self.bounds,
                self.config.nav_cell,
                self.max_radius,
                CostModel::QuickestTime { free_flow_speed: 1.34, density: &density },
            ) {
                self.time_fields.insert(id, field);
            }
        }
    }

    pub fn into_output(self, wall_seconds: f64) -> RunOutput {
        let sim_seconds = self.tick as f64 * self.config.dt;
        let egress_time = self.alarm_time.and_then(|alarm| {
            if self.agents.is_empty() {
                self.trace
                    .exits
                    .iter()
                    .filter(|(_, t)| *t >= alarm)
                    .map(|(_, t)| *t - alarm)
                    .fold(None, |acc: Option<f64>, t| Some(acc.map_or(t, |a| a.max(t))))
            } else {
                None
            }
        });
        RunOutput {
            summary: RunSummary {
                seed: self.config.seed,
                ticks: self.tick,
                spawned: self.spawned,
                exited: self.trace.exits.len() as u64,
                alive_at_end: self.agents.len() as u64,
                wall_seconds,
                sim_seconds_per_wall_second: if wall_seconds > 0.0 {
                    sim_seconds / wall_seconds
                } else {
                    f64::INFINITY
                },
                egress_time,
            },
            trace: self.trace,
            auto_emissions: self.auto_emissions,
        }
    }
}

/// Shape a navigation field should treat as its zero set.
fn field_target_shape(node: &NodeRef) -> Polyline {
    match node {
        NodeRef::Queue(q) => {
            // Tail point blown up to a small square so it seeds grid cells.
            let tail = *q.path.vertices.last().unwrap();
            let s = 0.4;
            Polyline {
                vertices: vec![
                    Point2::xy(tail.x - s, tail.y - s),
                    Point2::xy(tail.x + s, tail.y - s),
                    Point2::xy(tail.x + s, tail.y + s),
                    Point2::xy(tail.x - s, tail.y + s),
                ],
                closed: true,
            }
        }
        other => other.arrival_shape().clone(),
    }
}

/// Runs a scenario to completion.
pub fn run(bundle: &ScenarioBundle, config: &SimConfig) -> Result<RunOutput, EngineError> {
    let started = Instant::now();
    let mut sim = Simulation::new(bundle, config)?;
    while !sim.finished() {
        sim.step();
    }
    Ok(sim.into_output(started.elapsed().as_secs_f64()))
}

/// Executes independent runs, one per config, in parallel. Per-run failures
/// are isolated in the result list.
pub fn run_batch(
    bundle: &ScenarioBundle,
    configs: &[SimConfig],
) -> Vec<Result<RunOutput, EngineError>> {
    configs.par_iter().map(|c| run(bundle, c)).collect()
}

/// Seed sequence for a batch: `automatic` increments from the base seed.
pub fn batch_configs(base: &SimConfig, runs: usize) -> Vec<SimConfig> {
    (0..runs)
        .map(|i| {
            let mut c = base.clone();
            c.seed = base.seed + i as u64;
            c
        })
        .collect()
}
