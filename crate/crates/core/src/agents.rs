//! Pedestrian types, attribute sampling and local movement: target seeking
//! along a navigation field plus velocity-candidate collision avoidance.

use std::collections::BTreeSet;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::nav::NavField;
use crate::geometry::{Environment, Point2};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("type '{name}': speed bounds must satisfy 0 < min <= mean <= max")]
    BadSpeedBounds { name: String },
    #[error("type '{name}': radius must be > 0")]
    BadRadius { name: String },
    #[error("type '{name}': luggage_factor must be in (0, 1]")]
    BadLuggage { name: String },
    #[error("type '{name}': familiarity must be in [0, 1]")]
    BadFamiliarity { name: String },
}

/// Plane vector (velocities, directions).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn scaled(self, k: f64) -> Vec2 {
        Vec2 { x: self.x * k, y: self.y * k }
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        if n < 1e-12 {
            Vec2::ZERO
        } else {
            self.scaled(1.0 / n)
        }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn sub(self, other: Vec2) -> Vec2 {
        Vec2 { x: self.x - other.x, y: self.y - other.y }
    }

    pub fn add(self, other: Vec2) -> Vec2 {
        Vec2 { x: self.x + other.x, y: self.y + other.y }
    }

    pub fn rotated(self, radians: f64) -> Vec2 {
        let (s, c) = radians.sin_cos();
        Vec2 { x: c * self.x - s * self.y, y: s * self.x + c * self.y }
    }
}

/// Truncated normal walking-speed distribution (m/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedDistribution {
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

impl SpeedDistribution {
    /// Rejection-sampled draw within [min, max].
    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.sd <= 0.0 {
            return self.mean;
        }
        let normal = Normal::new(self.mean, self.sd).expect("validated sd");
        for _ in 0..1000 {
            let x = normal.sample(rng);
            if x >= self.min && x <= self.max {
                return x;
            }
        }
        self.mean.clamp(self.min, self.max)
    }
}

/// A pedestrian class: speed distribution, body radius, luggage slowdown,
/// restricted-mobility flag and environment familiarity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PedestrianType {
    pub name: String,
    pub speed: SpeedDistribution,
    pub radius: f64,
    #[serde(default = "default_luggage")]
    pub luggage_factor: f64,
    #[serde(default)]
    pub prm: bool,
    /// Probability the agent knows the full layout in an evacuation;
    /// falls back to the evacuation config default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub familiarity: Option<f64>,
}

fn default_luggage() -> f64 {
    1.0
}

impl PedestrianType {
    pub fn validate(&self) -> Result<(), AgentError> {
        let s = &self.speed;
        if !(s.min > 0.0 && s.min <= s.mean && s.mean <= s.max) {
            return Err(AgentError::BadSpeedBounds { name: self.name.clone() });
        }
        if self.radius <= 0.0 {
            return Err(AgentError::BadRadius { name: self.name.clone() });
        }
        if !(self.luggage_factor > 0.0 && self.luggage_factor <= 1.0) {
            return Err(AgentError::BadLuggage { name: self.name.clone() });
        }
        if let Some(f) = self.familiarity {
            if !(0.0..=1.0).contains(&f) {
                return Err(AgentError::BadFamiliarity { name: self.name.clone() });
            }
        }
        Ok(())
    }
}

/// Calibration defaults for common pedestrian classes. Speeds and radii are
/// standard planning values; adjust per study.
pub fn default_type_library() -> Vec<PedestrianType> {
    vec![
        PedestrianType {
            name: "commuter".into(),
            speed: SpeedDistribution { mean: 1.34, sd: 0.26, min: 0.5, max: 2.2 },
            radius: 0.23,
            luggage_factor: 1.0,
            prm: false,
            familiarity: Some(0.8),
        },
        PedestrianType {
            name: "tourist_luggage".into(),
            speed: SpeedDistribution { mean: 1.1, sd: 0.25, min: 0.4, max: 1.8 },
            radius: 0.27,
            luggage_factor: 0.8,
            prm: false,
            familiarity: Some(0.3),
        },
        PedestrianType {
            name: "prm".into(),
            speed: SpeedDistribution { mean: 0.8, sd: 0.2, min: 0.3, max: 1.2 },
            radius: 0.35,
            luggage_factor: 1.0,
            prm: true,
            familiarity: Some(0.5),
        },
        PedestrianType {
            name: "child".into(),
            speed: SpeedDistribution { mean: 0.9, sd: 0.3, min: 0.4, max: 1.6 },
            radius: 0.18,
            luggage_factor: 1.0,
            prm: false,
            familiarity: Some(0.2),
        },
    ]
}

/// Samples (preferred speed, radius) for a newly spawned agent; the luggage
/// factor scales the drawn speed.
pub fn sample_attributes(ptype: &PedestrianType, rng: &mut impl Rng) -> (f64, f64) {
    (ptype.speed.sample(rng) * ptype.luggage_factor, ptype.radius)
}

/// What the agent is currently doing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Walking,
    Waiting,
    Queuing,
    Delayed,
    Evacuating,
}

impl Action {
    pub fn as_str(&self) -> &'static str {
        match self {
            Action::Walking => "walking",
            Action::Waiting => "waiting",
            Action::Queuing => "queuing",
            Action::Delayed => "delayed",
            Action::Evacuating => "evacuating",
        }
    }

    pub fn parse(s: &str) -> Option<Action> {
        Some(match s {
            "walking" => Action::Walking,
            "waiting" => Action::Waiting,
            "queuing" => Action::Queuing,
            "delayed" => Action::Delayed,
            "evacuating" => Action::Evacuating,
            _ => return None,
        })
    }
}

/// Escalator ride in progress: linear motion from entry to exit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ride {
    pub from: Point2,
    pub to: Point2,
    pub start: f64,
    pub end: f64,
}

/// One simulated pedestrian.
#[derive(Debug, Clone)]
pub struct Agent {
    pub id: u64,
    pub type_idx: usize,
    pub position: Point2,
    pub velocity: Vec2,
    pub preferred_speed: f64,
    pub radius: f64,
    pub route_id: String,
    pub stage: usize,
    pub chosen_node: Option<String>,
    pub action: Action,
    pub entered_at: f64,
    pub visited: BTreeSet<String>,
    pub distance_accumulated: f64,
    /// Reserved for group cohesion; not used by the movement model.
    pub group_id: Option<u64>,
    // Run bookkeeping.
    pub hold_until: f64,
    pub slot: Option<Point2>,
    pub ride: Option<Ride>,
    pub familiarity_draw: f64,
    pub react_at: f64,
    pub reacted: bool,
    pub zones_applied: BTreeSet<String>,
}

impl Agent {
    pub fn new(
        id: u64,
        type_idx: usize,
        position: Point2,
        preferred_speed: f64,
        radius: f64,
        route_id: String,
        entered_at: f64,
        familiarity_draw: f64,
    ) -> Self {
        Agent {
            id,
            type_idx,
            position,
            velocity: Vec2::ZERO,
            preferred_speed,
            radius,
            route_id,
            stage: 0,
            chosen_node: None,
            action: Action::Walking,
            entered_at,
            visited: BTreeSet::new(),
            distance_accumulated: 0.0,
            group_id: None,
            hold_until: 0.0,
            slot: None,
            ride: None,
            familiarity_draw,
            react_at: f64::INFINITY,
            reacted: false,
            zones_applied: BTreeSet::new(),
        }
    }
}

/// Unit descent direction of the navigation field at the agent's position,
/// scaled to `speed`. `None` when the field is infinite there (routing
/// error); zero once the target is reached.
pub fn desired_velocity(position: Point2, speed: f64, nav: &NavField) -> Option<Vec2> {
    let d = nav.distance_at(position)?;
    if d <= nav.arrival_tolerance() {
        return Some(Vec2::ZERO);
    }
    let dir = nav.descent_direction(position)?;
    Some(dir.scaled(speed))
}

/// Neighbor snapshot used by collision avoidance.
#[derive(Debug, Clone, Copy)]
pub struct Neighbor {
    pub position: Point2,
    pub velocity: Vec2,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AvoidanceParams {
    /// Look-ahead for agent-agent conflicts, seconds.
    pub horizon: f64,
    /// Neighbor query radius, meters.
    pub perception: f64,
    /// Required clearance as a multiple of summed radii.
    pub safety: f64,
}

impl Default for AvoidanceParams {
    fn default() -> Self {
        AvoidanceParams { horizon: 2.0, perception: 3.0, safety: 1.05 }
    }
}

// Candidate polar grid: 12 headings x 3 speed fractions = 36 velocities.
// Negative angles (own right-hand side) come first so symmetric head-on
// encounters break toward the right deterministically.
const CANDIDATE_ANGLES_DEG: [f64; 12] =
    [0.0, -20.0, 20.0, -45.0, 45.0, -75.0, 75.0, -110.0, 110.0, -145.0, 145.0, 180.0];
const CANDIDATE_SPEEDS: [f64; 3] = [1.0, 0.6, 0.3];

/// Picks the admissible velocity closest to `desired`: no predicted neighbor
/// overlap within the horizon, no wall penetration within `dt`, speed capped
/// by `desired`. Falls back to standing still when nothing is feasible.
pub fn avoid_collisions(
    position: Point2,
    radius: f64,
    desired: Vec2,
    neighbors: &[Neighbor],
    env: &Environment,
    dt: f64,
    params: &AvoidanceParams,
) -> Vec2 {
    let speed = desired.norm();
    if speed < 1e-12 {
        return Vec2::ZERO;
    }

    let feasible = |v: Vec2| -> bool {
        let end = Point2::xy(position.x + v.x * dt, position.y + v.y * dt);
        if !env.walkable(end, radius) {
            return false;
        }
        for n in neighbors {
            let sum = (radius + n.radius) * params.safety;
            let qx = position.x - n.position.x;
            let qy = position.y - n.position.y;
            let wx = v.x - n.velocity.x;
            let wy = v.y - n.velocity.y;
            let current2 = qx * qx + qy * qy;
            if current2 < sum * sum {
                // Already inside the margin: require motion that opens the gap.
                if qx * wx + qy * wy <= 0.0 {
                    return false;
                }
                continue;
            }
            let w2 = wx * wx + wy * wy;
            let t_star = if w2 < 1e-12 {
                0.0
            } else {
                (-(qx * wx + qy * wy) / w2).clamp(0.0, params.horizon)
            };
            let cx = qx + wx * t_star;
            let cy = qy + wy * t_star;
            if cx * cx + cy * cy < sum * sum {
                return false;
            }
        }
        true
    };

    // Unconstrained fast path.
    if neighbors.is_empty() && feasible(desired) {
        return desired;
    }
    if feasible(desired) {
        return desired;
    }

    let mut best: Option<(f64, Vec2)> = None;
    for &angle in CANDIDATE_ANGLES_DEG.iter() {
        let dir = desired.normalized().rotated(angle.to_radians());
        for &frac in CANDIDATE_SPEEDS.iter() {
            let v = dir.scaled(speed * frac);
            if !feasible(v) {
                continue;
            }
            let cost = v.sub(desired).norm();
            if best.map_or(true, |(c, _)| cost < c) {
                best = Some((cost, v));
            }
        }
    }
    best.map(|(_, v)| v).unwrap_or(Vec2::ZERO)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Layer, Obstacle, Polyline};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn degenerate_speed_distribution() {
        let t = PedestrianType {
            name: "t".into(),
            speed: SpeedDistribution { mean: 1.34, sd: 0.0, min: 0.5, max: 2.2 },
            radius: 0.23,
            luggage_factor: 1.0,
            prm: false,
            familiarity: None,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (v, r) = sample_attributes(&t, &mut rng);
        assert_eq!(v, 1.34);
        assert_eq!(r, 0.23);
    }

    #[test]
    fn luggage_factor_scales_speed() {
        let t = PedestrianType {
            name: "t".into(),
            speed: SpeedDistribution { mean: 1.5, sd: 0.0, min: 0.5, max: 2.0 },
            radius: 0.25,
            luggage_factor: 0.8,
            prm: false,
            familiarity: None,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (v, _) = sample_attributes(&t, &mut rng);
        assert!((v - 1.2).abs() < 1e-12);
    }

    /// Numeric-integration oracle for the truncated-normal mean.
    fn truncated_mean_oracle(mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
        let pdf = |x: f64| {
            let z = (x - mean) / sd;
            (-0.5 * z * z).exp()
        };
        let n = 20_000;
        let h = (hi - lo) / n as f64;
        let mut mass = 0.0;
        let mut moment = 0.0;
        for i in 0..=n {
            let x = lo + i as f64 * h;
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            mass += w * pdf(x);
            moment += w * x * pdf(x);
        }
        moment / mass
    }

    #[test]
    fn sampled_mean_matches_truncated_normal() {
        let t = PedestrianType {
            name: "t".into(),
            speed: SpeedDistribution { mean: 1.34, sd: 0.26, min: 0.5, max: 2.2 },
            radius: 0.23,
            luggage_factor: 1.0,
            prm: false,
            familiarity: None,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 10_000;
        let sum: f64 = (0..n).map(|_| sample_attributes(&t, &mut rng).0).sum();
        let sample_mean = sum / n as f64;
        let expected = truncated_mean_oracle(1.34, 0.26, 0.5, 2.2);
        assert!(
            (sample_mean - expected).abs() < 0.02,
            "sample mean {sample_mean} vs oracle {expected}"
        );
    }

    #[test]
    fn default_library_is_valid_and_has_prm() {
        let lib = default_type_library();
        assert!(lib.len() >= 4);
        for t in &lib {
            t.validate().unwrap();
        }
        assert!(lib.iter().any(|t| t.prm));
        let prm = lib.iter().find(|t| t.prm).unwrap();
        let commuter = lib.iter().find(|t| t.name == "commuter").unwrap();
        assert!(prm.speed.mean < commuter.speed.mean);
        assert!(prm.radius > commuter.radius);
    }

    #[test]
    fn type_validation_rejects_bad_bounds() {
        let mut t = default_type_library().remove(0);
        t.speed.min = 3.0;
        assert!(t.validate().is_err());
    }

    fn corridor_env(y0: f64, y1: f64, x0: f64, x1: f64) -> Environment {
        Environment::new(
            vec![Layer { name: "walls".into(), obstacle_active: true }],
            vec![
                Obstacle {
                    id: 1,
                    shape: Polyline::open(vec![Point2::xy(x0, y0), Point2::xy(x1, y0)]).unwrap(),
                    layer: "walls".into(),
                    circle: None,
                },
                Obstacle {
                    id: 2,
                    shape: Polyline::open(vec![Point2::xy(x0, y1), Point2::xy(x1, y1)]).unwrap(),
                    layer: "walls".into(),
                    circle: None,
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn no_neighbors_returns_desired() {
        let env = Environment::empty();
        let desired = Vec2::new(1.34, 0.0);
        let v = avoid_collisions(
            Point2::xy(0.0, 0.0),
            0.23,
            desired,
            &[],
            &env,
            0.1,
            &AvoidanceParams::default(),
        );
        assert_eq!(v, desired);
    }

    #[test]
    fn head_on_pair_passes_with_clearance() {
        let env = corridor_env(0.0, 4.0, -5.0, 15.0);
        let params = AvoidanceParams::default();
        let dt = 0.1;
        let r = 0.23;
        let mut a = (Point2::xy(0.0, 2.0), Vec2::ZERO);
        let mut b = (Point2::xy(10.0, 2.0), Vec2::ZERO);
        let mut min_dist = f64::INFINITY;
        for _ in 0..200 {
            let da = Vec2::new(1.34, 0.0);
            let db = Vec2::new(-1.34, 0.0);
            let na = [Neighbor { position: b.0, velocity: b.1, radius: r }];
            let nb = [Neighbor { position: a.0, velocity: a.1, radius: r }];
            let va = avoid_collisions(a.0, r, da, &na, &env, dt, &params);
            let vb = avoid_collisions(b.0, r, db, &nb, &env, dt, &params);
            a = (Point2::xy(a.0.x + va.x * dt, a.0.y + va.y * dt), va);
            b = (Point2::xy(b.0.x + vb.x * dt, b.0.y + vb.y * dt), vb);
            min_dist = min_dist.min(a.0.distance(&b.0));
        }
        assert!(a.0.x > b.0.x, "agents must pass each other");
        assert!(
            min_dist >= 0.95 * (r + r),
            "min centre distance {min_dist} below tolerance"
        );
    }

    #[test]
    fn wall_ahead_caps_admitted_speed() {
        // Wall 0.1 m beyond body clearance, desired 1.34 m/s straight at it.
        let r = 0.23;
        let gap = 0.1;
        let env = Environment::new(
            vec![Layer { name: "w".into(), obstacle_active: true }],
            vec![Obstacle {
                id: 1,
                shape: Polyline::open(vec![Point2::xy(r + gap, -10.0), Point2::xy(r + gap, 10.0)])
                    .unwrap(),
                layer: "w".into(),
                circle: None,
            }],
        )
        .unwrap();
        let dt = 0.1;
        let v = avoid_collisions(
            Point2::xy(0.0, 0.0),
            r,
            Vec2::new(1.34, 0.0),
            &[],
            &env,
            dt,
            &AvoidanceParams::default(),
        );
        // Forward progress this tick must not exceed the open gap.
        assert!(v.x * dt <= gap + 1e-9, "admitted forward speed {} too high", v.x);
        assert!(v.norm() <= gap / dt + 1e-9);
    }

    #[test]
    fn infeasible_falls_back_to_standstill() {
        // Boxed in by four neighbors closer than the safety margin.
        let env = Environment::empty();
        let r = 0.3;
        let neighbors: Vec<Neighbor> = [(0.55, 0.0), (-0.55, 0.0), (0.0, 0.55), (0.0, -0.55)]
            .iter()
            .map(|&(x, y)| Neighbor { position: Point2::xy(x, y), velocity: Vec2::ZERO, radius: r })
            .collect();
        let v = avoid_collisions(
            Point2::xy(0.0, 0.0),
            r,
            Vec2::new(1.0, 0.0),
            &neighbors,
            &env,
            0.1,
            &AvoidanceParams::default(),
        );
        assert_eq!(v, Vec2::ZERO);
    }
}
