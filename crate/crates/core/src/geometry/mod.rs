//! 2D simulation environment: layered obstacle geometry, transforms,
//! measuring tools and walkability queries.

mod dxf;

pub use dxf::{export_dxf_subset, parse_dxf_subset, DxfParseError};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Vertices closer than this are considered coincident.
pub const GEOM_EPS: f64 = 1e-9;

/// Number of vertices a circle is tessellated into.
pub const CIRCLE_SEGMENTS: usize = 32;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("non-finite coordinate ({0}, {1})")]
    NonFinite(f64, f64),
    #[error("polyline needs at least 2 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("consecutive duplicate vertex at index {0}")]
    DuplicateVertex(usize),
    #[error("closed polyline is self-intersecting (segments {0} and {1})")]
    SelfIntersecting(usize, usize),
    #[error("unknown layer '{0}'")]
    UnknownLayer(String),
    #[error("unknown obstacle id {0}")]
    UnknownObstacle(u64),
    #[error("duplicate layer name '{0}'")]
    DuplicateLayer(String),
    #[error("scale factor must be > 0, got {0}")]
    BadScaleFactor(f64),
    #[error("degenerate angle: ray endpoint coincides with vertex")]
    DegenerateAngle,
}

/// A point in the plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Result<Self, GeometryError> {
        if !x.is_finite() || !y.is_finite() {
            return Err(GeometryError::NonFinite(x, y));
        }
        Ok(Point2 { x, y })
    }

    /// Shorthand for trusted (finite) coordinates.
    pub fn xy(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// An open or closed chain of vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub vertices: Vec<Point2>,
    pub closed: bool,
}

impl Polyline {
    /// Builds an open polyline, checking vertex invariants.
    pub fn open(vertices: Vec<Point2>) -> Result<Self, GeometryError> {
        Self::validate_vertices(&vertices)?;
        Ok(Polyline { vertices, closed: false })
    }

    /// Builds a closed polyline; the implied polygon must be simple.
    pub fn closed(vertices: Vec<Point2>) -> Result<Self, GeometryError> {
        Self::validate_vertices(&vertices)?;
        if vertices.len() < 3 {
            return Err(GeometryError::TooFewVertices(vertices.len()));
        }
        // Also reject coincident first/last (closing edge is implicit).
        let n = vertices.len();
        if vertices[0].distance(&vertices[n - 1]) < GEOM_EPS {
            return Err(GeometryError::DuplicateVertex(n - 1));
        }
        let poly = Polyline { vertices, closed: true };
        if let Some((i, j)) = poly.find_self_intersection() {
            return Err(GeometryError::SelfIntersecting(i, j));
        }
        Ok(poly)
    }

    fn validate_vertices(vertices: &[Point2]) -> Result<(), GeometryError> {
        if vertices.len() < 2 {
            return Err(GeometryError::TooFewVertices(vertices.len()));
        }
        for (i, v) in vertices.iter().enumerate() {
            if !v.x.is_finite() || !v.y.is_finite() {
                return Err(GeometryError::NonFinite(v.x, v.y));
            }
            if i > 0 && v.distance(&vertices[i - 1]) < GEOM_EPS {
                return Err(GeometryError::DuplicateVertex(i));
            }
        }
        Ok(())
    }

    /// Edge list; for closed polylines this includes the closing edge.
    pub fn segments(&self) -> Vec<(Point2, Point2)> {
        let mut segs: Vec<(Point2, Point2)> = self
            .vertices
            .windows(2)
            .map(|w| (w[0], w[1]))
            .collect();
        if self.closed {
            segs.push((*self.vertices.last().unwrap(), self.vertices[0]));
        }
        segs
    }

    pub fn length(&self) -> f64 {
        self.segments().iter().map(|(a, b)| a.distance(b)).sum()
    }

    /// Signed area (shoelace); zero for open polylines.
    pub fn signed_area(&self) -> f64 {
        if !self.closed {
            return 0.0;
        }
        let mut acc = 0.0;
        let n = self.vertices.len();
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            acc += a.x * b.y - b.x * a.y;
        }
        acc / 2.0
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    /// Point-in-polygon with a closed boundary: points on an edge count as
    /// inside. Always false for open polylines.
    pub fn contains(&self, p: Point2) -> bool {
        if !self.closed {
            return false;
        }
        let n = self.vertices.len();
        // Boundary counts as inside.
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            if point_segment_distance(p, a, b) < GEOM_EPS {
                return true;
            }
        }
        let mut inside = false;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            if (a.y > p.y) != (b.y > p.y) {
                let x_cross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x_cross {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn bbox(&self) -> Rect {
        Rect::of_points(&self.vertices)
    }

    pub fn centroid(&self) -> Point2 {
        let n = self.vertices.len() as f64;
        let (sx, sy) = self
            .vertices
            .iter()
            .fold((0.0, 0.0), |(sx, sy), v| (sx + v.x, sy + v.y));
        Point2::xy(sx / n, sy / n)
    }

    /// Non-adjacent segment pair that intersects, if any. Shared endpoints
    /// (within [`GEOM_EPS`]) between adjacent segments are fine.
    fn find_self_intersection(&self) -> Option<(usize, usize)> {
        let segs = self.segments();
        let n = segs.len();
        for i in 0..n {
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                let (a1, a2) = segs[i];
                let (b1, b2) = segs[j];
                if adjacent {
                    continue;
                }
                if segments_intersect(a1, a2, b1, b2) {
                    // Tolerate touching exactly at a shared endpoint.
                    let endpoint_touch = [a1, a2].iter().any(|p| {
                        [b1, b2].iter().any(|q| p.distance(q) < GEOM_EPS)
                    });
                    if !endpoint_touch {
                        return Some((i, j));
                    }
                }
            }
        }
        None
    }
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Rect {
    pub fn empty() -> Self {
        Rect { min_x: 0.0, min_y: 0.0, max_x: 0.0, max_y: 0.0 }
    }

    pub fn of_points(pts: &[Point2]) -> Self {
        if pts.is_empty() {
            return Rect::empty();
        }
        let mut r = Rect {
            min_x: f64::INFINITY,
            min_y: f64::INFINITY,
            max_x: f64::NEG_INFINITY,
            max_y: f64::NEG_INFINITY,
        };
        for p in pts {
            r.min_x = r.min_x.min(p.x);
            r.min_y = r.min_y.min(p.y);
            r.max_x = r.max_x.max(p.x);
            r.max_y = r.max_y.max(p.y);
        }
        r
    }

    pub fn union(self, other: Rect) -> Rect {
        Rect {
            min_x: self.min_x.min(other.min_x),
            min_y: self.min_y.min(other.min_y),
            max_x: self.max_x.max(other.max_x),
            max_y: self.max_y.max(other.max_y),
        }
    }

    pub fn inflate(self, m: f64) -> Rect {
        Rect {
            min_x: self.min_x - m,
            min_y: self.min_y - m,
            max_x: self.max_x + m,
            max_y: self.max_y + m,
        }
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }
}

/// A named drawing layer; only obstacle-active layers block movement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub name: String,
    pub obstacle_active: bool,
}

/// Circle parameters kept alongside a tessellated obstacle so exports can
/// reproduce the original entity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleMarker {
    pub center: Point2,
    pub radius: f64,
}

/// One obstacle: a polyline on a layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub id: u64,
    pub shape: Polyline,
    pub layer: String,
    /// Present when the shape is the canonical tessellation of a circle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub circle: Option<CircleMarker>,
}

/// Canonical 32-gon for a circle; vertex 0 at angle 0.
pub fn tessellate_circle(center: Point2, radius: f64) -> Polyline {
    let vertices = (0..CIRCLE_SEGMENTS)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / CIRCLE_SEGMENTS as f64;
            Point2::xy(center.x + radius * theta.cos(), center.y + radius * theta.sin())
        })
        .collect();
    Polyline { vertices, closed: true }
}

/// The immutable 2D environment: layers + obstacles. Transforms return new
/// values; concurrent reads are safe.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Environment {
    pub layers: Vec<Layer>,
    pub obstacles: Vec<Obstacle>,
    #[serde(skip)]
    segment_index: Option<SegmentIndex>,
}

impl PartialEq for Environment {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers && self.obstacles == other.obstacles
    }
}

/// Geometry selection for transforms.
#[derive(Debug, Clone)]
pub enum Selection {
    Layer(String),
    Ids(Vec<u64>),
}

/// Geometric edit applied to a selection.
#[derive(Debug, Clone)]
pub enum TransformOp {
    Translate { dx: f64, dy: f64 },
    /// Angle in degrees, counter-clockwise about the pivot.
    Rotate { angle_deg: f64, pivot: Point2 },
    Scale { factor: f64, pivot: Point2 },
    Copy,
    Delete,
}

/// Distance or interior-angle measurement.
#[derive(Debug, Clone)]
pub enum Measure {
    Distance { a: Point2, b: Point2 },
    Angle { a: Point2, vertex: Point2, b: Point2 },
}

impl Environment {
    pub fn new(layers: Vec<Layer>, obstacles: Vec<Obstacle>) -> Result<Self, GeometryError> {
        let mut seen = std::collections::HashSet::new();
        for l in &layers {
            if !seen.insert(l.name.clone()) {
                return Err(GeometryError::DuplicateLayer(l.name.clone()));
            }
        }
        for ob in &obstacles {
            if !layers.iter().any(|l| l.name == ob.layer) {
                return Err(GeometryError::UnknownLayer(ob.layer.clone()));
            }
        }
        let mut env = Environment { layers, obstacles, segment_index: None };
        env.rebuild_index();
        Ok(env)
    }

    pub fn empty() -> Self {
        Environment::default()
    }

    /// Bounding box of all obstacle vertices.
    pub fn bbox(&self) -> Rect {
        let mut pts = Vec::new();
        for ob in &self.obstacles {
            pts.extend_from_slice(&ob.shape.vertices);
        }
        Rect::of_points(&pts)
    }

    pub fn layer(&self, name: &str) -> Option<&Layer> {
        self.layers.iter().find(|l| l.name == name)
    }

    pub fn set_layer_active(&mut self, name: &str, active: bool) -> Result<(), GeometryError> {
        match self.layers.iter_mut().find(|l| l.name == name) {
            Some(l) => {
                l.obstacle_active = active;
                Ok(())
            }
            None => Err(GeometryError::UnknownLayer(name.to_string())),
        }
    }

    fn layer_active(&self, name: &str) -> bool {
        self.layer(name).map(|l| l.obstacle_active).unwrap_or(false)
    }

    pub fn next_obstacle_id(&self) -> u64 {
        self.obstacles.iter().map(|o| o.id).max().map_or(1, |m| m + 1)
    }

    /// Call after mutating obstacles or layer flags directly.
    pub fn rebuild_index(&mut self) {
        self.segment_index = Some(SegmentIndex::build(&self.layers, &self.obstacles));
    }

    /// True when a body of the given radius centered at `p` fits: `p` is not
    /// inside any closed active obstacle and clears every active segment by
    /// at least `radius`.
    pub fn walkable(&self, p: Point2, radius: f64) -> bool {
        debug_assert!(radius >= 0.0);
        if let Some(index) = &self.segment_index {
            return index.walkable(self, p, radius);
        }
        self.walkable_scan(p, radius)
    }

    fn walkable_scan(&self, p: Point2, radius: f64) -> bool {
        for ob in &self.obstacles {
            if !self.layer_active(&ob.layer) {
                continue;
            }
            if ob.shape.closed && ob.shape.contains(p) {
                return false;
            }
            for (a, b) in ob.shape.segments() {
                if point_segment_distance(p, a, b) < radius {
                    return false;
                }
            }
        }
        true
    }

    /// Applies a transform to the selected geometry; everything else is
    /// carried over untouched.
    pub fn transform(
        &self,
        selection: &Selection,
        op: &TransformOp,
    ) -> Result<Environment, GeometryError> {
        let selected: Vec<u64> = match selection {
            Selection::Layer(name) => {
                if self.layer(name).is_none() {
                    return Err(GeometryError::UnknownLayer(name.clone()));
                }
                self.obstacles
                    .iter()
                    .filter(|o| &o.layer == name)
                    .map(|o| o.id)
                    .collect()
            }
            Selection::Ids(ids) => {
                for id in ids {
                    if !self.obstacles.iter().any(|o| o.id == *id) {
                        return Err(GeometryError::UnknownObstacle(*id));
                    }
                }
                ids.clone()
            }
        };
        if let TransformOp::Scale { factor, .. } = op {
            if *factor <= 0.0 {
                return Err(GeometryError::BadScaleFactor(*factor));
            }
        }

        let mut env = self.clone();
        match op {
            TransformOp::Delete => {
                env.obstacles.retain(|o| !selected.contains(&o.id));
            }
            TransformOp::Copy => {
                let mut next = env.next_obstacle_id();
                let copies: Vec<Obstacle> = env
                    .obstacles
                    .iter()
                    .filter(|o| selected.contains(&o.id))
                    .cloned()
                    .map(|mut o| {
                        o.id = next;
                        next += 1;
                        o
                    })
                    .collect();
                env.obstacles.extend(copies);
            }
            _ => {
                for ob in env.obstacles.iter_mut() {
                    if selected.contains(&ob.id) {
                        apply_pointwise(ob, op);
                    }
                }
            }
        }
        env.rebuild_index();
        Ok(env)
    }

    /// Ruler / protractor. Distances in meters, angles in degrees within
    /// [0, 180].
    pub fn measure(&self, m: &Measure) -> Result<f64, GeometryError> {
        match m {
            Measure::Distance { a, b } => Ok(a.distance(b)),
            Measure::Angle { a, vertex, b } => {
                let u = (a.x - vertex.x, a.y - vertex.y);
                let v = (b.x - vertex.x, b.y - vertex.y);
                let nu = (u.0 * u.0 + u.1 * u.1).sqrt();
                let nv = (v.0 * v.0 + v.1 * v.1).sqrt();
                if nu < GEOM_EPS || nv < GEOM_EPS {
                    return Err(GeometryError::DegenerateAngle);
                }
                let cos = ((u.0 * v.0 + u.1 * v.1) / (nu * nv)).clamp(-1.0, 1.0);
                Ok(cos.acos().to_degrees())
            }
        }
    }

    /// Same layers and same multiset of obstacle geometry, ignoring ids.
    pub fn congruent(&self, other: &Environment) -> bool {
        if self.layers != other.layers || self.obstacles.len() != other.obstacles.len() {
            return false;
        }
        let mut remaining: Vec<&Obstacle> = other.obstacles.iter().collect();
        for ob in &self.obstacles {
            let pos = remaining.iter().position(|r| {
                r.layer == ob.layer && r.shape == ob.shape && r.circle == ob.circle
            });
            match pos {
                Some(i) => {
                    remaining.swap_remove(i);
                }
                None => return false,
            }
        }
        true
    }
}

fn apply_pointwise(ob: &mut Obstacle, op: &TransformOp) {
    // Circle-backed obstacles transform their parameters and re-tessellate,
    // keeping the canonical vertex layout export relies on.
    if let Some(c) = ob.circle {
        let center = transform_point(c.center, op);
        let radius = match op {
            TransformOp::Scale { factor, .. } => c.radius * factor,
            _ => c.radius,
        };
        ob.circle = Some(CircleMarker { center, radius });
        ob.shape = tessellate_circle(center, radius);
        return;
    }
    for v in ob.shape.vertices.iter_mut() {
        *v = transform_point(*v, op);
    }
}

fn transform_point(p: Point2, op: &TransformOp) -> Point2 {
    match op {
        TransformOp::Translate { dx, dy } => Point2::xy(p.x + dx, p.y + dy),
        TransformOp::Rotate { angle_deg, pivot } => {
            let r = angle_deg.to_radians();
            let (s, c) = r.sin_cos();
            let dx = p.x - pivot.x;
            let dy = p.y - pivot.y;
            Point2::xy(pivot.x + c * dx - s * dy, pivot.y + s * dx + c * dy)
        }
        TransformOp::Scale { factor, pivot } => Point2::xy(
            pivot.x + factor * (p.x - pivot.x),
            pivot.y + factor * (p.y - pivot.y),
        ),
        TransformOp::Copy | TransformOp::Delete => p,
    }
}

pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let abx = b.x - a.x;
    let aby = b.y - a.y;
    let len2 = abx * abx + aby * aby;
    if len2 == 0.0 {
        return p.distance(&a);
    }
    let t = (((p.x - a.x) * abx + (p.y - a.y) * aby) / len2).clamp(0.0, 1.0);
    p.distance(&Point2::xy(a.x + t * abx, a.y + t * aby))
}

/// Proper or touching intersection of two segments.
pub fn segments_intersect(a1: Point2, a2: Point2, b1: Point2, b2: Point2) -> bool {
    fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
        (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
    }
    fn on_segment(a: Point2, b: Point2, p: Point2) -> bool {
        p.x >= a.x.min(b.x) - GEOM_EPS
            && p.x <= a.x.max(b.x) + GEOM_EPS
            && p.y >= a.y.min(b.y) - GEOM_EPS
            && p.y <= a.y.max(b.y) + GEOM_EPS
    }
    let d1 = orient(b1, b2, a1);
    let d2 = orient(b1, b2, a2);
    let d3 = orient(a1, a2, b1);
    let d4 = orient(a1, a2, b2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1.abs() < GEOM_EPS && on_segment(b1, b2, a1))
        || (d2.abs() < GEOM_EPS && on_segment(b1, b2, a2))
        || (d3.abs() < GEOM_EPS && on_segment(a1, a2, b1))
        || (d4.abs() < GEOM_EPS && on_segment(a1, a2, b2))
}

/// Uniform-grid index over active obstacle segments; speeds up walkability
/// queries in environments with many walls.
#[derive(Debug, Clone)]
struct SegmentIndex {
    cell: f64,
    origin: (f64, f64),
    cols: usize,
    rows: usize,
    /// Per cell: indices into `segments`.
    buckets: Vec<Vec<u32>>,
    segments: Vec<(Point2, Point2)>,
    /// Closed polygons on active layers, for containment tests.
    closed: Vec<(Rect, Polyline)>,
    max_query_radius: f64,
}

impl SegmentIndex {
    const CELL: f64 = 2.0;
    const MAX_RADIUS: f64 = 1.0;

    fn build(layers: &[Layer], obstacles: &[Obstacle]) -> Self {
        let active =
            |name: &str| layers.iter().any(|l| l.name == name && l.obstacle_active);
        let mut segments = Vec::new();
        let mut closed = Vec::new();
        let mut pts = Vec::new();
        for ob in obstacles {
            if !active(&ob.layer) {
                continue;
            }
            segments.extend(ob.shape.segments());
            pts.extend_from_slice(&ob.shape.vertices);
            if ob.shape.closed {
                closed.push((ob.shape.bbox(), ob.shape.clone()));
            }
        }
        let bbox = Rect::of_points(&pts).inflate(Self::MAX_RADIUS + Self::CELL);
        let cols = ((bbox.width() / Self::CELL).ceil() as usize).max(1);
        let rows = ((bbox.height() / Self::CELL).ceil() as usize).max(1);
        let mut buckets = vec![Vec::new(); cols * rows];
        for (i, (a, b)) in segments.iter().enumerate() {
            let r = Rect::of_points(&[*a, *b]).inflate(Self::MAX_RADIUS);
            let c0 = (((r.min_x - bbox.min_x) / Self::CELL).floor() as isize).max(0) as usize;
            let c1 = (((r.max_x - bbox.min_x) / Self::CELL).floor() as isize)
                .clamp(0, cols as isize - 1) as usize;
            let r0 = (((r.min_y - bbox.min_y) / Self::CELL).floor() as isize).max(0) as usize;
            let r1 = (((r.max_y - bbox.min_y) / Self::CELL).floor() as isize)
                .clamp(0, rows as isize - 1) as usize;
            for cy in r0..=r1.min(rows - 1) {
                for cx in c0..=c1.min(cols - 1) {
                    buckets[cy * cols + cx].push(i as u32);
                }
            }
        }
        SegmentIndex {
            cell: Self::CELL,
            origin: (bbox.min_x, bbox.min_y),
            cols,
            rows,
            buckets,
            segments,
            closed,
            max_query_radius: Self::MAX_RADIUS,
        }
    }

    fn walkable(&self, env: &Environment, p: Point2, radius: f64) -> bool {
        for (bbox, poly) in &self.closed {
            if bbox.contains(p) && poly.contains(p) {
                return false;
            }
        }
        if self.segments.is_empty() {
            return true;
        }
        if radius > self.max_query_radius {
            // Rare oversized query; fall back to the exact scan.
            return env.walkable_scan(p, radius);
        }
        let cx = ((p.x - self.origin.0) / self.cell).floor() as isize;
        let cy = ((p.y - self.origin.1) / self.cell).floor() as isize;
        if cx < 0 || cy < 0 || cx >= self.cols as isize || cy >= self.rows as isize {
            return true;
        }
        for &i in &self.buckets[cy as usize * self.cols + cx as usize] {
            let (a, b) = self.segments[i as usize];
            if point_segment_distance(p, a, b) < radius {
                return false;
            }
        }
        true
    }
}
