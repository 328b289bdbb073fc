//! Grid navigation fields: 8-connected Dijkstra distances from a target
//! shape, with per-cell descent directions for steering. A density-penalized
//! variant estimates travel time instead of distance.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::agents::Vec2;
use crate::geometry::{point_segment_distance, Environment, Point2, Polyline, Rect};

pub const DEFAULT_NAV_CELL: f64 = 0.25;
/// Jam density for the quickest-time penalty, ped/m².
pub const JAM_DENSITY: f64 = 5.4;
/// Speed floor fraction in congested cells.
pub const MIN_SPEED_FRACTION: f64 = 0.2;

#[derive(Debug, Error)]
pub enum NavError {
    #[error("target '{0}' does not intersect walkable space")]
    TargetBlocked(String),
    #[error("navigation grid for '{0}' would be empty")]
    EmptyGrid(String),
}

/// Shortest-path field toward one target shape. Values are meters for
/// distance fields and seconds for quickest-time fields; unreachable cells
/// hold +inf.
#[derive(Debug, Clone)]
pub struct NavField {
    pub target: String,
    origin: (f64, f64),
    cell: f64,
    cols: usize,
    rows: usize,
    values: Vec<f64>,
    dirs: Vec<Vec2>,
}

impl NavField {
    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    pub fn arrival_tolerance(&self) -> f64 {
        1e-9
    }

    fn cell_of(&self, p: Point2) -> Option<usize> {
        let cx = ((p.x - self.origin.0) / self.cell).floor() as isize;
        let cy = ((p.y - self.origin.1) / self.cell).floor() as isize;
        if cx < 0 || cy < 0 || cx >= self.cols as isize || cy >= self.rows as isize {
            return None;
        }
        Some(cy as usize * self.cols + cx as usize)
    }

    /// Field value at the cell containing `p`; None when outside the grid or
    /// unreachable.
    pub fn distance_at(&self, p: Point2) -> Option<f64> {
        let v = self.values[self.cell_of(p)?];
        v.is_finite().then_some(v)
    }

    /// Unit descent direction at `p`, blended from the four nearest cell
    /// directions. None when the field is infinite there.
    pub fn descent_direction(&self, p: Point2) -> Option<Vec2> {
        self.distance_at(p)?;
        // Bilinear blend over cell-center samples.
        let gx = (p.x - self.origin.0) / self.cell - 0.5;
        let gy = (p.y - self.origin.1) / self.cell - 0.5;
        let x0 = gx.floor() as isize;
        let y0 = gy.floor() as isize;
        let fx = gx - x0 as f64;
        let fy = gy - y0 as f64;
        let mut acc = Vec2::ZERO;
        for (dx, dy, w) in [
            (0, 0, (1.0 - fx) * (1.0 - fy)),
            (1, 0, fx * (1.0 - fy)),
            (0, 1, (1.0 - fx) * fy),
            (1, 1, fx * fy),
        ] {
            let cx = x0 + dx;
            let cy = y0 + dy;
            if cx < 0 || cy < 0 || cx >= self.cols as isize || cy >= self.rows as isize {
                continue;
            }
            let idx = cy as usize * self.cols + cx as usize;
            if self.values[idx].is_finite() {
                acc = acc.add(self.dirs[idx].scaled(w));
            }
        }
        let blended = acc.normalized();
        if blended != Vec2::ZERO {
            return Some(blended);
        }
        // Degenerate blend (e.g. at the target); fall back to the cell dir.
        let idx = self.cell_of(p)?;
        let d = self.dirs[idx];
        (d != Vec2::ZERO).then_some(d)
    }
}

/// Cost model: meters, or seconds with a per-cell density slowdown.
pub enum CostModel<'a> {
    Distance,
    /// Free-flow speed plus a density sample per grid cell index.
    QuickestTime { free_flow_speed: f64, density: &'a dyn Fn(Point2) -> f64 },
}

/// Builds a navigation field over `bounds`.
///
/// Cells are walkable when their center clears obstacles by `clearance`.
/// Target cells (center inside the target polygon, or within a cell of a
/// target line) get value 0.
pub fn build_nav_field(
    env: &Environment,
    target_id: &str,
    target_shape: &Polyline,
    bounds: Rect,
    cell: f64,
    clearance: f64,
    cost: CostModel,
) -> Result<NavField, NavError> {
    let bounds = bounds.union(target_shape.bbox()).inflate(2.0 * cell);
    let cols = ((bounds.width() / cell).ceil() as usize).max(1);
    let rows = ((bounds.height() / cell).ceil() as usize).max(1);
    if cols * rows > 64_000_000 {
        return Err(NavError::EmptyGrid(target_id.to_string()));
    }
    let center = |idx: usize| {
        let cx = idx % cols;
        let cy = idx / cols;
        Point2::xy(
            bounds.min_x + (cx as f64 + 0.5) * cell,
            bounds.min_y + (cy as f64 + 0.5) * cell,
        )
    };

    let mut walkable = vec![false; cols * rows];
    for (idx, w) in walkable.iter_mut().enumerate() {
        *w = env.walkable(center(idx), clearance);
    }

    // Per-cell traversal cost multiplier (seconds per meter for the
    // quickest-time model, 1 for plain distance).
    let cost_at = |p: Point2| -> f64 {
        match &cost {
            CostModel::Distance => 1.0,
            CostModel::QuickestTime { free_flow_speed, density } => {
                let rho = density(p);
                let fraction = (1.0 - rho / JAM_DENSITY).max(MIN_SPEED_FRACTION);
                1.0 / (free_flow_speed * fraction)
            }
        }
    };

    let mut values = vec![f64::INFINITY; cols * rows];
    let mut heap: BinaryHeap<Reverse<(HeapKey, u32)>> = BinaryHeap::new();
    let mut seeded = false;
    let target_bbox = target_shape.bbox().inflate(cell);
    for idx in 0..cols * rows {
        if !walkable[idx] {
            continue;
        }
        let c = center(idx);
        if !target_bbox.contains(c) {
            continue;
        }
        let on_target = if target_shape.closed {
            target_shape.contains(c)
        } else {
            target_shape
                .segments()
                .iter()
                .any(|(a, b)| point_segment_distance(c, *a, *b) <= cell)
        };
        if on_target {
            values[idx] = 0.0;
            heap.push(Reverse((HeapKey(0.0), idx as u32)));
            seeded = true;
        }
    }
    if !seeded {
        return Err(NavError::TargetBlocked(target_id.to_string()));
    }

    const NEIGHBORS: [(isize, isize, f64); 8] = [
        (1, 0, 1.0),
        (-1, 0, 1.0),
        (0, 1, 1.0),
        (0, -1, 1.0),
        (1, 1, std::f64::consts::SQRT_2),
        (1, -1, std::f64::consts::SQRT_2),
        (-1, 1, std::f64::consts::SQRT_2),
        (-1, -1, std::f64::consts::SQRT_2),
    ];

    while let Some(Reverse((HeapKey(d), idx))) = heap.pop() {
        let idx = idx as usize;
        if d > values[idx] {
            continue;
        }
        let cx = (idx % cols) as isize;
        let cy = (idx / cols) as isize;
        for (dx, dy, step) in NEIGHBORS {
            let nx = cx + dx;
            let ny = cy + dy;
            if nx < 0 || ny < 0 || nx >= cols as isize || ny >= rows as isize {
                continue;
            }
            let nidx = ny as usize * cols + nx as usize;
            if !walkable[nidx] {
                continue;
            }
            // Edge cost uses the multiplier of the cell being entered.
            let nd = d + step * cell * cost_at(center(nidx));
            if nd < values[nidx] {
                values[nidx] = nd;
                heap.push(Reverse((HeapKey(nd), nidx as u32)));
            }
        }
    }

    // Per-cell descent direction: toward the best 8-neighbor.
    let mut dirs = vec![Vec2::ZERO; cols * rows];
    for idx in 0..cols * rows {
        if !values[idx].is_finite() || values[idx] == 0.0 {
            continue;
        }
        let cx = (idx % cols) as isize;
        let cy = (idx / cols) as isize;
        let mut best: Option<(f64, Vec2)> = None;
        for (dx, dy, step) in NEIGHBORS {
            let nx = cx + dx;
            let ny = cy + dy;
            if nx < 0 || ny < 0 || nx >= cols as isize || ny >= rows as isize {
                continue;
            }
            let nidx = ny as usize * cols + nx as usize;
            if !values[nidx].is_finite() {
                continue;
            }
            // Rank by value plus the step to get there, so far-but-low cells
            // do not beat adjacent target cells.
            let score = values[nidx] + step * cell * 1e-6;
            if best.map_or(true, |(s, _)| score < s) && values[nidx] < values[idx] {
                best = Some((score, Vec2::new(dx as f64, dy as f64).normalized()));
            }
        }
        if let Some((_, dir)) = best {
            dirs[idx] = dir;
        }
    }

    Ok(NavField {
        target: target_id.to_string(),
        origin: (bounds.min_x, bounds.min_y),
        cell,
        cols,
        rows,
        values,
        dirs,
    })
}

/// f64 ordering key for the Dijkstra heap (values are never NaN).
#[derive(PartialEq)]
struct HeapKey(f64);

impl Eq for HeapKey {}

impl PartialOrd for HeapKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Layer, Obstacle};

    fn open_bounds() -> Rect {
        Rect { min_x: 0.0, min_y: 0.0, max_x: 10.0, max_y: 10.0 }
    }

    fn target_square(x: f64, y: f64, side: f64) -> Polyline {
        Polyline::closed(vec![
            Point2::xy(x, y),
            Point2::xy(x + side, y),
            Point2::xy(x + side, y + side),
            Point2::xy(x, y + side),
        ])
        .unwrap()
    }

    /// Independent brute-force Dijkstra on a finer grid, plain arrays.
    fn oracle_distance(env: &Environment, target: &Polyline, probe: Point2, cell: f64) -> f64 {
        let bounds = Rect { min_x: -1.0, min_y: -1.0, max_x: 11.0, max_y: 11.0 };
        let cols = (bounds.width() / cell).ceil() as usize;
        let rows = (bounds.height() / cell).ceil() as usize;
        let center = |i: usize| {
            Point2::xy(
                bounds.min_x + (i % cols) as f64 * cell + cell / 2.0,
                bounds.min_y + (i / cols) as f64 * cell + cell / 2.0,
            )
        };
        let mut dist = vec![f64::INFINITY; cols * rows];
        let mut heap = BinaryHeap::new();
        for i in 0..cols * rows {
            if target.contains(center(i)) {
                dist[i] = 0.0;
                heap.push(Reverse((HeapKey(0.0), i as u32)));
            }
        }
        while let Some(Reverse((HeapKey(d), i))) = heap.pop() {
            let i = i as usize;
            if d > dist[i] {
                continue;
            }
            let (cx, cy) = ((i % cols) as isize, (i / cols) as isize);
            for dx in -1isize..=1 {
                for dy in -1isize..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (nx, ny) = (cx + dx, cy + dy);
                    if nx < 0 || ny < 0 || nx >= cols as isize || ny >= rows as isize {
                        continue;
                    }
                    let ni = ny as usize * cols + nx as usize;
                    if !env.walkable(center(ni), 0.0) {
                        continue;
                    }
                    let step = ((dx * dx + dy * dy) as f64).sqrt() * cell;
                    if d + step < dist[ni] {
                        dist[ni] = d + step;
                        heap.push(Reverse((HeapKey(d + step), ni as u32)));
                    }
                }
            }
        }
        let pi = ((probe.y - bounds.min_y) / cell) as usize * cols
            + ((probe.x - bounds.min_x) / cell) as usize;
        dist[pi]
    }

    #[test]
    fn empty_field_distance_matches_oracle() {
        let env = Environment::empty();
        let target = target_square(0.0, 0.0, 0.25);
        let field = build_nav_field(
            &env,
            "t",
            &target,
            open_bounds(),
            0.25,
            0.0,
            CostModel::Distance,
        )
        .unwrap();
        let probe = Point2::xy(9.75, 0.125);
        let d = field.distance_at(probe).unwrap();
        assert!((d - 9.75).abs() / 9.75 < 0.03, "field distance {d} vs 9.75");
        let oracle = oracle_distance(&env, &target, probe, 0.0625);
        assert!((d - oracle).abs() / oracle < 0.03, "field {d} vs oracle {oracle}");
    }

    #[test]
    fn distance_is_zero_at_target() {
        let env = Environment::empty();
        let target = target_square(4.0, 4.0, 1.0);
        let field =
            build_nav_field(&env, "t", &target, open_bounds(), 0.25, 0.0, CostModel::Distance)
                .unwrap();
        assert_eq!(field.distance_at(Point2::xy(4.5, 4.5)), Some(0.0));
    }

    #[test]
    fn sealed_room_is_unreachable() {
        let walls = target_square(2.0, 2.0, 2.0);
        let env = Environment::new(
            vec![Layer { name: "w".into(), obstacle_active: true }],
            vec![Obstacle { id: 1, shape: walls, layer: "w".into(), circle: None }],
        )
        .unwrap();
        let target = target_square(8.0, 8.0, 0.5);
        let field =
            build_nav_field(&env, "t", &target, open_bounds(), 0.25, 0.05, CostModel::Distance)
                .unwrap();
        // Inside the sealed square: unreachable.
        assert_eq!(field.distance_at(Point2::xy(3.0, 3.0)), None);
        // Outside: reachable.
        assert!(field.distance_at(Point2::xy(1.0, 1.0)).is_some());
    }

    #[test]
    fn blocked_target_errors() {
        let walls = target_square(2.0, 2.0, 2.0);
        let env = Environment::new(
            vec![Layer { name: "w".into(), obstacle_active: true }],
            vec![Obstacle { id: 1, shape: walls, layer: "w".into(), circle: None }],
        )
        .unwrap();
        // Target strictly inside an obstacle: every candidate cell is
        // unwalkable.
        let target = target_square(2.8, 2.8, 0.4);
        let r = build_nav_field(&env, "t", &target, open_bounds(), 0.25, 0.0, CostModel::Distance);
        assert!(matches!(r, Err(NavError::TargetBlocked(_))));
    }

    #[test]
    fn descent_direction_points_at_target_in_open_space() {
        let env = Environment::empty();
        let target = target_square(9.0, 4.5, 1.0);
        let field =
            build_nav_field(&env, "t", &target, open_bounds(), 0.25, 0.0, CostModel::Distance)
                .unwrap();
        let dir = field.descent_direction(Point2::xy(1.0, 5.0)).unwrap();
        assert!(dir.x > 0.9, "direction {dir:?} should be mostly +x");
        assert!(dir.y.abs() < 0.5);
    }

    #[test]
    fn quickest_time_penalizes_dense_cells() {
        let env = Environment::empty();
        let target = target_square(9.0, 4.5, 1.0);
        let free = |_: Point2| 0.0;
        let jammed = |_: Point2| 4.0; // near jam density
        let fast = build_nav_field(
            &env,
            "t",
            &target,
            open_bounds(),
            0.25,
            0.0,
            CostModel::QuickestTime { free_flow_speed: 1.34, density: &free },
        )
        .unwrap();
        let slow = build_nav_field(
            &env,
            "t",
            &target,
            open_bounds(),
            0.25,
            0.0,
            CostModel::QuickestTime { free_flow_speed: 1.34, density: &jammed },
        )
        .unwrap();
        let p = Point2::xy(1.0, 5.0);
        let t_fast = fast.distance_at(p).unwrap();
        let t_slow = slow.distance_at(p).unwrap();
        assert!(t_slow > t_fast * 2.0, "jammed {t_slow} vs free {t_fast}");
        // Free-flow time approximates distance / speed.
        assert!((t_fast - 8.0 / 1.34).abs() / (8.0 / 1.34) < 0.1);
    }
}
