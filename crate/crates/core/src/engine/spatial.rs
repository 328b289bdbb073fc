//! Uniform-grid spatial hash for neighbor queries over many agents.
//! Rebuilt every tick; queries return a superset of the agents within the
//! requested radius (callers do the exact distance test).

use crate::geometry::{Point2, Rect};

#[derive(Debug)]
pub struct SpatialHash {
    origin: (f64, f64),
    cell: f64,
    cols: usize,
    rows: usize,
    cells: Vec<Vec<u32>>,
    occupied: Vec<u32>,
}

impl SpatialHash {
    pub fn new(bounds: Rect, cell: f64) -> Self {
        let bounds = bounds.inflate(cell);
        let cols = ((bounds.width() / cell).ceil() as usize).max(1);
        let rows = ((bounds.height() / cell).ceil() as usize).max(1);
        SpatialHash {
            origin: (bounds.min_x, bounds.min_y),
            cell,
            cols,
            rows,
            cells: vec![Vec::new(); cols * rows],
            occupied: Vec::new(),
        }
    }

    fn cell_index(&self, p: Point2) -> usize {
        let cx = (((p.x - self.origin.0) / self.cell).floor() as isize)
            .clamp(0, self.cols as isize - 1) as usize;
        let cy = (((p.y - self.origin.1) / self.cell).floor() as isize)
            .clamp(0, self.rows as isize - 1) as usize;
        cy * self.cols + cx
    }

    pub fn rebuild(&mut self, positions: impl Iterator<Item = (u32, Point2)>) {
        for &idx in &self.occupied {
            self.cells[idx as usize].clear();
        }
        self.occupied.clear();
        for (id, p) in positions {
            self.insert(id, p);
        }
    }

    pub fn insert(&mut self, id: u32, p: Point2) {
        let idx = self.cell_index(p);
        if self.cells[idx].is_empty() {
            self.occupied.push(idx as u32);
        }
        self.cells[idx].push(id);
    }

    /// Appends every stored id whose cell overlaps the disc (center, radius).
    pub fn query_into(&self, center: Point2, radius: f64, out: &mut Vec<u32>) {
        let r = radius.max(0.0);
        let cx0 = (((center.x - r - self.origin.0) / self.cell).floor() as isize)
            .clamp(0, self.cols as isize - 1) as usize;
        let cx1 = (((center.x + r - self.origin.0) / self.cell).floor() as isize)
            .clamp(0, self.cols as isize - 1) as usize;
        let cy0 = (((center.y - r - self.origin.1) / self.cell).floor() as isize)
            .clamp(0, self.rows as isize - 1) as usize;
        let cy1 = (((center.y + r - self.origin.1) / self.cell).floor() as isize)
            .clamp(0, self.rows as isize - 1) as usize;
        for cy in cy0..=cy1 {
            for cx in cx0..=cx1 {
                out.extend_from_slice(&self.cells[cy * self.cols + cx]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn query_superset_matches_quadratic_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let bounds = Rect { min_x: 0.0, min_y: 0.0, max_x: 20.0, max_y: 20.0 };
        let positions: Vec<Point2> = (0..300)
            .map(|_| Point2::xy(rng.gen::<f64>() * 20.0, rng.gen::<f64>() * 20.0))
            .collect();
        let mut hash = SpatialHash::new(bounds, 0.9);
        hash.rebuild(positions.iter().enumerate().map(|(i, p)| (i as u32, *p)));

        let mut out = Vec::new();
        for qi in 0..50 {
            let center = positions[qi * 6];
            for radius in [0.5, 1.0, 3.0] {
                out.clear();
                hash.query_into(center, radius, &mut out);
                for (i, p) in positions.iter().enumerate() {
                    if p.distance(&center) <= radius {
                        assert!(
                            out.contains(&(i as u32)),
                            "agent {i} within {radius} missing from query"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn rebuild_clears_previous_tick() {
        let bounds = Rect { min_x: 0.0, min_y: 0.0, max_x: 10.0, max_y: 10.0 };
        let mut hash = SpatialHash::new(bounds, 1.0);
        hash.rebuild([(0u32, Point2::xy(1.0, 1.0))].into_iter());
        hash.rebuild([(1u32, Point2::xy(9.0, 9.0))].into_iter());
        let mut out = Vec::new();
        hash.query_into(Point2::xy(1.0, 1.0), 1.5, &mut out);
        assert!(out.is_empty());
        out.clear();
        hash.query_into(Point2::xy(9.0, 9.0), 1.5, &mut out);
        assert_eq!(out, vec![1]);
    }
}
