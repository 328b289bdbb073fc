//! Map rendering to binary PPM (P6): density / utilization grids, time
//! maps, agent trails and stamped frame sequences, plus color ramps and
//! entity color schemes. Output is bit-exact for identical inputs.

mod font;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::Action;
use crate::analysis::{last_occupied_grid, GridSpec, ScalarGrid};
use crate::engine::trace::Trace;
use crate::geometry::{Environment, Point2, Rect};
use crate::scenario::PedFilter;
use font::{glyph, GLYPH_ADVANCE, GLYPH_HEIGHT, GLYPH_WIDTH};

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("color ramp stops must strictly increase")]
    BadRamp,
    #[error("image would be empty")]
    EmptyImage,
}

pub type Rgb = [u8; 3];

pub const NEUTRAL_GRAY: Rgb = [128, 128, 128];
const BACKGROUND: Rgb = [255, 255, 255];
const OBSTACLE_COLOR: Rgb = [64, 64, 64];
const TEXT_COLOR: Rgb = [0, 0, 0];

/// Distinct colors for tracked entities.
pub const ENTITY_PALETTE: [Rgb; 8] = [
    [230, 25, 75],
    [60, 120, 220],
    [60, 160, 60],
    [245, 130, 48],
    [145, 30, 180],
    [0, 150, 150],
    [220, 180, 0],
    [120, 80, 40],
];

/// Value-to-color mapping with linear interpolation between stops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorRamp {
    pub stops: Vec<(f64, Rgb)>,
}

impl ColorRamp {
    pub fn new(stops: Vec<(f64, Rgb)>) -> Result<Self, RenderError> {
        if stops.is_empty() || stops.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(RenderError::BadRamp);
        }
        Ok(ColorRamp { stops })
    }

    /// White through green, yellow and red to purple at 0 / 0.5 / 1 / 2 / 4
    /// ped/m².
    pub fn density_default() -> Self {
        ColorRamp {
            stops: vec![
                (0.0, [255, 255, 255]),
                (0.5, [0, 200, 0]),
                (1.0, [255, 255, 0]),
                (2.0, [255, 0, 0]),
                (4.0, [128, 0, 128]),
            ],
        }
    }

    /// Cool-to-warm ramp spanning [0, horizon] for time maps.
    pub fn time_default(horizon: f64) -> Self {
        let h = horizon.max(1e-9);
        ColorRamp {
            stops: vec![
                (0.0, [70, 130, 180]),
                (h / 2.0, [255, 165, 0]),
                (h, [220, 20, 60]),
            ],
        }
    }

    /// Clamped, linearly interpolated lookup.
    pub fn sample(&self, value: f64) -> Rgb {
        let first = self.stops.first().unwrap();
        let last = self.stops.last().unwrap();
        if value <= first.0 {
            return first.1;
        }
        if value >= last.0 {
            return last.1;
        }
        for w in self.stops.windows(2) {
            let (v0, c0) = w[0];
            let (v1, c1) = w[1];
            if value <= v1 {
                let t = (value - v0) / (v1 - v0);
                let mix = |a: u8, b: u8| (a as f64 + t * (b as f64 - a as f64)).round() as u8;
                return [mix(c0[0], c1[0]), mix(c0[1], c1[1]), mix(c0[2], c1[2])];
            }
        }
        last.1
    }

    pub fn min_value(&self) -> f64 {
        self.stops.first().unwrap().0
    }

    pub fn max_value(&self) -> f64 {
        self.stops.last().unwrap().0
    }
}

/// RGB raster tied to world coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct MapImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<Rgb>,
    pub meters_per_pixel: f64,
    /// World coordinates of the bottom-left image corner.
    pub origin: (f64, f64),
}

impl MapImage {
    pub fn filled(width: usize, height: usize, color: Rgb) -> Self {
        MapImage {
            width,
            height,
            pixels: vec![color; width * height],
            meters_per_pixel: 1.0,
            origin: (0.0, 0.0),
        }
    }

    pub fn get(&self, x: usize, y: usize) -> Rgb {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, color: Rgb) {
        if x < self.width && y < self.height {
            self.pixels[y * self.width + x] = color;
        }
    }

    /// Binary PPM (P6, maxval 255).
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.reserve(self.pixels.len() * 3);
        for px in &self.pixels {
            out.extend_from_slice(px);
        }
        out
    }

    /// Image pixel of a world point; None when outside the raster.
    fn pixel_of(&self, p: Point2) -> Option<(usize, usize)> {
        let px = ((p.x - self.origin.0) / self.meters_per_pixel).floor() as isize;
        let py_up = ((p.y - self.origin.1) / self.meters_per_pixel).floor() as isize;
        if px < 0 || py_up < 0 || px >= self.width as isize || py_up >= self.height as isize {
            return None;
        }
        Some((px as usize, self.height - 1 - py_up as usize))
    }

    fn draw_text(&mut self, x: usize, y: usize, text: &str, color: Rgb) {
        for (i, c) in text.chars().enumerate() {
            let g = glyph(c);
            let gx = x + i * GLYPH_ADVANCE;
            for (row, bits) in g.iter().enumerate() {
                for col in 0..GLYPH_WIDTH {
                    if bits & (1 << (GLYPH_WIDTH - 1 - col)) != 0 {
                        self.set(gx + col, y + row, color);
                    }
                }
            }
        }
    }

    fn draw_segment(&mut self, a: Point2, b: Point2, color: Rgb) {
        // Sample along the segment at sub-pixel steps.
        let steps = ((a.distance(&b) / self.meters_per_pixel) * 2.0).ceil() as usize + 1;
        for k in 0..=steps {
            let t = k as f64 / steps as f64;
            let p = Point2::xy(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y));
            if let Some((x, y)) = self.pixel_of(p) {
                self.set(x, y, color);
            }
        }
    }

    fn draw_disc(&mut self, center: Point2, radius_m: f64, color: Rgb) {
        let r_px = (radius_m / self.meters_per_pixel).ceil() as isize;
        let Some((cx, cy)) = self.pixel_of(center) else { return };
        for dy in -r_px..=r_px {
            for dx in -r_px..=r_px {
                let x = cx as isize + dx;
                let y = cy as isize + dy;
                if x < 0 || y < 0 {
                    continue;
                }
                let wx = dx as f64 * self.meters_per_pixel;
                let wy = dy as f64 * self.meters_per_pixel;
                if wx * wx + wy * wy <= radius_m * radius_m {
                    self.set(x as usize, y as usize, color);
                }
            }
        }
    }

    fn draw_obstacles(&mut self, env: &Environment) {
        for ob in &env.obstacles {
            for (a, b) in ob.shape.segments() {
                self.draw_segment(a, b, OBSTACLE_COLOR);
            }
        }
    }
}

const LEGEND_WIDTH: usize = 64;
const LEGEND_BAR_WIDTH: usize = 10;

/// Renders a scalar grid through a ramp, one square block per cell, with an
/// optional labeled legend strip on the right.
pub fn render_density_map(
    grid: &ScalarGrid,
    ramp: &ColorRamp,
    legend: bool,
    pixels_per_cell: usize,
) -> Result<MapImage, RenderError> {
    let ppc = pixels_per_cell.max(1);
    let spec = grid.spec;
    if spec.cols == 0 || spec.rows == 0 {
        return Err(RenderError::EmptyImage);
    }
    let map_w = spec.cols * ppc;
    let map_h = spec.rows * ppc;
    let width = map_w + if legend { LEGEND_WIDTH } else { 0 };
    let mut img = MapImage::filled(width, map_h, BACKGROUND);
    img.meters_per_pixel = spec.cell / ppc as f64;
    img.origin = (spec.min_x, spec.min_y);

    for cy in 0..spec.rows {
        for cx in 0..spec.cols {
            let v = grid.values[cy * spec.cols + cx];
            let color = if v.is_nan() { NEUTRAL_GRAY } else { ramp.sample(v) };
            // Grid row 0 is the bottom; image row 0 is the top.
            let top = map_h - (cy + 1) * ppc;
            for py in 0..ppc {
                for px in 0..ppc {
                    img.set(cx * ppc + px, top + py, color);
                }
            }
        }
    }

    if legend {
        draw_legend(&mut img, map_w, ramp);
    }
    Ok(img)
}

fn draw_legend(img: &mut MapImage, x0: usize, ramp: &ColorRamp) {
    let h = img.height;
    let lo = ramp.min_value();
    let hi = ramp.max_value();
    let span = (hi - lo).max(1e-12);
    // Vertical gradient bar, max at the top.
    for y in 0..h {
        let v = hi - (y as f64 + 0.5) / h as f64 * span;
        let color = ramp.sample(v);
        for x in 0..LEGEND_BAR_WIDTH {
            img.set(x0 + 2 + x, y, color);
        }
    }
    // Stop labels, 2 decimals.
    for (value, _) in ramp.stops.clone() {
        let y = ((hi - value) / span * (h as f64 - 1.0)).round() as usize;
        let y = y.min(h.saturating_sub(GLYPH_HEIGHT));
        img.draw_text(x0 + LEGEND_BAR_WIDTH + 6, y, &format!("{value:.2}"), TEXT_COLOR);
    }
}

/// Time map: cell color encodes when it was last occupied; never-occupied
/// cells (and, with a threshold, cells last used at or before it) stay
/// neutral gray.
pub fn render_time_map(
    trace: &Trace,
    spec: GridSpec,
    horizon: f64,
    threshold: Option<f64>,
    pixels_per_cell: usize,
) -> Result<MapImage, RenderError> {
    let ramp = ColorRamp::time_default(horizon);
    let last = last_occupied_grid(trace, spec, (0.0, horizon));
    let values: Vec<f64> = last
        .values
        .iter()
        .map(|v| {
            if v.is_nan() {
                f64::NAN
            } else if threshold.map_or(false, |thr| *v <= thr) {
                f64::NAN
            } else {
                *v
            }
        })
        .collect();
    render_density_map(&ScalarGrid { spec, values }, &ramp, false, pixels_per_cell)
}

/// How trail and frame colors are assigned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColorScheme {
    ByAgent,
    ByType,
    ByAction,
}

fn entity_color(scheme: ColorScheme, agent: u64, type_idx: usize, action: Action) -> Rgb {
    let idx = match scheme {
        ColorScheme::ByAgent => agent as usize,
        ColorScheme::ByType => type_idx,
        ColorScheme::ByAction => action as usize,
    };
    ENTITY_PALETTE[idx % ENTITY_PALETTE.len()]
}

/// World-window raster parameters for trail and frame rendering.
#[derive(Debug, Clone, Copy)]
pub struct Viewport {
    pub bounds: Rect,
    pub meters_per_pixel: f64,
}

impl Viewport {
    fn image(&self) -> Result<MapImage, RenderError> {
        let w = (self.bounds.width() / self.meters_per_pixel).ceil() as usize;
        let h = (self.bounds.height() / self.meters_per_pixel).ceil() as usize;
        if w == 0 || h == 0 {
            return Err(RenderError::EmptyImage);
        }
        let mut img = MapImage::filled(w, h, BACKGROUND);
        img.meters_per_pixel = self.meters_per_pixel;
        img.origin = (self.bounds.min_x, self.bounds.min_y);
        Ok(img)
    }
}

/// Draws each selected agent's path over the window as a colored polyline.
pub fn render_trails(
    trace: &Trace,
    env: &Environment,
    filter: &PedFilter,
    window: (f64, f64),
    viewport: Viewport,
    scheme: ColorScheme,
) -> Result<MapImage, RenderError> {
    let mut img = viewport.image()?;
    img.draw_obstacles(env);
    for agent in trace.agent_ids() {
        let samples = trace.agent_samples(agent);
        let in_window: Vec<_> = samples
            .iter()
            .filter(|(t, _)| *t >= window.0 - 1e-9 && *t <= window.1 + 1e-9)
            .collect();
        if in_window.is_empty() {
            continue;
        }
        // Filter on the agent's first in-window sample.
        let (_, first) = in_window[0];
        let type_ok = filter
            .type_name
            .as_deref()
            .map_or(true, |t| trace.type_name(first.type_idx) == t);
        let action_ok = filter.action.map_or(true, |a| in_window.iter().any(|(_, r)| r.action == a));
        if !type_ok || !action_ok {
            continue;
        }
        let color = entity_color(scheme, agent, first.type_idx, first.action);
        for w in in_window.windows(2) {
            let (_, r0) = w[0];
            let (_, r1) = w[1];
            img.draw_segment(r0.position(), r1.position(), color);
        }
    }
    Ok(img)
}

/// Renders the simulation state at `t` (agents as discs, walls, optional
/// time stamp).
pub fn render_frame(
    trace: &Trace,
    env: &Environment,
    t: f64,
    stamp: bool,
    viewport: Viewport,
    scheme: ColorScheme,
) -> Result<MapImage, RenderError> {
    let mut img = viewport.image()?;
    img.draw_obstacles(env);
    let frame = trace
        .frames
        .iter()
        .rev()
        .find(|f| f.time <= t + 1e-9)
        .or_else(|| trace.frames.first());
    if let Some(frame) = frame {
        for row in &frame.rows {
            let color = entity_color(scheme, row.agent, row.type_idx, row.action);
            img.draw_disc(row.position(), 0.23, color);
        }
    }
    if stamp {
        img.draw_text(2, 2, &format_time_stamp(t), TEXT_COLOR);
    }
    Ok(img)
}

/// `T=0061.5 s` for t = 61.5.
pub fn format_time_stamp(t: f64) -> String {
    format!("T={t:06.1} s")
}

/// Frame files at t = every, 2*every, ... up to the trace duration, named
/// `frame_000001.ppm` onward.
pub fn emit_frames(
    trace: &Trace,
    env: &Environment,
    every: f64,
    stamp: bool,
    viewport: Viewport,
    scheme: ColorScheme,
) -> Result<Vec<(String, MapImage)>, RenderError> {
    let mut out = Vec::new();
    if every <= 0.0 {
        return Ok(out);
    }
    let duration = trace.duration();
    let mut k = 1u64;
    while k as f64 * every <= duration + 1e-9 {
        let t = k as f64 * every;
        let img = render_frame(trace, env, t, stamp, viewport, scheme)?;
        out.push((format!("frame_{k:06}.ppm"), img));
        k += 1;
    }
    Ok(out)
}
