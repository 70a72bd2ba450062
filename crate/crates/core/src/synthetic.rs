//! Seeded synthetic scenes for end-to-end checks and demos.
//!
//! Scenes are built by rejection sampling. Lines keep clear of patch corners,
//! never run along a patch border, do not end right next to one, and stay a
//! minimum distance from each other, so every border crossing is a clean
//! transversal cut.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LineCategory, LineRecord, LineType, Point2, VectorMap, DEFAULT_METERS_PER_PIXEL, DEFAULT_PATCH_SIZE};
use crate::stitch::tile_offsets;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SceneStyle {
    /// Straight lines at 0, 45, 90 or 135 degrees through integer vertices.
    /// Rounding such lines to whole pixels never moves them sideways.
    Octilinear,
    /// Gentle circular arcs whose heading stays at least 10 degrees away
    /// from both axes.
    Curved,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub width_px: u32,
    pub height_px: u32,
    pub lines: usize,
    pub seed: u64,
    pub style: SceneStyle,
    pub patch_size_px: u32,
    /// Distance kept from patch borders (endpoints, parallel runs) and corners.
    pub clearance_px: f64,
    /// Minimum distance between any two lines.
    pub separation_px: f64,
    pub meters_per_pixel: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            width_px: 4096,
            height_px: 4096,
            lines: 220,
            seed: 0,
            style: SceneStyle::Octilinear,
            patch_size_px: DEFAULT_PATCH_SIZE,
            clearance_px: 10.0,
            separation_px: 12.0,
            meters_per_pixel: DEFAULT_METERS_PER_PIXEL,
        }
    }
}

/// Interior coordinates where patch regions begin or end along one axis.
pub fn border_positions(len: u32, size: u32) -> Vec<f64> {
    let mut out: Vec<f64> = tile_offsets(len, size)
        .into_iter()
        .flat_map(|o| [o, o + size])
        .filter(|&v| v > 0 && v < len)
        .map(f64::from)
        .collect();
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Number of lines that cross at least one patch border.
pub fn count_border_crossing(map: &VectorMap, size: u32) -> usize {
    let bx = border_positions(map.width_px, size);
    let by = border_positions(map.height_px, size);
    let crosses = |vals: &mut dyn Iterator<Item = f64>, borders: &[f64]| {
        let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        borders.iter().any(|&b| lo < b && b < hi)
    };
    map.lines
        .iter()
        .filter(|l| {
            crosses(&mut l.points.iter().map(|p| p.x), &bx) || crosses(&mut l.points.iter().map(|p| p.y), &by)
        })
        .count()
}

fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0)
    };
    p.distance(&Point2::new(a.x + t * dx, a.y + t * dy))
}

fn cross(o: Point2, a: Point2, b: Point2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn segment_distance(a: Point2, b: Point2, c: Point2, d: Point2) -> f64 {
    let (d1, d2) = (cross(a, b, c), cross(a, b, d));
    let (d3, d4) = (cross(c, d, a), cross(c, d, b));
    if d1 * d2 < 0.0 && d3 * d4 < 0.0 {
        return 0.0;
    }
    point_segment_distance(a, c, d)
        .min(point_segment_distance(b, c, d))
        .min(point_segment_distance(c, a, b))
        .min(point_segment_distance(d, a, b))
}

#[derive(Clone, Copy)]
struct Bbox {
    min: Point2,
    max: Point2,
}

impl Bbox {
    fn of(points: &[Point2]) -> Bbox {
        let mut b = Bbox {
            min: Point2::new(f64::INFINITY, f64::INFINITY),
            max: Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        };
        for p in points {
            b.min = Point2::new(b.min.x.min(p.x), b.min.y.min(p.y));
            b.max = Point2::new(b.max.x.max(p.x), b.max.y.max(p.y));
        }
        b
    }

    fn gap(&self, o: &Bbox) -> f64 {
        let dx = (o.min.x - self.max.x).max(self.min.x - o.max.x).max(0.0);
        let dy = (o.min.y - self.max.y).max(self.min.y - o.max.y).max(0.0);
        dx.hypot(dy)
    }
}

struct Placer<'a> {
    cfg: &'a SceneConfig,
    bx: Vec<f64>,
    by: Vec<f64>,
    placed: Vec<(Vec<Point2>, Bbox)>,
}

impl Placer<'_> {
    fn acceptable(&self, pts: &[Point2]) -> bool {
        let c = self.cfg.clearance_px;
        let (w, h) = (f64::from(self.cfg.width_px), f64::from(self.cfg.height_px));
        if pts.iter().any(|p| p.x < c || p.y < c || p.x > w - c || p.y > h - c) {
            return false;
        }
        let near = |v: f64, borders: &[f64]| borders.iter().any(|&b| (v - b).abs() < c);
        for p in [pts[0], pts[pts.len() - 1]] {
            if near(p.x, &self.bx) || near(p.y, &self.by) {
                return false;
            }
        }
        for s in pts.windows(2) {
            if s[0].y == s[1].y && near(s[0].y, &self.by) {
                return false;
            }
            if s[0].x == s[1].x && near(s[0].x, &self.bx) {
                return false;
            }
            for &x in &self.bx {
                for &y in &self.by {
                    if point_segment_distance(Point2::new(x, y), s[0], s[1]) < c {
                        return false;
                    }
                }
            }
        }
        let bb = Bbox::of(pts);
        let sep = self.cfg.separation_px;
        self.placed.iter().all(|(other, obb)| {
            bb.gap(obb) >= sep
                || pts.windows(2).all(|s| {
                    other
                        .windows(2)
                        .all(|o| segment_distance(s[0], s[1], o[0], o[1]) >= sep)
                })
        })
    }
}

fn octilinear_candidate(rng: &mut ChaCha8Rng, w: u32, h: u32) -> Vec<Point2> {
    const DIRS: [(f64, f64); 4] = [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, -1.0)];
    let (mut dx, mut dy) = DIRS[rng.random_range(0..DIRS.len())];
    if rng.random_bool(0.5) {
        dx = -dx;
        dy = -dy;
    }
    let k = if dx != 0.0 && dy != 0.0 {
        rng.random_range(150..=1000)
    } else {
        rng.random_range(200..=1400)
    };
    let a = Point2::new(f64::from(rng.random_range(0..=w)), f64::from(rng.random_range(0..=h)));
    let k = f64::from(k);
    vec![a, Point2::new(a.x + dx * k, a.y + dy * k)]
}

fn curved_candidate(rng: &mut ChaCha8Rng, w: u32, h: u32) -> Vec<Point2> {
    const MARGIN: f64 = 10.0;
    let quadrant = f64::from(rng.random_range(0..4u8)) * 90.0;
    let length: f64 = rng.random_range(300.0..1500.0);
    let radius: f64 = rng.random_range(1500.0..5000.0);
    let turn_deg = (length / radius).to_degrees() * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    // Pick a start heading so the whole arc stays inside [MARGIN, 90 - MARGIN].
    let (lo, hi) = (MARGIN + (-turn_deg).max(0.0), 90.0 - MARGIN - turn_deg.max(0.0));
    if lo >= hi {
        return Vec::new();
    }
    let heading = (quadrant + rng.random_range(lo..hi)).to_radians();
    let kappa = turn_deg.to_radians() / length;
    let a = Point2::new(rng.random_range(0.0..f64::from(w)), rng.random_range(0.0..f64::from(h)));
    let n = (length / 10.0).ceil() as usize;
    (0..=n)
        .map(|i| {
            let s = length * i as f64 / n as f64;
            let phi = heading + kappa * s;
            if kappa == 0.0 {
                Point2::new(a.x + s * heading.cos(), a.y + s * heading.sin())
            } else {
                Point2::new(
                    a.x + (phi.sin() - heading.sin()) / kappa,
                    a.y - (phi.cos() - heading.cos()) / kappa,
                )
            }
        })
        .collect()
}

/// Generates a scene. Fails if the requested number of lines cannot be
/// placed within a generous attempt budget.
pub fn synthetic_scene(cfg: &SceneConfig) -> Result<VectorMap> {
    if cfg.width_px < cfg.patch_size_px || cfg.height_px < cfg.patch_size_px || cfg.patch_size_px == 0 {
        return Err(Error::InvalidInput(format!(
            "scene {}x{} must be at least one {}px patch",
            cfg.width_px, cfg.height_px, cfg.patch_size_px
        )));
    }
    if !(cfg.clearance_px >= 0.0 && cfg.separation_px >= 0.0 && cfg.meters_per_pixel > 0.0) {
        return Err(Error::InvalidInput("scene distances must be non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut placer = Placer {
        cfg,
        bx: border_positions(cfg.width_px, cfg.patch_size_px),
        by: border_positions(cfg.height_px, cfg.patch_size_px),
        placed: Vec::with_capacity(cfg.lines),
    };
    let mut lines = Vec::with_capacity(cfg.lines);
    let budget = cfg.lines.saturating_mul(400).max(1000);
    for _ in 0..budget {
        if lines.len() == cfg.lines {
            break;
        }
        let pts = match cfg.style {
            SceneStyle::Octilinear => octilinear_candidate(&mut rng, cfg.width_px, cfg.height_px),
            SceneStyle::Curved => curved_candidate(&mut rng, cfg.width_px, cfg.height_px),
        };
        let category = LineCategory::ALL[rng.random_range(0..LineCategory::ALL.len())];
        let line_type = LineType::ALL[rng.random_range(0..LineType::ALL.len())];
        if pts.len() < 2 || !placer.acceptable(&pts) {
            continue;
        }
        lines.push(LineRecord::new(lines.len().to_string(), pts.clone(), category, line_type)?);
        let bb = Bbox::of(&pts);
        placer.placed.push((pts, bb));
    }
    if lines.len() < cfg.lines {
        return Err(Error::InvalidInput(format!(
            "placed only {} of {} lines; relax the scene constraints",
            lines.len(),
            cfg.lines
        )));
    }
    Ok(VectorMap::empty(format!("synthetic-{}", cfg.seed), cfg.width_px, cfg.height_px)
        .with_mpp(cfg.meters_per_pixel)
        .with_lines(lines))
}
