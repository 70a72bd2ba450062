use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LineRecord, Point2};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RasterSpec {
    pub width_px: u32,
    pub height_px: u32,
    /// Total stroke width; half of it lies on each side of the centerline.
    #[serde(default = "default_line_width")]
    pub line_width_px: u32,
}

fn default_line_width() -> u32 {
    6
}

impl RasterSpec {
    pub fn new(width_px: u32, height_px: u32) -> Self {
        RasterSpec {
            width_px,
            height_px,
            line_width_px: default_line_width(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.line_width_px == 0 {
            return Err(Error::InvalidInput("line width must be at least 1 px".into()));
        }
        Ok(())
    }

    fn radius(&self) -> f64 {
        self.line_width_px as f64 / 2.0
    }
}

/// Dense binary mask, row-major, one bit per pixel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bitmask {
    width: u32,
    height: u32,
    words: Vec<u64>,
}

impl Bitmask {
    pub fn new(width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        Bitmask {
            width,
            height,
            words: vec![0; n.div_ceil(64)],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        let i = y as usize * self.width as usize + x as usize;
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, x: u32, y: u32) {
        let i = y as usize * self.width as usize + x as usize;
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn count(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    fn same_dims(&self, other: &Bitmask) -> Result<()> {
        if (self.width, self.height) != (other.width, other.height) {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }

    /// `(|a & b|, |a | b|)`.
    pub fn overlap_counts(&self, other: &Bitmask) -> Result<(u64, u64)> {
        self.same_dims(other)?;
        Ok(self.words.iter().zip(&other.words).fold((0, 0), |(i, u), (a, b)| {
            (i + (a & b).count_ones() as u64, u + (a | b).count_ones() as u64)
        }))
    }
}

fn segment_distance_sq(p: Point2, a: Point2, b: Point2) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len_sq = dx * dx + dy * dy;
    let t = if len_sq == 0.0 {
        0.0
    } else {
        (((p.x - a.x) * dx + (p.y - a.y) * dy) / len_sq).clamp(0.0, 1.0)
    };
    let (qx, qy) = (a.x + t * dx - p.x, a.y + t * dy - p.y);
    qx * qx + qy * qy
}

/// Calls `f(x, y)` for every pixel whose center lies within the stroke
/// radius of some segment of `points`. Pixels may be reported more than once.
pub(crate) fn for_each_stroke_pixel(points: &[Point2], spec: &RasterSpec, mut f: impl FnMut(u32, u32)) {
    let r = spec.radius();
    let r_sq = r * r;
    let (w, h) = (spec.width_px as f64, spec.height_px as f64);
    let segs: Vec<(Point2, Point2)> = if points.len() == 1 {
        vec![(points[0], points[0])]
    } else {
        points.windows(2).map(|s| (s[0], s[1])).collect()
    };
    for (a, b) in segs {
        // pixel (i, j) has center (i + 0.5, j + 0.5)
        let x0 = (a.x.min(b.x) - r - 0.5).ceil().max(0.0);
        let x1 = (a.x.max(b.x) + r - 0.5).floor().min(w - 1.0);
        let y0 = (a.y.min(b.y) - r - 0.5).ceil().max(0.0);
        let y1 = (a.y.max(b.y) + r - 0.5).floor().min(h - 1.0);
        if x0 > x1 || y0 > y1 {
            continue;
        }
        for j in y0 as u32..=y1 as u32 {
            for i in x0 as u32..=x1 as u32 {
                let c = Point2::new(i as f64 + 0.5, j as f64 + 0.5);
                if segment_distance_sq(c, a, b) <= r_sq {
                    f(i, j);
                }
            }
        }
    }
}

/// Strokes every line with round caps and joins. Pixels outside the raster
/// are ignored.
pub fn rasterize(lines: &[LineRecord], spec: &RasterSpec) -> Bitmask {
    let mut mask = Bitmask::new(spec.width_px, spec.height_px);
    for line in lines {
        for_each_stroke_pixel(&line.points, spec, |x, y| mask.set(x, y));
    }
    mask
}

/// Intersection over union; 1.0 when both masks are empty.
pub fn mask_iou(a: &Bitmask, b: &Bitmask) -> Result<f64> {
    let (inter, union) = a.overlap_counts(b)?;
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// Sparse mask of one line: sorted unique pixel indices plus a bounding box.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct InstanceMask {
    pub pixels: Vec<u32>,
    /// Inclusive pixel bounds `(x0, y0, x1, y1)`; `None` when empty.
    pub bbox: Option<(u32, u32, u32, u32)>,
}

impl InstanceMask {
    pub fn from_line(points: &[Point2], spec: &RasterSpec) -> Self {
        let mut pixels = Vec::new();
        let mut bbox: Option<(u32, u32, u32, u32)> = None;
        for_each_stroke_pixel(points, spec, |x, y| {
            pixels.push(y * spec.width_px + x);
            bbox = Some(match bbox {
                None => (x, y, x, y),
                Some((a, b, c, d)) => (a.min(x), b.min(y), c.max(x), d.max(y)),
            });
        });
        pixels.sort_unstable();
        pixels.dedup();
        InstanceMask { pixels, bbox }
    }

    pub fn iou(&self, other: &InstanceMask) -> f64 {
        let disjoint = match (self.bbox, other.bbox) {
            (Some(a), Some(b)) => a.2 < b.0 || b.2 < a.0 || a.3 < b.1 || b.3 < a.1,
            (None, None) => return 1.0,
            _ => true,
        };
        if disjoint {
            return 0.0;
        }
        let (mut i, mut j, mut inter) = (0, 0, 0usize);
        while i < self.pixels.len() && j < other.pixels.len() {
            match self.pixels[i].cmp(&other.pixels[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    inter += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        let union = self.pixels.len() + other.pixels.len() - inter;
        inter as f64 / union as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LineCategory, LineType};

    fn line(pts: &[(f64, f64)]) -> LineRecord {
        LineRecord::new("l", pts.iter().map(|&p| Point2::from(p)).collect(), LineCategory::LaneLine, LineType::Solid)
            .unwrap()
    }

    #[test]
    fn horizontal_segment_area() {
        let spec = RasterSpec::new(200, 100);
        let m = rasterize(&[line(&[(50.0, 50.0), (150.0, 50.0)])], &spec);
        let area = m.count();
        // a 100 x 6 body plus two half-disc caps of radius 3
        let analytic = 100.0 * 6.0 + std::f64::consts::PI * 9.0;
        assert!((594..=640).contains(&area), "{area}");
        assert!((area as f64 - analytic).abs() < 12.0);
    }

    #[test]
    fn empty_and_deterministic() {
        let spec = RasterSpec::new(64, 64);
        assert!(rasterize(&[], &spec).is_empty());
        let l = line(&[(3.0, 4.0), (40.0, 50.0), (60.0, 10.0)]);
        assert_eq!(rasterize(&[l.clone()], &spec), rasterize(&[l], &spec));
    }

    #[test]
    fn stroke_matches_pixel_scan() {
        let spec = RasterSpec::new(80, 60);
        let pts = [Point2::new(-5.0, 10.0), Point2::new(30.5, 41.2), Point2::new(70.0, 3.3)];
        let m = rasterize(&[LineRecord { points: pts.to_vec(), ..line(&[(0.0, 0.0), (1.0, 1.0)]) }], &spec);
        for y in 0..60 {
            for x in 0..80 {
                let c = Point2::new(x as f64 + 0.5, y as f64 + 0.5);
                let d = pts.windows(2).map(|s| segment_distance_sq(c, s[0], s[1])).fold(f64::INFINITY, f64::min);
                assert_eq!(m.get(x, y), d <= 9.0, "({x},{y})");
            }
        }
    }

    #[test]
    fn iou_examples() {
        let mut a = Bitmask::new(4, 4);
        let mut b = Bitmask::new(4, 4);
        for y in 0..4 {
            for x in 0..4 {
                a.set(x, y);
            }
        }
        for y in 0..2 {
            for x in 0..2 {
                b.set(x, y);
            }
        }
        assert_eq!(mask_iou(&a, &a).unwrap(), 1.0);
        assert_eq!(mask_iou(&a, &b).unwrap(), 0.25);
        assert_eq!(mask_iou(&Bitmask::new(4, 4), &Bitmask::new(4, 4)).unwrap(), 1.0);
        let mut c = Bitmask::new(4, 4);
        c.set(3, 3);
        assert_eq!(mask_iou(&b, &c).unwrap(), 0.0);
        assert!(matches!(mask_iou(&a, &Bitmask::new(4, 5)), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn instance_iou_agrees_with_dense() {
        let spec = RasterSpec::new(100, 100);
        let a = [Point2::new(10.0, 10.0), Point2::new(80.0, 60.0)];
        let b = [Point2::new(12.0, 10.0), Point2::new(82.0, 64.0)];
        let dense = mask_iou(
            &rasterize(&[LineRecord { points: a.to_vec(), ..line(&[(0.0, 0.0), (1.0, 1.0)]) }], &spec),
            &rasterize(&[LineRecord { points: b.to_vec(), ..line(&[(0.0, 0.0), (1.0, 1.0)]) }], &spec),
        )
        .unwrap();
        let sparse = InstanceMask::from_line(&a, &spec).iou(&InstanceMask::from_line(&b, &spec));
        assert_eq!(dense, sparse);
    }
}
