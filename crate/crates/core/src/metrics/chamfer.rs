use crate::error::{Error, Result};
use crate::model::{LineRecord, Point2};
use crate::sampling::sample_with_last;

const CELL_PX: f64 = 8.0;

/// Uniform-grid nearest-neighbor index over a point set.
pub(crate) struct NearestIndex<'a> {
    points: &'a [Point2],
    x0: f64,
    y0: f64,
    cols: usize,
    rows: usize,
    starts: Vec<usize>,
    order: Vec<usize>,
}

impl<'a> NearestIndex<'a> {
    pub fn new(points: &'a [Point2]) -> Self {
        let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            x0 = x0.min(p.x);
            y0 = y0.min(p.y);
            x1 = x1.max(p.x);
            y1 = y1.max(p.y);
        }
        let cols = ((x1 - x0) / CELL_PX) as usize + 1;
        let rows = ((y1 - y0) / CELL_PX) as usize + 1;
        let cell_of = |p: &Point2| {
            let c = (((p.x - x0) / CELL_PX) as usize).min(cols - 1);
            let r = (((p.y - y0) / CELL_PX) as usize).min(rows - 1);
            r * cols + c
        };
        // counting sort of point indices by cell
        let mut starts = vec![0usize; cols * rows + 1];
        for p in points {
            starts[cell_of(p) + 1] += 1;
        }
        for i in 1..starts.len() {
            starts[i] += starts[i - 1];
        }
        let mut fill = starts.clone();
        let mut order = vec![0; points.len()];
        for (i, p) in points.iter().enumerate() {
            let c = cell_of(p);
            order[fill[c]] = i;
            fill[c] += 1;
        }
        NearestIndex {
            points,
            x0,
            y0,
            cols,
            rows,
            starts,
            order,
        }
    }

    /// Squared distance from `q` to the closest indexed point.
    pub fn nearest_sq(&self, q: Point2) -> f64 {
        let cx = ((q.x - self.x0) / CELL_PX).floor() as i64;
        let cy = ((q.y - self.y0) / CELL_PX).floor() as i64;
        let (cols, rows) = (self.cols as i64, self.rows as i64);
        let outside = |c: i64, n: i64| if c < 0 { -c } else if c >= n { c - n + 1 } else { 0 };
        let first = outside(cx, cols).max(outside(cy, rows));
        let mut best = f64::INFINITY;
        let visit = |x: i64, y: i64, best: &mut f64| {
            let c = (y * cols + x) as usize;
            for &i in &self.order[self.starts[c]..self.starts[c + 1]] {
                *best = best.min(q.distance_sq(&self.points[i]));
            }
        };
        for ring in first..=first + cols + rows {
            // cells in ring k are at least (k - 1) cells away from q
            let reach = (ring - 1).max(0) as f64 * CELL_PX;
            if reach * reach > best {
                break;
            }
            let (lo_x, hi_x, lo_y, hi_y) = (cx - ring, cx + ring, cy - ring, cy + ring);
            for y in lo_y.max(0)..=hi_y.min(rows - 1) {
                if y == lo_y || y == hi_y {
                    for x in lo_x.max(0)..=hi_x.min(cols - 1) {
                        visit(x, y, &mut best);
                    }
                } else {
                    for x in [lo_x, hi_x] {
                        if (0..cols).contains(&x) {
                            visit(x, y, &mut best);
                        }
                    }
                }
            }
        }
        best
    }
}

/// 1-px arc-length samples of a line.
pub(crate) fn dense_samples(points: &[Point2]) -> Vec<Point2> {
    sample_with_last(points, 1.0)
}

fn mean_nearest(from: &[Point2], to: &NearestIndex) -> f64 {
    from.iter().map(|p| to.nearest_sq(*p).sqrt()).sum::<f64>() / from.len() as f64
}

/// Symmetric Chamfer distance between two sampled point sets, in pixels.
pub(crate) fn chamfer_samples(a: &[Point2], b: &[Point2]) -> f64 {
    let ia = NearestIndex::new(a);
    let ib = NearestIndex::new(b);
    0.5 * (mean_nearest(a, &ib) + mean_nearest(b, &ia))
}

fn check(line: &LineRecord) -> Result<()> {
    if line.points.len() < 2 || line.length_px() == 0.0 {
        return Err(Error::InvalidGeometry(format!(
            "line {:?} has no extent for a Chamfer distance",
            line.id
        )));
    }
    Ok(())
}

/// Mean of the two directed mean nearest-sample distances between the 1-px
/// resamplings of `a` and `b`, converted to meters.
pub fn chamfer_distance(a: &LineRecord, b: &LineRecord, meters_per_pixel: f64) -> Result<f64> {
    check(a)?;
    check(b)?;
    Ok(chamfer_samples(&dense_samples(&a.points), &dense_samples(&b.points)) * meters_per_pixel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LineCategory, LineType};
    use proptest::prelude::*;

    fn line(pts: &[(f64, f64)]) -> LineRecord {
        LineRecord::new("l", pts.iter().map(|&p| Point2::from(p)).collect(), LineCategory::Curb, LineType::Solid).unwrap()
    }

    #[test]
    fn examples() {
        let a = line(&[(0.0, 0.0), (100.0, 0.0)]);
        let b = line(&[(0.0, 10.0), (100.0, 10.0)]);
        assert_eq!(chamfer_distance(&a, &a, 0.15).unwrap(), 0.0);
        assert!((chamfer_distance(&a, &b, 0.15).unwrap() - 1.5).abs() < 1e-12);
        let dot = LineRecord { points: vec![Point2::new(1.0, 1.0), Point2::new(1.0, 1.0)], ..a.clone() };
        assert!(matches!(chamfer_distance(&a, &dot, 0.15), Err(Error::InvalidGeometry(_))));
    }

    #[test]
    fn index_matches_linear_scan() {
        let pts: Vec<Point2> = (0..300).map(|i| Point2::new((i * 37 % 211) as f64 * 1.3, (i * 91 % 157) as f64 * 0.7)).collect();
        let idx = NearestIndex::new(&pts);
        for k in 0..500 {
            let q = Point2::new(k as f64 * 0.9 - 50.0, (k * 13 % 190) as f64 - 20.0);
            let brute = pts.iter().map(|p| q.distance_sq(p)).fold(f64::INFINITY, f64::min);
            assert_eq!(idx.nearest_sq(q), brute);
        }
        let far = Point2::new(1e5, -3e4);
        let brute = pts.iter().map(|p| far.distance_sq(p)).fold(f64::INFINITY, f64::min);
        assert_eq!(idx.nearest_sq(far), brute);
    }

    proptest! {
        #[test]
        fn symmetric_and_translation_invariant(
            pa in proptest::collection::vec((0.0..300.0f64, 0.0..300.0f64), 2..6),
            pb in proptest::collection::vec((0.0..300.0f64, 0.0..300.0f64), 2..6),
            t in (-50.0..50.0f64, -50.0..50.0f64),
        ) {
            let (a, b) = (line(&pa), line(&pb));
            prop_assume!(a.length_px() > 1.0 && b.length_px() > 1.0);
            let d = chamfer_distance(&a, &b, 1.0).unwrap();
            prop_assert!(d >= 0.0);
            prop_assert!((d - chamfer_distance(&b, &a, 1.0).unwrap()).abs() < 1e-9);
            let shift = |l: &LineRecord| l.map_points(|p| Point2::new(p.x + t.0, p.y + t.1));
            prop_assert!((d - chamfer_distance(&shift(&a), &shift(&b), 1.0).unwrap()).abs() < 1e-6);
        }
    }
}
