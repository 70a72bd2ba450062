//! Equidistant resampling of line vectors and canonical line ordering.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{dedup_consecutive, LineRecord, Point2, VectorMap};

/// Resampling parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    /// Spacing between samples in meters.
    pub interval_m: f64,
    /// Always emit the original last point, even when the final gap is
    /// shorter than the interval.
    pub keep_endpoints: bool,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            interval_m: 6.0,
            keep_endpoints: true,
        }
    }
}

impl SamplingConfig {
    /// Sample spacing in pixels for the given ground resolution.
    pub fn spacing_px(&self, meters_per_pixel: f64) -> Result<f64> {
        let s = self.interval_m / meters_per_pixel;
        if !(self.interval_m > 0.0 && s.is_finite() && s > 0.0) {
            return Err(Error::InvalidInput(format!(
                "sampling interval {} m at {} m/px is not a positive spacing",
                self.interval_m, meters_per_pixel
            )));
        }
        Ok(s)
    }
}

/// Cumulative arc length at every vertex.
pub(crate) fn cumulative_lengths(points: &[Point2]) -> Vec<f64> {
    let mut acc = Vec::with_capacity(points.len());
    let mut total = 0.0;
    acc.push(0.0);
    for w in points.windows(2) {
        total += w[0].distance(&w[1]);
        acc.push(total);
    }
    acc
}

/// Points at arc-length positions `0, s, 2s, ...` strictly before the end of
/// the polyline. The last vertex is not included.
pub(crate) fn sample_interior(points: &[Point2], spacing: f64) -> Vec<Point2> {
    let cum = cumulative_lengths(points);
    let total = *cum.last().unwrap_or(&0.0);
    let eps = 1e-9 * total.max(1.0);
    let mut out = Vec::with_capacity((total / spacing) as usize + 2);
    let mut seg = 0;
    let mut k = 0u64;
    loop {
        let pos = k as f64 * spacing;
        if pos >= total - eps {
            break;
        }
        while seg + 2 < cum.len() && cum[seg + 1] <= pos {
            seg += 1;
        }
        let len = cum[seg + 1] - cum[seg];
        let t = if len > 0.0 { (pos - cum[seg]) / len } else { 0.0 };
        out.push(points[seg].lerp(&points[seg + 1], t.clamp(0.0, 1.0)));
        k += 1;
    }
    out
}

/// Samples a polyline every `spacing` pixels of arc length and appends the
/// original last point.
pub(crate) fn sample_with_last(points: &[Point2], spacing: f64) -> Vec<Point2> {
    let mut out = sample_interior(points, spacing);
    out.push(points[points.len() - 1]);
    dedup_consecutive(&mut out);
    out
}

/// Re-expresses a line with points at fixed arc-length spacing.
///
/// Samples sit at arc-length positions `0, s, 2s, ...` with
/// `s = interval_m / meters_per_pixel`; the original last point is appended so
/// the final gap lies in `(0, s]`. Attributes are carried over untouched.
pub fn resample_equidistant(
    line: &LineRecord,
    cfg: &SamplingConfig,
    meters_per_pixel: f64,
) -> Result<LineRecord> {
    if line.points.len() < 2 {
        return Err(Error::InvalidGeometry(format!(
            "line {:?} has {} point(s), need at least 2",
            line.id,
            line.points.len()
        )));
    }
    let spacing = cfg.spacing_px(meters_per_pixel)?;
    let points = if cfg.keep_endpoints {
        sample_with_last(&line.points, spacing)
    } else {
        let mut pts = sample_interior(&line.points, spacing);
        if pts.len() < 2 {
            pts.push(line.points[line.points.len() - 1]);
            dedup_consecutive(&mut pts);
        }
        pts
    };
    Ok(LineRecord {
        points,
        ..line.clone()
    })
}

/// Resamples every line of a map.
pub fn resample_map(map: &VectorMap, cfg: &SamplingConfig) -> Result<VectorMap> {
    let lines = map
        .lines
        .iter()
        .map(|l| resample_equidistant(l, cfg, map.meters_per_pixel))
        .collect::<Result<Vec<_>>>()?;
    Ok(VectorMap {
        lines,
        ..map.clone()
    })
}

/// Sorts lines by the distance of their first point to the origin.
///
/// The sort is stable, so exact ties keep their input order. Lines are not
/// re-oriented.
pub fn reorder_lines(map: &VectorMap) -> VectorMap {
    let mut keyed: Vec<(f64, &LineRecord)> =
        map.lines.iter().map(|l| (l.points[0].norm(), l)).collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
    VectorMap {
        lines: keyed.into_iter().map(|(_, l)| l.clone()).collect(),
        ..map.clone()
    }
}
