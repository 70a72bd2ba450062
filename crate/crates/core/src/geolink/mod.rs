//! Linking ground-level poses to satellite pixels: Web Mercator conversion,
//! forward field-of-view cropping, frame subsampling and prompt text.

mod prompt;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

pub use prompt::{build_prompt, PosedPoint, PromptArgs, PromptMode};

use crate::augment::crop_lines;
use crate::clip::Rect;
use crate::error::{Error, Result};
use crate::model::{normalize_deg, sin_cos_deg, Point2, VectorMap};

pub const MAX_LATITUDE: f64 = 85.051128;
pub const MAX_ZOOM: u8 = 23;
const TILE_PX: f64 = 256.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        let g = GeoPoint { lat, lon };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lat.abs() <= MAX_LATITUDE) {
            return Err(Error::LatitudeOutOfBounds(self.lat));
        }
        if !(-180.0..180.0).contains(&self.lon) {
            return Err(Error::InvalidInput(format!("longitude {} outside [-180, 180)", self.lon)));
        }
        Ok(())
    }
}

fn world_size(zoom: u8) -> Result<f64> {
    if zoom > MAX_ZOOM {
        return Err(Error::InvalidInput(format!("zoom {zoom} above {MAX_ZOOM}")));
    }
    Ok(TILE_PX * (1u64 << zoom) as f64)
}

/// Global Web Mercator pixel of a coordinate at `zoom`.
pub fn latlon_to_pixel(g: GeoPoint, zoom: u8) -> Result<Point2> {
    g.validate()?;
    let size = world_size(zoom)?;
    let phi = g.lat.to_radians();
    let x = (g.lon + 180.0) / 360.0 * size;
    let y = (1.0 - (phi.tan() + 1.0 / phi.cos()).ln() / PI) / 2.0 * size;
    Ok(Point2::new(x, y))
}

/// Inverse of [`latlon_to_pixel`].
pub fn pixel_to_latlon(p: Point2, zoom: u8) -> Result<GeoPoint> {
    let size = world_size(zoom)?;
    if !(p.x >= 0.0 && p.x < size && p.y >= 0.0 && p.y <= size) {
        return Err(Error::OutOfExtent { x: p.x, y: p.y, zoom });
    }
    let lon = p.x / size * 360.0 - 180.0;
    let lat = (PI * (1.0 - 2.0 * p.y / size)).sinh().atan().to_degrees();
    Ok(GeoPoint { lat, lon })
}

/// A ground-level camera pose in satellite pixels. Heading 0 points up the
/// image and increases clockwise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PvPose {
    pub position: Point2,
    pub heading_deg: f64,
}

impl PvPose {
    pub fn new(position: Point2, heading_deg: f64) -> Result<Self> {
        if !position.is_finite() || !heading_deg.is_finite() {
            return Err(Error::InvalidInput(format!("pose {position:?} heading {heading_deg} is not finite")));
        }
        Ok(PvPose {
            position,
            heading_deg: normalize_deg(heading_deg),
        })
    }

    /// Unit vector along the heading, in image axes.
    pub fn forward(&self) -> Point2 {
        let (s, c) = sin_cos_deg(self.heading_deg);
        Point2::new(s, -c)
    }

    /// Unit vector to the right of the heading, in image axes.
    pub fn right(&self) -> Point2 {
        let (s, c) = sin_cos_deg(self.heading_deg);
        Point2::new(c, s)
    }
}

/// Extent of the ground-truth field in front of a camera.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PvFieldSpec {
    pub ahead_m: f64,
    pub width_m: f64,
}

impl Default for PvFieldSpec {
    fn default() -> Self {
        PvFieldSpec {
            ahead_m: 60.0,
            width_m: 30.0,
        }
    }
}

impl PvFieldSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.ahead_m > 0.0 && self.width_m > 0.0) {
            return Err(Error::InvalidInput("field extent must be positive".into()));
        }
        Ok(())
    }
}

/// Parent pixel to pose-local pixel: the pose sits at the bottom center of a
/// `width x ahead` rectangle and the heading points up.
pub fn to_pose_local(p: Point2, pose: &PvPose, width_px: f64, ahead_px: f64) -> Point2 {
    let d = Point2::new(p.x - pose.position.x, p.y - pose.position.y);
    let (f, r) = (pose.forward(), pose.right());
    Point2::new(width_px / 2.0 + d.x * r.x + d.y * r.y, ahead_px - (d.x * f.x + d.y * f.y))
}

/// Lines inside the field ahead of `pose`, in pose-local pixels.
///
/// The field spans `ahead_m` forward and `width_m / 2` to each side. Clipped
/// ends are marked cut. The output extent is the field rectangle rounded up
/// to whole pixels.
pub fn pv_field_crop(map: &VectorMap, pose: &PvPose, spec: &PvFieldSpec) -> Result<VectorMap> {
    spec.validate()?;
    let mpp = map.meters_per_pixel;
    let (w, h) = (spec.width_m / mpp, spec.ahead_m / mpp);
    let lines = crop_lines(&map.lines, &Rect::sized(w, h), |p| to_pose_local(p, pose, w, h));
    Ok(VectorMap {
        frame_id: format!("{}#pv", map.frame_id),
        width_px: w.ceil() as u32,
        height_px: h.ceil() as u32,
        meters_per_pixel: mpp,
        lines,
    })
}

/// Indices picked by [`sample_pv_frames`]: all of them when `n <= max_n`,
/// otherwise `round(k (n - 1) / (max_n - 1))` for `k = 0..max_n` with halves
/// rounded up.
pub fn sample_pv_indices(n: usize, max_n: usize) -> Result<Vec<usize>> {
    if max_n == 0 {
        return Err(Error::InvalidInput("max_n must be at least 1".into()));
    }
    if n <= max_n {
        return Ok((0..n).collect());
    }
    if max_n == 1 {
        return Ok(vec![0]);
    }
    let (a, b) = (n - 1, max_n - 1);
    let mut out: Vec<usize> = (0..max_n).map(|k| (2 * k * a + b) / (2 * b)).collect();
    out.dedup();
    Ok(out)
}

/// Uniformly spaced subset of at most `max_n` frames, first and last kept.
pub fn sample_pv_frames<T: Clone>(frames: &[T], max_n: usize) -> Result<Vec<T>> {
    Ok(sample_pv_indices(frames.len(), max_n)?
        .into_iter()
        .map(|i| frames[i].clone())
        .collect())
}

/// One line of a pose manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub path: String,
    pub lat: f64,
    pub lon: f64,
    pub heading: f64,
    pub timestamp: f64,
}

/// Global pixel of the satellite image's top-left corner.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileOrigin {
    pub origin_x: i64,
    pub origin_y: i64,
    pub zoom: u8,
}

/// Pose of a manifest record in the image's pixel frame.
pub fn pose_in_image(rec: &PoseRecord, origin: &TileOrigin) -> Result<PvPose> {
    let g = latlon_to_pixel(GeoPoint::new(rec.lat, rec.lon)?, origin.zoom)?;
    PvPose::new(
        Point2::new(g.x - origin.origin_x as f64, g.y - origin.origin_y as f64),
        rec.heading,
    )
}
