//! Overlapped and inclined patch cropping of annotations, plus the training
//! sweep that enumerates crop frames over a parent image.

use serde::{Deserialize, Serialize};

use crate::clip::{clip_polyline_to_rect, Rect};
use crate::error::{Error, Result};
use crate::model::{
    dedup_consecutive, path_length_px, sin_cos_deg, world_to_patch, EndpointKind, LineRecord,
    PatchFrame, Point2, VectorMap, DEFAULT_PATCH_SIZE,
};

/// Clipped pieces shorter than this are dropped: they cannot produce two
/// distinct integer coordinates.
pub const MIN_SEGMENT_PX: f64 = 1.0;

/// One lattice of crop centers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub stride_px: u32,
    /// First center on both axes.
    pub start_px: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentSweepConfig {
    pub patch_size_px: u32,
    pub grids: Vec<SweepGrid>,
    pub angles_deg: Vec<f64>,
    pub post_rotations_deg: Vec<u32>,
    pub discard_out_of_bounds: bool,
}

impl Default for AugmentSweepConfig {
    fn default() -> Self {
        AugmentSweepConfig {
            patch_size_px: DEFAULT_PATCH_SIZE,
            grids: vec![
                SweepGrid {
                    stride_px: 664,
                    start_px: 448.0,
                },
                SweepGrid {
                    stride_px: 544,
                    start_px: 1268.0,
                },
            ],
            angles_deg: vec![0.0, 15.0, 30.0, 45.0, 60.0, 75.0],
            post_rotations_deg: vec![90, 180, 270],
            discard_out_of_bounds: true,
        }
    }
}

impl AugmentSweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patch_size_px == 0 {
            return Err(Error::InvalidInput("patch size must be positive".into()));
        }
        if let Some(g) = self.grids.iter().find(|g| g.stride_px == 0 || !(g.start_px >= 0.0)) {
            return Err(Error::InvalidInput(format!("invalid sweep grid {g:?}")));
        }
        if let Some(a) = self.angles_deg.iter().find(|a| !(0.0..90.0).contains(*a)) {
            return Err(Error::InvalidInput(format!("sweep angle {a} outside [0, 90)")));
        }
        if let Some(r) = self.post_rotations_deg.iter().find(|r| ![90, 180, 270].contains(*r)) {
            return Err(Error::InvalidAngle(*r as f64));
        }
        Ok(())
    }
}

/// Annotation lines of one crop, in patch-local pixels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchSample {
    pub frame: PatchFrame,
    pub lines: VectorMap,
    /// Extra rotation applied after cropping: 0, 90, 180 or 270.
    pub post_rotation_deg: u32,
}

/// Half the axis-aligned extent of a square of side `size` rotated by `deg`.
pub fn rotated_half_extent(size: f64, deg: f64) -> f64 {
    let (s, c) = sin_cos_deg(deg);
    size / 2.0 * (c.abs() + s.abs())
}

/// Cuts the parent map to `frame`.
///
/// Lines are moved into patch-local coordinates and clipped to the patch
/// rectangle. Endpoints created by the clip become [`EndpointKind::Cut`];
/// original endpoints keep their kind. Pieces shorter than
/// [`MIN_SEGMENT_PX`] are dropped. A line split into several pieces gets ids
/// `"<id>.0"`, `"<id>.1"`, ...
pub fn crop_patch(map: &VectorMap, frame: &PatchFrame) -> PatchSample {
    let rect = Rect::sized(frame.width_px as f64, frame.height_px as f64);
    let lines = crop_lines(&map.lines, &rect, |p| world_to_patch(p, frame));
    PatchSample {
        frame: *frame,
        lines: VectorMap {
            frame_id: format!("{}#patch", map.frame_id),
            width_px: frame.width_px,
            height_px: frame.height_px,
            meters_per_pixel: map.meters_per_pixel,
            lines,
        },
        post_rotation_deg: 0,
    }
}

/// Transforms lines with `to_local` and clips them to `rect`, labeling
/// clip-created endpoints as cut.
pub(crate) fn crop_lines(
    lines: &[LineRecord],
    rect: &Rect,
    to_local: impl Fn(Point2) -> Point2,
) -> Vec<LineRecord> {
    let mut out = Vec::new();
    for line in lines {
        let mut local: Vec<Point2> = line.points.iter().map(|p| to_local(*p)).collect();
        dedup_consecutive(&mut local);
        if local.len() < 2 {
            continue;
        }
        let runs: Vec<_> = clip_polyline_to_rect(&local, rect)
            .into_iter()
            .filter(|r| path_length_px(&r.points) >= MIN_SEGMENT_PX)
            .collect();
        let split = runs.len() > 1;
        for (k, run) in runs.into_iter().enumerate() {
            out.push(LineRecord {
                id: if split {
                    format!("{}.{k}", line.id)
                } else {
                    line.id.clone()
                },
                points: run.points,
                category: line.category,
                line_type: line.line_type,
                start_kind: if run.entered_at_start {
                    EndpointKind::Cut
                } else {
                    line.start_kind
                },
                end_kind: if run.exited_at_end {
                    EndpointKind::Cut
                } else {
                    line.end_kind
                },
                score: line.score,
            });
        }
    }
    out
}

/// Rotates a sample about its center by a quarter-turn multiple
/// (counter-clockwise on screen).
pub fn rotate_patch_sample(sample: &PatchSample, deg: u32) -> Result<PatchSample> {
    if ![90, 180, 270].contains(&deg) {
        return Err(Error::InvalidAngle(deg as f64));
    }
    let (w, h) = (sample.lines.width_px, sample.lines.height_px);
    if w != h {
        return Err(Error::InvalidInput(format!(
            "quarter-turn rotation needs a square patch, got {w}x{h}"
        )));
    }
    let c = w as f64 / 2.0;
    let rot = |p: Point2| {
        let (dx, dy) = (p.x - c, p.y - c);
        let (rx, ry) = match deg {
            90 => (dy, -dx),
            180 => (-dx, -dy),
            _ => (-dy, dx),
        };
        Point2::new(c + rx, c + ry)
    };
    let lines = sample.lines.lines.iter().map(|l| l.map_points(rot)).collect();
    Ok(PatchSample {
        frame: sample.frame,
        lines: VectorMap {
            lines,
            ..sample.lines.clone()
        },
        post_rotation_deg: (sample.post_rotation_deg + deg) % 360,
    })
}

/// Every crop frame of the sweep over a `width x height` parent.
///
/// Order: grid, then angle, then rows top to bottom, then columns left to
/// right. With `discard_out_of_bounds`, a frame is kept only when the
/// bounding box of its rotated footprint lies inside the parent.
pub fn generate_augmentation_sweep(
    width: u32,
    height: u32,
    cfg: &AugmentSweepConfig,
) -> Result<Vec<PatchFrame>> {
    cfg.validate()?;
    let size = cfg.patch_size_px;
    if width < size || height < size {
        return Err(Error::InvalidInput(format!(
            "parent {width}x{height} is smaller than the {size}px patch"
        )));
    }
    let (w, h) = (width as f64, height as f64);
    let centers = |start: f64, stride: u32, limit: f64| -> Vec<f64> {
        (0u64..)
            .map(|k| start + k as f64 * stride as f64)
            .take_while(|c| *c <= limit)
            .collect()
    };
    let mut frames = Vec::new();
    for grid in &cfg.grids {
        let xs = centers(grid.start_px, grid.stride_px, w);
        let ys = centers(grid.start_px, grid.stride_px, h);
        for &angle in &cfg.angles_deg {
            let half = rotated_half_extent(size as f64, angle);
            let fits = |c: f64, limit: f64| c - half >= -1e-9 && c + half <= limit + 1e-9;
            for &cy in &ys {
                for &cx in &xs {
                    if cfg.discard_out_of_bounds && !(fits(cx, w) && fits(cy, h)) {
                        continue;
                    }
                    frames.push(PatchFrame::new(Point2::new(cx, cy), angle, size, size, width, height)?);
                }
            }
        }
    }
    Ok(frames)
}

/// One line of the sweep manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub center: Point2,
    pub angle: f64,
    pub post_rotation: u32,
    pub parent_id: String,
}
