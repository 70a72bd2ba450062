//! Patch-by-patch construction of a large map.
//!
//! The parent image is tiled left-to-right, top-to-bottom. For every patch the
//! engine gathers the cut endpoints of the map built so far that touch the
//! patch, hands them to a [`Generator`] together with the prompt and imagery
//! references, decodes the returned token string, and splices the new lines
//! onto the existing ones at matching cut endpoints.

mod generator;
mod merge;
mod subprocess;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use generator::{
    oracle_generate, GenRequest, GenResponse, Generator, GeneratorError, NoisyOracleGenerator,
    OracleGenerator, PvRef,
};
pub use merge::merge_patch;
pub use subprocess::{SubprocessGenerator, WireFrame, WirePv, WireRequest, WireResponse};

use crate::augment::crop_lines;
use crate::clip::Rect;
use crate::codec::{detokenize_str, quantize_map, serialize_map, Diagnostic, ParseMode, Vocabulary};
use crate::error::{Error, Result};
use crate::geolink::{build_prompt, PromptMode, PromptArgs};
use crate::metrics::pseudo_score;
use crate::model::{
    world_to_patch, End, EndpointKind, LineRecord, PatchFrame, Point2, VectorMap,
    DEFAULT_METERS_PER_PIXEL, DEFAULT_PATCH_SIZE,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StitchConfig {
    pub patch_size_px: u32,
    /// Cut endpoints this close to a patch (or inside it) are passed as context.
    pub context_band_px: f64,
    /// Maximum distance between two cut endpoints that get spliced.
    pub join_tolerance_px: f64,
    /// Abort on the first generator failure instead of skipping the patch.
    pub fail_fast: bool,
    pub meters_per_pixel: f64,
}

impl Default for StitchConfig {
    fn default() -> Self {
        StitchConfig {
            patch_size_px: DEFAULT_PATCH_SIZE,
            context_band_px: 40.0,
            join_tolerance_px: 4.0,
            fail_fast: false,
            meters_per_pixel: DEFAULT_METERS_PER_PIXEL,
        }
    }
}

impl StitchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patch_size_px < 2 {
            return Err(Error::InvalidInput("patch size must be at least 2 px".into()));
        }
        if !(self.context_band_px >= 0.0) || !(self.join_tolerance_px >= 0.0) {
            return Err(Error::InvalidInput(
                "context band and join tolerance must be non-negative".into(),
            ));
        }
        if !(self.meters_per_pixel > 0.0) {
            return Err(Error::InvalidInput("meters_per_pixel must be positive".into()));
        }
        Ok(())
    }

    /// Vocabulary covering patch-local pixel indices `0..patch_size`.
    pub fn vocabulary(&self) -> Vocabulary {
        Vocabulary::new(self.patch_size_px - 1)
    }
}

/// Tile offsets along one axis: `0, S, 2S, ...` with the last one clamped to
/// `len - S` so the axis is fully covered.
pub fn tile_offsets(len: u32, size: u32) -> Vec<u32> {
    let mut out: Vec<u32> = (0..)
        .map(|k| k * size)
        .take_while(|o| o + size <= len)
        .collect();
    match out.last() {
        Some(&last) if last + size < len => out.push(len - size),
        None => out.push(0),
        _ => {}
    }
    out
}

/// Axis-aligned patch frames covering the parent image, row-major.
pub fn plan_patches(width: u32, height: u32, cfg: &StitchConfig) -> Result<Vec<PatchFrame>> {
    cfg.validate()?;
    let s = cfg.patch_size_px;
    if width < s || height < s {
        return Err(Error::InvalidInput(format!(
            "image {width}x{height} is smaller than the {s}px patch"
        )));
    }
    let xs = tile_offsets(width, s);
    let ys = tile_offsets(height, s);
    Ok(ys
        .iter()
        .flat_map(|&y| {
            xs.iter()
                .map(move |&x| PatchFrame::axis_aligned(x as f64, y as f64, s, width, height))
        })
        .collect())
}

/// Part of each planned patch not covered by patches processed before it, in
/// patch-local pixels. Only the last row and column overlap their neighbors.
fn fresh_regions(width: u32, height: u32, s: u32) -> Vec<Rect> {
    let lo = |offs: &[u32], i: usize| {
        if i == 0 {
            0.0
        } else {
            (offs[i - 1] + s).saturating_sub(offs[i]) as f64
        }
    };
    let xs = tile_offsets(width, s);
    let ys = tile_offsets(height, s);
    let mut out = Vec::with_capacity(xs.len() * ys.len());
    for iy in 0..ys.len() {
        for ix in 0..xs.len() {
            out.push(Rect::new(lo(&xs, ix), lo(&ys, iy), s as f64, s as f64));
        }
    }
    out
}

fn frame_rect(frame: &PatchFrame) -> Rect {
    Rect::sized(frame.width_px as f64, frame.height_px as f64)
}

/// Up to three points ending at `end`, oriented like the source line.
fn terminal_stub(line: &LineRecord, end: End) -> LineRecord {
    let n = line.points.len();
    let whole = n <= 3;
    let (points, start_kind, end_kind) = match end {
        End::Start => (
            line.points[..n.min(3)].to_vec(),
            EndpointKind::Cut,
            if whole { line.end_kind } else { EndpointKind::Natural },
        ),
        End::End => (
            line.points[n.saturating_sub(3)..].to_vec(),
            if whole { line.start_kind } else { EndpointKind::Natural },
            EndpointKind::Cut,
        ),
    };
    LineRecord {
        points,
        start_kind,
        end_kind,
        score: None,
        ..line.clone()
    }
}

/// Border context for `frame`: terminal stubs of every global line whose cut
/// endpoint lies within `context_band_px` of the patch (points inside the
/// patch count as distance zero), in patch-local pixels clamped to the
/// vocabulary range `[0, patch_size - 1]`. Stubs that clamp onto a single
/// point are dropped.
pub fn collect_border_context(global: &VectorMap, frame: &PatchFrame, cfg: &StitchConfig) -> VectorMap {
    let rect = frame_rect(frame);
    let max = (frame.width_px.min(frame.height_px) - 1) as f64;
    let mut lines = Vec::new();
    for line in &global.lines {
        for end in [End::Start, End::End] {
            if !line.kind(end).is_cut() {
                continue;
            }
            let local = world_to_patch(line.endpoint(end), frame);
            if rect.outside_distance(&local) > cfg.context_band_px {
                continue;
            }
            let stub = terminal_stub(line, end).map_points(|p| {
                let q = world_to_patch(p, frame);
                Point2::new(q.x.clamp(0.0, max), q.y.clamp(0.0, max))
            });
            if stub.points.len() >= 2 {
                lines.push(LineRecord {
                    id: format!("ctx{}", lines.len()),
                    ..stub
                });
            }
        }
    }
    VectorMap {
        frame_id: format!("{}#context", global.frame_id),
        width_px: frame.width_px,
        height_px: frame.height_px,
        meters_per_pixel: global.meters_per_pixel,
        lines,
    }
}

/// Per-image inputs forwarded to the generator with every patch.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StitchInputs {
    pub bev_image_ref: Option<String>,
    pub pv_refs: Option<Vec<PvRef>>,
    /// Prompt text; the BEV-only template when `None`.
    pub prompt: Option<String>,
}

/// What happened on one patch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchReport {
    pub patch_id: usize,
    pub frame: PatchFrame,
    pub context_lines: usize,
    pub decoded_lines: usize,
    pub diagnostics: Vec<Diagnostic>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StitchOutcome {
    pub map: VectorMap,
    pub patches: Vec<PatchReport>,
}

#[derive(Debug, Error)]
pub enum StitchError {
    #[error("patch {patch_id}: {source}")]
    Generator {
        patch_id: usize,
        #[source]
        source: GeneratorError,
    },
    #[error(transparent)]
    Map(#[from] Error),
}

/// Runs the state-update loop over a `width x height` image starting from an
/// empty map.
///
/// Generator output is decoded leniently. Lines that fall into the part of a
/// patch already covered by earlier patches are clipped away before merging,
/// so overlapping last rows/columns do not duplicate content.
pub fn run_state_update(
    width: u32,
    height: u32,
    generator: &mut dyn Generator,
    cfg: &StitchConfig,
    inputs: &StitchInputs,
) -> Result<StitchOutcome, StitchError> {
    let frames = plan_patches(width, height, cfg)?;
    let fresh = fresh_regions(width, height, cfg.patch_size_px);
    let vocab = cfg.vocabulary();
    let prompt = match &inputs.prompt {
        Some(p) => p.clone(),
        None => build_prompt(PromptMode::Bev, &PromptArgs::default())?,
    };

    let mut global = VectorMap::empty("global", width, height).with_mpp(cfg.meters_per_pixel);
    let mut patches = Vec::with_capacity(frames.len());

    for (patch_id, (frame, fresh)) in frames.iter().zip(&fresh).enumerate() {
        let context = quantize_map(&collect_border_context(&global, frame, cfg), &vocab);
        let context_tokens = serialize_map(&context, &vocab)?.into_rendered();
        let request = GenRequest {
            patch_id,
            frame: *frame,
            bev_image_ref: inputs.bev_image_ref.clone(),
            pv_refs: inputs.pv_refs.clone(),
            prompt_text: prompt.clone(),
            context_tokens,
        };
        let mut report = PatchReport {
            patch_id,
            frame: *frame,
            context_lines: context.len(),
            decoded_lines: 0,
            diagnostics: Vec::new(),
            error: None,
        };

        let response = match generator.generate(&request) {
            Ok(r) => r,
            Err(source) => {
                if cfg.fail_fast {
                    return Err(StitchError::Generator { patch_id, source });
                }
                log::warn!("patch {patch_id}: generator failed: {source}");
                report.error = Some(source.to_string());
                patches.push(report);
                continue;
            }
        };

        let decoded = detokenize_str(&response.token_string, &vocab, ParseMode::Lenient)?;
        let mut lines = decoded.map.lines;
        report.diagnostics = decoded.diagnostics;
        report.decoded_lines = lines.len();
        match &response.class_logits {
            Some(logits) if logits.len() == lines.len() => {
                for (line, o) in lines.iter_mut().zip(logits) {
                    match pseudo_score(o) {
                        Ok(p) => line.score = Some(p),
                        Err(e) => report.diagnostics.push(Diagnostic {
                            token_index: 0,
                            message: format!("line {}: {e}", line.id),
                        }),
                    }
                }
            }
            Some(logits) => report.diagnostics.push(Diagnostic {
                token_index: 0,
                message: format!(
                    "ignored {} logit rows for {} decoded lines",
                    logits.len(),
                    lines.len()
                ),
            }),
            None => {}
        }

        let lines = crop_lines(&lines, fresh, |p| p);
        let patch_map = VectorMap {
            frame_id: format!("patch{patch_id}"),
            width_px: frame.width_px,
            height_px: frame.height_px,
            meters_per_pixel: cfg.meters_per_pixel,
            lines,
        };
        global = merge_patch(&global, &patch_map, frame, cfg);
        patches.push(report);
    }
    Ok(StitchOutcome { map: global, patches })
}

/// Cut endpoints farther than `tol` from the border of the map extent, i.e.
/// cuts that were never spliced to a neighbor.
pub fn unmatched_interior_cuts(map: &VectorMap, tol: f64) -> Vec<(usize, End, Point2)> {
    let rect = Rect::sized(map.width_px as f64, map.height_px as f64);
    let mut out = Vec::new();
    for (i, line) in map.lines.iter().enumerate() {
        for end in [End::Start, End::End] {
            let p = line.endpoint(end);
            if line.kind(end).is_cut() && rect.border_distance(&p) > tol {
                out.push((i, end, p));
            }
        }
    }
    out
}
