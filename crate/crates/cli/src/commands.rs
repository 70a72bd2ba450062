//! Sub-command implementations. Each reads its inputs, calls the library and
//! writes deterministic outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use lanemap_core::augment::{crop_patch, generate_augmentation_sweep, rotate_patch_sample, AugmentSweepConfig, ManifestEntry};
use lanemap_core::codec::{serialize_map, Vocabulary};
use lanemap_core::geolink::{
    build_prompt, pose_in_image, pv_field_crop, sample_pv_frames, PoseRecord, PosedPoint, PromptArgs, PromptMode,
    PvFieldSpec, PvPose, TileOrigin,
};
use lanemap_core::io::{annotation_to_json, from_json_path, import_opensatmap, parse_annotation, AnnotationFile};
use lanemap_core::metrics::{evaluate, ApConfig, RasterSpec};
use lanemap_core::model::{PatchFrame, VectorMap};
use lanemap_core::render::{render_svg, SvgOptions};
use lanemap_core::sampling::{reorder_lines, resample_map, SamplingConfig};
use lanemap_core::stitch::{
    run_state_update, Generator, NoisyOracleGenerator, OracleGenerator, PatchReport, StitchConfig, StitchInputs,
    SubprocessGenerator,
};
use lanemap_core::synthetic::{synthetic_scene, SceneConfig};
use rayon::prelude::*;
use serde::Serialize;

fn frame_id_of(path: &Path) -> String {
    path.file_stem().map_or_else(|| "map".into(), |s| s.to_string_lossy().into_owned())
}

pub fn read_map(path: &Path) -> Result<VectorMap> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_annotation(&text, &frame_id_of(path)).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("plain data serializes");
    s.push('\n');
    s
}

#[derive(Clone, Debug)]
pub struct SerializeOptions {
    pub resample: bool,
    pub reorder: bool,
    pub sampling: SamplingConfig,
    pub patch_size_px: u32,
}

impl Default for SerializeOptions {
    fn default() -> Self {
        SerializeOptions {
            resample: true,
            reorder: true,
            sampling: SamplingConfig::default(),
            patch_size_px: 896,
        }
    }
}

/// Resample, reorder and serialize a map into token text.
pub fn cmd_serialize(input: &Path, output: &Path, opts: &SerializeOptions) -> Result<()> {
    if opts.patch_size_px == 0 {
        bail!("patch size must be positive");
    }
    let mut map = read_map(input)?;
    if opts.resample {
        map = resample_map(&map, &opts.sampling)?;
    }
    if opts.reorder {
        map = reorder_lines(&map);
    }
    let seq = serialize_map(&map, &Vocabulary::new(opts.patch_size_px - 1))?;
    write_text(output, seq.rendered())
}

/// Where patch maps come from during stitching.
#[derive(Clone, Debug, PartialEq)]
pub enum GeneratorSpec {
    Oracle(PathBuf),
    Noisy { gt: PathBuf, sigma_px: f64, drop_prob: f64 },
    Exec(String),
}

impl FromStr for GeneratorSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(path) = s.strip_prefix("oracle:") {
            return Ok(GeneratorSpec::Oracle(path.into()));
        }
        if let Some(rest) = s.strip_prefix("noisy:") {
            let parts: Vec<&str> = rest.rsplitn(3, ',').collect();
            let [drop, sigma, gt] = parts[..] else {
                bail!("expected noisy:<gt.json>,<sigma>,<drop>, got {s:?}");
            };
            let sigma_px: f64 = sigma.trim().parse().with_context(|| format!("bad sigma {sigma:?}"))?;
            let drop_prob: f64 = drop.trim().parse().with_context(|| format!("bad drop probability {drop:?}"))?;
            if !(sigma_px >= 0.0) || !(0.0..=1.0).contains(&drop_prob) {
                bail!("noise needs sigma >= 0 and drop in [0, 1], got {sigma_px} and {drop_prob}");
            }
            return Ok(GeneratorSpec::Noisy { gt: gt.into(), sigma_px, drop_prob });
        }
        if let Some(cmd) = s.strip_prefix("exec:") {
            if cmd.trim().is_empty() {
                bail!("exec generator needs a command");
            }
            return Ok(GeneratorSpec::Exec(cmd.to_string()));
        }
        bail!("unknown generator {s:?}; use oracle:<gt.json>, noisy:<gt.json>,<sigma>,<drop> or exec:<cmd>")
    }
}

#[derive(Clone, Debug)]
pub struct StitchArgs {
    pub width: u32,
    pub height: u32,
    pub generator: GeneratorSpec,
    pub config: StitchConfig,
    pub seed: u64,
    pub timeout: Duration,
    pub bev_image: Option<String>,
    pub output: PathBuf,
    pub diagnostics: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StitchSummary {
    pub lines: usize,
    pub failed_patches: Vec<usize>,
}

/// Stitches a full image and writes the global map plus per-patch reports.
pub fn cmd_stitch(args: &StitchArgs) -> Result<StitchSummary> {
    let mut generator: Box<dyn Generator> = match &args.generator {
        GeneratorSpec::Oracle(gt) => Box::new(OracleGenerator::new(read_map(gt)?)),
        GeneratorSpec::Noisy { gt, sigma_px, drop_prob } => {
            Box::new(NoisyOracleGenerator::new(read_map(gt)?, *sigma_px, *drop_prob, args.seed))
        }
        GeneratorSpec::Exec(cmd) => Box::new(SubprocessGenerator::shell(cmd, args.timeout)),
    };
    let inputs = StitchInputs {
        bev_image_ref: args.bev_image.clone(),
        ..Default::default()
    };
    let outcome = run_state_update(args.width, args.height, generator.as_mut(), &args.config, &inputs)?;
    let mut map = outcome.map;
    map.frame_id = frame_id_of(&args.output);
    write_text(&args.output, &(annotation_to_json(&map) + "\n"))?;
    if let Some(path) = &args.diagnostics {
        write_text(path, &to_json::<Vec<PatchReport>>(&outcome.patches))?;
    }
    for p in &outcome.patches {
        for d in &p.diagnostics {
            log::info!("patch {}: token {}: {}", p.patch_id, d.token_index, d.message);
        }
    }
    Ok(StitchSummary {
        lines: map.lines.len(),
        failed_patches: outcome.patches.iter().filter(|p| p.error.is_some()).map(|p| p.patch_id).collect(),
    })
}

/// Evaluates `pred` against `gt`. Without `per_category` the per-category
/// IoU table is left out.
pub fn cmd_eval(
    pred: &Path,
    gt: &Path,
    ap: &ApConfig,
    line_width_px: u32,
    per_category: bool,
    output: Option<&Path>,
) -> Result<String> {
    let (pred, gt) = (read_map(pred)?, read_map(gt)?);
    let spec = RasterSpec {
        line_width_px,
        ..RasterSpec::new(gt.width_px, gt.height_px)
    };
    let report = evaluate(&pred, &gt, ap, &spec)?;
    let mut value = serde_json::to_value(&report)?;
    if !per_category {
        if let Some(obj) = value.as_object_mut() {
            obj.remove("per_category_iou");
        }
    }
    let text = to_json(&value);
    if let Some(path) = output {
        write_text(path, &text)?;
    }
    Ok(text)
}

pub fn cmd_render(input: &Path, output: &Path, opts: &SvgOptions) -> Result<()> {
    let map = read_map(input)?;
    write_text(output, &render_svg(&map, opts))
}

/// One written training sample.
#[derive(Clone, Debug, Serialize)]
pub struct PatchSampleFile {
    pub parent_id: String,
    pub frame: PatchFrame,
    pub post_rotation: u32,
    pub annotation: AnnotationFile,
}

/// Crops every sweep frame (and its post rotations) into
/// `out_dir/sample_NNNNNN.json` and lists them in `out_dir/manifest.jsonl`.
/// Returns the number of samples.
pub fn cmd_augment(input: &Path, out_dir: &Path, cfg: &AugmentSweepConfig) -> Result<usize> {
    let parent = read_map(input)?;
    let frames = generate_augmentation_sweep(parent.width_px, parent.height_px, cfg)?;
    let mut rotations = vec![0u32];
    rotations.extend(cfg.post_rotations_deg.iter().copied().filter(|r| *r != 0));

    let samples: Vec<Vec<(ManifestEntry, String)>> = frames
        .par_iter()
        .map(|frame| {
            let base = crop_patch(&parent, frame);
            rotations
                .iter()
                .map(|&r| {
                    let s = if r == 0 { base.clone() } else { rotate_patch_sample(&base, r)? };
                    let entry = ManifestEntry {
                        center: frame.center,
                        angle: frame.angle_deg,
                        post_rotation: r,
                        parent_id: parent.frame_id.clone(),
                    };
                    let file = PatchSampleFile {
                        parent_id: parent.frame_id.clone(),
                        frame: s.frame,
                        post_rotation: r,
                        annotation: AnnotationFile::from(&s.lines),
                    };
                    Ok((entry, to_json(&file)))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut manifest = String::new();
    let mut n = 0;
    for (entry, text) in samples.into_iter().flatten() {
        write_text(&out_dir.join(format!("sample_{n:06}.json")), &text)?;
        manifest.push_str(&serde_json::to_string(&entry)?);
        manifest.push('\n');
        n += 1;
    }
    write_text(&out_dir.join("manifest.jsonl"), &manifest)?;
    Ok(n)
}

#[derive(Clone, Debug)]
pub struct GeolinkArgs {
    pub poses: PathBuf,
    pub origin: PathBuf,
    pub annotation: PathBuf,
    pub out_dir: PathBuf,
    pub max_frames: usize,
    pub field: PvFieldSpec,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeolinkSummary {
    pub sampled: usize,
    pub skipped: usize,
}

fn read_poses(path: &Path) -> Result<Vec<PoseRecord>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| from_json_path(l).with_context(|| format!("{}:{}", path.display(), i + 1)))
        .collect()
}

/// Links a pose sequence to the satellite image: writes one cropped
/// ground-truth map per sampled PV frame (`pv_NN.json`) and the prompts of
/// every mode the sequence supports (`prompts.json`).
pub fn cmd_geolink(args: &GeolinkArgs) -> Result<GeolinkSummary> {
    let mut records = read_poses(&args.poses)?;
    records.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    let origin_text = fs::read_to_string(&args.origin).with_context(|| format!("reading {}", args.origin.display()))?;
    let origin: TileOrigin = from_json_path(&origin_text).with_context(|| format!("parsing {}", args.origin.display()))?;
    let map = read_map(&args.annotation)?;
    let (w, h) = (f64::from(map.width_px), f64::from(map.height_px));

    let mut posed: Vec<(PoseRecord, PvPose)> = Vec::new();
    let mut skipped = 0;
    for rec in records {
        match pose_in_image(&rec, &origin) {
            Ok(p) if (0.0..w).contains(&p.position.x) && (0.0..h).contains(&p.position.y) => posed.push((rec, p)),
            Ok(p) => {
                log::warn!(
                    "{}: pose ({:.1}, {:.1}) is outside the {}x{} image; skipped",
                    rec.path, p.position.x, p.position.y, map.width_px, map.height_px
                );
                skipped += 1;
            }
            Err(e) => {
                log::warn!("{}: {e}; skipped", rec.path);
                skipped += 1;
            }
        }
    }

    let sampled = sample_pv_frames(&posed, args.max_frames)?;
    fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;
    for (k, (rec, pose)) in sampled.iter().enumerate() {
        let mut crop = pv_field_crop(&map, pose, &args.field)?;
        crop.frame_id = rec.path.clone();
        write_text(&args.out_dir.join(format!("pv_{k:02}.json")), &(annotation_to_json(&crop) + "\n"))?;
    }

    let as_posed = |items: &[(PoseRecord, PvPose)]| -> Vec<PosedPoint> {
        items
            .iter()
            .map(|(_, p)| PosedPoint {
                point: p.position,
                heading_deg: p.heading_deg,
            })
            .collect()
    };
    let prompt_args = PromptArgs {
        pv: Some(as_posed(&sampled)),
        endpoints: posed.first().zip(posed.last()).map(|(a, b)| (a.1.position, b.1.position)),
        trace: Some(as_posed(&posed)),
    };
    let mut prompts = BTreeMap::new();
    for mode in PromptMode::ALL {
        match build_prompt(mode, &prompt_args) {
            Ok(text) => {
                prompts.insert(mode.name(), text);
            }
            Err(e) => log::warn!("prompt {mode}: {e}"),
        }
    }
    write_text(&args.out_dir.join("prompts.json"), &to_json(&prompts))?;
    Ok(GeolinkSummary {
        sampled: sampled.len(),
        skipped,
    })
}

/// Converts an OpenSatMap-style file into one annotation file per image.
/// Returns the written paths.
pub fn cmd_import(input: &Path, out_dir: &Path, meters_per_pixel: f64) -> Result<Vec<PathBuf>> {
    let text = fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let imported = import_opensatmap(&text, meters_per_pixel).with_context(|| format!("parsing {}", input.display()))?;
    for w in &imported.warnings {
        log::warn!("{w}");
    }
    let mut written = Vec::new();
    for map in &imported.maps {
        let stem = Path::new(&map.frame_id)
            .file_stem()
            .map_or_else(|| map.frame_id.clone(), |s| s.to_string_lossy().into_owned());
        let path = out_dir.join(format!("{stem}.json"));
        write_text(&path, &(annotation_to_json(map) + "\n"))?;
        written.push(path);
    }
    Ok(written)
}

pub fn cmd_synth(output: &Path, cfg: &SceneConfig) -> Result<usize> {
    let map = synthetic_scene(cfg)?;
    write_text(output, &(annotation_to_json(&map) + "\n"))?;
    Ok(map.lines.len())
}
