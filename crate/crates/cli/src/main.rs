use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};
use lanemap_cli::commands::{self, GeneratorSpec, GeolinkArgs, SerializeOptions, StitchArgs};
use lanemap_cli::config::expand_config;
use lanemap_core::augment::{AugmentSweepConfig, SweepGrid};
use lanemap_core::geolink::PvFieldSpec;
use lanemap_core::metrics::ApConfig;
use lanemap_core::render::SvgOptions;
use lanemap_core::sampling::SamplingConfig;
use lanemap_core::stitch::StitchConfig;
use lanemap_core::synthetic::{SceneConfig, SceneStyle};

#[derive(Parser)]
#[command(name = "lanemap", version, about = "Lane-level vector map pipelines")]
struct Cli {
    /// error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "warn")]
    log_level: log::LevelFilter,

    /// JSON object of flags for the sub-command (command-line flags win).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serialize an annotation file into token text.
    Serialize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        no_resample: bool,
        #[arg(long)]
        no_reorder: bool,
        /// Resampling interval in meters.
        #[arg(long, default_value_t = 6.0)]
        interval_m: f64,
        #[arg(long, default_value_t = 896)]
        patch_size: u32,
    },
    /// Build a global map patch by patch.
    Stitch {
        #[arg(long)]
        width: u32,
        #[arg(long)]
        height: u32,
        /// oracle:<gt.json> | noisy:<gt.json>,<sigma>,<drop> | exec:<cmd>
        #[arg(long)]
        generator: String,
        #[arg(long)]
        output: PathBuf,
        /// Per-patch report JSON.
        #[arg(long)]
        diagnostics: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Seconds to wait for an exec generator per patch.
        #[arg(long, default_value_t = 120.0)]
        timeout_s: f64,
        #[arg(long, default_value_t = 896)]
        patch_size: u32,
        #[arg(long, default_value_t = 40.0)]
        context_band: f64,
        #[arg(long, default_value_t = 4.0)]
        join_tolerance: f64,
        #[arg(long, default_value_t = 0.15)]
        mpp: f64,
        #[arg(long)]
        fail_fast: bool,
        #[arg(long)]
        bev_image: Option<String>,
    },
    /// Score a predicted map against ground truth.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        per_category: bool,
        /// Comma-separated Chamfer thresholds in meters.
        #[arg(long, default_value = "0.9,1.5,3.0,4.5")]
        chamfer_thresholds: String,
        /// Comma-separated mask IoU thresholds.
        #[arg(long, default_value = "0.5,0.55,0.6,0.65,0.7,0.75,0.8,0.85,0.9,0.95")]
        iou_thresholds: String,
        #[arg(long, default_value_t = 6)]
        line_width: u32,
    },
    /// Draw a map as SVG.
    Render {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        by_instance: bool,
        #[arg(long, default_value_t = 6.0)]
        stroke_width: f64,
    },
    /// Cut rotated training patches out of an annotation.
    Augment {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 896)]
        patch_size: u32,
        /// Comma-separated STRIDE@START center lattices.
        #[arg(long, default_value = "664@448,544@1268")]
        grids: String,
        /// Comma-separated inclinations in degrees.
        #[arg(long, default_value = "0,15,30,45,60,75")]
        angles: String,
        /// Comma-separated post rotations (90, 180, 270).
        #[arg(long, default_value = "90,180,270")]
        rotations: String,
        #[arg(long)]
        no_rotations: bool,
        /// Keep frames whose footprint leaves the image.
        #[arg(long)]
        keep_out_of_bounds: bool,
    },
    /// Link street-level poses to a satellite annotation.
    Geolink {
        /// Pose manifest (JSON lines).
        #[arg(long)]
        poses: PathBuf,
        /// Tile-origin sidecar JSON.
        #[arg(long)]
        origin: PathBuf,
        #[arg(long)]
        annotation: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 10)]
        max_frames: usize,
        #[arg(long, default_value_t = 60.0)]
        ahead_m: f64,
        #[arg(long, default_value_t = 30.0)]
        width_m: f64,
    },
    /// Convert an OpenSatMap-style annotation file.
    Import {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0.15)]
        mpp: f64,
    },
    /// Write a seeded synthetic scene.
    Synth {
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 4096)]
        width: u32,
        #[arg(long, default_value_t = 4096)]
        height: u32,
        #[arg(long, default_value_t = 220)]
        lines: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// octilinear or curved.
        #[arg(long, default_value = "octilinear")]
        style: String,
    },
}

fn list<T: FromStr>(flag: &str, s: &str) -> Result<Vec<T>>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse::<T>().with_context(|| format!("--{flag}: bad value {x:?}")))
        .collect()
}

fn grids(s: &str) -> Result<Vec<SweepGrid>> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|g| {
            let Some((stride, start)) = g.split_once('@') else {
                bail!("--grids: expected STRIDE@START, got {g:?}");
            };
            Ok(SweepGrid {
                stride_px: stride.parse().with_context(|| format!("--grids: bad stride {stride:?}"))?,
                start_px: start.parse().with_context(|| format!("--grids: bad start {start:?}"))?,
            })
        })
        .collect()
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Serialize { input, output, no_resample, no_reorder, interval_m, patch_size } => {
            let opts = SerializeOptions {
                resample: !no_resample,
                reorder: !no_reorder,
                sampling: SamplingConfig { interval_m, ..Default::default() },
                patch_size_px: patch_size,
            };
            commands::cmd_serialize(&input, &output, &opts)?;
        }
        Command::Stitch {
            width,
            height,
            generator,
            output,
            diagnostics,
            seed,
            timeout_s,
            patch_size,
            context_band,
            join_tolerance,
            mpp,
            fail_fast,
            bev_image,
        } => {
            if !(timeout_s > 0.0 && timeout_s.is_finite()) {
                bail!("--timeout-s must be positive");
            }
            let args = StitchArgs {
                width,
                height,
                generator: generator.parse::<GeneratorSpec>()?,
                config: StitchConfig {
                    patch_size_px: patch_size,
                    context_band_px: context_band,
                    join_tolerance_px: join_tolerance,
                    fail_fast,
                    meters_per_pixel: mpp,
                },
                seed,
                timeout: Duration::from_secs_f64(timeout_s),
                bev_image,
                output,
                diagnostics,
            };
            let summary = commands::cmd_stitch(&args)?;
            println!("{} lines", summary.lines);
            if !summary.failed_patches.is_empty() {
                eprintln!("error: generator failed on patches {:?}", summary.failed_patches);
                return Ok(ExitCode::from(2));
            }
        }
        Command::Eval { pred, gt, output, per_category, chamfer_thresholds, iou_thresholds, line_width } => {
            let ap = ApConfig {
                chamfer_thresholds_m: list("chamfer-thresholds", &chamfer_thresholds)?,
                mask_iou_thresholds: list("iou-thresholds", &iou_thresholds)?,
            };
            let text = commands::cmd_eval(&pred, &gt, &ap, line_width, per_category, output.as_deref())?;
            if output.is_none() {
                print!("{text}");
            }
        }
        Command::Render { input, output, by_instance, stroke_width } => {
            let opts = SvgOptions { stroke_width_px: stroke_width, by_instance };
            commands::cmd_render(&input, &output, &opts)?;
        }
        Command::Augment { input, out_dir, patch_size, grids: g, angles, rotations, no_rotations, keep_out_of_bounds } => {
            let cfg = AugmentSweepConfig {
                patch_size_px: patch_size,
                grids: grids(&g)?,
                angles_deg: list("angles", &angles)?,
                post_rotations_deg: if no_rotations { Vec::new() } else { list("rotations", &rotations)? },
                discard_out_of_bounds: !keep_out_of_bounds,
            };
            let n = commands::cmd_augment(&input, &out_dir, &cfg)?;
            println!("{n} samples");
        }
        Command::Geolink { poses, origin, annotation, out_dir, max_frames, ahead_m, width_m } => {
            let s = commands::cmd_geolink(&GeolinkArgs {
                poses,
                origin,
                annotation,
                out_dir,
                max_frames,
                field: PvFieldSpec { ahead_m, width_m },
            })?;
            println!("{} frames sampled, {} poses skipped", s.sampled, s.skipped);
        }
        Command::Import { input, out_dir, mpp } => {
            let written = commands::cmd_import(&input, &out_dir, mpp)?;
            println!("{} maps", written.len());
        }
        Command::Synth { output, width, height, lines, seed, style } => {
            let style = match style.as_str() {
                "octilinear" => SceneStyle::Octilinear,
                "curved" => SceneStyle::Curved,
                other => bail!("--style: expected octilinear or curved, got {other:?}"),
            };
            let cfg = SceneConfig { width_px: width, height_px: height, lines, seed, style, ..Default::default() };
            let n = commands::cmd_synth(&output, &cfg)?;
            println!("{n} lines");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let argv = match expand_config(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::FAILURE;
        }
    };
    let command = Cli::command().mut_subcommands(|c| c.args_override_self(true));
    let cli = match Cli::from_arg_matches(&command.get_matches_from(argv)) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    env_logger::Builder::new().filter_level(cli.log_level).format_timestamp(None).init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
