//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use lanemap_cli::commands::{cmd_augment, cmd_stitch, GeneratorSpec, StitchArgs};
use lanemap_core::augment::{generate_augmentation_sweep, AugmentSweepConfig, SweepGrid};
use lanemap_core::codec::{detokenize_str, round_half_up, serialize_map, ParseMode, Vocabulary};
use lanemap_core::geolink::{build_prompt, latlon_to_pixel, pixel_to_latlon, GeoPoint, PosedPoint, PromptArgs, PromptMode};
use lanemap_core::io::annotation_to_json;
use lanemap_core::metrics::{average_precision, chamfer_distance, evaluate, pseudo_score, ApConfig, RasterSpec};
use lanemap_core::model::{EndpointKind, LineCategory, LineRecord, LineType, Point2, VectorMap};
use lanemap_core::sampling::{resample_equidistant, SamplingConfig};
use lanemap_core::stitch::{run_state_update, unmatched_interior_cuts, NoisyOracleGenerator, OracleGenerator, StitchConfig, StitchInputs};
use lanemap_core::synthetic::{count_border_crossing, synthetic_scene, SceneConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn within(limit: Duration, elapsed: Duration) -> bool {
    elapsed < limit
}

fn line(id: &str, pts: &[(f64, f64)], category: LineCategory) -> LineRecord {
    LineRecord::new(id, pts.iter().map(|&p| Point2::from(p)).collect(), category, LineType::Solid).unwrap()
}

// 1. token format of the reference line
fn tab1_fidelity() -> Verdict {
    let t = Instant::now();
    let vocab = Vocabulary::default();
    let fixture = line("0", &[(257.0, 49.0), (376.0, 15.0)], LineCategory::Curb);
    let map = VectorMap::empty("fixture", 896, 896).with_lines(vec![fixture.clone()]);
    let rendered = serialize_map(&map, &vocab).unwrap().into_rendered();
    let prefix = "<{><points><:><[><[><257><,><49><]><,><[><376><,><15><]><]><,><category><:><Curb>";
    let decoded = detokenize_str(&rendered, &vocab, ParseMode::Strict).unwrap();
    let back = &decoded.map.lines;
    let recovered = back.len() == 1
        && back[0].points == fixture.points
        && back[0].category == fixture.category
        && back[0].line_type == fixture.line_type
        && decoded.diagnostics.is_empty();
    let elapsed = t.elapsed();
    verdict(
        rendered.starts_with(prefix) && recovered && within(Duration::from_secs(1), elapsed),
        format!("prefix match {}, round trip {recovered}, {elapsed:?}", rendered.starts_with(prefix)),
    )
}

// 2. randomized codec round trip
fn codec_round_trip() -> Verdict {
    let t = Instant::now();
    let vocab = Vocabulary::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut failures = 0;
    for m in 0..1000 {
        let n_lines = rng.random_range(0..=50);
        let mut lines = Vec::new();
        let mut expected = Vec::new();
        while lines.len() < n_lines {
            let n_pts = rng.random_range(2..=100);
            let pts: Vec<Point2> = (0..n_pts)
                .map(|_| Point2::new(rng.random_range(0.0..=895.0), rng.random_range(0.0..=895.0)))
                .collect();
            let mut rounded: Vec<(i64, i64)> = pts.iter().map(|p| (round_half_up(p.x), round_half_up(p.y))).collect();
            rounded.dedup();
            if rounded.len() < 2 || pts.windows(2).any(|w| w[0] == w[1]) {
                continue;
            }
            let kinds = [EndpointKind::Natural, EndpointKind::Cut];
            let l = LineRecord::new(
                lines.len().to_string(),
                pts,
                LineCategory::ALL[rng.random_range(0..3)],
                LineType::ALL[rng.random_range(0..LineType::ALL.len())],
            )
            .unwrap()
            .with_kinds(kinds[rng.random_range(0..2)], kinds[rng.random_range(0..2)]);
            expected.push((rounded, l.category, l.line_type, l.start_kind, l.end_kind));
            lines.push(l);
        }
        let map = VectorMap::empty(format!("m{m}"), 896, 896).with_lines(lines);
        let ok = serialize_map(&map, &vocab)
            .and_then(|s| detokenize_str(s.rendered(), &vocab, ParseMode::Strict))
            .map(|d| {
                let got: Vec<_> = d
                    .map
                    .lines
                    .iter()
                    .map(|l| {
                        let pts: Vec<(i64, i64)> = l.points.iter().map(|p| (p.x as i64, p.y as i64)).collect();
                        (pts, l.category, l.line_type, l.start_kind, l.end_kind)
                    })
                    .collect();
                got == expected && d.map.lines.iter().all(|l| l.points.iter().all(|p| p.x.fract() == 0.0 && p.y.fract() == 0.0))
            })
            .unwrap_or(false);
        if !ok {
            failures += 1;
        }
    }
    let elapsed = t.elapsed();
    verdict(
        failures == 0 && within(Duration::from_secs(30), elapsed),
        format!("1000 maps, {failures} failures, {elapsed:?}"),
    )
}

/// Arc-length position of `p` on `poly`, taken from the nearest segment.
fn arc_position(poly: &[Point2], p: Point2) -> f64 {
    let mut best = (f64::INFINITY, 0.0);
    let mut acc = 0.0;
    for s in poly.windows(2) {
        let (dx, dy) = (s[1].x - s[0].x, s[1].y - s[0].y);
        let len = dx.hypot(dy);
        let t = (((p.x - s[0].x) * dx + (p.y - s[0].y) * dy) / (len * len)).clamp(0.0, 1.0);
        let d = p.distance(&Point2::new(s[0].x + t * dx, s[0].y + t * dy));
        if d < best.0 - 1e-9 {
            best = (d, acc + t * len);
        }
        acc += len;
    }
    best.1
}

// 3. equidistant resampling
fn resampling() -> Verdict {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = SamplingConfig::default();
    let spacing = 6.0 / 0.15;
    let (mut bad_interior, mut bad_final, mut worst) = (0, 0, 0.0f64);
    for i in 0..1000 {
        // random walk with turns up to 90 degrees, so no segment folds back
        let n = rng.random_range(2..=30);
        let mut heading: f64 = rng.random_range(0.0..360.0);
        let mut pts = vec![Point2::new(rng.random_range(0.0..4096.0), rng.random_range(0.0..4096.0))];
        for _ in 1..n {
            heading += rng.random_range(-90.0..90.0);
            let len = rng.random_range(0.5..300.0);
            let last = pts[pts.len() - 1];
            pts.push(Point2::new(last.x + len * heading.to_radians().cos(), last.y + len * heading.to_radians().sin()));
        }
        let l = line(&i.to_string(), &pts.iter().map(|p| (p.x, p.y)).collect::<Vec<_>>(), LineCategory::LaneLine);
        let r = resample_equidistant(&l, &cfg, 0.15).unwrap();
        let pos: Vec<f64> = r.points.iter().map(|p| arc_position(&pts, *p)).collect();
        let gaps: Vec<f64> = pos.windows(2).map(|w| w[1] - w[0]).collect();
        for g in &gaps[..gaps.len() - 1] {
            worst = worst.max((g - spacing).abs());
            if (g - spacing).abs() > 1e-6 {
                bad_interior += 1;
            }
        }
        let last = gaps[gaps.len() - 1];
        if !(last > 0.0 && last <= spacing + 1e-6) {
            bad_final += 1;
        }
    }
    let elapsed = t.elapsed();
    verdict(
        bad_interior == 0 && bad_final == 0 && within(Duration::from_secs(10), elapsed),
        format!("max interior deviation {worst:.2e} px, {bad_interior} bad interior, {bad_final} bad final, {elapsed:?}"),
    )
}

fn stitch_oracle(gt: &VectorMap) -> VectorMap {
    let mut g = OracleGenerator::new(gt.clone());
    run_state_update(gt.width_px, gt.height_px, &mut g, &StitchConfig::default(), &StitchInputs::default())
        .unwrap()
        .map
}

// 4. oracle stitching over the full patch plan
fn oracle_stitch() -> Verdict {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let gt = synthetic_scene(&SceneConfig::default()).unwrap();
    let crossing = count_border_crossing(&gt, 896);
    let t = Instant::now();
    let (stitched, report) = pool.install(|| {
        let stitched = stitch_oracle(&gt);
        let report = evaluate(&stitched, &gt, &ApConfig::default(), &RasterSpec::new(4096, 4096)).unwrap();
        (stitched, report)
    });
    let elapsed = t.elapsed();

    let unmatched = unmatched_interior_cuts(&stitched, 1.0).len();
    let mut worst_px = 0.0f64;
    for g in &gt.lines {
        let best = stitched
            .lines
            .iter()
            .filter(|s| s.category == g.category)
            .map(|s| chamfer_distance(g, s, 1.0).unwrap())
            .fold(f64::INFINITY, f64::min);
        worst_px = worst_px.max(best);
    }
    let ap_ok = report.ap_c.values().all(|v| (v - 1.0).abs() <= 1e-6);
    let pass = gt.len() >= 200
        && crossing >= 50
        && unmatched == 0
        && worst_px <= 1.0
        && report.miou >= 0.99
        && ap_ok
        && within(Duration::from_secs(60), elapsed);
    verdict(
        pass,
        format!(
            "{} gt lines ({crossing} crossing), {} stitched, {unmatched} unmatched cuts, worst per-line chamfer {worst_px:.3} px, mIoU {:.4}, AP^C {:?}, {elapsed:?}",
            gt.len(),
            stitched.len(),
            report.miou,
            report.ap_c
        ),
    )
}

// 5. AP^C_0.9 against generator noise
fn noise_monotonicity() -> Verdict {
    let sigmas = [0.0, 1.0, 2.0, 4.0];
    let ap = ApConfig {
        chamfer_thresholds_m: vec![0.9],
        ..ApConfig::default()
    };
    let mut ok = true;
    let mut rows = Vec::new();
    for seed in 1..=5u64 {
        let gt = synthetic_scene(&SceneConfig {
            width_px: 2048,
            height_px: 2048,
            lines: 60,
            seed,
            ..Default::default()
        })
        .unwrap();
        let curve: Vec<f64> = sigmas
            .iter()
            .map(|&sigma| {
                let mut g = NoisyOracleGenerator::new(gt.clone(), sigma, 0.0, seed);
                let out = run_state_update(2048, 2048, &mut g, &StitchConfig::default(), &StitchInputs::default()).unwrap();
                evaluate(&out.map, &gt, &ap, &RasterSpec::new(2048, 2048)).unwrap().ap_c["0.9"]
            })
            .collect();
        ok &= curve.windows(2).all(|w| w[1] <= w[0]) && curve[3] < curve[0];
        rows.push(format!("seed {seed}: {}", curve.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(" ")));
    }
    verdict(ok, rows.join("; "))
}

fn brute_chamfer_px(a: &[Point2], b: &[Point2]) -> f64 {
    let dense = |pts: &[Point2]| -> Vec<Point2> {
        let total: f64 = pts.windows(2).map(|w| w[0].distance(&w[1])).sum();
        let mut out = Vec::new();
        let mut k = 0.0;
        while k < total - 1e-9 * total.max(1.0) {
            let mut rem = k;
            for w in pts.windows(2) {
                let len = w[0].distance(&w[1]);
                if rem <= len {
                    out.push(w[0].lerp(&w[1], rem / len));
                    break;
                }
                rem -= len;
            }
            k += 1.0;
        }
        let last = pts[pts.len() - 1];
        if out.last() != Some(&last) {
            out.push(last);
        }
        out
    };
    let (da, db) = (dense(a), dense(b));
    let one_way = |x: &[Point2], y: &[Point2]| {
        x.iter().map(|p| y.iter().map(|q| p.distance(q)).fold(f64::INFINITY, f64::min)).sum::<f64>() / x.len() as f64
    };
    0.5 * (one_way(&da, &db) + one_way(&db, &da))
}

// 6. metric oracles
fn metric_oracles() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for i in 0..200 {
        let mut poly = || -> Vec<(f64, f64)> {
            let n = rng.random_range(2..=6);
            let o = (rng.random_range(0.0..500.0), rng.random_range(0.0..500.0));
            (0..n)
                .map(|_| (o.0 + rng.random_range(-60.0..60.0), o.1 + rng.random_range(-60.0..60.0)))
                .collect()
        };
        let (a, b) = (poly(), poly());
        let (la, lb) = (line(&format!("a{i}"), &a, LineCategory::Curb), line(&format!("b{i}"), &b, LineCategory::Curb));
        let got = chamfer_distance(&la, &lb, 0.15).unwrap();
        let want = brute_chamfer_px(&la.points, &lb.points) * 0.15;
        worst = worst.max((got - want).abs());
    }
    // scores .9/.8/.7 hit, miss, hit against two ground truths:
    // precision 1, 1/2, 2/3 at recall 1/2, 1/2, 1. The envelope is 1 on
    // recall 0..0.50 (51 points) and 2/3 on 0.51..1.00 (50 points).
    let ap = average_precision(&[0.9, 0.8, 0.7], 2, |p, g| match (p, g) {
        (0, 0) | (2, 1) => Some(0.0),
        _ => None,
    });
    let ap_hand = (51.0 * 1.0 + 50.0 * (2.0 / 3.0)) / 101.0;
    let uniform = pseudo_score(&[0.0, 0.0, 0.0]).unwrap();
    let base = [0.3, -1.2, 2.5];
    let shifted = base.map(|v| v + 7.3);
    let shift_err = (pseudo_score(&base).unwrap() - pseudo_score(&shifted).unwrap()).abs();
    let pass = worst <= 1e-9 && ap == ap_hand && uniform == 1.0 / 3.0 && shift_err <= 1e-12;
    verdict(
        pass,
        format!("chamfer max error {worst:.1e} m, AP {ap} vs {ap_hand}, pseudo-score {uniform}, shift error {shift_err:.1e}"),
    )
}

// 7. sweep enumeration against AABB containment
fn sweep_counts() -> Verdict {
    let angles = [0.0, 15.0, 30.0, 45.0, 60.0, 75.0];
    let grids = [SweepGrid { stride_px: 664, start_px: 448.0 }, SweepGrid { stride_px: 544, start_px: 1268.0 }];
    let mut mismatches = Vec::new();
    let mut total = 0;
    for size in [896u32, 2048, 4096] {
        for grid in grids {
            for angle in angles {
                let cfg = AugmentSweepConfig {
                    grids: vec![grid],
                    angles_deg: vec![angle],
                    ..AugmentSweepConfig::default()
                };
                let got: Vec<(f64, f64)> = generate_augmentation_sweep(size, size, &cfg)
                    .unwrap()
                    .iter()
                    .map(|f| (f.center.x, f.center.y))
                    .collect();
                let (s, c) = (angle as f64).to_radians().sin_cos();
                let h = 448.0;
                let corners = [(-h, -h), (h, -h), (h, h), (-h, h)];
                let lim = size as f64;
                let mut want = Vec::new();
                for ky in 0..=(size / grid.stride_px + 2) {
                    for kx in 0..=(size / grid.stride_px + 2) {
                        let (cx, cy) = (grid.start_px + (kx * grid.stride_px) as f64, grid.start_px + (ky * grid.stride_px) as f64);
                        let xs = corners.map(|(u, v)| cx + u * c - v * s);
                        let ys = corners.map(|(u, v)| cy + u * s + v * c);
                        let inside = |vals: [f64; 4]| vals.iter().all(|&v| v >= -1e-6 && v <= lim + 1e-6);
                        if inside(xs) && inside(ys) {
                            want.push((cx, cy));
                        }
                    }
                }
                total += got.len();
                if got != want {
                    mismatches.push(format!("{size} stride {} angle {angle}: {} vs {}", grid.stride_px, got.len(), want.len()));
                }
            }
        }
    }
    verdict(
        mismatches.is_empty(),
        if mismatches.is_empty() {
            format!("36 configurations, {total} frames")
        } else {
            mismatches.join("; ")
        },
    )
}

// 8. Web Mercator round trip
fn geo_round_trip() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for zoom in [0u8, 10, 20] {
        for _ in 0..10_000 {
            let g = GeoPoint::new(rng.random_range(-85.05..85.05), rng.random_range(-180.0..180.0)).unwrap();
            let back = pixel_to_latlon(latlon_to_pixel(g, zoom).unwrap(), zoom).unwrap();
            worst = worst.max((back.lat - g.lat).abs()).max((back.lon - g.lon).abs());
        }
    }
    let origin = latlon_to_pixel(GeoPoint::new(0.0, 0.0).unwrap(), 20).unwrap();
    verdict(
        worst <= 1e-9 && origin == Point2::new(134217728.0, 134217728.0),
        format!("max error {worst:.1e} deg over 30000 points, origin at zoom 20 -> ({}, {})", origin.x, origin.y),
    )
}

// 9. prompt templates
fn prompt_fidelity() -> Verdict {
    let posed = |x: f64, y: f64, a: f64| PosedPoint { point: Point2::new(x, y), heading_deg: a };
    let args = PromptArgs {
        pv: Some(vec![posed(120.0, 640.0, 90.0), posed(300.0, 512.0, 45.0)]),
        endpoints: Some((Point2::new(12.0, 34.0), Point2::new(560.0, 78.0))),
        trace: Some(vec![posed(10.0, 20.0, 0.0), posed(30.0, 40.0, 359.0)]),
    };
    let pv = "[{<pv frame>, point: [120,640], angle: 90}, {<pv frame>, point: [300,512], angle: 45}]";
    let rows = [
        (PromptMode::Bev, "<image>Please construct the entire road map in the satellite image.".to_string()),
        (PromptMode::Pv, format!("Please construct the road map referring to the perspective frames: {pv}")),
        (
            PromptMode::BevPv,
            format!("<image>Please construct the entire road map in the satellite image, referring to the perspective frames: {pv}"),
        ),
        (
            PromptMode::BevEndpoints,
            "<image>Please construct the road map from (12,34) to (560,78) in the satellite image.".to_string(),
        ),
        (
            PromptMode::BevTrace,
            "<image>Please construct the target road map in the satellite image, around the trace points: [{point: [10,20], angle: 0},{point: [30,40], angle: 359}]".to_string(),
        ),
        (
            PromptMode::BevPvTrace,
            format!("<image>Please construct the target road map in the satellite image, referring to the perspective frames and trace points: {pv}"),
        ),
    ];
    let wrong: Vec<&str> = rows
        .iter()
        .filter(|(mode, want)| build_prompt(*mode, &args).ok().as_deref() != Some(want.as_str()))
        .map(|(mode, _)| mode.name())
        .collect();
    verdict(wrong.is_empty(), if wrong.is_empty() { "6 of 6 rows byte-exact".into() } else { format!("mismatch: {wrong:?}") })
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_type().unwrap().is_file())
        .map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap()))
        .collect();
    out.sort();
    out
}

// 10. repeated runs give identical bytes
fn determinism() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let gt_path = tmp.path().join("scene.json");
    let gt = synthetic_scene(&SceneConfig::default()).unwrap();
    fs::write(&gt_path, annotation_to_json(&gt)).unwrap();
    let aug_parent = tmp.path().join("parent.json");
    fs::write(
        &aug_parent,
        annotation_to_json(&synthetic_scene(&SceneConfig { width_px: 2048, height_px: 2048, lines: 60, seed: 9, ..Default::default() }).unwrap()),
    )
    .unwrap();

    let run = |k: usize| {
        let out = tmp.path().join(format!("run{k}"));
        for (name, generator) in [
            ("oracle", GeneratorSpec::Oracle(gt_path.clone())),
            ("noisy", GeneratorSpec::Noisy { gt: gt_path.clone(), sigma_px: 2.0, drop_prob: 0.1 }),
        ] {
            cmd_stitch(&StitchArgs {
                width: 4096,
                height: 4096,
                generator,
                config: StitchConfig::default(),
                seed: 17,
                timeout: Duration::from_secs(10),
                bev_image: None,
                output: out.join(format!("{name}.json")),
                diagnostics: Some(out.join(format!("{name}_patches.json"))),
            })
            .unwrap();
        }
        cmd_augment(&aug_parent, &out.join("augment"), &AugmentSweepConfig::default()).unwrap();
        let mut files = dir_bytes(&out);
        files.extend(dir_bytes(&out.join("augment")));
        files
    };
    let (a, b) = (run(1), run(2));
    let differing = a.iter().zip(&b).filter(|(x, y)| x != y).count();
    verdict(
        a.len() == b.len() && differing == 0 && a.len() > 4,
        format!("{} files per run, {differing} differ", a.len()),
    )
}

fn main() -> ExitCode {
    let criteria: [(u8, &str, fn() -> Verdict); 10] = [
        (1, "token format fixture", tab1_fidelity),
        (2, "codec round trip", codec_round_trip),
        (3, "equidistant resampling", resampling),
        (4, "oracle stitch end to end", oracle_stitch),
        (5, "noise monotonicity", noise_monotonicity),
        (6, "metric oracles", metric_oracles),
        (7, "augmentation sweep counts", sweep_counts),
        (8, "geo round trip", geo_round_trip),
        (9, "prompt fidelity", prompt_fidelity),
        (10, "determinism", determinism),
    ];
    let mut failed = 0;
    for (id, name, check) in criteria {
        let v = check();
        if !v.pass {
            failed += 1;
        }
        println!("criterion {id:>2} {}: {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
