//! `evaluate` against a second, deliberately naive implementation of the same
//! metric definitions, on noisy stitched scenes.

use std::collections::BTreeSet;

use lanemap_core::metrics::{evaluate, threshold_key, ApConfig, RasterSpec};
use lanemap_core::model::{LineCategory, LineRecord, Point2, VectorMap};
use lanemap_core::stitch::{run_state_update, NoisyOracleGenerator, StitchConfig, StitchInputs};
use lanemap_core::synthetic::{synthetic_scene, SceneConfig, SceneStyle};

fn seg_dist(p: (f64, f64), a: Point2, b: Point2) -> f64 {
    let (vx, vy) = (b.x - a.x, b.y - a.y);
    let (wx, wy) = (p.0 - a.x, p.1 - a.y);
    let c1 = vx * wx + vy * wy;
    if c1 <= 0.0 {
        return wx.hypot(wy);
    }
    let c2 = vx * vx + vy * vy;
    if c2 <= c1 {
        return (p.0 - b.x).hypot(p.1 - b.y);
    }
    let t = c1 / c2;
    (p.0 - (a.x + t * vx)).hypot(p.1 - (a.y + t * vy))
}

/// Pixel indices whose centers lie within `r` of the polyline.
fn stroke(points: &[Point2], w: u32, h: u32, r: f64) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    for s in points.windows(2) {
        let x0 = (s[0].x.min(s[1].x) - r - 1.0).floor().max(0.0) as u32;
        let x1 = ((s[0].x.max(s[1].x) + r + 1.0).ceil().max(0.0) as u32).min(w);
        let y0 = (s[0].y.min(s[1].y) - r - 1.0).floor().max(0.0) as u32;
        let y1 = ((s[0].y.max(s[1].y) + r + 1.0).ceil().max(0.0) as u32).min(h);
        for y in y0..y1 {
            for x in x0..x1 {
                if seg_dist((x as f64 + 0.5, y as f64 + 0.5), s[0], s[1]) <= r {
                    out.insert(y as usize * w as usize + x as usize);
                }
            }
        }
    }
    out
}

fn iou(a: &BTreeSet<usize>, b: &BTreeSet<usize>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Points every 1 px of arc length, plus the last vertex.
fn dense(points: &[Point2]) -> Vec<Point2> {
    let total: f64 = points.windows(2).map(|w| w[0].distance(&w[1])).sum();
    let mut out = Vec::new();
    let mut k = 0u64;
    while (k as f64) < total - 1e-9 * total.max(1.0) {
        let mut rem = k as f64;
        for w in points.windows(2) {
            let len = w[0].distance(&w[1]);
            if rem <= len {
                out.push(w[0].lerp(&w[1], rem / len));
                break;
            }
            rem -= len;
        }
        k += 1;
    }
    let last = points[points.len() - 1];
    if out.last() != Some(&last) {
        out.push(last);
    }
    out
}

fn chamfer_px(a: &[Point2], b: &[Point2]) -> f64 {
    let one = |x: &[Point2], y: &[Point2]| {
        x.iter().map(|p| y.iter().map(|q| p.distance(q)).fold(f64::INFINITY, f64::min)).sum::<f64>() / x.len() as f64
    };
    0.5 * (one(a, b) + one(b, a))
}

/// Greedy matching in descending score order, then the 101-point
/// interpolated precision. `cost` is `None` when the pair cannot match.
fn ap(scores: &[f64], n_gt: usize, cost: &dyn Fn(usize, usize) -> Option<f64>) -> f64 {
    if n_gt == 0 {
        return if scores.is_empty() { 1.0 } else { 0.0 };
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
    let mut taken = vec![false; n_gt];
    let mut tp = 0.0;
    let mut curve = Vec::new();
    for (rank, &p) in order.iter().enumerate() {
        let mut best: Option<(f64, usize)> = None;
        for g in 0..n_gt {
            if taken[g] {
                continue;
            }
            if let Some(c) = cost(p, g) {
                if best.is_none_or(|(bc, _)| c < bc) {
                    best = Some((c, g));
                }
            }
        }
        if let Some((_, g)) = best {
            taken[g] = true;
            tp += 1.0;
        }
        curve.push((tp / n_gt as f64, tp / (rank + 1) as f64));
    }
    let mut sum = 0.0;
    for i in 0..=100 {
        let r = i as f64 / 100.0;
        sum += curve.iter().filter(|(rec, _)| *rec >= r - 1e-12).map(|(_, p)| *p).fold(0.0, f64::max);
    }
    sum / 101.0
}

struct Reference {
    ap_c: Vec<f64>,
    ap_m: f64,
    miou: f64,
}

fn reference(pred: &VectorMap, gt: &VectorMap, cfg: &ApConfig) -> Reference {
    let (w, h, mpp) = (gt.width_px, gt.height_px, gt.meters_per_pixel);
    let scores: Vec<f64> = pred.lines.iter().map(|l| l.score.unwrap_or(1.0)).collect();
    let pd: Vec<_> = pred.lines.iter().map(|l| dense(&l.points)).collect();
    let gd: Vec<_> = gt.lines.iter().map(|l| dense(&l.points)).collect();
    let same = |p: usize, g: usize| pred.lines[p].category == gt.lines[g].category;
    let cd: Vec<Vec<f64>> = (0..pd.len())
        .map(|p| (0..gd.len()).map(|g| if same(p, g) { chamfer_px(&pd[p], &gd[g]) * mpp } else { f64::INFINITY }).collect())
        .collect();
    let ap_c = cfg
        .chamfer_thresholds_m
        .iter()
        .map(|&t| ap(&scores, gt.len(), &|p, g| (cd[p][g] <= t).then_some(cd[p][g])))
        .collect();

    let pm: Vec<_> = pred.lines.iter().map(|l| stroke(&l.points, w, h, 3.0)).collect();
    let gm: Vec<_> = gt.lines.iter().map(|l| stroke(&l.points, w, h, 3.0)).collect();
    let ious: Vec<Vec<f64>> =
        (0..pm.len()).map(|p| (0..gm.len()).map(|g| if same(p, g) { iou(&pm[p], &gm[g]) } else { 0.0 }).collect()).collect();
    let ap_m = cfg
        .mask_iou_thresholds
        .iter()
        .map(|&t| ap(&scores, gt.len(), &|p, g| (ious[p][g] >= t).then_some(1.0 - ious[p][g])))
        .sum::<f64>()
        / cfg.mask_iou_thresholds.len() as f64;

    let union_of = |lines: &[LineRecord], masks: &[BTreeSet<usize>], c: LineCategory| -> BTreeSet<usize> {
        lines.iter().zip(masks).filter(|(l, _)| l.category == c).flat_map(|(_, m)| m.iter().copied()).collect()
    };
    let miou = LineCategory::ALL
        .iter()
        .map(|&c| iou(&union_of(&pred.lines, &pm, c), &union_of(&gt.lines, &gm, c)))
        .sum::<f64>()
        / 3.0;
    Reference { ap_c, ap_m, miou }
}

#[test]
fn evaluate_matches_reference_on_noisy_scenes() {
    let cfg = ApConfig::default();
    for seed in 0..10u64 {
        let gt = synthetic_scene(&SceneConfig {
            width_px: 1792,
            height_px: 1792,
            lines: 20,
            seed,
            style: if seed % 2 == 0 { SceneStyle::Curved } else { SceneStyle::Octilinear },
            ..Default::default()
        })
        .unwrap();
        let mut g = NoisyOracleGenerator::new(gt.clone(), 0.5 + seed as f64 * 0.4, 0.1, seed);
        let pred = run_state_update(1792, 1792, &mut g, &StitchConfig::default(), &StitchInputs::default())
            .unwrap()
            .map;
        let got = evaluate(&pred, &gt, &cfg, &RasterSpec::new(1792, 1792)).unwrap();
        let want = reference(&pred, &gt, &cfg);
        for (t, w) in cfg.chamfer_thresholds_m.iter().zip(&want.ap_c) {
            let v = got.ap_c[&threshold_key(*t)];
            assert!((v - w).abs() < 1e-12, "seed {seed} AP^C@{t}: {v} vs {w}");
        }
        assert!((got.ap_m - want.ap_m).abs() < 1e-12, "seed {seed} AP^M: {} vs {}", got.ap_m, want.ap_m);
        assert!((got.miou - want.miou).abs() < 1e-12, "seed {seed} mIoU: {} vs {}", got.miou, want.miou);
    }
}
