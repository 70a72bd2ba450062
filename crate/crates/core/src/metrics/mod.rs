//! Map quality metrics: rasterized IoU, Chamfer AP, mask AP and the per-line
//! pseudo-score.

mod ap;
mod chamfer;
mod raster;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use ap::{average_precision, RECALL_POINTS};
pub use chamfer::chamfer_distance;
pub use raster::{mask_iou, rasterize, Bitmask, RasterSpec};

use crate::error::{Error, Result};
use crate::model::{LineCategory, LineRecord, VectorMap};
use chamfer::{chamfer_samples, dense_samples};
use raster::InstanceMask;

/// Largest softmax probability of a logit vector.
pub fn pseudo_score(logits: &[f64]) -> Result<f64> {
    if logits.is_empty() {
        return Err(Error::InvalidInput("pseudo-score needs at least one logit".into()));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("logits must be finite".into()));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let denom: f64 = logits.iter().map(|o| (o - max).exp()).sum();
    Ok(1.0 / denom)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ApConfig {
    pub chamfer_thresholds_m: Vec<f64>,
    pub mask_iou_thresholds: Vec<f64>,
}

impl Default for ApConfig {
    fn default() -> Self {
        ApConfig {
            chamfer_thresholds_m: vec![0.9, 1.5, 3.0, 4.5],
            mask_iou_thresholds: (0..10).map(|k| (50 + 5 * k) as f64 / 100.0).collect(),
        }
    }
}

impl ApConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, t) in [("chamfer", &self.chamfer_thresholds_m), ("mask IoU", &self.mask_iou_thresholds)] {
            if t.is_empty() || t.iter().any(|v| !(*v > 0.0)) || t.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidInput(format!(
                    "{name} thresholds must be positive and strictly ascending"
                )));
            }
        }
        Ok(())
    }
}

/// Per-category and mean IoU of rasterized maps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IouReport {
    pub per_category: BTreeMap<String, f64>,
    pub mean: f64,
}

/// IoU per category over rasterized lines; a category absent from both maps
/// scores 1. The mean runs over the three line categories.
pub fn miou(pred: &VectorMap, gt: &VectorMap, spec: &RasterSpec) -> Result<IouReport> {
    spec.validate()?;
    let mut per_category = BTreeMap::new();
    let mut total = 0.0;
    for cat in LineCategory::ALL {
        let pick = |m: &VectorMap| -> Vec<LineRecord> {
            m.lines.iter().filter(|l| l.category == *cat).cloned().collect()
        };
        let iou = mask_iou(&rasterize(&pick(pred), spec), &rasterize(&pick(gt), spec))?;
        per_category.insert(cat.name().to_string(), iou);
        total += iou;
    }
    Ok(IouReport {
        per_category,
        mean: total / LineCategory::ALL.len() as f64,
    })
}

/// Report keys for thresholds: one decimal when that is exact, otherwise the
/// shortest round-trip form.
pub fn threshold_key(t: f64) -> String {
    let short = format!("{t:.1}");
    if short.parse::<f64>() == Ok(t) {
        short
    } else {
        t.to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub ap_c: BTreeMap<String, f64>,
    pub ap_m: f64,
    pub ap_m_50: Option<f64>,
    pub ap_m_75: Option<f64>,
    pub miou: f64,
    pub per_category_iou: BTreeMap<String, f64>,
}

fn bbox(line: &LineRecord) -> (f64, f64, f64, f64) {
    line.points.iter().fold(
        (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), p| (a.min(p.x), b.min(p.y), c.max(p.x), d.max(p.y)),
    )
}

fn bbox_gap(a: (f64, f64, f64, f64), b: (f64, f64, f64, f64)) -> f64 {
    let dx = (b.0 - a.2).max(a.0 - b.2).max(0.0);
    let dy = (b.1 - a.3).max(a.1 - b.3).max(0.0);
    dx.hypot(dy)
}

/// Pairwise Chamfer distances in meters for same-category pairs. Pairs whose
/// bounding boxes are farther apart than `cutoff_m` are left at infinity;
/// the Chamfer distance is never below the box gap.
fn chamfer_matrix(pred: &[LineRecord], gt: &[LineRecord], mpp: f64, cutoff_m: f64) -> Vec<Vec<f64>> {
    let gt_samples: Vec<_> = gt.iter().map(|l| dense_samples(&l.points)).collect();
    let gt_boxes: Vec<_> = gt.iter().map(bbox).collect();
    pred.par_iter()
        .map(|p| {
            let ps = dense_samples(&p.points);
            let pb = bbox(p);
            gt.iter()
                .enumerate()
                .map(|(j, g)| {
                    if g.category != p.category || bbox_gap(pb, gt_boxes[j]) * mpp > cutoff_m {
                        f64::INFINITY
                    } else {
                        chamfer_samples(&ps, &gt_samples[j]) * mpp
                    }
                })
                .collect()
        })
        .collect()
}

fn iou_matrix(pred: &[LineRecord], gt: &[LineRecord], spec: &RasterSpec) -> Vec<Vec<f64>> {
    let gm: Vec<_> = gt.par_iter().map(|l| InstanceMask::from_line(&l.points, spec)).collect();
    pred.par_iter()
        .map(|p| {
            let pm = InstanceMask::from_line(&p.points, spec);
            gt.iter()
                .zip(&gm)
                .map(|(g, m)| if g.category == p.category { pm.iou(m) } else { 0.0 })
                .collect()
        })
        .collect()
}

fn has_extent(l: &LineRecord) -> bool {
    l.points.len() >= 2 && l.length_px() > 0.0
}

/// Full metric report of `pred` against `gt`.
///
/// Predictions without a score count as 1.0. Chamfer and mask AP pool all
/// categories and require category equality for a match. Lines without
/// extent cannot be measured and are rejected.
pub fn evaluate(pred: &VectorMap, gt: &VectorMap, cfg: &ApConfig, spec: &RasterSpec) -> Result<MetricReport> {
    cfg.validate()?;
    spec.validate()?;
    if (pred.width_px, pred.height_px) != (gt.width_px, gt.height_px) {
        return Err(Error::DimensionMismatch(format!(
            "prediction is {}x{}, ground truth is {}x{}",
            pred.width_px, pred.height_px, gt.width_px, gt.height_px
        )));
    }
    if let Some(l) = pred.lines.iter().chain(&gt.lines).find(|l| !has_extent(l)) {
        return Err(Error::InvalidGeometry(format!("line {:?} has no extent", l.id)));
    }
    let mpp = gt.meters_per_pixel;
    let scores: Vec<f64> = pred.lines.iter().map(|l| l.score.unwrap_or(1.0)).collect();
    let n_gt = gt.lines.len();

    let cutoff = cfg.chamfer_thresholds_m.last().copied().unwrap_or(0.0);
    let cd = chamfer_matrix(&pred.lines, &gt.lines, mpp, cutoff);
    let ap_c = cfg
        .chamfer_thresholds_m
        .iter()
        .map(|&t| {
            let ap = average_precision(&scores, n_gt, |p, g| (cd[p][g] <= t).then_some(cd[p][g]));
            (threshold_key(t), ap)
        })
        .collect();

    let ious = iou_matrix(&pred.lines, &gt.lines, spec);
    let mask_ap: Vec<(f64, f64)> = cfg
        .mask_iou_thresholds
        .iter()
        .map(|&t| {
            let ap = average_precision(&scores, n_gt, |p, g| (ious[p][g] >= t).then_some(1.0 - ious[p][g]));
            (t, ap)
        })
        .collect();
    let ap_m = mask_ap.iter().map(|(_, a)| a).sum::<f64>() / mask_ap.len() as f64;
    let at = |x: f64| mask_ap.iter().find(|(t, _)| (t - x).abs() < 1e-12).map(|(_, a)| *a);

    let iou = miou(pred, gt, spec)?;
    Ok(MetricReport {
        ap_c,
        ap_m,
        ap_m_50: at(0.5),
        ap_m_75: at(0.75),
        miou: iou.mean,
        per_category_iou: iou.per_category,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LineType, Point2};

    #[test]
    fn pseudo_score_examples() {
        assert_eq!(pseudo_score(&[0.0, 0.0, 0.0]).unwrap(), 1.0 / 3.0);
        assert_eq!(pseudo_score(&[-4.2]).unwrap(), 1.0);
        let direct = 10f64.exp() / (10f64.exp() + 2.0);
        assert!((pseudo_score(&[10.0, 0.0, 0.0]).unwrap() - direct).abs() < 1e-15);
        assert!(matches!(pseudo_score(&[]), Err(Error::InvalidInput(_))));
        assert!(pseudo_score(&[1000.0, 0.0]).unwrap().is_finite());
        let a = pseudo_score(&[0.3, -1.0, 2.2]).unwrap();
        let b = pseudo_score(&[7.6, 6.3, 9.5]).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn threshold_keys() {
        assert_eq!(threshold_key(0.9), "0.9");
        assert_eq!(threshold_key(3.0), "3.0");
        assert_eq!(threshold_key(0.75), "0.75");
    }

    fn map(lines: &[(LineCategory, [(f64, f64); 2])]) -> VectorMap {
        let lines = lines
            .iter()
            .enumerate()
            .map(|(i, (c, pts))| {
                LineRecord::new(i.to_string(), pts.iter().map(|&p| Point2::from(p)).collect(), *c, LineType::Solid)
                    .unwrap()
            })
            .collect();
        VectorMap::empty("m", 400, 400).with_lines(lines)
    }

    #[test]
    fn perfect_prediction() {
        let gt = map(&[
            (LineCategory::Curb, [(10.0, 10.0), (300.0, 40.0)]),
            (LineCategory::LaneLine, [(10.0, 100.0), (300.0, 120.0)]),
        ]);
        let spec = RasterSpec::new(400, 400);
        let r = evaluate(&gt, &gt, &ApConfig::default(), &spec).unwrap();
        assert!(r.ap_c.values().all(|&v| v == 1.0));
        assert_eq!((r.ap_m, r.ap_m_50, r.ap_m_75, r.miou), (1.0, Some(1.0), Some(1.0), 1.0));
        assert_eq!(r.per_category_iou["VirtualLine"], 1.0);
        let keys: Vec<_> = r.ap_c.keys().cloned().collect();
        assert_eq!(keys, ["0.9", "1.5", "3.0", "4.5"]);
    }

    #[test]
    fn empty_prediction() {
        let gt = map(&[(LineCategory::Curb, [(10.0, 10.0), (300.0, 40.0)])]);
        let r = evaluate(&VectorMap::empty("p", 400, 400), &gt, &ApConfig::default(), &RasterSpec::new(400, 400)).unwrap();
        assert!(r.ap_c.values().all(|&v| v == 0.0));
        assert_eq!(r.per_category_iou["Curb"], 0.0);
        assert_eq!(r.per_category_iou["LaneLine"], 1.0);
        assert!((r.miou - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn shifted_lines_iou_matches_pixel_count() {
        let spec = RasterSpec::new(400, 400);
        let gt = map(&[(LineCategory::LaneLine, [(50.0, 100.0), (250.0, 100.0)])]);
        let pred = map(&[(LineCategory::LaneLine, [(50.0, 106.0), (250.0, 106.0)])]);
        let r = miou(&pred, &gt, &spec).unwrap();
        let (a, b) = (rasterize(&pred.lines, &spec), rasterize(&gt.lines, &spec));
        let (mut inter, mut union) = (0, 0);
        for y in 0..400 {
            for x in 0..400 {
                inter += u32::from(a.get(x, y) && b.get(x, y));
                union += u32::from(a.get(x, y) || b.get(x, y));
            }
        }
        assert_eq!(r.per_category["LaneLine"], inter as f64 / union as f64);
        assert!(r.per_category["LaneLine"] < 0.1);
    }

    #[test]
    fn wrong_category_never_matches() {
        let gt = map(&[(LineCategory::Curb, [(10.0, 10.0), (300.0, 40.0)])]);
        let pred = map(&[(LineCategory::VirtualLine, [(10.0, 10.0), (300.0, 40.0)])]);
        let r = evaluate(&pred, &gt, &ApConfig::default(), &RasterSpec::new(400, 400)).unwrap();
        assert_eq!(r.ap_c["4.5"], 0.0);
        assert_eq!(r.ap_m, 0.0);
    }

    #[test]
    fn frame_mismatch() {
        let gt = map(&[]);
        let pred = VectorMap::empty("p", 300, 400);
        assert!(matches!(
            evaluate(&pred, &gt, &ApConfig::default(), &RasterSpec::new(400, 400)),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
