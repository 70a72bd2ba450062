use std::cmp::Ordering;

/// Number of recall points of the interpolated precision curve.
pub const RECALL_POINTS: usize = 101;

/// Average precision of scored predictions against `num_gt` ground-truth
/// instances.
///
/// Predictions are visited by descending score (ties keep input order). Each
/// claims the unclaimed ground truth with the lowest match cost, where
/// `cost(pred, gt)` is `None` for pairs that do not match (use a distance, or
/// `1 - IoU`). The result is the mean of the interpolated precision envelope
/// at recall `0.00, 0.01, ..., 1.00`.
///
/// With no ground truth the AP is 1 when there are no predictions and 0
/// otherwise.
pub fn average_precision(scores: &[f64], num_gt: usize, cost: impl Fn(usize, usize) -> Option<f64>) -> f64 {
    if num_gt == 0 {
        return if scores.is_empty() { 1.0 } else { 0.0 };
    }
    let hits = greedy_hits(scores, num_gt, cost);
    interpolated_ap(&hits, num_gt)
}

/// True-positive flags in score order.
pub(crate) fn greedy_hits(scores: &[f64], num_gt: usize, cost: impl Fn(usize, usize) -> Option<f64>) -> Vec<bool> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal));
    let mut taken = vec![false; num_gt];
    order
        .into_iter()
        .map(|p| {
            let best = (0..num_gt)
                .filter(|&g| !taken[g])
                .filter_map(|g| cost(p, g).map(|c| (c, g)))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            match best {
                Some((_, g)) => {
                    taken[g] = true;
                    true
                }
                None => false,
            }
        })
        .collect()
}

pub(crate) fn interpolated_ap(hits: &[bool], num_gt: usize) -> f64 {
    let mut precision = Vec::with_capacity(hits.len());
    let mut recall = Vec::with_capacity(hits.len());
    let mut tp = 0usize;
    for (i, &hit) in hits.iter().enumerate() {
        tp += usize::from(hit);
        precision.push(tp as f64 / (i + 1) as f64);
        recall.push(tp as f64 / num_gt as f64);
    }
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    // each recall point reads the envelope at the first index reaching it;
    // runs of points sharing an index are summed as value * count
    let mut sum = 0.0;
    let mut run: Option<(usize, usize)> = None;
    let mut i = 0;
    for k in 0..RECALL_POINTS {
        let r = k as f64 / (RECALL_POINTS - 1) as f64;
        while i < recall.len() && recall[i] < r {
            i += 1;
        }
        if i == recall.len() {
            break;
        }
        run = match run {
            Some((j, n)) if j == i => Some((j, n + 1)),
            Some((j, n)) => {
                sum += precision[j] * n as f64;
                Some((i, 1))
            }
            None => Some((i, 1)),
        };
    }
    if let Some((j, n)) = run {
        sum += precision[j] * n as f64;
    }
    sum / RECALL_POINTS as f64
}
