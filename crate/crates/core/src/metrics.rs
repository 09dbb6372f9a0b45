//! ROC/AUC and membership-advantage evaluation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// `(fpr, tpr)` from `(0, 0)` to `(1, 1)`, one point per distinct score.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
    pub positives: usize,
    pub negatives: usize,
}

impl RocCurve {
    /// AUC of whichever score orientation ranks better.
    pub fn oriented_auc(&self) -> f64 {
        self.auc.max(1.0 - self.auc)
    }

    /// Highest TPR reachable at FPR at most `fpr`.
    pub fn tpr_at_fpr(&self, fpr: f64) -> f64 {
        self.points
            .iter()
            .filter(|(f, _)| *f <= fpr + 1e-12)
            .map(|(_, t)| *t)
            .fold(0.0, f64::max)
    }
}

fn class_counts(labels: &[bool]) -> Result<(usize, usize)> {
    let pos = labels.iter().filter(|l| **l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Metric(format!("need both classes, got {pos} positives and {neg} negatives")));
    }
    Ok((pos, neg))
}

/// ROC curve over all distinct thresholds (higher score means "member") with
/// AUC from the rank statistic, ties counted one half.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(Error::Metric("scores and labels differ in length".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Metric("NaN score".into()));
    }
    let (pos, neg) = class_counts(labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    Ok(RocCurve {
        auc: rank_auc(scores, labels, pos, neg),
        points,
        positives: pos,
        negatives: neg,
    })
}

/// Mann-Whitney statistic with mid-ranks.
fn rank_auc(scores: &[f64], labels: &[bool], pos: usize, neg: usize) -> f64 {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j share their mean
        let mid = (i + 1 + j) as f64 / 2.0;
        rank_sum += mid * order[i..j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j;
    }
    let p = pos as f64;
    (rank_sum - p * (p + 1.0) / 2.0) / (p * neg as f64)
}

/// Trapezoidal area under a piecewise-linear curve.
pub fn trapezoid_auc(points: &[(f64, f64)]) -> f64 {
    points.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum()
}

/// Empirical `TPR - FPR`.
pub fn membership_advantage(decisions: &[bool], labels: &[bool]) -> Result<f64> {
    let (tpr, fpr) = tpr_fpr(decisions, labels)?;
    Ok(tpr - fpr)
}

pub fn tpr_fpr(decisions: &[bool], labels: &[bool]) -> Result<(f64, f64)> {
    if decisions.len() != labels.len() {
        return Err(Error::Metric("decisions and labels differ in length".into()));
    }
    let (pos, neg) = class_counts(labels)?;
    let tp = decisions.iter().zip(labels).filter(|(d, l)| **d && **l).count();
    let fp = decisions.iter().zip(labels).filter(|(d, l)| **d && !**l).count();
    Ok((tp as f64 / pos as f64, fp as f64 / neg as f64))
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => v[n / 2],
        _ => (v[n / 2 - 1] + v[n / 2]) / 2.0,
    }
}
