use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Per-snapshot class probabilities with their true labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredPredictions {
    pub probabilities: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl ScoredPredictions {
    pub fn new(probabilities: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        check_len("ScoredPredictions labels", probabilities.len(), labels.len())?;
        let c = probabilities.first().map_or(0, Vec::len);
        for (row, &y) in probabilities.iter().zip(&labels) {
            check_len("ScoredPredictions row", c, row.len())?;
            if y >= c {
                return Err(Error::InvalidArgument(format!("label {y} outside {c} classes")));
            }
        }
        Ok(Self { probabilities, labels })
    }

    pub fn num_classes(&self) -> usize {
        self.probabilities.first().map_or(0, Vec::len)
    }

    fn column(&self, class: usize) -> (Vec<f64>, Vec<bool>) {
        let scores = self.probabilities.iter().map(|p| p[class]).collect();
        let positive = self.labels.iter().map(|&y| y == class).collect();
        (scores, positive)
    }
}

/// Macro average over the classes that have both positives and negatives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OvrReport {
    pub macro_average: f64,
    pub per_class: Vec<Option<f64>>,
    pub skipped_classes: Vec<usize>,
    pub convention: String,
}

fn ovr(preds: &ScoredPredictions, convention: &str, metric: fn(&[f64], &[bool]) -> f64) -> Result<OvrReport> {
    let mut per_class = Vec::new();
    let mut skipped = Vec::new();
    for c in 0..preds.num_classes() {
        let (s, pos) = preds.column(c);
        let p = pos.iter().filter(|&&b| b).count();
        if p == 0 || p == pos.len() {
            skipped.push(c);
            per_class.push(None);
        } else {
            per_class.push(Some(metric(&s, &pos)));
        }
    }
    let vals: Vec<f64> = per_class.iter().flatten().copied().collect();
    if vals.is_empty() {
        return Err(Error::InsufficientData("no class has both positive and negative examples".into()));
    }
    Ok(OvrReport {
        macro_average: vals.iter().sum::<f64>() / vals.len() as f64,
        per_class,
        skipped_classes: skipped,
        convention: convention.into(),
    })
}

/// Average (1-based) ranks, tied values sharing their mean rank.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let r = (start + end + 1) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = r;
        }
        start = end;
    }
    ranks
}

/// Binary AUROC from the rank-sum statistic.
pub fn binary_auroc(scores: &[f64], positive: &[bool]) -> f64 {
    let ranks = midranks(scores);
    let np = positive.iter().filter(|&&b| b).count() as f64;
    let nn = positive.len() as f64 - np;
    let rank_sum: f64 = ranks.iter().zip(positive).filter(|(_, &p)| p).map(|(r, _)| r).sum();
    (rank_sum - np * (np + 1.0) / 2.0) / (np * nn)
}

/// Binary average precision: Σ (Rₖ − Rₖ₋₁)·Pₖ over distinct score thresholds.
pub fn binary_auprc(scores: &[f64], positive: &[bool]) -> f64 {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let total_pos = positive.iter().filter(|&&b| b).count() as f64;
    let (mut tp, mut seen, mut prev_recall, mut area) = (0.0, 0.0, 0.0, 0.0);
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        while k < order.len() && scores[order[k]] == s {
            seen += 1.0;
            if positive[order[k]] {
                tp += 1.0;
            }
            k += 1;
        }
        let recall = tp / total_pos;
        area += (recall - prev_recall) * (tp / seen);
        prev_recall = recall;
    }
    area
}

pub fn auroc_ovr(preds: &ScoredPredictions) -> Result<OvrReport> {
    ovr(preds, "macro one-vs-rest, midrank ties", binary_auroc)
}

pub fn auprc_ovr(preds: &ScoredPredictions) -> Result<OvrReport> {
    ovr(preds, "macro one-vs-rest, non-interpolated step integration", binary_auprc)
}
