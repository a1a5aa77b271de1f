use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FeatureBins {
    /// Upper-inclusive cut points; a value goes to the number of cut points
    /// strictly below it.
    Quantile { edges: Vec<f64> },
    /// Distinct training values, each its own bin.
    Categorical { values: Vec<f64> },
}

impl FeatureBins {
    pub fn num_bins(&self) -> usize {
        match self {
            Self::Quantile { edges } => edges.len() + 1,
            Self::Categorical { values } => values.len(),
        }
    }

    pub fn assign(&self, v: f64) -> usize {
        match self {
            Self::Quantile { edges } => edges.iter().filter(|&&e| e < v).count(),
            // nearest category at or below v, else the first
            Self::Categorical { values } => values.iter().rposition(|&c| c <= v).unwrap_or(0),
        }
    }

    pub fn labels(&self) -> Vec<String> {
        match self {
            Self::Categorical { values } => values.iter().map(|v| format!("={v}")).collect(),
            Self::Quantile { edges } => {
                let n = edges.len() + 1;
                let names: Vec<String> = match n {
                    1 => vec!["all".into()],
                    2 => vec!["low".into(), "high".into()],
                    3 => vec!["low".into(), "medium".into(), "high".into()],
                    _ => (0..n).map(|k| format!("q{}", k + 1)).collect(),
                };
                names
                    .into_iter()
                    .enumerate()
                    .map(|(k, name)| match (k.checked_sub(1).map(|p| edges[p]), edges.get(k)) {
                        (None, None) => name,
                        (None, Some(hi)) => format!("{name} (<= {hi:.4})"),
                        (Some(lo), Some(hi)) => format!("{name} ({lo:.4}, {hi:.4}]"),
                        (Some(lo), None) => format!("{name} (> {lo:.4})"),
                    })
                    .collect()
            }
        }
    }
}

/// Linearly interpolated quantile of sorted values.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Per-feature bins fit on a training dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Binning {
    pub feature_names: Vec<String>,
    pub features: Vec<FeatureBins>,
}

/// Snapshot-by-feature bin indices, rows in dataset order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinnedTable {
    pub rows: Vec<Vec<usize>>,
}

impl Binning {
    /// Equal-frequency bins per feature. Features whose training values are
    /// all 0 or 1 are treated as categorical.
    pub fn fit(dataset: &Dataset, bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::InvalidArgument("bins per feature must be ≥ 1".into()));
        }
        let d = dataset.num_features();
        let mut features = Vec::with_capacity(d);
        for f in 0..d {
            let mut vals: Vec<f64> = dataset.snapshots().map(|s| s.features[f]).filter(|v| !v.is_nan()).collect();
            if vals.is_empty() {
                return Err(Error::InsufficientData(format!("feature {} has no values to bin", dataset.feature_names[f])));
            }
            vals.sort_by(f64::total_cmp);
            if vals.iter().all(|&v| v == 0.0 || v == 1.0) {
                let mut values = vals.clone();
                values.dedup();
                features.push(FeatureBins::Categorical { values });
                continue;
            }
            let max = *vals.last().expect("non-empty");
            let mut edges: Vec<f64> = (1..bins).map(|k| quantile(&vals, k as f64 / bins as f64)).filter(|&e| e < max).collect();
            edges.dedup();
            features.push(FeatureBins::Quantile { edges });
        }
        Ok(Self {
            feature_names: dataset.feature_names.clone(),
            features,
        })
    }

    pub fn transform(&self, dataset: &Dataset) -> Result<BinnedTable> {
        crate::error::check_len("Binning features", self.features.len(), dataset.num_features())?;
        let mut rows = Vec::with_capacity(dataset.num_snapshots());
        for s in dataset.snapshots() {
            if s.features.iter().any(|v| v.is_nan()) {
                return Err(Error::InvalidArgument("binning requires imputed features".into()));
            }
            rows.push(self.features.iter().zip(&s.features).map(|(b, &v)| b.assign(v)).collect());
        }
        Ok(BinnedTable { rows })
    }
}

pub fn bin_features(train: &Dataset, target: &Dataset, bins: usize) -> Result<(Binning, BinnedTable)> {
    let b = Binning::fit(train, bins)?;
    let t = b.transform(target)?;
    Ok((b, t))
}
