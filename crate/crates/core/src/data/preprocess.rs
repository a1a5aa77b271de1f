use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

/// Per-feature population medians used as the fallback fill value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImputationStats {
    pub medians: Vec<f64>,
}

impl ImputationStats {
    /// Medians over every recorded (non-missing) cell of `dataset`.
    pub fn fit(dataset: &Dataset) -> Result<Self> {
        let d = dataset.num_features();
        let mut medians = Vec::with_capacity(d);
        for j in 0..d {
            let mut values: Vec<f64> = dataset
                .snapshots()
                .map(|s| s.features[j])
                .filter(|v| v.is_finite())
                .collect();
            if values.is_empty() {
                return Err(Error::InsufficientData(format!(
                    "feature `{}` is never recorded",
                    dataset.feature_names[j]
                )));
            }
            values.sort_by(f64::total_cmp);
            let n = values.len();
            let m = if n % 2 == 1 {
                values[n / 2]
            } else {
                0.5 * (values[n / 2 - 1] + values[n / 2])
            };
            medians.push(m);
        }
        Ok(Self { medians })
    }
}

/// Last observation carried forward, falling back to `stats` medians.
/// Sets each snapshot's observed mask (true = recorded, false = imputed).
pub fn impute_with(dataset: &Dataset, stats: &ImputationStats) -> Result<Dataset> {
    let d = dataset.num_features();
    crate::error::check_len("impute medians", d, stats.medians.len())?;
    let mut out = dataset.clone();
    for rec in &mut out.records {
        let mut last: Vec<Option<f64>> = vec![None; d];
        for snap in &mut rec.snapshots {
            let prior_mask = snap.observed_mask.take();
            let mut mask = Vec::with_capacity(d);
            for j in 0..d {
                let v = snap.features[j];
                let recorded_before = prior_mask.as_ref().map_or(true, |m| m[j]);
                if v.is_finite() {
                    last[j] = Some(v);
                    mask.push(recorded_before);
                } else {
                    snap.features[j] = last[j].unwrap_or(stats.medians[j]);
                    mask.push(false);
                }
            }
            snap.observed_mask = Some(mask);
        }
    }
    Ok(out)
}

/// Imputes using medians computed from `dataset` itself.
pub fn impute(dataset: &Dataset) -> Result<Dataset> {
    let stats = ImputationStats::fit(dataset)?;
    impute_with(dataset, &stats)
}

/// Per-feature mean and (population) standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardization {
    pub fn fit(dataset: &Dataset) -> Self {
        let d = dataset.num_features();
        let n = dataset.num_snapshots().max(1) as f64;
        let mut mean = vec![0.0; d];
        for s in dataset.snapshots() {
            for j in 0..d {
                mean[j] += s.features[j];
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for s in dataset.snapshots() {
            for j in 0..d {
                var[j] += (s.features[j] - mean[j]).powi(2);
            }
        }
        let std = var.into_iter().map(|v| (v / n).sqrt()).collect();
        Self { mean, std }
    }

    /// Identity transform for `d` features.
    pub fn identity(d: usize) -> Self {
        Self {
            mean: vec![0.0; d],
            std: vec![1.0; d],
        }
    }

    pub fn transform_vector(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(&v, (&m, &s))| if s > 0.0 { (v - m) / s } else { v - m })
            .collect()
    }

    pub fn apply(&self, dataset: &Dataset) -> Dataset {
        let mut out = dataset.clone();
        for snap in out.records.iter_mut().flat_map(|r| r.snapshots.iter_mut()) {
            snap.features = self.transform_vector(&snap.features);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.6,
            validation: 0.2,
            test: 0.2,
        }
    }
}

/// Patient-level shuffled split into (train, validation, test).
pub fn split(dataset: &Dataset, ratios: SplitRatios, seed: u64) -> Result<(Dataset, Dataset, Dataset)> {
    let SplitRatios { train, validation, test } = ratios;
    if [train, validation, test].iter().any(|r| !(*r >= 0.0)) || ((train + validation + test) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "split ratios must be non-negative and sum to 1, got ({train}, {validation}, {test})"
        )));
    }
    let n = dataset.records.len();
    let parts = [train, validation, test].iter().filter(|&&r| r > 0.0).count();
    if n < parts {
        return Err(Error::InsufficientData(format!("{n} patients cannot fill {parts} partitions")));
    }
    let mut n_train = (train * n as f64).round() as usize;
    let mut n_val = (validation * n as f64).round() as usize;
    if train > 0.0 {
        n_train = n_train.max(1);
    }
    if validation > 0.0 {
        n_val = n_val.max(1);
    }
    let reserve_test = usize::from(test > 0.0);
    while n_train + n_val + reserve_test > n {
        if n_train >= n_val && n_train > 1 {
            n_train -= 1;
        } else {
            n_val -= 1;
        }
    }
    if test == 0.0 {
        n_train = n - n_val;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (tr, rest) = order.split_at(n_train);
    let (va, te) = rest.split_at(n_val);
    let sorted = |s: &[usize]| {
        let mut v = s.to_vec();
        v.sort_unstable();
        v
    };
    Ok((
        dataset.subset(&sorted(tr)),
        dataset.subset(&sorted(va)),
        dataset.subset(&sorted(te)),
    ))
}
