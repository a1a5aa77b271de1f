//! Dataset representation, CSV ingestion, preprocessing and the synthetic
//! circle-trajectory generator.

mod csv_io;
mod preprocess;
mod synthetic;

use serde::{Deserialize, Serialize};

pub use csv_io::{load_csv, read_csv, write_csv, CsvSchema};
pub use preprocess::{impute, impute_with, split, ImputationStats, SplitRatios, Standardization};
pub use synthetic::{generate_synthetic, read_states_csv, write_states_csv, GroundTruth, SyntheticData, SyntheticSpec, NUM_STATES, STATE_ANGLES, TEMPLATE_ANGLES};

/// Whether every timestep carries a label or only the final one does.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeMode {
    Static,
    Dynamic,
}

impl std::str::FromStr for OutcomeMode {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "static" => Ok(Self::Static),
            "dynamic" => Ok(Self::Dynamic),
            other => Err(crate::Error::InvalidArgument(format!("unknown outcome mode `{other}`"))),
        }
    }
}

/// One timestep of one series. Missing feature cells are `NaN` until imputed;
/// `label == None` is the UNKNOWN label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub step_index: usize,
    pub time: f64,
    pub features: Vec<f64>,
    pub label: Option<usize>,
    pub observed_mask: Option<Vec<bool>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesRecord {
    pub patient_id: String,
    pub snapshots: Vec<Snapshot>,
}

impl TimeSeriesRecord {
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    /// `t(ℓ+1) − t(ℓ)` for each consecutive pair.
    pub fn durations(&self) -> Vec<f64> {
        self.snapshots.windows(2).map(|w| w[1].time - w[0].time).collect()
    }

    pub fn final_label(&self) -> Option<usize> {
        self.snapshots.last().and_then(|s| s.label)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub records: Vec<TimeSeriesRecord>,
    pub feature_names: Vec<String>,
    pub num_classes: usize,
    pub mode: OutcomeMode,
}

/// Position of a snapshot inside a dataset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SnapshotRef {
    pub record: usize,
    pub step: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoolMode {
    All,
    FinalOnly,
    LabeledOnly,
}

impl Dataset {
    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn num_snapshots(&self) -> usize {
        self.records.iter().map(TimeSeriesRecord::len).sum()
    }

    pub fn snapshot(&self, r: SnapshotRef) -> &Snapshot {
        &self.records[r.record].snapshots[r.step]
    }

    pub fn has_missing(&self) -> bool {
        self.snapshots().any(|s| s.features.iter().any(|v| !v.is_finite()))
    }

    pub fn snapshots(&self) -> impl Iterator<Item = &Snapshot> {
        self.records.iter().flat_map(|r| r.snapshots.iter())
    }

    /// The label that supervises snapshot `r` downstream: its own label in
    /// dynamic mode and the series' final label in static mode.
    pub fn target_label(&self, r: SnapshotRef) -> Option<usize> {
        match self.mode {
            OutcomeMode::Dynamic => self.snapshot(r).label,
            OutcomeMode::Static => self.records[r.record].final_label(),
        }
    }

    /// Flattened snapshot list, in record then step order.
    pub fn snapshot_pool(&self, mode: PoolMode) -> Vec<SnapshotRef> {
        let mut out = Vec::new();
        for (ri, rec) in self.records.iter().enumerate() {
            let n = rec.len();
            for (si, snap) in rec.snapshots.iter().enumerate() {
                let keep = match mode {
                    PoolMode::All => true,
                    PoolMode::FinalOnly => si + 1 == n,
                    PoolMode::LabeledOnly => snap.label.is_some(),
                };
                if keep {
                    out.push(SnapshotRef { record: ri, step: si });
                }
            }
        }
        out
    }

    /// Subset of records by index, preserving order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
            feature_names: self.feature_names.clone(),
            num_classes: self.num_classes,
            mode: self.mode,
        }
    }

    /// Appends the observed/imputed indicators as extra 0/1 features.
    pub fn with_indicator_features(&self) -> Dataset {
        let mut out = self.clone();
        let base = self.feature_names.len();
        let names: Vec<String> = self.feature_names.iter().map(|n| format!("{n}_observed")).collect();
        out.feature_names.extend(names);
        for snap in out.records.iter_mut().flat_map(|r| r.snapshots.iter_mut()) {
            let mask = snap.observed_mask.clone().unwrap_or_else(|| vec![true; base]);
            snap.features.extend(mask.iter().map(|&m| if m { 1.0 } else { 0.0 }));
        }
        out
    }

    /// Checks the structural invariants of every record.
    pub fn validate(&self) -> crate::Result<()> {
        use crate::Error;
        let d = self.num_features();
        for rec in &self.records {
            if rec.snapshots.is_empty() {
                return Err(Error::InvalidArgument(format!("series `{}` has no snapshots", rec.patient_id)));
            }
            for (k, s) in rec.snapshots.iter().enumerate() {
                if s.features.len() != d {
                    return Err(Error::ShapeMismatch {
                        context: "snapshot features",
                        expected: d,
                        actual: s.features.len(),
                    });
                }
                if s.step_index != k + 1 {
                    return Err(Error::InvalidArgument(format!("series `{}` has non-consecutive step indices", rec.patient_id)));
                }
                if let Some(c) = s.label {
                    if c >= self.num_classes {
                        return Err(Error::InvalidArgument(format!("label {c} outside [0, {})", self.num_classes)));
                    }
                }
                let last = k + 1 == rec.snapshots.len();
                match self.mode {
                    OutcomeMode::Static if last && s.label.is_none() => {
                        return Err(Error::InvalidArgument(format!("series `{}` has no final label", rec.patient_id)));
                    }
                    OutcomeMode::Static if !last && s.label.is_some() => {
                        return Err(Error::InvalidArgument(format!("series `{}` has a label before its final step", rec.patient_id)));
                    }
                    OutcomeMode::Dynamic if s.label.is_none() => {
                        return Err(Error::InvalidArgument(format!("series `{}` has an unlabeled step", rec.patient_id)));
                    }
                    _ => {}
                }
            }
            if rec.durations().iter().any(|&dt| !(dt > 0.0)) {
                return Err(Error::InvalidArgument(format!("series `{}` has non-increasing times", rec.patient_id)));
            }
        }
        Ok(())
    }
}
