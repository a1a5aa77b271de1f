use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Dataset, OutcomeMode, Snapshot, TimeSeriesRecord};
use crate::error::{Error, Result};

pub const NUM_STATES: usize = 10;

/// Angles in degrees of the three steps of each trajectory template.
pub const TEMPLATE_ANGLES: [[f64; 3]; 4] = [
    [0.0, 45.0, 80.0],
    [180.0, 135.0, 100.0],
    [0.0, -45.0, -80.0],
    [180.0, -135.0, -100.0],
];

/// Class of each template: the first two are class 0 ("blue"), the others class 1 ("red").
pub const TEMPLATE_CLASS: [usize; 4] = [0, 0, 1, 1];

/// Ground-truth state ids (1-based) of each template step. Both classes
/// share the two starting regions, giving 10 states in total.
pub const TEMPLATE_STATES: [[usize; 3]; 4] = [[1, 3, 7], [2, 4, 8], [1, 5, 9], [2, 6, 10]];

/// Template angle of each state id, indexed by `state - 1`.
pub const STATE_ANGLES: [f64; NUM_STATES] = [0.0, 180.0, 45.0, 135.0, -45.0, -135.0, 80.0, 100.0, -80.0, -100.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub series_per_template: usize,
    /// Standard deviation of the angular noise, in degrees.
    pub noise_std_deg: f64,
    pub radius: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            series_per_template: 200,
            noise_std_deg: 8.0,
            radius: 1.0,
            seed: 0,
        }
    }
}

/// Ground-truth state id of every snapshot, keyed by patient id.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub states: BTreeMap<String, Vec<usize>>,
}

impl GroundTruth {
    /// State ids of every snapshot of `dataset`, in pool order.
    pub fn states_for(&self, dataset: &Dataset) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(dataset.num_snapshots());
        for rec in &dataset.records {
            let s = self
                .states
                .get(&rec.patient_id)
                .ok_or_else(|| Error::InvalidArgument(format!("no ground truth for `{}`", rec.patient_id)))?;
            crate::error::check_len("ground-truth states", rec.len(), s.len())?;
            out.extend_from_slice(s);
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticData {
    pub dataset: Dataset,
    pub truth: GroundTruth,
}

/// Four three-step trajectories on a circle, `series_per_template` noisy
/// copies of each, static outcome (only the final step labeled).
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    if spec.series_per_template == 0 || !(spec.noise_std_deg >= 0.0) || !(spec.radius > 0.0) {
        return Err(Error::InvalidArgument(format!("invalid synthetic spec {spec:?}")));
    }
    let noise = Normal::new(0.0, spec.noise_std_deg).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut records = Vec::with_capacity(4 * spec.series_per_template);
    let mut truth = GroundTruth::default();
    let width = (4 * spec.series_per_template).to_string().len();
    for _ in 0..spec.series_per_template {
        for (t, angles) in TEMPLATE_ANGLES.iter().enumerate() {
            let id = format!("s{:0width$}", records.len());
            let snapshots = angles
                .iter()
                .enumerate()
                .map(|(step, &base)| {
                    let theta = (base + noise.sample(&mut rng)).to_radians();
                    Snapshot {
                        step_index: step + 1,
                        time: step as f64,
                        features: vec![spec.radius * theta.cos(), spec.radius * theta.sin()],
                        label: (step == 2).then_some(TEMPLATE_CLASS[t]),
                        observed_mask: None,
                    }
                })
                .collect();
            truth.states.insert(id.clone(), TEMPLATE_STATES[t].to_vec());
            records.push(TimeSeriesRecord { patient_id: id, snapshots });
        }
    }
    Ok(SyntheticData {
        dataset: Dataset {
            records,
            feature_names: vec!["x".into(), "y".into()],
            num_classes: 2,
            mode: OutcomeMode::Static,
        },
        truth,
    })
}

/// Sidecar file with columns `id,step,state`.
pub fn write_states_csv<W: Write>(truth: &GroundTruth, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["id", "step", "state"])?;
    for (id, states) in &truth.states {
        for (k, s) in states.iter().enumerate() {
            w.write_record([id.as_str(), &(k + 1).to_string(), &s.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_states_csv<R: Read>(reader: R) -> Result<GroundTruth> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut rows: BTreeMap<String, Vec<(usize, usize)>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let bad = || Error::Parse {
            row: line,
            message: "expected id,step,state".into(),
        };
        let id = rec.get(0).ok_or_else(bad)?.to_string();
        let step: usize = rec.get(1).and_then(|v| v.trim().parse().ok()).ok_or_else(bad)?;
        let state: usize = rec.get(2).and_then(|v| v.trim().parse().ok()).ok_or_else(bad)?;
        rows.entry(id).or_default().push((step, state));
    }
    let states = rows
        .into_iter()
        .map(|(id, mut v)| {
            v.sort_unstable();
            (id, v.into_iter().map(|(_, s)| s).collect())
        })
        .collect();
    Ok(GroundTruth { states })
}
