use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::contrastive::{Encoder, Metric, NnBackend};
use crate::data::{impute_with, Dataset, ImputationStats, Standardization};
use crate::error::{check_len, Error, Result};
use crate::numeric::{softmax, AdamConfig, Linear};
use crate::temporal::TemporalNet;

/// Switches for the three ablatable components.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablation {
    pub pretrain: bool,
    pub nn_pairing: bool,
    pub temporal_reg: bool,
}

impl Default for Ablation {
    fn default() -> Self {
        Self::FULL
    }
}

impl Ablation {
    pub const FULL: Self = Self {
        pretrain: true,
        nn_pairing: true,
        temporal_reg: true,
    };

    /// All eight on/off combinations, full model first.
    pub fn grid() -> Vec<Self> {
        let mut out = Vec::with_capacity(8);
        for bits in (0..8u8).rev() {
            out.push(Self {
                pretrain: bits & 4 != 0,
                nn_pairing: bits & 2 != 0,
                temporal_reg: bits & 1 != 0,
            });
        }
        out
    }

    pub fn label(&self) -> String {
        let f = |b: bool| if b { "on" } else { "off" };
        format!("(PT:{}, NN:{}, TR:{})", f(self.pretrain), f(self.nn_pairing), f(self.temporal_reg))
    }

    /// Parses a comma-separated list of components to disable
    /// (`pt`/`pretrain`, `nn`, `tr`/`temporal`), or `none`.
    pub fn from_disabled(list: &str) -> Result<Self> {
        let mut a = Self::FULL;
        for part in list.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part.to_ascii_lowercase().as_str() {
                "pt" | "pretrain" => a.pretrain = false,
                "nn" | "nn_pairing" => a.nn_pairing = false,
                "tr" | "temporal" | "temporal_reg" => a.temporal_reg = false,
                "all" => a = Self { pretrain: false, nn_pairing: false, temporal_reg: false },
                "none" => {}
                other => return Err(Error::InvalidArgument(format!("unknown ablation component {other:?}"))),
            }
        }
        Ok(a)
    }
}

/// Optimizer settings for a softmax head trained on frozen embeddings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperParams {
    pub temperature: f64,
    pub alpha: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub pretrain_epochs: usize,
    pub joint_epochs: usize,
    pub predictor_epochs: usize,
    /// Adam step size for the phase-3 softmax head.
    pub predictor_learning_rate: f64,
    pub embedding_dim: usize,
    pub encoder_hidden: usize,
    pub seed: u64,
    pub ablation: Ablation,
    /// Adds the reversed term for every pair in the contrastive loss.
    pub symmetric: bool,
    /// In static mode, pair unlabeled snapshots among themselves as an
    /// extra class during joint training. Off restricts joint-phase pairs
    /// to final snapshots.
    pub pair_unknown: bool,
    pub metric: Metric,
    pub backend: NnBackend,
    pub cluster_head: HeadConfig,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self::synthetic()
    }
}

impl HyperParams {
    /// 2→16→3 encoder, 20 epochs per phase, batch 32.
    pub fn synthetic() -> Self {
        Self {
            temperature: 0.1,
            alpha: 1.0,
            batch_size: 32,
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            pretrain_epochs: 20,
            joint_epochs: 20,
            predictor_epochs: 20,
            predictor_learning_rate: 1e-2,
            embedding_dim: 3,
            encoder_hidden: 16,
            seed: 0,
            ablation: Ablation::FULL,
            symmetric: false,
            pair_unknown: true,
            metric: Metric::Euclidean,
            backend: NnBackend::Exact,
            cluster_head: HeadConfig {
                learning_rate: 1e-2,
                epochs: 50,
                batch_size: 32,
            },
        }
    }

    pub fn mimic() -> Self {
        Self {
            batch_size: 128,
            pretrain_epochs: 100,
            joint_epochs: 100,
            predictor_epochs: 100,
            embedding_dim: 32,
            encoder_hidden: 32,
            backend: NnBackend::Approximate,
            ..Self::synthetic()
        }
    }

    pub fn adni() -> Self {
        Self {
            batch_size: 128,
            pretrain_epochs: 100,
            joint_epochs: 100,
            predictor_epochs: 100,
            embedding_dim: 16,
            encoder_hidden: 50,
            ..Self::synthetic()
        }
    }

    pub fn profile(name: &str) -> Result<Self> {
        match name {
            "synthetic" => Ok(Self::synthetic()),
            "mimic" => Ok(Self::mimic()),
            "adni" => Ok(Self::adni()),
            other => Err(Error::InvalidArgument(format!("unknown profile {other:?}"))),
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0) {
            return Err(Error::InvalidTemperature(self.temperature));
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::InvalidArgument(format!("alpha must be ≥ 0, got {}", self.alpha)));
        }
        if self.batch_size < 2 || self.batch_size % 2 != 0 {
            return Err(Error::InvalidArgument(format!("batch size must be even and ≥ 2, got {}", self.batch_size)));
        }
        if !(self.learning_rate > 0.0) || !(self.predictor_learning_rate > 0.0) || !(self.cluster_head.learning_rate > 0.0) {
            return Err(Error::InvalidArgument("learning rates must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.epsilon > 0.0) {
            return Err(Error::InvalidArgument("Adam needs β1, β2 in [0, 1) and ε > 0".into()));
        }
        if self.embedding_dim == 0 || self.encoder_hidden == 0 {
            return Err(Error::InvalidArgument("network widths must be positive".into()));
        }
        if self.cluster_head.batch_size == 0 {
            return Err(Error::InvalidArgument("cluster head batch size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Pretrain,
    Joint,
    Predictor,
    ClusterHead,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub phases_completed: Vec<Phase>,
    /// 1-based predictor epoch kept by validation selection.
    pub selected_epoch: Option<usize>,
    pub validation_auroc: Option<f64>,
    pub ablation_label: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub encoder: Encoder,
    pub predictor: Linear,
    pub temporal: TemporalNet,
    pub hyper: HyperParams,
    pub num_classes: usize,
    pub feature_names: Vec<String>,
    pub standardization: Standardization,
    pub imputation: Option<ImputationStats>,
    pub indicators: bool,
    pub provenance: Provenance,
    /// Embedding-to-state classifier, fit only when ground truth is known.
    #[serde(default)]
    pub cluster_head: Option<ClusterHead>,
}

impl ModelBundle {
    /// Fresh Glorot-initialized networks for `input_dim` features.
    pub fn new(hyper: HyperParams, input_dim: usize, num_classes: usize, standardization: Standardization) -> Result<Self> {
        hyper.validate()?;
        check_len("ModelBundle standardization", input_dim, standardization.mean.len())?;
        if num_classes < 2 {
            return Err(Error::InvalidArgument(format!("need at least two classes, got {num_classes}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(super::derive_seed(hyper.seed, 1, 0));
        let encoder = Encoder::init(input_dim, hyper.encoder_hidden, hyper.embedding_dim, &mut rng);
        let temporal = TemporalNet::init(hyper.embedding_dim, &mut rng);
        let predictor = Linear::init(hyper.embedding_dim, num_classes, &mut rng);
        let provenance = Provenance {
            seed: hyper.seed,
            ablation_label: hyper.ablation.label(),
            ..Provenance::default()
        };
        Ok(Self {
            encoder,
            predictor,
            temporal,
            hyper,
            num_classes,
            feature_names: (0..input_dim).map(|k| format!("x{k}")).collect(),
            standardization,
            imputation: None,
            indicators: false,
            provenance,
            cluster_head: None,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.encoder.embedding_dim();
        check_len("bundle predictor input", d, self.predictor.input_dim())?;
        check_len("bundle predictor output", self.num_classes, self.predictor.output_dim())?;
        check_len("bundle temporal width", d, self.temporal.embedding_dim())?;
        check_len("bundle standardization", self.input_dim(), self.standardization.mean.len())?;
        check_len("bundle feature names", self.input_dim(), self.feature_names.len())?;
        self.hyper.validate()
    }

    /// Embedding of an already standardized feature vector.
    pub fn embed_standardized(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.encoder.encode(x)?.into_inner())
    }

    /// Class probabilities from an already standardized feature vector.
    pub fn predict_standardized(&self, x: &[f64]) -> Result<Vec<f64>> {
        let z = self.embed_standardized(x)?;
        Ok(softmax(&self.predictor.forward(&z)?))
    }

    /// `g(f(x))` for one imputed, unstandardized snapshot.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("predict input", self.input_dim(), x.len())?;
        self.predict_standardized(&self.standardization.transform_vector(x))
    }

    pub fn embed(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("embed input", self.input_dim(), x.len())?;
        self.embed_standardized(&self.standardization.transform_vector(x))
    }

    /// Applies the stored imputation, indicators and standardization to a
    /// raw dataset. Returns the imputed copy and the standardized copy.
    pub fn preprocess(&self, dataset: &Dataset) -> Result<(Dataset, Dataset)> {
        dataset.validate()?;
        let raw_dim = if self.indicators { self.input_dim() / 2 } else { self.input_dim() };
        check_len("dataset features", raw_dim, dataset.num_features())?;
        let imputed = match &self.imputation {
            Some(stats) => impute_with(dataset, stats)?,
            None if dataset.has_missing() => return Err(Error::InvalidArgument("dataset has missing cells but the model stores no imputation".into())),
            None => dataset.clone(),
        };
        let imputed = if self.indicators { imputed.with_indicator_features() } else { imputed };
        let standardized = self.standardization.apply(&imputed);
        Ok((imputed, standardized))
    }
}

/// Softmax classifier from embeddings to ground-truth state ids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterHead {
    pub layer: Linear,
    /// State id predicted by each output unit.
    pub states: Vec<usize>,
}

impl ClusterHead {
    pub fn predict(&self, z: &[f64]) -> Result<usize> {
        let logits = self.layer.forward(z)?;
        let best = logits
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc });
        Ok(self.states[best.0])
    }

    pub fn accuracy<Z: AsRef<[f64]>>(&self, embeddings: &[Z], states: &[usize]) -> Result<f64> {
        check_len("ClusterHead::accuracy", embeddings.len(), states.len())?;
        if embeddings.is_empty() {
            return Err(Error::InsufficientData("accuracy of an empty set".into()));
        }
        let mut hits = 0usize;
        for (z, &s) in embeddings.iter().zip(states) {
            hits += (self.predict(z.as_ref())? == s) as usize;
        }
        Ok(hits as f64 / states.len() as f64)
    }
}
