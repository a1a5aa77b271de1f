use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use tscl::data::{CsvSchema, OutcomeMode, SplitRatios, SyntheticSpec};
use tscl::training::{Ablation, ExperimentConfig, HyperParams};

use crate::CliError;

/// Flat key/value run configuration. Every key can come from a TOML file
/// or a flag of the same name; flags win. Absent keys take defaults from
/// `profile`.
#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Hyperparameter preset: synthetic, mimic or adni.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,

    /// Long-format CSV to train on; the synthetic generator when absent.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    /// Ground-truth state sidecar (`id,step,state`) for the data file.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub states: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id_column: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_column: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label_column: Option<String>,
    /// static or dynamic.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delimiter: Option<char>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub missing_token: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub num_classes: Option<usize>,

    /// Synthetic series per trajectory template.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    /// Synthetic angular noise standard deviation, degrees.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_std: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    /// Seed of the synthetic generator; follows `seed` when absent.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_seed: Option<u64>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predictor_learning_rate: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pretrain_epochs: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub joint_epochs: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predictor_epochs: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embedding_dim: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub encoder_hidden: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub symmetric: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pair_unknown: Option<bool>,
    /// euclidean, manhattan or cosine.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<String>,
    /// exact or approximate.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backend: Option<String>,
    /// Components to disable: comma list of pt, nn, tr, or all / none.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ablate: Option<String>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_ratio: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation_ratio: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_ratio: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split_seed: Option<u64>,
    /// Cluster count for the unsupervised metrics.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clusters: Option<usize>,
    /// Append missingness indicator features.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub indicators: Option<bool>,

    /// Seeds of a grid run, comma separated.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,

    /// Output directory; `TSCL_OUT_DIR` or `./out` when absent.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($field:ident),* $(,)?) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field.clone(); } )*
    };
}

fn parse<T: std::str::FromStr<Err = tscl::Error>>(v: &Option<String>, default: T) -> Result<T, CliError> {
    match v {
        Some(s) => Ok(s.parse()?),
        None => Ok(default),
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// File values (if any) overridden by flags.
    pub fn load(file: Option<&Path>, flags: &RunConfig) -> Result<Self, CliError> {
        let mut cfg = match file {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        cfg.overlay(flags);
        Ok(cfg)
    }

    pub fn overlay(&mut self, top: &RunConfig) {
        overlay!(self, top;
            profile, data, states, id_column, time_column, label_column, mode, delimiter, missing_token, num_classes,
            count, noise_std, radius, data_seed, seed, temperature, alpha, batch_size, learning_rate,
            predictor_learning_rate, pretrain_epochs, joint_epochs, predictor_epochs, embedding_dim, encoder_hidden,
            symmetric, pair_unknown, metric, backend, ablate, train_ratio, validation_ratio, test_ratio, split_seed,
            clusters, indicators, seeds, threads, out_dir,
        );
    }

    pub fn hyper(&self) -> Result<HyperParams, CliError> {
        let base = HyperParams::profile(self.profile.as_deref().unwrap_or("synthetic"))?;
        let h = HyperParams {
            temperature: self.temperature.unwrap_or(base.temperature),
            alpha: self.alpha.unwrap_or(base.alpha),
            batch_size: self.batch_size.unwrap_or(base.batch_size),
            learning_rate: self.learning_rate.unwrap_or(base.learning_rate),
            predictor_learning_rate: self.predictor_learning_rate.unwrap_or(base.predictor_learning_rate),
            pretrain_epochs: self.pretrain_epochs.unwrap_or(base.pretrain_epochs),
            joint_epochs: self.joint_epochs.unwrap_or(base.joint_epochs),
            predictor_epochs: self.predictor_epochs.unwrap_or(base.predictor_epochs),
            embedding_dim: self.embedding_dim.unwrap_or(base.embedding_dim),
            encoder_hidden: self.encoder_hidden.unwrap_or(base.encoder_hidden),
            seed: self.seed.unwrap_or(base.seed),
            ablation: Ablation::from_disabled(self.ablate.as_deref().unwrap_or("none"))?,
            symmetric: self.symmetric.unwrap_or(base.symmetric),
            pair_unknown: self.pair_unknown.unwrap_or(base.pair_unknown),
            metric: parse(&self.metric, base.metric)?,
            backend: parse(&self.backend, base.backend)?,
            ..base
        };
        h.validate()?;
        Ok(h)
    }

    pub fn experiment(&self) -> Result<ExperimentConfig, CliError> {
        let d = SplitRatios::default();
        Ok(ExperimentConfig {
            hyper: self.hyper()?,
            split: SplitRatios {
                train: self.train_ratio.unwrap_or(d.train),
                validation: self.validation_ratio.unwrap_or(d.validation),
                test: self.test_ratio.unwrap_or(d.test),
            },
            split_seed: self.split_seed,
            clusters: self.clusters,
            indicators: self.indicators,
        })
    }

    pub fn schema(&self) -> Result<CsvSchema, CliError> {
        let d = CsvSchema::default();
        Ok(CsvSchema {
            id_column: self.id_column.clone().unwrap_or(d.id_column),
            time_column: self.time_column.clone().unwrap_or(d.time_column),
            label_column: self.label_column.clone().unwrap_or(d.label_column),
            feature_columns: None,
            mode: parse::<OutcomeMode>(&self.mode, d.mode)?,
            delimiter: self.delimiter.unwrap_or(d.delimiter),
            missing_token: self.missing_token.clone().unwrap_or(d.missing_token),
            num_classes: self.num_classes,
        })
    }

    pub fn synthetic(&self) -> SyntheticSpec {
        let d = SyntheticSpec::default();
        SyntheticSpec {
            series_per_template: self.count.unwrap_or(d.series_per_template),
            noise_std_deg: self.noise_std.unwrap_or(d.noise_std_deg),
            radius: self.radius.unwrap_or(d.radius),
            seed: self.data_seed.or(self.seed).unwrap_or(d.seed),
        }
    }

    pub fn grid_seeds(&self) -> Vec<u64> {
        self.seeds.clone().unwrap_or_else(|| (0..10).collect())
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os("TSCL_OUT_DIR").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"))
    }

    /// Every key spelled out, so the file alone reproduces the run.
    pub fn resolved(&self) -> Result<Self, CliError> {
        let h = self.experiment()?;
        let schema = self.schema()?;
        let synth = self.synthetic();
        let csv = self.data.is_some();
        let mode = |m: OutcomeMode| match m {
            OutcomeMode::Static => "static",
            OutcomeMode::Dynamic => "dynamic",
        };
        Ok(Self {
            profile: Some(self.profile.clone().unwrap_or_else(|| "synthetic".into())),
            data: self.data.clone(),
            states: self.states.clone(),
            id_column: csv.then_some(schema.id_column),
            time_column: csv.then_some(schema.time_column),
            label_column: csv.then_some(schema.label_column),
            mode: csv.then(|| mode(schema.mode).to_string()),
            delimiter: csv.then_some(schema.delimiter),
            missing_token: csv.then_some(schema.missing_token),
            num_classes: self.num_classes,
            count: (!csv).then_some(synth.series_per_template),
            noise_std: (!csv).then_some(synth.noise_std_deg),
            radius: (!csv).then_some(synth.radius),
            data_seed: (!csv).then_some(synth.seed),
            seed: Some(h.hyper.seed),
            temperature: Some(h.hyper.temperature),
            alpha: Some(h.hyper.alpha),
            batch_size: Some(h.hyper.batch_size),
            learning_rate: Some(h.hyper.learning_rate),
            predictor_learning_rate: Some(h.hyper.predictor_learning_rate),
            pretrain_epochs: Some(h.hyper.pretrain_epochs),
            joint_epochs: Some(h.hyper.joint_epochs),
            predictor_epochs: Some(h.hyper.predictor_epochs),
            embedding_dim: Some(h.hyper.embedding_dim),
            encoder_hidden: Some(h.hyper.encoder_hidden),
            symmetric: Some(h.hyper.symmetric),
            pair_unknown: Some(h.hyper.pair_unknown),
            metric: Some(to_key(&h.hyper.metric)),
            backend: Some(to_key(&h.hyper.backend)),
            ablate: Some(disabled_list(h.hyper.ablation)),
            train_ratio: Some(h.split.train),
            validation_ratio: Some(h.split.validation),
            test_ratio: Some(h.split.test),
            split_seed: Some(h.split_seed.unwrap_or(h.hyper.seed)),
            clusters: self.clusters,
            indicators: self.indicators,
            seeds: self.seeds.clone(),
            threads: self.threads,
            out_dir: Some(self.out_dir()),
        })
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }
}

fn to_key<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        other => format!("{other:?}"),
    }
}

/// Inverse of [`Ablation::from_disabled`].
pub fn disabled_list(a: Ablation) -> String {
    let mut parts = Vec::new();
    if !a.pretrain {
        parts.push("pt");
    }
    if !a.nn_pairing {
        parts.push("nn");
    }
    if !a.temporal_reg {
        parts.push("tr");
    }
    if parts.is_empty() {
        "none".into()
    } else {
        parts.join(",")
    }
}
