use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::bundle::{Ablation, ClusterHead, HyperParams, ModelBundle, Phase};
use super::phases::{pretrain_encoder, train_cluster_head, train_encoder_temporal, train_predictor, TrainingLog};
use crate::data::{impute_with, split, Dataset, GroundTruth, ImputationStats, PoolMode, SplitRatios, Standardization};
use crate::error::{check_len, Result};
use crate::evaluation::{ari, auprc_ovr, auroc_ovr, nmi, purity, recovery_score, silhouette, ClusteringResult, Recovery, ScoredPredictions};
use crate::viz::agglomerative_cluster;

/// Largest point count the O(n²) clustering metrics run on; larger sets
/// are thinned to an evenly spaced subset.
pub const MAX_CLUSTER_POINTS: usize = 4000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub hyper: HyperParams,
    pub split: SplitRatios,
    /// Seed of the patient-level split; the training seed when absent.
    pub split_seed: Option<u64>,
    /// Cluster count for the unsupervised metrics; the class count when absent.
    pub clusters: Option<usize>,
    /// Append missingness indicators; automatic (only when data has gaps)
    /// when absent.
    pub indicators: Option<bool>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            hyper: HyperParams::synthetic(),
            split: SplitRatios::default(),
            split_seed: None,
            clusters: None,
            indicators: None,
        }
    }
}

/// Imputed and standardized splits plus the fitted preprocessing.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
    /// Imputed, unstandardized copies used for feature binning.
    pub train_raw: Dataset,
    pub test_raw: Dataset,
    pub imputation: ImputationStats,
    pub standardization: Standardization,
    pub indicators: bool,
}

/// Splits by patient, fits imputation and standardization on the training
/// split and applies them to every split.
pub fn prepare(dataset: &Dataset, ratios: SplitRatios, seed: u64, indicators: Option<bool>) -> Result<Prepared> {
    dataset.validate()?;
    let (tr, va, te) = split(dataset, ratios, seed)?;
    let imputation = ImputationStats::fit(&tr)?;
    let indicators = indicators.unwrap_or_else(|| dataset.has_missing());
    let fill = |d: &Dataset| -> Result<Dataset> {
        let d = impute_with(d, &imputation)?;
        Ok(if indicators { d.with_indicator_features() } else { d })
    };
    let (train_raw, val_raw, test_raw) = (fill(&tr)?, fill(&va)?, fill(&te)?);
    let standardization = Standardization::fit(&train_raw);
    Ok(Prepared {
        train: standardization.apply(&train_raw),
        validation: standardization.apply(&val_raw),
        test: standardization.apply(&test_raw),
        train_raw,
        test_raw,
        imputation,
        standardization,
        indicators,
    })
}

/// Runs the three phases per the ablation flags, selecting the predictor
/// epoch on the validation split.
pub fn train_full(prepared: &Prepared, hyper: &HyperParams) -> Result<(ModelBundle, TrainingLog)> {
    let train = &prepared.train;
    let mut bundle = ModelBundle::new(hyper.clone(), train.num_features(), train.num_classes, prepared.standardization.clone())?;
    bundle.feature_names = train.feature_names.clone();
    bundle.imputation = Some(prepared.imputation.clone());
    bundle.indicators = prepared.indicators;
    let mut log = TrainingLog::default();
    let (b, l) = pretrain_encoder(&bundle, train)?;
    log.phases.push(l);
    let (b, l) = train_encoder_temporal(&b, train)?;
    log.phases.push(l);
    let validation = (!prepared.validation.records.is_empty()).then_some(&prepared.validation);
    let (b, l) = train_predictor(&b, train, validation)?;
    log.phases.push(l);
    Ok((b, log))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub split: String,
    pub ablation: String,
    pub snapshots: usize,
    pub auroc: f64,
    pub auprc: f64,
    pub auroc_per_class: Vec<Option<f64>>,
    pub auprc_per_class: Vec<Option<f64>>,
    pub skipped_classes: Vec<usize>,
    pub clusters: usize,
    pub purity: f64,
    pub nmi: f64,
    pub ari: f64,
    pub silhouette: f64,
    pub truth_silhouette: Option<f64>,
    pub truth_ari: Option<f64>,
    pub recovery: Option<Recovery>,
    pub cluster_accuracy: Option<f64>,
    pub conventions: String,
}

impl MetricReport {
    /// `key = value` lines in a fixed order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let opt = |v: Option<f64>| v.map_or("na".to_string(), |x| format!("{x:.6}"));
        let _ = writeln!(s, "split = {}", self.split);
        let _ = writeln!(s, "ablation = {}", self.ablation);
        let _ = writeln!(s, "snapshots = {}", self.snapshots);
        let _ = writeln!(s, "auroc = {:.6}", self.auroc);
        let _ = writeln!(s, "auprc = {:.6}", self.auprc);
        let _ = writeln!(s, "clusters = {}", self.clusters);
        let _ = writeln!(s, "purity = {:.6}", self.purity);
        let _ = writeln!(s, "nmi = {:.6}", self.nmi);
        let _ = writeln!(s, "ari = {:.6}", self.ari);
        let _ = writeln!(s, "silhouette = {:.6}", self.silhouette);
        let _ = writeln!(s, "truth_silhouette = {}", opt(self.truth_silhouette));
        let _ = writeln!(s, "truth_ari = {}", opt(self.truth_ari));
        let rec = match self.recovery {
            Some(Recovery::Yes) => "yes",
            Some(Recovery::Partial) => "partial",
            Some(Recovery::No) => "no",
            None => "na",
        };
        let _ = writeln!(s, "recovery = {rec}");
        let _ = writeln!(s, "cluster_accuracy = {}", opt(self.cluster_accuracy));
        let _ = writeln!(s, "conventions = {}", self.conventions);
        s
    }
}

fn thin<T: Clone>(items: &[T], max: usize) -> Vec<T> {
    if items.len() <= max {
        return items.to_vec();
    }
    (0..max).map(|k| items[k * items.len() / max].clone()).collect()
}

/// Full metric battery on one (standardized) split. `states` holds the
/// true state of every snapshot in record order when known.
pub fn evaluate(
    bundle: &ModelBundle,
    dataset: &Dataset,
    split_name: &str,
    clusters: Option<usize>,
    states: Option<&[usize]>,
    head: Option<&ClusterHead>,
) -> Result<MetricReport> {
    check_len("evaluate features", bundle.input_dim(), dataset.num_features())?;
    let refs = dataset.snapshot_pool(PoolMode::All);
    let mut embeddings = Vec::with_capacity(refs.len());
    let mut probs = Vec::new();
    let mut labels = Vec::new();
    let mut targets = Vec::new();
    for &r in &refs {
        let x = &dataset.snapshot(r).features;
        let z = bundle.embed_standardized(x)?;
        let y = dataset.target_label(r);
        if let Some(y) = y {
            probs.push(bundle.predict_standardized(x)?);
            labels.push(y);
        }
        targets.push(y.unwrap_or(dataset.num_classes));
        embeddings.push(z);
    }
    let preds = ScoredPredictions::new(probs, labels)?;
    let auroc = auroc_ovr(&preds)?;
    let auprc = auprc_ovr(&preds)?;

    let sample = thin(&(0..embeddings.len()).collect::<Vec<_>>(), MAX_CLUSTER_POINTS);
    let pts: Vec<&[f64]> = sample.iter().map(|&i| embeddings[i].as_slice()).collect();
    let ys: Vec<usize> = sample.iter().map(|&i| targets[i]).collect();
    let k = clusters.unwrap_or(bundle.num_classes).clamp(1, pts.len().max(1));
    let assign = if pts.len() >= 2 {
        agglomerative_cluster(&pts)?.cut(k)?.assignments
    } else {
        vec![0; pts.len()]
    };
    let si = if ClusteringResult::from_labels(&assign).num_clusters >= 2 {
        silhouette(&pts, &assign)?
    } else {
        0.0
    };

    let (truth_silhouette, truth_ari, recovery, cluster_accuracy) = match states {
        Some(st) => {
            check_len("evaluate states", embeddings.len(), st.len())?;
            let rep = recovery_score(&embeddings, st)?;
            let acc = match head {
                Some(h) => Some(h.accuracy(&embeddings, st)?),
                None => None,
            };
            (Some(rep.silhouette), Some(rep.ari), Some(rep.recovered), acc)
        }
        None => (None, None, None, None),
    };
    Ok(MetricReport {
        split: split_name.into(),
        ablation: bundle.hyper.ablation.label(),
        snapshots: embeddings.len(),
        auroc: auroc.macro_average,
        auprc: auprc.macro_average,
        auroc_per_class: auroc.per_class,
        auprc_per_class: auprc.per_class,
        skipped_classes: auroc.skipped_classes,
        clusters: k,
        purity: purity(&assign, &ys)?,
        nmi: nmi(&assign, &ys)?,
        ari: ari(&assign, &ys)?,
        silhouette: si,
        truth_silhouette,
        truth_ari,
        recovery,
        cluster_accuracy,
        conventions: format!(
            "{}; {}; euclidean silhouette; nmi arithmetic-mean normalization; complete linkage",
            auroc.convention, auprc.convention
        ),
    })
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub bundle: ModelBundle,
    pub log: TrainingLog,
    pub cluster_head: Option<ClusterHead>,
    pub validation: Option<MetricReport>,
    pub test: MetricReport,
    pub prepared: Prepared,
}

/// Split, preprocess, train, fit the state head when ground truth is
/// available, and evaluate on validation and test.
pub fn run_experiment(dataset: &Dataset, truth: Option<&GroundTruth>, config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.hyper.validate()?;
    let seed = config.split_seed.unwrap_or(config.hyper.seed);
    let prepared = prepare(dataset, config.split, seed, config.indicators)?;
    let (mut bundle, log) = train_full(&prepared, &config.hyper)?;
    let (head, val_states, test_states) = match truth {
        Some(t) => {
            let tr = t.states_for(&prepared.train)?;
            let feats: Vec<&[f64]> = prepared.train.snapshots().map(|s| s.features.as_slice()).collect();
            let (head, _) = train_cluster_head(&bundle, &feats, &tr, config.hyper.cluster_head)?;
            bundle.provenance.phases_completed.push(Phase::ClusterHead);
            bundle.cluster_head = Some(head.clone());
            (Some(head), Some(t.states_for(&prepared.validation)?), Some(t.states_for(&prepared.test)?))
        }
        None => (None, None, None),
    };
    let validation = if prepared.validation.records.is_empty() {
        None
    } else {
        Some(evaluate(&bundle, &prepared.validation, "validation", config.clusters, val_states.as_deref(), head.as_ref())?)
    };
    let test = evaluate(&bundle, &prepared.test, "test", config.clusters, test_states.as_deref(), head.as_ref())?;
    Ok(ExperimentResult {
        bundle,
        log,
        cluster_head: head,
        validation,
        test,
        prepared,
    })
}

/// Mean and population standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some(Self { mean, std: var.sqrt() })
    }
}

impl std::fmt::Display for MeanStd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.3} ± {:.3}", self.mean, self.std)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub ablation: Ablation,
    pub label: String,
    pub seeds: Vec<u64>,
    pub auroc: Option<MeanStd>,
    pub auprc: Option<MeanStd>,
    pub truth_silhouette: Option<MeanStd>,
    pub cluster_accuracy: Option<MeanStd>,
    pub recovered: usize,
    pub reports: Vec<MetricReport>,
}

impl GridRow {
    fn from_reports(ablation: Ablation, seeds: Vec<u64>, reports: Vec<MetricReport>) -> Self {
        let col = |f: &dyn Fn(&MetricReport) -> Option<f64>| -> Option<MeanStd> {
            let v: Vec<f64> = reports.iter().filter_map(f).collect();
            MeanStd::of(&v)
        };
        Self {
            ablation,
            label: ablation.label(),
            seeds,
            auroc: col(&|r| Some(r.auroc)),
            auprc: col(&|r| Some(r.auprc)),
            truth_silhouette: col(&|r| r.truth_silhouette),
            cluster_accuracy: col(&|r| r.cluster_accuracy),
            recovered: reports.iter().filter(|r| r.recovery == Some(Recovery::Yes)).count(),
            reports,
        }
    }
}

/// One seed of a grid and the data it trains on.
#[derive(Clone, Copy, Debug)]
pub struct SeedRun<'a> {
    pub seed: u64,
    pub dataset: &'a Dataset,
    pub truth: Option<&'a GroundTruth>,
}

/// Every (ablation, seed) run, spread over `threads` worker threads. Each
/// run is independent, so results do not depend on the thread count.
pub fn ablation_grid(runs: &[SeedRun<'_>], config: &ExperimentConfig, ablations: &[Ablation], threads: usize) -> Result<Vec<GridRow>> {
    let jobs: Vec<(usize, usize)> = (0..ablations.len()).flat_map(|a| (0..runs.len()).map(move |s| (a, s))).collect();
    let results = run_parallel(&jobs, threads.max(1), |&(a, s)| {
        let run = runs[s];
        let mut cfg = config.clone();
        cfg.hyper.ablation = ablations[a];
        cfg.hyper.seed = run.seed;
        run_experiment(run.dataset, run.truth, &cfg).map(|r| r.test)
    });
    let seeds: Vec<u64> = runs.iter().map(|r| r.seed).collect();
    let mut rows = Vec::with_capacity(ablations.len());
    let mut it = results.into_iter();
    for &ab in ablations {
        let reports = it.by_ref().take(runs.len()).collect::<Result<Vec<_>>>()?;
        rows.push(GridRow::from_reports(ab, seeds.clone(), reports));
    }
    Ok(rows)
}

/// Maps `f` over `jobs` on scoped threads, preserving order.
pub(crate) fn run_parallel<J: Sync, T: Send>(jobs: &[J], threads: usize, f: impl Fn(&J) -> T + Sync) -> Vec<T> {
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots: Vec<std::sync::Mutex<Option<T>>> = jobs.iter().map(|_| std::sync::Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..threads.min(jobs.len()).max(1) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if k >= jobs.len() {
                    break;
                }
                let v = f(&jobs[k]);
                *slots[k].lock().expect("slot lock") = Some(v);
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().expect("slot lock").expect("job ran")).collect()
}
