use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bundle::{ClusterHead, HeadConfig, ModelBundle, Phase};
use super::derive_seed;
use crate::contrastive::{build_pair_set, epoch_minibatches, scl_snapshot_loss_with_grad, Encoder, Minibatch, PairingConfig, PairingStrategy};
use crate::data::{Dataset, OutcomeMode, PoolMode, SnapshotRef};
use crate::error::{check_len, Error, Result};
use crate::evaluation::{auroc_ovr, ScoredPredictions};
use crate::numeric::{cross_entropy_with_grad, softmax, Adam, AdamConfig, Joint, Linear, Params};
use crate::temporal::TemporalSequence;

const TAG_PAIRS: u64 = 10;
const TAG_BATCHES: u64 = 11;
const TAG_CHUNKS: u64 = 12;
const TAG_PREDICTOR: u64 = 13;
const TAG_HEAD: u64 = 14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub epoch: usize,
    pub step: usize,
    pub contrastive: f64,
    pub temporal: f64,
    pub overall: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub validation_auroc: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseLog {
    pub phase: Phase,
    pub steps: Vec<StepLog>,
    pub epochs: Vec<EpochLog>,
}

impl PhaseLog {
    fn new(phase: Phase) -> Self {
        Self {
            phase,
            steps: Vec::new(),
            epochs: Vec::new(),
        }
    }

    fn close_epoch(&mut self, epoch: usize, first_step: usize, validation_auroc: Option<f64>) {
        let steps = &self.steps[first_step..];
        let mean = steps.iter().map(|s| s.overall).sum::<f64>() / steps.len().max(1) as f64;
        self.epochs.push(EpochLog {
            epoch,
            mean_loss: mean,
            validation_auroc,
        });
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub phases: Vec<PhaseLog>,
}

/// Standardized feature vectors of the referenced snapshots.
pub fn snapshot_features<'a>(dataset: &'a Dataset, refs: &[SnapshotRef]) -> Vec<&'a [f64]> {
    refs.iter().map(|&r| dataset.snapshot(r).features.as_slice()).collect()
}

/// Snapshots eligible for pairing and their pairing labels: final snapshots
/// in static mode (optionally every snapshot, with unlabeled ones as class
/// `C`), all labeled snapshots in dynamic mode.
pub fn pair_pool(dataset: &Dataset, final_only: bool, pair_unknown: bool) -> (Vec<SnapshotRef>, Vec<usize>) {
    let refs = match (dataset.mode, final_only, pair_unknown) {
        (OutcomeMode::Static, true, _) => dataset.snapshot_pool(PoolMode::FinalOnly),
        (OutcomeMode::Static, false, true) => dataset.snapshot_pool(PoolMode::All),
        _ => dataset.snapshot_pool(PoolMode::LabeledOnly),
    };
    let labels = refs
        .iter()
        .map(|&r| dataset.snapshot(r).label.unwrap_or(dataset.num_classes))
        .collect();
    (refs, labels)
}

fn pairing_config(bundle: &ModelBundle) -> PairingConfig {
    PairingConfig {
        strategy: if bundle.hyper.ablation.nn_pairing {
            PairingStrategy::Nearest
        } else {
            PairingStrategy::Random
        },
        metric: bundle.hyper.metric,
        backend: bundle.hyper.backend,
    }
}

/// Minibatches of snapshot refs for one contrastive epoch.
fn epoch_batches(bundle: &ModelBundle, dataset: &Dataset, refs: &[SnapshotRef], labels: &[usize], phase: u64, epoch: usize) -> Result<Vec<Vec<SnapshotRef>>> {
    let feats = snapshot_features(dataset, refs);
    let seed = bundle.hyper.seed;
    let pairs = build_pair_set(&feats, labels, &pairing_config(bundle), derive_seed(seed, TAG_PAIRS + 100 * phase, epoch as u64))?;
    if pairs.is_empty() {
        return Err(Error::InsufficientData("no class has two snapshots to pair".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, TAG_BATCHES + 100 * phase, epoch as u64));
    let batches = epoch_minibatches(&pairs, bundle.hyper.batch_size, &mut rng)?;
    Ok(batches.into_iter().map(|b: Minibatch| b.members.iter().map(|&m| refs[m]).collect()).collect())
}

/// Contrastive loss of one minibatch; encoder gradients are accumulated.
fn contrastive_batch(encoder: &Encoder, dataset: &Dataset, batch: &[SnapshotRef], tau: f64, symmetric: bool, grads: &mut Encoder) -> Result<f64> {
    let traces = batch
        .iter()
        .map(|&r| encoder.trace(&dataset.snapshot(r).features))
        .collect::<Result<Vec<_>>>()?;
    let z: Vec<&[f64]> = traces.iter().map(|t| t.z.as_slice()).collect();
    let (loss, gz) = scl_snapshot_loss_with_grad(&z, tau, symmetric)?;
    for (t, g) in traces.iter().zip(&gz) {
        encoder.backward(t, g, grads)?;
    }
    Ok(loss)
}

/// `(1/N)·Σ` of the per-series temporal terms over `records`, with
/// `scale ·` its gradient accumulated into both networks.
fn temporal_chunk(
    encoder: &Encoder,
    temporal: &crate::temporal::TemporalNet,
    dataset: &Dataset,
    records: &[usize],
    n_contributing: usize,
    scale: f64,
    grads: &mut Joint<Encoder, crate::temporal::TemporalNet>,
) -> Result<f64> {
    let mut total = 0.0;
    let inv_n = 1.0 / n_contributing as f64;
    for &ri in records {
        let rec = &dataset.records[ri];
        if rec.len() < 2 {
            continue;
        }
        let traces = rec.snapshots.iter().map(|s| encoder.trace(&s.features)).collect::<Result<Vec<_>>>()?;
        let times: Vec<f64> = rec.snapshots.iter().map(|s| s.time).collect();
        let seq = TemporalSequence::from_times(traces.iter().map(|t| t.z.clone()).collect(), &times)?;
        let (v, gz) = temporal.series_term_with_grad(&seq, scale * inv_n, &mut grads.1)?;
        total += v;
        for (t, g) in traces.iter().zip(&gz) {
            encoder.backward(t, g, &mut grads.0)?;
        }
    }
    Ok(total * inv_n)
}

/// Phase 1: contrastive pre-training of `f` alone.
pub fn pretrain_encoder(bundle: &ModelBundle, train: &Dataset) -> Result<(ModelBundle, PhaseLog)> {
    let mut out = bundle.clone();
    let mut log = PhaseLog::new(Phase::Pretrain);
    if !bundle.hyper.ablation.pretrain {
        return Ok((out, log));
    }
    check_len("pretrain features", bundle.input_dim(), train.num_features())?;
    let h = &bundle.hyper;
    let (refs, labels) = pair_pool(train, true, false);
    let mut adam = Adam::new(h.adam(), &out.encoder);
    for epoch in 0..h.pretrain_epochs {
        let first = log.steps.len();
        for batch in epoch_batches(&out, train, &refs, &labels, 1, epoch)? {
            let mut grads = out.encoder.zeroed();
            let loss = contrastive_batch(&out.encoder, train, &batch, h.temperature, h.symmetric, &mut grads)?;
            adam.step(&mut out.encoder, &grads)?;
            log.steps.push(StepLog {
                epoch: epoch + 1,
                step: log.steps.len() + 1,
                contrastive: loss,
                temporal: 0.0,
                overall: loss,
            });
        }
        log.close_epoch(epoch + 1, first, None);
    }
    out.provenance.phases_completed.push(Phase::Pretrain);
    Ok((out, log))
}

/// Phase 2: joint training of `f` and `h` on the contrastive loss plus
/// `α ·` the temporal term. The temporal term is spread over the epoch's
/// minibatches: each step covers a disjoint chunk of series with weight
/// `1/N`, so one epoch sums to the full term.
pub fn train_encoder_temporal(bundle: &ModelBundle, train: &Dataset) -> Result<(ModelBundle, PhaseLog)> {
    check_len("joint features", bundle.input_dim(), train.num_features())?;
    let mut out = bundle.clone();
    let mut log = PhaseLog::new(Phase::Joint);
    let h = bundle.hyper.clone();
    let use_temporal = h.ablation.temporal_reg && h.alpha > 0.0;
    let (refs, labels) = pair_pool(train, false, h.pair_unknown);
    let n_contributing = train.records.iter().filter(|r| r.len() >= 2).count();
    let mut params = Joint(out.encoder.clone(), out.temporal.clone());
    let mut adam = Adam::new(h.adam(), &params);
    for epoch in 0..h.joint_epochs {
        let batches = epoch_batches(&out, train, &refs, &labels, 2, epoch)?;
        let mut order: Vec<usize> = (0..train.records.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(h.seed, TAG_CHUNKS, epoch as u64)));
        let chunk = order.len().div_ceil(batches.len());
        let first = log.steps.len();
        for (k, batch) in batches.iter().enumerate() {
            let mut grads = params.zeroed();
            let scl = contrastive_batch(&params.0, train, batch, h.temperature, h.symmetric, &mut grads.0)?;
            let temporal = if use_temporal && n_contributing > 0 {
                let lo = (k * chunk).min(order.len());
                let hi = ((k + 1) * chunk).min(order.len());
                temporal_chunk(&params.0, &params.1, train, &order[lo..hi], n_contributing, h.alpha, &mut grads)?
            } else {
                0.0
            };
            adam.step(&mut params, &grads)?;
            let alpha = if use_temporal { h.alpha } else { 0.0 };
            log.steps.push(StepLog {
                epoch: epoch + 1,
                step: log.steps.len() + 1,
                contrastive: scl,
                temporal,
                overall: scl + alpha * temporal,
            });
        }
        log.close_epoch(epoch + 1, first, None);
    }
    out.encoder = params.0;
    out.temporal = params.1;
    out.provenance.phases_completed.push(Phase::Joint);
    Ok((out, log))
}

/// Embeddings and supervision targets of every labeled-target snapshot.
fn labeled_embeddings(bundle: &ModelBundle, dataset: &Dataset) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    let mut z = Vec::new();
    let mut y = Vec::new();
    for r in dataset.snapshot_pool(PoolMode::All) {
        if let Some(label) = dataset.target_label(r) {
            z.push(bundle.embed_standardized(&dataset.snapshot(r).features)?);
            y.push(label);
        }
    }
    Ok((z, y))
}

/// Mean cross-entropy of a softmax layer over embeddings.
pub fn cross_entropy_loss<Z: AsRef<[f64]>>(layer: &Linear, z: &[Z], y: &[usize]) -> Result<f64> {
    check_len("cross_entropy_loss targets", z.len(), y.len())?;
    let mut total = 0.0;
    for (zi, &yi) in z.iter().zip(y) {
        total += cross_entropy_with_grad(&layer.forward(zi.as_ref())?, yi).0;
    }
    Ok(total / z.len().max(1) as f64)
}

/// Minibatch Adam on mean cross-entropy; calls `after_epoch` with the
/// layer after each epoch.
fn fit_softmax(
    layer: &mut Linear,
    z: &[Vec<f64>],
    y: &[usize],
    adam_config: AdamConfig,
    epochs: usize,
    batch_size: usize,
    seed: u64,
    log: &mut PhaseLog,
    mut after_epoch: impl FnMut(usize, &Linear) -> Result<Option<f64>>,
) -> Result<()> {
    let mut adam = Adam::new(adam_config, layer);
    let mut order: Vec<usize> = (0..z.len()).collect();
    for epoch in 0..epochs {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, 0, epoch as u64)));
        let first = log.steps.len();
        for chunk in order.chunks(batch_size) {
            let mut grads = layer.zeroed();
            let mut loss = 0.0;
            let inv = 1.0 / chunk.len() as f64;
            for &i in chunk {
                let (l, g) = cross_entropy_with_grad(&layer.forward(&z[i])?, y[i]);
                loss += l * inv;
                let scaled: Vec<f64> = g.iter().map(|v| v * inv).collect();
                layer.backward(&z[i], &scaled, &mut grads)?;
            }
            adam.step(layer, &grads)?;
            log.steps.push(StepLog {
                epoch: epoch + 1,
                step: log.steps.len() + 1,
                contrastive: 0.0,
                temporal: 0.0,
                overall: loss,
            });
        }
        let v = after_epoch(epoch + 1, layer)?;
        log.close_epoch(epoch + 1, first, v);
    }
    Ok(())
}

/// Phase 3: softmax predictor `g` on frozen embeddings. With a validation
/// set, the epoch with the best validation AUROC is kept (earliest on ties).
pub fn train_predictor(bundle: &ModelBundle, train: &Dataset, validation: Option<&Dataset>) -> Result<(ModelBundle, PhaseLog)> {
    check_len("predictor features", bundle.input_dim(), train.num_features())?;
    let (z, y) = labeled_embeddings(bundle, train)?;
    if z.is_empty() {
        return Err(Error::InsufficientData("no labeled snapshots for the predictor".into()));
    }
    let val = match validation {
        Some(v) => Some(labeled_embeddings(bundle, v)?),
        None => None,
    };
    let mut out = bundle.clone();
    let mut log = PhaseLog::new(Phase::Predictor);
    let mut best: Option<(f64, usize, Linear)> = None;
    let h = &bundle.hyper;
    let mut layer = out.predictor.clone();
    fit_softmax(
        &mut layer,
        &z,
        &y,
        AdamConfig {
            learning_rate: h.predictor_learning_rate,
            ..h.adam()
        },
        h.predictor_epochs,
        h.batch_size,
        derive_seed(h.seed, TAG_PREDICTOR, 0),
        &mut log,
        |epoch, layer| {
            let Some((vz, vy)) = &val else { return Ok(None) };
            let probs = vz.iter().map(|zi| Ok(softmax(&layer.forward(zi)?))).collect::<Result<Vec<_>>>()?;
            let auc = match auroc_ovr(&ScoredPredictions::new(probs, vy.clone())?) {
                Ok(r) => r.macro_average,
                Err(_) => return Ok(None),
            };
            if best.as_ref().is_none_or(|b| auc > b.0) {
                best = Some((auc, epoch, layer.clone()));
            }
            Ok(Some(auc))
        },
    )?;
    match best {
        Some((auc, epoch, l)) => {
            out.predictor = l;
            out.provenance.selected_epoch = Some(epoch);
            out.provenance.validation_auroc = Some(auc);
        }
        None => {
            out.predictor = layer;
            out.provenance.selected_epoch = (h.predictor_epochs > 0).then_some(h.predictor_epochs);
            out.provenance.validation_auroc = None;
        }
    }
    out.provenance.phases_completed.push(Phase::Predictor);
    Ok((out, log))
}

/// Fits a fresh softmax head from frozen embeddings of `features`
/// (standardized) to state ids.
pub fn train_cluster_head<X: AsRef<[f64]>>(bundle: &ModelBundle, features: &[X], states: &[usize], config: HeadConfig) -> Result<(ClusterHead, PhaseLog)> {
    check_len("cluster head states", features.len(), states.len())?;
    if features.is_empty() {
        return Err(Error::InsufficientData("no snapshots for the cluster head".into()));
    }
    let mut ids: Vec<usize> = states.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let y: Vec<usize> = states.iter().map(|s| ids.binary_search(s).expect("state listed")).collect();
    let z = features.iter().map(|x| bundle.embed_standardized(x.as_ref())).collect::<Result<Vec<_>>>()?;
    let mut layer = Linear::zeros(bundle.encoder.embedding_dim(), ids.len());
    let mut log = PhaseLog::new(Phase::ClusterHead);
    let adam = AdamConfig {
        learning_rate: config.learning_rate,
        ..bundle.hyper.adam()
    };
    fit_softmax(
        &mut layer,
        &z,
        &y,
        adam,
        config.epochs,
        config.batch_size,
        derive_seed(bundle.hyper.seed, TAG_HEAD, 0),
        &mut log,
        |_, _| Ok(None),
    )?;
    Ok((ClusterHead { layer, states: ids }, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, Snapshot, Standardization, SyntheticSpec, TimeSeriesRecord};
    use crate::training::HyperParams;

    fn toy() -> Dataset {
        // five two-step series per class in dynamic mode → 10 snapshots
        let mut records = Vec::new();
        for i in 0..5 {
            let class = i % 2;
            let base = if class == 0 { 1.0 } else { -1.0 };
            records.push(TimeSeriesRecord {
                patient_id: format!("p{i}"),
                snapshots: (0..2)
                    .map(|k| Snapshot {
                        step_index: k + 1,
                        time: k as f64,
                        features: vec![base + 0.1 * i as f64, 0.2 * k as f64 - 0.05 * i as f64],
                        label: Some(class),
                        observed_mask: None,
                    })
                    .collect(),
            });
        }
        Dataset {
            records,
            feature_names: vec!["a".into(), "b".into()],
            num_classes: 2,
            mode: OutcomeMode::Dynamic,
        }
    }

    fn bundle_for(ds: &Dataset, h: HyperParams) -> ModelBundle {
        ModelBundle::new(h, ds.num_features(), ds.num_classes, Standardization::identity(ds.num_features())).unwrap()
    }

    fn full_pair_loss(bundle: &ModelBundle, ds: &Dataset) -> f64 {
        let (refs, labels) = pair_pool(ds, true, false);
        let feats = snapshot_features(ds, &refs);
        let pairs = build_pair_set(&feats, &labels, &pairing_config(bundle), 99).unwrap();
        let m = Minibatch::from_pairs(pairs.pairs);
        let z: Vec<Vec<f64>> = m.members.iter().map(|&i| bundle.embed_standardized(feats[i]).unwrap()).collect();
        crate::contrastive::scl_snapshot_loss(&z, bundle.hyper.temperature, false).unwrap()
    }

    #[test]
    fn static_pair_pools() {
        let ds = generate_synthetic(&SyntheticSpec {
            series_per_template: 2,
            ..SyntheticSpec::default()
        })
        .unwrap()
        .dataset;
        let (finals, labels) = pair_pool(&ds, true, true);
        assert_eq!(finals.len(), 8);
        assert!(labels.iter().all(|&l| l < 2));
        assert_eq!(pair_pool(&ds, false, false).0, finals);
        let (all, labels) = pair_pool(&ds, false, true);
        assert_eq!(all.len(), 24);
        assert_eq!(labels.iter().filter(|&&l| l == 2).count(), 16);
    }

    #[test]
    fn one_pretrain_epoch_lowers_the_loss() {
        let ds = toy();
        let h = HyperParams {
            pretrain_epochs: 1,
            batch_size: 10,
            learning_rate: 1e-2,
            ..HyperParams::synthetic()
        };
        let b = bundle_for(&ds, h);
        let (after, log) = pretrain_encoder(&b, &ds).unwrap();
        assert_eq!(log.epochs.len(), 1);
        assert!(full_pair_loss(&after, &ds) < full_pair_loss(&b, &ds));
    }

    #[test]
    fn disabled_pretraining_is_identity_and_runs_are_deterministic() {
        let ds = toy();
        let mut h = HyperParams::synthetic();
        h.pretrain_epochs = 2;
        h.batch_size = 4;
        let b = bundle_for(&ds, h.clone());
        let (x, _) = pretrain_encoder(&b, &ds).unwrap();
        let (y, _) = pretrain_encoder(&b, &ds).unwrap();
        assert_eq!(x, y);
        h.ablation.pretrain = false;
        let b = bundle_for(&ds, h);
        let (z, log) = pretrain_encoder(&b, &ds).unwrap();
        assert_eq!(z, b);
        assert!(log.steps.is_empty());
    }

    #[test]
    fn pairing_needs_two_snapshots_of_a_class() {
        let mut ds = toy();
        ds.records.truncate(2);
        ds.records[0].snapshots.truncate(1);
        ds.records[1].snapshots.truncate(1);
        let b = bundle_for(&ds, HyperParams::synthetic());
        assert!(pretrain_encoder(&b, &ds).is_err());
    }

    #[test]
    fn logged_overall_is_the_sum_of_its_terms() {
        let data = generate_synthetic(&SyntheticSpec {
            series_per_template: 5,
            ..SyntheticSpec::default()
        })
        .unwrap()
        .dataset;
        let h = HyperParams {
            joint_epochs: 2,
            batch_size: 4,
            alpha: 0.7,
            ..HyperParams::synthetic()
        };
        let b = bundle_for(&data, h);
        let (_, log) = train_encoder_temporal(&b, &data).unwrap();
        assert!(log.steps.iter().any(|s| s.temporal > 0.0));
        for s in &log.steps {
            assert!((s.overall - (s.contrastive + 0.7 * s.temporal)).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_alpha_matches_disabled_regularizer() {
        let data = generate_synthetic(&SyntheticSpec {
            series_per_template: 4,
            ..SyntheticSpec::default()
        })
        .unwrap()
        .dataset;
        let mut h = HyperParams {
            joint_epochs: 2,
            batch_size: 4,
            alpha: 0.0,
            ..HyperParams::synthetic()
        };
        let (a, _) = train_encoder_temporal(&bundle_for(&data, h.clone()), &data).unwrap();
        h.alpha = 1.0;
        h.ablation.temporal_reg = false;
        let (b, _) = train_encoder_temporal(&bundle_for(&data, h), &data).unwrap();
        assert_eq!(a.encoder, b.encoder);
    }

    #[test]
    fn predictor_leaves_encoder_alone_and_separates() {
        let ds = toy();
        let h = HyperParams {
            predictor_epochs: 200,
            batch_size: 4,
            learning_rate: 5e-2,
            ..HyperParams::synthetic()
        };
        let b = bundle_for(&ds, h);
        let (after, _) = train_predictor(&b, &ds, None).unwrap();
        assert_eq!(after.encoder, b.encoder);
        assert_eq!(after.temporal, b.temporal);
        let (z, y) = labeled_embeddings(&after, &ds).unwrap();
        assert_eq!(z.len(), 10);

        let sep: Vec<Vec<f64>> = (0..20).map(|i| {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            vec![s * 0.8, 0.1 * (i as f64 - 10.0) / 10.0, 0.3]
        }).collect();
        let sy: Vec<usize> = (0..20).map(|i| i % 2).collect();
        let mut layer = Linear::zeros(3, 2);
        let mut slog = PhaseLog::new(Phase::Predictor);
        fit_softmax(&mut layer, &sep, &sy, AdamConfig { learning_rate: 5e-2, ..AdamConfig::default() }, 50, 4, 0, &mut slog, |_, _| Ok(None)).unwrap();
        for (zi, &yi) in sep.iter().zip(&sy) {
            let p = softmax(&layer.forward(zi).unwrap());
            assert_eq!((p[1] > p[0]) as usize, yi);
        }
        let zero = Linear::zeros(3, 2);
        assert!((cross_entropy_loss(&zero, &z, &y).unwrap() - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn cluster_head_on_one_state_is_always_right() {
        let ds = toy();
        let b = bundle_for(&ds, HyperParams::synthetic());
        let feats: Vec<Vec<f64>> = ds.snapshots().map(|s| s.features.clone()).collect();
        let states = vec![4; feats.len()];
        let (head, _) = train_cluster_head(&b, &feats, &states, b.hyper.cluster_head).unwrap();
        let z: Vec<Vec<f64>> = feats.iter().map(|x| b.embed_standardized(x).unwrap()).collect();
        assert_eq!(head.accuracy(&z, &states).unwrap(), 1.0);
    }
}
