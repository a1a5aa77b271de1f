//! Three-phase training: contrastive pre-training of the encoder, joint
//! encoder/temporal training, then a softmax predictor on frozen embeddings.

mod bundle;
mod checkpoint;
mod phases;
mod pipeline;

pub use bundle::{Ablation, ClusterHead, HeadConfig, HyperParams, ModelBundle, Phase, Provenance};
pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use phases::{
    cross_entropy_loss, pair_pool, pretrain_encoder, snapshot_features, train_cluster_head, train_encoder_temporal, train_predictor,
    EpochLog, PhaseLog, StepLog, TrainingLog,
};
pub use pipeline::{
    ablation_grid, evaluate, prepare, run_experiment, train_full, ExperimentConfig, ExperimentResult, GridRow, MetricReport, MeanStd,
    Prepared, SeedRun, MAX_CLUSTER_POINTS,
};

/// Deterministic child seed for a named sub-task.
pub fn derive_seed(seed: u64, tag: u64, index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    mix(mix(mix(seed) ^ tag) ^ index)
}
