//! Ranking metrics, external clustering metrics and synthetic-state recovery.

mod classification;
mod clustering;
mod recovery;

pub use classification::{auprc_ovr, auroc_ovr, binary_auprc, binary_auroc, midranks, OvrReport, ScoredPredictions};
pub use clustering::{ari, nmi, purity, silhouette, ClusteringResult};
pub use recovery::{distinct_majority_mapping, recovery_score, Recovery, RecoveryReport, PARTIAL_ARI, RECOVERY_ARI};
