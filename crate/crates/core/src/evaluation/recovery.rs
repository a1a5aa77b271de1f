use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::clustering::{ari, silhouette, ClusteringResult};
use crate::error::{check_len, Result};
use crate::viz::agglomerative_cluster;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Recovery {
    Yes,
    Partial,
    No,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    /// Silhouette of the embeddings under the true state labels.
    pub silhouette: f64,
    /// ARI between the K-cluster cut and the true states.
    pub ari: f64,
    pub num_clusters: usize,
    pub distinct_majority: bool,
    pub recovered: Recovery,
}

pub const RECOVERY_ARI: f64 = 0.9;
pub const PARTIAL_ARI: f64 = 0.5;

/// Whether each true state's majority cluster is different from every other
/// state's.
pub fn distinct_majority_mapping(clusters: &[usize], states: &[usize]) -> bool {
    let mut counts: BTreeMap<usize, BTreeMap<usize, usize>> = BTreeMap::new();
    for (&c, &s) in clusters.iter().zip(states) {
        *counts.entry(s).or_default().entry(c).or_default() += 1;
    }
    let mut used = std::collections::BTreeSet::new();
    counts.values().all(|by_cluster| {
        // ties go to the lowest cluster id
        let best = by_cluster.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).map(|(c, _)| *c);
        best.is_some_and(|c| used.insert(c))
    })
}

/// Clusters `embeddings` into as many groups as there are true states and
/// grades the match: `yes` needs ARI ≥ 0.9 and a one-to-one majority
/// mapping, `partial` needs ARI ≥ 0.5, anything else is `no`.
pub fn recovery_score<P: AsRef<[f64]>>(embeddings: &[P], states: &[usize]) -> Result<RecoveryReport> {
    check_len("recovery_score states", embeddings.len(), states.len())?;
    let truth = ClusteringResult::from_labels(states);
    let k = truth.num_clusters.min(embeddings.len()).max(1);
    let (assign, a) = if embeddings.len() >= 2 {
        let cut = agglomerative_cluster(embeddings)?.cut(k)?;
        let a = ari(&cut.assignments, states)?;
        (cut.assignments, a)
    } else {
        (vec![0; embeddings.len()], 0.0)
    };
    let si = if truth.num_clusters >= 2 { silhouette(embeddings, states)? } else { 0.0 };
    let distinct = distinct_majority_mapping(&assign, states);
    let recovered = if a >= RECOVERY_ARI && distinct {
        Recovery::Yes
    } else if a >= PARTIAL_ARI {
        Recovery::Partial
    } else {
        Recovery::No
    };
    Ok(RecoveryReport {
        silhouette: si,
        ari: a,
        num_clusters: k,
        distinct_majority: distinct,
        recovered,
    })
}
