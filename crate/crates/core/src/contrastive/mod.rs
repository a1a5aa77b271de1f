//! Hyperspherical embeddings, the Ψ ratio, contrastive losses and
//! nearest-neighbor snapshot pairing.

mod embedding;
mod loss;
mod nn;
mod pairing;

use serde::{Deserialize, Serialize};

pub use embedding::{l2_normalize, l2_normalize_backward, Embedding, Encoder, EncoderTrace};
pub use loss::{psi, scl_snapshot_loss, scl_snapshot_loss_with_grad, simple_scl_loss, simple_scl_loss_with_grad};
pub use nn::{nearest_exact, nn_search, Metric, NnBackend, NswIndex, NswParams};
pub use pairing::{
    build_pair_set, build_pair_set_random, epoch_minibatches, sample_minibatch, Minibatch, PairSet, PairingConfig, PairingStrategy,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContrastiveConfig {
    pub temperature: f64,
    pub batch_size: usize,
    pub metric: Metric,
    pub backend: NnBackend,
    /// Adds the reversed (positive → anchor) term for every pair.
    pub symmetric: bool,
}

impl Default for ContrastiveConfig {
    fn default() -> Self {
        Self {
            temperature: 0.1,
            batch_size: 32,
            metric: Metric::Euclidean,
            backend: NnBackend::Exact,
            symmetric: false,
        }
    }
}

impl ContrastiveConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.temperature > 0.0) {
            return Err(crate::Error::InvalidTemperature(self.temperature));
        }
        if self.batch_size < 2 || self.batch_size % 2 != 0 {
            return Err(crate::Error::InvalidArgument(format!(
                "batch size must be even and ≥ 2, got {}",
                self.batch_size
            )));
        }
        Ok(())
    }
}
