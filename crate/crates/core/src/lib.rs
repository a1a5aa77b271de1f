//! Temporal supervised contrastive learning for variable-length, irregularly
//! sampled tabular time series.
//!
//! Each timestep of each series is embedded on the unit hypersphere by an
//! encoder trained with a supervised contrastive loss over nearest-neighbor
//! paired snapshots, regularized so that an LSTM can predict the next
//! embedding from the history. A softmax head on the frozen embeddings
//! produces per-timestep predictions, and the embeddings can be clustered and
//! summarized as feature heatmaps.

pub mod contrastive;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod numeric;
pub mod temporal;
pub mod training;
pub mod viz;

pub use error::{Error, Result};
