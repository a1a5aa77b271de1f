//! Recurrent next-embedding predictor and the temporal smoothness penalty.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::numeric::{LstmCell, Params};

/// Embeddings of one series and the gaps between consecutive snapshots.
#[derive(Clone, Debug, PartialEq)]
pub struct TemporalSequence {
    pub embeddings: Vec<Vec<f64>>,
    pub durations: Vec<f64>,
}

impl TemporalSequence {
    pub fn new(embeddings: Vec<Vec<f64>>, durations: Vec<f64>) -> Result<Self> {
        if embeddings.is_empty() {
            return Err(Error::InvalidArgument("temporal sequence needs at least one embedding".into()));
        }
        check_len("TemporalSequence durations", embeddings.len() - 1, durations.len())?;
        if let Some(d) = durations.iter().find(|d| !(**d > 0.0) || !d.is_finite()) {
            return Err(Error::InvalidArgument(format!("durations must be positive, got {d}")));
        }
        Ok(Self { embeddings, durations })
    }

    /// Builds the sequence from snapshot times rather than durations.
    pub fn from_times(embeddings: Vec<Vec<f64>>, times: &[f64]) -> Result<Self> {
        check_len("TemporalSequence times", embeddings.len(), times.len())?;
        let durations = times.windows(2).map(|w| w[1] - w[0]).collect();
        Self::new(embeddings, durations)
    }

    pub fn len(&self) -> usize {
        self.embeddings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.embeddings.is_empty()
    }

    /// LSTM inputs `[z⁽ᵗ⁾; δ⁽ᵗ⁾]` for every step that has a successor.
    fn inputs(&self, steps: usize) -> Vec<Vec<f64>> {
        (0..steps)
            .map(|t| {
                let mut x = self.embeddings[t].clone();
                x.push(self.durations[t]);
                x
            })
            .collect()
    }
}

/// `h`: an LSTM over `d + 1` inputs whose hidden state (width `d`) is the
/// prediction of the next embedding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemporalNet {
    pub cell: LstmCell,
}

impl TemporalNet {
    pub fn init<R: Rng + ?Sized>(embedding_dim: usize, rng: &mut R) -> Self {
        Self {
            cell: LstmCell::init(embedding_dim + 1, embedding_dim, rng),
        }
    }

    pub fn zeros(embedding_dim: usize) -> Self {
        Self {
            cell: LstmCell::zeros(embedding_dim + 1, embedding_dim),
        }
    }

    pub fn embedding_dim(&self) -> usize {
        self.cell.hidden_dim()
    }

    fn check_dims(&self, seq: &TemporalSequence) -> Result<()> {
        for z in &seq.embeddings {
            check_len("TemporalNet embedding", self.embedding_dim(), z.len())?;
        }
        Ok(())
    }

    /// Prediction of `z⁽ℓ⁺¹⁾` after reading the first `prefix_len` steps.
    pub fn predict_next(&self, seq: &TemporalSequence, prefix_len: usize) -> Result<Vec<f64>> {
        if prefix_len == 0 {
            return Err(Error::InvalidArgument("predict_next needs a non-empty prefix".into()));
        }
        if prefix_len > seq.durations.len() {
            return Err(Error::InvalidArgument(format!(
                "prefix of {prefix_len} steps needs {prefix_len} durations, sequence has {}",
                seq.durations.len()
            )));
        }
        self.check_dims(seq)?;
        let trace = self.cell.run(&seq.inputs(prefix_len))?;
        Ok(trace.steps.last().expect("non-empty prefix").h.clone())
    }

    /// `Σ_ℓ ||h(prefix_ℓ) − z⁽ℓ⁺¹⁾||² / (L − 1)` for one series; 0 when L = 1.
    pub fn series_term(&self, seq: &TemporalSequence) -> Result<f64> {
        Ok(self.series_term_impl(seq, None)?.0)
    }

    /// Like [`series_term`](Self::series_term), adding `scale ·` its gradient to
    /// `grads` and returning the gradient on every embedding of the series.
    pub fn series_term_with_grad(&self, seq: &TemporalSequence, scale: f64, grads: &mut TemporalNet) -> Result<(f64, Vec<Vec<f64>>)> {
        let (v, gz) = self.series_term_impl(seq, Some((scale, grads)))?;
        Ok((v, gz.expect("gradient requested")))
    }

    fn series_term_impl(&self, seq: &TemporalSequence, grad: Option<(f64, &mut TemporalNet)>) -> Result<(f64, Option<Vec<Vec<f64>>>)> {
        self.check_dims(seq)?;
        let d = self.embedding_dim();
        let steps = seq.len() - 1;
        if steps == 0 {
            return Ok((0.0, grad.map(|_| vec![vec![0.0; d]])));
        }
        let trace = self.cell.run(&seq.inputs(steps))?;
        let denom = steps as f64;
        let mut total = 0.0;
        let mut residuals = Vec::with_capacity(steps);
        for (t, step) in trace.steps.iter().enumerate() {
            let r: Vec<f64> = step.h.iter().zip(&seq.embeddings[t + 1]).map(|(p, z)| p - z).collect();
            total += r.iter().map(|v| v * v).sum::<f64>();
            residuals.push(r);
        }
        let value = total / denom;
        let Some((scale, grads)) = grad else {
            return Ok((value, None));
        };
        let c = 2.0 * scale / denom;
        let dh: Vec<Vec<f64>> = residuals.iter().map(|r| r.iter().map(|v| c * v).collect()).collect();
        let dxs = self.cell.backward(&trace, &dh, &mut grads.cell)?;
        let mut gz = vec![vec![0.0; d]; seq.len()];
        for (t, dx) in dxs.iter().enumerate() {
            for k in 0..d {
                gz[t][k] += dx[k];
            }
        }
        for (t, r) in dh.iter().enumerate() {
            for k in 0..d {
                gz[t + 1][k] -= r[k];
            }
        }
        Ok((value, Some(gz)))
    }
}

impl Params for TemporalNet {
    fn blocks(&self) -> Vec<&[f64]> {
        self.cell.blocks()
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        self.cell.blocks_mut()
    }

    fn block_names(&self) -> Vec<String> {
        self.cell.block_names().into_iter().map(|n| format!("temporal.{n}")).collect()
    }
}

/// Number of series that contribute to the normalizer (length ≥ 2).
pub fn contributing_series(sequences: &[TemporalSequence]) -> usize {
    sequences.iter().filter(|s| s.len() >= 2).count()
}

/// Mean of the per-series terms over series with at least two snapshots.
pub fn temporal_reg_loss(net: &TemporalNet, sequences: &[TemporalSequence]) -> Result<f64> {
    let n = contributing_series(sequences);
    if n == 0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for s in sequences {
        total += net.series_term(s)?;
    }
    Ok(total / n as f64)
}

/// Loss, gradient on `h`, and gradient on each sequence's embeddings.
pub fn temporal_reg_loss_with_grad(net: &TemporalNet, sequences: &[TemporalSequence]) -> Result<(f64, TemporalNet, Vec<Vec<Vec<f64>>>)> {
    let mut grads = net.zeroed();
    let n = contributing_series(sequences);
    if n == 0 {
        let gz = sequences.iter().map(|s| vec![vec![0.0; net.embedding_dim()]; s.len()]).collect();
        return Ok((0.0, grads, gz));
    }
    let scale = 1.0 / n as f64;
    let mut total = 0.0;
    let mut gzs = Vec::with_capacity(sequences.len());
    for s in sequences {
        let (v, gz) = net.series_term_with_grad(s, scale, &mut grads)?;
        total += v;
        gzs.push(gz);
    }
    Ok((total / n as f64, grads, gzs))
}
