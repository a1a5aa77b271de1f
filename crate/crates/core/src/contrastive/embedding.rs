use std::ops::Deref;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::numeric::{dot, norm, relu, relu_backward, Linear, Params};

/// A point on the unit hypersphere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Embedding {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for Embedding {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub fn l2_normalize(v: &[f64]) -> Result<Embedding> {
    let n = norm(v);
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::ZeroVector);
    }
    Ok(Embedding(v.iter().map(|x| x / n).collect()))
}

/// Gradient through `z = u / ‖u‖` given `z`, `‖u‖` and `∂L/∂z`.
pub fn l2_normalize_backward(z: &[f64], raw_norm: f64, grad_z: &[f64]) -> Vec<f64> {
    let proj = dot(z, grad_z);
    z.iter()
        .zip(grad_z)
        .map(|(&zi, &gi)| (gi - zi * proj) / raw_norm)
        .collect()
}

/// Two-layer ReLU network followed by L2 normalization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub hidden: Linear,
    pub output: Linear,
}

/// Activations of one encoder forward pass.
#[derive(Clone, Debug)]
pub struct EncoderTrace {
    pub x: Vec<f64>,
    pub pre_hidden: Vec<f64>,
    pub hidden: Vec<f64>,
    pub raw_norm: f64,
    pub z: Vec<f64>,
}

impl Encoder {
    pub fn init<R: Rng + ?Sized>(input: usize, hidden: usize, embedding: usize, rng: &mut R) -> Self {
        Self {
            hidden: Linear::init(input, hidden, rng),
            output: Linear::init(hidden, embedding, rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.hidden.input_dim()
    }

    pub fn embedding_dim(&self) -> usize {
        self.output.output_dim()
    }

    pub fn trace(&self, x: &[f64]) -> Result<EncoderTrace> {
        check_len("Encoder input", self.input_dim(), x.len())?;
        let pre_hidden = self.hidden.forward(x)?;
        let hidden = relu(&pre_hidden);
        let raw = self.output.forward(&hidden)?;
        let raw_norm = norm(&raw);
        let z = l2_normalize(&raw)?.into_inner();
        Ok(EncoderTrace {
            x: x.to_vec(),
            pre_hidden,
            hidden,
            raw_norm,
            z,
        })
    }

    pub fn encode(&self, x: &[f64]) -> Result<Embedding> {
        Ok(Embedding(self.trace(x)?.z))
    }

    pub fn encode_all<'a, I>(&self, xs: I) -> Result<Vec<Vec<f64>>>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        xs.into_iter().map(|x| Ok(self.trace(x)?.z)).collect()
    }

    /// Accumulates parameter gradients for upstream `∂L/∂z`.
    pub fn backward(&self, trace: &EncoderTrace, grad_z: &[f64], grads: &mut Encoder) -> Result<()> {
        check_len("Encoder::backward", self.embedding_dim(), grad_z.len())?;
        let g_raw = l2_normalize_backward(&trace.z, trace.raw_norm, grad_z);
        let g_hidden = self.output.backward(&trace.hidden, &g_raw, &mut grads.output)?;
        let g_pre = relu_backward(&trace.pre_hidden, &g_hidden);
        self.hidden.backward(&trace.x, &g_pre, &mut grads.hidden)?;
        Ok(())
    }
}

impl Params for Encoder {
    fn blocks(&self) -> Vec<&[f64]> {
        let mut v = self.hidden.blocks();
        v.extend(self.output.blocks());
        v
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.hidden.blocks_mut();
        v.extend(self.output.blocks_mut());
        v
    }

    fn block_names(&self) -> Vec<String> {
        vec![
            "hidden.weight".into(),
            "hidden.bias".into(),
            "output.weight".into(),
            "output.bias".into(),
        ]
    }
}
