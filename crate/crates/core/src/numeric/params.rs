/// A bundle of trainable parameter blocks with a fixed, ordered layout.
///
/// Gradients are stored in a value of the same type, so optimizers and the
/// finite-difference checker can walk parameters and gradients in lockstep.
pub trait Params {
    fn blocks(&self) -> Vec<&[f64]>;

    fn blocks_mut(&mut self) -> Vec<&mut [f64]>;

    fn block_names(&self) -> Vec<String>;

    fn zeroed(&self) -> Self
    where
        Self: Clone,
    {
        let mut out = self.clone();
        for b in out.blocks_mut() {
            b.fill(0.0);
        }
        out
    }

    fn num_params(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    fn flatten(&self) -> Vec<f64> {
        self.blocks().concat()
    }

    /// `self += scale · other`, block by block.
    fn add_scaled(&mut self, other: &Self, scale: f64) {
        let src = other.blocks();
        for (dst, s) in self.blocks_mut().into_iter().zip(src) {
            for (d, v) in dst.iter_mut().zip(s) {
                *d += scale * v;
            }
        }
    }
}

/// Plain list of vectors, used when differentiating with respect to inputs
/// such as embeddings.
#[derive(Clone, Debug, PartialEq)]
pub struct VecParams(pub Vec<Vec<f64>>);

impl Params for VecParams {
    fn blocks(&self) -> Vec<&[f64]> {
        self.0.iter().map(Vec::as_slice).collect()
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        self.0.iter_mut().map(Vec::as_mut_slice).collect()
    }

    fn block_names(&self) -> Vec<String> {
        (0..self.0.len()).map(|i| format!("v{i}")).collect()
    }
}

/// Two parameter bundles differentiated together.
#[derive(Clone, Debug, PartialEq)]
pub struct Joint<A, B>(pub A, pub B);

impl<A: Params, B: Params> Params for Joint<A, B> {
    fn blocks(&self) -> Vec<&[f64]> {
        let mut v = self.0.blocks();
        v.extend(self.1.blocks());
        v
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.0.blocks_mut();
        v.extend(self.1.blocks_mut());
        v
    }

    fn block_names(&self) -> Vec<String> {
        let mut v: Vec<String> = self.0.block_names().into_iter().map(|n| format!("0.{n}")).collect();
        v.extend(self.1.block_names().into_iter().map(|n| format!("1.{n}")));
        v
    }
}
