use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::sigmoid;
use super::matrix::{axpy, Matrix};
use super::params::Params;
use crate::error::{check_len, Error, Result};

/// Weights of one LSTM gate: input projection, recurrent projection, bias.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub w_input: Matrix,
    pub w_hidden: Matrix,
    pub bias: Vec<f64>,
}

impl Gate {
    fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_input: Matrix::zeros(hidden, input),
            w_hidden: Matrix::zeros(hidden, hidden),
            bias: vec![0.0; hidden],
        }
    }

    fn init<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            w_input: Matrix::glorot(hidden, input, rng),
            w_hidden: Matrix::glorot(hidden, hidden, rng),
            bias: vec![0.0; hidden],
        }
    }

    fn preactivation(&self, x: &[f64], h: &[f64]) -> Vec<f64> {
        let a = self.w_input.matvec(x).expect("checked input width");
        let b = self.w_hidden.matvec(h).expect("checked hidden width");
        a.iter()
            .zip(&b)
            .zip(&self.bias)
            .map(|((a, b), c)| a + b + c)
            .collect()
    }

    fn accumulate(&self, da: &[f64], x: &[f64], h_prev: &[f64], grads: &mut Gate, dx: &mut [f64], dh: &mut [f64]) {
        grads.w_input.add_outer(da, x, 1.0);
        grads.w_hidden.add_outer(da, h_prev, 1.0);
        axpy(&mut grads.bias, 1.0, da);
        axpy(dx, 1.0, &self.w_input.matvec_transposed(da).expect("gate width"));
        axpy(dh, 1.0, &self.w_hidden.matvec_transposed(da).expect("gate width"));
    }
}

/// Single LSTM cell with sigmoid gates and tanh candidate/output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmCell {
    pub input_gate: Gate,
    pub forget_gate: Gate,
    pub output_gate: Gate,
    pub candidate: Gate,
}

/// Activations of one cell step, kept for the backward pass.
#[derive(Clone, Debug)]
pub struct LstmStepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub o: Vec<f64>,
    pub g: Vec<f64>,
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

/// Recorded forward pass over a whole input sequence.
#[derive(Clone, Debug, Default)]
pub struct LstmTrace {
    pub steps: Vec<LstmStepCache>,
}

impl LstmTrace {
    pub fn hidden_states(&self) -> impl Iterator<Item = &[f64]> {
        self.steps.iter().map(|s| s.h.as_slice())
    }
}

impl LstmCell {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            input_gate: Gate::zeros(input, hidden),
            forget_gate: Gate::zeros(input, hidden),
            output_gate: Gate::zeros(input, hidden),
            candidate: Gate::zeros(input, hidden),
        }
    }

    /// Glorot-uniform per gate block, zero biases.
    pub fn init<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            input_gate: Gate::init(input, hidden, rng),
            forget_gate: Gate::init(input, hidden, rng),
            output_gate: Gate::init(input, hidden, rng),
            candidate: Gate::init(input, hidden, rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_gate.w_input.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.input_gate.w_input.rows()
    }

    fn gates(&self) -> [&Gate; 4] {
        [&self.input_gate, &self.forget_gate, &self.output_gate, &self.candidate]
    }

    fn gates_mut(&mut self) -> [&mut Gate; 4] {
        [
            &mut self.input_gate,
            &mut self.forget_gate,
            &mut self.output_gate,
            &mut self.candidate,
        ]
    }

    pub fn step_cached(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<LstmStepCache> {
        check_len("LstmCell input", self.input_dim(), x.len())?;
        check_len("LstmCell hidden", self.hidden_dim(), h_prev.len())?;
        check_len("LstmCell cell", self.hidden_dim(), c_prev.len())?;
        let i: Vec<f64> = self.input_gate.preactivation(x, h_prev).into_iter().map(sigmoid).collect();
        let f: Vec<f64> = self.forget_gate.preactivation(x, h_prev).into_iter().map(sigmoid).collect();
        let o: Vec<f64> = self.output_gate.preactivation(x, h_prev).into_iter().map(sigmoid).collect();
        let g: Vec<f64> = self.candidate.preactivation(x, h_prev).into_iter().map(f64::tanh).collect();
        let c: Vec<f64> = (0..c_prev.len()).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
        let h: Vec<f64> = (0..c.len()).map(|k| o[k] * c[k].tanh()).collect();
        Ok(LstmStepCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            i,
            f,
            o,
            g,
            c,
            h,
        })
    }

    /// One recurrence step, returning `(h_next, c_next)`.
    pub fn step(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let cache = self.step_cached(x, h_prev, c_prev)?;
        Ok((cache.h, cache.c))
    }

    /// Runs the cell over `inputs` from a zero initial state.
    pub fn run(&self, inputs: &[Vec<f64>]) -> Result<LstmTrace> {
        let hidden = self.hidden_dim();
        let mut h = vec![0.0; hidden];
        let mut c = vec![0.0; hidden];
        let mut steps = Vec::with_capacity(inputs.len());
        for x in inputs {
            let cache = self.step_cached(x, &h, &c)?;
            h.clone_from(&cache.h);
            c.clone_from(&cache.c);
            steps.push(cache);
        }
        Ok(LstmTrace { steps })
    }

    /// Backward through one step. Returns `(dx, dh_prev, dc_prev)`.
    pub fn backward_step(
        &self,
        cache: &LstmStepCache,
        dh: &[f64],
        dc: &[f64],
        grads: &mut LstmCell,
    ) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let n = self.hidden_dim();
        check_len("LstmCell::backward_step dh", n, dh.len())?;
        check_len("LstmCell::backward_step dc", n, dc.len())?;
        let mut da_i = vec![0.0; n];
        let mut da_f = vec![0.0; n];
        let mut da_o = vec![0.0; n];
        let mut da_g = vec![0.0; n];
        let mut dc_prev = vec![0.0; n];
        for k in 0..n {
            let tc = cache.c[k].tanh();
            let d_o = dh[k] * tc;
            let dct = dc[k] + dh[k] * cache.o[k] * (1.0 - tc * tc);
            let d_i = dct * cache.g[k];
            let d_g = dct * cache.i[k];
            let d_f = dct * cache.c_prev[k];
            dc_prev[k] = dct * cache.f[k];
            da_i[k] = d_i * cache.i[k] * (1.0 - cache.i[k]);
            da_f[k] = d_f * cache.f[k] * (1.0 - cache.f[k]);
            da_o[k] = d_o * cache.o[k] * (1.0 - cache.o[k]);
            da_g[k] = d_g * (1.0 - cache.g[k] * cache.g[k]);
        }
        let mut dx = vec![0.0; self.input_dim()];
        let mut dh_prev = vec![0.0; n];
        let das = [&da_i, &da_f, &da_o, &da_g];
        for ((gate, g), da) in self.gates().into_iter().zip(grads.gates_mut()).zip(das) {
            gate.accumulate(da, &cache.x, &cache.h_prev, g, &mut dx, &mut dh_prev);
        }
        Ok((dx, dh_prev, dc_prev))
    }

    /// Backpropagation through time. `dh[t]` is the external gradient on the
    /// hidden state emitted at step `t`; returns the gradient on each input.
    pub fn backward(&self, trace: &LstmTrace, dh: &[Vec<f64>], grads: &mut LstmCell) -> Result<Vec<Vec<f64>>> {
        if trace.steps.is_empty() {
            return Err(Error::IncompleteTrace("LSTM trace has no recorded steps"));
        }
        if dh.len() != trace.steps.len() {
            return Err(Error::IncompleteTrace("one hidden-state gradient per recorded step required"));
        }
        let n = self.hidden_dim();
        let mut carry_h = vec![0.0; n];
        let mut carry_c = vec![0.0; n];
        let mut dxs = vec![Vec::new(); dh.len()];
        for t in (0..trace.steps.len()).rev() {
            let mut total = dh[t].clone();
            check_len("LstmCell::backward dh", n, total.len())?;
            axpy(&mut total, 1.0, &carry_h);
            let (dx, dhp, dcp) = self.backward_step(&trace.steps[t], &total, &carry_c, grads)?;
            dxs[t] = dx;
            carry_h = dhp;
            carry_c = dcp;
        }
        Ok(dxs)
    }
}

impl Params for LstmCell {
    fn blocks(&self) -> Vec<&[f64]> {
        self.gates()
            .into_iter()
            .flat_map(|g| [g.w_input.data(), g.w_hidden.data(), g.bias.as_slice()])
            .collect()
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        self.gates_mut()
            .into_iter()
            .flat_map(|g| [g.w_input.data_mut(), g.w_hidden.data_mut(), g.bias.as_mut_slice()])
            .collect()
    }

    fn block_names(&self) -> Vec<String> {
        ["input", "forget", "output", "candidate"]
            .iter()
            .flat_map(|g| [format!("{g}.w_input"), format!("{g}.w_hidden"), format!("{g}.bias")])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::gradcheck::finite_difference_check;
    use crate::numeric::matrix::dot;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar_step(cell: &LstmCell, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        // Independent element-by-element evaluation of the recurrence.
        let n = cell.hidden_dim();
        let pre = |gate: &Gate, k: usize| {
            let mut s = gate.bias[k];
            for j in 0..x.len() {
                s += gate.w_input.get(k, j) * x[j];
            }
            for j in 0..n {
                s += gate.w_hidden.get(k, j) * h[j];
            }
            s
        };
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let mut hn = vec![0.0; n];
        let mut cn = vec![0.0; n];
        for k in 0..n {
            let i = sig(pre(&cell.input_gate, k));
            let f = sig(pre(&cell.forget_gate, k));
            let o = sig(pre(&cell.output_gate, k));
            let g = pre(&cell.candidate, k).tanh();
            cn[k] = f * c[k] + i * g;
            hn[k] = o * cn[k].tanh();
        }
        (hn, cn)
    }

    #[test]
    fn zero_weights_halve_cell_state() {
        let cell = LstmCell::zeros(2, 3);
        let c = vec![1.0, -2.0, 0.4];
        let (h, cn) = cell.step(&[0.3, 0.1], &[0.5, 0.5, 0.5], &c).unwrap();
        for k in 0..3 {
            assert_eq!(cn[k], 0.5 * c[k]);
            assert!((h[k] - 0.5 * (0.5 * c[k]).tanh()).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_state_and_weights_give_zero_hidden() {
        let cell = LstmCell::zeros(4, 3);
        let (h, _) = cell.step(&[0.0; 4], &[0.0; 3], &[0.0; 3]).unwrap();
        assert_eq!(h, vec![0.0; 3]);
    }

    #[test]
    fn step_matches_scalar_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let mut cell = LstmCell::init(3, 4, &mut rng);
            for b in cell.blocks_mut() {
                for v in b.iter_mut() {
                    *v += rand::Rng::random_range(&mut rng, -0.5..0.5);
                }
            }
            let x: Vec<f64> = (0..3).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
            let h: Vec<f64> = (0..4).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
            let c: Vec<f64> = (0..4).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
            let (h1, c1) = cell.step(&x, &h, &c).unwrap();
            let (h2, c2) = scalar_step(&cell, &x, &h, &c);
            for k in 0..4 {
                assert!((h1[k] - h2[k]).abs() < 1e-10);
                assert!((c1[k] - c2[k]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let cell = LstmCell::zeros(2, 3);
        assert!(cell.step(&[0.0; 3], &[0.0; 3], &[0.0; 3]).is_err());
        assert!(cell.step(&[0.0; 2], &[0.0; 2], &[0.0; 3]).is_err());
    }

    #[test]
    fn empty_trace_is_rejected() {
        let cell = LstmCell::zeros(2, 3);
        let mut grads = cell.zeroed();
        assert!(matches!(
            cell.backward(&LstmTrace::default(), &[], &mut grads),
            Err(Error::IncompleteTrace(_))
        ));
        let trace = cell.run(&[vec![0.1, 0.2], vec![0.3, 0.4]]).unwrap();
        assert!(cell.backward(&trace, &[vec![0.0; 3]], &mut grads).is_err());
    }

    #[test]
    fn bptt_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let cell = LstmCell::init(3, 2, &mut rng);
            let inputs: Vec<Vec<f64>> = (0..4)
                .map(|_| (0..3).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect())
                .collect();
            let weights: Vec<Vec<f64>> = (0..4)
                .map(|_| (0..2).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect())
                .collect();
            let loss = |c: &LstmCell| {
                let tr = c.run(&inputs).unwrap();
                tr.hidden_states().zip(&weights).map(|(h, w)| dot(h, w)).sum::<f64>()
            };
            let trace = cell.run(&inputs).unwrap();
            let mut grads = cell.zeroed();
            cell.backward(&trace, &weights, &mut grads).unwrap();
            let report = finite_difference_check(loss, &cell, &grads, 1e-5, 1e-6).unwrap();
            assert!(report.passed, "{report:?}");
        }
    }
}
