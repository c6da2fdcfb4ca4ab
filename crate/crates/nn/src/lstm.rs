use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::tensor::{axpy, Tensor};
use crate::{sigmoid, NnError, Params};

/// LSTM cell. `w` is `[4H, D+H]` acting on `[x; h]`, gate blocks in the order
/// input, forget, cell, output.
#[derive(Debug, Clone, PartialEq)]
pub struct Lstm {
    w: Tensor,
    b: Tensor,
    input: usize,
    hidden: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        LstmState { h: vec![0.0; hidden], c: vec![0.0; hidden] }
    }

    /// `[h; c]`, for storing in search-node contexts.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.h.clone();
        v.extend_from_slice(&self.c);
        v
    }

    pub fn from_flat(v: &[f64]) -> Self {
        let n = v.len() / 2;
        LstmState { h: v[..n].to_vec(), c: v[n..].to_vec() }
    }
}

#[derive(Debug, Clone)]
pub struct LstmStepCache {
    xh: Vec<f64>,
    c_prev: Vec<f64>,
    /// Activated gates `[i; f; g; o]`.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

pub struct LstmForward {
    pub outputs: Vec<Vec<f64>>,
    pub last: LstmState,
    pub caches: Vec<LstmStepCache>,
}

impl Lstm {
    /// Input weights uniform in ±1/√D, recurrent blocks orthogonal, biases
    /// zero except the forget gate at +1.
    pub fn new(input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let cols = input + hidden;
        let mut w = Tensor::zeros(&[4 * hidden, cols]);
        let bound = 1.0 / (input.max(1) as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound);
        for r in 0..4 * hidden {
            for v in &mut w.row_mut(r)[..input] {
                *v = dist.sample(rng);
            }
        }
        for gate in 0..4 {
            let q = orthogonal(hidden, rng);
            for r in 0..hidden {
                w.row_mut(gate * hidden + r)[input..].copy_from_slice(&q[r * hidden..(r + 1) * hidden]);
            }
        }
        let mut b = Tensor::zeros(&[4 * hidden]);
        b.data_mut()[hidden..2 * hidden].fill(1.0);
        Lstm { w, b, input, hidden }
    }

    pub fn from_parts(w: Tensor, b: Tensor, input: usize, hidden: usize) -> Self {
        assert_eq!(w.shape(), &[4 * hidden, input + hidden]);
        assert_eq!(b.shape(), &[4 * hidden]);
        Lstm { w, b, input, hidden }
    }

    pub fn zeros_like(&self) -> Self {
        Lstm { w: Tensor::zeros(self.w.shape()), b: Tensor::zeros(self.b.shape()), input: self.input, hidden: self.hidden }
    }

    pub fn input_size(&self) -> usize {
        self.input
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden
    }

    pub fn initial_state(&self) -> LstmState {
        LstmState::zeros(self.hidden)
    }

    pub fn check_input(&self, x: &[f64]) -> Result<(), NnError> {
        if x.len() != self.input {
            return Err(NnError::ShapeMismatch { what: "lstm input".into(), expected: vec![self.input], got: vec![x.len()] });
        }
        Ok(())
    }

    pub fn step(&self, x: &[f64], prev: &LstmState) -> (LstmState, LstmStepCache) {
        debug_assert_eq!(x.len(), self.input);
        let h = self.hidden;
        let mut xh = Vec::with_capacity(self.input + h);
        xh.extend_from_slice(x);
        xh.extend_from_slice(&prev.h);
        let mut gates = self.b.data().to_vec();
        for (r, z) in gates.iter_mut().enumerate() {
            *z += crate::tensor::dot(self.w.row(r), &xh);
        }
        for (k, z) in gates.iter_mut().enumerate() {
            *z = if (2 * h..3 * h).contains(&k) { z.tanh() } else { sigmoid(*z) };
        }
        let mut c = vec![0.0; h];
        let mut tanh_c = vec![0.0; h];
        let mut hn = vec![0.0; h];
        for j in 0..h {
            let (i, f, g, o) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
            c[j] = f * prev.c[j] + i * g;
            tanh_c[j] = c[j].tanh();
            hn[j] = o * tanh_c[j];
        }
        let cache = LstmStepCache { xh, c_prev: prev.c.clone(), gates, tanh_c };
        (LstmState { h: hn, c }, cache)
    }

    /// Backward through one step given gradients on the new `h` and `c`.
    /// Returns `(dx, dh_prev, dc_prev)`.
    pub fn step_backward(&self, cache: &LstmStepCache, dh: &[f64], dc: &[f64], grads: &mut Lstm) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let h = self.hidden;
        let g = &cache.gates;
        let mut dz = vec![0.0; 4 * h];
        let mut dc_prev = vec![0.0; h];
        for j in 0..h {
            let (i, f, gg, o) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
            let tc = cache.tanh_c[j];
            let dct = dc[j] + dh[j] * o * (1.0 - tc * tc);
            dz[j] = dct * gg * i * (1.0 - i);
            dz[h + j] = dct * cache.c_prev[j] * f * (1.0 - f);
            dz[2 * h + j] = dct * i * (1.0 - gg * gg);
            dz[3 * h + j] = dh[j] * tc * o * (1.0 - o);
            dc_prev[j] = dct * f;
        }
        grads.w.outer_acc(&dz, &cache.xh);
        axpy(1.0, &dz, grads.b.data_mut());
        let mut dxh = vec![0.0; self.input + h];
        self.w.matvec_t_acc(&dz, &mut dxh);
        let dh_prev = dxh.split_off(self.input);
        (dxh, dh_prev, dc_prev)
    }

    pub fn forward(&self, inputs: &[Vec<f64>], start: &LstmState) -> LstmForward {
        let mut state = start.clone();
        let mut outputs = Vec::with_capacity(inputs.len());
        let mut caches = Vec::with_capacity(inputs.len());
        for x in inputs {
            let (next, cache) = self.step(x, &state);
            outputs.push(next.h.clone());
            caches.push(cache);
            state = next;
        }
        LstmForward { outputs, last: state, caches }
    }

    /// Backpropagation through time. `output_grads[t]` is the loss gradient on
    /// the output at step `t`; `final_grad` optionally adds gradients on the
    /// final `(h, c)`. Returns input gradients and the gradient on the start state.
    pub fn backward(
        &self,
        caches: &[LstmStepCache],
        output_grads: &[Vec<f64>],
        final_grad: Option<&LstmState>,
        grads: &mut Lstm,
    ) -> (Vec<Vec<f64>>, LstmState) {
        let h = self.hidden;
        let (mut dh, mut dc) = match final_grad {
            Some(s) => (s.h.clone(), s.c.clone()),
            None => (vec![0.0; h], vec![0.0; h]),
        };
        let mut input_grads = vec![Vec::new(); caches.len()];
        for t in (0..caches.len()).rev() {
            axpy(1.0, &output_grads[t], &mut dh);
            let (dx, dh_prev, dc_prev) = self.step_backward(&caches[t], &dh, &dc, grads);
            input_grads[t] = dx;
            dh = dh_prev;
            dc = dc_prev;
        }
        (input_grads, LstmState { h: dh, c: dc })
    }
}

impl Params for Lstm {
    fn tensors(&self) -> Vec<(String, &Tensor)> {
        vec![("w".into(), &self.w), ("b".into(), &self.b)]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.w, &mut self.b]
    }
}

/// Row-major `n x n` orthogonal matrix from Gram-Schmidt on a Gaussian draw.
fn orthogonal(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    while rows.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        for r in &rows {
            let p = crate::tensor::dot(r, &v);
            axpy(-p, r, &mut v);
        }
        let norm = crate::tensor::dot(&v, &v).sqrt();
        if norm > 1e-6 {
            v.iter_mut().for_each(|x| *x /= norm);
            rows.push(v);
        }
    }
    rows.concat()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_weights_give_zero_outputs() {
        let l = Lstm::from_parts(Tensor::zeros(&[16, 7]), Tensor::zeros(&[16]), 3, 4);
        let f = l.forward(&[vec![1.0, -2.0, 0.5], vec![3.0, 3.0, 3.0]], &l.initial_state());
        assert!(f.outputs.iter().flatten().all(|&v| v == 0.0));
        assert!(f.last.c.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_step_sequence_matches_step() {
        let l = Lstm::new(3, 4, &mut ChaCha8Rng::seed_from_u64(3));
        let x = vec![0.1, 0.2, -0.3];
        let f = l.forward(std::slice::from_ref(&x), &l.initial_state());
        let (s, _) = l.step(&x, &l.initial_state());
        assert_eq!(f.last, s);
        assert_eq!(f.outputs[0], s.h);
    }

    #[test]
    fn recurrent_blocks_are_orthogonal_and_forget_bias_is_one() {
        let l = Lstm::new(2, 5, &mut ChaCha8Rng::seed_from_u64(4));
        for gate in 0..4 {
            for a in 0..5 {
                for b in 0..5 {
                    let ra = &l.w.row(gate * 5 + a)[2..];
                    let rb = &l.w.row(gate * 5 + b)[2..];
                    let expect = if a == b { 1.0 } else { 0.0 };
                    assert!((crate::tensor::dot(ra, rb) - expect).abs() < 1e-12);
                }
            }
        }
        assert_eq!(&l.b.data()[5..10], &[1.0; 5]);
        assert!(l.b.data()[..5].iter().chain(&l.b.data()[10..]).all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_at_step_t_ignores_later_inputs() {
        let l = Lstm::new(2, 3, &mut ChaCha8Rng::seed_from_u64(5));
        let xs = vec![vec![0.5, -0.5], vec![1.0, 0.0], vec![-1.0, 2.0]];
        let mut other = xs.clone();
        other[2] = vec![9.0, -9.0];
        let grads_for = |inputs: &Vec<Vec<f64>>| {
            let f = l.forward(inputs, &l.initial_state());
            let mut g = l.zeros_like();
            let dy = vec![vec![1.0, 1.0, 1.0], vec![0.0; 3], vec![0.0; 3]];
            l.backward(&f.caches, &dy, None, &mut g);
            g
        };
        assert_eq!(grads_for(&xs), grads_for(&other));
    }
}
