use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::tensor::{axpy, Tensor};
use crate::{NnError, Params};

/// Fully connected network: tanh on hidden layers, linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    weights: Vec<Tensor>,
    biases: Vec<Tensor>,
}

#[derive(Debug, Clone)]
pub struct MlpCache {
    /// Input of each layer; `activations[0]` is the network input.
    activations: Vec<Vec<f64>>,
}

impl Mlp {
    /// `sizes = [input, hidden.., output]`. Weights uniform in ±1/√fan_in,
    /// biases zero.
    pub fn new(sizes: &[usize], rng: &mut impl Rng) -> Self {
        assert!(sizes.len() >= 2, "an mlp needs input and output sizes");
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in sizes.windows(2) {
            let bound = 1.0 / (w[0].max(1) as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound);
            let data = (0..w[0] * w[1]).map(|_| dist.sample(rng)).collect();
            weights.push(Tensor::from_vec(&[w[1], w[0]], data));
            biases.push(Tensor::zeros(&[w[1]]));
        }
        Mlp { weights, biases }
    }

    pub fn from_layers(weights: Vec<Tensor>, biases: Vec<Tensor>) -> Self {
        assert_eq!(weights.len(), biases.len());
        Mlp { weights, biases }
    }

    pub fn zeros_like(&self) -> Self {
        Mlp {
            weights: self.weights.iter().map(|w| Tensor::zeros(w.shape())).collect(),
            biases: self.biases.iter().map(|b| Tensor::zeros(b.shape())).collect(),
        }
    }

    /// Multiplies the last layer's weights by `s`; small values give a
    /// near-uniform initial policy.
    pub fn scale_output(&mut self, s: f64) {
        if let Some(w) = self.weights.last_mut() {
            w.data_mut().iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn input_size(&self) -> usize {
        self.weights[0].shape()[1]
    }

    pub fn output_size(&self) -> usize {
        self.weights.last().unwrap().shape()[0]
    }

    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    pub fn check_input(&self, x: &[f64]) -> Result<(), NnError> {
        if x.len() != self.input_size() {
            return Err(NnError::ShapeMismatch { what: "mlp input".into(), expected: vec![self.input_size()], got: vec![x.len()] });
        }
        Ok(())
    }

    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        self.forward(x).0
    }

    pub fn forward(&self, x: &[f64]) -> (Vec<f64>, MlpCache) {
        debug_assert_eq!(x.len(), self.input_size());
        let mut activations = vec![x.to_vec()];
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = b.data().to_vec();
            let input = activations.last().unwrap();
            for (r, zr) in z.iter_mut().enumerate() {
                *zr += crate::tensor::dot(w.row(r), input);
            }
            if l < last {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            activations.push(z);
        }
        let out = activations.pop().unwrap();
        (out, MlpCache { activations })
    }

    /// Accumulates parameter gradients into `grads` and returns the input gradient.
    pub fn backward(&self, cache: &MlpCache, dy: &[f64], grads: &mut Mlp) -> Vec<f64> {
        let mut delta = dy.to_vec();
        for l in (0..self.weights.len()).rev() {
            let input = &cache.activations[l];
            grads.weights[l].outer_acc(&delta, input);
            axpy(1.0, &delta, grads.biases[l].data_mut());
            let mut dx = vec![0.0; input.len()];
            self.weights[l].matvec_t_acc(&delta, &mut dx);
            if l > 0 {
                // input of layer l is tanh output of layer l-1
                for (d, a) in dx.iter_mut().zip(input) {
                    *d *= 1.0 - a * a;
                }
            }
            delta = dx;
        }
        delta
    }
}

impl Params for Mlp {
    fn tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            out.push((format!("w{l}"), w));
            out.push((format!("b{l}"), b));
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            out.push(w);
            out.push(b);
        }
        out
    }
}
