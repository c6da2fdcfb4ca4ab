use crate::tensor::Tensor;
use crate::{NnError, Params};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 3e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam with bias correction. Moment tensors mirror the parameter tensors.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    step: u64,
}

impl Adam {
    pub fn new<P: Params>(params: &P, config: AdamConfig) -> Self {
        let zeros: Vec<Tensor> = params.tensors().iter().map(|(_, t)| Tensor::zeros(t.shape())).collect();
        Adam { config, m: zeros.clone(), v: zeros, step: 0 }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one update. Non-finite gradients leave everything untouched.
    pub fn step<P: Params>(&mut self, params: &mut P, grads: &P) -> Result<(), NnError> {
        let g = grads.tensors();
        if g.len() != self.m.len() {
            return Err(NnError::ShapeMismatch { what: "adam tensor count".into(), expected: vec![self.m.len()], got: vec![g.len()] });
        }
        for ((name, t), m) in g.iter().zip(&self.m) {
            if t.shape() != m.shape() {
                return Err(NnError::ShapeMismatch { what: name.clone(), expected: m.shape().to_vec(), got: t.shape().to_vec() });
            }
            if !t.data().iter().all(|x| x.is_finite()) {
                return Err(NnError::NonFiniteGradient(name.clone()));
            }
        }
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for (((p, (_, g)), m), v) in params.tensors_mut().into_iter().zip(&g).zip(&mut self.m).zip(&mut self.v) {
            for (((pi, &gi), mi), vi) in p.data_mut().iter_mut().zip(g.data()).zip(m.data_mut()).zip(v.data_mut()) {
                *mi = beta1 * *mi + (1.0 - beta1) * gi;
                *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                let mhat = *mi / bc1;
                let vhat = *vi / bc2;
                *pi -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Scales `grads` so their joint L2 norm is at most `max_norm`. Returns the
/// norm before clipping.
pub fn clip_global_norm<P: Params>(grads: &mut P, max_norm: f64) -> f64 {
    let norm = grads.tensors().iter().flat_map(|(_, t)| t.data().iter()).map(|v| v * v).sum::<f64>().sqrt();
    if norm > max_norm && norm.is_finite() {
        let s = max_norm / norm;
        for t in grads.tensors_mut() {
            t.data_mut().iter_mut().for_each(|v| *v *= s);
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    struct One(Tensor);
    impl Params for One {
        fn tensors(&self) -> Vec<(String, &Tensor)> {
            vec![("x".into(), &self.0)]
        }
        fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
            vec![&mut self.0]
        }
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = One(Tensor::from_vec(&[2], vec![1.0, -1.0]));
        let mut opt = Adam::new(&p, AdamConfig::default());
        opt.step(&mut p, &One(Tensor::zeros(&[2]))).unwrap();
        assert_eq!(p.0.data(), &[1.0, -1.0]);
        assert_eq!(opt.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        // m̂ = g, v̂ = g², so Δ = -lr·g/(|g|+eps)
        let mut p = One(Tensor::from_vec(&[3], vec![0.0, 0.0, 0.0]));
        let mut opt = Adam::new(&p, AdamConfig { lr: 0.1, ..AdamConfig::default() });
        opt.step(&mut p, &One(Tensor::from_vec(&[3], vec![2.0, -0.5, 1e-3]))).unwrap();
        let expect = [-0.1 * 2.0 / (2.0 + 1e-8), 0.1 * 0.5 / (0.5 + 1e-8), -0.1 * 1e-3 / (1e-3 + 1e-8)];
        for (a, b) in p.0.data().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut p = One(Tensor::zeros(&[1]));
        let mut opt = Adam::new(&p, AdamConfig::default());
        let err = opt.step(&mut p, &One(Tensor::from_vec(&[1], vec![f64::NAN])));
        assert!(matches!(err, Err(NnError::NonFiniteGradient(_))));
        assert_eq!(opt.step_count(), 0);
    }

    #[test]
    fn clipping_preserves_direction() {
        let mut g = One(Tensor::from_vec(&[2], vec![3.0, 4.0]));
        assert_eq!(clip_global_norm(&mut g, 0.5), 5.0);
        assert!((g.0.data()[0] - 0.3).abs() < 1e-15 && (g.0.data()[1] - 0.4).abs() < 1e-15);
    }
}
