use crate::Params;

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;
/// Denominator floor of the relative error, so that entries where both
/// gradients vanish compare absolutely.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckEntry {
    pub tensor: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, Default)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    pub worst: Option<GradCheckEntry>,
    /// Entries above the tolerance.
    pub failures: Vec<GradCheckEntry>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

pub fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(REL_ERROR_FLOOR)
}

/// Compares `analytic` (the gradient of `loss` at `params`) with central
/// finite differences, one scalar at a time.
pub fn grad_check<P: Params + Clone>(params: &P, analytic: &P, loss: impl Fn(&P) -> f64, tolerance: f64) -> GradCheckReport {
    let base = params.flat();
    let grads = analytic.flat();
    assert_eq!(base.len(), grads.len(), "gradient layout");
    let names: Vec<(String, usize)> = params.tensors().iter().flat_map(|(n, t)| (0..t.len()).map(move |i| (n.clone(), i))).collect();
    let mut probe = params.clone();
    let mut values = base.clone();
    let mut report = GradCheckReport::default();
    for k in 0..base.len() {
        values[k] = base[k] + FD_STEP;
        probe.set_flat(&values);
        let up = loss(&probe);
        values[k] = base[k] - FD_STEP;
        probe.set_flat(&values);
        let down = loss(&probe);
        values[k] = base[k];
        let numeric = (up - down) / (2.0 * FD_STEP);
        let rel = relative_error(grads[k], numeric);
        let entry = GradCheckEntry { tensor: names[k].0.clone(), index: names[k].1, analytic: grads[k], numeric, rel_error: rel };
        report.checked += 1;
        if rel > report.max_rel_error || report.worst.is_none() {
            report.max_rel_error = report.max_rel_error.max(rel);
            report.worst = Some(entry.clone());
        }
        if rel >= tolerance || !rel.is_finite() {
            report.failures.push(entry);
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{Mlp, Tensor};

    #[test]
    fn empty_model_gives_empty_report() {
        let m = Mlp::from_layers(vec![], vec![]);
        let r = grad_check(&m, &m, |_| 0.0, 1e-4);
        assert_eq!(r.checked, 0);
        assert!(r.passed());
    }

    #[test]
    fn quadratic_is_exact_and_corruption_is_caught() {
        let m = Mlp::from_layers(vec![Tensor::from_vec(&[1, 2], vec![0.3, -0.7])], vec![Tensor::zeros(&[1])]);
        let loss = |p: &Mlp| p.flat().iter().map(|v| v * v).sum::<f64>();
        let mut g = m.clone();
        g.set_flat(&m.flat().iter().map(|v| 2.0 * v).collect::<Vec<_>>());
        assert!(grad_check(&m, &g, loss, 1e-4).passed());
        let mut bad = g.flat();
        bad[0] *= 1.01;
        g.set_flat(&bad);
        let r = grad_check(&m, &g, loss, 1e-4);
        assert_eq!(r.failures.len(), 1);
        assert_eq!(r.failures[0].tensor, "w0");
    }
}

/// Self-checks on randomly sized networks, used by the test suites.
pub mod trials {
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, Uniform};

    use super::{grad_check, GradCheckReport};
    use crate::{Lstm, LstmState, Mlp};

    fn rng(seed: u64) -> rand::rngs::StdRng {
        rand::rngs::StdRng::seed_from_u64(seed)
    }

    fn vector(n: usize, r: &mut impl Rng) -> Vec<f64> {
        let d = Uniform::new_inclusive(-1.0, 1.0);
        (0..n).map(|_| d.sample(r)).collect()
    }

    /// Loss `Σ w·y + ½|y|²` over all outputs, and its gradient.
    fn loss_and_grad(ys: &[Vec<f64>], ws: &[Vec<f64>]) -> (f64, Vec<Vec<f64>>) {
        let mut loss = 0.0;
        let mut grads = Vec::with_capacity(ys.len());
        for (y, w) in ys.iter().zip(ws) {
            loss += y.iter().zip(w).map(|(a, b)| a * b + 0.5 * a * a).sum::<f64>();
            grads.push(y.iter().zip(w).map(|(a, b)| a + b).collect());
        }
        (loss, grads)
    }

    /// MLP with 1 to 3 layers and widths up to 6.
    pub fn mlp_trial(seed: u64, tolerance: f64) -> GradCheckReport {
        let mut r = rng(seed);
        let layers = r.gen_range(1..=3);
        let sizes: Vec<usize> = (0..=layers).map(|_| r.gen_range(1..=6)).collect();
        let mlp = Mlp::new(&sizes, &mut r);
        let x = vector(sizes[0], &mut r);
        let w = vec![vector(*sizes.last().unwrap(), &mut r)];
        let (y, cache) = mlp.forward(&x);
        let (_, dy) = loss_and_grad(&[y], &w);
        let mut g = mlp.zeros_like();
        mlp.backward(&cache, &dy[0], &mut g);
        grad_check(&mlp, &g, |p| loss_and_grad(&[p.predict(&x)], &w).0, tolerance)
    }

    /// LSTM with `D ≤ 5`, `H ≤ 6`, `T ≤ 7` and a random start state.
    pub fn lstm_trial(seed: u64, tolerance: f64) -> GradCheckReport {
        let mut r = rng(seed);
        let (d, h, t) = (r.gen_range(1..=5), r.gen_range(1..=6), r.gen_range(1..=7));
        let lstm = Lstm::new(d, h, &mut r);
        let xs: Vec<Vec<f64>> = (0..t).map(|_| vector(d, &mut r)).collect();
        let start = LstmState { h: vector(h, &mut r), c: vector(h, &mut r) };
        let ws: Vec<Vec<f64>> = (0..t).map(|_| vector(h, &mut r)).collect();
        let f = lstm.forward(&xs, &start);
        let (_, dy) = loss_and_grad(&f.outputs, &ws);
        let mut g = lstm.zeros_like();
        lstm.backward(&f.caches, &dy, None, &mut g);
        grad_check(&lstm, &g, |p| loss_and_grad(&p.forward(&xs, &start).outputs, &ws).0, tolerance)
    }
}
