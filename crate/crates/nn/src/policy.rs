//! Masked categorical distributions over logits.

/// Softmax over entries with `mask[i] == true`; masked entries get exactly 0.
/// An all-false mask yields all zeros.
pub fn masked_softmax(logits: &[f64], mask: &[bool]) -> Vec<f64> {
    debug_assert_eq!(logits.len(), mask.len());
    let max = logits.iter().zip(mask).filter(|(_, &m)| m).map(|(&l, _)| l).fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return vec![0.0; logits.len()];
    }
    let mut p: Vec<f64> = logits.iter().zip(mask).map(|(&l, &m)| if m { (l - max).exp() } else { 0.0 }).collect();
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= z);
    p
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    masked_softmax(logits, &vec![true; logits.len()])
}

/// Log-probabilities under the masked softmax; masked entries are `-inf`.
pub fn masked_log_softmax(logits: &[f64], mask: &[bool]) -> Vec<f64> {
    let max = logits.iter().zip(mask).filter(|(_, &m)| m).map(|(&l, _)| l).fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().zip(mask).filter(|(_, &m)| m).map(|(&l, _)| (l - max).exp()).sum::<f64>().ln();
    logits.iter().zip(mask).map(|(&l, &m)| if m { l - lse } else { f64::NEG_INFINITY }).collect()
}

/// Shannon entropy in nats; zero-probability entries contribute nothing.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

/// `KL(p ‖ q)` in nats. Infinite when `q` is zero where `p` is not.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| if qi > 0.0 { pi * (pi / qi).ln() } else { f64::INFINITY })
        .sum()
}

/// Gradient of `log p[a]` with respect to the logits: `onehot(a) - p`.
pub fn log_prob_grad(p: &[f64], a: usize) -> Vec<f64> {
    let mut g: Vec<f64> = p.iter().map(|&x| -x).collect();
    g[a] += 1.0;
    g
}

/// Gradient of the entropy with respect to the logits: `-p_j (ln p_j + H)`.
pub fn entropy_grad(p: &[f64]) -> Vec<f64> {
    let h = entropy(p);
    p.iter().map(|&x| if x > 0.0 { -x * (x.ln() + h) } else { 0.0 }).collect()
}

pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}
