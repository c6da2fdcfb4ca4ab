use metaplan_nn::gradcheck::trials::{lstm_trial, mlp_trial};
use metaplan_nn::policy::{log_prob_grad, masked_log_softmax, masked_softmax};
use metaplan_nn::{grad_check, Lstm, Mlp, Params};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn mlp_backward_matches_differences(seed in any::<u64>()) {
        let r = mlp_trial(seed, 1e-4);
        prop_assert!(r.passed(), "{:?}", r.worst);
    }

    #[test]
    fn lstm_backward_matches_differences(seed in any::<u64>()) {
        let r = lstm_trial(seed, 1e-4);
        prop_assert!(r.passed(), "{:?}", r.worst);
    }

    #[test]
    fn softmax_is_a_distribution(logits in prop::collection::vec(-20.0f64..20.0, 1..12), seed in any::<u64>()) {
        let mask: Vec<bool> = (0..logits.len()).map(|i| i == 0 || (seed >> (i % 64)) & 1 == 1).collect();
        let p = masked_softmax(&logits, &mask);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for (pi, m) in p.iter().zip(&mask) {
            let ok = if *m { *pi > 0.0 } else { *pi == 0.0 };
            prop_assert!(ok);
        }
    }
}

/// LSTM core followed by an MLP policy head, loss = -log π(a) summed over time.
#[test]
fn recurrent_policy_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let lstm = Lstm::new(4, 5, &mut rng);
    let head = Mlp::new(&[5, 6, 3], &mut rng);
    let xs = vec![vec![1.0, 0.0, -1.0, 0.5], vec![0.0, 1.0, 0.0, -0.5], vec![0.2, 0.2, 0.2, 0.2]];
    let actions = [2usize, 0, 1];
    let mask = [true, true, true];

    #[derive(Clone)]
    struct Net(Lstm, Mlp);
    impl Params for Net {
        fn tensors(&self) -> Vec<(String, &metaplan_nn::Tensor)> {
            let mut v = metaplan_nn::prefixed("core", self.0.tensors());
            v.extend(metaplan_nn::prefixed("head", self.1.tensors()));
            v
        }
        fn tensors_mut(&mut self) -> Vec<&mut metaplan_nn::Tensor> {
            let mut v = self.0.tensors_mut();
            v.extend(self.1.tensors_mut());
            v
        }
    }
    let loss = |n: &Net| {
        let f = n.0.forward(&xs, &n.0.initial_state());
        f.outputs.iter().zip(&actions).map(|(h, &a)| -masked_log_softmax(&n.1.predict(h), &mask)[a]).sum::<f64>()
    };
    let net = Net(lstm, head);
    let f = net.0.forward(&xs, &net.0.initial_state());
    let mut grads = Net(net.0.zeros_like(), net.1.zeros_like());
    let mut dh = Vec::new();
    for (h, &a) in f.outputs.iter().zip(&actions) {
        let (logits, cache) = net.1.forward(h);
        let p = masked_softmax(&logits, &mask);
        let dlogits: Vec<f64> = log_prob_grad(&p, a).iter().map(|g| -g).collect();
        dh.push(net.1.backward(&cache, &dlogits, &mut grads.1));
    }
    net.0.backward(&f.caches, &dh, None, &mut grads.0);
    let r = grad_check(&net, &grads, loss, 1e-4);
    assert!(r.passed(), "{:?}", r.worst);
}
