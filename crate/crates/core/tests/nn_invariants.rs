use beatstream::nn::{adam_step, softmax, AdamState, Graph, ParamStore};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn softmax_is_a_positive_distribution(z in prop::collection::vec(-50.0f64..50.0, 2..40)) {
        let p = softmax(&z);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn zero_learning_rate_is_the_identity(
        a in prop::collection::vec(-3.0f64..3.0, 1..20),
        g in prop::collection::vec(-3.0f64..3.0, 1..20),
        steps in 1usize..5,
    ) {
        let n = a.len().min(g.len());
        let mut params = ParamStore::new();
        params.insert("w", &[n], a[..n].to_vec()).unwrap();
        let before = params.clone();
        let mut state = AdamState::new(&params);
        for _ in 0..steps {
            adam_step(&mut params, &[g[..n].to_vec()], &mut state, 0.0).unwrap();
        }
        prop_assert_eq!(params.get("w").unwrap().data.clone(), before.get("w").unwrap().data.clone());
    }

    #[test]
    fn shared_subexpressions_sum_their_paths(x in prop::collection::vec(-4.0f64..4.0, 1..10)) {
        // loss = sum(x + x) + sum(x * x) + sum((x * x) * x): d/dx = 2 + 2x + 3x^2.
        let mut g = Graph::new();
        let v = g.leaf(x.clone(), &[x.len()], true).unwrap();
        let twice = g.add(v, v).unwrap();
        let sq = g.mul(v, v).unwrap();
        let cube = g.mul(sq, v).unwrap();
        let parts = [g.sum(twice), g.sum(sq), g.sum(cube)];
        let s01 = g.add(parts[0], parts[1]).unwrap();
        let loss = g.add(s01, parts[2]).unwrap();
        g.backward(loss).unwrap();
        let grad = g.grad(v).unwrap();
        for (gi, xi) in grad.iter().zip(&x) {
            let expected = 2.0 + 2.0 * xi + 3.0 * xi * xi;
            prop_assert!((gi - expected).abs() <= 1e-12 * (1.0 + expected.abs()));
        }
    }
}
