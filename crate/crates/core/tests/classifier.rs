mod common;

use common::*;
use hyperbilevel::classifier::{
    forward, hg_conv_operator, hg_conv_operator_with_self_loops, softmax_rows, train, Targets,
};
use hyperbilevel::{rng, HgnnParams, Hypergraph, TrainConfig};
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::Rng;

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration.
fn lambda_max(m: &Array2<f64>) -> f64 {
    let n = m.nrows();
    let mut v = Array1::from_iter((0..n).map(|i| 1.0 + 0.01 * i as f64));
    v /= v.dot(&v).sqrt();
    let mut lambda = 0.0;
    for _ in 0..2000 {
        let w = m.dot(&v);
        let nw = w.dot(&w).sqrt();
        if nw == 0.0 {
            return 0.0;
        }
        lambda = v.dot(&w);
        v = w / nw;
    }
    lambda
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn operator_is_symmetric_with_spectrum_in_unit_interval(seed in any::<u64>()) {
        let mut r = rng::from_seed(seed);
        let n = r.random_range(2..=25);
        let extra = r.random_range(0..20);
        let h = covered_hypergraph(&mut r, n, extra);
        let theta = hg_conv_operator(&h).unwrap();
        for a in 0..n {
            for b in 0..n {
                prop_assert!((theta[[a, b]] - theta[[b, a]]).abs() <= 1e-15);
            }
        }
        prop_assert!(lambda_max(&theta) <= 1.0 + 1e-9);
    }

    #[test]
    fn self_loop_operator_matches_strict_one_on_covered_graphs(h in arb_hypergraph(15, 20)) {
        let loops = hg_conv_operator_with_self_loops(&h);
        match hg_conv_operator(&h) {
            Ok(strict) => prop_assert_eq!(strict, loops),
            Err(_) => {
                let deg = h.degrees().vertex_degree;
                for (v, &d) in deg.iter().enumerate() {
                    if d == 0.0 {
                        prop_assert_eq!(loops[[v, v]], 1.0);
                    }
                }
            }
        }
    }
}

#[test]
fn analytic_gradients_match_finite_differences() {
    for seed in 0..20 {
        let inst = gradient_instance(seed);
        let err = inst.max_relative_error();
        assert!(err < 1e-4, "instance {seed}: relative error {err:e}");
    }
}

#[test]
fn softmax_rows_sum_to_one() {
    let mut r = rng::from_seed(3);
    let logits = Array2::from_shape_fn((50, 5), |_| r.random_range(-30.0..30.0));
    for row in softmax_rows(logits.view()).rows() {
        assert!((row.sum() - 1.0).abs() <= 1e-9);
    }
}

fn small_problem(seed: u64) -> (Array2<f64>, Array2<f64>, Vec<(usize, usize)>, Vec<(usize, usize)>) {
    let mut r = rng::from_seed(seed);
    let n = 20;
    let h = covered_hypergraph(&mut r, n, 10);
    let theta = hg_conv_operator(&h).unwrap();
    let x = Array2::from_shape_fn((n, 6), |_| r.random_range(-1.0..1.0));
    let labeled = (0..6).map(|v| (v, v % 3)).collect();
    let pseudo = (6..n).map(|v| (v, r.random_range(0..3))).collect();
    (theta, x, labeled, pseudo)
}

#[test]
fn small_steps_never_increase_the_loss() {
    for seed in 0..10 {
        let (theta, x, labeled, pseudo) = small_problem(seed);
        let targets = Targets {
            n_classes: 3,
            labeled: &labeled,
            pseudo: &pseudo,
            tau: 0.5,
        };
        let cfg = TrainConfig {
            lr: 1e-4,
            weight_decay: 0.0,
            epochs: 50,
            hidden: 8,
            seed,
        };
        let out = train(theta.view(), &x, &targets, &cfg, None).unwrap();
        for w in out.trace.windows(2) {
            assert!(w[1].loss.total <= w[0].loss.total + 1e-8, "seed {seed}: {:?}", w);
        }
    }
}

#[test]
fn training_is_bit_reproducible() {
    let (theta, x, labeled, pseudo) = small_problem(1);
    let targets = Targets {
        n_classes: 3,
        labeled: &labeled,
        pseudo: &pseudo,
        tau: 0.7,
    };
    let cfg = TrainConfig {
        epochs: 40,
        hidden: 8,
        seed: 9,
        ..TrainConfig::default()
    };
    let a = train(theta.view(), &x, &targets, &cfg, None).unwrap();
    let b = train(theta.view(), &x, &targets, &cfg, None).unwrap();
    assert_eq!(a, b);
    let c = train(theta.view(), &x, &targets, &TrainConfig { seed: 10, ..cfg }, None).unwrap();
    assert_ne!(a.params, c.params);
}

#[test]
fn training_fits_separable_labels() {
    // Two disjoint cliques with distinct feature means.
    let mut edges = Vec::new();
    for g in [0usize, 6] {
        for a in g..g + 6 {
            for b in a + 1..g + 6 {
                edges.push(vec![a, b]);
            }
        }
    }
    let h = Hypergraph::from_edge_lists(12, &edges).unwrap();
    let theta = hg_conv_operator(&h).unwrap();
    let x = Array2::from_shape_fn((12, 2), |(v, j)| if (v < 6) == (j == 0) { 1.0 } else { 0.0 });
    let labeled = vec![(0, 0), (6, 1)];
    let targets = Targets {
        n_classes: 2,
        labeled: &labeled,
        pseudo: &[],
        tau: 0.0,
    };
    let cfg = TrainConfig {
        epochs: 200,
        hidden: 4,
        ..TrainConfig::default()
    };
    let out = train(theta.view(), &x, &targets, &cfg, None).unwrap();
    let logits = forward(theta.view(), &x, &out.params).unwrap().logits;
    let pred = hyperbilevel::classifier::argmax_rows(logits.view());
    assert_eq!(pred, vec![0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1]);
}

#[test]
fn checkpoint_text_round_trip() {
    let p = HgnnParams::init(5, 3, 4, &mut rng::from_seed(2));
    let mut buf = Vec::new();
    p.write_text(&mut buf).unwrap();
    assert_eq!(HgnnParams::read_text(buf.as_slice()).unwrap(), p);
}
