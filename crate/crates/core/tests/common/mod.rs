#![allow(dead_code)]

use hyperbilevel::bilevel::LabeledGraph;
use hyperbilevel::construction::build_hypergraph;
use hyperbilevel::data::{generate, stack_features, SyntheticSpec};
use hyperbilevel::{Hyperedge, Hypergraph, LabelState};
use ndarray::Array1;
use proptest::prelude::*;
use rand::seq::index::sample;
use rand::Rng;

/// Random hypergraph with `2..=max_n` vertices and `1..=max_m` edges of size
/// 2 to 6 with weights in `[0.1, 3)`.
pub fn arb_hypergraph(max_n: usize, max_m: usize) -> impl Strategy<Value = Hypergraph> {
    (2..=max_n).prop_flat_map(move |n| {
        let edge = (
            proptest::sample::subsequence((0..n).collect::<Vec<_>>(), 2..=n.min(6)),
            0.1f64..3.0,
        );
        proptest::collection::vec(edge, 1..=max_m).prop_map(move |edges| {
            let edges = edges
                .into_iter()
                .map(|(vs, w)| Hyperedge::from_vertices(&vs, w, 0).unwrap())
                .collect();
            Hypergraph::new(n, edges).unwrap()
        })
    })
}

/// Vertex signal of length `n` with entries in `[-1, 1]`.
pub fn arb_signal(n: usize) -> impl Strategy<Value = Array1<f64>> {
    proptest::collection::vec(-1.0f64..1.0, n).prop_map(Array1::from)
}

/// Hypergraph with signals drawn on the same vertex set.
pub fn arb_graph_with_signals(
    max_n: usize,
    max_m: usize,
    k: usize,
) -> impl Strategy<Value = (Hypergraph, Vec<Array1<f64>>)> {
    arb_hypergraph(max_n, max_m).prop_flat_map(move |h| {
        let n = h.n_vertices();
        (Just(h), proptest::collection::vec(arb_signal(n), k))
    })
}

/// Same distribution as [`arb_hypergraph`], drawn from a plain RNG.
pub fn random_hypergraph<R: Rng>(rng: &mut R, max_n: usize, max_m: usize) -> Hypergraph {
    let n = rng.random_range(2..=max_n);
    let m = rng.random_range(1..=max_m);
    let edges = (0..m)
        .map(|_| {
            let size = rng.random_range(2..=n.min(6));
            let vs = sample(rng, n, size).into_vec();
            Hyperedge::from_vertices(&vs, rng.random_range(0.1..3.0), 0).unwrap()
        })
        .collect();
    Hypergraph::new(n, edges).unwrap()
}

/// Random hypergraph on `n` vertices where every vertex has at least one edge.
pub fn covered_hypergraph<R: Rng>(rng: &mut R, n: usize, extra: usize) -> Hypergraph {
    let mut edges = Vec::new();
    for v in 0..n {
        let mut other = rng.random_range(0..n - 1);
        if other >= v {
            other += 1;
        }
        edges.push(Hyperedge::from_vertices(&[v, other], 1.0, 0).unwrap());
    }
    for _ in 0..extra {
        let size = rng.random_range(2..=n.min(6));
        let vs = sample(rng, n, size).into_vec();
        edges.push(Hyperedge::from_vertices(&vs, rng.random_range(0.5..2.0), 0).unwrap());
    }
    Hypergraph::new(n, edges).unwrap()
}

pub fn random_signal<R: Rng>(rng: &mut R, n: usize) -> Array1<f64> {
    Array1::from_iter((0..n).map(|_| rng.random_range(-1.0..1.0)))
}

/// Labels with every class present: the first `n_classes` vertices of a
/// random permutation get one class each, then a few more at random.
pub fn random_labels<R: Rng>(rng: &mut R, n: usize, n_classes: usize, extra: usize) -> LabelState {
    let picked = sample(rng, n, (n_classes + extra).min(n)).into_vec();
    let pairs = picked
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            (
                v,
                if i < n_classes {
                    i
                } else {
                    rng.random_range(0..n_classes)
                },
            )
        })
        .collect();
    LabelState::new(n, n_classes, pairs).unwrap()
}

/// Per-edge `max - min` times weight, by explicit loops over members.
pub fn brute_tv(h: &Hypergraph, u: &Array1<f64>) -> f64 {
    let mut total = 0.0;
    for e in h.edges() {
        let mut hi = f64::NEG_INFINITY;
        let mut lo = f64::INFINITY;
        for v in e.vertices() {
            hi = hi.max(u[v]);
            lo = lo.min(u[v]);
        }
        total += e.weight * (hi - lo);
    }
    total
}

/// A small synthetic cohort: `n` subjects, four modalities with `k`-NN blocks.
pub fn small_graph(seed: u64, n: usize, k: usize) -> LabeledGraph {
    let mut spec = SyntheticSpec::moderate(seed);
    spec.n_subjects = n;
    for m in &mut spec.modalities {
        m.k = k;
    }
    labeled_graph(&spec)
}

pub fn labeled_graph(spec: &SyntheticSpec) -> LabeledGraph {
    let (mods, truth) = generate(spec).unwrap();
    let settings: Vec<_> = spec.modalities.iter().map(|m| (m.k, None)).collect();
    let hypergraph = build_hypergraph(&mods, &settings).unwrap();
    let features = stack_features(&mods).unwrap();
    LabeledGraph {
        hypergraph,
        features,
        truth,
        n_classes: spec.n_classes,
    }
}

/// One random gradient-check instance: a covered hypergraph on `n <= 20`
/// vertices, `d <= 8` features, random weights and biases, and both loss
/// terms active. Redrawn until no hidden pre-activation sits within `1e-3` of
/// the ReLU kink, where central differences are not a valid oracle.
pub fn gradient_instance(seed: u64) -> GradientInstance {
    use hyperbilevel::classifier::{forward, hg_conv_operator};
    use hyperbilevel::HgnnParams;

    let mut r = hyperbilevel::rng::stream(seed, "gradient-check", 0);
    loop {
        let n = r.random_range(6..=20);
        let d = r.random_range(2..=8);
        let hidden = r.random_range(2..=6);
        let classes = r.random_range(2..=4);
        let h = covered_hypergraph(&mut r, n, n / 2);
        let theta = hg_conv_operator(&h).unwrap();
        let x = ndarray::Array2::from_shape_fn((n, d), |_| r.random_range(-1.0..1.0));
        let mut p = HgnnParams::init(d, hidden, classes, &mut r);
        p.b1.mapv_inplace(|_| r.random_range(-0.5..0.5));
        p.b2.mapv_inplace(|_| r.random_range(-0.5..0.5));
        let z1 = forward(theta.view(), &x, &p).unwrap().z1;
        if z1.iter().any(|z| z.abs() < 1e-3) {
            continue;
        }
        let rows = sample(&mut r, n, n / 2 + 1).into_vec();
        let split = rows.len() / 2;
        let labeled = rows[..split.max(1)]
            .iter()
            .map(|&v| (v, r.random_range(0..classes)))
            .collect();
        let pseudo = rows[split.max(1)..]
            .iter()
            .map(|&v| (v, r.random_range(0..classes)))
            .collect();
        return GradientInstance {
            theta,
            x,
            params: p,
            labeled,
            pseudo,
            tau: r.random_range(0.0..=1.0),
        };
    }
}

pub struct GradientInstance {
    pub theta: ndarray::Array2<f64>,
    pub x: ndarray::Array2<f64>,
    pub params: hyperbilevel::HgnnParams,
    pub labeled: Vec<(usize, usize)>,
    pub pseudo: Vec<(usize, usize)>,
    pub tau: f64,
}

impl GradientInstance {
    pub fn loss_at(&self, p: &hyperbilevel::HgnnParams) -> f64 {
        use hyperbilevel::classifier::{forward, loss};
        let f = forward(self.theta.view(), &self.x, p).unwrap();
        loss(f.logits.view(), &self.labeled, &self.pseudo, self.tau)
            .unwrap()
            .0
            .total
    }

    /// Largest per-entry relative error between the analytic gradient and
    /// central differences with step `1e-5`. The denominator is floored at
    /// `1e-8` so entries that are zero on both sides compare as equal.
    pub fn max_relative_error(&self) -> f64 {
        use hyperbilevel::classifier::{backward, forward, loss};
        let f = forward(self.theta.view(), &self.x, &self.params).unwrap();
        let (_, g) = loss(f.logits.view(), &self.labeled, &self.pseudo, self.tau).unwrap();
        let grads = backward(self.theta.view(), &self.theta.dot(&self.x), &f, &self.params, &g);
        let eps = 1e-5;
        let mut worst: f64 = 0.0;
        let mut check = |analytic: f64, bump: &dyn Fn(&mut hyperbilevel::HgnnParams, f64)| {
            let mut plus = self.params.clone();
            bump(&mut plus, eps);
            let mut minus = self.params.clone();
            bump(&mut minus, -eps);
            let numeric = (self.loss_at(&plus) - self.loss_at(&minus)) / (2.0 * eps);
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max(rel);
        };
        for (idx, &a) in grads.w1.indexed_iter() {
            check(a, &|p, e| p.w1[idx] += e);
        }
        for (i, &a) in grads.b1.iter().enumerate() {
            check(a, &|p, e| p.b1[i] += e);
        }
        for (idx, &a) in grads.w2.indexed_iter() {
            check(a, &|p, e| p.w2[idx] += e);
        }
        for (i, &a) in grads.b2.iter().enumerate() {
            check(a, &|p, e| p.b2[i] += e);
        }
        worst
    }
}
