//! Hypergraph augmentation actions and their composition under a policy.
//!
//! | action | effect |
//! |--------|--------|
//! | A0 | remove a fraction of (unlabeled) vertices |
//! | A1 | remove a fraction of hyperedges, never isolating a vertex |
//! | A2 | remove the vertices and hyperedges traced by a random walk |
//! | A3 | add gaussian noise to the features of a fraction of vertices |
//!
//! Policies apply the enabled actions in the fixed order A2, A0, A1, A3.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, Axis};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypergraph::{validate, Hypergraph};
use crate::FeatureMatrix;

/// Upper bound on every removal/perturbation ratio.
pub const MAX_RATIO: f64 = 0.5;

/// How many times hyperedge removal resamples before repairing.
const EDGE_RESAMPLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Action {
    /// Node removal.
    A0,
    /// Hyperedge removal.
    A1,
    /// Random-walk subgraph removal.
    A2,
    /// Feature perturbation.
    A3,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::A0, Action::A1, Action::A2, Action::A3];
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Action::A0 => "A0",
            Action::A1 => "A1",
            Action::A2 => "A2",
            Action::A3 => "A3",
        };
        f.write_str(s)
    }
}

impl FromStr for Action {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A0" => Ok(Action::A0),
            "A1" => Ok(Action::A1),
            "A2" => Ok(Action::A2),
            "A3" => Ok(Action::A3),
            other => Err(Error::Config(format!("unknown action {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentationPolicy {
    pub node_removal_ratio: f64,
    pub hyperedge_removal_ratio: f64,
    pub subgraph_removal_ratio: f64,
    pub walk_length: usize,
    pub feature_perturb_ratio: f64,
    /// Noise scale relative to each feature column's standard deviation.
    pub delta: f64,
    pub enabled: BTreeSet<Action>,
}

impl AugmentationPolicy {
    /// All actions enabled, all intensities zero: the identity augmentation.
    pub fn zero() -> Self {
        AugmentationPolicy {
            node_removal_ratio: 0.0,
            hyperedge_removal_ratio: 0.0,
            subgraph_removal_ratio: 0.0,
            walk_length: 1,
            feature_perturb_ratio: 0.0,
            delta: 0.0,
            enabled: Action::ALL.into_iter().collect(),
        }
    }

    pub fn is_enabled(&self, action: Action) -> bool {
        self.enabled.contains(&action)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, r) in [
            ("node_removal_ratio", self.node_removal_ratio),
            ("hyperedge_removal_ratio", self.hyperedge_removal_ratio),
            ("subgraph_removal_ratio", self.subgraph_removal_ratio),
            ("feature_perturb_ratio", self.feature_perturb_ratio),
        ] {
            if !(0.0..=MAX_RATIO).contains(&r) {
                return Err(Error::InvalidPolicy(format!("{name} = {r} outside [0, {MAX_RATIO}]")));
            }
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(Error::InvalidPolicy(format!("delta = {} must be >= 0", self.delta)));
        }
        if self.walk_length == 0 {
            return Err(Error::InvalidPolicy("walk_length must be >= 1".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("policy always serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let p: AugmentationPolicy = toml::from_str(text).map_err(|e| Error::Config(format!("policy: {e}")))?;
        p.validate()?;
        Ok(p)
    }
}

/// `A_theta(X)`: the augmented hypergraph and features.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedView {
    pub hypergraph: Hypergraph,
    pub features: FeatureMatrix,
    /// `kept_vertices[i]` is the original index of view vertex `i`.
    pub kept_vertices: Vec<usize>,
}

impl AugmentedView {
    pub fn identity(h: &Hypergraph, x: &FeatureMatrix) -> Self {
        AugmentedView {
            hypergraph: h.clone(),
            features: x.clone(),
            kept_vertices: (0..h.n_vertices()).collect(),
        }
    }
}

fn check_ratio(r: f64) -> Result<()> {
    if (0.0..=MAX_RATIO).contains(&r) {
        Ok(())
    } else {
        Err(Error::RatioOutOfRange(r))
    }
}

/// `floor(ratio * n)`, robust to representation error such as `0.29 * 100`.
fn fraction_count(ratio: f64, n: usize) -> usize {
    ((ratio * n as f64) + 1e-9).floor() as usize
}

fn sorted_sample<R: Rng + ?Sized>(rng: &mut R, len: usize, amount: usize) -> Vec<usize> {
    let mut idx = sample(rng, len, amount).into_vec();
    idx.sort_unstable();
    idx
}

/// Removes `floor(ratio * n)` vertices drawn uniformly from the unprotected
/// ones, then drops the edges left with fewer than two members.
pub fn node_removal<R: Rng + ?Sized>(
    h: &Hypergraph,
    ratio: f64,
    protected: &[bool],
    rng: &mut R,
) -> Result<(Hypergraph, Vec<usize>)> {
    check_ratio(ratio)?;
    let n = h.n_vertices();
    check_mask(protected, n)?;
    let candidates: Vec<usize> = (0..n).filter(|&v| !protected[v]).collect();
    let count = fraction_count(ratio, n).min(candidates.len());
    if count == 0 {
        return Ok((h.clone(), (0..n).collect()));
    }
    let mut removed = vec![false; n];
    for i in sorted_sample(rng, candidates.len(), count) {
        removed[candidates[i]] = true;
    }
    let kept: Vec<usize> = (0..n).filter(|&v| !removed[v]).collect();
    let out = validate(&h.induced(&kept))?;
    Ok((out, kept))
}

/// Removes `floor(ratio * m)` hyperedges drawn uniformly. Draws that would
/// isolate a vertex are retried; if every retry isolates someone, each
/// isolated vertex gets its highest-weight removed edge back.
pub fn hyperedge_removal<R: Rng + ?Sized>(h: &Hypergraph, ratio: f64, rng: &mut R) -> Result<Hypergraph> {
    check_ratio(ratio)?;
    let m = h.n_edges();
    let count = fraction_count(ratio, m);
    if count == 0 {
        return Ok(h.clone());
    }
    let incident = h.incident_edges();

    let isolated_by = |removed: &[bool]| -> Vec<usize> {
        incident
            .iter()
            .enumerate()
            .filter(|(_, inc)| !inc.is_empty() && inc.iter().all(|&e| removed[e]))
            .map(|(v, _)| v)
            .collect()
    };

    let mut removed = vec![false; m];
    for _ in 0..=EDGE_RESAMPLES {
        removed.iter_mut().for_each(|r| *r = false);
        for e in sorted_sample(rng, m, count) {
            removed[e] = true;
        }
        if isolated_by(&removed).is_empty() {
            return validate(&h.with_edges((0..m).filter(|&e| !removed[e])));
        }
    }

    for v in isolated_by(&removed) {
        if incident[v].iter().any(|&e| !removed[e]) {
            continue; // an earlier restore already covers v
        }
        let best = incident[v]
            .iter()
            .copied()
            .max_by(|&a, &b| h.edge(a).weight.total_cmp(&h.edge(b).weight).then(b.cmp(&a)))
            .expect("isolated vertices had at least one edge");
        removed[best] = false;
    }
    validate(&h.with_edges((0..m).filter(|&e| !removed[e])))
}

/// The vertices and hyperedges visited by a vertex -> edge -> vertex walk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkTrace {
    /// Visited vertices in first-visit order, starting vertex first.
    pub vertices: Vec<usize>,
    /// Traversed edges, ascending.
    pub edges: BTreeSet<usize>,
}

/// Walks from a uniformly drawn unprotected vertex, choosing a uniform
/// incident edge and then a uniform member of it at each step, until
/// `target` distinct vertices are visited or `walk_length` steps elapse.
pub fn random_walk<R: Rng + ?Sized>(
    h: &Hypergraph,
    target: usize,
    walk_length: usize,
    protected: &[bool],
    rng: &mut R,
) -> WalkTrace {
    let mut trace = WalkTrace {
        vertices: Vec::new(),
        edges: BTreeSet::new(),
    };
    let starts: Vec<usize> = (0..h.n_vertices()).filter(|&v| !protected[v]).collect();
    if target == 0 || starts.is_empty() {
        return trace;
    }
    let incident = h.incident_edges();
    let mut seen = vec![false; h.n_vertices()];
    let mut cur = starts[rng.random_range(0..starts.len())];
    seen[cur] = true;
    trace.vertices.push(cur);
    let mut steps = 0;
    while trace.vertices.len() < target && steps < walk_length {
        let inc = &incident[cur];
        if inc.is_empty() {
            break;
        }
        let e = inc[rng.random_range(0..inc.len())];
        trace.edges.insert(e);
        let edge = h.edge(e);
        let next = edge.entries()[rng.random_range(0..edge.len())].0;
        if !seen[next] {
            seen[next] = true;
            trace.vertices.push(next);
        }
        cur = next;
        steps += 1;
    }
    trace
}

/// Removes the vertices (except protected ones) and hyperedges traced by
/// [`random_walk`] with `target = floor(ratio * n)`.
pub fn subgraph_removal<R: Rng + ?Sized>(
    h: &Hypergraph,
    ratio: f64,
    walk_length: usize,
    protected: &[bool],
    rng: &mut R,
) -> Result<(Hypergraph, Vec<usize>)> {
    check_ratio(ratio)?;
    let n = h.n_vertices();
    check_mask(protected, n)?;
    let trace = random_walk(h, fraction_count(ratio, n), walk_length, protected, rng);
    if trace.vertices.is_empty() {
        return Ok((h.clone(), (0..n).collect()));
    }
    let mut removed = vec![false; n];
    for &v in &trace.vertices {
        removed[v] = !protected[v];
    }
    let kept: Vec<usize> = (0..n).filter(|&v| !removed[v]).collect();
    let pruned = h.with_edges((0..h.n_edges()).filter(|e| !trace.edges.contains(e)));
    let out = validate(&pruned.induced(&kept))?;
    Ok((out, kept))
}

/// Adds `N(0, (delta * std_c)^2)` noise to every column `c` of
/// `floor(ratio * n)` uniformly drawn rows; other rows are untouched.
pub fn feature_perturbation<R: Rng + ?Sized>(
    x: &FeatureMatrix,
    ratio: f64,
    delta: f64,
    rng: &mut R,
) -> Result<FeatureMatrix> {
    check_ratio(ratio)?;
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::InvalidPolicy(format!("delta = {delta} must be >= 0")));
    }
    let n = x.nrows();
    let count = fraction_count(ratio, n);
    if count == 0 || delta == 0.0 {
        return Ok(x.clone());
    }
    let scale: Array1<f64> = x.std_axis(Axis(0), 0.0) * delta;
    let mut out = x.clone();
    for r in sorted_sample(rng, n, count) {
        for (c, v) in out.row_mut(r).iter_mut().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            *v += scale[c] * z;
        }
    }
    Ok(out)
}

fn check_mask(mask: &[bool], n: usize) -> Result<()> {
    if mask.len() != n {
        return Err(Error::Shape(format!(
            "protection mask has {} entries for {n} vertices",
            mask.len()
        )));
    }
    Ok(())
}

fn compose(outer: &[usize], inner: &[usize]) -> Vec<usize> {
    inner.iter().map(|&i| outer[i]).collect()
}

/// Applies the enabled actions in the order A2, A0, A1, A3 with one RNG
/// stream. Vertices flagged in `protected` are never removed.
pub fn apply_policy<R: Rng + ?Sized>(
    h: &Hypergraph,
    x: &FeatureMatrix,
    policy: &AugmentationPolicy,
    protected: &[bool],
    rng: &mut R,
) -> Result<AugmentedView> {
    policy.validate()?;
    check_mask(protected, h.n_vertices())?;
    if x.nrows() != h.n_vertices() {
        return Err(Error::Shape(format!(
            "{} feature rows for {} vertices",
            x.nrows(),
            h.n_vertices()
        )));
    }

    let mut graph = h.clone();
    let mut kept: Vec<usize> = (0..h.n_vertices()).collect();
    let mut mask = protected.to_vec();

    let shrink =
        |graph: &mut Hypergraph, kept: &mut Vec<usize>, mask: &mut Vec<bool>, out: (Hypergraph, Vec<usize>)| {
            *mask = out.1.iter().map(|&i| mask[i]).collect();
            *kept = compose(kept, &out.1);
            *graph = out.0;
        };

    if policy.is_enabled(Action::A2) {
        let out = subgraph_removal(&graph, policy.subgraph_removal_ratio, policy.walk_length, &mask, rng)?;
        shrink(&mut graph, &mut kept, &mut mask, out);
    }
    if policy.is_enabled(Action::A0) {
        let out = node_removal(&graph, policy.node_removal_ratio, &mask, rng)?;
        shrink(&mut graph, &mut kept, &mut mask, out);
    }
    if policy.is_enabled(Action::A1) {
        graph = hyperedge_removal(&graph, policy.hyperedge_removal_ratio, rng)?;
    }
    let mut features: Array2<f64> = x.select(Axis(0), &kept);
    if policy.is_enabled(Action::A3) {
        features = feature_perturbation(&features, policy.feature_perturb_ratio, policy.delta, rng)?;
    }
    Ok(AugmentedView {
        hypergraph: graph,
        features,
        kept_vertices: kept,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::from_seed;

    fn ring(n: usize) -> Hypergraph {
        let edges: Vec<Vec<usize>> = (0..n).map(|i| vec![i, (i + 1) % n]).collect();
        Hypergraph::from_edge_lists(n, &edges).unwrap()
    }

    #[test]
    fn zero_ratios_are_identity() {
        let h = ring(10);
        let mask = vec![false; 10];
        let mut rng = from_seed(1);
        let (h0, kept) = node_removal(&h, 0.0, &mask, &mut rng).unwrap();
        assert_eq!(h0, h);
        assert_eq!(kept, (0..10).collect::<Vec<_>>());
        assert_eq!(hyperedge_removal(&h, 0.0, &mut rng).unwrap(), h);
        let (h2, kept2) = subgraph_removal(&h, 0.0, 5, &mask, &mut rng).unwrap();
        assert_eq!(h2, h);
        assert_eq!(kept2.len(), 10);
        let x = Array2::from_shape_fn((10, 3), |(i, j)| (i * 3 + j) as f64);
        assert_eq!(feature_perturbation(&x, 0.0, 1.0, &mut rng).unwrap(), x);
        assert_eq!(feature_perturbation(&x, 0.5, 0.0, &mut rng).unwrap(), x);
    }

    #[test]
    fn node_removal_count_and_protection() {
        let h = ring(10);
        let mut mask = vec![false; 10];
        mask[0] = true;
        mask[5] = true;
        for seed in 0..20 {
            let (_, kept) = node_removal(&h, 0.3, &mask, &mut from_seed(seed)).unwrap();
            assert_eq!(kept.len(), 7);
            assert!(kept.contains(&0) && kept.contains(&5));
        }
    }

    #[test]
    fn node_removal_on_path_drops_broken_edges() {
        // vertices 0..4, edges {0,1},{1,2},{2,3}; protect all but vertex 2
        let h = Hypergraph::from_edge_lists(4, &[vec![0, 1], vec![1, 2], vec![2, 3]]).unwrap();
        let mask = vec![true, true, false, true];
        let (out, kept) = node_removal(&h, 0.25, &mask, &mut from_seed(3)).unwrap();
        assert_eq!(kept, vec![0, 1, 3]);
        assert_eq!(out.n_edges(), 1);
        assert_eq!(out.edge(0).vertices().collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn hyperedge_removal_count() {
        let h = Hypergraph::from_edge_lists(
            6,
            &(0..20)
                .map(|i| vec![i % 6, (i + 1) % 6, (i + 2) % 6])
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let out = hyperedge_removal(&h, 0.25, &mut from_seed(9)).unwrap();
        assert_eq!(out.n_edges(), 15);
    }

    #[test]
    fn hyperedge_removal_repairs_isolation() {
        // star: every leaf sits in exactly one edge with the hub, so any
        // removal isolates a leaf and the repair must kick in
        let edges: Vec<Vec<usize>> = (1..=6).map(|leaf| vec![0, leaf]).collect();
        let h = Hypergraph::from_edge_lists(7, &edges).unwrap();
        for seed in 0..10 {
            let out = hyperedge_removal(&h, 0.5, &mut from_seed(seed)).unwrap();
            let deg = out.degrees().vertex_degree;
            assert!(deg.iter().all(|&d| d > 0.0), "seed {seed}: {deg:?}");
            assert!(out.edges().iter().any(|e| e.contains(5)));
        }
    }

    #[test]
    fn walk_stays_in_component() {
        // two disjoint triangles
        let h = Hypergraph::from_edge_lists(
            6,
            &[vec![0, 1], vec![1, 2], vec![0, 2], vec![3, 4], vec![4, 5], vec![3, 5]],
        )
        .unwrap();
        // protect the second component so the walk must start in the first
        let mask = vec![false, false, false, true, true, true];
        for seed in 0..20 {
            let (out, kept) = subgraph_removal(&h, 0.5, 4, &mask, &mut from_seed(seed)).unwrap();
            assert!(kept.ends_with(&[3, 4, 5]));
            let base = kept.len() - 3;
            let second: Vec<Vec<usize>> = out
                .edges()
                .iter()
                .map(|e| e.vertices().collect::<Vec<_>>())
                .filter(|vs| vs.iter().all(|&v| v >= base))
                .collect();
            assert_eq!(second.len(), 3);
        }
    }

    #[test]
    fn policy_validation() {
        let mut p = AugmentationPolicy::zero();
        p.validate().unwrap();
        p.node_removal_ratio = 0.6;
        assert!(p.validate().is_err());
        let mut p = AugmentationPolicy::zero();
        p.delta = -1.0;
        assert!(p.validate().is_err());
        let mut p = AugmentationPolicy::zero();
        p.walk_length = 0;
        assert!(p.validate().is_err());
        assert!(matches!(
            node_removal(&ring(4), 0.7, &[false; 4], &mut from_seed(0)),
            Err(Error::RatioOutOfRange(_))
        ));
    }

    #[test]
    fn policy_toml_round_trip() {
        let mut p = AugmentationPolicy::zero();
        p.node_removal_ratio = 0.125;
        p.delta = 1.5;
        p.walk_length = 7;
        p.enabled = [Action::A0, Action::A3].into_iter().collect();
        let text = p.to_toml();
        assert!(text.contains("enabled = [\"A0\", \"A3\"]"));
        assert_eq!(AugmentationPolicy::from_toml(&text).unwrap(), p);
    }
}
