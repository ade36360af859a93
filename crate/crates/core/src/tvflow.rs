//! Pseudo-labels from a semi-explicit hypergraph total-variation flow.
//!
//! Each class `j` owns one channel `u^j` (a vertex signal). Starting from the
//! label encoding, every step moves the channel along
//!
//! ```text
//! |u_k| u_{k+1/2} = |u_k| u_k + dt * ( TV(u_k) (c_k - c~_k) - |u_k| gamma )
//! u_{k+1}         = u_{k+1/2} / |u_{k+1/2}|
//! ```
//!
//! where `c_k = u_k / |u_k|`, `c~_k` is the projection of `c_k` onto the
//! scaling vector `d`, and `gamma` is a subgradient of `TV` (lagged at `u_k`
//! by default). Labeled vertices are clamped after every step. Pseudo-labels
//! are the per-vertex argmax over channels of the final state.

use std::borrow::Cow;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::hypergraph::{degrees, Hyperedge, Hypergraph};
use crate::labels::LabelState;

/// Tolerance used to detect ties in the argmax/argmin sets of a hyperedge.
pub const TIE_TOL: f64 = 1e-12;

const COLLAPSE_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalingMode {
    Ones,
    VertexDegree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubgradientMode {
    /// Evaluate the subgradient at `u_k`.
    Lagged,
    /// Re-evaluate the subgradient at the candidate `u_{k+1/2}` until the
    /// active argmax/argmin sets stop changing.
    FixedPoint { max_refinements: usize },
}

/// Denominator of the normalized entropy in `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntropyNorm {
    /// `log(L)` with `L` the number of classes.
    Classes,
    /// `log(l)` with `l` the number of labeled vertices.
    LabeledCount,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowParams {
    pub dt: f64,
    pub max_iters: usize,
    /// Stop once the largest relative per-channel change drops below this.
    pub tol: f64,
    pub d_mode: ScalingMode,
    pub subgradient: SubgradientMode,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams {
            dt: 1e-4,
            max_iters: 1000,
            tol: 1e-6,
            d_mode: ScalingMode::VertexDegree,
            subgradient: SubgradientMode::Lagged,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config(format!("flow dt must be positive, got {}", self.dt)));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::Config(format!("flow tol must be positive, got {}", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("flow max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Hypergraph total variation `sum_e w(e) (max_{a in e} u_a - min_{b in e} u_b)`.
pub fn tv(h: &Hypergraph, u: ArrayView1<f64>) -> f64 {
    let u = contiguous(u);
    h.edges()
        .iter()
        .map(|edge| {
            let (lo, hi) = edge_range(edge, &u);
            edge.weight * (hi - lo)
        })
        .sum()
}

fn contiguous<'a>(u: ArrayView1<'a, f64>) -> Cow<'a, [f64]> {
    match u.to_slice() {
        Some(s) => Cow::Borrowed(s),
        None => Cow::Owned(u.to_vec()),
    }
}

fn edge_range(edge: &Hyperedge, u: &[f64]) -> (f64, f64) {
    edge.entries()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(v, _)| {
            let x = u[v];
            (if x < lo { x } else { lo }, if x > hi { x } else { hi })
        })
}

/// A subgradient of [`tv`] at `u`: each edge pushes mass `w(e)` spread
/// uniformly over its argmax set and pulls `w(e)` uniformly from its argmin
/// set. Edges on which `u` is constant contribute nothing.
pub fn tv_subgradient(h: &Hypergraph, u: ArrayView1<f64>) -> Array1<f64> {
    tv_with_subgradient(h, u).1
}

/// [`tv`] and [`tv_subgradient`] from one pass over the edges.
pub fn tv_with_subgradient(h: &Hypergraph, u: ArrayView1<f64>) -> (f64, Array1<f64>) {
    let u = contiguous(u);
    let mut g = vec![0.0; u.len()];
    let mut total = 0.0;
    for edge in h.edges() {
        let (lo, hi) = edge_range(edge, &u);
        total += edge.weight * (hi - lo);
        if hi - lo <= TIE_TOL {
            continue;
        }
        let (mut n_hi, mut n_lo) = (0usize, 0usize);
        for &(v, _) in edge.entries() {
            if u[v] >= hi - TIE_TOL {
                n_hi += 1;
            } else if u[v] <= lo + TIE_TOL {
                n_lo += 1;
            }
        }
        let up = edge.weight / n_hi as f64;
        let down = edge.weight / n_lo as f64;
        for &(v, _) in edge.entries() {
            if u[v] >= hi - TIE_TOL {
                g[v] += up;
            } else if u[v] <= lo + TIE_TOL {
                g[v] -= down;
            }
        }
    }
    (total, Array1::from(g))
}

/// Identifies the active argmax/argmin sets of every edge, for detecting
/// when a fixed-point refinement has settled.
fn active_sets(h: &Hypergraph, u: ArrayView1<f64>) -> Vec<u8> {
    let u = contiguous(u);
    let mut sig = Vec::new();
    for edge in h.edges() {
        let (lo, hi) = edge_range(edge, &u);
        for v in edge.vertices() {
            sig.push(if hi - lo <= TIE_TOL {
                0
            } else if u[v] >= hi - TIE_TOL {
                1
            } else if u[v] <= lo + TIE_TOL {
                2
            } else {
                3
            });
        }
    }
    sig
}

fn norm(v: ArrayView1<f64>) -> f64 {
    v.dot(&v).sqrt()
}

/// `c = u / |u|` and its projection `c~ = (<d, c> / <d, d>) d`.
pub fn drift_terms(u: ArrayView1<f64>, d: ArrayView1<f64>) -> (Array1<f64>, Array1<f64>) {
    let c = &u / norm(u);
    let c_tilde = &d * (d.dot(&c) / d.dot(&d));
    (c, c_tilde)
}

pub fn scaling_vector(h: &Hypergraph, mode: ScalingMode) -> Array1<f64> {
    match mode {
        ScalingMode::Ones => Array1::ones(h.n_vertices()),
        ScalingMode::VertexDegree => {
            let deg = degrees(h).vertex_degree;
            // isolated vertices keep a unit scale so d stays strictly positive
            deg.into_iter().map(|x| if x > 0.0 { x } else { 1.0 }).collect()
        }
    }
}

/// Raw label encoding of channel `class`: +1 on its labeled vertices,
/// `-1/(L-1)` on vertices labeled with another class, 0 elsewhere.
pub fn label_encoding(labels: &LabelState, class: usize) -> Array1<f64> {
    let other = -1.0 / (labels.n_classes() - 1) as f64;
    let mut e = Array1::zeros(labels.n_vertices());
    for &(v, c) in labels.labeled() {
        e[v] = if c == class { 1.0 } else { other };
    }
    e
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    /// `n x L`, one unit-norm column per class.
    pub u: Array2<f64>,
    pub dt: f64,
    pub d: Array1<f64>,
    pub iter: usize,
    pub subgradient: SubgradientMode,
    /// Clamped `(vertex, class)` pairs.
    pub labeled: Vec<(usize, usize)>,
}

impl FlowState {
    /// Label-encoded start: each channel is its encoding with the `d`
    /// component removed, scaled to unit norm.
    pub fn init(h: &Hypergraph, labels: &LabelState, params: &FlowParams) -> Result<Self> {
        params.validate()?;
        if labels.n_vertices() != h.n_vertices() {
            return Err(Error::Shape(format!(
                "labels cover {} vertices, hypergraph has {}",
                labels.n_vertices(),
                h.n_vertices()
            )));
        }
        let n_classes = labels.n_classes();
        let d = scaling_vector(h, params.d_mode);
        let dd = d.dot(&d);
        let mut u = Array2::zeros((h.n_vertices(), n_classes));
        for j in 0..n_classes {
            let enc = label_encoding(labels, j);
            let col = &enc - &(&d * (d.dot(&enc) / dd));
            let nrm = norm(col.view());
            if nrm < COLLAPSE_NORM {
                return Err(Error::FlowCollapse { iter: 0, channel: j });
            }
            u.column_mut(j).assign(&(col / nrm));
        }
        Ok(FlowState {
            u,
            dt: params.dt,
            d,
            iter: 0,
            subgradient: params.subgradient,
            labeled: labels.labeled().to_vec(),
        })
    }

    pub fn n_classes(&self) -> usize {
        self.u.ncols()
    }

    fn encoding(&self, class: usize) -> Array1<f64> {
        let other = -1.0 / (self.n_classes() - 1) as f64;
        let mut e = Array1::zeros(self.u.nrows());
        for &(v, c) in &self.labeled {
            e[v] = if c == class { 1.0 } else { other };
        }
        e
    }
}

/// Per-channel quantities of one step, for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelStep {
    pub channel: usize,
    /// `TV(u_{k+1})`.
    pub tv_value: f64,
    /// `|u_{k+1} - u_k| / |u_k|`.
    pub residual: f64,
}

fn step_channel(h: &Hypergraph, state: &FlowState, j: usize) -> Result<(Array1<f64>, ChannelStep)> {
    let u = state.u.column(j);
    let u_norm = norm(u);
    if u_norm < COLLAPSE_NORM {
        return Err(Error::FlowCollapse {
            iter: state.iter,
            channel: j,
        });
    }
    let (c, c_tilde) = drift_terms(u, state.d.view());
    let (tv_u, lagged) = tv_with_subgradient(h, u);
    let explicit = &u * u_norm + &((&c - &c_tilde) * (state.dt * tv_u));

    let half_from = |gamma: &Array1<f64>| (&explicit - &(gamma * (state.dt * u_norm))) / u_norm;
    let mut gamma = lagged;
    let mut half = half_from(&gamma);
    if let SubgradientMode::FixedPoint { max_refinements } = state.subgradient {
        let mut sets = active_sets(h, u);
        for _ in 0..max_refinements {
            let next_sets = active_sets(h, half.view());
            if next_sets == sets {
                break;
            }
            gamma = tv_subgradient(h, half.view());
            half = half_from(&gamma);
            sets = next_sets;
        }
    }

    let half_norm = norm(half.view());
    if !(half_norm >= COLLAPSE_NORM) {
        return Err(Error::FlowCollapse {
            iter: state.iter,
            channel: j,
        });
    }
    if !state.labeled.is_empty() {
        let enc = state.encoding(j);
        let scale = half_norm / norm(enc.view());
        for &(v, _) in &state.labeled {
            half[v] = enc[v] * scale;
        }
    }
    let next = &half / norm(half.view());
    let residual = norm((&next - &u).view()) / u_norm;
    let record = ChannelStep {
        channel: j,
        tv_value: tv(h, next.view()),
        residual,
    };
    Ok((next, record))
}

fn step_impl(h: &Hypergraph, state: &FlowState) -> Result<(FlowState, Vec<ChannelStep>)> {
    if state.u.nrows() != h.n_vertices() {
        return Err(Error::Shape(format!(
            "flow state has {} rows, hypergraph has {} vertices",
            state.u.nrows(),
            h.n_vertices()
        )));
    }
    let mut u = Array2::zeros(state.u.raw_dim());
    let mut records = Vec::with_capacity(state.n_classes());
    for j in 0..state.n_classes() {
        let (col, rec) = step_channel(h, state, j)?;
        u.column_mut(j).assign(&col);
        records.push(rec);
    }
    let next = FlowState {
        u,
        iter: state.iter + 1,
        ..state.clone()
    };
    Ok((next, records))
}

/// One step of the flow on every class channel.
pub fn flow_step(h: &Hypergraph, state: &FlowState) -> Result<FlowState> {
    step_impl(h, state).map(|(s, _)| s)
}

/// One row of the per-iteration diagnostics stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowRecord {
    pub iter: usize,
    pub channel: usize,
    pub tv_value: f64,
    pub residual: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowOutcome {
    /// Final state `u*`, `n x L`.
    pub u: Array2<f64>,
    pub iterations: usize,
    pub converged: bool,
}

pub fn run_flow(h: &Hypergraph, labels: &LabelState, params: &FlowParams) -> Result<FlowOutcome> {
    run_flow_traced(h, labels, params, |_| {})
}

/// [`run_flow`], reporting one [`FlowRecord`] per `(iteration, channel)`.
/// `tau` uses [`EntropyNorm::Classes`] over the unlabeled vertices.
pub fn run_flow_traced(
    h: &Hypergraph,
    labels: &LabelState,
    params: &FlowParams,
    mut on_record: impl FnMut(&FlowRecord),
) -> Result<FlowOutcome> {
    labels.check_all_classes_labeled()?;
    let mut state = FlowState::init(h, labels, params)?;
    let unlabeled = labels.unlabeled();
    let mut converged = false;
    while state.iter < params.max_iters {
        let (next, records) = step_impl(h, &state)?;
        state = next;
        let tau = uncertainty_tau(state.u.view(), &unlabeled, EntropyNorm::Classes, labels.n_labeled());
        for r in &records {
            on_record(&FlowRecord {
                iter: state.iter,
                channel: r.channel,
                tv_value: r.tv_value,
                residual: r.residual,
                tau,
            });
        }
        let worst = records.iter().map(|r| r.residual).fold(0.0, f64::max);
        if worst < params.tol {
            converged = true;
            break;
        }
    }
    Ok(FlowOutcome {
        u: state.u,
        iterations: state.iter,
        converged,
    })
}

/// Per-row argmax; ties go to the smallest class index.
pub fn extract_pseudo_labels(u: ArrayView2<f64>) -> Vec<usize> {
    u.axis_iter(Axis(0))
        .map(|row| {
            let mut best = 0;
            for (j, &x) in row.iter().enumerate() {
                if x > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Turns a row of channel scores into a probability vector. Channels are
/// mean-free, so zero marks the average level: positive entries are kept and
/// normalized. A row with no positive entry is shifted by its minimum instead,
/// so only the relative spread counts. A constant row is uniform.
pub fn row_distribution(row: ArrayView1<f64>) -> Array1<f64> {
    let clipped = row.mapv(|x| x.max(0.0));
    let (shifted, total) = if clipped.sum() > 0.0 {
        let t = clipped.sum();
        (clipped, t)
    } else {
        let min = row.fold(f64::INFINITY, |m, &x| m.min(x));
        let s = row.mapv(|x| x - min);
        let t = s.sum();
        (s, t)
    };
    if total > 0.0 && total.is_finite() {
        shifted / total
    } else {
        Array1::from_elem(row.len(), 1.0 / row.len() as f64)
    }
}

pub fn entropy(p: ArrayView1<f64>) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

/// Certainty weight `tau = 1 - Q / log(norm)` clamped to `[0, 1]`, where `Q`
/// is the mean entropy of the normalized rows of `u` at `unlabeled`.
pub fn uncertainty_tau(u: ArrayView2<f64>, unlabeled: &[usize], norm_by: EntropyNorm, n_labeled: usize) -> f64 {
    if unlabeled.is_empty() {
        return 1.0;
    }
    let q = unlabeled
        .iter()
        .map(|&i| entropy(row_distribution(u.row(i)).view()))
        .sum::<f64>()
        / unlabeled.len() as f64;
    let denom = match norm_by {
        EntropyNorm::Classes => (u.ncols() as f64).ln(),
        EntropyNorm::LabeledCount => (n_labeled as f64).ln(),
    };
    if denom <= 0.0 {
        return if q > 0.0 { 0.0 } else { 1.0 };
    }
    (1.0 - q / denom).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn path3() -> Hypergraph {
        Hypergraph::from_edge_lists(3, &[vec![0, 1], vec![1, 2]]).unwrap()
    }

    #[test]
    fn tv_of_constant_is_zero() {
        let h = path3();
        assert_eq!(tv(&h, array![2.0, 2.0, 2.0].view()), 0.0);
        assert_eq!(tv_subgradient(&h, array![2.0, 2.0, 2.0].view()), array![0.0, 0.0, 0.0]);
    }

    #[test]
    fn tv_of_path() {
        let h = path3();
        assert_eq!(tv(&h, array![0.0, 1.0, 3.0].view()), 3.0);
        assert_eq!(tv(&h, array![5.0, 6.0, 8.0].view()), 3.0);
    }

    #[test]
    fn subgradient_single_edge() {
        let h = Hypergraph::from_edge_lists(2, &[vec![0, 1]]).unwrap();
        assert_eq!(tv_subgradient(&h, array![0.0, 1.0].view()), array![-1.0, 1.0]);
    }

    #[test]
    fn subgradient_splits_ties() {
        let h = Hypergraph::from_edge_lists(3, &[vec![0, 1, 2]]).unwrap();
        let g = tv_subgradient(&h, array![1.0, 1.0, 0.0].view());
        assert_eq!(g, array![0.5, 0.5, -1.0]);
    }

    #[test]
    fn pseudo_labels_argmax() {
        let u = array![[0.1, 0.9, 0.0, 0.0], [0.25, 0.25, 0.25, 0.25], [0.0, 0.0, 0.0, 1.0]];
        assert_eq!(extract_pseudo_labels(u.view()), vec![1, 0, 3]);
    }

    #[test]
    fn tau_extremes() {
        let onehot = array![[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]];
        assert_eq!(uncertainty_tau(onehot.view(), &[0, 1], EntropyNorm::Classes, 1), 1.0);
        let uniform = Array2::from_elem((3, 4), 0.3);
        let t = uncertainty_tau(uniform.view(), &[0, 1, 2], EntropyNorm::Classes, 1);
        assert!(t.abs() < 1e-12);
    }

    #[test]
    fn tau_half_entropy() {
        // two equal top channels over an equal floor: entropy log 2
        let u = array![[0.4, 0.4, -0.1, -0.1], [-3.0, -3.0, -1.0, -1.0]];
        let t = uncertainty_tau(u.view(), &[0, 1], EntropyNorm::Classes, 1);
        assert!((t - 0.5).abs() < 1e-12);
    }

    #[test]
    fn tau_labeled_count_norm() {
        let u = array![[0.4, 0.4]];
        // constant row, Q = log 2, l = 4: tau = 1 - log2/log4 = 0.5
        let t = uncertainty_tau(u.view(), &[0], EntropyNorm::LabeledCount, 4);
        assert!((t - 0.5).abs() < 1e-12);
    }

    #[test]
    fn tiny_tol_and_huge_tol() {
        let h = Hypergraph::from_edge_lists(4, &[vec![0, 1], vec![1, 2], vec![2, 3]]).unwrap();
        let labels = LabelState::new(4, 2, vec![(0, 0), (3, 1)]).unwrap();
        let params = FlowParams {
            tol: 1e9,
            ..FlowParams::default()
        };
        let out = run_flow(&h, &labels, &params).unwrap();
        assert_eq!(out.iterations, 1);
        assert!(out.converged);
    }

    #[test]
    fn missing_class_is_rejected() {
        let h = path3();
        let labels = LabelState::new(3, 2, vec![(0, 0)]).unwrap();
        assert!(matches!(
            run_flow(&h, &labels, &FlowParams::default()),
            Err(Error::MissingClassLabel(1))
        ));
    }

    #[test]
    fn fully_labeled_flow_returns_encodings() {
        let h = path3();
        let labels = LabelState::new(3, 2, vec![(0, 0), (1, 0), (2, 1)]).unwrap();
        let out = run_flow(&h, &labels, &FlowParams::default()).unwrap();
        for j in 0..2 {
            let enc = label_encoding(&labels, j);
            let expected = &enc / norm(enc.view());
            for (a, b) in out.u.column(j).iter().zip(expected.iter()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        assert_eq!(extract_pseudo_labels(out.u.view()), vec![0, 0, 1]);
    }

    #[test]
    fn fixed_point_mode_runs() {
        let h = Hypergraph::from_edge_lists(4, &[vec![0, 1], vec![1, 2], vec![2, 3]]).unwrap();
        let labels = LabelState::new(4, 2, vec![(0, 0), (3, 1)]).unwrap();
        let params = FlowParams {
            subgradient: SubgradientMode::FixedPoint { max_refinements: 5 },
            max_iters: 50,
            ..FlowParams::default()
        };
        let out = run_flow(&h, &labels, &params).unwrap();
        for j in 0..2 {
            assert!((norm(out.u.column(j)) - 1.0).abs() < 1e-9);
        }
    }
}
