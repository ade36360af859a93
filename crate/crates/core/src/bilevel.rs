//! Outer policy search around the inner classifier, and the experiment
//! protocol that compares augmentation arms over repeated label draws.
//!
//! One evaluation of a policy runs: pseudo-labels and `tau` (computed once
//! per split), augmentation, inner training on the augmented view, and
//! scoring of the trained classifier on the full unaugmented hypergraph.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augmentation::{apply_policy, Action, AugmentationPolicy, AugmentedView, MAX_RATIO};
use crate::classifier::{
    argmax_rows, forward_propagated, hg_conv_operator_with_self_loops, softmax_rows, train, HgnnParams, Targets,
    TrainConfig,
};
use crate::data::{split, Split, SplitSpec};
use crate::error::{Error, Result};
use crate::hypergraph::Hypergraph;
use crate::labels::LabelState;
use crate::metrics::{accuracy, mean_std, metrics, MetricsReport};
use crate::rng;
use crate::tvflow::{extract_pseudo_labels, run_flow, uncertainty_tau, EntropyNorm, FlowParams};
use crate::FeatureMatrix;

/// One column of the ablation: no augmentation, a single action, or all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Arm {
    Baseline,
    A0,
    A1,
    A2,
    A3,
    A4,
}

impl Arm {
    pub const ALL: [Arm; 6] = [Arm::Baseline, Arm::A0, Arm::A1, Arm::A2, Arm::A3, Arm::A4];

    /// Actions whose intensities the arm searches over.
    pub fn actions(self) -> BTreeSet<Action> {
        match self {
            Arm::Baseline => BTreeSet::new(),
            Arm::A0 => [Action::A0].into(),
            Arm::A1 => [Action::A1].into(),
            Arm::A2 => [Action::A2].into(),
            Arm::A3 => [Action::A3].into(),
            Arm::A4 => Action::ALL.into_iter().collect(),
        }
    }

    pub fn is_single_action(self) -> bool {
        matches!(self, Arm::A0 | Arm::A1 | Arm::A2 | Arm::A3)
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Arm::Baseline => "baseline",
            Arm::A0 => "A0",
            Arm::A1 => "A1",
            Arm::A2 => "A2",
            Arm::A3 => "A3",
            Arm::A4 => "A4",
        };
        f.write_str(s)
    }
}

impl FromStr for Arm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "baseline" | "Baseline" | "zero" => Ok(Arm::Baseline),
            "A0" => Ok(Arm::A0),
            "A1" => Ok(Arm::A1),
            "A2" => Ok(Arm::A2),
            "A3" => Ok(Arm::A3),
            "A4" => Ok(Arm::A4),
            other => Err(Error::Config(format!("unknown arm {other:?}"))),
        }
    }
}

impl Serialize for Arm {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Arm {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// What the outer objective scores against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreMode {
    /// Accuracy on the outer-validation fold carved from the labeled set.
    HeldOut,
    /// Accuracy against labels plus pseudo-labels on all non-test vertices.
    PseudoLabels,
}

/// Where the unlabeled targets come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PseudoLabelSource {
    /// Argmax of the converged total-variation flow.
    Flow,
    /// Argmax of a classifier trained on the labeled vertices only.
    NetworkArgmax,
}

/// Which hypergraph the flow runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowPlacement {
    /// Once per split on the full hypergraph.
    Unaugmented,
    /// Again on every augmented view.
    AugmentedView,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    /// Number of policies sampled in the first stage.
    pub budget: usize,
    /// Fresh seeds per survivor in each halving round.
    pub reeval_seeds: usize,
    pub workers: usize,
    pub score_mode: ScoreMode,
    pub pseudo_source: PseudoLabelSource,
    pub flow_placement: FlowPlacement,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            budget: 32,
            reeval_seeds: 3,
            workers: 1,
            score_mode: ScoreMode::HeldOut,
            pseudo_source: PseudoLabelSource::Flow,
            flow_placement: FlowPlacement::Unaugmented,
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::Config("search budget must be at least 1".into()));
        }
        if self.reeval_seeds == 0 {
            return Err(Error::Config("reeval_seeds must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        Ok(())
    }
}

/// Summary of the inner run behind a score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerSummary {
    /// Avg-ER on the scoring set.
    pub avg_er: f64,
    pub ppv: f64,
    /// Final training loss (NaN when diverged).
    pub final_loss: f64,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyCandidate {
    pub policy: AugmentationPolicy,
    /// Accuracy in `[0, 1]`; 0 when training diverged.
    pub score: f64,
    pub inner: InnerSummary,
    pub seed: u64,
}

/// Everything an evaluation needs about one labeled split.
#[derive(Debug, Clone)]
pub struct Task {
    pub hypergraph: Hypergraph,
    pub features: FeatureMatrix,
    pub labels: LabelState,
    /// `(vertex, true class)` of the outer-validation fold.
    pub outer_val: Vec<(usize, usize)>,
    theta: Array2<f64>,
    propagated: Array2<f64>,
}

impl Task {
    pub fn new(
        hypergraph: Hypergraph,
        features: FeatureMatrix,
        labels: LabelState,
        outer_val: Vec<(usize, usize)>,
    ) -> Result<Self> {
        if features.nrows() != hypergraph.n_vertices() || labels.n_vertices() != hypergraph.n_vertices() {
            return Err(Error::Shape(format!(
                "hypergraph has {} vertices, features {} rows, labels {} vertices",
                hypergraph.n_vertices(),
                features.nrows(),
                labels.n_vertices()
            )));
        }
        if labels.n_labeled() == 0 {
            return Err(Error::EmptyLabeledSet);
        }
        let theta = hg_conv_operator_with_self_loops(&hypergraph);
        let propagated = theta.dot(&features);
        Ok(Task {
            hypergraph,
            features,
            labels,
            outer_val,
            theta,
            propagated,
        })
    }

    /// Builds the task for a split of fully known ground truth.
    pub fn from_split(hypergraph: Hypergraph, features: FeatureMatrix, split: &Split, truth: &[usize]) -> Result<Self> {
        let outer_val = split.outer_val.iter().map(|&v| (v, truth[v])).collect();
        Task::new(hypergraph, features, split.labels.clone(), outer_val)
    }

    pub fn n_classes(&self) -> usize {
        self.labels.n_classes()
    }

    /// Normalized operator of the full hypergraph.
    pub fn theta(&self) -> ArrayView2<'_, f64> {
        self.theta.view()
    }

    /// Logits of `params` on the full unaugmented hypergraph.
    pub fn logits(&self, params: &HgnnParams) -> Result<Array2<f64>> {
        Ok(forward_propagated(self.theta.view(), &self.propagated, params)?.logits)
    }

    pub fn predict(&self, params: &HgnnParams) -> Result<Vec<usize>> {
        Ok(argmax_rows(self.logits(params)?.view()))
    }
}

/// Per-vertex pseudo-labels over the whole vertex set and their weight.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabels {
    pub labels: Vec<usize>,
    pub tau: f64,
}

/// Pseudo-labels from the flow on `h` for the given labels.
pub fn flow_pseudo_labels(h: &Hypergraph, labels: &LabelState, params: &FlowParams) -> Result<PseudoLabels> {
    let out = run_flow(h, labels, params)?;
    let tau = uncertainty_tau(
        out.u.view(),
        &labels.unlabeled(),
        EntropyNorm::Classes,
        labels.n_labeled(),
    );
    Ok(PseudoLabels {
        labels: extract_pseudo_labels(out.u.view()),
        tau,
    })
}

/// Pseudo-labels from a classifier trained on the labeled vertices alone;
/// `tau` comes from the entropy of its softmax outputs.
pub fn network_pseudo_labels(task: &Task, train_cfg: &TrainConfig, seed: u64) -> Result<PseudoLabels> {
    let cfg = TrainConfig {
        seed: rng::derive(seed, "pseudo-network", 0),
        ..*train_cfg
    };
    let targets = Targets {
        n_classes: task.n_classes(),
        labeled: task.labels.labeled(),
        pseudo: &[],
        tau: 0.0,
    };
    let out = train(task.theta.view(), &task.features, &targets, &cfg, None)?;
    let logits = task.logits(&out.params)?;
    let probs = softmax_rows(logits.view());
    let tau = uncertainty_tau(
        probs.view(),
        &task.labels.unlabeled(),
        EntropyNorm::Classes,
        task.labels.n_labeled(),
    );
    Ok(PseudoLabels {
        labels: argmax_rows(logits.view()),
        tau,
    })
}

pub fn pseudo_labels_for(
    task: &Task,
    source: PseudoLabelSource,
    flow: &FlowParams,
    train_cfg: &TrainConfig,
    seed: u64,
) -> Result<PseudoLabels> {
    match source {
        PseudoLabelSource::Flow => flow_pseudo_labels(&task.hypergraph, &task.labels, flow),
        PseudoLabelSource::NetworkArgmax => network_pseudo_labels(task, train_cfg, seed),
    }
}

/// Fixed inputs shared by every evaluation of one search.
#[derive(Debug, Clone, Copy)]
pub struct EvalSettings<'a> {
    pub flow: &'a FlowParams,
    pub train: &'a TrainConfig,
    pub score_mode: ScoreMode,
    pub flow_placement: FlowPlacement,
}

/// Trains on `A_theta(X)` and returns the trained weights (None when
/// training diverged) plus the final training loss.
fn train_on_policy(
    task: &Task,
    pseudo: &PseudoLabels,
    policy: &AugmentationPolicy,
    settings: &EvalSettings,
    seed: u64,
) -> Result<(Option<HgnnParams>, f64)> {
    let mut aug_rng = rng::stream(seed, "augment", 0);
    let view = apply_policy(
        &task.hypergraph,
        &task.features,
        policy,
        &task.labels.mask(),
        &mut aug_rng,
    )?;
    let labels = task.labels.restrict(&view.kept_vertices);
    let local;
    let pseudo_here = match settings.flow_placement {
        FlowPlacement::Unaugmented => pseudo,
        FlowPlacement::AugmentedView => {
            local = view_pseudo_labels(&view, &labels, settings.flow)?;
            &local
        }
    };
    let pseudo_pairs: Vec<(usize, usize)> = match settings.flow_placement {
        FlowPlacement::Unaugmented => labels
            .unlabeled()
            .into_iter()
            .map(|i| (i, pseudo_here.labels[view.kept_vertices[i]]))
            .collect(),
        FlowPlacement::AugmentedView => labels
            .unlabeled()
            .into_iter()
            .map(|i| (i, pseudo_here.labels[i]))
            .collect(),
    };
    let targets = Targets {
        n_classes: task.n_classes(),
        labeled: labels.labeled(),
        pseudo: &pseudo_pairs,
        tau: pseudo_here.tau,
    };
    let cfg = TrainConfig {
        seed: rng::derive(seed, "train", 0),
        ..*settings.train
    };
    let theta = hg_conv_operator_with_self_loops(&view.hypergraph);
    match train(theta.view(), &view.features, &targets, &cfg, None) {
        Ok(out) => {
            let last = out.trace.last().map_or(f64::NAN, |r| r.loss.total);
            Ok((Some(out.params), last))
        }
        Err(Error::Divergence { .. }) => Ok((None, f64::NAN)),
        Err(e) => Err(e),
    }
}

fn view_pseudo_labels(view: &AugmentedView, labels: &LabelState, flow: &FlowParams) -> Result<PseudoLabels> {
    flow_pseudo_labels(&view.hypergraph, labels, flow)
}

/// Scoring set as `(vertex, target)` pairs for the given mode.
fn scoring_targets(task: &Task, pseudo: &PseudoLabels, mode: ScoreMode, test: &[usize]) -> Vec<(usize, usize)> {
    match mode {
        ScoreMode::HeldOut => task.outer_val.clone(),
        ScoreMode::PseudoLabels => {
            let mut excluded = vec![false; task.hypergraph.n_vertices()];
            for &v in test {
                excluded[v] = true;
            }
            for &(v, _) in &task.outer_val {
                excluded[v] = true;
            }
            (0..task.hypergraph.n_vertices())
                .filter(|&v| !excluded[v])
                .map(|v| (v, task.labels.label_of(v).unwrap_or(pseudo.labels[v])))
                .collect()
        }
    }
}

/// Runs the inner pipeline for `policy` and scores it. Deterministic in
/// `seed`; a diverged inner run scores 0 and is flagged.
pub fn evaluate_policy(
    task: &Task,
    pseudo: &PseudoLabels,
    policy: &AugmentationPolicy,
    settings: &EvalSettings,
    seed: u64,
) -> Result<PolicyCandidate> {
    let targets = scoring_targets(task, pseudo, settings.score_mode, &[]);
    if targets.is_empty() {
        return Err(Error::Config(
            "the scoring set is empty (no outer-validation vertices)".into(),
        ));
    }
    let (params, final_loss) = train_on_policy(task, pseudo, policy, settings, seed)?;
    let (score, inner) = match params {
        None => (
            0.0,
            InnerSummary {
                avg_er: 1.0,
                ppv: 0.0,
                final_loss,
                diverged: true,
            },
        ),
        Some(p) => {
            let pred = task.predict(&p)?;
            let (idx_pred, idx_truth): (Vec<usize>, Vec<usize>) = targets.iter().map(|&(v, c)| (pred[v], c)).unzip();
            let m = metrics(&idx_pred, &idx_truth, task.n_classes())?;
            (
                accuracy(&idx_pred, &idx_truth),
                InnerSummary {
                    avg_er: m.avg_er,
                    ppv: m.ppv,
                    final_loss,
                    diverged: false,
                },
            )
        }
    };
    Ok(PolicyCandidate {
        policy: policy.clone(),
        score,
        inner,
        seed,
    })
}

/// Draws a policy uniformly from the search box, with intensities only for
/// `actions` (others stay zero and disabled).
pub fn sample_policy<R: Rng + ?Sized>(actions: &BTreeSet<Action>, rng: &mut R) -> AugmentationPolicy {
    // Draw every coordinate regardless of the action set so pools sampled
    // for different arms stay aligned draw by draw.
    let node = rng.random_range(0.0..=MAX_RATIO);
    let edge = rng.random_range(0.0..=MAX_RATIO);
    let sub = rng.random_range(0.0..=MAX_RATIO);
    let walk = rng.random_range(2..=20usize);
    let feat = rng.random_range(0.0..=MAX_RATIO);
    let delta = rng.random_range(0.0..=2.0);
    let on = |a: Action| actions.contains(&a);
    AugmentationPolicy {
        node_removal_ratio: if on(Action::A0) { node } else { 0.0 },
        hyperedge_removal_ratio: if on(Action::A1) { edge } else { 0.0 },
        subgraph_removal_ratio: if on(Action::A2) { sub } else { 0.0 },
        walk_length: if on(Action::A2) { walk } else { 1 },
        feature_perturb_ratio: if on(Action::A3) { feat } else { 0.0 },
        delta: if on(Action::A3) { delta } else { 0.0 },
        enabled: actions.clone(),
    }
}

/// The first `budget` draws of the sampler seeded by `seed`; pools for a
/// larger budget extend pools for a smaller one.
pub fn sample_pool(actions: &BTreeSet<Action>, budget: usize, seed: u64) -> Vec<AugmentationPolicy> {
    let mut r = rng::stream(seed, "policy-sampler", 0);
    (0..budget).map(|_| sample_policy(actions, &mut r)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeaderboardEntry {
    /// Position in the stage-one pool.
    pub candidate: usize,
    pub policy: AugmentationPolicy,
    /// One score per evaluation, in evaluation order.
    pub scores: Vec<f64>,
    pub mean_score: f64,
    /// Stage-one summary.
    pub first: PolicyCandidate,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    /// Winner of successive halving.
    pub best: AugmentationPolicy,
    pub best_index: usize,
    /// Sorted by mean score (descending), ties by candidate index.
    pub leaderboard: Vec<LeaderboardEntry>,
}

impl SearchOutcome {
    /// Best single stage-one score.
    pub fn best_first_score(&self) -> f64 {
        self.leaderboard
            .iter()
            .map(|e| e.first.score)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn run_parallel<T: Send, F>(workers: usize, n: usize, f: F) -> Result<Vec<T>>
where
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    if workers <= 1 {
        return (0..n).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    pool.install(|| (0..n).into_par_iter().map(f).collect())
}

fn round_seed(seed: u64, round: usize, j: usize) -> u64 {
    rng::derive(seed, "search-round", ((round as u64) << 32) | j as u64)
}

fn rank(entries: &[LeaderboardEntry], ids: &mut [usize]) {
    ids.sort_by(|&a, &b| {
        entries[b]
            .mean_score
            .total_cmp(&entries[a].mean_score)
            .then(entries[a].candidate.cmp(&entries[b].candidate))
    });
}

/// Successive halving over `pool`. Stage one scores every candidate on a
/// shared seed; each later round keeps the better half (by mean score) and
/// re-evaluates the survivors on `reeval_seeds` fresh shared seeds.
pub fn outer_search(
    task: &Task,
    pseudo: &PseudoLabels,
    pool: &[AugmentationPolicy],
    settings: &EvalSettings,
    cfg: &SearchConfig,
) -> Result<SearchOutcome> {
    cfg.validate()?;
    if pool.is_empty() {
        return Err(Error::Config("empty candidate pool".into()));
    }
    let s0 = round_seed(cfg.seed, 0, 0);
    let first = run_parallel(cfg.workers, pool.len(), |i| {
        evaluate_policy(task, pseudo, &pool[i], settings, s0)
    })?;
    if first.iter().all(|c| c.inner.diverged) {
        return Err(Error::AllDiverged);
    }
    let mut entries: Vec<LeaderboardEntry> = first
        .into_iter()
        .enumerate()
        .map(|(i, c)| LeaderboardEntry {
            candidate: i,
            policy: c.policy.clone(),
            scores: vec![c.score],
            mean_score: c.score,
            diverged: c.inner.diverged,
            first: c,
        })
        .collect();

    let mut survivors: Vec<usize> = (0..entries.len()).collect();
    let mut round = 1;
    while survivors.len() > 1 {
        rank(&entries, &mut survivors);
        survivors.truncate(survivors.len().div_ceil(2));
        if survivors.len() == 1 {
            break;
        }
        let jobs: Vec<(usize, u64)> = survivors
            .iter()
            .flat_map(|&i| (0..cfg.reeval_seeds).map(move |j| (i, round_seed(cfg.seed, round, j))))
            .collect();
        let results = run_parallel(cfg.workers, jobs.len(), |k| {
            let (i, s) = jobs[k];
            evaluate_policy(task, pseudo, &entries[i].policy, settings, s)
        })?;
        for (&(i, _), c) in jobs.iter().zip(results) {
            let e = &mut entries[i];
            e.scores.push(c.score);
            e.diverged |= c.inner.diverged;
            e.mean_score = e.scores.iter().sum::<f64>() / e.scores.len() as f64;
        }
        round += 1;
    }
    let best_index = survivors[0];
    let best = entries[best_index].policy.clone();
    let mut order: Vec<usize> = (0..entries.len()).collect();
    rank(&entries, &mut order);
    let leaderboard = order.into_iter().map(|i| entries[i].clone()).collect();
    Ok(SearchOutcome {
        best,
        best_index,
        leaderboard,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub label_rate: f64,
    pub test_fraction: f64,
    pub outer_val_fraction: f64,
    /// Number of independent label draws.
    pub n_splits: usize,
    pub arms: Vec<Arm>,
    /// Label rates of the sweep table; empty skips the sweep.
    pub sweep_rates: Vec<f64>,
    /// Arms run at every sweep rate.
    pub sweep_arms: Vec<Arm>,
    pub search: SearchConfig,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            label_rate: 0.05,
            test_fraction: 0.2,
            outer_val_fraction: 0.2,
            n_splits: 5,
            arms: Arm::ALL.to_vec(),
            sweep_rates: vec![0.02, 0.05, 0.1, 0.2],
            sweep_arms: vec![Arm::A4],
            search: SearchConfig::default(),
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.search.validate()?;
        if self.n_splits == 0 {
            return Err(Error::Config("n_splits must be at least 1".into()));
        }
        if self.arms.is_empty() {
            return Err(Error::Config("no arms requested".into()));
        }
        for &rate in std::iter::once(&self.label_rate).chain(&self.sweep_rates) {
            self.split_spec(rate, 0).validate()?;
        }
        Ok(())
    }

    fn split_spec(&self, label_rate: f64, split_index: usize) -> SplitSpec {
        SplitSpec {
            label_rate,
            test_fraction: self.test_fraction,
            outer_val_fraction: self.outer_val_fraction,
            seed: rng::derive(self.seed, "split", split_index as u64),
        }
    }
}

/// Test-fold outcome of one arm on one split.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmRun {
    pub arm: Arm,
    pub split_index: usize,
    pub label_rate: f64,
    pub policy: AugmentationPolicy,
    pub test: MetricsReport,
    /// Outer-objective score of the chosen policy (mean over its evaluations).
    pub search_score: f64,
    pub leaderboard: Vec<LeaderboardEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmSummary {
    pub arm: Arm,
    pub avg_er_mean: f64,
    pub avg_er_std: f64,
    pub ppv_mean: f64,
    pub ppv_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub seed: u64,
    pub runs: Vec<ArmRun>,
    pub by_arm: Vec<ArmSummary>,
    /// `(label_rate, summary)` rows.
    pub sweep: Vec<(f64, ArmSummary)>,
    pub policy: AugmentationPolicy,
}

fn summarize(arm: Arm, runs: &[&ArmRun]) -> ArmSummary {
    let er: Vec<f64> = runs.iter().map(|r| r.test.avg_er).collect();
    let ppv: Vec<f64> = runs.iter().map(|r| r.test.ppv).collect();
    let (avg_er_mean, avg_er_std) = mean_std(&er);
    let (ppv_mean, ppv_std) = mean_std(&ppv);
    ArmSummary {
        arm,
        avg_er_mean,
        avg_er_std,
        ppv_mean,
        ppv_std,
    }
}

/// A dataset with full ground truth, ready for repeated splits.
#[derive(Debug, Clone)]
pub struct LabeledGraph {
    pub hypergraph: Hypergraph,
    pub features: FeatureMatrix,
    pub truth: Vec<usize>,
    pub n_classes: usize,
}

/// Runs the requested arms on one split and reports test metrics.
pub fn run_split(
    data: &LabeledGraph,
    arms: &[Arm],
    label_rate: f64,
    split_index: usize,
    cfg: &ExperimentConfig,
    flow: &FlowParams,
    train_cfg: &TrainConfig,
) -> Result<Vec<ArmRun>> {
    let sp = split(&data.truth, data.n_classes, &cfg.split_spec(label_rate, split_index))?;
    let task = Task::from_split(data.hypergraph.clone(), data.features.clone(), &sp, &data.truth)?;
    let split_seed = rng::derive(cfg.seed, "split-run", split_index as u64);
    let pseudo = pseudo_labels_for(&task, cfg.search.pseudo_source, flow, train_cfg, split_seed)?;
    let settings = EvalSettings {
        flow,
        train: train_cfg,
        score_mode: cfg.search.score_mode,
        flow_placement: cfg.search.flow_placement,
    };
    // Final fits of every arm share one seed so arms differ only by policy.
    let final_seed = rng::derive(split_seed, "final", 0);
    let mut runs = Vec::with_capacity(arms.len());
    for &arm in arms {
        let (policy, search_score, leaderboard) = if arm == Arm::Baseline {
            let zero = AugmentationPolicy::zero();
            let c = evaluate_policy(&task, &pseudo, &zero, &settings, round_seed(split_seed, 0, 0))?;
            (zero, c.score, Vec::new())
        } else {
            let search = SearchConfig {
                seed: split_seed,
                ..cfg.search.clone()
            };
            let pool = sample_pool(&arm.actions(), search.budget, rng::derive(split_seed, "pool", 0));
            let out = outer_search(&task, &pseudo, &pool, &settings, &search)?;
            let score = out
                .leaderboard
                .iter()
                .find(|e| e.candidate == out.best_index)
                .map_or(0.0, |e| e.mean_score);
            (out.best, score, out.leaderboard)
        };
        let (params, _) = train_on_policy(&task, &pseudo, &policy, &settings, final_seed)?;
        let params = params.ok_or(Error::Divergence {
            epoch: train_cfg.epochs,
        })?;
        let pred = task.predict(&params)?;
        let (p, t): (Vec<usize>, Vec<usize>) = sp.test.iter().map(|&v| (pred[v], data.truth[v])).unzip();
        let test = metrics(&p, &t, data.n_classes)?;
        runs.push(ArmRun {
            arm,
            split_index,
            label_rate,
            policy,
            test,
            search_score,
            leaderboard,
        });
    }
    Ok(runs)
}

/// Repeats every arm over `n_splits` label draws, then runs the label-rate
/// sweep for the sweep arms.
pub fn run_experiment(
    data: &LabeledGraph,
    cfg: &ExperimentConfig,
    flow: &FlowParams,
    train_cfg: &TrainConfig,
) -> Result<ExperimentReport> {
    cfg.validate()?;
    let arms = ordered_arms(&cfg.arms);
    let mut runs = Vec::new();
    for s in 0..cfg.n_splits {
        runs.extend(run_split(data, &arms, cfg.label_rate, s, cfg, flow, train_cfg)?);
    }
    let by_arm = arms
        .iter()
        .map(|&a| summarize(a, &runs.iter().filter(|r| r.arm == a).collect::<Vec<_>>()))
        .collect();

    let sweep_arms = ordered_arms(&cfg.sweep_arms);
    let mut sweep = Vec::new();
    for &rate in &cfg.sweep_rates {
        let mut rate_runs = Vec::new();
        for s in 0..cfg.n_splits {
            if rate == cfg.label_rate {
                rate_runs.extend(
                    runs.iter()
                        .filter(|r| r.split_index == s && sweep_arms.contains(&r.arm))
                        .cloned(),
                );
                let missing: Vec<Arm> = sweep_arms.iter().copied().filter(|a| !arms.contains(a)).collect();
                rate_runs.extend(run_split(data, &missing, rate, s, cfg, flow, train_cfg)?);
            } else {
                rate_runs.extend(run_split(data, &sweep_arms, rate, s, cfg, flow, train_cfg)?);
            }
        }
        for &a in &sweep_arms {
            let these: Vec<&ArmRun> = rate_runs.iter().filter(|r| r.arm == a).collect();
            sweep.push((rate, summarize(a, &these)));
        }
    }

    let policy = runs
        .iter()
        .filter(|r| r.arm != Arm::Baseline)
        .fold(None::<&ArmRun>, |best, r| match best {
            Some(b) if b.search_score >= r.search_score => Some(b),
            _ => Some(r),
        })
        .map_or_else(AugmentationPolicy::zero, |r| r.policy.clone());
    Ok(ExperimentReport {
        seed: cfg.seed,
        runs,
        by_arm,
        sweep,
        policy,
    })
}

fn ordered_arms(arms: &[Arm]) -> Vec<Arm> {
    let set: BTreeSet<Arm> = arms.iter().copied().collect();
    set.into_iter().collect()
}

fn policy_columns(p: &AugmentationPolicy) -> String {
    let enabled: Vec<String> = p.enabled.iter().map(|a| a.to_string()).collect();
    format!(
        "{:.6},{:.6},{:.6},{},{:.6},{:.6},{}",
        p.node_removal_ratio,
        p.hyperedge_removal_ratio,
        p.subgraph_removal_ratio,
        p.walk_length,
        p.feature_perturb_ratio,
        p.delta,
        enabled.join(" ")
    )
}

const POLICY_HEADER: &str =
    "node_removal_ratio,hyperedge_removal_ratio,subgraph_removal_ratio,walk_length,feature_perturb_ratio,delta,enabled";

/// Leaderboard CSV of one or more searches.
pub fn write_leaderboard<W: Write>(
    seed: u64,
    rows: &[(usize, Arm, &[LeaderboardEntry])],
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "# seed={seed}")?;
    writeln!(
        out,
        "split,arm,rank,candidate,mean_score,n_evals,first_score,diverged,{POLICY_HEADER}"
    )?;
    for &(split_index, arm, entries) in rows {
        for (rank, e) in entries.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{:.6},{},{:.6},{},{}",
                split_index,
                arm,
                rank + 1,
                e.candidate,
                e.mean_score,
                e.scores.len(),
                e.first.score,
                e.diverged,
                policy_columns(&e.policy)
            )?;
        }
    }
    Ok(())
}

fn write_summary_row<W: Write>(out: &mut W, s: &ArmSummary) -> std::io::Result<()> {
    // Rates are reported as percentages.
    writeln!(
        out,
        "{},{:.4},{:.4},{:.4},{:.4}",
        s.arm,
        100.0 * s.avg_er_mean,
        100.0 * s.avg_er_std,
        100.0 * s.ppv_mean,
        100.0 * s.ppv_std
    )
}

pub fn write_metrics_by_arm<W: Write>(seed: u64, rows: &[ArmSummary], mut out: W) -> std::io::Result<()> {
    writeln!(out, "# seed={seed}")?;
    writeln!(out, "arm,avg_er_mean,avg_er_std,ppv_mean,ppv_std")?;
    for s in rows {
        write_summary_row(&mut out, s)?;
    }
    Ok(())
}

pub fn write_sweep<W: Write>(seed: u64, rows: &[(f64, ArmSummary)], mut out: W) -> std::io::Result<()> {
    writeln!(out, "# seed={seed}")?;
    writeln!(out, "label_rate,arm,avg_er_mean,avg_er_std,ppv_mean,ppv_std")?;
    for (rate, s) in rows {
        write!(out, "{rate},")?;
        write_summary_row(&mut out, s)?;
    }
    Ok(())
}

pub const LEADERBOARD_FILE: &str = "leaderboard.csv";
pub const METRICS_FILE: &str = "metrics_by_arm.csv";
pub const SWEEP_FILE: &str = "label_rate_sweep.csv";
pub const POLICY_FILE: &str = "policy.toml";

/// Writes the report bundle into `dir`.
pub fn write_report(dir: &Path, report: &ExperimentReport) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let emit = |name: &str, f: &dyn Fn(&mut Vec<u8>) -> std::io::Result<()>| -> Result<()> {
        let path = dir.join(name);
        let mut buf = Vec::new();
        f(&mut buf).map_err(|e| Error::io(&path, e))?;
        fs::write(&path, buf).map_err(|e| Error::io(&path, e))
    };
    let boards: Vec<(usize, Arm, &[LeaderboardEntry])> = report
        .runs
        .iter()
        .filter(|r| !r.leaderboard.is_empty())
        .map(|r| (r.split_index, r.arm, r.leaderboard.as_slice()))
        .collect();
    emit(LEADERBOARD_FILE, &|b| write_leaderboard(report.seed, &boards, b))?;
    emit(METRICS_FILE, &|b| write_metrics_by_arm(report.seed, &report.by_arm, b))?;
    emit(SWEEP_FILE, &|b| write_sweep(report.seed, &report.sweep, b))?;
    emit(POLICY_FILE, &|b| {
        writeln!(b, "# seed={}", report.seed)?;
        b.write_all(report.policy.to_toml().as_bytes())
    })?;
    Ok(())
}
