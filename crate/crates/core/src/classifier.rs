//! Two-layer hypergraph convolution classifier with hand-written gradients.
//!
//! ```text
//! Theta  = Dv^-1/2 H W De^-1 H^T Dv^-1/2
//! logits = Theta relu(Theta X W1 + b1) W2 + b2
//! ```
//!
//! `H` is the binary membership matrix, `W` the diagonal edge weights and
//! `Dv`, `De` the vertex and edge degrees. Training minimizes mean
//! cross-entropy on labeled rows plus `tau` times mean cross-entropy on
//! pseudo-labeled rows, by full-batch gradient descent with cosine-annealed
//! learning rate and L2 weight decay on the weight matrices.

use std::io::{BufRead, Write};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::hypergraph::{degrees, Hypergraph};
use crate::FeatureMatrix;

/// Dense normalized convolution operator. Fails on zero-degree vertices.
pub fn hg_conv_operator(h: &Hypergraph) -> Result<Array2<f64>> {
    let deg = degrees(h);
    if let Some(v) = deg.vertex_degree.iter().position(|&d| d <= 0.0) {
        return Err(Error::ZeroDegree(v));
    }
    Ok(conv_from_degrees(h, &deg.vertex_degree))
}

/// Like [`hg_conv_operator`], but a vertex with no incident edge gets a
/// self-loop (`Theta_aa = 1`), i.e. it is treated as its own singleton edge.
/// Views produced by augmentation can contain such vertices.
pub fn hg_conv_operator_with_self_loops(h: &Hypergraph) -> Array2<f64> {
    let deg = degrees(h).vertex_degree;
    let mut theta = conv_from_degrees(h, &deg);
    for (v, &d) in deg.iter().enumerate() {
        if d <= 0.0 {
            theta[[v, v]] = 1.0;
        }
    }
    theta
}

fn conv_from_degrees(h: &Hypergraph, vertex_degree: &[f64]) -> Array2<f64> {
    let n = h.n_vertices();
    let inv_sqrt: Vec<f64> = vertex_degree
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();
    let mut theta = Array2::zeros((n, n));
    for edge in h.edges() {
        let scale = edge.weight / edge.len() as f64;
        let members: Vec<usize> = edge.vertices().collect();
        for &a in &members {
            let sa = scale * inv_sqrt[a];
            for &b in &members {
                theta[[a, b]] += sa * inv_sqrt[b];
            }
        }
    }
    theta
}

/// The trainable parameters `omega`.
#[derive(Debug, Clone, PartialEq)]
pub struct HgnnParams {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl HgnnParams {
    pub fn zeros(d_in: usize, hidden: usize, n_classes: usize) -> Self {
        HgnnParams {
            w1: Array2::zeros((d_in, hidden)),
            b1: Array1::zeros(hidden),
            w2: Array2::zeros((hidden, n_classes)),
            b2: Array1::zeros(n_classes),
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(d_in: usize, hidden: usize, n_classes: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(d_in, hidden, n_classes);
        let a1 = (6.0 / (d_in + hidden) as f64).sqrt();
        p.w1.mapv_inplace(|_| rng.random_range(-a1..a1));
        let a2 = (6.0 / (hidden + n_classes) as f64).sqrt();
        p.w2.mapv_inplace(|_| rng.random_range(-a2..a2));
        p
    }

    pub fn d_in(&self) -> usize {
        self.w1.nrows()
    }

    pub fn hidden(&self) -> usize {
        self.w1.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.w2.ncols()
    }

    fn is_finite(&self) -> bool {
        self.w1
            .iter()
            .chain(&self.b1)
            .chain(&self.w2)
            .chain(&self.b2)
            .all(|x| x.is_finite())
    }

    fn check_shapes(&self) -> Result<()> {
        if self.b1.len() != self.hidden() || self.w2.nrows() != self.hidden() || self.b2.len() != self.n_classes() {
            return Err(Error::Shape("inconsistent parameter shapes".into()));
        }
        Ok(())
    }

    /// Text checkpoint: a `hgnn d_in hidden classes` header followed by the
    /// rows of `w1`, `b1`, `w2`, `b2`, values with 17 significant digits.
    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "hgnn {} {} {}", self.d_in(), self.hidden(), self.n_classes())?;
        let line = |out: &mut W, xs: &mut dyn Iterator<Item = &f64>| -> std::io::Result<()> {
            let cells: Vec<String> = xs.map(|x| format!("{x:.16e}")).collect();
            writeln!(out, "{}", cells.join(" "))
        };
        for row in self.w1.rows() {
            line(&mut out, &mut row.iter())?;
        }
        line(&mut out, &mut self.b1.iter())?;
        for row in self.w2.rows() {
            line(&mut out, &mut row.iter())?;
        }
        line(&mut out, &mut self.b2.iter())
    }

    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let src = "<checkpoint>";
        let mut lines = input.lines();
        let mut next_line = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| Error::parse(src, "unexpected end of checkpoint"))?
                .map_err(|e| Error::io(src, e))
        };
        let header = next_line()?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .skip(1)
            .map(|t| t.parse().map_err(|_| Error::parse(src, "bad header")))
            .collect::<Result<_>>()?;
        if !header.starts_with("hgnn ") || dims.len() != 3 {
            return Err(Error::parse(src, "expected `hgnn d_in hidden classes` header"));
        }
        let (d_in, hidden, classes) = (dims[0], dims[1], dims[2]);
        let mut row = |len: usize| -> Result<Vec<f64>> {
            let vals: Vec<f64> = next_line()?
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| Error::parse(src, format!("bad value {t:?}"))))
                .collect::<Result<_>>()?;
            if vals.len() != len {
                return Err(Error::parse(src, format!("expected {len} values, got {}", vals.len())));
            }
            Ok(vals)
        };
        let mut p = HgnnParams::zeros(d_in, hidden, classes);
        for i in 0..d_in {
            p.w1.row_mut(i).assign(&Array1::from(row(hidden)?));
        }
        p.b1 = Array1::from(row(hidden)?);
        for i in 0..hidden {
            p.w2.row_mut(i).assign(&Array1::from(row(classes)?));
        }
        p.b2 = Array1::from(row(classes)?);
        Ok(p)
    }
}

/// Intermediate values of a forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct Forward {
    /// Pre-activation of the hidden layer.
    pub z1: Array2<f64>,
    pub hidden: Array2<f64>,
    pub logits: Array2<f64>,
}

/// Gradients with the same layout as [`HgnnParams`].
pub type Gradients = HgnnParams;

/// Forward pass given a precomputed `Theta X`.
pub fn forward_propagated(theta: ArrayView2<f64>, propagated: &Array2<f64>, p: &HgnnParams) -> Result<Forward> {
    p.check_shapes()?;
    if propagated.ncols() != p.d_in() {
        return Err(Error::Shape(format!(
            "features have {} columns, w1 expects {}",
            propagated.ncols(),
            p.d_in()
        )));
    }
    let z1 = propagated.dot(&p.w1) + &p.b1;
    let hidden = z1.mapv(|x| x.max(0.0));
    let logits = theta.dot(&hidden.dot(&p.w2)) + &p.b2;
    Ok(Forward { z1, hidden, logits })
}

pub fn forward(theta: ArrayView2<f64>, x: &FeatureMatrix, p: &HgnnParams) -> Result<Forward> {
    if theta.nrows() != x.nrows() || theta.ncols() != x.nrows() {
        return Err(Error::Shape(format!(
            "operator is {}x{} but there are {} feature rows",
            theta.nrows(),
            theta.ncols(),
            x.nrows()
        )));
    }
    forward_propagated(theta, &theta.dot(x), p)
}

/// Convenience: logits for hypergraph `h` and features `x`.
pub fn predict_logits(h: &Hypergraph, x: &FeatureMatrix, p: &HgnnParams) -> Result<Array2<f64>> {
    let theta = hg_conv_operator_with_self_loops(h);
    Ok(forward(theta.view(), x, p)?.logits)
}

/// Reverse pass for `d loss / d logits = g`; `propagated` is `Theta X`.
pub fn backward(
    theta: ArrayView2<f64>,
    propagated: &Array2<f64>,
    fwd: &Forward,
    p: &HgnnParams,
    g: &Array2<f64>,
) -> Gradients {
    let b2 = g.sum_axis(Axis(0));
    // Theta is symmetric, so Theta^T g = Theta g.
    let tg = theta.dot(g);
    let w2 = fwd.hidden.t().dot(&tg);
    let mut dz1 = tg.dot(&p.w2.t());
    dz1.zip_mut_with(&fwd.z1, |d, &z| {
        if z <= 0.0 {
            *d = 0.0;
        }
    });
    let b1 = dz1.sum_axis(Axis(0));
    let w1 = propagated.t().dot(&dz1);
    HgnnParams { w1, b1, w2, b2 }
}

pub fn softmax_rows(logits: ArrayView2<f64>) -> Array2<f64> {
    let mut p = logits.to_owned();
    for mut row in p.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        row.mapv_inplace(|x| (x - max).exp());
        let s = row.sum();
        row /= s;
    }
    p
}

/// Value of the two-part loss and its parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue {
    pub labeled: f64,
    pub unlabeled: f64,
    pub total: f64,
}

/// `mean CE(labeled) + tau * mean CE(pseudo-labeled)` and its exact
/// gradient with respect to the logits. Targets are `(row, class)` pairs.
pub fn loss(
    logits: ArrayView2<f64>,
    labeled: &[(usize, usize)],
    pseudo: &[(usize, usize)],
    tau: f64,
) -> Result<(LossValue, Array2<f64>)> {
    if labeled.is_empty() {
        return Err(Error::EmptyLabeledSet);
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::Config(format!("tau = {tau} outside [0, 1]")));
    }
    let probs = softmax_rows(logits);
    let mut grad = Array2::zeros(logits.raw_dim());
    let mut part = |targets: &[(usize, usize)], weight: f64| -> f64 {
        if targets.is_empty() {
            return 0.0;
        }
        let scale = weight / targets.len() as f64;
        let mut ce = 0.0;
        for &(r, c) in targets {
            let row = logits.row(r);
            let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
            let lse = max + row.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
            ce += lse - row[c];
            if scale != 0.0 {
                let mut gr = grad.row_mut(r);
                gr.scaled_add(scale, &probs.row(r));
                gr[c] -= scale;
            }
        }
        ce / targets.len() as f64
    };
    let labeled_ce = part(labeled, 1.0);
    let unlabeled_ce = part(pseudo, tau);
    Ok((
        LossValue {
            labeled: labeled_ce,
            unlabeled: unlabeled_ce,
            total: labeled_ce + tau * unlabeled_ce,
        },
        grad,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub hidden: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.05,
            weight_decay: 2e-4,
            epochs: 150,
            hidden: 64,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::Config(format!(
                "weight_decay must be >= 0, got {}",
                self.weight_decay
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.hidden == 0 {
            return Err(Error::Config("hidden width must be at least 1".into()));
        }
        Ok(())
    }

    /// Cosine-annealed rate `lr0 * (1 + cos(pi e / epochs)) / 2` at epoch `e`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr * 0.5 * (1.0 + (std::f64::consts::PI * epoch as f64 / self.epochs as f64).cos())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub loss: LossValue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: HgnnParams,
    pub trace: Vec<EpochRecord>,
}

/// Supervision for one training run, in the row indexing of the features.
#[derive(Debug, Clone, Copy)]
pub struct Targets<'a> {
    pub n_classes: usize,
    pub labeled: &'a [(usize, usize)],
    pub pseudo: &'a [(usize, usize)],
    pub tau: f64,
}

/// Full-batch training on a fixed operator and feature matrix. `init` seeds
/// the weights when given; otherwise they are drawn from `cfg.seed`.
pub fn train(
    theta: ArrayView2<f64>,
    x: &FeatureMatrix,
    targets: &Targets,
    cfg: &TrainConfig,
    init: Option<HgnnParams>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut params = match init {
        Some(p) => p,
        None => HgnnParams::init(
            x.ncols(),
            cfg.hidden,
            targets.n_classes,
            &mut crate::rng::stream(cfg.seed, "weights", 0),
        ),
    };
    if theta.nrows() != x.nrows() {
        return Err(Error::Shape(format!(
            "operator has {} rows, features {}",
            theta.nrows(),
            x.nrows()
        )));
    }
    let propagated = theta.dot(x);
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let fwd = forward_propagated(theta, &propagated, &params)?;
        let (value, g) = loss(fwd.logits.view(), targets.labeled, targets.pseudo, targets.tau)?;
        if !value.total.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        let grads = backward(theta, &propagated, &fwd, &params, &g);
        let lr = cfg.lr_at(epoch);
        let wd = cfg.weight_decay;
        params.w1.zip_mut_with(&grads.w1, |w, &gw| *w -= lr * (gw + wd * *w));
        params.w2.zip_mut_with(&grads.w2, |w, &gw| *w -= lr * (gw + wd * *w));
        params.b1.scaled_add(-lr, &grads.b1);
        params.b2.scaled_add(-lr, &grads.b2);
        if !params.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        trace.push(EpochRecord { epoch, lr, loss: value });
    }
    Ok(TrainOutcome { params, trace })
}

/// Trains `f_omega` on an augmented view. `labeled` and `pseudo` are given in
/// view indices.
pub fn train_inner(
    view: &crate::augmentation::AugmentedView,
    targets: &Targets,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    let theta = hg_conv_operator_with_self_loops(&view.hypergraph);
    train(theta.view(), &view.features, targets, cfg, None)
}

pub fn argmax_rows(m: ArrayView2<f64>) -> Vec<usize> {
    crate::tvflow::extract_pseudo_labels(m)
}

/// Writes the loss trace as CSV `epoch,lr,loss_lab,loss_unc,total`.
pub fn write_loss_trace<W: Write>(trace: &[EpochRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "epoch,lr,loss_lab,loss_unc,total")?;
    for r in trace {
        writeln!(
            out,
            "{},{:e},{:e},{:e},{:e}",
            r.epoch, r.lr, r.loss.labeled, r.loss.unlabeled, r.loss.total
        )?;
    }
    Ok(())
}
