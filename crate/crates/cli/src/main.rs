//! Command-line driver: dataset synthesis, hypergraph construction, the
//! pseudo-labeling flow, inner training, policy search and experiments.

use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use hyperbilevel::augmentation::apply_policy;
use hyperbilevel::bilevel::{
    flow_pseudo_labels, outer_search, run_experiment, sample_pool, write_leaderboard, write_report, Arm, EvalSettings,
    LabeledGraph, Task, LEADERBOARD_FILE, METRICS_FILE, POLICY_FILE, SWEEP_FILE,
};
use hyperbilevel::classifier::{hg_conv_operator_with_self_loops, train, write_loss_trace, Targets};
use hyperbilevel::config::RunConfig;
use hyperbilevel::construction::build_hypergraph;
use hyperbilevel::data::{self, read_labels_csv, split, stack_features, write_labels_csv, SyntheticSpec};
use hyperbilevel::rng;
use hyperbilevel::tvflow::{extract_pseudo_labels, run_flow_traced, uncertainty_tau, EntropyNorm};
use hyperbilevel::{AugmentationPolicy, Hypergraph, LabelState};

#[derive(Parser)]
#[command(
    name = "hyperbilevel",
    version,
    about = "Bilevel semi-supervised hypergraph learning"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Run configuration (TOML); flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Concurrent policy evaluations.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset (manifest, feature CSVs, labels).
    Synth {
        /// Synthetic dataset spec (TOML).
        #[arg(long, conflicts_with = "preset")]
        spec: Option<PathBuf>,
        /// Built-in spec: `planted` or `moderate`.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the multi-modal hypergraph of a manifest.
    Build {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Neighbourhood size for every modality.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Run the total-variation flow and write pseudo-labels.
    Flow {
        #[arg(long)]
        hypergraph: PathBuf,
        /// Labeled subset, `subject_index,class_label`.
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Per-iteration CSV `iter,channel,tv_value,residual,tau`.
        #[arg(long)]
        diagnostics: Option<PathBuf>,
        /// Ground truth for reporting pseudo-label accuracy.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Number of classes (default: largest label + 1).
        #[arg(long)]
        classes: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Train the classifier on flow pseudo-labels, optionally on an augmented view.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        /// Labeled subset; defaults to a split of the manifest's labels.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Augmentation policy (TOML).
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Weight checkpoint.
        #[arg(long)]
        out: PathBuf,
        /// Loss trace CSV `epoch,lr,loss_lab,loss_unc,total`.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Predicted class per subject.
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Search augmentation policies on one label draw.
    Search {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Arm to search (A0..A4).
        #[arg(long, default_value = "A4")]
        arm: String,
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Compare arms over repeated label draws and write the report bundle.
    Experiment {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated arms; the baseline is always included.
        #[arg(long, value_delimiter = ',')]
        arms: Option<Vec<String>>,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        splits: Option<usize>,
        #[arg(long)]
        label_rate: Option<f64>,
        /// Comma-separated sweep rates; pass an empty value to skip the sweep.
        #[arg(long, value_delimiter = ',')]
        sweep_rates: Option<Vec<String>>,
    },
    /// Print a report bundle.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}

fn load_config(global: &Global) -> Result<RunConfig> {
    let mut cfg = match &global.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = global.seed {
        cfg.seed = s;
    }
    if let Some(w) = global.workers {
        cfg.experiment.search.workers = w;
    }
    cfg.propagate_seed();
    Ok(cfg)
}

fn write_with(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut buf = Vec::new();
    f(&mut buf)?;
    fs::write(path, buf).with_context(|| format!("writing {}", path.display()))
}

fn read_hypergraph(path: &Path) -> Result<Hypergraph> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Hypergraph::read_text(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(&cli.global)?;
    match cli.command {
        Command::Synth { spec, preset, out } => {
            let mut spec = match (spec, preset.as_deref()) {
                (Some(p), _) => {
                    let text = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                    SyntheticSpec::from_toml(&text).with_context(|| format!("parsing {}", p.display()))?
                }
                (None, Some("planted")) => SyntheticSpec::planted(cfg.seed),
                (None, Some("moderate")) => SyntheticSpec::moderate(cfg.seed),
                (None, Some(other)) => bail!("unknown preset {other:?} (expected planted or moderate)"),
                (None, None) => bail!("one of --spec or --preset is required"),
            };
            if let Some(s) = cli.global.seed {
                spec.seed = s;
            }
            let manifest = data::synthesize_to(&out, &spec)?;
            println!(
                "wrote {} (N = {}, seed = {})",
                manifest.display(),
                spec.n_subjects,
                spec.seed
            );
        }
        Command::Build { manifest, out, k } => {
            if let Some(k) = k {
                cfg.construction.k = Some(k);
            }
            cfg.validate()?;
            let ds = data::load(&manifest)?;
            let settings: Vec<_> = ds
                .block_settings
                .iter()
                .map(|&(k, sim)| (cfg.construction.k.unwrap_or(k), sim))
                .collect();
            let h = build_hypergraph(&ds.modalities, &settings)?;
            write_with(&out, |b| {
                writeln!(b, "# seed={}", cfg.seed)?;
                h.write_text(b)
            })?;
            println!("n = {}", h.n_vertices());
            println!("m = {}", h.n_edges());
            let modality = h.edge_modality();
            for (i, m) in ds.modalities.iter().enumerate() {
                let count = modality.iter().filter(|&&x| x as usize == i).count();
                println!("modality {} ({}): {} edges", i, m.name, count);
            }
        }
        Command::Flow {
            hypergraph,
            labels,
            out,
            diagnostics,
            truth,
            classes,
            dt,
            max_iters,
            tol,
        } => {
            if let Some(v) = dt {
                cfg.flow.dt = v;
            }
            if let Some(v) = max_iters {
                cfg.flow.max_iters = v;
            }
            if let Some(v) = tol {
                cfg.flow.tol = v;
            }
            cfg.validate()?;
            let params = cfg.flow.params();
            let h = read_hypergraph(&hypergraph)?;
            let pairs = read_labels_csv(&labels)?;
            let n_classes = classes
                .or_else(|| pairs.iter().map(|&(_, c)| c + 1).max())
                .context("labels file is empty")?;
            let state = LabelState::new(h.n_vertices(), n_classes, pairs)?;
            let mut diag = Vec::new();
            if diagnostics.is_some() {
                writeln!(diag, "# seed={}", cfg.seed)?;
                writeln!(diag, "iter,channel,tv_value,residual,tau")?;
            }
            let record = diagnostics.is_some();
            let outcome = run_flow_traced(&h, &state, &params, |r| {
                if record {
                    let _ = writeln!(
                        diag,
                        "{},{},{:e},{:e},{:.6}",
                        r.iter, r.channel, r.tv_value, r.residual, r.tau
                    );
                }
            })?;
            if let Some(p) = &diagnostics {
                write_with(p, |b| b.write_all(&diag))?;
            }
            let pseudo = extract_pseudo_labels(outcome.u.view());
            let unlabeled = state.unlabeled();
            let tau = uncertainty_tau(outcome.u.view(), &unlabeled, EntropyNorm::Classes, state.n_labeled());
            let rows: Vec<(usize, usize)> = pseudo.iter().copied().enumerate().collect();
            write_with(&out, |b| write_labels_csv(&rows, cfg.seed, b))?;
            println!("iterations = {}", outcome.iterations);
            println!("converged = {}", outcome.converged);
            println!("tau = {tau:.6}");
            if let Some(t) = truth {
                let truth = read_labels_csv(&t)?;
                let known: std::collections::BTreeMap<usize, usize> = truth.into_iter().collect();
                let scored: Vec<bool> = unlabeled
                    .iter()
                    .filter_map(|v| known.get(v).map(|&c| pseudo[*v] == c))
                    .collect();
                if scored.is_empty() {
                    println!("pseudo_label_accuracy = n/a");
                } else {
                    let acc = scored.iter().filter(|&&b| b).count() as f64 / scored.len() as f64;
                    println!("pseudo_label_accuracy = {acc:.6}");
                }
            }
        }
        Command::Train {
            manifest,
            labels,
            policy,
            out,
            trace,
            predictions,
            epochs,
        } => {
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            cfg.validate()?;
            let (h, x, ds) = load_graph(&manifest, &cfg)?;
            let n_classes = ds.class_count().context("cannot infer the number of classes")?;
            let state = match labels {
                Some(p) => LabelState::new(h.n_vertices(), n_classes, read_labels_csv(&p)?)?,
                None => {
                    let truth = ds.full_labels()?;
                    let spec = data::SplitSpec {
                        label_rate: cfg.experiment.label_rate,
                        test_fraction: cfg.experiment.test_fraction,
                        outer_val_fraction: 0.0,
                        seed: rng::derive(cfg.seed, "split", 0),
                    };
                    split(&truth, n_classes, &spec)?.labels
                }
            };
            let pseudo = flow_pseudo_labels(&h, &state, &cfg.flow.params())?;
            let policy = match policy {
                Some(p) => AugmentationPolicy::from_toml(
                    &fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?,
                )?,
                None => AugmentationPolicy::zero(),
            };
            let view = apply_policy(&h, &x, &policy, &state.mask(), &mut rng::stream(cfg.seed, "augment", 0))?;
            let view_labels = state.restrict(&view.kept_vertices);
            let pseudo_pairs: Vec<(usize, usize)> = view_labels
                .unlabeled()
                .into_iter()
                .map(|i| (i, pseudo.labels[view.kept_vertices[i]]))
                .collect();
            let targets = Targets {
                n_classes,
                labeled: view_labels.labeled(),
                pseudo: &pseudo_pairs,
                tau: pseudo.tau,
            };
            let theta = hg_conv_operator_with_self_loops(&view.hypergraph);
            let outcome = train(
                theta.view(),
                &view.features,
                &targets,
                &cfg.train.config(cfg.seed),
                None,
            )?;
            write_with(&out, |b| {
                writeln!(b, "# seed={}", cfg.seed)?;
                outcome.params.write_text(b)
            })?;
            if let Some(p) = trace {
                write_with(&p, |b| {
                    writeln!(b, "# seed={}", cfg.seed)?;
                    write_loss_trace(&outcome.trace, b)
                })?;
            }
            let full = Task::new(h, x, state, Vec::new())?;
            let pred = full.predict(&outcome.params)?;
            if let Some(p) = predictions {
                let rows: Vec<(usize, usize)> = pred.iter().copied().enumerate().collect();
                write_with(&p, |b| write_labels_csv(&rows, cfg.seed, b))?;
            }
            let last = outcome.trace.last().map(|r| r.loss.total).unwrap_or(f64::NAN);
            println!("tau = {:.6}", pseudo.tau);
            println!("final_loss = {last:.6}");
            if let Ok(truth) = ds.full_labels() {
                let unl = full.labels.unlabeled();
                let acc = unl.iter().filter(|&&v| pred[v] == truth[v]).count() as f64 / unl.len().max(1) as f64;
                println!("unlabeled_accuracy = {acc:.6}");
            }
        }
        Command::Search {
            manifest,
            out,
            arm,
            budget,
        } => {
            if let Some(b) = budget {
                cfg.experiment.search.budget = b;
            }
            cfg.validate()?;
            let arm: Arm = arm.parse()?;
            if arm == Arm::Baseline {
                bail!("the baseline arm has nothing to search");
            }
            let (h, x, ds) = load_graph(&manifest, &cfg)?;
            let truth = ds.full_labels()?;
            let n_classes = ds.class_count().context("cannot infer the number of classes")?;
            let e = &cfg.experiment;
            let sp = split(
                &truth,
                n_classes,
                &data::SplitSpec {
                    label_rate: e.label_rate,
                    test_fraction: e.test_fraction,
                    outer_val_fraction: e.outer_val_fraction,
                    seed: rng::derive(cfg.seed, "split", 0),
                },
            )?;
            let task = Task::from_split(h, x, &sp, &truth)?;
            let flow = cfg.flow.params();
            let train_cfg = cfg.train.config(cfg.seed);
            let pseudo =
                hyperbilevel::bilevel::pseudo_labels_for(&task, e.search.pseudo_source, &flow, &train_cfg, cfg.seed)?;
            let settings = EvalSettings {
                flow: &flow,
                train: &train_cfg,
                score_mode: e.search.score_mode,
                flow_placement: e.search.flow_placement,
            };
            let pool = sample_pool(&arm.actions(), e.search.budget, rng::derive(cfg.seed, "pool", 0));
            let outcome = outer_search(&task, &pseudo, &pool, &settings, &e.search)?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            write_with(&out.join(LEADERBOARD_FILE), |b| {
                write_leaderboard(cfg.seed, &[(0, arm, &outcome.leaderboard)], b)
            })?;
            write_with(&out.join(POLICY_FILE), |b| {
                writeln!(b, "# seed={}", cfg.seed)?;
                b.write_all(outcome.best.to_toml().as_bytes())
            })?;
            println!("tau = {:.6}", pseudo.tau);
            println!("candidates = {}", outcome.leaderboard.len());
            println!("best candidate = {}", outcome.best_index);
            print!("{}", outcome.best.to_toml());
        }
        Command::Experiment {
            manifest,
            out,
            arms,
            budget,
            splits,
            label_rate,
            sweep_rates,
        } => {
            let e = &mut cfg.experiment;
            if let Some(list) = arms {
                let mut parsed = vec![Arm::Baseline];
                for a in list.iter().filter(|s| !s.trim().is_empty()) {
                    parsed.push(a.parse()?);
                }
                e.arms = parsed;
                e.sweep_arms.retain(|a| e.arms.contains(a));
            }
            if let Some(b) = budget {
                e.search.budget = b;
            }
            if let Some(s) = splits {
                e.n_splits = s;
            }
            if let Some(r) = label_rate {
                e.label_rate = r;
            }
            if let Some(rates) = sweep_rates {
                e.sweep_rates = rates
                    .iter()
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| s.trim().parse::<f64>().with_context(|| format!("bad sweep rate {s:?}")))
                    .collect::<Result<_>>()?;
            }
            cfg.validate()?;
            let (h, x, ds) = load_graph(&manifest, &cfg)?;
            let truth = ds.full_labels()?;
            let n_classes = ds.class_count().context("cannot infer the number of classes")?;
            let graph = LabeledGraph {
                hypergraph: h,
                features: x,
                truth,
                n_classes,
            };
            let report = run_experiment(&graph, &cfg.experiment, &cfg.flow.params(), &cfg.train.config(cfg.seed))?;
            write_report(&out, &report)?;
            print_table(&fs::read_to_string(out.join(METRICS_FILE))?);
        }
        Command::Report { dir } => {
            for name in [LEADERBOARD_FILE, METRICS_FILE, SWEEP_FILE, POLICY_FILE] {
                if !dir.join(name).is_file() {
                    bail!("{}: missing {name}", dir.display());
                }
            }
            let read = |name: &str| {
                let p = dir.join(name);
                fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))
            };
            println!("metrics by arm (percent):");
            print_table(&read(METRICS_FILE)?);
            println!();
            println!("label-rate sweep (percent):");
            print_table(&read(SWEEP_FILE)?);
            println!();
            println!("policy:");
            let policy = read(POLICY_FILE)?;
            AugmentationPolicy::from_toml(&policy).context("policy.toml")?;
            print!("{policy}");
        }
    }
    Ok(())
}

fn load_graph(manifest: &Path, cfg: &RunConfig) -> Result<(Hypergraph, hyperbilevel::FeatureMatrix, data::Dataset)> {
    let ds = data::load(manifest)?;
    let settings: Vec<_> = ds
        .block_settings
        .iter()
        .map(|&(k, sim)| (cfg.construction.k.unwrap_or(k), sim))
        .collect();
    let h = build_hypergraph(&ds.modalities, &settings)?;
    let x = stack_features(&ds.modalities)?;
    Ok((h, x, ds))
}

/// Prints a CSV (comment lines skipped) as aligned columns.
fn print_table(csv_text: &str) {
    let rows: Vec<Vec<&str>> = csv_text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| l.split(',').collect())
        .collect();
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|j| rows.iter().filter_map(|r| r.get(j)).map(|c| c.len()).max().unwrap_or(0))
        .collect();
    for r in rows {
        let cells: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(j, c)| format!("{c:>w$}", w = widths[j]))
            .collect();
        println!("{}", cells.join("  "));
    }
}
