//! Synthetic datasets with planted classes, CSV/manifest ingestion, and
//! stratified labeled/unlabeled/test/outer-validation splits.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::{concatenate, Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::construction::{ModalityData, ModalityKind, SimilarityFn};
use crate::error::{Error, Result};
use crate::labels::LabelState;
use crate::rng;
use crate::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModalitySpec {
    pub name: String,
    pub kind: ModalityKind,
    pub dim: usize,
    /// Pairwise distance between class means for embeddings. For phenotypes
    /// a subject shows its class category with probability `s / (s + noise)`
    /// and a uniform category otherwise.
    pub cluster_separation: f64,
    pub noise_std: f64,
    /// Neighbourhood size written into exported manifests.
    #[serde(default = "default_k")]
    pub k: usize,
}

fn default_k() -> usize {
    25
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_subjects: usize,
    #[serde(default = "default_classes")]
    pub n_classes: usize,
    pub seed: u64,
    #[serde(rename = "modality")]
    pub modalities: Vec<ModalitySpec>,
}

fn default_classes() -> usize {
    4
}

impl SyntheticSpec {
    /// Two 64-d imaging modalities and two 4-category phenotypes, N = 500.
    pub fn with_separation(seed: u64, imaging_sep: f64, imaging_noise: f64, pheno_sep: f64, pheno_noise: f64) -> Self {
        let imaging = |name: &str| ModalitySpec {
            name: name.into(),
            kind: ModalityKind::ImagingFeatures,
            dim: 64,
            cluster_separation: imaging_sep,
            noise_std: imaging_noise,
            k: 25,
        };
        let pheno = |name: &str| ModalitySpec {
            name: name.into(),
            kind: ModalityKind::Phenotype,
            dim: 4,
            cluster_separation: pheno_sep,
            noise_std: pheno_noise,
            k: 25,
        };
        SyntheticSpec {
            n_subjects: 500,
            n_classes: 4,
            seed,
            modalities: vec![imaging("mri"), imaging("pet"), pheno("demographics"), pheno("apoe")],
        }
    }

    /// Well separated classes: kNN hyperedges are almost entirely class-pure.
    pub fn planted(seed: u64) -> Self {
        Self::with_separation(seed, 10.0, 1.0, 10.0, 0.01)
    }

    /// Overlapping classes where labels alone leave room for improvement.
    pub fn moderate(seed: u64) -> Self {
        Self::with_separation(seed, 4.0, 1.0, 0.1, 0.1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 {
            return Err(Error::Config(format!(
                "need at least 2 classes, got {}",
                self.n_classes
            )));
        }
        if self.n_subjects < self.n_classes {
            return Err(Error::Config(format!(
                "{} subjects cannot cover {} classes",
                self.n_subjects, self.n_classes
            )));
        }
        if self.modalities.is_empty() {
            return Err(Error::Config("no modalities".into()));
        }
        for m in &self.modalities {
            if !(m.cluster_separation >= 0.0 && m.cluster_separation.is_finite()) {
                return Err(Error::Config(format!("modality {}: separation must be >= 0", m.name)));
            }
            if !(m.noise_std >= 0.0 && m.noise_std.is_finite()) {
                return Err(Error::Config(format!("modality {}: noise_std must be >= 0", m.name)));
            }
            if m.dim == 0 {
                return Err(Error::Config(format!("modality {}: dim must be positive", m.name)));
            }
            if m.kind == ModalityKind::ImagingFeatures && m.dim < self.n_classes {
                return Err(Error::Config(format!(
                    "modality {}: dim {} cannot hold {} orthogonal class means",
                    m.name, m.dim, self.n_classes
                )));
            }
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: SyntheticSpec = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }
}

/// Draws modality features and the ground-truth labels. Classes are
/// balanced (sizes differ by at most one) and shuffled over subjects.
pub fn generate(spec: &SyntheticSpec) -> Result<(Vec<ModalityData>, Vec<usize>)> {
    spec.validate()?;
    let n = spec.n_subjects;
    let l = spec.n_classes;
    let mut labels: Vec<usize> = (0..n).map(|i| i % l).collect();
    labels.shuffle(&mut rng::stream(spec.seed, "labels", 0));

    let mut modalities = Vec::with_capacity(spec.modalities.len());
    for (mi, m) in spec.modalities.iter().enumerate() {
        let mut r = rng::stream(spec.seed, "modality", mi as u64);
        let noise = Normal::new(0.0, m.noise_std).expect("noise std validated");
        let mut x = Array2::<f64>::zeros((n, m.dim));
        match m.kind {
            ModalityKind::ImagingFeatures => {
                // Scaled simplex vertices: |mu_a - mu_b| = separation.
                let scale = m.cluster_separation / std::f64::consts::SQRT_2;
                for (i, &c) in labels.iter().enumerate() {
                    for j in 0..m.dim {
                        let mean = if j == c { scale } else { 0.0 };
                        x[[i, j]] = mean + noise.sample(&mut r);
                    }
                }
            }
            ModalityKind::Phenotype => {
                let total = m.cluster_separation + m.noise_std;
                let p_class = if total > 0.0 { m.cluster_separation / total } else { 0.0 };
                for (i, &c) in labels.iter().enumerate() {
                    let category = if r.random::<f64>() < p_class {
                        c % m.dim
                    } else {
                        r.random_range(0..m.dim)
                    };
                    for j in 0..m.dim {
                        let hot = if j == category { 1.0 } else { 0.0 };
                        x[[i, j]] = hot + noise.sample(&mut r);
                    }
                }
            }
        }
        modalities.push(ModalityData::new(m.name.clone(), m.kind, x)?);
    }
    Ok((modalities, labels))
}

/// Column-wise concatenation of all modalities, each column standardized to
/// zero mean and unit population variance (constant columns become zero).
pub fn stack_features(modalities: &[ModalityData]) -> Result<FeatureMatrix> {
    let views: Vec<_> = modalities.iter().map(|m| m.features.view()).collect();
    if views.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut x = concatenate(Axis(1), &views).map_err(|e| Error::Shape(e.to_string()))?;
    let n = x.nrows() as f64;
    for mut col in x.axis_iter_mut(Axis(1)) {
        let mean = col.sum() / n;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let sd = var.sqrt();
        col.mapv_inplace(|v| if sd > 1e-12 { (v - mean) / sd } else { 0.0 });
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub label_rate: f64,
    pub test_fraction: f64,
    /// Share of the labeled budget moved to the outer-validation fold.
    pub outer_val_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            label_rate: 0.1,
            test_fraction: 0.2,
            outer_val_fraction: 0.2,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.label_rate > 0.0 && self.label_rate < 1.0) {
            return Err(Error::Config(format!("label_rate {} outside (0, 1)", self.label_rate)));
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return Err(Error::Config(format!(
                "test_fraction {} outside [0, 1)",
                self.test_fraction
            )));
        }
        if !(0.0..1.0).contains(&self.outer_val_fraction) {
            return Err(Error::Config(format!(
                "outer_val_fraction {} outside [0, 1)",
                self.outer_val_fraction
            )));
        }
        Ok(())
    }
}

/// Result of [`split`]. Test and outer-validation vertices stay in the graph
/// as unlabeled vertices; their labels are only used for scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub labels: LabelState,
    pub test: Vec<usize>,
    pub outer_val: Vec<usize>,
}

impl Split {
    /// Unlabeled training vertices: neither labeled, test, nor outer-val.
    pub fn unlabeled_train(&self) -> Vec<usize> {
        let mut taken = self.labels.mask();
        for &v in self.test.iter().chain(&self.outer_val) {
            taken[v] = true;
        }
        (0..taken.len()).filter(|&v| !taken[v]).collect()
    }
}

/// Largest-remainder allocation of `total` over groups of the given sizes,
/// with at least `floor` per group (capped by group size).
fn allocate(total: usize, sizes: &[usize], floor: usize) -> Vec<usize> {
    let n: usize = sizes.iter().sum();
    let mut alloc: Vec<usize> = sizes.iter().map(|&s| (total * s) / n.max(1)).collect();
    let mut rem: Vec<(usize, usize)> = sizes
        .iter()
        .enumerate()
        .map(|(c, &s)| ((total * s) % n.max(1), c))
        .collect();
    rem.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut left = total.saturating_sub(alloc.iter().sum());
    for &(_, c) in &rem {
        if left == 0 {
            break;
        }
        if alloc[c] < sizes[c] {
            alloc[c] += 1;
            left -= 1;
        }
    }
    for (a, &s) in alloc.iter_mut().zip(sizes) {
        *a = (*a).max(floor.min(s)).min(s);
    }
    alloc
}

/// Stratified split. The test fold is drawn first; the labeled budget
/// `ceil(label_rate * N_train)` is then drawn from the rest with at least
/// one subject per class, and a share of it becomes the outer-validation
/// fold while every class keeps one labeled training subject.
pub fn split(truth: &[usize], n_classes: usize, spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    let n = truth.len();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (v, &c) in truth.iter().enumerate() {
        if c >= n_classes {
            return Err(Error::Config(format!("label {c} out of range (L = {n_classes})")));
        }
        by_class[c].push(v);
    }
    if let Some(c) = by_class.iter().position(Vec::is_empty) {
        return Err(Error::EmptyClass(c));
    }
    let mut r = rng::stream(spec.seed, "split", 0);
    for members in by_class.iter_mut() {
        members.shuffle(&mut r);
    }

    // Test fold, keeping at least one training subject per class.
    let n_test = (spec.test_fraction * n as f64 + 1e-9).floor() as usize;
    let capacity: Vec<usize> = by_class.iter().map(|m| m.len() - 1).collect();
    let test_alloc = allocate(n_test, &capacity, 0);
    let mut test = Vec::new();
    let mut train: Vec<Vec<usize>> = Vec::with_capacity(n_classes);
    for (members, &t) in by_class.iter().zip(&test_alloc) {
        test.extend_from_slice(&members[..t]);
        train.push(members[t..].to_vec());
    }

    let n_train: usize = train.iter().map(Vec::len).sum();
    let budget = (spec.label_rate * n_train as f64 - 1e-9).ceil().max(0.0) as usize;
    let sizes: Vec<usize> = train.iter().map(Vec::len).collect();
    let label_alloc = allocate(budget, &sizes, 1);
    let mut budget_sets: Vec<Vec<usize>> = train.iter().zip(&label_alloc).map(|(m, &a)| m[..a].to_vec()).collect();

    let total_budget: usize = budget_sets.iter().map(Vec::len).sum();
    let n_val = (spec.outer_val_fraction * total_budget as f64 + 1e-9).floor() as usize;
    let val_capacity: Vec<usize> = budget_sets.iter().map(|s| s.len() - 1).collect();
    let val_alloc = allocate(n_val, &val_capacity, 0);
    let mut outer_val = Vec::new();
    for (set, &k) in budget_sets.iter_mut().zip(&val_alloc) {
        outer_val.extend(set.drain(..k));
    }

    let labeled = budget_sets
        .iter()
        .enumerate()
        .flat_map(|(c, s)| s.iter().map(move |&v| (v, c)))
        .collect();
    test.sort_unstable();
    outer_val.sort_unstable();
    Ok(Split {
        labels: LabelState::new(n, n_classes, labeled)?,
        test,
        outer_val,
    })
}

/// Similarity selector as written in manifests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimilarityName {
    DotProduct,
    Gaussian,
    NegativeEuclidean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestModality {
    pub name: String,
    pub path: PathBuf,
    pub kind: ModalityKind,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub similarity: Option<SimilarityName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

impl ManifestModality {
    pub fn similarity_fn(&self) -> Option<SimilarityFn> {
        self.similarity.map(|s| match s {
            SimilarityName::DotProduct => SimilarityFn::DotProduct,
            SimilarityName::Gaussian => SimilarityFn::Gaussian { sigma: self.sigma },
            SimilarityName::NegativeEuclidean => SimilarityFn::NegativeEuclidean,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_classes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    #[serde(rename = "modality")]
    pub modalities: Vec<ManifestModality>,
}

/// A loaded manifest: features plus per-modality block settings.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub modalities: Vec<ModalityData>,
    pub block_settings: Vec<(usize, Option<SimilarityFn>)>,
    pub labels: Option<Vec<(usize, usize)>>,
    pub n_classes: Option<usize>,
}

impl Dataset {
    pub fn n_subjects(&self) -> usize {
        self.modalities.first().map_or(0, ModalityData::n_subjects)
    }

    /// Number of classes: declared in the manifest or inferred from labels.
    pub fn class_count(&self) -> Option<usize> {
        self.n_classes
            .or_else(|| self.labels.as_ref().and_then(|l| l.iter().map(|&(_, c)| c + 1).max()))
    }

    /// Dense label vector; fails unless every subject is labeled.
    pub fn full_labels(&self) -> Result<Vec<usize>> {
        let labels = self
            .labels
            .as_ref()
            .ok_or_else(|| Error::Config("dataset has no labels".into()))?;
        let n = self.n_subjects();
        let mut out = vec![usize::MAX; n];
        for &(v, c) in labels {
            if v >= n {
                return Err(Error::Config(format!("label for subject {v} but N = {n}")));
            }
            out[v] = c;
        }
        if let Some(v) = out.iter().position(|&c| c == usize::MAX) {
            return Err(Error::Config(format!("subject {v} has no label")));
        }
        Ok(out)
    }
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
}

/// Loads a manifest and every file it references. Relative paths resolve
/// against the manifest's directory.
pub fn load(path: &Path) -> Result<Dataset> {
    let manifest = read_manifest(path)?;
    if manifest.modalities.is_empty() {
        return Err(Error::parse(path, "manifest lists no modalities"));
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let mut modalities: Vec<ModalityData> = Vec::new();
    let mut first: Option<(PathBuf, usize)> = None;
    for m in &manifest.modalities {
        let file = base.join(&m.path);
        let x = read_feature_csv(&file)?;
        match &first {
            None => first = Some((file.clone(), x.nrows())),
            Some((f, rows)) if *rows != x.nrows() => {
                return Err(Error::RowCountMismatch {
                    first: f.clone(),
                    first_rows: *rows,
                    second: file,
                    second_rows: x.nrows(),
                });
            }
            Some(_) => {}
        }
        modalities.push(ModalityData::new(m.name.clone(), m.kind, x)?);
    }
    let labels = match &manifest.labels {
        Some(p) => Some(read_labels_csv(&base.join(p))?),
        None => None,
    };
    Ok(Dataset {
        block_settings: manifest.modalities.iter().map(|m| (m.k, m.similarity_fn())).collect(),
        modalities,
        labels,
        n_classes: manifest.n_classes,
    })
}

/// Reads a numeric CSV with a header row; one subject per row. Lines
/// starting with `#` are comments.
pub fn read_feature_csv(path: &Path) -> Result<Array2<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut values = Vec::new();
    let mut rows = 0;
    let mut cols = None;
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if *cols.get_or_insert(record.len()) != record.len() {
            return Err(Error::parse(path, format!("line {line}: ragged row")));
        }
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| Error::NonNumeric {
                    path: path.to_path_buf(),
                    line,
                    column: j + 1,
                    cell: cell.to_string(),
                })?;
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::NoDataRows(path.to_path_buf()));
    }
    Array2::from_shape_vec((rows, cols.unwrap_or(0)), values).map_err(|e| Error::parse(path, e.to_string()))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, format!("{other:?}")),
    }
}

/// Reads `subject_index,class_label` rows; the header row is optional.
pub fn read_labels_csv(path: &Path) -> Result<Vec<(usize, usize)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            return Err(Error::parse(path, format!("line {line}: expected 2 columns")));
        }
        let parse = |j: usize| -> Option<usize> { record[j].parse().ok() };
        match (parse(0), parse(1)) {
            (Some(v), Some(c)) => out.push((v, c)),
            _ if i == 0 => continue,
            (None, _) => {
                return Err(Error::NonNumeric {
                    path: path.to_path_buf(),
                    line,
                    column: 1,
                    cell: record[0].to_string(),
                })
            }
            (_, None) => {
                return Err(Error::NonNumeric {
                    path: path.to_path_buf(),
                    line,
                    column: 2,
                    cell: record[1].to_string(),
                })
            }
        }
    }
    Ok(out)
}

pub fn write_labels_csv<W: Write>(labels: &[(usize, usize)], seed: u64, mut out: W) -> std::io::Result<()> {
    writeln!(out, "# seed={seed}")?;
    writeln!(out, "subject_index,class_label")?;
    for &(v, c) in labels {
        writeln!(out, "{v},{c}")?;
    }
    Ok(())
}

pub fn write_feature_csv<W: Write>(x: &Array2<f64>, seed: u64, mut out: W) -> std::io::Result<()> {
    writeln!(out, "# seed={seed}")?;
    let header: Vec<String> = (0..x.ncols()).map(|j| format!("f{j}")).collect();
    writeln!(out, "{}", header.join(","))?;
    for row in x.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

fn write_file(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| Error::io(path, e))?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Writes `manifest.toml`, one CSV per modality and `labels.csv` into `dir`,
/// each headed by a `# seed=` comment. Returns the manifest path.
pub fn export(
    dir: &Path,
    modalities: &[ModalityData],
    ks: &[usize],
    labels: &[usize],
    n_classes: usize,
    seed: u64,
) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(modalities.len());
    for (m, &k) in modalities.iter().zip(ks) {
        let file = PathBuf::from(format!("{}.csv", m.name));
        write_file(&dir.join(&file), |buf| write_feature_csv(&m.features, seed, buf))?;
        entries.push(ManifestModality {
            name: m.name.clone(),
            path: file,
            kind: m.kind,
            k,
            similarity: None,
            sigma: None,
        });
    }
    let pairs: Vec<(usize, usize)> = labels.iter().copied().enumerate().collect();
    write_file(&dir.join("labels.csv"), |buf| write_labels_csv(&pairs, seed, buf))?;
    let manifest = Manifest {
        n_classes: Some(n_classes),
        labels: Some(PathBuf::from("labels.csv")),
        modalities: entries,
    };
    let path = dir.join("manifest.toml");
    let text = format!(
        "# seed={seed}\n{}",
        toml::to_string(&manifest).map_err(|e| Error::Config(e.to_string()))?
    );
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Generates a synthetic dataset and exports it with per-modality `k`.
pub fn synthesize_to(dir: &Path, spec: &SyntheticSpec) -> Result<PathBuf> {
    let (modalities, labels) = generate(spec)?;
    let ks: Vec<usize> = spec.modalities.iter().map(|m| m.k).collect();
    export(dir, &modalities, &ks, &labels, spec.n_classes, spec.seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn allocation_respects_total_and_floor() {
        assert_eq!(allocate(10, &[5, 5, 10], 0), vec![3, 2, 5]);
        assert_eq!(allocate(2, &[10, 10, 10, 10], 1), vec![1, 1, 1, 1]);
        assert_eq!(allocate(0, &[3, 3], 0), vec![0, 0]);
    }

    #[test]
    fn generator_balance_and_determinism() {
        let spec = SyntheticSpec::planted(3);
        let (a, la) = generate(&spec).unwrap();
        let (b, lb) = generate(&spec).unwrap();
        assert_eq!(la, lb);
        assert_eq!(a, b);
        let mut counts = [0usize; 4];
        for &c in &la {
            counts[c] += 1;
        }
        assert_eq!(counts, [125; 4]);
    }

    #[test]
    fn split_floor_forces_one_per_class() {
        let truth: Vec<usize> = (0..100).map(|i| i % 4).collect();
        let s = split(
            &truth,
            4,
            &SplitSpec {
                label_rate: 0.01,
                test_fraction: 0.2,
                outer_val_fraction: 0.0,
                seed: 1,
            },
        )
        .unwrap();
        assert_eq!(s.labels.n_labeled(), 4);
        s.labels.check_all_classes_labeled().unwrap();
    }

    #[test]
    fn split_rejects_empty_class() {
        let truth = vec![0, 0, 1, 1];
        assert!(matches!(
            split(&truth, 3, &SplitSpec::default()),
            Err(Error::EmptyClass(2))
        ));
    }
}
