//! Per-modality kNN hyperedges and their concatenation into one hypergraph.
//!
//! Every subject `j` spawns one hyperedge per modality: `j` itself plus its
//! `k` most similar subjects in that modality. The incidence value of member
//! `i` is the similarity `S(v_i, v_j)`, shifted so all values stay positive.

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypergraph::{validate, Hyperedge, Hypergraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModalityKind {
    /// Dense embeddings produced by an upstream feature extractor.
    #[serde(alias = "imaging")]
    ImagingFeatures,
    /// Raw phenotype vectors (demographics, genotype, scores).
    Phenotype,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModalityData {
    pub name: String,
    pub kind: ModalityKind,
    /// `N x d` features, one row per subject.
    pub features: Array2<f64>,
}

impl ModalityData {
    pub fn new(name: impl Into<String>, kind: ModalityKind, features: Array2<f64>) -> Result<Self> {
        let name = name.into();
        if features.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config(format!("modality {name}: non-finite feature")));
        }
        Ok(ModalityData { name, kind, features })
    }

    pub fn n_subjects(&self) -> usize {
        self.features.nrows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SimilarityFn {
    DotProduct,
    /// `exp(-|x - z|^2 / (2 sigma^2))`; `None` uses the median pairwise
    /// distance of the block as `sigma`.
    Gaussian {
        sigma: Option<f64>,
    },
    NegativeEuclidean,
}

impl SimilarityFn {
    /// Default similarity per modality kind: dot product (on L2-normalized
    /// rows) for embeddings, median-bandwidth gaussian for phenotypes.
    pub fn default_for(kind: ModalityKind) -> Self {
        match kind {
            ModalityKind::ImagingFeatures => SimilarityFn::DotProduct,
            ModalityKind::Phenotype => SimilarityFn::Gaussian { sigma: None },
        }
    }

    fn resolve(self, features: ArrayView2<f64>) -> ResolvedSim {
        match self {
            SimilarityFn::DotProduct => ResolvedSim::Dot,
            SimilarityFn::NegativeEuclidean => ResolvedSim::NegEuclid,
            SimilarityFn::Gaussian { sigma } => {
                let sigma = sigma.unwrap_or_else(|| median_pairwise_distance(features));
                // All-identical rows give a zero median; any positive bandwidth
                // then yields the same (constant) similarities.
                let sigma = if sigma > 0.0 { sigma } else { 1.0 };
                ResolvedSim::Gaussian {
                    inv_two_sigma_sq: 1.0 / (2.0 * sigma * sigma),
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum ResolvedSim {
    Dot,
    Gaussian { inv_two_sigma_sq: f64 },
    NegEuclid,
}

impl ResolvedSim {
    fn eval(self, a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
        match self {
            ResolvedSim::Dot => a.dot(&b),
            ResolvedSim::Gaussian { inv_two_sigma_sq } => (-sq_dist(a, b) * inv_two_sigma_sq).exp(),
            ResolvedSim::NegEuclid => -sq_dist(a, b).sqrt(),
        }
    }
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn median_pairwise_distance(features: ArrayView2<f64>) -> f64 {
    let n = features.nrows();
    let mut d = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            d.push(sq_dist(features.row(i), features.row(j)).sqrt());
        }
    }
    if d.is_empty() {
        return 0.0;
    }
    let mid = d.len() / 2;
    let (_, m, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    *m
}

/// An `N x N` incidence block; column `j` is the hyperedge centred at `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceBlock {
    pub n_vertices: usize,
    /// Per column, `(vertex, value)` sorted by vertex.
    pub columns: Vec<Vec<(usize, f64)>>,
}

impl IncidenceBlock {
    pub fn membership(&self, column: usize) -> Vec<usize> {
        self.columns[column].iter().map(|&(v, _)| v).collect()
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut h = Array2::zeros((self.n_vertices, self.columns.len()));
        for (j, col) in self.columns.iter().enumerate() {
            for &(i, x) in col {
                h[[i, j]] = x;
            }
        }
        h
    }
}

/// kNN incidence block: column `j` holds `j` and its `k` most similar rows.
///
/// Ties in similarity are broken by the smaller row index. The block is not
/// symmetrized: `i` in the neighborhood of `j` says nothing about `j` in the
/// neighborhood of `i`.
pub fn knn_block(features: ArrayView2<f64>, k: usize, sim: SimilarityFn) -> Result<IncidenceBlock> {
    let n = features.nrows();
    if k >= n {
        return Err(Error::KTooLarge { k, n });
    }
    if features.iter().any(|x| !x.is_finite()) {
        return Err(Error::Config("non-finite feature value".into()));
    }
    let sim = sim.resolve(features);

    let mut columns = Vec::with_capacity(n);
    let mut scored: Vec<(usize, f64)> = Vec::with_capacity(n);
    for j in 0..n {
        let center = features.row(j);
        scored.clear();
        scored.extend(
            (0..n)
                .filter(|&i| i != j)
                .map(|i| (i, sim.eval(features.row(i), center))),
        );
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

        let mut col: Vec<(usize, f64)> = Vec::with_capacity(k + 1);
        col.push((j, sim.eval(center, center)));
        col.extend_from_slice(&scored[..k]);
        shift_positive(&mut col);
        col.sort_by_key(|&(v, _)| v);
        columns.push(col);
    }
    Ok(IncidenceBlock { n_vertices: n, columns })
}

/// Phenotype hyperedges follow the same neighborhood rule as embeddings,
/// applied to raw phenotype vectors.
pub fn phenotype_block(features: ArrayView2<f64>, k: usize, sim: SimilarityFn) -> Result<IncidenceBlock> {
    knn_block(features, k, sim)
}

/// Makes every selected entry strictly positive while keeping the neighbor
/// ranking, then gives the center (first entry) the column maximum.
fn shift_positive(col: &mut [(usize, f64)]) {
    let min = col.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    let max = col.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    if min <= 0.0 {
        let floor = if max > min { 1e-3 * (max - min) } else { 1.0 };
        for c in col.iter_mut() {
            c.1 = c.1 - min + floor;
        }
    }
    let max = col.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    col[0].1 = max;
}

fn l2_normalize_rows(features: ArrayView2<f64>) -> Array2<f64> {
    let mut out = features.to_owned();
    for mut row in out.rows_mut() {
        let norm = row.dot(&row).sqrt();
        if norm > 0.0 {
            row /= norm;
        }
    }
    out
}

/// Builds the block for one modality with its kind-specific treatment:
/// embeddings compared by dot product are L2-normalized first.
pub fn modality_block(modality: &ModalityData, k: usize, sim: Option<SimilarityFn>) -> Result<IncidenceBlock> {
    let sim = sim.unwrap_or_else(|| SimilarityFn::default_for(modality.kind));
    match (modality.kind, sim) {
        (ModalityKind::ImagingFeatures, SimilarityFn::DotProduct) => {
            let normalized = l2_normalize_rows(modality.features.view());
            knn_block(normalized.view(), k, sim)
        }
        (ModalityKind::ImagingFeatures, _) => knn_block(modality.features.view(), k, sim),
        (ModalityKind::Phenotype, _) => phenotype_block(modality.features.view(), k, sim),
    }
}

/// Horizontal concatenation `[H^1 | ... | H^M]`; block `b` contributes edges
/// tagged with modality id `b`, each with weight 1.
pub fn concat(blocks: &[IncidenceBlock]) -> Result<Hypergraph> {
    let first = blocks.first().ok_or(Error::NoHyperedges)?;
    let n = first.n_vertices;
    let mut edges = Vec::with_capacity(blocks.iter().map(|b| b.columns.len()).sum());
    for (b, block) in blocks.iter().enumerate() {
        if block.n_vertices != n {
            return Err(Error::VertexCountMismatch {
                expected: n,
                found: block.n_vertices,
            });
        }
        for col in &block.columns {
            edges.push(Hyperedge::new(col.clone(), 1.0, b as u32)?);
        }
    }
    validate(&Hypergraph::new(n, edges)?)
}

/// Per-modality block construction followed by [`concat`].
pub fn build_hypergraph(modalities: &[ModalityData], settings: &[(usize, Option<SimilarityFn>)]) -> Result<Hypergraph> {
    if modalities.len() != settings.len() {
        return Err(Error::Config(format!(
            "{} modalities but {} block settings",
            modalities.len(),
            settings.len()
        )));
    }
    if let Some(first) = modalities.first() {
        for m in modalities {
            if m.n_subjects() != first.n_subjects() {
                return Err(Error::VertexCountMismatch {
                    expected: first.n_subjects(),
                    found: m.n_subjects(),
                });
            }
        }
    }
    let blocks = modalities
        .iter()
        .zip(settings)
        .map(|(m, &(k, sim))| modality_block(m, k, sim))
        .collect::<Result<Vec<_>>>()?;
    concat(&blocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn members(b: &IncidenceBlock) -> Vec<Vec<usize>> {
        (0..b.columns.len()).map(|j| b.membership(j)).collect()
    }

    #[test]
    fn line_points_negative_euclidean() {
        let x = array![[0.0], [1.0], [10.0]];
        let b = knn_block(x.view(), 1, SimilarityFn::NegativeEuclidean).unwrap();
        assert_eq!(members(&b), vec![vec![0, 1], vec![0, 1], vec![1, 2]]);
        for col in &b.columns {
            assert_eq!(col.len(), 2);
            assert!(col.iter().all(|&(_, x)| x > 0.0));
        }
    }

    #[test]
    fn full_neighborhood() {
        let x = array![[0.0, 1.0], [2.0, 0.5], [3.0, 3.0], [-1.0, 0.0]];
        let b = knn_block(x.view(), 3, SimilarityFn::NegativeEuclidean).unwrap();
        for j in 0..4 {
            assert_eq!(b.membership(j), vec![0, 1, 2, 3]);
        }
    }

    #[test]
    fn identical_points_break_ties_by_index() {
        let x = array![[1.0], [1.0], [1.0]];
        let b = knn_block(x.view(), 1, SimilarityFn::DotProduct).unwrap();
        assert_eq!(b.membership(2), vec![0, 2]);
        assert_eq!(b.membership(0), vec![0, 1]);
    }

    #[test]
    fn k_too_large_is_rejected() {
        let x = array![[0.0], [1.0]];
        assert!(matches!(
            knn_block(x.view(), 2, SimilarityFn::DotProduct),
            Err(Error::KTooLarge { k: 2, n: 2 })
        ));
    }

    #[test]
    fn ages_pair_up() {
        let x = array![[20.0], [21.0], [50.0], [51.0]];
        let b = phenotype_block(x.view(), 1, SimilarityFn::NegativeEuclidean).unwrap();
        assert_eq!(members(&b), vec![vec![0, 1], vec![0, 1], vec![2, 3], vec![2, 3]]);
    }

    #[test]
    fn one_hot_genotypes_group_by_genotype() {
        // three genotypes, three subjects each, interleaved
        let geno = [0usize, 1, 2, 0, 1, 2, 0, 1, 2];
        let mut x = Array2::zeros((9, 3));
        for (i, &g) in geno.iter().enumerate() {
            x[[i, g]] = 1.0;
        }
        let b = phenotype_block(x.view(), 2, SimilarityFn::DotProduct).unwrap();
        for j in 0..9 {
            let m = b.membership(j);
            assert_eq!(m.len(), 3);
            assert!(m.iter().all(|&i| geno[i] == geno[j]), "column {j}: {m:?}");
        }
    }

    #[test]
    fn constant_phenotype_gives_index_prefixes() {
        let x = Array2::from_elem((5, 1), 3.0);
        let b = phenotype_block(x.view(), 2, SimilarityFn::Gaussian { sigma: None }).unwrap();
        assert_eq!(b.membership(0), vec![0, 1, 2]);
        assert_eq!(b.membership(4), vec![0, 1, 4]);
        assert_eq!(b.membership(1), vec![0, 1, 2]);
    }

    #[test]
    fn negative_dot_products_are_shifted() {
        let x = array![[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [-0.5, -0.5]];
        let b = knn_block(x.view(), 3, SimilarityFn::DotProduct).unwrap();
        for (j, col) in b.columns.iter().enumerate() {
            assert_eq!(col.len(), 4);
            assert!(col.iter().all(|&(_, v)| v > 0.0));
            let center = col.iter().find(|c| c.0 == j).unwrap().1;
            assert!(col.iter().all(|&(_, v)| v <= center));
        }
    }

    #[test]
    fn concat_tags_modalities() {
        let x = array![[0.0], [1.0], [2.0], [4.0], [8.0]];
        let b = knn_block(x.view(), 2, SimilarityFn::NegativeEuclidean).unwrap();
        let h = concat(&[b.clone(), b.clone()]).unwrap();
        assert_eq!(h.n_edges(), 10);
        assert_eq!(h.edge_modality(), vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1]);
        assert!(h.edge_weights().iter().all(|&w| w == 1.0));

        let single = concat(&[b.clone()]).unwrap();
        assert_eq!(single.n_edges(), 5);

        let y = array![[0.0], [1.0], [2.0], [4.0], [8.0], [9.0]];
        let c = knn_block(y.view(), 2, SimilarityFn::NegativeEuclidean).unwrap();
        assert!(matches!(
            concat(&[b, c]),
            Err(Error::VertexCountMismatch { expected: 5, found: 6 })
        ));
    }
}
