//! Weighted hypergraph storage.
//!
//! The incidence matrix is kept column-major: each [`Hyperedge`] owns its
//! sorted list of `(vertex, value)` pairs. A positive value means membership;
//! the values themselves (similarities from construction) are retained for
//! diagnostics while every downstream consumer works with the binary
//! membership plus the per-edge weight.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// One column of the incidence matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperedge {
    /// `(vertex, incidence value)` pairs sorted by vertex, values > 0.
    members: Vec<(usize, f64)>,
    pub weight: f64,
    pub modality: u32,
}

impl Hyperedge {
    /// Builds an edge from arbitrary `(vertex, value)` pairs. Zero entries are
    /// dropped, duplicates are rejected.
    pub fn new(mut members: Vec<(usize, f64)>, weight: f64, modality: u32) -> Result<Self> {
        if !(weight.is_finite() && weight > 0.0) {
            return Err(Error::InvalidHypergraph(format!(
                "hyperedge weight {weight} is not a positive finite number"
            )));
        }
        for &(v, x) in &members {
            if !x.is_finite() || x < 0.0 {
                return Err(Error::InvalidHypergraph(format!(
                    "incidence entry ({v}, {x}) is not finite and non-negative"
                )));
            }
        }
        members.retain(|&(_, x)| x > 0.0);
        members.sort_by_key(|&(v, _)| v);
        if members.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidHypergraph("duplicate vertex in hyperedge".into()));
        }
        Ok(Hyperedge {
            members,
            weight,
            modality,
        })
    }

    /// Unit-valued membership edge.
    pub fn from_vertices(vertices: &[usize], weight: f64, modality: u32) -> Result<Self> {
        Self::new(vertices.iter().map(|&v| (v, 1.0)).collect(), weight, modality)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.members
    }

    pub fn vertices(&self) -> impl ExactSizeIterator<Item = usize> + '_ {
        self.members.iter().map(|&(v, _)| v)
    }

    pub fn contains(&self, v: usize) -> bool {
        self.members.binary_search_by_key(&v, |&(u, _)| u).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypergraph {
    n_vertices: usize,
    edges: Vec<Hyperedge>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegreeVectors {
    /// Sum of the weights of the edges containing each vertex.
    pub vertex_degree: Vec<f64>,
    /// Number of members of each edge.
    pub edge_degree: Vec<usize>,
}

impl Hypergraph {
    /// Assembles a hypergraph, checking vertex indices. Does not drop small
    /// edges; see [`validate`].
    pub fn new(n_vertices: usize, edges: Vec<Hyperedge>) -> Result<Self> {
        for (e, edge) in edges.iter().enumerate() {
            if let Some(&(v, _)) = edge.members.last() {
                if v >= n_vertices {
                    return Err(Error::InvalidHypergraph(format!(
                        "hyperedge {e} references vertex {v} but n = {n_vertices}"
                    )));
                }
            }
        }
        Ok(Hypergraph { n_vertices, edges })
    }

    /// Convenience constructor for unit-weight, unit-valued edges.
    pub fn from_edge_lists(n_vertices: usize, edges: &[Vec<usize>]) -> Result<Self> {
        let edges = edges
            .iter()
            .map(|e| Hyperedge::from_vertices(e, 1.0, 0))
            .collect::<Result<Vec<_>>>()?;
        Self::new(n_vertices, edges)
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Hyperedge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &Hyperedge {
        &self.edges[e]
    }

    pub fn edge_weights(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.weight).collect()
    }

    pub fn edge_modality(&self) -> Vec<u32> {
        self.edges.iter().map(|e| e.modality).collect()
    }

    /// For each vertex, the ascending list of edges containing it.
    pub fn incident_edges(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.n_vertices];
        for (e, edge) in self.edges.iter().enumerate() {
            for v in edge.vertices() {
                inc[v].push(e);
            }
        }
        inc
    }

    /// Dense `n x m` incidence values (zeros off the sparsity pattern).
    pub fn incidence_dense(&self) -> ndarray::Array2<f64> {
        let mut h = ndarray::Array2::zeros((self.n_vertices, self.edges.len()));
        for (e, edge) in self.edges.iter().enumerate() {
            for &(v, x) in edge.entries() {
                h[[v, e]] = x;
            }
        }
        h
    }

    pub fn degrees(&self) -> DegreeVectors {
        degrees(self)
    }

    /// Keeps only the listed edges, in the given order.
    pub(crate) fn with_edges(&self, keep: impl IntoIterator<Item = usize>) -> Hypergraph {
        Hypergraph {
            n_vertices: self.n_vertices,
            edges: keep.into_iter().map(|e| self.edges[e].clone()).collect(),
        }
    }

    /// Restricts the hypergraph to `kept` vertices (ascending original
    /// indices), renumbering them `0..kept.len()`. Edges are restricted, not
    /// dropped; callers validate afterwards.
    pub(crate) fn induced(&self, kept: &[usize]) -> Hypergraph {
        let mut new_index = vec![usize::MAX; self.n_vertices];
        for (i, &v) in kept.iter().enumerate() {
            new_index[v] = i;
        }
        let edges = self
            .edges
            .iter()
            .map(|edge| Hyperedge {
                members: edge
                    .members
                    .iter()
                    .filter(|&&(v, _)| new_index[v] != usize::MAX)
                    .map(|&(v, x)| (new_index[v], x))
                    .collect(),
                weight: edge.weight,
                modality: edge.modality,
            })
            .collect();
        Hypergraph {
            n_vertices: kept.len(),
            edges,
        }
    }

    /// Writes the text format: a header `n m`, then one line per hyperedge
    /// `weight modality v1:x1 v2:x2 ...` with 17 significant digits.
    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{} {}", self.n_vertices, self.edges.len())?;
        for edge in &self.edges {
            write!(out, "{:.16e} {}", edge.weight, edge.modality)?;
            for &(v, x) in &edge.members {
                write!(out, " {v}:{x:.16e}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_text(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("text format is ASCII")
    }

    /// Parses the text format written by [`Hypergraph::write_text`]. Lines
    /// starting with `#` are comments.
    pub fn read_text<R: BufRead>(input: R) -> Result<Hypergraph> {
        let src = "<hypergraph>";
        let mut lines = input
            .lines()
            .enumerate()
            .filter(|(_, l)| !matches!(l, Ok(s) if s.trim_start().starts_with('#')));
        let bad = |line: usize, msg: &str| Error::parse(src, format!("line {}: {msg}", line + 1));

        let (hl, header) = lines.next().ok_or_else(|| Error::parse(src, "missing header line"))?;
        let header = header.map_err(|e| Error::io(src, e))?;
        let mut it = header.split_whitespace();
        let n: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad(hl, "expected `n m` header"))?;
        let m: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad(hl, "expected `n m` header"))?;

        let mut edges = Vec::with_capacity(m);
        for (ln, line) in lines {
            let line = line.map_err(|e| Error::io(src, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut toks = line.split_whitespace();
            let weight: f64 = toks
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| bad(ln, "bad weight"))?;
            let modality: u32 = toks
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| bad(ln, "bad modality id"))?;
            let mut members = Vec::new();
            for tok in toks {
                let (v, x) = tok
                    .split_once(':')
                    .ok_or_else(|| bad(ln, &format!("expected vertex:value, got {tok:?}")))?;
                let v: usize = v.parse().map_err(|_| bad(ln, &format!("bad vertex {v:?}")))?;
                let x: f64 = x.parse().map_err(|_| bad(ln, &format!("bad value {x:?}")))?;
                members.push((v, x));
            }
            edges.push(Hyperedge::new(members, weight, modality)?);
        }
        if edges.len() != m {
            return Err(Error::parse(
                src,
                format!("header declares {m} hyperedges but {} were read", edges.len()),
            ));
        }
        Hypergraph::new(n, edges)
    }
}

/// Drops empty and singleton hyperedges. Fails if nothing survives.
pub fn validate(h: &Hypergraph) -> Result<Hypergraph> {
    let edges: Vec<Hyperedge> = h.edges.iter().filter(|e| e.len() >= 2).cloned().collect();
    if edges.is_empty() {
        return Err(Error::NoHyperedges);
    }
    Ok(Hypergraph {
        n_vertices: h.n_vertices,
        edges,
    })
}

pub fn degrees(h: &Hypergraph) -> DegreeVectors {
    let mut vertex_degree = vec![0.0; h.n_vertices];
    let mut edge_degree = Vec::with_capacity(h.edges.len());
    for edge in &h.edges {
        for v in edge.vertices() {
            vertex_degree[v] += edge.weight;
        }
        edge_degree.push(edge.len());
    }
    DegreeVectors {
        vertex_degree,
        edge_degree,
    }
}
