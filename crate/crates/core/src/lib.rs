//! Bilevel semi-supervised hypergraph learning for multi-modal classification.
//!
//! The pipeline has two nested levels:
//!
//! * the inner level trains a two-layer hypergraph convolution classifier on
//!   labeled vertices plus pseudo-labels, where the pseudo-labels come from a
//!   semi-explicit total-variation gradient flow ([`tvflow`]) and the
//!   unlabeled term is weighted by an entropy-based certainty `tau`;
//! * the outer level searches over augmentation policies ([`augmentation`])
//!   that remove nodes, hyperedges, random-walk subgraphs, or perturb
//!   features, scoring each policy by the accuracy of the inner classifier
//!   ([`bilevel`]).
//!
//! Multi-modal hypergraphs are built from per-modality kNN blocks
//! ([`construction`]) and stored in [`hypergraph::Hypergraph`].

pub mod augmentation;
pub mod bilevel;
pub mod classifier;
pub mod config;
pub mod construction;
pub mod data;
pub mod error;
pub mod hypergraph;
pub mod labels;
pub mod metrics;
pub mod rng;
pub mod tvflow;

pub use augmentation::{Action, AugmentationPolicy, AugmentedView};
pub use bilevel::{Arm, PolicyCandidate, SearchConfig};
pub use classifier::{HgnnParams, TrainConfig};
pub use construction::{ModalityData, ModalityKind, SimilarityFn};
pub use error::{Error, Result};
pub use hypergraph::{DegreeVectors, Hyperedge, Hypergraph};
pub use labels::LabelState;
pub use metrics::MetricsReport;
pub use tvflow::{FlowParams, FlowState};

/// Per-vertex feature vectors, one row per vertex.
pub type FeatureMatrix = ndarray::Array2<f64>;
