//! Run configuration file: one section per command family plus the master
//! seed. Every section is validated before any work starts.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bilevel::ExperimentConfig;
use crate::classifier::TrainConfig;
use crate::error::{Error, Result};
use crate::tvflow::{FlowParams, ScalingMode, SubgradientMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DMode {
    Ones,
    VertexDegree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowSection {
    pub dt: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub d_mode: DMode,
    /// 0 keeps the lagged subgradient; otherwise the number of fixed-point
    /// refinements per step.
    pub refinements: usize,
}

impl Default for FlowSection {
    fn default() -> Self {
        FlowSection::from(&FlowParams::default())
    }
}

impl From<&FlowParams> for FlowSection {
    fn from(p: &FlowParams) -> Self {
        FlowSection {
            dt: p.dt,
            max_iters: p.max_iters,
            tol: p.tol,
            d_mode: match p.d_mode {
                ScalingMode::Ones => DMode::Ones,
                ScalingMode::VertexDegree => DMode::VertexDegree,
            },
            refinements: match p.subgradient {
                SubgradientMode::Lagged => 0,
                SubgradientMode::FixedPoint { max_refinements } => max_refinements,
            },
        }
    }
}

impl FlowSection {
    pub fn params(&self) -> FlowParams {
        FlowParams {
            dt: self.dt,
            max_iters: self.max_iters,
            tol: self.tol,
            d_mode: match self.d_mode {
                DMode::Ones => ScalingMode::Ones,
                DMode::VertexDegree => ScalingMode::VertexDegree,
            },
            subgradient: match self.refinements {
                0 => SubgradientMode::Lagged,
                r => SubgradientMode::FixedPoint { max_refinements: r },
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub hidden: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainSection {
            lr: d.lr,
            weight_decay: d.weight_decay,
            epochs: d.epochs,
            hidden: d.hidden,
        }
    }
}

impl TrainSection {
    pub fn config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            weight_decay: self.weight_decay,
            epochs: self.epochs,
            hidden: self.hidden,
            seed,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstructionSection {
    /// Overrides the per-modality `k` of the manifest when set.
    pub k: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub construction: ConstructionSection,
    pub flow: FlowSection,
    pub train: TrainSection,
    pub experiment: ExperimentConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Copies the master seed into the sections that carry their own.
    pub fn propagate_seed(&mut self) {
        self.experiment.seed = self.seed;
        self.experiment.search.seed = self.seed;
    }

    pub fn validate(&self) -> Result<()> {
        if self.construction.k == Some(0) {
            return Err(Error::Config("k must be at least 1".into()));
        }
        self.flow.params().validate()?;
        self.train.config(self.seed).validate()?;
        self.experiment.validate()
    }
}
