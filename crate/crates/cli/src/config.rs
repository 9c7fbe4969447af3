use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use elab_core::frames::{flat_structure, non_hamiltonian_fixture, normal_form_structure, VectorField};
use elab_core::ode::IntegratorConfig;
use elab_core::reachability::{BoundingBox, SamplerConfig};
use elab_core::{FrameStructure, Poly4};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FrameConfig {
    Flat {},
    NormalForm {
        #[serde(default)]
        phi: Poly4,
        #[serde(default)]
        psi1: Poly4,
        #[serde(default)]
        psi2: Poly4,
    },
    Custom {
        x: [Poly4; 4],
        y: [Poly4; 4],
    },
    NonHamiltonianFixture {},
}

impl FrameConfig {
    pub fn build(&self) -> elab_core::Result<FrameStructure> {
        match self {
            FrameConfig::Flat {} => Ok(flat_structure()),
            FrameConfig::NormalForm { phi, psi1, psi2 } => {
                normal_form_structure(phi.clone(), psi1.clone(), psi2.clone())
            }
            FrameConfig::Custom { x, y } => Ok(FrameStructure::custom(
                VectorField::new(x.clone()),
                VectorField::new(y.clone()),
            )),
            FrameConfig::NonHamiltonianFixture {} => Ok(non_hamiltonian_fixture()),
        }
    }
}

/// Slab used by the abnormal-ray boundary probe.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub delta: f64,
    pub x_max: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { delta: 0.05, x_max: 1.0 }
    }
}

fn default_seed() -> u64 {
    0
}
fn default_oracle_tol() -> f64 {
    1e-8
}
fn default_slack() -> f64 {
    1e-7
}
fn default_grid() -> usize {
    11
}
fn default_oracle_points() -> usize {
    2000
}
fn default_cauchy_box() -> BoundingBox {
    BoundingBox {
        lo: [-1.0; 4],
        hi: [1.0; 4],
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub frame: FrameConfig,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub sampler: SamplerConfig,
    /// `flat_union`, `weak_general` or a cell name such as `A13`; chosen from
    /// the frame when absent.
    #[serde(default)]
    pub regions: Option<String>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_oracle_tol")]
    pub oracle_tol: f64,
    #[serde(default = "default_slack")]
    pub slack: f64,
    /// Points per axis of the audit grids.
    #[serde(default = "default_grid")]
    pub grid: usize,
    /// Random points per Cauchy problem in the characteristic oracle.
    #[serde(default = "default_oracle_points")]
    pub oracle_points: usize,
    #[serde(default)]
    pub probe: ProbeConfig,
    /// Box for `solve-cauchy` grids and the oracle sample.
    #[serde(default = "default_cauchy_box")]
    pub cauchy_box: BoundingBox,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg: RunConfig = serde_json::from_str(text)?;
        if let Ok(seed) = std::env::var("ELAB_SEED") {
            cfg.seed = seed
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("ELAB_SEED={seed:?} is not an unsigned integer")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.display().to_string(), e))?;
        Self::parse(&text)
    }

    fn validate(&self) -> Result<(), CliError> {
        self.integrator.validate()?;
        self.sampler.validate()?;
        self.cauchy_box.validate()?;
        let positive = [("oracle_tol", self.oracle_tol), ("probe.delta", self.probe.delta)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Config(format!("{name} must be positive")));
            }
        }
        if !(self.slack >= 0.0 && self.slack.is_finite()) {
            return Err(CliError::Config("slack must be nonnegative".into()));
        }
        if self.grid < 2 {
            return Err(CliError::Config("grid needs at least 2 points per axis".into()));
        }
        Ok(())
    }

    /// SHA-256 of the effective configuration, after the seed override.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("configuration serializes");
        hex::encode(Sha256::digest(bytes))
    }
}
