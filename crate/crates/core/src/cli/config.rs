//! Experiment configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::chaining::NetMode;
use crate::cover::{CellGeometry, CoverSpec};
use crate::error::{LabError, Result};
use crate::mtfunctional::{MtOptions, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::probbounds::TailSpec;
use crate::surface::SurfaceSpec;
use crate::tubes::SearchSpec;
use crate::weights::ModelSpec;

/// Environment variable that overrides `output.directory`.
pub const OUT_ENV: &str = "MTLAB_OUT";
pub const DEFAULT_OUT: &str = "runs";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(rename = "N", default = "one")]
    pub trials: usize,
    #[serde(rename = "masterSeed", default)]
    pub master_seed: u64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(rename = "maxIter", default = "default_max_iter")]
    pub max_iter: usize,
}

fn one() -> usize {
    1
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec {
            trials: 1,
            master_seed: 0,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

impl RunSpec {
    pub fn options(&self) -> MtOptions {
        MtOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            start_seed: self.master_seed,
            ..MtOptions::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSection {
    #[serde(rename = "Rs")]
    pub radii: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaureySection {
    /// Number of hull vertices.
    pub n: usize,
    /// Ambient dimension.
    #[serde(rename = "N")]
    pub dim: usize,
    pub epsilon: f64,
    #[serde(default = "enumerated")]
    pub mode: NetMode,
    /// Random hull points in the coverage audit.
    #[serde(rename = "auditSamples", default = "default_audit")]
    pub audit_samples: usize,
}

fn enumerated() -> NetMode {
    NetMode::Enumerated
}

fn default_audit() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoveringSection {
    pub epsilons: Vec<f64>,
    #[serde(rename = "sampleCount")]
    pub sample_count: usize,
}

/// One experiment. Sections are optional at parse time; each subcommand
/// checks for the ones it needs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surface: Option<SurfaceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cover: Option<CoverSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub run: RunSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<ScalingSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tubes: Option<SearchSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<TailSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maurey: Option<MaureySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covering: Option<CoveringSection>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| {
            LabError::Config(format!("line {} column {}: {}", e.line(), e.column(), e))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            LabError::Config(msg) => LabError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Cross-field checks.
    pub fn validate(&self) -> Result<()> {
        if let (Some(s), Some(c)) = (&self.surface, &self.cover) {
            if s.d != c.d {
                return Err(LabError::config(format!(
                    "surface.d = {} but cover.d = {}",
                    s.d, c.d
                )));
            }
        }
        if let Some(m) = &self.model {
            m.validate()?;
        }
        if self.run.trials == 0 {
            return Err(LabError::config("run.N must be at least 1"));
        }
        if !(self.run.tol > 0.0) {
            return Err(LabError::config("run.tol must be positive"));
        }
        if let Some(t) = &self.tail {
            t.validate()?;
        }
        if let Some(c) = &self.covering {
            if c.epsilons.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
                return Err(LabError::config("covering.epsilons must lie in (0, 1]"));
            }
            if c.sample_count < 10 {
                return Err(LabError::config("covering.sampleCount must be at least 10"));
            }
        }
        if let Some(m) = &self.maurey {
            if m.n == 0 || m.dim == 0 || !(m.epsilon > 0.0) {
                return Err(LabError::config("maurey needs n >= 1, N >= 1 and epsilon > 0"));
            }
        }
        if let Some(s) = &self.scaling {
            if s.radii.is_empty() {
                return Err(LabError::config("scaling.Rs is empty"));
            }
        }
        Ok(())
    }

    pub fn surface(&self) -> Result<&SurfaceSpec> {
        self.surface.as_ref().ok_or_else(|| LabError::config("config has no 'surface' section"))
    }

    pub fn cover(&self) -> Result<&CoverSpec> {
        self.cover.as_ref().ok_or_else(|| LabError::config("config has no 'cover' section"))
    }

    pub fn model(&self) -> Result<&ModelSpec> {
        self.model.as_ref().ok_or_else(|| LabError::config("config has no 'model' section"))
    }

    pub fn geometry(&self) -> CellGeometry {
        self.cover.as_ref().map(|c| c.geometry).unwrap_or_default()
    }

    /// Dimension shared by the surface and cover sections.
    pub fn dim(&self) -> Result<usize> {
        match (&self.surface, &self.cover) {
            (Some(s), _) => Ok(s.d),
            (None, Some(c)) => Ok(c.d),
            _ => Err(LabError::config("config has neither 'surface' nor 'cover'")),
        }
    }

    /// Canonical serialization; the output directory is left out so that
    /// moving a run does not change its identity.
    pub fn canonical_json(&self) -> String {
        let mut c = self.clone();
        c.output.directory = None;
        serde_json::to_string(&c).expect("config serializes")
    }

    /// SHA-256 of the subcommand and canonical config, hex encoded.
    pub fn hash(&self, subcommand: &str) -> String {
        let mut h = Sha256::new();
        h.update(subcommand.as_bytes());
        h.update([0u8]);
        h.update(self.canonical_json().as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// `--out` flag, then the environment, then the config, then `runs`.
    pub fn output_root(&self, flag: Option<&Path>) -> PathBuf {
        if let Some(p) = flag {
            return p.to_path_buf();
        }
        if let Some(p) = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()) {
            return PathBuf::from(p);
        }
        self.output.directory.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }
}
