//! Run configuration: a TOML file merged with command-line overrides.

use std::path::{Path, PathBuf};

use molvox::denoise::{GmmModel, TrainHyper};
use molvox::extract::RefineConfig;
use molvox::grid::{BoundsPolicy, Cutoff, Element, ElementSet, GridSpec, Placement, Voxelizer};
use molvox::sampler::SamplerParams;
use molvox::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed. Required, either here or via `--seed`.
    pub seed: Option<u64>,
    pub grid: GridConfig,
    pub train: TrainConfig,
    pub sample: SampleConfig,
    pub extract: RefineConfig,
    pub eval: EvalConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub length: usize,
    pub resolution: f64,
    pub atom_radius: f64,
    pub elements: Vec<Element>,
    pub placement: Placement,
    pub bounds: BoundsPolicy,
    pub cutoff: Cutoff,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            length: 32,
            resolution: 0.25,
            atom_radius: 0.5,
            elements: ElementSet::qm9().elements().to_vec(),
            placement: Placement::Center,
            bounds: BoundsPolicy::Error,
            cutoff: Cutoff::default(),
        }
    }
}

impl GridConfig {
    pub fn spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.length, self.resolution, self.elements.len(), self.atom_radius)
    }

    pub fn voxelizer(&self) -> Result<Voxelizer> {
        self.voxelizer_for(self.spec()?)
    }

    /// A voxelizer over an existing grid's geometry with this config's elements and kernel options.
    pub fn voxelizer_for(&self, spec: GridSpec) -> Result<Voxelizer> {
        Ok(Voxelizer::new(spec, ElementSet::new(self.elements.clone())?)?
            .with_cutoff(self.cutoff)
            .with_bounds(self.bounds))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub sigma: f64,
    pub hyper: TrainHyper,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            sigma: 0.9,
            hyper: TrainHyper::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    pub n_samples: usize,
    /// Trained denoiser to sample from.
    pub checkpoint: Option<PathBuf>,
    /// Closed-form mixture used instead of a checkpoint.
    pub oracle: Option<OracleConfig>,
    pub params: SamplerParams,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            n_samples: 8,
            checkpoint: None,
            oracle: None,
            params: SamplerParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub sigma: f64,
    pub components: GmmModel,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Bond radii and valences; built-in tables when absent.
    pub tables: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        if path.extension().is_some_and(|e| e == "json") {
            RunConfig::from_manifest_str(&text)
        } else {
            RunConfig::from_toml_str(&text)
        }
    }

    /// Reads the resolved config back out of a run manifest (or a bare JSON config).
    pub fn from_manifest_str(text: &str) -> Result<Self> {
        let mut v: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(inner) = v.get_mut("config") {
            v = inner.take();
        }
        serde_json::from_value(v).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::Config("a seed is required: set `seed` in the config or pass --seed".into()))
    }
}
