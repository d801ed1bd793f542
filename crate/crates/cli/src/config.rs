use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use hystup::seeding::derive_seed;
use hystup::signal::SynthSpec;
use hystup::{DatasetConfig, FeatureSpec, McmcConfig, ModelSpec, ParamRanges, TrainConfig};
use serde::{Deserialize, Serialize};

/// Sub-seed slots derived from the master seed.
pub mod slot {
    pub const MOTION: u64 = 1;
    pub const OBSERVATION: u64 = 2;
    pub const DATASET: u64 = 3;
    pub const VAE_INIT: u64 = 4;
    pub const TRAIN: u64 = 5;
    pub const MCMC: u64 = 6;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    pub model: ModelSpec,
    /// Prior box. Defaults to the bundled ranges for the model family.
    #[serde(default)]
    pub ranges: Option<ParamRanges>,
    pub motion: MotionSection,
    pub observation: ObservationSection,
    #[serde(default)]
    pub features: FeatureSpec,
    #[serde(default)]
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub vae: VaeSection,
    #[serde(default)]
    pub mcmc: McmcConfig,
    #[serde(default)]
    pub analysis: AnalysisSection,
}

fn default_out() -> PathBuf {
    PathBuf::from("hystup-out")
}

/// Either a record file or a synthetic motion spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionSection {
    #[serde(default)]
    pub file: Option<PathBuf>,
    #[serde(default)]
    pub synth: Option<SynthSpec>,
}

fn default_noise() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationSection {
    /// Parameter vectors of the structures being observed, one update each.
    pub targets: Vec<Vec<f64>>,
    /// Gal, added to the input and to every observed output.
    #[serde(default = "default_noise")]
    pub noise_sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

fn default_z_dim() -> usize {
    10
}

fn default_hidden() -> Vec<usize> {
    vec![512, 256, 128]
}

fn default_slope() -> f64 {
    0.01
}

fn default_precision() -> Precision {
    Precision::F32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VaeSection {
    #[serde(default = "default_z_dim")]
    pub z_dim: usize,
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default = "default_slope")]
    pub leaky_slope: f64,
    #[serde(default = "default_precision")]
    pub precision: Precision,
    #[serde(default)]
    pub train: TrainConfig,
}

impl Default for VaeSection {
    fn default() -> Self {
        VaeSection {
            z_dim: default_z_dim(),
            hidden: default_hidden(),
            leaky_slope: default_slope(),
            precision: default_precision(),
            train: TrainConfig::default(),
        }
    }
}

fn default_kde_points() -> usize {
    256
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    #[serde(default = "default_kde_points")]
    pub kde_points: usize,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            kde_points: default_kde_points(),
        }
    }
}

impl PipelineConfig {
    /// Reads a TOML config. A relative motion path is taken relative to the
    /// config file.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: PipelineConfig =
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if let Some(file) = &cfg.motion.file {
            if file.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.motion.file = Some(base.join(file));
            }
        }
        Ok(cfg)
    }

    /// Applies command-line overrides, fills defaults and writes the derived
    /// sub-seeds into their sections so the echoed config is complete.
    pub fn resolve(mut self, seed: Option<u64>, out: Option<PathBuf>) -> anyhow::Result<Self> {
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(o) = out {
            self.out = o;
        }
        if self.ranges.is_none() {
            self.ranges = Some(default_ranges(&self.model)?);
        }
        self.dataset.seed = derive_seed(self.seed, &[slot::DATASET]);
        self.vae.train.seed = derive_seed(self.seed, &[slot::TRAIN]);
        self.mcmc.seed = derive_seed(self.seed, &[slot::MCMC]);
        self.validate()?;
        Ok(self)
    }

    pub fn ranges(&self) -> &ParamRanges {
        self.ranges.as_ref().expect("resolved config has ranges")
    }

    fn validate(&self) -> anyhow::Result<()> {
        self.model.validate().context("model section")?;
        let ranges = self.ranges();
        ranges.validate().context("ranges section")?;
        if ranges.len() != self.model.n_params() {
            bail!(
                "ranges section lists {} parameters, the model has {} ({})",
                ranges.len(),
                self.model.n_params(),
                self.model.param_names().join(", ")
            );
        }
        if ranges.names() != self.model.param_names() {
            bail!(
                "range names {:?} do not match model parameters {:?}",
                ranges.names(),
                self.model.param_names()
            );
        }
        match (&self.motion.file, &self.motion.synth) {
            (Some(f), None) => {
                if !f.exists() {
                    bail!("motion file {} does not exist", f.display());
                }
            }
            (None, Some(_)) => {}
            _ => bail!("motion section needs exactly one of `file` or `synth`"),
        }
        if self.observation.targets.is_empty() {
            bail!("observation section needs at least one target");
        }
        for t in &self.observation.targets {
            if t.len() != ranges.len() {
                bail!("target {t:?} has {} values, expected {}", t.len(), ranges.len());
            }
            if !ranges.contains(t) {
                log::warn!("target {t:?} lies outside the prior box");
            }
        }
        if !(self.observation.noise_sigma >= 0.0) {
            bail!("noise_sigma must be >= 0");
        }
        if self.vae.z_dim == 0 {
            bail!("vae.z_dim must be positive");
        }
        self.vae.train.validate()?;
        self.mcmc.validate()?;
        Ok(())
    }
}

fn default_ranges(model: &ModelSpec) -> anyhow::Result<ParamRanges> {
    match model {
        ModelSpec::BilinearSdof { .. } => Ok(ParamRanges::bilinear_sdof()),
        ModelSpec::TakedaMdof { masses, .. } if masses.len() == 3 => Ok(ParamRanges::takeda_mdof()),
        ModelSpec::TakedaMdof { masses, .. } => bail!(
            "no bundled ranges for a {}-story model; add a `ranges` list",
            masses.len()
        ),
    }
}
