//! Parameter vector in, channelized FRF feature out: the forward model shared
//! by dataset generation and the likelihood.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    integrate, linear_peak_displacement, BilinearParams, GroundMotion, InitialConditions,
    MdofModel, ResponseRecord, ShearBuilding, TakedaSlipParams,
};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::signal::{add_noise, compute_frf, extract_features, resample, FeatureSample};

fn default_mdof_zeta() -> f64 {
    0.04
}

fn default_sdof_zeta() -> f64 {
    0.05
}

/// Structural model family and its fixed (non-updated) properties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ModelSpec {
    /// Shear building with Takeda-slip stories. `observed` lists the 1-based
    /// floors whose accelerations form the feature.
    TakedaMdof {
        masses: Vec<f64>,
        #[serde(default = "default_mdof_zeta")]
        zeta: f64,
        observed: Vec<usize>,
    },
    /// Unit-mass bilinear oscillator.
    BilinearSdof {
        #[serde(default = "default_sdof_zeta")]
        zeta: f64,
    },
}

impl ModelSpec {
    pub fn n_params(&self) -> usize {
        match self {
            ModelSpec::TakedaMdof { masses, .. } => masses.len() + 6,
            ModelSpec::BilinearSdof { .. } => 3,
        }
    }

    pub fn param_names(&self) -> Vec<String> {
        match self {
            ModelSpec::TakedaMdof { masses, .. } => TakedaSlipParams::<f64>::param_names(masses.len()),
            ModelSpec::BilinearSdof { .. } => BilinearParams::<f64>::param_names(),
        }
    }

    pub fn observed_floors(&self) -> Vec<usize> {
        match self {
            ModelSpec::TakedaMdof { observed, .. } => observed.clone(),
            ModelSpec::BilinearSdof { .. } => vec![1],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::TakedaMdof {
                masses,
                zeta,
                observed,
            } => {
                if masses.is_empty() || masses.iter().any(|&m| !(m > 0.0)) {
                    return Err(Error::InvalidParams("story masses must be positive".into()));
                }
                if observed.is_empty() || observed.iter().any(|&f| f == 0 || f > masses.len()) {
                    return Err(Error::InvalidParams(format!(
                        "observed floors {observed:?} outside 1..={}",
                        masses.len()
                    )));
                }
                check_zeta(*zeta)
            }
            ModelSpec::BilinearSdof { zeta } => check_zeta(*zeta),
        }
    }
}

fn check_zeta(zeta: f64) -> Result<()> {
    if zeta >= 0.0 && zeta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("damping ratio {zeta} outside [0, 1)")))
    }
}

fn default_f_start() -> f64 {
    0.1
}

fn default_n_points() -> usize {
    512
}

fn default_analysis_fs() -> f64 {
    1000.0
}

/// Which FRF bins make up the feature and how the record is analysed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    #[serde(default = "default_f_start")]
    pub f_start: f64,
    #[serde(default = "default_n_points")]
    pub n_points: usize,
    /// Zero-pad records to this many samples before the FFT.
    #[serde(default)]
    pub fft_len: Option<usize>,
    #[serde(default = "default_analysis_fs")]
    pub analysis_fs: f64,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        FeatureSpec {
            f_start: default_f_start(),
            n_points: default_n_points(),
            fft_len: None,
            analysis_fs: default_analysis_fs(),
        }
    }
}

/// A simulated response at the record rate.
#[derive(Debug, Clone)]
pub struct Simulation<T> {
    pub record: ResponseRecord<T>,
    pub nonlinear: bool,
}

/// Noisy measurement of one structure under one motion.
#[derive(Debug, Clone)]
pub struct Observation<T> {
    pub input: GroundMotion<T>,
    pub outputs: Vec<Vec<T>>,
    pub features: FeatureSample<T>,
}

/// Forward model bound to one input motion.
#[derive(Debug, Clone)]
pub struct SimContext<T> {
    pub model: ModelSpec,
    pub features: FeatureSpec,
    pub input: GroundMotion<T>,
    fine: GroundMotion<T>,
    factor: usize,
    labels: Vec<String>,
}

impl<T: Real> SimContext<T> {
    pub fn new(model: ModelSpec, features: FeatureSpec, input: GroundMotion<T>) -> Result<Self> {
        model.validate()?;
        input.validate()?;
        let ratio = features.analysis_fs / input.fs().as_f64();
        let factor = ratio.round() as usize;
        if factor == 0 || (ratio - factor as f64).abs() > 1e-9 * ratio {
            return Err(Error::NonIntegerRate {
                from: input.fs().as_f64(),
                to: features.analysis_fs,
            });
        }
        let fine = if factor == 1 {
            input.clone()
        } else {
            resample(&input, T::lit(features.analysis_fs))?
        };
        let labels = model
            .observed_floors()
            .iter()
            .map(|f| format!("floor{f}"))
            .collect();
        Ok(SimContext {
            model,
            features,
            input,
            fine,
            factor,
            labels,
        })
    }

    pub fn n_params(&self) -> usize {
        self.model.n_params()
    }

    pub fn param_names(&self) -> Vec<String> {
        self.model.param_names()
    }

    /// Feature width `2 * observed floors * n_points`.
    pub fn feature_width(&self) -> usize {
        2 * self.labels.len() * self.features.n_points
    }

    /// Motion at the analysis rate.
    pub fn analysis_motion(&self) -> &GroundMotion<T> {
        &self.fine
    }

    /// Integrates at the analysis rate and decimates back to the record rate.
    pub fn simulate(&self, theta: &[T]) -> Result<Simulation<T>> {
        let record = match &self.model {
            ModelSpec::TakedaMdof { masses, zeta, .. } => {
                let params = TakedaSlipParams::from_slice(theta, masses.len())?;
                let masses = masses.iter().map(|&m| T::lit(m)).collect();
                let model = MdofModel::takeda(&params, masses, T::lit(*zeta))?;
                integrate(&model, &self.fine, &InitialConditions::default())?
            }
            ModelSpec::BilinearSdof { zeta } => {
                let params = BilinearParams::from_slice(theta)?;
                params.validate()?;
                let zeta = T::lit(*zeta);
                let peak = linear_peak_displacement(params.f0, zeta, &self.fine);
                if !(peak > T::zero()) || !peak.is_finite() {
                    return Err(Error::InvalidParams(
                        "linear peak displacement is zero; yield displacement undefined".into(),
                    ));
                }
                let model = ShearBuilding::new(
                    vec![T::one()],
                    vec![params.spring(T::one(), peak)],
                    zeta,
                )?;
                integrate(&model, &self.fine, &InitialConditions::default())?
            }
        };
        let nonlinear = record.yielded;
        let record = if self.factor > 1 {
            record.decimate(self.factor)
        } else {
            record
        };
        if record.abs_acc.iter().flatten().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite("simulated response"));
        }
        Ok(Simulation { record, nonlinear })
    }

    /// FRF features of observed-floor outputs against `input`.
    pub fn features_of(&self, input: &GroundMotion<T>, outputs: &[Vec<T>]) -> Result<FeatureSample<T>> {
        let frfs = outputs
            .iter()
            .map(|y| compute_frf(input, y, self.features.fft_len))
            .collect::<Result<Vec<_>>>()?;
        extract_features(
            &frfs,
            &self.labels,
            T::lit(self.features.f_start),
            self.features.n_points,
        )
    }

    fn observed_outputs(&self, record: &ResponseRecord<T>) -> Vec<Vec<T>> {
        self.model
            .observed_floors()
            .iter()
            .map(|&f| record.abs_acc[f - 1].clone())
            .collect()
    }

    /// Noiseless simulation followed by feature extraction against the
    /// context's input motion.
    pub fn simulate_features(&self, theta: &[T]) -> Result<(FeatureSample<T>, bool)> {
        let sim = self.simulate(theta)?;
        let outputs = self.observed_outputs(&sim.record);
        Ok((self.features_of(&self.input, &outputs)?, sim.nonlinear))
    }

    /// Simulates `theta`, then adds independent Gaussian noise of `sigma` gal
    /// to the input and to every observed output.
    pub fn observe(&self, theta: &[T], sigma: T, seed: u64) -> Result<Observation<T>> {
        let sim = self.simulate(theta)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let input = GroundMotion::new(
            self.input.dt,
            add_noise(&self.input.samples, sigma, &mut rng),
            format!("{}+noise", self.input.label),
        )?;
        let outputs: Vec<Vec<T>> = self
            .observed_outputs(&sim.record)
            .iter()
            .map(|y| add_noise(y, sigma, &mut rng))
            .collect();
        let features = self.features_of(&input, &outputs)?;
        Ok(Observation {
            input,
            outputs,
            features,
        })
    }
}
