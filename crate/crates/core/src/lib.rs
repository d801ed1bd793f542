//! Bayesian updating of hysteretic structural models from a single seismic
//! record, using a variational autoencoder's latent space to score
//! candidates inside a replica-exchange sampler.
//!
//! Numeric code is generic over [`Real`]; the aliases below fix the
//! precisions used by the command-line pipeline.

pub mod dataset;
pub mod dynamics;
pub mod error;
pub mod likelihood;
pub mod mcmc;
pub mod posterior;
pub mod scalar;
pub mod seeding;
pub mod signal;
pub mod simulator;
pub mod vae;

pub use dataset::{Dataset, DatasetConfig, DatasetManifest, ParamRange, ParamRanges};
pub use dynamics::{
    BilinearParams, GroundMotion, HysteresisState, ResponseRecord, TakedaSlipParams,
};
pub use error::{Error, Result};
pub use likelihood::{latent_log_likelihood, temper, CandidateLikelihood, LogLikelihood};
pub use mcmc::{run_replica_exchange, ChainStore, LogTarget, McmcConfig};
pub use posterior::{PosteriorSummary, WidthRow};
pub use scalar::Real;
pub use signal::{FeatureSample, Standardizer, SynthSpec};
pub use simulator::{FeatureSpec, ModelSpec, SimContext};
pub use vae::{LatentGaussian, TrainConfig, Vae, VaeArch};

pub type GroundMotion64 = GroundMotion<f64>;
pub type FeatureSample32 = FeatureSample<f32>;
pub type FeatureSample64 = FeatureSample<f64>;
pub type LatentGaussian32 = LatentGaussian<f32>;
pub type LatentGaussian64 = LatentGaussian<f64>;
pub type Vae32 = Vae<f32>;
pub type Vae64 = Vae<f64>;
pub type SimContext64 = SimContext<f64>;
pub type MdofModel64 = dynamics::MdofModel<f64>;
pub type BilinearSdof64 = dynamics::BilinearSdof<f64>;
