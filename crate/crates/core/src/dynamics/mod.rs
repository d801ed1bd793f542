//! Story restoring-force laws and time integration of shear-building models
//! under ground acceleration.

mod hysteresis;
mod model;
mod motion;
mod newmark;

pub use hysteresis::{
    Backbone, BilinearSpring, BilinearState, Branch, Hysteresis, HysteresisState, LinearSpring,
    TakedaSpring,
};
pub use model::{
    BilinearParams, BilinearSdof, LinearSdof, MdofModel, ShearBuilding, TakedaSlipParams,
    DEFAULT_STORY_MASS,
};
pub use motion::{GroundMotion, GAL};
pub use newmark::{
    integrate, linear_peak_displacement, newmark_integrate, InitialConditions, ResponseRecord,
    MAX_ITERATIONS, NEWMARK_BETA, NEWMARK_GAMMA, RESIDUAL_TOL,
};
