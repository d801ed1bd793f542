//! Closed-form latent-space likelihood and replica tempering.
//!
//! Given the encoder Gaussians of the observation (`1`), of a simulation
//! (`2`) and the latent prior (`3`), each latent dimension contributes
//!
//! ```text
//! L_i = ∫ N(z; μ1, σ1) N(z; μ2, σ2) / N(z; μ3, σ3) dz
//!     = d exp((b² - 4ac) / 4a) sqrt(π / a)
//! ```
//!
//! with `a = (1/σ1² + 1/σ2² - 1/σ3²) / 2`. The integral exists only for
//! `a > 0`.

use serde::{Deserialize, Serialize};

use crate::dataset::ParamRanges;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::signal::Standardizer;
use crate::simulator::SimContext;
use crate::vae::{LatentGaussian, Vae};

/// Smallest admissible quadratic coefficient.
pub const A_MIN: f64 = 1e-12;

/// Natural-log likelihood up to an additive constant, or a marker that the
/// candidate cannot be scored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LogLikelihood {
    Valid(f64),
    Invalid,
}

impl LogLikelihood {
    pub fn value(self) -> Option<f64> {
        match self {
            LogLikelihood::Valid(v) => Some(v),
            LogLikelihood::Invalid => None,
        }
    }

    pub fn is_valid(self) -> bool {
        matches!(self, LogLikelihood::Valid(_))
    }

    /// `-inf` for invalid values, convenient for storage and comparisons.
    pub fn or_neg_inf(self) -> f64 {
        self.value().unwrap_or(f64::NEG_INFINITY)
    }
}

/// Tempered log-likelihood `logL / T`.
pub fn temper(log_l: LogLikelihood, t: f64) -> LogLikelihood {
    debug_assert!(t >= 1.0, "temperature below 1");
    match log_l {
        LogLikelihood::Valid(v) => LogLikelihood::Valid(v / t),
        LogLikelihood::Invalid => LogLikelihood::Invalid,
    }
}

/// Per-dimension coefficients of the closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodTerms {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    pub log_l: Vec<f64>,
}

/// One latent dimension. `None` when `a <= A_MIN`.
///
/// The exponent is evaluated from pairwise mean differences,
/// `(b² - 4ac) / 4a = -[p1 p2 Δ12² - (p1 p3 Δ13² + p2 p3 Δ23²)] / (2 (p1 + p2 - p3))`
/// with precisions `p = 1/σ²`, which avoids the cancellation of the expanded
/// form and is exactly symmetric in the first two arguments.
pub fn log_l_dim(mu: [f64; 3], sigma: [f64; 3]) -> Option<f64> {
    let p = sigma.map(|s| 1.0 / (s * s));
    let sum = (p[0] + p[1]) - p[2];
    let a = 0.5 * sum;
    if !(a > A_MIN) {
        return None;
    }
    let d12 = mu[0] - mu[1];
    let d13 = mu[0] - mu[2];
    let d23 = mu[1] - mu[2];
    let num = p[0] * p[1] * (d12 * d12) - (p[0] * p[2] * (d13 * d13) + p[1] * p[2] * (d23 * d23));
    let exponent = -num / (2.0 * sum);
    let ln_d = sigma[2].ln() - (sigma[0].ln() + sigma[1].ln()) - 0.5 * (2.0 * std::f64::consts::PI).ln();
    Some(ln_d + exponent + 0.5 * (std::f64::consts::PI / a).ln())
}

fn check(g: &LatentGaussian<f64>, what: &str) -> Result<()> {
    if g.mu.iter().chain(&g.sigma).any(|v| v.is_nan()) {
        return Err(Error::NonFinite("latent Gaussian"));
    }
    if g.sigma.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
        return Err(Error::InvalidInput(format!("{what} has a non-positive sigma")));
    }
    Ok(())
}

fn widen<T: Real>(g: &LatentGaussian<T>) -> LatentGaussian<f64> {
    LatentGaussian {
        mu: g.mu.iter().map(|v| v.as_f64()).collect(),
        sigma: g.sigma.iter().map(|v| v.as_f64()).collect(),
    }
}

/// Sum over latent dimensions of the closed-form log integral, evaluated in
/// `f64` whatever the encoder precision.
pub fn latent_log_likelihood<T: Real>(
    obs: &LatentGaussian<T>,
    sim: &LatentGaussian<T>,
    prior: &LatentGaussian<T>,
) -> Result<LogLikelihood> {
    let (obs, sim, prior) = (widen(obs), widen(sim), widen(prior));
    let z = obs.dim();
    if sim.dim() != z || prior.dim() != z {
        return Err(Error::DimensionMismatch(format!(
            "latent dimensions {}, {}, {}",
            z,
            sim.dim(),
            prior.dim()
        )));
    }
    check(&obs, "observation")?;
    check(&sim, "simulation")?;
    check(&prior, "prior")?;
    let mut total = 0.0;
    for i in 0..z {
        match log_l_dim(
            [obs.mu[i], sim.mu[i], prior.mu[i]],
            [obs.sigma[i], sim.sigma[i], prior.sigma[i]],
        ) {
            Some(v) => total += v,
            None => return Ok(LogLikelihood::Invalid),
        }
    }
    Ok(if total.is_finite() {
        LogLikelihood::Valid(total)
    } else {
        LogLikelihood::Invalid
    })
}

/// The textbook `a, b, c, d` coefficients and per-dimension contributions.
pub fn likelihood_terms<T: Real>(
    obs: &LatentGaussian<T>,
    sim: &LatentGaussian<T>,
    prior: &LatentGaussian<T>,
) -> Result<LikelihoodTerms> {
    let (obs, sim, prior) = (widen(obs), widen(sim), widen(prior));
    let z = obs.dim();
    if sim.dim() != z || prior.dim() != z {
        return Err(Error::DimensionMismatch("latent dimensions differ".into()));
    }
    let mut t = LikelihoodTerms {
        a: Vec::with_capacity(z),
        b: Vec::with_capacity(z),
        c: Vec::with_capacity(z),
        d: Vec::with_capacity(z),
        log_l: Vec::with_capacity(z),
    };
    for i in 0..z {
        let (m1, m2, m3) = (obs.mu[i], sim.mu[i], prior.mu[i]);
        let (v1, v2, v3) = (
            obs.sigma[i].powi(2),
            sim.sigma[i].powi(2),
            prior.sigma[i].powi(2),
        );
        t.a.push(0.5 / v1 + 0.5 / v2 - 0.5 / v3);
        t.b.push(-m1 / v1 - m2 / v2 + m3 / v3);
        t.c.push(m1 * m1 / (2.0 * v1) + m2 * m2 / (2.0 * v2) - m3 * m3 / (2.0 * v3));
        t.d.push((v3 / (2.0 * std::f64::consts::PI * v1 * v2)).sqrt());
        t.log_l.push(
            log_l_dim([m1, m2, m3], [obs.sigma[i], sim.sigma[i], prior.sigma[i]])
                .unwrap_or(f64::NAN),
        );
    }
    Ok(t)
}

/// Scores candidate parameter vectors against a fixed observation: simulate,
/// extract and standardize features, encode, and compare in latent space
/// against a standard-normal prior.
#[derive(Debug, Clone)]
pub struct CandidateLikelihood<T> {
    pub ctx: SimContext<f64>,
    pub vae: Vae<T>,
    pub standardizer: Standardizer,
    pub bounds: ParamRanges,
    pub obs: LatentGaussian<T>,
    prior: LatentGaussian<T>,
}

impl<T: Real> CandidateLikelihood<T> {
    /// `obs_features` is the raw (unstandardized) observed feature vector.
    pub fn new(
        ctx: SimContext<f64>,
        vae: Vae<T>,
        standardizer: Standardizer,
        bounds: ParamRanges,
        obs_features: &[f64],
    ) -> Result<Self> {
        if obs_features.len() != vae.arch.input_dim || ctx.feature_width() != vae.arch.input_dim {
            return Err(Error::DimensionMismatch(format!(
                "feature width {} (observation {}) against a VAE input of {}",
                ctx.feature_width(),
                obs_features.len(),
                vae.arch.input_dim
            )));
        }
        if bounds.len() != ctx.n_params() {
            return Err(Error::DimensionMismatch(format!(
                "{} bounds for {} parameters",
                bounds.len(),
                ctx.n_params()
            )));
        }
        let obs = Self::encode_raw(&vae, &standardizer, obs_features)?;
        let prior = LatentGaussian::standard(vae.arch.z_dim);
        Ok(CandidateLikelihood {
            ctx,
            vae,
            standardizer,
            bounds,
            obs,
            prior,
        })
    }

    fn encode_raw(vae: &Vae<T>, standardizer: &Standardizer, raw: &[f64]) -> Result<LatentGaussian<T>> {
        let mut x: Vec<T> = raw.iter().map(|&v| T::lit(v)).collect();
        standardizer.apply(&mut x);
        vae.encode(&x)
    }

    pub fn log_likelihood(&self, theta: &[f64]) -> Result<LogLikelihood> {
        self.bounds.check(theta)?;
        let features = match self.ctx.simulate_features(theta) {
            Ok((f, _)) => f,
            Err(e) => {
                log::debug!("candidate {theta:?} rejected: {e}");
                return Ok(LogLikelihood::Invalid);
            }
        };
        let sim = match Self::encode_raw(&self.vae, &self.standardizer, &features.values) {
            Ok(g) => g,
            Err(_) => return Ok(LogLikelihood::Invalid),
        };
        latent_log_likelihood(&self.obs, &sim, &self.prior)
    }
}
