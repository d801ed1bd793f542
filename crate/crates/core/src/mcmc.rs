//! Replica-exchange Metropolis-Hastings over a bounded parameter box with a
//! uniform prior.

use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, ParamRanges};
use crate::error::{Error, Result};
use crate::likelihood::{CandidateLikelihood, LogLikelihood};
use crate::posterior::retained_len;
use crate::scalar::Real;
use crate::seeding::stream_rng;
use crate::vae::{LatentGaussian, Vae};

/// Anything that scores a parameter vector.
pub trait LogTarget: Sync {
    fn log_likelihood(&self, theta: &[f64]) -> Result<LogLikelihood>;
}

impl<T: Real> LogTarget for CandidateLikelihood<T> {
    fn log_likelihood(&self, theta: &[f64]) -> Result<LogLikelihood> {
        CandidateLikelihood::log_likelihood(self, theta)
    }
}

/// Adapts a closure into a [`LogTarget`].
pub struct FnTarget<F>(pub F);

impl<F: Fn(&[f64]) -> Result<LogLikelihood> + Sync> LogTarget for FnTarget<F> {
    fn log_likelihood(&self, theta: &[f64]) -> Result<LogLikelihood> {
        (self.0)(theta)
    }
}

/// Random-walk step sizes as fractions of each parameter range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProposalScales {
    Uniform(f64),
    PerParam(Vec<f64>),
}

impl ProposalScales {
    /// Absolute standard deviations for `bounds`.
    pub fn stds(&self, bounds: &ParamRanges) -> Result<Vec<f64>> {
        let fractions = match self {
            ProposalScales::Uniform(s) => vec![*s; bounds.len()],
            ProposalScales::PerParam(v) if v.len() == bounds.len() => v.clone(),
            ProposalScales::PerParam(v) => {
                return Err(Error::DimensionMismatch(format!(
                    "{} proposal scales for {} parameters",
                    v.len(),
                    bounds.len()
                )))
            }
        };
        if fractions.iter().any(|&f| !(f >= 0.0) || !f.is_finite()) {
            return Err(Error::InvalidParams("proposal scales must be >= 0".into()));
        }
        Ok(fractions
            .iter()
            .enumerate()
            .map(|(i, f)| f * bounds.span(i))
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    pub temperatures: Vec<f64>,
    pub steps_per_exchange: usize,
    pub n_exchanges: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub proposal_scales: ProposalScales,
    /// Multiply each replica's step size by `sqrt(T)`.
    pub scale_with_temperature: bool,
    pub seed: u64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            temperatures: vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0],
            steps_per_exchange: 100,
            n_exchanges: 1000,
            burn_in: 10_000,
            thin: 30,
            proposal_scales: ProposalScales::Uniform(0.02),
            scale_with_temperature: false,
            seed: 0,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        let t = &self.temperatures;
        if t.is_empty() || t[0] != 1.0 || t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParams(format!(
                "temperatures must start at 1 and increase strictly, got {t:?}"
            )));
        }
        if self.steps_per_exchange == 0 || self.n_exchanges == 0 || self.thin == 0 {
            return Err(Error::InvalidParams("MCMC counts must be positive".into()));
        }
        if self.burn_in >= self.samples_per_replica() {
            return Err(Error::InvalidParams(format!(
                "burn-in {} leaves nothing of a {}-sample chain",
                self.burn_in,
                self.samples_per_replica()
            )));
        }
        Ok(())
    }

    pub fn samples_per_replica(&self) -> usize {
        self.steps_per_exchange * self.n_exchanges
    }

    /// T = 1 samples left after burn-in and thinning.
    pub fn retained_samples(&self) -> usize {
        retained_len(self.samples_per_replica(), self.burn_in, self.thin)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaState {
    pub theta: Vec<f64>,
    pub log_l: LogLikelihood,
    pub temperature: f64,
}

/// Gaussian random walk per coordinate, reflected back into the box.
pub fn propose<R: Rng + ?Sized>(
    theta: &[f64],
    stds: &[f64],
    bounds: &ParamRanges,
    rng: &mut R,
) -> Vec<f64> {
    theta
        .iter()
        .zip(stds)
        .zip(&bounds.0)
        .map(|((&x, &s), r)| {
            if s == 0.0 {
                return x;
            }
            let z: f64 = rng.sample(StandardNormal);
            reflect(x + s * z, r.lower, r.upper)
        })
        .collect()
}

fn reflect(x: f64, lo: f64, hi: f64) -> f64 {
    let width = hi - lo;
    let period = 2.0 * width;
    let mut y = (x - lo).rem_euclid(period);
    if y > width {
        y = period - y;
    }
    (lo + y).clamp(lo, hi)
}

/// Tempered Metropolis acceptance test for `proposed` against `current`.
fn accept<R: Rng + ?Sized>(current: LogLikelihood, proposed: LogLikelihood, t: f64, rng: &mut R) -> bool {
    match (current, proposed) {
        (_, LogLikelihood::Invalid) => false,
        (LogLikelihood::Invalid, LogLikelihood::Valid(_)) => true,
        (LogLikelihood::Valid(a), LogLikelihood::Valid(b)) => {
            let diff = (b - a) / t;
            diff >= 0.0 || rng.random::<f64>().ln() < diff
        }
    }
}

/// One Metropolis-Hastings step. Returns whether the proposal was accepted.
pub fn mh_step<R: Rng + ?Sized>(
    state: &mut ReplicaState,
    target: &dyn LogTarget,
    stds: &[f64],
    bounds: &ParamRanges,
    rng: &mut R,
) -> Result<bool> {
    let proposal = propose(&state.theta, stds, bounds, rng);
    let log_l = target.log_likelihood(&proposal)?;
    let ok = accept(state.log_l, log_l, state.temperature, rng);
    if ok {
        state.theta = proposal;
        state.log_l = log_l;
    }
    Ok(ok)
}

/// Swap acceptance probability between two tempered replicas.
pub fn exchange_probability(a: &ReplicaState, b: &ReplicaState) -> f64 {
    match (a.log_l, b.log_l) {
        (LogLikelihood::Valid(la), LogLikelihood::Valid(lb)) => {
            let log_ratio = (1.0 / a.temperature - 1.0 / b.temperature) * (lb - la);
            if log_ratio >= 0.0 {
                1.0
            } else {
                log_ratio.exp()
            }
        }
        _ => 0.0,
    }
}

/// Per-replica traces and counters. Replica `r` runs at `temperatures[r]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainStore {
    pub param_names: Vec<String>,
    pub temperatures: Vec<f64>,
    /// Row-major `len x n_params` per replica.
    pub thetas: Vec<Vec<f64>>,
    /// `-inf` marks an invalid likelihood.
    pub log_l: Vec<Vec<f64>>,
    pub accepted: Vec<usize>,
    pub proposed: Vec<usize>,
    pub swaps_accepted: Vec<usize>,
    pub swaps_attempted: Vec<usize>,
}

impl ChainStore {
    fn new(param_names: Vec<String>, temperatures: Vec<f64>, capacity: usize) -> Self {
        let r = temperatures.len();
        let n = param_names.len();
        ChainStore {
            param_names,
            thetas: vec![Vec::with_capacity(capacity * n); r],
            log_l: vec![Vec::with_capacity(capacity); r],
            accepted: vec![0; r],
            proposed: vec![0; r],
            swaps_accepted: vec![0; r.saturating_sub(1)],
            swaps_attempted: vec![0; r.saturating_sub(1)],
            temperatures,
        }
    }

    pub fn n_params(&self) -> usize {
        self.param_names.len()
    }

    pub fn replicas(&self) -> usize {
        self.temperatures.len()
    }

    /// Samples stored per replica.
    pub fn len(&self) -> usize {
        self.log_l.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample(&self, replica: usize, step: usize) -> &[f64] {
        let n = self.n_params();
        &self.thetas[replica][step * n..(step + 1) * n]
    }

    /// Trace of parameter `j` in `replica`.
    pub fn series(&self, replica: usize, j: usize) -> Vec<f64> {
        self.thetas[replica]
            .iter()
            .skip(j)
            .step_by(self.n_params())
            .copied()
            .collect()
    }

    pub fn acceptance_rate(&self, replica: usize) -> f64 {
        ratio(self.accepted[replica], self.proposed[replica])
    }

    pub fn swap_rate(&self, pair: usize) -> f64 {
        ratio(self.swaps_accepted[pair], self.swaps_attempted[pair])
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// A run stopped by a target error, with everything sampled before it.
#[derive(Debug)]
pub struct RunAborted {
    pub chains: ChainStore,
    pub error: Error,
}

impl fmt::Display for RunAborted {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "sampler aborted after {} samples: {}", self.chains.len(), self.error)
    }
}

impl std::error::Error for RunAborted {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<RunAborted> for Error {
    fn from(r: RunAborted) -> Self {
        r.error
    }
}

/// Alternates `steps_per_exchange` MH steps on every replica (in parallel)
/// with one sweep of adjacent swap attempts. Even rounds pair (0,1), (2,3),
/// ...; odd rounds pair (1,2), (3,4), .... Every replica starts from `start`.
pub fn run_replica_exchange(
    cfg: &McmcConfig,
    target: &dyn LogTarget,
    bounds: &ParamRanges,
    start: &[f64],
) -> std::result::Result<ChainStore, RunAborted> {
    let mut chains = ChainStore::new(bounds.names(), cfg.temperatures.clone(), cfg.samples_per_replica());
    let abort = |chains: ChainStore, error: Error| RunAborted { chains, error };
    if let Err(e) = cfg
        .validate()
        .and_then(|_| bounds.validate())
        .and_then(|_| bounds.check(start))
    {
        return Err(abort(chains, e));
    }
    let base_stds = match cfg.proposal_scales.stds(bounds) {
        Ok(s) => s,
        Err(e) => return Err(abort(chains, e)),
    };
    let start_l = match target.log_likelihood(start) {
        Ok(l) => l,
        Err(e) => return Err(abort(chains, e)),
    };
    let mut states: Vec<ReplicaState> = cfg
        .temperatures
        .iter()
        .map(|&t| ReplicaState {
            theta: start.to_vec(),
            log_l: start_l,
            temperature: t,
        })
        .collect();
    let stds: Vec<Vec<f64>> = cfg
        .temperatures
        .iter()
        .map(|&t| {
            let f = if cfg.scale_with_temperature { t.sqrt() } else { 1.0 };
            base_stds.iter().map(|s| s * f).collect()
        })
        .collect();
    let n_rep = states.len();
    let report_every = (cfg.n_exchanges / 10).max(1);
    const SWAP_STREAM: u64 = u64::MAX;

    for round in 0..cfg.n_exchanges {
        let results: Vec<Result<(Vec<f64>, Vec<f64>, usize)>> = states
            .par_iter_mut()
            .enumerate()
            .map(|(r, state)| {
                let mut rng = stream_rng(cfg.seed, &[r as u64, round as u64]);
                let mut thetas = Vec::with_capacity(cfg.steps_per_exchange * start.len());
                let mut lls = Vec::with_capacity(cfg.steps_per_exchange);
                let mut acc = 0;
                for _ in 0..cfg.steps_per_exchange {
                    acc += mh_step(state, target, &stds[r], bounds, &mut rng)? as usize;
                    thetas.extend_from_slice(&state.theta);
                    lls.push(state.log_l.or_neg_inf());
                }
                Ok((thetas, lls, acc))
            })
            .collect();
        let mut failure = None;
        for (r, res) in results.into_iter().enumerate() {
            match res {
                Ok((thetas, lls, acc)) => {
                    chains.thetas[r].extend(thetas);
                    chains.log_l[r].extend(lls);
                    chains.accepted[r] += acc;
                    chains.proposed[r] += cfg.steps_per_exchange;
                }
                Err(e) => failure = failure.or(Some(e)),
            }
        }
        if let Some(e) = failure {
            // Keep the traces rectangular: drop this round's partial output.
            let keep = round * cfg.steps_per_exchange;
            for r in 0..n_rep {
                chains.log_l[r].truncate(keep);
                chains.thetas[r].truncate(keep * start.len());
            }
            return Err(abort(chains, e));
        }

        let mut rng = stream_rng(cfg.seed, &[SWAP_STREAM, round as u64]);
        let mut i = round % 2;
        while i + 1 < n_rep {
            chains.swaps_attempted[i] += 1;
            let p = exchange_probability(&states[i], &states[i + 1]);
            if p > 0.0 && (p >= 1.0 || rng.random::<f64>() < p) {
                let (lo, hi) = states.split_at_mut(i + 1);
                std::mem::swap(&mut lo[i].theta, &mut hi[0].theta);
                std::mem::swap(&mut lo[i].log_l, &mut hi[0].log_l);
                chains.swaps_accepted[i] += 1;
            }
            i += 2;
        }

        if (round + 1) % report_every == 0 {
            let rates: Vec<String> = (0..n_rep)
                .map(|r| format!("{:.2}", chains.acceptance_rate(r)))
                .collect();
            log::info!(
                "mcmc: round {}/{}, acceptance [{}]",
                round + 1,
                cfg.n_exchanges,
                rates.join(", ")
            );
        }
    }
    Ok(chains)
}

/// Index and parameters of the dataset sample whose encoder mean lies
/// closest (Euclidean) to `obs`. Ties go to the lowest index.
pub fn init_replicas<T: Real>(
    ds: &Dataset,
    obs: &LatentGaussian<T>,
    vae: &Vae<T>,
) -> Result<(usize, Vec<f64>)> {
    if ds.is_empty() {
        return Err(Error::InvalidInput("empty dataset".into()));
    }
    vae.check_layout(ds.manifest.width, obs.dim())?;
    let w = ds.manifest.width;
    let data: Vec<T> = ds.standardized_features();
    let mut best = (f64::INFINITY, 0usize);
    for (c, chunk) in data.chunks(256 * w).enumerate() {
        for (k, g) in vae.encode_batch(chunk)?.iter().enumerate() {
            let d: f64 = g
                .mu
                .iter()
                .zip(&obs.mu)
                .map(|(a, b)| (a.as_f64() - b.as_f64()).powi(2))
                .sum();
            if d < best.0 {
                best = (d, c * 256 + k);
            }
        }
    }
    let ranges = &ds.manifest.ranges;
    let theta = ds
        .theta(best.1)
        .iter()
        .zip(&ranges.0)
        .map(|(&v, r)| v.clamp(r.lower, r.upper))
        .collect();
    Ok((best.1, theta))
}
