//! Uniform parameter sampling, batch simulation into feature rows, and the
//! on-disk dataset format.
//!
//! File layout: 8-byte magic `HYSTUPDS`, `u32` version, `u32` manifest length
//! (all little-endian), the JSON manifest, then `f32` thetas (`count x
//! n_params`) followed by `f32` features (`count x width`), row-major.

use std::fs::{self, File};
use std::io::Read;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::seeding::stream_rng;
use crate::signal::Standardizer;
use crate::simulator::{FeatureSpec, ModelSpec, SimContext};

pub const DATASET_MAGIC: &[u8; 8] = b"HYSTUPDS";
pub const DATASET_VERSION: u32 = 1;
/// Redraws allowed for a single sample index before giving up on it.
const MAX_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

/// Box of admissible parameter values, one interval per parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamRanges(pub Vec<ParamRange>);

impl ParamRanges {
    pub fn new(entries: &[(&str, f64, f64)]) -> Self {
        ParamRanges(
            entries
                .iter()
                .map(|&(name, lower, upper)| ParamRange {
                    name: name.to_string(),
                    lower,
                    upper,
                })
                .collect(),
        )
    }

    /// Three-story Takeda-slip model (stiffness kN/mm, displacements cm).
    pub fn takeda_mdof() -> Self {
        ParamRanges::new(&[
            ("k1", 100.0, 200.0),
            ("k2", 60.0, 160.0),
            ("k3", 20.0, 120.0),
            ("d_c", 0.25, 2.0),
            ("d_y", 2.0, 8.0),
            ("alpha1", 0.05, 0.25),
            ("alpha2", 0.0, 0.05),
            ("beta", 0.0, 1.0),
            ("gamma", 0.0, 1.0),
        ])
    }

    pub fn bilinear_sdof() -> Self {
        ParamRanges::new(&[
            ("f0", 0.5, 5.0),
            ("yield_ratio", 0.2, 1.8),
            ("alpha", 0.0, 0.5),
        ])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.0.iter().map(|r| r.name.clone()).collect()
    }

    pub fn lower(&self) -> Vec<f64> {
        self.0.iter().map(|r| r.lower).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.0.iter().map(|r| r.upper).collect()
    }

    pub fn span(&self, i: usize) -> f64 {
        self.0[i].upper - self.0[i].lower
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.is_empty() {
            return Err(Error::InvalidParams("no parameter ranges".into()));
        }
        for r in &self.0 {
            if !(r.lower < r.upper) || !r.lower.is_finite() || !r.upper.is_finite() {
                return Err(Error::InvalidParams(format!(
                    "range of {} is [{}, {}]",
                    r.name, r.lower, r.upper
                )));
            }
        }
        Ok(())
    }

    /// Errors unless `theta` lies in the closed box.
    pub fn check(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} parameters",
                theta.len(),
                self.len()
            )));
        }
        for (v, r) in theta.iter().zip(&self.0) {
            if !(*v >= r.lower && *v <= r.upper) {
                return Err(Error::OutOfBounds(format!(
                    "{} = {v} outside [{}, {}]",
                    r.name, r.lower, r.upper
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        self.check(theta).is_ok()
    }
}

/// Independent uniform draw inside every interval.
pub fn sample_parameters<R: Rng + ?Sized>(ranges: &ParamRanges, rng: &mut R) -> Vec<f64> {
    ranges
        .0
        .iter()
        .map(|r| r.lower + (r.upper - r.lower) * rng.random::<f64>())
        .collect()
}

/// Everything about a dataset except its arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub count: usize,
    pub n_params: usize,
    pub width: usize,
    pub ranges: ParamRanges,
    pub seed: u64,
    pub model: ModelSpec,
    pub features: FeatureSpec,
    pub channel_map: Vec<String>,
    pub n_points: usize,
    pub f_start: f64,
    pub df: f64,
    pub standardizer: Standardizer,
    pub motion_label: String,
    /// Share of samples whose response went past yield.
    pub nonlinear_fraction: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub thetas: Vec<f32>,
    pub features: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub count: usize,
    pub seed: u64,
    pub max_failure_rate: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            count: 5000,
            seed: 0,
            max_failure_rate: 0.01,
        }
    }
}

/// One successful draw.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedSample {
    pub theta: Vec<f64>,
    pub features: Vec<f32>,
    pub nonlinear: bool,
    pub failures: usize,
}

/// Draws parameters for sample `index` until a simulation succeeds. Draws
/// are rounded to `f32` (the storage precision) before simulating, so stored
/// thetas reproduce stored features exactly.
pub fn generate_sample(
    ctx: &SimContext<f64>,
    ranges: &ParamRanges,
    seed: u64,
    index: usize,
) -> Result<GeneratedSample> {
    let mut last_err = None;
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = stream_rng(seed, &[index as u64, attempt as u64]);
        let theta: Vec<f64> = sample_parameters(ranges, &mut rng)
            .iter()
            .zip(&ranges.0)
            .map(|(&v, r)| (v as f32 as f64).clamp(r.lower, r.upper))
            .collect();
        match ctx.simulate_features(&theta) {
            Ok((f, nonlinear)) => {
                let features: Vec<f32> = f.values.iter().map(|&v| v as f32).collect();
                if features.iter().all(|v| v.is_finite()) {
                    return Ok(GeneratedSample {
                        theta,
                        features,
                        nonlinear,
                        failures: attempt,
                    });
                }
                last_err = Some(Error::NonFinite("features"));
            }
            Err(e) => {
                log::debug!("sample {index} attempt {attempt} failed: {e}");
                last_err = Some(e);
            }
        }
    }
    Err(last_err.unwrap_or(Error::TooManyFailures {
        failures: MAX_ATTEMPTS,
        attempts: MAX_ATTEMPTS,
    }))
}

/// Simulates `cfg.count` uniform draws in parallel. Content depends only on
/// the seed, never on thread scheduling.
pub fn generate_dataset(
    ctx: &SimContext<f64>,
    ranges: &ParamRanges,
    cfg: &DatasetConfig,
) -> Result<Dataset> {
    ranges.validate()?;
    if ranges.len() != ctx.n_params() {
        return Err(Error::DimensionMismatch(format!(
            "{} ranges for a model with {} parameters",
            ranges.len(),
            ctx.n_params()
        )));
    }
    if cfg.count == 0 {
        return Err(Error::InvalidInput("dataset count must be at least 1".into()));
    }
    let done = AtomicUsize::new(0);
    let step = (cfg.count / 10).max(1);
    let samples = (0..cfg.count)
        .into_par_iter()
        .map(|i| {
            let s = generate_sample(ctx, ranges, cfg.seed, i);
            let n = done.fetch_add(1, Ordering::Relaxed) + 1;
            if n % step == 0 {
                log::info!("dataset: {n}/{} samples", cfg.count);
            }
            s
        })
        .collect::<Result<Vec<_>>>()?;

    let failures: usize = samples.iter().map(|s| s.failures).sum();
    let attempts = failures + cfg.count;
    if failures as f64 > cfg.max_failure_rate * attempts as f64 {
        return Err(Error::TooManyFailures { failures, attempts });
    }
    if failures > 0 {
        log::warn!("dataset: {failures} of {attempts} draws failed and were redrawn");
    }

    let width = ctx.feature_width();
    let n = ranges.len();
    let mut thetas = Vec::with_capacity(cfg.count * n);
    let mut features = Vec::with_capacity(cfg.count * width);
    let mut nonlinear = 0usize;
    for s in &samples {
        thetas.extend(s.theta.iter().map(|&v| v as f32));
        features.extend_from_slice(&s.features);
        nonlinear += s.nonlinear as usize;
    }
    let channels = 2 * ctx.model.observed_floors().len();
    let n_points = ctx.features.n_points;
    let standardizer = Standardizer::fit(&features, channels, n_points);
    let (f_start, df) = band_grid(ctx);
    let labels: Vec<String> = ctx
        .model
        .observed_floors()
        .iter()
        .flat_map(|f| [format!("floor{f}-real"), format!("floor{f}-imag")])
        .collect();
    Ok(Dataset {
        manifest: DatasetManifest {
            count: cfg.count,
            n_params: n,
            width,
            ranges: ranges.clone(),
            seed: cfg.seed,
            model: ctx.model.clone(),
            features: ctx.features.clone(),
            channel_map: labels,
            n_points,
            f_start,
            df,
            standardizer,
            motion_label: ctx.input.label.clone(),
            nonlinear_fraction: nonlinear as f64 / cfg.count as f64,
            failures,
        },
        thetas,
        features,
    })
}

fn band_grid(ctx: &SimContext<f64>) -> (f64, f64) {
    let len = ctx.features.fft_len.unwrap_or(ctx.input.len());
    let df = 1.0 / (len as f64 * ctx.input.dt);
    let first = (ctx.features.f_start / df).round();
    (first * df, df)
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.manifest.count
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.count == 0
    }

    pub fn theta(&self, i: usize) -> Vec<f64> {
        let n = self.manifest.n_params;
        self.thetas[i * n..(i + 1) * n]
            .iter()
            .map(|&v| v as f64)
            .collect()
    }

    pub fn feature(&self, i: usize) -> &[f32] {
        let w = self.manifest.width;
        &self.features[i * w..(i + 1) * w]
    }

    /// All feature rows after per-channel standardization.
    pub fn standardized_features<T: Real>(&self) -> Vec<T> {
        let w = self.manifest.width;
        let mut out: Vec<T> = self.features.iter().map(|&v| T::lit(v as f64)).collect();
        for row in out.chunks_mut(w) {
            self.manifest.standardizer.apply(row);
        }
        out
    }

    fn validate(&self) -> Result<()> {
        let m = &self.manifest;
        if self.thetas.len() != m.count * m.n_params || self.features.len() != m.count * m.width {
            return Err(Error::DimensionMismatch(format!(
                "arrays hold {} thetas and {} features for {} rows of {} + {}",
                self.thetas.len(),
                self.features.len(),
                m.count,
                m.n_params,
                m.width
            )));
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.validate()?;
        let path = path.as_ref();
        let manifest = serde_json::to_vec_pretty(&self.manifest)?;
        let mut out =
            Vec::with_capacity(16 + manifest.len() + 4 * (self.thetas.len() + self.features.len()));
        out.extend_from_slice(DATASET_MAGIC);
        out.extend_from_slice(&DATASET_VERSION.to_le_bytes());
        out.extend_from_slice(&(manifest.len() as u32).to_le_bytes());
        out.extend_from_slice(&manifest);
        for v in self.thetas.iter().chain(&self.features) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let (manifest, offset) = parse_header(&bytes, path)?;
        let body = &bytes[offset..];
        let n_theta = manifest.count * manifest.n_params;
        let n_feat = manifest.count * manifest.width;
        if body.len() != 4 * (n_theta + n_feat) {
            return Err(Error::DimensionMismatch(format!(
                "payload of {} bytes, manifest needs {}",
                body.len(),
                4 * (n_theta + n_feat)
            )));
        }
        let floats: Vec<f32> = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        let ds = Dataset {
            manifest,
            thetas: floats[..n_theta].to_vec(),
            features: floats[n_theta..].to_vec(),
        };
        ds.validate()?;
        Ok(ds)
    }
}

/// Reads only the header and manifest.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut head = [0u8; 16];
    file.read_exact(&mut head).map_err(|e| Error::io(path, e))?;
    let len = check_head(&head, path)?;
    let mut manifest = vec![0u8; len];
    file.read_exact(&mut manifest)
        .map_err(|_| Error::Format("truncated dataset manifest".into()))?;
    Ok(serde_json::from_slice(&manifest)?)
}

fn check_head(head: &[u8], path: &Path) -> Result<usize> {
    if head.len() < 16 || &head[..8] != DATASET_MAGIC {
        return Err(Error::Format(format!("{} is not a dataset file", path.display())));
    }
    let version = u32::from_le_bytes(head[8..12].try_into().expect("4 bytes"));
    if version != DATASET_VERSION {
        return Err(Error::Format(format!("unsupported dataset version {version}")));
    }
    Ok(u32::from_le_bytes(head[12..16].try_into().expect("4 bytes")) as usize)
}

fn parse_header(bytes: &[u8], path: &Path) -> Result<(DatasetManifest, usize)> {
    let len = check_head(bytes, path)?;
    let body = bytes
        .get(16..16 + len)
        .ok_or_else(|| Error::Format("truncated dataset manifest".into()))?;
    Ok((serde_json::from_slice(body)?, 16 + len))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{synth_motion, SynthSpec};

    fn ctx() -> SimContext<f64> {
        let motion = synth_motion(
            &SynthSpec {
                duration: 10.0,
                ..SynthSpec::default()
            },
            1,
        )
        .unwrap();
        SimContext::new(
            ModelSpec::BilinearSdof { zeta: 0.05 },
            FeatureSpec {
                n_points: 64,
                analysis_fs: 500.0,
                ..FeatureSpec::default()
            },
            motion,
        )
        .unwrap()
    }

    fn small(seed: u64) -> Dataset {
        generate_dataset(
            &ctx(),
            &ParamRanges::bilinear_sdof(),
            &DatasetConfig {
                count: 10,
                seed,
                ..DatasetConfig::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn uniform_draws_pass_ks() {
        let ranges = ParamRanges::bilinear_sdof();
        let mut rng = stream_rng(3, &[]);
        let n = 100_000;
        let draws: Vec<Vec<f64>> = (0..n).map(|_| sample_parameters(&ranges, &mut rng)).collect();
        // Critical value of the one-sample KS statistic at significance 0.001.
        let crit = 1.949 / (n as f64).sqrt();
        for (j, r) in ranges.0.iter().enumerate() {
            let mut u: Vec<f64> = draws
                .iter()
                .map(|t| (t[j] - r.lower) / (r.upper - r.lower))
                .collect();
            u.sort_by(f64::total_cmp);
            let d = u
                .iter()
                .enumerate()
                .map(|(i, &x)| ((i + 1) as f64 / n as f64 - x).max(x - i as f64 / n as f64))
                .fold(0.0, f64::max);
            assert!(d < crit, "{}: D = {d}", r.name);
            assert!(u[0] >= 0.0 && u[n - 1] < 1.0);
        }
    }

    #[test]
    fn generation_is_deterministic_and_bounded() {
        let a = small(7);
        let b = small(7);
        assert_eq!(a, b);
        let ranges = ParamRanges::bilinear_sdof();
        for i in 0..a.len() {
            assert!(ranges.contains(&a.theta(i)));
        }
        assert_eq!(a.manifest.width, 128);
        assert_ne!(small(8).thetas, a.thetas);
    }

    #[test]
    fn samples_regenerate_from_index() {
        let ds = small(7);
        let s = generate_sample(&ctx(), &ds.manifest.ranges, 7, 4).unwrap();
        assert_eq!(s.features, ds.feature(4));
        assert_eq!(s.theta, ds.theta(4));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.bin");
        let ds = small(2);
        ds.save(&path).unwrap();
        assert_eq!(Dataset::load(&path).unwrap(), ds);
        let m = read_manifest(&path).unwrap();
        assert_eq!((m.count, m.width, m.n_params), (10, 128, 3));
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.bin");
        small(2).save(&path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 4);
        fs::write(&path, bytes).unwrap();
        assert!(matches!(Dataset::load(&path), Err(Error::DimensionMismatch(_))));
        assert!(read_manifest(&path).is_ok());
    }

    #[test]
    fn out_of_bounds_is_reported() {
        let r = ParamRanges::bilinear_sdof();
        assert!(r.check(&[2.0, 0.6, 0.1]).is_ok());
        assert!(matches!(r.check(&[6.0, 0.6, 0.1]), Err(Error::OutOfBounds(_))));
    }
}
