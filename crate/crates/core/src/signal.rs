//! Resampling, observation noise, FFT-based frequency response functions and
//! assembly of channelized feature vectors.

use std::any::{Any, TypeId};
use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::dynamics::GroundMotion;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Division guard for FRF estimation, relative to the input spectrum peak.
pub const SPECTRUM_FLOOR: f64 = 1e-12;

thread_local! {
    static PLANS: RefCell<HashMap<(TypeId, usize, bool), Box<dyn Any>>> =
        RefCell::new(HashMap::new());
}

fn plan<T: Real>(len: usize, inverse: bool) -> Arc<dyn Fft<T>> {
    PLANS.with(|cell| {
        let mut plans = cell.borrow_mut();
        let key = (TypeId::of::<T>(), len, inverse);
        if let Some(p) = plans.get(&key).and_then(|b| b.downcast_ref::<Arc<dyn Fft<T>>>()) {
            return Arc::clone(p);
        }
        let mut planner = FftPlanner::<T>::new();
        let p = if inverse {
            planner.plan_fft_inverse(len)
        } else {
            planner.plan_fft_forward(len)
        };
        plans.insert(key, Box::new(Arc::clone(&p)));
        p
    })
}

/// Unnormalized forward DFT of a real series zero-padded to `len`.
pub fn fft_real<T: Real>(x: &[T], len: usize) -> Vec<Complex<T>> {
    let mut buf: Vec<Complex<T>> = x.iter().map(|&v| Complex::new(v, T::zero())).collect();
    buf.resize(len.max(x.len()), Complex::new(T::zero(), T::zero()));
    plan::<T>(buf.len(), false).process(&mut buf);
    buf
}

/// Unnormalized inverse DFT.
pub fn ifft<T: Real>(mut spec: Vec<Complex<T>>) -> Vec<Complex<T>> {
    plan::<T>(spec.len(), true).process(&mut spec);
    spec
}

/// Band-limited interpolation by an integer factor (zero-padding in the
/// frequency domain). The original samples are reproduced exactly up to
/// rounding.
pub fn upsample<T: Real>(x: &[T], factor: usize) -> Vec<T> {
    if factor == 1 {
        return x.to_vec();
    }
    let n = x.len();
    let big = n * factor;
    let spec = fft_real(x, n);
    let zero = Complex::new(T::zero(), T::zero());
    let mut padded = vec![zero; big];
    let half = n / 2;
    if n % 2 == 0 {
        padded[..half].copy_from_slice(&spec[..half]);
        for k in half + 1..n {
            padded[big - (n - k)] = spec[k];
        }
        let nyq = spec[half] * T::lit(0.5);
        padded[half] = nyq;
        padded[big - half] = nyq;
    } else {
        padded[..=half].copy_from_slice(&spec[..=half]);
        for k in half + 1..n {
            padded[big - (n - k)] = spec[k];
        }
    }
    let scale = T::one() / T::lit(n as f64);
    ifft(padded).into_iter().map(|c| c.re * scale).collect()
}

/// Keeps every `factor`-th sample starting at index 0.
pub fn decimate<T: Copy>(x: &[T], factor: usize) -> Vec<T> {
    x.iter().step_by(factor.max(1)).copied().collect()
}

/// Integer ratio `a / b` if it is one, within relative 1e-9.
fn integer_ratio(a: f64, b: f64) -> Option<usize> {
    let r = a / b;
    let rounded = r.round();
    (rounded >= 1.0 && (r - rounded).abs() <= 1e-9 * rounded).then_some(rounded as usize)
}

/// Changes the sampling rate by an integer factor in either direction.
pub fn resample<T: Real>(motion: &GroundMotion<T>, target_fs: T) -> Result<GroundMotion<T>> {
    let from = motion.fs().as_f64();
    let to = target_fs.as_f64();
    let (samples, dt) = if let Some(up) = integer_ratio(to, from) {
        (
            upsample(&motion.samples, up),
            motion.dt / T::lit(up as f64),
        )
    } else if let Some(down) = integer_ratio(from, to) {
        (
            decimate(&motion.samples, down),
            motion.dt * T::lit(down as f64),
        )
    } else {
        return Err(Error::NonIntegerRate { from, to });
    };
    GroundMotion::new(dt, samples, motion.label.clone())
}

/// Adds i.i.d. zero-mean Gaussian noise with standard deviation `sigma`.
pub fn add_noise<T: Real, R: Rng + ?Sized>(series: &[T], sigma: T, rng: &mut R) -> Vec<T> {
    debug_assert!(sigma >= T::zero());
    if sigma == T::zero() {
        return series.to_vec();
    }
    series
        .iter()
        .map(|&x| {
            let z: f64 = rng.sample(StandardNormal);
            x + sigma * T::lit(z)
        })
        .collect()
}

/// One-sided frequency response function. Bins whose input spectrum fell
/// below the division floor hold NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct Frf<T> {
    pub values: Vec<Complex<T>>,
    pub df: T,
}

impl<T: Real> Frf<T> {
    pub fn frequency(&self, bin: usize) -> T {
        self.df * T::lit(bin as f64)
    }

    pub fn is_guarded(&self, bin: usize) -> bool {
        self.values[bin].re.is_nan()
    }
}

/// `H(f) = FFT(output) / FFT(input)` over the one-sided bins, after
/// zero-padding both records to `fft_len` samples when given.
pub fn compute_frf<T: Real>(
    input: &GroundMotion<T>,
    output: &[T],
    fft_len: Option<usize>,
) -> Result<Frf<T>> {
    if output.len() != input.samples.len() {
        return Err(Error::DimensionMismatch(format!(
            "input has {} samples, output {}",
            input.samples.len(),
            output.len()
        )));
    }
    let len = fft_len.unwrap_or(output.len());
    if len < output.len() {
        return Err(Error::InvalidInput(format!(
            "FFT length {len} shorter than the {}-sample record",
            output.len()
        )));
    }
    let u = fft_real(&input.samples, len);
    let y = fft_real(output, len);
    let bins = len / 2 + 1;
    let peak = u[..bins].iter().fold(T::zero(), |m, c| m.max(c.norm()));
    let floor = T::lit(SPECTRUM_FLOOR) * peak;
    let nan = Complex::new(T::nan(), T::nan());
    let values = (0..bins)
        .map(|k| {
            if u[k].norm() < floor || peak == T::zero() {
                nan
            } else {
                y[k] / u[k]
            }
        })
        .collect();
    Ok(Frf {
        values,
        df: T::one() / (T::lit(len as f64) * input.dt),
    })
}

/// Channelized FRF feature: channel `2i` is the real part of FRF `i`,
/// channel `2i+1` its imaginary part, each `n_points` wide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSample<T> {
    pub values: Vec<T>,
    pub n_points: usize,
    pub f_start: T,
    pub df: T,
    pub channel_map: Vec<String>,
}

impl<T: Real> FeatureSample<T> {
    pub fn channels(&self) -> usize {
        self.channel_map.len()
    }

    pub fn width(&self) -> usize {
        self.values.len()
    }

    pub fn channel(&self, c: usize) -> &[T] {
        &self.values[c * self.n_points..(c + 1) * self.n_points]
    }

    pub fn cast<U: Real>(&self) -> FeatureSample<U> {
        FeatureSample {
            values: self.values.iter().map(|v| U::lit(v.as_f64())).collect(),
            n_points: self.n_points,
            f_start: U::lit(self.f_start.as_f64()),
            df: U::lit(self.df.as_f64()),
            channel_map: self.channel_map.clone(),
        }
    }
}

/// Selects `n_points` consecutive bins starting at the bin nearest `f_start`
/// from each FRF. `labels[i]` names FRF `i` (e.g. `floor3`).
pub fn extract_features<T: Real>(
    frfs: &[Frf<T>],
    labels: &[String],
    f_start: T,
    n_points: usize,
) -> Result<FeatureSample<T>> {
    if frfs.is_empty() || frfs.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} FRFs with {} labels",
            frfs.len(),
            labels.len()
        )));
    }
    let df = frfs[0].df;
    let first = (f_start / df).round().to_usize().unwrap_or(0);
    let mut values = Vec::with_capacity(2 * frfs.len() * n_points);
    let mut channel_map = Vec::with_capacity(2 * frfs.len());
    for (frf, label) in frfs.iter().zip(labels) {
        if frf.df != df {
            return Err(Error::DimensionMismatch("FRFs on different grids".into()));
        }
        if first + n_points > frf.values.len() {
            return Err(Error::BandOutOfRange {
                first,
                n_points,
                available: frf.values.len(),
            });
        }
        let band = &frf.values[first..first + n_points];
        if let Some(off) = band.iter().position(|c| c.re.is_nan()) {
            return Err(Error::SpectrumFloor { bin: first + off });
        }
        values.extend(band.iter().map(|c| c.re));
        values.extend(band.iter().map(|c| c.im));
        channel_map.push(format!("{label}-real"));
        channel_map.push(format!("{label}-imag"));
    }
    Ok(FeatureSample {
        values,
        n_points,
        f_start: df * T::lit(first as f64),
        df,
        channel_map,
    })
}

/// Per-channel affine standardization applied identically to every feature
/// vector before encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub n_points: usize,
}

impl Standardizer {
    pub fn identity(channels: usize, n_points: usize) -> Self {
        Standardizer {
            mean: vec![0.0; channels],
            std: vec![1.0; channels],
            n_points,
        }
    }

    /// Fits mean and standard deviation per channel over row-major
    /// `rows x (channels * n_points)` data.
    pub fn fit<T: Real>(data: &[T], channels: usize, n_points: usize) -> Self {
        let width = channels * n_points;
        let rows = if width == 0 { 0 } else { data.len() / width };
        let mut mean = vec![0.0; channels];
        let mut sq = vec![0.0; channels];
        for row in data.chunks_exact(width) {
            for c in 0..channels {
                for &v in &row[c * n_points..(c + 1) * n_points] {
                    let v = v.as_f64();
                    mean[c] += v;
                    sq[c] += v * v;
                }
            }
        }
        let count = (rows * n_points).max(1) as f64;
        let std = mean
            .iter_mut()
            .zip(&sq)
            .map(|(m, s)| {
                *m /= count;
                let var = (s / count - *m * *m).max(0.0);
                if var > 0.0 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer {
            mean,
            std,
            n_points,
        }
    }

    pub fn apply<T: Real>(&self, row: &mut [T]) {
        for (c, chunk) in row.chunks_mut(self.n_points).enumerate() {
            let (m, s) = (T::lit(self.mean[c]), T::lit(self.std[c]));
            for v in chunk {
                *v = (*v - m) / s;
            }
        }
    }
}

/// Parameters of the synthetic test motion: Gaussian noise shaped by a
/// trapezoid envelope, band-limited, and scaled to a target peak.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub duration: f64,
    pub fs: f64,
    pub peak_gal: f64,
    pub band: (f64, f64),
    /// Envelope break points as fractions of the duration: end of rise, end
    /// of the strong phase, end of decay. Zero afterwards.
    pub envelope: (f64, f64, f64),
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            duration: 40.0,
            fs: 100.0,
            peak_gal: 900.0,
            band: (0.1, 20.0),
            envelope: (0.1, 0.5, 0.75),
        }
    }
}

pub fn synth_motion(spec: &SynthSpec, seed: u64) -> Result<GroundMotion<f64>> {
    if !(spec.duration > 0.0 && spec.fs > 0.0) {
        return Err(Error::InvalidInput(
            "synthetic motion needs positive duration and rate".into(),
        ));
    }
    let n = (spec.duration * spec.fs).round() as usize;
    if n < 2 {
        return Err(Error::InvalidInput("synthetic motion too short".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (rise, hold, end) = spec.envelope;
    let raw: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / n as f64;
            let env = if t < rise {
                t / rise
            } else if t < hold {
                1.0
            } else if t < end {
                (end - t) / (end - hold)
            } else {
                0.0
            };
            let z: f64 = rng.sample(StandardNormal);
            env * z
        })
        .collect();
    let mut spec_c = fft_real(&raw, n);
    let df = spec.fs / n as f64;
    for (k, c) in spec_c.iter_mut().enumerate() {
        let bin = k.min(n - k);
        let f = bin as f64 * df;
        if f < spec.band.0 || f > spec.band.1 {
            *c = Complex::new(0.0, 0.0);
        }
    }
    let filtered: Vec<f64> = ifft(spec_c).into_iter().map(|c| c.re / n as f64).collect();
    let peak = filtered.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Err(Error::InvalidInput("synthetic motion band is empty".into()));
    }
    let scale = spec.peak_gal / peak;
    GroundMotion::new(
        1.0 / spec.fs,
        filtered.into_iter().map(|v| v * scale).collect(),
        format!("synthetic-{seed}"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn motion(samples: Vec<f64>, dt: f64) -> GroundMotion<f64> {
        GroundMotion::new(dt, samples, "t").unwrap()
    }

    #[test]
    fn constant_survives_resampling() {
        let m = motion(vec![3.5; 200], 0.01);
        let up = resample(&m, 1000.0).unwrap();
        assert_eq!(up.samples.len(), 2000);
        assert!(up.samples.iter().all(|v| (v - 3.5).abs() < 1e-12));
        let down = resample(&m, 50.0).unwrap();
        assert!(down.samples.iter().all(|&v| v == 3.5));
    }

    #[test]
    fn sine_upsampling_is_exact_for_periodic_band_limited_input() {
        let n = 1000;
        let m = motion(
            (0..n).map(|i| (2.0 * PI * 2.0 * i as f64 / 100.0).sin()).collect(),
            0.01,
        );
        let up = resample(&m, 1000.0).unwrap();
        for (i, v) in up.samples.iter().enumerate().skip(500).take(9000) {
            let exact = (2.0 * PI * 2.0 * i as f64 / 1000.0).sin();
            assert!((v - exact).abs() < 1e-6);
        }
    }

    #[test]
    fn upsample_then_decimate_recovers_input() {
        let m = synth_motion(
            &SynthSpec {
                duration: 5.0,
                ..SynthSpec::default()
            },
            3,
        )
        .unwrap();
        let up = resample(&m, 1000.0).unwrap();
        let back = resample(&up, 100.0).unwrap();
        for (a, b) in m.samples.iter().zip(&back.samples) {
            assert!((a - b).abs() < 1e-9 * m.peak());
        }
        assert!((back.dt - m.dt).abs() < 1e-15);
    }

    #[test]
    fn non_integer_rate_is_rejected() {
        let m = motion(vec![0.0; 10], 0.01);
        assert!(matches!(
            resample(&m, 150.0),
            Err(Error::NonIntegerRate { .. })
        ));
    }

    #[test]
    fn noise_identity_and_determinism() {
        let x = vec![1.0, 2.0, 3.0];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(add_noise(&x, 0.0, &mut rng), x);
        let a = add_noise(&x, 0.1, &mut ChaCha8Rng::seed_from_u64(9));
        let b = add_noise(&x, 0.1, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
        assert_ne!(a, x);
    }

    #[test]
    fn noise_moments() {
        let zeros = vec![0.0f64; 1_000_000];
        let noisy = add_noise(&zeros, 0.1, &mut ChaCha8Rng::seed_from_u64(5));
        let n = noisy.len() as f64;
        let mean = noisy.iter().sum::<f64>() / n;
        let std = (noisy.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!(mean.abs() < 0.0005, "mean {mean}");
        assert!((0.0995..=0.1005).contains(&std), "std {std}");
    }

    #[test]
    fn parseval() {
        let m = synth_motion(&SynthSpec::default(), 11).unwrap();
        let x = &m.samples;
        let spec = fft_real(x, x.len());
        let time: f64 = x.iter().map(|v| v * v).sum();
        let freq: f64 = spec.iter().map(|c| c.norm_sqr()).sum::<f64>() / x.len() as f64;
        assert!((time - freq).abs() < 1e-9 * time);
    }

    #[test]
    fn frf_of_identity_is_one() {
        let m = synth_motion(&SynthSpec::default(), 2).unwrap();
        let frf = compute_frf(&m, &m.samples, None).unwrap();
        for (k, h) in frf.values.iter().enumerate().skip(10).take(780) {
            assert!((h - Complex::new(1.0, 0.0)).norm() < 1e-9, "bin {k}");
        }
    }

    #[test]
    fn frf_shift_theorem() {
        let m = synth_motion(&SynthSpec::default(), 4).unwrap();
        let n = m.samples.len();
        let delay = 7;
        let shifted: Vec<f64> = (0..n).map(|i| m.samples[(i + n - delay) % n]).collect();
        let frf = compute_frf(&m, &shifted, None).unwrap();
        let first = (0.1 / frf.df).round() as usize;
        let last = (20.0 / frf.df).round() as usize;
        for k in first..=last {
            let f = frf.frequency(k);
            let expect = Complex::from_polar(1.0, -2.0 * PI * f * delay as f64 * m.dt);
            assert!((frf.values[k] - expect).norm() < 1e-9, "bin {k}");
        }
    }

    #[test]
    fn frf_length_mismatch() {
        let m = motion(vec![1.0; 8], 0.01);
        assert!(compute_frf(&m, &[1.0; 7], None).is_err());
    }

    #[test]
    fn feature_layout() {
        let m = synth_motion(
            &SynthSpec {
                duration: 100.0,
                ..SynthSpec::default()
            },
            8,
        )
        .unwrap();
        let frf = compute_frf(&m, &m.samples, None).unwrap();
        let labels: Vec<String> = (1..=3).map(|i| format!("floor{i}")).collect();
        let three = extract_features(&vec![frf.clone(); 3], &labels, 0.1, 512).unwrap();
        assert_eq!(three.channels(), 6);
        assert_eq!(three.width(), 3072);
        assert_eq!(three.channel_map[5], "floor3-imag");
        assert!((three.f_start - 0.1).abs() < 1e-12);
        let one = extract_features(&[frf.clone()], &labels[..1], 0.1, 512).unwrap();
        assert_eq!(one.width(), 1024);
        assert!(one.channel(0).iter().all(|v| (v - 1.0).abs() < 1e-9));
        assert!(one.channel(1).iter().all(|v| v.abs() < 1e-9));
        assert!(matches!(
            extract_features(&[frf], &labels[..1], 45.0, 512),
            Err(Error::BandOutOfRange { .. })
        ));
    }

    #[test]
    fn synthetic_motion_properties() {
        let spec = SynthSpec::default();
        let a = synth_motion(&spec, 21).unwrap();
        let b = synth_motion(&spec, 21).unwrap();
        assert_eq!(a, b);
        assert!((a.peak() - 900.0).abs() < 1e-6);
        let x = fft_real(&a.samples, a.samples.len());
        let n = a.samples.len();
        let df = spec.fs / n as f64;
        let (mut in_sum, mut in_count, mut out_max) = (0.0, 0, 0.0f64);
        for (k, c) in x.iter().enumerate().take(n / 2 + 1) {
            let f = k as f64 * df;
            let p = c.norm_sqr();
            if (0.1..=20.0).contains(&f) {
                in_sum += p;
                in_count += 1;
            } else {
                out_max = out_max.max(p);
            }
        }
        let in_mean = in_sum / in_count as f64;
        assert!(out_max <= in_mean * 1e-4);
    }

    #[test]
    fn standardizer_fit_apply() {
        // Two rows, two channels of width 2.
        let data = [1.0f64, 3.0, 10.0, 10.0, 1.0, 3.0, 10.0, 10.0];
        let s = Standardizer::fit(&data, 2, 2);
        assert_eq!(s.mean, vec![2.0, 10.0]);
        assert_eq!(s.std, vec![1.0, 1.0]);
        let mut row = [1.0f64, 3.0, 10.0, 10.0];
        s.apply(&mut row);
        assert_eq!(row, [-1.0, 1.0, 0.0, 0.0]);
    }
}
