//! Chain post-processing: burn-in and thinning, moments, Gaussian KDE and
//! the width-versus-target table.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Length of `burn_thin` output for a chain of `len`.
pub fn retained_len(len: usize, burn: usize, thin: usize) -> usize {
    if burn >= len || thin == 0 {
        0
    } else {
        (len - burn).div_ceil(thin)
    }
}

/// Drops the first `burn` entries and keeps every `thin`-th of the rest.
pub fn burn_thin<T: Clone>(chain: &[T], burn: usize, thin: usize) -> Result<Vec<T>> {
    if thin == 0 {
        return Err(Error::InvalidInput("thinning stride must be >= 1".into()));
    }
    if burn >= chain.len() {
        return Err(Error::InvalidInput(format!(
            "burn-in {burn} consumes the whole {}-sample chain",
            chain.len()
        )));
    }
    Ok(chain[burn..].iter().step_by(thin).cloned().collect())
}

/// Mean and population standard deviation (divides by `n`).
pub fn mean_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kde {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub std: f64,
    /// Central 95% interval.
    pub lower95: f64,
    pub upper95: f64,
    pub kde: Option<Kde>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub n_samples: usize,
    pub params: Vec<ParamSummary>,
}

impl PosteriorSummary {
    pub fn param(&self, name: &str) -> Option<&ParamSummary> {
        self.params.iter().find(|p| p.name == name)
    }
}

/// Silverman's rule `1.06 * s * n^(-1/5)`, `s` the sample standard
/// deviation.
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InvalidInput("KDE needs at least two samples".into()));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let h = 1.06 * var.sqrt() * (n as f64).powf(-0.2);
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidInput(
            "zero-variance samples leave the KDE bandwidth undefined".into(),
        ));
    }
    Ok(h)
}

/// Gaussian-kernel density of `samples` evaluated on `grid`.
pub fn kde_1d(samples: &[f64], grid: &[f64]) -> Result<Vec<f64>> {
    let h = silverman_bandwidth(samples)?;
    Ok(kde_with_bandwidth(samples, grid, h))
}

fn kde_with_bandwidth(samples: &[f64], grid: &[f64], h: f64) -> Vec<f64> {
    let norm = 1.0 / (samples.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    grid.iter()
        .map(|&x| {
            samples
                .iter()
                .map(|&s| {
                    let u = (x - s) / h;
                    (-0.5 * u * u).exp()
                })
                .sum::<f64>()
                * norm
        })
        .collect()
}

/// KDE on `points` evenly spaced abscissae spanning the sample range padded
/// by three bandwidths.
pub fn kde_auto(samples: &[f64], points: usize) -> Result<Kde> {
    let h = silverman_bandwidth(samples)?;
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * h;
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * h;
    let step = (hi - lo) / (points.max(2) - 1) as f64;
    let grid: Vec<f64> = (0..points.max(2)).map(|i| lo + step * i as f64).collect();
    let density = kde_with_bandwidth(samples, &grid, h);
    Ok(Kde {
        grid,
        density,
        bandwidth: h,
    })
}

/// Linear-interpolated empirical quantile, `q` in [0, 1].
pub fn quantile(samples: &[f64], q: f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (s.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < s.len() {
        s[i] + frac * (s[i + 1] - s[i])
    } else {
        s[i]
    }
}

/// Per-parameter moments, intervals and (when the spread allows) a KDE.
/// `columns[j]` is the retained trace of parameter `names[j]`.
pub fn summarize(names: &[String], columns: &[Vec<f64>], kde_points: usize) -> Result<PosteriorSummary> {
    if names.len() != columns.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} names for {} columns",
            names.len(),
            columns.len()
        )));
    }
    let n = columns.first().map_or(0, Vec::len);
    if n == 0 || columns.iter().any(|c| c.len() != n) {
        return Err(Error::InvalidInput("columns must be non-empty and of equal length".into()));
    }
    let params = names
        .iter()
        .zip(columns)
        .map(|(name, col)| {
            let (mean, std) = mean_std(col);
            ParamSummary {
                name: name.clone(),
                mean,
                std,
                lower95: quantile(col, 0.025),
                upper95: quantile(col, 0.975),
                kde: kde_auto(col, kde_points).ok(),
            }
        })
        .collect();
    Ok(PosteriorSummary { n_samples: n, params })
}

/// One target of a width study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthRow {
    pub alpha: f64,
    pub yield_ratio: f64,
    /// `(parameter, posterior std)` in summary order.
    pub widths: Vec<(String, f64)>,
}

/// Posterior widths keyed by target `(alpha, yield_ratio)`, sorted ascending
/// by alpha then yield ratio. Targets are `[f0, yield_ratio, alpha]`.
pub fn width_study(runs: &[(Vec<f64>, PosteriorSummary)]) -> Result<Vec<WidthRow>> {
    if runs.is_empty() {
        return Err(Error::InvalidInput("width study needs at least one run".into()));
    }
    let mut rows = runs
        .iter()
        .map(|(target, summary)| {
            if target.len() < 3 {
                return Err(Error::DimensionMismatch(
                    "width study targets are [f0, yield_ratio, alpha]".into(),
                ));
            }
            Ok(WidthRow {
                alpha: target[2],
                yield_ratio: target[1],
                widths: summary
                    .params
                    .iter()
                    .map(|p| (p.name.clone(), p.std))
                    .collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| {
        a.alpha
            .total_cmp(&b.alpha)
            .then(a.yield_ratio.total_cmp(&b.yield_ratio))
    });
    Ok(rows)
}
