use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Centimetres-per-second-squared to SI.
pub const GAL: f64 = 0.01;

/// Uniformly sampled ground acceleration in gal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundMotion<T> {
    pub dt: T,
    pub samples: Vec<T>,
    pub label: String,
}

impl<T: Real> GroundMotion<T> {
    pub fn new(dt: T, samples: Vec<T>, label: impl Into<String>) -> Result<Self> {
        let motion = GroundMotion {
            dt,
            samples,
            label: label.into(),
        };
        motion.validate()?;
        Ok(motion)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(Error::InvalidInput(format!(
                "motion dt must be positive, got {}",
                self.dt
            )));
        }
        if self.samples.len() < 2 {
            return Err(Error::InvalidInput(
                "motion needs at least two samples".into(),
            ));
        }
        if self.samples.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite("ground motion samples"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sampling rate in Hz.
    pub fn fs(&self) -> T {
        T::one() / self.dt
    }

    pub fn duration(&self) -> T {
        self.dt * T::lit(self.samples.len() as f64)
    }

    pub fn peak(&self) -> T {
        self.samples
            .iter()
            .fold(T::zero(), |acc, &a| acc.max(a.abs()))
    }

    pub fn cast<U: Real>(&self) -> GroundMotion<U> {
        GroundMotion {
            dt: U::lit(self.dt.as_f64()),
            samples: self.samples.iter().map(|a| U::lit(a.as_f64())).collect(),
            label: self.label.clone(),
        }
    }
}

impl GroundMotion<f64> {
    /// Reads either the `dt=<seconds>` single-column format or a two-column
    /// `time acceleration` table (comma or whitespace separated).
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::parse(&text, &label)
    }

    pub fn parse(text: &str, label: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let first = lines
            .next()
            .ok_or_else(|| Error::Format("empty motion file".into()))?;

        if let Some(rest) = first.strip_prefix("dt=") {
            let dt = parse_num(rest.trim())?;
            let samples = lines.map(parse_num).collect::<Result<Vec<_>>>()?;
            return GroundMotion::new(dt, samples, label);
        }

        let mut times = Vec::new();
        let mut samples = Vec::new();
        let mut push_row = |line: &str| -> Result<()> {
            let cols: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            if cols.len() != 2 {
                return Err(Error::Format(format!(
                    "expected `time acceleration`, got {line:?}"
                )));
            }
            times.push(parse_num(cols[0])?);
            samples.push(parse_num(cols[1])?);
            Ok(())
        };
        // A non-numeric first row is a CSV header.
        if first
            .split(|c: char| c == ',' || c.is_whitespace())
            .find(|s| !s.is_empty())
            .is_some_and(|s| s.parse::<f64>().is_ok())
        {
            push_row(first)?;
        }
        for line in lines {
            push_row(line)?;
        }
        if times.len() < 2 {
            return Err(Error::Format("motion table needs two rows".into()));
        }
        let dt = times[1] - times[0];
        for (i, w) in times.windows(2).enumerate() {
            if ((w[1] - w[0]) - dt).abs() > 1e-9 {
                return Err(Error::Format(format!(
                    "non-uniform time step at row {}",
                    i + 1
                )));
            }
        }
        GroundMotion::new(dt, samples, label)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = format!("dt={}\n", self.dt);
        for a in &self.samples {
            out.push_str(&format!("{a}\n"));
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

fn parse_num(s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::Format(format!("not a number: {s:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_dt_header() {
        let m = GroundMotion::parse("dt=0.01\n1.0\n-2.5\n3\n", "x").unwrap();
        assert_eq!(m.dt, 0.01);
        assert_eq!(m.samples, vec![1.0, -2.5, 3.0]);
        assert_eq!(m.peak(), 3.0);
    }

    #[test]
    fn parses_two_column_csv_with_header() {
        let m = GroundMotion::parse("time,acc\n0.0,1\n0.02,2\n0.04,3\n", "x").unwrap();
        assert!((m.dt - 0.02).abs() < 1e-15);
        assert_eq!(m.samples.len(), 3);
    }

    #[test]
    fn rejects_non_uniform_spacing() {
        let err = GroundMotion::parse("0 1\n0.01 2\n0.03 3\n", "x").unwrap_err();
        assert!(matches!(err, Error::Format(_)));
    }

    #[test]
    fn rejects_bad_motion() {
        assert!(GroundMotion::new(0.0, vec![1.0, 2.0], "").is_err());
        assert!(GroundMotion::new(0.01, vec![1.0], "").is_err());
        assert!(GroundMotion::new(0.01, vec![1.0, f64::NAN], "").is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.txt");
        let m = GroundMotion::new(0.005, vec![0.1, -0.25, 7.0], "m").unwrap();
        m.write(&path).unwrap();
        assert_eq!(GroundMotion::read(&path).unwrap(), m);
    }
}
