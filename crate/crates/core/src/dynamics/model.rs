use serde::{Deserialize, Serialize};

use super::hysteresis::{BilinearSpring, Hysteresis, LinearSpring, TakedaSpring};
use crate::error::{Error, Result};
use crate::scalar::Real;

const KN_PER_MM: f64 = 1.0e6; // N/m
const CM: f64 = 0.01; // m

/// Takeda-slip story parameters in native units (kN/mm, cm).
///
/// `k` carries one entry per story; the other six are shared by all stories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TakedaSlipParams<T> {
    pub k: Vec<T>,
    pub d_c: T,
    pub d_y: T,
    pub alpha1: T,
    pub alpha2: T,
    pub beta: T,
    pub gamma: T,
}

impl<T: Real> TakedaSlipParams<T> {
    pub fn validate(&self) -> Result<()> {
        let zero = T::zero();
        let one = T::one();
        if self.k.is_empty() || self.k.iter().any(|&k| !(k > zero)) {
            return Err(Error::InvalidParams("story stiffness must be positive".into()));
        }
        if !(self.d_c > zero && self.d_c < self.d_y) {
            return Err(Error::InvalidParams(format!(
                "need 0 < d_c < d_y, got d_c={} d_y={}",
                self.d_c, self.d_y
            )));
        }
        if !(self.alpha2 >= zero && self.alpha2 <= self.alpha1 && self.alpha1 < one) {
            return Err(Error::InvalidParams(format!(
                "need 0 <= alpha2 <= alpha1 < 1, got {} and {}",
                self.alpha2, self.alpha1
            )));
        }
        for (name, v) in [("beta", self.beta), ("gamma", self.gamma)] {
            if !(v >= zero && v <= one) {
                return Err(Error::InvalidParams(format!("{name}={v} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn stories(&self) -> usize {
        self.k.len()
    }

    /// Backbone force in kN at story drift `d` in cm.
    pub fn backbone_force(&self, story: usize, d: T) -> T {
        use super::hysteresis::Backbone;
        let native = TakedaSpring {
            // kN/mm -> kN/cm
            k: self.k[story] * T::lit(10.0),
            d_c: self.d_c,
            d_y: self.d_y,
            alpha1: self.alpha1,
            alpha2: self.alpha2,
            beta: self.beta,
            gamma: self.gamma,
            slip: true,
        };
        native.backbone_force(d)
    }

    /// Story spring in SI units.
    pub fn spring(&self, story: usize) -> TakedaSpring<T> {
        TakedaSpring {
            k: self.k[story] * T::lit(KN_PER_MM),
            d_c: self.d_c * T::lit(CM),
            d_y: self.d_y * T::lit(CM),
            alpha1: self.alpha1,
            alpha2: self.alpha2,
            beta: self.beta,
            gamma: self.gamma,
            slip: true,
        }
    }

    /// Flattened `[k_1..k_n, d_c, d_y, alpha1, alpha2, beta, gamma]`.
    pub fn to_vec(&self) -> Vec<T> {
        let mut v = self.k.clone();
        v.extend([
            self.d_c,
            self.d_y,
            self.alpha1,
            self.alpha2,
            self.beta,
            self.gamma,
        ]);
        v
    }

    pub fn from_slice(theta: &[T], stories: usize) -> Result<Self> {
        if theta.len() != stories + 6 {
            return Err(Error::DimensionMismatch(format!(
                "Takeda parameter vector for {stories} stories needs {} entries, got {}",
                stories + 6,
                theta.len()
            )));
        }
        let s = &theta[stories..];
        Ok(TakedaSlipParams {
            k: theta[..stories].to_vec(),
            d_c: s[0],
            d_y: s[1],
            alpha1: s[2],
            alpha2: s[3],
            beta: s[4],
            gamma: s[5],
        })
    }

    pub fn param_names(stories: usize) -> Vec<String> {
        let mut names: Vec<String> = (1..=stories).map(|i| format!("k{i}")).collect();
        names.extend(
            ["d_c", "d_y", "alpha1", "alpha2", "beta", "gamma"]
                .iter()
                .map(|s| s.to_string()),
        );
        names
    }
}

/// Bilinear SDOF parameters: natural frequency in Hz, yield displacement as a
/// ratio of the linear peak displacement, post-yield stiffness ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BilinearParams<T> {
    pub f0: T,
    pub yield_ratio: T,
    pub alpha: T,
}

impl<T: Real> BilinearParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.f0 > T::zero()) || !(self.yield_ratio > T::zero()) {
            return Err(Error::InvalidParams(format!(
                "need f0 > 0 and yield_ratio > 0, got {} and {}",
                self.f0, self.yield_ratio
            )));
        }
        if !(self.alpha >= T::zero() && self.alpha < T::one()) {
            return Err(Error::InvalidParams(format!(
                "alpha={} outside [0, 1)",
                self.alpha
            )));
        }
        Ok(())
    }

    pub fn stiffness(&self, mass: T) -> T {
        let w = T::lit(2.0) * T::PI() * self.f0;
        mass * w * w
    }

    /// Spring with the absolute yield displacement `d_y = yield_ratio * linear_peak`.
    pub fn spring(&self, mass: T, linear_peak: T) -> BilinearSpring<T> {
        BilinearSpring {
            k: self.stiffness(mass),
            d_y: self.yield_ratio * linear_peak,
            alpha: self.alpha,
        }
    }

    pub fn to_vec(&self) -> Vec<T> {
        vec![self.f0, self.yield_ratio, self.alpha]
    }

    pub fn from_slice(theta: &[T]) -> Result<Self> {
        match theta {
            &[f0, yield_ratio, alpha] => Ok(BilinearParams {
                f0,
                yield_ratio,
                alpha,
            }),
            _ => Err(Error::DimensionMismatch(format!(
                "bilinear parameter vector needs 3 entries, got {}",
                theta.len()
            ))),
        }
    }

    pub fn param_names() -> Vec<String> {
        vec!["f0".into(), "yield_ratio".into(), "alpha".into()]
    }
}

/// Lumped-mass shear building: story `i` connects floor `i` to floor `i-1`
/// (floor 0 being the ground). Damping is proportional to the instantaneous
/// tangent stiffness with coefficient `2 zeta / omega_1`.
#[derive(Debug, Clone)]
pub struct ShearBuilding<T, H> {
    pub masses: Vec<T>,
    pub springs: Vec<H>,
    pub zeta: T,
}

pub type MdofModel<T> = ShearBuilding<T, TakedaSpring<T>>;
pub type BilinearSdof<T> = ShearBuilding<T, BilinearSpring<T>>;
pub type LinearSdof<T> = ShearBuilding<T, LinearSpring<T>>;

/// Default story mass when none is configured.
pub const DEFAULT_STORY_MASS: f64 = 2.0e5;

impl<T: Real, H: Hysteresis<T>> ShearBuilding<T, H> {
    pub fn new(masses: Vec<T>, springs: Vec<H>, zeta: T) -> Result<Self> {
        if masses.is_empty() || masses.len() != springs.len() {
            return Err(Error::InvalidParams(format!(
                "{} masses for {} stories",
                masses.len(),
                springs.len()
            )));
        }
        if masses.iter().any(|&m| !(m > T::zero())) {
            return Err(Error::InvalidParams("masses must be positive".into()));
        }
        if !(zeta >= T::zero()) {
            return Err(Error::InvalidParams("damping ratio must be >= 0".into()));
        }
        Ok(ShearBuilding {
            masses,
            springs,
            zeta,
        })
    }

    pub fn stories(&self) -> usize {
        self.masses.len()
    }

    /// First-mode circular frequency of the initial (elastic) system.
    pub fn first_mode_omega(&self) -> T {
        let k: Vec<T> = self.springs.iter().map(|s| s.initial_stiffness()).collect();
        lowest_eigenvalue(&self.masses, &k).sqrt()
    }
}

impl<T: Real> MdofModel<T> {
    pub fn takeda(params: &TakedaSlipParams<T>, masses: Vec<T>, zeta: T) -> Result<Self> {
        params.validate()?;
        let springs = (0..params.stories()).map(|i| params.spring(i)).collect();
        ShearBuilding::new(masses, springs, zeta)
    }
}

/// Smallest eigenvalue of `M^{-1} K` for a shear building with story
/// stiffnesses `k`, by Sturm-sequence bisection on the symmetric form.
fn lowest_eigenvalue<T: Real>(m: &[T], k: &[T]) -> T {
    let n = m.len();
    // Symmetric tridiagonal M^{-1/2} K M^{-1/2}.
    let diag: Vec<T> = (0..n)
        .map(|i| {
            let above = if i + 1 < n { k[i + 1] } else { T::zero() };
            (k[i] + above) / m[i]
        })
        .collect();
    let off: Vec<T> = (0..n.saturating_sub(1))
        .map(|i| -k[i + 1] / (m[i] * m[i + 1]).sqrt())
        .collect();
    // Gershgorin bounds.
    let mut hi = T::zero();
    for i in 0..n {
        let r = diag[i]
            + if i > 0 { off[i - 1].abs() } else { T::zero() }
            + if i + 1 < n { off[i].abs() } else { T::zero() };
        hi = hi.max(r);
    }
    let floor = T::epsilon() * (hi + T::one());
    let count_below = |x: T| -> usize {
        let mut count = 0;
        let mut q = T::one();
        for i in 0..n {
            let prev = if i > 0 { off[i - 1] * off[i - 1] / q } else { T::zero() };
            q = diag[i] - x - prev;
            if q == T::zero() {
                q = floor;
            }
            if q < T::zero() {
                count += 1;
            }
        }
        count
    };
    let mut lo = T::zero();
    for _ in 0..200 {
        let mid = T::lit(0.5) * (lo + hi);
        if count_below(mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= T::epsilon() * hi {
            break;
        }
    }
    T::lit(0.5) * (lo + hi)
}
