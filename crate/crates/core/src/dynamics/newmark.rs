//! Constant-average-acceleration Newmark integration with Newton-Raphson
//! equilibrium iterations.

use serde::{Deserialize, Serialize};

use super::hysteresis::Hysteresis;
use super::model::ShearBuilding;
use super::motion::{GroundMotion, GAL};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::signal::resample;

pub const NEWMARK_BETA: f64 = 0.25;
pub const NEWMARK_GAMMA: f64 = 0.5;
/// Residual tolerance relative to the largest spring reference force.
pub const RESIDUAL_TOL: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 50;

/// Simulator output. Accelerations are absolute and in gal; displacements are
/// floor displacements relative to the ground, in metres. Row `i` is floor `i+1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord<T> {
    pub dt: T,
    pub abs_acc: Vec<Vec<T>>,
    pub rel_disp: Vec<Vec<T>>,
    /// Any story went past its yield point.
    pub yielded: bool,
}

impl<T: Real> ResponseRecord<T> {
    pub fn len(&self) -> usize {
        self.abs_acc.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Keeps every `factor`-th sample.
    pub fn decimate(&self, factor: usize) -> ResponseRecord<T> {
        let pick = |rows: &Vec<Vec<T>>| -> Vec<Vec<T>> {
            rows.iter()
                .map(|r| r.iter().step_by(factor).copied().collect())
                .collect()
        };
        ResponseRecord {
            dt: self.dt * T::lit(factor as f64),
            abs_acc: pick(&self.abs_acc),
            rel_disp: pick(&self.rel_disp),
            yielded: self.yielded,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct InitialConditions<T> {
    pub disp: Vec<T>,
    pub vel: Vec<T>,
}

/// Integrates at `analysis_dt`, band-limited-resampling the motion first when
/// its own step differs.
pub fn newmark_integrate<T: Real, H: Hysteresis<T>>(
    model: &ShearBuilding<T, H>,
    motion: &GroundMotion<T>,
    analysis_dt: T,
) -> Result<ResponseRecord<T>> {
    motion.validate()?;
    let rel = ((motion.dt - analysis_dt) / motion.dt).abs();
    if rel < T::lit(1e-9) {
        return integrate(model, motion, &InitialConditions::default());
    }
    let fine = resample(motion, T::one() / analysis_dt)?;
    integrate(model, &fine, &InitialConditions::default())
}

/// Integrates at the motion's own time step.
pub fn integrate<T: Real, H: Hysteresis<T>>(
    model: &ShearBuilding<T, H>,
    motion: &GroundMotion<T>,
    init: &InitialConditions<T>,
) -> Result<ResponseRecord<T>> {
    let n = model.stories();
    let steps = motion.samples.len();
    let dt = motion.dt;
    let gal = T::lit(GAL);
    let beta = T::lit(NEWMARK_BETA);
    let gamma = T::lit(NEWMARK_GAMMA);
    let c1 = T::one() / (beta * dt * dt);
    let c2 = gamma / (beta * dt);
    let c_vel = T::one() / (beta * dt);
    let c_acc = T::one() / (T::lit(2.0) * beta) - T::one();
    let damp_coef = T::lit(2.0) * model.zeta / model.first_mode_omega();
    let tol = T::lit(RESIDUAL_TOL)
        * model
            .springs
            .iter()
            .map(|s| s.reference_force())
            .fold(T::zero(), T::max);
    let masses = &model.masses;
    let springs = &model.springs;

    let pick = |v: &Vec<T>| -> Vec<T> {
        if v.is_empty() {
            vec![T::zero(); n]
        } else {
            v.clone()
        }
    };
    let mut u = pick(&init.disp);
    let mut v = pick(&init.vel);
    if u.len() != n || v.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "initial conditions for {} floors on a {n}-story model",
            u.len().max(v.len())
        )));
    }

    // Bring springs to the initial drifts.
    let mut states: Vec<H::State> = Vec::with_capacity(n);
    let mut force = vec![T::zero(); n];
    let mut kt = vec![T::zero(); n];
    for i in 0..n {
        let drift = u[i] - if i > 0 { u[i - 1] } else { T::zero() };
        let (f, k, st) = springs[i].trial(&springs[i].initial_state(), drift);
        force[i] = f;
        kt[i] = if drift == T::zero() {
            springs[i].initial_stiffness()
        } else {
            k
        };
        states.push(st);
    }

    let story_vel = |v: &[T], i: usize| v[i] - if i > 0 { v[i - 1] } else { T::zero() };
    let floor_force = |f: &[T], cv: &[T], i: usize| {
        let above = if i + 1 < n { f[i + 1] + cv[i + 1] } else { T::zero() };
        f[i] + cv[i] - above
    };

    let mut damp_force = vec![T::zero(); n];
    for i in 0..n {
        damp_force[i] = damp_coef * kt[i] * story_vel(&v, i);
    }
    let ag0 = motion.samples[0] * gal;
    let mut a: Vec<T> = (0..n)
        .map(|i| -ag0 - floor_force(&force, &damp_force, i) / masses[i])
        .collect();

    let mut abs_acc = vec![Vec::with_capacity(steps); n];
    let mut rel_disp = vec![Vec::with_capacity(steps); n];
    for i in 0..n {
        abs_acc[i].push((a[i] + ag0) / gal);
        rel_disp[i].push(u[i]);
    }

    let mut u_new = vec![T::zero(); n];
    let mut a_new = vec![T::zero(); n];
    let mut v_new = vec![T::zero(); n];
    let mut trial_states = states.clone();
    let mut trial_f = vec![T::zero(); n];
    let mut trial_k = vec![T::zero(); n];
    let mut story_c = vec![T::zero(); n];
    let mut resid = vec![T::zero(); n];
    let mut diag = vec![T::zero(); n];
    let mut upper = vec![T::zero(); n];
    let mut yielded = false;

    for step in 1..steps {
        let ag = motion.samples[step] * gal;
        for i in 0..n {
            story_c[i] = damp_coef * kt[i];
            u_new[i] = u[i] + dt * v[i] + T::lit(0.5) * dt * dt * a[i];
        }
        let mut converged = false;
        let mut last_norm = T::zero();
        for _ in 0..MAX_ITERATIONS {
            for i in 0..n {
                let drift = u_new[i] - if i > 0 { u_new[i - 1] } else { T::zero() };
                let (f, k, st) = springs[i].trial(&states[i], drift);
                trial_f[i] = f;
                trial_k[i] = k;
                trial_states[i] = st;
                a_new[i] = c1 * (u_new[i] - u[i]) - c_vel * v[i] - c_acc * a[i];
                v_new[i] = v[i] + dt * ((T::one() - gamma) * a[i] + gamma * a_new[i]);
            }
            for i in 0..n {
                damp_force[i] = story_c[i] * story_vel(&v_new, i);
            }
            let mut norm = T::zero();
            for i in 0..n {
                resid[i] = masses[i] * (a_new[i] + ag) + floor_force(&trial_f, &damp_force, i);
                norm = norm.max(resid[i].abs());
            }
            last_norm = norm;
            if !norm.is_finite() {
                break;
            }
            if norm <= tol {
                converged = true;
                break;
            }
            // Tridiagonal Jacobian; story stiffness entries carry damping too.
            for i in 0..n {
                let own = trial_k[i] + c2 * story_c[i];
                let above = if i + 1 < n {
                    trial_k[i + 1] + c2 * story_c[i + 1]
                } else {
                    T::zero()
                };
                diag[i] = masses[i] * c1 + own + above;
                upper[i] = -above;
                resid[i] = -resid[i];
            }
            thomas_solve(&mut diag, &upper, &mut resid);
            for i in 0..n {
                u_new[i] += resid[i];
            }
        }
        if !converged {
            return Err(Error::IntegrationFailure {
                step,
                residual: last_norm.as_f64(),
            });
        }
        for i in 0..n {
            u[i] = u_new[i];
            v[i] = v_new[i];
            a[i] = a_new[i];
            force[i] = trial_f[i];
            kt[i] = trial_k[i];
            abs_acc[i].push((a[i] + ag) / gal);
            rel_disp[i].push(u[i]);
        }
        std::mem::swap(&mut states, &mut trial_states);
    }
    for (spring, st) in springs.iter().zip(&states) {
        yielded |= spring.has_yielded(st);
    }
    Ok(ResponseRecord {
        dt,
        abs_acc,
        rel_disp,
        yielded,
    })
}

/// Solves a symmetric tridiagonal system in place. `upper[i]` couples rows
/// `i` and `i+1`; the solution replaces `rhs`.
fn thomas_solve<T: Real>(diag: &mut [T], upper: &[T], rhs: &mut [T]) {
    let n = diag.len();
    for i in 1..n {
        let w = upper[i - 1] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] = rhs[i] - w * rhs[i - 1];
    }
    rhs[n - 1] = rhs[n - 1] / diag[n - 1];
    for i in (0..n.saturating_sub(1)).rev() {
        rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
    }
}

/// Peak |relative displacement| (m) of a unit-mass linear SDOF with natural
/// frequency `f0` under `motion`, integrated at the motion's step.
pub fn linear_peak_displacement<T: Real>(f0: T, zeta: T, motion: &GroundMotion<T>) -> T {
    let w = T::lit(2.0) * T::PI() * f0;
    let k = w * w;
    let c = T::lit(2.0) * zeta * w;
    let dt = motion.dt;
    let gal = T::lit(GAL);
    let beta = T::lit(NEWMARK_BETA);
    let gamma = T::lit(NEWMARK_GAMMA);
    let c1 = T::one() / (beta * dt * dt);
    let c_vel = T::one() / (beta * dt);
    let c_acc = T::one() / (T::lit(2.0) * beta) - T::one();
    let k_eff = k + c1 + gamma / (beta * dt) * c;
    let (mut u, mut v) = (T::zero(), T::zero());
    let mut a = -motion.samples[0] * gal;
    let mut peak = T::zero();
    for &ag in &motion.samples[1..] {
        let p = -ag * gal
            + (c1 * u + c_vel * v + c_acc * a)
            + c * (gamma / (beta * dt) * u
                + (gamma / beta - T::one()) * v
                + dt * (gamma / (T::lit(2.0) * beta) - T::one()) * a);
        let u_next = p / k_eff;
        let a_next = c1 * (u_next - u) - c_vel * v - c_acc * a;
        v = v + dt * ((T::one() - gamma) * a + gamma * a_next);
        u = u_next;
        a = a_next;
        peak = peak.max(u.abs());
    }
    peak
}
