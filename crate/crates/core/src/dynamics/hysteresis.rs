//! Restoring-force laws for a single story spring.
//!
//! Each law is a pure state machine: [`Hysteresis::trial`] evaluates the force
//! at a new displacement reached monotonically from a committed state and
//! hands back the state that would be committed. Nothing is mutated in place,
//! so Newton iterations can probe freely and commit only on convergence.

use std::fmt::Debug;

use serde::{Deserialize, Serialize};
use smallvec::{smallvec, SmallVec};

use crate::scalar::Real;

pub trait Hysteresis<T: Real>: Clone + Debug + Send + Sync {
    type State: Clone + Debug + Send + Sync;

    fn initial_state(&self) -> Self::State;

    /// Force and tangent stiffness at `d_new`, starting from `state`.
    fn trial(&self, state: &Self::State, d_new: T) -> (T, T, Self::State);

    fn initial_stiffness(&self) -> T;

    /// Force scale used for equilibrium tolerances.
    fn reference_force(&self) -> T;

    fn has_yielded(&self, state: &Self::State) -> bool;
}

/// Monotonic envelope of a restoring-force law. Odd in `d`.
pub trait Backbone<T: Real> {
    fn backbone_force(&self, d: T) -> T;
}

// ---------------------------------------------------------------------------
// Linear

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSpring<T> {
    pub k: T,
}

impl<T: Real> Backbone<T> for LinearSpring<T> {
    fn backbone_force(&self, d: T) -> T {
        self.k * d
    }
}

impl<T: Real> Hysteresis<T> for LinearSpring<T> {
    type State = ();

    fn initial_state(&self) {}

    fn trial(&self, _state: &(), d_new: T) -> (T, T, ()) {
        (self.k * d_new, self.k, ())
    }

    fn initial_stiffness(&self) -> T {
        self.k
    }

    fn reference_force(&self) -> T {
        self.k
    }

    fn has_yielded(&self, _state: &()) -> bool {
        false
    }
}

// ---------------------------------------------------------------------------
// Bilinear with kinematic hardening

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BilinearSpring<T> {
    pub k: T,
    pub d_y: T,
    /// Post-yield stiffness as a fraction of `k`.
    pub alpha: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BilinearState<T> {
    pub d: T,
    pub force: T,
    pub yielded: bool,
}

impl<T: Real> Backbone<T> for BilinearSpring<T> {
    fn backbone_force(&self, d: T) -> T {
        let x = d.abs();
        let f = if x <= self.d_y {
            self.k * x
        } else {
            self.k * self.d_y + self.alpha * self.k * (x - self.d_y)
        };
        f.copysign(d)
    }
}

impl<T: Real> Hysteresis<T> for BilinearSpring<T> {
    type State = BilinearState<T>;

    fn initial_state(&self) -> BilinearState<T> {
        BilinearState::default()
    }

    fn trial(&self, state: &BilinearState<T>, d_new: T) -> (T, T, BilinearState<T>) {
        let k = self.k;
        let trial = state.force + k * (d_new - state.d);
        // Yield lines translate with plastic flow: F = alpha*k*d +/- (1-alpha)*k*d_y.
        let offset = (T::one() - self.alpha) * k * self.d_y;
        let hardening = self.alpha * k * d_new;
        let (force, tangent, plastic) = if trial > hardening + offset {
            (hardening + offset, self.alpha * k, true)
        } else if trial < hardening - offset {
            (hardening - offset, self.alpha * k, true)
        } else {
            (trial, k, false)
        };
        let next = BilinearState {
            d: d_new,
            force,
            yielded: state.yielded || plastic,
        };
        (force, tangent, next)
    }

    fn initial_stiffness(&self) -> T {
        self.k
    }

    fn reference_force(&self) -> T {
        self.k * self.d_y
    }

    fn has_yielded(&self, state: &BilinearState<T>) -> bool {
        state.yielded
    }
}

// ---------------------------------------------------------------------------
// Takeda with slip

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Elastic,
    Skeleton,
    Unloading,
    ReloadingSlip,
    ReloadingTarget,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Waypoint<T> {
    d: T,
    f: T,
    /// Branch of the segment that ends here.
    kind: Branch,
}

type Path<T> = SmallVec<[Waypoint<T>; 6]>;

#[derive(Debug, Clone, PartialEq)]
struct Resume<T> {
    dir: i8,
    /// Starts at the reversal point that opened the current unloading.
    points: Path<T>,
}

/// Committed state of a Takeda-slip spring.
///
/// Peaks start at the crack points, so "the opposite peak" is always defined.
#[derive(Debug, Clone, PartialEq)]
pub struct HysteresisState<T> {
    pub d: T,
    pub force: T,
    pub d_peak_pos: T,
    pub f_peak_pos: T,
    pub d_peak_neg: T,
    pub f_peak_neg: T,
    pub cracked_pos: bool,
    pub cracked_neg: bool,
    pub yielded_pos: bool,
    pub yielded_neg: bool,
    /// Displacement of the last zero-force crossing.
    pub d0: T,
    pub branch: Branch,
    dir: i8,
    seg_start: (T, T),
    path: Path<T>,
    resume: Option<Resume<T>>,
}

impl<T: Real> HysteresisState<T> {
    fn peak(&self, side: i8) -> (T, T) {
        if side > 0 {
            (self.d_peak_pos, self.f_peak_pos)
        } else {
            (self.d_peak_neg, self.f_peak_neg)
        }
    }

    fn yielded(&self, side: i8) -> bool {
        if side > 0 {
            self.yielded_pos
        } else {
            self.yielded_neg
        }
    }

    fn any_cracked(&self) -> bool {
        self.cracked_pos || self.cracked_neg
    }
}

/// Trilinear Takeda spring with degrading unloading and pinched (slip) reloading.
///
/// Units follow the caller; the dynamics code uses SI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TakedaSpring<T> {
    pub k: T,
    pub d_c: T,
    pub d_y: T,
    pub alpha1: T,
    pub alpha2: T,
    pub beta: T,
    pub gamma: T,
    /// With `false` the slip segment is never generated.
    pub slip: bool,
}

impl<T: Real> TakedaSpring<T> {
    pub fn without_slip(mut self) -> Self {
        self.slip = false;
        self
    }

    pub fn crack_force(&self) -> T {
        self.k * self.d_c
    }

    pub fn yield_force(&self) -> T {
        self.crack_force() + self.alpha1 * self.k * (self.d_y - self.d_c)
    }

    /// Unloading stiffness after yielding on a side whose extreme excursion is `d_m`.
    pub fn unloading_stiffness(&self, d_m: T) -> T {
        let base = (self.crack_force() + self.yield_force()) / (self.d_c + self.d_y);
        base * (d_m.abs() / self.d_y).powf(-self.beta)
    }

    /// Unloading stiffness from the peak `(d_m, f_m)`, kept between the peak
    /// secant and the initial stiffness.
    fn unloading_slope(&self, (d_m, f_m): (T, T)) -> T {
        self.unloading_stiffness(d_m).max(f_m / d_m).min(self.k)
    }

    /// Backbone force and its outward slope at `d`.
    fn skeleton(&self, d: T) -> (T, T) {
        let x = d.abs();
        let (f, slope) = if x <= self.d_c {
            (self.k * x, self.k)
        } else if x <= self.d_y {
            (
                self.crack_force() + self.alpha1 * self.k * (x - self.d_c),
                self.alpha1 * self.k,
            )
        } else {
            (
                self.yield_force() + self.alpha2 * self.k * (x - self.d_y),
                self.alpha2 * self.k,
            )
        };
        (f.copysign(d), slope)
    }

    fn unloading_path(&self, st: &HysteresisState<T>, s: i8) -> Path<T> {
        let (d, f) = (st.d, st.force);
        let (d_opp, f_opp) = st.peak(s);
        let k_un = if st.yielded(-s) {
            self.unloading_slope(st.peak(-s))
        } else {
            (f - f_opp) / (d - d_opp)
        };
        // never softer than the branch being left
        let k_un = k_un.max(self.current_tangent(st));
        let k_un = if k_un.is_finite() && k_un > T::zero() {
            k_un.min(self.k)
        } else {
            self.k
        };
        let d0 = d - f / k_un;
        let mut path: Path<T> = smallvec![Waypoint {
            d: d0,
            f: T::zero(),
            kind: Branch::Unloading,
        }];
        path.extend(self.reload_path(st, d0, T::zero(), s, true));
        path
    }

    fn reload_path(&self, st: &HysteresisState<T>, da: T, fa: T, s: i8, at_zero: bool) -> Path<T> {
        let (db, fb) = st.peak(s);
        let sf: T = sign(s);
        let mut pts: Path<T> = SmallVec::new();
        if self.slip && at_zero && st.yielded(s) {
            let span = db - da;
            if span * sf > T::zero() && self.gamma > T::zero() {
                let k_slip = fb / span * (db.abs() / self.d_y).powf(-self.gamma);
                let ds = self.gamma * span;
                // not below the line the spring will unload along from the peak
                let floor = fb - self.unloading_slope((db, fb)) * (db - da - ds);
                let f_slip = if sf * k_slip * ds < sf * floor { floor } else { k_slip * ds };
                pts.push(Waypoint {
                    d: da + ds,
                    f: f_slip,
                    kind: Branch::ReloadingSlip,
                });
            }
        }
        pts.push(Waypoint {
            d: db,
            f: fb,
            kind: Branch::ReloadingTarget,
        });
        self.cap(da, fa, s, pts)
    }

    /// Drops zero-length segments and replaces any segment steeper than the
    /// initial stiffness (or pointing backwards) by a slope-`k` line that runs
    /// until it meets the backbone.
    fn cap(&self, da: T, fa: T, s: i8, pts: Path<T>) -> Path<T> {
        let sf: T = sign(s);
        let limit = self.k * T::lit(1.0 + 1e-12);
        let mut out: Path<T> = SmallVec::new();
        let (mut pd, mut pf) = (da, fa);
        for w in pts {
            let dd = w.d - pd;
            if dd == T::zero() && w.f == pf {
                continue;
            }
            if dd * sf <= T::zero() || (w.f - pf) / dd > limit {
                let (jd, jf) = self.join(pd, pf, s);
                out.push(Waypoint {
                    d: jd,
                    f: jf,
                    kind: Branch::ReloadingTarget,
                });
                return out;
            }
            out.push(w);
            pd = w.d;
            pf = w.f;
        }
        out
    }

    /// Intersection of the slope-`k` line through `(d, f)` with the backbone
    /// on side `s`.
    fn join(&self, d: T, f: T, s: i8) -> (T, T) {
        let sf: T = sign(s);
        let (x0, y0) = (sf * d, sf * f);
        let k = self.k;
        let inf = T::infinity();
        let segments = [
            (T::zero(), self.d_c, k, T::zero()),
            (self.d_c, self.d_y, self.alpha1 * k, self.crack_force()),
            (self.d_y, inf, self.alpha2 * k, self.yield_force()),
        ];
        let x_lo = x0.max(T::zero());
        for (a, b, m, fa) in segments {
            if b <= x_lo {
                continue;
            }
            let xs = a.max(x_lo);
            let gap = fa + m * (xs - a) - (y0 + k * (xs - x0));
            if gap <= T::zero() {
                let (fs, _) = self.skeleton(xs);
                return (sf * xs, sf * fs);
            }
            if m < k {
                let x = xs + gap / (k - m);
                if x <= b {
                    return (sf * x, sf * (y0 + k * (x - x0)));
                }
            }
        }
        unreachable!("post-yield slope is below the initial stiffness")
    }

    fn reverse(&self, st: &mut HysteresisState<T>, s: i8) {
        let (d, f) = (st.d, st.force);
        let sf: T = sign(s);
        if f * sf < T::zero() {
            let mut points: Path<T> = smallvec![Waypoint {
                d,
                f,
                kind: Branch::ReloadingTarget,
            }];
            points.extend(st.path.iter().copied());
            st.resume = Some(Resume {
                dir: st.dir,
                points,
            });
            st.path = self.unloading_path(st, s);
        } else if let Some(r) = st.resume.take().filter(|r| r.dir == s) {
            st.path = r.points;
            // The first waypoint may coincide with the current point.
            if st.path.first().is_some_and(|w| w.d == d) {
                st.path.remove(0);
            }
        } else {
            st.path = self.reload_path(st, d, f, s, f == T::zero());
        }
        st.seg_start = (d, f);
        st.dir = s;
    }

    fn advance(&self, st: &mut HysteresisState<T>, d_new: T) -> T {
        let s = st.dir;
        let sf: T = sign(s);
        loop {
            let Some(&w) = st.path.first() else {
                let (f, slope) = self.skeleton(d_new);
                st.d = d_new;
                st.force = f;
                let (d_peak, _) = st.peak(s);
                if sf * d_new > sf * d_peak {
                    let x = sf * d_new;
                    if s > 0 {
                        st.d_peak_pos = d_new;
                        st.f_peak_pos = f;
                        st.cracked_pos |= x > self.d_c;
                        st.yielded_pos |= x > self.d_y;
                    } else {
                        st.d_peak_neg = d_new;
                        st.f_peak_neg = f;
                        st.cracked_neg |= x > self.d_c;
                        st.yielded_neg |= x > self.d_y;
                    }
                }
                st.branch = if st.any_cracked() {
                    Branch::Skeleton
                } else {
                    Branch::Elastic
                };
                return slope;
            };
            if sf * (d_new - w.d) <= T::zero() {
                let (ad, af) = st.seg_start;
                let slope = (w.f - af) / (w.d - ad);
                st.d = d_new;
                st.force = af + (d_new - ad) * slope;
                st.branch = if st.any_cracked() {
                    w.kind
                } else {
                    Branch::Elastic
                };
                return slope;
            }
            if w.f == T::zero() {
                st.d0 = w.d;
            }
            st.seg_start = (w.d, w.f);
            st.path.remove(0);
        }
    }

    fn current_tangent(&self, st: &HysteresisState<T>) -> T {
        match st.path.first() {
            Some(w) => (w.f - st.seg_start.1) / (w.d - st.seg_start.0),
            None if st.dir == 0 => self.k,
            None => self.skeleton(st.d).1,
        }
    }
}

impl<T: Real> Backbone<T> for TakedaSpring<T> {
    fn backbone_force(&self, d: T) -> T {
        self.skeleton(d).0
    }
}

impl<T: Real> Hysteresis<T> for TakedaSpring<T> {
    type State = HysteresisState<T>;

    fn initial_state(&self) -> HysteresisState<T> {
        let fc = self.crack_force();
        HysteresisState {
            d: T::zero(),
            force: T::zero(),
            d_peak_pos: self.d_c,
            f_peak_pos: fc,
            d_peak_neg: -self.d_c,
            f_peak_neg: -fc,
            cracked_pos: false,
            cracked_neg: false,
            yielded_pos: false,
            yielded_neg: false,
            d0: T::zero(),
            branch: Branch::Elastic,
            dir: 0,
            seg_start: (T::zero(), T::zero()),
            path: SmallVec::new(),
            resume: None,
        }
    }

    fn trial(&self, state: &HysteresisState<T>, d_new: T) -> (T, T, HysteresisState<T>) {
        let step = d_new - state.d;
        if step == T::zero() {
            return (state.force, self.current_tangent(state), state.clone());
        }
        let s: i8 = if step > T::zero() { 1 } else { -1 };
        let mut st = state.clone();
        if s != st.dir {
            self.reverse(&mut st, s);
        }
        let tangent = self.advance(&mut st, d_new);
        (st.force, tangent, st)
    }

    fn initial_stiffness(&self) -> T {
        self.k
    }

    fn reference_force(&self) -> T {
        self.yield_force()
    }

    fn has_yielded(&self, state: &HysteresisState<T>) -> bool {
        state.yielded_pos || state.yielded_neg
    }
}

fn sign<T: Real>(s: i8) -> T {
    if s >= 0 {
        T::one()
    } else {
        -T::one()
    }
}
