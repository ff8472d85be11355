//! Vector field of the sleep-wake flip-flop model.
//!
//! State layout is `[f_W, f_S, f_SCN, h, c, theta]`; firing rates in Hz,
//! `h` in percent mean SWA, `theta` in radians, time in hours.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{ParameterSet, ALPHA_SCN_REF, OMEGA, PERIOD};

pub const DIM: usize = 6;
pub(crate) const I_FW: usize = 0;
pub(crate) const I_FS: usize = 1;
pub(crate) const I_FSCN: usize = 2;
pub(crate) const I_H: usize = 3;
pub(crate) const I_C: usize = 4;
pub(crate) const I_THETA: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub f_w: f64,
    pub f_s: f64,
    pub f_scn: f64,
    pub h: f64,
    pub c: f64,
    pub theta: f64,
}

impl ModelState {
    pub fn to_array(&self) -> [f64; DIM] {
        [self.f_w, self.f_s, self.f_scn, self.h, self.c, self.theta]
    }

    pub fn from_array(x: &[f64; DIM]) -> Self {
        Self {
            f_w: x[I_FW],
            f_s: x[I_FS],
            f_scn: x[I_FSCN],
            h: x[I_H],
            c: x[I_C],
            theta: x[I_THETA],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Which smooth vector field is active.
///
/// `scn_high` is only consulted by the hard-switch model; the smooth model
/// ignores it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Regime {
    pub wake: bool,
    pub scn_high: bool,
}

impl Regime {
    pub const WAKE: Regime = Regime { wake: true, scn_high: false };
    pub const SLEEP: Regime = Regime { wake: false, scn_high: false };

    /// Regime implied by a state off the switching boundaries.
    pub fn of_state(x: &ModelState, p: &ParameterSet) -> Self {
        Regime { wake: x.f_w > p.theta_w, scn_high: x.c > p.beta_scn }
    }

    /// Integer code used in CSV exports: bit 0 = wake, bit 1 = SCN high.
    pub fn code(&self) -> u8 {
        u8::from(self.wake) | (u8::from(self.scn_high) << 1)
    }
}

#[inline]
fn sigmoid(x: f64, max: f64, beta: f64, alpha: f64) -> f64 {
    max * 0.5 * (1.0 + ((x - beta) / alpha).tanh())
}

#[inline]
fn sigmoid_slope(x: f64, max: f64, beta: f64, alpha: f64) -> f64 {
    let t = ((x - beta) / alpha).tanh();
    max * 0.5 * (1.0 - t * t) / alpha
}

/// Steady-state response of the wake-promoting population.
pub fn steady_state_w(x: f64, p: &ParameterSet) -> f64 {
    sigmoid(x, p.w_max, p.beta_w, p.alpha_w)
}

pub(crate) fn steady_state_w_slope(x: f64, p: &ParameterSet) -> f64 {
    sigmoid_slope(x, p.w_max, p.beta_w, p.alpha_w)
}

/// Steady-state response of the sleep-promoting population; its threshold
/// moves with the homeostatic drive, `beta_S(h) = k2*h + k1`.
pub fn steady_state_s(x: f64, h: f64, p: &ParameterSet) -> f64 {
    sigmoid(x, p.s_max, p.beta_s(h), p.alpha_s)
}

pub(crate) fn steady_state_s_slope(x: f64, h: f64, p: &ParameterSet) -> f64 {
    sigmoid_slope(x, p.s_max, p.beta_s(h), p.alpha_s)
}

/// Steady-state SCN response to the circadian drive.
///
/// The `tanh(1/0.7)/tanh(1/alpha_SCN)` factor pins the values at `x = ±1`,
/// so `alpha_SCN` only changes the steepness of the waveform.
pub fn steady_state_scn(x: f64, p: &ParameterSet) -> Result<f64> {
    if !(p.alpha_scn > 0.0) {
        return Err(Error::Domain(format!(
            "alpha_SCN must be positive for the smooth SCN response, got {}",
            p.alpha_scn
        )));
    }
    Ok(scn_inf(x, p))
}

#[inline]
pub(crate) fn scn_inf(x: f64, p: &ParameterSet) -> f64 {
    let a = p.alpha_scn;
    let gain = (1.0 / ALPHA_SCN_REF).tanh() / (1.0 / a).tanh();
    p.scn_max * 0.5 * (1.0 + gain * ((x - p.beta_scn) / a).tanh())
}

/// Circadian drive at time `t`: `(c, theta)` with `theta = omega*(t - phi)`
/// and `c = cos(theta)`. Minima of `c` sit at `t = phi + 12 (mod 24)`.
pub fn circadian(t: f64, p: &ParameterSet) -> (f64, f64) {
    let theta = OMEGA * (t - p.phi);
    (theta.cos(), theta.rem_euclid(2.0 * std::f64::consts::PI))
}

/// Time of the first circadian minimum at or after `t`.
pub fn next_circadian_minimum(t: f64, p: &ParameterSet) -> f64 {
    let first = p.phi + PERIOD / 2.0;
    let n = ((t - first) / PERIOD).ceil();
    first + n * PERIOD
}

/// Time of the last circadian minimum at or before `t`.
pub fn prev_circadian_minimum(t: f64, p: &ParameterSet) -> f64 {
    let first = p.phi + PERIOD / 2.0;
    let n = ((t - first) / PERIOD).floor();
    first + n * PERIOD
}

/// State on the circadian cycle at time `t` with given fast/homeostatic values.
pub fn state_at_time(t: f64, f_w: f64, f_s: f64, f_scn: f64, h: f64, p: &ParameterSet) -> ModelState {
    let theta = OMEGA * (t - p.phi);
    ModelState { f_w, f_s, f_scn, h, c: theta.cos(), theta }
}

/// Right-hand side of the homeostat for the given side of Γ.
#[inline]
pub(crate) fn homeostat_rate(h: f64, wake: bool, p: &ParameterSet) -> f64 {
    if wake {
        (p.h_max - h) / p.tau_hw_eff()
    } else {
        (p.h_min - h) / p.tau_hs_eff()
    }
}

/// Components shared by every region: `f_W`, `f_S`, `c`, `theta`.
#[inline]
pub(crate) fn shared_rhs(x: &[f64; DIM], p: &ParameterSet, dx: &mut [f64; DIM]) {
    let (fw, fs, fscn, h, theta) = (x[I_FW], x[I_FS], x[I_FSCN], x[I_H], x[I_THETA]);
    dx[I_FW] = (steady_state_w(p.g_scnw * fscn - p.g_sw * fs, p) - fw) / p.tau_w;
    dx[I_FS] = (steady_state_s(-p.g_ws * fw - p.g_scns * fscn, h, p) - fs) / p.tau_s;
    dx[I_C] = -OMEGA * theta.sin();
    dx[I_THETA] = OMEGA;
}

/// Smooth-model right-hand side on the array representation.
#[inline]
pub(crate) fn swff_rhs(x: &[f64; DIM], regime: Regime, p: &ParameterSet, dx: &mut [f64; DIM]) {
    shared_rhs(x, p, dx);
    dx[I_FSCN] = (scn_inf(x[I_C], p) - x[I_FSCN]) / p.tau_scn;
    dx[I_H] = homeostat_rate(x[I_H], regime.wake, p);
}

/// Vector field of the region selected by `regime.wake`
/// (`F_1` in wake, `F_2` in sleep).
pub fn vector_field(x: &ModelState, regime: Regime, p: &ParameterSet) -> ModelState {
    let mut dx = [0.0; DIM];
    swff_rhs(&x.to_array(), regime, p, &mut dx);
    ModelState::from_array(&dx)
}

/// Normal velocity across Γ, `d f_W / dt`; identical on both sides.
pub fn gamma_normal_velocity(x: &ModelState, regime: Regime, p: &ParameterSet) -> f64 {
    vector_field(x, regime, p).f_w
}
