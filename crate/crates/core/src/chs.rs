//! Circadian hard-switch limit (alpha_SCN -> 0+).
//!
//! The SCN population relaxes to one of two plateaus depending on the side
//! of Σ = {c = beta_SCN}; together with Γ this gives four smooth regions.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::Result;
use crate::fastslow::{fold_full_scn, FoldSample};
use crate::integrator::{integrate_system, Control, EventKind, IntegratorOptions, SystemKind, Trajectory};
use crate::model::{homeostat_rate, shared_rhs, ModelState, Regime, DIM, I_FSCN, I_H};
use crate::params::{ParameterSet, ALPHA_SCN_REF, OMEGA};
use crate::rotation::{
    phase_at, rotation_number_with, staircase_with, standard_initial_condition, RotationOptions, RotationResult,
    Staircase,
};

/// The four smooth regions. The first index is the Γ side (1 = wake), the
/// second the Σ side (1 = SCN high).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChsRegion {
    F11,
    F12,
    F21,
    F22,
}

impl ChsRegion {
    pub fn of(r: Regime) -> Self {
        match (r.wake, r.scn_high) {
            (true, true) => ChsRegion::F11,
            (true, false) => ChsRegion::F12,
            (false, false) => ChsRegion::F21,
            (false, true) => ChsRegion::F22,
        }
    }

    pub fn regime(self) -> Regime {
        match self {
            ChsRegion::F11 => Regime { wake: true, scn_high: true },
            ChsRegion::F12 => Regime { wake: true, scn_high: false },
            ChsRegion::F21 => Regime { wake: false, scn_high: false },
            ChsRegion::F22 => Regime { wake: false, scn_high: true },
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ChsRegion::F11 => "F11",
            ChsRegion::F12 => "F12",
            ChsRegion::F21 => "F21",
            ChsRegion::F22 => "F22",
        }
    }
}

/// SCN plateau the population relaxes to on either side of Σ.
pub fn scn_plateau(high: bool, p: &ParameterSet) -> f64 {
    let a = (1.0 / ALPHA_SCN_REF).tanh();
    p.scn_max * 0.5 * if high { 1.0 + a } else { 1.0 - a }
}

#[inline]
pub(crate) fn chs_rhs(x: &[f64; DIM], r: Regime, p: &ParameterSet, dx: &mut [f64; DIM]) {
    shared_rhs(x, p, dx);
    dx[I_FSCN] = (scn_plateau(r.scn_high, p) - x[I_FSCN]) / p.tau_scn;
    dx[I_H] = homeostat_rate(x[I_H], r.wake, p);
}

pub fn chs_vector_field(x: &ModelState, r: Regime, p: &ParameterSet) -> ModelState {
    let mut dx = [0.0; DIM];
    chs_rhs(&x.to_array(), r, p, &mut dx);
    ModelState::from_array(&dx)
}

/// Standard CHS start: awake at `t = 0` on the Σ side implied by `c`.
pub fn chs_initial_condition(p: &ParameterSet) -> (ModelState, Regime) {
    standard_initial_condition(SystemKind::Chs, p)
}

/// Integrate the hard-switch model from `t = 0`.
pub fn chs_integrate(
    x0: &ModelState,
    r0: Regime,
    horizon: f64,
    p: &ParameterSet,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    integrate_system(SystemKind::Chs, x0, r0, 0.0, horizon, p, opts, &mut |_| Control::Continue)
}

/// Closed-form Σ crossings of `c(t) = cos(omega (t - phi))` in `(t0, t1]`.
pub fn sigma_crossing_times(t0: f64, t1: f64, p: &ParameterSet) -> Vec<(f64, EventKind)> {
    let a = p.beta_scn.clamp(-1.0, 1.0).acos();
    let mut out = Vec::new();
    for (target, kind) in [(a, EventKind::SigmaCrossingDown), (2.0 * PI - a, EventKind::SigmaCrossingUp)] {
        let th0 = OMEGA * (t0 - p.phi);
        let mut n = ((th0 - target) / (2.0 * PI)).floor();
        loop {
            let t = p.phi + (target + 2.0 * PI * n) / OMEGA;
            if t > t1 {
                break;
            }
            if t > t0 {
                out.push((t, kind));
            }
            n += 1.0;
        }
    }
    out.sort_by(|x, y| x.0.total_cmp(&y.0));
    out
}

/// Fold levels of the double Z-surface: one flat pair per Σ side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoubleZ {
    /// `(upper, lower)` folds with SCN high (`c > beta_SCN`).
    pub high: (FoldSample, FoldSample),
    /// `(upper, lower)` folds with SCN low.
    pub low: (FoldSample, FoldSample),
}

impl DoubleZ {
    /// `(h_upper, h_lower)` on the side of Σ that `c` lies on.
    pub fn levels_at(&self, c: f64, p: &ParameterSet) -> (f64, f64) {
        let side = if c > p.beta_scn { &self.high } else { &self.low };
        (side.0.h_fold, side.1.h_fold)
    }
}

pub fn double_z(p: &ParameterSet) -> Result<DoubleZ> {
    Ok(DoubleZ { high: fold_full_scn(scn_plateau(true, p), 1.0, p)?, low: fold_full_scn(scn_plateau(false, p), -1.0, p)? })
}

pub fn chs_rotation_number(p: &ParameterSet) -> Result<RotationResult> {
    rotation_number_with(p, &RotationOptions::chs())
}

pub fn chs_staircase(k_grid: &[f64], p: &ParameterSet) -> Result<Staircase> {
    staircase_with(k_grid, p, &RotationOptions::chs())
}

/// Sleep-onset phases after `after` hours.
pub fn onset_phases(tr: &Trajectory, p: &ParameterSet, after: f64) -> Vec<f64> {
    tr.sleep_onsets().filter(|e| e.t >= after).map(|e| phase_at(e.t, p)).collect()
}
