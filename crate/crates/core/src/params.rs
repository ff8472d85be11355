//! Model constants and the two study knobs (`k`, `alpha_SCN`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Angular frequency of the 24 h circadian drive, in rad/h.
pub const OMEGA: f64 = 2.0 * std::f64::consts::PI / 24.0;

/// Circadian period in hours.
pub const PERIOD: f64 = 24.0;

/// Reference steepness that fixes the SCN waveform amplitude. Changing
/// `alpha_SCN` reshapes the waveform but keeps its range pinned to the
/// range obtained at this value.
pub const ALPHA_SCN_REF: f64 = 0.7;

/// Full parameter set of the sleep-wake flip-flop model.
///
/// Serialized as a flat JSON object keyed by the conventional symbol names
/// (`W_max`, `tau_hw`, ...) plus `k` and `phi`. Unknown keys are rejected;
/// missing keys fall back to the defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParameterSet {
    #[serde(rename = "W_max")]
    pub w_max: f64,
    #[serde(rename = "S_max")]
    pub s_max: f64,
    #[serde(rename = "SCN_max")]
    pub scn_max: f64,
    #[serde(rename = "tau_W")]
    pub tau_w: f64,
    #[serde(rename = "tau_S")]
    pub tau_s: f64,
    #[serde(rename = "tau_SCN")]
    pub tau_scn: f64,
    #[serde(rename = "alpha_W")]
    pub alpha_w: f64,
    #[serde(rename = "alpha_S")]
    pub alpha_s: f64,
    #[serde(rename = "alpha_SCN")]
    pub alpha_scn: f64,
    #[serde(rename = "beta_W")]
    pub beta_w: f64,
    #[serde(rename = "beta_SCN")]
    pub beta_scn: f64,
    pub g_sw: f64,
    pub g_scnw: f64,
    pub g_ws: f64,
    pub g_scns: f64,
    pub h_max: f64,
    pub h_min: f64,
    pub tau_hw: f64,
    pub tau_hs: f64,
    pub k1: f64,
    pub k2: f64,
    #[serde(rename = "theta_W")]
    pub theta_w: f64,
    /// Homeostatic time-constant scale in (0, 1].
    pub k: f64,
    /// Circadian phase offset in hours.
    pub phi: f64,
}

impl Default for ParameterSet {
    fn default() -> Self {
        Self {
            w_max: 6.0,
            s_max: 6.0,
            scn_max: 7.0,
            tau_w: 0.1,
            tau_s: 0.1,
            tau_scn: 0.05,
            alpha_w: 0.5,
            alpha_s: 0.175,
            alpha_scn: 0.7,
            beta_w: -0.37,
            beta_scn: 0.0,
            g_sw: 0.3,
            g_scnw: 0.06,
            g_ws: 0.28,
            g_scns: 0.0825,
            h_max: 323.88,
            h_min: 0.0,
            tau_hw: 15.78,
            tau_hs: 3.37,
            k1: -0.1,
            k2: -0.006,
            theta_w: 4.0,
            k: 1.0,
            phi: 0.0,
        }
    }
}

impl ParameterSet {
    pub fn with_k(mut self, k: f64) -> Self {
        self.k = k;
        self
    }

    pub fn with_alpha_scn(mut self, alpha_scn: f64) -> Self {
        self.alpha_scn = alpha_scn;
        self
    }

    /// Effective wake-time constant of the homeostat, `k * tau_hw`.
    pub fn tau_hw_eff(&self) -> f64 {
        self.k * self.tau_hw
    }

    /// Effective sleep-time constant of the homeostat, `k * tau_hs`.
    pub fn tau_hs_eff(&self) -> f64 {
        self.k * self.tau_hs
    }

    /// Activation threshold of the sleep population at homeostatic level `h`.
    pub fn beta_s(&self, h: f64) -> f64 {
        self.k2 * h + self.k1
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("W_max", self.w_max),
            ("S_max", self.s_max),
            ("SCN_max", self.scn_max),
            ("tau_W", self.tau_w),
            ("tau_S", self.tau_s),
            ("tau_SCN", self.tau_scn),
            ("tau_hw", self.tau_hw),
            ("tau_hs", self.tau_hs),
            ("alpha_W", self.alpha_w),
            ("alpha_S", self.alpha_s),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.h_min < self.h_max) {
            return Err(Error::InvalidParameter(format!(
                "h_min ({}) must be below h_max ({})",
                self.h_min, self.h_max
            )));
        }
        if !(self.k > 0.0 && self.k <= 1.0) {
            return Err(Error::InvalidParameter(format!("k must lie in (0, 1], got {}", self.k)));
        }
        if !(self.alpha_scn > 0.0 && self.alpha_scn <= 3.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha_SCN must lie in (0, 3], got {}",
                self.alpha_scn
            )));
        }
        let all = serde_json::to_value(self).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        if let Some(obj) = all.as_object() {
            for (key, v) in obj {
                if !v.as_f64().is_some_and(f64::is_finite) {
                    return Err(Error::InvalidParameter(format!("{key} is not finite")));
                }
            }
        }
        Ok(())
    }
}
