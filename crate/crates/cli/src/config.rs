use std::path::Path;

use serde::{Deserialize, Serialize};
use swff::atlas::AtlasOptions;
use swff::circlemap::MapSettings;
use swff::rotation::RotationOptions;
use swff::{IntegratorOptions, ParameterSet};

/// Second-return bistability scan inside the 1/2 tongue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IslandConfig {
    pub alpha: Vec<f64>,
    pub k_range: (f64, f64),
    pub k_step: f64,
}

/// Effective configuration of one run. Every subcommand reads the fields it
/// needs and ignores the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub params: ParameterSet,
    pub integrator: IntegratorOptions,
    /// Simulation horizon (days).
    pub days: f64,
    /// Trajectory sample spacing (h).
    pub sample_step: f64,
    pub k_range: (f64, f64),
    pub k_step: f64,
    pub alpha_range: (f64, f64),
    pub alpha_step: f64,
    /// Return-map order.
    pub order: usize,
    pub c_points: usize,
    pub h_points: usize,
    pub fold_samples: usize,
    pub map: MapSettings,
    pub rotation: RotationOptions,
    pub atlas: AtlasOptions,
    /// `(q, p)` pairs, one tongue each.
    pub tongues: Vec<(u64, u64)>,
    pub island: Option<IslandConfig>,
    /// Continuity probes per alpha; 0 skips the transition zone.
    pub transition_probes: usize,
    pub jobs: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: ParameterSet::default(),
            integrator: IntegratorOptions::default(),
            days: 10.0,
            sample_step: 0.05,
            k_range: (0.1, 1.0),
            k_step: 0.001,
            alpha_range: (0.7, 0.7),
            alpha_step: 0.1,
            order: 1,
            c_points: 41,
            h_points: 81,
            fold_samples: 129,
            map: MapSettings::default(),
            rotation: RotationOptions::default(),
            atlas: AtlasOptions::default(),
            tongues: vec![(1, 1)],
            island: None,
            transition_probes: 0,
            jobs: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

fn positive(name: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(format!("{name} must be > 0, got {v}")))
    }
}

fn range(name: &str, (lo, hi): (f64, f64)) -> Result<(), ConfigError> {
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(bad(format!("{name} ({lo}, {hi}) is empty")));
    }
    Ok(())
}

/// Inclusive grid from `lo` to `hi`, rounded to 1e-9.
pub fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| ((lo + step * i as f64) * 1e9).round() / 1e9).collect()
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| bad(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let core = |e: swff::Error| bad(e.to_string());
        self.params.validate().map_err(core)?;
        self.integrator.validate().map_err(core)?;
        self.rotation.integrator.validate().map_err(core)?;
        self.map.integrator.validate().map_err(core)?;
        self.atlas.validate().map_err(core)?;
        positive("days", self.days)?;
        positive("sample_step", self.sample_step)?;
        positive("k_step", self.k_step)?;
        positive("alpha_step", self.alpha_step)?;
        range("k_range", self.k_range)?;
        range("alpha_range", self.alpha_range)?;
        positive("k_range lower end", self.k_range.0)?;
        positive("alpha_range lower end", self.alpha_range.0)?;
        if self.k_range.1 > 1.0 {
            return Err(bad(format!("k_range upper end {} exceeds 1", self.k_range.1)));
        }
        if self.order == 0 {
            return Err(bad("order must be >= 1"));
        }
        if self.c_points < 2 || self.h_points < 2 {
            return Err(bad("Z-surface grid needs at least 2 points per axis"));
        }
        if self.fold_samples < 16 {
            return Err(bad("fold_samples must be >= 16"));
        }
        if self.tongues.iter().any(|&(q, p)| q == 0 || p == 0) {
            return Err(bad("tongue (q, p) entries must be positive"));
        }
        if let Some(is) = &self.island {
            range("island k_range", is.k_range)?;
            positive("island k_step", is.k_step)?;
            if is.alpha.is_empty() {
                return Err(bad("island alpha list is empty"));
            }
        }
        if self.jobs == Some(0) {
            return Err(bad("jobs must be >= 1"));
        }
        Ok(())
    }

    pub fn k_grid(&self) -> Vec<f64> {
        swff::rotation::k_grid(self.k_range.1, self.k_range.0, self.k_step)
    }

    pub fn alpha_grid(&self) -> Vec<f64> {
        grid(self.alpha_range.0, self.alpha_range.1, self.alpha_step)
    }
}
