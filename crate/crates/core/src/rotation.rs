//! Rotation numbers from simulated sleep-onset sequences, and staircases of
//! rotation number against the homeostatic scale `k`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chs::scn_plateau;
use crate::error::{Error, Result};
use crate::integrator::{integrate_system, Control, EventKind, IntegratorOptions, SystemKind, Trajectory};
use crate::model::{prev_circadian_minimum, scn_inf, ModelState, Regime};
use crate::params::{ParameterSet, OMEGA, PERIOD};

/// Phase-equality tolerance for pattern detection.
pub const PHASE_TOL: f64 = 3e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationResult {
    /// Sleep episodes per period.
    pub p: u64,
    /// Circadian days per period.
    pub q: u64,
    pub rho: f64,
    /// `false` when no repeating pattern was found and `rho` is a long-run average.
    pub exact: bool,
}

impl RotationResult {
    pub fn exact(p: u64, q: u64) -> Self {
        let g = gcd(p, q).max(1);
        let (p, q) = (p / g, q / g);
        Self { p, q, rho: q as f64 / p as f64, exact: true }
    }

    /// Same exact rational.
    pub fn same_ratio(&self, other: &RotationResult) -> bool {
        self.exact && other.exact && self.p == other.p && self.q == other.q
    }

    pub fn label(&self) -> String {
        if self.exact {
            format!("{}/{}", self.q, self.p)
        } else {
            format!("~{:.4}", self.rho)
        }
    }
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RotationOptions {
    pub days: f64,
    pub fallback_days: f64,
    pub tol: f64,
    /// Only onsets after this many days enter the pattern search.
    pub discard_days: f64,
    /// Number of additional periods the pattern must repeat.
    pub confirm_periods: usize,
    pub system: SystemKind,
    pub integrator: IntegratorOptions,
}

impl Default for RotationOptions {
    fn default() -> Self {
        Self {
            days: 100.0,
            fallback_days: 120.0,
            tol: PHASE_TOL,
            discard_days: 0.0,
            confirm_periods: 3,
            system: SystemKind::Swff,
            integrator: IntegratorOptions::default(),
        }
    }
}

impl RotationOptions {
    pub fn strict() -> Self {
        Self { discard_days: 50.0, ..Self::default() }
    }

    pub fn chs() -> Self {
        Self { system: SystemKind::Chs, ..Self::default() }
    }

    /// Looser integration for large grids; plateau edges are unchanged.
    pub fn sweep() -> Self {
        let integrator = IntegratorOptions { rtol: 1e-8, atol: 1e-10, ..IntegratorOptions::default() };
        Self { integrator, ..Self::default() }
    }
}

/// Circular distance between two phases.
pub fn phase_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Wrap a phase difference into [-0.5, 0.5).
pub fn wrap_signed(d: f64) -> f64 {
    (d + 0.5).rem_euclid(1.0) - 0.5
}

/// Circadian phase of an event relative to the preceding minimum.
pub fn phase_of_event(t_event: f64, t_prev_min: f64) -> Result<f64> {
    if t_event < t_prev_min {
        return Err(Error::EventBeforeMinimum { event: t_event, minimum: t_prev_min });
    }
    let phi = (t_event - t_prev_min) / PERIOD;
    if phi >= 1.0 + 1e-9 {
        return Err(Error::Domain(format!("minimum at {t_prev_min} is not the one preceding {t_event}")));
    }
    Ok(phi.rem_euclid(1.0))
}

/// Phase of an event time using the analytic circadian minima.
pub fn phase_at(t: f64, p: &ParameterSet) -> f64 {
    phase_of_event(t, prev_circadian_minimum(t, p)).unwrap_or(0.0)
}

/// Initial condition used for rotation-number runs: awake near the upper
/// branch at `t = 0`.
pub fn standard_initial_condition(system: SystemKind, p: &ParameterSet) -> (ModelState, Regime) {
    let theta = -OMEGA * p.phi;
    let c = theta.cos();
    let scn_high = c > p.beta_scn;
    let f_scn = match system {
        SystemKind::Swff => scn_inf(c, p),
        SystemKind::Chs => scn_plateau(scn_high, p),
    };
    let x = ModelState { f_w: 5.5, f_s: 0.1, f_scn, h: 150.0, c, theta };
    (x, Regime { wake: true, scn_high: scn_high && system == SystemKind::Chs })
}

/// Pattern detection on a recorded onset sequence.
///
/// `onsets` are `(t, phase)` pairs in time order; `minima` are circadian
/// minimum times. Returns `(p, q)` unreduced.
pub fn detect_pattern(onsets: &[(f64, f64)], minima: &[f64], tol: f64, confirm_periods: usize) -> Option<(u64, u64)> {
    let n = onsets.len();
    if n < 2 {
        return None;
    }
    let last = n - 1;
    let count_minima = |a: f64, b: f64| minima.iter().filter(|&&m| m > a && m <= b).count() as u64;
    for j in (0..last).rev() {
        if phase_distance(onsets[j].1, onsets[last].1) >= tol {
            continue;
        }
        let per = last - j;
        let q = count_minima(onsets[j].0, onsets[last].0);
        if q == 0 {
            continue;
        }
        // the pattern must repeat for the requested number of earlier periods
        let needed = per * (confirm_periods + 1);
        if needed > last {
            continue;
        }
        let phases_ok = (last - per * confirm_periods..=last)
            .all(|i| phase_distance(onsets[i].1, onsets[i - per].1) < tol);
        let days_ok = (1..=confirm_periods).all(|m| {
            let hi = last - per * m;
            count_minima(onsets[hi - per].0, onsets[hi].0) == q
        });
        if phases_ok && days_ok {
            return Some((per as u64, q));
        }
    }
    None
}

fn onsets_and_minima(tr: &Trajectory, p: &ParameterSet, after: f64) -> (Vec<(f64, f64)>, Vec<f64>) {
    let onsets = tr.sleep_onsets().filter(|e| e.t >= after).map(|e| (e.t, phase_at(e.t, p))).collect();
    let minima = tr.events_of(EventKind::CircadianMinimum).map(|e| e.t).collect();
    (onsets, minima)
}

fn run(p: &ParameterSet, days: f64, opts: &RotationOptions) -> Result<Trajectory> {
    let (x0, r0) = standard_initial_condition(opts.system, p);
    integrate_system(opts.system, &x0, r0, 0.0, days * PERIOD, p, &opts.integrator, &mut |_| Control::Continue)
}

/// Rotation number `rho = q/p` of the attractor reached from the standard
/// initial condition.
pub fn rotation_number(p: &ParameterSet) -> Result<RotationResult> {
    rotation_number_with(p, &RotationOptions::default())
}

pub fn rotation_number_with(p: &ParameterSet, opts: &RotationOptions) -> Result<RotationResult> {
    p.validate()?;
    let tr = run(p, opts.days, opts)?;
    let (onsets, minima) = onsets_and_minima(&tr, p, opts.discard_days * PERIOD);
    if tr.sleep_onsets().next().is_none() {
        return Err(Error::NoSleepOnset { days: opts.days });
    }
    if let Some((per, q)) = detect_pattern(&onsets, &minima, opts.tol, opts.confirm_periods) {
        return Ok(RotationResult::exact(per, q));
    }
    let tr = run(p, opts.fallback_days, opts)?;
    let sleeps = tr.sleep_onsets().count() as u64;
    if sleeps == 0 {
        return Err(Error::NoSleepOnset { days: opts.fallback_days });
    }
    let days = opts.fallback_days.round() as u64;
    Ok(RotationResult { p: sleeps, q: days, rho: days as f64 / sleeps as f64, exact: false })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plateau {
    pub k_lo: f64,
    pub k_hi: f64,
    pub p: u64,
    pub q: u64,
}

impl Plateau {
    pub fn rho(&self) -> f64 {
        self.q as f64 / self.p as f64
    }

    pub fn width(&self) -> f64 {
        self.k_hi - self.k_lo
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Staircase {
    pub alpha_scn: f64,
    /// Cells in strictly decreasing `k`.
    pub cells: Vec<(f64, RotationResult)>,
    pub plateaus: Vec<Plateau>,
    /// `k` values whose result was a fallback average.
    pub inexact: Vec<f64>,
    pub base: ParameterSet,
    pub options: RotationOptions,
}

impl Staircase {
    pub fn plateau_of(&self, p: u64, q: u64) -> Option<&Plateau> {
        self.plateaus.iter().filter(|pl| pl.p == p && pl.q == q).max_by(|a, b| a.width().total_cmp(&b.width()))
    }

    /// Total `k`-width of plateaus with `rho` strictly between `lo` and `hi`.
    pub fn measure_between(&self, lo: f64, hi: f64) -> f64 {
        self.plateaus.iter().filter(|pl| pl.rho() > lo && pl.rho() < hi).map(|pl| pl.width()).sum()
    }
}

/// Descending `k` grid from `k_hi` to `k_lo` with the given step.
pub fn k_grid(k_hi: f64, k_lo: f64, step: f64) -> Vec<f64> {
    let n = ((k_hi - k_lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| ((k_hi - step * i as f64) * 1e9).round() / 1e9).collect()
}

pub fn staircase(k_grid: &[f64], base: &ParameterSet) -> Result<Staircase> {
    staircase_with(k_grid, base, &RotationOptions::default())
}

pub fn staircase_with(k_grid: &[f64], base: &ParameterSet, opts: &RotationOptions) -> Result<Staircase> {
    if k_grid.is_empty() {
        return Err(Error::InvalidParameter("empty k grid".into()));
    }
    if k_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("k grid must be strictly decreasing".into()));
    }
    let cells: Vec<(f64, RotationResult)> = k_grid
        .par_iter()
        .map(|&k| rotation_number_with(&base.with_k(k), opts).map(|r| (k, r)))
        .collect::<Result<_>>()?;
    Ok(assemble(cells, base, opts))
}

pub(crate) fn assemble(cells: Vec<(f64, RotationResult)>, base: &ParameterSet, opts: &RotationOptions) -> Staircase {
    let mut plateaus: Vec<Plateau> = Vec::new();
    let mut inexact = Vec::new();
    let mut open: Option<Plateau> = None;
    for &(k, r) in &cells {
        if !r.exact {
            inexact.push(k);
            plateaus.extend(open.take());
            continue;
        }
        match open.as_mut() {
            Some(pl) if pl.p == r.p && pl.q == r.q => pl.k_lo = k,
            _ => {
                plateaus.extend(open.take());
                open = Some(Plateau { k_lo: k, k_hi: k, p: r.p, q: r.q });
            }
        }
    }
    plateaus.extend(open);
    Staircase { alpha_scn: base.alpha_scn, cells, plateaus, inexact, base: *base, options: *opts }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FareyPair {
    pub upper: (u64, u64),
    pub lower: (u64, u64),
    pub mediant: (u64, u64),
    pub checked: bool,
    pub found: bool,
    pub k_found: Option<f64>,
    pub note: String,
}

/// For each pair of neighbouring plateaus `a/b`, `c/d` with `|ad - bc| = 1`,
/// look for the mediant in the `k` gap between them.
pub fn farey_check(s: &Staircase) -> Vec<FareyPair> {
    farey_check_budget(s, 48)
}

pub fn farey_check_budget(s: &Staircase, budget: usize) -> Vec<FareyPair> {
    // plateaus wider than a single cell, in decreasing k
    let mut pls: Vec<&Plateau> = s.plateaus.iter().collect();
    pls.sort_by(|a, b| b.k_hi.total_cmp(&a.k_hi));
    let mut out = Vec::new();
    for w in pls.windows(2) {
        let (u, l) = (w[0], w[1]);
        let (a, b) = (u.q, u.p);
        let (c, d) = (l.q, l.p);
        let det = (a * d) as i64 - (b * c) as i64;
        let mediant = {
            let (n, m) = (a + c, b + d);
            let g = gcd(n, m);
            (n / g, m / g)
        };
        let mut rec = FareyPair {
            upper: (a, b),
            lower: (c, d),
            mediant,
            checked: false,
            found: false,
            k_found: None,
            note: String::new(),
        };
        if det.abs() != 1 {
            rec.note = format!("skipped: |ad - bc| = {}", det.abs());
            out.push(rec);
            continue;
        }
        rec.checked = true;
        let (k_top, k_bot) = (u.k_lo, l.k_hi);
        // refine the gap by successive halving of the sampling step
        let mut tried: Vec<f64> = Vec::new();
        let mut level = 1usize;
        'search: while tried.len() < budget {
            let n = 1usize << level;
            for i in 1..n {
                if i % 2 == 0 && level > 1 {
                    continue;
                }
                let k = k_top - (k_top - k_bot) * i as f64 / n as f64;
                tried.push(k);
                if let Ok(r) = rotation_number_with(&s.base.with_k(k), &s.options) {
                    if r.exact && r.q * mediant.1 == r.p * mediant.0 {
                        rec.found = true;
                        rec.k_found = Some(k);
                        break 'search;
                    }
                }
                if tried.len() >= budget {
                    break 'search;
                }
            }
            level += 1;
        }
        if !rec.found {
            rec.note = format!("mediant not found in {} samples of ({k_bot}, {k_top})", tried.len());
        }
        out.push(rec);
    }
    out
}
