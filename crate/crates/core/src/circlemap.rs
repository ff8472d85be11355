//! Sleep-onset circle maps built by integrating from the upper fold curve.
//!
//! A grid phase `psi` sets the initial circadian phase (`psi = 0` at the
//! circadian minimum) and the initial state sits on the upper fold at the
//! corresponding `c`. The map sends the phase of the first sleep onset,
//! `Phi_n`, to the phase of the `p`-th subsequent one, `Phi_{n+p}`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fastslow::{manifold_ic_from_fold, refine_fold, trace_fast_flow, FastContext, FoldCurve, FoldSample};
use crate::integrator::{integrate_system, Control, EventKind, EventRecord, IntegratorOptions, SystemKind, Trajectory};
use crate::model::{scn_inf, ModelState, Regime};
use crate::params::{ParameterSet, OMEGA, PERIOD};
use crate::rotation::{phase_at, wrap_signed};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MapSettings {
    pub base: usize,
    /// Displacement off the fold along the slow eigenvector (f_W units).
    pub offset: f64,
    /// Direct fold initial conditions must cross Γ within this many hours.
    pub gap_probe_hours: f64,
    /// The manifold point is carried down to `theta_W + margin`.
    pub manifold_margin: f64,
    pub cap_days: f64,
    /// Discontinuity threshold as a multiple of the local median increment.
    pub jump_factor: f64,
    /// Smallest rise counted as a discontinuity.
    pub min_jump: f64,
    /// One-sided difference quotients above this are "infinite".
    pub slope_cutoff: f64,
    /// A rise above the threshold within this width of grid phase is a
    /// discontinuity. Its ends are then pulled in while the rise persists.
    pub jump_width: f64,
    /// Neighbourhood for slope estimates.
    pub slope_step: f64,
    /// Fixed-point residual tolerance.
    pub fp_tol: f64,
    pub integrator: IntegratorOptions,
}

impl Default for MapSettings {
    fn default() -> Self {
        Self {
            base: 512,
            offset: 1e-3,
            gap_probe_hours: 1.0,
            manifold_margin: 0.1,
            cap_days: 40.0,
            jump_factor: 10.0,
            min_jump: 0.01,
            slope_cutoff: 1e3,
            jump_width: 1e-4,
            slope_step: 1e-6,
            fp_tol: 1e-9,
            integrator: IntegratorOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub phases: Vec<f64>,
    pub base: usize,
    /// Phases added after the base grid, in insertion order.
    pub inserted: Vec<f64>,
}

impl PhaseGrid {
    pub fn uniform(n: usize) -> Self {
        Self { phases: (0..n).map(|i| i as f64 / n as f64).collect(), base: n, inserted: Vec::new() }
    }

    pub fn insert(&mut self, phi: f64) -> bool {
        let phi = phi.rem_euclid(1.0);
        match self.phases.binary_search_by(|x| x.total_cmp(&phi)) {
            Ok(_) => false,
            Err(i) => {
                self.phases.insert(i, phi);
                self.inserted.push(phi);
                true
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapPoint {
    /// Grid phase of the initial condition.
    pub psi: f64,
    pub phi_n: f64,
    pub phi_np: f64,
    /// Circadian minima passed between the two onsets.
    pub days: u32,
    /// Initial condition came from the unstable manifold.
    pub manifold: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlopeClass {
    Finite,
    Infinite,
}

/// Jump in `Phi_n` between neighbouring grid phases where the initial
/// condition family changes. No onset phase falls inside the gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizontalGap {
    pub phi_left: f64,
    pub phi_right: f64,
    pub y_left: f64,
    pub y_right: f64,
    /// The rise across the gap exceeds what the edge slopes carry over its
    /// width by more than the threshold, so the map jumps inside it.
    #[serde(default)]
    pub hidden_jump: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discontinuity {
    pub phi_left: f64,
    pub phi_right: f64,
    pub jump: f64,
    pub left_slope_class: SlopeClass,
    pub right_slope_class: SlopeClass,
    pub left_slope: f64,
    pub right_slope: f64,
    /// Map values on either side.
    pub y_left: f64,
    pub y_right: f64,
    pub psi_left: f64,
    pub psi_right: f64,
}

/// Everything needed to re-evaluate the map on demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSource {
    pub params: ParameterSet,
    pub fold: FoldCurve,
    pub settings: MapSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledCircleMap {
    pub order: usize,
    /// Sorted by `psi`.
    pub points: Vec<MapPoint>,
    /// Point indices per branch, in increasing `psi` (a branch may wrap).
    pub branches: Vec<Vec<usize>>,
    pub discontinuities: Vec<Discontinuity>,
    pub horizontal_gaps: Vec<HorizontalGap>,
    pub threshold: f64,
    /// Range of grid phases where manifold initial conditions were used.
    pub gap_window: Option<(f64, f64)>,
    pub grid: PhaseGrid,
    #[serde(skip)]
    pub source: Option<MapSource>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedPointStability {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapFixedPoint {
    pub phi: f64,
    pub psi: f64,
    pub stability: FixedPointStability,
    pub slope: f64,
    pub branch: usize,
    /// Circadian days spanned by the `p` onsets.
    pub days: u32,
    /// Phase distance to the nearer end of its branch.
    pub end_distance: f64,
    /// Slope indistinguishable from 1.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BifurcationKind {
    #[serde(rename = "SN")]
    Sn,
    #[serde(rename = "BC_S")]
    BcS,
    #[serde(rename = "BC_U")]
    BcU,
}

impl BifurcationKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BifurcationKind::Sn => "SN",
            BifurcationKind::BcS => "BC-S",
            BifurcationKind::BcU => "BC-U",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Evidence {
    /// Largest stable slope (or smallest unstable slope) next to the event.
    SlopeToOne { slope: f64 },
    /// Distance of the fixed point to its branch end next to the event.
    BranchEndpoint { distance: f64 },
    Tangency { distance: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BifurcationRecord {
    pub kind: BifurcationKind,
    pub k: f64,
    pub alpha_scn: f64,
    /// `(k_lo, k_hi)` bracketing the event.
    pub bracket: (f64, f64),
    pub evidence: Evidence,
    /// `true` when creation (k decreasing) rather than destruction.
    pub created: bool,
    /// Another record shares the same bracket.
    pub simultaneous: bool,
}

impl BifurcationRecord {
    pub fn evidence_consistent(&self) -> bool {
        matches!(
            (self.kind, self.evidence),
            (BifurcationKind::Sn, Evidence::SlopeToOne { .. })
                | (BifurcationKind::BcS | BifurcationKind::BcU, Evidence::BranchEndpoint { .. } | Evidence::Tangency { .. })
        )
    }
}

fn initial_time(psi: f64, p: &ParameterSet) -> (f64, f64) {
    let t0 = p.phi + PERIOD / 2.0 + PERIOD * psi;
    (t0, OMEGA * (t0 - p.phi))
}

fn polished_fold(c: f64, fold: &FoldCurve, p: &ParameterSet) -> Result<FoldSample> {
    let (h0, f0) = fold
        .interpolate(c)
        .ok_or_else(|| Error::NoFold { c, reason: "outside fold curve range".into() })?;
    let (f, h) = refine_fold(c, f0, h0, p)?;
    Ok(FoldSample { c, h_fold: h, f_w_fold: f })
}

/// Initial condition for grid phase `psi` taken directly on the upper fold.
pub fn map_initial_condition(psi: f64, fold: &FoldCurve, p: &ParameterSet) -> Result<(ModelState, Regime)> {
    let psi = psi.rem_euclid(1.0);
    let (_, theta) = initial_time(psi, p);
    let c = theta.cos();
    let f = polished_fold(c, fold, p)?;
    if f.f_w_fold <= p.theta_w {
        return Err(Error::NoFold { c, reason: format!("upper fold at f_W = {} is below theta_W", f.f_w_fold) });
    }
    let ctx = FastContext::new(f.h_fold, c, p);
    let x = ModelState { f_w: f.f_w_fold, f_s: ctx.f_s(f.f_w_fold), f_scn: scn_inf(c, p), h: f.h_fold, c, theta };
    Ok((x, Regime::WAKE))
}

/// Initial condition on the unstable manifold of the fold saddle, carried
/// down toward Γ with the slow variables frozen.
pub fn manifold_initial_condition(psi: f64, fold: &FoldCurve, p: &ParameterSet, s: &MapSettings) -> Result<(ModelState, Regime)> {
    let psi = psi.rem_euclid(1.0);
    let (_, theta) = initial_time(psi, p);
    let c = theta.cos();
    let f = polished_fold(c, fold, p)?;
    let mut x = manifold_ic_from_fold(&f, s.offset, p)?;
    x.theta = theta;
    let x = trace_fast_flow(&x, p.theta_w + s.manifold_margin, p)?;
    Ok((x, Regime::WAKE))
}

impl MapSource {
    fn stop_after(n: usize) -> impl FnMut(&EventRecord) -> Control {
        let mut seen = 0usize;
        move |e: &EventRecord| {
            if e.kind == EventKind::SleepOnset {
                seen += 1;
                if seen >= n {
                    return Control::Stop;
                }
            }
            Control::Continue
        }
    }

    fn first_onset(&self, x: &ModelState, t0: f64, horizon: f64) -> Result<Option<EventRecord>> {
        let tr = integrate_system(
            SystemKind::Swff,
            x,
            Regime::WAKE,
            t0,
            horizon,
            &self.params,
            &self.settings.integrator,
            &mut Self::stop_after(1),
        )?;
        let first = tr.sleep_onsets().next().copied();
        Ok(first)
    }

    /// Map value for grid phase `psi`.
    pub fn evaluate(&self, order: usize, psi: f64) -> Result<MapPoint> {
        let p = &self.params;
        let s = &self.settings;
        let psi = psi.rem_euclid(1.0);
        let (t0, _) = initial_time(psi, p);
        let (x, _) = map_initial_condition(psi, &self.fold, p)?;
        let mut manifold = false;
        let first = match self.first_onset(&x, t0, s.gap_probe_hours)? {
            Some(e) => e,
            None => {
                manifold = true;
                let (xm, _) = manifold_initial_condition(psi, &self.fold, p, s)?;
                self.first_onset(&xm, t0, s.cap_days * PERIOD)?
                    .ok_or(Error::NoSleepOnset { days: s.cap_days })?
            }
        };
        let tr = integrate_system(
            SystemKind::Swff,
            &first.state,
            first.regime,
            first.t,
            s.cap_days * PERIOD,
            p,
            &s.integrator,
            &mut Self::stop_after(order),
        )?;
        let last = tr.sleep_onsets().nth(order - 1).ok_or(Error::NoSleepOnset { days: s.cap_days })?;
        let m0 = p.phi + PERIOD / 2.0;
        let days = ((last.t - m0) / PERIOD).floor() - ((first.t - m0) / PERIOD).floor();
        Ok(MapPoint {
            psi,
            phi_n: phase_at(first.t, p),
            phi_np: phase_at(last.t, p),
            days: days.max(0.0) as u32,
            manifold,
        })
    }

    /// Orbit from a map initial condition, for long-run checks.
    pub fn orbit(&self, psi: f64, days: f64) -> Result<Trajectory> {
        let p = &self.params;
        let psi = psi.rem_euclid(1.0);
        let (t0, _) = initial_time(psi, p);
        let (x, _) = map_initial_condition(psi, &self.fold, p)?;
        let x = if self.first_onset(&x, t0, self.settings.gap_probe_hours)?.is_some() {
            x
        } else {
            manifold_initial_condition(psi, &self.fold, p, &self.settings)?.0
        };
        integrate_system(SystemKind::Swff, &x, Regime::WAKE, t0, days * PERIOD, p, &self.settings.integrator, &mut |_| {
            Control::Continue
        })
    }
}

fn increment(a: &MapPoint, b: &MapPoint) -> f64 {
    wrap_signed(b.phi_np - a.phi_np)
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

pub fn build_map(order: usize, grid: &PhaseGrid, params: &ParameterSet, fold: &FoldCurve) -> Result<SampledCircleMap> {
    build_map_with(order, grid, params, fold, &MapSettings::default())
}

pub fn build_map_with(
    order: usize,
    grid: &PhaseGrid,
    params: &ParameterSet,
    fold: &FoldCurve,
    settings: &MapSettings,
) -> Result<SampledCircleMap> {
    if order == 0 {
        return Err(Error::InvalidParameter("map order must be >= 1".into()));
    }
    if grid.phases.len() < 8 {
        return Err(Error::InvalidParameter("phase grid needs at least 8 points".into()));
    }
    params.validate()?;
    let src = MapSource { params: *params, fold: fold.clone(), settings: *settings };
    let mut grid = grid.clone();
    let mut points: Vec<MapPoint> =
        grid.phases.par_iter().map(|&psi| src.evaluate(order, psi)).collect::<Result<_>>()?;

    // threshold from the base increments
    let n = points.len();
    let incs: Vec<f64> = (0..n).map(|i| increment(&points[i], &points[(i + 1) % n]).abs()).collect();
    let threshold = (settings.jump_factor * median(&mut incs.clone())).max(settings.min_jump);

    // localise each candidate jump by bisection in psi
    let candidates: Vec<usize> = (0..n).filter(|&i| incs[i] > threshold).collect();
    // family switches can leave Phi_{n+p} nearly level, so look at Phi_n too
    let xs: Vec<f64> = (0..n).map(|i| wrap_signed(points[(i + 1) % n].phi_n - points[i].phi_n).abs()).collect();
    let x_threshold = settings.jump_factor * median(&mut xs.clone());
    let x_candidates: Vec<usize> = (0..n).filter(|&i| xs[i] > x_threshold && incs[i] <= threshold).collect();
    let mut extra: Vec<MapPoint> = Vec::new();
    let mut discontinuities = Vec::new();
    let mut horizontal_gaps = Vec::new();
    let located: Vec<(Vec<MapPoint>, Located)> = candidates
        .par_iter()
        .map(|&i| locate_jump(&src, order, points[i], points[(i + 1) % n], threshold))
        .collect::<Result<_>>()?;
    let gaps: Vec<(Vec<MapPoint>, Option<HorizontalGap>)> = x_candidates
        .par_iter()
        .map(|&i| locate_gap(&src, order, points[i], points[(i + 1) % n]))
        .collect::<Result<_>>()?;
    for (pts, g) in gaps {
        extra.extend(pts);
        horizontal_gaps.extend(g);
    }
    for (pts, d) in located {
        extra.extend(pts);
        match d {
            Located::Jump(d) => discontinuities.push(d),
            Located::Gap(g) => horizontal_gaps.push(g),
            Located::Continuous => {}
        }
    }
    for pt in extra {
        if grid.insert(pt.psi) {
            points.push(pt);
        }
    }
    points.sort_by(|a, b| a.psi.total_cmp(&b.psi));
    points.dedup_by(|a, b| a.psi == b.psi);
    // direct points overtaken by the manifold family in Phi_n
    if let Some((lo, hi)) = manifold_span(&points) {
        let inside = |x: f64| {
            let w = (hi - lo).rem_euclid(1.0);
            let d = (x - lo).rem_euclid(1.0);
            d > 0.0 && d < w
        };
        points.retain(|q| q.manifold || !inside(q.phi_n));
        horizontal_gaps.retain(|g| !(inside(g.phi_left) || inside(g.phi_right)));
        discontinuities.retain(|d| points.iter().any(|q| q.psi == d.psi_left) && points.iter().any(|q| q.psi == d.psi_right));
    }
    discontinuities.sort_by(|a, b| a.psi_left.total_cmp(&b.psi_left));

    let branches = split_branches(&points, &discontinuities);
    let manifold: Vec<f64> = points.iter().filter(|q| q.manifold).map(|q| q.psi).collect();
    let gap_window = if manifold.is_empty() {
        None
    } else {
        Some((manifold.iter().cloned().fold(f64::INFINITY, f64::min), manifold.iter().cloned().fold(0.0, f64::max)))
    };
    horizontal_gaps.sort_by(|a: &HorizontalGap, b| a.phi_left.total_cmp(&b.phi_left));
    mark_hidden_jumps(&mut horizontal_gaps, &points, threshold);
    Ok(SampledCircleMap {
        order,
        points,
        branches,
        discontinuities,
        horizontal_gaps,
        threshold,
        gap_window,
        grid,
        source: Some(src),
    })
}

/// Circular `Phi_n` arc covered by the manifold family, from its first to its
/// last point in psi order.
fn manifold_span(points: &[MapPoint]) -> Option<(f64, f64)> {
    let n = points.len();
    let start = (0..n).find(|&i| points[i].manifold && !points[(i + n - 1) % n].manifold)?;
    let mut last = start;
    for j in 1..n {
        let i = (start + j) % n;
        if !points[i].manifold {
            break;
        }
        last = i;
    }
    Some((points[start].phi_n, points[last].phi_n))
}

fn slope_between(a: &MapPoint, b: &MapPoint) -> f64 {
    let dx = wrap_signed(b.phi_n - a.phi_n);
    if dx == 0.0 {
        return f64::INFINITY;
    }
    increment(a, b) / dx
}

#[derive(Debug)]
enum Located {
    Jump(Discontinuity),
    Gap(HorizontalGap),
    Continuous,
}

/// Largest `Phi_n` step, in units of `jump_width`, still counted as "the
/// same abscissa" once a jump has been localised.
const SAME_X: f64 = 10.0;
fn mark_hidden_jumps(gaps: &mut [HorizontalGap], points: &[MapPoint], threshold: f64) {
    let mut by_x: Vec<&MapPoint> = points.iter().collect();
    by_x.sort_by(|a, b| a.phi_n.total_cmp(&b.phi_n));
    let n = by_x.len();
    let slope = |i: usize, j: usize| {
        let (a, b) = (by_x[i % n], by_x[j % n]);
        let dx = wrap_signed(b.phi_n - a.phi_n);
        if dx.abs() > 0.0 { increment(a, b) / dx } else { 0.0 }
    };
    for g in gaps.iter_mut() {
        let (Some(l), Some(r)) = (
            by_x.iter().position(|q| q.phi_n == g.phi_left),
            by_x.iter().position(|q| q.phi_n == g.phi_right),
        ) else {
            continue;
        };
        let carried = slope(l + n - 1, l).abs().max(slope(r, r + 1).abs()) * wrap_signed(g.phi_right - g.phi_left).abs();
        g.hidden_jump = wrap_signed(g.y_right - g.y_left).abs() > carried + threshold;
    }
}

/// Bisect a jump in `Phi_n` between two neighbouring grid points.
fn locate_gap(src: &MapSource, order: usize, a: MapPoint, b: MapPoint) -> Result<(Vec<MapPoint>, Option<HorizontalGap>)> {
    let s = &src.settings;
    let (mut lo, mut hi) = (a, b);
    let mut hi_psi = if b.psi < a.psi { b.psi + 1.0 } else { b.psi };
    let mut lo_psi = a.psi;
    let mut added = Vec::new();
    let dx = |u: &MapPoint, v: &MapPoint| wrap_signed(v.phi_n - u.phi_n).abs();
    while hi_psi - lo_psi > s.jump_width {
        let m = 0.5 * (lo_psi + hi_psi);
        let pm = src.evaluate(order, m)?;
        added.push(pm);
        if dx(&lo, &pm) >= dx(&pm, &hi) {
            hi = pm;
            hi_psi = m;
        } else {
            lo = pm;
            lo_psi = m;
        }
    }
    let gap = (dx(&lo, &hi) > SAME_X * s.jump_width)
        .then_some(HorizontalGap { phi_left: lo.phi_n, phi_right: hi.phi_n, y_left: lo.phi_np, y_right: hi.phi_np, hidden_jump: false });
    Ok((added, gap))
}

fn locate_jump(
    src: &MapSource,
    order: usize,
    a: MapPoint,
    b: MapPoint,
    threshold: f64,
) -> Result<(Vec<MapPoint>, Located)> {
    let s = &src.settings;
    let (mut lo, mut hi) = (a, b);
    let mut hi_psi = if b.psi < a.psi { b.psi + 1.0 } else { b.psi };
    let mut lo_psi = a.psi;
    let mut added = Vec::new();
    while hi_psi - lo_psi > s.jump_width {
        let m = 0.5 * (lo_psi + hi_psi);
        let pm = src.evaluate(order, m)?;
        added.push(pm);
        if increment(&lo, &pm).abs() >= increment(&pm, &hi).abs() {
            hi = pm;
            hi_psi = m;
        } else {
            lo = pm;
            lo_psi = m;
        }
    }
    if increment(&lo, &hi).abs() <= threshold {
        return Ok((added, Located::Continuous));
    }
    if wrap_signed(hi.phi_n - lo.phi_n).abs() > SAME_X * s.jump_width {
        let g = HorizontalGap { phi_left: lo.phi_n, phi_right: hi.phi_n, y_left: lo.phi_np, y_right: hi.phi_np, hidden_jump: false };
        return Ok((added, Located::Gap(g)));
    }
    // shrink the window while the rise inside it stays above the threshold
    while hi_psi - lo_psi > 0.1 * s.slope_step {
        let m = 0.5 * (lo_psi + hi_psi);
        let pm = src.evaluate(order, m)?;
        let (l, r) = (increment(&lo, &pm).abs(), increment(&pm, &hi).abs());
        if l.max(r) <= threshold {
            break;
        }
        added.push(pm);
        if l >= r {
            hi = pm;
            hi_psi = m;
        } else {
            lo = pm;
            lo_psi = m;
        }
    }
    let jump = increment(&lo, &hi).abs();
    let l2 = src.evaluate(order, lo_psi - s.slope_step)?;
    let r2 = src.evaluate(order, hi_psi + s.slope_step)?;
    let ls = slope_between(&l2, &lo);
    let rs = slope_between(&hi, &r2);
    added.push(l2);
    added.push(r2);
    let class = |v: f64| if v.abs() > s.slope_cutoff { SlopeClass::Infinite } else { SlopeClass::Finite };
    Ok((
        added,
        Located::Jump(Discontinuity {
            phi_left: lo.phi_n,
            phi_right: hi.phi_n,
            jump,
            left_slope_class: class(ls),
            right_slope_class: class(rs),
            left_slope: ls,
            right_slope: rs,
            y_left: lo.phi_np,
            y_right: hi.phi_np,
            psi_left: lo.psi,
            psi_right: hi.psi,
        }),
    ))
}

fn split_branches(points: &[MapPoint], disc: &[Discontinuity]) -> Vec<Vec<usize>> {
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    let cut_after: Vec<bool> = (0..n)
        .map(|i| disc.iter().any(|d| d.psi_left == points[i].psi && d.psi_right == points[(i + 1) % n].psi))
        .collect();
    if !cut_after.iter().any(|&c| c) {
        return vec![(0..n).collect()];
    }
    // start right after a cut so every branch is contiguous
    let start = (cut_after.iter().position(|&c| c).unwrap() + 1) % n;
    let mut out = Vec::new();
    let mut cur = Vec::new();
    for j in 0..n {
        let i = (start + j) % n;
        cur.push(i);
        if cut_after[i] {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

impl SampledCircleMap {
    /// Synthetic map from explicit `(Phi_n, Phi_{n+p})` pairs; no re-evaluation.
    pub fn from_samples(order: usize, samples: &[(f64, f64)]) -> Self {
        let points: Vec<MapPoint> = samples
            .iter()
            .map(|&(x, y)| MapPoint { psi: x, phi_n: x, phi_np: y.rem_euclid(1.0), days: order as u32, manifold: false })
            .collect();
        let n = points.len();
        let grid = PhaseGrid { phases: points.iter().map(|q| q.psi).collect(), base: n, inserted: Vec::new() };
        SampledCircleMap {
            order,
            branches: if n > 0 { vec![(0..n).collect()] } else { vec![] },
            points,
            discontinuities: Vec::new(),
            horizontal_gaps: Vec::new(),
            threshold: 0.0,
            gap_window: None,
            grid,
            source: None,
        }
    }

    /// Discontinuities including jumps hidden inside horizontal gaps.
    pub fn discontinuity_count(&self) -> usize {
        self.discontinuities.len() + self.horizontal_gaps.iter().filter(|g| g.hidden_jump).count()
    }

    pub fn is_continuous(&self) -> bool {
        self.discontinuity_count() == 0
    }

    pub fn largest_jump(&self) -> f64 {
        self.discontinuities.iter().map(|d| d.jump).fold(0.0, f64::max)
    }

    pub fn branch_of(&self, idx: usize) -> Option<usize> {
        self.branches.iter().position(|b| b.contains(&idx))
    }

    /// Points of a branch in order, with `psi` unwrapped to be increasing.
    fn branch_points(&self, b: usize) -> Vec<(f64, MapPoint)> {
        let mut out: Vec<(f64, MapPoint)> = Vec::new();
        let mut shift = 0.0;
        for &i in &self.branches[b] {
            let pt = self.points[i];
            if let Some(&(prev, _)) = out.last() {
                if pt.psi + shift < prev {
                    shift += 1.0;
                }
            }
            out.push((pt.psi + shift, pt));
        }
        out
    }

    /// Largest decrease of `Phi_{n+p}` between neighbours inside a branch
    /// (zero for monotone branches).
    pub fn max_branch_decrease(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for b in 0..self.branches.len() {
            let pts = self.branch_points(b);
            for w in pts.windows(2) {
                worst = worst.max(-increment(&w[0].1, &w[1].1));
            }
        }
        worst
    }
}

fn fp_residual(pt: &MapPoint) -> f64 {
    wrap_signed(pt.phi_np - pt.phi_n)
}

/// Diagonal crossings of every branch.
pub fn find_fixed_points(m: &SampledCircleMap) -> Result<Vec<MapFixedPoint>> {
    let mut out = Vec::new();
    for b in 0..m.branches.len() {
        out.extend(branch_fixed_points(m, b)?);
    }
    out.sort_by(|a, b| a.phi.total_cmp(&b.phi));
    Ok(out)
}

fn branch_fixed_points(m: &SampledCircleMap, b: usize) -> Result<Vec<MapFixedPoint>> {
    let pts = m.branch_points(b);
    let mut out = Vec::new();
    if pts.is_empty() {
        return Ok(out);
    }
    let (lo_end, hi_end) = (pts[0].1.phi_n, pts[pts.len() - 1].1.phi_n);
    // a single branch without discontinuities closes on itself and has no ends
    let closed = m.branches.len() == 1 && m.discontinuities.is_empty();
    let end_distance = |phi: f64| {
        if closed {
            CLOSED_END_DISTANCE
        } else {
            wrap_signed(phi - lo_end).abs().min(wrap_signed(hi_end - phi).abs())
        }
    };
    let d: Vec<f64> = pts.iter().map(|(_, q)| fp_residual(q)).collect();
    let src = m.source.as_ref();

    // synthetic maps: report exact diagonal samples
    if src.is_none() {
        for (i, (_, q)) in pts.iter().enumerate() {
            if d[i].abs() < 1e-12 {
                let slope = local_slope_from_samples(&pts, i);
                out.push(make_fp(q, slope, b, end_distance(q.phi_n)));
            }
        }
        for i in 0..pts.len().saturating_sub(1) {
            if d[i] * d[i + 1] < 0.0 && d[i].abs() < 0.25 && d[i + 1].abs() < 0.25 {
                let w = d[i] / (d[i] - d[i + 1]);
                let (a, c) = (pts[i].1, pts[i + 1].1);
                let x = a.phi_n + w * wrap_signed(c.phi_n - a.phi_n);
                let pt = MapPoint { psi: x, phi_n: x.rem_euclid(1.0), phi_np: x.rem_euclid(1.0), ..a };
                out.push(make_fp(&pt, slope_between(&a, &c), b, end_distance(x)));
            }
        }
        return Ok(out);
    }
    let src = src.unwrap();
    let order = m.order;
    let eval = |psi: f64| src.evaluate(order, psi);

    let mut brackets: Vec<(f64, MapPoint, f64, MapPoint)> = Vec::new();
    for i in 0..pts.len().saturating_sub(1) {
        let (da, db) = (d[i], d[i + 1]);
        if da.abs() < 0.25 && db.abs() < 0.25 && (da == 0.0 || da * db < 0.0) {
            brackets.push((pts[i].0, pts[i].1, pts[i + 1].0, pts[i + 1].1));
        }
    }
    if closed && pts.len() > 1 {
        let (last, first) = (pts[pts.len() - 1], pts[0]);
        let (da, db) = (d[pts.len() - 1], d[0]);
        if da.abs() < 0.25 && db.abs() < 0.25 && da * db < 0.0 {
            brackets.push((last.0, last.1, first.0 + 1.0, first.1));
        }
    }
    // near-touches: local minima of |d| without a sign change get resampled
    for i in 1..pts.len().saturating_sub(1) {
        let (dl, dc, dr) = (d[i - 1], d[i], d[i + 1]);
        let no_change = dl * dc > 0.0 && dc * dr > 0.0;
        if no_change && dc.abs() <= dl.abs() && dc.abs() <= dr.abs() && dc.abs() < 0.05 {
            let (a, c) = (pts[i - 1].0, pts[i + 1].0);
            let k = 16;
            let sub: Vec<(f64, MapPoint)> = (0..=k)
                .map(|j| {
                    let psi = a + (c - a) * j as f64 / k as f64;
                    eval(psi).map(|q| (psi, q))
                })
                .collect::<Result<_>>()?;
            for w in sub.windows(2) {
                let (ra, rb) = (fp_residual(&w[0].1), fp_residual(&w[1].1));
                if ra.abs() < 0.25 && rb.abs() < 0.25 && ra * rb < 0.0 {
                    brackets.push((w[0].0, w[0].1, w[1].0, w[1].1));
                }
            }
        }
    }
    for (pa, qa, pb, qb) in brackets {
        let (psi, q) = solve_fixed_point(&eval, pa, qa, pb, qb, src.settings.fp_tol)?;
        // slope from refined local samples inside the bracket's branch
        let hstep = src.settings.slope_step.max(1e-7) * 10.0;
        let (left, right) = if closed {
            (psi - hstep, psi + hstep)
        } else {
            ((psi - hstep).max(pts[0].0), (psi + hstep).min(pts[pts.len() - 1].0))
        };
        let (ql, qr) = (eval(left)?, eval(right)?);
        let slope = slope_between(&ql, &qr);
        if out.iter().any(|f: &MapFixedPoint| (f.psi - psi.rem_euclid(1.0)).abs() < 1e-9) {
            continue;
        }
        out.push(make_fp(&q, slope, b, end_distance(q.phi_n)));
    }
    Ok(out)
}

/// `end_distance` reported on a closed branch.
pub const CLOSED_END_DISTANCE: f64 = 1.0;

fn local_slope_from_samples(pts: &[(f64, MapPoint)], i: usize) -> f64 {
    let a = if i > 0 { i - 1 } else { i };
    let c = if i + 1 < pts.len() { i + 1 } else { i };
    if a == c {
        return f64::NAN;
    }
    slope_between(&pts[a].1, &pts[c].1)
}

fn make_fp(q: &MapPoint, slope: f64, branch: usize, end_distance: f64) -> MapFixedPoint {
    MapFixedPoint {
        phi: q.phi_n,
        psi: q.psi,
        stability: if slope.abs() < 1.0 { FixedPointStability::Stable } else { FixedPointStability::Unstable },
        slope,
        branch,
        days: q.days,
        end_distance,
        degenerate: !slope.is_finite() || (slope - 1.0).abs() < 1e-6,
    }
}

fn solve_fixed_point<F: Fn(f64) -> Result<MapPoint>>(
    eval: &F,
    mut a: f64,
    mut qa: MapPoint,
    mut b: f64,
    mut qb: MapPoint,
    tol: f64,
) -> Result<(f64, MapPoint)> {
    let (mut fa, mut fb) = (fp_residual(&qa), fp_residual(&qb));
    if fa == 0.0 {
        return Ok((a, qa));
    }
    if fb == 0.0 {
        return Ok((b, qb));
    }
    let mut side = 0i8;
    for _ in 0..100 {
        let c = ((a * fb - b * fa) / (fb - fa)).clamp(a.min(b), a.max(b));
        let c = if c <= a.min(b) || c >= a.max(b) { 0.5 * (a + b) } else { c };
        let qc = eval(c)?;
        let fc = fp_residual(&qc);
        if fc.abs() < tol || (b - a).abs() < 1e-13 {
            return Ok((c, qc));
        }
        if fc * fb < 0.0 {
            a = b;
            fa = fb;
            qa = qb;
            b = c;
            fb = fc;
            qb = qc;
            side = 0;
        } else {
            b = c;
            fb = fc;
            qb = qc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
        let _ = &qa;
    }
    Ok((b, qb))
}

/// Fixed points belonging to the rotation number `q/p` (reduced), in a map of
/// order `m.order`.
pub fn tongue_fixed_points(fps: &[MapFixedPoint], order: usize, p: u64, q: u64) -> Vec<MapFixedPoint> {
    fps.iter().filter(|f| f.days as u64 * p == q * order as u64).copied().collect()
}

fn counts(fps: &[MapFixedPoint]) -> (i64, i64) {
    let s = fps.iter().filter(|f| f.stability == FixedPointStability::Stable).count() as i64;
    (s, fps.len() as i64 - s)
}

/// Build a map at `k` reusing another map's source.
pub fn rebuild_at(m: &SampledCircleMap, k: f64) -> Result<SampledCircleMap> {
    let src = m.source.as_ref().ok_or_else(|| Error::Unresolvable("map has no source for re-evaluation".into()))?;
    let grid = PhaseGrid::uniform(src.settings.base);
    build_map_with(m.order, &grid, &src.params.with_k(k), &src.fold, &src.settings)
}

/// Transitions of the `q/p` fixed-point set along a descending-`k` sequence
/// of maps, each localised by bisection to `resolution` in `k`.
pub fn classify_transition(seq: &[(f64, SampledCircleMap)], rho: (u64, u64)) -> Result<Vec<BifurcationRecord>> {
    classify_transition_with(seq, rho, 1e-3)
}

pub fn classify_transition_with(
    seq: &[(f64, SampledCircleMap)],
    rho: (u64, u64),
    resolution: f64,
) -> Result<Vec<BifurcationRecord>> {
    if seq.windows(2).any(|w| w[1].0 >= w[0].0) {
        return Err(Error::InvalidParameter("map sequence must have decreasing k".into()));
    }
    let (q, p) = rho;
    let fps = |m: &SampledCircleMap| -> Result<Vec<MapFixedPoint>> {
        Ok(tongue_fixed_points(&find_fixed_points(m)?, m.order, p, q))
    };
    let mut out = Vec::new();
    let mut cache: Vec<(f64, SampledCircleMap, Vec<MapFixedPoint>)> = Vec::new();
    for (k, m) in seq {
        let f = fps(m)?;
        cache.push((*k, m.clone(), f));
    }
    for w in cache.windows(2) {
        resolve(&w[0], &w[1], resolution, &fps, &mut out)?;
    }
    Ok(out)
}

type Cached = (f64, SampledCircleMap, Vec<MapFixedPoint>);

/// Ambiguous brackets are split down to `resolution / SPLIT_DEPTH`.
const SPLIT_DEPTH: f64 = 64.0;

/// Branch-end distance above which a border collision is re-examined.
const BORDER_TOL: f64 = 1e-3;

fn resolve<F: Fn(&SampledCircleMap) -> Result<Vec<MapFixedPoint>>>(
    a: &Cached,
    b: &Cached,
    resolution: f64,
    fps: &F,
    out: &mut Vec<BifurcationRecord>,
) -> Result<()> {
    let (ca, cb) = (counts(&a.2), counts(&b.2));
    if ca == cb && crossings(a, b).is_empty() {
        return Ok(());
    }
    let width = a.0 - b.0;
    if width <= resolution * (1.0 + 1e-9) {
        let recs = classify_change(a, b)?;
        // mixed changes in one bracket may be separate events, and a border
        // collision far from any border may hide a saddle-node; look closer
        let far = recs.iter().any(|r| matches!(r.evidence, Evidence::BranchEndpoint { distance } if distance > BORDER_TOL));
        if (recs.len() == 1 && !far) || width <= resolution / SPLIT_DEPTH {
            out.extend(recs);
            return Ok(());
        }
    }
    let km = 0.5 * (a.0 + b.0);
    let mm = rebuild_at(&a.1, km)?;
    let fm = fps(&mm)?;
    let mid = (km, mm, fm);
    resolve(a, &mid, resolution, fps, out)?;
    resolve(&mid, b, resolution, fps, out)
}

/// Cyclic order of the fixed points of one stability among the
/// discontinuities, rotated to its smallest form.
fn border_word(m: &SampledCircleMap, fps: &[MapFixedPoint], st: FixedPointStability) -> Vec<bool> {
    let mut tokens: Vec<(f64, bool)> = fps.iter().filter(|f| f.stability == st).map(|f| (f.phi, true)).collect();
    tokens.extend(m.discontinuities.iter().map(|d| (d.phi_left, false)));
    tokens.sort_by(|x, y| x.0.total_cmp(&y.0));
    let w: Vec<bool> = tokens.into_iter().map(|t| t.1).collect();
    (0..w.len().max(1))
        .map(|r| w[r.min(w.len())..].iter().chain(&w[..r.min(w.len())]).copied().collect::<Vec<bool>>())
        .min()
        .unwrap_or_default()
}

/// Stabilities whose fixed points changed side of a discontinuity between
/// two maps with equal counts and equal discontinuity counts.
fn crossings(a: &Cached, b: &Cached) -> Vec<FixedPointStability> {
    if counts(&a.2) != counts(&b.2) || a.1.discontinuities.len() != b.1.discontinuities.len() {
        return Vec::new();
    }
    [FixedPointStability::Stable, FixedPointStability::Unstable]
        .into_iter()
        .filter(|&st| border_word(&a.1, &a.2, st) != border_word(&b.1, &b.2, st))
        .collect()
}

fn classify_change(a: &Cached, b: &Cached) -> Result<Vec<BifurcationRecord>> {
    let (sa, ua) = counts(&a.2);
    let (sb, ub) = counts(&b.2);
    let (ds, du) = (sb - sa, ub - ua);
    let alpha = a.1.source.as_ref().map_or(f64::NAN, |s| s.params.alpha_scn);
    let k = 0.5 * (a.0 + b.0);
    let bracket = (b.0, a.0);
    let mut recs = Vec::new();
    let stable = |v: &[MapFixedPoint]| v.iter().filter(|f| f.stability == FixedPointStability::Stable).copied().collect::<Vec<_>>();
    let unstable = |v: &[MapFixedPoint]| v.iter().filter(|f| f.stability == FixedPointStability::Unstable).copied().collect::<Vec<_>>();
    // fixed points on the side where they exist
    let witness_side = |created: bool| if created { &b.2 } else { &a.2 };
    let sn_slope = |v: &[MapFixedPoint]| {
        v.iter().map(|f| f.slope).min_by(|x, y| (x - 1.0).abs().total_cmp(&(y - 1.0).abs())).unwrap_or(f64::NAN)
    };
    let end_dist = |v: Vec<MapFixedPoint>| v.iter().map(|f| f.end_distance).fold(f64::INFINITY, f64::min);

    // pairs created/destroyed together are saddle-nodes; the rest are border collisions
    let pairs = if ds.signum() == du.signum() { ds.abs().min(du.abs()) } else { 0 };
    if pairs > 0 {
        let created = ds > 0;
        recs.push(BifurcationRecord {
            kind: BifurcationKind::Sn,
            k,
            alpha_scn: alpha,
            bracket,
            evidence: Evidence::SlopeToOne { slope: sn_slope(witness_side(created)) },
            created,
            simultaneous: false,
        });
    }
    let rest_s = ds - ds.signum() * pairs;
    let rest_u = du - du.signum() * pairs;
    if rest_s != 0 {
        let created = rest_s > 0;
        recs.push(BifurcationRecord {
            kind: BifurcationKind::BcS,
            k,
            alpha_scn: alpha,
            bracket,
            evidence: Evidence::BranchEndpoint { distance: end_dist(stable(witness_side(created))) },
            created,
            simultaneous: false,
        });
    }
    if rest_u != 0 {
        let created = rest_u > 0;
        recs.push(BifurcationRecord {
            kind: BifurcationKind::BcU,
            k,
            alpha_scn: alpha,
            bracket,
            evidence: Evidence::BranchEndpoint { distance: end_dist(unstable(witness_side(created))) },
            created,
            simultaneous: false,
        });
    }
    if recs.is_empty() {
        // same counts, but a fixed point moved across a discontinuity
        for st in crossings(a, b) {
            let (kind, pick): (_, &dyn Fn(&[MapFixedPoint]) -> Vec<MapFixedPoint>) = match st {
                FixedPointStability::Stable => (BifurcationKind::BcS, &stable),
                FixedPointStability::Unstable => (BifurcationKind::BcU, &unstable),
            };
            for created in [false, true] {
                recs.push(BifurcationRecord {
                    kind,
                    k,
                    alpha_scn: alpha,
                    bracket,
                    evidence: Evidence::BranchEndpoint { distance: end_dist(pick(witness_side(created))) },
                    created,
                    simultaneous: false,
                });
            }
        }
    }
    if recs.is_empty() {
        return Err(Error::Unresolvable(format!("count change ({ds}, {du}) between k = {} and {}", b.0, a.0)));
    }
    let n = recs.len();
    for r in &mut recs {
        r.simultaneous = n > 1;
    }
    // a BC creation ordering inside one bracket is not resolvable; keep SN first for destruction
    Ok(recs)
}

/// Closest approach of wake segments of `orbit` to the upper fold curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TangencyRecord {
    /// Normalised `(h_fold(c) - h)` at the closest approach before a drop.
    pub distance: f64,
    /// Angle (rad) between orbit and fold tangents in normalised (c, h).
    pub angle: f64,
    pub t: f64,
    pub c: f64,
    pub h: f64,
}

/// Minimal signed distance of wake-segment states to the upper fold curve,
/// excluding the final approach that ends in a sleep transition.
pub fn tangency_witness(orbit: &Trajectory, fold: &FoldCurve, p: &ParameterSet) -> Option<TangencyRecord> {
    let span = p.h_max - p.h_min;
    let fold_h = |c: f64| fold.interpolate(c).map(|(h, f)| refine_fold(c, f, h, p).map(|r| r.1).unwrap_or(h));
    let mut best: Option<TangencyRecord> = None;
    let mut seg: Vec<(f64, f64, f64, f64)> = Vec::new();
    let flush = |seg: &mut Vec<(f64, f64, f64, f64)>, best: &mut Option<TangencyRecord>| {
        // (t, c, h, s) with s = (h_fold - h)/span; drop the tail after the last positive minimum
        let n = seg.len();
        for i in 1..n.saturating_sub(1) {
            let (s0, s1, s2) = (seg[i - 1].3, seg[i].3, seg[i + 1].3);
            if s1 <= s0 && s1 <= s2 && s1 > 0.0 && s2 > s1 {
                let (t, c, h, s) = seg[i];
                let dc = (seg[i + 1].1 - seg[i - 1].1) / 2.0;
                let dh = (seg[i + 1].2 - seg[i - 1].2) / span;
                let hf_l = fold_h((c - 1e-4).max(-1.0)).unwrap_or(h);
                let hf_r = fold_h((c + 1e-4).min(1.0)).unwrap_or(h);
                let fold_slope = (hf_r - hf_l) / span / ((c + 1e-4).min(1.0) - (c - 1e-4).max(-1.0));
                let orbit_angle = dh.atan2(dc / 2.0);
                let fold_angle = (fold_slope * 2.0).atan();
                let mut angle = (orbit_angle - fold_angle).abs() % std::f64::consts::PI;
                angle = angle.min(std::f64::consts::PI - angle);
                if best.is_none_or(|b| s < b.distance) {
                    *best = Some(TangencyRecord { distance: s, angle, t, c, h });
                }
            }
        }
        seg.clear();
    };
    for smp in &orbit.samples {
        if smp.regime.wake {
            let x = smp.state;
            if let Some(hf) = fold_h(x.c) {
                seg.push((smp.t, x.c, x.h, (hf - x.h) / span));
            }
        } else if !seg.is_empty() {
            flush(&mut seg, &mut best);
        }
    }
    flush(&mut seg, &mut best);
    best
}
