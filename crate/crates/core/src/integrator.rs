//! Event-driven integration of the piecewise-smooth flow.
//!
//! Each smooth segment is advanced with the Dormand–Prince 5(4) pair and its
//! fourth-order continuous extension. Switching-surface crossings are
//! bracketed on the dense output and refined to `event_tol`; the step is then
//! truncated at the crossing, the regime flag flipped, and the method
//! restarted from the crossing state, so no step ever straddles a regime
//! change.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::chs::chs_rhs;
use crate::error::{Error, Result};
use crate::model::{swff_rhs, ModelState, Regime, DIM, I_C, I_FW, I_THETA};
use crate::params::{ParameterSet, OMEGA};

/// Which set of smooth fields the integrator switches between.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    /// Smooth SCN response; one switching surface Γ = {f_W = θ_W}.
    Swff,
    /// Hard-switch SCN response; adds Σ = {c = β_SCN}.
    Chs,
}

#[inline]
pub(crate) fn rhs(kind: SystemKind, x: &[f64; DIM], r: Regime, p: &ParameterSet, dx: &mut [f64; DIM]) {
    match kind {
        SystemKind::Swff => swff_rhs(x, r, p, dx),
        SystemKind::Chs => chs_rhs(x, r, p, dx),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    SleepOnset,
    WakeOnset,
    CircadianMinimum,
    SigmaCrossingUp,
    SigmaCrossingDown,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::SleepOnset => "sleep_onset",
            EventKind::WakeOnset => "wake_onset",
            EventKind::CircadianMinimum => "circadian_minimum",
            EventKind::SigmaCrossingUp => "sigma_crossing_up",
            EventKind::SigmaCrossingDown => "sigma_crossing_down",
        }
    }

    pub fn is_gamma(&self) -> bool {
        matches!(self, EventKind::SleepOnset | EventKind::WakeOnset)
    }

    pub fn is_sigma(&self) -> bool {
        matches!(self, EventKind::SigmaCrossingUp | EventKind::SigmaCrossingDown)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub t: f64,
    pub kind: EventKind,
    pub state: ModelState,
    /// Regime in force after the event.
    pub regime: Regime,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub state: ModelState,
    pub regime: Regime,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub events: Vec<EventRecord>,
    /// Time and state where integration stopped.
    pub t_end: f64,
    pub final_state: Option<ModelState>,
    pub final_regime: Option<Regime>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl Trajectory {
    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &EventRecord> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    pub fn sleep_onsets(&self) -> impl Iterator<Item = &EventRecord> {
        self.events_of(EventKind::SleepOnset)
    }
}

/// What the integrator stores besides events.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    /// Events only.
    None,
    /// Every accepted step end plus every event point.
    Steps,
    /// Uniform grid of the given spacing (h), evaluated on the dense output.
    Uniform(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Width of the final bracket around each switching time (h).
    pub event_tol: f64,
    pub initial_step: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub sample_mode: SampleMode,
    /// Locate Γ crossings and switch regimes there. Disabling this freezes
    /// the initial regime (synthetic runs only).
    pub gamma_events: bool,
    /// Abort when a crossing's transversality product drops below `-sliding_eps`.
    pub sliding_eps: f64,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-11,
            event_tol: 1e-9,
            initial_step: 1e-3,
            max_step: 0.5,
            min_step: 1e-12,
            sample_mode: SampleMode::None,
            gamma_events: true,
            sliding_eps: 1e-10,
            max_steps: 50_000_000,
        }
    }
}

impl IntegratorOptions {
    pub fn with_samples(mut self, mode: SampleMode) -> Self {
        self.sample_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("rtol", self.rtol),
            ("atol", self.atol),
            ("event_tol", self.event_tol),
            ("initial_step", self.initial_step),
            ("max_step", self.max_step),
            ("min_step", self.min_step),
            ("sliding_eps", self.sliding_eps),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        if let SampleMode::Uniform(dt) = self.sample_mode {
            if !(dt > 0.0) {
                return Err(Error::InvalidParameter(format!("sample spacing must be > 0, got {dt}")));
            }
        }
        Ok(())
    }
}

/// Observer verdict after each recorded event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

// Dormand–Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Classical order of the propagated solution.
pub const METHOD_ORDER: u32 = 5;

/// One Dormand–Prince step. Returns the fifth-order solution, the embedded
/// error estimate, and the five coefficient vectors of the dense output.
pub struct Step {
    pub t0: f64,
    pub h: f64,
    pub y1: [f64; DIM],
    pub err: [f64; DIM],
    pub k7: [f64; DIM],
    cont: [[f64; DIM]; 5],
}

impl Step {
    /// Continuous extension on `[t0, t0 + h]`.
    pub fn dense(&self, t: f64) -> [f64; DIM] {
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let mut y = [0.0; DIM];
        for i in 0..DIM {
            let c = &self.cont;
            y[i] = c[0][i] + s * (c[1][i] + s1 * (c[2][i] + s * (c[3][i] + s1 * c[4][i])));
        }
        y
    }
}

/// Take a single step of size `h` for the autonomous field `f`; `k1` is the
/// slope at `(t0, y0)`.
pub fn dopri5_step<F>(f: &F, t0: f64, y0: &[f64; DIM], k1: &[f64; DIM], h: f64) -> Step
where
    F: Fn(&[f64; DIM], &mut [f64; DIM]),
{
    let mut y = [0.0; DIM];
    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) =
        ([0.0; DIM], [0.0; DIM], [0.0; DIM], [0.0; DIM], [0.0; DIM], [0.0; DIM]);
    for i in 0..DIM {
        y[i] = y0[i] + h * A21 * k1[i];
    }
    f(&y, &mut k2);
    for i in 0..DIM {
        y[i] = y0[i] + h * (A31 * k1[i] + A32 * k2[i]);
    }
    f(&y, &mut k3);
    for i in 0..DIM {
        y[i] = y0[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
    }
    f(&y, &mut k4);
    for i in 0..DIM {
        y[i] = y0[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
    }
    f(&y, &mut k5);
    for i in 0..DIM {
        y[i] = y0[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
    }
    f(&y, &mut k6);
    let mut y1 = [0.0; DIM];
    for i in 0..DIM {
        y1[i] = y0[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
    }
    f(&y1, &mut k7);
    let mut err = [0.0; DIM];
    let mut cont = [[0.0; DIM]; 5];
    for i in 0..DIM {
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let ydiff = y1[i] - y0[i];
        let bspl = h * k1[i] - ydiff;
        cont[0][i] = y0[i];
        cont[1][i] = ydiff;
        cont[2][i] = bspl;
        cont[3][i] = ydiff - h * k7[i] - bspl;
        cont[4][i] =
            h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
    }
    Step { t0, h, y1, err, k7, cont }
}

/// Refine a sign-changing bracket of `f` down to width `tol` (Illinois
/// variant of regula falsi). Returns the final `(lo, hi)` with `f(lo)` on the
/// starting side and `f(hi)` on the far side or exactly zero.
pub(crate) fn refine_bracket<F: Fn(f64) -> f64>(
    mut lo: f64,
    mut hi: f64,
    f: F,
    tol: f64,
) -> Result<(f64, f64)> {
    let mut flo = f(lo);
    let mut fhi = f(hi);
    if flo == 0.0 {
        return Ok((lo, lo));
    }
    if fhi == 0.0 {
        return Ok((hi, hi));
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::NoSignChange { lo, hi });
    }
    let mut side = 0i8;
    for _ in 0..200 {
        if (hi - lo).abs() <= tol {
            break;
        }
        let mut m = hi - fhi * (hi - lo) / (fhi - flo);
        // keep the iterate well inside the bracket so the width always shrinks
        let w = hi - lo;
        if !(m > lo + 0.01 * w && m < hi - 0.01 * w) || !m.is_finite() {
            m = 0.5 * (lo + hi);
        }
        let fm = f(m);
        if fm == 0.0 {
            return Ok((m, m));
        }
        if fm.signum() == flo.signum() {
            lo = m;
            flo = fm;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        } else {
            hi = m;
            fhi = fm;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        }
    }
    Ok((lo, hi))
}

/// Locate the root of `event_fn` inside `bracket` to within `tol` in time.
/// The bracket endpoints must straddle a sign change (or hit zero exactly).
pub fn event_time<F: Fn(f64) -> f64>(bracket: (f64, f64), event_fn: F, tol: f64) -> Result<f64> {
    let (lo, hi) = refine_bracket(bracket.0, bracket.1, &event_fn, tol)?;
    if lo == hi {
        return Ok(lo);
    }
    let (flo, fhi) = (event_fn(lo), event_fn(hi));
    // linear interpolation inside the final bracket
    let t = lo - flo * (hi - lo) / (fhi - flo);
    Ok(if t.is_finite() { t.clamp(lo.min(hi), lo.max(hi)) } else { 0.5 * (lo + hi) })
}

fn error_norm(y0: &[f64; DIM], y1: &[f64; DIM], err: &[f64; DIM], o: &IntegratorOptions) -> f64 {
    let mut acc = 0.0;
    for i in 0..DIM {
        let sc = o.atol + o.rtol * y0[i].abs().max(y1[i].abs());
        let e = err[i] / sc;
        acc += e * e;
    }
    (acc / DIM as f64).sqrt()
}

/// Transversality products across Γ and Σ at a state; each is
/// `(n·F_left)(n·F_right)` for the boundary normal `n`.
pub(crate) fn crossing_products(kind: SystemKind, x: &[f64; DIM], r: Regime, p: &ParameterSet) -> (f64, f64) {
    let mut a = [0.0; DIM];
    let mut b = [0.0; DIM];
    let flip_gamma = Regime { wake: !r.wake, ..r };
    rhs(kind, x, r, p, &mut a);
    rhs(kind, x, flip_gamma, p, &mut b);
    let gamma = a[I_FW] * b[I_FW];
    let flip_sigma = Regime { scn_high: !r.scn_high, ..r };
    rhs(kind, x, flip_sigma, p, &mut b);
    let sigma = a[I_C] * b[I_C];
    (gamma, sigma)
}

/// Lowest sample index `j` where `g` leaves `side` (true = positive side).
fn first_exit(samples: &[(f64, f64)], positive_side: bool) -> Option<usize> {
    samples.iter().position(|&(_, g)| if positive_side { g < 0.0 } else { g > 0.0 })
}

/// Integrate the smooth model from `x0` over `[0, horizon]`.
pub fn integrate(
    x0: &ModelState,
    r0: Regime,
    horizon: f64,
    p: &ParameterSet,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    integrate_system(SystemKind::Swff, x0, r0, 0.0, horizon, p, opts, &mut |_| Control::Continue)
}

/// Full entry point: any system kind, explicit start time, and an observer
/// invoked after every event that may stop the run early.
#[allow(clippy::too_many_arguments)]
pub fn integrate_system(
    kind: SystemKind,
    x0: &ModelState,
    r0: Regime,
    t0: f64,
    horizon: f64,
    p: &ParameterSet,
    opts: &IntegratorOptions,
    observer: &mut dyn FnMut(&EventRecord) -> Control,
) -> Result<Trajectory> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidParameter(format!("horizon must be > 0, got {horizon}")));
    }
    if !x0.is_finite() {
        return Err(Error::InvalidParameter("initial state is not finite".into()));
    }
    opts.validate()?;
    let mut x = x0.to_array();
    let mut regime = r0;
    if opts.gamma_events && ((x[I_FW] - p.theta_w) > 0.0 && !regime.wake || (x[I_FW] - p.theta_w) < 0.0 && regime.wake) {
        return Err(Error::Domain(format!(
            "initial regime (wake = {}) inconsistent with f_W = {}",
            regime.wake, x[I_FW]
        )));
    }
    let sigma_events = kind == SystemKind::Chs;
    if sigma_events && ((x[I_C] - p.beta_scn) > 0.0 && !regime.scn_high || (x[I_C] - p.beta_scn) < 0.0 && regime.scn_high) {
        return Err(Error::Domain(format!(
            "initial regime (scn_high = {}) inconsistent with c = {}",
            regime.scn_high, x[I_C]
        )));
    }

    let analytic_sigma = (x[I_C] - x[I_THETA].cos()).abs() <= 1e-9;

    let t_end = t0 + horizon;
    let mut t = t0;
    let mut traj = Trajectory::default();
    let push_sample = |traj: &mut Trajectory, t: f64, y: &[f64; DIM], r: Regime| {
        if traj.samples.last().is_none_or(|s| t > s.t) {
            traj.samples.push(Sample { t, state: ModelState::from_array(y), regime: r });
        }
    };
    let mut next_uniform = t0;
    if !matches!(opts.sample_mode, SampleMode::None) {
        push_sample(&mut traj, t, &x, regime);
        if let SampleMode::Uniform(dt) = opts.sample_mode {
            next_uniform = t0 + dt;
        }
    }

    let mut h = opts.initial_step.min(opts.max_step);
    let mut k1 = [0.0; DIM];
    rhs(kind, &x, regime, p, &mut k1);
    let mut steps = 0usize;
    let mut stopped = false;
    let mut last_min_theta = f64::NEG_INFINITY;

    while t < t_end && !stopped {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::StepUnderflow { t, step: h });
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        let f = |y: &[f64; DIM], d: &mut [f64; DIM]| rhs(kind, y, regime, p, d);
        let step = dopri5_step(&f, t, &x, &k1, h);
        let en = error_norm(&x, &step.y1, &step.err, opts);
        if !en.is_finite() || en > 1.0 {
            let fac = if en.is_finite() { (0.9 * en.powf(-0.2)).max(0.2) } else { 0.2 };
            h *= fac;
            traj.rejected_steps += 1;
            if h < opts.min_step {
                return Err(Error::StepUnderflow { t, step: h });
            }
            continue;
        }
        let t1 = t + h;
        traj.accepted_steps += 1;

        // Scan the accepted step for the earliest boundary crossing.
        const PROBES: usize = 4;
        let mut earliest: Option<(f64, f64, EventKind)> = None;
        let probe_ts: Vec<f64> = (0..=PROBES).map(|j| t + h * j as f64 / PROBES as f64).collect();
        let probe_ys: Vec<[f64; DIM]> = probe_ts
            .iter()
            .enumerate()
            .map(|(j, &tj)| if j == 0 { x } else if j == PROBES { step.y1 } else { step.dense(tj) })
            .collect();
        if opts.gamma_events {
            let g: Vec<(f64, f64)> = probe_ts.iter().zip(&probe_ys).map(|(&tj, y)| (tj, y[I_FW] - p.theta_w)).collect();
            if let Some(j) = first_exit(&g, regime.wake) {
                if j > 0 {
                    let kind_ev = if regime.wake { EventKind::SleepOnset } else { EventKind::WakeOnset };
                    let (lo, hi) = refine_bracket(g[j - 1].0, g[j].0, |s| step.dense(s)[I_FW] - p.theta_w, opts.event_tol)
                        .map_err(|e| Error::EventBracketing { t, reason: e.to_string() })?;
                    earliest = Some((lo, hi, kind_ev));
                }
            }
        }
        if sigma_events && analytic_sigma {
            // c = cos(theta) exactly: Σ sits at theta ≡ ±acos(beta)
            let a = p.beta_scn.clamp(-1.0, 1.0).acos();
            let (target, kind_ev) = if regime.scn_high {
                (a, EventKind::SigmaCrossingDown)
            } else {
                (2.0 * PI - a, EventKind::SigmaCrossingUp)
            };
            let th0 = x[I_THETA];
            let mut th_s = target + 2.0 * PI * ((th0 - target) / (2.0 * PI)).floor();
            while th_s <= th0 + 1e-12 {
                th_s += 2.0 * PI;
            }
            let ts = t + (th_s - th0) / OMEGA;
            if ts <= t1 {
                let take = match earliest {
                    None => true,
                    Some((glo, _, _)) => ts <= glo,
                };
                if take {
                    earliest = Some((ts, ts, kind_ev));
                }
            }
        } else if sigma_events {
            let v: Vec<(f64, f64)> = probe_ts.iter().zip(&probe_ys).map(|(&tj, y)| (tj, y[I_C] - p.beta_scn)).collect();
            if let Some(j) = first_exit(&v, regime.scn_high) {
                if j > 0 {
                    let kind_ev = if regime.scn_high { EventKind::SigmaCrossingDown } else { EventKind::SigmaCrossingUp };
                    let (lo, hi) = refine_bracket(v[j - 1].0, v[j].0, |s| step.dense(s)[I_C] - p.beta_scn, opts.event_tol)
                        .map_err(|e| Error::EventBracketing { t, reason: e.to_string() })?;
                    // Σ wins exact ties: its location is analytic in t.
                    let take = match earliest {
                        None => true,
                        Some((glo, _, _)) => lo <= glo,
                    };
                    if take {
                        earliest = Some((lo, hi, kind_ev));
                    }
                }
            }
        }

        let seg_end = earliest.map_or(t1, |(_, hi, _)| hi);

        // Circadian minima: theta ≡ π (mod 2π); theta is linear on the step.
        let th0 = x[I_THETA];
        let th_end = th0 + OMEGA * (seg_end - t);
        let mut n = ((th0 - PI) / (2.0 * PI)).ceil();
        loop {
            let th_min = PI + 2.0 * PI * n;
            if th_min > th_end {
                break;
            }
            if th_min <= last_min_theta {
                n += 1.0;
                continue;
            }
            last_min_theta = th_min;
            let tm = t + (th_min - th0) / OMEGA;
            let ym = if tm >= t1 { step.y1 } else { step.dense(tm) };
            let ev = EventRecord { t: tm, kind: EventKind::CircadianMinimum, state: ModelState::from_array(&ym), regime };
            traj.events.push(ev);
            if observer(&ev) == Control::Stop {
                stopped = true;
            }
            n += 1.0;
        }

        if let SampleMode::Uniform(dt) = opts.sample_mode {
            while next_uniform <= seg_end && next_uniform <= t_end {
                let y = if next_uniform >= t1 { step.y1 } else { step.dense(next_uniform) };
                push_sample(&mut traj, next_uniform, &y, regime);
                next_uniform += dt;
            }
        }

        match earliest {
            Some((_, hi, ev_kind)) => {
                let y = if hi >= t1 { step.y1 } else { step.dense(hi) };
                let t_ev = hi;
                let (gprod, sprod) = crossing_products(kind, &y, regime, p);
                let prod = if ev_kind.is_gamma() { gprod } else { sprod };
                if prod < -opts.sliding_eps {
                    return Err(Error::Sliding { t: t_ev, product: prod });
                }
                if ev_kind.is_gamma() {
                    regime.wake = !regime.wake;
                } else {
                    regime.scn_high = !regime.scn_high;
                }
                x = y;
                t = t_ev;
                let ev = EventRecord { t: t_ev, kind: ev_kind, state: ModelState::from_array(&x), regime };
                if matches!(opts.sample_mode, SampleMode::Steps) {
                    push_sample(&mut traj, t, &x, regime);
                }
                traj.events.push(ev);
                if observer(&ev) == Control::Stop {
                    stopped = true;
                }
                rhs(kind, &x, regime, p, &mut k1);
                // restart conservatively after a switch
                h = (h * 0.5).max(opts.initial_step).min(opts.max_step);
            }
            None => {
                x = step.y1;
                t = if last { t_end } else { t1 };
                k1 = step.k7;
                if matches!(opts.sample_mode, SampleMode::Steps) {
                    push_sample(&mut traj, t, &x, regime);
                }
                let fac = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
                h = (h * fac).min(opts.max_step);
            }
        }
        if h < opts.min_step {
            return Err(Error::StepUnderflow { t, step: h });
        }
    }
    traj.t_end = t;
    traj.final_state = Some(ModelState::from_array(&x));
    traj.final_regime = Some(regime);
    Ok(traj)
}

/// Outcome of checking every switching event for sliding.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TransversalityReport {
    pub checked: usize,
    pub min_product: f64,
    pub violations: Vec<(f64, EventKind, f64)>,
}

impl TransversalityReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Evaluate `(n·F_left)(n·F_right)` at every switching event of `tr`.
pub fn verify_transversality(tr: &Trajectory, p: &ParameterSet, kind: SystemKind, eps: f64) -> TransversalityReport {
    let mut rep = TransversalityReport { min_product: f64::INFINITY, ..Default::default() };
    for ev in tr.events.iter().filter(|e| e.kind.is_gamma() || e.kind.is_sigma()) {
        let (g, s) = crossing_products(kind, &ev.state.to_array(), ev.regime, p);
        let prod = if ev.kind.is_gamma() { g } else { s };
        rep.checked += 1;
        rep.min_product = rep.min_product.min(prod);
        if prod < -eps {
            rep.violations.push((ev.t, ev.kind, prod));
        }
    }
    rep
}

/// Sleep and wake episode durations between consecutive Γ events.
pub fn episode_durations(tr: &Trajectory, after: f64) -> (Vec<f64>, Vec<f64>) {
    let gamma: Vec<&EventRecord> = tr.events.iter().filter(|e| e.kind.is_gamma() && e.t >= after).collect();
    let (mut wake, mut sleep) = (Vec::new(), Vec::new());
    for w in gamma.windows(2) {
        let d = w[1].t - w[0].t;
        match w[0].kind {
            EventKind::SleepOnset => sleep.push(d),
            _ => wake.push(d),
        }
    }
    (wake, sleep)
}
