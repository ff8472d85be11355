//! Fast subsystem at frozen slow variables: equilibria, their stability, and
//! the fold (saddle-node) curves of the Z-shaped surface.
//!
//! With `h` and `c` frozen, `f_SCN = SCN_inf(c)` decouples and the remaining
//! equilibrium conditions collapse onto the scalar fixed-point problem
//! `f_W = G(f_W)` with
//! `G(f_W) = W_inf(g_scnw*s - g_sw*S_inf(-g_ws*f_W - g_scns*s, h))`, `s = SCN_inf(c)`.
//! A fold is a root where additionally `G'(f_W) = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::dopri5_step;
use crate::model::{
    scn_inf, steady_state_s, steady_state_s_slope, steady_state_w, steady_state_w_slope, ModelState, DIM,
};
use crate::params::ParameterSet;

/// Uniform f_W grid used to bracket roots of the composed map.
pub const ROOT_GRID: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Saddle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Upper,
    Middle,
    Lower,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::Upper => "upper",
            Branch::Middle => "middle",
            Branch::Lower => "lower",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FastEquilibrium {
    pub f_w: f64,
    pub f_s: f64,
    pub f_scn: f64,
    pub stability: Stability,
    pub branch: Branch,
}

/// Which fold of the Z-curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldSide {
    /// Knee of the wake (upper) branch; crossing it starts sleep.
    Upper,
    /// Knee of the sleep (lower) branch; crossing it starts wake.
    Lower,
}

impl FoldSide {
    pub fn as_str(&self) -> &'static str {
        match self {
            FoldSide::Upper => "upper",
            FoldSide::Lower => "lower",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldSample {
    pub c: f64,
    pub h_fold: f64,
    pub f_w_fold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldCurve {
    pub side: FoldSide,
    /// Sorted by increasing `c` over [-1, 1].
    pub samples: Vec<FoldSample>,
}

impl FoldCurve {
    /// Linear interpolation of `(h_fold, f_W_fold)` at `c`.
    pub fn interpolate(&self, c: f64) -> Option<(f64, f64)> {
        let s = &self.samples;
        if s.is_empty() || c < s[0].c - 1e-9 || c > s[s.len() - 1].c + 1e-9 {
            return None;
        }
        let i = s.partition_point(|q| q.c < c);
        if i == 0 {
            return Some((s[0].h_fold, s[0].f_w_fold));
        }
        if i >= s.len() {
            let l = s[s.len() - 1];
            return Some((l.h_fold, l.f_w_fold));
        }
        let (a, b) = (s[i - 1], s[i]);
        let w = if b.c > a.c { (c - a.c) / (b.c - a.c) } else { 0.0 };
        Some((a.h_fold + w * (b.h_fold - a.h_fold), a.f_w_fold + w * (b.f_w_fold - a.f_w_fold)))
    }

    /// Largest |dh_fold/dc| between neighbouring samples.
    pub fn max_slope(&self) -> f64 {
        self.samples
            .windows(2)
            .filter(|w| w[1].c > w[0].c)
            .map(|w| ((w[1].h_fold - w[0].h_fold) / (w[1].c - w[0].c)).abs())
            .fold(0.0, f64::max)
    }
}

/// Frozen-slow evaluation context for one `(h, c)` pair.
#[derive(Debug, Clone, Copy)]
pub(crate) struct FastContext<'a> {
    pub p: &'a ParameterSet,
    pub h: f64,
    pub s: f64,
}

impl<'a> FastContext<'a> {
    pub fn new(h: f64, c: f64, p: &'a ParameterSet) -> Self {
        Self { p, h, s: scn_inf(c, p) }
    }

    /// Sleep-population equilibrium for a given wake rate.
    pub fn f_s(&self, f_w: f64) -> f64 {
        let p = self.p;
        steady_state_s(-p.g_ws * f_w - p.g_scns * self.s, self.h, p)
    }

    /// `G(f_W)` and `G'(f_W)`.
    pub fn composed(&self, f_w: f64) -> (f64, f64) {
        let p = self.p;
        let v = -p.g_ws * f_w - p.g_scns * self.s;
        let fs = steady_state_s(v, self.h, p);
        let u = p.g_scnw * self.s - p.g_sw * fs;
        let g = steady_state_w(u, p);
        let dg = steady_state_w_slope(u, p) * p.g_sw * p.g_ws * steady_state_s_slope(v, self.h, p);
        (g, dg)
    }

    pub fn residual(&self, f_w: f64) -> f64 {
        self.composed(f_w).0 - f_w
    }

    /// Jacobian of the (f_W, f_S) block at an arbitrary point.
    pub fn block_jacobian(&self, f_w: f64, f_s: f64) -> [[f64; 2]; 2] {
        let p = self.p;
        let u = p.g_scnw * self.s - p.g_sw * f_s;
        let v = -p.g_ws * f_w - p.g_scns * self.s;
        let wp = steady_state_w_slope(u, p);
        let sp = steady_state_s_slope(v, self.h, p);
        [[-1.0 / p.tau_w, -p.g_sw * wp / p.tau_w], [-p.g_ws * sp / p.tau_s, -1.0 / p.tau_s]]
    }
}

fn bisect_root<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if m <= lo || m >= hi {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == flo.signum() {
            lo = m;
            flo = fm;
        } else {
            hi = m;
        }
    }
    0.5 * (lo + hi)
}

/// Roots of `G(f_W) - f_W` on `[0, W_max]`, bracketed on a uniform grid of
/// `grid` cells.
pub(crate) fn scalar_roots(ctx: &FastContext, grid: usize) -> Vec<f64> {
    let w_max = ctx.p.w_max;
    let mut roots = Vec::new();
    let mut prev_x = 0.0;
    let mut prev_r = ctx.residual(0.0);
    for i in 1..=grid {
        let x = w_max * i as f64 / grid as f64;
        let r = ctx.residual(x);
        if r == 0.0 {
            roots.push(x);
        } else if prev_r != 0.0 && r.signum() != prev_r.signum() {
            roots.push(bisect_root(|f| ctx.residual(f), prev_x, x));
        }
        prev_x = x;
        prev_r = r;
    }
    roots
}

fn eig_2x2(j: &[[f64; 2]; 2]) -> Result<(f64, f64)> {
    let tr = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let disc = tr * tr / 4.0 - det;
    if disc < 0.0 {
        return Err(Error::Eigen(format!("complex eigenvalues (discriminant {disc:e})")));
    }
    let r = disc.sqrt();
    Ok((tr / 2.0 - r, tr / 2.0 + r))
}

/// Equilibria of the fast subsystem at frozen `(h, c)`, sorted by `f_W`.
pub fn fast_equilibria(h: f64, c: f64, p: &ParameterSet) -> Vec<FastEquilibrium> {
    fast_equilibria_with_grid(h, c, p, ROOT_GRID)
}

pub fn fast_equilibria_with_grid(h: f64, c: f64, p: &ParameterSet, grid: usize) -> Vec<FastEquilibrium> {
    let ctx = FastContext::new(h, c, p);
    let roots = scalar_roots(&ctx, grid);
    let n = roots.len();
    roots
        .iter()
        .enumerate()
        .map(|(i, &f_w)| {
            let f_s = ctx.f_s(f_w);
            let (_, dg) = ctx.composed(f_w);
            // the SCN eigenvalue -1/tau_SCN is always negative; the 2x2
            // block decides, and its determinant has the sign of 1 - G'
            let block_stable = eig_2x2(&ctx.block_jacobian(f_w, f_s)).map(|(_, hi)| hi < 0.0).unwrap_or(false);
            let stability = if dg < 1.0 && block_stable { Stability::Stable } else { Stability::Saddle };
            let branch = match n {
                3 => [Branch::Lower, Branch::Middle, Branch::Upper][i],
                _ if stability == Stability::Saddle => Branch::Middle,
                _ if f_w > p.theta_w => Branch::Upper,
                _ => Branch::Lower,
            };
            FastEquilibrium { f_w, f_s, f_scn: ctx.s, stability, branch }
        })
        .collect()
}

/// Explicit parametrisation of the equilibrium curve: the `h` at which `f_W`
/// is an equilibrium for the given `c`. `None` where the required `f_S`
/// leaves `(0, S_max)`.
pub fn equilibrium_h(f_w: f64, c: f64, p: &ParameterSet) -> Option<f64> {
    if !(f_w > 0.0 && f_w < p.w_max) {
        return None;
    }
    let s = scn_inf(c, p);
    let w_arg = p.beta_w + p.alpha_w * (2.0 * f_w / p.w_max - 1.0).atanh();
    let f_s = (p.g_scnw * s - w_arg) / p.g_sw;
    if !(f_s > 0.0 && f_s < p.s_max) {
        return None;
    }
    let v = -p.g_ws * f_w - p.g_scns * s;
    let beta_s = v - p.alpha_s * (2.0 * f_s / p.s_max - 1.0).atanh();
    Some((beta_s - p.k1) / p.k2)
}

fn root_count(h: f64, s: f64, p: &ParameterSet, grid: usize) -> usize {
    scalar_roots(&FastContext { p, h, s }, grid).len()
}

/// Fold locations from root-count bisection alone (no Newton polish).
/// Returns `(h_upper, h_lower)` and the `f_W` guesses for each.
pub fn fold_points_bisection(c: f64, p: &ParameterSet, grid: usize, h_tol: f64) -> Result<((f64, f64), (f64, f64))> {
    fold_bisection_scn(scn_inf(c, p), c, p, grid, h_tol)
}

/// Fold bisection for a frozen SCN rate `s`; `c` only labels errors.
fn fold_bisection_scn(s: f64, c: f64, p: &ParameterSet, grid: usize, h_tol: f64) -> Result<((f64, f64), (f64, f64))> {
    let (lo, hi) = (p.h_min, p.h_max);
    let scan = 256;
    let hs: Vec<f64> = (0..=scan).map(|i| lo + (hi - lo) * i as f64 / scan as f64).collect();
    let counts: Vec<usize> = hs.iter().map(|&h| root_count(h, s, p, grid)).collect();
    let up = counts.windows(2).position(|w| w[0] >= 3 && w[1] < 3);
    let down = counts.windows(2).position(|w| w[0] < 3 && w[1] >= 3);
    let (Some(iu), Some(il)) = (up, down) else {
        return Err(Error::NoFold { c, reason: format!("root count never changes 1<->3 on [{lo}, {hi}]") });
    };
    let refine = |mut a: f64, mut b: f64, inside_at_a: bool| {
        while b - a > h_tol {
            let m = 0.5 * (a + b);
            let inside = root_count(m, s, p, grid) >= 3;
            if inside == inside_at_a {
                a = m;
            } else {
                b = m;
            }
        }
        let inside_h = if inside_at_a { a } else { b };
        (0.5 * (a + b), inside_h)
    };
    let (h_up, h_up_in) = refine(hs[iu], hs[iu + 1], true);
    let (h_lo, h_lo_in) = refine(hs[il], hs[il + 1], false);
    // f_W guesses: midpoints of the root pair about to merge
    let guess = |h_in: f64, upper: bool| {
        let r = scalar_roots(&FastContext { p, h: h_in, s }, grid);
        if r.len() >= 3 {
            if upper {
                0.5 * (r[r.len() - 2] + r[r.len() - 1])
            } else {
                0.5 * (r[0] + r[1])
            }
        } else if upper {
            p.w_max * 0.85
        } else {
            p.w_max * 0.05
        }
    };
    Ok(((h_up, guess(h_up_in, true)), (h_lo, guess(h_lo_in, false))))
}

/// Damped Newton on `(G - f_W, G' - 1) = 0` in the unknowns `(f_W, h)`.
pub(crate) fn refine_fold(c: f64, f_w0: f64, h0: f64, p: &ParameterSet) -> Result<(f64, f64)> {
    refine_fold_scn(scn_inf(c, p), c, f_w0, h0, p)
}

fn refine_fold_scn(s: f64, c: f64, f_w0: f64, h0: f64, p: &ParameterSet) -> Result<(f64, f64)> {
    let eval = |f: f64, h: f64| {
        let (g, dg) = FastContext { p, h, s }.composed(f);
        [g - f, dg - 1.0]
    };
    let (mut f, mut h) = (f_w0, h0);
    let mut r = eval(f, h);
    for _ in 0..100 {
        let norm = r[0].abs().max(r[1].abs());
        if norm < 1e-13 {
            return Ok((f, h));
        }
        let (df, dh) = (1e-7, 1e-5 * (1.0 + h.abs()));
        let rf1 = eval(f + df, h);
        let rf0 = eval(f - df, h);
        let rh1 = eval(f, h + dh);
        let rh0 = eval(f, h - dh);
        let j = [
            [(rf1[0] - rf0[0]) / (2.0 * df), (rh1[0] - rh0[0]) / (2.0 * dh)],
            [(rf1[1] - rf0[1]) / (2.0 * df), (rh1[1] - rh0[1]) / (2.0 * dh)],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            return Err(Error::NoFold { c, reason: "singular Newton system".into() });
        }
        let sf = (r[0] * j[1][1] - r[1] * j[0][1]) / det;
        let sh = (j[0][0] * r[1] - j[1][0] * r[0]) / det;
        let mut lambda = 1.0;
        loop {
            let (nf, nh) = (f - lambda * sf, h - lambda * sh);
            let nr = eval(nf, nh);
            if nf > 0.0 && nf < p.w_max && nr[0].abs().max(nr[1].abs()) < norm {
                f = nf;
                h = nh;
                r = nr;
                break;
            }
            lambda *= 0.5;
            if lambda < 1e-8 {
                if norm < 1e-10 {
                    return Ok((f, h));
                }
                return Err(Error::NoFold { c, reason: format!("Newton stalled at residual {norm:e}") });
            }
        }
    }
    if r[0].abs().max(r[1].abs()) < 1e-10 {
        Ok((f, h))
    } else {
        Err(Error::NoFold { c, reason: "Newton did not converge".into() })
    }
}

/// `h` locations of the upper and lower folds at `c`, as `(h_upper, h_lower)`.
pub fn fold_points(c: f64, p: &ParameterSet) -> Result<(f64, f64)> {
    let (u, l) = fold_full(c, p)?;
    Ok((u.h_fold, l.h_fold))
}

/// Both folds at `c` with their `f_W` values.
pub fn fold_full(c: f64, p: &ParameterSet) -> Result<(FoldSample, FoldSample)> {
    let ((hu, fu), (hl, fl)) = fold_points_bisection(c, p, ROOT_GRID, 1e-6)?;
    let (fu, hu) = refine_fold(c, fu, hu, p)?;
    let (fl, hl) = refine_fold(c, fl, hl, p)?;
    Ok((FoldSample { c, h_fold: hu, f_w_fold: fu }, FoldSample { c, h_fold: hl, f_w_fold: fl }))
}

/// Both folds for a frozen SCN rate; the samples carry `c` as a label.
pub(crate) fn fold_full_scn(s: f64, c: f64, p: &ParameterSet) -> Result<(FoldSample, FoldSample)> {
    let ((hu, fu), (hl, fl)) = fold_bisection_scn(s, c, p, ROOT_GRID, 1e-6)?;
    let (fu, hu) = refine_fold_scn(s, c, fu, hu, p)?;
    let (fl, hl) = refine_fold_scn(s, c, fl, hl, p)?;
    Ok((FoldSample { c, h_fold: hu, f_w_fold: fu }, FoldSample { c, h_fold: hl, f_w_fold: fl }))
}

/// One fold at `c`, polished from a nearby guess when one is available.
pub fn fold_at(side: FoldSide, c: f64, guess: Option<(f64, f64)>, p: &ParameterSet) -> Result<FoldSample> {
    if let Some((h0, f0)) = guess {
        if let Ok((f, h)) = refine_fold(c, f0, h0, p) {
            let upper = f > 0.5 * (p.w_max * 0.5 + p.theta_w * 0.5);
            if upper == (side == FoldSide::Upper) {
                return Ok(FoldSample { c, h_fold: h, f_w_fold: f });
            }
        }
    }
    let (u, l) = fold_full(c, p)?;
    Ok(match side {
        FoldSide::Upper => u,
        FoldSide::Lower => l,
    })
}

/// Fold curve sampled on `n` uniform `c` values in [-1, 1], with midpoints
/// inserted wherever neighbouring `h_fold` differ by more than 1% of
/// `h_max - h_min`.
pub fn sn_curve(side: FoldSide, n: usize, p: &ParameterSet) -> Result<FoldCurve> {
    if n < 16 {
        return Err(Error::InvalidParameter(format!("fold curve needs at least 16 samples, got {n}")));
    }
    let mut samples: Vec<FoldSample> = Vec::with_capacity(n);
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..n {
        let c = -1.0 + 2.0 * i as f64 / (n - 1) as f64;
        let s = fold_at(side, c, prev, p)?;
        prev = Some((s.h_fold, s.f_w_fold));
        samples.push(s);
    }
    let limit = 0.01 * (p.h_max - p.h_min);
    for _ in 0..12 {
        let mut out = Vec::with_capacity(samples.len() * 2);
        let mut inserted = false;
        for w in samples.windows(2) {
            out.push(w[0]);
            if (w[1].h_fold - w[0].h_fold).abs() > limit && w[1].c - w[0].c > 1e-9 {
                let c = 0.5 * (w[0].c + w[1].c);
                let guess = (0.5 * (w[0].h_fold + w[1].h_fold), 0.5 * (w[0].f_w_fold + w[1].f_w_fold));
                out.push(fold_at(side, c, Some(guess), p)?);
                inserted = true;
            }
        }
        out.push(*samples.last().unwrap());
        samples = out;
        if !inserted {
            break;
        }
    }
    Ok(FoldCurve { side, samples })
}

/// Eigen-pair of the fast Jacobian with eigenvalue closest to zero.
/// The eigenvector is scaled so its `f_W` component is -1 (pointing toward Γ).
pub fn slow_eigenpair(f_w: f64, h: f64, c: f64, p: &ParameterSet) -> Result<(f64, [f64; 3])> {
    let ctx = FastContext::new(h, c, p);
    let f_s = ctx.f_s(f_w);
    let j = ctx.block_jacobian(f_w, f_s);
    let (l1, l2) = eig_2x2(&j)?;
    let scn = -1.0 / p.tau_scn;
    let lambda = [l1, l2, scn].into_iter().min_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap();
    if lambda == scn {
        return Ok((lambda, [0.0, 0.0, 1.0]));
    }
    // (j00 - λ) v0 + j01 v1 = 0 with v0 = -1
    if j[0][1] == 0.0 {
        return Err(Error::Eigen("degenerate Jacobian coupling".into()));
    }
    let v1 = (j[0][0] - lambda) / j[0][1];
    Ok((lambda, [-1.0, v1, 0.0]))
}

/// Upper-fold equilibrium at `c`, displaced by `offset` (in f_W units) along
/// the slow eigenvector toward decreasing `f_W`. `theta = acos(c)`; callers
/// that know the circadian phase overwrite it.
pub fn unstable_manifold_ic(c: f64, offset: f64, p: &ParameterSet) -> Result<ModelState> {
    let fold = fold_at(FoldSide::Upper, c, None, p)?;
    manifold_ic_from_fold(&fold, offset, p)
}

pub(crate) fn manifold_ic_from_fold(fold: &FoldSample, offset: f64, p: &ParameterSet) -> Result<ModelState> {
    let c = fold.c;
    let (_, v) = slow_eigenpair(fold.f_w_fold, fold.h_fold, c, p)?;
    let ctx = FastContext::new(fold.h_fold, c, p);
    let f_s = ctx.f_s(fold.f_w_fold);
    Ok(ModelState {
        f_w: fold.f_w_fold + offset * v[0],
        f_s: f_s + offset * v[1],
        f_scn: ctx.s + offset * v[2],
        h: fold.h_fold,
        c,
        theta: c.clamp(-1.0, 1.0).acos(),
    })
}

/// Follow the fast flow with `h`, `c`, `theta` frozen from `x` until `f_W`
/// drops to `target_fw`. Used to carry a point displaced off the fold down
/// the unstable manifold toward Γ.
pub fn trace_fast_flow(x: &ModelState, target_fw: f64, p: &ParameterSet) -> Result<ModelState> {
    let ctx = FastContext::new(x.h, x.c, p);
    let f = |y: &[f64; DIM], d: &mut [f64; DIM]| {
        let u = p.g_scnw * y[2] - p.g_sw * y[1];
        let v = -p.g_ws * y[0] - p.g_scns * y[2];
        d[0] = (steady_state_w(u, p) - y[0]) / p.tau_w;
        d[1] = (steady_state_s(v, x.h, p) - y[1]) / p.tau_s;
        d[2] = (ctx.s - y[2]) / p.tau_scn;
        d[3] = 0.0;
        d[4] = 0.0;
        d[5] = 0.0;
    };
    let mut y = x.to_array();
    if y[0] <= target_fw {
        return Ok(*x);
    }
    let mut k1 = [0.0; DIM];
    f(&y, &mut k1);
    let mut h = 1e-3;
    let mut t = 0.0;
    for _ in 0..2_000_000 {
        let s = dopri5_step(&f, t, &y, &k1, h);
        let mut en = 0.0f64;
        for ((yi, y1), e) in y.iter().zip(&s.y1).zip(&s.err) {
            let sc = 1e-12 + 1e-10 * yi.abs().max(y1.abs());
            en = en.max((e / sc).abs());
        }
        if en > 1.0 {
            h *= (0.9 * en.powf(-0.2)).max(0.2);
            continue;
        }
        if s.y1[0] <= target_fw {
            let lo_t = crate::integrator::event_time((t, t + h), |tt| s.dense(tt)[0] - target_fw, 1e-13)?;
            let mut out = s.dense(lo_t);
            out[3] = x.h;
            out[4] = x.c;
            out[5] = x.theta;
            return Ok(ModelState::from_array(&out));
        }
        t += h;
        y = s.y1;
        k1 = s.k7;
        h = (h * (0.9 * en.max(1e-10).powf(-0.2)).clamp(0.2, 5.0)).min(10.0);
    }
    Err(Error::Unresolvable(format!("fast flow from f_W = {} never reached {target_fw}", x.f_w)))
}

/// Z-surface points on a rectangular `(c, h)` grid, one row per equilibrium.
pub fn z_surface(c_grid: &[f64], h_grid: &[f64], p: &ParameterSet) -> Vec<(f64, f64, FastEquilibrium)> {
    let mut out = Vec::new();
    for &c in c_grid {
        for &h in h_grid {
            for e in fast_equilibria(h, c, p) {
                out.push((c, h, e));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> ParameterSet {
        ParameterSet::default()
    }

    #[test]
    fn three_equilibria_in_the_wedge() {
        let p = p();
        let eq = fast_equilibria(150.0, 0.0, &p);
        assert_eq!(eq.len(), 3);
        assert_eq!(eq[0].stability, Stability::Stable);
        assert_eq!(eq[1].stability, Stability::Saddle);
        assert_eq!(eq[2].stability, Stability::Stable);
        assert_eq!(eq[0].branch, Branch::Lower);
        assert_eq!(eq[2].branch, Branch::Upper);
        for e in &eq {
            let r = FastContext::new(150.0, 0.0, &p).residual(e.f_w);
            assert!(r.abs() < 1e-10);
            assert!((e.f_scn - scn_inf(0.0, &p)).abs() < 1e-12);
        }
    }

    #[test]
    fn single_sleep_equilibrium_above_upper_fold() {
        let p = p();
        let eq = fast_equilibria(300.0, 0.0, &p);
        assert_eq!(eq.len(), 1);
        assert_eq!(eq[0].branch, Branch::Lower);
        assert_eq!(eq[0].stability, Stability::Stable);
        // dense-grid oracle agrees on the count
        let ctx = FastContext::new(300.0, 0.0, &p);
        assert_eq!(scalar_roots(&ctx, 200_000).len(), 1);
    }

    #[test]
    fn fold_condition_holds_after_refinement() {
        let p = p();
        let (u, l) = fold_full(0.0, &p).unwrap();
        for f in [u, l] {
            let (g, dg) = FastContext::new(f.h_fold, 0.0, &p).composed(f.f_w_fold);
            assert!((g - f.f_w_fold).abs() < 1e-10);
            assert!((dg - 1.0).abs() < 1e-8);
        }
        assert!(l.h_fold < u.h_fold);
        assert!(u.f_w_fold > p.theta_w && l.f_w_fold < p.theta_w);
    }

    #[test]
    fn fold_matches_extrema_of_explicit_curve() {
        // oracle: extrema of h(f_W) along the explicit parametrisation
        let p = p();
        for c in [-1.0, 0.0, 1.0] {
            let (hu, hl) = fold_points(c, &p).unwrap();
            let n = 400_000;
            let hs: Vec<f64> = (1..n)
                .filter_map(|i| equilibrium_h(p.w_max * i as f64 / n as f64, c, &p))
                .collect();
            let mut maxs = vec![];
            let mut mins = vec![];
            for w in hs.windows(3) {
                if w[1] > w[0] && w[1] >= w[2] {
                    maxs.push(w[1]);
                }
                if w[1] < w[0] && w[1] <= w[2] {
                    mins.push(w[1]);
                }
            }
            assert_eq!(maxs.len(), 1);
            assert_eq!(mins.len(), 1);
            assert!((maxs[0] - hu).abs() < 1e-6, "c={c}: {} vs {hu}", maxs[0]);
            assert!((mins[0] - hl).abs() < 1e-6, "c={c}: {} vs {hl}", mins[0]);
        }
    }

    #[test]
    fn folds_move_with_circadian_drive() {
        let p = p();
        let f: Vec<(f64, f64)> = [-1.0, 0.0, 1.0].iter().map(|&c| fold_points(c, &p).unwrap()).collect();
        assert!(f[0].0 < f[1].0 && f[1].0 < f[2].0);
        assert!(f[0].1 < f[1].1 && f[1].1 < f[2].1);
    }

    #[test]
    fn manifold_ic_zero_offset_is_the_fold() {
        let p = p();
        let x = unstable_manifold_ic(0.3, 0.0, &p).unwrap();
        let (u, _) = fold_full(0.3, &p).unwrap();
        assert!((x.f_w - u.f_w_fold).abs() < 1e-9);
        assert!((x.h - u.h_fold).abs() < 1e-7);
        let y = unstable_manifold_ic(0.3, 1e-3, &p).unwrap();
        assert!((x.f_w - y.f_w - 1e-3).abs() < 1e-12);
    }

    #[test]
    fn slow_eigenvector_residual() {
        let p = p();
        let (u, _) = fold_full(-0.4, &p).unwrap();
        let (lambda, v) = slow_eigenpair(u.f_w_fold, u.h_fold, -0.4, &p).unwrap();
        let ctx = FastContext::new(u.h_fold, -0.4, &p);
        let j = ctx.block_jacobian(u.f_w_fold, ctx.f_s(u.f_w_fold));
        let r0 = j[0][0] * v[0] + j[0][1] * v[1] - lambda * v[0];
        let r1 = j[1][0] * v[0] + j[1][1] * v[1] - lambda * v[1];
        assert!(r0.abs() < 1e-10 && r1.abs() < 1e-10);
        assert!(lambda.abs() < 1e-5, "fold eigenvalue {lambda}");
    }

    #[test]
    fn curve_steeper_for_small_alpha() {
        let a = sn_curve(FoldSide::Upper, 33, &p().with_alpha_scn(0.3)).unwrap();
        let b = sn_curve(FoldSide::Upper, 33, &p().with_alpha_scn(1.5)).unwrap();
        assert!(a.max_slope() > b.max_slope());
        assert!(a.samples.windows(2).all(|w| w[1].c > w[0].c));
    }

    #[test]
    fn sn_curve_rejects_tiny_n() {
        assert!(sn_curve(FoldSide::Upper, 8, &p()).is_err());
    }
}
