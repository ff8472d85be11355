//! Two-parameter (k, alpha_SCN) atlas: tongue boundaries with their
//! bifurcation sequences, the bistability island of the 1/2 tongue, and the
//! curve separating continuous from discontinuous maps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circlemap::{
    build_map_with, classify_transition_with, find_fixed_points, tongue_fixed_points, BifurcationKind,
    BifurcationRecord, FixedPointStability, MapSettings, PhaseGrid, SampledCircleMap,
};
use crate::error::{Error, Result};
use crate::fastslow::{sn_curve, FoldCurve, FoldSide};
use crate::params::ParameterSet;
use crate::rotation::{phase_at, phase_distance, rotation_number_with, RotationOptions, Staircase};

/// Sequences observed along tongues, in decreasing `k`.
pub const KNOWN_SEQUENCES: [&str; 9] = [
    "BC-U→SN",
    "BC-S",
    "SN→BC-U→BC-S",
    "SN→SN",
    "SN→BC-U→BC-U→SN",
    "SN→BC-U→SN→SN→BC-S",
    "SN→BC-U→SN→(BC-S+SN)",
    "SN→BC-U→SN→BC-S→SN",
    "SN→BC-U→SN→BC-S→BC-U→SN",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AtlasOptions {
    /// `(k_lo, k_hi)` searched for a plateau.
    pub k_range: (f64, f64),
    /// Coarse scan step used to find the plateau.
    pub coarse_step: f64,
    /// Bisection tolerance on tongue edges.
    pub edge_tol: f64,
    /// Classification extends this far outside each edge.
    pub margin: f64,
    /// Largest spacing between classified maps inside the tongue.
    pub interior_step: f64,
    /// Classified width above `k_loss` when the tongue reaches `k_hi`.
    pub open_window: f64,
    /// Bisection resolution of `classify_transition`.
    pub resolution: f64,
    pub fold_samples: usize,
    pub map: MapSettings,
    pub rotation: RotationOptions,
}

impl Default for AtlasOptions {
    fn default() -> Self {
        Self {
            k_range: (0.1, 1.0),
            coarse_step: 0.01,
            edge_tol: 1e-3,
            margin: 0.004,
            interior_step: 0.01,
            open_window: 0.03,
            resolution: 1e-3,
            fold_samples: 65,
            map: MapSettings::default(),
            rotation: RotationOptions::sweep(),
        }
    }
}

impl AtlasOptions {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.k_range;
        let positive = [self.coarse_step, self.edge_tol, self.margin, self.interior_step, self.open_window, self.resolution];
        if !(lo > 0.0 && hi > lo) {
            return Err(Error::InvalidParameter(format!("k range ({lo}, {hi})")));
        }
        if positive.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidParameter("atlas tolerances must be positive".into()));
        }
        if self.fold_samples < 3 || self.map.base < 8 {
            return Err(Error::InvalidParameter("fold or map grid too small".into()));
        }
        Ok(())
    }
}

/// Edges and bifurcation sequence of one tongue at one `alpha_SCN`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TongueEdge {
    pub alpha_scn: f64,
    /// Largest `k` found inside the tongue.
    pub k_gain: f64,
    /// Smallest `k` found inside the tongue.
    pub k_loss: f64,
    /// The tongue reaches the top of the search range.
    pub gain_open: bool,
    pub loss_open: bool,
    pub records: Vec<BifurcationRecord>,
    pub label: String,
    pub known: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tongue {
    /// Circadian days per period.
    pub q: u64,
    /// Sleep episodes per period.
    pub p: u64,
    pub boundary: Vec<TongueEdge>,
    /// `alpha_SCN` values with no plateau in range.
    pub gaps: Vec<f64>,
}

impl Tongue {
    pub fn rho(&self) -> f64 {
        self.q as f64 / self.p as f64
    }

    pub fn sequence_labels(&self) -> Vec<(f64, String)> {
        self.boundary.iter().map(|e| (e.alpha_scn, e.label.clone())).collect()
    }

    pub fn edge_at(&self, alpha: f64) -> Option<&TongueEdge> {
        self.boundary.iter().find(|e| (e.alpha_scn - alpha).abs() < 1e-12)
    }
}

/// Label for a record list. Records sharing a bracket print as `(A+B)`;
/// consecutive records of one kind collapse to the first and, if it differs
/// in direction, the last.
pub fn sequence_label(records: &[BifurcationRecord]) -> String {
    let mut groups: Vec<(Vec<&'static str>, Vec<bool>, (f64, f64))> = Vec::new();
    for r in records {
        match groups.last_mut() {
            Some(g) if r.simultaneous && g.2 == r.bracket => {
                g.0.push(r.kind.as_str());
                g.1.push(r.created);
            }
            _ => groups.push((vec![r.kind.as_str()], vec![r.created], r.bracket)),
        }
    }
    let mut parts: Vec<(String, Vec<bool>)> = Vec::new();
    for (mut kinds, created, _) in groups {
        let mut order: Vec<usize> = (0..kinds.len()).collect();
        order.sort_by_key(|&i| kinds[i]);
        let created: Vec<bool> = order.iter().map(|&i| created[i]).collect();
        kinds.sort();
        // one kind leaving and re-entering the same bracket reads in sequence
        let texts: Vec<(String, Vec<bool>)> = if kinds.len() == 1 || kinds.iter().all(|k| *k == kinds[0]) {
            kinds.iter().zip(&created).map(|(k, c)| (k.to_string(), vec![*c])).collect()
        } else {
            vec![(format!("({})", kinds.join("+")), created)]
        };
        parts.extend(texts);
    }
    // a run of one kind reads as its first record, plus its last when that
    // goes the other way (copies of one orbit crossing at nearby k)
    let mut out: Vec<String> = Vec::new();
    let mut i = 0;
    while i < parts.len() {
        let mut j = i;
        while j + 1 < parts.len() && parts[j + 1].0 == parts[i].0 {
            j += 1;
        }
        out.push(parts[i].0.clone());
        if parts[j].1 != parts[i].1 {
            out.push(parts[j].0.clone());
        }
        i = j + 1;
    }
    out.join("→")
}

pub fn is_known_sequence(label: &str) -> bool {
    KNOWN_SEQUENCES.contains(&label)
}

fn in_tongue(k: f64, rho: (u64, u64), base: &ParameterSet, o: &AtlasOptions) -> Result<bool> {
    let r = rotation_number_with(&base.with_k(k), &o.rotation)?;
    Ok(r.exact && r.q * rho.1 == r.p * rho.0)
}

/// Bisect between `inside` and `outside` to `tol`; returns the last inside `k`.
fn bisect_edge<F: Fn(f64) -> Result<bool>>(mut inside: f64, mut outside: f64, tol: f64, pred: &F) -> Result<f64> {
    while (inside - outside).abs() > tol {
        let m = 0.5 * (inside + outside);
        if pred(m)? {
            inside = m;
        } else {
            outside = m;
        }
    }
    Ok(inside)
}

fn round9(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

/// Plateau edges of `rho` at one `alpha_SCN` by a coarse scan plus bisection.
/// Returns `None` when no cell of the scan lies in the tongue.
pub fn locate_tongue(rho: (u64, u64), base: &ParameterSet, o: &AtlasOptions) -> Result<Option<(f64, f64, bool, bool)>> {
    let (lo, hi) = o.k_range;
    let n = ((hi - lo) / o.coarse_step + 1e-9).floor() as usize;
    let ks: Vec<f64> = (0..=n).map(|i| round9(hi - o.coarse_step * i as f64)).collect();
    let member: Vec<bool> = ks.iter().map(|&k| in_tongue(k, rho, base, o)).collect::<Result<_>>()?;
    // widest run of consecutive members
    let mut best: Option<(usize, usize)> = None;
    let mut i = 0;
    while i < ks.len() {
        if member[i] {
            let start = i;
            while i + 1 < ks.len() && member[i + 1] {
                i += 1;
            }
            if best.is_none_or(|(a, b)| i - start > b - a) {
                best = Some((start, i));
            }
        }
        i += 1;
    }
    let Some((a, b)) = best else { return Ok(None) };
    let pred = |k: f64| in_tongue(k, rho, base, o);
    let gain_open = a == 0;
    let loss_open = b + 1 == ks.len();
    let k_gain = if gain_open { ks[a] } else { bisect_edge(ks[a], ks[a - 1], o.edge_tol, &pred)? };
    let k_loss = if loss_open { ks[b] } else { bisect_edge(ks[b], ks[b + 1], o.edge_tol, &pred)? };
    Ok(Some((k_gain, k_loss, gain_open, loss_open)))
}

/// Descending `k` values covering `[lo, hi]` with spacing at most `step`.
fn cover(hi: f64, lo: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).ceil().max(1.0) as usize;
    (0..=n).map(|i| round9(hi - (hi - lo) * i as f64 / n as f64)).collect()
}

fn maps_along(
    ks: &[f64],
    order: usize,
    base: &ParameterSet,
    fold: &FoldCurve,
    o: &AtlasOptions,
) -> Result<Vec<(f64, SampledCircleMap)>> {
    let grid = PhaseGrid::uniform(o.map.base);
    ks.iter().map(|&k| build_map_with(order, &grid, &base.with_k(k), fold, &o.map).map(|m| (k, m))).collect()
}

pub fn fold_for(base: &ParameterSet, o: &AtlasOptions) -> Result<FoldCurve> {
    sn_curve(FoldSide::Upper, o.fold_samples, base)
}

/// Classify the `rho` fixed-point set over `[k_lo, k_hi]` on `p`-th return maps.
pub fn classify_window(rho: (u64, u64), k_hi: f64, k_lo: f64, base: &ParameterSet, o: &AtlasOptions) -> Result<Vec<BifurcationRecord>> {
    let fold = fold_for(base, o)?;
    let seq = maps_along(&cover(k_hi, k_lo, o.interior_step), rho.1 as usize, base, &fold, o)?;
    classify_transition_with(&seq, rho, o.resolution)
}

/// Edges and classified sequence of `rho = q/p` at one `alpha_SCN`.
pub fn tongue_edge(rho: (u64, u64), base: &ParameterSet, o: &AtlasOptions) -> Result<Option<TongueEdge>> {
    let Some((k_gain, k_loss, gain_open, loss_open)) = locate_tongue(rho, base, o)? else { return Ok(None) };
    let top = if gain_open { (k_loss + o.open_window).min(k_gain) } else { k_gain + o.margin };
    let bottom = if loss_open { k_loss } else { (k_loss - o.margin).max(1e-3) };
    let records = classify_window(rho, top, bottom, base, o)?;
    let label = sequence_label(&records);
    Ok(Some(TongueEdge {
        alpha_scn: base.alpha_scn,
        k_gain,
        k_loss,
        gain_open,
        loss_open,
        known: is_known_sequence(&label),
        records,
        label,
    }))
}

/// Tongue of `rho = (q, p)` over an `alpha_SCN` grid.
pub fn tongue_boundaries(rho: (u64, u64), alpha_grid: &[f64], base: &ParameterSet, o: &AtlasOptions) -> Result<Tongue> {
    o.validate()?;
    if rho.0 == 0 || rho.1 == 0 {
        return Err(Error::InvalidParameter(format!("rotation number {}/{}", rho.0, rho.1)));
    }
    let edges: Vec<(f64, Option<TongueEdge>)> = alpha_grid
        .par_iter()
        .map(|&a| tongue_edge(rho, &base.with_alpha_scn(a), o).map(|e| (a, e)))
        .collect::<Result<_>>()?;
    let mut boundary = Vec::new();
    let mut gaps = Vec::new();
    for (a, e) in edges {
        match e {
            Some(e) => boundary.push(e),
            None => gaps.push(a),
        }
    }
    boundary.sort_by(|x, y| x.alpha_scn.total_cmp(&y.alpha_scn));
    gaps.sort_by(f64::total_cmp);
    Ok(Tongue { q: rho.0, p: rho.1, boundary, gaps })
}

/// One cell of the 1/2-tongue bistability scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IslandCell {
    pub alpha_scn: f64,
    pub k: f64,
    /// Stable 1/2 fixed points of the second-return map.
    pub stable: usize,
    /// Distinct attractors reached from the stable fixed points, as sorted
    /// onset-phase pairs.
    pub attractors: Vec<[f64; 2]>,
    pub bistable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BistabilityIsland {
    /// `(alpha_SCN, k_lo, k_hi)` runs of bistable cells.
    pub region: Vec<(f64, f64, f64)>,
    pub cells: Vec<IslandCell>,
}

const ORBIT_DAYS: f64 = 40.0;
const ORBIT_OFFSET: f64 = 2e-3;
const ATTRACTOR_TOL: f64 = 1e-3;

fn island_cell(k: f64, base: &ParameterSet, fold: &FoldCurve, o: &AtlasOptions) -> Result<IslandCell> {
    let p = base.with_k(k);
    let m = build_map_with(2, &PhaseGrid::uniform(o.map.base), &p, fold, &o.map)?;
    let fps = tongue_fixed_points(&find_fixed_points(&m)?, 2, 2, 1);
    let stable: Vec<_> = fps.iter().filter(|f| f.stability == FixedPointStability::Stable).collect();
    let src = m.source.as_ref().ok_or_else(|| Error::Unresolvable("map without source".into()))?;
    let mut attractors: Vec<[f64; 2]> = Vec::new();
    for f in &stable {
        let tr = src.orbit(f.psi - ORBIT_OFFSET, ORBIT_DAYS)?;
        let on: Vec<f64> = tr.sleep_onsets().map(|e| phase_at(e.t, &p)).collect();
        if on.len() < 4 {
            continue;
        }
        let mut pair = [on[on.len() - 2], on[on.len() - 1]];
        pair.sort_by(f64::total_cmp);
        let locked = phase_distance(on[on.len() - 3], pair[0]).min(phase_distance(on[on.len() - 3], pair[1])) < ATTRACTOR_TOL;
        let new = attractors
            .iter()
            .all(|a| phase_distance(a[0], pair[0]) > ATTRACTOR_TOL || phase_distance(a[1], pair[1]) > ATTRACTOR_TOL);
        if locked && new {
            attractors.push(pair);
        }
    }
    attractors.sort_by(|a, b| a[0].total_cmp(&b[0]));
    Ok(IslandCell { alpha_scn: base.alpha_scn, k, stable: stable.len(), bistable: stable.len() >= 4 && attractors.len() >= 2, attractors })
}

/// Scan the 1/2 tongue for coexisting stable period-2 patterns.
pub fn bistability_scan(alpha_grid: &[f64], k_grid: &[f64], base: &ParameterSet, o: &AtlasOptions) -> Result<BistabilityIsland> {
    o.validate()?;
    let mut cells = Vec::new();
    let mut region = Vec::new();
    for &a in alpha_grid {
        let b = base.with_alpha_scn(a);
        let fold = fold_for(&b, o)?;
        let mut row: Vec<IslandCell> = k_grid.par_iter().map(|&k| island_cell(k, &b, &fold, o)).collect::<Result<_>>()?;
        row.sort_by(|x, y| x.k.total_cmp(&y.k));
        let mut run: Option<(f64, f64)> = None;
        for c in &row {
            match (c.bistable, run.as_mut()) {
                (true, Some(r)) => r.1 = c.k,
                (true, None) => run = Some((c.k, c.k)),
                (false, Some(_)) => region.extend(run.take().map(|(l, h)| (a, l, h))),
                (false, None) => {}
            }
        }
        region.extend(run.map(|(l, h)| (a, l, h)));
        cells.extend(row);
    }
    cells.sort_by(|x, y| x.alpha_scn.total_cmp(&y.alpha_scn).then(x.k.total_cmp(&y.k)));
    Ok(BistabilityIsland { region, cells })
}

/// Last destruction of stable 1/2 fixed points near the tongue's loss edge.
pub fn loss_record(rho: (u64, u64), base: &ParameterSet, o: &AtlasOptions) -> Result<(f64, Vec<BifurcationRecord>)> {
    let (_, k_loss, _, loss_open) =
        locate_tongue(rho, base, o)?.ok_or_else(|| Error::Unresolvable(format!("no {}/{} plateau", rho.0, rho.1)))?;
    if loss_open {
        return Err(Error::Unresolvable("loss edge outside the k range".into()));
    }
    let recs = classify_window(rho, k_loss + o.open_window, k_loss - o.margin, base, o)?;
    Ok((k_loss, recs))
}

/// Point in `alpha_SCN` where two bifurcation regimes meet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeBoundary {
    pub alpha_scn: f64,
    pub k: f64,
    pub alpha_bracket: (f64, f64),
    /// Labels of the loss sequence at the lower and upper bracket ends.
    pub labels: (String, String),
}

fn bisect_alpha<F: Fn(f64) -> Result<(bool, f64, String)>>(
    bracket: (f64, f64),
    steps: usize,
    pred: &F,
) -> Result<RegimeBoundary> {
    let (mut lo, mut hi) = bracket;
    let (plo, mut klo, mut llo) = pred(lo)?;
    let (phi, mut khi, mut lhi) = pred(hi)?;
    if plo == phi {
        return Err(Error::NoSignChange { lo, hi });
    }
    for _ in 0..steps {
        let m = 0.5 * (lo + hi);
        let (pm, km, lm) = pred(m)?;
        if pm == plo {
            (lo, klo, llo) = (m, km, lm);
        } else {
            (hi, khi, lhi) = (m, km, lm);
        }
    }
    Ok(RegimeBoundary { alpha_scn: 0.5 * (lo + hi), k: 0.5 * (klo + khi), alpha_bracket: (lo, hi), labels: (llo, lhi) })
}

fn last_stable_loss(recs: &[BifurcationRecord]) -> Option<BifurcationKind> {
    recs.iter().rev().find(|r| !r.created && r.kind != BifurcationKind::BcU).map(|r| r.kind)
}

/// Where the 1/2 tongue's loss switches between a saddle-node and a border
/// collision of the stable points.
pub fn half_tongue_coincidence(alpha_bracket: (f64, f64), steps: usize, base: &ParameterSet, o: &AtlasOptions) -> Result<RegimeBoundary> {
    bisect_alpha(alpha_bracket, steps, &|a| {
        let (k, recs) = loss_record((1, 2), &base.with_alpha_scn(a), o)?;
        Ok((last_stable_loss(&recs) == Some(BifurcationKind::BcS), k, sequence_label(&recs)))
    })
}

/// Where the 1/1 loss changes from a border collision of the stable point to
/// an unstable border collision followed by a saddle-node.
pub fn one_tongue_switch(alpha_bracket: (f64, f64), steps: usize, base: &ParameterSet, o: &AtlasOptions) -> Result<RegimeBoundary> {
    bisect_alpha(alpha_bracket, steps, &|a| {
        let (k, recs) = loss_record((1, 1), &base.with_alpha_scn(a), o)?;
        Ok((recs.iter().any(|r| r.kind == BifurcationKind::BcU), k, sequence_label(&recs)))
    })
}

/// Right-hand slope at the main discontinuity of the first-return map just
/// inside the 1/1 loss edge.
pub fn border_slope(base: &ParameterSet, o: &AtlasOptions) -> Result<(f64, f64)> {
    let (_, k_loss, _, _) = locate_tongue((1, 1), base, o)?.ok_or_else(|| Error::Unresolvable("no 1/1 plateau".into()))?;
    let k = k_loss + 0.1 * o.edge_tol;
    let fold = fold_for(base, o)?;
    let m = build_map_with(1, &PhaseGrid::uniform(o.map.base), &base.with_k(k), &fold, &o.map)?;
    let d = m
        .discontinuities
        .iter()
        .max_by(|a, b| a.jump.total_cmp(&b.jump))
        .ok_or_else(|| Error::Unresolvable(format!("continuous map at k = {k}")))?;
    Ok((k_loss, d.right_slope.abs()))
}

/// `alpha_SCN` where the border slope at the 1/1 loss edge passes through 1.
pub fn unit_slope_alpha(alpha_bracket: (f64, f64), steps: usize, base: &ParameterSet, o: &AtlasOptions) -> Result<RegimeBoundary> {
    bisect_alpha(alpha_bracket, steps, &|a| {
        let (k, s) = border_slope(&base.with_alpha_scn(a), o)?;
        Ok((s > 1.0, k, format!("{s:.4}")))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionSample {
    pub alpha_scn: f64,
    /// Maps are continuous below this `k` and discontinuous above.
    pub k_transition: Option<f64>,
    /// Continuity changed more than once along the probe grid.
    pub flagged: bool,
}

fn continuous_at(k: f64, base: &ParameterSet, fold: &FoldCurve, o: &AtlasOptions) -> Result<bool> {
    let m = build_map_with(1, &PhaseGrid::uniform(o.map.base), &base.with_k(k), fold, &o.map)?;
    Ok(m.is_continuous())
}

/// Continuity transition per `alpha_SCN`, probed on `probes` points of the
/// k range and bisected to `edge_tol`.
pub fn transition_zone(alpha_grid: &[f64], probes: usize, base: &ParameterSet, o: &AtlasOptions) -> Result<Vec<TransitionSample>> {
    o.validate()?;
    let (lo, hi) = o.k_range;
    let ks = cover(hi, lo, (hi - lo) / probes.max(1) as f64);
    let mut out: Vec<TransitionSample> = alpha_grid
        .par_iter()
        .map(|&a| {
            let b = base.with_alpha_scn(a);
            let fold = fold_for(&b, o)?;
            let cont: Vec<bool> = ks.iter().map(|&k| continuous_at(k, &b, &fold, o)).collect::<Result<_>>()?;
            let changes: Vec<usize> = (0..cont.len() - 1).filter(|&i| cont[i] != cont[i + 1]).collect();
            let flagged = changes.len() > 1 || changes.first().is_some_and(|&i| cont[i]);
            let k_transition = match changes.first() {
                Some(&i) if !flagged => {
                    Some(bisect_edge(ks[i + 1], ks[i], o.edge_tol, &|k| continuous_at(k, &b, &fold, o))?)
                }
                _ => None,
            };
            Ok(TransitionSample { alpha_scn: a, k_transition, flagged })
        })
        .collect::<Result<_>>()?;
    out.sort_by(|x, y| x.alpha_scn.total_cmp(&y.alpha_scn));
    Ok(out)
}

/// Total k-width of plateaus with `1/2 < rho < 1`.
pub fn winnowing_measure(s: &Staircase) -> f64 {
    s.measure_between(0.5, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atlas {
    pub tongues: Vec<Tongue>,
    pub island: Option<BistabilityIsland>,
    pub transition_zone: Vec<TransitionSample>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circlemap::Evidence;

    fn rec(kind: BifurcationKind, created: bool, bracket: (f64, f64), simultaneous: bool) -> BifurcationRecord {
        BifurcationRecord {
            kind,
            k: 0.5 * (bracket.0 + bracket.1),
            alpha_scn: 0.7,
            bracket,
            evidence: Evidence::SlopeToOne { slope: 1.0 },
            created,
            simultaneous,
        }
    }

    #[test]
    fn labels_merge_repeats_and_group_shared_brackets() {
        use BifurcationKind::*;
        let r = [
            rec(Sn, true, (0.18, 0.181), false),
            rec(BcU, false, (0.163, 0.164), false),
            rec(BcU, true, (0.1627, 0.163), false),
            rec(Sn, false, (0.1625, 0.1627), false),
            rec(Sn, false, (0.162, 0.1625), false),
        ];
        assert_eq!(sequence_label(&r), "SN→BC-U→BC-U→SN");
        let r = [
            rec(Sn, true, (0.18, 0.181), false),
            rec(BcU, false, (0.172, 0.173), false),
            rec(BcU, false, (0.167, 0.168), false),
            rec(BcU, true, (0.166, 0.167), false),
            rec(BcU, false, (0.165, 0.166), false),
            rec(BcS, false, (0.155, 0.156), false),
        ];
        assert_eq!(sequence_label(&r), "SN→BC-U→BC-S");
        let r = [
            rec(Sn, true, (0.5, 0.51), false),
            rec(BcU, false, (0.45, 0.46), false),
            rec(Sn, false, (0.40, 0.41), false),
            rec(Sn, false, (0.30, 0.31), true),
            rec(BcS, false, (0.30, 0.31), true),
        ];
        assert_eq!(sequence_label(&r), "SN→BC-U→SN→(BC-S+SN)");
        assert!(is_known_sequence(&sequence_label(&r)));
        assert_eq!(sequence_label(&[]), "");
    }

    #[test]
    fn empty_alpha_grid_gives_empty_tongue() {
        let t = tongue_boundaries((1, 1), &[], &ParameterSet::default(), &AtlasOptions::default()).unwrap();
        assert!(t.boundary.is_empty() && t.gaps.is_empty());
    }

    #[test]
    fn cover_spans_both_ends() {
        let ks = cover(0.5, 0.42, 0.01);
        assert_eq!(ks.first(), Some(&0.5));
        assert_eq!(ks.last(), Some(&0.42));
        assert!(ks.windows(2).all(|w| w[0] > w[1] && w[0] - w[1] <= 0.01 + 1e-12));
    }

    #[test]
    fn bad_options_rejected() {
        let o = AtlasOptions { edge_tol: 0.0, ..AtlasOptions::default() };
        assert!(o.validate().is_err());
        let o = AtlasOptions { k_range: (0.5, 0.4), ..AtlasOptions::default() };
        assert!(o.validate().is_err());
    }
}
