//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Pass criterion numbers as arguments to run a subset.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use swff::atlas::*;
use swff::chs::{chs_initial_condition, chs_integrate, chs_staircase, onset_phases};
use swff::circlemap::*;
use swff::fastslow::{sn_curve, FoldSide};
use swff::integrator::{episode_durations, verify_transversality};
use swff::model::steady_state_scn;
use swff::rotation::*;
use swff::{integrate, IntegratorOptions, ParameterSet, Result, SystemKind};

type Outcome = Result<(bool, String)>;

fn near(x: f64, want: f64, tol: f64) -> bool {
    (x - want).abs() <= tol + 1e-12
}

fn base(alpha: f64) -> ParameterSet {
    ParameterSet::default().with_alpha_scn(alpha)
}

fn atlas_opts(k_lo: f64, k_hi: f64, coarse: f64) -> AtlasOptions {
    AtlasOptions { k_range: (k_lo, k_hi), coarse_step: coarse, ..AtlasOptions::default() }
}

fn map_at(order: usize, p: &ParameterSet) -> Result<SampledCircleMap> {
    let fold = sn_curve(FoldSide::Upper, 65, p)?;
    build_map_with(order, &PhaseGrid::uniform(512), p, &fold, &MapSettings::default())
}

fn first_of(records: &[BifurcationRecord], kind: BifurcationKind) -> Option<f64> {
    records.iter().find(|r| r.kind == kind).map(|r| r.k)
}

fn c1_default_dynamics() -> Outcome {
    let p = ParameterSet::default();
    let (x0, r0) = standard_initial_condition(SystemKind::Swff, &p);
    let tr = integrate(&x0, r0, 100.0 * 24.0, &p, &IntegratorOptions::default())?;
    let (wake, sleep) = episode_durations(&tr, 50.0 * 24.0);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (w, s) = (mean(&wake), mean(&sleep));
    let m = map_at(1, &p)?;
    let stable: Vec<f64> =
        find_fixed_points(&m)?.iter().filter(|f| f.stability == FixedPointStability::Stable).map(|f| f.phi).collect();
    let ok = near(w, 15.33, 0.1) && near(s, 8.67, 0.1) && stable.len() == 1 && near(stable[0], 0.824, 0.01);
    Ok((ok, format!("wake {w:.3} h, sleep {s:.3} h, stable fixed points {stable:.4?}")))
}

fn c2_transversality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst = f64::INFINITY;
    let mut violations = 0;
    let mut checked = 0;
    for _ in 0..50 {
        let p = ParameterSet::default().with_k(rng.gen_range(0.2..1.0)).with_alpha_scn(rng.gen_range(0.1..2.0));
        let (x0, r0) = standard_initial_condition(SystemKind::Swff, &p);
        let tr = integrate(&x0, r0, 30.0 * 24.0, &p, &IntegratorOptions::default())?;
        let rep = verify_transversality(&tr, &p, SystemKind::Swff, 1e-10);
        let (y0, s0) = chs_initial_condition(&p);
        let tc = chs_integrate(&y0, s0, 30.0 * 24.0, &p, &IntegratorOptions::default())?;
        let rc = verify_transversality(&tc, &p, SystemKind::Chs, 1e-10);
        for r in [rep, rc] {
            worst = worst.min(r.min_product);
            violations += r.violations.len();
            checked += r.checked;
        }
    }
    Ok((violations == 0, format!("{checked} crossings in 100 runs, {violations} violations, min product {worst:.3e}")))
}

fn c3_one_tongue() -> Outcome {
    let cases = [(0.7, 0.45, 0.6, 0.503, "BC-U→SN"), (1.5, 0.50, 0.65, 0.556, "BC-U→SN"), (0.3, 0.40, 0.5, 0.45, "BC-S")];
    let mut ok = true;
    let mut detail = Vec::new();
    for (a, lo, hi, want, label) in cases {
        let e = tongue_edge((1, 1), &base(a), &atlas_opts(lo, hi, 0.01))?
            .ok_or_else(|| swff::Error::Unresolvable(format!("no 1/1 plateau at alpha {a}")))?;
        let tol = if a == 0.3 { 0.01 } else { 0.005 };
        ok &= near(e.k_loss, want, tol) && e.label == label;
        detail.push(format!("alpha {a}: k_loss {:.4} {}", e.k_loss, e.label));
    }
    Ok((ok, detail.join("; ")))
}

fn c4_two_thirds() -> Outcome {
    let e = tongue_edge((2, 3), &base(0.7), &atlas_opts(0.42, 0.48, 0.005))?
        .ok_or_else(|| swff::Error::Unresolvable("no 2/3 plateau".into()))?;
    let bcu = first_of(&e.records, BifurcationKind::BcU).unwrap_or(f64::NAN);
    let ok = near(e.k_loss, 0.434, 0.005) && near(e.k_gain, 0.4663, 0.005) && e.label == "SN→BC-U→BC-S" && near(bcu, 0.466, 0.003);
    Ok((ok, format!("[{:.4}, {:.4}] {} BC-U at {bcu:.4}", e.k_loss, e.k_gain, e.label)))
}

fn c5_half() -> Outcome {
    let e = tongue_edge((1, 2), &base(0.7), &atlas_opts(0.30, 0.42, 0.01))?
        .ok_or_else(|| swff::Error::Unresolvable("no 1/2 plateau".into()))?;
    let bcu = first_of(&e.records, BifurcationKind::BcU).unwrap_or(f64::NAN);
    let ok = near(e.k_loss, 0.317, 0.005) && near(e.k_gain, 0.403, 0.005) && near(bcu, 0.401, 0.003);
    Ok((ok, format!("[{:.4}, {:.4}] {} BC-U at {bcu:.4}", e.k_loss, e.k_gain, e.label)))
}

fn c6_island() -> Outcome {
    let o = AtlasOptions::default();
    let ks: Vec<f64> = (0..=20).map(|i| 0.334 + 0.0005 * i as f64).collect();
    let isl = bistability_scan(&[0.45], &ks, &ParameterSet::default(), &o)?;
    let lo = isl.region.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let hi = isl.region.iter().map(|r| r.2).fold(f64::NEG_INFINITY, f64::max);
    let c = half_tongue_coincidence((0.40, 0.45), 3, &ParameterSet::default(), &atlas_opts(0.30, 0.36, 0.005))?;
    let ok = !isl.region.is_empty()
        && near(lo, 0.335, 0.003)
        && near(hi, 0.341, 0.003)
        && near(c.alpha_scn, 0.42, 0.01)
        && near(c.k, 0.329, 0.003);
    Ok((ok, format!("bistable k in [{lo:.4}, {hi:.4}] at alpha 0.45; SN + BC-S at (alpha {:.4}, k {:.4})", c.alpha_scn, c.k)))
}

fn c7_regime_switch() -> Outcome {
    let o = atlas_opts(0.45, 0.55, 0.01);
    let s = one_tongue_switch((0.50, 0.65), 4, &ParameterSet::default(), &o)?;
    let u = unit_slope_alpha((0.50, 0.65), 4, &ParameterSet::default(), &o)?;
    let ok = near(s.alpha_scn, 0.6, 0.02) && near(s.k, 0.486, 0.005) && near(u.alpha_scn, 0.6, 0.02);
    Ok((
        ok,
        format!(
            "sequence {} / {} at (alpha {:.4}, k {:.4}); unit border slope at alpha {:.4}",
            s.labels.0, s.labels.1, s.alpha_scn, s.k, u.alpha_scn
        ),
    ))
}

fn c8_continuity() -> Outcome {
    let o = atlas_opts(0.12, 0.22, 0.005);
    let mut ok = true;
    let mut detail = Vec::new();
    for (a, label) in [(1.0, "SN→SN"), (0.55, "SN→BC-U→BC-U→SN"), (0.3, "SN→BC-U→BC-S")] {
        let e = tongue_edge((1, 4), &base(a), &o)?.ok_or_else(|| swff::Error::Unresolvable(format!("no 1/4 plateau at {a}")))?;
        let m = map_at(4, &base(a).with_k(0.5 * (e.k_gain + e.k_loss)))?;
        let slopes: Vec<f64> = m.discontinuities.iter().map(|d| d.right_slope.abs()).collect();
        let shape = match a {
            1.0 => m.is_continuous(),
            0.55 => !slopes.is_empty() && slopes.iter().all(|&s| s > 1.0),
            _ => true,
        };
        ok &= shape && e.label == label;
        detail.push(format!("alpha {a}: {} ({} discontinuities, right slopes {slopes:.3?})", e.label, slopes.len()));
    }
    Ok((ok, detail.join("; ")))
}

fn c9_chs() -> Outcome {
    let p = ParameterSet::default();
    let top = chs_staircase(&k_grid(0.46, 0.44, 0.0005), &p)?;
    let one = top.plateau_of(1, 1).map_or(f64::NAN, |pl| pl.k_lo);
    let direct = top.cells.iter().all(|(_, r)| r.exact && (r.same_ratio(&RotationResult::exact(1, 1)) || r.same_ratio(&RotationResult::exact(2, 1))));
    let mid = chs_staircase(&k_grid(0.29, 0.27, 0.0005), &p)?;
    let half = mid.plateau_of(2, 1).map_or(f64::NAN, |pl| pl.k_lo);
    let low = chs_staircase(&k_grid(0.215, 0.200, 0.0005), &p)?;
    let third = low.plateau_of(3, 1).map_or(f64::NAN, |pl| pl.k_lo);
    let quarter = low.plateau_of(4, 1).map_or(f64::NAN, |pl| pl.k_hi);
    let between = low.cells.iter().filter(|(k, _)| *k < third && *k > quarter).count();
    let phase_at_k = |k: f64| -> Result<Vec<f64>> {
        let q = p.with_k(k);
        let (x0, r0) = chs_initial_condition(&q);
        let tr = chs_integrate(&x0, r0, 60.0 * 24.0, &q, &IntegratorOptions::default())?;
        Ok(onset_phases(&tr, &q, 40.0 * 24.0))
    };
    let locked = |ph: &[f64]| ph.iter().all(|&f| phase_distance(f, 0.75) < 0.01 || phase_distance(f, 0.25) < 0.01);
    let (ph1, ph2) = (phase_at_k(1.0)?, phase_at_k(0.449)?);
    let ok = near(one, 0.45, 0.005)
        && direct
        && near(half, 0.28, 0.005)
        && near(third, 0.208, 0.003)
        && near(quarter, 0.207, 0.003)
        && between == 0
        && locked(&ph1)
        && locked(&ph2);
    Ok((
        ok,
        format!(
            "1/1 ends at {one:.4} (direct to 1/2: {direct}); 1/2 ends at {half:.4}; 1/3 ends at {third:.4}, 1/4 starts at {quarter:.4}; onset phase {:.4} at k = 1, {:.4?} at k = 0.449",
            ph1.first().copied().unwrap_or(f64::NAN),
            {
                let mut v: Vec<f64> = ph2.iter().map(|f| (f * 1e4).round() / 1e4).collect();
                v.sort_by(f64::total_cmp);
                v.dedup();
                v
            }
        ),
    ))
}

fn c10_properties() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();

    let maps = [
        (1, ParameterSet::default()),
        (1, base(1.5)),
        (1, ParameterSet::default().with_k(0.36)),
        (2, ParameterSet::default().with_k(0.36)),
        (3, ParameterSet::default().with_k(0.45)),
    ];
    let built: Vec<SampledCircleMap> = maps.iter().map(|(o, p)| map_at(*o, p)).collect::<Result<_>>()?;
    let dip = built.iter().map(|m| m.max_branch_decrease()).fold(0.0, f64::max);
    ok &= dip <= 0.0;
    detail.push(format!("largest in-branch decrease {dip:.2e}"));

    let counts: Vec<usize> = built[2..].iter().map(|m| m.discontinuity_count()).collect();
    let count_ok = counts == [1, 2, 3];
    ok &= count_ok;
    detail.push(format!("discontinuities at k 0.36 (p = 1, 2) and k 0.45 (p = 3): {counts:?}"));

    let s = staircase_with(&k_grid(0.52, 0.40, 0.002), &base(0.7), &RotationOptions::sweep())?;
    let farey = farey_check(&s);
    let checked: Vec<&FareyPair> = farey.iter().filter(|f| f.checked).collect();
    let found = checked.iter().filter(|f| f.found).count();
    ok &= !checked.is_empty() && found == checked.len();
    detail.push(format!("Farey mediants found {found}/{}", checked.len()));

    let m = &built[0];
    let src = m.source.as_ref().expect("built map keeps its source");
    let mut worst: f64 = 0.0;
    for fp in find_fixed_points(m)?.iter().filter(|f| f.stability == FixedPointStability::Stable) {
        let tr = src.orbit(fp.psi - 0.01, 30.0)?;
        let last = tr.sleep_onsets().last().map_or(f64::NAN, |e| phase_at(e.t, &src.params));
        worst = worst.max(phase_distance(last, fp.phi));
    }
    ok &= worst < 1e-3;
    detail.push(format!("fixed point vs orbit {worst:.1e}"));

    let tops: Vec<f64> = [0.05, 0.3, 0.7, 1.5, 3.0].iter().map(|&a| steady_state_scn(1.0, &base(a))).collect::<Result<_>>()?;
    let spread = tops.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)) - tops.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    ok &= spread < 1e-12;
    detail.push(format!("SCN endpoint spread {spread:.1e}"));

    let again = map_at(1, &ParameterSet::default())?;
    let same = again.points.len() == m.points.len()
        && again.points.iter().zip(&m.points).all(|(a, b)| a.phi_np.to_bits() == b.phi_np.to_bits() && a.phi_n.to_bits() == b.phi_n.to_bits());
    ok &= same;
    detail.push(format!("bitwise rerun {same}"));
    Ok((ok, detail.join("; ")))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 10] = [
        (1, "default dynamics", c1_default_dynamics),
        (2, "transversality", c2_transversality),
        (3, "rho = 1 tongue edge", c3_one_tongue),
        (4, "rho = 2/3 tongue", c4_two_thirds),
        (5, "rho = 1/2 tongue", c5_half),
        (6, "bistability island", c6_island),
        (7, "regime switch", c7_regime_switch),
        (8, "continuity transition", c8_continuity),
        (9, "hard-switch staircase", c9_chs),
        (10, "property suites", c10_properties),
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, f) in criteria {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let t = Instant::now();
        let (pass, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!pass);
        println!("{} {id:>2} {name}: {detail} [{:.0?}]", if pass { "PASS" } else { "FAIL" }, t.elapsed());
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
