use std::sync::OnceLock;

use swff::circlemap::*;
use swff::fastslow::{sn_curve, FoldCurve, FoldSide};
use swff::rotation::{phase_distance, phase_at};
use swff::ParameterSet;

fn fold_for(p: &ParameterSet) -> FoldCurve {
    sn_curve(FoldSide::Upper, 65, p).unwrap()
}

fn default_map() -> &'static SampledCircleMap {
    static M: OnceLock<SampledCircleMap> = OnceLock::new();
    M.get_or_init(|| {
        let p = ParameterSet::default();
        build_map(1, &PhaseGrid::uniform(512), &p, &fold_for(&p)).unwrap()
    })
}

fn second_return_036() -> &'static (SampledCircleMap, SampledCircleMap) {
    static M: OnceLock<(SampledCircleMap, SampledCircleMap)> = OnceLock::new();
    M.get_or_init(|| {
        let p = ParameterSet::default().with_k(0.36);
        let fold = fold_for(&p);
        let grid = PhaseGrid::uniform(512);
        (build_map(1, &grid, &p, &fold).unwrap(), build_map(2, &grid, &p, &fold).unwrap())
    })
}

#[test]
fn default_map_has_single_stable_fixed_point_near_trough() {
    let m = default_map();
    let fps = find_fixed_points(m).unwrap();
    assert_eq!(fps.len(), 1, "{fps:?}");
    assert_eq!(fps[0].stability, FixedPointStability::Stable);
    assert!((fps[0].phi - 0.824).abs() < 0.01, "{}", fps[0].phi);
    assert!(fps[0].slope.abs() < 1.0);
}

#[test]
fn default_map_discontinuity_near_half_with_infinite_left_slope() {
    let m = default_map();
    let main = m
        .discontinuities
        .iter()
        .filter(|d| (d.phi_left - 0.5).abs() < 0.05)
        .max_by(|a, b| a.jump.total_cmp(&b.jump))
        .expect("discontinuity near 0.5");
    assert_eq!(main.left_slope_class, SlopeClass::Infinite);
    assert_eq!(main.right_slope_class, SlopeClass::Finite);
    assert!(main.jump > m.threshold);

    // left of the gap the branch sweeps through the short-sleep value
    let left: Vec<&MapPoint> =
        m.points.iter().filter(|q| q.phi_n < main.phi_left && q.phi_n > main.phi_left - 0.02).collect();
    assert!(left.iter().any(|q| q.phi_np < 0.0722) && left.iter().any(|q| q.phi_np > 0.0722 && q.phi_np < 0.5));

    // right of the cluster of jumps the map resumes near 0.8033
    let last = m
        .discontinuities
        .iter()
        .filter(|d| d.phi_left >= main.phi_left && d.phi_left < main.phi_left + 0.01)
        .map(|d| d.phi_right)
        .fold(main.phi_right, f64::max);
    let right = m.points.iter().filter(|q| q.phi_n > last).min_by(|a, b| a.phi_n.total_cmp(&b.phi_n)).unwrap();
    assert!((right.phi_np - 0.8033).abs() < 0.005, "{}", right.phi_np);
}

#[test]
fn default_map_values_in_unit_interval_and_jumps_exceed_threshold() {
    let m = default_map();
    assert!(m.points.iter().all(|q| (0.0..1.0).contains(&q.phi_np) && (0.0..1.0).contains(&q.phi_n)));
    assert!(m.discontinuities.iter().all(|d| d.jump > m.threshold));
    let covered: usize = m.branches.iter().map(|b| b.len()).sum();
    assert_eq!(covered, m.points.len());
}

#[test]
fn map_is_periodic_in_grid_phase() {
    let p = ParameterSet::default();
    let src = MapSource { params: p, fold: fold_for(&p), settings: MapSettings::default() };
    for psi in [0.1, 0.3, 0.7] {
        let a = src.evaluate(1, psi).unwrap();
        let b = src.evaluate(1, psi + 1.0).unwrap();
        assert!(phase_distance(a.phi_np, b.phi_np) < 1e-9);
        assert!(phase_distance(a.phi_n, b.phi_n) < 1e-9);
    }
}

#[test]
fn large_alpha_has_small_branch_near_half() {
    let p = ParameterSet::default().with_alpha_scn(1.5);
    let m = build_map(1, &PhaseGrid::uniform(512), &p, &fold_for(&p)).unwrap();
    let near: Vec<&Discontinuity> = m.discontinuities.iter().filter(|d| (d.phi_left - 0.5).abs() < 0.05).collect();
    assert_eq!(near.len(), 2, "{near:?}");
    let width = (near[1].phi_left - near[0].phi_right).abs();
    assert!(width > 0.005 && width < 0.05, "{width}");
    let fps = find_fixed_points(&m).unwrap();
    assert_eq!(fps.len(), 1);
    assert!((fps[0].phi - 0.833).abs() < 0.005, "{}", fps[0].phi);
}

#[test]
fn second_return_map_has_two_stable_fixed_points_at_half_tongue() {
    let (_, m2) = second_return_036();
    let fps = find_fixed_points(m2).unwrap();
    let stable: Vec<_> = fps.iter().filter(|f| f.stability == FixedPointStability::Stable).collect();
    assert_eq!(stable.len(), 2, "{fps:?}");
    assert_ne!(stable[0].branch, stable[1].branch);
    assert_eq!(tongue_fixed_points(&fps, 2, 2, 1).len(), 2);
}

#[test]
fn second_return_map_doubles_the_discontinuities() {
    let (m1, m2) = second_return_036();
    assert_eq!(m1.discontinuities.len(), 1);
    assert_eq!(m2.discontinuities.len(), 2);
    assert_eq!(m2.branches.len(), 2);
}

#[test]
fn stable_fixed_point_matches_long_orbit() {
    let m = default_map();
    let src = m.source.as_ref().unwrap();
    for fp in find_fixed_points(m).unwrap().iter().filter(|f| f.stability == FixedPointStability::Stable) {
        let tr = src.orbit(fp.psi - 0.01, 30.0).unwrap();
        let last = tr.sleep_onsets().last().unwrap();
        let phase = phase_at(last.t, &src.params);
        assert!(phase_distance(phase, fp.phi) < 1e-3, "{phase} vs {}", fp.phi);
    }
}

#[test]
fn halving_the_manifold_offset_barely_moves_the_map() {
    let p = ParameterSet::default();
    let fold = fold_for(&p);
    let a = MapSource { params: p, fold: fold.clone(), settings: MapSettings::default() };
    let b = MapSource { params: p, fold, settings: MapSettings { offset: 5e-4, ..MapSettings::default() } };
    for psi in [0.2, 0.3, 0.4] {
        let (x, y) = (a.evaluate(1, psi).unwrap(), b.evaluate(1, psi).unwrap());
        assert!(x.manifold && y.manifold);
        assert!(phase_distance(x.phi_np, y.phi_np) < 1e-3);
    }
}

#[test]
fn jump_shrinks_as_k_decreases_at_large_alpha() {
    let mut last = f64::INFINITY;
    for k in [0.6, 0.4, 0.3, 0.2] {
        let p = ParameterSet::default().with_k(k).with_alpha_scn(1.5);
        let s = MapSettings { base: 256, ..MapSettings::default() };
        let m = build_map_with(1, &PhaseGrid::uniform(256), &p, &fold_for(&p), &s).unwrap();
        let j = m.largest_jump();
        assert!(j <= last, "k = {k}: {j} > {last}");
        last = j;
    }
    assert_eq!(last, 0.0);
}

#[test]
fn grid_refinement_only_inserts() {
    let m = default_map();
    assert!(m.grid.phases.len() >= 512);
    assert!(m.grid.phases.windows(2).all(|w| w[0] < w[1]));
    for i in 0..512 {
        assert!(m.grid.phases.contains(&(i as f64 / 512.0)));
    }
}

#[test]
fn identity_map_flags_every_point_degenerate() {
    let samples: Vec<(f64, f64)> = (0..64).map(|i| (i as f64 / 64.0 + 0.003, i as f64 / 64.0 + 0.003)).collect();
    let m = SampledCircleMap::from_samples(1, &samples);
    let fps = find_fixed_points(&m).unwrap();
    assert!(fps.len() >= 64);
    assert!(fps.iter().all(|f| f.degenerate));
}
