use proptest::prelude::*;
use swff::chs::{chs_initial_condition, chs_integrate};
use swff::fastslow::{sn_curve, FoldSide};
use swff::integrator::{episode_durations, verify_transversality};
use swff::rotation::standard_initial_condition;
use swff::{integrate, EventKind, IntegratorOptions, ParameterSet, SampleMode, SystemKind, Trajectory};

fn run(p: &ParameterSet, days: f64, opts: &IntegratorOptions) -> Trajectory {
    let (x0, r0) = standard_initial_condition(SystemKind::Swff, p);
    integrate(&x0, r0, days * 24.0, p, opts).unwrap()
}

#[test]
fn default_episode_durations() {
    let tr = run(&ParameterSet::default(), 100.0, &IntegratorOptions::default());
    let (wake, sleep) = episode_durations(&tr, 50.0 * 24.0);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!((mean(&wake) - 15.33).abs() < 0.1, "wake {}", mean(&wake));
    assert!((mean(&sleep) - 8.67).abs() < 0.1, "sleep {}", mean(&sleep));
}

#[test]
fn gamma_events_alternate_and_h_is_monotone_between_them() {
    let p = ParameterSet::default().with_k(0.6).with_alpha_scn(1.1);
    let tr = run(&p, 20.0, &IntegratorOptions::default().with_samples(SampleMode::Steps));
    let gamma: Vec<_> = tr.events.iter().filter(|e| e.kind.is_gamma()).collect();
    assert!(gamma.len() > 30);
    assert!(gamma.windows(2).all(|w| w[0].kind != w[1].kind));
    assert!(tr.samples.windows(2).all(|w| w[1].t > w[0].t));
    for w in gamma.windows(2) {
        let seg: Vec<_> = tr.samples.iter().filter(|s| s.t >= w[0].t && s.t <= w[1].t).collect();
        let rising = w[0].kind == EventKind::WakeOnset;
        for q in seg.windows(2) {
            let dh = q[1].state.h - q[0].state.h;
            assert!(if rising { dh > 0.0 } else { dh < 0.0 }, "h not monotone at t = {}", q[0].t);
        }
    }
}

#[test]
fn reruns_are_bitwise_identical() {
    let p = ParameterSet::default().with_k(0.45);
    let a = run(&p, 15.0, &IntegratorOptions::default());
    let b = run(&p, 15.0, &IntegratorOptions::default());
    assert_eq!(a.events.len(), b.events.len());
    for (x, y) in a.events.iter().zip(&b.events) {
        assert_eq!(x.t.to_bits(), y.t.to_bits());
        assert_eq!(x.state.to_array().map(f64::to_bits), y.state.to_array().map(f64::to_bits));
    }
}

#[test]
fn sleep_onsets_follow_the_upper_fold() {
    let p = ParameterSet::default();
    let fold = sn_curve(FoldSide::Upper, 129, &p).unwrap();
    let tr = run(&p, 30.0, &IntegratorOptions::default().with_samples(SampleMode::Uniform(0.002)));
    let above = |s: &swff::integrator::Sample| s.state.h >= fold.interpolate(s.state.c).unwrap().0;
    let onsets: Vec<f64> = tr.sleep_onsets().filter(|e| e.t > 20.0 * 24.0).map(|e| e.t).collect();
    assert!(onsets.len() >= 9);
    for t in onsets {
        let wake: Vec<_> = tr.samples.iter().filter(|s| s.t > t - 12.0 && s.t <= t).collect();
        let first = wake.iter().position(|s| above(s)).expect("no fold crossing before onset");
        let lag = t - wake[first].t;
        assert!(lag > 0.0 && lag < 1.0, "fold reached {lag} h before onset at {t}");
        assert!(wake[first..].iter().all(|s| above(s)));
    }
}

#[test]
fn minima_fall_at_the_analytic_phase() {
    let p = ParameterSet { phi: 3.0, ..ParameterSet::default() };
    let tr = run(&p, 5.0, &IntegratorOptions::default());
    let minima: Vec<f64> = tr.events_of(EventKind::CircadianMinimum).map(|e| e.t).collect();
    assert_eq!(minima.len(), 5);
    for (n, t) in minima.iter().enumerate() {
        assert!((t - (p.phi + 12.0 + 24.0 * n as f64)).abs() < 1e-9);
    }
}

fn cell() -> impl Strategy<Value = (f64, f64)> {
    (0.3f64..1.0, 0.1f64..2.0)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 50, .. ProptestConfig::default() })]

    #[test]
    fn swff_crossings_are_transversal((k, a) in cell()) {
        let p = ParameterSet::default().with_k(k).with_alpha_scn(a);
        let tr = run(&p, 30.0, &IntegratorOptions::default());
        let rep = verify_transversality(&tr, &p, SystemKind::Swff, 1e-10);
        prop_assert!(rep.checked > 0);
        prop_assert!(rep.ok(), "{:?}", rep.violations);
    }

    #[test]
    fn chs_crossings_are_transversal((k, _a) in cell()) {
        let p = ParameterSet::default().with_k(k);
        let (x0, r0) = chs_initial_condition(&p);
        let tr = chs_integrate(&x0, r0, 30.0 * 24.0, &p, &IntegratorOptions::default()).unwrap();
        let rep = verify_transversality(&tr, &p, SystemKind::Chs, 1e-10);
        prop_assert!(tr.events.iter().any(|e| e.kind.is_sigma()));
        prop_assert!(rep.ok(), "{:?}", rep.violations);
    }
}
