use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn swff(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swff"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("SWFF_JOBS")
        .output()
        .expect("spawn swff")
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn simulate_defaults_give_expected_durations() {
    let dir = tempfile::tempdir().unwrap();
    let o = swff(&["simulate", "--days", "20"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let ev: Vec<(f64, String)> =
        rows(&dir.path().join("events.csv")).into_iter().map(|r| (r[0].parse().unwrap(), r[1].clone())).collect();
    let gamma: Vec<&(f64, String)> = ev.iter().filter(|e| e.0 > 240.0 && e.1.ends_with("_onset")).collect();
    let mut wake = Vec::new();
    let mut sleep = Vec::new();
    for w in gamma.windows(2) {
        let d = w[1].0 - w[0].0;
        if w[0].1 == "sleep_onset" { sleep.push(d) } else { wake.push(d) }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!((mean(&wake) - 15.33).abs() < 0.1, "wake {}", mean(&wake));
    assert!((mean(&sleep) - 8.67).abs() < 0.1, "sleep {}", mean(&sleep));
    let traj = rows(&dir.path().join("trajectory.csv"));
    assert!(traj.iter().all(|r| r.len() == 8 && (r[7] == "wake" || r[7] == "sleep")));
    let m = json(&dir.path().join("manifest.json"));
    assert_eq!(m["subcommand"], "simulate");
    assert!(m["target_figure"].as_str().unwrap().contains("time traces"));
    assert_eq!(m["config"]["days"], 20.0);
}

#[test]
fn zero_horizon_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(swff(&["simulate", "--days", "0"], dir.path()).status.code(), Some(2));
}

#[test]
fn empty_k_grid_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(swff(&["staircase", "--k-range", "0.6,0.5"], dir.path()).status.code(), Some(2));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"days": 2, "horizon_days": 2}"#).unwrap();
    let o = swff(&["simulate", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("horizon_days"));
}

#[test]
fn low_k_sleeps_twice_a_day() {
    let dir = tempfile::tempdir().unwrap();
    let o = swff(&["simulate", "--k", "0.36", "--days", "30"], dir.path());
    assert!(o.status.success());
    let onsets = rows(&dir.path().join("events.csv")).iter().filter(|r| r[1] == "sleep_onset" && r[0].parse::<f64>().unwrap() > 480.0).count();
    assert!((19..=21).contains(&onsets), "{onsets} onsets in 10 days");
}

#[test]
fn staircase_reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["staircase", "--k-range", "0.49,0.51,0.005", "--alpha-scn", "0.7"];
    assert!(swff(&args, a.path()).status.success());
    let o = Command::new(env!("CARGO_BIN_EXE_swff"))
        .args(args)
        .arg("--out")
        .arg(b.path())
        .env("SWFF_JOBS", "1")
        .output()
        .unwrap();
    assert!(o.status.success());
    let read = |d: &Path| std::fs::read(d.join("staircase.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
    let cells = rows(&a.path().join("staircase.csv"));
    assert_eq!(cells.len(), 5);
    assert_eq!(cells[0][..3], ["0.51", "1", "1"]);
    let ks: Vec<f64> = cells.iter().map(|r| r[0].parse().unwrap()).collect();
    assert!(ks.windows(2).all(|w| w[0] > w[1]));
}

#[test]
fn env_jobs_overrides_flag() {
    let dir = tempfile::tempdir().unwrap();
    let run = |env: &str| {
        Command::new(env!("CARGO_BIN_EXE_swff"))
            .args(["simulate", "--days", "1", "--jobs", "0", "--out"])
            .arg(dir.path())
            .env("SWFF_JOBS", env)
            .output()
            .unwrap()
    };
    assert_eq!(run("0").status.code(), Some(2));
    assert!(run("1").status.success());
    assert_eq!(json(&dir.path().join("manifest.json"))["config"]["jobs"], 1);
}

#[test]
fn map_shows_saddle_node_pair_right_of_discontinuity() {
    let dir = tempfile::tempdir().unwrap();
    let o = swff(&["map", "--k", "0.503"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&dir.path().join("map.json"));
    let d = &s["discontinuities"][0];
    let right = d["phi_right"].as_f64().unwrap();
    let fps = s["fixed_points"].as_array().unwrap();
    assert_eq!(fps.len(), 2);
    for f in fps {
        let phi = f["phi"].as_f64().unwrap();
        let slope = f["slope"].as_f64().unwrap();
        assert!(phi > right && phi - right < 0.02, "phi {phi} vs {right}");
        assert!((slope - 1.0).abs() < 0.1, "slope {slope}");
    }
    let kinds: Vec<&str> = fps.iter().map(|f| f["stability"].as_str().unwrap()).collect();
    assert!(kinds.contains(&"stable") && kinds.contains(&"unstable"));
    let pts = rows(&dir.path().join("map.csv"));
    assert!(pts.len() >= 512);
    assert!(pts.iter().all(|r| r[0] == "1"));
}

#[test]
fn zsurface_and_chs_outputs() {
    let dir = tempfile::tempdir().unwrap();
    assert!(swff(&["zsurface"], dir.path()).status.success());
    let folds = rows(&dir.path().join("folds.csv"));
    assert!(folds.iter().any(|r| r[0] == "upper") && folds.iter().any(|r| r[0] == "lower"));
    let z = rows(&dir.path().join("zsurface.csv"));
    assert!(z.iter().any(|r| r[4] == "false"));

    let dir = tempfile::tempdir().unwrap();
    let o = swff(&["chs", "--days", "3", "--k-range", "0.9,1.0,0.05"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let traj = rows(&dir.path().join("trajectory.csv"));
    assert!(traj.iter().all(|r| r[7].starts_with('F')));
    let ev = rows(&dir.path().join("events.csv"));
    assert!(ev.iter().any(|r| r[1].starts_with("sigma_crossing")));
    assert_eq!(rows(&dir.path().join("staircase.csv")).len(), 3);
}
