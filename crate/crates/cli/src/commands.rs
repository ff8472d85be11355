use std::path::Path;

use serde::Serialize;
use swff::atlas::{bistability_scan, tongue_boundaries, transition_zone, Atlas};
use swff::chs::{chs_initial_condition, chs_integrate, chs_staircase};
use swff::circlemap::{build_map_with, find_fixed_points, PhaseGrid};
use swff::export::{self, MapSummary};
use swff::fastslow::{sn_curve, z_surface, FoldSide};
use swff::rotation::{standard_initial_condition, staircase_with, Plateau, Staircase};
use swff::{integrate, Error, SampleMode, SystemKind};

use crate::config::{grid, RunConfig};
use crate::Command;

pub const TOOL: &str = "swff";

/// Config errors exit with 2, numerical failures with 3, I/O with 1.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidParameter(_) => 2,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => 1,
        _ => 3,
    }
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Zsurface => "zsurface",
            Command::Map => "map",
            Command::Staircase => "staircase",
            Command::Atlas => "atlas",
            Command::Chs => "chs",
        }
    }

    pub fn target_figure(self) -> &'static str {
        match self {
            Command::Simulate => "time traces of the stable solution",
            Command::Zsurface => "Z-shaped fast equilibria and upper/lower saddle-node curves",
            Command::Map => "sleep-onset circle map",
            Command::Staircase => "rotation-number bifurcation diagram in k",
            Command::Atlas => "two-parameter bifurcation diagram in (k, alpha_SCN)",
            Command::Chs => "rotation-number bifurcation diagram of the hard-switch model",
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'a str,
    version: &'a str,
    subcommand: &'a str,
    target_figure: &'a str,
    config: &'a RunConfig,
    outputs: &'a [String],
}

#[derive(Serialize)]
struct PlateauReport<'a> {
    alpha_scn: f64,
    plateaus: &'a [Plateau],
    inexact: &'a [f64],
}

fn plateau_report(s: &Staircase) -> PlateauReport<'_> {
    PlateauReport { alpha_scn: s.alpha_scn, plateaus: &s.plateaus, inexact: &s.inexact }
}

pub fn run(cmd: Command, cfg: &RunConfig, out: &Path) -> Result<Vec<String>, Error> {
    std::fs::create_dir_all(out)?;
    let csv = |name: &str| export::create(&out.join(name));
    let p = &cfg.params;
    log::info!("{} into {}", cmd.name(), out.display());
    let mut files: Vec<String> = match cmd {
        Command::Simulate => {
            let (x0, r0) = standard_initial_condition(SystemKind::Swff, p);
            let opts = cfg.integrator.with_samples(SampleMode::Uniform(cfg.sample_step));
            let tr = integrate(&x0, r0, cfg.days * 24.0, p, &opts)?;
            export::write_trajectory(csv("trajectory.csv")?, &tr, SystemKind::Swff)?;
            export::write_events(csv("events.csv")?, &tr, SystemKind::Swff)?;
            vec!["trajectory.csv".into(), "events.csv".into()]
        }
        Command::Zsurface => {
            let cs = grid(-1.0, 1.0, 2.0 / (cfg.c_points - 1) as f64);
            let hs = grid(p.h_min, p.h_max, (p.h_max - p.h_min) / (cfg.h_points - 1) as f64);
            export::write_zsurface(csv("zsurface.csv")?, &z_surface(&cs, &hs, p))?;
            let folds = [sn_curve(FoldSide::Upper, cfg.fold_samples, p)?, sn_curve(FoldSide::Lower, cfg.fold_samples, p)?];
            export::write_folds(csv("folds.csv")?, &folds)?;
            vec!["zsurface.csv".into(), "folds.csv".into()]
        }
        Command::Map => {
            let fold = sn_curve(FoldSide::Upper, cfg.fold_samples, p)?;
            let m = build_map_with(cfg.order, &PhaseGrid::uniform(cfg.map.base), p, &fold, &cfg.map)?;
            export::write_map(csv("map.csv")?, &m)?;
            export::write_json(&out.join("map.json"), &MapSummary::new(&m, find_fixed_points(&m)?))?;
            vec!["map.csv".into(), "map.json".into()]
        }
        Command::Staircase => {
            let s = staircase_with(&cfg.k_grid(), p, &cfg.rotation)?;
            export::write_staircase(csv("staircase.csv")?, &s)?;
            export::write_json(&out.join("plateaus.json"), &plateau_report(&s))?;
            vec!["staircase.csv".into(), "plateaus.json".into()]
        }
        Command::Atlas => {
            let alphas = cfg.alpha_grid();
            let mut o = cfg.atlas;
            o.k_range = cfg.k_range;
            let tongues = cfg.tongues.iter().map(|&rho| tongue_boundaries(rho, &alphas, p, &o)).collect::<Result<_, _>>()?;
            let island = match &cfg.island {
                Some(is) => Some(bistability_scan(&is.alpha, &grid(is.k_range.0, is.k_range.1, is.k_step), p, &o)?),
                None => None,
            };
            let transition_zone =
                if cfg.transition_probes > 0 { transition_zone(&alphas, cfg.transition_probes, p, &o)? } else { Vec::new() };
            export::write_atlas(out, &Atlas { tongues, island, transition_zone })?
        }
        Command::Chs => {
            let (x0, r0) = chs_initial_condition(p);
            let opts = cfg.integrator.with_samples(SampleMode::Uniform(cfg.sample_step));
            let tr = chs_integrate(&x0, r0, cfg.days * 24.0, p, &opts)?;
            export::write_trajectory(csv("trajectory.csv")?, &tr, SystemKind::Chs)?;
            export::write_events(csv("events.csv")?, &tr, SystemKind::Chs)?;
            let s = chs_staircase(&cfg.k_grid(), p)?;
            export::write_staircase(csv("staircase.csv")?, &s)?;
            export::write_json(&out.join("plateaus.json"), &plateau_report(&s))?;
            vec!["trajectory.csv".into(), "events.csv".into(), "staircase.csv".into(), "plateaus.json".into()]
        }
    };
    files.push("manifest.json".into());
    let manifest = Manifest {
        tool: TOOL,
        version: env!("CARGO_PKG_VERSION"),
        subcommand: cmd.name(),
        target_figure: cmd.target_figure(),
        config: cfg,
        outputs: &files,
    };
    export::write_json(&out.join("manifest.json"), &manifest)?;
    Ok(files)
}
