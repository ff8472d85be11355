mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{ConfigError, RunConfig};

/// `LO,HI` or `LO,HI,STEP`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeArg {
    pub lo: f64,
    pub hi: f64,
    pub step: Option<f64>,
}

fn parse_range(s: &str) -> Result<RangeArg, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [lo, hi] => Ok(RangeArg { lo, hi, step: None }),
        [lo, hi, step] => Ok(RangeArg { lo, hi, step: Some(step) }),
        _ => Err("expected LO,HI or LO,HI,STEP".into()),
    }
}

#[derive(Debug, Parser)]
#[command(name = "swff", version, about = "Sleep-wake flip-flop simulation and bifurcation analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration; unknown keys are rejected.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads. SWFF_JOBS takes precedence.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true)]
    k: Option<f64>,
    #[arg(long = "alpha-scn", global = true)]
    alpha_scn: Option<f64>,
    #[arg(long = "k-range", global = true, value_parser = parse_range)]
    k_range: Option<RangeArg>,
    #[arg(long = "alpha-range", global = true, value_parser = parse_range)]
    alpha_range: Option<RangeArg>,
    /// Return-map order p.
    #[arg(long, global = true)]
    order: Option<usize>,
    #[arg(long, global = true)]
    days: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Trajectory and event log of the smooth model.
    Simulate,
    /// Fast equilibria over a (c, h) grid and both saddle-node curves.
    Zsurface,
    /// Sleep-onset return map of order p with discontinuities and fixed points.
    Map,
    /// Rotation number over a descending k grid.
    Staircase,
    /// Tongue boundaries and sequences over an alpha_SCN grid.
    Atlas,
    /// Hard-switch model trajectory and staircase.
    Chs,
}

impl Cli {
    fn effective_config(&self) -> Result<RunConfig, ConfigError> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(k) = self.k {
            c.params.k = k;
        }
        if let Some(a) = self.alpha_scn {
            c.params.alpha_scn = a;
        }
        if let Some(r) = self.k_range {
            c.k_range = (r.lo, r.hi);
            c.atlas.k_range = (r.lo, r.hi);
            c.k_step = r.step.unwrap_or(c.k_step);
        }
        if let Some(r) = self.alpha_range {
            c.alpha_range = (r.lo, r.hi);
            c.alpha_step = r.step.unwrap_or(c.alpha_step);
        }
        if let Some(p) = self.order {
            c.order = p;
        }
        if let Some(d) = self.days {
            c.days = d;
        }
        let env = std::env::var("SWFF_JOBS").ok();
        match env.as_deref().map(str::parse::<usize>) {
            Some(Ok(n)) => c.jobs = Some(n),
            Some(Err(e)) => return Err(ConfigError(format!("SWFF_JOBS: {e}"))),
            None => c.jobs = self.jobs.or(c.jobs),
        }
        c.validate()?;
        Ok(c)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let cfg = match cli.effective_config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(n) = cfg.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool: {e}");
        }
    }
    match commands::run(cli.command, &cfg, &cli.out) {
        Ok(files) => {
            for f in files {
                println!("{}", cli.out.join(f).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
