//! CSV and JSON writers for every result type.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::atlas::{Atlas, Tongue};
use crate::chs::ChsRegion;
use crate::circlemap::{BifurcationRecord, Discontinuity, HorizontalGap, MapFixedPoint, SampledCircleMap};
use crate::error::Result;
use crate::fastslow::{FastEquilibrium, FoldCurve};
use crate::integrator::{SystemKind, Trajectory};
use crate::model::{ModelState, Regime};
use crate::rotation::Staircase;

const STATE_COLUMNS: [&str; 6] = ["f_W", "f_S", "f_SCN", "h", "c", "theta"];

fn regime_label(r: Regime, system: SystemKind) -> &'static str {
    match system {
        SystemKind::Swff if r.wake => "wake",
        SystemKind::Swff => "sleep",
        SystemKind::Chs => ChsRegion::of(r).as_str(),
    }
}

fn state_fields(x: &ModelState) -> [String; 6] {
    [x.f_w, x.f_s, x.f_scn, x.h, x.c, x.theta].map(|v| v.to_string())
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Columns: t, f_W, f_S, f_SCN, h, c, theta, regime.
pub fn write_trajectory<W: Write>(w: W, tr: &Trajectory, system: SystemKind) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["t"];
    header.extend(STATE_COLUMNS);
    header.push("regime");
    out.write_record(&header)?;
    for s in &tr.samples {
        let mut row = vec![s.t.to_string()];
        row.extend(state_fields(&s.state));
        row.push(regime_label(s.regime, system).to_string());
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Columns: t, kind, state columns, regime in force after the event.
pub fn write_events<W: Write>(w: W, tr: &Trajectory, system: SystemKind) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["t", "kind"];
    header.extend(STATE_COLUMNS);
    header.push("regime");
    out.write_record(&header)?;
    for e in &tr.events {
        let mut row = vec![e.t.to_string(), e.kind.as_str().to_string()];
        row.extend(state_fields(&e.state));
        row.push(regime_label(e.regime, system).to_string());
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Columns: side, c, h_fold, f_W_fold.
pub fn write_folds<W: Write>(w: W, curves: &[FoldCurve]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["side", "c", "h_fold", "f_W_fold"])?;
    for fc in curves {
        for s in &fc.samples {
            out.write_record([fc.side.as_str().to_string(), s.c.to_string(), s.h_fold.to_string(), s.f_w_fold.to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Columns: c, h, f_W, branch, stable.
pub fn write_zsurface<W: Write>(w: W, points: &[(f64, f64, FastEquilibrium)]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["c", "h", "f_W", "branch", "stable"])?;
    for (c, h, e) in points {
        out.write_record([
            c.to_string(),
            h.to_string(),
            e.f_w.to_string(),
            e.branch.as_str().to_string(),
            (e.stability == crate::fastslow::Stability::Stable).to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Columns: order, phi_n, phi_np, branch_id, psi, manifold.
pub fn write_map<W: Write>(w: W, m: &SampledCircleMap) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["order", "phi_n", "phi_np", "branch_id", "psi", "manifold"])?;
    for (i, q) in m.points.iter().enumerate() {
        let b = m.branch_of(i).map_or(String::new(), |b| b.to_string());
        out.write_record([
            m.order.to_string(),
            q.phi_n.to_string(),
            q.phi_np.to_string(),
            b,
            q.psi.to_string(),
            q.manifold.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Discontinuity table written next to a map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSummary {
    pub order: usize,
    pub threshold: f64,
    pub gap_window: Option<(f64, f64)>,
    pub discontinuities: Vec<Discontinuity>,
    pub horizontal_gaps: Vec<HorizontalGap>,
    pub fixed_points: Vec<MapFixedPoint>,
}

impl MapSummary {
    pub fn new(m: &SampledCircleMap, fixed_points: Vec<MapFixedPoint>) -> Self {
        Self {
            order: m.order,
            threshold: m.threshold,
            gap_window: m.gap_window,
            discontinuities: m.discontinuities.clone(),
            horizontal_gaps: m.horizontal_gaps.clone(),
            fixed_points,
        }
    }
}

pub fn write_records(path: &Path, records: &[BifurcationRecord]) -> Result<()> {
    write_json(path, records)
}

/// Columns: k, rho_num, rho_den, rho, exact.
pub fn write_staircase<W: Write>(w: W, s: &Staircase) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["k", "rho_num", "rho_den", "rho", "exact"])?;
    for (k, r) in &s.cells {
        out.write_record([k.to_string(), r.q.to_string(), r.p.to_string(), r.rho.to_string(), r.exact.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// Columns: alpha_scn, k_gain, k_loss, gain_open, loss_open, sequence, known.
pub fn write_tongue<W: Write>(w: W, t: &Tongue) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["alpha_scn", "k_gain", "k_loss", "gain_open", "loss_open", "sequence", "known"])?;
    for e in &t.boundary {
        out.write_record([
            e.alpha_scn.to_string(),
            e.k_gain.to_string(),
            e.k_loss.to_string(),
            e.gain_open.to_string(),
            e.loss_open.to_string(),
            e.label.clone(),
            e.known.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Atlas JSON plus one boundary CSV per tongue, named `tongue_<q>_<p>.csv`.
pub fn write_atlas(dir: &Path, atlas: &Atlas) -> Result<Vec<String>> {
    let mut files = vec!["atlas.json".to_string()];
    write_json(&dir.join("atlas.json"), atlas)?;
    for t in &atlas.tongues {
        let name = format!("tongue_{}_{}.csv", t.q, t.p);
        write_tongue(create(&dir.join(&name))?, t)?;
        files.push(name);
    }
    Ok(files)
}
