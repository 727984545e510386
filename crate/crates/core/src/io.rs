//! CSV and JSON artifacts.
//!
//! Trajectory files have the header `t,u_1..u_d,theta_1..theta_m`; fiber files
//! `theta_1..theta_m,u_1..u_d` with one row per cloud point.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::bronshtein::{AttractionProfile, ComparabilityTable};
use crate::error::{Error, Result};
use crate::order::FiberCloud;
use crate::recurrence::EpsRow;
use crate::stability::StabilityReport;
use crate::trajectory::Trajectory;

fn numbered(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}_{i}"))
}

fn fmt(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "inf".to_string(), fmt)
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

pub fn trajectory_header(dim: usize, base_dim: usize) -> Vec<String> {
    std::iter::once("t".to_string()).chain(numbered("u", dim)).chain(numbered("theta", base_dim)).collect()
}

pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(trajectory_header(traj.dim(), traj.base_dim()))?;
    for i in 0..traj.len() {
        let row = std::iter::once(traj.time(i))
            .chain(traj.state(i).iter().copied())
            .chain(traj.phase(i).iter().copied())
            .map(fmt);
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trajectory file; the header decides `d` and `m`.
pub fn read_trajectory_csv(path: &Path) -> Result<Trajectory> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names.first() != Some(&"t") {
        return Err(Error::Config(format!("{}: first column must be `t`", path.display())));
    }
    let dim = names.iter().filter(|n| n.starts_with("u_")).count();
    let base_dim = names.iter().filter(|n| n.starts_with("theta_")).count();
    let expected = trajectory_header(dim, base_dim);
    if dim == 0 || names != expected.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(Error::Config(format!(
            "{}: header must be {}",
            path.display(),
            trajectory_header(dim.max(1), base_dim).join(",")
        )));
    }
    let mut traj = Trajectory::new(dim, base_dim);
    for (line, record) in r.records().enumerate() {
        let record = record?;
        let values: Vec<f64> = record
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Config(format!("{}: row {}: {e}", path.display(), line + 2)))?;
        if values.len() != 1 + dim + base_dim {
            return Err(Error::Config(format!("{}: row {} has {} columns", path.display(), line + 2, values.len())));
        }
        traj.push(values[0], &values[1..1 + dim], &values[1 + dim..])
            .map_err(|e| Error::Config(format!("{}: row {}: {e}", path.display(), line + 2)))?;
    }
    Ok(traj)
}

pub fn write_fiber_csv(path: &Path, cloud: &FiberCloud) -> Result<()> {
    let mut w = writer(path)?;
    let d = cloud.dim().unwrap_or(0);
    w.write_record(numbered("theta", cloud.base.dim()).chain(numbered("u", d)))?;
    for p in &cloud.points {
        w.write_record(cloud.base.phases().iter().chain(p).copied().map(fmt))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_eps_table_csv(path: &Path, rows: &[EpsRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "eps",
        "shift_count",
        "inclusion_length",
        "almost_period_count",
        "almost_period_inclusion_length",
        "almost_period_flag",
        "inconclusive",
    ])?;
    for r in rows {
        w.write_record([
            fmt(r.eps),
            r.shift_count.to_string(),
            opt(r.inclusion_length),
            r.almost_period_count.to_string(),
            opt(r.almost_period_inclusion_length),
            r.almost_period_flag.to_string(),
            r.inconclusive.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_comparability_csv(path: &Path, table: &ComparabilityTable) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["eps", "delta", "witness_count", "max_state_shift_at_delta", "inclusion_length"])?;
    for r in &table.rows {
        w.write_record([
            fmt(r.eps),
            fmt(r.delta),
            r.witness_count.to_string(),
            fmt(r.max_state_shift_at_delta),
            fmt(r.inclusion_length),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_attraction_csv(path: &Path, profile: &AttractionProfile) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["t", "distance"])?;
    for (t, v) in profile.times.iter().zip(&profile.distances) {
        w.write_record([fmt(*t), fmt(*v)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_stability_csv(path: &Path, report: &StabilityReport) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["eps", "delta", "max_growth_ratio"])?;
    for r in &report.eps_delta_table {
        w.write_record([fmt(r.eps), r.delta.map_or_else(|| "none".into(), fmt), fmt(r.max_growth_ratio)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}
