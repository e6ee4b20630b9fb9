//! On-disk trajectories: one CSV per frame plus a JSON manifest.
//!
//! A store directory is resumable: frames already listed in the manifest are
//! kept, and `append_*` only writes frames later than the last stored one.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};
use crate::fokker_planck::FpTrajectory;
use crate::reaction::{CoupledTrajectory, Params, RunMode};

pub const MANIFEST: &str = "manifest.json";
pub const STORE_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub t: f64,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    /// `coupled` or `fokker_planck`.
    pub kind: String,
    pub params: Option<Params>,
    pub mode: Option<RunMode>,
    pub gamma: f64,
    pub scheme: String,
    pub grid_edges: Vec<f64>,
    pub frames: Vec<FrameEntry>,
    /// Fitted constants and derived summaries, free-form.
    pub fitted: serde_json::Map<String, serde_json::Value>,
}

impl Manifest {
    pub fn last_time(&self) -> Option<f64> {
        self.frames.last().map(|f| f.t)
    }
}

pub fn read_manifest(dir: &Path) -> Result<Option<Manifest>> {
    let path = dir.join(MANIFEST);
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let m: Manifest = serde_json::from_str(&text)?;
    if m.schema_version != STORE_SCHEMA {
        return Err(Error::Config(format!(
            "{}: schema version {} is not supported",
            path.display(),
            m.schema_version
        )));
    }
    Ok(Some(m))
}

pub fn write_manifest(dir: &Path, m: &Manifest) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join(MANIFEST);
    let tmp = dir.join(format!("{MANIFEST}.tmp"));
    fs::write(&tmp, serde_json::to_string_pretty(m)?).map_err(io_err(&tmp))?;
    fs::rename(&tmp, &path).map_err(io_err(&path))
}

fn frame_name(k: usize) -> String {
    format!("frame_{k:05}.csv")
}

fn write_frame(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| format!("{v:e}")))?;
    }
    w.flush().map_err(io_err(path))
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io { path: path.to_path_buf(), source },
        other => Error::Config(format!("{}: {other:?}", path.display())),
    }
}

/// Check that an existing manifest describes the same run.
fn compatible(old: &Manifest, new: &Manifest) -> bool {
    old.kind == new.kind && old.params == new.params && old.grid_edges == new.grid_edges && old.mode == new.mode
}

fn append(dir: &Path, mut fresh: Manifest, frames: Vec<(f64, Vec<String>, Vec<Vec<f64>>)>) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut manifest = match read_manifest(dir)? {
        Some(old) if compatible(&old, &fresh) => old,
        Some(_) => {
            return Err(Error::Config(format!("{} holds a different run", dir.display())));
        }
        None => {
            fresh.frames.clear();
            fresh.clone()
        }
    };
    manifest.fitted.extend(fresh.fitted);
    let last = manifest.last_time().unwrap_or(f64::NEG_INFINITY);
    for (t, header, rows) in frames {
        // output times of runs with different horizons differ in the last ulp
        if t <= last + 1e-9 * last.abs().max(1.0) {
            continue;
        }
        let file = frame_name(manifest.frames.len());
        let hdr: Vec<&str> = header.iter().map(String::as_str).collect();
        write_frame(&dir.join(&file), &hdr, rows.into_iter())?;
        manifest.frames.push(FrameEntry { t, file });
    }
    write_manifest(dir, &manifest)?;
    Ok(manifest)
}

/// Write the frames of a coupled run (`r, rho1, rho2, cum_rho1`).
pub fn save_coupled(dir: &Path, traj: &CoupledTrajectory, fitted: serde_json::Map<String, serde_json::Value>) -> Result<Manifest> {
    let manifest = Manifest {
        schema_version: STORE_SCHEMA,
        kind: "coupled".into(),
        params: Some(traj.params),
        mode: Some(traj.mode),
        gamma: traj.params.gamma(),
        scheme: "finite-volume exponential fitting, backward Euler, exact attractant update".into(),
        grid_edges: traj.grid.edges().to_vec(),
        frames: Vec::new(),
        fitted,
    };
    let c = traj.grid.centers();
    let header: Vec<String> = ["r", "rho1", "rho2", "cum_rho1"].iter().map(|s| s.to_string()).collect();
    let frames = traj
        .frames
        .iter()
        .map(|f| {
            let rows = (0..c.len()).map(|i| vec![c[i], f.rho1[i], f.rho2[i], f.cum_rho1[i]]).collect();
            (f.t, header.clone(), rows)
        })
        .collect();
    append(dir, manifest, frames)
}

/// Write the frames of a Fokker-Planck run (`r, value`).
pub fn save_fp(dir: &Path, traj: &FpTrajectory, fitted: serde_json::Map<String, serde_json::Value>) -> Result<Manifest> {
    let manifest = Manifest {
        schema_version: STORE_SCHEMA,
        kind: "fokker_planck".into(),
        params: None,
        mode: None,
        gamma: traj.gamma,
        scheme: format!("finite-volume exponential fitting, backward Euler, {:?}", traj.direction),
        grid_edges: traj.grid.edges().to_vec(),
        frames: Vec::new(),
        fitted,
    };
    let c = traj.grid.centers();
    let header = vec!["r".to_string(), "value".to_string()];
    let frames = traj
        .frames
        .iter()
        .map(|f| (f.t, header.clone(), c.iter().zip(&f.values).map(|(r, v)| vec![*r, *v]).collect()))
        .collect();
    append(dir, manifest, frames)
}

/// Read one stored frame as columns.
pub fn load_frame(dir: &Path, entry: &FrameEntry) -> Result<Vec<Vec<f64>>> {
    let path: PathBuf = dir.join(&entry.file);
    let mut rdr = csv::Reader::from_path(&path).map_err(|e| csv_io(&path, e))?;
    let width = rdr.headers()?.len();
    let mut cols = vec![Vec::new(); width];
    for rec in rdr.records() {
        let rec = rec?;
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Config(format!("{}: bad number {field:?}", path.display())))?;
            cols[j].push(v);
        }
    }
    Ok(cols)
}
