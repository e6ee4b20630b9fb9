use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use chemoscale::acceptance;
use chemoscale::fokker_planck::{dual_solve, fp_solve, stationary_state, FpOptions};
use chemoscale::grid::{integrate, GridSpec, ProfileKind, RadialProfile};
use chemoscale::harness::{
    emit_csv, emit_svg, fit_scaling, run_one, run_sweep, Axis, Response, SimulateConfig, SweepConfig, SweepRecord,
};
use chemoscale::poincare::{poincare_suite, PoincareRow};
use chemoscale::potential::AnnulusPotential;
use chemoscale::store::{save_coupled, save_fp};

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] chemoscale::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "chemoscale", version, about = "Radial chemotaxis-reaction laboratory")]
struct Cli {
    /// Run one acceptance criterion (number or name) and exit.
    #[arg(long, global = true)]
    check: Option<String>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(clap::Args, Debug, Clone)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override a config key, e.g. `--set time.dt_max=0.02` (value parsed as JSON when possible).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One coupled run (and its diffusion baseline).
    Simulate(Common),
    /// Linear Fokker-Planck run with the annulus potential.
    FokkerPlanck(Common),
    /// Weighted Poincare constants over the test battery.
    Poincare(Common),
    /// Parameter sweep with scaling fits.
    Sweep(Common),
    /// Acceptance criteria.
    Verify(Common),
}

fn io<T>(path: &Path, r: std::io::Result<T>) -> Result<T> {
    r.map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// Sets `a.b.c = value` in a JSON object, creating objects on the way.
fn set_path(root: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| CliError::Usage(format!("cannot set {key}: {part} is not inside an object")))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert_with(|| json!({}));
    }
    Ok(())
}

fn parse_override(s: &str) -> Result<(String, Value)> {
    let (k, v) = s.split_once('=').ok_or_else(|| CliError::Usage(format!("override {s:?} is not KEY=VALUE")))?;
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((k.trim().to_string(), value))
}

/// Loads the config (or `{}`), applies flag overrides, then deserialises.
fn load_config<T: for<'de> Deserialize<'de>>(common: &Common, defaults: Value) -> Result<T> {
    let mut root = match &common.config {
        Some(path) => serde_json::from_str(&io(path, fs::read_to_string(path))?)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?,
        None => defaults,
    };
    for s in &common.set {
        let (k, v) = parse_override(s)?;
        set_path(&mut root, &k, v)?;
    }
    if let Some(seed) = common.seed {
        set_path(&mut root, "seed", json!(seed))?;
    }
    if let Some(w) = common.workers {
        set_path(&mut root, "workers", json!(w))?;
    }
    serde_json::from_value(root).map_err(|e| {
        let origin = common.config.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "defaults".into());
        CliError::Usage(format!("{origin}: {e}"))
    })
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<()> {
    if let Some(dir) = path.parent() {
        io(dir, fs::create_dir_all(dir))?;
    }
    io(path, fs::write(path, serde_json::to_string_pretty(v)?))
}

fn simulate(common: &Common) -> Result<()> {
    let cfg: SimulateConfig = load_config(common, json!({}))?;
    let sweep = cfg.to_sweep();
    sweep.validate()?;
    let p = sweep.tuples()?[0];
    let out = run_one(&sweep, 0, &p);
    let mut fitted = serde_json::Map::new();
    fitted.insert("record".into(), serde_json::to_value(&out.record)?);
    if let Some(tr) = &out.coupled {
        save_coupled(&common.out.join("coupled"), tr, fitted.clone())?;
    }
    if let Some(tr) = &out.baseline {
        save_coupled(&common.out.join("baseline"), tr, fitted)?;
    }
    emit_csv(std::slice::from_ref(&out.record), &common.out.join("run.csv"))?;
    println!("{}", serde_json::to_string_pretty(&out.record)?);
    if out.record.status.starts_with("error") {
        return Err(CliError::Usage(out.record.status));
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
enum Direction {
    Forward,
    Dual,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
enum Initial {
    /// Smooth compact bump, normalised to `mass` (forward) or height 1 (dual).
    Bump { center: f64, width: f64, #[serde(default = "one")] mass: f64 },
    Stationary { #[serde(default = "one")] mass: f64 },
    /// `1` on `r <= radius`, 0 beyond.
    Plateau { radius: f64 },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FpConfig {
    schema_version: u32,
    gamma: f64,
    direction: Direction,
    initial: Initial,
    grid: GridSpec,
    t_end: f64,
    n_frames: usize,
    dt_max: f64,
}

fn fokker_planck(common: &Common) -> Result<()> {
    let cfg: FpConfig = load_config(
        common,
        json!({
            "schema_version": 1, "gamma": 32.0, "direction": "forward",
            "initial": {"kind": "bump", "center": 5.0, "width": 1.0},
            "grid": {"r_max": 30.0, "n_core": 256, "n_far": 300, "gamma": 32.0},
            "t_end": 5.0, "n_frames": 50, "dt_max": 0.01
        }),
    )?;
    if cfg.schema_version != 1 {
        return Err(CliError::Usage(format!("unsupported schema_version {}", cfg.schema_version)));
    }
    let grid = cfg.grid.build()?;
    let pot = AnnulusPotential::new(cfg.gamma)?;
    let kind = match cfg.direction {
        Direction::Forward => ProfileKind::Density,
        Direction::Dual => ProfileKind::Field,
    };
    let init = match cfg.initial {
        Initial::Bump { center, width, mass } => {
            let p = RadialProfile::cell_averages(grid.clone(), kind, |r| {
                let s = (r - center) / width;
                if s.abs() >= 1.0 {
                    0.0
                } else {
                    (-1.0 / (1.0 - s * s)).exp()
                }
            })?;
            if kind == ProfileKind::Density {
                let m = integrate(&p)?;
                p.scaled(mass / m)?
            } else {
                let s = p.sup();
                p.scaled(1.0 / s)?
            }
        }
        Initial::Stationary { mass } => {
            let s = stationary_state(mass, &pot, grid.clone())?;
            RadialProfile::new(grid.clone(), kind, s.into_values())?
        }
        Initial::Plateau { radius } => {
            RadialProfile::cell_averages(grid.clone(), kind, |r| if r <= radius { 1.0 } else { 0.0 })?
        }
    };
    let opts = FpOptions::uniform(cfg.t_end, cfg.n_frames, cfg.dt_max);
    let tr = match cfg.direction {
        Direction::Forward => fp_solve(&init, &pot, &opts)?,
        Direction::Dual => dual_solve(&init, &pot, &opts)?,
    };
    let series: Vec<Value> =
        tr.frames.iter().map(|f| json!({"t": f.t, "conserved": f.conserved, "sup": f.sup, "Z": f.z, "W": f.w})).collect();
    let mut fitted = serde_json::Map::new();
    fitted.insert("conservation_drift".into(), json!(tr.conservation_drift()));
    fitted.insert("steps".into(), json!(tr.steps));
    save_fp(&common.out, &tr, fitted)?;
    write_json(&common.out.join("series.json"), &series)?;
    println!("{} frames, {} steps, conservation drift {:.3e}", tr.frames.len(), tr.steps, tr.conservation_drift());
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoincareConfig {
    #[serde(default = "one_u32")]
    schema_version: u32,
    #[serde(default = "default_gammas")]
    gammas: Vec<f64>,
    #[serde(default = "default_trunc")]
    truncation_radius: f64,
    #[serde(default)]
    extremals: bool,
}

fn one_u32() -> u32 {
    1
}
fn default_gammas() -> Vec<f64> {
    acceptance::POINCARE_GAMMAS.to_vec()
}
fn default_trunc() -> f64 {
    3.0
}

fn poincare(common: &Common) -> Result<()> {
    let cfg: PoincareConfig = load_config(common, json!({}))?;
    if cfg.schema_version != 1 {
        return Err(CliError::Usage(format!("unsupported schema_version {}", cfg.schema_version)));
    }
    let rows = poincare_suite(&cfg.gammas, cfg.truncation_radius, cfg.extremals)?;
    let path = common.out.join("poincare.csv");
    write_rows(&path, &rows)?;
    for r in &rows {
        println!("{:<12} {:>6} {:<20} {:>12.5e}", r.weight_kind, r.gamma, r.inequality_id, r.fitted_c);
    }
    Ok(())
}

fn write_rows(path: &Path, rows: &[PoincareRow]) -> Result<()> {
    io(&common_dir(path), fs::create_dir_all(common_dir(path)))?;
    let mut text = String::from("weight_kind,gamma,inequality_id,fitted_C,extremal_ratio,battery_id\n");
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.weight_kind,
            r.gamma,
            r.inequality_id,
            r.fitted_c,
            r.extremal_ratio.map(|v| v.to_string()).unwrap_or_default(),
            r.battery_id
        ));
    }
    io(path, fs::write(path, text))
}

fn common_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."))
}

/// Fits every axis that has at least three values with the others fixed.
fn sweep_fits(records: &[SweepRecord], out: &Path) -> Result<Vec<Value>> {
    let mut fits = Vec::new();
    let mut groups: Vec<(Axis, Response, Vec<SweepRecord>, String)> = Vec::new();
    let mut gammas: Vec<f64> = records.iter().map(|r| r.gamma).collect();
    gammas.sort_by(f64::total_cmp);
    gammas.dedup();
    let mut ls: Vec<f64> = records.iter().map(|r| r.l).collect();
    ls.sort_by(f64::total_cmp);
    ls.dedup();
    for &g in &gammas {
        let sub: Vec<SweepRecord> = records.iter().filter(|r| r.gamma == g).cloned().collect();
        groups.push((Axis::L, Response::TauC, sub.clone(), format!("tauC_vs_L_gamma{g}")));
        groups.push((Axis::L, Response::TauD, sub, format!("tauD_vs_L_gamma{g}")));
    }
    for &l in &ls {
        let sub: Vec<SweepRecord> = records.iter().filter(|r| r.l == l).cloned().collect();
        groups.push((Axis::Gamma, Response::TauC, sub, format!("tauC_vs_gamma_L{l}")));
    }
    for (axis, resp, sub, name) in groups {
        // one record per axis value, all other parameters equal
        let mut xs: Vec<f64> = sub.iter().map(|r| if axis == Axis::L { r.l } else { r.gamma }).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        if xs.len() < 3 || xs.len() != sub.len() {
            continue;
        }
        match fit_scaling(&sub, resp, axis) {
            Ok(fit) => {
                emit_svg(&fit, &out.join(format!("{name}.svg")))?;
                fits.push(json!({"name": name, "slope": fit.slope, "intercept": fit.intercept, "r2": fit.r2}));
            }
            Err(e) => log::warn!("{name}: {e}"),
        }
    }
    Ok(fits)
}

fn sweep(common: &Common) -> Result<()> {
    let cfg: SweepConfig = load_config(common, json!({}))?;
    let records = run_sweep(&cfg)?;
    emit_csv(&records, &common.out.join("sweep.csv"))?;
    let fits = sweep_fits(&records, &common.out)?;
    write_json(&common.out.join("fits.json"), &fits)?;
    let failed = records.iter().filter(|r| r.status != "ok").count();
    println!("{} runs, {} with non-ok status, {} fits", records.len(), failed, fits.len());
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VerifyConfig {
    #[serde(default = "one_u32")]
    schema_version: u32,
    #[serde(default)]
    criteria: Vec<String>,
}

/// Runs the selected criteria; returns whether all passed.
fn verify(ids: &[u8], out: Option<&Path>) -> Result<bool> {
    let mut outcomes = Vec::new();
    for &id in ids {
        let o = acceptance::run(id).unwrap_or_else(|e| acceptance::Outcome {
            id,
            name: acceptance::CRITERIA[(id - 1) as usize].1.into(),
            passed: false,
            summary: format!("error: {e}"),
            details: Value::Null,
        });
        println!("{}", o.line());
        outcomes.push(o);
    }
    if let Some(dir) = out {
        write_json(&dir.join("acceptance.json"), &outcomes)?;
    }
    Ok(outcomes.iter().all(|o| o.passed))
}

fn parse_ids(list: &[String]) -> Result<Vec<u8>> {
    if list.is_empty() {
        return Ok(acceptance::CRITERIA.iter().map(|c| c.0).collect());
    }
    list.iter()
        .map(|s| acceptance::parse_id(s).ok_or_else(|| CliError::Usage(format!("unknown criterion {s:?}"))))
        .collect()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = (|| -> Result<bool> {
        if let Some(c) = &cli.check {
            let ids = parse_ids(std::slice::from_ref(c))?;
            let out = match &cli.command {
                Some(Command::Verify(common)) => Some(common.out.clone()),
                _ => None,
            };
            return verify(&ids, out.as_deref());
        }
        match &cli.command {
            Some(Command::Simulate(c)) => simulate(c).map(|_| true),
            Some(Command::FokkerPlanck(c)) => fokker_planck(c).map(|_| true),
            Some(Command::Poincare(c)) => poincare(c).map(|_| true),
            Some(Command::Sweep(c)) => sweep(c).map(|_| true),
            Some(Command::Verify(c)) => {
                let cfg: VerifyConfig = load_config(c, json!({}))?;
                if cfg.schema_version != 1 {
                    return Err(CliError::Usage(format!("unsupported schema_version {}", cfg.schema_version)));
                }
                verify(&parse_ids(&cfg.criteria)?, Some(&c.out))
            }
            None => Err(CliError::Usage("no subcommand given; see --help".into())),
        }
    })();
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
