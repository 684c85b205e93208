//! Command-line front end.
//!
//! Exit codes: 0 success, 1 I/O failure or a failing `cv-table` row,
//! 2 invalid configuration or usage, 3 numerical failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::channel::body_channel_models;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::harness::{export_scatter, run_cell, run_lemma1, write_ber_csv, write_lemma1_csv, write_scatter_csv};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Allowed absolute deviation of a computed CV from its tabulated value.
pub const CV_TOLERANCE: f64 = 0.01;
/// Allowed relative deviation of closed-form moments from quadrature.
pub const MOMENT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "ook-fusion", version, about = "Noncoherent OOK fusion detectors and Monte Carlo BER sweeps")]
pub struct Cli {
    /// Worker threads for frame simulation (default: all cores).
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub workers: Option<u16>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// BER of every configured detector over the power (and np) grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Output CSV; the manifest goes to `<out>.manifest.json`.
        #[arg(long)]
        out: PathBuf,
        /// Overrides `master_seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Coefficient of variation of the nine body-channel models against their tabulated values.
    CvTable {
        /// Also write the table as CSV, with a manifest.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Gap between the kernel density estimate and the statistical-CSI density.
    Lemma1 {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Normalized weight differences of the weight-comparing detectors.
    Scatter {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; receives `scatter_<detector>.csv` and `manifest.json`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

/// Provenance record written next to every output file.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub timestamp: String,
    pub master_seed: Option<u64>,
    pub workers: usize,
    /// Resolved configuration; feeding it back through `--config` reproduces the outputs.
    pub config_toml: Option<String>,
    pub outputs: Vec<String>,
    pub cells: Vec<serde_json::Value>,
}

impl RunManifest {
    fn new(command: &str, config: Option<&RunConfig>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            timestamp: chrono::Utc::now().to_rfc3339(),
            master_seed: config.map(|c| c.master_seed),
            workers: rayon::current_num_threads(),
            config_toml: config.map(RunConfig::to_toml),
            outputs: Vec::new(),
            cells: Vec::new(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))?;
        write_file(path, text.as_bytes())
    }
}

/// One row of the CV table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvRow {
    pub model: &'static str,
    pub cv: f64,
    pub tabulated_cv: f64,
    pub abs_dev: f64,
    /// Largest relative gap between closed-form and quadrature moments of order 1 and 2.
    pub moment_rel_err: f64,
    pub pass: bool,
}

/// CVs of the tabulated models with their moment cross-check.
pub fn cv_table() -> Result<Vec<CvRow>> {
    body_channel_models()
        .into_iter()
        .map(|m| {
            let cv = m.dist.coefficient_of_variation()?;
            let mut moment_rel_err: f64 = 0.0;
            for r in [1, 2] {
                let exact = m.dist.moment(r)?;
                let numeric = m.dist.quadrature_moment(r)?;
                moment_rel_err = moment_rel_err.max(((numeric - exact) / exact).abs());
            }
            let abs_dev = (cv - m.tabulated_cv).abs();
            Ok(CvRow {
                model: m.name,
                cv,
                tabulated_cv: m.tabulated_cv,
                abs_dev,
                moment_rel_err,
                pass: abs_dev < CV_TOLERANCE && moment_rel_err < MOMENT_TOLERANCE,
            })
        })
        .collect()
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        Error::Io(_) => EXIT_FAILURE,
        Error::Domain(_) | Error::MomentDiverges { .. } | Error::DegenerateTraining { .. } | Error::Numerical(_) => {
            EXIT_NUMERICAL
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, bytes).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn load(config: &Path, seed: Option<u64>) -> Result<RunConfig> {
    let mut cfg = RunConfig::from_file(config)?;
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    Ok(cfg)
}

pub fn cmd_sweep(config: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let run = load(config, seed)?;
    let sweep = run.sweep_config()?;
    let mut manifest = RunManifest::new("sweep", Some(&run));
    let cells = sweep.cells();
    let mut points = Vec::new();
    for (i, &(power_dbm, np)) in cells.iter().enumerate() {
        let t0 = Instant::now();
        let pts = run_cell(&sweep, power_dbm, np)?;
        let runtime_s = t0.elapsed().as_secs_f64();
        eprintln!("[{}/{}] {power_dbm} dBm, np = {np}: {runtime_s:.1} s", i + 1, cells.len());
        manifest.cells.push(json!({
            "power_dbm": power_dbm,
            "np": np,
            "runtime_s": runtime_s,
            "skipped_frames": pts.iter().map(|p| (p.detector.as_str(), p.skipped_frames)).collect::<std::collections::BTreeMap<_, _>>(),
        }));
        points.extend(pts);
    }
    let mut csv = Vec::new();
    write_ber_csv(&points, &mut csv).map_err(|e| Error::Io(e.to_string()))?;
    write_file(out, &csv)?;
    manifest.outputs.push(out.display().to_string());
    manifest.write(&manifest_path(out))
}

/// Prints the table; returns whether every row passes.
pub fn cmd_cv_table(out: Option<&Path>) -> Result<bool> {
    let t0 = Instant::now();
    let rows = cv_table()?;
    println!("{:<6} {:>10} {:>10} {:>10} {:>12}  status", "model", "cv", "tabulated", "abs_dev", "moment_err");
    for r in &rows {
        println!(
            "{:<6} {:>10.4} {:>10.4} {:>10.2e} {:>12.2e}  {}",
            r.model,
            r.cv,
            r.tabulated_cv,
            r.abs_dev,
            r.moment_rel_err,
            if r.pass { "ok" } else { "FAIL" }
        );
    }
    if let Some(out) = out {
        let mut csv = String::from("model,cv,tabulated_cv,abs_dev,moment_rel_err,pass\n");
        for r in &rows {
            csv.push_str(&format!(
                "{},{:.8e},{:.8e},{:.8e},{:.8e},{}\n",
                r.model, r.cv, r.tabulated_cv, r.abs_dev, r.moment_rel_err, r.pass
            ));
        }
        write_file(out, csv.as_bytes())?;
        let mut manifest = RunManifest::new("cv-table", None);
        manifest.outputs.push(out.display().to_string());
        manifest.cells.push(json!({ "runtime_s": t0.elapsed().as_secs_f64() }));
        manifest.write(&manifest_path(out))?;
    }
    Ok(rows.iter().all(|r| r.pass))
}

pub fn cmd_lemma1(config: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let run = load(config, seed)?;
    let l1 = run.lemma1_config()?;
    let t0 = Instant::now();
    let rows = run_lemma1(&l1)?;
    let mut manifest = RunManifest::new("lemma1", Some(&run));
    manifest.cells.push(json!({
        "y": [l1.y.re, l1.y.im],
        "kernel_c_grid": l1.kernel_c_grid,
        "runtime_s": t0.elapsed().as_secs_f64(),
    }));
    let mut csv = Vec::new();
    write_lemma1_csv(&rows, &mut csv).map_err(|e| Error::Io(e.to_string()))?;
    write_file(out, &csv)?;
    manifest.outputs.push(out.display().to_string());
    manifest.write(&manifest_path(out))
}

pub fn cmd_scatter(config: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let run = load(config, seed)?;
    let (sweep, section) = run.scatter_config()?;
    let mut manifest = RunManifest::new("scatter", Some(&run));
    for &det in &sweep.detectors {
        let t0 = Instant::now();
        let batch = export_scatter(&sweep, det, section.power_dbm, section.n_symbols)?;
        let path = out.join(format!("scatter_{det}.csv"));
        let mut csv = Vec::new();
        write_scatter_csv(&batch.rows, &mut csv).map_err(|e| Error::Io(e.to_string()))?;
        write_file(&path, &csv)?;
        manifest.outputs.push(path.display().to_string());
        manifest.cells.push(json!({
            "detector": det.as_str(),
            "power_dbm": section.power_dbm,
            "rows": batch.rows.len(),
            "divisor": batch.divisor,
            "misclassified": batch.misclassified().count(),
            "skipped_frames": batch.skipped_frames,
            "runtime_s": t0.elapsed().as_secs_f64(),
        }));
    }
    manifest.write(&out.join("manifest.json"))
}

fn dispatch(command: &Command) -> Result<i32> {
    match command {
        Command::Sweep { config, out, seed } => cmd_sweep(config, out, *seed).map(|_| EXIT_OK),
        Command::CvTable { out } => cmd_cv_table(out.as_deref()).map(|ok| if ok { EXIT_OK } else { EXIT_FAILURE }),
        Command::Lemma1 { config, out, seed } => cmd_lemma1(config, out, *seed).map(|_| EXIT_OK),
        Command::Scatter { config, out, seed } => cmd_scatter(config, out, *seed).map(|_| EXIT_OK),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = match cli.workers {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n.into()).build() {
            Ok(pool) => pool.install(|| dispatch(&cli.command)),
            Err(e) => Err(Error::Io(format!("cannot start {n} workers: {e}"))),
        },
        None => dispatch(&cli.command),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cv_rows_match_tabulated_values() {
        let rows = cv_table().unwrap();
        assert_eq!(rows.len(), 9);
        assert!(rows.iter().all(|r| r.pass), "{rows:#?}");
        let d5 = rows.iter().find(|r| r.model == "d5").unwrap();
        assert!((d5.cv - 0.2884).abs() < 1e-3);
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(["ook-fusion", "sweep"]), EXIT_CONFIG);
        assert_eq!(run(["ook-fusion", "frobnicate"]), EXIT_CONFIG);
        assert_eq!(run(["ook-fusion", "--workers", "0", "cv-table"]), EXIT_CONFIG);
    }

    #[test]
    fn error_classes() {
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::Numerical("x".into())), 3);
        assert_eq!(exit_code(&Error::Io("x".into())), 1);
    }
}
