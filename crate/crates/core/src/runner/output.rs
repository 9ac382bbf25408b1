//! Artifact files of runs and sweeps.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{RunOutcome, ScenarioConfig, SweepCell};
use crate::{Error, Result};

/// Column order of `timeseries.csv`.
pub const CSV_COLUMNS: [&str; 21] = [
    "t", "delta", "domega", "eqp", "x1_hat", "x2_hat", "x3_hat", "theta1_hat", "theta2_hat", "Delta", "y1", "y2",
    "y3", "y4", "y5", "y6", "err_x1", "err_x2", "err_x3", "err_theta1", "err_theta2",
];

/// Paths written by a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunArtifacts {
    pub timeseries: Option<PathBuf>,
    pub regression: Option<PathBuf>,
    pub bounds_report: PathBuf,
    pub pe_report: PathBuf,
    pub manifest: PathBuf,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    version: &'a str,
    config_sha256: String,
    noise_seed: u64,
    excitation_seed: u64,
    multiplier: f64,
    csv_columns: &'a [&'a str],
    /// Complete scenario; feeding it back reproduces every file.
    config: &'a str,
}

#[derive(Debug, Serialize)]
struct PeFile<'a> {
    #[serde(flatten)]
    pe: &'a crate::analysis::PeReport,
    /// Share of samples whose frequency stays within 0.05 Hz of nominal.
    frequency_in_band: f64,
}

fn io<T>(path: &Path, r: std::io::Result<T>) -> Result<T> {
    r.map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let kind = match e.into_kind() {
        csv::ErrorKind::Io(e) => e,
        other => std::io::Error::other(format!("{other:?}")),
    };
    Error::io(path, kind)
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(v).expect("reports serialize to JSON");
    io(path, fs::write(path, text + "\n"))
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn write_csv(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record(r.into_iter().map(fmt)).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn config_hash(cfg_text: &str) -> String {
    Sha256::digest(cfg_text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes `timeseries.csv`, `bounds_report.json`, `pe_report.json`,
/// `manifest.json` and, when enabled, `regression.csv` into `dir`.
pub fn write_run(cfg: &ScenarioConfig, out: &RunOutcome, dir: &Path) -> Result<RunArtifacts> {
    io(dir, fs::create_dir_all(dir))?;
    let timeseries = if cfg.outputs.timeseries {
        let path = dir.join("timeseries.csv");
        let rows = out.rows.iter().map(|r| {
            let mut v = vec![
                r.t, r.delta, r.domega, r.eqp, r.x1_hat, r.x2_hat, r.x3_hat, r.theta1_hat, r.theta2_hat, r.delta_det,
            ];
            v.extend(r.y);
            v.extend(r.err);
            v
        });
        write_csv(&path, &CSV_COLUMNS, rows)?;
        Some(path)
    } else {
        None
    };
    let regression = if cfg.outputs.regression {
        let path = dir.join("regression.csv");
        let header = [
            "t", "z", "xi1", "xi2", "Z1", "Z2", "Xi11", "Xi12", "Xi21", "Xi22", "Delta", "calZ1", "calZ2", "Delta_nom",
            "calZ1_nom", "calZ2_nom",
        ];
        let rows = out.records.iter().zip(&out.nominal_records).map(|(r, n)| {
            vec![
                r.t,
                r.z,
                r.xi[0],
                r.xi[1],
                r.big_z[0],
                r.big_z[1],
                r.big_xi[0][0],
                r.big_xi[0][1],
                r.big_xi[1][0],
                r.big_xi[1][1],
                r.delta,
                r.cal_z[0],
                r.cal_z[1],
                n.delta,
                n.cal_z[0],
                n.cal_z[1],
            ]
        });
        write_csv(&path, &header, rows)?;
        Some(path)
    } else {
        None
    };

    let bounds_report = dir.join("bounds_report.json");
    write_json(&bounds_report, &out.bounds)?;
    let pe_report = dir.join("pe_report.json");
    write_json(
        &pe_report,
        &PeFile {
            pe: &out.pe,
            frequency_in_band: out.frequency_in_band,
        },
    )?;
    let text = cfg.to_toml();
    let manifest = dir.join("manifest.json");
    write_json(
        &manifest,
        &Manifest {
            version: env!("CARGO_PKG_VERSION"),
            config_sha256: config_hash(&text),
            noise_seed: out.seed,
            excitation_seed: cfg.excitation.seed,
            multiplier: out.multiplier,
            csv_columns: &CSV_COLUMNS,
            config: &text,
        },
    )?;
    Ok(RunArtifacts {
        timeseries,
        regression,
        bounds_report,
        pe_report,
        manifest,
    })
}

/// Writes one line per sweep cell to `dir/sweep.csv`.
pub fn write_sweep(cells: &[SweepCell], dir: &Path) -> Result<PathBuf> {
    io(dir, fs::create_dir_all(dir))?;
    let path = dir.join("sweep.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
    let header = [
        "multiplier", "replica", "seed", "status", "fault_time", "sup_x1", "sup_x2", "sup_x3", "sup_theta1",
        "sup_theta2", "sup_alg_x1", "sup_alg_x3", "w_x1_max", "w_x3_max", "pe_satisfied",
    ];
    w.write_record(header).map_err(|e| csv_err(&path, e))?;
    for c in cells {
        let mut rec = vec![
            fmt(c.multiplier),
            c.replica.to_string(),
            c.seed.to_string(),
            c.fault.as_deref().unwrap_or("ok").to_string(),
            c.fault_time.map(fmt).unwrap_or_default(),
        ];
        rec.extend(c.sup_err.to_array().map(fmt));
        rec.extend(c.sup_alg_err.map(fmt));
        rec.push(fmt(c.w_x1_max));
        rec.push(fmt(c.w_x3_max));
        rec.push(c.pe_satisfied.to_string());
        w.write_record(rec).map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn slice(path: &Path, dst: &Path, cols: &[&str]) -> Result<()> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let headers = r.headers().map_err(|e| csv_err(path, e))?.clone();
    let idx: Vec<usize> = cols
        .iter()
        .map(|c| {
            headers.iter().position(|h| h == *c).ok_or_else(|| Error::Parse {
                file: path.to_path_buf(),
                message: format!("missing column {c}"),
            })
        })
        .collect::<Result<_>>()?;
    let mut w = csv::Writer::from_path(dst).map_err(|e| csv_err(dst, e))?;
    w.write_record(cols).map_err(|e| csv_err(dst, e))?;
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        w.write_record(idx.iter().map(|&i| &rec[i])).map_err(|e| csv_err(dst, e))?;
    }
    w.flush().map_err(|e| Error::io(dst, e))
}

/// Writes per-figure slices next to every `timeseries.csv` found in `dir` or
/// its immediate subdirectories: `fig_states.csv` (true and estimated states)
/// and `fig_params.csv` (parameter estimates and their errors).
pub fn report(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut cases = Vec::new();
    if dir.join("timeseries.csv").is_file() {
        cases.push(dir.to_path_buf());
    }
    let mut subdirs: Vec<PathBuf> = io(dir, fs::read_dir(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("timeseries.csv").is_file())
        .collect();
    subdirs.sort();
    cases.extend(subdirs);
    if cases.is_empty() {
        return Err(Error::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no timeseries.csv found"),
        ));
    }
    let mut written = Vec::new();
    for case in cases {
        let src = case.join("timeseries.csv");
        let states = case.join("fig_states.csv");
        slice(&src, &states, &["t", "delta", "x1_hat", "domega", "x2_hat", "eqp", "x3_hat"])?;
        let params = case.join("fig_params.csv");
        slice(&src, &params, &["t", "theta1_hat", "theta2_hat", "err_theta1", "err_theta2"])?;
        written.push(states);
        written.push(params);
    }
    Ok(written)
}
