//! Metrics reports and CSV artifacts. Every file carries the config hash of
//! the run that produced it.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{ImrlError, Result};
use crate::pipeline::{BcHistory, EnvMetrics, ReprHistory};

/// One line of a report: a single environment, or a whole suite when bowl
/// and food are `all`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub variant: String,
    pub suite: String,
    pub bowl: String,
    pub food: String,
    pub episodes: usize,
    pub seed: u64,
    pub sur: f64,
    pub sfr: f64,
    pub afs: f64,
}

impl MetricsRow {
    pub fn from_env(variant: &str, suite: &str, m: &EnvMetrics) -> MetricsRow {
        MetricsRow {
            variant: variant.to_string(),
            suite: suite.to_string(),
            bowl: m.bowl.clone(),
            food: m.food.clone(),
            episodes: m.episodes,
            seed: m.seed,
            sur: m.sur,
            sfr: m.sfr,
            afs: m.afs,
        }
    }

    /// Unweighted mean over per-environment rows.
    pub fn suite_mean(variant: &str, suite: &str, seed: u64, rows: &[EnvMetrics]) -> Result<MetricsRow> {
        let (sur, sfr, afs) = crate::pipeline::suite_mean(rows)?;
        Ok(MetricsRow {
            variant: variant.to_string(),
            suite: suite.to_string(),
            bowl: "all".into(),
            food: "all".into(),
            episodes: rows.iter().map(|r| r.episodes).sum(),
            seed,
            sur,
            sfr,
            afs,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub config_hash: String,
    pub rows: Vec<MetricsRow>,
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    variant: String,
    suite: String,
    bowl: String,
    food: String,
    episodes: usize,
    seed: u64,
    sur: f64,
    sfr: f64,
    afs: f64,
    config_hash: String,
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> ImrlError + '_ {
    move |e| ImrlError::io(path, e)
}

fn csv_err(path: &Path, e: csv::Error) -> ImrlError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => ImrlError::io(path, io),
        other => ImrlError::Format {
            what: "csv",
            message: format!("{}: {other:?}", path.display()),
        },
    }
}

fn create(path: &Path) -> Result<File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    File::create(path).map_err(io_err(path))
}

/// The JSON twin of a CSV report path.
pub fn json_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Writes `path` as CSV and its `.json` twin.
pub fn write_report(report: &MetricsReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in &report.rows {
        w.serialize(CsvRow {
            variant: r.variant.clone(),
            suite: r.suite.clone(),
            bowl: r.bowl.clone(),
            food: r.food.clone(),
            episodes: r.episodes,
            seed: r.seed,
            sur: r.sur,
            sfr: r.sfr,
            afs: r.afs,
            config_hash: report.config_hash.clone(),
        })
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))?;

    let jp = json_path(path);
    let mut out = BufWriter::new(create(&jp)?);
    serde_json::to_writer_pretty(&mut out, report).map_err(|e| ImrlError::Format {
        what: "json",
        message: e.to_string(),
    })?;
    out.write_all(b"\n").map_err(io_err(&jp))?;
    out.flush().map_err(io_err(&jp))
}

pub fn read_report_csv(path: &Path) -> Result<MetricsReport> {
    let mut r = csv::Reader::from_reader(File::open(path).map_err(io_err(path))?);
    let mut report = MetricsReport {
        config_hash: String::new(),
        rows: Vec::new(),
    };
    for (i, row) in r.deserialize::<CsvRow>().enumerate() {
        let row = row.map_err(|e| csv_err(path, e))?;
        if i == 0 {
            report.config_hash = row.config_hash.clone();
        } else if row.config_hash != report.config_hash {
            return Err(ImrlError::Format {
                what: "csv",
                message: format!("{}: mixed config hashes", path.display()),
            });
        }
        report.rows.push(MetricsRow {
            variant: row.variant,
            suite: row.suite,
            bowl: row.bowl,
            food: row.food,
            episodes: row.episodes,
            seed: row.seed,
            sur: row.sur,
            sfr: row.sfr,
            afs: row.afs,
        });
    }
    Ok(report)
}

pub fn read_report_json(path: &Path) -> Result<MetricsReport> {
    let f = File::open(path).map_err(io_err(path))?;
    serde_json::from_reader(std::io::BufReader::new(f)).map_err(|e| ImrlError::Format {
        what: "json",
        message: format!("{}: {e}", path.display()),
    })
}

fn write_table(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// Per-epoch representation losses. Row 0 is the frozen batch before
/// training, so it has no epoch mean.
pub fn write_repr_loss_csv(history: &ReprHistory, config_hash: &str, path: &Path) -> Result<()> {
    let header = strings(&["epoch", "epoch_loss", "frozen_loss", "ce", "tri", "temp", "full", "config_hash"]);
    let rows = history.frozen_loss.iter().zip(&history.frozen_parts).enumerate().map(|(e, (f, p))| {
        let mean = if e == 0 { String::new() } else { history.epoch_loss[e - 1].to_string() };
        vec![
            e.to_string(),
            mean,
            f.to_string(),
            p.ce.to_string(),
            p.tri.to_string(),
            p.temp.to_string(),
            p.full.to_string(),
            config_hash.to_string(),
        ]
    });
    write_table(path, &header, rows)
}

/// BC negative log-likelihood; epoch 0 is the value before training.
pub fn write_bc_loss_csv(history: &BcHistory, config_hash: &str, path: &Path) -> Result<()> {
    let header = strings(&["epoch", "nll", "config_hash"]);
    let rows = std::iter::once(history.initial_nll)
        .chain(history.epoch_nll.iter().copied())
        .enumerate()
        .map(|(e, v)| vec![e.to_string(), v.to_string(), config_hash.to_string()]);
    write_table(path, &header, rows)
}

/// One row per point: its property label followed by the coordinates.
pub fn write_points_csv(
    points: &[f64],
    dim: usize,
    labels: &[String],
    prefix: &str,
    config_hash: &str,
    path: &Path,
) -> Result<()> {
    if dim == 0 || points.len() != dim * labels.len() {
        return Err(ImrlError::Shape(format!(
            "{} values for {} labels of dim {dim}",
            points.len(),
            labels.len()
        )));
    }
    let mut header = strings(&["index", "label"]);
    header.extend((0..dim).map(|d| format!("{prefix}{d}")));
    header.push("config_hash".into());
    let rows = points.chunks(dim).zip(labels).enumerate().map(|(i, (p, l))| {
        let mut r = vec![i.to_string(), l.clone()];
        r.extend(p.iter().map(|v| v.to_string()));
        r.push(config_hash.to_string());
        r
    });
    write_table(path, &header, rows)
}

/// Writes `<path>.hash` next to a binary or JSONL artifact.
pub fn write_hash_sidecar(path: &Path, config_hash: &str) -> Result<()> {
    let mut side = path.as_os_str().to_owned();
    side.push(".hash");
    let side = PathBuf::from(side);
    std::fs::write(&side, format!("{config_hash}\n")).map_err(io_err(&side))
}
