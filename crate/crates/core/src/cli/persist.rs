//! On-disk formats of a run directory.
//!
//! - `report.csv`: one row per iteration.
//! - `dataset.jsonl`: one training pair per line; shapes in `shapes/`.
//! - `reports/iter_NNN.json`: full per-iteration report.
//! - `manifest.json`: config snapshot, progress and timestamps.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::CliError;
use crate::dsl::Program;
use crate::geometry::io::{atomic_write, read_xyz, xyz_string};
use crate::selftrain::{DatasetRecord, IterationReport, TrainingPair};

pub const REPORT_CSV: &str = "report.csv";
pub const DATASET: &str = "dataset.jsonl";
pub const MANIFEST: &str = "manifest.json";
pub const REPORTS_DIR: &str = "reports";
pub const SHAPES_DIR: &str = "shapes";

/// Columns of `report.csv`, in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub iteration: usize,
    pub cd_best10: f64,
    pub cd_mean: f64,
    pub cd_worst10: f64,
    pub iou_mean: Option<f64>,
    pub len_mean: f64,
    pub len_max: usize,
    pub len_min: usize,
    pub pairs_emitted: usize,
    pub proposals_dropped: usize,
}

impl From<&IterationReport> for ReportRow {
    fn from(r: &IterationReport) -> Self {
        ReportRow {
            iteration: r.iteration,
            cd_best10: r.cd_best10,
            cd_mean: r.cd_mean,
            cd_worst10: r.cd_worst10,
            iou_mean: r.iou_mean,
            len_mean: r.len_mean,
            len_max: r.len_max,
            len_min: r.len_min,
            pairs_emitted: r.pairs_emitted,
            proposals_dropped: r.proposals_dropped,
        }
    }
}

pub fn report_csv_bytes(rows: &[ReportRow]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record([
            "iteration",
            "cd_best10",
            "cd_mean",
            "cd_worst10",
            "iou_mean",
            "len_mean",
            "len_max",
            "len_min",
            "pairs_emitted",
            "proposals_dropped",
        ])
        .expect("in-memory write");
    }
    for row in rows {
        w.serialize(row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory write")
}

pub fn read_report_csv(path: &Path) -> Result<Vec<ReportRow>, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    csv::Reader::from_reader(bytes.as_slice())
        .deserialize()
        .collect::<Result<Vec<ReportRow>, _>>()
        .map_err(|e| CliError::Other(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    atomic_write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Writes one iteration's shape sidecars and returns its dataset records.
pub fn write_pairs(dir: &Path, pairs: &[TrainingPair]) -> Result<Vec<DatasetRecord>, CliError> {
    pairs
        .iter()
        .enumerate()
        .map(|(i, pair)| {
            let record = DatasetRecord::from_pair(pair, i);
            write_file(&dir.join(&record.shape), xyz_string(&pair.shape).as_bytes())?;
            Ok(record)
        })
        .collect()
}

pub fn dataset_bytes(records: &[DatasetRecord]) -> Vec<u8> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out.into_bytes()
}

pub fn read_dataset_records(path: &Path) -> Result<Vec<DatasetRecord>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, line)| {
            serde_json::from_str(line).map_err(|e| CliError::Other(format!("{}:{}: {e}", path.display(), n + 1)))
        })
        .collect()
}

/// Rebuilds a training pair from its record and sidecar.
pub fn load_pair(dir: &Path, record: &DatasetRecord) -> Result<TrainingPair, CliError> {
    let shape = read_xyz(&dir.join(&record.shape))?;
    let program: Program = record.program.parse()?;
    Ok(TrainingPair::new(shape, &program, record.cd, record.source, record.iteration))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: Value,
    pub seed: u64,
    pub proposer: String,
    pub started_unix: u64,
    pub finished_unix: Option<u64>,
    pub completed_iterations: usize,
    pub report_csv: String,
    pub dataset: String,
    pub reports: Vec<String>,
}

pub fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, CliError> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))
}

pub fn iteration_report_path(iteration: usize) -> String {
    format!("{REPORTS_DIR}/iter_{iteration:03}.json")
}

/// Persists everything after each iteration; the manifest goes last so a
/// crash leaves the previous checkpoint intact.
pub struct RunWriter {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub rows: Vec<ReportRow>,
    pub records: Vec<DatasetRecord>,
    /// Called with each finished report.
    pub progress: Option<Box<dyn FnMut(&IterationReport)>>,
}

impl RunWriter {
    pub fn write_iteration(&mut self, report: &IterationReport, pairs: &[TrainingPair]) -> Result<(), CliError> {
        let records = write_pairs(&self.dir, pairs)?;
        self.records.extend(records);
        self.rows.push(ReportRow::from(report));
        let report_path = iteration_report_path(report.iteration);
        write_file(
            &self.dir.join(&report_path),
            serde_json::to_string_pretty(report).expect("report serializes").as_bytes(),
        )?;
        write_file(&self.dir.join(DATASET), &dataset_bytes(&self.records))?;
        write_file(&self.dir.join(REPORT_CSV), &report_csv_bytes(&self.rows))?;
        self.manifest.completed_iterations = report.iteration + 1;
        self.manifest.reports.push(report_path);
        self.write_manifest()?;
        if let Some(f) = self.progress.as_mut() {
            f(report);
        }
        Ok(())
    }

    pub fn write_manifest(&self) -> Result<(), CliError> {
        write_file(
            &self.dir.join(MANIFEST),
            serde_json::to_string_pretty(&self.manifest).expect("manifest serializes").as_bytes(),
        )
    }
}

impl crate::selftrain::IterationSink for RunWriter {
    fn on_iteration(&mut self, report: &IterationReport, pairs: &[TrainingPair]) -> Result<(), String> {
        self.write_iteration(report, pairs).map_err(|e| e.to_string())
    }
}
