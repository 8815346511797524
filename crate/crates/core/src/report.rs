//! Metric records, CSV output, per-round summaries and run manifests.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::ExperimentConfig;
use crate::protocol::Method;

pub const CSV_HEADER: &str = "trial,round,method,test_accuracy,train_loss,decoded_count,retransmissions,wall_time_ms";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("manifest {}: {message}", path.display())]
    Manifest { path: PathBuf, message: String },
}

/// One row of the metrics CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    /// Trial seed (master seed plus trial index).
    pub trial: u64,
    /// 1-based round.
    pub round: usize,
    pub method: Method,
    pub test_accuracy: f64,
    pub train_loss: f64,
    /// Number of updates in the aggregate (0 for a failed round).
    pub decoded_count: usize,
    pub retransmissions: usize,
    pub wall_time_ms: u64,
}

pub fn write_metrics<W: Write>(records: &[MetricRecord], out: W) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| ReportError::Io { path: PathBuf::from("<csv>"), message: e.to_string() })?;
    Ok(())
}

pub fn metrics_csv(records: &[MetricRecord]) -> String {
    let mut buf = Vec::new();
    if records.is_empty() {
        return format!("{CSV_HEADER}\n");
    }
    write_metrics(records, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv output is UTF-8")
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricRecord>, ReportError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<Vec<_>, _>>()?)
}

/// Mean and standard error of one quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStderr {
    pub mean: f64,
    pub stderr: f64,
}

impl MeanStderr {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return MeanStderr { mean: f64::NAN, stderr: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return MeanStderr { mean, stderr: 0.0 };
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        MeanStderr { mean, stderr: (var / n as f64).sqrt() }
    }
}

/// Cross-trial statistics for one `(round, method)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub round: usize,
    pub method: Method,
    pub trials: usize,
    pub accuracy_mean: f64,
    pub accuracy_stderr: f64,
    pub loss_mean: f64,
    pub loss_stderr: f64,
    pub decoded_mean: f64,
    pub retransmissions_mean: f64,
}

pub fn summarize(records: &[MetricRecord]) -> Vec<SummaryRow> {
    let mut cells: BTreeMap<(usize, Method), Vec<&MetricRecord>> = BTreeMap::new();
    for r in records {
        cells.entry((r.round, r.method)).or_default().push(r);
    }
    cells
        .into_iter()
        .map(|((round, method), rs)| {
            let acc = MeanStderr::of(&rs.iter().map(|r| r.test_accuracy).collect::<Vec<_>>());
            let loss = MeanStderr::of(&rs.iter().map(|r| r.train_loss).collect::<Vec<_>>());
            let n = rs.len() as f64;
            SummaryRow {
                round,
                method,
                trials: rs.len(),
                accuracy_mean: acc.mean,
                accuracy_stderr: acc.stderr,
                loss_mean: loss.mean,
                loss_stderr: loss.stderr,
                decoded_mean: rs.iter().map(|r| r.decoded_count as f64).sum::<f64>() / n,
                retransmissions_mean: rs.iter().map(|r| r.retransmissions as f64).sum::<f64>() / n,
            }
        })
        .collect()
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
}

/// Final-round mean accuracy per method.
pub fn final_accuracy(records: &[MetricRecord]) -> BTreeMap<Method, MeanStderr> {
    let last = records.iter().map(|r| r.round).max().unwrap_or(0);
    let mut by: BTreeMap<Method, Vec<f64>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.round == last) {
        by.entry(r.method).or_default().push(r.test_accuracy);
    }
    by.into_iter().map(|(m, v)| (m, MeanStderr::of(&v))).collect()
}

/// Hex SHA-256 of the canonical JSON form of a config.
pub fn config_hash(config: &ExperimentConfig) -> String {
    let canonical = serde_json::to_string(config).expect("config serializes");
    Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Everything needed to repeat a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    /// Seconds since the Unix epoch when the run started.
    pub timestamp: u64,
    pub outputs: Vec<PathBuf>,
    pub config: ExperimentConfig,
}

impl RunManifest {
    pub fn new(config: &ExperimentConfig, outputs: Vec<PathBuf>) -> Self {
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        RunManifest {
            config_hash: config_hash(config),
            seed: config.experiment.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp,
            outputs,
            config: config.clone(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), ReportError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text + "\n").map_err(|e| ReportError::Io { path: path.to_path_buf(), message: e.to_string() })
    }

    /// Loads a manifest and checks that its config still hashes to the
    /// recorded value.
    pub fn read(path: &Path) -> Result<Self, ReportError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ReportError::Io { path: path.to_path_buf(), message: e.to_string() })?;
        let m: RunManifest = serde_json::from_str(&text)
            .map_err(|e| ReportError::Manifest { path: path.to_path_buf(), message: e.to_string() })?;
        let actual = config_hash(&m.config);
        if actual != m.config_hash {
            return Err(ReportError::Manifest {
                path: path.to_path_buf(),
                message: format!("config hash {actual} does not match recorded {}", m.config_hash),
            });
        }
        Ok(m)
    }
}

pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Writes `metrics.csv`, `summary.csv` and `manifest.json` into `dir`,
/// creating it if needed.
pub fn write_run(dir: &Path, config: &ExperimentConfig, records: &[MetricRecord]) -> Result<RunManifest, ReportError> {
    let io = |path: &Path, e: std::io::Error| ReportError::Io { path: path.to_path_buf(), message: e.to_string() };
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let metrics = dir.join(METRICS_FILE);
    std::fs::write(&metrics, metrics_csv(records)).map_err(|e| io(&metrics, e))?;
    let summary = dir.join(SUMMARY_FILE);
    std::fs::write(&summary, summary_csv(&summarize(records))).map_err(|e| io(&summary, e))?;
    let manifest = RunManifest::new(config, vec![metrics, summary]);
    manifest.write(&dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(trial: u64, round: usize, method: Method, acc: f64) -> MetricRecord {
        MetricRecord {
            trial,
            round,
            method,
            test_accuracy: acc,
            train_loss: 1.5,
            decoded_count: 10,
            retransmissions: 0,
            wall_time_ms: 0,
        }
    }

    #[test]
    fn header_is_stable() {
        let csv = metrics_csv(&[rec(1, 1, Method::NonAnon, 0.5)]);
        assert_eq!(csv.lines().next().unwrap(), CSV_HEADER);
        assert_eq!(csv.lines().nth(1).unwrap(), "1,1,non_anon,0.5,1.5,10,0,0");
        assert_eq!(metrics_csv(&[]).trim_end(), CSV_HEADER);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let rs = vec![rec(3, 1, Method::Proposed, 0.123_456_789_012_345_6), rec(3, 2, Method::Anon, 1.0 / 3.0)];
        std::fs::write(&p, metrics_csv(&rs)).unwrap();
        assert_eq!(read_metrics(&p).unwrap(), rs);
    }

    #[test]
    fn summary_statistics() {
        let rs = vec![rec(1, 1, Method::Proposed, 0.5), rec(2, 1, Method::Proposed, 0.7)];
        let s = summarize(&rs);
        assert_eq!(s.len(), 1);
        assert!((s[0].accuracy_mean - 0.6).abs() < 1e-12);
        assert!((s[0].accuracy_stderr - 0.1).abs() < 1e-12);
        assert_eq!(MeanStderr::of(&[2.0]).stderr, 0.0);
    }

    #[test]
    fn manifest_round_trip_and_tamper_check() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("manifest.json");
        let c = ExperimentConfig::default();
        let m = RunManifest::new(&c, vec![PathBuf::from("metrics.csv")]);
        m.write(&p).unwrap();
        assert_eq!(RunManifest::read(&p).unwrap(), m);
        let tampered = std::fs::read_to_string(&p).unwrap().replace("\"rounds\": 20", "\"rounds\": 21");
        std::fs::write(&p, tampered).unwrap();
        assert!(matches!(RunManifest::read(&p), Err(ReportError::Manifest { .. })));
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        assert_eq!(config_hash(&a), config_hash(&b));
        b.experiment.rounds += 1;
        assert_ne!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
    }
}
