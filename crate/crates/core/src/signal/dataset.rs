//! On-disk dataset layout: `manifest.json` plus one CSV per recording
//! (one line per channel, comma-separated samples).

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{MultiChannelRecording, SignalError};
use crate::class::ClassId;

pub const MANIFEST_FILE: &str = "manifest.json";
const RECORDING_DIR: &str = "recordings";
/// Decimal places written per sample.
const SAMPLE_DECIMALS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub patient_id: String,
    pub label: ClassId,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub sample_rate_hz: f64,
    pub channels: usize,
    pub recordings: Vec<ManifestEntry>,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: malformed manifest: {source}")]
    Manifest { path: PathBuf, source: serde_json::Error },
    #[error("{path}:{line}: {message}")]
    Csv { path: PathBuf, line: usize, message: String },
    #[error("{path}: {source}")]
    Recording { path: PathBuf, source: SignalError },
    #[error("dataset is empty")]
    Empty,
    #[error("recordings disagree on channel count or sample rate ({0})")]
    Inconsistent(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.to_owned(), source }
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let file_name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{file_name}.tmp{}", std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}

pub fn recording_to_csv(samples: &Array2<f64>) -> String {
    let mut out = String::with_capacity(samples.len() * (SAMPLE_DECIMALS + 4));
    for row in samples.rows() {
        for (i, x) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{:.*}", SAMPLE_DECIMALS, x);
        }
        out.push('\n');
    }
    out
}

pub fn recording_from_csv(text: &str, path: &Path) -> Result<Array2<f64>, DatasetError> {
    let mut values = Vec::new();
    let mut rows = 0;
    let mut cols = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let before = values.len();
        for field in line.split(',') {
            let x: f64 = field.trim().parse().map_err(|_| DatasetError::Csv {
                path: path.to_owned(),
                line: i + 1,
                message: format!("not a number: {:?}", field.trim()),
            })?;
            values.push(x);
        }
        let n = values.len() - before;
        match cols {
            None => cols = Some(n),
            Some(c) if c != n => {
                return Err(DatasetError::Csv {
                    path: path.to_owned(),
                    line: i + 1,
                    message: format!("expected {c} columns, found {n}"),
                })
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| DatasetError::Csv { path: path.to_owned(), line: 0, message: "empty file".into() })?;
    Ok(Array2::from_shape_vec((rows, cols), values).expect("row lengths checked"))
}

/// Writes the manifest and recordings under `dir`, creating it if needed.
pub fn write_dataset(dir: &Path, recordings: &[MultiChannelRecording<f64>]) -> Result<Manifest, DatasetError> {
    let first = recordings.first().ok_or(DatasetError::Empty)?;
    let rec_dir = dir.join(RECORDING_DIR);
    fs::create_dir_all(&rec_dir).map_err(io_err(&rec_dir))?;
    let mut entries = Vec::with_capacity(recordings.len());
    for (i, rec) in recordings.iter().enumerate() {
        if rec.channels() != first.channels() || rec.sample_rate_hz != first.sample_rate_hz {
            return Err(DatasetError::Inconsistent(format!("recording {i} of patient {}", rec.patient_id)));
        }
        let file = format!("{RECORDING_DIR}/r{i:05}.csv");
        let path = dir.join(&file);
        write_atomic(&path, recording_to_csv(rec.samples()).as_bytes()).map_err(io_err(&path))?;
        entries.push(ManifestEntry { patient_id: rec.patient_id.clone(), label: rec.label.clone(), file });
    }
    let manifest = Manifest { sample_rate_hz: first.sample_rate_hz, channels: first.channels(), recordings: entries };
    let path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_atomic(&path, json.as_bytes()).map_err(io_err(&path))?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, DatasetError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|source| DatasetError::Manifest { path, source })
}

pub fn read_dataset(dir: &Path) -> Result<Vec<MultiChannelRecording<f64>>, DatasetError> {
    let manifest = read_manifest(dir)?;
    if manifest.recordings.is_empty() {
        return Err(DatasetError::Empty);
    }
    manifest
        .recordings
        .iter()
        .map(|entry| {
            let path = dir.join(&entry.file);
            let text = fs::read_to_string(&path).map_err(io_err(&path))?;
            let samples = recording_from_csv(&text, &path)?;
            if samples.nrows() != manifest.channels {
                return Err(DatasetError::Inconsistent(format!(
                    "{} has {} channels, manifest says {}",
                    entry.file,
                    samples.nrows(),
                    manifest.channels
                )));
            }
            MultiChannelRecording::new(entry.patient_id.clone(), entry.label.clone(), samples, manifest.sample_rate_hz)
                .map_err(|source| DatasetError::Recording { path, source })
        })
        .collect()
}
