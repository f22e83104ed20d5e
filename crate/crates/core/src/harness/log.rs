//! JSON-lines run log.
//!
//! One object per line, tagged by `"type"`: a `header`, one `epoch` record
//! per trained epoch, at most one `detection`, and a closing `summary`.
//! Lines are flushed as they are produced, so a run that aborts keeps the
//! records written before the failure.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detector::DetectionEvent;
use crate::error::{Error, Result};
use crate::schedule::RecipeSchedule;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub config: serde_json::Value,
    pub dataset: String,
    pub train_samples: usize,
    pub held_out_samples: usize,
    pub parameters: usize,
    pub spec_fingerprint: u64,
    /// First epoch trained by this run; non-zero for resumed runs.
    pub start_epoch: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
    pub cosine_distance: f64,
    /// Window angle ending at this epoch, once the window is full.
    pub angle_degrees: Option<f64>,
    pub k: f64,
    pub samples: usize,
    pub learning_rate: f64,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub final_accuracy: f64,
    pub total_samples: usize,
    pub critical_epoch: Option<usize>,
    pub schedule: RecipeSchedule,
    pub wall_seconds: f64,
    pub report: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum LogLine {
    Header(RunHeader),
    Epoch(EpochRecord),
    Detection(DetectionEvent),
    Summary(RunSummary),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRunLog {
    pub header: RunHeader,
    pub epochs: Vec<EpochRecord>,
    pub detection: Option<DetectionEvent>,
    pub summary: Option<RunSummary>,
}

impl TrainRunLog {
    pub fn new(header: RunHeader) -> Self {
        TrainRunLog {
            header,
            epochs: Vec::new(),
            detection: None,
            summary: None,
        }
    }

    pub fn is_complete(&self) -> bool {
        self.summary.is_some()
    }

    pub fn samples_per_epoch(&self) -> Vec<usize> {
        self.epochs.iter().map(|r| r.samples).collect()
    }

    pub fn final_accuracy(&self) -> Option<f64> {
        self.summary.as_ref().map(|s| s.final_accuracy)
    }

    /// Copy with every wall-clock field zeroed, for determinism checks.
    pub fn without_timing(&self) -> Self {
        let mut log = self.clone();
        log.epochs.iter_mut().for_each(|r| r.wall_ms = 0.0);
        if let Some(s) = &mut log.summary {
            s.wall_seconds = 0.0;
        }
        log
    }

    pub fn lines(&self) -> Vec<LogLine> {
        let mut lines = vec![LogLine::Header(self.header.clone())];
        let fired = self.detection.as_ref().map(|d| d.epoch);
        for r in &self.epochs {
            lines.push(LogLine::Epoch(r.clone()));
            if Some(r.epoch) == fired {
                lines.push(LogLine::Detection(self.detection.clone().expect("fired")));
            }
        }
        if let Some(s) = &self.summary {
            lines.push(LogLine::Summary(s.clone()));
        }
        lines
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for line in self.lines() {
            out.push_str(&serde_json::to_string(&line)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn parse_jsonl(text: &str, origin: &Path) -> Result<Self> {
        let mut log: Option<TrainRunLog> = None;
        for (i, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                path: origin.to_path_buf(),
                line: i + 1,
                message,
            };
            let line: LogLine = serde_json::from_str(raw).map_err(|e| err(e.to_string()))?;
            match (line, log.as_mut()) {
                (LogLine::Header(h), None) => log = Some(TrainRunLog::new(h)),
                (LogLine::Header(_), Some(_)) => return Err(err("second header".into())),
                (_, None) => return Err(err("record before header".into())),
                (LogLine::Epoch(r), Some(l)) => {
                    if let Some(last) = l.epochs.last() {
                        if r.epoch <= last.epoch {
                            return Err(err(format!("epoch {} after {}", r.epoch, last.epoch)));
                        }
                    }
                    l.epochs.push(r);
                }
                (LogLine::Detection(d), Some(l)) => l.detection = Some(d),
                (LogLine::Summary(s), Some(l)) => l.summary = Some(s),
            }
        }
        log.ok_or_else(|| Error::Parse {
            path: origin.to_path_buf(),
            line: 0,
            message: "empty log".into(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut text = String::new();
        for line in BufReader::new(file).lines() {
            text.push_str(&line.map_err(|e| Error::io(path, e))?);
            text.push('\n');
        }
        Self::parse_jsonl(&text, path)
    }
}

/// Appends log lines to a file, flushing after each.
pub struct LogWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl LogWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(LogWriter {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        })
    }

    pub fn write(&mut self, line: &LogLine) -> Result<()> {
        let text = serde_json::to_string(line)?;
        writeln!(self.out, "{text}")
            .and_then(|_| self.out.flush())
            .map_err(|e| Error::io(&self.path, e))
    }
}
