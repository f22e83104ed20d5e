//! Whole-network weight rotation: cosine distance between the flattened
//! parameters at some epoch and at initialization.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::{ModelParams, ModelSpec, Real};
use crate::error::{Error, Result};

/// Every trainable parameter concatenated in spec order (weights then bias
/// per layer), widened to `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector {
    pub values: Vec<f64>,
    pub epoch: Option<usize>,
}

impl WeightVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn at_epoch(mut self, epoch: usize) -> Self {
        self.epoch = Some(epoch);
        self
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

pub fn flatten<T: Real>(params: &ModelParams<T>) -> WeightVector {
    WeightVector {
        values: params.values().iter().map(|v| v.to_f64().unwrap()).collect(),
        epoch: None,
    }
}

/// Inverse of [`flatten`] for a fixed spec.
pub fn unflatten<T: Real>(vector: &WeightVector, spec: &ModelSpec) -> Result<ModelParams<T>> {
    let values = vector
        .values
        .iter()
        .map(|&v| T::from(v).expect("f64 narrows"))
        .collect();
    ModelParams::from_flat(spec, values)
}

/// `1 - <a, b> / (|a| |b|)`, accumulated in `f64`.
///
/// Evaluated as `|a/|a| - b/|b||^2 / 2`, which is algebraically the same,
/// exactly zero for identical inputs and stays accurate near zero where
/// `1 - cos` cancels.
pub fn cosine_distance(a: &WeightVector, b: &WeightVector) -> Result<f64> {
    cosine_distance_slices(&a.values, &b.values)
}

pub fn cosine_distance_slices(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let sq: f64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x / na - y / nb;
            d * d
        })
        .sum();
    Ok((sq / 2.0).clamp(0.0, 2.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub epoch: usize,
    pub distance: f64,
}

/// Append-only per-epoch cosine distances to the initial weights.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RotationTrace {
    points: Vec<TracePoint>,
}

impl RotationTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn points(&self) -> &[TracePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last(&self) -> Option<&TracePoint> {
        self.points.last()
    }

    pub fn push(&mut self, epoch: usize, distance: f64) -> Result<()> {
        if let Some(last) = self.points.last() {
            if epoch <= last.epoch {
                return Err(Error::OutOfOrder {
                    last: last.epoch,
                    got: epoch,
                });
            }
        }
        if !(0.0..=2.0).contains(&distance) {
            return Err(Error::NonFinite(format!(
                "cosine distance {distance} outside [0, 2] at epoch {epoch}"
            )));
        }
        self.points.push(TracePoint { epoch, distance });
        Ok(())
    }

    /// Appends the distance between `params` and the initial weights.
    /// Returns the recorded distance.
    pub fn record_epoch<T: Real>(
        &mut self,
        epoch: usize,
        params: &ModelParams<T>,
        initial: &WeightVector,
    ) -> Result<f64> {
        let distance = cosine_distance(initial, &flatten(params))?;
        self.push(epoch, distance)?;
        Ok(distance)
    }

    /// Two columns, `epoch,cosine_distance`, with a header row.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "epoch,cosine_distance")?;
        for p in &self.points {
            writeln!(w, "{},{}", p.epoch, p.distance)?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("Vec write");
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    /// Parses the CSV produced by [`write_csv`]. An empty file, or a file
    /// with only the header, is an empty trace.
    ///
    /// [`write_csv`]: RotationTrace::write_csv
    pub fn read_csv(text: &str, origin: &Path) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let mut trace = RotationTrace::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || (i == 0 && line.starts_with("epoch")) {
                continue;
            }
            let mut fields = line.split(',').map(str::trim);
            let (Some(e), Some(d), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(err(line_no, format!("expected 2 fields, got {line:?}")));
            };
            let epoch: usize = e
                .parse()
                .map_err(|_| err(line_no, format!("bad epoch {e:?}")))?;
            let distance: f64 = d
                .parse()
                .map_err(|_| err(line_no, format!("bad distance {d:?}")))?;
            trace
                .push(epoch, distance)
                .map_err(|e| err(line_no, e.to_string()))?;
        }
        Ok(trace)
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(&text, path)
    }
}
