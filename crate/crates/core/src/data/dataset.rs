use std::ops::Range;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;

use super::synthetic::SyntheticSpec;
use crate::error::{Error, Result};
use crate::seed;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Labelled samples stored contiguously, one row of `sample_len` values each.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    samples: Vec<f32>,
    shape: Vec<usize>,
    labels: Vec<u32>,
    classes: usize,
    provenance: String,
}

impl Dataset {
    pub fn new(
        samples: Vec<f32>,
        shape: Vec<usize>,
        labels: Vec<u32>,
        classes: usize,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        let sample_len: usize = shape.iter().product();
        if labels.is_empty() {
            return Err(Error::Dataset("dataset has no samples".into()));
        }
        if sample_len == 0 {
            return Err(Error::Dataset(format!("sample shape {shape:?} is empty")));
        }
        if samples.len() != labels.len() * sample_len {
            return Err(Error::Dataset(format!(
                "{} values for {} samples of shape {shape:?}",
                samples.len(),
                labels.len()
            )));
        }
        if classes < 2 {
            return Err(Error::Dataset(format!("class count {classes} < 2")));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= classes) {
            return Err(Error::Dataset(format!(
                "label {bad} out of range for {classes} classes"
            )));
        }
        Ok(Dataset {
            samples,
            shape,
            labels,
            classes,
            provenance: provenance.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn sample_len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn sample(&self, idx: usize) -> &[f32] {
        let len = self.sample_len();
        &self.samples[idx * len..(idx + 1) * len]
    }

    pub fn samples_range(&self, range: Range<usize>) -> &[f32] {
        let len = self.sample_len();
        &self.samples[range.start * len..range.end * len]
    }

    /// Same data under a different shape with the same element count.
    pub fn reshaped(mut self, shape: Vec<usize>) -> Result<Self> {
        if shape.iter().product::<usize>() != self.sample_len() {
            return Err(Error::Dataset(format!(
                "cannot reshape {:?} to {shape:?}",
                self.shape
            )));
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut samples = Vec::with_capacity(indices.len() * self.sample_len());
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::Dataset(format!("index {i} out of bounds")));
            }
            samples.extend_from_slice(self.sample(i));
            labels.push(self.labels[i]);
        }
        Dataset::new(
            samples,
            self.shape.clone(),
            labels,
            self.classes,
            self.provenance.clone(),
        )
    }

    /// Deterministically carves `fraction` of the samples into a held-out
    /// set. Returns `(train, held_out)`, both in original relative order.
    pub fn split_holdout(&self, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::Dataset(format!(
                "hold-out fraction {fraction} not in (0, 1)"
            )));
        }
        let held = (fraction * self.len() as f64).round() as usize;
        if held == 0 || held == self.len() {
            return Err(Error::Dataset(format!(
                "hold-out fraction {fraction} leaves an empty split of {} samples",
                self.len()
            )));
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut seed::rng_for(seed, &[seed::STREAM_SPLIT]));
        let mut val: Vec<usize> = order[..held].to_vec();
        let mut train: Vec<usize> = order[held..].to_vec();
        val.sort_unstable();
        train.sort_unstable();
        Ok((self.subset(&train)?, self.subset(&val)?))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataFormat {
    Idx,
    Csv,
    Synthetic,
}

impl std::str::FromStr for DataFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "idx" => Ok(DataFormat::Idx),
            "csv" => Ok(DataFormat::Csv),
            "synthetic" | "synthetic-spec" => Ok(DataFormat::Synthetic),
            other => Err(Error::Dataset(format!("unknown data format {other:?}"))),
        }
    }
}

/// Loads a dataset with all sample values in `[0, 1]`.
///
/// For `Idx`, `path` names the images file; the labels file is found by
/// replacing `images-idx3` with `labels-idx1` in the file name (MNIST
/// naming). Use [`load_idx`] to pass both paths explicitly.
pub fn load_dataset(path: &Path, format: DataFormat) -> Result<Dataset> {
    match format {
        DataFormat::Idx => {
            let name = path
                .file_name()
                .and_then(|n| n.to_str())
                .ok_or_else(|| Error::Dataset(format!("bad IDX path {path:?}")))?;
            if !name.contains("images-idx3") {
                return Err(Error::Dataset(format!(
                    "cannot infer labels file for {path:?}; expected a name containing images-idx3"
                )));
            }
            let labels = path.with_file_name(name.replace("images-idx3", "labels-idx1"));
            load_idx(path, &labels)
        }
        DataFormat::Csv => load_csv(path),
        DataFormat::Synthetic => SyntheticSpec::from_file(path)?.generate(),
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Parses an unsigned-byte IDX file, returning its dimensions and payload.
fn parse_idx(bytes: &[u8], magic: u32, path: &Path) -> Result<(Vec<usize>, Vec<u8>)> {
    let bad = |message: String| Error::Parse {
        path: PathBuf::from(path),
        line: 0,
        message,
    };
    if bytes.len() < 4 {
        return Err(bad("file shorter than the IDX magic".into()));
    }
    let found = u32::from_be_bytes(bytes[..4].try_into().unwrap());
    if found != magic {
        return Err(bad(format!("magic 0x{found:08x}, expected 0x{magic:08x}")));
    }
    let ndims = (magic & 0xff) as usize;
    let header = 4 + 4 * ndims;
    if bytes.len() < header {
        return Err(bad("truncated IDX header".into()));
    }
    let dims: Vec<usize> = bytes[4..header]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes(c.try_into().unwrap()) as usize)
        .collect();
    let total: usize = dims.iter().product();
    if bytes.len() - header != total {
        return Err(bad(format!(
            "dimensions {dims:?} need {total} bytes, found {}",
            bytes.len() - header
        )));
    }
    Ok((dims, bytes[header..].to_vec()))
}

/// Reads an MNIST-style pair of IDX files (`0x00000803` images,
/// `0x00000801` labels). Samples get shape `[rows, cols]`, scaled by 1/255.
pub fn load_idx(images: &Path, labels: &Path) -> Result<Dataset> {
    let (dims, pixels) = parse_idx(&read_file(images)?, IDX_IMAGES_MAGIC, images)?;
    let (label_dims, raw_labels) = parse_idx(&read_file(labels)?, IDX_LABELS_MAGIC, labels)?;
    if label_dims[0] != dims[0] {
        return Err(Error::Dataset(format!(
            "{} images but {} labels",
            dims[0], label_dims[0]
        )));
    }
    let labels: Vec<u32> = raw_labels.into_iter().map(u32::from).collect();
    let classes = labels.iter().max().map_or(0, |&m| m as usize + 1).max(2);
    let samples = pixels.into_iter().map(|p| p as f32 / 255.0).collect();
    Dataset::new(
        samples,
        dims[1..].to_vec(),
        labels,
        classes,
        format!("idx:{}", images.display()),
    )
}

/// Reads a CSV file with a header row and an integer `label` column; every
/// other column is a feature, in file order.
///
/// Feature values already inside `[0, 1]` are kept as-is; otherwise each
/// column is min-max scaled to `[0, 1]` (constant columns become 0).
pub fn load_csv(path: &Path) -> Result<Dataset> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_err(0, e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    let label_col = headers
        .iter()
        .position(|h| h == "label")
        .ok_or_else(|| parse_err(1, "no column named \"label\"".into()))?;
    let width = headers.len();
    let features = width - 1;
    if features == 0 {
        return Err(parse_err(1, "no feature columns".into()));
    }

    let mut values: Vec<f64> = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| parse_err(line, e.to_string()))?;
        if record.len() != width {
            return Err(parse_err(
                line,
                format!("{} fields, header has {width}", record.len()),
            ));
        }
        for (col, field) in record.iter().enumerate() {
            if col == label_col {
                let label: u32 = field
                    .parse()
                    .map_err(|_| parse_err(line, format!("label {field:?} is not a class index")))?;
                labels.push(label);
            } else {
                let v: f64 = field
                    .parse()
                    .map_err(|_| parse_err(line, format!("column {col}: {field:?} is not a number")))?;
                if !v.is_finite() {
                    return Err(parse_err(line, format!("column {col}: non-finite value")));
                }
                values.push(v);
            }
        }
    }
    if labels.is_empty() {
        return Err(Error::Dataset(format!("{} has no data rows", path.display())));
    }

    if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
        for col in 0..features {
            let column = values.iter().skip(col).step_by(features);
            let (lo, hi) = column.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
            let span = hi - lo;
            for v in values.iter_mut().skip(col).step_by(features) {
                *v = if span > 0.0 { (*v - lo) / span } else { 0.0 };
            }
        }
    }

    let classes = labels.iter().max().map_or(0, |&m| m as usize + 1).max(2);
    Dataset::new(
        values.into_iter().map(|v| v as f32).collect(),
        vec![features],
        labels,
        classes,
        format!("csv:{}", path.display()),
    )
}
