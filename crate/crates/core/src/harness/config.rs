//! TOML run configuration.
//!
//! ```toml
//! epochs = 60
//! batch_size = 32
//! checkpoints = false        # per-epoch checkpoints for the oracle sweep
//! output_dir = "runs/live"   # optional; nothing is written without it
//! switch_at = 24             # optional; fixes the critical epoch up front
//!
//! [model]                    # either `hidden = [...]` (dense ReLU stack
//! hidden = [64, 64]          # sized from the data) or a full layer list
//!
//! [data]
//! format = "synthetic"       # synthetic | synthetic-file | idx | csv
//! holdout_fraction = 0.1     # carved from the training set
//! holdout_samples = 4000     # synthetic only: fresh held-out draw instead
//! [data.synthetic]
//! kind = "blobs"
//! n = 2000
//! classes = 10
//! dim = 16
//! seed = 7
//! noise = 0.2
//!
//! [optimizer]                # kind, learning_rate, momentum, ...
//! [seeds]                    # init, data, augment
//! [schedule]                 # mode, k_pre, k_post, k_prune, delta
//! [detector]                 # window, threshold_degrees, epoch_scale, ...
//! [augment]                  # flip, crop, rotation, translation
//! [emissions]                # power_watts, carbon_kg_per_kwh, price
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cost::EmissionAssumptions;
use crate::data::{load_dataset, AugmentPolicy, DataFormat, Dataset, SyntheticSpec};
use crate::detector::DetectorConfig;
use crate::engine::{ModelSpec, OptimizerConfig, RunSeeds};
use crate::error::{Error, Result};
use crate::schedule::ScheduleConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub model: ModelSource,
    pub data: DataConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub seeds: RunSeeds,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub detector: DetectorSettings,
    #[serde(default)]
    pub augment: AugmentPolicy,
    #[serde(default)]
    pub emissions: EmissionAssumptions,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub checkpoints: bool,
    #[serde(default)]
    pub switch_at: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSource {
    /// Path to a JSON model spec.
    File(PathBuf),
    Mlp(MlpShorthand),
    Inline(ModelSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpShorthand {
    pub hidden: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataKind {
    Synthetic,
    SyntheticFile,
    Idx,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub format: DataKind,
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub synthetic: Option<SyntheticSpec>,
    /// Reinterprets every sample with this shape, e.g. `[8, 8]`.
    #[serde(default)]
    pub reshape: Option<Vec<usize>>,
    #[serde(default = "default_holdout")]
    pub holdout_fraction: f64,
    #[serde(default)]
    pub holdout_samples: Option<usize>,
}

fn default_holdout() -> f64 {
    0.1
}

/// Detector settings; the planned epoch count comes from `epochs`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSettings {
    pub window: usize,
    pub threshold_degrees: f64,
    pub epoch_scale: Option<f64>,
    pub distance_scale: f64,
    pub arm_before_fire: bool,
}

impl Default for DetectorSettings {
    fn default() -> Self {
        let d = DetectorConfig::default();
        DetectorSettings {
            window: d.window,
            threshold_degrees: d.threshold_degrees,
            epoch_scale: d.epoch_scale,
            distance_scale: d.distance_scale,
            arm_before_fire: d.arm_before_fire,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(config)
    }

    /// Reads a config file. Relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::parse(&text)?;
        if let Some(base) = path.parent() {
            config.rebase(base);
        }
        Ok(config)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let ModelSource::File(p) = &mut self.model {
            fix(p);
        }
        if let Some(p) = &mut self.data.path {
            fix(p);
        }
        if let Some(p) = &mut self.output_dir {
            fix(p);
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn detector_config(&self) -> DetectorConfig {
        let d = self.detector;
        DetectorConfig {
            window: d.window,
            threshold_degrees: d.threshold_degrees,
            total_epochs: self.epochs,
            epoch_scale: d.epoch_scale,
            distance_scale: d.distance_scale,
            arm_before_fire: d.arm_before_fire,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        self.optimizer.validate(self.epochs)?;
        self.schedule.validate()?;
        self.augment.validate()?;
        self.emissions.validate()?;
        if self.epochs >= self.detector.window {
            self.detector_config().validate()?;
        }
        if let Some(i) = self.switch_at {
            if i > self.epochs {
                return Err(Error::Config(format!("switch_at {i} beyond {} epochs", self.epochs)));
            }
        }
        if let ModelSource::File(p) = &self.model {
            require_file(p)?;
        }
        let d = &self.data;
        match d.format {
            DataKind::Synthetic => {
                d.synthetic
                    .as_ref()
                    .ok_or_else(|| Error::Config("format synthetic needs a [data.synthetic] table".into()))?
                    .validate()?;
            }
            DataKind::SyntheticFile | DataKind::Idx | DataKind::Csv => {
                let p = d
                    .path
                    .as_ref()
                    .ok_or_else(|| Error::Config(format!("data format {:?} needs a path", d.format)))?;
                require_file(p)?;
            }
        }
        if d.holdout_samples.is_some() && !matches!(d.format, DataKind::Synthetic | DataKind::SyntheticFile) {
            return Err(Error::Config("holdout_samples only applies to synthetic data".into()));
        }
        if d.holdout_samples.is_none() && !(d.holdout_fraction > 0.0 && d.holdout_fraction < 1.0) {
            return Err(Error::Config(format!(
                "holdout_fraction {} not in (0, 1)",
                d.holdout_fraction
            )));
        }
        Ok(())
    }

    /// Loads the data and returns `(train, held_out)`.
    pub fn load_data(&self) -> Result<(Dataset, Dataset)> {
        let d = &self.data;
        let (train, held) = match d.format {
            DataKind::Synthetic | DataKind::SyntheticFile => {
                let spec = match (&d.synthetic, &d.path) {
                    (Some(spec), _) if d.format == DataKind::Synthetic => spec.clone(),
                    (_, Some(path)) => SyntheticSpec::from_file(path)?,
                    _ => return Err(Error::Config("synthetic data source missing".into())),
                };
                let full = spec.generate()?;
                match d.holdout_samples {
                    Some(m) => (full, spec.generate_holdout(m, 0)?),
                    None => full.split_holdout(d.holdout_fraction, self.seeds.data)?,
                }
            }
            DataKind::Idx | DataKind::Csv => {
                let format = if d.format == DataKind::Idx {
                    DataFormat::Idx
                } else {
                    DataFormat::Csv
                };
                let path = d.path.as_ref().ok_or_else(|| Error::Config("data path missing".into()))?;
                load_dataset(path, format)?.split_holdout(d.holdout_fraction, self.seeds.data)?
            }
        };
        match &d.reshape {
            Some(shape) => Ok((train.reshaped(shape.clone())?, held.reshaped(shape.clone())?)),
            None => Ok((train, held)),
        }
    }

    /// Resolves the model against the loaded data's shape and class count.
    pub fn model_spec(&self, data: &Dataset) -> Result<ModelSpec> {
        let spec = match &self.model {
            ModelSource::File(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                serde_json::from_str(&text)?
            }
            ModelSource::Mlp(m) => ModelSpec::mlp_for_shape(data.shape(), &m.hidden, data.classes()),
            ModelSource::Inline(spec) => spec.clone(),
        };
        spec.validate()?;
        if spec.input_len() != data.sample_len() {
            return Err(Error::Config(format!(
                "model input {:?} does not fit samples of shape {:?}",
                spec.input_shape,
                data.shape()
            )));
        }
        if spec.classes != data.classes() {
            return Err(Error::Config(format!(
                "model has {} classes, data has {}",
                spec.classes,
                data.classes()
            )));
        }
        Ok(spec)
    }
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Config(format!("{} does not exist", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
epochs = 12
batch_size = 16

[model]
hidden = [8]

[data]
format = "synthetic"
[data.synthetic]
kind = "blobs"
n = 100
classes = 3
dim = 4
seed = 1
noise = 0.1
"#;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        c.validate().unwrap();
        assert_eq!(c.model, ModelSource::Mlp(MlpShorthand { hidden: vec![8] }));
        assert_eq!(c.data.holdout_fraction, 0.1);
        assert_eq!(c.detector_config().total_epochs, 12);
        assert_eq!(c.schedule.k_pre, 3.0);
        let (train, val) = c.load_data().unwrap();
        assert_eq!((train.len(), val.len()), (90, 10));
        let spec = c.model_spec(&train).unwrap();
        assert_eq!(spec.input_shape, vec![4]);
        assert_eq!(RunConfig::parse(&c.to_toml().unwrap()).unwrap(), c);
    }

    #[test]
    fn rejects_unknown_keys_and_missing_files() {
        assert!(RunConfig::parse(&format!("colour = 1\n{MINIMAL}")).is_err());
        let c = RunConfig::parse(&MINIMAL.replace(
            "format = \"synthetic\"",
            "format = \"csv\"\npath = \"/nonexistent/x.csv\"",
        ))
        .unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn fresh_holdout_and_reshape() {
        let text = MINIMAL.replace("format = \"synthetic\"", "format = \"synthetic\"\nholdout_samples = 30\nreshape = [2, 2]");
        let c = RunConfig::parse(&text).unwrap();
        c.validate().unwrap();
        let (train, val) = c.load_data().unwrap();
        assert_eq!((train.len(), val.len()), (100, 30));
        assert_eq!(train.shape(), &[2, 2]);
    }
}
