//! Minimal deterministic feed-forward training engine.

mod checkpoint;
mod network;
mod optim;
mod params;
mod spec;

pub use checkpoint::{Checkpoint, RunSeeds, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use network::{argmax, backward, forward, predict, Batch, Forward, ForwardCache};
pub use optim::{optimizer_step, OptimizerConfig, OptimizerKind, OptimizerState};
pub use params::{init_params, LayerSlots, ModelParams, ParamLayout, Real};
pub use spec::{LayerSpec, ModelSpec};

use crate::data::Dataset;
use crate::error::{Error, Result};

const EVAL_CHUNK: usize = 256;

/// Fraction of samples whose argmax prediction equals the label.
/// Ties in the logits resolve to the lowest class index.
pub fn evaluate<T: Real>(params: &ModelParams<T>, spec: &ModelSpec, dataset: &Dataset) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::Dataset("cannot evaluate on an empty dataset".into()));
    }
    if dataset.sample_len() != spec.input_len() {
        return Err(Error::Shape(format!(
            "dataset samples have shape {:?}, model expects {:?}",
            dataset.shape(),
            spec.input_shape
        )));
    }
    let mut correct = 0usize;
    let mut start = 0;
    while start < dataset.len() {
        let end = (start + EVAL_CHUNK).min(dataset.len());
        let inputs: Vec<T> = dataset
            .samples_range(start..end)
            .iter()
            .map(|&v| T::from(v).expect("f32 converts"))
            .collect();
        let logits = predict(params, spec, &inputs, end - start)?;
        correct += logits
            .chunks_exact(spec.classes)
            .zip(&dataset.labels()[start..end])
            .filter(|(row, &label)| argmax(row) == label as usize)
            .count();
        start = end;
    }
    Ok(correct as f64 / dataset.len() as f64)
}
