use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use super::augment::{augment_sample, AugmentPolicy};
use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::seed;

/// Which samples an epoch visits and with which transform seeds.
///
/// Integer `k >= 1` repeats every index `k` times (the copies get distinct
/// seeds, so each is transformed differently). `k < 1` draws a fresh
/// uniform subset of `round(k * n)` indices without replacement. A
/// fractional `k > 1` combines both: `floor(k)` full copies plus a subset
/// for the remainder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochDataPlan {
    pub epoch: usize,
    pub k: f64,
    pub indices: Vec<u32>,
    pub seeds: Vec<u64>,
    pub shuffle_seed: u64,
}

impl EpochDataPlan {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Rounds half away from zero.
pub fn round_half_away(x: f64) -> usize {
    x.round() as usize
}

/// Number of samples an epoch with factor `k` visits out of `n`.
pub fn epoch_size(n: usize, k: f64) -> usize {
    let whole = k.floor();
    let frac = k - whole;
    whole as usize * n + round_half_away(frac * n as f64)
}

pub fn plan_epoch(n: usize, k: f64, run_seed: u64, epoch: usize) -> Result<EpochDataPlan> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::Dataset(format!("augmentation factor k = {k} must be > 0")));
    }
    let size = epoch_size(n, k);
    if size == 0 {
        return Err(Error::EmptyEpoch { k, n });
    }
    let copies = k.floor() as usize;
    let mut indices: Vec<u32> = Vec::with_capacity(size);
    for _ in 0..copies {
        indices.extend(0..n as u32);
    }
    let extra = size - copies * n;
    if extra > 0 {
        let mut rng = seed::rng_for(run_seed, &[seed::STREAM_SUBSET, epoch as u64]);
        let mut chosen: Vec<u32> = index::sample(&mut rng, n, extra)
            .into_iter()
            .map(|i| i as u32)
            .collect();
        chosen.sort_unstable();
        indices.extend(chosen);
    }
    let seeds = (0..indices.len() as u64)
        .map(|j| seed::derive_seed(run_seed, &[seed::STREAM_TRANSFORM, epoch as u64, j]))
        .collect();
    Ok(EpochDataPlan {
        epoch,
        k,
        indices,
        seeds,
        shuffle_seed: seed::derive_seed(run_seed, &[seed::STREAM_SHUFFLE, epoch as u64]),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct OwnedBatch {
    pub inputs: Vec<f32>,
    pub labels: Vec<u32>,
}

/// Lazily materialized, shuffled, augmented batches for one epoch.
pub struct BatchStream<'a> {
    dataset: &'a Dataset,
    plan: &'a EpochDataPlan,
    policy: AugmentPolicy,
    augment_seed: u64,
    order: Vec<usize>,
    batch_size: usize,
    cursor: usize,
}

impl Iterator for BatchStream<'_> {
    type Item = OwnedBatch;

    fn next(&mut self) -> Option<OwnedBatch> {
        if self.cursor >= self.order.len() {
            return None;
        }
        let end = (self.cursor + self.batch_size).min(self.order.len());
        let len = self.dataset.sample_len();
        let mut inputs = Vec::with_capacity((end - self.cursor) * len);
        let mut labels = Vec::with_capacity(end - self.cursor);
        for &slot in &self.order[self.cursor..end] {
            let idx = self.plan.indices[slot] as usize;
            let seed = self.plan.seeds[slot] ^ self.augment_seed;
            inputs.extend(augment_sample(
                self.dataset.sample(idx),
                self.dataset.shape(),
                &self.policy,
                seed,
            ));
            labels.push(self.dataset.labels()[idx]);
        }
        self.cursor = end;
        Some(OwnedBatch { inputs, labels })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.order.len() - self.cursor).div_ceil(self.batch_size);
        (left, Some(left))
    }
}

/// Shuffles the plan with its epoch seed and yields batches of
/// `batch_size` (the last may be short). `augment_seed` is mixed into every
/// per-sample transform seed.
pub fn materialize_batches<'a>(
    dataset: &'a Dataset,
    plan: &'a EpochDataPlan,
    policy: &AugmentPolicy,
    batch_size: usize,
    augment_seed: u64,
) -> Result<BatchStream<'a>> {
    if batch_size == 0 {
        return Err(Error::Dataset("batch size must be >= 1".into()));
    }
    if plan.indices.len() != plan.seeds.len() {
        return Err(Error::Dataset("plan has mismatched index and seed lists".into()));
    }
    if let Some(&bad) = plan.indices.iter().find(|&&i| i as usize >= dataset.len()) {
        return Err(Error::Dataset(format!(
            "plan index {bad} out of bounds for {} samples",
            dataset.len()
        )));
    }
    policy.validate()?;
    let mut order: Vec<usize> = (0..plan.len()).collect();
    order.shuffle(&mut seed::rng_for(plan.shuffle_seed, &[]));
    Ok(BatchStream {
        dataset,
        plan,
        policy: *policy,
        augment_seed: seed::derive_seed(augment_seed, &[plan.epoch as u64]),
        order,
        batch_size,
        cursor: 0,
    })
}
