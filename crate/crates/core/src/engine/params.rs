use std::fmt::Debug;
use std::ops::Range;

use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::spec::ModelSpec;
use crate::error::{Error, Result};

/// Storage scalar for parameters and activations. Training uses `f32`;
/// gradient checks run the same code in `f64`.
pub trait Real: Float + Debug + Default + Send + Sync + 'static {
    fn to_bits_u64(self) -> u64;
}

impl Real for f32 {
    fn to_bits_u64(self) -> u64 {
        self.to_bits() as u64
    }
}

impl Real for f64 {
    fn to_bits_u64(self) -> u64 {
        self.to_bits()
    }
}

#[inline]
pub(crate) fn real<T: Real>(x: f64) -> T {
    T::from(x).expect("finite f64 converts")
}

#[inline]
pub(crate) fn wide<T: Real>(x: T) -> f64 {
    x.to_f64().expect("real widens to f64")
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerSlots {
    pub weight: Range<usize>,
    pub weight_shape: Vec<usize>,
    pub bias: Range<usize>,
}

/// Where each trainable layer's buffers live inside the flat parameter
/// vector. Order is spec order, weights then bias per layer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamLayout {
    slots: Vec<Option<LayerSlots>>,
    len: usize,
}

impl ParamLayout {
    pub fn new(spec: &ModelSpec) -> Result<Self> {
        spec.validate()?;
        let mut offset = 0;
        let slots = spec
            .layers
            .iter()
            .map(|layer| {
                layer.param_shapes().map(|(weight_shape, bias_len)| {
                    let w_len: usize = weight_shape.iter().product();
                    let weight = offset..offset + w_len;
                    let bias = weight.end..weight.end + bias_len;
                    offset = bias.end;
                    LayerSlots {
                        weight,
                        weight_shape,
                        bias,
                    }
                })
            })
            .collect();
        Ok(ParamLayout { slots, len: offset })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn layer(&self, idx: usize) -> Option<&LayerSlots> {
        self.slots.get(idx).and_then(Option::as_ref)
    }

    pub fn num_layers(&self) -> usize {
        self.slots.len()
    }
}

/// All trainable parameters of a model, stored as one flat buffer.
///
/// Gradients use the same type, so a gradient is "shaped like" the
/// parameters by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T = f32> {
    layout: ParamLayout,
    values: Vec<T>,
}

impl<T: Real> ModelParams<T> {
    pub fn zeros(spec: &ModelSpec) -> Result<Self> {
        let layout = ParamLayout::new(spec)?;
        let values = vec![T::zero(); layout.len()];
        Ok(ModelParams { layout, values })
    }

    /// Rebuilds parameters from a flat vector in layout order.
    pub fn from_flat(spec: &ModelSpec, values: Vec<T>) -> Result<Self> {
        let layout = ParamLayout::new(spec)?;
        if values.len() != layout.len() {
            return Err(Error::LengthMismatch(values.len(), layout.len()));
        }
        Ok(ModelParams { layout, values })
    }

    pub fn zeros_like(&self) -> Self {
        ModelParams {
            layout: self.layout.clone(),
            values: vec![T::zero(); self.values.len()],
        }
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn weight(&self, layer: usize) -> &[T] {
        let slots = self.layout.layer(layer).expect("trainable layer");
        &self.values[slots.weight.clone()]
    }

    pub fn bias(&self, layer: usize) -> &[T] {
        let slots = self.layout.layer(layer).expect("trainable layer");
        &self.values[slots.bias.clone()]
    }

    pub fn weight_shape(&self, layer: usize) -> &[usize] {
        &self.layout.layer(layer).expect("trainable layer").weight_shape
    }

    pub fn weight_mut(&mut self, layer: usize) -> &mut [T] {
        let range = self.layout.layer(layer).expect("trainable layer").weight.clone();
        &mut self.values[range]
    }

    pub fn bias_mut(&mut self, layer: usize) -> &mut [T] {
        let range = self.layout.layer(layer).expect("trainable layer").bias.clone();
        &mut self.values[range]
    }

    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        ModelParams {
            layout: self.layout.clone(),
            values: self.values.iter().map(|&v| real::<U>(wide(v))).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Order-sensitive hash of the raw bits, used to detect stale caches.
    pub(crate) fn content_hash(&self) -> u64 {
        // FNV-1a over the bit patterns.
        self.values.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, v| {
            (h ^ v.to_bits_u64()).wrapping_mul(0x0000_0100_0000_01b3)
        })
    }
}

/// Deterministic initialization: weights ~ U(-b, b) with b = sqrt(6 / fan_in)
/// (He-uniform, suited to ReLU stacks), biases zero. Draws happen in `f64`
/// and are rounded to `T`, so `f32` and `f64` models agree up to rounding.
pub fn init_params<T: Real>(spec: &ModelSpec, seed: u64) -> Result<ModelParams<T>> {
    let mut params = ModelParams::<T>::zeros(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (idx, layer) in spec.layers.iter().enumerate() {
        if !layer.is_trainable() {
            continue;
        }
        let bound = (6.0 / layer.fan_in() as f64).sqrt();
        for w in params.weight_mut(idx) {
            *w = real(rng.random_range(-bound..bound));
        }
    }
    Ok(params)
}
