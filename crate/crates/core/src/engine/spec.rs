use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// One layer of a feed-forward model.
///
/// Convolutions are stride 1 with `padding` zero-filled pixels on every side.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LayerSpec {
    Dense {
        inputs: usize,
        outputs: usize,
    },
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        #[serde(default)]
        padding: usize,
    },
    Relu,
    Flatten,
    /// Softmax cross-entropy loss head. Must be the final layer.
    SoftmaxCrossEntropy,
}

impl LayerSpec {
    pub fn is_trainable(&self) -> bool {
        matches!(self, LayerSpec::Dense { .. } | LayerSpec::Conv2d { .. })
    }

    /// Weight buffer shape and bias length, for trainable layers.
    pub fn param_shapes(&self) -> Option<(Vec<usize>, usize)> {
        match *self {
            LayerSpec::Dense { inputs, outputs } => Some((vec![inputs, outputs], outputs)),
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => Some((vec![out_channels, in_channels, kernel, kernel], out_channels)),
            _ => None,
        }
    }

    /// Number of inputs feeding each output unit.
    pub fn fan_in(&self) -> usize {
        match *self {
            LayerSpec::Dense { inputs, .. } => inputs,
            LayerSpec::Conv2d {
                in_channels,
                kernel,
                ..
            } => in_channels * kernel * kernel,
            _ => 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    /// `[features]` for vector inputs or `[channels, height, width]` for images.
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerSpec>,
    pub classes: usize,
}

impl ModelSpec {
    /// Dense ReLU network ending in a softmax cross-entropy head.
    pub fn mlp(inputs: usize, hidden: &[usize], classes: usize) -> Self {
        let mut layers = Vec::new();
        let mut width = inputs;
        for &h in hidden {
            layers.push(LayerSpec::Dense {
                inputs: width,
                outputs: h,
            });
            layers.push(LayerSpec::Relu);
            width = h;
        }
        layers.push(LayerSpec::Dense {
            inputs: width,
            outputs: classes,
        });
        layers.push(LayerSpec::SoftmaxCrossEntropy);
        ModelSpec {
            input_shape: vec![inputs],
            layers,
            classes,
        }
    }

    /// [`ModelSpec::mlp`] for samples of any shape, flattening first when
    /// the shape has more than one axis.
    pub fn mlp_for_shape(shape: &[usize], hidden: &[usize], classes: usize) -> Self {
        let mut spec = Self::mlp(shape.iter().product(), hidden, classes);
        if shape.len() > 1 {
            spec.layers.insert(0, LayerSpec::Flatten);
            spec.input_shape = shape.to_vec();
        }
        spec
    }

    pub fn input_len(&self) -> usize {
        self.input_shape.iter().product()
    }

    /// Checks that adjacent layers compose and returns the activation shape
    /// entering each layer, followed by the final output shape.
    pub fn shapes(&self) -> Result<Vec<Vec<usize>>> {
        if self.classes < 2 {
            return Err(Error::Spec(format!("class count {} < 2", self.classes)));
        }
        if self.input_shape.is_empty() || self.input_shape.contains(&0) {
            return Err(Error::Spec(format!(
                "input shape {:?} has no elements",
                self.input_shape
            )));
        }
        if !self.layers.iter().any(LayerSpec::is_trainable) {
            return Err(Error::Spec("model has no trainable layer".into()));
        }
        match self.layers.last() {
            Some(LayerSpec::SoftmaxCrossEntropy) => {}
            _ => {
                return Err(Error::Spec(
                    "last layer must be the softmax cross-entropy head".into(),
                ))
            }
        }

        let mut shapes = Vec::with_capacity(self.layers.len() + 1);
        let mut shape = self.input_shape.clone();
        for (idx, layer) in self.layers.iter().enumerate() {
            shapes.push(shape.clone());
            shape = match *layer {
                LayerSpec::Dense { inputs, outputs } => {
                    if shape != [inputs] {
                        return Err(Error::Spec(format!(
                            "layer {idx}: dense expects [{inputs}], got {shape:?}"
                        )));
                    }
                    if outputs == 0 {
                        return Err(Error::Spec(format!("layer {idx}: dense with 0 outputs")));
                    }
                    vec![outputs]
                }
                LayerSpec::Conv2d {
                    in_channels,
                    out_channels,
                    kernel,
                    padding,
                } => {
                    let &[c, h, w] = shape.as_slice() else {
                        return Err(Error::Spec(format!(
                            "layer {idx}: conv2d expects [c, h, w], got {shape:?}"
                        )));
                    };
                    if c != in_channels || kernel == 0 || out_channels == 0 {
                        return Err(Error::Spec(format!(
                            "layer {idx}: conv2d {in_channels}->{out_channels} k{kernel} incompatible with {shape:?}"
                        )));
                    }
                    if h + 2 * padding < kernel || w + 2 * padding < kernel {
                        return Err(Error::Spec(format!(
                            "layer {idx}: kernel {kernel} larger than padded input {shape:?}"
                        )));
                    }
                    vec![
                        out_channels,
                        h + 2 * padding - kernel + 1,
                        w + 2 * padding - kernel + 1,
                    ]
                }
                LayerSpec::Relu => shape,
                LayerSpec::Flatten => vec![shape.iter().product()],
                LayerSpec::SoftmaxCrossEntropy => {
                    if idx + 1 != self.layers.len() {
                        return Err(Error::Spec(format!(
                            "layer {idx}: loss head must be last"
                        )));
                    }
                    if shape != [self.classes] {
                        return Err(Error::Spec(format!(
                            "loss head expects [{}] logits, got {shape:?}",
                            self.classes
                        )));
                    }
                    shape
                }
            };
        }
        shapes.push(shape);
        Ok(shapes)
    }

    pub fn validate(&self) -> Result<()> {
        self.shapes().map(|_| ())
    }

    /// Stable 64-bit fingerprint of the model, stored in checkpoints.
    pub fn fingerprint(&self) -> u64 {
        let bytes = serde_json::to_vec(self).expect("model spec serializes");
        let digest = Sha256::digest(&bytes);
        u64::from_le_bytes(digest[..8].try_into().unwrap())
    }
}
