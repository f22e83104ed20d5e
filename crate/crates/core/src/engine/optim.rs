use serde::{Deserialize, Serialize};

use super::params::{real, wide, ModelParams, Real};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    AdamW,
    RmsProp,
    AdaGrad,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 4] = [
        OptimizerKind::Sgd,
        OptimizerKind::AdamW,
        OptimizerKind::RmsProp,
        OptimizerKind::AdaGrad,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::AdamW => "adamw",
            OptimizerKind::RmsProp => "rmsprop",
            OptimizerKind::AdaGrad => "adagrad",
        }
    }

    fn state_buffers(self, momentum: f64) -> usize {
        match self {
            OptimizerKind::Sgd if momentum == 0.0 => 0,
            OptimizerKind::Sgd | OptimizerKind::RmsProp | OptimizerKind::AdaGrad => 1,
            OptimizerKind::AdamW => 2,
        }
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OptimizerKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Optimizer(format!("unknown optimizer {s:?}")))
    }
}

/// Optimizer hyperparameters plus the step-decay learning-rate schedule.
///
/// Fields a given kind does not use are ignored. Defaults: plain SGD
/// (momentum 0, weight decay 0), lr 0.01, no decay.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub momentum: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Smoothing constant of the RMSprop square average.
    pub rho: f64,
    pub weight_decay: f64,
    /// Epochs at which the learning rate is divided by `decay_divisor`.
    pub decay_epochs: Vec<usize>,
    pub decay_divisor: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Sgd,
            learning_rate: 0.01,
            momentum: 0.0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            rho: 0.99,
            weight_decay: 0.0,
            decay_epochs: Vec::new(),
            decay_divisor: 10.0,
        }
    }
}

impl OptimizerConfig {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Self {
        OptimizerConfig {
            kind,
            learning_rate,
            ..Default::default()
        }
    }

    pub fn with_step_decay(mut self, epochs: Vec<usize>, divisor: f64) -> Self {
        self.decay_epochs = epochs;
        self.decay_divisor = divisor;
        self
    }

    pub fn validate(&self, total_epochs: usize) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Optimizer(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if !(self.decay_divisor > 1.0) {
            return Err(Error::Optimizer(format!(
                "decay divisor must be > 1, got {}",
                self.decay_divisor
            )));
        }
        if self.decay_epochs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Optimizer(
                "decay epochs must be strictly increasing".into(),
            ));
        }
        if let Some(&last) = self.decay_epochs.last() {
            if last >= total_epochs {
                return Err(Error::Optimizer(format!(
                    "decay epoch {last} not below total epochs {total_epochs}"
                )));
            }
        }
        if !(0.0..1.0).contains(&self.momentum)
            || !(0.0..1.0).contains(&self.beta1)
            || !(0.0..1.0).contains(&self.beta2)
            || !(0.0..1.0).contains(&self.rho)
        {
            return Err(Error::Optimizer(
                "momentum, beta1, beta2 and rho must lie in [0, 1)".into(),
            ));
        }
        if !(self.epsilon >= 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::Optimizer(
                "epsilon and weight decay must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Learning rate in force during `epoch`. Decay applies from the listed
    /// epoch onward.
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        let decays = self.decay_epochs.iter().filter(|&&e| e <= epoch).count();
        self.learning_rate / self.decay_divisor.powi(decays as i32)
    }
}

/// Per-parameter optimizer buffers plus the step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState<T = f32> {
    pub step: u64,
    /// Momentum / first moment / square average / accumulator, depending on
    /// the optimizer kind.
    pub buffers: Vec<Vec<T>>,
}

impl<T: Real> OptimizerState<T> {
    pub fn new(config: &OptimizerConfig, num_params: usize) -> Self {
        OptimizerState {
            step: 0,
            buffers: vec![vec![T::zero(); num_params]; config.kind.state_buffers(config.momentum)],
        }
    }
}

/// One update of `params` from a batch-averaged gradient.
///
/// Updates are computed in `f64` from the stored values and rounded back
/// to `T`. Non-finite gradients abort without touching `params`.
pub fn optimizer_step<T: Real>(
    params: &mut ModelParams<T>,
    grad: &ModelParams<T>,
    state: &mut OptimizerState<T>,
    config: &OptimizerConfig,
    epoch: usize,
) -> Result<()> {
    if grad.len() != params.len() {
        return Err(Error::LengthMismatch(grad.len(), params.len()));
    }
    let expected = config.kind.state_buffers(config.momentum);
    if state.buffers.len() != expected || state.buffers.iter().any(|b| b.len() != params.len()) {
        return Err(Error::Optimizer(format!(
            "optimizer state does not match {} with {} parameters",
            config.kind.name(),
            params.len()
        )));
    }
    if let Some(pos) = grad.values().iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!(
            "gradient entry {pos} = {:?} at step {}",
            grad.values()[pos],
            state.step
        )));
    }

    let lr = config.learning_rate_at(epoch);
    let wd = config.weight_decay;
    state.step += 1;
    let theta = params.values_mut();
    let g = grad.values();

    match config.kind {
        OptimizerKind::Sgd => {
            if config.momentum == 0.0 {
                for (p, &gi) in theta.iter_mut().zip(g) {
                    let gi = wide(gi) + wd * wide(*p);
                    *p = real(wide(*p) - lr * gi);
                }
            } else {
                let velocity = &mut state.buffers[0];
                for ((p, &gi), v) in theta.iter_mut().zip(g).zip(velocity.iter_mut()) {
                    let gi = wide(gi) + wd * wide(*p);
                    let vi = config.momentum * wide(*v) + gi;
                    *v = real(vi);
                    *p = real(wide(*p) - lr * vi);
                }
            }
        }
        OptimizerKind::AdamW => {
            let t = state.step as i32;
            let bc1 = 1.0 - config.beta1.powi(t);
            let bc2 = 1.0 - config.beta2.powi(t);
            let (first, rest) = state.buffers.split_at_mut(1);
            for (((p, &gi), m), v) in theta
                .iter_mut()
                .zip(g)
                .zip(first[0].iter_mut())
                .zip(rest[0].iter_mut())
            {
                let gi = wide(gi);
                let mi = config.beta1 * wide(*m) + (1.0 - config.beta1) * gi;
                let vi = config.beta2 * wide(*v) + (1.0 - config.beta2) * gi * gi;
                *m = real(mi);
                *v = real(vi);
                let mut pi = wide(*p);
                pi -= lr * wd * pi;
                pi -= lr * (mi / bc1) / ((vi / bc2).sqrt() + config.epsilon);
                *p = real(pi);
            }
        }
        OptimizerKind::RmsProp => {
            let square_avg = &mut state.buffers[0];
            for ((p, &gi), s) in theta.iter_mut().zip(g).zip(square_avg.iter_mut()) {
                let gi = wide(gi) + wd * wide(*p);
                let si = config.rho * wide(*s) + (1.0 - config.rho) * gi * gi;
                *s = real(si);
                *p = real(wide(*p) - lr * gi / (si.sqrt() + config.epsilon));
            }
        }
        OptimizerKind::AdaGrad => {
            let sum_sq = &mut state.buffers[0];
            for ((p, &gi), s) in theta.iter_mut().zip(g).zip(sum_sq.iter_mut()) {
                let gi = wide(gi) + wd * wide(*p);
                let si = wide(*s) + gi * gi;
                *s = real(si);
                *p = real(wide(*p) - lr * gi / (si.sqrt() + config.epsilon));
            }
        }
    }
    Ok(())
}
