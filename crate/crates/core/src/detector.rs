//! Online detection of the end of the critical learning period.
//!
//! Each epoch contributes a point `(u, v)`: the epoch index and the cosine
//! distance to the initial weights, each divided by an axis scale. Over the
//! last `w` points we fit a least-squares line and turn its slope into an
//! angle in degrees. The detector arms once a window is at least as steep
//! as the threshold angle, then fires at the first later window that is
//! strictly shallower.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rotation::RotationTrace;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    pub window: usize,
    pub threshold_degrees: f64,
    pub total_epochs: usize,
    /// Divisor for the epoch axis. `None` means `total_epochs`.
    pub epoch_scale: Option<f64>,
    /// Divisor for the distance axis.
    pub distance_scale: f64,
    pub arm_before_fire: bool,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            window: 5,
            threshold_degrees: 45.0,
            total_epochs: 200,
            epoch_scale: None,
            distance_scale: 1.0,
            arm_before_fire: true,
        }
    }
}

impl DetectorConfig {
    pub fn for_epochs(total_epochs: usize) -> Self {
        DetectorConfig {
            total_epochs,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window < 2 {
            return Err(Error::Detector(format!("window {} < 2", self.window)));
        }
        if !(self.threshold_degrees > 0.0 && self.threshold_degrees < 90.0) {
            return Err(Error::Detector(format!(
                "threshold {} deg not in (0, 90)",
                self.threshold_degrees
            )));
        }
        if self.total_epochs < self.window {
            return Err(Error::Detector(format!(
                "total epochs {} shorter than window {}",
                self.total_epochs, self.window
            )));
        }
        let scale = self.epoch_axis_scale();
        if !(scale > 0.0 && scale.is_finite()) || !(self.distance_scale > 0.0 && self.distance_scale.is_finite()) {
            return Err(Error::Detector("axis scales must be positive".into()));
        }
        Ok(())
    }

    pub fn epoch_axis_scale(&self) -> f64 {
        self.epoch_scale.unwrap_or(self.total_epochs as f64)
    }
}

pub fn normalize_point(epoch: usize, distance: f64, config: &DetectorConfig) -> (f64, f64) {
    (
        epoch as f64 / config.epoch_axis_scale(),
        distance / config.distance_scale,
    )
}

/// Least-squares slope `sum((u - ū)(v - v̄)) / sum((u - ū)^2)`.
pub fn window_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::DegenerateWindow);
    }
    let n = points.len() as f64;
    let u_mean = points.iter().map(|p| p.0).sum::<f64>() / n;
    let v_mean = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut num, mut den) = (0.0, 0.0);
    for &(u, v) in points {
        num += (u - u_mean) * (v - v_mean);
        den += (u - u_mean) * (u - u_mean);
    }
    if den == 0.0 {
        return Err(Error::DegenerateWindow);
    }
    Ok(num / den)
}

pub fn angle_degrees(slope: f64) -> f64 {
    slope.atan().to_degrees()
}

/// Emitted once, when the detector fires.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvent {
    /// Newest epoch of the firing window.
    pub epoch: usize,
    /// `(epoch, angle)` for the most recent windows, oldest first, ending
    /// with the firing window.
    pub angles: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    /// Angle of the window ending at this epoch, once the window is full.
    pub angle: Option<f64>,
    pub fired: Option<DetectionEvent>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DetectionState {
    window: VecDeque<(usize, f64, f64)>,
    recent_angles: VecDeque<(usize, f64)>,
    armed: bool,
    fired: Option<usize>,
}

impl DetectionState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn armed(&self) -> bool {
        self.armed
    }

    pub fn fired_epoch(&self) -> Option<usize> {
        self.fired
    }

    /// Feeds one epoch's distance.
    pub fn step(&mut self, epoch: usize, distance: f64, config: &DetectorConfig) -> Result<StepOutcome> {
        if let Some(&(last, _, _)) = self.window.back() {
            if epoch <= last {
                return Err(Error::OutOfOrder { last, got: epoch });
            }
        }
        let (u, v) = normalize_point(epoch, distance, config);
        self.window.push_back((epoch, u, v));
        if self.window.len() > config.window {
            self.window.pop_front();
        }
        if self.window.len() < config.window {
            return Ok(StepOutcome {
                angle: None,
                fired: None,
            });
        }

        let points: Vec<(f64, f64)> = self.window.iter().map(|&(_, u, v)| (u, v)).collect();
        let angle = angle_degrees(window_slope(&points)?);
        self.recent_angles.push_back((epoch, angle));
        if self.recent_angles.len() > config.window {
            self.recent_angles.pop_front();
        }

        let mut fired = None;
        if self.fired.is_none() {
            if config.arm_before_fire && !self.armed {
                self.armed = angle >= config.threshold_degrees;
            } else if angle < config.threshold_degrees {
                self.fired = Some(epoch);
                fired = Some(DetectionEvent {
                    epoch,
                    angles: self.recent_angles.iter().copied().collect(),
                });
            }
        }
        Ok(StepOutcome {
            angle: Some(angle),
            fired,
        })
    }
}

/// Replays a stored trace through a fresh detector.
pub fn detect_offline(trace: &RotationTrace, config: &DetectorConfig) -> Result<Option<usize>> {
    config.validate()?;
    let mut state = DetectionState::new();
    for p in trace.points() {
        if let Some(event) = state.step(p.epoch, p.distance, config)?.fired {
            return Ok(Some(event.epoch));
        }
    }
    Ok(None)
}
