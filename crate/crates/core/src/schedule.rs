//! Per-epoch data factor schedules driven by the critical-period detector.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleMode {
    StaticBaseline,
    ReduceAtCritical,
    PruneAnneal,
}

impl ScheduleMode {
    pub fn name(self) -> &'static str {
        match self {
            ScheduleMode::StaticBaseline => "static-baseline",
            ScheduleMode::ReduceAtCritical => "reduce-at-critical",
            ScheduleMode::PruneAnneal => "prune-anneal",
        }
    }
}

impl fmt::Display for ScheduleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScheduleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "static-baseline" | "baseline" => Ok(ScheduleMode::StaticBaseline),
            "reduce-at-critical" | "reduce" => Ok(ScheduleMode::ReduceAtCritical),
            "prune-anneal" => Ok(ScheduleMode::PruneAnneal),
            other => Err(Error::Schedule(format!("unknown schedule mode {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseLabel {
    PreCritical,
    Reduced,
    Pruned,
    AnnealedRestore,
}

/// Epochs `[start, end)` trained with data factor `k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecipePhase {
    pub start: usize,
    pub end: usize,
    pub k: f64,
    pub label: PhaseLabel,
}

impl RecipePhase {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScheduleConfig {
    pub mode: ScheduleMode,
    pub k_pre: f64,
    pub k_post: f64,
    pub k_prune: f64,
    /// Fraction of the post-critical span trained on the pruned set.
    pub delta: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            mode: ScheduleMode::StaticBaseline,
            k_pre: 3.0,
            k_post: 1.0,
            k_prune: 0.01,
            delta: 1.0,
        }
    }
}

impl ScheduleConfig {
    pub fn with_mode(mode: ScheduleMode) -> Self {
        ScheduleConfig {
            mode,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, k) in [("k_pre", self.k_pre), ("k_post", self.k_post), ("k_prune", self.k_prune)] {
            if !(k > 0.0 && k.is_finite()) {
                return Err(Error::Schedule(format!("{name} = {k} must be > 0")));
            }
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::Schedule(format!("delta {} not in (0, 1]", self.delta)));
        }
        Ok(())
    }
}

/// Ordered phases covering `[0, total_epochs)` exactly once.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecipeSchedule {
    pub config: ScheduleConfig,
    pub total_epochs: usize,
    pub critical_epoch: Option<usize>,
    pub phases: Vec<RecipePhase>,
}

/// Builds the schedule for a known (or not yet known) critical epoch.
/// Without a critical epoch every mode trains at `k_pre` throughout.
pub fn build_schedule(
    config: &ScheduleConfig,
    total_epochs: usize,
    critical_epoch: Option<usize>,
) -> Result<RecipeSchedule> {
    config.validate()?;
    if total_epochs == 0 {
        return Err(Error::Schedule("total epochs must be >= 1".into()));
    }
    if let Some(i) = critical_epoch {
        if i > total_epochs {
            return Err(Error::Schedule(format!(
                "critical epoch {i} beyond {total_epochs} epochs"
            )));
        }
    }
    let n = total_epochs;
    let mut phases = Vec::with_capacity(3);
    let mut push = |start: usize, end: usize, k: f64, label: PhaseLabel| {
        if end > start {
            phases.push(RecipePhase { start, end, k, label });
        }
    };
    match (config.mode, critical_epoch) {
        (ScheduleMode::StaticBaseline, _) | (_, None) => {
            push(0, n, config.k_pre, PhaseLabel::PreCritical);
        }
        (ScheduleMode::ReduceAtCritical, Some(i)) => {
            push(0, i, config.k_pre, PhaseLabel::PreCritical);
            push(i, n, config.k_post, PhaseLabel::Reduced);
        }
        (ScheduleMode::PruneAnneal, Some(i)) => {
            let pruned = (config.delta * (n - i) as f64).floor() as usize;
            push(0, i, config.k_pre, PhaseLabel::PreCritical);
            push(i, i + pruned, config.k_prune, PhaseLabel::Pruned);
            push(i + pruned, n, config.k_pre, PhaseLabel::AnnealedRestore);
        }
    }
    Ok(RecipeSchedule {
        config: *config,
        total_epochs,
        critical_epoch,
        phases,
    })
}

impl RecipeSchedule {
    pub fn effective_k(&self, epoch: usize) -> Result<f64> {
        self.phase_at(epoch).map(|p| p.k)
    }

    pub fn phase_at(&self, epoch: usize) -> Result<&RecipePhase> {
        self.phases
            .iter()
            .find(|p| (p.start..p.end).contains(&epoch))
            .ok_or_else(|| {
                Error::Schedule(format!(
                    "epoch {epoch} outside schedule of {} epochs",
                    self.total_epochs
                ))
            })
    }

    /// One `k` per epoch.
    pub fn per_epoch_k(&self) -> Vec<f64> {
        self.phases
            .iter()
            .flat_map(|p| std::iter::repeat_n(p.k, p.len()))
            .collect()
    }

    /// Applies a detector firing at `fired_epoch`; the new recipe starts
    /// with the next epoch. Later calls leave the schedule unchanged, as
    /// does a static baseline.
    pub fn on_detection(&mut self, fired_epoch: usize) -> Result<bool> {
        if self.critical_epoch.is_some() || self.config.mode == ScheduleMode::StaticBaseline {
            return Ok(false);
        }
        let i = (fired_epoch + 1).min(self.total_epochs);
        *self = build_schedule(&self.config, self.total_epochs, Some(i))?;
        Ok(true)
    }

    pub fn check_coverage(&self) -> Result<()> {
        let mut next = 0;
        for p in &self.phases {
            if p.start != next || p.end <= p.start {
                return Err(Error::Schedule(format!("phase {p:?} breaks coverage at {next}")));
            }
            next = p.end;
        }
        if next != self.total_epochs {
            return Err(Error::Schedule(format!(
                "phases end at {next}, expected {}",
                self.total_epochs
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(mode: ScheduleMode, delta: f64) -> ScheduleConfig {
        ScheduleConfig {
            delta,
            ..ScheduleConfig::with_mode(mode)
        }
    }

    fn spans(s: &RecipeSchedule) -> Vec<(usize, usize, f64)> {
        s.phases.iter().map(|p| (p.start, p.end, p.k)).collect()
    }

    #[test]
    fn reduce_at_24() {
        let s = build_schedule(&cfg(ScheduleMode::ReduceAtCritical, 1.0), 200, Some(24)).unwrap();
        assert_eq!(spans(&s), vec![(0, 24, 3.0), (24, 200, 1.0)]);
        assert_eq!(s.effective_k(23).unwrap(), 3.0);
        assert_eq!(s.effective_k(24).unwrap(), 1.0);
    }

    #[test]
    fn prune_anneal_half() {
        let s = build_schedule(&cfg(ScheduleMode::PruneAnneal, 0.5), 200, Some(24)).unwrap();
        assert_eq!(spans(&s), vec![(0, 24, 3.0), (24, 112, 0.01), (112, 200, 3.0)]);
        assert_eq!(s.phases[2].label, PhaseLabel::AnnealedRestore);
    }

    #[test]
    fn full_delta_has_no_restore() {
        let s = build_schedule(&cfg(ScheduleMode::PruneAnneal, 1.0), 200, Some(24)).unwrap();
        assert_eq!(spans(&s), vec![(0, 24, 3.0), (24, 200, 0.01)]);
    }

    #[test]
    fn last_epoch_restored_at_delta_099() {
        let s = build_schedule(&cfg(ScheduleMode::PruneAnneal, 0.99), 200, Some(24)).unwrap();
        assert_eq!(s.phases[1].end, 198);
        assert_eq!(s.phase_at(199).unwrap().label, PhaseLabel::AnnealedRestore);
        assert!(s.effective_k(200).is_err());
    }

    #[test]
    fn baseline_ignores_detection() {
        let mut s = build_schedule(&ScheduleConfig::default(), 30, None).unwrap();
        assert!(!s.on_detection(5).unwrap());
        assert_eq!(spans(&s), vec![(0, 30, 3.0)]);
    }

    #[test]
    fn detection_takes_effect_next_epoch_once() {
        let mut s = build_schedule(&cfg(ScheduleMode::ReduceAtCritical, 1.0), 60, None).unwrap();
        assert_eq!(spans(&s), vec![(0, 60, 3.0)]);
        assert!(s.on_detection(23).unwrap());
        assert_eq!(s.critical_epoch, Some(24));
        let once = s.clone();
        assert!(!s.on_detection(40).unwrap());
        assert_eq!(s, once);
    }

    #[test]
    fn fired_at_last_epoch_elides_post_phase() {
        let mut s = build_schedule(&cfg(ScheduleMode::ReduceAtCritical, 1.0), 10, None).unwrap();
        s.on_detection(9).unwrap();
        assert_eq!(spans(&s), vec![(0, 10, 3.0)]);
        assert_eq!(s.critical_epoch, Some(10));
        let zero = build_schedule(&cfg(ScheduleMode::ReduceAtCritical, 1.0), 10, Some(0)).unwrap();
        assert_eq!(spans(&zero), vec![(0, 10, 1.0)]);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(build_schedule(&cfg(ScheduleMode::PruneAnneal, 0.0), 10, Some(2)).is_err());
        assert!(build_schedule(&cfg(ScheduleMode::PruneAnneal, 1.5), 10, Some(2)).is_err());
        assert!(build_schedule(&cfg(ScheduleMode::ReduceAtCritical, 1.0), 10, Some(11)).is_err());
        assert!(build_schedule(&cfg(ScheduleMode::ReduceAtCritical, 1.0), 0, None).is_err());
        assert!("sideways".parse::<ScheduleMode>().is_err());
        assert_eq!("prune-anneal".parse::<ScheduleMode>().unwrap(), ScheduleMode::PruneAnneal);
    }

    #[test]
    fn json_round_trip() {
        let s = build_schedule(&cfg(ScheduleMode::PruneAnneal, 0.5), 200, Some(24)).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.contains("\"annealed-restore\""));
        assert_eq!(serde_json::from_str::<RecipeSchedule>(&text).unwrap(), s);
    }

    proptest! {
        #[test]
        fn phases_cover_every_epoch(
            n in 1usize..400,
            frac in 0.0f64..=1.0,
            delta in 0.001f64..=1.0,
            mode in 0usize..3,
        ) {
            let mode = [ScheduleMode::StaticBaseline, ScheduleMode::ReduceAtCritical, ScheduleMode::PruneAnneal][mode];
            let i = ((n as f64) * frac).floor() as usize;
            let s = build_schedule(&cfg(mode, delta), n, Some(i)).unwrap();
            s.check_coverage().unwrap();
            prop_assert_eq!(s.per_epoch_k().len(), n);
            for e in 0..n {
                prop_assert!(s.effective_k(e).is_ok());
            }
        }
    }
}
