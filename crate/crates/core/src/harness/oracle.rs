//! Oracle sweep: for each candidate switch epoch `i`, resume the
//! checkpointed `k_pre` run at epoch `i` with `k_post` until the end.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::train::{checkpoint_path, resume, Experiment};
use crate::cost::normalized_cost;
use crate::engine::{evaluate, Checkpoint, ModelParams};
use crate::error::{Error, Result};
use crate::schedule::{build_schedule, ScheduleConfig, ScheduleMode};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleEntry {
    pub switch_epoch: usize,
    pub final_accuracy: f64,
    pub normalized_cost: f64,
    /// Cost above switching at epoch 0, in baseline units.
    pub extra_cost: f64,
}

fn switch_cost(exp: &Experiment, i: usize) -> Result<f64> {
    let c = &exp.config;
    let config = ScheduleConfig {
        mode: ScheduleMode::ReduceAtCritical,
        ..c.schedule
    };
    let schedule = build_schedule(&config, c.epochs, Some(i))?;
    normalized_cost(&schedule, exp.train.len(), c.schedule.k_pre)
}

/// Final accuracy after switching at `i`, resuming from the checkpoint in
/// `checkpoint_dir`.
pub fn oracle_candidate(exp: &Experiment, checkpoint_dir: &Path, i: usize) -> Result<OracleEntry> {
    let path = checkpoint_path(checkpoint_dir, i);
    if !path.is_file() {
        return Err(Error::MissingCheckpoint(i));
    }
    let ckpt = Checkpoint::load(&path)?;
    if ckpt.epoch as usize != i {
        return Err(Error::Checkpoint(format!(
            "{} holds epoch {}, expected {i}",
            path.display(),
            ckpt.epoch
        )));
    }
    let final_accuracy = if i == exp.config.epochs {
        let params = ModelParams::from_flat(&exp.spec, ckpt.params)?;
        evaluate(&params, &exp.spec, &exp.held_out)?
    } else {
        resume(exp, &ckpt, i, None)?.final_accuracy()
    };
    let cost = switch_cost(exp, i)?;
    Ok(OracleEntry {
        switch_epoch: i,
        final_accuracy,
        normalized_cost: cost,
        extra_cost: cost - switch_cost(exp, 0)?,
    })
}

/// Runs every candidate on up to `workers` threads. Results come back in
/// candidate order and do not depend on the worker count.
pub fn oracle_sweep(
    exp: &Experiment,
    checkpoint_dir: &Path,
    candidates: &[usize],
    workers: usize,
) -> Result<Vec<OracleEntry>> {
    if let Some(&bad) = candidates.iter().find(|&&i| i > exp.config.epochs) {
        return Err(Error::Config(format!(
            "candidate {bad} beyond {} epochs",
            exp.config.epochs
        )));
    }
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<OracleEntry>>>> =
        Mutex::new((0..candidates.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers.clamp(1, candidates.len().max(1)) {
            s.spawn(|| loop {
                let slot = next.fetch_add(1, Ordering::Relaxed);
                let Some(&i) = candidates.get(slot) else { break };
                let r = oracle_candidate(exp, checkpoint_dir, i);
                results.lock().expect("no poisoned workers")[slot] = Some(r);
            });
        }
    });
    results
        .into_inner()
        .expect("no poisoned workers")
        .into_iter()
        .map(|r| r.expect("every slot filled"))
        .collect()
}

pub fn write_oracle_csv(entries: &[OracleEntry], path: &Path) -> Result<()> {
    let mut text = String::from("switch_epoch,final_accuracy,normalized_cost,extra_cost\n");
    for e in entries {
        text.push_str(&format!(
            "{},{},{},{}\n",
            e.switch_epoch, e.final_accuracy, e.normalized_cost, e.extra_cost
        ));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{train, RunConfig, CHECKPOINT_DIR};

    fn config(dir: &Path) -> RunConfig {
        let mut c = RunConfig::parse(
            r#"
epochs = 4
batch_size = 16
checkpoints = true
[model]
hidden = [6]
[data]
format = "synthetic"
[data.synthetic]
kind = "blobs"
n = 60
classes = 3
dim = 3
seed = 5
noise = 0.2
[optimizer]
learning_rate = 0.05
"#,
        )
        .unwrap();
        c.output_dir = Some(dir.to_path_buf());
        c
    }

    #[test]
    fn boundary_candidates() {
        let dir = tempfile::tempdir().unwrap();
        let exp = Experiment::prepare(config(dir.path())).unwrap();
        let baseline = train(&exp).unwrap();
        let ckpts = dir.path().join(CHECKPOINT_DIR);
        let entries = oracle_sweep(&exp, &ckpts, &[0, 2, 4], 2).unwrap();
        assert_eq!(entries[2].final_accuracy, baseline.final_accuracy());
        assert_eq!(entries[2].normalized_cost, 1.0);
        assert!((entries[0].normalized_cost - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(entries[0].extra_cost, 0.0);

        let mut pure = exp.config.clone();
        pure.output_dir = None;
        pure.checkpoints = false;
        pure.schedule.mode = ScheduleMode::ReduceAtCritical;
        pure.switch_at = Some(0);
        let scratch = train(&Experiment::prepare(pure).unwrap()).unwrap();
        assert_eq!(entries[0].final_accuracy, scratch.final_accuracy());

        let serial = oracle_sweep(&exp, &ckpts, &[0, 2, 4], 1).unwrap();
        assert_eq!(serial, entries);
    }

    #[test]
    fn missing_checkpoint() {
        let dir = tempfile::tempdir().unwrap();
        let exp = Experiment::prepare(config(dir.path())).unwrap();
        assert!(matches!(
            oracle_candidate(&exp, dir.path(), 1),
            Err(Error::MissingCheckpoint(1))
        ));
        assert!(oracle_sweep(&exp, dir.path(), &[9], 1).is_err());
    }
}
