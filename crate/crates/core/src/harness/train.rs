use std::path::{Path, PathBuf};
use std::time::Instant;

use super::config::RunConfig;
use super::log::{EpochRecord, LogLine, LogWriter, RunHeader, RunSummary, TrainRunLog};
use crate::data::{materialize_batches, plan_epoch, Dataset};
use crate::detector::{DetectionState, DetectorConfig};
use crate::engine::{
    backward, evaluate, forward, init_params, optimizer_step, Batch, Checkpoint, ModelParams,
    ModelSpec, OptimizerState,
};
use crate::error::{Error, Result};
use crate::rotation::{flatten, RotationTrace, WeightVector};
use crate::schedule::{build_schedule, RecipeSchedule, ScheduleConfig};

pub const LOG_FILE: &str = "log.jsonl";
pub const TRACE_FILE: &str = "trace.csv";
pub const PLOT_FILE: &str = "plot.csv";
pub const SCHEDULE_FILE: &str = "schedule.json";
pub const CHECKPOINT_DIR: &str = "checkpoints";

pub fn checkpoint_path(dir: &Path, epoch: usize) -> PathBuf {
    dir.join(format!("epoch-{epoch:04}.ckpt"))
}

/// A validated config with its data loaded and model resolved.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub config: RunConfig,
    pub spec: ModelSpec,
    pub train: Dataset,
    pub held_out: Dataset,
}

impl Experiment {
    pub fn prepare(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let (train, held_out) = config.load_data()?;
        let spec = config.model_spec(&train)?;
        Ok(Experiment {
            config,
            spec,
            train,
            held_out,
        })
    }

    pub fn initial_params(&self) -> Result<ModelParams<f32>> {
        init_params(&self.spec, self.config.seeds.init)
    }

    fn detector_config(&self) -> Option<DetectorConfig> {
        let d = self.config.detector_config();
        d.validate().ok().map(|_| d)
    }

    fn header(&self, start_epoch: usize) -> Result<RunHeader> {
        let mut shown = self.config.clone();
        shown.output_dir = None;
        Ok(RunHeader {
            config: serde_json::to_value(&shown)?,
            dataset: self.train.provenance().to_string(),
            train_samples: self.train.len(),
            held_out_samples: self.held_out.len(),
            parameters: self.initial_params()?.len(),
            spec_fingerprint: self.spec.fingerprint(),
            start_epoch,
        })
    }
}

/// Final state of a run.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub log: TrainRunLog,
    pub params: ModelParams<f32>,
    pub optimizer: OptimizerState<f32>,
    pub trace: RotationTrace,
    pub schedule: RecipeSchedule,
}

impl RunOutcome {
    pub fn final_accuracy(&self) -> f64 {
        self.log.final_accuracy().expect("completed run has a summary")
    }
}

struct Start {
    epoch: usize,
    params: ModelParams<f32>,
    optimizer: OptimizerState<f32>,
    schedule: RecipeSchedule,
    detect: bool,
}

/// Trains from initialization according to the config, writing outputs
/// when `output_dir` is set.
pub fn train(exp: &Experiment) -> Result<RunOutcome> {
    let c = &exp.config;
    let params = exp.initial_params()?;
    let start = Start {
        epoch: 0,
        optimizer: OptimizerState::new(&c.optimizer, params.len()),
        params,
        schedule: build_schedule(&c.schedule, c.epochs, c.switch_at)?,
        detect: true,
    };
    run(exp, start, c.output_dir.as_deref(), c.checkpoints)
}

/// Continues from `checkpoint` with the recipe switched at `switch_at`
/// (`k_pre` before, `k_post` from then on). Detection is off.
pub fn resume(
    exp: &Experiment,
    checkpoint: &Checkpoint,
    switch_at: usize,
    output_dir: Option<&Path>,
) -> Result<RunOutcome> {
    let c = &exp.config;
    if checkpoint.spec_fingerprint != exp.spec.fingerprint() {
        return Err(Error::Checkpoint("checkpoint belongs to a different model".into()));
    }
    if checkpoint.seeds != c.seeds {
        return Err(Error::Checkpoint("checkpoint was written with different seeds".into()));
    }
    let epoch = checkpoint.epoch as usize;
    if epoch > c.epochs {
        return Err(Error::Checkpoint(format!("checkpoint epoch {epoch} beyond {} epochs", c.epochs)));
    }
    let params = ModelParams::from_flat(&exp.spec, checkpoint.params.clone())?;
    let schedule_config = ScheduleConfig {
        mode: crate::schedule::ScheduleMode::ReduceAtCritical,
        ..c.schedule
    };
    let start = Start {
        epoch,
        params,
        optimizer: checkpoint.optimizer.clone(),
        schedule: build_schedule(&schedule_config, c.epochs, Some(switch_at))?,
        detect: false,
    };
    run(exp, start, output_dir, false)
}

fn diverged(epoch: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::NonFinite(message) => Error::Diverged { epoch, message },
        other => other,
    }
}

fn save_checkpoint(
    exp: &Experiment,
    dir: &Path,
    epoch: usize,
    params: &ModelParams<f32>,
    optimizer: &OptimizerState<f32>,
) -> Result<()> {
    Checkpoint {
        spec_fingerprint: exp.spec.fingerprint(),
        epoch: epoch as u64,
        seeds: exp.config.seeds,
        params: params.values().to_vec(),
        optimizer: optimizer.clone(),
    }
    .save(&checkpoint_path(dir, epoch))
}

fn run(exp: &Experiment, start: Start, out_dir: Option<&Path>, checkpoints: bool) -> Result<RunOutcome> {
    let clock = Instant::now();
    let c = &exp.config;
    let Start {
        epoch: first,
        mut params,
        mut optimizer,
        mut schedule,
        detect,
    } = start;

    let ckpt_dir = out_dir.map(|d| d.join(CHECKPOINT_DIR));
    let mut writer = match out_dir {
        Some(d) => {
            std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
            Some(LogWriter::create(&d.join(LOG_FILE))?)
        }
        None => None,
    };
    if checkpoints {
        let dir = ckpt_dir
            .as_deref()
            .ok_or_else(|| Error::Config("checkpoints need an output_dir".into()))?;
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut emit = |line: LogLine| -> Result<()> {
        match writer.as_mut() {
            Some(w) => w.write(&line),
            None => Ok(()),
        }
    };

    let mut log = TrainRunLog::new(exp.header(first)?);
    emit(LogLine::Header(log.header.clone()))?;

    let initial: WeightVector = flatten(&exp.initial_params()?).at_epoch(0);
    let detector_config = if detect { exp.detector_config() } else { None };
    let mut detector = DetectionState::new();
    let mut trace = RotationTrace::new();
    let mut last_accuracy = None;

    for epoch in first..c.epochs {
        if let Some(dir) = ckpt_dir.as_deref().filter(|_| checkpoints) {
            save_checkpoint(exp, dir, epoch, &params, &optimizer)?;
        }
        let tick = Instant::now();
        let k = schedule.effective_k(epoch)?;
        let plan = plan_epoch(exp.train.len(), k, c.seeds.data, epoch)?;
        let mut loss_sum = 0.0;
        for batch in materialize_batches(&exp.train, &plan, &c.augment, c.batch_size, c.seeds.augment)? {
            let fwd = forward(&params, &exp.spec, Batch::new(&batch.inputs, &batch.labels))
                .map_err(diverged(epoch))?;
            let grad = backward(&params, &exp.spec, &fwd.cache)?;
            optimizer_step(&mut params, &grad, &mut optimizer, &c.optimizer, epoch)
                .map_err(diverged(epoch))?;
            loss_sum += fwd.loss * batch.labels.len() as f64;
        }
        if !params.all_finite() {
            return Err(Error::Diverged {
                epoch,
                message: "parameters became non-finite".into(),
            });
        }
        let accuracy = evaluate(&params, &exp.spec, &exp.held_out)?;
        let distance = trace.record_epoch(epoch, &params, &initial)?;

        let mut angle = None;
        let mut event = None;
        if let Some(dc) = &detector_config {
            let out = detector.step(epoch, distance, dc)?;
            angle = out.angle;
            if let Some(ev) = out.fired {
                schedule.on_detection(ev.epoch)?;
                event = Some(ev);
            }
        }

        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / plan.len() as f64,
            val_accuracy: accuracy,
            cosine_distance: distance,
            angle_degrees: angle,
            k,
            samples: plan.len(),
            learning_rate: c.optimizer.learning_rate_at(epoch),
            wall_ms: tick.elapsed().as_secs_f64() * 1e3,
        };
        emit(LogLine::Epoch(record.clone()))?;
        log.epochs.push(record);
        if let Some(ev) = event {
            emit(LogLine::Detection(ev.clone()))?;
            log.detection = Some(ev);
        }
        last_accuracy = Some(accuracy);
    }
    if let Some(dir) = ckpt_dir.as_deref().filter(|_| checkpoints) {
        save_checkpoint(exp, dir, c.epochs, &params, &optimizer)?;
    }

    let final_accuracy = match last_accuracy {
        Some(a) => a,
        None => evaluate(&params, &exp.spec, &exp.held_out)?,
    };
    let summary = RunSummary {
        final_accuracy,
        total_samples: log.epochs.iter().map(|r| r.samples).sum(),
        critical_epoch: schedule.critical_epoch,
        schedule: schedule.clone(),
        wall_seconds: clock.elapsed().as_secs_f64(),
        report: None,
    };
    emit(LogLine::Summary(summary.clone()))?;
    log.summary = Some(summary);

    if let Some(d) = out_dir {
        trace.save_csv(&d.join(TRACE_FILE))?;
        write_plot_csv(&log, &d.join(PLOT_FILE))?;
        let text = serde_json::to_string_pretty(&schedule)?;
        let path = d.join(SCHEDULE_FILE);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }

    Ok(RunOutcome {
        log,
        params,
        optimizer,
        trace,
        schedule,
    })
}

/// `epoch,cosine_distance,angle_degrees`; the angle is blank until the
/// first window fills.
pub fn write_plot_csv(log: &TrainRunLog, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Config(e.to_string()))?;
    let csv_err = |e: csv::Error| Error::Config(format!("{}: {e}", path.display()));
    w.write_record(["epoch", "cosine_distance", "angle_degrees"]).map_err(csv_err)?;
    for r in &log.epochs {
        let angle = r.angle_degrees.map(|a| a.to_string()).unwrap_or_default();
        w.write_record([r.epoch.to_string(), r.cosine_distance.to_string(), angle])
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
