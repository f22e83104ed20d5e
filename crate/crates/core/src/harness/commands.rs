//! Offline commands over stored artifacts.

use std::path::Path;

use crate::cost::{build_report, EmissionAssumptions, ReportInputs, RunReport};
use crate::detector::{detect_offline, DetectorConfig};
use crate::error::{Error, Result};
use crate::rotation::RotationTrace;

use super::log::TrainRunLog;

/// Replays the detector over a trace CSV.
pub fn cmd_detect(trace_path: &Path, config: &DetectorConfig) -> Result<Option<usize>> {
    let trace = RotationTrace::load_csv(trace_path)?;
    detect_offline(&trace, config)
}

/// Compares a run against a baseline. Cost is the ratio of the samples
/// the two runs consumed, which for a static baseline at `k` equals
/// dividing by `N * k * n`.
pub fn compare_logs(
    label: &str,
    run: &TrainRunLog,
    baseline: &TrainRunLog,
    assumptions: &EmissionAssumptions,
) -> Result<RunReport> {
    let (Some(r), Some(b)) = (&run.summary, &baseline.summary) else {
        return Err(Error::Cost("both logs must be complete".into()));
    };
    if run.epochs.len() != baseline.epochs.len() {
        return Err(Error::Cost(format!(
            "run has {} epochs, baseline {}",
            run.epochs.len(),
            baseline.epochs.len()
        )));
    }
    if run.header.train_samples != baseline.header.train_samples {
        return Err(Error::Cost("run and baseline use different training sets".into()));
    }
    if b.total_samples == 0 {
        return Err(Error::Cost("baseline consumed no samples".into()));
    }
    build_report(
        &ReportInputs {
            label,
            baseline_accuracy: b.final_accuracy,
            run_accuracy: r.final_accuracy,
            normalized_cost: r.total_samples as f64 / b.total_samples as f64,
            wall_seconds: r.wall_seconds,
            baseline_wall_seconds: b.wall_seconds,
        },
        assumptions,
    )
}

/// Loads both logs, builds the report and writes `<stem>.json` and
/// `<stem>.txt` next to each other under `out_dir`.
pub fn cmd_report(
    run_log: &Path,
    baseline_log: &Path,
    assumptions: &EmissionAssumptions,
    out_dir: &Path,
) -> Result<RunReport> {
    let run = TrainRunLog::load(run_log)?;
    let baseline = TrainRunLog::load(baseline_log)?;
    let label = run_log
        .parent()
        .and_then(|p| p.file_name())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    let report = compare_logs(&label, &run, &baseline, assumptions)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let json = out_dir.join("report.json");
    std::fs::write(&json, report.to_json()?).map_err(|e| Error::io(&json, e))?;
    let txt = out_dir.join("report.txt");
    std::fs::write(&txt, render_report(&report)).map_err(|e| Error::io(&txt, e))?;
    Ok(report)
}

pub fn render_report(r: &RunReport) -> String {
    format!(
        "{table}\n\
         baseline accuracy   {:.4}\n\
         run accuracy        {:.4}\n\
         normalized cost     {:.4}\n\
         wall time (s)       {:.2} (baseline {:.2}, {:.2}% saved)\n\
         energy (kWh)        {:.6}\n\
         CO2 (kg)            {:.6}\n\
         cost (currency)     {:.6}\n\
         emission figures are estimates from configured assumptions\n",
        r.baseline_accuracy,
        r.run_accuracy,
        r.normalized_cost,
        r.wall_seconds,
        r.baseline_wall_seconds,
        r.time_saved_percent,
        r.energy_kwh,
        r.co2_kg,
        r.money,
        table = crate::cost::comparison_table(std::slice::from_ref(r)),
    )
}
