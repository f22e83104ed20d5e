//! Training cost, accuracy delta and emission estimates.
//!
//! Cost counts data points fed to optimizer updates, not FLOPs. Emission
//! figures are estimates from configured assumptions, never measurements.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::epoch_size;
use crate::error::{Error, Result};
use crate::schedule::RecipeSchedule;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Samples consumed over the schedule divided by those of `baseline_k`
/// held for every epoch.
pub fn normalized_cost(schedule: &RecipeSchedule, n: usize, baseline_k: f64) -> Result<f64> {
    schedule.check_coverage()?;
    let counts: Vec<usize> = schedule
        .per_epoch_k()
        .into_iter()
        .map(|k| epoch_size(n, k))
        .collect();
    normalized_cost_from_counts(&counts, n, baseline_k)
}

/// Same ratio from logged per-epoch sample counts.
pub fn normalized_cost_from_counts(samples_per_epoch: &[usize], n: usize, baseline_k: f64) -> Result<f64> {
    if samples_per_epoch.is_empty() || n == 0 || !(baseline_k > 0.0 && baseline_k.is_finite()) {
        return Err(Error::Cost(format!(
            "need epochs, n > 0 and baseline k > 0 (got {} epochs, n = {n}, k = {baseline_k})",
            samples_per_epoch.len()
        )));
    }
    let used: usize = samples_per_epoch.iter().sum();
    Ok(used as f64 / (samples_per_epoch.len() as f64 * baseline_k * n as f64))
}

pub fn percent_saved(normalized_cost: f64) -> f64 {
    (1.0 - normalized_cost) * 100.0
}

/// Signed accuracy change in percentage points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyDelta(pub f64);

pub fn accuracy_delta(baseline_acc: f64, run_acc: f64) -> Result<AccuracyDelta> {
    for a in [baseline_acc, run_acc] {
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::Cost(format!("accuracy {a} not in [0, 1]")));
        }
    }
    Ok(AccuracyDelta((run_acc - baseline_acc) * 100.0))
}

impl AccuracyDelta {
    pub fn pp(self) -> f64 {
        self.0
    }
}

/// `↑1.02` for gains, `↓0.30` for losses, `0.00` when the rounded value is zero.
impl fmt::Display for AccuracyDelta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rounded = (self.0 * 100.0).round() / 100.0;
        if rounded > 0.0 {
            write!(f, "↑{rounded:.2}")
        } else if rounded < 0.0 {
            write!(f, "↓{:.2}", -rounded)
        } else {
            f.write_str("0.00")
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "unit", content = "amount")]
pub enum Price {
    PerKwh(f64),
    PerHour(f64),
}

/// Inputs to the emission estimate. The defaults are a single mid-range
/// GPU (250 W), a grid intensity of 0.4 kg CO2 per kWh and an electricity
/// price of 0.15 per kWh.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmissionAssumptions {
    pub power_watts: f64,
    pub carbon_kg_per_kwh: f64,
    pub price: Price,
}

impl Default for EmissionAssumptions {
    fn default() -> Self {
        EmissionAssumptions {
            power_watts: 250.0,
            carbon_kg_per_kwh: 0.4,
            price: Price::PerKwh(0.15),
        }
    }
}

impl EmissionAssumptions {
    pub fn validate(&self) -> Result<()> {
        let price = match self.price {
            Price::PerKwh(p) | Price::PerHour(p) => p,
        };
        for (name, v) in [
            ("power", self.power_watts),
            ("carbon intensity", self.carbon_kg_per_kwh),
            ("price", price),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Cost(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Emissions {
    pub energy_kwh: f64,
    pub co2_kg: f64,
    pub money: f64,
}

pub fn estimate_emissions(wall_seconds: f64, assumptions: &EmissionAssumptions) -> Result<Emissions> {
    assumptions.validate()?;
    if !(wall_seconds >= 0.0 && wall_seconds.is_finite()) {
        return Err(Error::Cost(format!("wall time {wall_seconds} s must be >= 0")));
    }
    let energy_kwh = assumptions.power_watts * wall_seconds / 3.6e6;
    let money = match assumptions.price {
        Price::PerKwh(p) => energy_kwh * p,
        Price::PerHour(p) => wall_seconds / 3600.0 * p,
    };
    Ok(Emissions {
        energy_kwh,
        co2_kg: energy_kwh * assumptions.carbon_kg_per_kwh,
        money,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub label: String,
    pub baseline_accuracy: f64,
    pub run_accuracy: f64,
    pub accuracy_delta_pp: f64,
    pub normalized_cost: f64,
    pub percent_saved: f64,
    pub wall_seconds: f64,
    pub baseline_wall_seconds: f64,
    /// Wall-clock saving against the baseline, in percent.
    pub time_saved_percent: f64,
    pub energy_kwh: f64,
    pub co2_kg: f64,
    pub money: f64,
    pub baseline_emissions: Emissions,
    pub assumptions: EmissionAssumptions,
}

pub struct ReportInputs<'a> {
    pub label: &'a str,
    pub baseline_accuracy: f64,
    pub run_accuracy: f64,
    pub normalized_cost: f64,
    pub wall_seconds: f64,
    pub baseline_wall_seconds: f64,
}

pub fn build_report(inputs: &ReportInputs<'_>, assumptions: &EmissionAssumptions) -> Result<RunReport> {
    let delta = accuracy_delta(inputs.baseline_accuracy, inputs.run_accuracy)?;
    if !(inputs.normalized_cost > 0.0 && inputs.normalized_cost.is_finite()) {
        return Err(Error::Cost(format!("normalized cost {} must be > 0", inputs.normalized_cost)));
    }
    let run = estimate_emissions(inputs.wall_seconds, assumptions)?;
    let base = estimate_emissions(inputs.baseline_wall_seconds, assumptions)?;
    let time_saved_percent = if inputs.baseline_wall_seconds > 0.0 {
        (1.0 - inputs.wall_seconds / inputs.baseline_wall_seconds) * 100.0
    } else {
        0.0
    };
    Ok(RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        label: inputs.label.to_string(),
        baseline_accuracy: inputs.baseline_accuracy,
        run_accuracy: inputs.run_accuracy,
        accuracy_delta_pp: delta.pp(),
        normalized_cost: inputs.normalized_cost,
        percent_saved: percent_saved(inputs.normalized_cost),
        wall_seconds: inputs.wall_seconds,
        baseline_wall_seconds: inputs.baseline_wall_seconds,
        time_saved_percent,
        energy_kwh: run.energy_kwh,
        co2_kg: run.co2_kg,
        money: run.money,
        baseline_emissions: base,
        assumptions: *assumptions,
    })
}

impl RunReport {
    pub fn delta(&self) -> AccuracyDelta {
        AccuracyDelta(self.accuracy_delta_pp)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: RunReport = serde_json::from_str(text)?;
        if report.schema_version != REPORT_SCHEMA_VERSION {
            return Err(Error::Cost(format!(
                "unsupported report schema version {}",
                report.schema_version
            )));
        }
        Ok(report)
    }
}

/// Column per report, with a `ΔAcc` row and a `Saved (%)` row.
pub fn comparison_table(reports: &[RunReport]) -> String {
    let headers: Vec<&str> = reports.iter().map(|r| r.label.as_str()).collect();
    let deltas: Vec<String> = reports.iter().map(|r| r.delta().to_string()).collect();
    let saved: Vec<String> = reports.iter().map(|r| format!("{:.2}", r.percent_saved)).collect();
    let width = |i: usize| {
        [headers[i].chars().count(), deltas[i].chars().count(), saved[i].chars().count()]
            .into_iter()
            .max()
            .unwrap_or(0)
    };
    let mut out = String::new();
    let mut row = |name: &str, cells: &[String]| {
        out.push_str(&format!("{name:<10}"));
        for (i, c) in cells.iter().enumerate() {
            let pad = width(i) - c.chars().count();
            out.push_str("  ");
            out.push_str(&" ".repeat(pad));
            out.push_str(c);
        }
        out.push('\n');
    };
    row("", &headers.iter().map(|s| s.to_string()).collect::<Vec<_>>());
    row("ΔAcc", &deltas);
    row("Saved (%)", &saved);
    out
}
