//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line per
//! criterion and exits non-zero if any fails. Thresholds are pinned below.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use critical_periods::cost::{
    comparison_table, normalized_cost, normalized_cost_from_counts, percent_saved, RunReport,
};
use critical_periods::data::{epoch_size, plan_epoch};
use critical_periods::detector::{angle_degrees, window_slope, DetectionState, DetectorConfig};
use critical_periods::engine::{
    backward, forward, init_params, Batch, Checkpoint, LayerSpec, ModelParams, ModelSpec,
};
use critical_periods::harness::{
    checkpoint_path, compare_logs, oracle_sweep, resume, train, Experiment, RunConfig, RunOutcome,
    TrainRunLog, CHECKPOINT_DIR, LOG_FILE, SCHEDULE_FILE, TRACE_FILE,
};
use critical_periods::rotation::cosine_distance_slices;
use critical_periods::schedule::{build_schedule, ScheduleConfig, ScheduleMode};

const C1_TRACES: usize = 1_000;
const C1_MAX_SECONDS: f64 = 5.0;
const C2_TOL: f64 = 1e-12;
const C3_PAIRS: usize = 10_000;
const C3_MAX_DIM: usize = 10_000;
const C3_REL_TOL: f64 = 1e-12;
const C4_CONFIGS: usize = 50;
const C4_STEP: f64 = 1e-5;
const C4_MAX_REL_ERR: f64 = 1e-3;
const C5_TOL: f64 = 1e-12;
const C6_NEAR_PP: f64 = 1.0;
const C6_EARLY_DROP_PP: f64 = 2.0;
const C6_MAX_SECONDS: f64 = 15.0 * 60.0;
const C7_MAX_COST: f64 = 0.60;
const C7_MIN_DELTA_PP: f64 = -1.0;
const C7_SEEDS: [u64; 3] = [1, 2, 3];
const C8_EPOCHS: usize = 10;
const C9_MAX_SPREAD_PP: f64 = 1.5;

const OPTIMIZER_CONFIGS: [&str; 4] = ["desk-sgd", "desk-adamw", "desk-rmsprop", "desk-adagrad"];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(format!("{name}.toml"))
}

fn desk_config(name: &str, seed: u64, mode: ScheduleMode) -> RunConfig {
    let mut c = RunConfig::load(&config_path(name)).expect("desk config loads");
    c.seeds.init = seed;
    c.seeds.data = seed + 100;
    c.seeds.augment = seed + 200;
    c.schedule.mode = mode;
    c.output_dir = None;
    c.checkpoints = false;
    c.switch_at = None;
    c
}

fn run(config: RunConfig) -> RunOutcome {
    train(&Experiment::prepare(config).expect("experiment")).expect("training")
}

/// Baseline and live run of one config and seed.
struct Pair {
    baseline: TrainRunLog,
    live: TrainRunLog,
}

impl Pair {
    fn new(name: &str, seed: u64) -> Self {
        Pair {
            baseline: run(desk_config(name, seed, ScheduleMode::StaticBaseline)).log,
            live: run(desk_config(name, seed, ScheduleMode::ReduceAtCritical)).log,
        }
    }

    fn report(&self) -> RunReport {
        compare_logs("live", &self.live, &self.baseline, &Default::default()).expect("report")
    }
}

// Criterion 1

#[derive(Clone, Copy)]
struct BruteRule {
    window: usize,
    threshold: f64,
    scale: f64,
    arm: bool,
}

/// Slope by the normal equations on raw sums, independent of the
/// centered form used by the library.
fn raw_sum_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (su, sv, suu, suv) = points.iter().fold((0.0, 0.0, 0.0, 0.0), |a, &(u, v)| {
        (a.0 + u, a.1 + v, a.2 + u * u, a.3 + u * v)
    });
    (n * suv - su * sv) / (n * suu - su * su)
}

fn brute_force_fire(epochs: &[usize], dist: &[f64], rule: BruteRule) -> Option<usize> {
    let angles: Vec<(usize, f64)> = (rule.window - 1..epochs.len())
        .map(|end| {
            let pts: Vec<(f64, f64)> = (end + 1 - rule.window..=end)
                .map(|j| (epochs[j] as f64 / rule.scale, dist[j]))
                .collect();
            (epochs[end], raw_sum_slope(&pts).atan() * 180.0 / std::f64::consts::PI)
        })
        .collect();
    let start = if rule.arm {
        angles.iter().position(|&(_, a)| a >= rule.threshold)? + 1
    } else {
        0
    };
    angles[start..]
        .iter()
        .find(|&&(_, a)| a < rule.threshold)
        .map(|&(e, _)| e)
}

fn random_trace(rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<f64>, usize) {
    let len = rng.random_range(0..90usize);
    let total = len + rng.random_range(0..40usize);
    let total = total.max(1);
    let first = rng.random_range(0..5usize);
    let knee = rng.random_range(0..=len);
    let steep = rng.random_range(0.0..4.0);
    let flat = rng.random_range(0.0..1.5);
    let noise = if rng.random_bool(0.3) { rng.random_range(0.0..0.02) } else { 0.0 };
    let mut epochs = Vec::with_capacity(len);
    let mut dist = Vec::with_capacity(len);
    let mut d = 0.0f64;
    let mut e = first;
    for j in 0..len {
        let m = if j < knee { steep } else { flat };
        d += m / total as f64 + noise * rng.random_range(-1.0..1.0);
        epochs.push(e);
        dist.push(d.clamp(0.0, 2.0));
        e += if rng.random_bool(0.1) { 2 } else { 1 };
    }
    (epochs, dist, total)
}

fn criterion_1() -> Verdict {
    let clock = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
    let (mut matched, mut fired) = (0, 0);
    for t in 0..C1_TRACES {
        let (epochs, dist, total) = random_trace(&mut rng);
        let config = DetectorConfig {
            window: if t % 4 == 0 { rng.random_range(2..9) } else { 5 },
            threshold_degrees: 45.0,
            arm_before_fire: t % 3 != 0,
            ..DetectorConfig::for_epochs(total)
        };
        let rule = BruteRule {
            window: config.window,
            threshold: config.threshold_degrees,
            scale: total as f64,
            arm: config.arm_before_fire,
        };
        let expected = if epochs.len() < rule.window {
            None
        } else {
            brute_force_fire(&epochs, &dist, rule)
        };
        let mut state = DetectionState::new();
        let mut got = None;
        for (&e, &d) in epochs.iter().zip(&dist) {
            if let Some(ev) = state.step(e, d, &config).expect("step").fired {
                assert!(got.is_none(), "detector fired twice");
                got = Some(ev.epoch);
            }
        }
        matched += usize::from(got == expected);
        fired += usize::from(got.is_some());
    }
    let secs = clock.elapsed().as_secs_f64();
    verdict(
        matched == C1_TRACES && secs < C1_MAX_SECONDS,
        format!("{matched}/{C1_TRACES} traces match brute force ({fired} fired) in {secs:.3} s"),
    )
}

// Criterion 2

fn criterion_2() -> Verdict {
    let mut worst = 0.0f64;
    let mut check = |got: f64, want: f64| worst = worst.max((got - want).abs());

    let line: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 0.5 * i as f64)).collect();
    check(window_slope(&line).unwrap(), 0.5);
    // u = 1..5, v = 2 3 5 4 6: sum du dv = 9, sum du^2 = 10.
    let pts = [(1.0, 2.0), (2.0, 3.0), (3.0, 5.0), (4.0, 4.0), (5.0, 6.0)];
    check(window_slope(&pts).unwrap(), 0.9);
    // Epochs 20..24 normalized by 200 with v = 0.1 + 0.3 u.
    let pts: Vec<(f64, f64)> = (20..25)
        .map(|e| {
            let u = e as f64 / 200.0;
            (u, 0.1 + 0.3 * u)
        })
        .collect();
    check(window_slope(&pts).unwrap(), 0.3);
    // Constant distance: slope 0.
    check(window_slope(&[(0.0, 0.7), (0.1, 0.7), (0.2, 0.7), (0.3, 0.7), (0.4, 0.7)]).unwrap(), 0.0);
    // u = -2..2, v = u^2: symmetric, slope 0.
    let pts: Vec<(f64, f64)> = (-2..=2).map(|i| (i as f64, (i * i) as f64)).collect();
    check(window_slope(&pts).unwrap(), 0.0);

    check(angle_degrees(1.0), 45.0);
    check(angle_degrees(0.0), 0.0);
    check(angle_degrees(-1.0), -45.0);
    check(angle_degrees(3f64.sqrt()), 60.0);
    check(angle_degrees(1.0 / 3f64.sqrt()), 30.0);
    verdict(worst <= C2_TOL, format!("max abs error {worst:.2e}; m = 0.5 and angle(1) = 45 exact to {C2_TOL:e}"))
}

// Criterion 3

fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn criterion_3() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC3);
    let (mut worst_scale, mut worst_sym, mut worst_oracle) = (0.0f64, 0.0f64, 0.0f64);
    let mut out_of_bounds = 0;
    for p in 0..C3_PAIRS {
        let dim = (2.0 * (C3_MAX_DIM as f64 / 2.0).powf(rng.random::<f64>())).round() as usize;
        let dim = dim.clamp(2, C3_MAX_DIM);
        let a: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        // Mix of related and unrelated pairs, so distances span [0, 2].
        let mix = rng.random_range(-1.0..1.0);
        let spread = if p % 2 == 0 { rng.random_range(1e-3..1.0) } else { 1.0 };
        let b: Vec<f64> = a
            .iter()
            .map(|&x| mix * x + spread * rng.random_range(-1.0..1.0))
            .collect();
        let d = cosine_distance_slices(&a, &b).unwrap();
        let c = 10f64.powf(rng.random_range(-3.0..3.0));
        let scaled: Vec<f64> = a.iter().map(|x| x * c).collect();
        worst_scale = worst_scale.max(rel_diff(cosine_distance_slices(&scaled, &b).unwrap(), d));
        worst_sym = worst_sym.max(rel_diff(cosine_distance_slices(&b, &a).unwrap(), d));
        if !(0.0..=2.0).contains(&d) {
            out_of_bounds += 1;
        }
        let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        let oracle = 1.0 - dot / (na * nb);
        // 1 - cos loses relative precision near 0; compare on the [0, 2] scale.
        worst_oracle = worst_oracle.max((oracle - d).abs() / 2.0);
    }
    let a: Vec<f64> = (0..7).map(|i| i as f64 - 2.5).collect();
    let neg: Vec<f64> = a.iter().map(|x| -x).collect();
    let identical = cosine_distance_slices(&a, &a).unwrap();
    let opposite = cosine_distance_slices(&a, &neg).unwrap();
    let pass = worst_scale <= C3_REL_TOL
        && worst_sym <= C3_REL_TOL
        && worst_oracle <= C3_REL_TOL
        && out_of_bounds == 0
        && identical == 0.0
        && (opposite - 2.0).abs() <= C3_REL_TOL;
    verdict(
        pass,
        format!(
            "{C3_PAIRS} pairs: scale {worst_scale:.1e}, symmetry {worst_sym:.1e}, vs 1-cos {worst_oracle:.1e}, {out_of_bounds} out of [0,2]"
        ),
    )
}

// Criterion 4

fn random_spec(rng: &mut ChaCha8Rng, idx: usize) -> ModelSpec {
    let classes = rng.random_range(2..5);
    if idx.is_multiple_of(2) {
        let inputs = rng.random_range(1..7);
        let hidden: Vec<usize> = (0..rng.random_range(0..3)).map(|_| rng.random_range(1..7)).collect();
        return ModelSpec::mlp(inputs, &hidden, classes);
    }
    let c = rng.random_range(1..3);
    let side = rng.random_range(3..6);
    let kernel = rng.random_range(1..4);
    let padding = rng.random_range(0..2);
    let out_channels = rng.random_range(1..4);
    let mut layers = vec![
        LayerSpec::Conv2d {
            in_channels: c,
            out_channels,
            kernel,
            padding,
        },
        LayerSpec::Relu,
    ];
    let mut side_out = side + 2 * padding - kernel + 1;
    let mut channels = out_channels;
    if rng.random_bool(0.5) && side_out >= 2 {
        let next = rng.random_range(1..3);
        layers.push(LayerSpec::Conv2d {
            in_channels: channels,
            out_channels: next,
            kernel: 2,
            padding: 0,
        });
        layers.push(LayerSpec::Relu);
        side_out -= 1;
        channels = next;
    }
    layers.push(LayerSpec::Flatten);
    layers.push(LayerSpec::Dense {
        inputs: channels * side_out * side_out,
        outputs: classes,
    });
    layers.push(LayerSpec::SoftmaxCrossEntropy);
    ModelSpec {
        input_shape: vec![c, side, side],
        layers,
        classes,
    }
}

fn loss_at(spec: &ModelSpec, values: Vec<f64>, inputs: &[f64], labels: &[u32]) -> f64 {
    let params = ModelParams::from_flat(spec, values).unwrap();
    forward(&params, spec, Batch::new(inputs, labels)).unwrap().loss
}

fn criterion_4() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC4);
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    let mut skipped = 0usize;
    let mut kinds = std::collections::BTreeSet::new();
    for idx in 0..C4_CONFIGS {
        let spec = random_spec(&mut rng, idx);
        spec.validate().expect("generated spec is valid");
        for l in &spec.layers {
            kinds.insert(format!("{l:?}").split([' ', '{']).next().unwrap().to_string());
        }
        let mut params = init_params::<f64>(&spec, rng.random()).unwrap();
        // Non-zero biases keep ReLU inputs away from exact zeros.
        for v in params.values_mut() {
            *v += rng.random_range(-0.1..0.1);
        }
        let n = rng.random_range(1..5);
        let inputs: Vec<f64> = (0..n * spec.input_len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let labels: Vec<u32> = (0..n).map(|_| rng.random_range(0..spec.classes as u32)).collect();
        let fwd = forward(&params, &spec, Batch::new(&inputs, &labels)).unwrap();
        let grad = backward(&params, &spec, &fwd.cache).unwrap();
        let base = params.values().to_vec();
        for (j, &analytic) in grad.values().iter().enumerate() {
            let eval = |h: f64| {
                let mut v = base.clone();
                v[j] += h;
                loss_at(&spec, v, &inputs, &labels)
            };
            let numeric = (eval(C4_STEP) - eval(-C4_STEP)) / (2.0 * C4_STEP);
            // A ReLU kink inside [-h, h] shows up as disagreement between the
            // two one-sided differences; such points have no derivative.
            let right = (eval(C4_STEP) - fwd.loss) / C4_STEP;
            let left = (fwd.loss - eval(-C4_STEP)) / C4_STEP;
            if (right - left).abs() > 1e-3 * (right.abs() + left.abs()).max(1e-3) {
                skipped += 1;
                continue;
            }
            let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(err);
            checked += 1;
        }
    }
    let all_kinds = ["Conv2d", "Dense", "Flatten", "Relu", "SoftmaxCrossEntropy"]
        .iter()
        .all(|k| kinds.contains(*k));
    verdict(
        worst < C4_MAX_REL_ERR && all_kinds && skipped * 100 < checked,
        format!(
            "{C4_CONFIGS} configs, {checked} params, max rel err {worst:.2e} ({skipped} at kinks), kinds {kinds:?}"
        ),
    )
}

// Criterion 5

fn criterion_5() -> Verdict {
    let n = 1000;
    let reduce = ScheduleConfig::with_mode(ScheduleMode::ReduceAtCritical);
    let s = build_schedule(&reduce, 200, Some(24)).unwrap();
    let reduce_cost = normalized_cost(&s, n, 3.0).unwrap();
    let reduce_ok = (reduce_cost - 248.0 / 600.0).abs() <= C5_TOL;

    // Per-epoch summation oracle for prune-anneal, written out longhand.
    let mut worst = 0.0f64;
    for &(i_star, delta, k_prune) in &[(24, 0.5, 0.01), (24, 1.0, 0.01), (50, 0.25, 0.1), (0, 0.7, 0.3), (199, 0.5, 0.01)] {
        let config = ScheduleConfig {
            k_prune,
            delta,
            ..ScheduleConfig::with_mode(ScheduleMode::PruneAnneal)
        };
        let s = build_schedule(&config, 200, Some(i_star)).unwrap();
        let pruned_end = i_star + ((200 - i_star) as f64 * delta).floor() as usize;
        let mut samples = 0.0;
        for e in 0..200 {
            let k = if e < i_star {
                3.0
            } else if e < pruned_end {
                k_prune
            } else {
                3.0
            };
            samples += (k * n as f64).round();
        }
        let oracle = samples / (200.0 * 3.0 * n as f64);
        worst = worst.max((normalized_cost(&s, n, 3.0).unwrap() - oracle).abs());
        let counts: Vec<usize> = (0..200)
            .map(|e| plan_epoch(n, s.effective_k(e).unwrap(), 9, e).unwrap().len())
            .collect();
        worst = worst.max((normalized_cost_from_counts(&counts, n, 3.0).unwrap() - oracle).abs());
        assert_eq!(epoch_size(n, k_prune), (k_prune * n as f64).round() as usize);
    }
    // Worked prune-anneal case: 24 * 3 + 88 * 0.01 + 88 * 3 = 336.88 per sample.
    let config = ScheduleConfig {
        delta: 0.5,
        ..ScheduleConfig::with_mode(ScheduleMode::PruneAnneal)
    };
    let s = build_schedule(&config, 200, Some(24)).unwrap();
    let worked = (normalized_cost(&s, 1000, 3.0).unwrap() - 336.88 / 600.0).abs();
    worst = worst.max(worked);

    let saved = percent_saved(248.0 / 600.0);
    let saved_ok = (saved - 100.0 * 352.0 / 600.0).abs() <= 1e-9;
    let report = critical_periods::cost::build_report(
        &critical_periods::cost::ReportInputs {
            label: "reduce",
            baseline_accuracy: 0.6,
            run_accuracy: 0.597,
            normalized_cost: 248.0 / 600.0,
            wall_seconds: 41.0,
            baseline_wall_seconds: 100.0,
        },
        &Default::default(),
    )
    .unwrap();
    let table = comparison_table(&[report]);
    let table_ok = table.contains("ΔAcc") && table.contains("↓0.30") && table.contains("58.67");
    verdict(
        reduce_ok && worst <= C5_TOL && saved_ok && table_ok,
        format!(
            "reduce cost {reduce_cost:.15} (248/600), prune-anneal max error {worst:.1e}, saved {saved:.2}%"
        ),
    )
}

// Criterion 6

struct SweepResult {
    verdict: Verdict,
    live_matches_oracle: Verdict,
}

fn criterion_6() -> SweepResult {
    let clock = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut base_config = desk_config("desk-sgd", 1, ScheduleMode::StaticBaseline);
    base_config.output_dir = Some(dir.path().to_path_buf());
    base_config.checkpoints = true;
    let exp = Experiment::prepare(base_config).unwrap();
    let baseline = train(&exp).unwrap();
    let live = run(desk_config("desk-sgd", 1, ScheduleMode::ReduceAtCritical));
    let candidates: Vec<usize> = (0..exp.config.epochs).collect();
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let entries = oracle_sweep(&exp, &dir.path().join(CHECKPOINT_DIR), &candidates, workers).unwrap();
    let secs = clock.elapsed().as_secs_f64();

    let base_acc = baseline.final_accuracy();
    let Some(i_star) = live.schedule.critical_epoch else {
        let none = || verdict(false, "live run never detected a critical epoch");
        return SweepResult {
            verdict: none(),
            live_matches_oracle: none(),
        };
    };
    let worst_after = entries[i_star..]
        .iter()
        .map(|e| 100.0 * (e.final_accuracy - base_acc).abs())
        .fold(0.0, f64::max);
    let early_drop = 100.0 * (base_acc - entries[0].final_accuracy);
    let curve: Vec<String> = entries
        .iter()
        .step_by(6)
        .map(|e| format!("{}:{:.2}", e.switch_epoch, 100.0 * e.final_accuracy))
        .collect();
    let live_acc = live.final_accuracy();
    SweepResult {
        verdict: verdict(
            worst_after <= C6_NEAR_PP && early_drop >= C6_EARLY_DROP_PP && secs < C6_MAX_SECONDS,
            format!(
                "baseline {:.2}%, i* = {i_star}, max |gap| for i >= i* {worst_after:.2} pp, drop at i = 0 {early_drop:.2} pp, {secs:.0} s; curve {}",
                100.0 * base_acc,
                curve.join(" ")
            ),
        ),
        live_matches_oracle: verdict(
            live_acc == entries[i_star].final_accuracy,
            format!(
                "live accuracy {live_acc} vs oracle entry at i* = {i_star}: {}",
                entries[i_star].final_accuracy
            ),
        ),
    }
}

// Criteria 7 and 9

fn economy(name: &str, pairs: &[Pair]) -> (Verdict, f64) {
    let reports: Vec<RunReport> = pairs.iter().map(Pair::report).collect();
    let pass = reports
        .iter()
        .all(|r| r.normalized_cost <= C7_MAX_COST && r.accuracy_delta_pp >= C7_MIN_DELTA_PP);
    let mean = reports.iter().map(|r| r.accuracy_delta_pp).sum::<f64>() / reports.len() as f64;
    let parts: Vec<String> = reports
        .iter()
        .zip(pairs)
        .zip(C7_SEEDS)
        .map(|((r, p), s)| {
            format!(
                "seed {s}: i* {:?} cost {:.3} delta {:+.2} pp",
                p.live.summary.as_ref().and_then(|s| s.critical_epoch),
                r.normalized_cost,
                r.accuracy_delta_pp
            )
        })
        .collect();
    (verdict(pass, format!("{name}: {}", parts.join("; "))), mean)
}

// Criterion 8

const MICRO: &str = r#"
epochs = 10
batch_size = 8
checkpoints = true

[model]
hidden = [12]

[data]
format = "synthetic"
reshape = [1, 4, 4]
holdout_samples = 100

[data.synthetic]
kind = "blobs"
n = 96
classes = 4
dim = 16
seed = 8
noise = 0.3

[optimizer]
kind = "adamw"
learning_rate = 0.01
weight_decay = 0.01
decay_epochs = [5]

[seeds]
init = 4
data = 5
augment = 6

[schedule]
mode = "static-baseline"
"#;

fn criterion_8() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let mut config = RunConfig::parse(MICRO).unwrap();
    config.output_dir = Some(dir.path().to_path_buf());
    let exp = Experiment::prepare(config).unwrap();
    train(&exp).unwrap();
    let mut identical = 0;
    for i in 0..=C8_EPOCHS {
        let ckpt = Checkpoint::load(&checkpoint_path(&dir.path().join(CHECKPOINT_DIR), i)).unwrap();
        let resumed = resume(&exp, &ckpt, i, None).unwrap();

        let mut mono_config = exp.config.clone();
        mono_config.output_dir = None;
        mono_config.checkpoints = false;
        mono_config.schedule.mode = ScheduleMode::ReduceAtCritical;
        mono_config.switch_at = Some(i);
        let mono_exp = Experiment::prepare(mono_config).unwrap();
        let mono = train(&mono_exp).unwrap();

        let same_params = resumed
            .params
            .values()
            .iter()
            .zip(mono.params.values())
            .all(|(a, b)| a.to_bits() == b.to_bits());
        let same_opt = resumed.optimizer == mono.optimizer;
        let tail = |log: &TrainRunLog| {
            log.without_timing()
                .epochs
                .into_iter()
                .filter(|r| r.epoch >= i)
                .map(|r| (r.epoch, r.train_loss.to_bits(), r.val_accuracy.to_bits(), r.k.to_bits(), r.samples))
                .collect::<Vec<_>>()
        };
        let same_records = tail(&resumed.log) == tail(&mono.log);
        if same_params && same_opt && same_records && resumed.final_accuracy() == mono.final_accuracy() {
            identical += 1;
        }
    }
    verdict(
        identical == C8_EPOCHS + 1,
        format!("{identical}/{} switch epochs bitwise identical", C8_EPOCHS + 1),
    )
}

// Criterion 10

fn files_under(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().is_some_and(|n| n != LOG_FILE) {
                out.push((path.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn criterion_10() -> Verdict {
    let execute = |mode: ScheduleMode, checkpoints: bool| {
        let dir = tempfile::tempdir().unwrap();
        let mut c = desk_config("desk-sgd", 2, mode);
        c.output_dir = Some(dir.path().to_path_buf());
        c.checkpoints = checkpoints;
        let outcome = run(c);
        let log = TrainRunLog::load(&dir.path().join(LOG_FILE)).unwrap();
        assert_eq!(log, outcome.log);
        (log.without_timing(), files_under(dir.path()), dir)
    };
    let mut same = Vec::new();
    let mut files = 0;
    for (mode, ckpts) in [(ScheduleMode::StaticBaseline, true), (ScheduleMode::ReduceAtCritical, false), (ScheduleMode::PruneAnneal, false)] {
        let (log_a, files_a, _a) = execute(mode, ckpts);
        let (log_b, files_b, _b) = execute(mode, ckpts);
        assert!(files_a.iter().any(|(p, _)| p.ends_with(TRACE_FILE)));
        assert!(files_a.iter().any(|(p, _)| p.ends_with(SCHEDULE_FILE)));
        files += files_a.len();
        same.push(log_a == log_b && files_a == files_b);
    }

    // Oracle results must not depend on the worker count.
    let dir = tempfile::tempdir().unwrap();
    let mut c = RunConfig::parse(MICRO).unwrap();
    c.output_dir = Some(dir.path().to_path_buf());
    let exp = Experiment::prepare(c).unwrap();
    train(&exp).unwrap();
    let ckpts = dir.path().join(CHECKPOINT_DIR);
    let one = oracle_sweep(&exp, &ckpts, &[0, 3, 7, 10], 1).unwrap();
    let three = oracle_sweep(&exp, &ckpts, &[0, 3, 7, 10], 3).unwrap();
    same.push(one == three);

    verdict(
        same.iter().all(|&s| s),
        format!("logs, {files} artifact files and checkpoints identical across executions; sweep worker-count invariant: {same:?}"),
    )
}

fn main() -> ExitCode {
    let clock = Instant::now();
    let mut results: Vec<(String, Verdict)> = Vec::new();
    let mut record = |id: &str, name: &str, v: Verdict| {
        println!("{} criterion {id} ({name}): {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        results.push((id.to_string(), v));
    };

    record("1", "detector vs brute force", criterion_1());
    record("2", "slope and angle oracle", criterion_2());
    record("3", "cosine invariants", criterion_3());
    record("4", "gradient check", criterion_4());
    record("5", "cost arithmetic", criterion_5());
    record("8", "oracle-resume equivalence", criterion_8());

    let sweep = criterion_6();
    record("6", "oracle sweep shape", sweep.verdict);
    record("6b", "live run equals oracle at i*", sweep.live_matches_oracle);

    let mut means = Vec::new();
    let mut per_optimizer = Vec::new();
    for name in OPTIMIZER_CONFIGS {
        let pairs: Vec<Pair> = C7_SEEDS.iter().map(|&s| Pair::new(name, s)).collect();
        let (v, mean) = economy(name, &pairs);
        if name == "desk-sgd" {
            record("7", "live-run economy", verdict(v.pass, v.detail.clone()));
        }
        means.push((name, mean));
        per_optimizer.push(v);
    }
    let spread = means.iter().map(|m| m.1).fold(f64::NEG_INFINITY, f64::max)
        - means.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
    let all_pass = per_optimizer.iter().all(|v| v.pass);
    let mut detail: Vec<String> = means.iter().map(|(n, m)| format!("{n} mean {m:+.2} pp")).collect();
    detail.push(format!("spread {spread:.2} pp"));
    for v in per_optimizer.iter().filter(|v| !v.pass) {
        detail.push(format!("failing {}", v.detail));
    }
    record(
        "9",
        "optimizer agnosticism",
        verdict(all_pass && spread <= C9_MAX_SPREAD_PP, detail.join(", ")),
    );

    record("10", "determinism", criterion_10());

    let failed: Vec<&str> = results.iter().filter(|r| !r.1.pass).map(|r| r.0.as_str()).collect();
    println!(
        "acceptance: {}/{} passed in {:.1?}",
        results.len() - failed.len(),
        results.len(),
        clock.elapsed()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed: {}", failed.join(", "));
        ExitCode::FAILURE
    }
}
