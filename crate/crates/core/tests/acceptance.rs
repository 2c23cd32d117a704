//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Tolerances are pinned below.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use nanorc::cli::cmd_run;
use nanorc::config::{ReservoirKind, RunConfig};
use nanorc::dynamics::{ClampDir, ClampSet, MagnetArray, SpinState};
use nanorc::experiment::{run_experiment, Experiment};
use nanorc::magnet::{ArrayLayout, MU0};
use nanorc::readout::{ridge_regression, StateMatrix, Targets};
use nanorc::task::{memoryless_ceiling, InputSymbol};
use nanorc::vec3::Vec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: std::ops::RangeInclusive<u64> = 1..=10;
const MEAN_TEST_FLOOR: f64 = 0.90;
const RUNTIME_LIMIT: Duration = Duration::from_secs(60);
const RIDGE_REL_TOL: f64 = 1e-8;
const RIDGE_INSTANCES: usize = 50;
const DRIFT_LIMIT: f64 = 1e-6;
const ENERGY_REL_TOL: f64 = 1e-8;
const PRECESSION_REL_TOL: f64 = 1e-3;
const HALF_DT_LIMIT: f64 = 1e-3;
const QUANT_EXTRA_ERRORS: usize = 1;

struct Verdict {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn benchmark_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/benchmark.cfg")
}

fn benchmark() -> RunConfig {
    RunConfig::load(&benchmark_path()).expect("shipped benchmark config loads")
}

fn with_seed(kind: ReservoirKind, seed: u64) -> RunConfig {
    let mut cfg = benchmark();
    cfg.reservoir = kind;
    cfg.task.seed = seed;
    cfg.esn.seed = seed;
    cfg
}

fn waveform_benchmark(runs: &[(u64, Experiment, Duration)], documented: u64) -> Verdict {
    let doc = runs.iter().find(|(s, ..)| *s == documented).unwrap();
    let doc_scores = &doc.1.outcome.scores;
    let doc_ok = doc_scores.train_accuracy == 1.0 && doc_scores.test_accuracy == 1.0;
    let mean = runs
        .iter()
        .map(|(_, e, _)| e.outcome.scores.test_accuracy)
        .sum::<f64>()
        / runs.len() as f64;
    let slowest = runs.iter().map(|(.., d)| *d).max().unwrap();
    Verdict {
        name: "waveform benchmark",
        pass: doc_ok && mean >= MEAN_TEST_FLOOR && slowest < RUNTIME_LIMIT,
        detail: format!(
            "seed {documented}: train {:.4} test {:.4}; mean test over {} seeds {mean:.4} (floor {MEAN_TEST_FLOOR}); slowest run {:.2} s (limit {} s)",
            doc_scores.train_accuracy,
            doc_scores.test_accuracy,
            runs.len(),
            slowest.as_secs_f64(),
            RUNTIME_LIMIT.as_secs()
        ),
    }
}

fn esn_path(runs: &[(u64, Experiment)]) -> Verdict {
    let worst = runs
        .iter()
        .map(|(s, e)| (e.outcome.scores.test_accuracy, *s))
        .fold((f64::INFINITY, 0), |a, b| if b.0 < a.0 { b } else { a });
    Verdict {
        name: "esn oracle path",
        pass: worst.0 == 1.0,
        detail: format!(
            "worst test accuracy over {} seeds {:.4} (seed {})",
            runs.len(),
            worst.0,
            worst.1
        ),
    }
}

/// Best accuracy of any map from the current symbol alone to a label,
/// tabulated over one period of each wave.
fn brute_force_ceiling() -> f64 {
    let square = [3u8, 3, 3, 0, 0, 0];
    let triangle = [1u8, 2, 3, 2, 1, 0];
    let mut best = 0;
    for map in 0u8..16 {
        let says_square = |v: u8| (map >> v) & 1 == 1;
        let correct = square.iter().filter(|&&v| says_square(v)).count()
            + triangle.iter().filter(|&&v| !says_square(v)).count();
        best = best.max(correct);
    }
    best as f64 / 12.0
}

fn memoryless(nano: &[(u64, Experiment, Duration)], esn: &[(u64, Experiment)]) -> Verdict {
    let oracle = brute_force_ceiling();
    let lib = memoryless_ceiling();
    let nano_min = nano
        .iter()
        .map(|(_, e, _)| e.outcome.scores.test_accuracy)
        .fold(f64::INFINITY, f64::min);
    let esn_min = esn
        .iter()
        .map(|(_, e)| e.outcome.scores.test_accuracy)
        .fold(f64::INFINITY, f64::min);
    Verdict {
        name: "memoryless ceiling",
        pass: (oracle - 10.0 / 12.0).abs() < 1e-15
            && (lib - oracle).abs() < 1e-15
            && nano_min > oracle
            && esn_min > oracle,
        detail: format!(
            "brute-force ceiling {oracle:.4}, library {lib:.4}; lowest test accuracy nanomagnet {nano_min:.4}, esn {esn_min:.4}"
        ),
    }
}

/// Normal equations solved by Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
fn normal_equations_oracle(cols: &[Vec<f64>], y: &[f64], lambda: f64) -> Vec<f64> {
    let n = cols[0].len();
    let mut a = vec![vec![0.0; n + 1]; n];
    for (c, &t) in cols.iter().zip(y) {
        for i in 0..n {
            for j in 0..n {
                a[i][j] += c[i] * c[j];
            }
            a[i][n] += c[i] * t;
        }
    }
    for (i, row) in a.iter_mut().enumerate() {
        row[i] += lambda;
    }
    for k in 0..n {
        let p = (k..n)
            .max_by(|&r, &s| a[r][k].abs().total_cmp(&a[s][k].abs()))
            .unwrap();
        a.swap(k, p);
        for r in k + 1..n {
            let f = a[r][k] / a[k][k];
            for c in k..=n {
                a[r][c] -= f * a[k][c];
            }
        }
    }
    let mut w = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|c| a[k][c] * w[c]).sum();
        w[k] = (a[k][n] - s) / a[k][k];
    }
    w
}

fn ridge_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    let start = Instant::now();
    for _ in 0..RIDGE_INSTANCES {
        let samples: Vec<Vec<f64>> = (0..120)
            .map(|_| (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let y: Vec<f64> = (0..120).map(|_| f64::from(rng.gen_range(0..2u8))).collect();
        let states = StateMatrix::from_samples(&samples).unwrap();
        let cols: Vec<Vec<f64>> = states.columns().map(<[f64]>::to_vec).collect();
        for lambda in [0.0, 1e-6, 1e-2] {
            let Ok(w) = ridge_regression(&states, &Targets::single(y.clone()), lambda) else {
                failures += 1;
                continue;
            };
            let oracle = normal_equations_oracle(&cols, &y, lambda);
            let scale = oracle.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let diff = w.w[0]
                .iter()
                .zip(&oracle)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            worst = worst.max(diff / scale);
        }
    }
    Verdict {
        name: "ridge oracle equivalence",
        pass: failures == 0 && worst <= RIDGE_REL_TOL,
        detail: format!(
            "{RIDGE_INSTANCES} instances of 21x120 at 3 lambdas: worst relative deviation {worst:.2e} (tol {RIDGE_REL_TOL:.0e}), {failures} solver failures, {:.1} ms",
            start.elapsed().as_secs_f64() * 1e3
        ),
    }
}

fn benchmark_array(cfg: &RunConfig) -> MagnetArray {
    let layout = cfg.load_layout().unwrap();
    MagnetArray::new(&layout, &cfg.material_params(), cfg.sim.bias_field).unwrap()
}

/// Largest pre-renormalization drift over the benchmark input sequence.
fn norm_drift(cfg: &RunConfig, exp: &Experiment) -> f64 {
    let array = benchmark_array(cfg);
    let mut state = SpinState::uniform_up(array.len());
    let mut worst: f64 = 0.0;
    for symbol in &exp.sequence.symbols {
        let clamps = symbol.clamps(array.layout()).unwrap();
        let stats = array
            .run_interval(&mut state, &clamps, cfg.sim.sample_period, &cfg.sim, None)
            .unwrap();
        worst = worst.max(stats.max_drift);
    }
    worst
}

/// Largest relative per-step energy increase while relaxing under fixed
/// clamps, over every input pattern and two starting states.
fn energy_increase(cfg: &RunConfig) -> f64 {
    let array = benchmark_array(cfg);
    let n = array.len();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let random: Vec<Vec3> = (0..n)
        .map(|_| {
            Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            )
            .normalized()
        })
        .collect();
    let mut worst = f64::NEG_INFINITY;
    for v in 0..4 {
        let clamps = InputSymbol::from_value(v).clamps(array.layout()).unwrap();
        for start in [
            SpinState::uniform_up(n),
            SpinState {
                m: random.clone(),
                t: 0.0,
            },
        ] {
            let mut state = start;
            for (i, d) in clamps.iter() {
                state.m[i] = d.vector();
            }
            let mut e = array.energy(&state);
            for _ in 0..3000 {
                array.step(&mut state, &clamps, cfg.sim.dt).unwrap();
                let next = array.energy(&state);
                worst = worst.max((next - e) / e.abs());
                e = next;
            }
        }
    }
    worst
}

/// Relative error of the measured free-precession rate of one spin at
/// zero damping against γμ0|H|.
fn precession_error(cfg: &RunConfig) -> (f64, f64) {
    let mut params = cfg.material_params();
    params.alpha = 0.0;
    // A clamped input is required by the layout rules; one metre away its
    // field is below 1e-17 A/m.
    let layout = ArrayLayout {
        positions: vec![[0.0, 0.0], [1.0, 0.0]],
        input_indices: vec![0],
        readout_indices: vec![1],
    };
    let h_bias = 1.0e5;
    let array = MagnetArray::new(&layout, &params, [0.0, 0.0, h_bias]).unwrap();
    let mut clamps = ClampSet::new();
    clamps.insert(0, ClampDir::Up);

    let theta: f64 = 1.0;
    let mut state = SpinState {
        m: vec![Vec3::Z, Vec3::new(theta.sin(), 0.0, theta.cos())],
        t: 0.0,
    };
    let hk = 2.0 * params.ku / (MU0 * params.ms);
    let h = hk * theta.cos() + h_bias;
    let expected = params.gamma * MU0 * h;

    let dt = cfg.sim.dt;
    let steps = 20_000;
    let mut phase = 0.0;
    let mut prev = state.m[1];
    for _ in 0..steps {
        array.step(&mut state, &clamps, dt).unwrap();
        let m = state.m[1];
        let cross = prev.x() * m.y() - prev.y() * m.x();
        let dot = prev.x() * m.x() + prev.y() * m.y();
        phase += cross.atan2(dot);
        prev = m;
    }
    let measured = phase.abs() / (steps as f64 * dt);
    let freq = expected / (2.0 * std::f64::consts::PI);
    ((measured - expected).abs() / expected, freq)
}

fn physics_suite(cfg: &RunConfig, exp: &Experiment) -> Verdict {
    let drift = norm_drift(cfg, exp);
    let energy = energy_increase(cfg);
    let (prec, freq) = precession_error(cfg);

    let mut half = cfg.clone();
    half.sim.dt = cfg.sim.dt / 2.0;
    let fine = run_experiment(&half, None).expect("half-step run");
    let dt_dev = exp
        .outcome
        .states
        .columns()
        .zip(fine.outcome.states.columns())
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
        .fold(0.0f64, f64::max);

    Verdict {
        name: "physics invariants",
        pass: drift < DRIFT_LIMIT
            && energy <= ENERGY_REL_TOL
            && prec <= PRECESSION_REL_TOL
            && dt_dev < HALF_DT_LIMIT,
        detail: format!(
            "norm drift {drift:.2e} (<{DRIFT_LIMIT:.0e}); worst relative energy rise per step {energy:.2e} (<={ENERGY_REL_TOL:.0e}); precession at {:.3} GHz off by {prec:.2e} (<={PRECESSION_REL_TOL:.0e}); dt/2 max |dm_z| {dt_dev:.2e} (<{HALF_DT_LIMIT:.0e})",
            freq / 1e9
        ),
    }
}

fn determinism() -> Verdict {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let path = benchmark_path();
    let (_, da) = cmd_run(&path, Some(a.path()), None).expect("first run");
    let (_, db) = cmd_run(&path, Some(b.path()), None).expect("second run");
    let sa = std::fs::read(da.join("states.csv")).unwrap();
    let sb = std::fs::read(db.join("states.csv")).unwrap();
    Verdict {
        name: "determinism",
        pass: !sa.is_empty() && sa == sb,
        detail: format!("states.csv {} bytes, identical: {}", sa.len(), sa == sb),
    }
}

fn quantized(exp: &Experiment) -> Verdict {
    let full = exp.outcome.scores.test_errors;
    match &exp.outcome.quantized {
        Some((_, q)) => Verdict {
            name: "quantized inference",
            pass: q.bits == 8 && q.scores.test_errors <= full + QUANT_EXTRA_ERRORS,
            detail: format!(
                "{}-bit test errors {} vs full precision {full} (allowed +{QUANT_EXTRA_ERRORS}) of {}",
                q.bits,
                q.scores.test_errors,
                exp.config.task.n_waves * 6 - exp.config.task.n_train
            ),
        },
        None => Verdict {
            name: "quantized inference",
            pass: false,
            detail: "benchmark config does not request quantization".into(),
        },
    }
}

fn main() {
    let documented = benchmark().task.seed;
    let total = Instant::now();

    let nano: Vec<(u64, Experiment, Duration)> = SEEDS
        .map(|s| {
            let t = Instant::now();
            let e = run_experiment(&with_seed(ReservoirKind::Nanomagnet, s), None)
                .unwrap_or_else(|e| panic!("nanomagnet seed {s}: {e}"));
            (s, e, t.elapsed())
        })
        .collect();
    let esn: Vec<(u64, Experiment)> = SEEDS
        .map(|s| {
            let e = run_experiment(&with_seed(ReservoirKind::Esn, s), None)
                .unwrap_or_else(|e| panic!("esn seed {s}: {e}"));
            (s, e)
        })
        .collect();
    let doc = &nano.iter().find(|(s, ..)| *s == documented).unwrap().1;

    let verdicts = [
        waveform_benchmark(&nano, documented),
        esn_path(&esn),
        memoryless(&nano, &esn),
        ridge_oracle(),
        physics_suite(&benchmark(), doc),
        determinism(),
        quantized(doc),
    ];

    for (s, e, _) in &nano {
        let q = e
            .outcome
            .quantized
            .as_ref()
            .map(|(_, q)| q.scores.test_errors);
        println!(
            "  seed {s:2}: nanomagnet train {:.4} test {:.4} (8-bit test errors {:?}); esn test {:.4}",
            e.outcome.scores.train_accuracy,
            e.outcome.scores.test_accuracy,
            q,
            esn.iter().find(|(t, _)| t == s).unwrap().1.outcome.scores.test_accuracy
        );
    }
    let mut failed = 0;
    for v in &verdicts {
        println!(
            "{} {}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.name,
            v.detail
        );
        failed += usize::from(!v.pass);
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1} s",
        verdicts.len() - failed,
        total.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
