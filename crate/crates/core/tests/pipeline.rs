use std::path::PathBuf;

use nanorc::config::{ReservoirKind, RunConfig};
use nanorc::experiment::{run_experiment, Stage};
use nanorc::readout::{classify, quantize_weights, readout};

fn benchmark() -> RunConfig {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/benchmark.cfg");
    RunConfig::load(&p).unwrap()
}

#[test]
fn sixteen_bit_weights_keep_every_decision() {
    let cfg = benchmark();
    let exp = run_experiment(&cfg, None).unwrap();
    let w = &exp.outcome.weights;
    let q = quantize_weights(w, 16).unwrap();
    for col in exp.outcome.states.columns() {
        let full = classify(readout(w, col).unwrap()[0], cfg.learning.threshold);
        let fine = classify(readout(&q, col).unwrap()[0], cfg.learning.threshold);
        assert_eq!(full, fine);
    }
    assert_eq!(exp.outcome.states.cols(), 150);
    assert_eq!(exp.outcome.states.rows(), 21);
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let mut cfg = benchmark();
    cfg.task.n_waves = 4;
    cfg.task.n_train = 18;
    for kind in [ReservoirKind::Nanomagnet, ReservoirKind::Esn] {
        cfg.reservoir = kind;
        let a = run_experiment(&cfg, None).unwrap();
        let b = run_experiment(&cfg, None).unwrap();
        let ja = serde_json::to_string(&a.report()).unwrap();
        let jb = serde_json::to_string(&b.report()).unwrap();
        assert_eq!(ja, jb);
        assert_eq!(a.states_csv(), b.states_csv());
    }
}

#[test]
fn state_entries_stay_in_unit_range() {
    let mut cfg = benchmark();
    cfg.task.n_waves = 4;
    cfg.task.n_train = 18;
    let exp = run_experiment(&cfg, None).unwrap();
    for col in exp.outcome.states.columns() {
        let (nodes, bias) = col.split_at(col.len() - 1);
        assert_eq!(bias, [1.0]);
        assert!(nodes.iter().all(|v| (-1.0..=1.0).contains(v)));
    }
}

#[test]
fn bad_split_fails_in_config_stage() {
    let mut cfg = benchmark();
    cfg.task.n_train = 150;
    let err = run_experiment(&cfg, None).err().expect("n_train = n_samples is rejected");
    assert_eq!(err.stage, Stage::Config);
}
