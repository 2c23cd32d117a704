//! End-to-end experiment: build the reservoir a [`RunConfig`] describes,
//! collect its states over the waveform stream, train and score the readout,
//! and serialize every artifact.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{ReservoirKind, RunConfig};
use crate::dynamics::{calibrate_coupling, CalibrationReport, MagnetArray, Trace};
use crate::error::Error;
use crate::esn::esn_init;
use crate::magnet::{validate_layout, ArrayLayout, MaterialParams};
use crate::task::{
    collect_states, generate_sequence, states_csv, train_and_score, EsnReservoir, LabeledSequence,
    LearningSetup, NanomagnetReservoir, Outcome, QuantizedScores, SampleRecord,
};

/// Pipeline stage an error is attributed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Layout,
    Dynamics,
    Learning,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Layout => "layout",
            Stage::Dynamics => "dynamics",
            Stage::Learning => "learning",
            Stage::Output => "output",
        })
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {error}")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub error: Error,
}

pub(crate) trait AtStage<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError>;
}

impl<T> AtStage<T> for crate::Result<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError> {
        self.map_err(|error| StageError { stage, error })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub task: u64,
    pub sim: u64,
    pub esn: u64,
}

/// Machine-readable summary of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub run_id: String,
    pub reservoir: ReservoirKind,
    pub config: RunConfig,
    pub material: MaterialParams,
    pub seeds: Seeds,
    pub n_samples: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub test_errors: usize,
    pub quantized: Option<QuantizedSummary>,
    pub coupling: Option<CalibrationReport>,
    pub samples: Vec<SampleRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedSummary {
    pub bits: u32,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub test_errors: usize,
}

impl From<&QuantizedScores> for QuantizedSummary {
    fn from(q: &QuantizedScores) -> Self {
        QuantizedSummary {
            bits: q.bits,
            train_accuracy: q.scores.train_accuracy,
            test_accuracy: q.scores.test_accuracy,
            test_errors: q.scores.test_errors,
        }
    }
}

pub struct Experiment {
    pub config: RunConfig,
    pub layout: ArrayLayout,
    pub params: MaterialParams,
    pub run_id: String,
    pub sequence: LabeledSequence,
    pub outcome: Outcome,
    pub calibration: Option<CalibrationReport>,
    /// Dense m_z history, when requested.
    pub trace: Option<Trace>,
}

pub fn learning_setup(cfg: &RunConfig) -> LearningSetup {
    LearningSetup {
        n_train: cfg.task.n_train,
        lambda: cfg.learning.lambda,
        threshold: cfg.learning.threshold,
        quantize_bits: cfg.learning.quantize_bits,
    }
}

/// Runs the configured experiment. With `trace_stride`, the nanomagnet run
/// also records m_z of every magnet each `trace_stride` steps.
pub fn run_experiment(
    cfg: &RunConfig,
    trace_stride: Option<u64>,
) -> std::result::Result<Experiment, StageError> {
    cfg.validate()
        .map_err(Error::InvalidParams)
        .at(Stage::Config)?;
    let params = cfg.material_params();
    let layout = cfg.load_layout().at(Stage::Layout)?;
    let sequence = generate_sequence(cfg.task.n_waves, cfg.task.seed).at(Stage::Config)?;
    let run_id = cfg.run_id(&layout);

    let (states, calibration, trace) = match cfg.reservoir {
        ReservoirKind::Nanomagnet => {
            validate_layout(&layout, &params).at(Stage::Layout)?;
            if layout.input_indices.len() != 2 {
                return Err(Error::DimensionMismatch {
                    expected: 2,
                    got: layout.input_indices.len(),
                })
                .at(Stage::Layout);
            }
            let calibration = calibrate_coupling(&layout, &params).at(Stage::Layout)?;
            let array = MagnetArray::new(&layout, &params, cfg.sim.bias_field).at(Stage::Layout)?;
            let mut reservoir = NanomagnetReservoir::new(array, cfg.sim).at(Stage::Config)?;
            if let Some(stride) = trace_stride {
                reservoir = reservoir.with_trace(stride);
            }
            let states = collect_states(&mut reservoir, &sequence).at(Stage::Dynamics)?;
            (states, Some(calibration), reservoir.take_trace())
        }
        ReservoirKind::Esn => {
            let params = esn_init(cfg.esn.nodes, 2, cfg.esn.spectral_radius, cfg.esn.seed)
                .at(Stage::Config)?;
            let mut reservoir = EsnReservoir::new(params);
            let states = collect_states(&mut reservoir, &sequence).at(Stage::Dynamics)?;
            (states, None, None)
        }
    };

    let outcome = train_and_score(states, &sequence, &learning_setup(cfg)).at(Stage::Learning)?;
    Ok(Experiment {
        config: cfg.clone(),
        layout,
        params,
        run_id,
        sequence,
        outcome,
        calibration,
        trace,
    })
}

impl Experiment {
    pub fn report(&self) -> ExperimentReport {
        let n = self.sequence.len();
        let s = &self.outcome.scores;
        ExperimentReport {
            run_id: self.run_id.clone(),
            reservoir: self.config.reservoir,
            config: self.config.resolved(),
            material: self.params,
            seeds: Seeds {
                task: self.config.task.seed,
                sim: self.config.sim.rng_seed,
                esn: self.config.esn.seed,
            },
            n_samples: n,
            n_train: self.config.task.n_train,
            n_test: n - self.config.task.n_train,
            train_accuracy: s.train_accuracy,
            test_accuracy: s.test_accuracy,
            test_errors: s.test_errors,
            quantized: self.outcome.quantized.as_ref().map(|(_, q)| q.into()),
            coupling: self.calibration,
            samples: self.outcome.samples.clone(),
        }
    }

    pub fn states_csv(&self) -> String {
        states_csv(&self.outcome.states, &self.outcome.labels, &self.run_id)
    }

    /// Writes `report.json`, `states.csv`, `weights.json` (and
    /// `weights_quantized.json`), `config.toml`, `layout.csv` and
    /// `material.toml` into `dir`.
    pub fn write_artifacts(&self, dir: &Path) -> std::result::Result<Vec<PathBuf>, StageError> {
        fs::create_dir_all(dir)
            .map_err(|e| Error::io(dir, e))
            .at(Stage::Output)?;
        let report = serde_json::to_string_pretty(&self.report()).expect("report serializes");
        let mut files: Vec<(&str, String)> = vec![
            ("report.json", report),
            ("states.csv", self.states_csv()),
            ("weights.json", self.outcome.weights.to_json()),
            ("config.toml", self.config.resolved().to_toml()),
            ("layout.csv", self.layout.to_csv()),
            ("material.toml", self.params.to_toml()),
        ];
        if let Some((q, _)) = &self.outcome.quantized {
            files.push(("weights_quantized.json", q.to_json()));
        }
        let mut written = Vec::new();
        for (name, body) in files {
            let path = dir.join(name);
            fs::write(&path, body)
                .map_err(|e| Error::io(&path, e))
                .at(Stage::Output)?;
            written.push(path);
        }
        Ok(written)
    }
}
