//! Square/triangle waveform identification: 2-bit encoding, random wave
//! concatenation, train/test split and the end-to-end train/infer flow.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{sample_state, ClampDir, ClampSet, MagnetArray, SpinState, Trace};
use crate::error::{Error, Result};
use crate::esn::{esn_step, EsnParams};
use crate::magnet::{ArrayLayout, SimConfig};
use crate::readout::{
    accuracy, classify, quantize_weights, readout, ridge_regression, Label, ReadoutWeights,
    StateMatrix, Targets,
};

/// Symbols per wave period.
pub const WAVE_LEN: usize = 6;

/// One input pair (bit A, bit B); bit 1 clamps +z, bit 0 clamps −z.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InputSymbol {
    pub a: u8,
    pub b: u8,
}

impl InputSymbol {
    /// Splits a 2-bit amplitude into (MSB, LSB).
    pub fn from_value(v: u8) -> Self {
        assert!(v < 4, "2-bit amplitude out of range: {v}");
        InputSymbol {
            a: v >> 1,
            b: v & 1,
        }
    }

    pub fn value(self) -> u8 {
        (self.a << 1) | self.b
    }

    pub fn bits(self) -> [u8; 2] {
        [self.a, self.b]
    }

    /// Raw {0, 1} drive for software reservoirs. A ±1 drive would make a
    /// zero-bias tanh network odd under a global input flip, which no linear
    /// readout can turn into this task's even (a == b) class boundary.
    pub fn signal(self) -> [f64; 2] {
        self.bits().map(f64::from)
    }

    pub fn clamps(self, layout: &ArrayLayout) -> Result<ClampSet> {
        if layout.input_indices.len() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: layout.input_indices.len(),
            });
        }
        ClampSet::for_layout(
            layout,
            layout
                .input_indices
                .iter()
                .zip(self.bits())
                .map(|(&i, bit)| (i, ClampDir::from_bit(bit))),
        )
    }
}

const SQUARE: [u8; WAVE_LEN] = [3, 3, 3, 0, 0, 0];
const TRIANGLE: [u8; WAVE_LEN] = [1, 2, 3, 2, 1, 0];

pub fn encode_wave(kind: Label) -> [InputSymbol; WAVE_LEN] {
    let values = match kind {
        Label::Square => SQUARE,
        Label::Triangle => TRIANGLE,
    };
    values.map(InputSymbol::from_value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSequence {
    pub symbols: Vec<InputSymbol>,
    pub labels: Vec<Label>,
    /// Index of the first symbol of each wave.
    pub wave_boundaries: Vec<usize>,
    pub seed: u64,
}

impl LabeledSequence {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// Concatenates `n_waves` periods, each chosen square or triangle by a
/// seeded fair coin.
pub fn generate_sequence(n_waves: usize, seed: u64) -> Result<LabeledSequence> {
    if n_waves == 0 {
        return Err(Error::Empty("sequence needs at least one wave"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seq = LabeledSequence {
        symbols: Vec::with_capacity(n_waves * WAVE_LEN),
        labels: Vec::with_capacity(n_waves * WAVE_LEN),
        wave_boundaries: Vec::with_capacity(n_waves),
        seed,
    };
    for _ in 0..n_waves {
        let kind = if rng.gen_bool(0.5) {
            Label::Square
        } else {
            Label::Triangle
        };
        seq.wave_boundaries.push(seq.symbols.len());
        seq.symbols.extend(encode_wave(kind));
        seq.labels.extend([kind; WAVE_LEN]);
    }
    Ok(seq)
}

/// Contiguous train prefix and test remainder; no shuffling.
pub fn split_train_test(n_samples: usize, n_train: usize) -> Result<(Range<usize>, Range<usize>)> {
    if n_train == 0 || n_train >= n_samples {
        return Err(Error::OutOfRange(format!(
            "n_train = {n_train} must lie in 1..{n_samples}"
        )));
    }
    Ok((0..n_train, n_train..n_samples))
}

/// Best per-symbol accuracy of any classifier that sees only the current
/// symbol, on data with one square per triangle wave.
pub fn memoryless_ceiling() -> f64 {
    let mut counts = [[0usize; 2]; 4];
    for kind in [Label::Square, Label::Triangle] {
        for s in encode_wave(kind) {
            counts[s.value() as usize][kind as usize] += 1;
        }
    }
    let best: usize = counts.iter().map(|c| c[0].max(c[1])).sum();
    best as f64 / (2 * WAVE_LEN) as f64
}

/// Anything that turns a stream of input symbols into reservoir samples.
pub trait Reservoir {
    /// Number of entries in each sample.
    fn nodes(&self) -> usize;

    /// Returns the reservoir to its initial condition.
    fn reset(&mut self) -> Result<()>;

    /// Drives the reservoir with `symbol` for one sample period and returns
    /// the state recorded just before the next input.
    fn present(&mut self, symbol: InputSymbol) -> Result<Vec<f64>>;
}

/// The nanomagnet array driven through its two clamped input magnets.
pub struct NanomagnetReservoir {
    array: MagnetArray,
    config: SimConfig,
    state: SpinState,
    trace: Option<Trace>,
}

impl NanomagnetReservoir {
    pub fn new(array: MagnetArray, config: SimConfig) -> Result<Self> {
        config.validate()?;
        let n = array.len();
        Ok(NanomagnetReservoir {
            array,
            config,
            state: SpinState::uniform_up(n),
            trace: None,
        })
    }

    /// Records m_z of every magnet each `stride` steps from the next reset on.
    pub fn with_trace(mut self, stride: u64) -> Self {
        self.trace = Some(Trace::new(stride));
        self
    }

    pub fn state(&self) -> &SpinState {
        &self.state
    }

    pub fn take_trace(&mut self) -> Option<Trace> {
        self.trace.take()
    }

    pub fn array(&self) -> &MagnetArray {
        &self.array
    }

    fn advance(&mut self, clamps: &ClampSet) -> Result<()> {
        self.array.run_interval(
            &mut self.state,
            clamps,
            self.config.sample_period,
            &self.config,
            self.trace.as_mut(),
        )?;
        Ok(())
    }
}

impl Reservoir for NanomagnetReservoir {
    fn nodes(&self) -> usize {
        self.array.layout().readout_indices.len()
    }

    /// All magnets at +z, then one settling interval with both inputs held
    /// at +z.
    fn reset(&mut self) -> Result<()> {
        self.state = SpinState::uniform_up(self.array.len());
        if let Some(tr) = self.trace.as_mut() {
            *tr = Trace::new(tr.stride);
        }
        let up = InputSymbol { a: 1, b: 1 }.clamps(self.array.layout())?;
        self.advance(&up)
    }

    fn present(&mut self, symbol: InputSymbol) -> Result<Vec<f64>> {
        let clamps = symbol.clamps(self.array.layout())?;
        self.advance(&clamps)?;
        Ok(sample_state(&self.state, self.array.layout()))
    }
}

pub struct EsnReservoir {
    params: EsnParams,
    x: Vec<f64>,
}

impl EsnReservoir {
    pub fn new(params: EsnParams) -> Self {
        let x = vec![0.0; params.nodes()];
        EsnReservoir { params, x }
    }
}

impl Reservoir for EsnReservoir {
    fn nodes(&self) -> usize {
        self.params.nodes()
    }

    fn reset(&mut self) -> Result<()> {
        self.x.iter_mut().for_each(|v| *v = 0.0);
        Ok(())
    }

    fn present(&mut self, symbol: InputSymbol) -> Result<Vec<f64>> {
        self.x = esn_step(&self.params, &symbol.signal(), &self.x)?;
        Ok(self.x.clone())
    }
}

/// Readout training and scoring options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningSetup {
    pub n_train: usize,
    pub lambda: f64,
    pub threshold: f64,
    pub quantize_bits: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub t: usize,
    pub bit_a: u8,
    pub bit_b: u8,
    pub y_hat: f64,
    pub label: Label,
    pub prediction: Label,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub test_errors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedScores {
    pub bits: u32,
    #[serde(flatten)]
    pub scores: Scores,
    pub predictions: Vec<Label>,
}

/// Everything one train/infer pass produces.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub states: StateMatrix,
    pub labels: Vec<Label>,
    pub weights: ReadoutWeights,
    pub samples: Vec<SampleRecord>,
    pub scores: Scores,
    pub quantized: Option<(ReadoutWeights, QuantizedScores)>,
}

/// Drives `reservoir` through `seq`, pairing the state recorded after the
/// interval of symbol t (just before symbol t+1 arrives) with label t.
pub fn collect_states(reservoir: &mut dyn Reservoir, seq: &LabeledSequence) -> Result<StateMatrix> {
    if seq.is_empty() {
        return Err(Error::Empty("input sequence"));
    }
    reservoir.reset()?;
    let samples = seq
        .symbols
        .iter()
        .map(|&s| reservoir.present(s))
        .collect::<Result<Vec<_>>>()?;
    StateMatrix::from_samples(&samples)
}

fn score(
    weights: &ReadoutWeights,
    states: &StateMatrix,
    labels: &[Label],
    train: &Range<usize>,
    threshold: f64,
) -> Result<(Vec<f64>, Vec<Label>, Scores)> {
    let y_hat = states
        .columns()
        .map(|c| readout(weights, c).map(|y| y[0]))
        .collect::<Result<Vec<f64>>>()?;
    let predictions: Vec<Label> = y_hat.iter().map(|&y| classify(y, threshold)).collect();
    let test = train.end..labels.len();
    let test_errors = predictions[test.clone()]
        .iter()
        .zip(&labels[test.clone()])
        .filter(|(p, l)| p != l)
        .count();
    let scores = Scores {
        train_accuracy: accuracy(&predictions[train.clone()], &labels[train.clone()])?,
        test_accuracy: accuracy(&predictions[test.clone()], &labels[test])?,
        test_errors,
    };
    Ok((y_hat, predictions, scores))
}

/// Trains the readout on the first `n_train` samples and scores both splits.
pub fn train_and_score(
    states: StateMatrix,
    seq: &LabeledSequence,
    setup: &LearningSetup,
) -> Result<Outcome> {
    if states.cols() != seq.len() {
        return Err(Error::DimensionMismatch {
            expected: seq.len(),
            got: states.cols(),
        });
    }
    let (train, _) = split_train_test(seq.len(), setup.n_train)?;
    let targets = Targets::single(
        seq.labels[train.clone()]
            .iter()
            .map(|l| l.target())
            .collect(),
    );
    let weights = ridge_regression(&states.slice(train.clone()), &targets, setup.lambda)?;
    let (y_hat, predictions, scores) =
        score(&weights, &states, &seq.labels, &train, setup.threshold)?;

    let samples = (0..seq.len())
        .map(|t| SampleRecord {
            t,
            bit_a: seq.symbols[t].a,
            bit_b: seq.symbols[t].b,
            y_hat: y_hat[t],
            label: seq.labels[t],
            prediction: predictions[t],
            split: if train.contains(&t) {
                Split::Train
            } else {
                Split::Test
            },
        })
        .collect();

    let quantized = match setup.quantize_bits {
        Some(bits) => {
            let q = quantize_weights(&weights, bits)?;
            let (_, preds, scores) = score(&q, &states, &seq.labels, &train, setup.threshold)?;
            Some((
                q,
                QuantizedScores {
                    bits,
                    scores,
                    predictions: preds,
                },
            ))
        }
        None => None,
    };

    Ok(Outcome {
        states,
        labels: seq.labels.clone(),
        weights,
        samples,
        scores,
        quantized,
    })
}

/// Writes the state matrix as CSV, `t_index,label,x_00..x_NN,bias`, with
/// the label column holding the 0/1 target.
pub fn states_csv(states: &StateMatrix, labels: &[Label], run_id: &str) -> String {
    let mut s = format!("# run_id: {run_id}\nt_index,label");
    for k in 0..states.nodes() {
        s.push_str(&format!(",x_{k:02}"));
    }
    s.push_str(",bias\n");
    for (t, (col, label)) in states.columns().zip(labels).enumerate() {
        s.push_str(&format!("{t},{}", label.target() as u8));
        for v in col {
            s.push_str(&format!(",{v}"));
        }
        s.push('\n');
    }
    s
}
