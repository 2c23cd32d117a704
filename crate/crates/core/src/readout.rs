//! Trainable half of the reservoir computer: ridge-regression readout,
//! threshold classifier and an idealized quantized crossbar.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Regularization used when the configuration does not override it.
pub const DEFAULT_LAMBDA: f64 = 1e-6;
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Reservoir samples arranged column-wise, with a trailing constant-1 bias
/// row. Column `t` is x(t).
#[derive(Debug, Clone, PartialEq)]
pub struct StateMatrix {
    nodes: usize,
    /// One entry per sample, each `nodes + 1` long (bias last).
    columns: Vec<Vec<f64>>,
}

impl StateMatrix {
    /// Builds the matrix from raw reservoir samples, appending the bias entry.
    pub fn from_samples(samples: &[Vec<f64>]) -> Result<Self> {
        let nodes = samples.first().map(Vec::len).unwrap_or(0);
        let mut columns = Vec::with_capacity(samples.len());
        for s in samples {
            if s.len() != nodes {
                return Err(Error::DimensionMismatch {
                    expected: nodes,
                    got: s.len(),
                });
            }
            let mut c = s.clone();
            c.push(1.0);
            columns.push(c);
        }
        Ok(StateMatrix { nodes, columns })
    }

    /// Physical reservoir nodes (rows excluding bias).
    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn rows(&self) -> usize {
        self.nodes + 1
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, t: usize) -> &[f64] {
        &self.columns[t]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.columns.iter().map(Vec::as_slice)
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> StateMatrix {
        StateMatrix {
            nodes: self.nodes,
            columns: self.columns[range].to_vec(),
        }
    }
}

/// Desired outputs, one row per output channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Targets {
    pub rows: Vec<Vec<f64>>,
}

impl Targets {
    pub fn single(values: Vec<f64>) -> Self {
        Targets { rows: vec![values] }
    }

    pub fn cols(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantization {
    pub bits: u32,
    /// Weight value of one level step.
    pub scale: f64,
    /// Integer levels, same shape as the weights.
    pub levels: Vec<Vec<i32>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutWeights {
    /// outputs × (nodes + 1), bias weight last.
    pub w: Vec<Vec<f64>>,
    pub lambda: f64,
    pub bias: bool,
    pub quantized: Option<Quantization>,
}

impl ReadoutWeights {
    pub fn outputs(&self) -> usize {
        self.w.len()
    }

    pub fn inputs(&self) -> usize {
        self.w.first().map_or(0, Vec::len)
    }

    /// Weights actually used for inference: the reconstructed levels when
    /// quantized, the full-precision matrix otherwise.
    pub fn effective(&self) -> Vec<Vec<f64>> {
        match &self.quantized {
            Some(q) => q
                .levels
                .iter()
                .map(|r| r.iter().map(|&l| l as f64 * q.scale).collect())
                .collect(),
            None => self.w.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        let file = WeightsFile {
            lambda: self.lambda,
            bias: self.bias,
            rows: self.outputs(),
            cols: self.inputs(),
            weights: self.w.iter().flatten().copied().collect(),
            quantization: self.quantized.clone(),
        };
        serde_json::to_string_pretty(&file).expect("weights serialize")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, String> {
        let f: WeightsFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if f.weights.len() != f.rows * f.cols {
            return Err(format!(
                "{} weights for a {}x{} matrix",
                f.weights.len(),
                f.rows,
                f.cols
            ));
        }
        let w = if f.cols == 0 {
            vec![Vec::new(); f.rows]
        } else {
            f.weights.chunks(f.cols).map(<[f64]>::to_vec).collect()
        };
        Ok(ReadoutWeights {
            w,
            lambda: f.lambda,
            bias: f.bias,
            quantized: f.quantization,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|m| Error::parse(path, m))
    }
}

#[derive(Serialize, Deserialize)]
struct WeightsFile {
    lambda: f64,
    bias: bool,
    rows: usize,
    cols: usize,
    /// Row-major.
    weights: Vec<f64>,
    quantization: Option<Quantization>,
}

/// In-place Cholesky factorization of a symmetric positive-definite matrix
/// (lower triangle used). Fails on a non-positive or NaN pivot.
#[allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]
fn cholesky(a: &mut [Vec<f64>]) -> Result<()> {
    let n = a.len();
    let scale = (0..n)
        .map(|i| a[i][i].abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let tol = f64::EPSILON * scale * n as f64;
    for j in 0..n {
        let mut d = a[j][j];
        for k in 0..j {
            d -= a[j][k] * a[j][k];
        }
        if !(d > tol) {
            return Err(Error::Singular { pivot: j, value: d });
        }
        let d = d.sqrt();
        a[j][j] = d;
        for i in j + 1..n {
            let mut s = a[i][j];
            for k in 0..j {
                s -= a[i][k] * a[j][k];
            }
            a[i][j] = s / d;
        }
    }
    Ok(())
}

/// Solves L Lᵀ x = b with the factor from [`cholesky`].
fn cholesky_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = l.len();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i][k] * y[k]).sum();
        y[i] = (b[i] - s) / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k][i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i][i];
    }
    x
}

/// Closed-form ridge regression `W = Y Xᵀ (X Xᵀ + λI)⁻¹`, computed by a
/// Cholesky solve of the symmetric normal system rather than an inverse.
#[allow(clippy::needless_range_loop)]
pub fn ridge_regression(x: &StateMatrix, y: &Targets, lambda: f64) -> Result<ReadoutWeights> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParams(format!("lambda = {lambda}")));
    }
    if x.cols() == 0 {
        return Err(Error::Empty("state matrix has no samples"));
    }
    for row in &y.rows {
        if row.len() != x.cols() {
            return Err(Error::DimensionMismatch {
                expected: x.cols(),
                got: row.len(),
            });
        }
    }
    let r = x.rows();
    let mut gram = vec![vec![0.0; r]; r];
    for col in x.columns() {
        for i in 0..r {
            for j in 0..=i {
                gram[i][j] += col[i] * col[j];
            }
        }
    }
    for i in 0..r {
        gram[i][i] += lambda;
        for j in 0..i {
            gram[j][i] = gram[i][j];
        }
    }
    cholesky(&mut gram)?;

    let w = y
        .rows
        .iter()
        .map(|targets| {
            let mut rhs = vec![0.0; r];
            for (col, &yt) in x.columns().zip(targets) {
                for (acc, &v) in rhs.iter_mut().zip(col) {
                    *acc += yt * v;
                }
            }
            cholesky_solve(&gram, &rhs)
        })
        .collect();

    Ok(ReadoutWeights {
        w,
        lambda,
        bias: true,
        quantized: None,
    })
}

/// Linear readout ŷ = W x for one sample (bias entry included in `x`).
pub fn readout(weights: &ReadoutWeights, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != weights.inputs() {
        return Err(Error::DimensionMismatch {
            expected: weights.inputs(),
            got: x.len(),
        });
    }
    Ok(weights
        .effective()
        .iter()
        .map(|row| row.iter().zip(x).map(|(w, v)| w * v).sum())
        .collect())
}

/// Waveform class. Ordered so that `Triangle < Square`, matching the 0/1
/// target encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Triangle,
    Square,
}

impl Label {
    pub fn target(self) -> f64 {
        match self {
            Label::Triangle => 0.0,
            Label::Square => 1.0,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Triangle => "triangle",
            Label::Square => "square",
        })
    }
}

/// Threshold classifier; ties go to `Square`.
pub fn classify(y_hat: f64, threshold: f64) -> Label {
    if y_hat >= threshold {
        Label::Square
    } else {
        Label::Triangle
    }
}

pub fn accuracy(predictions: &[Label], labels: &[Label]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::Empty("no predictions to score"));
    }
    if predictions.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: predictions.len(),
        });
    }
    let hits = predictions
        .iter()
        .zip(labels)
        .filter(|(p, l)| p == l)
        .count();
    Ok(hits as f64 / predictions.len() as f64)
}

/// Symmetric uniform quantization onto `2^bits − 1` levels spanning
/// `[−max|W|, +max|W|]`, the weight model of an ideal memristor crossbar.
pub fn quantize_weights(weights: &ReadoutWeights, bits: u32) -> Result<ReadoutWeights> {
    if !(2..=16).contains(&bits) {
        return Err(Error::OutOfRange(format!(
            "quantization bits {bits} not in [2, 16]"
        )));
    }
    let max = weights
        .w
        .iter()
        .flatten()
        .fold(0.0_f64, |a, v| a.max(v.abs()));
    let top = (1i32 << (bits - 1)) - 1;
    let scale = if max > 0.0 { max / top as f64 } else { 0.0 };
    let levels = weights
        .w
        .iter()
        .map(|row| {
            row.iter()
                .map(|&v| {
                    if scale == 0.0 {
                        0
                    } else {
                        ((v / scale).round() as i32).clamp(-top, top)
                    }
                })
                .collect()
        })
        .collect();
    Ok(ReadoutWeights {
        quantized: Some(Quantization {
            bits,
            scale,
            levels,
        }),
        ..weights.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(cols: &[&[f64]]) -> StateMatrix {
        // columns given without bias; test helper keeps raw values
        StateMatrix {
            nodes: cols[0].len() - 1,
            columns: cols.iter().map(|c| c.to_vec()).collect(),
        }
    }

    #[test]
    fn identity_states() {
        let x = matrix(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let w = ridge_regression(&x, &Targets::single(vec![1.0, 0.0]), 0.0).unwrap();
        assert_eq!(w.w, vec![vec![1.0, 0.0]]);
    }

    #[test]
    fn small_regularized_system() {
        // X = [[1,1],[0,1]] as rows; columns are (1,0) and (1,1)
        let x = matrix(&[&[1.0, 0.0], &[1.0, 1.0]]);
        let w = ridge_regression(&x, &Targets::single(vec![1.0, 0.0]), 0.1).unwrap();
        assert!((w.w[0][0] - 0.839_694_656_488_549_6).abs() < 1e-12);
        assert!((w.w[0][1] + 0.763_358_778_625_954_2).abs() < 1e-12);
    }

    #[test]
    fn singular_without_regularization() {
        let x = matrix(&[&[1.0, 1.0], &[2.0, 2.0]]);
        let err = ridge_regression(&x, &Targets::single(vec![1.0, 0.0]), 0.0).unwrap_err();
        assert!(matches!(err, Error::Singular { .. }));
        assert!(ridge_regression(&x, &Targets::single(vec![1.0, 0.0]), 1e-3).is_ok());
    }

    #[test]
    fn dimension_mismatch() {
        let x = matrix(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert!(matches!(
            ridge_regression(&x, &Targets::single(vec![1.0]), 0.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn heavy_regularization_shrinks() {
        let x = matrix(&[&[0.3, -0.2, 1.0], &[0.9, 0.4, 1.0], &[-0.5, 0.7, 1.0]]);
        let y = Targets::single(vec![1.0, 0.0, 1.0]);
        let norms: Vec<f64> = [1e-3, 1e0, 1e3, 1e6, 1e9]
            .iter()
            .map(|&l| {
                let w = ridge_regression(&x, &y, l).unwrap();
                w.w[0].iter().map(|v| v * v).sum::<f64>().sqrt()
            })
            .collect();
        assert!(norms.windows(2).all(|p| p[1] < p[0]), "{norms:?}");
        assert!(norms[4] < 1e-8);
    }

    #[test]
    fn readout_dot_product() {
        let w = ReadoutWeights {
            w: vec![vec![0.5, -0.25, 0.0]],
            lambda: 0.0,
            bias: true,
            quantized: None,
        };
        let y = readout(&w, &[1.0, 0.8, 1.0]).unwrap()[0];
        assert!((y - 0.3).abs() < 1e-15);
        assert!(readout(&w, &[1.0]).is_err());
        let zero = ReadoutWeights {
            w: vec![vec![0.0; 3]],
            ..w
        };
        assert_eq!(readout(&zero, &[3.0, -7.0, 1.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn classifier_threshold() {
        assert_eq!(classify(0.9, 0.5), Label::Square);
        assert_eq!(classify(0.1, 0.5), Label::Triangle);
        assert_eq!(classify(0.5, 0.5), Label::Square);
    }

    #[test]
    fn accuracy_cases() {
        use Label::*;
        assert_eq!(accuracy(&[Square; 30], &[Square; 30]).unwrap(), 1.0);
        assert_eq!(accuracy(&[Square; 30], &[Triangle; 30]).unwrap(), 0.0);
        let half: Vec<Label> = (0..30)
            .map(|i| if i < 15 { Square } else { Triangle })
            .collect();
        assert_eq!(accuracy(&half, &[Square; 30]).unwrap(), 0.5);
        assert!(accuracy(&[], &[]).is_err());
    }

    #[test]
    fn quantize_edge_cases() {
        let zero = ReadoutWeights {
            w: vec![vec![0.0; 4]],
            lambda: 0.0,
            bias: true,
            quantized: None,
        };
        for bits in [2, 8, 16] {
            let q = quantize_weights(&zero, bits).unwrap();
            assert_eq!(q.effective(), zero.w);
        }
        let pm = ReadoutWeights {
            w: vec![vec![1.0, -1.0]],
            ..zero.clone()
        };
        let q = quantize_weights(&pm, 2).unwrap();
        assert_eq!(q.quantized.as_ref().unwrap().levels, vec![vec![1, -1]]);
        assert_eq!(q.effective(), pm.w);
        assert!(quantize_weights(&pm, 1).is_err());
        assert!(quantize_weights(&pm, 17).is_err());
    }

    #[test]
    fn weights_file_round_trip() {
        let w = ReadoutWeights {
            w: vec![vec![0.1, -1.0 / 3.0, std::f64::consts::PI, 1e-300]],
            lambda: 1e-6,
            bias: true,
            quantized: None,
        };
        assert_eq!(ReadoutWeights::from_json(&w.to_json()).unwrap(), w);
        let q = quantize_weights(&w, 8).unwrap();
        assert_eq!(ReadoutWeights::from_json(&q.to_json()).unwrap(), q);
    }
}
