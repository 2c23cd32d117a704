//! Software echo state network, `x(t) = tanh(W_in u(t) + W_res x(t−1))`.
//! Used as a physics-free reference reservoir on the same task.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsnParams {
    /// n_nodes × n_inputs.
    pub w_in: Vec<Vec<f64>>,
    /// n_nodes × n_nodes, rescaled to `spectral_radius`.
    pub w_res: Vec<Vec<f64>>,
    pub spectral_radius: f64,
    pub rng_seed: u64,
}

impl EsnParams {
    pub fn nodes(&self) -> usize {
        self.w_res.len()
    }

    pub fn inputs(&self) -> usize {
        self.w_in.first().map_or(0, Vec::len)
    }
}

/// Largest eigenvalue modulus of a square matrix.
pub fn spectral_radius(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    if n == 0 {
        return 0.0;
    }
    let dm = DMatrix::from_fn(n, n, |i, j| m[i][j]);
    dm.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Draws `W_in` and `W_res` uniformly from [−1, 1] and rescales `W_res` to
/// the requested spectral radius.
pub fn esn_init(n_nodes: usize, n_inputs: usize, radius: f64, seed: u64) -> Result<EsnParams> {
    if n_nodes == 0 {
        return Err(Error::InvalidParams("ESN needs at least one node".into()));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidParams(format!("spectral radius {radius}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |rows: usize, cols: usize| -> Vec<Vec<f64>> {
        (0..rows)
            .map(|_| (0..cols).map(|_| rng.gen_range(-1.0..=1.0)).collect())
            .collect()
    };
    let w_in = draw(n_nodes, n_inputs);
    let mut w_res = draw(n_nodes, n_nodes);
    let rho = spectral_radius(&w_res);
    if rho == 0.0 {
        return Err(Error::InvalidParams(
            "drawn reservoir matrix is nilpotent; pick another seed".into(),
        ));
    }
    let k = radius / rho;
    w_res.iter_mut().flatten().for_each(|v| *v *= k);
    Ok(EsnParams {
        w_in,
        w_res,
        spectral_radius: radius,
        rng_seed: seed,
    })
}

pub fn esn_step(params: &EsnParams, u: &[f64], x_prev: &[f64]) -> Result<Vec<f64>> {
    if u.len() != params.inputs() {
        return Err(Error::DimensionMismatch {
            expected: params.inputs(),
            got: u.len(),
        });
    }
    if x_prev.len() != params.nodes() {
        return Err(Error::DimensionMismatch {
            expected: params.nodes(),
            got: x_prev.len(),
        });
    }
    Ok(params
        .w_in
        .iter()
        .zip(&params.w_res)
        .map(|(win, wres)| {
            let drive: f64 = win.iter().zip(u).map(|(a, b)| a * b).sum();
            let rec: f64 = wres.iter().zip(x_prev).map(|(a, b)| a * b).sum();
            (drive + rec).tanh()
        })
        .collect())
}
