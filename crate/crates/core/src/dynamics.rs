//! Macrospin Landau–Lifshitz–Gilbert dynamics of a dipole-coupled array.
//!
//! Each magnet is one rigid unit vector `m_i`. The field acting on it is the
//! uniaxial anisotropy field along z, the point-dipole field of every other
//! magnet, and an optional uniform bias field. Input magnets are driven by
//! clamping them to ±z for a whole input interval.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::magnet::{
    build_coupling_tensors, ArrayLayout, CouplingTensor, MaterialParams, SimConfig, MU0,
};
use crate::vec3::Vec3;

const BOLTZMANN: f64 = 1.380649e-23;

#[derive(Debug, Clone, PartialEq)]
pub struct SpinState {
    pub m: Vec<Vec3>,
    /// Simulation time (s).
    pub t: f64,
}

impl SpinState {
    /// Every magnet along +z at t = 0.
    pub fn uniform_up(n: usize) -> Self {
        SpinState {
            m: vec![Vec3::Z; n],
            t: 0.0,
        }
    }

    /// Largest deviation of any |m_i| from 1.
    pub fn max_norm_error(&self) -> f64 {
        self.m
            .iter()
            .fold(0.0, |a, v| a.max((v.norm() - 1.0).abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClampDir {
    Up,
    Down,
}

impl ClampDir {
    pub fn from_bit(bit: u8) -> Self {
        if bit != 0 {
            ClampDir::Up
        } else {
            ClampDir::Down
        }
    }

    pub fn vector(self) -> Vec3 {
        match self {
            ClampDir::Up => Vec3::Z,
            ClampDir::Down => -Vec3::Z,
        }
    }
}

/// Input magnets held at ±z, keyed by magnet index.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClampSet {
    entries: Vec<(usize, ClampDir)>,
}

impl ClampSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a clamp set, checking every key is an input of `layout`.
    pub fn for_layout(
        layout: &ArrayLayout,
        entries: impl IntoIterator<Item = (usize, ClampDir)>,
    ) -> Result<Self> {
        let mut set = ClampSet::new();
        for (index, dir) in entries {
            if !layout.input_indices.contains(&index) {
                return Err(Error::OutOfRange(format!(
                    "magnet {index} is not an input and cannot be clamped"
                )));
            }
            set.insert(index, dir);
        }
        Ok(set)
    }

    pub fn insert(&mut self, index: usize, dir: ClampDir) {
        match self.entries.binary_search_by_key(&index, |e| e.0) {
            Ok(pos) => self.entries[pos].1 = dir,
            Err(pos) => self.entries.insert(pos, (index, dir)),
        }
    }

    pub fn get(&self, index: usize) -> Option<ClampDir> {
        self.entries
            .binary_search_by_key(&index, |e| e.0)
            .ok()
            .map(|p| self.entries[p].1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, ClampDir)> + '_ {
        self.entries.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn mask(&self, n: usize) -> Vec<Option<Vec3>> {
        let mut mask = vec![None; n];
        for (i, d) in self.iter() {
            if let Some(slot) = mask.get_mut(i) {
                *slot = Some(d.vector());
            }
        }
        mask
    }
}

/// Sampled m_z history. Row `k` holds m_z of every magnet at `times[k]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    /// Record every `stride` integrator steps.
    pub stride: u64,
    pub times: Vec<f64>,
    pub mz: Vec<Vec<f64>>,
}

impl Trace {
    pub fn new(stride: u64) -> Self {
        Trace {
            stride: stride.max(1),
            ..Default::default()
        }
    }

    fn push(&mut self, state: &SpinState) {
        self.times.push(state.t);
        self.mz.push(state.m.iter().map(|v| v.z()).collect());
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// CSV with header `t_ns,m_z_00,...` restricted to `columns` (all magnets
    /// when empty).
    pub fn to_csv(&self, columns: &[usize]) -> String {
        let n = self.mz.first().map_or(0, Vec::len);
        let cols: Vec<usize> = if columns.is_empty() {
            (0..n).collect()
        } else {
            columns.to_vec()
        };
        let mut s = String::from("t_ns");
        for c in &cols {
            s.push_str(&format!(",m_z_{c:02}"));
        }
        s.push('\n');
        for (t, row) in self.times.iter().zip(&self.mz) {
            s.push_str(&format!("{}", t * 1e9));
            for &c in &cols {
                s.push_str(&format!(",{}", row[c]));
            }
            s.push('\n');
        }
        s
    }
}

/// Landau–Lifshitz–Gilbert right-hand side in explicit form,
/// `dm/dt = −γμ0/(1+α²) [m×H + α m×(m×H)]`, with H in A/m.
#[inline]
pub fn llg_derivative(m: Vec3, h: Vec3, params: &MaterialParams) -> Vec3 {
    let a = params.alpha;
    let pre = -params.gamma * MU0 / (1.0 + a * a);
    let mxh = m.cross(h);
    (mxh + m.cross(mxh) * a) * pre
}

/// A fully specified array ready to be integrated: geometry, material,
/// precomputed couplings and the static bias.
#[derive(Debug, Clone)]
pub struct MagnetArray {
    layout: ArrayLayout,
    params: MaterialParams,
    tensors: CouplingTensor,
    bias: Vec3,
    moment: f64,
    hk: f64,
}

impl MagnetArray {
    /// Damping may be zero here (conservative precession checks); config
    /// loading enforces the stricter material invariants.
    pub fn new(layout: &ArrayLayout, params: &MaterialParams, bias: [f64; 3]) -> Result<Self> {
        if !(params.alpha >= 0.0 && params.alpha <= 1.0) {
            return Err(Error::InvalidParams("alpha must lie in [0, 1]".into()));
        }
        let mut relaxed = *params;
        relaxed.alpha = relaxed.alpha.max(f64::MIN_POSITIVE);
        relaxed.validate()?;
        let tensors = build_coupling_tensors(layout, params)?;
        Ok(MagnetArray {
            layout: layout.clone(),
            params: *params,
            tensors,
            bias: Vec3(bias),
            moment: params.moment(),
            hk: params.anisotropy_field(),
        })
    }

    pub fn layout(&self) -> &ArrayLayout {
        &self.layout
    }

    pub fn params(&self) -> &MaterialParams {
        &self.params
    }

    pub fn tensors(&self) -> &CouplingTensor {
        &self.tensors
    }

    pub fn len(&self) -> usize {
        self.layout.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layout.is_empty()
    }

    /// Anisotropy plus dipolar field on every magnet, clamped or not.
    fn internal_field_into(&self, m: &[Vec3], out: &mut [Vec3]) {
        for (i, h) in out.iter_mut().enumerate() {
            let mut acc = Vec3::new(0.0, 0.0, self.hk * m[i].z());
            let mut dip = Vec3::ZERO;
            for (j, d) in self.tensors.row(i).iter().enumerate() {
                if j != i {
                    dip += d.mul_vec(m[j]);
                }
            }
            acc += dip * self.moment;
            *h = acc;
        }
    }

    /// Effective field (A/m) driving each magnet. Clamped magnets are frozen
    /// and receive a zero field.
    pub fn effective_field(&self, state: &SpinState, clamps: &ClampSet) -> Vec<Vec3> {
        let mask = clamps.mask(self.len());
        let m = apply_clamps(&state.m, &mask);
        let mut h = vec![Vec3::ZERO; self.len()];
        self.field_into(&m, &mask, &mut h);
        h
    }

    fn field_into(&self, m: &[Vec3], mask: &[Option<Vec3>], out: &mut [Vec3]) {
        self.internal_field_into(m, out);
        for (h, c) in out.iter_mut().zip(mask) {
            if c.is_some() {
                *h = Vec3::ZERO;
            } else {
                *h += self.bias;
            }
        }
    }

    /// Total magnetic energy (J): anisotropy, pairwise dipolar (each pair
    /// counted once) and Zeeman energy in the bias field.
    pub fn energy(&self, state: &SpinState) -> f64 {
        let mut h = vec![Vec3::ZERO; self.len()];
        self.internal_field_into(&state.m, &mut h);
        let sum: f64 = state
            .m
            .iter()
            .zip(&h)
            .map(|(m, hi)| 0.5 * m.dot(*hi) + m.dot(self.bias))
            .sum();
        -MU0 * self.moment * sum
    }

    fn thermal_sigma(&self, cfg: &SimConfig, dt: f64) -> f64 {
        if !cfg.thermal_enabled || cfg.temperature_k <= 0.0 {
            return 0.0;
        }
        let p = &self.params;
        (2.0 * p.alpha * BOLTZMANN * cfg.temperature_k / (p.gamma * MU0 * self.moment * dt)).sqrt()
    }

    /// Advances `state` by one RK4 step of size `dt`. Returns the largest
    /// |‖m_i‖ − 1| seen before renormalization.
    pub fn step(&self, state: &mut SpinState, clamps: &ClampSet, dt: f64) -> Result<f64> {
        let mut stepper = Stepper::new(self, clamps, None);
        stepper.step(state, dt)
    }

    /// Integrates for `duration` seconds, optionally appending to `trace`.
    pub fn run_interval(
        &self,
        state: &mut SpinState,
        clamps: &ClampSet,
        duration: f64,
        config: &SimConfig,
        trace: Option<&mut Trace>,
    ) -> Result<IntervalStats> {
        let steps = config.steps_in(duration)?;
        let noise = (config.thermal_enabled && config.temperature_k > 0.0).then(|| {
            let seed = config.rng_seed ^ state.t.to_bits();
            (
                ChaCha8Rng::seed_from_u64(seed),
                self.thermal_sigma(config, config.dt),
            )
        });
        let mut stepper = Stepper::new(self, clamps, noise);
        stepper.pin(state);
        let mut stats = IntervalStats::default();
        let mut trace = trace;
        for k in 1..=steps {
            let drift = stepper.step(state, config.dt)?;
            stats.steps += 1;
            stats.max_drift = stats.max_drift.max(drift);
            if let Some(tr) = trace.as_deref_mut() {
                if k % tr.stride == 0 {
                    tr.push(state);
                }
            }
        }
        Ok(stats)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IntervalStats {
    pub steps: u64,
    /// Largest pre-renormalization norm error over the interval.
    pub max_drift: f64,
}

fn apply_clamps(m: &[Vec3], mask: &[Option<Vec3>]) -> Vec<Vec3> {
    m.iter().zip(mask).map(|(v, c)| c.unwrap_or(*v)).collect()
}

/// Reusable RK4 scratch space for one clamp configuration.
struct Stepper<'a> {
    array: &'a MagnetArray,
    mask: Vec<Option<Vec3>>,
    noise: Option<(ChaCha8Rng, f64)>,
    h: Vec<Vec3>,
    tmp: Vec<Vec3>,
    k: [Vec<Vec3>; 4],
    thermal: Vec<Vec3>,
}

impl<'a> Stepper<'a> {
    fn new(array: &'a MagnetArray, clamps: &ClampSet, noise: Option<(ChaCha8Rng, f64)>) -> Self {
        let n = array.len();
        Stepper {
            array,
            mask: clamps.mask(n),
            noise,
            h: vec![Vec3::ZERO; n],
            tmp: vec![Vec3::ZERO; n],
            k: std::array::from_fn(|_| vec![Vec3::ZERO; n]),
            thermal: vec![Vec3::ZERO; n],
        }
    }

    fn pin(&self, state: &mut SpinState) {
        for (m, c) in state.m.iter_mut().zip(&self.mask) {
            if let Some(v) = c {
                *m = *v;
            }
        }
    }

    fn derivative(&mut self, which: usize) {
        let params = &self.array.params;
        self.array.field_into(&self.tmp, &self.mask, &mut self.h);
        for i in 0..self.tmp.len() {
            self.k[which][i] = if self.mask[i].is_some() {
                Vec3::ZERO
            } else {
                llg_derivative(self.tmp[i], self.h[i] + self.thermal[i], params)
            };
        }
    }

    fn step(&mut self, state: &mut SpinState, dt: f64) -> Result<f64> {
        self.pin(state);
        if let Some((rng, sigma)) = self.noise.as_mut() {
            for (th, c) in self.thermal.iter_mut().zip(&self.mask) {
                *th = if c.is_some() {
                    Vec3::ZERO
                } else {
                    Vec3::new(
                        standard_normal(rng),
                        standard_normal(rng),
                        standard_normal(rng),
                    ) * *sigma
                };
            }
        }
        let m0 = &state.m;
        self.tmp.copy_from_slice(m0);
        self.derivative(0);
        for (stage, frac) in [(1, 0.5), (2, 0.5), (3, 1.0)] {
            for ((t, m), k) in self.tmp.iter_mut().zip(m0).zip(&self.k[stage - 1]) {
                *t = *m + *k * (frac * dt);
            }
            self.derivative(stage);
        }

        let mut drift: f64 = 0.0;
        for i in 0..m0.len() {
            if let Some(v) = self.mask[i] {
                state.m[i] = v;
                continue;
            }
            let [k1, k2, k3, k4] = [&self.k[0][i], &self.k[1][i], &self.k[2][i], &self.k[3][i]];
            let next = state.m[i] + (*k1 + (*k2 + *k3) * 2.0 + *k4) * (dt / 6.0);
            if !next.is_finite() {
                return Err(Error::NonFinite {
                    magnet: i,
                    t: state.t,
                });
            }
            let norm = next.norm();
            drift = drift.max((norm - 1.0).abs());
            state.m[i] = next * (1.0 / norm);
        }
        state.t += dt;
        Ok(drift)
    }
}

/// Box–Muller standard normal sample.
fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// m_z of every readout magnet, in layout order.
pub fn sample_state(state: &SpinState, layout: &ArrayLayout) -> Vec<f64> {
    layout
        .readout_indices
        .iter()
        .map(|&i| state.m[i].z().clamp(-1.0, 1.0))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingRegime {
    UnderCoupled,
    InRange,
    OverCoupled,
}

impl fmt::Display for CouplingRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CouplingRegime::UnderCoupled => "under-coupled",
            CouplingRegime::InRange => "in range",
            CouplingRegime::OverCoupled => "over-coupled",
        })
    }
}

/// Window the coupling ratio must fall in for the array to behave as a
/// reservoir: weak enough to keep the anisotropy nonlinearity, strong enough
/// for neighbours to push each other around.
pub const COUPLING_WINDOW: (f64, f64) = (0.3, 3.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    /// Anisotropy field H_k (A/m).
    pub anisotropy_field: f64,
    /// Largest easy-axis dipolar field any readout magnet can feel (A/m).
    pub max_dipolar_field: f64,
    /// Readout magnet that attains the maximum.
    pub worst_magnet: usize,
    pub ratio: f64,
    pub regime: CouplingRegime,
}

/// Worst-case easy-axis dipolar field (A/m) on each readout magnet: every
/// neighbour independently oriented to maximize the z component, i.e.
/// `Σ_j ms·V·‖(D_ij)_z·‖`.
fn worst_case_dipolar(layout: &ArrayLayout, params: &MaterialParams) -> Result<(usize, f64)> {
    let tensors = build_coupling_tensors(layout, params)?;
    let moment = params.moment();
    let mut best = (layout.readout_indices[0], 0.0);
    for &i in &layout.readout_indices {
        let total: f64 = (0..layout.len())
            .filter(|&j| j != i)
            .map(|j| Vec3(tensors.get(i, j).0[2]).norm() * moment)
            .sum();
        if total > best.1 {
            best = (i, total);
        }
    }
    Ok(best)
}

pub fn calibrate_coupling(
    layout: &ArrayLayout,
    params: &MaterialParams,
) -> Result<CalibrationReport> {
    let (worst_magnet, max_dipolar_field) = worst_case_dipolar(layout, params)?;
    let hk = params.anisotropy_field();
    let ratio = if hk > 0.0 {
        max_dipolar_field / hk
    } else {
        f64::INFINITY
    };
    let regime = if ratio < COUPLING_WINDOW.0 {
        CouplingRegime::UnderCoupled
    } else if ratio > COUPLING_WINDOW.1 {
        CouplingRegime::OverCoupled
    } else {
        CouplingRegime::InRange
    };
    Ok(CalibrationReport {
        anisotropy_field: hk,
        max_dipolar_field,
        worst_magnet,
        ratio,
        regime,
    })
}

/// Anisotropy constant that puts the array at the requested coupling ratio.
pub fn ku_for_ratio(layout: &ArrayLayout, params: &MaterialParams, ratio: f64) -> Result<f64> {
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(Error::InvalidParams(format!("target ratio {ratio}")));
    }
    let (_, field) = worst_case_dipolar(layout, params)?;
    let hk = field / ratio;
    Ok(hk * MU0 * params.ms / 2.0)
}
