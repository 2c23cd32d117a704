//! Physical data model of a planar nanomagnet array: material constants,
//! magnet placement, and the pairwise point-dipole coupling tensors that act
//! as the fixed internal weights of the reservoir.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec3::{Mat3, Vec3};

/// Vacuum permeability (T·m/A).
pub const MU0: f64 = 4.0e-7 * PI;

/// Anisotropy constant shipped with the default material. Puts the default
/// layout at an easy-axis coupling ratio of about 2.75, inside the
/// [`crate::dynamics::COUPLING_WINDOW`] (see
/// [`crate::dynamics::calibrate_coupling`]).
pub const DEFAULT_KU: f64 = 840.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    /// Saturation magnetization (A/m).
    #[serde(rename = "ms_a_per_m")]
    pub ms: f64,
    /// Uniaxial anisotropy constant (J/m³), easy axis along z.
    #[serde(rename = "ku_j_per_m3")]
    pub ku: f64,
    /// Gilbert damping.
    pub alpha: f64,
    /// Gyromagnetic ratio (rad/(s·T)).
    #[serde(rename = "gamma_rad_per_s_t")]
    pub gamma: f64,
    #[serde(rename = "diameter_m")]
    pub diameter: f64,
    #[serde(rename = "thickness_m")]
    pub thickness: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        MaterialParams {
            ms: 5.8e5,
            ku: DEFAULT_KU,
            alpha: 1.0,
            gamma: 1.760859e11,
            diameter: 50e-9,
            thickness: 8e-9,
        }
    }
}

impl MaterialParams {
    /// Disc volume (m³).
    pub fn volume(&self) -> f64 {
        PI * (self.diameter / 2.0).powi(2) * self.thickness
    }

    /// Magnetic moment of one magnet (A·m²).
    pub fn moment(&self) -> f64 {
        self.ms * self.volume()
    }

    /// Anisotropy field H_k = 2 Ku / (μ0 Ms) in A/m.
    pub fn anisotropy_field(&self) -> f64 {
        2.0 * self.ku / (MU0 * self.ms)
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.ms > 0.0, "ms must be > 0"),
            (self.ku >= 0.0, "ku must be >= 0"),
            (
                self.alpha > 0.0 && self.alpha <= 1.0,
                "alpha must lie in (0, 1]",
            ),
            (self.gamma > 0.0, "gamma must be > 0"),
            (self.diameter > 0.0, "diameter must be > 0"),
            (self.thickness > 0.0, "thickness must be > 0"),
        ];
        let bad: Vec<&str> = checks
            .iter()
            .filter(|(ok, _)| !ok)
            .map(|(_, msg)| *msg)
            .collect();
        if bad.is_empty() && self.volume() > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParams(bad.join(", ")))
        }
    }

    pub fn to_toml(&self) -> String {
        let body = toml::to_string(self).expect("material params serialize");
        format!("# nanomagnet material parameters, SI units\n{body}")
    }

    pub fn from_toml(text: &str) -> std::result::Result<Self, String> {
        let p: MaterialParams = toml::from_str(text).map_err(|e| e.to_string())?;
        p.validate().map_err(|e| e.to_string())?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|m| Error::parse(path, m))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_toml()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Input,
    Readout,
    /// Present in the array but neither driven nor sampled.
    Passive,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Input => "input",
            Role::Readout => "readout",
            Role::Passive => "passive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayLayout {
    /// In-plane centre coordinates (m).
    pub positions: Vec<[f64; 2]>,
    pub input_indices: Vec<usize>,
    pub readout_indices: Vec<usize>,
}

/// A single broken layout invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum LayoutViolation {
    Overlap { i: usize, j: usize, distance: f64 },
    DuplicatePosition { i: usize, j: usize },
    IndexOutOfRange { index: usize, len: usize },
    RoleOverlap { index: usize },
    NoInputs,
    NoReadouts,
    DuplicateIndex { index: usize },
    NonFinitePosition { index: usize },
}

impl fmt::Display for LayoutViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayoutViolation::Overlap { i, j, distance } => write!(
                f,
                "magnets {i} and {j} overlap (centres {:.3} nm apart)",
                distance * 1e9
            ),
            LayoutViolation::DuplicatePosition { i, j } => {
                write!(f, "magnets {i} and {j} share a position")
            }
            LayoutViolation::IndexOutOfRange { index, len } => {
                write!(f, "index {index} out of range for {len} magnets")
            }
            LayoutViolation::RoleOverlap { index } => {
                write!(f, "magnet {index} is both an input and a readout")
            }
            LayoutViolation::NoInputs => f.write_str("no input magnets"),
            LayoutViolation::NoReadouts => f.write_str("no readout magnets"),
            LayoutViolation::DuplicateIndex { index } => {
                write!(f, "magnet {index} listed twice in a role")
            }
            LayoutViolation::NonFinitePosition { index } => {
                write!(f, "magnet {index} has a non-finite position")
            }
        }
    }
}

/// Checks every layout invariant against the magnet diameter and reports all
/// violations at once.
pub fn validate_layout(layout: &ArrayLayout, params: &MaterialParams) -> Result<()> {
    let mut out = Vec::new();
    let n = layout.positions.len();

    for (i, p) in layout.positions.iter().enumerate() {
        if !(p[0].is_finite() && p[1].is_finite()) {
            out.push(LayoutViolation::NonFinitePosition { index: i });
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (layout.positions[i], layout.positions[j]);
            let d = (a[0] - b[0]).hypot(a[1] - b[1]);
            if a == b {
                out.push(LayoutViolation::DuplicatePosition { i, j });
            } else if d < params.diameter {
                out.push(LayoutViolation::Overlap { i, j, distance: d });
            }
        }
    }

    if layout.input_indices.is_empty() {
        out.push(LayoutViolation::NoInputs);
    }
    if layout.readout_indices.is_empty() {
        out.push(LayoutViolation::NoReadouts);
    }
    for list in [&layout.input_indices, &layout.readout_indices] {
        let mut seen = vec![false; n];
        for &index in list {
            if index >= n {
                out.push(LayoutViolation::IndexOutOfRange { index, len: n });
            } else if std::mem::replace(&mut seen[index], true) {
                out.push(LayoutViolation::DuplicateIndex { index });
            }
        }
    }
    for &index in &layout.input_indices {
        if layout.readout_indices.contains(&index) {
            out.push(LayoutViolation::RoleOverlap { index });
        }
    }

    if out.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidLayout(out))
    }
}

// Default array, coordinates in nm. Inputs A (index 0) and B (index 21) sit
// at opposite ends; magnet 7 neighbours A, 12 neighbours B and 15 lies
// between the two input paths.
const DEFAULT_POSITIONS_NM: [[f64; 2]; 22] = [
    [0.0, 128.0],   // 0  input A
    [76.0, 76.0],   // 1
    [72.0, 240.0],  // 2
    [152.0, 16.0],  // 3
    [172.0, 104.0], // 4
    [144.0, 216.0], // 5
    [232.0, 48.0],  // 6
    [84.0, 164.0],  // 7
    [240.0, 176.0], // 8
    [308.0, 0.0],   // 9
    [316.0, 96.0],  // 10
    [416.0, 240.0], // 11
    [576.0, 172.0], // 12
    [400.0, 48.0],  // 13
    [404.0, 144.0], // 14
    [328.0, 200.0], // 15
    [492.0, 8.0],   // 16
    [488.0, 100.0], // 17
    [504.0, 200.0], // 18
    [576.0, 64.0],  // 19
    [636.0, 248.0], // 20
    [656.0, 120.0], // 21  input B
];

impl ArrayLayout {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn role_of(&self, index: usize) -> Role {
        if self.input_indices.contains(&index) {
            Role::Input
        } else if self.readout_indices.contains(&index) {
            Role::Readout
        } else {
            Role::Passive
        }
    }

    /// Copy with all coordinates multiplied by `k`.
    pub fn scaled(&self, k: f64) -> ArrayLayout {
        ArrayLayout {
            positions: self
                .positions
                .iter()
                .map(|p| [p[0] * k, p[1] * k])
                .collect(),
            ..self.clone()
        }
    }

    /// Writes the layout as CSV. Inputs come first in input order, then
    /// readouts in readout order, so the role orderings survive a round trip.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("# nanomagnet layout; positions in metres\nindex,x_m,y_m,role\n");
        let passive = (0..self.len()).filter(|&i| self.role_of(i) == Role::Passive);
        let order = self
            .input_indices
            .iter()
            .chain(&self.readout_indices)
            .copied()
            .chain(passive);
        for i in order {
            let [x, y] = self.positions[i];
            s.push_str(&format!("{i},{x:?},{y:?},{}\n", self.role_of(i)));
        }
        s
    }

    pub fn from_csv(text: &str) -> std::result::Result<Self, String> {
        let body: String = text
            .lines()
            .filter(|l| !l.trim_start().starts_with('#') && !l.trim().is_empty())
            .map(|l| format!("{l}\n"))
            .collect();
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(body.as_bytes());

        #[derive(Deserialize)]
        struct Record {
            index: usize,
            x_m: f64,
            y_m: f64,
            role: Role,
        }

        let mut records = Vec::new();
        for rec in rdr.deserialize::<Record>() {
            records.push(rec.map_err(|e| e.to_string())?);
        }
        let n = records.len();
        let mut positions = vec![None; n];
        let mut layout = ArrayLayout {
            positions: Vec::new(),
            input_indices: Vec::new(),
            readout_indices: Vec::new(),
        };
        for r in records {
            let slot = positions
                .get_mut(r.index)
                .ok_or_else(|| format!("index {} out of range for {n} records", r.index))?;
            if slot.replace([r.x_m, r.y_m]).is_some() {
                return Err(format!("index {} appears twice", r.index));
            }
            match r.role {
                Role::Input => layout.input_indices.push(r.index),
                Role::Readout => layout.readout_indices.push(r.index),
                Role::Passive => {}
            }
        }
        layout.positions = positions.into_iter().map(|p| p.unwrap()).collect();
        Ok(layout)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text).map_err(|m| Error::parse(path, m))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// The shipped 22-magnet array: 2 inputs and 20 readout nodes with
/// irregular spacing.
pub fn default_layout() -> ArrayLayout {
    ArrayLayout {
        positions: DEFAULT_POSITIONS_NM
            .iter()
            .map(|p| [p[0] * 1e-9, p[1] * 1e-9])
            .collect(),
        input_indices: vec![0, 21],
        readout_indices: (1..21).collect(),
    }
}

/// Dense table of point-dipole kernels. `get(i, j)` maps the reduced moment
/// `ms·V·m_j` of magnet `j` to its field at magnet `i`, in A/m per A·m².
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingTensor {
    n: usize,
    kernels: Vec<Mat3>,
}

impl CouplingTensor {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> &Mat3 {
        &self.kernels[i * self.n + j]
    }

    /// Row `i`: kernels from every source `j` onto observer `i`.
    #[inline]
    pub fn row(&self, i: usize) -> &[Mat3] {
        &self.kernels[i * self.n..(i + 1) * self.n]
    }
}

/// Point-dipole kernel `(3 r̂ r̂ᵀ − I) / (4π r³)` for a separation `r`.
pub fn dipole_kernel(r: Vec3) -> Mat3 {
    let d = r.norm();
    let u = r * (1.0 / d);
    let pre = 1.0 / (4.0 * PI * d * d * d);
    let mut k = [[0.0; 3]; 3];
    for (a, row) in k.iter_mut().enumerate() {
        for (b, v) in row.iter_mut().enumerate() {
            let delta = if a == b { 1.0 } else { 0.0 };
            *v = pre * (3.0 * u.0[a] * u.0[b] - delta);
        }
    }
    Mat3(k)
}

pub fn build_coupling_tensors(
    layout: &ArrayLayout,
    params: &MaterialParams,
) -> Result<CouplingTensor> {
    validate_layout(layout, params)?;
    let n = layout.len();
    let mut kernels = vec![Mat3::ZERO; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let (pi, pj) = (layout.positions[i], layout.positions[j]);
                let r = Vec3::new(pi[0] - pj[0], pi[1] - pj[1], 0.0);
                kernels[i * n + j] = dipole_kernel(r);
            }
        }
    }
    Ok(CouplingTensor { n, kernels })
}

/// Simulation timing and the static bias field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Integrator step (s).
    #[serde(rename = "dt_s")]
    pub dt: f64,
    /// Time between inputs (s).
    #[serde(rename = "sample_period_s")]
    pub sample_period: f64,
    pub rng_seed: u64,
    #[serde(default)]
    pub thermal_enabled: bool,
    /// Temperature of the stochastic field; only read when
    /// `thermal_enabled` is set.
    #[serde(default)]
    pub temperature_k: f64,
    /// Uniform static field applied to every free magnet (A/m). An in-plane
    /// component tilts the magnets off the easy axis; without it a
    /// configuration with every moment on ±z feels no torque at all.
    #[serde(rename = "bias_field_a_per_m")]
    pub bias_field: [f64; 3],
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 1e-12,
            sample_period: 3e-9,
            rng_seed: 0,
            thermal_enabled: false,
            temperature_k: 0.0,
            bias_field: [DEFAULT_BIAS_X, 0.0, 0.0],
        }
    }
}

/// In-plane bias shipped with the default configuration (A/m), about 0.3 H_k
/// of the default material.
pub const DEFAULT_BIAS_X: f64 = 700.0;

impl SimConfig {
    /// Number of integrator steps that make up `duration`, if it is an
    /// integral multiple of `dt` (to a relative 1e-9).
    pub fn steps_in(&self, duration: f64) -> Result<u64> {
        if !(duration >= 0.0 && duration.is_finite()) {
            return Err(Error::InvalidParams(format!("duration {duration:e} s")));
        }
        let ratio = duration / self.dt;
        let steps = ratio.round();
        if (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::InvalidParams(format!(
                "duration {duration:e} s is not a whole number of {:e} s steps",
                self.dt
            )));
        }
        Ok(steps as u64)
    }

    pub fn steps_per_sample(&self) -> Result<u64> {
        self.steps_in(self.sample_period)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= self.sample_period) {
            return Err(Error::InvalidParams(
                "need 0 < dt <= sample_period".to_string(),
            ));
        }
        if !self.bias_field.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParams("bias field must be finite".into()));
        }
        self.steps_per_sample().map(|_| ())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two(dx_nm: f64) -> ArrayLayout {
        ArrayLayout {
            positions: vec![[0.0, 0.0], [dx_nm * 1e-9, 0.0]],
            input_indices: vec![0],
            readout_indices: vec![1],
        }
    }

    fn violations(r: Result<()>) -> Vec<LayoutViolation> {
        match r {
            Err(Error::InvalidLayout(v)) => v,
            other => panic!("expected layout error, got {other:?}"),
        }
    }

    #[test]
    fn spaced_pair_is_valid() {
        assert!(validate_layout(&two(100.0), &MaterialParams::default()).is_ok());
    }

    #[test]
    fn close_pair_overlaps() {
        let v = violations(validate_layout(&two(30.0), &MaterialParams::default()));
        assert!(matches!(
            v[..],
            [LayoutViolation::Overlap { i: 0, j: 1, .. }]
        ));
    }

    #[test]
    fn shared_role_rejected() {
        let mut l = two(100.0);
        l.readout_indices = vec![0];
        let v = violations(validate_layout(&l, &MaterialParams::default()));
        assert_eq!(v, vec![LayoutViolation::RoleOverlap { index: 0 }]);
    }

    #[test]
    fn reports_every_violation() {
        let l = ArrayLayout {
            positions: vec![[0.0, 0.0], [0.0, 0.0], [10e-9, 0.0]],
            input_indices: vec![5],
            readout_indices: vec![],
        };
        let v = violations(validate_layout(&l, &MaterialParams::default()));
        assert!(v.contains(&LayoutViolation::DuplicatePosition { i: 0, j: 1 }));
        assert!(v
            .iter()
            .any(|x| matches!(x, LayoutViolation::Overlap { i: 0, j: 2, .. })));
        assert!(v.contains(&LayoutViolation::IndexOutOfRange { index: 5, len: 3 }));
        assert!(v.contains(&LayoutViolation::NoReadouts));
    }

    #[test]
    fn default_layout_shape() {
        let l = default_layout();
        assert_eq!(l.len(), 22);
        assert_eq!(l.input_indices.len(), 2);
        assert_eq!(l.readout_indices.len(), 20);
        assert_eq!(l, default_layout());
        validate_layout(&l, &MaterialParams::default()).unwrap();
    }

    #[test]
    fn default_layout_spacing() {
        // every magnet's nearest neighbour is 1.5-3 diameters away
        let l = default_layout();
        let d = MaterialParams::default().diameter;
        for i in 0..l.len() {
            let nn = (0..l.len())
                .filter(|&j| j != i)
                .map(|j| {
                    let (a, b) = (l.positions[i], l.positions[j]);
                    (a[0] - b[0]).hypot(a[1] - b[1])
                })
                .fold(f64::INFINITY, f64::min);
            assert!(
                (1.5 * d..=3.0 * d).contains(&nn),
                "magnet {i}: nearest neighbour at {:.1} nm",
                nn * 1e9
            );
        }
    }

    #[test]
    fn transverse_dipole_field() {
        let params = MaterialParams::default();
        let t = build_coupling_tensors(&two(100.0), &params).unwrap();
        let mu = 1.70e-18;
        let h = t.get(1, 0).mul_vec(Vec3::Z * mu);
        let r = 100e-9;
        let expected = -mu / (4.0 * PI * r * r * r);
        assert!((h.z() - expected).abs() < 1e-12 * expected.abs());
        assert_eq!((h.x(), h.y()), (0.0, 0.0));
        // hand-evaluated magnitude
        assert!((h.norm() - 135.3).abs() < 0.05, "{}", h.norm());
        assert_eq!(t.get(0, 1), t.get(1, 0));
    }

    #[test]
    fn steps_in_rejects_fractional() {
        let c = SimConfig::default();
        assert_eq!(c.steps_in(3e-9).unwrap(), 3000);
        assert_eq!(c.steps_in(0.0).unwrap(), 0);
        assert!(c.steps_in(1.5e-12).is_err());
    }

    #[test]
    fn material_file_round_trip() {
        let p = MaterialParams::default();
        assert_eq!(MaterialParams::from_toml(&p.to_toml()).unwrap(), p);
        let text = p.to_toml().replace("alpha = 1.0", "alpha = 1.5");
        assert!(MaterialParams::from_toml(&text).is_err());
    }

    #[test]
    fn layout_file_round_trip() {
        let mut l = default_layout();
        l.input_indices = vec![21, 0];
        l.readout_indices.reverse();
        l.readout_indices.pop();
        assert_eq!(ArrayLayout::from_csv(&l.to_csv()).unwrap(), l);
    }
}
