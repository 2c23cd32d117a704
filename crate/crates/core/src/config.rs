//! Run configuration: a single TOML document that fully determines an
//! experiment. Every output directory receives a resolved copy.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::magnet::{default_layout, ArrayLayout, MaterialParams, SimConfig};
use crate::readout::{DEFAULT_LAMBDA, DEFAULT_THRESHOLD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReservoirKind {
    Nanomagnet,
    Esn,
}

/// Material constants that replace the shipped defaults when present.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialOverrides {
    #[serde(rename = "ms_a_per_m", skip_serializing_if = "Option::is_none")]
    pub ms: Option<f64>,
    #[serde(rename = "ku_j_per_m3", skip_serializing_if = "Option::is_none")]
    pub ku: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(rename = "gamma_rad_per_s_t", skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(rename = "diameter_m", skip_serializing_if = "Option::is_none")]
    pub diameter: Option<f64>,
    #[serde(rename = "thickness_m", skip_serializing_if = "Option::is_none")]
    pub thickness: Option<f64>,
}

impl MaterialOverrides {
    pub fn apply(&self, base: MaterialParams) -> MaterialParams {
        MaterialParams {
            ms: self.ms.unwrap_or(base.ms),
            ku: self.ku.unwrap_or(base.ku),
            alpha: self.alpha.unwrap_or(base.alpha),
            gamma: self.gamma.unwrap_or(base.gamma),
            diameter: self.diameter.unwrap_or(base.diameter),
            thickness: self.thickness.unwrap_or(base.thickness),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub n_waves: usize,
    pub n_train: usize,
    /// Seed of the wave-type coin flips. Mandatory.
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearningConfig {
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantize_bits: Option<u32>,
}

fn default_lambda() -> f64 {
    DEFAULT_LAMBDA
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

impl Default for LearningConfig {
    fn default() -> Self {
        LearningConfig {
            lambda: DEFAULT_LAMBDA,
            threshold: DEFAULT_THRESHOLD,
            quantize_bits: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EsnConfig {
    pub nodes: usize,
    pub spectral_radius: f64,
    pub seed: u64,
}

impl Default for EsnConfig {
    fn default() -> Self {
        EsnConfig {
            nodes: 20,
            spectral_radius: 0.9,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub reservoir: ReservoirKind,
    /// `"default"` or a path to a layout CSV, relative to the config file.
    pub layout: String,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub material: MaterialOverrides,
    pub sim: SimConfig,
    pub task: TaskConfig,
    #[serde(default)]
    pub learning: LearningConfig,
    #[serde(default)]
    pub esn: EsnConfig,
    /// Directory relative paths are resolved against. Not serialized.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    /// The benchmark: shipped layout and material, 25 waves, 120/30 split.
    pub fn benchmark() -> Self {
        RunConfig {
            reservoir: ReservoirKind::Nanomagnet,
            layout: "default".into(),
            output_dir: PathBuf::from("out/benchmark"),
            material: MaterialOverrides::default(),
            sim: SimConfig::default(),
            task: TaskConfig {
                n_waves: 25,
                n_train: 120,
                seed: 1,
            },
            learning: LearningConfig {
                quantize_bits: Some(8),
                ..LearningConfig::default()
            },
            esn: EsnConfig::default(),
            base_dir: PathBuf::new(),
        }
    }

    pub fn from_toml(text: &str) -> std::result::Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|m| Error::parse(path, m))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate().map_err(|e| Error::parse(path, e))?;
        Ok(cfg)
    }

    pub fn material_params(&self) -> MaterialParams {
        self.material.apply(MaterialParams::default())
    }

    pub fn layout_path(&self) -> Option<PathBuf> {
        (self.layout != "default").then(|| self.base_dir.join(&self.layout))
    }

    pub fn load_layout(&self) -> Result<ArrayLayout> {
        match self.layout_path() {
            None => Ok(default_layout()),
            Some(p) => ArrayLayout::load(&p),
        }
    }

    /// Output directory, resolved against the config location.
    pub fn resolved_output_dir(&self) -> PathBuf {
        self.base_dir.join(&self.output_dir)
    }

    /// Copy with every relative path made absolute-or-cwd-relative, suitable
    /// for echoing into an output directory.
    pub fn resolved(&self) -> RunConfig {
        let mut c = self.clone();
        if let Some(p) = self.layout_path() {
            c.layout = p.to_string_lossy().into_owned();
        }
        c.output_dir = self.resolved_output_dir();
        c.base_dir = PathBuf::new();
        c
    }

    /// Range checks on every numeric field.
    pub fn validate(&self) -> std::result::Result<(), String> {
        self.material_params()
            .validate()
            .map_err(|e| e.to_string())?;
        self.sim.validate().map_err(|e| e.to_string())?;
        let t = &self.task;
        if t.n_waves == 0 {
            return Err("task.n_waves must be >= 1".into());
        }
        if t.n_train == 0 || t.n_train >= t.n_waves * crate::task::WAVE_LEN {
            return Err(format!(
                "task.n_train = {} must lie in 1..{}",
                t.n_train,
                t.n_waves * crate::task::WAVE_LEN
            ));
        }
        let l = &self.learning;
        if !(l.lambda >= 0.0 && l.lambda.is_finite()) {
            return Err("learning.lambda must be finite and >= 0".into());
        }
        if !l.threshold.is_finite() {
            return Err("learning.threshold must be finite".into());
        }
        if let Some(b) = l.quantize_bits {
            if !(2..=16).contains(&b) {
                return Err(format!("learning.quantize_bits = {b} not in [2, 16]"));
            }
        }
        if self.esn.nodes == 0
            || self.esn.spectral_radius.is_nan()
            || self.esn.spectral_radius <= 0.0
        {
            return Err("esn.nodes must be >= 1 and esn.spectral_radius > 0".into());
        }
        Ok(())
    }

    /// Stable identifier of the experiment content: config (minus output
    /// location), material and layout. FNV-1a over their text forms.
    pub fn run_id(&self, layout: &ArrayLayout) -> String {
        let mut c = self.resolved();
        c.output_dir = PathBuf::new();
        c.layout = String::new();
        let text = format!(
            "{}\n{}\n{}",
            c.to_toml(),
            self.material_params().to_toml(),
            layout.to_csv()
        );
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in text.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn benchmark_round_trip() {
        let c = RunConfig::benchmark();
        let back = RunConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        c.validate().unwrap();
    }

    #[test]
    fn seeds_are_mandatory() {
        let text = RunConfig::benchmark().to_toml().replace("seed = 1\n", "");
        assert!(RunConfig::from_toml(&text).is_err());
    }

    #[test]
    fn overrides_apply() {
        let mut c = RunConfig::benchmark();
        c.material.ku = Some(1234.0);
        let back = RunConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back.material_params().ku, 1234.0);
        assert_eq!(back.material_params().ms, MaterialParams::default().ms);
    }

    #[test]
    fn range_checks() {
        let mut c = RunConfig::benchmark();
        c.task.n_train = 150;
        assert!(c.validate().is_err());
        let mut c = RunConfig::benchmark();
        c.learning.quantize_bits = Some(1);
        assert!(c.validate().is_err());
        let mut c = RunConfig::benchmark();
        c.sim.dt = 7e-13;
        assert!(c.validate().is_err());
    }

    #[test]
    fn run_id_ignores_output_dir() {
        let a = RunConfig::benchmark();
        let mut b = a.clone();
        b.output_dir = "elsewhere".into();
        let l = default_layout();
        assert_eq!(a.run_id(&l), b.run_id(&l));
        b.task.seed = 2;
        assert_ne!(a.run_id(&l), b.run_id(&l));
    }
}
