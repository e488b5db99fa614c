//! Run configuration files (TOML with a `format_version` key).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{
    build_arm_system, cascade_unmatched, linear2, matched_scalar, scalar_lqr, ArmGravity, ArmModel, Benchmark,
};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub format_version: u32,
    pub plant: PlantConfig,
    pub exploration: ExplorationConfig,
    #[serde(default)]
    pub learning: LearningConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<BasisConfig>,
    #[serde(default)]
    pub robust: RobustConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_two: Option<PhaseTwoSection>,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Which benchmark to build, with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlantConfig {
    Arm {
        /// s
        #[serde(default = "d_tau_n")]
        tau_n: f64,
        /// kg
        #[serde(default = "d_mass")]
        mass: f64,
        /// m
        #[serde(default = "d_length")]
        length: f64,
        /// kg·m²
        #[serde(default = "d_inertia")]
        inertia: f64,
        #[serde(default = "d_gravity_sign")]
        gravity_sign: ArmGravity,
    },
    ScalarLqr,
    Linear2 {
        seed: u64,
    },
    MatchedScalar,
    CascadeUnmatched,
}

fn d_tau_n() -> f64 {
    0.1
}
fn d_mass() -> f64 {
    1.65
}
fn d_length() -> f64 {
    0.179
}
fn d_inertia() -> f64 {
    0.0779
}
fn d_gravity_sign() -> ArmGravity {
    ArmGravity::Restoring
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplorationConfig {
    pub amplitude: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningConfig {
    /// s
    pub interval_len: f64,
    /// Defaults to four rows per unknown.
    pub intervals: Option<usize>,
    pub delta: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Phase-one tracking gain on cascade plants.
    pub tracking_gain: f64,
}

impl Default for LearningConfig {
    fn default() -> Self {
        LearningConfig {
            interval_len: 0.1,
            intervals: None,
            delta: 1e-6,
            tol: 1e-6,
            max_iter: 20,
            tracking_gain: 10.0,
        }
    }
}

/// Polynomial degree schedule for the two-loop scheme. Stage `d` uses value
/// terms of degree `1..=d` and policy terms of degree `1..=d−1` (at least 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    pub schedule: Vec<u32>,
    pub residual_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobustConfig {
    /// Fixed constant `ρ`; searched on the ladder when absent.
    pub rho: Option<f64>,
    pub rho_step: f64,
    pub rho_max: f64,
    pub min_relative_margin: f64,
    pub ladder_samples: usize,
    pub level_ladder: usize,
}

impl Default for RobustConfig {
    fn default() -> Self {
        RobustConfig {
            rho: None,
            rho_step: 0.25,
            rho_max: 20.0,
            min_relative_margin: 0.1,
            ladder_samples: 200,
            level_ladder: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    /// RK4 step (s).
    pub step: f64,
    /// Length of the post-learning run (s).
    pub post_horizon: f64,
    /// Initial-state scalings used to probe the invariant set.
    pub probe_scales: Vec<f64>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            step: 1e-3,
            post_horizon: 5.0,
            probe_scales: vec![1.0, 0.5, -0.5, -1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseTwoSection {
    pub amplitude: f64,
    pub seed: u64,
    pub interval_len: f64,
    pub intervals: Option<usize>,
    pub feedback_gain: f64,
}

impl Default for PhaseTwoSection {
    fn default() -> Self {
        PhaseTwoSection {
            amplitude: 1.0,
            seed: 2,
            interval_len: 0.1,
            intervals: Some(40),
            feedback_gain: 8.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub step: Option<f64>,
    pub max_iter: Option<usize>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::ConfigParse(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(s) = o.seed {
            self.exploration.seed = s;
        }
        if let Some(d) = &o.out_dir {
            self.output.dir = Some(d.clone());
        }
        if let Some(h) = o.step {
            self.simulation.step = h;
        }
        if let Some(m) = o.max_iter {
            self.learning.max_iter = m;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::ConfigParse(format!("{what} must be positive and finite")));
        if self.format_version != FORMAT_VERSION {
            return Err(Error::ConfigParse(format!(
                "unsupported format_version {} (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if let PlantConfig::Arm {
            tau_n,
            mass,
            length,
            inertia,
            ..
        } = &self.plant
        {
            for (name, v) in [("tau_n", tau_n), ("mass", mass), ("length", length), ("inertia", inertia)] {
                if !pos(*v) {
                    return bad(name);
                }
            }
        }
        if !(self.exploration.amplitude >= 0.0) || !self.exploration.amplitude.is_finite() {
            return Err(Error::ConfigParse("exploration.amplitude must be nonnegative".into()));
        }
        let l = &self.learning;
        if !pos(l.interval_len) {
            return bad("learning.interval_len");
        }
        if !(l.delta >= 0.0) || !pos(l.tol) || l.max_iter == 0 || !pos(l.tracking_gain) {
            return Err(Error::ConfigParse("learning settings out of range".into()));
        }
        if l.intervals == Some(0) {
            return bad("learning.intervals");
        }
        if let Some(b) = &self.basis {
            if b.schedule.is_empty() || b.schedule.contains(&0) {
                return Err(Error::ConfigParse("basis.schedule must list positive degrees".into()));
            }
            if !pos(b.residual_threshold) {
                return bad("basis.residual_threshold");
            }
        }
        let r = &self.robust;
        if let Some(rho) = r.rho {
            if !pos(rho) {
                return bad("robust.rho");
            }
        }
        if !pos(r.rho_step) || !pos(r.rho_max) || r.ladder_samples < 2 || r.level_ladder < 2 {
            return Err(Error::ConfigParse("robust settings out of range".into()));
        }
        let s = &self.simulation;
        if !pos(s.step) || !pos(s.post_horizon) {
            return bad("simulation.step and simulation.post_horizon");
        }
        if let Some(p) = &self.phase_two {
            if !(p.amplitude >= 0.0) || !pos(p.interval_len) || !pos(p.feedback_gain) || p.intervals == Some(0) {
                return Err(Error::ConfigParse("phase_two settings out of range".into()));
            }
        }
        Ok(())
    }

    pub fn benchmark(&self) -> Result<Benchmark> {
        match &self.plant {
            PlantConfig::Arm {
                tau_n,
                mass,
                length,
                inertia,
                gravity_sign,
            } => build_arm_system(&ArmModel {
                tau_n: *tau_n,
                mass: *mass,
                length: *length,
                inertia: *inertia,
                gravity_sign: *gravity_sign,
                ..ArmModel::default()
            }),
            PlantConfig::ScalarLqr => scalar_lqr(),
            PlantConfig::Linear2 { seed } => linear2(*seed),
            PlantConfig::MatchedScalar => matched_scalar(),
            PlantConfig::CascadeUnmatched => cascade_unmatched(),
        }
    }

    pub fn out_dir(&self, default_name: &str) -> PathBuf {
        self.output
            .dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("runs").join(default_name))
    }
}
