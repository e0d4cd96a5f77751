//! Run configuration. Every section has defaults, so an empty JSON object is
//! a valid configuration; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Room heating with advection, a heater and a wall actuator.
    Guiding,
    /// Analytic cosine snapshot sets on `[0, 2π]²`.
    CosExamples,
    /// Cubic reaction-diffusion on the unit square.
    Semilinear,
    /// Room model with a single wall actuator and a time-varying airflow.
    Mpc,
    /// Small one-dimensional heat equation.
    Heat1d,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Guiding => "guiding",
            Preset::CosExamples => "cos-examples",
            Preset::Semilinear => "semilinear",
            Preset::Mpc => "mpc",
            Preset::Heat1d => "heat-1d",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weight {
    H,
    V,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyName {
    Auto,
    Svd,
    GramM,
    GramSnapshots,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepName {
    Armijo,
    BarzilaiBorwein,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlChoice {
    /// The three reference inputs: off, constant and periodic.
    Reference,
    /// A single zero input.
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub controls: ControlChoice,
    /// Factor applied to the preset initial state.
    pub initial_scale: f64,
    /// Keep the source and boundary loads of the preset.
    pub loads: bool,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self { controls: ControlChoice::Reference, initial_scale: 1.0, loads: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PodConfig {
    /// Fixed basis rank; exclusive with `energy_tol`.
    pub rank: Option<usize>,
    /// Smallest rank whose energy ratio exceeds `1 − energy_tol`.
    pub energy_tol: Option<f64>,
    pub weight: Weight,
    pub include_dq: bool,
    pub strategy: StrategyName,
    /// Ranks swept by the reduced-model error curves.
    pub ranks: Vec<usize>,
}

impl Default for PodConfig {
    fn default() -> Self {
        Self {
            rank: Some(40),
            energy_tol: None,
            weight: Weight::H,
            include_dq: false,
            strategy: StrategyName::Auto,
            ranks: vec![1, 2, 3, 5, 10, 20, 40],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlConfig {
    /// Weight of the tracking term over the horizon.
    pub tracking_weight: f64,
    pub terminal_weight: f64,
    pub regularization: f64,
    /// Constant desired temperature for both tracking terms.
    pub target: f64,
    pub lower: f64,
    pub upper: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub step: StepName,
    /// Surrogate ranks compared against the full optimum.
    pub ranks: Vec<usize>,
    /// Target certified error of the adaptive surrogate loop.
    pub eps_apo: f64,
    pub ell_max: usize,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            tracking_weight: 1.0,
            terminal_weight: 0.1,
            regularization: 1e-3,
            target: 17.0,
            lower: 0.0,
            upper: 30.0,
            tol: 1e-8,
            max_iter: 5000,
            step: StepName::BarzilaiBorwein,
            ranks: vec![5, 10, 20],
            eps_apo: 1e-4,
            ell_max: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MpcConfig {
    pub dt: f64,
    pub steps: usize,
    pub horizon: usize,
    pub ell: usize,
    /// Rebuild threshold as a fraction of the largest full-order control norm.
    pub tau: f64,
    pub regularization: f64,
    pub epsilon: f64,
    pub sigma_w: f64,
    pub upper: f64,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self { dt: 0.05, steps: 100, horizon: 10, ell: 10, tau: 0.03, regularization: 1.0, epsilon: 1e-3, sigma_w: 1.0, upper: 1e7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParetoConfig {
    pub h_par: f64,
    pub h_perp: f64,
    pub alpha_ws: f64,
    pub max_points: usize,
    /// Solve the scalarized problems on certified surrogates.
    pub pod: bool,
    pub ell0: usize,
    pub ell_incr: usize,
    pub ell_max: usize,
    pub eps_max: f64,
}

impl Default for ParetoConfig {
    fn default() -> Self {
        Self { h_par: 0.5, h_perp: 0.1, alpha_ws: 1e-3, max_points: 20, pod: false, ell0: 4, ell_incr: 2, ell_max: 20, eps_max: 1e-2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Model preset; each command has its own default when absent.
    pub preset: Option<Preset>,
    /// Mesh resolution handed to the preset.
    pub resolution: usize,
    pub time_nodes: usize,
    pub simulate: SimulateConfig,
    pub pod: PodConfig,
    pub control: ControlConfig,
    pub mpc: MpcConfig,
    pub pareto: ParetoConfig,
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            preset: None,
            resolution: 26,
            time_nodes: 101,
            simulate: SimulateConfig::default(),
            pod: PodConfig::default(),
            control: ControlConfig::default(),
            mpc: MpcConfig::default(),
            pareto: ParetoConfig::default(),
            out_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution == 0 {
            return Err(invalid("resolution must be positive"));
        }
        if self.time_nodes < 2 {
            return Err(invalid("need at least two time nodes"));
        }
        match (self.pod.rank, self.pod.energy_tol) {
            (Some(_), Some(_)) => return Err(invalid("set either pod.rank or pod.energy_tol, not both")),
            (None, None) => return Err(invalid("one of pod.rank and pod.energy_tol is required")),
            (Some(0), _) => return Err(invalid("pod.rank must be positive")),
            (_, Some(e)) if !(e > 0.0 && e < 1.0) => return Err(invalid("pod.energy_tol must lie in (0, 1)")),
            _ => {}
        }
        if self.pod.ranks.contains(&0) || self.control.ranks.contains(&0) {
            return Err(invalid("ranks must be positive"));
        }
        let c = &self.control;
        if !(c.regularization > 0.0 && c.tracking_weight >= 0.0 && c.terminal_weight >= 0.0) {
            return Err(invalid("control weights must be nonnegative and the regularization positive"));
        }
        if !(c.lower <= c.upper) || !(c.tol > 0.0) || !(c.eps_apo > 0.0) || c.ell_max == 0 {
            return Err(invalid("invalid control bounds, tolerance or rank cap"));
        }
        let m = &self.mpc;
        if !(m.dt > 0.0 && m.tau > 0.0 && m.regularization > 0.0 && m.epsilon > 0.0 && m.sigma_w > 0.0) || m.steps == 0 || m.horizon == 0 || m.ell == 0 {
            return Err(invalid("MPC step, horizon, rank and weights must be positive"));
        }
        let p = &self.pareto;
        if !(p.h_par > 0.0 && p.h_perp >= 0.0 && p.alpha_ws > 0.0 && p.eps_max > 0.0) || p.ell0 == 0 || p.ell0 > p.ell_max {
            return Err(invalid("invalid Pareto spacing, weight or rank range"));
        }
        Ok(())
    }
}
