//! Run configuration.
//!
//! Configurations are JSON documents; unknown keys are rejected and every
//! physical invariant is checked by [`RunConfig::validate`]. The shipped
//! default (`configs/default.json`) equals [`RunConfig::reference`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::convergence::Sampling;
use crate::eigen::Window;
use crate::feedback::{BasisChoice, ControllerDesign};
use crate::observer::ObserverDesign;
use crate::plant::{PlantParameters, SpectralSearch};
use crate::quadrature::GaussLegendre;
use crate::state::StateFunction;
use crate::target::{MuSpec, TargetDynamics};
use crate::{simulation, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    /// `[κ_0, …, κ_N]`, ascending powers.
    pub kappa: Vec<f64>,
    pub mu: MuSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApproximationConfig {
    pub n: usize,
    pub basis: BasisChoice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    /// `w1 = sin(πz)`, `w2 = 0`, `w3 = 0`.
    Sine,
    Zero,
}

impl InitialState {
    pub fn state(&self) -> StateFunction {
        match self {
            InitialState::Sine => simulation::default_initial_state(),
            InitialState::Zero => StateFunction::zero(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub cells: usize,
    #[serde(rename = "T")]
    pub t_end: f64,
    pub x0: InitialState,
    /// Start of the decay-rate fit window.
    #[serde(default = "default_t_start")]
    pub t_start: f64,
}

fn default_t_start() -> f64 {
    0.2
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self { cells: 400, t_end: 2.0, x0: InitialState::Sine, t_start: default_t_start() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureConfig {
    /// Total Gauss–Legendre nodes on `[0, 1]`.
    pub nodes: usize,
    /// Nodes per panel; `nodes` must be a multiple.
    #[serde(default = "default_order")]
    pub order: usize,
}

fn default_order() -> usize {
    16
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { nodes: 64, order: 16 }
    }
}

/// What `converge` counts as success for a given order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Criterion {
    /// Disk containment and one eigenvalue per disk.
    Theorem,
    /// `max Re σ(closed loop) ≤ margin`.
    Margin(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub n_min: usize,
    pub n_max: usize,
    pub criterion: Criterion,
    /// Desired eigenvalues for the disks are collected up to
    /// `disk_im_factor · im_max` so disks straddling the window edge exist.
    #[serde(default = "default_disk_factor")]
    pub disk_im_factor: f64,
}

fn default_disk_factor() -> f64 {
    1.5
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self { n_min: 1, n_max: 20, criterion: Criterion::Theorem, disk_im_factor: default_disk_factor() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    /// Right edge of the root-search rectangle.
    pub re_max: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { re_max: 60.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub plant: PlantParameters,
    pub controller_target: TargetConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observer_target: Option<TargetConfig>,
    pub approximation: ApproximationConfig,
    pub epsilon: f64,
    pub window: Window,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub sampling: Sampling,
    #[serde(default)]
    pub convergence: ConvergenceConfig,
    #[serde(default)]
    pub search: SearchConfig,
}

fn config_err(context: &str, e: impl std::fmt::Display) -> Error {
    Error::Config(format!("{context}: {e}"))
}

impl RunConfig {
    /// The worked example: `α=11, β=21, γ=31`, `κ=12`, `μ=e^{−20τ}` for both
    /// controller and observer.
    pub fn reference() -> Self {
        let target = TargetConfig { kappa: vec![12.0, 1.0], mu: MuSpec::Rate { rate: -20.0 } };
        Self {
            plant: PlantParameters::reference(),
            controller_target: target.clone(),
            observer_target: Some(target),
            approximation: ApproximationConfig { n: 10, basis: BasisChoice::Intermediate },
            epsilon: 0.9,
            window: Window { re_min: -50.0, im_max: 200.0 },
            simulation: SimulationConfig::default(),
            quadrature: QuadratureConfig::default(),
            sampling: Sampling::default(),
            convergence: ConvergenceConfig::default(),
            search: SearchConfig::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| config_err("parse", e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(&path.display().to_string(), e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks every invariant; all failures map to [`Error::Config`].
    pub fn validate(&self) -> Result<()> {
        PlantParameters::new(self.plant.alpha(), self.plant.beta(), self.plant.gamma()).map_err(|e| config_err("plant", e))?;
        self.controller_target()?;
        self.observer_target()?;
        self.window_checked()?;
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(config_err("epsilon", format!("must lie in (0, 1), got {}", self.epsilon)));
        }
        self.quadrature_rule()?;
        let s = &self.simulation;
        if s.cells < 2 {
            return Err(config_err("simulation.cells", "must be at least 2"));
        }
        if !(s.t_end >= 0.0 && s.t_end.is_finite()) || !(s.t_start >= 0.0 && s.t_start.is_finite()) {
            return Err(config_err("simulation", "T and t_start must be finite and non-negative"));
        }
        if self.sampling.disk_points < 3 || self.sampling.grid < 2 {
            return Err(config_err("sampling", "need disk_points >= 3 and grid >= 2"));
        }
        let c = &self.convergence;
        if c.n_min > c.n_max {
            return Err(config_err("convergence", format!("n_min {} exceeds n_max {}", c.n_min, c.n_max)));
        }
        if !(c.disk_im_factor >= 1.0 && c.disk_im_factor.is_finite()) {
            return Err(config_err("convergence.disk_im_factor", "must be >= 1"));
        }
        if let Criterion::Margin(m) = c.criterion {
            if !m.is_finite() {
                return Err(config_err("convergence.criterion", "margin must be finite"));
            }
        }
        if !(self.search.re_max > 0.0 && self.search.re_max.is_finite()) {
            return Err(config_err("search.re_max", "must be positive"));
        }
        Ok(())
    }

    pub fn controller_target(&self) -> Result<TargetDynamics> {
        let t = &self.controller_target;
        TargetDynamics::for_plant(t.kappa.clone(), t.mu, &self.plant).map_err(|e| config_err("controller_target", e))
    }

    pub fn observer_target(&self) -> Result<Option<TargetDynamics>> {
        self.observer_target
            .as_ref()
            .map(|t| TargetDynamics::for_plant(t.kappa.clone(), t.mu, &self.plant).map_err(|e| config_err("observer_target", e)))
            .transpose()
    }

    pub fn window_checked(&self) -> Result<Window> {
        Window::new(self.window.re_min, self.window.im_max).map_err(|e| config_err("window", e))
    }

    /// Window over which desired eigenvalues seed the disk family.
    pub fn disk_window(&self) -> Result<Window> {
        let w = self.window_checked()?;
        Window::new(w.re_min, w.im_max * self.convergence.disk_im_factor)
    }

    pub fn quadrature_rule(&self) -> Result<GaussLegendre> {
        let q = &self.quadrature;
        if q.order == 0 || q.nodes == 0 || !q.nodes.is_multiple_of(q.order) {
            return Err(config_err("quadrature", format!("nodes ({}) must be a positive multiple of order ({})", q.nodes, q.order)));
        }
        GaussLegendre::composite(q.nodes / q.order, q.order).map_err(|e| config_err("quadrature", e))
    }

    pub fn spectral_search(&self) -> SpectralSearch {
        SpectralSearch { re_max: self.search.re_max, ..SpectralSearch::default() }
    }

    pub fn controller_design(&self) -> Result<ControllerDesign> {
        ControllerDesign::new(self.plant, self.controller_target()?, self.quadrature_rule()?, self.spectral_search())
    }

    /// `None` when no observer target is configured.
    pub fn observer_design(&self) -> Result<Option<ObserverDesign>> {
        match self.observer_target()? {
            None => Ok(None),
            Some(t) => Ok(Some(ObserverDesign::new(self.plant, t, self.quadrature_rule()?, self.spectral_search())?)),
        }
    }
}
