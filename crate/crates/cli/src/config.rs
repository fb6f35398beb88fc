use std::path::Path;

use anyhow::Context;
use nlslab::funcalc::{check_s, ContourOptions};
use nlslab::modulation::NewtonOptions;
use nlslab::simulate::{Absorber, Perturbation, PerturbationShape, SimulationConfig};
use nlslab::{make_grid, GridSpec, NonlinearitySpec};
use serde::{Deserialize, Serialize};

use crate::Invalid;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub grid: GridSpec,
    pub nonlinearity: NonlinearitySpec,
    pub profile: ProfileSection,
    pub contour: ContourOptions,
    pub simulation: SimulationSection,
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileSection {
    pub alpha: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub alpha0: f64,
    pub beta0: f64,
    pub h: f64,
    /// Fixed step; calibrated against the soliton when absent.
    pub dt: Option<f64>,
    pub t_end: f64,
    pub s: f64,
    pub sample_interval: f64,
    pub transient_fraction: f64,
    /// Set `enabled = false` to run on the bare periodic box.
    pub absorber: AbsorberSection,
    pub perturbation: Perturbation,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbsorberSection {
    pub enabled: bool,
    pub width: f64,
    pub strength: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub contour: f64,
    pub dt_target: f64,
    pub newton_rel: f64,
    pub newton_max_iters: usize,
}

impl Default for ProfileSection {
    fn default() -> Self {
        Self { alpha: 2.0 }
    }
}

impl Default for AbsorberSection {
    fn default() -> Self {
        let a = Absorber::default();
        Self { enabled: true, width: a.width, strength: a.strength }
    }
}

impl Default for SimulationSection {
    fn default() -> Self {
        let d = SimulationConfig::default();
        Self {
            alpha0: d.alpha0,
            beta0: d.beta0,
            h: d.h,
            dt: d.dt,
            t_end: d.t_end,
            s: d.s,
            sample_interval: d.sample_interval,
            transient_fraction: d.transient_fraction,
            absorber: AbsorberSection::default(),
            perturbation: d.perturbation,
        }
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        let n = NewtonOptions::default();
        Self {
            contour: 1e-12,
            dt_target: SimulationConfig::default().dt_target,
            newton_rel: n.rel_tol,
            newton_max_iters: n.max_iters,
        }
    }
}

impl Default for Config {
    fn default() -> Self {
        let d = SimulationConfig::default();
        Self {
            grid: d.grid,
            nonlinearity: d.nl,
            profile: ProfileSection::default(),
            contour: ContourOptions::default(),
            simulation: SimulationSection::default(),
            tolerances: Tolerances::default(),
        }
    }
}

impl Config {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).map_err(|e| Invalid(format!("config {}: {e}", path.display())).into())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn simulation_config(&self) -> SimulationConfig {
        let s = &self.simulation;
        SimulationConfig {
            grid: self.grid,
            nl: self.nonlinearity.clone(),
            alpha0: s.alpha0,
            beta0: s.beta0,
            h: s.h,
            dt: s.dt,
            dt_target: self.tolerances.dt_target,
            t_end: s.t_end,
            perturbation: s.perturbation,
            s: s.s,
            sample_interval: s.sample_interval,
            absorber: s.absorber.enabled.then_some(Absorber { width: s.absorber.width, strength: s.absorber.strength }),
            newton: NewtonOptions {
                rel_tol: self.tolerances.newton_rel,
                max_iters: self.tolerances.newton_max_iters,
                ..NewtonOptions::default()
            },
            transient_fraction: s.transient_fraction,
        }
    }

    /// Checks every section; the error names the first failing invariant.
    pub fn validate(&self) -> anyhow::Result<()> {
        make_grid(self.grid.half_width, self.grid.points).map_err(|e| Invalid(format!("grid: {e}")))?;
        self.nonlinearity.validate().map_err(|e| Invalid(format!("nonlinearity: {e}")))?;
        if !(self.profile.alpha > 0.0) {
            return Err(Invalid(format!("profile: alpha = {} must be positive", self.profile.alpha)).into());
        }
        let c = &self.contour;
        if !(c.eps > 0.0 && c.eps < 1.0) {
            return Err(Invalid(format!("contour: eps = {} must lie in (0, 1)", c.eps)).into());
        }
        if !(c.panel_ratio > 1.0) || c.nodes_per_panel < 2 || !(c.radius_factor >= 1.0) {
            return Err(Invalid("contour: need panel_ratio > 1, nodes_per_panel >= 2, radius_factor >= 1".into()).into());
        }
        if !(self.tolerances.contour > 0.0 && self.tolerances.dt_target > 0.0 && self.tolerances.newton_rel > 0.0) {
            return Err(Invalid("tolerances: all tolerances must be positive".into()).into());
        }
        let a = &self.simulation.absorber;
        if a.enabled && !(a.width > 0.0 && a.width < 1.0 && a.strength > 0.0) {
            return Err(Invalid(format!("simulation.absorber: width {} must lie in (0, 1), strength > 0", a.width)).into());
        }
        if let PerturbationShape::GaussianBump { width } | PerturbationShape::RandomEven { width, .. } =
            self.simulation.perturbation.shape
        {
            if !(width > 0.0) {
                return Err(Invalid("simulation.perturbation: width must be positive".into()).into());
            }
        }
        check_s(self.simulation.s).map_err(|e| Invalid(format!("simulation: {e}")))?;
        self.simulation_config().validate().map_err(|e| Invalid(format!("simulation: {e}")))?;
        Ok(())
    }
}
