//! TOML run configuration.
//!
//! Every section except `barrier` and `disturbance` may be omitted; missing
//! keys take the defaults of the shipped scenarios. Unknown keys are errors.

use std::fs;
use std::path::{Path, PathBuf};

use etsafe_core::barrier::{ClassK, OrbitalRangeBarrier};
use etsafe_core::dynamics::{DisturbanceModel, GravityModel, SatelliteState};
use etsafe_core::engine::Scheme;
use etsafe_core::numerics::{EventLocatorConfig, IntegratorConfig, Interpolation, State};
use etsafe_core::orbital::SafeguardingControllerConfig;
use etsafe_core::scenario::{PlanarScenario, SatelliteScenario};
use etsafe_core::taumodel::TauPModel;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Satellite,
    PlanarDemo,
}

impl ScenarioKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioKind::Satellite => "satellite",
            ScenarioKind::PlanarDemo => "planar-demo",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    pub scheme: Scheme,
    pub horizon: f64,
    #[serde(default)]
    pub seed: u64,
    /// Hours per normalized time unit. Copied into summaries next to the
    /// normalized values; the data itself is never rescaled.
    #[serde(default)]
    pub time_unit_hours: Option<f64>,
    /// Keep every n-th dense trajectory sample (event boundaries are always kept).
    #[serde(default = "default_stride")]
    pub output_stride: usize,
    #[serde(default)]
    pub gravity: GravitySection,
    pub barrier: BarrierSection,
    pub disturbance: DisturbanceSection,
    #[serde(default)]
    pub controller: ControllerSection,
    #[serde(default)]
    pub filter: Option<FilterSection>,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub events: EventsSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub tau: TauSection,
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GravitySection {
    pub mu: f64,
    pub radius: f64,
    pub singularity_floor: f64,
}

impl Default for GravitySection {
    fn default() -> Self {
        let g = GravityModel::default();
        Self {
            mu: g.mu,
            radius: g.radius,
            singularity_floor: g.singularity_floor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierSection {
    #[serde(default)]
    pub alpha: ClassK,
    /// Disturbance bound used in the robust term; must equal `disturbance.d_bar`.
    pub d_bar: f64,
    /// Satellite: centre of the safe radial band (default `2 R`).
    #[serde(default)]
    pub center: Option<f64>,
    /// Satellite: half width of the band (default `0.4 R`).
    #[serde(default)]
    pub half_width: Option<f64>,
    /// Planar demo: radius of the safe disk (default 1).
    #[serde(default)]
    pub disk_radius: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DisturbanceChoice {
    None,
    PiecewiseConstant,
    ZonalJ2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceSection {
    pub kind: DisturbanceChoice,
    #[serde(default)]
    pub d_bar: f64,
    /// Piecewise-constant only: time between direction redraws.
    #[serde(default)]
    pub hold_time: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerSection {
    pub c_buffer: f64,
    pub retarget_gain: f64,
}

impl Default for ControllerSection {
    fn default() -> Self {
        let c = SafeguardingControllerConfig::default();
        Self {
            c_buffer: c.c_buffer,
            retarget_gain: c.retarget_gain,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSection {
    pub b_gain: f64,
    pub h_bar: f64,
    pub c: f64,
    pub goal: [f64; 2],
    pub nominal_gain: f64,
}

impl Default for FilterSection {
    fn default() -> Self {
        let p = PlanarScenario::default();
        Self {
            b_gain: p.b_gain,
            h_bar: p.h_bar,
            c: p.c,
            goal: p.goal,
            nominal_gain: p.nominal_gain,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorSection {
    pub step_size: f64,
    pub interpolation: Interpolation,
    /// Steps after each event before triggers are re-armed.
    pub dwell_steps: usize,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        let i = IntegratorConfig::default();
        Self {
            step_size: i.step_size,
            interpolation: i.interpolation,
            dwell_steps: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EventsSection {
    pub time_tolerance: f64,
    pub value_tolerance: f64,
    pub max_bisections: u32,
}

impl Default for EventsSection {
    fn default() -> Self {
        let e = EventLocatorConfig::default();
        Self {
            time_tolerance: e.time_tolerance,
            value_tolerance: e.value_tolerance,
            max_bisections: e.max_bisections,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSection {
    /// Satellite: circular orbit of this radius in the x-y plane.
    pub radius: Option<f64>,
    /// Satellite: full state `[rx, ry, rz, vx, vy, vz]`.
    pub state: Option<Vec<f64>>,
    /// Planar demo: starting point (default origin).
    pub position: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TauSection {
    /// Fitted model for the maneuver scheme, relative to the config file.
    pub model: Option<PathBuf>,
    pub radius_grid: Vec<f64>,
    pub n_per_radius: usize,
    /// Samples whose trigger has not fired by this time are censored.
    pub max_time: f64,
}

impl Default for TauSection {
    fn default() -> Self {
        Self {
            model: None,
            radius_grid: vec![1.62, 1.7, 1.78, 1.86, 1.94, 2.0, 2.1, 2.25, 2.38],
            n_per_radius: 100,
            max_time: 3000.0,
        }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_err(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| config_err(e.to_string()))
    }

    /// Parse a config file. A relative `tau.model` is resolved against the
    /// directory holding the file.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)
            .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        if let Some(model) = &cfg.tau.model {
            if model.is_relative() {
                let base = path.parent().unwrap_or_else(|| Path::new(""));
                cfg.tau.model = Some(base.join(model));
            }
        }
        Ok(cfg)
    }

    pub fn apply_overrides(&mut self, seed: Option<u64>, horizon: Option<f64>) {
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(h) = horizon {
            self.horizon = h;
        }
    }

    /// Checks everything that can be checked without running a simulation.
    pub fn validate(&self) -> Result<(), CliError> {
        positive("horizon", self.horizon)?;
        if self.output_stride == 0 {
            return Err(config_err("output_stride must be at least 1"));
        }
        if let Some(u) = self.time_unit_hours {
            positive("time_unit_hours", u)?;
        }
        self.check_d_bar()?;
        match self.scenario {
            ScenarioKind::Satellite => {
                if !matches!(self.scheme, Scheme::Greedy | Scheme::Maneuver) {
                    return Err(config_err(format!(
                        "scheme {} does not apply to the satellite scenario",
                        self.scheme.as_str()
                    )));
                }
                if self.filter.is_some() {
                    return Err(config_err("[filter] only applies to planar-demo"));
                }
                if self.barrier.disk_radius.is_some() || self.initial.position.is_some() {
                    return Err(config_err(
                        "disk_radius and initial.position only apply to planar-demo",
                    ));
                }
                let scenario = self.satellite()?;
                let x0 = self.satellite_initial(&scenario)?;
                let h0 = scenario.range.h_of_radius(x0.radius());
                if h0 < 0.0 {
                    return Err(config_err(format!(
                        "initial radius {} is outside the safe band (h = {h0})",
                        x0.radius()
                    )));
                }
                if x0.specific_energy(scenario.gravity.mu) >= 0.0 {
                    return Err(config_err("initial state is not on a bound orbit"));
                }
                self.check_tau_campaign(&scenario)
            }
            ScenarioKind::PlanarDemo => {
                if self.scheme != Scheme::Intermittent {
                    return Err(config_err(format!(
                        "scheme {} does not apply to planar-demo",
                        self.scheme.as_str()
                    )));
                }
                if self.barrier.center.is_some()
                    || self.barrier.half_width.is_some()
                    || self.initial.radius.is_some()
                    || self.initial.state.is_some()
                {
                    return Err(config_err(
                        "barrier.center/half_width and initial.radius/state only apply to satellite",
                    ));
                }
                if self.disturbance.kind == DisturbanceChoice::ZonalJ2 {
                    return Err(config_err(
                        "zonal-j2 disturbance needs the satellite scenario",
                    ));
                }
                let scenario = self.planar()?;
                let p = self.planar_initial();
                let h0 = scenario.disk_radius.powi(2) - p[0] * p[0] - p[1] * p[1];
                if h0.is_nan() || h0 < 0.0 {
                    return Err(config_err(format!(
                        "initial position {p:?} is outside the safe disk"
                    )));
                }
                Ok(())
            }
        }
    }

    fn check_d_bar(&self) -> Result<(), CliError> {
        let (a, b) = (self.barrier.d_bar, self.disturbance.d_bar);
        if !(a >= 0.0 && a.is_finite() && b >= 0.0 && b.is_finite()) {
            return Err(config_err("d_bar values must be finite and non-negative"));
        }
        if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
            return Err(config_err(format!(
                "barrier.d_bar = {a} does not match disturbance.d_bar = {b}"
            )));
        }
        if self.disturbance.kind == DisturbanceChoice::None && b != 0.0 {
            return Err(config_err("disturbance kind none requires d_bar = 0"));
        }
        Ok(())
    }

    fn check_tau_campaign(&self, scenario: &SatelliteScenario) -> Result<(), CliError> {
        let t = &self.tau;
        if t.radius_grid.is_empty() {
            return Err(config_err("tau.radius_grid is empty"));
        }
        let (lo, hi) = (scenario.range.inner_radius(), scenario.range.outer_radius());
        if let Some(r) = t.radius_grid.iter().find(|r| !(**r > lo && **r < hi)) {
            return Err(config_err(format!(
                "tau.radius_grid entry {r} is outside the open band ({lo}, {hi})"
            )));
        }
        if t.n_per_radius == 0 {
            return Err(config_err("tau.n_per_radius must be at least 1"));
        }
        positive("tau.max_time", t.max_time)
    }

    fn gravity(&self) -> GravityModel {
        GravityModel {
            mu: self.gravity.mu,
            radius: self.gravity.radius,
            singularity_floor: self.gravity.singularity_floor,
        }
    }

    fn integrator(&self) -> Result<IntegratorConfig, CliError> {
        Ok(IntegratorConfig::new(
            self.integrator.step_size,
            self.integrator.interpolation,
        )?)
    }

    fn locator(&self) -> EventLocatorConfig {
        EventLocatorConfig {
            time_tolerance: self.events.time_tolerance,
            value_tolerance: self.events.value_tolerance,
            max_bisections: self.events.max_bisections,
        }
    }

    fn disturbance(
        &self,
        dim: usize,
        gravity: &GravityModel,
        inner: f64,
    ) -> Result<DisturbanceModel, CliError> {
        let d = &self.disturbance;
        Ok(match d.kind {
            DisturbanceChoice::None => DisturbanceModel::none(dim),
            DisturbanceChoice::PiecewiseConstant => {
                let hold = d
                    .hold_time
                    .ok_or_else(|| config_err("piecewise-constant disturbance needs hold_time"))?;
                DisturbanceModel::piecewise_constant(dim, d.d_bar, self.seed, hold)
            }
            DisturbanceChoice::ZonalJ2 => {
                if d.hold_time.is_some() {
                    return Err(config_err("hold_time only applies to piecewise-constant"));
                }
                DisturbanceModel::zonal_saturating(d.d_bar, gravity, inner)
            }
        })
    }

    pub fn satellite(&self) -> Result<SatelliteScenario, CliError> {
        let gravity = self.gravity();
        let default_range = OrbitalRangeBarrier::for_body_radius(gravity.radius);
        let range = OrbitalRangeBarrier {
            center: self.barrier.center.unwrap_or(default_range.center),
            half_width: self.barrier.half_width.unwrap_or(default_range.half_width),
        };
        let scenario = SatelliteScenario {
            gravity,
            range,
            alpha: self.barrier.alpha,
            disturbance: self.disturbance(3, &gravity, range.inner_radius())?,
            controller: SafeguardingControllerConfig {
                c_buffer: self.controller.c_buffer,
                retarget_gain: self.controller.retarget_gain,
            },
            integrator: self.integrator()?,
            locator: self.locator(),
            dwell_steps: self.integrator.dwell_steps,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn planar(&self) -> Result<PlanarScenario, CliError> {
        let f = self.filter.unwrap_or_default();
        let scenario = PlanarScenario {
            disk_radius: self.barrier.disk_radius.unwrap_or(1.0),
            alpha: self.barrier.alpha,
            disturbance: self.disturbance(2, &self.gravity(), 0.0)?,
            goal: f.goal,
            nominal_gain: f.nominal_gain,
            b_gain: f.b_gain,
            h_bar: f.h_bar,
            c: f.c,
            integrator: self.integrator()?,
            locator: self.locator(),
            dwell_steps: self.integrator.dwell_steps,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn satellite_initial(
        &self,
        scenario: &SatelliteScenario,
    ) -> Result<SatelliteState, CliError> {
        match (&self.initial.radius, &self.initial.state) {
            (Some(_), Some(_)) => Err(config_err("give either initial.radius or initial.state")),
            (None, Some(s)) => {
                if s.len() != 6 || s.iter().any(|v| !v.is_finite()) {
                    return Err(config_err("initial.state needs 6 finite entries"));
                }
                Ok(SatelliteState::from_state(&State::from_column_slice(s)))
            }
            (Some(r), None) => {
                positive("initial.radius", *r)?;
                Ok(scenario.circular_state(*r))
            }
            (None, None) => Ok(scenario.circular_state(scenario.range.center)),
        }
    }

    pub fn planar_initial(&self) -> [f64; 2] {
        self.initial.position.unwrap_or([0.0, 0.0])
    }

    /// Loads the maneuver model from `override_path` or `tau.model`.
    pub fn tau_model(&self, override_path: Option<&Path>) -> Result<TauPModel, CliError> {
        let path = override_path
            .or(self.tau.model.as_deref())
            .ok_or_else(|| config_err("maneuver scheme needs tau.model or --tau-model"))?;
        load_tau_model(path)
    }
}

pub fn load_tau_model(path: &Path) -> Result<TauPModel, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| config_err(format!("cannot read tau model {}: {e}", path.display())))?;
    let model: TauPModel = serde_json::from_str(&text)
        .map_err(|e| config_err(format!("tau model {}: {e}", path.display())))?;
    model
        .validate()
        .map_err(|e| config_err(format!("tau model {}: {e}", path.display())))?;
    Ok(model)
}
