//! Scenario bundles: everything a run needs besides the initial state and
//! the horizon.

use std::sync::Arc;

use nalgebra::{DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::barrier::{BarrierSpec, ClassK, DiskBarrier, OrbitalRangeBarrier};
use crate::dynamics::{
    two_body_field, ControlAffineSystem, DisturbanceModel, GravityModel, NominalController,
    ProportionalController, SatelliteState, SingleIntegrator,
};
use crate::error::{Error, Result};
use crate::numerics::{EventLocatorConfig, IntegratorConfig, PropagationOptions, State};
use crate::orbital::{SafeguardingController, SafeguardingControllerConfig};

/// Satellite held in an orbital range by impulses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SatelliteScenario {
    pub gravity: GravityModel,
    pub range: OrbitalRangeBarrier,
    pub alpha: ClassK,
    pub disturbance: DisturbanceModel,
    pub controller: SafeguardingControllerConfig,
    pub integrator: IntegratorConfig,
    pub locator: EventLocatorConfig,
    /// Integrator steps after each event before monitors are checked again.
    pub dwell_steps: usize,
}

impl Default for SatelliteScenario {
    fn default() -> Self {
        Self {
            gravity: GravityModel::default(),
            range: OrbitalRangeBarrier::for_body_radius(1.0),
            alpha: ClassK::Linear { gain: 1.0 },
            disturbance: DisturbanceModel::piecewise_constant(3, 2e-3, 0, 5.0),
            controller: SafeguardingControllerConfig::default(),
            integrator: IntegratorConfig::default(),
            locator: EventLocatorConfig::default(),
            dwell_steps: 1,
        }
    }
}

impl SatelliteScenario {
    pub fn validate(&self) -> Result<()> {
        self.gravity.validate()?;
        self.alpha.validate()?;
        self.alpha
            .check_on_range(0.0, self.range.h_of_radius(self.range.center), 64)?;
        self.disturbance.validate()?;
        if self.disturbance.dim != 3 {
            return Err(Error::Dimension {
                expected: 3,
                got: self.disturbance.dim,
            });
        }
        self.controller.validate()?;
        self.integrator.validate()?;
        self.locator.validate()?;
        if !(self.range.half_width > 0.0 && self.range.inner_radius() > 0.0) {
            return Err(Error::Config(
                "orbital range must have positive width and inner radius".into(),
            ));
        }
        if self.range.inner_radius() <= self.gravity.singularity_floor * self.gravity.radius {
            return Err(Error::Config(
                "orbital range reaches inside the singularity floor".into(),
            ));
        }
        Ok(())
    }

    /// Barrier with the disturbance model's bound.
    pub fn barrier_spec(&self) -> Result<BarrierSpec> {
        BarrierSpec::new(Arc::new(self.range), self.alpha, self.disturbance.d_bar)
    }

    pub fn safeguarding(&self) -> SafeguardingController {
        SafeguardingController {
            config: self.controller,
            range: self.range,
            gravity: self.gravity,
        }
    }

    pub fn propagation(&self) -> PropagationOptions {
        PropagationOptions {
            integrator: self.integrator,
            locator: self.locator,
            dwell_steps: self.dwell_steps,
        }
    }

    /// Two-body field without disturbance.
    pub fn nominal_field(&self, x: &State) -> Result<State> {
        two_body_field(&self.gravity, &SatelliteState::from_state(x))
    }

    /// Disturbed flow: two-body acceleration plus `d(t, x)`.
    pub fn flow(&self, t: f64, x: &State) -> Result<State> {
        let mut f = self.nominal_field(x)?;
        let d = self.disturbance.sample(t, x);
        for i in 0..3 {
            f[3 + i] += d[i];
        }
        Ok(f)
    }

    /// Greedy trigger value; non-positive when the field cannot be evaluated.
    pub fn xi(&self, b: &BarrierSpec, x: &State) -> f64 {
        match self.nominal_field(x) {
            Ok(f) => b.xi(x, &f),
            Err(_) => f64::NEG_INFINITY,
        }
    }

    /// Circular orbit of radius `r` in the x-y plane, starting on the x axis.
    pub fn circular_state(&self, r: f64) -> SatelliteState {
        let v = (self.gravity.mu / r).sqrt();
        SatelliteState::new(Vector3::new(r, 0.0, 0.0), Vector3::new(0.0, v, 0.0))
    }
}

/// Planar single integrator kept in a disk by an intermittent filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanarScenario {
    pub disk_radius: f64,
    pub alpha: ClassK,
    pub disturbance: DisturbanceModel,
    pub goal: [f64; 2],
    pub nominal_gain: f64,
    /// Required rate of barrier increase while the filter is on.
    pub b_gain: f64,
    /// Level above which the nominal loop must satisfy the on-trigger with margin `c`.
    pub h_bar: f64,
    /// Hysteresis gap between the on and off triggers.
    pub c: f64,
    pub integrator: IntegratorConfig,
    pub locator: EventLocatorConfig,
    pub dwell_steps: usize,
}

impl Default for PlanarScenario {
    fn default() -> Self {
        Self {
            disk_radius: 1.0,
            alpha: ClassK::Linear { gain: 5.0 },
            disturbance: DisturbanceModel::piecewise_constant(2, 0.01, 0, 1.0),
            goal: [1.05, 0.0],
            nominal_gain: 1.0,
            b_gain: 0.05,
            h_bar: 0.2,
            c: 0.05,
            integrator: IntegratorConfig::default(),
            locator: EventLocatorConfig::default(),
            dwell_steps: 1,
        }
    }
}

impl PlanarScenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.disk_radius > 0.0) {
            return Err(Error::Config("disk_radius must be positive".into()));
        }
        let h_max = self.disk_radius * self.disk_radius;
        self.alpha.validate()?;
        self.alpha.check_on_range(0.0, h_max, 64)?;
        self.disturbance.validate()?;
        if self.disturbance.dim != 2 {
            return Err(Error::Dimension {
                expected: 2,
                got: self.disturbance.dim,
            });
        }
        if !(self.nominal_gain > 0.0) {
            return Err(Error::Config("nominal_gain must be positive".into()));
        }
        if !(self.b_gain > 0.0) {
            return Err(Error::Config("b_gain must be positive".into()));
        }
        if !(self.c > 0.0) {
            return Err(Error::Config("c must be positive".into()));
        }
        if !(self.h_bar > 0.0 && self.h_bar < h_max) {
            return Err(Error::Config(format!("h_bar must lie in (0, {h_max})")));
        }
        self.integrator.validate()?;
        self.locator.validate()
    }

    pub fn barrier_spec(&self) -> Result<BarrierSpec> {
        BarrierSpec::new(
            Arc::new(DiskBarrier {
                radius: self.disk_radius,
            }),
            self.alpha,
            self.disturbance.d_bar,
        )
    }

    pub fn system(&self) -> SingleIntegrator {
        SingleIntegrator { dim: 2 }
    }

    pub fn nominal(&self) -> ProportionalController {
        ProportionalController {
            gain: self.nominal_gain,
            goal: DVector::from_column_slice(&self.goal),
        }
    }

    pub fn propagation(&self) -> PropagationOptions {
        PropagationOptions {
            integrator: self.integrator,
            locator: self.locator,
            dwell_steps: self.dwell_steps,
        }
    }

    /// Closed-loop field `f(x, k_nom(x))` without disturbance.
    pub fn nominal_field(&self, x: &State) -> State {
        self.system().field(x, &self.nominal().control(x))
    }
}
