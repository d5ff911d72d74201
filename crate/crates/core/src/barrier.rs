//! Barrier functions and the trigger conditions built from them.
//!
//! Every trigger here is a scalar whose downward zero crossing schedules a
//! control event:
//!
//! * `xi`     = L_F h - |dh/dx| d_bar + alpha(h)  (greedy impulsive trigger,
//!   also the filter-on trigger when `F` is the nominal closed loop)
//! * `xi_off` = xi - c                             (filter-off trigger)
//! * `xi_tau` = (1 + dtau_p/dh * L_F h) / 2        (maneuver timing trigger)

use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::State;
use crate::taumodel::TauPModel;

pub trait BarrierFunction: Send + Sync + Debug {
    fn value(&self, x: &State) -> f64;
    fn gradient(&self, x: &State) -> State;
}

/// Class-K rate `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ClassK {
    /// `alpha(h) = gain * h`
    Linear { gain: f64 },
    /// `alpha(h) = gain * sign(h) |h|^exponent`
    Power { gain: f64, exponent: f64 },
}

impl Default for ClassK {
    fn default() -> Self {
        ClassK::Linear { gain: 1.0 }
    }
}

impl ClassK {
    pub fn eval(&self, h: f64) -> f64 {
        match *self {
            ClassK::Linear { gain } => gain * h,
            ClassK::Power { gain, exponent } => gain * h.signum() * h.abs().powf(exponent),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ClassK::Linear { gain } => gain > 0.0 && gain.is_finite(),
            ClassK::Power { gain, exponent } => gain > 0.0 && exponent > 0.0 && gain.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid class-K function {self:?}")))
        }
    }

    /// Sampled check of `alpha(0) = 0` and strict monotonicity on `[lo, hi]`.
    pub fn check_on_range(&self, lo: f64, hi: f64, n: usize) -> Result<()> {
        if self.eval(0.0) != 0.0 {
            return Err(Error::Config("alpha(0) must be 0".into()));
        }
        let n = n.max(2);
        let mut prev = self.eval(lo);
        for i in 1..=n {
            let h = lo + (hi - lo) * i as f64 / n as f64;
            let v = self.eval(h);
            if !(v > prev) {
                return Err(Error::Config(format!(
                    "alpha is not strictly increasing near h = {h}"
                )));
            }
            prev = v;
        }
        Ok(())
    }
}

/// `h = half_width^2 - (|r| - center)^2` on a `[r; v]` state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitalRangeBarrier {
    pub center: f64,
    pub half_width: f64,
}

impl OrbitalRangeBarrier {
    /// Safe shell `1.6 R <= r <= 2.4 R`.
    pub fn for_body_radius(radius: f64) -> Self {
        Self {
            center: 2.0 * radius,
            half_width: 0.4 * radius,
        }
    }

    pub fn inner_radius(&self) -> f64 {
        self.center - self.half_width
    }

    pub fn outer_radius(&self) -> f64 {
        self.center + self.half_width
    }

    pub fn h_of_radius(&self, r: f64) -> f64 {
        self.half_width * self.half_width - (r - self.center).powi(2)
    }

    fn radius(x: &State) -> f64 {
        (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
    }
}

impl BarrierFunction for OrbitalRangeBarrier {
    fn value(&self, x: &State) -> f64 {
        self.h_of_radius(Self::radius(x))
    }

    fn gradient(&self, x: &State) -> State {
        let r = Self::radius(x);
        let k = -2.0 * (r - self.center) / r;
        DVector::from_column_slice(&[k * x[0], k * x[1], k * x[2], 0.0, 0.0, 0.0])
    }
}

/// `h = radius^2 - |x|^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiskBarrier {
    pub radius: f64,
}

impl BarrierFunction for DiskBarrier {
    fn value(&self, x: &State) -> f64 {
        self.radius * self.radius - x.norm_squared()
    }

    fn gradient(&self, x: &State) -> State {
        x * -2.0
    }
}

/// A barrier function together with its class-K rate and disturbance bound.
#[derive(Debug, Clone)]
pub struct BarrierSpec {
    barrier: Arc<dyn BarrierFunction>,
    pub alpha: ClassK,
    pub d_bar: f64,
}

impl BarrierSpec {
    pub fn new(barrier: Arc<dyn BarrierFunction>, alpha: ClassK, d_bar: f64) -> Result<Self> {
        alpha.validate()?;
        if !(d_bar >= 0.0 && d_bar.is_finite()) {
            return Err(Error::Config(format!(
                "d_bar must be finite and >= 0, got {d_bar}"
            )));
        }
        Ok(Self {
            barrier,
            alpha,
            d_bar,
        })
    }

    pub fn barrier(&self) -> &dyn BarrierFunction {
        self.barrier.as_ref()
    }

    pub fn h(&self, x: &State) -> f64 {
        self.barrier.value(x)
    }

    pub fn grad(&self, x: &State) -> State {
        self.barrier.gradient(x)
    }

    pub fn grad_norm(&self, x: &State) -> f64 {
        self.grad(x).norm()
    }

    /// `dh/dx · f` for a field value `f` at `x`.
    pub fn lie_derivative(&self, field_value: &State, x: &State) -> f64 {
        self.grad(x).dot(field_value)
    }

    /// Greedy trigger `L_F h - |dh/dx| d_bar + alpha(h)` with `F(x) = field_value`.
    pub fn xi(&self, x: &State, field_value: &State) -> f64 {
        let grad = self.grad(x);
        grad.dot(field_value) - grad.norm() * self.d_bar + self.alpha.eval(self.h(x))
    }

    /// Filter-on trigger; `nominal_value` is `f(x, k_nom(x))`.
    pub fn xi_on(&self, x: &State, nominal_value: &State) -> f64 {
        self.xi(x, nominal_value)
    }

    /// Filter-off trigger `xi_on - c`.
    pub fn xi_off(&self, x: &State, nominal_value: &State, c: f64) -> f64 {
        self.xi_on(x, nominal_value) - c
    }

    /// Largest relative deviation between the analytic gradient and central
    /// finite differences over `states`; errors when it exceeds `rel_tol`.
    pub fn check_gradient(&self, states: &[State], rel_tol: f64) -> Result<f64> {
        let mut worst = 0.0f64;
        for x in states {
            let fd = finite_difference_gradient(|y| self.h(y), x, 1e-6);
            let g = self.grad(x);
            let err = (&fd - &g).norm() / g.norm().max(1e-3);
            worst = worst.max(err);
        }
        if worst > rel_tol {
            return Err(Error::Config(format!(
                "barrier gradient disagrees with finite differences: {worst:e} > {rel_tol:e}"
            )));
        }
        Ok(worst)
    }
}

/// Central-difference gradient with absolute step `eps`.
pub fn finite_difference_gradient<F: Fn(&State) -> f64>(f: F, x: &State, eps: f64) -> State {
    let mut g = DVector::zeros(x.len());
    let mut y = x.clone();
    for i in 0..x.len() {
        let xi = x[i];
        y[i] = xi + eps;
        let fp = f(&y);
        y[i] = xi - eps;
        let fm = f(&y);
        y[i] = xi;
        g[i] = (fp - fm) / (2.0 * eps);
    }
    g
}

/// Value of the maneuver timing trigger.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiTau {
    pub value: f64,
    /// `h(x)` fell outside the model's fitted range.
    pub extrapolated: bool,
}

/// `(1 + dtau_p/dh|_{h(x)} * L_F h(x)) / 2`.
pub fn xi_tau(model: &TauPModel, b: &BarrierSpec, field_value: &State, x: &State) -> XiTau {
    let h = b.h(x);
    let (slope, extrapolated) = model.derivative(h);
    let tau_rate = slope * b.lie_derivative(field_value, x);
    XiTau {
        value: 0.5 * (1.0 + tau_rate),
        extrapolated,
    }
}
