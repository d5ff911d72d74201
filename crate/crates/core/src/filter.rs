//! Minimally invasive safety filters for control-affine systems.
//!
//! With a single affine constraint `a · u >= rhs` the filter
//! `argmin |u - u_nom|^2` is the Euclidean projection onto a halfspace, which
//! has a closed form.

use nalgebra::DVector;

use crate::barrier::BarrierSpec;
use crate::dynamics::ControlAffineSystem;
use crate::error::{Error, Result};
use crate::numerics::State;

/// `a · u >= rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfspaceConstraint {
    pub a: DVector<f64>,
    pub rhs: f64,
}

impl HalfspaceConstraint {
    pub fn new(a: DVector<f64>, rhs: f64) -> Self {
        Self { a, rhs }
    }

    pub fn margin(&self, u: &DVector<f64>) -> f64 {
        self.a.dot(u) - self.rhs
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterMode {
    /// `L_f h(x, u) - |dh/dx| d_bar >= -alpha(h(x))`
    Standard,
    /// `L_f h(x, u) - |dh/dx| d_bar >= b`
    Promoting { b_gain: f64 },
}

/// Build the filter constraint at `x`.
pub fn build_constraint(
    b: &BarrierSpec,
    sys: &dyn ControlAffineSystem,
    x: &State,
    mode: FilterMode,
) -> HalfspaceConstraint {
    let grad = b.grad(x);
    let a = sys.input_matrix(x).transpose() * &grad;
    let robust = grad.norm() * b.d_bar - grad.dot(&sys.drift(x));
    let rhs = match mode {
        FilterMode::Standard => -b.alpha.eval(b.h(x)) + robust,
        FilterMode::Promoting { b_gain } => b_gain + robust,
    };
    HalfspaceConstraint { a, rhs }
}

/// True iff the nominal input violates the constraint. Equality counts as
/// inactive.
pub fn filter_active(u_nom: &DVector<f64>, con: &HalfspaceConstraint) -> bool {
    con.a.dot(u_nom) < con.rhs
}

/// Euclidean projection of `u_nom` onto `{u : a · u >= rhs}`.
pub fn project(u_nom: &DVector<f64>, con: &HalfspaceConstraint) -> Result<DVector<f64>> {
    if !filter_active(u_nom, con) {
        return Ok(u_nom.clone());
    }
    let a2 = con.a.norm_squared();
    if a2 == 0.0 {
        return Err(Error::FilterInfeasible { rhs: con.rhs });
    }
    let mut lambda = (con.rhs - con.a.dot(u_nom)) / a2;
    let mut u = u_nom + &con.a * lambda;
    // The closed form can land a few ulps short of the boundary; grow the
    // multiplier geometrically until the constraint holds in floating point.
    let mut bump = f64::EPSILON * lambda.abs().max(f64::MIN_POSITIVE);
    while con.a.dot(&u) < con.rhs {
        let slack = con.rhs - con.a.dot(&u);
        lambda += (slack / a2).max(bump);
        bump *= 2.0;
        u = u_nom + &con.a * lambda;
    }
    Ok(u)
}
