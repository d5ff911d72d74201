//! Post-run safety audit and the minimum inter-event time bound.

use std::f64::consts::PI;

use nalgebra::{DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::barrier::{finite_difference_gradient, BarrierSpec};
use crate::dynamics::SatelliteState;
use crate::error::{Error, Result};
use crate::numerics::State;
use crate::orbital::vis_viva_speed;
use crate::scenario::SatelliteScenario;

use super::TrajectoryPoint;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyAudit {
    pub min_h: f64,
    /// Smallest armed-monitor value over samples that are not event locations.
    pub min_xi_flow: f64,
    pub safe: bool,
}

/// Recomputes `h` from the stored states; safe iff `min h >= -value_tolerance`.
pub fn audit_safety(
    trajectory: &[TrajectoryPoint],
    b: &BarrierSpec,
    value_tolerance: f64,
) -> SafetyAudit {
    let min_h = trajectory
        .iter()
        .map(|p| b.h(&DVector::from_column_slice(&p.x)))
        .fold(f64::INFINITY, f64::min);
    let min_xi_flow = trajectory
        .iter()
        .filter(|p| !p.boundary)
        .map(|p| p.monitor)
        .fold(f64::INFINITY, f64::min);
    SafetyAudit {
        min_h,
        min_xi_flow,
        safe: min_h >= -value_tolerance,
    }
}

/// `c / (L_xi (B + d_bar))`.
pub fn miet_from_constants(c: f64, l_xi: f64, b_bound: f64, d_bar: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::Bound(format!("c must be positive, got {c}")));
    }
    let denom = l_xi * (b_bound + d_bar);
    if !(denom > 0.0 && denom.is_finite()) {
        return Err(Error::Bound(format!(
            "degenerate constants L = {l_xi}, B = {b_bound}"
        )));
    }
    Ok(c / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MietEstimate {
    pub bound: f64,
    /// Inflated Lipschitz estimate of the trigger.
    pub l_xi: f64,
    /// Inflated bound on the nominal field magnitude.
    pub b_bound: f64,
    pub samples: usize,
}

/// Sampled constants are multiplied by this before use.
const INFLATION: f64 = 1.1;

/// Estimate `sup |F|` and `sup |dxi/dx|` over `states` (gradient by central
/// differences), inflate both, and return the resulting bound.
pub fn miet_bound<F>(b: &BarrierSpec, field: F, states: &[State], c: f64) -> Result<MietEstimate>
where
    F: Fn(&State) -> Result<State>,
{
    if states.is_empty() {
        return Err(Error::Bound("no sample states".into()));
    }
    let xi = |x: &State| field(x).map(|f| b.xi(x, &f)).unwrap_or(f64::NAN);
    let mut b_sup = 0.0f64;
    let mut l_sup = 0.0f64;
    for x in states {
        let f = field(x)?;
        let g = finite_difference_gradient(xi, x, 1e-6);
        let (fn_, gn) = (f.norm(), g.norm());
        if !(fn_.is_finite() && gn.is_finite()) {
            return Err(Error::Bound(format!(
                "non-finite sample at {:?}",
                x.as_slice()
            )));
        }
        b_sup = b_sup.max(fn_);
        l_sup = l_sup.max(gn);
    }
    let l_xi = INFLATION * l_sup;
    let b_bound = INFLATION * b_sup;
    Ok(MietEstimate {
        bound: miet_from_constants(c, l_xi, b_bound, b.d_bar)?,
        l_xi,
        b_bound,
        samples: states.len(),
    })
}

/// Random states over the orbital range: radius uniform in the shell,
/// semi-major axis in `[a_lo, a_hi]` (vis-viva speed), flight-path angle
/// within `+-max_fpa`, uniformly random orientation.
pub fn satellite_region_samples(scenario: &SatelliteScenario, n: usize, seed: u64) -> Vec<State> {
    const A_RANGE: (f64, f64) = (1.3, 3.0);
    const MAX_FPA: f64 = 0.35;
    let g = &scenario.gravity;
    let (lo, hi) = (scenario.range.inner_radius(), scenario.range.outer_radius());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let r = rng.random_range(lo..=hi);
        let a = rng.random_range(A_RANGE.0..=A_RANGE.1);
        let Ok(v) = vis_viva_speed(g, r, a) else {
            continue;
        };
        let fpa = rng.random_range(-MAX_FPA..=MAX_FPA);
        let u: [f64; 3] = UnitSphere.sample(&mut rng);
        let r_hat = Vector3::from(u);
        let helper = if r_hat.x.abs() < 0.9 {
            Vector3::x()
        } else {
            Vector3::y()
        };
        let e1 = r_hat.cross(&helper).normalize();
        let e2 = r_hat.cross(&e1);
        let phase = rng.random_range(0.0..2.0 * PI);
        let t_hat = e1 * phase.cos() + e2 * phase.sin();
        let vel = (r_hat * fpa.sin() + t_hat * fpa.cos()) * v;
        out.push(SatelliteState::new(r_hat * r, vel).to_state());
    }
    out
}
