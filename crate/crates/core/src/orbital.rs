//! Keplerian conversions and the safeguarding impulsive controller.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::barrier::{BarrierSpec, OrbitalRangeBarrier};
use crate::dynamics::{apply_impulse, two_body_field, GravityModel, SatelliteState};
use crate::error::{Error, Result};

/// Classical elements of an elliptic orbit. Angles in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitalElements {
    pub semi_major_axis: f64,
    pub eccentricity: f64,
    pub inclination: f64,
    pub raan: f64,
    pub arg_periapsis: f64,
    /// In `(-pi, pi]`.
    pub true_anomaly: f64,
}

impl OrbitalElements {
    pub fn periapsis(&self) -> f64 {
        self.semi_major_axis * (1.0 - self.eccentricity)
    }

    pub fn apoapsis(&self) -> f64 {
        self.semi_major_axis * (1.0 + self.eccentricity)
    }

    pub fn semi_latus_rectum(&self) -> f64 {
        self.semi_major_axis * (1.0 - self.eccentricity * self.eccentricity)
    }
}

fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    if w <= -PI {
        w += 2.0 * PI;
    }
    w
}

const SINGULAR_TOL: f64 = 1e-11;

pub fn elements_from_state(g: &GravityModel, s: &SatelliteState) -> Result<OrbitalElements> {
    let mu = g.mu;
    let r_vec = s.position;
    let v_vec = s.velocity;
    let r = r_vec.norm();
    let energy = s.specific_energy(mu);
    if !(energy < 0.0) {
        return Err(Error::EscapeOrbit { energy });
    }
    let h_vec = r_vec.cross(&v_vec);
    let h = h_vec.norm();
    if h <= SINGULAR_TOL * r * v_vec.norm().max(1.0) {
        return Err(Error::Rectilinear { momentum: h });
    }
    let h_hat = h_vec / h;
    let a = -mu / (2.0 * energy);
    let e_vec = (r_vec * (v_vec.norm_squared() - mu / r) - v_vec * r_vec.dot(&v_vec)) / mu;
    let e = e_vec.norm();

    let inclination = (h_vec.x.hypot(h_vec.y)).atan2(h_vec.z);
    let node = Vector3::new(-h_vec.y, h_vec.x, 0.0);
    let (node_hat, raan) = if node.norm() > SINGULAR_TOL * h {
        let n = node.normalize();
        (n, n.y.atan2(n.x))
    } else {
        (Vector3::x(), 0.0)
    };
    let e_hat = if e > SINGULAR_TOL {
        e_vec / e
    } else {
        node_hat
    };
    let arg_periapsis = node_hat
        .cross(&e_hat)
        .dot(&h_hat)
        .atan2(node_hat.dot(&e_hat));
    let r_hat = r_vec / r;
    let true_anomaly = e_hat.cross(&r_hat).dot(&h_hat).atan2(e_hat.dot(&r_hat));

    Ok(OrbitalElements {
        semi_major_axis: a,
        eccentricity: e,
        inclination,
        raan: wrap_angle(raan),
        arg_periapsis: wrap_angle(arg_periapsis),
        true_anomaly: wrap_angle(true_anomaly),
    })
}

pub fn state_from_elements(g: &GravityModel, el: &OrbitalElements) -> SatelliteState {
    let p = el.semi_latus_rectum();
    let (sn, cn) = el.true_anomaly.sin_cos();
    let r = p / (1.0 + el.eccentricity * cn);
    let r_pf = Vector3::new(r * cn, r * sn, 0.0);
    let k = (g.mu / p).sqrt();
    let v_pf = Vector3::new(-k * sn, k * (el.eccentricity + cn), 0.0);
    let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), el.raan)
        * Rotation3::from_axis_angle(&Vector3::x_axis(), el.inclination)
        * Rotation3::from_axis_angle(&Vector3::z_axis(), el.arg_periapsis);
    SatelliteState::new(rot * r_pf, rot * v_pf)
}

/// Speed at radius `r` on an orbit of semi-major axis `a`.
pub fn vis_viva_speed(g: &GravityModel, r: f64, a: f64) -> Result<f64> {
    let k = 2.0 / r - 1.0 / a;
    if !(k > 0.0) || !(r > 0.0) {
        return Err(Error::UnreachableRadius { r, a });
    }
    Ok((g.mu * k).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafeguardingControllerConfig {
    /// Post-jump margin `c` on the greedy trigger.
    pub c_buffer: f64,
    /// `r_target = center + retarget_gain (r - center)`.
    pub retarget_gain: f64,
}

impl Default for SafeguardingControllerConfig {
    fn default() -> Self {
        Self {
            c_buffer: 0.01,
            retarget_gain: 0.5,
        }
    }
}

impl SafeguardingControllerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_buffer > 0.0) {
            return Err(Error::Config("c_buffer must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.retarget_gain) {
            return Err(Error::Config("retarget_gain must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Outcome of one safeguarding impulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Impulse {
    pub dv: Vector3<f64>,
    pub state_after: SatelliteState,
    /// Radius of the apsis that faces the range centre.
    pub target_radius: f64,
    pub true_anomaly: f64,
    pub eccentricity: f64,
    pub h_after: f64,
    pub xi_after: f64,
    /// The first solve missed the buffer and the centre-retargeted solve was used.
    pub fallback: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JumpVerdict {
    Ok { h: f64, xi: f64 },
    Violated { h: f64, xi: f64 },
}

impl JumpVerdict {
    pub fn is_ok(&self) -> bool {
        matches!(self, JumpVerdict::Ok { .. })
    }
}

/// `h(x+) >= 0` and `xi(x+) >= c`.
pub fn verify_jump_conditions(
    b: &BarrierSpec,
    g: &GravityModel,
    s_post: &SatelliteState,
    c: f64,
) -> Result<JumpVerdict> {
    let x = s_post.to_state();
    let h = b.h(&x);
    let xi = b.xi(&x, &two_body_field(g, s_post)?);
    Ok(if h >= 0.0 && xi >= c {
        JumpVerdict::Ok { h, xi }
    } else {
        JumpVerdict::Violated { h, xi }
    })
}

/// In-plane orbit injection toward the centre of an orbital range.
///
/// The post-impulse ellipse keeps the current orbital plane, places the apsis
/// facing the range centre at `r_target`, and puts the satellite at a true
/// anomaly that moves linearly with its distance from the centre:
///
/// * inside the centre, `nu` goes from `0` (at the centre) to `pi/2` (at the
///   inner boundary), so the satellite climbs toward an apoapsis at `r_target`;
/// * outside, `nu` goes from `-pi` (at the centre) to `-pi/2` (at the outer
///   boundary), so the satellite descends toward a periapsis at `r_target`.
///
/// Near the centre this is a Hohmann-style half transfer with one apsis at
/// the current radius; near the boundaries the placement gives the largest
/// radial rate away from the boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafeguardingController {
    pub config: SafeguardingControllerConfig,
    pub range: OrbitalRangeBarrier,
    pub gravity: GravityModel,
}

impl SafeguardingController {
    pub fn target_radius(&self, r: f64, gain: f64) -> f64 {
        self.range.center + gain * (r - self.range.center)
    }

    pub fn placement_anomaly(&self, r: f64) -> f64 {
        let s = ((r - self.range.center).abs() / self.range.half_width).clamp(0.0, 1.0);
        if r < self.range.center {
            s * FRAC_PI_2
        } else {
            -PI + s * FRAC_PI_2
        }
    }

    /// Velocity that injects a satellite at `s` into the ellipse through the
    /// current position with apsis `r_target` and anomaly `nu`.
    fn injection(&self, s: &SatelliteState, r_target: f64, nu: f64) -> Result<(Vector3<f64>, f64)> {
        let r = s.radius();
        let (sn, cn) = nu.sin_cos();
        let e = if r == r_target {
            0.0
        } else if r < r_target {
            (r_target - r) / (r_target + r * cn)
        } else {
            (r - r_target) / (r_target - r * cn)
        };
        if !(0.0..1.0).contains(&e) {
            return Err(Error::ControllerInfeasible {
                r,
                reason: format!("eccentricity {e} is not elliptic for r_target = {r_target}"),
            });
        }
        let h_vec = s.angular_momentum();
        let h_norm = h_vec.norm();
        if h_norm <= SINGULAR_TOL * r * s.velocity.norm().max(1.0) {
            return Err(Error::Rectilinear { momentum: h_norm });
        }
        let h_hat = h_vec / h_norm;
        let r_hat = s.position / r;
        let t_hat = h_hat.cross(&r_hat);
        let mu = self.gravity.mu;
        let p = r * (1.0 + e * cn);
        let radial = (mu / p).sqrt() * e * sn;
        let tangential = (mu * p).sqrt() / r;
        Ok((r_hat * radial + t_hat * tangential, e))
    }

    fn solve(&self, b: &BarrierSpec, s: &SatelliteState, gain: f64) -> Result<Impulse> {
        let r = s.radius();
        let r_target = self.target_radius(r, gain);
        let nu = self.placement_anomaly(r);
        let (v_new, e) = self.injection(s, r_target, nu)?;
        let dv = v_new - s.velocity;
        let state_after = apply_impulse(s, &dv);
        let (h_after, xi_after) = match verify_jump_conditions(b, &self.gravity, &state_after, 0.0)?
        {
            JumpVerdict::Ok { h, xi } | JumpVerdict::Violated { h, xi } => (h, xi),
        };
        Ok(Impulse {
            dv,
            state_after,
            target_radius: r_target,
            true_anomaly: nu,
            eccentricity: e,
            h_after,
            xi_after,
            fallback: false,
        })
    }

    /// Impulse satisfying `h(x+) >= 0` and `xi(x+) >= c_buffer`, retargeting
    /// straight to the centre when the nominal solve misses the buffer.
    pub fn impulse(&self, b: &BarrierSpec, s: &SatelliteState) -> Result<Impulse> {
        let c = self.config.c_buffer;
        let first = self.solve(b, s, self.config.retarget_gain)?;
        if first.h_after >= 0.0 && first.xi_after >= c {
            return Ok(first);
        }
        let second = Impulse {
            fallback: true,
            ..self.solve(b, s, 0.0)?
        };
        if second.h_after >= 0.0 && second.xi_after >= c {
            return Ok(second);
        }
        Err(Error::ControllerInfeasible {
            r: s.radius(),
            reason: format!(
                "post-jump trigger value {:.3e} below buffer {c:.3e} (h = {:.3e})",
                second.xi_after, second.h_after
            ),
        })
    }
}
