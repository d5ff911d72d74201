//! Vector fields, jump maps and disturbance models.
//!
//! Lengths are normalized by the central body's mean radius and time so that
//! the gravitational parameter is one.

use nalgebra::{DMatrix, DVector, Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::State;

/// Position and velocity of a satellite in the body-centered inertial frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SatelliteState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
}

impl SatelliteState {
    pub fn new(position: Vector3<f64>, velocity: Vector3<f64>) -> Self {
        Self { position, velocity }
    }

    pub fn from_state(x: &State) -> Self {
        debug_assert_eq!(x.len(), 6);
        Self {
            position: Vector3::new(x[0], x[1], x[2]),
            velocity: Vector3::new(x[3], x[4], x[5]),
        }
    }

    pub fn to_state(&self) -> State {
        DVector::from_column_slice(&[
            self.position.x,
            self.position.y,
            self.position.z,
            self.velocity.x,
            self.velocity.y,
            self.velocity.z,
        ])
    }

    pub fn radius(&self) -> f64 {
        self.position.norm()
    }

    /// Radial rate `r̂ · v`.
    pub fn radial_rate(&self) -> f64 {
        self.position.dot(&self.velocity) / self.radius()
    }

    pub fn angular_momentum(&self) -> Vector3<f64> {
        self.position.cross(&self.velocity)
    }

    pub fn specific_energy(&self, mu: f64) -> f64 {
        0.5 * self.velocity.norm_squared() - mu / self.radius()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GravityModel {
    pub mu: f64,
    /// Mean radius of the central body.
    pub radius: f64,
    /// Radii below `singularity_floor * radius` abort integration.
    #[serde(default = "default_singularity_floor")]
    pub singularity_floor: f64,
}

fn default_singularity_floor() -> f64 {
    0.1
}

impl Default for GravityModel {
    fn default() -> Self {
        Self {
            mu: 1.0,
            radius: 1.0,
            singularity_floor: default_singularity_floor(),
        }
    }
}

impl GravityModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.radius > 0.0) {
            return Err(Error::Config(
                "gravity mu and radius must be positive".into(),
            ));
        }
        if !(self.singularity_floor >= 0.0) {
            return Err(Error::Config(
                "singularity_floor must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Point-mass gravitational acceleration at `position`.
    pub fn acceleration(&self, position: &Vector3<f64>) -> Result<Vector3<f64>> {
        let r = position.norm();
        let floor = self.singularity_floor * self.radius;
        if !(r > floor) || r == 0.0 {
            return Err(Error::Singularity { r, floor });
        }
        Ok(-position * (self.mu / (r * r * r)))
    }

    /// Period of an orbit with semi-major axis `a`.
    pub fn period(&self, a: f64) -> f64 {
        2.0 * std::f64::consts::PI * (a.powi(3) / self.mu).sqrt()
    }
}

/// Two-body vector field `d/dt [r; v] = [v; -mu r / |r|^3]`.
pub fn two_body_field(g: &GravityModel, s: &SatelliteState) -> Result<State> {
    let a = g.acceleration(&s.position)?;
    Ok(DVector::from_column_slice(&[
        s.velocity.x,
        s.velocity.y,
        s.velocity.z,
        a.x,
        a.y,
        a.z,
    ]))
}

/// Instantaneous velocity change; position is untouched.
pub fn apply_impulse(s: &SatelliteState, dv: &Vector3<f64>) -> SatelliteState {
    SatelliteState {
        position: s.position,
        velocity: s.velocity + dv,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DisturbanceKind {
    None,
    /// Second zonal harmonic of a central body with parameters `mu`, `radius`.
    ZonalJ2 {
        j2: f64,
        mu: f64,
        radius: f64,
    },
    /// Random direction, magnitude `d_bar`, redrawn every `hold_time`.
    PiecewiseConstant {
        seed: u64,
        hold_time: f64,
    },
}

/// Bounded additive disturbance `d(t, x)` with `|d| <= d_bar`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceModel {
    pub kind: DisturbanceKind,
    pub d_bar: f64,
    /// Dimension of the emitted vector.
    pub dim: usize,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic 64-bit key from a seed and a sequence of indices.
pub fn derive_seed(seed: u64, keys: &[u64]) -> u64 {
    keys.iter()
        .fold(splitmix64(seed), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

impl DisturbanceModel {
    pub fn none(dim: usize) -> Self {
        Self {
            kind: DisturbanceKind::None,
            d_bar: 0.0,
            dim,
        }
    }

    pub fn piecewise_constant(dim: usize, d_bar: f64, seed: u64, hold_time: f64) -> Self {
        Self {
            kind: DisturbanceKind::PiecewiseConstant { seed, hold_time },
            d_bar,
            dim,
        }
    }

    /// J2-like field whose magnitude over `r >= inner_radius` peaks at `d_bar`.
    ///
    /// The J2 acceleration magnitude is at most `3 J2 mu R^2 / r^4` (attained
    /// over the poles), so the coefficient is solved from that envelope.
    pub fn zonal_saturating(d_bar: f64, g: &GravityModel, inner_radius: f64) -> Self {
        let j2 = d_bar * inner_radius.powi(4) / (3.0 * g.mu * g.radius * g.radius);
        Self {
            kind: DisturbanceKind::ZonalJ2 {
                j2,
                mu: g.mu,
                radius: g.radius,
            },
            d_bar,
            dim: 3,
        }
    }

    /// Same model with its random stream re-keyed; other kinds are unchanged.
    pub fn reseeded(&self, seed: u64) -> Self {
        let mut out = self.clone();
        if let DisturbanceKind::PiecewiseConstant { seed: s, .. } = &mut out.kind {
            *s = seed;
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d_bar >= 0.0 && self.d_bar.is_finite()) {
            return Err(Error::Config(
                "disturbance d_bar must be finite and >= 0".into(),
            ));
        }
        match &self.kind {
            DisturbanceKind::None => Ok(()),
            DisturbanceKind::ZonalJ2 { radius, mu, .. } => {
                if self.dim != 3 {
                    return Err(Error::Config(
                        "zonal-j2 disturbance requires dim = 3".into(),
                    ));
                }
                if !(*radius > 0.0 && *mu > 0.0) {
                    return Err(Error::Config(
                        "zonal-j2 needs positive mu and radius".into(),
                    ));
                }
                Ok(())
            }
            DisturbanceKind::PiecewiseConstant { hold_time, .. } => {
                if !(*hold_time > 0.0) {
                    return Err(Error::Config("hold_time must be positive".into()));
                }
                Ok(())
            }
        }
    }

    /// Disturbance at time `t` and state `x` (only the leading position
    /// block of `x` is read by the zonal kind).
    pub fn sample(&self, t: f64, x: &State) -> DVector<f64> {
        let raw = match &self.kind {
            DisturbanceKind::None => DVector::zeros(self.dim),
            DisturbanceKind::ZonalJ2 { j2, mu, radius } => {
                let p = Vector3::new(x[0], x[1], x[2]);
                let a = zonal_acceleration(&p, *j2, *mu, *radius);
                DVector::from_column_slice(a.as_slice())
            }
            DisturbanceKind::PiecewiseConstant { seed, hold_time } => {
                let k = (t / hold_time).floor() as i64;
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(*seed, &[k as u64]));
                let v = DVector::from_fn(self.dim, |_, _| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z
                });
                let n = v.norm();
                if n > 0.0 {
                    v * (self.d_bar / n)
                } else {
                    v
                }
            }
        };
        clamp_norm(raw, self.d_bar)
    }
}

/// Scale `v` so that its Euclidean norm does not exceed `bound`.
pub fn clamp_norm(mut v: DVector<f64>, bound: f64) -> DVector<f64> {
    let n = v.norm();
    if n > bound {
        if bound == 0.0 {
            v.fill(0.0);
            return v;
        }
        v *= bound / n;
        while v.norm() > bound {
            v *= 1.0 - f64::EPSILON;
        }
    }
    v
}

fn zonal_acceleration(p: &Vector3<f64>, j2: f64, mu: f64, radius: f64) -> Vector3<f64> {
    let r2 = p.norm_squared();
    let r = r2.sqrt();
    let zr2 = p.z * p.z / r2;
    let k = -1.5 * j2 * mu * radius * radius / (r2 * r2);
    Vector3::new(
        k * (1.0 - 5.0 * zr2) * p.x / r,
        k * (1.0 - 5.0 * zr2) * p.y / r,
        k * (3.0 - 5.0 * zr2) * p.z / r,
    )
}

/// Planar single integrator `x' = u + d`.
pub fn planar_demo_field(_x: &Vector2<f64>, u: &Vector2<f64>, d: &Vector2<f64>) -> Vector2<f64> {
    u + d
}

/// `x' = f(x) + g(x) u`.
pub trait ControlAffineSystem: Send + Sync {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn drift(&self, x: &State) -> State;
    fn input_matrix(&self, x: &State) -> DMatrix<f64>;

    fn field(&self, x: &State, u: &DVector<f64>) -> State {
        self.drift(x) + self.input_matrix(x) * u
    }
}

/// `x' = u` in `dim` dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleIntegrator {
    pub dim: usize,
}

impl ControlAffineSystem for SingleIntegrator {
    fn state_dim(&self) -> usize {
        self.dim
    }

    fn input_dim(&self) -> usize {
        self.dim
    }

    fn drift(&self, _x: &State) -> State {
        DVector::zeros(self.dim)
    }

    fn input_matrix(&self, _x: &State) -> DMatrix<f64> {
        DMatrix::identity(self.dim, self.dim)
    }
}

pub trait NominalController: Send + Sync {
    fn control(&self, x: &State) -> DVector<f64>;
}

/// `k_nom(x) = -gain (x - goal)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProportionalController {
    pub gain: f64,
    pub goal: DVector<f64>,
}

impl NominalController for ProportionalController {
    fn control(&self, x: &State) -> DVector<f64> {
        (x - &self.goal) * -self.gain
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circular_orbit_acceleration_balances() {
        let g = GravityModel::default();
        let s = SatelliteState::new(
            Vector3::new(2.0, 0.0, 0.0),
            Vector3::new(0.0, 0.5f64.sqrt(), 0.0),
        );
        let d = two_body_field(&g, &s).unwrap();
        assert!((d[3] + 0.25).abs() < 1e-15);
        assert_eq!((d[4], d[5]), (0.0, 0.0));
        let accel = Vector3::new(d[3], d[4], d[5]).norm();
        assert!((accel - s.velocity.norm_squared() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn unit_radius_at_rest() {
        let g = GravityModel::default();
        let s = SatelliteState::new(Vector3::new(1.0, 0.0, 0.0), Vector3::zeros());
        let d = two_body_field(&g, &s).unwrap();
        assert_eq!(d.as_slice(), &[0.0, 0.0, 0.0, -1.0, 0.0, 0.0]);
    }

    #[test]
    fn singularity_floor_rejects_crash() {
        let g = GravityModel::default();
        let s = SatelliteState::new(Vector3::new(0.05, 0.0, 0.0), Vector3::zeros());
        assert!(matches!(
            two_body_field(&g, &s),
            Err(Error::Singularity { .. })
        ));
    }

    #[test]
    fn impulse_changes_velocity_only() {
        let s = SatelliteState::new(Vector3::new(2.0, 0.0, 0.0), Vector3::new(0.0, 0.7, 0.0));
        let out = apply_impulse(&s, &Vector3::new(0.0, 0.1, 0.0));
        assert_eq!(out.position, s.position);
        assert!((out.velocity.y - 0.8).abs() < 1e-15);
        assert_eq!(apply_impulse(&s, &Vector3::zeros()), s);
    }

    #[test]
    fn none_disturbance_is_zero() {
        let m = DisturbanceModel::none(3);
        let d = m.sample(1.0, &DVector::zeros(6));
        assert_eq!(d.as_slice(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn piecewise_constant_is_deterministic_and_held() {
        let m = DisturbanceModel::piecewise_constant(3, 1e-3, 42, 2.0);
        let x = DVector::zeros(6);
        let a = m.sample(3.1, &x);
        assert_eq!(a, m.sample(3.1, &x));
        assert_eq!(a, m.sample(2.0, &x));
        assert_ne!(a, m.sample(4.0, &x));
        assert!(a.norm() <= 1e-3);
        assert_ne!(a, m.reseeded(43).sample(3.1, &x));
    }

    #[test]
    fn zonal_peaks_at_bound_over_the_pole() {
        let g = GravityModel::default();
        let m = DisturbanceModel::zonal_saturating(1e-3, &g, 1.6);
        let pole = DVector::from_column_slice(&[0.0, 0.0, 1.6, 0.0, 0.0, 0.0]);
        let d = m.sample(0.0, &pole);
        assert!((d.norm() - 1e-3).abs() < 1e-12);
        assert!(d.norm() <= 1e-3);
    }

    #[test]
    fn clamp_never_exceeds_bound() {
        let v = DVector::from_column_slice(&[3.0, 4.0, 12.0]);
        let c = clamp_norm(v, 0.1);
        assert!(c.norm() <= 0.1);
    }

    #[test]
    fn planar_single_integrator() {
        let x = Vector2::new(0.3, 0.4);
        assert_eq!(
            planar_demo_field(&x, &Vector2::new(1.0, 0.0), &Vector2::zeros()),
            Vector2::new(1.0, 0.0)
        );
        assert_eq!(
            planar_demo_field(&x, &Vector2::zeros(), &Vector2::new(0.0, 0.01)),
            Vector2::new(0.0, 0.01)
        );
        let k = ProportionalController {
            gain: 1.0,
            goal: DVector::zeros(2),
        };
        let sys = SingleIntegrator { dim: 2 };
        let x = DVector::from_column_slice(&[1.0, 0.0]);
        let f = sys.field(&x, &k.control(&x));
        assert_eq!(f.as_slice(), &[-1.0, 0.0]);
    }
}
