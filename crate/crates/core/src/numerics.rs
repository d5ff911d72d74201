//! Fixed-step integration, dense interpolation and zero-crossing location.
//!
//! The propagator advances with classical RK4 on a fixed grid and checks the
//! sign of every monitor at each step end. A monitor that goes from positive
//! to non-positive inside a step is refined by bisection on the interpolated
//! segment, so the reported crossing state lies on the same interpolant the
//! trajectory output uses.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Flat state vector; the layout is defined by the scenario.
pub type State = DVector<f64>;

/// Within-step interpolation used for event location.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolation {
    Linear,
    #[default]
    CubicHermite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub step_size: f64,
    pub interpolation: Interpolation,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            step_size: 0.02,
            interpolation: Interpolation::CubicHermite,
        }
    }
}

impl IntegratorConfig {
    pub fn new(step_size: f64, interpolation: Interpolation) -> Result<Self> {
        let cfg = Self {
            step_size,
            interpolation,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::Config(format!(
                "integrator step_size must be positive, got {}",
                self.step_size
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventLocatorConfig {
    pub time_tolerance: f64,
    pub value_tolerance: f64,
    pub max_bisections: u32,
}

impl Default for EventLocatorConfig {
    fn default() -> Self {
        Self {
            time_tolerance: 1e-9,
            value_tolerance: 1e-12,
            max_bisections: 64,
        }
    }
}

impl EventLocatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.time_tolerance > 0.0 && self.value_tolerance > 0.0) {
            return Err(Error::Config(
                "event tolerances must be positive".to_string(),
            ));
        }
        if self.max_bisections < 1 {
            return Err(Error::Config("max_bisections must be at least 1".into()));
        }
        Ok(())
    }
}

fn check_finite(t: f64, x: &State, dx: &State) -> Result<()> {
    if dx.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::IntegrationFailure {
            t,
            state: x.iter().copied().collect(),
        })
    }
}

/// One classical fourth-order Runge-Kutta step of size `dt` from `(t, x)`.
pub fn rk4_step<F>(field: &F, x: &State, t: f64, dt: f64) -> Result<State>
where
    F: Fn(f64, &State) -> Result<State>,
{
    let k1 = field(t, x)?;
    check_finite(t, x, &k1)?;
    rk4_step_with_slope(field, x, t, dt, &k1)
}

/// RK4 step reusing a precomputed first-stage slope `k1 = field(t, x)`.
fn rk4_step_with_slope<F>(field: &F, x: &State, t: f64, dt: f64, k1: &State) -> Result<State>
where
    F: Fn(f64, &State) -> Result<State>,
{
    let half = 0.5 * dt;
    let x2 = x + k1 * half;
    let k2 = field(t + half, &x2)?;
    check_finite(t + half, &x2, &k2)?;
    let x3 = x + &k2 * half;
    let k3 = field(t + half, &x3)?;
    check_finite(t + half, &x3, &k3)?;
    let x4 = x + &k3 * dt;
    let k4 = field(t + dt, &x4)?;
    check_finite(t + dt, &x4, &k4)?;
    Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}

/// One accepted integration step with the endpoint slopes needed for
/// Hermite interpolation.
#[derive(Debug, Clone)]
pub struct Segment {
    pub t0: f64,
    pub t1: f64,
    pub x0: State,
    pub x1: State,
    pub f0: State,
    pub f1: State,
}

impl Segment {
    /// State at time `t` in `[t0, t1]`.
    pub fn interpolate(&self, t: f64, mode: Interpolation) -> State {
        let h = self.t1 - self.t0;
        let s = ((t - self.t0) / h).clamp(0.0, 1.0);
        match mode {
            Interpolation::Linear => &self.x0 + (&self.x1 - &self.x0) * s,
            Interpolation::CubicHermite => {
                let s2 = s * s;
                let s3 = s2 * s;
                let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
                let h10 = s3 - 2.0 * s2 + s;
                let h01 = -2.0 * s3 + 3.0 * s2;
                let h11 = s3 - s2;
                &self.x0 * h00 + &self.f0 * (h10 * h) + &self.x1 * h01 + &self.f1 * (h11 * h)
            }
        }
    }
}

/// Result of a bracketed zero-crossing search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub t: f64,
    pub value: f64,
    /// Set when `max_bisections` ran out before either tolerance was met.
    pub degraded: bool,
}

/// Locate a downward zero crossing of `g` in `[t_lo, t_hi]` by bisection.
///
/// Requires `g(t_lo) > 0` and `g(t_hi) <= 0`. The returned time always
/// satisfies `g(t) <= 0` unless the search is degraded, in which case the
/// midpoint of the final bracket is returned.
pub fn locate_zero_crossing<G>(
    mut g: G,
    t_lo: f64,
    t_hi: f64,
    cfg: &EventLocatorConfig,
) -> Result<Crossing>
where
    G: FnMut(f64) -> f64,
{
    let g_lo = g(t_lo);
    let g_hi = g(t_hi);
    if !(g_lo > 0.0) || !(g_hi <= 0.0) || !(t_hi >= t_lo) {
        return Err(Error::InvalidBracket {
            t_lo,
            g_lo,
            t_hi,
            g_hi,
        });
    }
    let (mut lo, mut hi, mut g_hi) = (t_lo, t_hi, g_hi);
    for _ in 0..cfg.max_bisections {
        if hi - lo <= cfg.time_tolerance || g_hi.abs() <= cfg.value_tolerance {
            return Ok(Crossing {
                t: hi,
                value: g_hi,
                degraded: false,
            });
        }
        let mid = lo + 0.5 * (hi - lo);
        let g_mid = g(mid);
        if g_mid > 0.0 {
            lo = mid;
        } else {
            hi = mid;
            g_hi = g_mid;
        }
    }
    if hi - lo <= cfg.time_tolerance || g_hi.abs() <= cfg.value_tolerance {
        return Ok(Crossing {
            t: hi,
            value: g_hi,
            degraded: false,
        });
    }
    let mid = lo + 0.5 * (hi - lo);
    Ok(Crossing {
        t: mid,
        value: g(mid),
        degraded: true,
    })
}

/// A dense trajectory sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: State,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FirstCrossing {
    /// Index into the monitor list.
    pub monitor: usize,
    pub t: f64,
    pub x: State,
    pub degraded: bool,
    /// True when the monitor was already non-positive the first time it was
    /// checked, so no bracket refinement took place.
    pub immediate: bool,
}

#[derive(Debug, Clone)]
pub struct Propagation {
    /// Step endpoints from the start state through the crossing state (or
    /// the horizon end when nothing crossed).
    pub samples: Vec<Sample>,
    pub crossing: Option<FirstCrossing>,
}

impl Propagation {
    pub fn final_sample(&self) -> &Sample {
        self.samples
            .last()
            .expect("propagation always holds its start sample")
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PropagationOptions {
    pub integrator: IntegratorConfig,
    pub locator: EventLocatorConfig,
    /// Number of leading samples (the start sample counts as one) at which
    /// monitors are not evaluated.
    pub dwell_steps: usize,
}

/// A scalar function of time and state whose downward zero crossing is an
/// event.
pub type Monitor<'a> = &'a dyn Fn(f64, &State) -> f64;

/// Integrate `field` from `(t0, x0)` for `horizon` time units, stopping at
/// the earliest downward crossing of any monitor.
///
/// A monitor that is already `<= 0` at the first sample where it is checked
/// fires immediately at that sample. When two monitors cross inside the same
/// step the earlier time wins; exact ties go to the lower index.
pub fn propagate_until<F>(
    field: &F,
    x0: &State,
    t0: f64,
    horizon: f64,
    monitors: &[Monitor<'_>],
    opts: &PropagationOptions,
) -> Result<Propagation>
where
    F: Fn(f64, &State) -> Result<State>,
{
    if !(horizon > 0.0) {
        return Err(Error::Config(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    opts.integrator.validate()?;
    let dt = opts.integrator.step_size;
    let n_steps = ((horizon / dt) - 1e-9).ceil().max(1.0) as usize;
    let t_end = t0 + horizon;

    let mut samples = Vec::with_capacity(n_steps + 1);
    samples.push(Sample {
        t: t0,
        x: x0.clone(),
    });

    let immediate = |t: f64, x: &State| monitors.iter().position(|m| m(t, x) <= 0.0);

    if opts.dwell_steps == 0 {
        if let Some(idx) = immediate(t0, x0) {
            return Ok(Propagation {
                samples,
                crossing: Some(FirstCrossing {
                    monitor: idx,
                    t: t0,
                    x: x0.clone(),
                    degraded: false,
                    immediate: true,
                }),
            });
        }
    }

    let mut x = x0.clone();
    let mut f = field(t0, &x)?;
    check_finite(t0, &x, &f)?;

    for i in 0..n_steps {
        let t = t0 + i as f64 * dt;
        let t_next = if i + 1 == n_steps {
            t_end
        } else {
            t0 + (i + 1) as f64 * dt
        };
        let h = t_next - t;
        let x_next = rk4_step_with_slope(field, &x, t, h, &f)?;
        let f_next = field(t_next, &x_next)?;
        check_finite(t_next, &x_next, &f_next)?;

        let sample_index = i + 1;
        if sample_index == opts.dwell_steps {
            if let Some(idx) = immediate(t_next, &x_next) {
                samples.push(Sample {
                    t: t_next,
                    x: x_next.clone(),
                });
                return Ok(Propagation {
                    samples,
                    crossing: Some(FirstCrossing {
                        monitor: idx,
                        t: t_next,
                        x: x_next,
                        degraded: false,
                        immediate: true,
                    }),
                });
            }
        } else if sample_index > opts.dwell_steps {
            let fired: Vec<usize> = monitors
                .iter()
                .enumerate()
                .filter(|(_, m)| m(t_next, &x_next) <= 0.0)
                .map(|(k, _)| k)
                .collect();
            if !fired.is_empty() {
                let seg = Segment {
                    t0: t,
                    t1: t_next,
                    x0: x.clone(),
                    x1: x_next.clone(),
                    f0: f.clone(),
                    f1: f_next.clone(),
                };
                let mode = opts.integrator.interpolation;
                let mut best: Option<(usize, Crossing)> = None;
                for k in fired {
                    let m = monitors[k];
                    let c = locate_zero_crossing(
                        |tau| m(tau, &seg.interpolate(tau, mode)),
                        t,
                        t_next,
                        &opts.locator,
                    )?;
                    if best.as_ref().is_none_or(|(_, b)| c.t < b.t) {
                        best = Some((k, c));
                    }
                }
                let (k, c) = best.expect("at least one monitor fired");
                let x_c = seg.interpolate(c.t, mode);
                samples.push(Sample {
                    t: c.t,
                    x: x_c.clone(),
                });
                return Ok(Propagation {
                    samples,
                    crossing: Some(FirstCrossing {
                        monitor: k,
                        t: c.t,
                        x: x_c,
                        degraded: c.degraded,
                        immediate: false,
                    }),
                });
            }
        }

        samples.push(Sample {
            t: t_next,
            x: x_next.clone(),
        });
        x = x_next;
        f = f_next;
    }

    Ok(Propagation {
        samples,
        crossing: None,
    })
}
