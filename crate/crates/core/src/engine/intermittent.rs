//! Event-triggered intermittent safety filter.
//!
//! While OFF the nominal controller runs unfiltered and the on-trigger
//! `xi_on` is monitored. While ON the input is the safety-promoting
//! projection of the nominal input, and the filter switches off once
//! `xi_on` has recovered to the hysteresis level `c`.

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::barrier::BarrierSpec;
use crate::dynamics::{ControlAffineSystem, NominalController};
use crate::error::{Error, Result};
use crate::filter::{build_constraint, project, FilterMode};
use crate::numerics::{propagate_until, Monitor, PropagationOptions, State};
use crate::scenario::PlanarScenario;

use super::{base_summary, EventKind, EventRecord, RunOutput, Scheme, TrajectoryPoint, TriggerId};

/// Result of the sampled check that the nominal loop satisfies the
/// on-trigger with margin `c` wherever `h >= h_bar`.
#[derive(Debug, Clone, PartialEq)]
pub struct Assumption1Report {
    pub samples: usize,
    pub min_xi_on: f64,
    pub argmin: Vec<f64>,
    pub holds: bool,
}

/// Polar grid of `n_grid x n_grid` points plus `n_random` uniform points
/// over `{h >= h_bar}`.
pub fn check_assumption1(
    scenario: &PlanarScenario,
    n_grid: usize,
    n_random: usize,
    seed: u64,
) -> Result<Assumption1Report> {
    let spec = scenario.barrier_spec()?;
    let rho_max = (scenario.disk_radius.powi(2) - scenario.h_bar)
        .max(0.0)
        .sqrt();
    let mut points: Vec<State> = Vec::with_capacity(n_grid * n_grid + n_random + 1);
    points.push(DVector::zeros(2));
    for i in 1..=n_grid {
        let rho = rho_max * i as f64 / n_grid as f64;
        for j in 0..n_grid {
            let th = 2.0 * PI * j as f64 / n_grid as f64;
            points.push(DVector::from_column_slice(&[
                rho * th.cos(),
                rho * th.sin(),
            ]));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n_random {
        let rho = rho_max * rng.random::<f64>().sqrt();
        let th = rng.random_range(0.0..2.0 * PI);
        points.push(DVector::from_column_slice(&[
            rho * th.cos(),
            rho * th.sin(),
        ]));
    }
    let mut min_xi = f64::INFINITY;
    let mut argmin = Vec::new();
    for x in &points {
        let xi = spec.xi_on(x, &scenario.nominal_field(x));
        if xi < min_xi {
            min_xi = xi;
            argmin = x.iter().copied().collect();
        }
    }
    Ok(Assumption1Report {
        samples: points.len(),
        min_xi_on: min_xi,
        argmin,
        holds: min_xi >= scenario.c,
    })
}

/// One ON period of the filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnPeriod {
    pub t_on: f64,
    pub t_off: f64,
    pub h_on: f64,
    /// `(h_bar - h_on) / b_gain`.
    pub bound: f64,
}

impl OnPeriod {
    /// Pairs consecutive `filter_on` / `filter_off` events.
    pub fn from_events(events: &[EventRecord], h_bar: f64, b_gain: f64) -> Vec<OnPeriod> {
        let mut out = Vec::new();
        let mut open: Option<&EventRecord> = None;
        for e in events {
            match e.kind {
                EventKind::FilterOn => open = Some(e),
                EventKind::FilterOff => {
                    if let Some(on) = open.take() {
                        out.push(OnPeriod {
                            t_on: on.t,
                            t_off: e.t,
                            h_on: on.h_after,
                            bound: (h_bar - on.h_after) / b_gain,
                        });
                    }
                }
                EventKind::Jump => {}
            }
        }
        out
    }

    pub fn duration(&self) -> f64 {
        self.t_off - self.t_on
    }
}

struct Loop<'a> {
    scenario: &'a PlanarScenario,
    spec: BarrierSpec,
}

impl Loop<'_> {
    fn control(&self, x: &State, on: bool) -> Result<DVector<f64>> {
        let nominal = self.scenario.nominal();
        let u_nom = nominal.control(x);
        if !on {
            return Ok(u_nom);
        }
        let sys = self.scenario.system();
        let con = build_constraint(
            &self.spec,
            &sys,
            x,
            FilterMode::Promoting {
                b_gain: self.scenario.b_gain,
            },
        );
        project(&u_nom, &con)
    }

    fn flow(&self, t: f64, x: &State, on: bool) -> Result<State> {
        let sys = self.scenario.system();
        let u = self.control(x, on)?;
        Ok(sys.field(x, &u) + self.scenario.disturbance.sample(t, x))
    }

    fn xi_on(&self, x: &State) -> f64 {
        self.spec.xi_on(x, &self.scenario.nominal_field(x))
    }
}

/// Intermittent filter run. The configuration is rejected up front when the
/// sampled assumption check fails.
pub fn run_intermittent_filter(
    scenario: &PlanarScenario,
    x0: &[f64; 2],
    horizon: f64,
) -> Result<RunOutput> {
    scenario.validate()?;
    if !(horizon > 0.0) {
        return Err(Error::Config(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    let report = check_assumption1(scenario, 101, 10_000, 0)?;
    if !report.holds {
        return Err(Error::Config(format!(
            "nominal loop violates xi_on >= c on h >= h_bar: min {:.4e} at {:?} over {} samples",
            report.min_xi_on, report.argmin, report.samples
        )));
    }
    log::debug!(
        "assumption check: min xi_on = {:.4} over {} samples",
        report.min_xi_on,
        report.samples
    );

    let lp = Loop {
        scenario,
        spec: scenario.barrier_spec()?,
    };
    let c = scenario.c;
    let base_opts = scenario.propagation();

    let mut x = DVector::from_column_slice(x0);
    let h0 = lp.spec.h(&x);
    if h0 < 0.0 {
        return Err(Error::Config(format!("initial state is unsafe: h = {h0}")));
    }

    let mut events: Vec<EventRecord> = Vec::new();
    let mut trajectory: Vec<TrajectoryPoint> = Vec::new();
    let mut t = 0.0;
    let mut on = false;
    let mut just_switched = false;

    let switch = |t: f64, x: &State, kind: EventKind, trigger: TriggerId| {
        let h = lp.spec.h(x);
        let state: Vec<f64> = x.iter().copied().collect();
        EventRecord {
            t,
            kind,
            trigger_id: trigger,
            state_before: state.clone(),
            state_after: state,
            h_before: h,
            h_after: h,
            xi_after: lp.xi_on(x),
            impulse_magnitude: None,
            pair_position: None,
            gate: None,
        }
    };

    if lp.xi_on(&x) <= 0.0 {
        events.push(switch(t, &x, EventKind::FilterOn, TriggerId::Initial));
        on = true;
        just_switched = true;
    }

    while t < horizon {
        let remaining = horizon - t;
        if remaining <= 1e-9 * horizon.max(1.0) {
            break;
        }
        let opts = PropagationOptions {
            dwell_steps: if just_switched {
                base_opts.dwell_steps
            } else {
                0
            },
            ..base_opts
        };
        let field = |t: f64, x: &State| lp.flow(t, x, on);
        let monitor_on = |_t: f64, x: &State| lp.xi_on(x);
        let monitor_off = |_t: f64, x: &State| c - lp.xi_on(x);
        let monitors: [Monitor<'_>; 1] = if on { [&monitor_off] } else { [&monitor_on] };
        let prop = propagate_until(&field, &x, t, remaining, &monitors, &opts)?;

        let n = prop.samples.len();
        for (k, s) in prop.samples.iter().enumerate() {
            let xi = lp.xi_on(&s.x);
            let f = lp.flow(s.t, &s.x, on)?;
            trajectory.push(TrajectoryPoint {
                t: s.t,
                x: s.x.iter().copied().collect(),
                h: lp.spec.h(&s.x),
                xi,
                monitor: if on { c - xi } else { xi },
                hdot: lp.spec.lie_derivative(&f, &s.x),
                filter_on: on,
                boundary: k + 1 == n && prop.crossing.is_some(),
            });
        }
        let Some(cross) = prop.crossing else {
            break;
        };
        let kind = if on {
            EventKind::FilterOff
        } else {
            EventKind::FilterOn
        };
        events.push(switch(cross.t, &cross.x, kind, TriggerId::Safety));
        on = !on;
        just_switched = true;
        x = cross.x;
        t = cross.t;
    }

    let mut summary = base_summary(Scheme::Intermittent, horizon, &events, &trajectory);
    let periods = OnPeriod::from_events(&events, scenario.h_bar, scenario.b_gain);
    summary.max_on_duration = periods.iter().map(OnPeriod::duration).reduce(f64::max);
    summary.worst_on_bound_ratio = periods
        .iter()
        .map(|p| p.duration() / p.bound.max(f64::MIN_POSITIVE))
        .reduce(f64::max);
    // The off-trigger boundary sample belongs to the ON period.
    summary.min_hdot_on = trajectory
        .iter()
        .filter(|p| p.filter_on)
        .map(|p| p.hdot)
        .reduce(f64::min);
    summary.min_xi_flow = trajectory
        .iter()
        .filter(|p| !p.boundary)
        .map(|p| p.monitor)
        .fold(f64::INFINITY, f64::min);
    summary.horizon_truncated = on;
    Ok(RunOutput {
        events,
        trajectory,
        summary,
    })
}
