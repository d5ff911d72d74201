//! Greedy impulsive control and the two-impulse safety maneuver.

use crate::barrier::{xi_tau, BarrierSpec};
use crate::dynamics::SatelliteState;
use crate::error::{Error, Result};
use crate::numerics::{propagate_until, Monitor, PropagationOptions, Sample, State};
use crate::orbital::verify_jump_conditions;
use crate::scenario::SatelliteScenario;
use crate::taumodel::TauPModel;

use super::{base_summary, EventKind, EventRecord, RunOutput, Scheme, TrajectoryPoint, TriggerId};

/// Greedy scheme: integrate until the safety trigger fires, jump, repeat.
pub fn run_greedy_impulsive(
    scenario: &SatelliteScenario,
    x0: &SatelliteState,
    horizon: f64,
) -> Result<RunOutput> {
    run(scenario, None, x0, horizon)
}

/// Two-impulse maneuvers: the first impulse of a pair is timed by the safety
/// trigger; the second by whichever comes first of the safety trigger and
/// the timing trigger, the latter allowed only after `t1 + tau_p(h(t1))`.
pub fn run_maneuver(
    scenario: &SatelliteScenario,
    tau_model: &TauPModel,
    x0: &SatelliteState,
    horizon: f64,
) -> Result<RunOutput> {
    tau_model.validate()?;
    run(scenario, Some(tau_model), x0, horizon)
}

/// Crossings this close to the gate count as having fired at the gate.
const GATE_SLACK: f64 = 1e-6;

struct Ctx<'a> {
    scenario: &'a SatelliteScenario,
    spec: BarrierSpec,
    tau: Option<&'a TauPModel>,
}

impl Ctx<'_> {
    fn xi(&self, x: &State) -> f64 {
        self.scenario.xi(&self.spec, x)
    }

    fn tau_value(&self, x: &State) -> f64 {
        let model = self.tau.expect("timing trigger needs a model");
        match self.scenario.nominal_field(x) {
            Ok(f) => xi_tau(model, &self.spec, &f, x).value,
            Err(_) => f64::NEG_INFINITY,
        }
    }

    fn point(&self, s: &Sample, gate: Option<f64>, boundary: bool) -> Result<TrajectoryPoint> {
        let xi = self.xi(&s.x);
        let monitor = match gate {
            Some(g) if s.t >= g => xi.min(self.tau_value(&s.x)),
            _ => xi,
        };
        let flow = self.scenario.flow(s.t, &s.x)?;
        Ok(TrajectoryPoint {
            t: s.t,
            x: s.x.iter().copied().collect(),
            h: self.spec.h(&s.x),
            xi,
            monitor,
            hdot: self.spec.lie_derivative(&flow, &s.x),
            filter_on: false,
            boundary,
        })
    }
}

fn run(
    scenario: &SatelliteScenario,
    tau: Option<&TauPModel>,
    x0: &SatelliteState,
    horizon: f64,
) -> Result<RunOutput> {
    scenario.validate()?;
    if !(horizon > 0.0) {
        return Err(Error::Config(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    let ctx = Ctx {
        scenario,
        spec: scenario.barrier_spec()?,
        tau,
    };
    let controller = scenario.safeguarding();
    let c_buffer = scenario.controller.c_buffer;
    let base_opts = scenario.propagation();
    let flow = |t: f64, x: &State| scenario.flow(t, x);

    let mut x = x0.to_state();
    let h0 = ctx.spec.h(&x);
    if h0 < 0.0 {
        return Err(Error::Config(format!("initial state is unsafe: h = {h0}")));
    }

    let mut events: Vec<EventRecord> = Vec::new();
    let mut trajectory: Vec<TrajectoryPoint> = Vec::new();
    let mut aborted = None;
    let mut t = 0.0;
    let mut just_jumped = false;
    // Earliest firing time of the timing trigger while a pair is open.
    let mut gate: Option<f64> = None;

    // Apply an impulse at `(t, x)`; `None` aborts the run.
    let jump = |t: f64,
                x: &State,
                trigger: TriggerId,
                pair_position: Option<u8>,
                gate: Option<f64>,
                events: &mut Vec<EventRecord>|
     -> Result<std::result::Result<State, String>> {
        let s = SatelliteState::from_state(x);
        let imp = match controller.impulse(&ctx.spec, &s) {
            Ok(imp) => imp,
            Err(e @ Error::ControllerInfeasible { .. }) => return Ok(Err(format!("t = {t}: {e}"))),
            Err(e) => return Err(e),
        };
        let verdict =
            verify_jump_conditions(&ctx.spec, &scenario.gravity, &imp.state_after, c_buffer)?;
        if !verdict.is_ok() {
            return Ok(Err(format!(
                "t = {t}: jump conditions violated: {verdict:?}"
            )));
        }
        let after = imp.state_after.to_state();
        events.push(EventRecord {
            t,
            kind: EventKind::Jump,
            trigger_id: trigger,
            state_before: x.iter().copied().collect(),
            state_after: after.iter().copied().collect(),
            h_before: ctx.spec.h(x),
            h_after: imp.h_after,
            xi_after: imp.xi_after,
            impulse_magnitude: Some(imp.dv.norm()),
            pair_position,
            gate,
        });
        Ok(Ok(after))
    };

    if ctx.xi(&x) <= 0.0 {
        trajectory.push(ctx.point(&Sample { t, x: x.clone() }, None, true)?);
        match jump(t, &x, TriggerId::Initial, None, None, &mut events)? {
            Ok(after) => {
                x = after;
                just_jumped = true;
            }
            Err(msg) => aborted = Some(msg),
        }
    }

    while aborted.is_none() && t < horizon {
        let remaining = horizon - t;
        if remaining <= 1e-9 * horizon.max(1.0) {
            break;
        }
        let opts = PropagationOptions {
            dwell_steps: if just_jumped {
                base_opts.dwell_steps
            } else {
                0
            },
            ..base_opts
        };
        let safety = |_t: f64, x: &State| ctx.xi(x);
        let g = gate;
        let ctx_ref = &ctx;
        let timing = move |t: f64, x: &State| match g {
            Some(g) if t >= g => ctx_ref.tau_value(x),
            _ => 1.0,
        };
        let monitors: Vec<Monitor<'_>> = if gate.is_some() {
            vec![&safety, &timing]
        } else {
            vec![&safety]
        };
        let prop = propagate_until(&flow, &x, t, remaining, &monitors, &opts)?;
        let n = prop.samples.len();
        for (k, s) in prop.samples.iter().enumerate() {
            let boundary = k + 1 == n && prop.crossing.is_some();
            trajectory.push(ctx.point(s, gate, boundary)?);
        }
        let Some(c) = prop.crossing else {
            break;
        };

        let (trigger, pair_position, event_gate) = match (tau, gate) {
            (None, _) => (TriggerId::Safety, None, None),
            (Some(model), None) => {
                let (tau_p, _) = model.eval(ctx.spec.h(&c.x));
                gate = Some(c.t + tau_p.max(0.0));
                (TriggerId::Safety, Some(1), None)
            }
            (Some(_), Some(g)) => {
                let trigger = if c.monitor == 0 {
                    TriggerId::Safety
                } else if c.immediate || c.t - g <= GATE_SLACK {
                    TriggerId::Deadline
                } else {
                    TriggerId::Tau
                };
                gate = None;
                (trigger, Some(2), Some(g))
            }
        };
        match jump(c.t, &c.x, trigger, pair_position, event_gate, &mut events)? {
            Ok(after) => {
                x = after;
                t = c.t;
                just_jumped = true;
            }
            Err(msg) => {
                t = c.t;
                aborted = Some(msg);
            }
        }
    }

    if let Some(msg) = &aborted {
        log::warn!("run aborted: {msg}");
    }
    let scheme = if tau.is_some() {
        Scheme::Maneuver
    } else {
        Scheme::Greedy
    };
    let mut summary = base_summary(scheme, horizon, &events, &trajectory);
    summary.aborted = aborted;
    Ok(RunOutput {
        events,
        trajectory,
        summary,
    })
}
