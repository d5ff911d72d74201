//! Hybrid simulation loops and their audits.

mod audit;
mod impulsive;
mod intermittent;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use audit::{
    audit_safety, miet_bound, miet_from_constants, satellite_region_samples, MietEstimate,
    SafetyAudit,
};
pub use impulsive::{run_greedy_impulsive, run_maneuver};
pub use intermittent::{check_assumption1, run_intermittent_filter, Assumption1Report, OnPeriod};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Greedy,
    Maneuver,
    Intermittent,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Greedy => "greedy",
            Scheme::Maneuver => "maneuver",
            Scheme::Intermittent => "intermittent",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Jump,
    FilterOn,
    FilterOff,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::Jump => "jump",
            EventKind::FilterOn => "filter_on",
            EventKind::FilterOff => "filter_off",
        }
    }
}

/// Which condition scheduled an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TriggerId {
    /// The initial state already violated the trigger.
    Initial,
    /// Safety trigger (greedy, filter-on or filter-off).
    Safety,
    /// Maneuver timing trigger crossed after its earliest allowed time.
    Tau,
    /// Maneuver timing trigger was already non-positive when it was allowed.
    Deadline,
}

impl TriggerId {
    pub fn as_str(&self) -> &'static str {
        match self {
            TriggerId::Initial => "initial",
            TriggerId::Safety => "safety",
            TriggerId::Tau => "tau",
            TriggerId::Deadline => "deadline",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub t: f64,
    pub kind: EventKind,
    pub trigger_id: TriggerId,
    pub state_before: Vec<f64>,
    pub state_after: Vec<f64>,
    pub h_before: f64,
    pub h_after: f64,
    /// Safety trigger value just after the event.
    pub xi_after: f64,
    /// `|dv|` for jumps.
    pub impulse_magnitude: Option<f64>,
    /// Position (1 or 2) within a two-impulse maneuver.
    pub pair_position: Option<u8>,
    /// Earliest time the timing trigger was allowed to fire, for second
    /// impulses of a maneuver.
    pub gate: Option<f64>,
}

/// Dense trajectory sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub x: Vec<f64>,
    pub h: f64,
    /// Safety trigger value at this sample.
    pub xi: f64,
    /// Smallest value among the monitors armed at this sample.
    pub monitor: f64,
    /// `dh/dt` along the actual (disturbed, controlled) flow.
    pub hdot: f64,
    pub filter_on: bool,
    /// The sample is an event location (end of a flow segment).
    pub boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scheme: Scheme,
    pub horizon: f64,
    /// Time reached; below `horizon` only for aborted runs.
    pub end_time: f64,
    pub jump_count: usize,
    pub filter_on_count: usize,
    pub filter_off_count: usize,
    pub events_by_trigger: BTreeMap<String, usize>,
    pub min_inter_event_time: Option<f64>,
    pub mean_inter_event_time: Option<f64>,
    pub median_inter_event_time: Option<f64>,
    pub total_dv: f64,
    pub min_h: f64,
    pub min_xi_flow: f64,
    pub miet_bound: Option<f64>,
    /// Longest ON period and the largest ratio of an ON period to its bound.
    pub max_on_duration: Option<f64>,
    pub worst_on_bound_ratio: Option<f64>,
    pub min_hdot_on: Option<f64>,
    /// The run ended with the filter still on.
    pub horizon_truncated: bool,
    pub aborted: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub events: Vec<EventRecord>,
    pub trajectory: Vec<TrajectoryPoint>,
    pub summary: RunSummary,
}

/// Differences between consecutive event times.
pub fn inter_event_times(times: &[f64]) -> Vec<f64> {
    times.windows(2).map(|w| w[1] - w[0]).collect()
}

fn interval_stats(dts: &[f64]) -> (Option<f64>, Option<f64>, Option<f64>) {
    if dts.is_empty() {
        return (None, None, None);
    }
    let mut v = dts.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let median = if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    };
    (
        Some(v[0]),
        Some(v.iter().sum::<f64>() / n as f64),
        Some(median),
    )
}

fn base_summary(
    scheme: Scheme,
    horizon: f64,
    events: &[EventRecord],
    trajectory: &[TrajectoryPoint],
) -> RunSummary {
    let mut by_trigger = BTreeMap::new();
    for e in events {
        *by_trigger
            .entry(format!("{}:{}", e.kind.as_str(), e.trigger_id.as_str()))
            .or_insert(0) += 1;
    }
    let count = |k: EventKind| events.iter().filter(|e| e.kind == k).count();
    let jump_times: Vec<f64> = events
        .iter()
        .filter(|e| e.kind == EventKind::Jump)
        .map(|e| e.t)
        .collect();
    let times: Vec<f64> = if jump_times.is_empty() {
        events.iter().map(|e| e.t).collect()
    } else {
        jump_times
    };
    let (min_dt, mean_dt, median_dt) = interval_stats(&inter_event_times(&times));
    RunSummary {
        scheme,
        horizon,
        end_time: trajectory.last().map_or(0.0, |p| p.t),
        jump_count: count(EventKind::Jump),
        filter_on_count: count(EventKind::FilterOn),
        filter_off_count: count(EventKind::FilterOff),
        events_by_trigger: by_trigger,
        min_inter_event_time: min_dt,
        mean_inter_event_time: mean_dt,
        median_inter_event_time: median_dt,
        total_dv: events.iter().filter_map(|e| e.impulse_magnitude).sum(),
        min_h: trajectory.iter().map(|p| p.h).fold(f64::INFINITY, f64::min),
        min_xi_flow: trajectory
            .iter()
            .filter(|p| !p.boundary)
            .map(|p| p.monitor)
            .fold(f64::INFINITY, f64::min),
        miet_bound: None,
        max_on_duration: None,
        worst_on_bound_ratio: None,
        min_hdot_on: None,
        horizon_truncated: false,
        aborted: None,
    }
}
