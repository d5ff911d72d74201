//! Subcommand implementations.

use std::fs;
use std::path::Path;
use std::time::Instant;

use etsafe_core::engine::{
    audit_safety, check_assumption1, miet_bound, run_greedy_impulsive, run_intermittent_filter,
    run_maneuver, satellite_region_samples, RunOutput, SafetyAudit,
};
use etsafe_core::scenario::SatelliteScenario;
use etsafe_core::taumodel::{collect_samples, Basis, Statistic, TauPModel, TauSampleSet};
use log::{info, warn};
use serde_json::{json, Map, Value};

use crate::config::{ScenarioConfig, ScenarioKind};
use crate::output::{
    events_csv, flatten, json_document, planar_trajectory_csv, satellite_trajectory_csv,
    write_atomic, RunPaths,
};
use crate::CliError;

/// States are safe when `h >= -AUDIT_TOLERANCE`.
pub const AUDIT_TOLERANCE: f64 = 1e-9;
/// Sample states used to estimate the MIET constants.
const MIET_SAMPLES: usize = 2000;
/// Sample density of the pre-run check on the planar nominal loop.
const ASSUMPTION_GRID: usize = 101;
const ASSUMPTION_RANDOM: usize = 10_000;
/// A sampling campaign with more censored samples than this is flagged.
const CENSORED_WARN_FRACTION: f64 = 0.05;

/// Seed and horizon overrides shared by the run commands.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub horizon: Option<f64>,
}

fn load(path: &Path, overrides: Overrides) -> Result<ScenarioConfig, CliError> {
    let mut cfg = ScenarioConfig::load(path)?;
    cfg.apply_overrides(overrides.seed, overrides.horizon);
    cfg.validate()?;
    Ok(cfg)
}

/// A finished run with everything needed to write it out.
pub struct CompletedRun {
    pub output: RunOutput,
    pub audit: SafetyAudit,
    pub summary: Map<String, Value>,
    trajectory_csv: String,
}

impl CompletedRun {
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let paths = RunPaths::in_dir(dir);
        write_atomic(&paths.trajectory, self.trajectory_csv.as_bytes())?;
        write_atomic(&paths.events, events_csv(&self.output.events).as_bytes())?;
        write_atomic(&paths.summary, json_document(&self.summary).as_bytes())
    }

    /// `Ok` iff the run finished and the audit found no unsafe state.
    pub fn status(&self) -> Result<(), CliError> {
        if let Some(reason) = &self.output.summary.aborted {
            return Err(CliError::Run(format!(
                "{} run aborted at t = {}: {reason}",
                self.output.summary.scheme.as_str(),
                self.output.summary.end_time
            )));
        }
        if !self.audit.safe {
            return Err(CliError::Unsafe(format!(
                "{} run reached h = {:e}",
                self.output.summary.scheme.as_str(),
                self.audit.min_h
            )));
        }
        Ok(())
    }
}

fn summary_document(
    cfg: &ScenarioConfig,
    output: &RunOutput,
    audit: &SafetyAudit,
    extra: Map<String, Value>,
) -> Map<String, Value> {
    let mut m = Map::new();
    let summary = serde_json::to_value(&output.summary).expect("summary serializes");
    flatten("", summary, &mut m);
    m.insert("scenario".into(), json!(cfg.scenario.as_str()));
    m.insert("seed".into(), json!(cfg.seed));
    m.insert("output_stride".into(), json!(cfg.output_stride));
    m.insert("audit.min_h".into(), json!(audit.min_h));
    m.insert("audit.min_xi_flow".into(), json!(audit.min_xi_flow));
    m.insert("audit.safe".into(), json!(audit.safe));
    m.insert("audit.tolerance".into(), json!(AUDIT_TOLERANCE));
    if let Some(u) = cfg.time_unit_hours {
        let s = &output.summary;
        m.insert("time_unit_hours".into(), json!(u));
        m.insert("hours.horizon".into(), json!(s.horizon * u));
        m.insert("hours.end_time".into(), json!(s.end_time * u));
        m.insert(
            "hours.mean_inter_event_time".into(),
            json!(s.mean_inter_event_time.map(|v| v * u)),
        );
        m.insert(
            "hours.median_inter_event_time".into(),
            json!(s.median_inter_event_time.map(|v| v * u)),
        );
    }
    m.extend(extra);
    m
}

/// Runs the greedy scheme, or the maneuver scheme when a model is given.
pub fn run_satellite(
    cfg: &ScenarioConfig,
    scenario: &SatelliteScenario,
    model: Option<&TauPModel>,
) -> Result<CompletedRun, CliError> {
    let x0 = cfg.satellite_initial(scenario)?;
    let started = Instant::now();
    let mut output = match model {
        None => run_greedy_impulsive(scenario, &x0, cfg.horizon)?,
        Some(m) => run_maneuver(scenario, m, &x0, cfg.horizon)?,
    };
    info!(
        "{} run: {} jumps over {} time units in {:.2?}",
        output.summary.scheme.as_str(),
        output.summary.jump_count,
        output.summary.end_time,
        started.elapsed()
    );
    let spec = scenario.barrier_spec()?;
    let audit = audit_safety(&output.trajectory, &spec, AUDIT_TOLERANCE);
    let mut extra = Map::new();
    extra.insert(
        "controller.c_buffer".into(),
        json!(scenario.controller.c_buffer),
    );
    let buffer_ok = output
        .events
        .iter()
        .all(|e| e.xi_after >= scenario.controller.c_buffer);
    extra.insert("controller.buffer_held".into(), json!(buffer_ok));
    match model {
        None => {
            let states = satellite_region_samples(scenario, MIET_SAMPLES, cfg.seed);
            let est = miet_bound(
                &spec,
                |x| scenario.nominal_field(x),
                &states,
                scenario.controller.c_buffer,
            )?;
            output.summary.miet_bound = Some(est.bound);
            let respected = output
                .summary
                .min_inter_event_time
                .is_none_or(|m| m >= est.bound);
            if !respected {
                warn!(
                    "observed inter-event time below the MIET bound {}",
                    est.bound
                );
            }
            extra.insert("miet.l_xi".into(), json!(est.l_xi));
            extra.insert("miet.b_bound".into(), json!(est.b_bound));
            extra.insert("miet.samples".into(), json!(est.samples));
            extra.insert("miet.respected".into(), json!(respected));
        }
        Some(m) => {
            extra.insert("tau_model.h_min".into(), json!(m.h_min));
            extra.insert("tau_model.h_max".into(), json!(m.h_max));
            extra.insert("tau_model.residual".into(), json!(m.residual));
            let pairs = output
                .events
                .iter()
                .filter(|e| e.pair_position == Some(1))
                .count();
            extra.insert("maneuver.pairs".into(), json!(pairs));
        }
    }
    let summary = summary_document(cfg, &output, &audit, extra);
    let trajectory_csv = satellite_trajectory_csv(&output.trajectory, cfg.output_stride);
    Ok(CompletedRun {
        output,
        audit,
        summary,
        trajectory_csv,
    })
}

pub fn run_planar(cfg: &ScenarioConfig) -> Result<CompletedRun, CliError> {
    let scenario = cfg.planar()?;
    let report = check_assumption1(&scenario, ASSUMPTION_GRID, ASSUMPTION_RANDOM, 0)?;
    let started = Instant::now();
    let output = run_intermittent_filter(&scenario, &cfg.planar_initial(), cfg.horizon)?;
    info!(
        "intermittent run: {} on / {} off events in {:.2?}",
        output.summary.filter_on_count,
        output.summary.filter_off_count,
        started.elapsed()
    );
    let audit = audit_safety(
        &output.trajectory,
        &scenario.barrier_spec()?,
        AUDIT_TOLERANCE,
    );
    let mut extra = Map::new();
    extra.insert("assumption.samples".into(), json!(report.samples));
    extra.insert("assumption.min_xi_on".into(), json!(report.min_xi_on));
    extra.insert("filter.b_gain".into(), json!(scenario.b_gain));
    extra.insert("filter.h_bar".into(), json!(scenario.h_bar));
    extra.insert("filter.c".into(), json!(scenario.c));
    let summary = summary_document(cfg, &output, &audit, extra);
    let trajectory_csv = planar_trajectory_csv(&output.trajectory, cfg.output_stride);
    Ok(CompletedRun {
        output,
        audit,
        summary,
        trajectory_csv,
    })
}

pub fn simulate(
    config: &Path,
    out: &Path,
    overrides: Overrides,
    tau_model: Option<&Path>,
) -> Result<(), CliError> {
    let cfg = load(config, overrides)?;
    let run = match cfg.scenario {
        ScenarioKind::Satellite => {
            let scenario = cfg.satellite()?;
            let model = match cfg.scheme {
                etsafe_core::engine::Scheme::Maneuver => Some(cfg.tau_model(tau_model)?),
                _ => None,
            };
            run_satellite(&cfg, &scenario, model.as_ref())?
        }
        ScenarioKind::PlanarDemo => run_planar(&cfg)?,
    };
    run.write(out)?;
    info!("wrote {}", out.display());
    run.status()
}

pub fn compare(
    config: &Path,
    tau_model: Option<&Path>,
    out: &Path,
    overrides: Overrides,
) -> Result<(), CliError> {
    let cfg = load(config, overrides)?;
    if cfg.scenario != ScenarioKind::Satellite {
        return Err(CliError::Config(
            "compare needs the satellite scenario".into(),
        ));
    }
    let scenario = cfg.satellite()?;
    let model = cfg.tau_model(tau_model)?;
    let greedy = run_satellite(&cfg, &scenario, None)?;
    let maneuver = run_satellite(&cfg, &scenario, Some(&model))?;
    greedy.write(&out.join("greedy"))?;
    maneuver.write(&out.join("maneuver"))?;

    let mut report = Map::new();
    report.insert("seed".into(), json!(cfg.seed));
    report.insert("horizon".into(), json!(cfg.horizon));
    if let Some(u) = cfg.time_unit_hours {
        report.insert("time_unit_hours".into(), json!(u));
        report.insert("hours.horizon".into(), json!(cfg.horizon * u));
    }
    for (name, run) in [("greedy", &greedy), ("maneuver", &maneuver)] {
        let s = &run.output.summary;
        report.insert(format!("{name}.jump_count"), json!(s.jump_count));
        report.insert(
            format!("{name}.mean_inter_event_time"),
            json!(s.mean_inter_event_time),
        );
        report.insert(
            format!("{name}.median_inter_event_time"),
            json!(s.median_inter_event_time),
        );
        report.insert(format!("{name}.total_dv"), json!(s.total_dv));
        report.insert(format!("{name}.min_h"), json!(run.audit.min_h));
        report.insert(
            format!("{name}.safe"),
            json!(run.audit.safe && s.aborted.is_none()),
        );
    }
    let g = greedy.output.summary.jump_count as f64;
    let m = maneuver.output.summary.jump_count as f64;
    let reduction = (g > 0.0).then(|| 1.0 - m / g);
    report.insert("reduction".into(), json!(reduction));
    report.insert(
        "reduction_percent".into(),
        json!(reduction.map(|r| 100.0 * r)),
    );
    write_atomic(&out.join("compare.json"), json_document(&report).as_bytes())?;
    info!(
        "greedy {} jumps, maneuver {} jumps, reduction {}",
        g,
        m,
        reduction.map_or("n/a".into(), |r| format!("{:.1}%", 100.0 * r))
    );
    greedy.status()?;
    maneuver.status()
}

/// Campaign parameters that may be overridden on the command line.
#[derive(Debug, Clone, Default)]
pub struct SampleOverrides {
    pub seed: Option<u64>,
    pub n: Option<usize>,
    pub grid: Option<Vec<f64>>,
    pub max_time: Option<f64>,
}

pub fn sample_tau(config: &Path, out: &Path, o: SampleOverrides) -> Result<(), CliError> {
    let mut cfg = ScenarioConfig::load(config)?;
    cfg.apply_overrides(o.seed, None);
    if let Some(n) = o.n {
        cfg.tau.n_per_radius = n;
    }
    if let Some(g) = o.grid {
        cfg.tau.radius_grid = g;
    }
    if let Some(t) = o.max_time {
        cfg.tau.max_time = t;
    }
    cfg.validate()?;
    if cfg.scenario != ScenarioKind::Satellite {
        return Err(CliError::Config(
            "sample-tau needs the satellite scenario".into(),
        ));
    }
    let scenario = cfg.satellite()?;
    let started = Instant::now();
    let set = collect_samples(
        &scenario,
        &cfg.tau.radius_grid,
        cfg.tau.n_per_radius,
        cfg.seed,
        cfg.tau.max_time,
    )?;
    info!(
        "{} samples ({} censored) in {:.2?}",
        set.records.len(),
        set.censored_count(),
        started.elapsed()
    );
    if set.censored_fraction() > CENSORED_WARN_FRACTION {
        warn!(
            "{:.1}% of samples censored; consider a longer tau.max_time",
            100.0 * set.censored_fraction()
        );
    }
    write_atomic(out, set.to_csv().as_bytes())
}

pub fn fit_tau(
    samples: &Path,
    out: &Path,
    basis: Basis,
    statistic: Statistic,
) -> Result<(), CliError> {
    let text = fs::read_to_string(samples)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", samples.display())))?;
    let set = TauSampleSet::from_csv(&text)?;
    let model = TauPModel::fit(&set, basis, statistic)?;
    for level in set.levels(statistic) {
        info!(
            "h = {:.4}: {} samples, statistic {:.3}",
            level.h, level.count, level.statistic
        );
    }
    info!("fit residual {:.4e}", model.residual);
    let mut doc = serde_json::to_string_pretty(&model).expect("model serializes");
    doc.push('\n');
    write_atomic(out, doc.as_bytes())
}

/// Validates a config and reports what a run would use.
pub fn validate_config(config: &Path, tau_model: Option<&Path>) -> Result<String, CliError> {
    let cfg = load(config, Overrides::default())?;
    let mut line = format!(
        "ok: {} / {}, horizon {}, seed {}",
        cfg.scenario.as_str(),
        cfg.scheme.as_str(),
        cfg.horizon,
        cfg.seed
    );
    match cfg.scenario {
        ScenarioKind::Satellite => {
            if cfg.scheme == etsafe_core::engine::Scheme::Maneuver {
                let m = cfg.tau_model(tau_model)?;
                line.push_str(&format!(", tau model on h in [{}, {}]", m.h_min, m.h_max));
            }
        }
        ScenarioKind::PlanarDemo => {
            let scenario = cfg.planar()?;
            let report = check_assumption1(&scenario, ASSUMPTION_GRID, ASSUMPTION_RANDOM, 0)?;
            if !report.holds {
                return Err(CliError::Config(format!(
                    "nominal loop violates the on-trigger margin: min {:e} at {:?}",
                    report.min_xi_on, report.argmin
                )));
            }
            line.push_str(&format!(
                ", nominal-loop margin {:.4e} over {} samples",
                report.min_xi_on, report.samples
            ));
        }
    }
    Ok(line)
}
