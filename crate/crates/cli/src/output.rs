//! CSV and JSON writers.
//!
//! Floats are written with Rust's shortest round-trip formatting, so equal
//! runs produce equal bytes and every value parses back exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use etsafe_core::engine::{EventRecord, TrajectoryPoint};
use serde_json::{Map, Value};

use crate::CliError;

pub const SATELLITE_TRAJECTORY_HEADER: &str =
    "t,rx,ry,rz,vx,vy,vz,r,h,xi_active_monitor,filter_state";
pub const PLANAR_TRAJECTORY_HEADER: &str = "t,x,y,h,hdot,xi_active_monitor,filter_state";
pub const EVENTS_HEADER: &str = "t,kind,trigger_id,h_before,h_after,xi_after,dv_mag";

pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Writes `contents` next to `path` under a temporary name, then renames it
/// into place, so readers never observe a half-written file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    if let Err(e) = fs::write(&tmp, contents) {
        let _ = fs::remove_file(&tmp);
        return Err(io(e));
    }
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io(e)
    })
}

/// Indices kept at a given stride: every `stride`-th sample, every event
/// boundary, and the last sample.
fn kept(points: &[TrajectoryPoint], stride: usize) -> impl Iterator<Item = &TrajectoryPoint> {
    let last = points.len().saturating_sub(1);
    points
        .iter()
        .enumerate()
        .filter(move |(i, p)| i % stride == 0 || p.boundary || *i == last)
        .map(|(_, p)| p)
}

pub fn satellite_trajectory_csv(points: &[TrajectoryPoint], stride: usize) -> String {
    let mut out = String::with_capacity(points.len() * 160 / stride.max(1));
    out.push_str(SATELLITE_TRAJECTORY_HEADER);
    out.push('\n');
    for p in kept(points, stride.max(1)) {
        let r = (p.x[0] * p.x[0] + p.x[1] * p.x[1] + p.x[2] * p.x[2]).sqrt();
        out.push_str(&fmt_f64(p.t));
        for v in p.x.iter().take(6) {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        let _ = writeln!(
            out,
            ",{},{},{},none",
            fmt_f64(r),
            fmt_f64(p.h),
            fmt_f64(p.monitor)
        );
    }
    out
}

pub fn planar_trajectory_csv(points: &[TrajectoryPoint], stride: usize) -> String {
    let mut out = String::with_capacity(points.len() * 100 / stride.max(1));
    out.push_str(PLANAR_TRAJECTORY_HEADER);
    out.push('\n');
    for p in kept(points, stride.max(1)) {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_f64(p.t),
            fmt_f64(p.x[0]),
            fmt_f64(p.x[1]),
            fmt_f64(p.h),
            fmt_f64(p.hdot),
            fmt_f64(p.monitor),
            if p.filter_on { "on" } else { "off" }
        );
    }
    out
}

pub fn events_csv(events: &[EventRecord]) -> String {
    let mut out = String::from(EVENTS_HEADER);
    out.push('\n');
    for e in events {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_f64(e.t),
            e.kind.as_str(),
            e.trigger_id.as_str(),
            fmt_f64(e.h_before),
            fmt_f64(e.h_after),
            fmt_f64(e.xi_after),
            e.impulse_magnitude.map(fmt_f64).unwrap_or_default()
        );
    }
    out
}

/// Flattens nested objects into dotted keys. Arrays are kept as values.
pub fn flatten(prefix: &str, value: Value, out: &mut Map<String, Value>) {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() {
                    k
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, out);
            }
        }
        other => {
            out.insert(prefix.to_string(), other);
        }
    }
}

/// Pretty JSON with sorted keys and a trailing newline.
pub fn json_document(map: &Map<String, Value>) -> String {
    let mut s = serde_json::to_string_pretty(map).expect("a JSON map always serializes");
    s.push('\n');
    s
}

/// File names used inside an output directory.
pub struct RunPaths {
    pub trajectory: PathBuf,
    pub events: PathBuf,
    pub summary: PathBuf,
}

impl RunPaths {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            trajectory: dir.join("trajectory.csv"),
            events: dir.join("events.csv"),
            summary: dir.join("summary.json"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use etsafe_core::engine::{EventKind, TriggerId};
    use serde_json::json;

    fn point(t: f64, boundary: bool) -> TrajectoryPoint {
        TrajectoryPoint {
            t,
            x: vec![2.0, 0.0, 0.0, 0.0, 0.5, 0.0],
            h: 0.16,
            xi: 0.1,
            monitor: 0.1,
            hdot: 0.0,
            filter_on: false,
            boundary,
        }
    }

    #[test]
    fn stride_keeps_boundaries_and_last() {
        let pts: Vec<_> = (0..10).map(|i| point(i as f64, i == 3)).collect();
        let csv = satellite_trajectory_csv(&pts, 4);
        let ts: Vec<&str> = csv
            .lines()
            .skip(1)
            .map(|l| l.split(',').next().unwrap())
            .collect();
        assert_eq!(ts, ["0.0", "3.0", "4.0", "8.0", "9.0"]);
        assert!(csv.lines().nth(1).unwrap().ends_with(",2.0,0.16,0.1,none"));
    }

    #[test]
    fn events_leave_dv_empty_for_filter_events() {
        let e = EventRecord {
            t: 1.5,
            kind: EventKind::FilterOn,
            trigger_id: TriggerId::Safety,
            state_before: vec![],
            state_after: vec![],
            h_before: 0.1,
            h_after: 0.1,
            xi_after: 0.0,
            impulse_magnitude: None,
            pair_position: None,
            gate: None,
        };
        let csv = events_csv(&[e]);
        assert_eq!(
            csv.lines().nth(1).unwrap(),
            "1.5,filter_on,safety,0.1,0.1,0.0,"
        );
    }

    #[test]
    fn flatten_uses_dotted_keys() {
        let mut out = Map::new();
        flatten(
            "",
            json!({"a": 1, "b": {"c": 2, "d": {"e": null}}}),
            &mut out,
        );
        let keys: Vec<&String> = out.keys().collect();
        assert_eq!(keys, ["a", "b.c", "b.d.e"]);
    }

    #[test]
    fn atomic_write_leaves_no_temp_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested").join("x.csv");
        write_atomic(&path, b"a,b\n").unwrap();
        write_atomic(&path, b"c,d\n").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"c,d\n");
        let names: Vec<_> = fs::read_dir(path.parent().unwrap()).unwrap().collect();
        assert_eq!(names.len(), 1);
    }
}
