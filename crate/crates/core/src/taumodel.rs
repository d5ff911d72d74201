//! Expected inter-event time as a function of the barrier value.
//!
//! A sampling campaign places satellites at random phases on a grid of
//! radii, applies the safeguarding impulse, and records how long the greedy
//! trigger takes to fire. The per-level statistic of those times is then
//! fitted against `h`, which serves as a low-dimensional proxy for the state.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{derive_seed, SatelliteState};
use crate::error::{Error, Result};
use crate::numerics::{propagate_until, Monitor, PropagationOptions, State};
use crate::scenario::SatelliteScenario;

/// One sampled inter-event time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauRecord {
    pub radius: f64,
    pub h: f64,
    /// `None` when the sample is censored.
    pub inter_event_time: Option<f64>,
}

impl TauRecord {
    pub fn censored(&self) -> bool {
        self.inter_event_time.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauSampleSet {
    pub seed: u64,
    pub n_per_radius: usize,
    pub max_time: f64,
    pub radius_grid: Vec<f64>,
    pub records: Vec<TauRecord>,
}

/// Per-level summary of a sample set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Level {
    pub h: f64,
    pub statistic: f64,
    pub count: usize,
    pub censored: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistic {
    #[default]
    Median,
    Mean,
}

impl Statistic {
    pub fn apply(&self, values: &[f64]) -> f64 {
        match self {
            Statistic::Mean => values.iter().sum::<f64>() / values.len() as f64,
            Statistic::Median => {
                let mut v = values.to_vec();
                v.sort_by(f64::total_cmp);
                let n = v.len();
                if n % 2 == 1 {
                    v[n / 2]
                } else {
                    0.5 * (v[n / 2 - 1] + v[n / 2])
                }
            }
        }
    }
}

/// Levels closer than this in `h` are pooled.
const LEVEL_RESOLUTION: f64 = 1e-9;

fn level_key(h: f64) -> i64 {
    (h / LEVEL_RESOLUTION).round() as i64
}

impl TauSampleSet {
    pub fn censored_count(&self) -> usize {
        self.records.iter().filter(|r| r.censored()).count()
    }

    pub fn censored_fraction(&self) -> f64 {
        if self.records.is_empty() {
            0.0
        } else {
            self.censored_count() as f64 / self.records.len() as f64
        }
    }

    /// Uncensored times grouped by `h` level, ascending in `h`.
    pub fn levels(&self, statistic: Statistic) -> Vec<Level> {
        let mut groups: BTreeMap<i64, (Vec<f64>, usize)> = BTreeMap::new();
        for r in &self.records {
            let entry = groups.entry(level_key(r.h)).or_default();
            match r.inter_event_time {
                Some(t) => entry.0.push(t),
                None => entry.1 += 1,
            }
        }
        groups
            .into_iter()
            .filter(|(_, (times, _))| !times.is_empty())
            .map(|(k, (times, censored))| Level {
                h: k as f64 * LEVEL_RESOLUTION,
                statistic: statistic.apply(&times),
                count: times.len(),
                censored,
            })
            .collect()
    }

    /// Per-radius statistic in grid order; `None` when every sample at that
    /// radius was censored.
    pub fn radius_statistics(&self, statistic: Statistic) -> Vec<(f64, Option<f64>)> {
        self.radius_grid
            .iter()
            .map(|&r| {
                let times: Vec<f64> = self
                    .records
                    .iter()
                    .filter(|rec| rec.radius == r)
                    .filter_map(|rec| rec.inter_event_time)
                    .collect();
                (r, (!times.is_empty()).then(|| statistic.apply(&times)))
            })
            .collect()
    }

    /// CSV with `# key=value` metadata lines, then
    /// `radius,h,inter_event_time,censored`. Censored rows leave the time empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let grid: Vec<String> = self.radius_grid.iter().map(|r| format!("{r:?}")).collect();
        let _ = writeln!(out, "# seed={}", self.seed);
        let _ = writeln!(out, "# n_per_radius={}", self.n_per_radius);
        let _ = writeln!(out, "# max_time={:?}", self.max_time);
        let _ = writeln!(out, "# radius_grid={}", grid.join(";"));
        out.push_str("radius,h,inter_event_time,censored\n");
        for r in &self.records {
            let t = r
                .inter_event_time
                .map(|t| format!("{t:?}"))
                .unwrap_or_default();
            let _ = writeln!(
                out,
                "{:?},{:?},{},{}",
                r.radius,
                r.h,
                t,
                u8::from(r.censored())
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::Fit(format!("sample file line {line}: {msg}"));
        let num = |line: usize, s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|_| bad(line, &format!("not a number: {s:?}")))
        };
        let mut meta = BTreeMap::new();
        let mut records = Vec::new();
        let mut header_seen = false;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let l = raw.trim();
            if l.is_empty() {
                continue;
            }
            if let Some(kv) = l.strip_prefix('#') {
                if let Some((k, v)) = kv.trim().split_once('=') {
                    meta.insert(k.trim().to_string(), v.trim().to_string());
                }
                continue;
            }
            if !header_seen {
                if l != "radius,h,inter_event_time,censored" {
                    return Err(bad(line, "unexpected header"));
                }
                header_seen = true;
                continue;
            }
            let cols: Vec<&str> = l.split(',').collect();
            if cols.len() != 4 {
                return Err(bad(line, "expected 4 columns"));
            }
            let censored = match cols[3].trim() {
                "0" => false,
                "1" => true,
                other => return Err(bad(line, &format!("censored flag {other:?}"))),
            };
            let inter_event_time = if censored {
                None
            } else {
                let t = num(line, cols[2])?;
                if !(t > 0.0) {
                    return Err(bad(line, "inter-event time must be positive"));
                }
                Some(t)
            };
            records.push(TauRecord {
                radius: num(line, cols[0])?,
                h: num(line, cols[1])?,
                inter_event_time,
            });
        }
        if !header_seen {
            return Err(Error::Fit("sample file has no header".into()));
        }
        let get = |k: &str| meta.get(k).map(String::as_str).unwrap_or("");
        let radius_grid = get("radius_grid")
            .split(';')
            .filter(|s| !s.is_empty())
            .map(|s| num(0, s))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            seed: get("seed").parse().unwrap_or(0),
            n_per_radius: get("n_per_radius").parse().unwrap_or(0),
            max_time: get("max_time").parse().unwrap_or(f64::NAN),
            radius_grid,
            records,
        })
    }
}

/// Initial state at radius `r` with a uniformly random position direction
/// and a uniformly random tangential velocity direction at circular speed.
fn random_state_at_radius(
    scenario: &SatelliteScenario,
    r: f64,
    rng: &mut ChaCha8Rng,
) -> SatelliteState {
    let u: [f64; 3] = UnitSphere.sample(rng);
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
    let v = (scenario.gravity.mu / r).sqrt();
    SatelliteState::new(r_hat * r, t_hat * v)
}

/// Time from a safeguarding impulse at `s` until the greedy trigger fires,
/// or `None` if the controller is infeasible or nothing fires by `max_time`.
pub fn sample_inter_event_time(
    scenario: &SatelliteScenario,
    s: &SatelliteState,
    max_time: f64,
) -> Result<Option<f64>> {
    let spec = scenario.barrier_spec()?;
    let impulse = match scenario.safeguarding().impulse(&spec, s) {
        Ok(imp) => imp,
        Err(Error::ControllerInfeasible { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let flow = |t: f64, x: &State| scenario.flow(t, x);
    let xi = |_t: f64, x: &State| scenario.xi(&spec, x);
    let monitors: [Monitor<'_>; 1] = [&xi];
    let opts = PropagationOptions {
        dwell_steps: scenario.dwell_steps.max(1),
        ..scenario.propagation()
    };
    let p = propagate_until(
        &flow,
        &impulse.state_after.to_state(),
        0.0,
        max_time,
        &monitors,
        &opts,
    )?;
    Ok(p.crossing.map(|c| c.t))
}

/// Sampling campaign over `radius_grid`, `n_per_radius` samples per radius.
///
/// Sample `(i, j)` draws its phase and its disturbance stream from keys
/// derived from `(seed, i, j)`, so the set does not depend on thread count.
pub fn collect_samples(
    scenario: &SatelliteScenario,
    radius_grid: &[f64],
    n_per_radius: usize,
    seed: u64,
    max_time: f64,
) -> Result<TauSampleSet> {
    scenario.validate()?;
    let (lo, hi) = (scenario.range.inner_radius(), scenario.range.outer_radius());
    if let Some(r) = radius_grid.iter().find(|&&r| !(r > lo && r < hi)) {
        return Err(Error::Config(format!(
            "sampling radius {r} outside ({lo}, {hi})"
        )));
    }
    if n_per_radius == 0 || !(max_time > 0.0) {
        return Err(Error::Config(
            "need n_per_radius > 0 and max_time > 0".into(),
        ));
    }
    let jobs: Vec<(usize, usize)> = (0..radius_grid.len())
        .flat_map(|i| (0..n_per_radius).map(move |j| (i, j)))
        .collect();
    let records = jobs
        .par_iter()
        .map(|&(i, j)| {
            let key = derive_seed(seed, &[i as u64, j as u64]);
            let mut rng = ChaCha8Rng::seed_from_u64(key);
            let r = radius_grid[i];
            let s = random_state_at_radius(scenario, r, &mut rng);
            let mut local = scenario.clone();
            local.disturbance = scenario.disturbance.reseeded(derive_seed(key, &[1]));
            let t = sample_inter_event_time(&local, &s, max_time)?;
            Ok(TauRecord {
                radius: r,
                h: scenario.range.h_of_radius(r),
                inter_event_time: t,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let set = TauSampleSet {
        seed,
        n_per_radius,
        max_time,
        radius_grid: radius_grid.to_vec(),
        records,
    };
    log::info!(
        "collected {} tau samples, {} censored",
        set.records.len(),
        set.censored_count()
    );
    Ok(set)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Basis {
    /// Linear interpolation between knots placed at the sampled levels.
    #[default]
    PiecewiseLinear,
    Polynomial {
        degree: usize,
    },
}

/// Fitted `tau_p(h)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauPModel {
    pub basis: Basis,
    /// Level locations in `h` (piecewise-linear) or empty (polynomial).
    pub knots: Vec<f64>,
    /// Knot values (piecewise-linear) or monomial coefficients, constant first.
    pub coefficients: Vec<f64>,
    pub h_min: f64,
    pub h_max: f64,
    /// Root-mean-square residual of the fit at the level points.
    pub residual: f64,
}

impl TauPModel {
    /// Fit the per-level `statistic` of `samples` against `h`.
    pub fn fit(samples: &TauSampleSet, basis: Basis, statistic: Statistic) -> Result<Self> {
        let points: Vec<(f64, f64)> = samples
            .levels(statistic)
            .iter()
            .map(|l| (l.h, l.statistic))
            .collect();
        Self::fit_points(&points, basis)
    }

    /// Least-squares fit through `(h, tau)` points; points closer than the
    /// level resolution are averaged first.
    pub fn fit_points(points: &[(f64, f64)], basis: Basis) -> Result<Self> {
        let mut groups: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
        for &(h, tau) in points {
            if !(h.is_finite() && tau.is_finite()) {
                return Err(Error::Fit(format!("non-finite point ({h}, {tau})")));
            }
            groups.entry(level_key(h)).or_default().push(tau);
        }
        let levels: Vec<(f64, f64)> = groups
            .into_iter()
            .map(|(k, v)| (k as f64 * LEVEL_RESOLUTION, Statistic::Mean.apply(&v)))
            .collect();
        if levels.len() < 2 {
            return Err(Error::Fit(format!(
                "need at least 2 distinct h levels, got {}",
                levels.len()
            )));
        }
        let h_min = levels[0].0;
        let h_max = levels[levels.len() - 1].0;
        let mut model = match basis {
            Basis::PiecewiseLinear => Self {
                basis,
                knots: levels.iter().map(|p| p.0).collect(),
                coefficients: levels.iter().map(|p| p.1).collect(),
                h_min,
                h_max,
                residual: 0.0,
            },
            Basis::Polynomial { degree } => {
                if degree + 1 > levels.len() {
                    return Err(Error::Fit(format!(
                        "degree {degree} needs at least {} levels, got {}",
                        degree + 1,
                        levels.len()
                    )));
                }
                let a =
                    DMatrix::from_fn(levels.len(), degree + 1, |i, j| levels[i].0.powi(j as i32));
                let y = DVector::from_iterator(levels.len(), levels.iter().map(|p| p.1));
                let svd = a.svd(true, true);
                let rank = svd.rank(1e-12 * svd.singular_values.max());
                if rank < degree + 1 {
                    return Err(Error::Fit(format!("rank-deficient design (rank {rank})")));
                }
                let coef = svd.solve(&y, 0.0).map_err(|e| Error::Fit(e.to_string()))?;
                Self {
                    basis,
                    knots: Vec::new(),
                    coefficients: coef.iter().copied().collect(),
                    h_min,
                    h_max,
                    residual: 0.0,
                }
            }
        };
        let ss: f64 = levels
            .iter()
            .map(|&(h, tau)| (model.raw_value(h) - tau).powi(2))
            .sum();
        model.residual = (ss / levels.len() as f64).sqrt();
        Ok(model)
    }

    fn segment(&self, h: f64) -> usize {
        let n = self.knots.len();
        self.knots[1..n - 1].partition_point(|&k| k <= h)
    }

    fn raw_value(&self, h: f64) -> f64 {
        match self.basis {
            Basis::PiecewiseLinear => {
                let i = self.segment(h);
                let (h0, h1) = (self.knots[i], self.knots[i + 1]);
                let (y0, y1) = (self.coefficients[i], self.coefficients[i + 1]);
                y0 + (y1 - y0) * (h - h0) / (h1 - h0)
            }
            Basis::Polynomial { .. } => self
                .coefficients
                .iter()
                .rev()
                .fold(0.0, |acc, c| acc * h + c),
        }
    }

    fn raw_derivative(&self, h: f64) -> f64 {
        match self.basis {
            Basis::PiecewiseLinear => {
                let i = self.segment(h);
                (self.coefficients[i + 1] - self.coefficients[i])
                    / (self.knots[i + 1] - self.knots[i])
            }
            Basis::Polynomial { .. } => self
                .coefficients
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (j, c)| acc * h + j as f64 * c),
        }
    }

    pub fn in_range(&self, h: f64) -> bool {
        (self.h_min..=self.h_max).contains(&h)
    }

    /// `tau_p(h)`, clamped to the fitted range; the flag marks clamping.
    pub fn eval(&self, h: f64) -> (f64, bool) {
        (
            self.raw_value(h.clamp(self.h_min, self.h_max)),
            !self.in_range(h),
        )
    }

    /// `dtau_p/dh`, held at its end-of-range value outside the fitted range.
    pub fn derivative(&self, h: f64) -> (f64, bool) {
        (
            self.raw_derivative(h.clamp(self.h_min, self.h_max)),
            !self.in_range(h),
        )
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self
            .coefficients
            .iter()
            .chain(&self.knots)
            .all(|v| v.is_finite());
        if !finite || !(self.h_min < self.h_max) {
            return Err(Error::Fit(
                "model has non-finite entries or an empty range".into(),
            ));
        }
        match self.basis {
            Basis::PiecewiseLinear => {
                if self.knots.len() < 2
                    || self.knots.len() != self.coefficients.len()
                    || self.knots.windows(2).any(|w| !(w[0] < w[1]))
                {
                    return Err(Error::Fit(
                        "piecewise-linear knots must be increasing and match values".into(),
                    ));
                }
            }
            Basis::Polynomial { degree } => {
                if self.coefficients.len() != degree + 1 {
                    return Err(Error::Fit(
                        "polynomial coefficient count does not match degree".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}
