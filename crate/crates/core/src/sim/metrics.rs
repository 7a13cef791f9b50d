//! Summaries, oracles and trace verification.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use super::run::{derive, occluders};
use super::scenario::{load_scenario, Mode, Scenario};
use super::trace::{read_trace, TimingRecord, TraceRecord};
use super::{Result, SimError};
use crate::planner::PlanStatus;
use crate::visibility::point_segment_distance;

/// Tolerance for recomputed derived columns.
pub const DERIVED_TOLERANCE: f64 = 1e-9;
/// Boundary samples per target for the line-of-sight oracle.
pub const BOUNDARY_SAMPLES: usize = 64;
/// Slack on speed and acceleration limits.
pub const LIMIT_TOLERANCE: f64 = 1e-6;
/// Allowed gap between logged velocity and central differences of the
/// logged path; covers acceleration jumps at replans.
pub const PATH_CONSISTENCY: f64 = 5e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetStats {
    pub min_distance: f64,
    pub mean_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingStats {
    pub replans: usize,
    pub p50_ms: f64,
    pub p90_ms: f64,
    pub p99_ms: f64,
    pub max_ms: f64,
    pub prediction_p50_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub mode: Mode,
    pub seed: u64,
    pub steps: usize,
    pub duration: f64,
    pub replans: usize,
    pub targets: Vec<TargetStats>,
    /// `None` when there is no obstacle.
    pub min_clearance: Option<f64>,
    pub min_visibility: Option<f64>,
    pub max_fov_angle: Option<f64>,
    pub visible_fraction: f64,
    pub status_counts: BTreeMap<String, usize>,
    pub fallbacks: usize,
    pub containment_rate: Option<f64>,
    /// Wall-clock figures; the only part that varies between identical runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<TimingStats>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Nearest-rank percentile of an unsorted sample.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * v.len() as f64).ceil().max(1.0) as usize;
    v[rank.min(v.len()) - 1]
}

fn containment(records: &[TraceRecord]) -> Option<(usize, usize)> {
    let mut checked = 0;
    let mut inside = 0;
    for r in records {
        for o in &r.objects {
            checked += 1;
            if (o.position - o.center).norm() <= o.radius + 1e-9 {
                inside += 1;
            }
        }
    }
    (checked > 0).then_some((inside, checked))
}

pub fn summarize(scenario: &Scenario, seed: u64, records: &[TraceRecord], timing: Option<&[TimingRecord]>) -> Summary {
    let targets = scenario.targets().count();
    let target_stats = (0..targets)
        .map(|j| {
            let d: Vec<f64> = records.iter().map(|r| r.target_distance[j]).collect();
            TargetStats {
                min_distance: d.iter().copied().fold(f64::INFINITY, f64::min),
                mean_distance: d.iter().sum::<f64>() / d.len().max(1) as f64,
            }
        })
        .collect();
    let mut status_counts = BTreeMap::new();
    let mut replans = 0;
    for r in records.iter().filter(|r| r.replan) {
        replans += 1;
        *status_counts.entry(r.status.as_str().to_string()).or_insert(0) += 1;
    }
    let fallbacks = records
        .iter()
        .filter(|r| r.replan && matches!(r.status, PlanStatus::FallbackPrevious | PlanStatus::FallbackStop))
        .count();
    let visible = records.iter().filter(|r| r.visibility > 0.0).count();
    let timing = timing.filter(|t| !t.is_empty()).map(|t| {
        let solve: Vec<f64> = t.iter().map(|x| x.solve_ms).collect();
        let pred: Vec<f64> = t.iter().map(|x| x.prediction_ms).collect();
        TimingStats {
            replans: t.len(),
            p50_ms: percentile(&solve, 50.0),
            p90_ms: percentile(&solve, 90.0),
            p99_ms: percentile(&solve, 99.0),
            max_ms: percentile(&solve, 100.0),
            prediction_p50_ms: percentile(&pred, 50.0),
        }
    });
    Summary {
        scenario: scenario.name.clone(),
        mode: scenario.mode,
        seed,
        steps: records.len(),
        duration: records.last().map(|r| r.time).unwrap_or(0.0),
        replans,
        targets: target_stats,
        min_clearance: finite(records.iter().map(|r| r.clearance).fold(f64::INFINITY, f64::min)),
        min_visibility: finite(records.iter().map(|r| r.visibility).fold(f64::INFINITY, f64::min)),
        max_fov_angle: records.iter().filter_map(|r| r.fov_angle).reduce(f64::max),
        visible_fraction: visible as f64 / records.len().max(1) as f64,
        status_counts,
        fallbacks,
        containment_rate: containment(records).map(|(i, c)| i as f64 / c as f64),
        timing,
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OracleReport {
    pub steps: usize,
    /// Steps where a sight line to a target boundary sample crosses a disk.
    pub line_of_sight_violations: usize,
    pub worst_line_of_sight_margin: Option<f64>,
    pub visibility_violations: usize,
    pub collision_violations: usize,
    pub fov_violations: usize,
    pub speed_violations: usize,
    pub acceleration_violations: usize,
    pub path_inconsistencies: usize,
    pub max_speed: f64,
    pub max_acceleration: f64,
    pub max_velocity_residual: f64,
    pub containment_checked: usize,
    pub containment_inside: usize,
    pub containment_rate: Option<f64>,
}

impl OracleReport {
    /// Count of hard failures: occlusion, collision, view cone, limits and
    /// path consistency.
    pub fn violations(&self) -> usize {
        self.line_of_sight_violations
            + self.visibility_violations
            + self.collision_violations
            + self.fov_violations
            + self.speed_violations
            + self.acceleration_violations
            + self.path_inconsistencies
    }
}

pub fn oracle_suite(records: &[TraceRecord], scenario: &Scenario) -> OracleReport {
    let plan = scenario.plan_params();
    let mut report = OracleReport { steps: records.len(), ..Default::default() };
    let targets: Vec<(usize, f64)> = scenario.targets().map(|(i, m)| (i, m.body_radius)).collect();
    let mut worst_los = f64::INFINITY;
    for r in records {
        let positions: Vec<Vector2<f64>> = r.objects.iter().map(|o| o.position).collect();
        let blockers = occluders(scenario, &positions);
        let mut blocked = false;
        for &(ti, radius) in &targets {
            let q = positions[ti];
            for k in 0..BOUNDARY_SAMPLES {
                let a = std::f64::consts::TAU * k as f64 / BOUNDARY_SAMPLES as f64;
                let b = q + Vector2::new(a.cos(), a.sin()) * radius;
                for (o, ro) in &blockers {
                    let margin = point_segment_distance(*o, r.position, b) - ro;
                    worst_los = worst_los.min(margin);
                    blocked |= margin < 0.0;
                }
            }
        }
        report.line_of_sight_violations += usize::from(blocked);
        let d = derive(scenario, r.position, &positions);
        report.visibility_violations += usize::from(d.visibility <= 0.0);
        report.collision_violations += usize::from(d.clearance <= 0.0);
        if let Some(angle) = d.fov_angle {
            report.fov_violations += usize::from(angle > plan.theta_f + 1e-6);
        }
        let speed = r.velocity.norm();
        let accel = r.acceleration.norm();
        report.max_speed = report.max_speed.max(speed);
        report.max_acceleration = report.max_acceleration.max(accel);
        report.speed_violations += usize::from(speed > plan.v_max + LIMIT_TOLERANCE);
        report.acceleration_violations += usize::from(accel > plan.a_max + LIMIT_TOLERANCE);
    }
    for w in records.windows(3) {
        let fd = (w[2].position - w[0].position) / (w[2].time - w[0].time);
        let residual = (fd - w[1].velocity).norm();
        report.max_velocity_residual = report.max_velocity_residual.max(residual);
        report.path_inconsistencies += usize::from(residual > PATH_CONSISTENCY);
    }
    report.worst_line_of_sight_margin = finite(worst_los);
    if let Some((inside, checked)) = containment(records) {
        report.containment_inside = inside;
        report.containment_checked = checked;
        report.containment_rate = Some(inside as f64 / checked as f64);
    }
    report
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub rows: usize,
    pub derived_mismatches: usize,
    pub worst_derived_error: f64,
    pub time_errors: usize,
    pub summary_matches: bool,
    pub oracle: OracleReport,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.derived_mismatches == 0 && self.time_errors == 0 && self.summary_matches && self.oracle.violations() == 0
    }
}

fn sibling(trace: &Path, name: &str) -> PathBuf {
    trace.parent().map(|p| p.join(name)).unwrap_or_else(|| PathBuf::from(name))
}

fn error_between(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs()
    }
}

/// Recomputes every derived column and the summary from the raw columns of
/// `trace`, using `scenario.json` and `summary.json` beside it.
pub fn verify(trace: &Path) -> Result<VerifyReport> {
    let scenario = load_scenario(&sibling(trace, "scenario.json"))?;
    let summary_path = sibling(trace, "summary.json");
    let text = std::fs::read_to_string(&summary_path).map_err(|e| SimError::io(&summary_path, e))?;
    let logged: Summary = serde_json::from_str(&text)
        .map_err(|e| SimError::Parse { path: summary_path.display().to_string(), message: e.to_string() })?;
    let file = std::fs::File::open(trace).map_err(|e| SimError::io(trace, e))?;
    let records = read_trace(
        std::io::BufReader::new(file),
        scenario.moving_objects.len(),
        scenario.targets().count(),
        scenario.mode == Mode::Dual,
    )?;

    let mut mismatches = 0;
    let mut worst: f64 = 0.0;
    let mut time_errors = 0;
    let step = scenario.params.step;
    for (k, r) in records.iter().enumerate() {
        if (r.time - k as f64 * step).abs() > DERIVED_TOLERANCE {
            time_errors += 1;
        }
        let positions: Vec<Vector2<f64>> = r.objects.iter().map(|o| o.position).collect();
        let d = derive(&scenario, r.position, &positions);
        let mut errs: Vec<f64> = d.target_distance.iter().zip(&r.target_distance).map(|(a, b)| error_between(*a, *b)).collect();
        errs.push(error_between(d.clearance, r.clearance));
        errs.push(error_between(d.visibility, r.visibility));
        if let (Some(a), Some(b)) = (d.fov_angle, r.fov_angle) {
            errs.push(error_between(a, b));
        }
        let e = errs.into_iter().fold(0.0, |m: f64, x| if x.is_nan() { f64::INFINITY } else { m.max(x) });
        worst = worst.max(e);
        if e > DERIVED_TOLERANCE {
            mismatches += 1;
        }
    }
    let mut recomputed = summarize(&scenario, logged.seed, &records, None);
    recomputed.timing = logged.timing.clone();
    Ok(VerifyReport {
        rows: records.len(),
        derived_mismatches: mismatches,
        worst_derived_error: worst,
        time_errors,
        summary_matches: recomputed == logged,
        oracle: oracle_suite(&records, &scenario),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::run::run;

    fn scenario() -> Scenario {
        Scenario::from_json(
            r#"{
                "schema": 1,
                "name": "crossing",
                "mode": "single",
                "drone": {"position": [0.0, -4.0]},
                "static_obstacles": [{"center": [4.0, 3.0], "radius": 0.5}],
                "moving_objects": [
                    {"role": "target", "body_radius": 0.3, "script": [{"t": 0.0, "p": [0.0, 0.0]}]},
                    {"role": "interrupter", "body_radius": 0.3, "script": [{"t": 0.0, "p": [-5.0, 2.0]}, {"t": 3.0, "p": [-4.0, 3.0]}]}
                ],
                "params": {"samples": 200, "accel_variance": 0.1}
            }"#,
            "t",
        )
        .unwrap()
    }

    #[test]
    fn percentile_nearest_rank() {
        let v = [5.0, 1.0, 3.0, 2.0, 4.0];
        assert_eq!(percentile(&v, 50.0), 3.0);
        assert_eq!(percentile(&v, 100.0), 5.0);
        assert_eq!(percentile(&v, 1.0), 1.0);
    }

    #[test]
    fn grazing_gives_zero_clearance() {
        let s = scenario();
        let d = derive(&s, Vector2::new(4.0, 3.0 - 0.9), &[Vector2::zeros(), Vector2::new(-5.0, 2.0)]);
        assert!(d.clearance.abs() < 1e-12);
    }

    #[test]
    fn summary_is_recomputable_and_oracles_clean() {
        let s = scenario();
        let out = run(&s, 2.0, 4).unwrap();
        let a = summarize(&s, 4, &out.records, None);
        let b = summarize(&s, 4, &out.records.clone(), None);
        assert_eq!(a, b);
        assert!(a.min_visibility.unwrap() > 0.0);
        assert_eq!(a.containment_rate, Some(1.0));
        let report = oracle_suite(&out.records, &s);
        assert_eq!(report.violations(), 0, "{report:?}");
    }

    #[test]
    fn planted_occlusion_is_flagged() {
        let s = scenario();
        let mut records = run(&s, 0.5, 4).unwrap().records;
        let r = &mut records[10];
        r.objects[1].position = (r.position + r.objects[0].position) / 2.0;
        let report = oracle_suite(&records, &s);
        assert!(report.visibility_violations >= 1);
        assert!(report.line_of_sight_violations >= 1);
    }

    #[test]
    fn noiseless_objects_fully_contained() {
        let s = scenario();
        let out = run(&s, 1.0, 2).unwrap();
        let report = oracle_suite(&out.records, &s);
        assert_eq!(report.containment_rate, Some(1.0));
    }
}
