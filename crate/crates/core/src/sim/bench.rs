//! Timing grids for prediction and QP planning.

use std::time::Instant;

use nalgebra::{Matrix4, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::metrics::percentile;
use super::scenario::Mode;
use super::Result;
use crate::bernstein::{BernsteinSegment, Interval, PiecewiseBernstein};
use crate::planner::{plan_with_knots, DroneState, PlanInput, PlanParams, PlanStatus};
use crate::prediction::{
    collision_filter, compute_radius, sample_endpoints, select_center, trim_outliers, ObjectObservation, PrimitiveSet,
    ProcessNoise, ReachableSetTrajectory,
};
use crate::visibility::point_segment_distance;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QpBenchRow {
    pub mode: Mode,
    pub degree: usize,
    pub segments: usize,
    pub obstacles: usize,
    pub instances: usize,
    pub optimal: usize,
    pub median_ms: f64,
    pub p90_ms: f64,
    pub qp_median_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionBenchRow {
    pub samples: usize,
    pub obstacles: usize,
    pub runs: usize,
    pub sampling_us: f64,
    pub collision_us: f64,
    pub reachable_ms: f64,
    pub total_ms: f64,
}

fn heading(rng: &mut ChaCha8Rng) -> Vector2<f64> {
    let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    Vector2::new(a.cos(), a.sin())
}

/// One random chasing instance: drone, targets and obstacle sets.
pub struct QpInstance {
    pub state: DroneState,
    pub targets: Vec<ReachableSetTrajectory>,
    pub obstacles: Vec<ReachableSetTrajectory>,
}

fn moving_set(p: Vector2<f64>, v: Vector2<f64>, r0: f64, growth: f64, horizon: f64) -> ReachableSetTrajectory {
    let iv = Interval::new(0.0, horizon).expect("positive horizon");
    let center = BernsteinSegment::planar(iv, &[p, p + v * horizon]).expect("two points");
    let radius = BernsteinSegment::scalar(iv, vec![r0, r0, r0 + growth]).expect("three coefficients");
    ReachableSetTrajectory::new(PiecewiseBernstein::single(center), radius, r0)
}

/// Targets and obstacles placed off the current sight lines, drone at the
/// shooting distance.
pub fn random_instance(rng: &mut ChaCha8Rng, mode: Mode, obstacles: usize, params: &PlanParams) -> QpInstance {
    let horizon = params.horizon;
    let q1 = Vector2::zeros();
    let targets_pos = match mode {
        Mode::Single => vec![q1],
        Mode::Dual => vec![q1, heading(rng) * 2.5],
    };
    let mid = targets_pos.iter().sum::<Vector2<f64>>() / targets_pos.len() as f64;
    let side = heading(rng);
    let drone = mid + side * params.r_d;
    let mut targets = Vec::new();
    for q in &targets_pos {
        let v = heading(rng) * 0.5;
        targets.push(moving_set(*q, v, 0.3, 0.4, horizon));
    }
    let mut placed: Vec<Vector2<f64>> = Vec::new();
    let mut sets = Vec::new();
    let mut attempts = 0;
    while sets.len() < obstacles && attempts < 10_000 {
        attempts += 1;
        let c = mid + heading(rng) * rng.random_range(1.5..6.0);
        let clear_of_sight = targets_pos.iter().all(|q| point_segment_distance(c, drone, *q) > 1.8);
        let clear_of_others = placed.iter().all(|p| (p - c).norm() > 1.5);
        let clear_of_targets = targets_pos.iter().all(|q| (q - c).norm() > 1.5);
        if clear_of_sight && clear_of_others && clear_of_targets && (c - drone).norm() > 1.5 {
            placed.push(c);
            let v = heading(rng) * rng.random_range(0.0..0.5);
            sets.push(moving_set(c, v, 0.4, 0.3, horizon));
        }
    }
    QpInstance { state: DroneState { position: drone, velocity: heading(rng) * 0.5 }, targets, obstacles: sets }
}

pub fn uniform_knots(horizon: f64, segments: usize) -> Vec<f64> {
    (0..=segments).map(|i| horizon * i as f64 / segments as f64).collect()
}

/// Times `instances` plans of one grid cell.
pub fn bench_qp_cell(mode: Mode, degree: usize, segments: usize, obstacles: usize, instances: usize, seed: u64) -> QpBenchRow {
    let params = PlanParams { degree, ..PlanParams::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((degree as u64) << 32) ^ ((segments as u64) << 16) ^ obstacles as u64);
    let mut total = Vec::with_capacity(instances);
    let mut qp = Vec::with_capacity(instances);
    let mut optimal = 0;
    for _ in 0..instances {
        let inst = random_instance(&mut rng, mode, obstacles, &params);
        let input = PlanInput { state: inst.state, previous: None, targets: &inst.targets, obstacles: &inst.obstacles };
        let start = Instant::now();
        let result = plan_with_knots(&input, &params, uniform_knots(params.horizon, segments));
        total.push(start.elapsed().as_secs_f64() * 1e3);
        qp.push(result.diagnostics.qp_time_ms);
        optimal += usize::from(result.status == PlanStatus::Optimal);
    }
    QpBenchRow {
        mode,
        degree,
        segments,
        obstacles,
        instances,
        optimal,
        median_ms: percentile(&total, 50.0),
        p90_ms: percentile(&total, 90.0),
        qp_median_ms: percentile(&qp, 50.0),
    }
}

/// Full grid: n_c ∈ {4,5,6}, M ∈ 1..=5, N_o ∈ 1..=4 (single) and 1..=3 (dual).
pub fn qp_grid(instances: usize, seed: u64) -> Vec<QpBenchRow> {
    let mut rows = Vec::new();
    for (mode, max_obstacles) in [(Mode::Single, 4), (Mode::Dual, 3)] {
        for obstacles in 1..=max_obstacles {
            for degree in 4..=6 {
                for segments in 1..=5 {
                    rows.push(bench_qp_cell(mode, degree, segments, obstacles, instances, seed));
                }
            }
        }
    }
    rows
}

/// Stage timings of one prediction configuration.
pub fn bench_prediction_cell(samples: usize, obstacles: usize, runs: usize, seed: u64) -> Result<PredictionBenchRow> {
    let horizon = 1.5;
    let noise = ProcessNoise::isotropic(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((samples as u64) << 8) ^ obstacles as u64);
    let (mut sampling, mut collision, mut reachable, mut total) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for run in 0..runs {
        let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let obs = ObjectObservation {
            position: Vector2::zeros(),
            velocity: Vector2::new(a.cos(), a.sin()),
            covariance: Matrix4::identity() * 0.01,
            body_radius: 0.3,
        };
        let sets: Vec<ReachableSetTrajectory> = (0..obstacles)
            .map(|_| {
                let b: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                let d = rng.random_range(1.2..3.0);
                ReachableSetTrajectory::static_disk(Vector2::new(b.cos(), b.sin()) * d, 0.4, horizon)
            })
            .collect::<std::result::Result<_, _>>()?;
        let t0 = Instant::now();
        let endpoints = sample_endpoints(&obs, &noise, horizon, samples, seed.wrapping_add(run as u64))?;
        let mut prims = PrimitiveSet::build(&obs, endpoints, horizon, 3)?;
        let t1 = Instant::now();
        prims.safe = collision_filter(&prims, &sets, obs.body_radius)?;
        let t2 = Instant::now();
        if let Some(center) = select_center(&prims) {
            prims.safe = trim_outliers(&prims, center, 0.0)?;
            compute_radius(center, &prims, obs.body_radius, horizon)?;
        }
        let t3 = Instant::now();
        sampling.push((t1 - t0).as_secs_f64() * 1e6);
        collision.push((t2 - t1).as_secs_f64() * 1e6);
        reachable.push((t3 - t2).as_secs_f64() * 1e3);
        total.push((t3 - t0).as_secs_f64() * 1e3);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    Ok(PredictionBenchRow {
        samples,
        obstacles,
        runs,
        sampling_us: mean(&sampling),
        collision_us: mean(&collision),
        reachable_ms: mean(&reachable),
        total_ms: mean(&total),
    })
}

/// Configurations `(N_samp, N_o)` ∈ {(500,2), (500,4), (2000,2), (2000,4)}.
pub fn prediction_grid(runs: usize, seed: u64) -> Result<Vec<PredictionBenchRow>> {
    [(500, 2), (500, 4), (2000, 2), (2000, 4)]
        .into_iter()
        .map(|(s, o)| bench_prediction_cell(s, o, runs, seed))
        .collect()
}
