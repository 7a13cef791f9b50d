//! Fixed-rate replanning loop with kinematic execution.

use std::time::Instant;

use nalgebra::{Matrix4, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::scenario::{v2, Mode, Scenario};
use super::spline::CubicSpline;
use super::trace::{ObjectSample, TimingRecord, TraceRecord};
use super::{parallel_map, worker_threads, Result, SimError};
use crate::bernstein::PiecewiseBernstein;
use crate::planner::{plan, shift_plan, DroneState, PlanInput, PlanResult, PlanStatus};
use crate::prediction::{
    constant_velocity_fallback, predict, ObjectObservation, PredictionParams, ProcessNoise, ReachableSetTrajectory,
};
use crate::reference::visibility_score;

/// Disk that can block the view or be hit: center, radius.
pub type Disk = (Vector2<f64>, f64);

/// One replan as seen by an observer.
pub struct PlanEvent<'a> {
    pub time: f64,
    pub state: DroneState,
    pub targets: &'a [ReachableSetTrajectory],
    pub obstacles: &'a [ReachableSetTrajectory],
    pub result: &'a PlanResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub records: Vec<TraceRecord>,
    pub timing: Vec<TimingRecord>,
}

/// Columns derived from the raw drone and object positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Derived {
    pub target_distance: Vec<f64>,
    pub clearance: f64,
    pub visibility: f64,
    pub fov_angle: Option<f64>,
}

/// Static obstacles followed by interrupters at their true positions.
pub fn occluders(scenario: &Scenario, positions: &[Vector2<f64>]) -> Vec<Disk> {
    let mut out: Vec<Disk> = scenario.static_obstacles.iter().map(|o| (v2(o.center), o.radius)).collect();
    out.extend(scenario.interrupters().map(|(i, m)| (positions[i], m.body_radius)));
    out
}

pub fn subtended_angle(drone: Vector2<f64>, a: Vector2<f64>, b: Vector2<f64>) -> f64 {
    let (u, w) = (a - drone, b - drone);
    (u.x * w.y - u.y * w.x).abs().atan2(u.dot(&w))
}

pub fn derive(scenario: &Scenario, drone: Vector2<f64>, positions: &[Vector2<f64>]) -> Derived {
    let blockers = occluders(scenario, positions);
    let targets: Vec<Vector2<f64>> = scenario.targets().map(|(i, _)| positions[i]).collect();
    let target_distance = targets.iter().map(|q| (q - drone).norm()).collect();
    let clearance = blockers
        .iter()
        .map(|(o, r)| (drone - o).norm() - r - scenario.drone.r_c)
        .fold(f64::INFINITY, f64::min);
    let visibility = targets
        .iter()
        .flat_map(|q| blockers.iter().map(move |(o, r)| visibility_score(drone, *q, *o, *r).value()))
        .fold(f64::INFINITY, f64::min);
    let fov_angle = (scenario.mode == Mode::Dual).then(|| subtended_angle(drone, targets[0], targets[1]));
    Derived { target_distance, clearance, visibility, fov_angle }
}

pub fn run(scenario: &Scenario, duration: f64, seed: u64) -> Result<RunOutput> {
    run_with(scenario, duration, seed, |_| {})
}

struct ActivePlan {
    start: f64,
    position: PiecewiseBernstein,
    velocity: PiecewiseBernstein,
    acceleration: PiecewiseBernstein,
    status: PlanStatus,
    iterations: usize,
    segments: usize,
}

impl ActivePlan {
    fn new(start: f64, result: &PlanResult) -> Self {
        let velocity = result.trajectory.derivative();
        let acceleration = velocity.derivative();
        Self {
            start,
            position: result.trajectory.clone(),
            velocity,
            acceleration,
            status: result.status,
            iterations: result.diagnostics.iterations,
            segments: result.trajectory.segments().len(),
        }
    }

    fn state(&self, t: f64) -> Result<(Vector2<f64>, Vector2<f64>, Vector2<f64>)> {
        let tau = (t - self.start).clamp(self.position.start(), self.position.end());
        Ok((self.position.eval2(tau)?, self.velocity.eval2(tau)?, self.acceleration.eval2(tau)?))
    }
}

/// Seed for one prediction, unique per replan and object.
fn prediction_seed(seed: u64, replan: usize, object: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ ((replan as u64) << 16) ^ object as u64
}

fn predict_or_fallback(
    obs: &ObjectObservation,
    noise: &ProcessNoise,
    obstacles: &[ReachableSetTrajectory],
    params: &PredictionParams,
) -> Result<ReachableSetTrajectory> {
    match predict(obs, noise, obstacles, params) {
        Ok(r) => Ok(r),
        Err(_) => Ok(constant_velocity_fallback(obs, noise, params.horizon)?),
    }
}

/// Runs the closed loop, calling `observer` after every replan.
pub fn run_with(
    scenario: &Scenario,
    duration: f64,
    seed: u64,
    mut observer: impl FnMut(&PlanEvent),
) -> Result<RunOutput> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(SimError::invalid("duration", "must be positive"));
    }
    let params = &scenario.params;
    let plan_params = scenario.plan_params();
    let horizon = plan_params.horizon;
    let noise = params.process_noise();
    let step = params.step;
    let per = params.steps_per_replan();
    let steps = (duration / step).round() as usize;
    let threads = worker_threads();

    let splines: Vec<CubicSpline> = scenario.moving_objects.iter().map(|m| m.spline()).collect();
    let statics: Vec<ReachableSetTrajectory> = scenario
        .static_obstacles
        .iter()
        .map(|o| ReachableSetTrajectory::static_disk(v2(o.center), o.radius, horizon))
        .collect::<std::result::Result<_, _>>()?;
    let target_ids: Vec<usize> = scenario.targets().map(|(i, _)| i).collect();
    let interrupter_ids: Vec<usize> = scenario.interrupters().map(|(i, _)| i).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = move || -> f64 { rng.sample(StandardNormal) };
    let mut active: Option<ActivePlan> = None;
    let mut predictions: Vec<Option<ReachableSetTrajectory>> = vec![None; scenario.moving_objects.len()];
    let mut records = Vec::with_capacity(steps + 1);
    let mut timing = Vec::new();

    for k in 0..=steps {
        let t = k as f64 * step;
        let truth: Vec<Vector2<f64>> = splines.iter().map(|s| s.position(t)).collect();
        if k % per == 0 {
            let replan = k / per;
            let state = match &active {
                Some(p) => {
                    let (position, velocity, _) = p.state(t)?;
                    DroneState { position, velocity }
                }
                None => DroneState { position: v2(scenario.drone.position), velocity: v2(scenario.drone.velocity) },
            };
            let observations: Vec<ObjectObservation> = scenario
                .moving_objects
                .iter()
                .zip(&splines)
                .map(|(m, s)| {
                    let mut p = s.position(t);
                    let mut v = s.velocity(t);
                    p += Vector2::new(gauss(), gauss()) * m.noise;
                    v += Vector2::new(gauss(), gauss()) * m.velocity_noise;
                    let (sp, sv) = (m.noise * m.noise, m.velocity_noise * m.velocity_noise);
                    let covariance = Matrix4::from_diagonal(&nalgebra::Vector4::new(sp, sp, sv, sv));
                    ObjectObservation { position: p, velocity: v, covariance, body_radius: m.body_radius }
                })
                .collect();
            let pred_params = |object: usize| PredictionParams {
                horizon,
                samples: params.samples,
                primitive_degree: 3,
                outlier_ratio: params.outlier_ratio,
                seed: prediction_seed(seed, replan, object),
            };

            let prediction_start = Instant::now();
            let interrupters = parallel_map(&interrupter_ids, threads, |_, &i| {
                predict_or_fallback(&observations[i], &noise, &statics, &pred_params(i))
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            let mut obstacles = statics.clone();
            obstacles.extend(interrupters.iter().cloned());
            let targets = parallel_map(&target_ids, threads, |_, &i| {
                predict_or_fallback(&observations[i], &noise, &obstacles, &pred_params(i))
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            let prediction_ms = prediction_start.elapsed().as_secs_f64() * 1e3;
            for (&i, r) in interrupter_ids.iter().zip(&interrupters) {
                predictions[i] = Some(r.clone());
            }
            for (&i, r) in target_ids.iter().zip(&targets) {
                predictions[i] = Some(r.clone());
            }

            let previous = match &active {
                Some(p) => shift_plan(&p.position, t - p.start, horizon).ok(),
                None => None,
            };
            let input = PlanInput { state, previous: previous.as_ref(), targets: &targets, obstacles: &obstacles };
            let result = plan(&input, &plan_params);
            observer(&PlanEvent { time: t, state, targets: &targets, obstacles: &obstacles, result: &result });
            timing.push(TimingRecord {
                time: t,
                solve_ms: result.diagnostics.solve_time_ms,
                qp_ms: result.diagnostics.qp_time_ms,
                prediction_ms,
            });
            active = Some(ActivePlan::new(t, &result));
        }

        let plan_now = active.as_ref().expect("planned at k = 0");
        let (position, velocity, acceleration) = plan_now.state(t)?;
        let tau = t - plan_now.start;
        let objects = truth
            .iter()
            .zip(&predictions)
            .map(|(p, pred)| {
                let pred = pred.as_ref().expect("predicted at k = 0");
                ObjectSample { position: *p, center: pred.center_at(tau), radius: pred.radius_at(tau) }
            })
            .collect();
        let derived = derive(scenario, position, &truth);
        records.push(TraceRecord {
            time: t,
            replan: k % per == 0,
            status: plan_now.status,
            iterations: plan_now.iterations,
            segments: plan_now.segments,
            position,
            velocity,
            acceleration,
            objects,
            target_distance: derived.target_distance,
            clearance: derived.clearance,
            visibility: derived.visibility,
            fov_angle: derived.fov_angle,
        });
    }
    Ok(RunOutput { records, timing })
}
