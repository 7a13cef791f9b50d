//! Chasing-trajectory generation: one QP per replan.

pub mod cost;
pub mod qp;
pub mod rows;
pub mod segmentation;

use std::time::Instant;

use nalgebra::{DMatrix, DVector, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bernstein::{interpolate_fn, BernsteinError, BernsteinSegment, Continuity, Interval, PiecewiseBernstein};
use crate::prediction::{PredictionError, ReachableSetTrajectory};
use crate::reference::{
    blend_with_current, dual_ref, inverse_distance_weight, single_ref, standoff_angle, ObstacleTerm, ReferenceError,
    ReferenceTrajectory,
};
use crate::visibility::{
    also_target_as_obstacle, collision_halfspace, topology_class_fov, topology_class_obstacle, tvr_fov, tvr_obstacle,
    ConstraintKind, Regime, TopologyClass, VisibilityError,
};

use self::cost::assemble_cost;
use self::qp::{solve_qp, QpData, QpStatus};
use self::rows::{assemble_dynamic_rows, assemble_visibility_rows, DecisionLayout, PlanConstraint, Rows};
use self::segmentation::{classify_knots, segment_horizon, SegmentationResult};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("invalid planner parameters: {0}")]
    InvalidParams(&'static str),
    #[error("expected one or two targets, got {0}")]
    TargetCount(usize),
    #[error(transparent)]
    Bernstein(#[from] BernsteinError),
    #[error(transparent)]
    Visibility(#[from] VisibilityError),
    #[error(transparent)]
    Reference(#[from] ReferenceError),
    #[error(transparent)]
    Prediction(#[from] PredictionError),
}

pub type Result<T> = std::result::Result<T, PlanError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlanParams {
    pub degree: usize,
    pub horizon: f64,
    pub v_max: f64,
    pub a_max: f64,
    pub r_d: f64,
    pub gamma_c: f64,
    pub w_e: f64,
    pub w_j: f64,
    /// Camera field of view in radians.
    pub theta_f: f64,
    pub r_c: f64,
    pub max_segments: usize,
    pub min_knot_gap: f64,
    pub mutual_weight: f64,
    pub slack_weight: f64,
    /// Keep-out half-spaces against target reachable sets too.
    pub avoid_targets: bool,
    /// Extra clearance added to `r_c` inside the collision rows.
    pub collision_margin: f64,
}

impl Default for PlanParams {
    fn default() -> Self {
        Self {
            degree: 6,
            horizon: 1.5,
            v_max: 4.0,
            a_max: 5.0,
            r_d: 4.0,
            gamma_c: 1.0,
            w_e: 10.0,
            w_j: 1.0,
            theta_f: 120f64.to_radians(),
            r_c: 0.4,
            max_segments: 8,
            min_knot_gap: 0.1,
            mutual_weight: 1.0,
            slack_weight: 1e4,
            avoid_targets: true,
            collision_margin: 0.0,
        }
    }
}

impl PlanParams {
    pub fn validate(&self) -> Result<()> {
        if self.degree < 3 || self.degree > 12 {
            return Err(PlanError::InvalidParams("degree must lie in 3..=12"));
        }
        let positive = [self.horizon, self.v_max, self.a_max, self.r_d, self.gamma_c, self.w_e, self.r_c];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(PlanError::InvalidParams("horizon, limits, r_d, gamma_c, w_e and r_c must be positive"));
        }
        if !(self.w_j >= 0.0) || !(self.mutual_weight >= 0.0) || !(self.collision_margin >= 0.0) {
            return Err(PlanError::InvalidParams("weights and margins must be non-negative"));
        }
        if !(self.theta_f > 0.0 && self.theta_f < std::f64::consts::PI) {
            return Err(PlanError::InvalidParams("theta_f must lie in (0, pi)"));
        }
        if self.max_segments == 0 || !(self.min_knot_gap >= 0.0) {
            return Err(PlanError::InvalidParams("segment cap and knot gap"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DroneState {
    pub position: Vector2<f64>,
    pub velocity: Vector2<f64>,
}

/// Everything one replan consumes. `previous` must already be aligned to
/// the current time and cover `[0, horizon]`.
#[derive(Debug, Clone, Copy)]
pub struct PlanInput<'a> {
    pub state: DroneState,
    pub previous: Option<&'a PiecewiseBernstein>,
    pub targets: &'a [ReachableSetTrajectory],
    pub obstacles: &'a [ReachableSetTrajectory],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanStatus {
    Optimal,
    /// Solved with the occlusion rows softened by slack.
    Relaxed,
    FallbackPrevious,
    FallbackStop,
}

impl PlanStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Optimal => "optimal",
            Self::Relaxed => "relaxed",
            Self::FallbackPrevious => "fallback-previous",
            Self::FallbackStop => "fallback-stop",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::Optimal, Self::Relaxed, Self::FallbackPrevious, Self::FallbackStop]
            .into_iter()
            .find(|v| v.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlanDiagnostics {
    pub solve_time_ms: f64,
    pub qp_time_ms: f64,
    pub iterations: usize,
    /// Smallest constraint value on a dense grid; `+inf` without constraints.
    pub min_margin: f64,
    pub segments: usize,
    pub rows: usize,
    pub kkt_residual: f64,
    pub qp_status: Option<QpStatus>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct PlanResult {
    pub trajectory: PiecewiseBernstein,
    pub status: PlanStatus,
    pub diagnostics: PlanDiagnostics,
    /// The hard visibility and collision polynomials of the solved QP.
    pub constraints: Vec<PlanConstraint>,
    pub segmentation: Option<SegmentationResult>,
    pub reference: Option<ReferenceTrajectory>,
}

/// Grid points per segment for the margin diagnostic.
const MARGIN_GRID: usize = 32;

/// Full pipeline: segmentation, classes, constraints, reference, cost,
/// solve, with the fallback ladder on failure.
pub fn plan(input: &PlanInput, params: &PlanParams) -> PlanResult {
    plan_inner(input, params, None)
}

/// As [`plan`] but with caller-chosen knots (used for timing grids).
pub fn plan_with_knots(input: &PlanInput, params: &PlanParams, knots: Vec<f64>) -> PlanResult {
    plan_inner(input, params, Some(knots))
}

fn plan_inner(input: &PlanInput, params: &PlanParams, knots: Option<Vec<f64>>) -> PlanResult {
    let start = Instant::now();
    let mut result = match build_problem(input, params, knots) {
        Ok(problem) => solve_problem(input, params, problem),
        Err(e) => {
            let mut r = fallback(input, params);
            r.diagnostics.error = Some(e.to_string());
            r
        }
    };
    result.diagnostics.solve_time_ms = start.elapsed().as_secs_f64() * 1e3;
    result
}

/// The assembled but unsolved chasing problem.
#[derive(Debug, Clone)]
pub struct ChasingProblem {
    pub layout: DecisionLayout,
    pub segmentation: SegmentationResult,
    pub constraints: Vec<PlanConstraint>,
    pub reference: ReferenceTrajectory,
    pub quadratic: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub dynamic_eq: Rows,
    pub dynamic_ineq: Rows,
}

impl ChasingProblem {
    pub fn qp(&self) -> QpData {
        let dim = self.layout.dim();
        let mut ineq = self.dynamic_ineq.clone();
        ineq.extend(&assemble_visibility_rows(self.layout, &self.constraints, dim, None));
        QpData {
            quadratic: &self.quadratic * 2.0,
            linear: self.linear.clone(),
            eq_matrix: self.dynamic_eq.matrix(),
            eq_rhs: self.dynamic_eq.rhs(),
            ineq_matrix: ineq.matrix(),
            ineq_rhs: ineq.rhs(),
        }
    }

    /// QP with one slack per occlusion row, each penalized by `weight s²`.
    /// A negative slack only tightens its row, so no sign bound is needed.
    /// Collision, view-cone and dynamic rows stay hard. Also returns the
    /// indices of the softened constraints.
    pub fn relaxed_qp(&self, weight: f64) -> (QpData, Vec<usize>) {
        let dim = self.layout.dim();
        let soft: Vec<usize> =
            (0..self.constraints.len()).filter(|&i| self.constraints[i].kind.is_occlusion()).collect();
        let hard: Vec<PlanConstraint> =
            self.constraints.iter().filter(|c| !c.kind.is_occlusion()).cloned().collect();
        let softs: Vec<PlanConstraint> = soft.iter().map(|&i| self.constraints[i].clone()).collect();
        let slacks: usize = softs.iter().map(|c| c.poly.matrix().nrows()).sum();
        let full = dim + slacks;
        let mut ineq = self.dynamic_ineq.widened(full);
        ineq.extend(&assemble_visibility_rows(self.layout, &hard, full, None));
        ineq.extend(&assemble_visibility_rows(self.layout, &softs, full, Some(dim)));
        let mut quadratic = DMatrix::zeros(full, full);
        quadratic.view_mut((0, 0), (dim, dim)).copy_from(&(&self.quadratic * 2.0));
        let mut linear = DVector::zeros(full);
        linear.rows_mut(0, dim).copy_from(&self.linear);
        for i in 0..slacks {
            quadratic[(dim + i, dim + i)] = 2.0 * weight;
        }
        let eq = self.dynamic_eq.widened(full);
        (
            QpData {
                quadratic,
                linear,
                eq_matrix: eq.matrix(),
                eq_rhs: eq.rhs(),
                ineq_matrix: ineq.matrix(),
                ineq_rhs: ineq.rhs(),
            },
            soft,
        )
    }

    pub fn trajectory(&self, x: &DVector<f64>) -> Result<PiecewiseBernstein> {
        let n = self.layout.degree;
        let segments = (0..self.layout.segments)
            .map(|s| {
                let ox = self.layout.offset(s, 0);
                let oy = self.layout.offset(s, 1);
                BernsteinSegment::new(
                    self.segmentation.interval(s),
                    vec![x.rows(ox, n + 1).iter().copied().collect(), x.rows(oy, n + 1).iter().copied().collect()],
                )
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(PiecewiseBernstein::new(segments, Continuity::C2)?)
    }
}

/// Smallest value of the constraint polynomials over a uniform grid.
pub fn constraint_margin(constraints: &[PlanConstraint], trajectory: &PiecewiseBernstein, grid: usize) -> f64 {
    let mut worst = f64::INFINITY;
    for c in constraints {
        let seg = &trajectory.segments()[c.segment];
        let x = crate::visibility::AffineBernstein::from_segment_points(seg);
        let Ok(poly) = c.poly.coefficients(&x) else { return f64::NEG_INFINITY };
        let iv = poly.interval();
        for i in 0..=grid {
            let t = iv.start() + iv.duration() * i as f64 / grid as f64;
            worst = worst.min(poly.eval_scalar(t).unwrap_or(f64::NEG_INFINITY));
        }
    }
    worst
}

fn class_or_default(r: std::result::Result<TopologyClass, VisibilityError>, default: TopologyClass) -> TopologyClass {
    r.unwrap_or(default)
}

/// Builds segmentation, constraints, reference and cost for one replan.
pub fn build_problem(input: &PlanInput, params: &PlanParams, knots: Option<Vec<f64>>) -> Result<ChasingProblem> {
    params.validate()?;
    let targets = input.targets;
    let obstacles = input.obstacles;
    if targets.is_empty() || targets.len() > 2 {
        return Err(PlanError::TargetCount(targets.len()));
    }
    let dual = targets.len() == 2;
    let horizon = params.horizon;
    let n = params.degree;
    let c0 = input.state.position;

    let segmentation = match knots {
        Some(k) => classify_knots(targets, obstacles, k)?,
        None => segment_horizon(targets, obstacles, horizon, params.max_segments, params.min_knot_gap)?,
    };
    let layout = DecisionLayout { degree: n, segments: segmentation.segments() };

    // Classes from the current configuration.
    let classes: Vec<Vec<TopologyClass>> = targets
        .iter()
        .map(|q| {
            obstacles
                .iter()
                .map(|o| class_or_default(topology_class_obstacle(c0, q.center_at(0.0), o.center_at(0.0)), TopologyClass::O1))
                .collect()
        })
        .collect();
    let (fov_class, pair_classes) = if dual {
        let (q1, q2) = (targets[0].center_at(0.0), targets[1].center_at(0.0));
        (
            class_or_default(topology_class_fov(c0, q1, q2), TopologyClass::F1),
            [
                class_or_default(topology_class_obstacle(c0, q1, q2), TopologyClass::O1),
                class_or_default(topology_class_obstacle(c0, q2, q1), TopologyClass::O1),
            ],
        )
    } else {
        (TopologyClass::F1, [TopologyClass::O1; 2])
    };

    let previous = |t: f64| -> Vector2<f64> {
        match input.previous {
            Some(p) => p.eval2(t.clamp(p.start(), p.end())).unwrap_or(c0),
            None => c0,
        }
    };

    let mut constraints = Vec::new();
    for s in 0..layout.segments {
        let iv = segmentation.interval(s);
        for (qi, q) in targets.iter().enumerate() {
            for (oi, o) in obstacles.iter().enumerate() {
                let regime = segmentation.regimes[s][qi][oi];
                let (kind, poly) = occlusion_poly(q, o, classes[qi][oi], regime, iv, n)?;
                constraints.push(PlanConstraint { kind, segment: s, poly });
            }
        }
        if dual {
            let poly = tvr_fov(&targets[0], &targets[1], params.theta_f, fov_class, iv, n)?;
            constraints.push(PlanConstraint { kind: ConstraintKind::TvrF, segment: s, poly });
            // Merged targets make the two mutual constraints contradictory.
            if segmentation.target_pair[s] == Regime::Separated {
                match also_target_as_obstacle([&targets[0], &targets[1]], pair_classes, Regime::Separated, iv, n) {
                    Ok(pair) => {
                        for poly in pair {
                            constraints.push(PlanConstraint { kind: ConstraintKind::TvrOSeparated, segment: s, poly });
                        }
                    }
                    Err(VisibilityError::RegimeViolated { .. }) => {}
                    Err(e) => return Err(e.into()),
                }
            }
        }
        let prev_fit = fit_segment(iv, n, previous)?;
        let keep_out = obstacles.iter().chain(if params.avoid_targets { targets } else { &[] });
        for o in keep_out {
            let poly = collision_halfspace(&prev_fit, o, params.r_c + params.collision_margin, n)?;
            constraints.push(PlanConstraint { kind: ConstraintKind::Collision, segment: s, poly });
        }
    }

    // Reference trajectory.
    let weights: Vec<Vec<f64>> = targets
        .iter()
        .map(|q| obstacles.iter().map(|o| inverse_distance_weight(q.center_at(0.0), o.center_at(0.0))).collect())
        .collect();
    let mut reference_error = None;
    let mu = |t: f64| -> Vector2<f64> {
        let r = if dual {
            let (q1, q2) = (targets[0].center_at(t), targets[1].center_at(t));
            let mut terms = Vec::with_capacity(2 * obstacles.len());
            for (qi, q) in [q1, q2].into_iter().enumerate() {
                for (oi, o) in obstacles.iter().enumerate() {
                    if let Ok(a) = standoff_angle(q, o.center_at(t), classes[qi][oi]) {
                        terms.push((a, weights[qi][oi]));
                    }
                }
            }
            if q1 == q2 {
                single_ref(q1, &[], c0, params.r_d)
            } else {
                dual_ref(q1, q2, &terms, params.theta_f, params.gamma_c, fov_class, params.mutual_weight)
            }
        } else {
            let q = targets[0].center_at(t);
            let terms: Vec<ObstacleTerm> = obstacles
                .iter()
                .enumerate()
                .map(|(oi, o)| ObstacleTerm { center: o.center_at(t), class: classes[0][oi], weight: weights[0][oi] })
                .collect();
            single_ref(q, &terms, c0, params.r_d)
        };
        r.unwrap_or(c0)
    };
    let reference = blend_with_current(mu, c0, &segmentation.knots, n);
    let reference = match reference {
        Ok(r) => r,
        Err(e) => {
            reference_error = Some(e);
            blend_with_current(|_| c0, c0, &segmentation.knots, n)?
        }
    };
    if let Some(e) = reference_error {
        return Err(e.into());
    }

    let cost = assemble_cost(layout, &segmentation.knots, &reference.segments, params.w_j, params.w_e)?;
    let (dynamic_eq, dynamic_ineq) = assemble_dynamic_rows(
        layout,
        &segmentation.knots,
        input.state.position,
        input.state.velocity,
        params.v_max,
        params.a_max,
    );
    Ok(ChasingProblem {
        layout,
        segmentation,
        constraints,
        reference,
        quadratic: cost.quadratic,
        linear: cost.linear,
        dynamic_eq,
        dynamic_ineq,
    })
}

fn occlusion_poly(
    target: &ReachableSetTrajectory,
    obstacle: &ReachableSetTrajectory,
    class: TopologyClass,
    regime: Regime,
    iv: Interval,
    n: usize,
) -> Result<(ConstraintKind, crate::visibility::AffineBernstein)> {
    if regime == Regime::Separated {
        match tvr_obstacle(target, obstacle, class, Regime::Separated, iv, n) {
            Ok(p) => return Ok((ConstraintKind::TvrOSeparated, p)),
            Err(VisibilityError::RegimeViolated { .. }) => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok((ConstraintKind::TvrOOverlap, tvr_obstacle(target, obstacle, class, Regime::Overlap, iv, n)?))
}

/// Degree-`n` interpolant of a planar path on one segment.
pub fn fit_segment(iv: Interval, n: usize, f: impl Fn(f64) -> Vector2<f64>) -> Result<BernsteinSegment> {
    let xs = interpolate_fn(iv, n, |t| f(t).x)?;
    let ys = interpolate_fn(iv, n, |t| f(t).y)?;
    Ok(BernsteinSegment::new(iv, vec![xs.axis_coeffs(0).to_vec(), ys.axis_coeffs(0).to_vec()])?)
}

fn solve_problem(input: &PlanInput, params: &PlanParams, problem: ChasingProblem) -> PlanResult {
    let qp_start = Instant::now();
    let data = problem.qp();
    let rows = data.rows();
    let sol = solve_qp(&data);
    let mut diagnostics = PlanDiagnostics {
        iterations: sol.iterations,
        segments: problem.layout.segments,
        rows,
        kkt_residual: sol.kkt.max(),
        qp_status: Some(sol.status),
        ..Default::default()
    };
    if sol.status == QpStatus::Optimal {
        if let Ok(trajectory) = problem.trajectory(&sol.x) {
            diagnostics.qp_time_ms = qp_start.elapsed().as_secs_f64() * 1e3;
            diagnostics.min_margin = constraint_margin(&problem.constraints, &trajectory, MARGIN_GRID);
            return PlanResult {
                trajectory,
                status: PlanStatus::Optimal,
                diagnostics,
                constraints: problem.constraints,
                segmentation: Some(problem.segmentation),
                reference: Some(problem.reference),
            };
        }
    }

    let (relaxed, _) = problem.relaxed_qp(params.slack_weight);
    let sol = solve_qp(&relaxed);
    diagnostics.iterations += sol.iterations;
    diagnostics.qp_status = Some(sol.status);
    diagnostics.kkt_residual = sol.kkt.max();
    diagnostics.qp_time_ms = qp_start.elapsed().as_secs_f64() * 1e3;
    if sol.status == QpStatus::Optimal {
        let x = sol.x.rows(0, problem.layout.dim()).into_owned();
        if let Ok(trajectory) = problem.trajectory(&x) {
            diagnostics.min_margin = constraint_margin(&problem.constraints, &trajectory, MARGIN_GRID);
            return PlanResult {
                trajectory,
                status: PlanStatus::Relaxed,
                diagnostics,
                constraints: problem.constraints,
                segmentation: Some(problem.segmentation),
                reference: Some(problem.reference),
            };
        }
    }
    let mut r = fallback(input, params);
    r.diagnostics.iterations = diagnostics.iterations;
    r.diagnostics.qp_status = diagnostics.qp_status;
    r.diagnostics.rows = rows;
    r.diagnostics.segments = diagnostics.segments;
    r.diagnostics.qp_time_ms = diagnostics.qp_time_ms;
    r
}

/// Previous plan if it still starts at the current state, else braking.
fn fallback(input: &PlanInput, params: &PlanParams) -> PlanResult {
    let state = input.state;
    if let Some(prev) = input.previous {
        let ok = prev.start() == 0.0
            && prev.end() >= params.horizon - 1e-9
            && prev.eval2(0.0).map(|p| (p - state.position).norm() <= 1e-6).unwrap_or(false)
            && prev.derivative().eval2(0.0).map(|v| (v - state.velocity).norm() <= 1e-6).unwrap_or(false);
        if ok {
            return PlanResult {
                trajectory: prev.clone(),
                status: PlanStatus::FallbackPrevious,
                diagnostics: PlanDiagnostics { min_margin: f64::INFINITY, ..Default::default() },
                constraints: Vec::new(),
                segmentation: None,
                reference: None,
            };
        }
    }
    PlanResult {
        trajectory: brake_plan(state, params.a_max, params.horizon, params.degree),
        status: PlanStatus::FallbackStop,
        diagnostics: PlanDiagnostics { min_margin: f64::INFINITY, ..Default::default() },
        constraints: Vec::new(),
        segmentation: None,
        reference: None,
    }
}

/// Straight-line deceleration at `a_max` until rest, then hover.
pub fn brake_plan(state: DroneState, a_max: f64, horizon: f64, degree: usize) -> PiecewiseBernstein {
    let p0 = state.position;
    let v0 = state.velocity;
    let speed = v0.norm();
    let whole = Interval::new(0.0, horizon).expect("positive horizon");
    if speed < 1e-12 {
        return PiecewiseBernstein::single(BernsteinSegment::constant_point(whole, p0).elevate(degree).expect("elevate"));
    }
    let dir = v0 / speed;
    let stop = speed / a_max;
    let quad = |t_end: f64| {
        let iv = Interval::new(0.0, t_end).expect("positive");
        let p_end = p0 + v0 * t_end - 0.5 * a_max * dir * t_end * t_end;
        BernsteinSegment::planar(iv, &[p0, p0 + v0 * (t_end / 2.0), p_end])
            .and_then(|s| s.elevate(degree))
            .expect("valid quadratic")
    };
    if stop >= horizon - 1e-9 {
        return PiecewiseBernstein::new(vec![quad(horizon)], Continuity::C2).expect("single");
    }
    let first = quad(stop);
    let rest = p0 + v0 * stop - 0.5 * a_max * dir * stop * stop;
    let second = BernsteinSegment::constant_point(Interval::new(stop, horizon).expect("positive"), rest)
        .elevate(degree)
        .expect("elevate");
    PiecewiseBernstein::new(vec![first, second], Continuity::C1).expect("tiles")
}

/// Plan as seen `dt` seconds later on `[0, horizon]`, extended past its end
/// at constant velocity.
pub fn shift_plan(plan: &PiecewiseBernstein, dt: f64, horizon: f64) -> Result<PiecewiseBernstein> {
    let degree = plan.segments().iter().map(|s| s.degree()).max().unwrap_or(1).max(1);
    let mut segments = Vec::new();
    let end = plan.end();
    for seg in plan.segments() {
        let iv = seg.interval();
        let a = iv.start().max(dt);
        if iv.end() - a <= 1e-9 {
            continue;
        }
        let part = seg.restrict(a, iv.end())?;
        let shifted = part.with_interval(Interval::new(a - dt, iv.end() - dt)?);
        segments.push(shifted.elevate(degree)?);
    }
    let covered = (end - dt).max(0.0);
    if covered < horizon - 1e-9 {
        let t_end = end.min(end.max(dt));
        let p = plan.eval2(t_end.min(end))?;
        let v = plan.derivative().eval2(t_end.min(end))?;
        let start = if segments.is_empty() { 0.0 } else { covered };
        let p_start = p + v * (dt - end).max(0.0);
        let iv = Interval::new(start, horizon)?;
        let line = BernsteinSegment::planar(iv, &[p_start, p_start + v * iv.duration()])?;
        segments.push(line.elevate(degree)?);
    } else if let Some(last) = segments.last_mut() {
        let iv = last.interval();
        if iv.end() > horizon + 1e-9 {
            *last = last.restrict(iv.start(), horizon)?;
        }
    }
    // Drop anything past the horizon.
    segments.retain(|s| s.interval().start() < horizon - 1e-9);
    if let Some(last) = segments.last_mut() {
        let iv = last.interval();
        if iv.end() > horizon + 1e-9 {
            *last = last.restrict(iv.start(), horizon)?;
        }
    }
    let continuity = plan.continuity().min(Continuity::C1);
    Ok(PiecewiseBernstein::new(segments, continuity)?)
}
