//! Target-visible regions and collision half-spaces as time-varying affine
//! Bernstein inequalities in the control points of one planning segment.
//!
//! Local decision layout for a segment of degree `n`: `[x_0..x_n, y_0..y_n]`.

use nalgebra::{DMatrix, DVector, Vector2};
use thiserror::Error;

use crate::bernstein::{
    elevation_matrix, interpolate_fn, product_matrix, BernsteinError, BernsteinSegment, Interval,
};
use crate::prediction::{PredictionError, ReachableSetTrajectory};

/// Degree used for the square-root and norm approximations.
pub const INTERPOLATION_DEGREE: usize = 6;

/// Negative squared-distance samples above this are treated as zero.
const REGIME_SLACK: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VisibilityError {
    #[error("degenerate geometry: {0}")]
    Degenerate(&'static str),
    #[error("separated regime violated at t = {t} (squared gap {value})")]
    RegimeViolated { t: f64, value: f64 },
    #[error("field of view must lie in (0, pi), got {0}")]
    InvalidFov(f64),
    #[error("decision vector has {found} entries, expected {expected}")]
    DecisionSize { found: usize, expected: usize },
    #[error(transparent)]
    Bernstein(#[from] BernsteinError),
    #[error(transparent)]
    Prediction(#[from] PredictionError),
}

pub type Result<T> = std::result::Result<T, VisibilityError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TopologyClass {
    O1,
    O2,
    F1,
    F2,
}

/// Relation between a target and an occluder over one planning segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    Separated,
    Overlap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstraintKind {
    TvrOSeparated,
    TvrOOverlap,
    TvrF,
    Collision,
}

impl ConstraintKind {
    pub fn is_occlusion(self) -> bool {
        matches!(self, Self::TvrOSeparated | Self::TvrOOverlap)
    }
}

fn det(a: Vector2<f64>, b: Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

pub fn topology_class_obstacle(
    drone: Vector2<f64>,
    target: Vector2<f64>,
    obstacle: Vector2<f64>,
) -> Result<TopologyClass> {
    if drone == obstacle || target == obstacle {
        return Err(VisibilityError::Degenerate("point coincides with the obstacle center"));
    }
    Ok(if det(drone - obstacle, target - obstacle) >= 0.0 { TopologyClass::O1 } else { TopologyClass::O2 })
}

pub fn topology_class_fov(
    drone: Vector2<f64>,
    target1: Vector2<f64>,
    target2: Vector2<f64>,
) -> Result<TopologyClass> {
    if target1 == target2 {
        return Err(VisibilityError::Degenerate("coincident targets"));
    }
    Ok(if det(drone - target1, target2 - target1) >= 0.0 { TopologyClass::F1 } else { TopologyClass::F2 })
}

/// Angle at `x` subtended by `q1` and `q2`.
pub fn inscribed_angle(x: Vector2<f64>, q1: Vector2<f64>, q2: Vector2<f64>) -> f64 {
    let a = q1 - x;
    let b = q2 - x;
    det(a, b).abs().atan2(a.dot(&b))
}

/// Scalar polynomial whose Bernstein coefficients are affine in the
/// control points of one segment: `coeffs = matrix * x + constant`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineBernstein {
    interval: Interval,
    segment_degree: usize,
    matrix: DMatrix<f64>,
    constant: DVector<f64>,
}

impl AffineBernstein {
    /// `ax(t) x(t) + ay(t) y(t) + b(t)` where `x, y` are the segment axes.
    pub fn linear_form(
        ax: &BernsteinSegment,
        ay: &BernsteinSegment,
        b: &BernsteinSegment,
        segment_degree: usize,
    ) -> Result<Self> {
        let interval = b.interval();
        if ax.interval() != interval || ay.interval() != interval {
            return Err(BernsteinError::IntervalMismatch.into());
        }
        let n = segment_degree;
        let degree = (ax.degree() + n).max(ay.degree() + n).max(b.degree());
        let px = elevation_matrix(ax.degree() + n, degree)? * product_matrix(ax.axis_coeffs(0), n);
        let py = elevation_matrix(ay.degree() + n, degree)? * product_matrix(ay.axis_coeffs(0), n);
        let mut matrix = DMatrix::zeros(degree + 1, 2 * (n + 1));
        matrix.view_mut((0, 0), (degree + 1, n + 1)).copy_from(&px);
        matrix.view_mut((0, n + 1), (degree + 1, n + 1)).copy_from(&py);
        let constant = DVector::from_vec(b.elevate(degree)?.axis_coeffs(0).to_vec());
        Ok(Self { interval, segment_degree: n, matrix, constant })
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn degree(&self) -> usize {
        self.constant.len() - 1
    }

    pub fn segment_degree(&self) -> usize {
        self.segment_degree
    }

    pub fn decision_len(&self) -> usize {
        2 * (self.segment_degree + 1)
    }

    /// Row `k` gives coefficient `k` as `matrix[k] . x + constant[k]`.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn constant(&self) -> &DVector<f64> {
        &self.constant
    }

    pub fn coefficients(&self, x: &[f64]) -> Result<BernsteinSegment> {
        if x.len() != self.decision_len() {
            return Err(VisibilityError::DecisionSize { found: x.len(), expected: self.decision_len() });
        }
        let c = &self.matrix * DVector::from_column_slice(x) + &self.constant;
        Ok(BernsteinSegment::scalar(self.interval, c.iter().copied().collect())?)
    }

    pub fn evaluate(&self, x: &[f64], t: f64) -> Result<f64> {
        Ok(self.coefficients(x)?.eval_scalar(t)?)
    }

    pub fn from_segment_points(segment: &BernsteinSegment) -> Vec<f64> {
        let mut x = segment.axis_coeffs(0).to_vec();
        x.extend_from_slice(segment.axis_coeffs(1));
        x
    }
}

/// One constraint family across the planning segments.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfspaceSeries {
    pub kind: ConstraintKind,
    /// `(planning segment index, polynomial)` pairs.
    pub segments: Vec<(usize, AffineBernstein)>,
}

fn restrict_set(
    set: &ReachableSetTrajectory,
    interval: Interval,
) -> Result<(BernsteinSegment, BernsteinSegment)> {
    Ok((set.center_on(interval.start(), interval.end())?, set.radius_on(interval.start(), interval.end())?))
}

fn sqrt_interpolant(
    interval: Interval,
    value: impl Fn(f64) -> f64,
) -> Result<BernsteinSegment> {
    let mut bad = None;
    let seg = interpolate_fn(interval, INTERPOLATION_DEGREE, |t| {
        let v = value(t);
        if v < -REGIME_SLACK * (1.0 + v.abs()) && bad.is_none() {
            bad = Some((t, v));
        }
        v.max(0.0).sqrt()
    })?;
    match bad {
        Some((t, value)) => Err(VisibilityError::RegimeViolated { t, value }),
        None => Ok(seg),
    }
}

/// Target-visible region against one occluder on a segment.
pub fn tvr_obstacle(
    target: &ReachableSetTrajectory,
    obstacle: &ReachableSetTrajectory,
    class: TopologyClass,
    regime: Regime,
    interval: Interval,
    segment_degree: usize,
) -> Result<AffineBernstein> {
    let (q, rq) = restrict_set(target, interval)?;
    let (o, ro) = restrict_set(obstacle, interval)?;
    let qo = q.sub(&o)?;
    let qx = qo.axis(0);
    let qy = qo.axis(1);
    match regime {
        Regime::Separated => {
            let sign = match class {
                TopologyClass::O1 => 1.0,
                TopologyClass::O2 => -1.0,
                _ => return Err(VisibilityError::Degenerate("obstacle class expected")),
            };
            let d1_sq = qo.squared_norm();
            let rqo = rq.add(&ro)?;
            let gap = d1_sq.sub(&rqo.multiply(&rqo)?)?;
            let d2 = sqrt_interpolant(interval, |t| gap.eval_scalar(t).unwrap_or(f64::NAN))?;
            let d2 = d2.scale(sign);
            // w = (r qx + s d2 qy, -s d2 qx + r qy)
            let wx = rqo.multiply(&qx)?.add(&d2.multiply(&qy)?)?;
            let wy = rqo.multiply(&qy)?.sub(&d2.multiply(&qx)?)?;
            let w_dot_o = wx.multiply(&o.axis(0))?.add(&wy.multiply(&o.axis(1))?)?;
            let b = w_dot_o.add(&ro.multiply(&d1_sq)?)?.scale(-1.0);
            AffineBernstein::linear_form(&wx, &wy, &b, segment_degree)
        }
        Regime::Overlap => {
            let d1 = sqrt_interpolant(interval, |t| {
                qo.eval2(t).map(|v| v.norm_squared()).unwrap_or(f64::NAN)
            })?;
            let qo_dot_q = qx.multiply(&q.axis(0))?.add(&qy.multiply(&q.axis(1))?)?;
            let b = qo_dot_q.add(&rq.multiply(&d1)?)?.scale(-1.0);
            AffineBernstein::linear_form(&qx, &qy, &b, segment_degree)
        }
    }
}

/// Constant coefficient of the field-of-view constraint.
pub fn fov_coefficient(theta_f: f64) -> f64 {
    (1.0 + theta_f.cos()) / (2.0 * theta_f.sin())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeadZoneMode {
    Intersection,
    Union,
}

/// Two circles through both targets on which the targets subtend `θ_f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FovGeometry {
    pub centers: [Vector2<f64>; 2],
    pub radius: f64,
    pub mode: DeadZoneMode,
}

impl FovGeometry {
    /// True when both targets can not be kept inside the view cone from `x`.
    pub fn in_dead_zone(&self, x: Vector2<f64>) -> bool {
        let inside = |c: Vector2<f64>| (x - c).norm() < self.radius;
        match self.mode {
            DeadZoneMode::Intersection => inside(self.centers[0]) && inside(self.centers[1]),
            DeadZoneMode::Union => inside(self.centers[0]) || inside(self.centers[1]),
        }
    }
}

pub fn fov_geometry(q1: Vector2<f64>, q2: Vector2<f64>, theta_f: f64) -> Result<FovGeometry> {
    if !(theta_f > 0.0 && theta_f < std::f64::consts::PI) {
        return Err(VisibilityError::InvalidFov(theta_f));
    }
    if q1 == q2 {
        return Err(VisibilityError::Degenerate("coincident targets"));
    }
    let d = q2 - q1;
    let cot = 1.0 / theta_f.tan();
    let f1 = q1 + 0.5 * Vector2::new(d.x + cot * d.y, -cot * d.x + d.y);
    let f2 = q1 + 0.5 * Vector2::new(d.x - cot * d.y, cot * d.x + d.y);
    let mode = if theta_f >= std::f64::consts::FRAC_PI_2 {
        DeadZoneMode::Intersection
    } else {
        DeadZoneMode::Union
    };
    Ok(FovGeometry { centers: [f1, f2], radius: d.norm() / (2.0 * theta_f.sin()), mode })
}

/// Field-of-view constraint keeping both targets in the view cone.
pub fn tvr_fov(
    target1: &ReachableSetTrajectory,
    target2: &ReachableSetTrajectory,
    theta_f: f64,
    class: TopologyClass,
    interval: Interval,
    segment_degree: usize,
) -> Result<AffineBernstein> {
    if !(theta_f > 0.0 && theta_f < std::f64::consts::PI) {
        return Err(VisibilityError::InvalidFov(theta_f));
    }
    let sign = match class {
        TopologyClass::F1 => 1.0,
        TopologyClass::F2 => -1.0,
        _ => return Err(VisibilityError::Degenerate("field-of-view class expected")),
    };
    let q1 = target1.center_on(interval.start(), interval.end())?;
    let q2 = target2.center_on(interval.start(), interval.end())?;
    let d = q2.sub(&q1)?;
    let (dx, dy) = (d.axis(0), d.axis(1));
    // s (dy x - dx y - q1x dy + q1y dx) - k |d|^2
    let ax = dy.scale(sign);
    let ay = dx.scale(-sign);
    let cross = q1.axis(1).multiply(&dx)?.sub(&q1.axis(0).multiply(&dy)?)?;
    let b = cross.scale(sign).sub(&d.squared_norm().scale(fov_coefficient(theta_f)))?;
    AffineBernstein::linear_form(&ax, &ay, &b, segment_degree)
}

/// Supporting half-space of the inflated occupied disk, facing the
/// previous plan `prev` (already restricted to the segment).
pub fn collision_halfspace(
    prev: &BernsteinSegment,
    obstacle: &ReachableSetTrajectory,
    r_c: f64,
    segment_degree: usize,
) -> Result<AffineBernstein> {
    let interval = prev.interval();
    let (o, ro) = restrict_set(obstacle, interval)?;
    let n = prev.sub(&o)?;
    let d3 = sqrt_interpolant(interval, |t| n.eval2(t).map(|v| v.norm_squared()).unwrap_or(f64::NAN))?;
    let (nx, ny) = (n.axis(0), n.axis(1));
    let n_dot_o = nx.multiply(&o.axis(0))?.add(&ny.multiply(&o.axis(1))?)?;
    let b = n_dot_o.add(&ro.offset(r_c).multiply(&d3)?)?.scale(-1.0);
    AffineBernstein::linear_form(&nx, &ny, &b, segment_degree)
}

/// Occlusion constraints treating each target as the other's occluder.
/// `classes[0]` is the class of target 1 against target 2, `classes[1]`
/// the reverse.
pub fn also_target_as_obstacle(
    targets: [&ReachableSetTrajectory; 2],
    classes: [TopologyClass; 2],
    regime: Regime,
    interval: Interval,
    segment_degree: usize,
) -> Result<[AffineBernstein; 2]> {
    Ok([
        tvr_obstacle(targets[0], targets[1], classes[0], regime, interval, segment_degree)?,
        tvr_obstacle(targets[1], targets[0], classes[1], regime, interval, segment_degree)?,
    ])
}

/// Whether the segment `a-b` meets the open disk `(center, radius)`.
pub fn segment_hits_disk(a: Vector2<f64>, b: Vector2<f64>, center: Vector2<f64>, radius: f64) -> bool {
    point_segment_distance(center, a, b) < radius
}

pub fn point_segment_distance(p: Vector2<f64>, a: Vector2<f64>, b: Vector2<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let s = if len2 > 0.0 { ((p - a).dot(&ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (a + ab * s - p).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3};

    fn v(x: f64, y: f64) -> Vector2<f64> {
        Vector2::new(x, y)
    }

    fn unit() -> Interval {
        Interval::new(0.0, 1.0).unwrap()
    }

    fn disk(c: Vector2<f64>, r: f64) -> ReachableSetTrajectory {
        ReachableSetTrajectory::static_disk(c, r, 1.0).unwrap()
    }

    /// Constant drone trajectory at `p` as a degree-`n` decision vector.
    fn hold(p: Vector2<f64>, n: usize) -> Vec<f64> {
        let mut x = vec![p.x; n + 1];
        x.extend(vec![p.y; n + 1]);
        x
    }

    fn value_at(g: &AffineBernstein, p: Vector2<f64>) -> f64 {
        g.evaluate(&hold(p, g.segment_degree()), 0.5).unwrap()
    }

    #[test]
    fn topology_examples() {
        let o = v(0.0, 0.0);
        assert_eq!(topology_class_obstacle(v(1.0, 0.0), v(0.0, 1.0), o).unwrap(), TopologyClass::O1);
        assert_eq!(topology_class_obstacle(v(0.0, 1.0), v(1.0, 0.0), o).unwrap(), TopologyClass::O2);
        assert_eq!(topology_class_obstacle(v(1.0, 0.0), v(2.0, 0.0), o).unwrap(), TopologyClass::O1);
        assert!(topology_class_obstacle(o, v(1.0, 0.0), o).is_err());

        let (q1, q2) = (v(0.0, 0.0), v(2.0, 0.0));
        assert_eq!(topology_class_fov(v(1.0, 2.0), q1, q2).unwrap(), TopologyClass::F2);
        assert_eq!(topology_class_fov(v(1.0, -2.0), q1, q2).unwrap(), TopologyClass::F1);
        assert_eq!(topology_class_fov(v(5.0, 0.0), q1, q2).unwrap(), TopologyClass::F1);
        assert!(topology_class_fov(v(1.0, 1.0), q1, q1).is_err());
    }

    #[test]
    fn separated_tvr_is_the_tangent_line() {
        let q = disk(v(0.0, 0.0), 0.5);
        let o = disk(v(4.0, 0.0), 0.5);
        let s15 = 15f64.sqrt();
        // O1 drones sit above the line of centers; their region is x - sqrt15 y <= 2.
        let g1 = tvr_obstacle(&q, &o, TopologyClass::O1, Regime::Separated, unit(), 6).unwrap();
        let g2 = tvr_obstacle(&q, &o, TopologyClass::O2, Regime::Separated, unit(), 6).unwrap();
        for p in [v(0.0, 0.0), v(1.0, 2.0), v(-3.0, -1.0), v(6.0, 0.5)] {
            assert_abs_diff_eq!(value_at(&g1, p), 4.0 * (2.0 - (p.x - s15 * p.y)), epsilon = 1e-9);
            assert_abs_diff_eq!(value_at(&g2, p), 4.0 * (2.0 - (p.x + s15 * p.y)), epsilon = 1e-9);
        }
        // Tangent to both disks.
        let n = v(1.0, -s15) / 4.0;
        assert_abs_diff_eq!(n.dot(&v(0.0, 0.0)) + 0.5, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(n.dot(&v(4.0, 0.0)) - 0.5, 0.5, epsilon = 1e-12);
        // The current drone satisfies its own class.
        let drone = v(-1.0, 3.0);
        let class = topology_class_obstacle(drone, v(0.0, 0.0), v(4.0, 0.0)).unwrap();
        let g = tvr_obstacle(&q, &o, class, Regime::Separated, unit(), 6).unwrap();
        assert!(value_at(&g, drone) > 0.0);
    }

    #[test]
    fn overlap_tvr_example() {
        let q = disk(v(0.0, 0.0), 1.0);
        let o = disk(v(1.0, 0.0), 1.0);
        let g = tvr_obstacle(&q, &o, TopologyClass::O1, Regime::Overlap, unit(), 6).unwrap();
        for p in [v(-1.0, 0.0), v(-3.0, 2.0), v(0.5, -1.0)] {
            assert_abs_diff_eq!(value_at(&g, p), -p.x - 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn separated_regime_violation_is_reported() {
        let q = disk(v(0.0, 0.0), 1.0);
        let o = disk(v(1.0, 0.0), 1.0);
        assert!(matches!(
            tvr_obstacle(&q, &o, TopologyClass::O1, Regime::Separated, unit(), 6),
            Err(VisibilityError::RegimeViolated { .. })
        ));
    }

    #[test]
    fn affine_in_decision_vector() {
        let iv = Interval::new(0.0, 1.5).unwrap();
        let q = ReachableSetTrajectory::new(
            crate::bernstein::PiecewiseBernstein::single(
                BernsteinSegment::planar(iv, &[v(0.0, 0.0), v(0.3, 0.2), v(1.0, 0.1), v(1.5, -0.4)]).unwrap(),
            ),
            BernsteinSegment::scalar(iv, vec![0.3, 0.3, 0.9]).unwrap(),
            0.3,
        );
        let o = ReachableSetTrajectory::static_disk(v(5.0, 1.0), 0.6, 1.5).unwrap();
        let g = tvr_obstacle(&q, &o, TopologyClass::O2, Regime::Separated, iv, 6).unwrap();
        let xs: Vec<Vec<f64>> = (0..3)
            .map(|k| (0..14).map(|i| ((i * 7 + k * 13) % 11) as f64 * 0.3 - 1.0).collect())
            .collect();
        let f = |x: &[f64]| g.coefficients(x).unwrap().axis_coeffs(0).to_vec();
        let mid: Vec<f64> = xs[0].iter().zip(&xs[1]).map(|(a, b)| 0.5 * (a + b)).collect();
        let (fa, fb, fm) = (f(&xs[0]), f(&xs[1]), f(&mid));
        for k in 0..fa.len() {
            assert_abs_diff_eq!(fm[k], 0.5 * (fa[k] + fb[k]), epsilon = 1e-9);
        }
        assert!(g.coefficients(&xs[2][..5]).is_err());
    }

    #[test]
    fn fov_geometry_examples() {
        let (q1, q2) = (v(0.0, 0.0), v(2.0, 0.0));
        let g = fov_geometry(q1, q2, FRAC_PI_2).unwrap();
        assert_abs_diff_eq!(g.centers[0], v(1.0, 0.0), epsilon = 1e-12);
        assert_abs_diff_eq!(g.centers[1], v(1.0, 0.0), epsilon = 1e-12);
        assert_abs_diff_eq!(g.radius, 1.0, epsilon = 1e-12);
        assert_eq!(g.mode, DeadZoneMode::Intersection);

        let g = fov_geometry(q1, q2, FRAC_PI_3).unwrap();
        let s = 1.0 / 3f64.sqrt();
        assert_abs_diff_eq!(g.centers[0], v(1.0, -s), epsilon = 1e-12);
        assert_abs_diff_eq!(g.centers[1], v(1.0, s), epsilon = 1e-12);
        assert_abs_diff_eq!(g.radius, 2.0 * s, epsilon = 1e-12);
        assert_eq!(g.mode, DeadZoneMode::Union);
        for c in g.centers {
            assert_abs_diff_eq!((c - q1).norm(), g.radius, epsilon = 1e-12);
            assert_abs_diff_eq!((c - q2).norm(), g.radius, epsilon = 1e-12);
        }
        assert!(fov_geometry(q1, q1, FRAC_PI_3).is_err());
        assert!(fov_geometry(q1, q2, 0.0).is_err());
    }

    #[test]
    fn fov_constraint_examples() {
        let t1 = disk(v(0.0, 0.0), 0.3);
        let t2 = disk(v(2.0, 0.0), 0.3);
        let g = tvr_fov(&t1, &t2, FRAC_PI_2, TopologyClass::F2, unit(), 6).unwrap();
        assert_abs_diff_eq!(value_at(&g, v(1.0, 2.0)), 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(inscribed_angle(v(1.0, 2.0), t1.center_at(0.0), t2.center_at(0.0)).to_degrees(), 53.130102, epsilon = 1e-5);
        assert_abs_diff_eq!(value_at(&g, v(1.0, 0.5)), -1.0, epsilon = 1e-9);
        assert!(inscribed_angle(v(1.0, 0.5), v(0.0, 0.0), v(2.0, 0.0)) > FRAC_PI_2);
        // Boundary: y = k |d|^2 / |d| = 1 on the perpendicular bisector.
        let boundary = v(1.0, 1.0);
        assert_abs_diff_eq!(value_at(&g, boundary), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(inscribed_angle(boundary, v(0.0, 0.0), v(2.0, 0.0)), FRAC_PI_2, epsilon = 1e-9);
    }

    #[test]
    fn collision_example() {
        let o = disk(v(0.0, 0.0), 1.0);
        let prev = BernsteinSegment::constant_point(unit(), v(3.0, 0.0));
        let g = collision_halfspace(&prev, &o, 0.4, 6).unwrap();
        for p in [v(3.0, 0.0), v(1.4, 5.0), v(-2.0, 1.0)] {
            assert_abs_diff_eq!(value_at(&g, p), 3.0 * (p.x - 1.4), epsilon = 1e-9);
        }
        assert_abs_diff_eq!(value_at(&g, v(3.0, 0.0)), 4.8, epsilon = 1e-9);
    }

    #[test]
    fn targets_as_mutual_occluders() {
        let t1 = disk(v(-1.0, 0.0), 0.3);
        let t2 = disk(v(1.0, 0.0), 0.3);
        let drone = v(0.0, 4.0);
        let classes = [
            topology_class_obstacle(drone, v(-1.0, 0.0), v(1.0, 0.0)).unwrap(),
            topology_class_obstacle(drone, v(1.0, 0.0), v(-1.0, 0.0)).unwrap(),
        ];
        let [a, b] = also_target_as_obstacle([&t1, &t2], classes, Regime::Separated, unit(), 6).unwrap();
        assert_abs_diff_eq!(value_at(&a, drone), value_at(&b, drone), epsilon = 1e-9);
        assert!(value_at(&a, drone) > 0.0);

        // Behind target 2 on the line of centers: target 1 is hidden.
        let behind = v(4.0, 0.01);
        let classes = [
            topology_class_obstacle(behind, v(-1.0, 0.0), v(1.0, 0.0)).unwrap(),
            topology_class_obstacle(behind, v(1.0, 0.0), v(-1.0, 0.0)).unwrap(),
        ];
        let [a, _] = also_target_as_obstacle([&t1, &t2], classes, Regime::Separated, unit(), 6).unwrap();
        assert!(value_at(&a, behind) < 0.0);
        assert!(segment_hits_disk(behind, v(-1.0, 0.0), v(1.0, 0.0), 0.3));
    }

    #[test]
    fn point_segment_distance_cases() {
        assert_abs_diff_eq!(point_segment_distance(v(2.0, 3.0), v(0.0, 0.0), v(4.0, 0.0)), 3.0);
        assert_abs_diff_eq!(point_segment_distance(v(-3.0, 4.0), v(0.0, 0.0), v(4.0, 0.0)), 5.0);
        assert_abs_diff_eq!(point_segment_distance(v(1.0, 1.0), v(0.0, 0.0), v(0.0, 0.0)), 2f64.sqrt());
    }
}
