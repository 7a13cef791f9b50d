//! Visibility-seeking reference points and the reference trajectory the
//! planner tracks.

use std::f64::consts::FRAC_PI_2;

use nalgebra::Vector2;
use thiserror::Error;

use crate::bernstein::{interpolate_to_bernstein, BernsteinError, BernsteinSegment, Interval};
use crate::visibility::{point_segment_distance, TopologyClass};

/// Floor on the distance used for inverse-distance weights.
pub const WEIGHT_DISTANCE_FLOOR: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReferenceError {
    #[error("screen ratio must be positive, got {0}")]
    InvalidRatio(f64),
    #[error("coincident targets")]
    CoincidentTargets,
    #[error("class {0:?} does not apply here")]
    WrongClass(TopologyClass),
    #[error("knots must start at 0 and increase")]
    InvalidKnots,
    #[error(transparent)]
    Bernstein(#[from] BernsteinError),
}

pub type Result<T> = std::result::Result<T, ReferenceError>;

/// Distance to a disk, zero inside it.
pub fn edf(point: Vector2<f64>, center: Vector2<f64>, radius: f64) -> f64 {
    ((point - center).norm() - radius).max(0.0)
}

/// Clearance of a line of sight from an obstacle, in meters.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct VisibilityScore(pub f64);

impl VisibilityScore {
    pub fn value(self) -> f64 {
        self.0
    }
}

pub fn visibility_score(
    drone: Vector2<f64>,
    target: Vector2<f64>,
    center: Vector2<f64>,
    radius: f64,
) -> VisibilityScore {
    VisibilityScore((point_segment_distance(center, drone, target) - radius).max(0.0))
}

pub fn inverse_distance_weight(a: Vector2<f64>, b: Vector2<f64>) -> f64 {
    1.0 / (a - b).norm().max(WEIGHT_DISTANCE_FLOOR)
}

/// Direction from the target to its preferred standoff point against one
/// obstacle: perpendicular to the obstacle-target line on the class side.
pub fn standoff_angle(target: Vector2<f64>, obstacle: Vector2<f64>, class: TopologyClass) -> Result<f64> {
    let d = target - obstacle;
    let base = d.y.atan2(d.x);
    match class {
        TopologyClass::O1 => Ok(base - FRAC_PI_2),
        TopologyClass::O2 => Ok(base + FRAC_PI_2),
        other => Err(ReferenceError::WrongClass(other)),
    }
}

/// Obstacle center at the query time, its class, and its blend weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleTerm {
    pub center: Vector2<f64>,
    pub class: TopologyClass,
    pub weight: f64,
}

/// Single-target reference point: weighted mean of per-obstacle standoff
/// points at distance `r_d`. Without obstacles keeps the current bearing.
pub fn single_ref(
    target: Vector2<f64>,
    obstacles: &[ObstacleTerm],
    drone: Vector2<f64>,
    r_d: f64,
) -> Result<Vector2<f64>> {
    if obstacles.is_empty() {
        let d = drone - target;
        let dir = if d.norm() > 0.0 { d / d.norm() } else { Vector2::new(1.0, 0.0) };
        return Ok(target + dir * r_d);
    }
    let mut acc = Vector2::zeros();
    let mut total = 0.0;
    for term in obstacles {
        let delta = standoff_angle(target, term.center, term.class)?;
        acc += term.weight * (target + r_d * Vector2::new(delta.cos(), delta.sin()));
        total += term.weight;
    }
    Ok(acc / total)
}

/// Circle on which the two targets appear with screen ratio `1:γ_c:1`.
pub fn dual_ref_circle(
    q1: Vector2<f64>,
    q2: Vector2<f64>,
    theta_f: f64,
    gamma_c: f64,
    class: TopologyClass,
) -> Result<(Vector2<f64>, f64)> {
    if !(gamma_c > 0.0) {
        return Err(ReferenceError::InvalidRatio(gamma_c));
    }
    let sign = match class {
        TopologyClass::F1 => 1.0,
        TopologyClass::F2 => -1.0,
        other => return Err(ReferenceError::WrongClass(other)),
    };
    let (k1, k2) = dual_circle_factors(theta_f, gamma_c);
    let d = q2 - q1;
    let mid = 0.5 * (q1 + q2);
    Ok((mid + sign * k1 * Vector2::new(d.y, -d.x), k2 * d.norm()))
}

fn dual_circle_factors(theta_f: f64, gamma_c: f64) -> (f64, f64) {
    let half = 0.5 * theta_f;
    let lead = (gamma_c + 2.0) / (4.0 * gamma_c) / half.tan();
    let ratio = (gamma_c / (gamma_c + 2.0) * half.tan()).powi(2);
    (lead * (1.0 - ratio), lead * (1.0 + ratio))
}

/// Direction from the circle center that faces away from the target chord.
pub fn mutual_angle(q1: Vector2<f64>, q2: Vector2<f64>, class: TopologyClass) -> Result<f64> {
    let d = q2 - q1;
    let base = d.y.atan2(d.x);
    match class {
        TopologyClass::F1 => Ok(base - FRAC_PI_2),
        TopologyClass::F2 => Ok(base + FRAC_PI_2),
        other => Err(ReferenceError::WrongClass(other)),
    }
}

/// Dual-target reference point on the screen-ratio circle. `terms` holds
/// `(angle, weight)` pairs for every target/obstacle pair.
#[allow(clippy::too_many_arguments)]
pub fn dual_ref(
    q1: Vector2<f64>,
    q2: Vector2<f64>,
    terms: &[(f64, f64)],
    theta_f: f64,
    gamma_c: f64,
    class: TopologyClass,
    mutual_weight: f64,
) -> Result<Vector2<f64>> {
    if q1 == q2 {
        return Err(ReferenceError::CoincidentTargets);
    }
    let (center, radius) = dual_ref_circle(q1, q2, theta_f, gamma_c, class)?;
    let dm = mutual_angle(q1, q2, class)?;
    let (mut s, mut c) = (mutual_weight * dm.sin(), mutual_weight * dm.cos());
    for &(angle, w) in terms {
        s += w * angle.sin();
        c += w * angle.cos();
    }
    let dd = if s.hypot(c) > 1e-12 { s.atan2(c) } else { dm };
    Ok(center + radius * Vector2::new(dd.cos(), dd.sin()))
}

/// Reference trajectory sampled at the interpolation nodes of each segment.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrajectory {
    pub samples: Vec<(f64, Vector2<f64>)>,
    pub segments: Vec<BernsteinSegment>,
}

/// `(1 - t/T) c0 + (t/T) μ(t)`, fitted per segment with degree `degree`.
pub fn blend_with_current(
    mu: impl Fn(f64) -> Vector2<f64>,
    drone: Vector2<f64>,
    knots: &[f64],
    degree: usize,
) -> Result<ReferenceTrajectory> {
    if knots.len() < 2 || knots[0] != 0.0 || knots.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ReferenceError::InvalidKnots);
    }
    let horizon = *knots.last().unwrap();
    let mut samples = Vec::new();
    let mut segments = Vec::with_capacity(knots.len() - 1);
    for w in knots.windows(2) {
        let interval = Interval::new(w[0], w[1])?;
        let nodes = interval.uniform_nodes(degree);
        let points: Vec<Vector2<f64>> = nodes
            .iter()
            .map(|&t| {
                let alpha = t / horizon;
                (1.0 - alpha) * drone + alpha * mu(t)
            })
            .collect();
        let xs: Vec<f64> = points.iter().map(|p| p.x).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.y).collect();
        let fx = interpolate_to_bernstein(&xs, interval)?;
        let fy = interpolate_to_bernstein(&ys, interval)?;
        segments.push(BernsteinSegment::new(
            interval,
            vec![fx.axis_coeffs(0).to_vec(), fy.axis_coeffs(0).to_vec()],
        )?);
        for (t, p) in nodes.into_iter().zip(points) {
            if samples.last().is_none_or(|&(last, _)| t > last) {
                samples.push((t, p));
            }
        }
    }
    Ok(ReferenceTrajectory { samples, segments })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn v(x: f64, y: f64) -> Vector2<f64> {
        Vector2::new(x, y)
    }

    #[test]
    fn edf_examples() {
        assert_abs_diff_eq!(edf(v(4.0, 0.0), v(0.0, 0.0), 1.0), 3.0);
        assert_eq!(edf(v(0.2, 0.1), v(0.0, 0.0), 1.0), 0.0);
    }

    #[test]
    fn edf_matches_raster() {
        let (center, radius) = (v(0.3, -0.2), 0.7);
        let cells = 1000;
        let h = 4.0 / cells as f64;
        // A coarse occupancy raster; distance to the nearest occupied cell center.
        let occupied: Vec<Vector2<f64>> = (0..cells)
            .flat_map(|i| (0..cells).map(move |j| (i, j)))
            .map(|(i, j)| v(-2.0 + (i as f64 + 0.5) * h, -2.0 + (j as f64 + 0.5) * h))
            .filter(|p| (p - center).norm() <= radius)
            .collect();
        for p in [v(1.7, 1.1), v(-1.5, 0.4), v(0.0, -1.9)] {
            let raster = occupied.iter().map(|o| (p - o).norm()).fold(f64::INFINITY, f64::min);
            assert!((raster - edf(p, center, radius)).abs() <= h * 2f64.sqrt());
        }
    }

    #[test]
    fn visibility_score_examples() {
        let s = visibility_score(v(4.0, 0.0), v(0.0, 0.0), v(2.0, 3.0), 1.0);
        assert_abs_diff_eq!(s.value(), 2.0, epsilon = 1e-12);
        assert_eq!(visibility_score(v(4.0, 0.0), v(0.0, 0.0), v(2.0, 0.5), 1.0).value(), 0.0);
        let (c, q, o) = (v(3.0, 1.0), v(-1.0, 0.5), v(0.5, 3.0));
        let s = visibility_score(c, q, o, 0.8).value();
        assert!(s <= edf(c, o, 0.8).min(edf(q, o, 0.8)));
    }

    #[test]
    fn single_ref_examples() {
        let term = ObstacleTerm { center: v(-2.0, 0.0), class: TopologyClass::O1, weight: 1.0 };
        let s = single_ref(v(0.0, 0.0), &[term], v(9.0, 9.0), 4.0).unwrap();
        assert_abs_diff_eq!(s, v(0.0, -4.0), epsilon = 1e-12);

        let a = ObstacleTerm { center: v(-2.0, 0.0), class: TopologyClass::O1, weight: 1.0 };
        let b = ObstacleTerm { center: v(2.0, 0.0), class: TopologyClass::O1, weight: 1.0 };
        let s = single_ref(v(0.0, 0.0), &[a, b], v(9.0, 9.0), 4.0).unwrap();
        assert_abs_diff_eq!(s, v(0.0, 0.0), epsilon = 1e-12);

        let s = single_ref(v(1.0, 1.0), &[], v(1.0, 3.0), 4.0).unwrap();
        assert_abs_diff_eq!(s, v(1.0, 5.0), epsilon = 1e-12);
    }

    #[test]
    fn standoff_points_are_at_distance_r_d() {
        for i in 0..50 {
            let q = v((i as f64 * 0.37).sin() * 3.0, (i as f64 * 0.91).cos() * 2.0);
            let o = q + v((i as f64).cos() * 2.5, (i as f64).sin() * 2.5);
            let class = if i % 2 == 0 { TopologyClass::O1 } else { TopologyClass::O2 };
            let term = ObstacleTerm { center: o, class, weight: 0.7 };
            let s = single_ref(q, &[term], v(0.0, 0.0), 3.5).unwrap();
            assert_abs_diff_eq!((s - q).norm(), 3.5, epsilon = 1e-9);
        }
    }

    #[test]
    fn dual_circle_example() {
        let (q1, q2) = (v(0.0, 0.0), v(2.0, 0.0));
        let (f, r) = dual_ref_circle(q1, q2, PI / 2.0, 1.0, TopologyClass::F1).unwrap();
        assert_abs_diff_eq!(f, v(1.0, -4.0 / 3.0), epsilon = 1e-12);
        assert_abs_diff_eq!(r, 5.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!((f - q1).norm(), r, epsilon = 1e-12);
        assert_abs_diff_eq!((f - q2).norm(), r, epsilon = 1e-12);
        let (f2, _) = dual_ref_circle(q1, q2, PI / 2.0, 1.0, TopologyClass::F2).unwrap();
        assert_abs_diff_eq!(f2, v(1.0, 4.0 / 3.0), epsilon = 1e-12);

        // Far point (1, -3): the chord subtends 2 atan(1/3), which puts the
        // targets at screen positions -1/2 and +1/2 of the half-width.
        let far = f + r * v(0.0, -1.0);
        assert_abs_diff_eq!(far, v(1.0, -3.0), epsilon = 1e-12);
        let angle = crate::visibility::inscribed_angle(far, q1, q2);
        assert_abs_diff_eq!(angle, 2.0 * (1.0f64 / 3.0).atan(), epsilon = 1e-12);
        let screen = (angle / 2.0).tan() / (PI / 4.0).tan();
        assert_abs_diff_eq!(screen, 1.0 / 3.0, epsilon = 1e-12);

        assert!(dual_ref_circle(q1, q2, PI / 2.0, 0.0, TopologyClass::F1).is_err());
    }

    #[test]
    fn dual_ref_blends() {
        let (q1, q2) = (v(0.0, 0.0), v(2.0, 0.0));
        let d = dual_ref(q1, q2, &[], PI / 2.0, 1.0, TopologyClass::F1, 1.0).unwrap();
        assert_abs_diff_eq!(d, v(1.0, -3.0), epsilon = 1e-12);

        let dominant = dual_ref(q1, q2, &[(0.0, 1e9)], PI / 2.0, 1.0, TopologyClass::F1, 1.0).unwrap();
        let (f, r) = dual_ref_circle(q1, q2, PI / 2.0, 1.0, TopologyClass::F1).unwrap();
        assert_abs_diff_eq!(dominant, f + v(r, 0.0), epsilon = 1e-6);

        let sym = [(0.3, 2.0), (0.3 + PI, 2.0)];
        let d = dual_ref(q1, q2, &sym, PI / 2.0, 1.0, TopologyClass::F1, 1.0).unwrap();
        assert_abs_diff_eq!(d, v(1.0, -3.0), epsilon = 1e-9);

        for (i, w) in [0.0, 0.5, 3.0].iter().enumerate() {
            let d = dual_ref(q1, q2, &[(i as f64, *w)], 2.0, 1.5, TopologyClass::F2, 1.0).unwrap();
            let (f, r) = dual_ref_circle(q1, q2, 2.0, 1.5, TopologyClass::F2).unwrap();
            assert_abs_diff_eq!((d - f).norm(), r, epsilon = 1e-12);
        }
    }

    #[test]
    fn blend_examples() {
        let target = v(4.0, -2.0);
        let c0 = v(1.0, 1.0);
        let r = blend_with_current(|_| target, c0, &[0.0, 0.5, 1.5], 6).unwrap();
        assert_abs_diff_eq!(r.segments[0].eval2(0.0).unwrap(), c0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.segments[1].eval2(1.5).unwrap(), target, epsilon = 1e-12);
        for i in 0..=30 {
            let t = 1.5 * i as f64 / 30.0;
            let seg = if t <= 0.5 { &r.segments[0] } else { &r.segments[1] };
            let line = c0 + (target - c0) * (t / 1.5);
            assert_abs_diff_eq!(seg.eval2(t).unwrap(), line, epsilon = 1e-9);
        }
        assert_eq!(r.samples.len(), 13);
        assert!(blend_with_current(|_| target, c0, &[0.1, 1.0], 6).is_err());
    }

    #[test]
    fn blend_reproduces_samples() {
        let mu = |t: f64| v((2.0 * t).sin() * 3.0, t * t);
        let r = blend_with_current(mu, v(0.0, 0.0), &[0.0, 0.7, 1.5], 6).unwrap();
        for &(t, p) in &r.samples {
            let seg = if t <= 0.7 { &r.segments[0] } else { &r.segments[1] };
            assert_abs_diff_eq!(seg.eval2(t).unwrap(), p, epsilon = 1e-9);
        }
    }
}
