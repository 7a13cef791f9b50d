//! Reachable-set forecasting for moving objects.
//!
//! Endpoints are sampled from the constant-velocity error propagation,
//! joined to the current state by minimum-jerk primitives, screened against
//! obstacles with the Bernstein coefficient certificate, and finally wrapped
//! in a disk whose radius grows quadratically in time.

use nalgebra::{DMatrix, Matrix2, Matrix4, SymmetricEigen, Vector2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::bernstein::{
    interpolate_fn, BernsteinError, BernsteinSegment, Continuity, Interval, PiecewiseBernstein,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredictionError {
    #[error("covariance is not symmetric positive semidefinite")]
    InvalidCovariance,
    #[error("primitive degree must be at least 3, got {0}")]
    DegreeTooLow(usize),
    #[error("at least one endpoint sample is required")]
    NoSamples,
    #[error("body radius must be positive, got {0}")]
    InvalidRadius(f64),
    #[error("outlier ratio must lie in [0, 1), got {0}")]
    InvalidOutlierRatio(f64),
    #[error(transparent)]
    Bernstein(#[from] BernsteinError),
}

pub type Result<T> = std::result::Result<T, PredictionError>;

/// Current estimate of a moving object.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectObservation {
    pub position: Vector2<f64>,
    pub velocity: Vector2<f64>,
    /// Joint `[position; velocity]` error covariance.
    pub covariance: Matrix4<f64>,
    pub body_radius: f64,
}

impl ObjectObservation {
    pub fn exact(position: Vector2<f64>, velocity: Vector2<f64>, body_radius: f64) -> Self {
        Self { position, velocity, covariance: Matrix4::zeros(), body_radius }
    }
}

/// Acceleration white-noise covariance of the constant-velocity model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcessNoise {
    pub accel_covariance: Matrix2<f64>,
}

impl ProcessNoise {
    pub fn isotropic(variance: f64) -> Self {
        Self { accel_covariance: Matrix2::identity() * variance }
    }
}

impl Default for ProcessNoise {
    fn default() -> Self {
        Self::isotropic(1.0)
    }
}

fn is_psd(m: DMatrix<f64>) -> bool {
    if m.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let scale = m.amax().max(1.0);
    if (&m - m.transpose()).amax() > 1e-9 * scale {
        return false;
    }
    m.symmetric_eigenvalues().iter().all(|&l| l >= -1e-9 * scale)
}

fn dyn_matrix<const N: usize>(m: &nalgebra::SMatrix<f64, N, N>) -> DMatrix<f64> {
    DMatrix::from_column_slice(N, N, m.as_slice())
}

/// Closed-form solution of the constant-velocity covariance Riccati
/// equation at time `t`.
pub fn propagate_covariance(p0: &Matrix4<f64>, noise: &ProcessNoise, t: f64) -> Result<Matrix4<f64>> {
    if !is_psd(dyn_matrix(p0)) || !is_psd(dyn_matrix(&noise.accel_covariance)) || !(t >= 0.0) {
        return Err(PredictionError::InvalidCovariance);
    }
    let mut phi = Matrix4::identity();
    phi.fixed_view_mut::<2, 2>(0, 2).copy_from(&(Matrix2::identity() * t));
    let q = noise.accel_covariance;
    let mut integral = Matrix4::zeros();
    integral.fixed_view_mut::<2, 2>(0, 0).copy_from(&(q * (t.powi(3) / 3.0)));
    integral.fixed_view_mut::<2, 2>(0, 2).copy_from(&(q * (t * t / 2.0)));
    integral.fixed_view_mut::<2, 2>(2, 0).copy_from(&(q * (t * t / 2.0)));
    integral.fixed_view_mut::<2, 2>(2, 2).copy_from(&(q * t));
    Ok(phi * p0 * phi.transpose() + integral)
}

/// Symmetric square root with negative eigenvalues clamped to zero.
fn psd_sqrt(m: &Matrix2<f64>) -> Matrix2<f64> {
    let sym = 0.5 * (m + m.transpose());
    let eig = SymmetricEigen::new(sym);
    let d = Matrix2::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
    eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// Position-block standard deviation along the worst direction.
fn max_position_std(cov: &Matrix4<f64>) -> f64 {
    let block: Matrix2<f64> = cov.fixed_view::<2, 2>(0, 0).into();
    let eig = SymmetricEigen::new(0.5 * (block + block.transpose()));
    eig.eigenvalues.max().max(0.0).sqrt()
}

/// Draws `count` endpoints from the propagated position distribution at
/// the horizon. Deterministic in `seed`.
pub fn sample_endpoints(
    obs: &ObjectObservation,
    noise: &ProcessNoise,
    horizon: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<Vector2<f64>>> {
    if count == 0 {
        return Err(PredictionError::NoSamples);
    }
    let cov = propagate_covariance(&obs.covariance, noise, horizon)?;
    let block: Matrix2<f64> = cov.fixed_view::<2, 2>(0, 0).into();
    let root = psd_sqrt(&block);
    let mean = obs.position + obs.velocity * horizon;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            let z = Vector2::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
            mean + root * z
        })
        .collect())
}

/// Minimum-jerk primitive from `(position, velocity)` to `endpoint` over
/// `[0, horizon]`, expressed with `degree + 1` control points.
pub fn min_jerk_primitive(
    position: Vector2<f64>,
    velocity: Vector2<f64>,
    endpoint: Vector2<f64>,
    horizon: f64,
    degree: usize,
) -> Result<BernsteinSegment> {
    if degree < 3 {
        return Err(PredictionError::DegreeTooLow(degree));
    }
    let interval = Interval::new(0.0, horizon)?;
    let lead = velocity * (horizon / 3.0);
    let points = [
        position,
        position + lead,
        position * (2.0 / 3.0) + endpoint / 3.0 + lead,
        endpoint,
    ];
    Ok(BernsteinSegment::planar(interval, &points)?.elevate(degree)?)
}

/// A time-varying disk `B(center(t), radius(t))` over the prediction horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct ReachableSetTrajectory {
    center: PiecewiseBernstein,
    radius: BernsteinSegment,
    body_radius: f64,
}

impl ReachableSetTrajectory {
    pub fn new(center: PiecewiseBernstein, radius: BernsteinSegment, body_radius: f64) -> Self {
        Self { center, radius, body_radius }
    }

    /// A static disk, used for cylinder obstacles.
    pub fn static_disk(center: Vector2<f64>, radius: f64, horizon: f64) -> Result<Self> {
        let interval = Interval::new(0.0, horizon)?;
        Ok(Self {
            center: PiecewiseBernstein::single(BernsteinSegment::constant_point(interval, center)),
            radius: BernsteinSegment::constant(interval, &[radius]),
            body_radius: radius,
        })
    }

    pub fn center(&self) -> &PiecewiseBernstein {
        &self.center
    }

    pub fn radius(&self) -> &BernsteinSegment {
        &self.radius
    }

    pub fn body_radius(&self) -> f64 {
        self.body_radius
    }

    pub fn horizon(&self) -> f64 {
        self.center.end()
    }

    pub fn center_at(&self, t: f64) -> Vector2<f64> {
        self.center.eval2(t.clamp(self.center.start(), self.center.end())).expect("time clamped")
    }

    pub fn radius_at(&self, t: f64) -> f64 {
        let iv = self.radius.interval();
        self.radius.eval_scalar(t.clamp(iv.start(), iv.end())).expect("time clamped")
    }

    pub fn contains(&self, point: Vector2<f64>, t: f64) -> bool {
        (point - self.center_at(t)).norm() <= self.radius_at(t)
    }

    /// Center restricted to `[a, b]` (must not straddle a center knot).
    pub fn center_on(&self, a: f64, b: f64) -> Result<BernsteinSegment> {
        Ok(self.center.restrict(a, b)?)
    }

    pub fn radius_on(&self, a: f64, b: f64) -> Result<BernsteinSegment> {
        Ok(self.radius.restrict(a, b)?)
    }

    /// True when every radius coefficient covers the body radius.
    pub fn radius_is_certified(&self) -> bool {
        self.radius.axis_coeffs(0).iter().all(|&c| c >= self.body_radius - 1e-12)
    }
}

/// Candidate trajectories of one object.
#[derive(Debug, Clone)]
pub struct PrimitiveSet {
    pub endpoints: Vec<Vector2<f64>>,
    pub primitives: Vec<BernsteinSegment>,
    pub safe: Vec<bool>,
}

impl PrimitiveSet {
    pub fn build(
        obs: &ObjectObservation,
        endpoints: Vec<Vector2<f64>>,
        horizon: f64,
        degree: usize,
    ) -> Result<Self> {
        let primitives = endpoints
            .iter()
            .map(|&s| min_jerk_primitive(obs.position, obs.velocity, s, horizon, degree))
            .collect::<Result<Vec<_>>>()?;
        let safe = vec![true; endpoints.len()];
        Ok(Self { endpoints, primitives, safe })
    }

    pub fn safe_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.safe.iter().enumerate().filter(|(_, &s)| s).map(|(i, _)| i)
    }

    pub fn safe_count(&self) -> usize {
        self.safe.iter().filter(|&&s| s).count()
    }
}

/// Bernstein form of `‖p(t) - o(t)‖² - (r_body + r_o(t))²`, one scalar
/// segment per piece of the obstacle's center.
pub fn clearance_polynomial(
    primitive: &BernsteinSegment,
    obstacle: &ReachableSetTrajectory,
    body_radius: f64,
) -> Result<Vec<BernsteinSegment>> {
    let mut out = Vec::with_capacity(obstacle.center.segments().len());
    let iv = primitive.interval();
    for seg in obstacle.center.segments() {
        let a = seg.interval().start().max(iv.start());
        let b = seg.interval().end().min(iv.end());
        if b <= a {
            continue;
        }
        let p = primitive.restrict(a, b)?;
        let o = seg.restrict(a, b)?;
        let rel = p.sub(&o)?;
        let reach = obstacle.radius.restrict(a, b)?.offset(body_radius);
        out.push(rel.squared_norm().sub(&reach.multiply(&reach)?)?);
    }
    Ok(out)
}

struct ObstacleTerm {
    center: BernsteinSegment,
    reach_sq: BernsteinSegment,
}

/// Marks a primitive safe iff every clearance polynomial against every
/// obstacle has nonnegative coefficients.
pub fn collision_filter(
    prims: &PrimitiveSet,
    obstacles: &[ReachableSetTrajectory],
    body_radius: f64,
) -> Result<Vec<bool>> {
    if obstacles.is_empty() {
        return Ok(vec![true; prims.primitives.len()]);
    }
    let horizon_iv = match prims.primitives.first() {
        Some(p) => p.interval(),
        None => return Ok(Vec::new()),
    };
    // Fast path: obstacles whose center is one segment on the same interval.
    let mut simple = Vec::new();
    let mut complex = Vec::new();
    for obs in obstacles {
        let segs = obs.center.segments();
        if segs.len() == 1 && segs[0].interval() == horizon_iv && obs.radius.interval() == horizon_iv
        {
            let reach = obs.radius.offset(body_radius);
            simple.push(ObstacleTerm { center: segs[0].clone(), reach_sq: reach.multiply(&reach)? });
        } else {
            complex.push(obs);
        }
    }
    prims
        .primitives
        .iter()
        .map(|p| {
            for term in &simple {
                let poly = p.sub(&term.center)?.squared_norm().sub(&term.reach_sq)?;
                if !poly.nonneg_certificate()? {
                    return Ok(false);
                }
            }
            for obs in &complex {
                for poly in clearance_polynomial(p, obs, body_radius)? {
                    if !poly.nonneg_certificate()? {
                        return Ok(false);
                    }
                }
            }
            Ok(true)
        })
        .collect()
}

/// Index of the safe endpoint with the smallest summed distance to the
/// other safe endpoints; ties go to the lowest index. `None` when no
/// primitive is safe.
pub fn select_center(prims: &PrimitiveSet) -> Option<usize> {
    let safe: Vec<usize> = prims.safe_indices().collect();
    let mut best: Option<(usize, f64)> = None;
    for &i in &safe {
        let si = prims.endpoints[i];
        let total: f64 = safe.iter().map(|&j| (si - prims.endpoints[j]).norm()).sum();
        match best {
            Some((_, b)) if total >= b => {}
            _ => best = Some((i, total)),
        }
    }
    best.map(|(i, _)| i)
}

/// Radius `max_j ‖s_c - s_j‖ t²/T² + r_body` over the safe set, as a
/// degree-2 Bernstein segment on `[0, horizon]`.
pub fn compute_radius(
    center_idx: usize,
    prims: &PrimitiveSet,
    body_radius: f64,
    horizon: f64,
) -> Result<BernsteinSegment> {
    let sc = prims.endpoints[center_idx];
    let spread = prims
        .safe_indices()
        .map(|j| (sc - prims.endpoints[j]).norm())
        .fold(0.0f64, f64::max);
    let interval = Interval::new(0.0, horizon)?;
    Ok(BernsteinSegment::scalar(interval, vec![body_radius, body_radius, body_radius + spread])?)
}

/// Safe mask with the `ceil(ratio * |safe|)` endpoints farthest from the
/// center endpoint removed. The center itself is never removed.
pub fn trim_outliers(prims: &PrimitiveSet, center_idx: usize, ratio: f64) -> Result<Vec<bool>> {
    if !(0.0..1.0).contains(&ratio) {
        return Err(PredictionError::InvalidOutlierRatio(ratio));
    }
    let mut mask = prims.safe.clone();
    let safe: Vec<usize> = prims.safe_indices().collect();
    let remove = ((ratio * safe.len() as f64).ceil() as usize).min(safe.len().saturating_sub(1));
    if remove == 0 {
        return Ok(mask);
    }
    let sc = prims.endpoints[center_idx];
    let mut ranked: Vec<(f64, usize)> = safe
        .iter()
        .filter(|&&j| j != center_idx)
        .map(|&j| ((sc - prims.endpoints[j]).norm(), j))
        .collect();
    ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(b.1.cmp(&a.1)));
    for &(_, j) in ranked.iter().take(remove) {
        mask[j] = false;
    }
    Ok(mask)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionParams {
    pub horizon: f64,
    pub samples: usize,
    pub primitive_degree: usize,
    pub outlier_ratio: f64,
    pub seed: u64,
}

impl Default for PredictionParams {
    fn default() -> Self {
        Self { horizon: 1.5, samples: 1000, primitive_degree: 3, outlier_ratio: 0.0, seed: 0 }
    }
}

/// Everything produced by one prediction run.
#[derive(Debug, Clone)]
pub struct PredictionOutcome {
    pub reachable: ReachableSetTrajectory,
    pub primitives: PrimitiveSet,
    pub center_index: Option<usize>,
    pub fallback: bool,
}

/// Reachable set of one object among `obstacles`.
pub fn predict(
    obs: &ObjectObservation,
    noise: &ProcessNoise,
    obstacles: &[ReachableSetTrajectory],
    params: &PredictionParams,
) -> Result<ReachableSetTrajectory> {
    Ok(predict_detailed(obs, noise, obstacles, params)?.reachable)
}

pub fn predict_detailed(
    obs: &ObjectObservation,
    noise: &ProcessNoise,
    obstacles: &[ReachableSetTrajectory],
    params: &PredictionParams,
) -> Result<PredictionOutcome> {
    if !(obs.body_radius > 0.0) {
        return Err(PredictionError::InvalidRadius(obs.body_radius));
    }
    let endpoints = sample_endpoints(obs, noise, params.horizon, params.samples, params.seed)?;
    let mut prims = PrimitiveSet::build(obs, endpoints, params.horizon, params.primitive_degree)?;
    prims.safe = collision_filter(&prims, obstacles, obs.body_radius)?;

    let Some(center_idx) = select_center(&prims) else {
        let reachable = constant_velocity_fallback(obs, noise, params.horizon)?;
        return Ok(PredictionOutcome { reachable, primitives: prims, center_index: None, fallback: true });
    };
    prims.safe = trim_outliers(&prims, center_idx, params.outlier_ratio)?;
    let radius = compute_radius(center_idx, &prims, obs.body_radius, params.horizon)?;
    let center = PiecewiseBernstein::single(prims.primitives[center_idx].clone());
    Ok(PredictionOutcome {
        reachable: ReachableSetTrajectory::new(center, radius, obs.body_radius),
        primitives: prims,
        center_index: Some(center_idx),
        fallback: false,
    })
}

const FALLBACK_RADIUS_DEGREE: usize = 6;

/// Constant-velocity disk with radius `r_body + 3σ(t)`, used when no
/// primitive survives the collision screen.
pub fn constant_velocity_fallback(
    obs: &ObjectObservation,
    noise: &ProcessNoise,
    horizon: f64,
) -> Result<ReachableSetTrajectory> {
    let interval = Interval::new(0.0, horizon)?;
    let center = BernsteinSegment::planar(
        interval,
        &[obs.position, obs.position + obs.velocity * horizon],
    )?;
    let mut sigma_err = None;
    let radius = interpolate_fn(interval, FALLBACK_RADIUS_DEGREE, |t| {
        match propagate_covariance(&obs.covariance, noise, t) {
            Ok(cov) => obs.body_radius + 3.0 * max_position_std(&cov),
            Err(e) => {
                sigma_err = Some(e);
                obs.body_radius
            }
        }
    })?;
    if let Some(e) = sigma_err {
        return Err(e);
    }
    // Raising coefficients only enlarges the disk.
    let coeffs = radius.axis_coeffs(0).iter().map(|&c| c.max(obs.body_radius)).collect();
    let radius = BernsteinSegment::scalar(interval, coeffs)?;
    Ok(ReachableSetTrajectory::new(
        PiecewiseBernstein::new(vec![center], Continuity::C2)?,
        radius,
        obs.body_radius,
    ))
}
