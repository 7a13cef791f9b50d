//! Bernstein-form polynomial algebra.
//!
//! A [`BernsteinSegment`] stores one control-point sequence per axis over a
//! closed time interval. All operations are exact in the sense that they
//! return another Bernstein polynomial representing the same function
//! (up to floating-point rounding); no sampling is involved except in
//! [`interpolate_to_bernstein`], which is an interpolation by definition.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, Vector2};
use thiserror::Error;

/// Pointwise agreement tolerance for split/elevate/multiply round trips.
pub const EVAL_TOLERANCE: f64 = 1e-10;
/// Width below which root refinement stops.
pub const ROOT_TOLERANCE: f64 = 1e-9;
/// Largest interpolation degree accepted by [`interpolate_to_bernstein`].
pub const MAX_INTERPOLATION_DEGREE: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BernsteinError {
    #[error("degenerate interval [{start}, {end}]")]
    DegenerateInterval { start: f64, end: f64 },
    #[error("basis index {index} exceeds degree {degree}")]
    InvalidIndex { index: usize, degree: usize },
    #[error("time {t} lies outside [{start}, {end}]")]
    OutOfInterval { t: f64, start: f64, end: f64 },
    #[error("split point {tau} must lie strictly inside [{start}, {end}]")]
    InvalidSplit { tau: f64, start: f64, end: f64 },
    #[error("target degree {target} is below current degree {degree}")]
    InvalidElevation { target: usize, degree: usize },
    #[error("operands are defined on different intervals")]
    IntervalMismatch,
    #[error("axis count mismatch: {left} vs {right}")]
    AxisMismatch { left: usize, right: usize },
    #[error("operation requires a scalar polynomial, got {axes} axes")]
    NotScalar { axes: usize },
    #[error("axis {axis} has {found} coefficients, expected {expected}")]
    CoefficientCount { axis: usize, found: usize, expected: usize },
    #[error("empty coefficient set")]
    Empty,
    #[error("interpolation degree {0} exceeds the conditioning limit of {MAX_INTERPOLATION_DEGREE}")]
    IllConditioned(usize),
    #[error("polynomial is identically zero")]
    IdenticallyZero,
    #[error("jerk Gram matrix requires degree >= 3, got {0}")]
    DegreeTooLow(usize),
    #[error("knots must be strictly increasing and match the segments")]
    InvalidKnots,
}

pub type Result<T> = std::result::Result<T, BernsteinError>;

/// Binomial coefficient as a float. Exact for every `n` used here (n < 60).
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

/// Closed time interval `[start, end]` with `start < end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    start: f64,
    end: f64,
}

impl Interval {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !(start.is_finite() && end.is_finite() && start < end) {
            return Err(BernsteinError::DegenerateInterval { start, end });
        }
        Ok(Self { start, end })
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.start + self.end)
    }

    /// Maps `t` to the unit parameter `(t - start) / (end - start)`.
    pub fn normalize(&self, t: f64) -> f64 {
        (t - self.start) / self.duration()
    }

    pub fn contains(&self, t: f64) -> bool {
        let slack = 1e-12 * (1.0 + t.abs());
        t >= self.start - slack && t <= self.end + slack
    }

    /// `count + 1` uniformly spaced nodes `(1 - l/count) start + (l/count) end`.
    pub fn uniform_nodes(&self, count: usize) -> Vec<f64> {
        if count == 0 {
            return vec![self.start];
        }
        (0..=count)
            .map(|l| {
                let s = l as f64 / count as f64;
                (1.0 - s) * self.start + s * self.end
            })
            .collect()
    }

    fn approx_eq(&self, other: &Interval) -> bool {
        let tol = 1e-12 * (1.0 + self.start.abs().max(self.end.abs()));
        (self.start - other.start).abs() <= tol && (self.end - other.end).abs() <= tol
    }
}

/// Bernstein basis polynomial `B_{k,n}(t; t_a, t_b)`.
pub fn basis_eval(k: usize, n: usize, t: f64, t_a: f64, t_b: f64) -> Result<f64> {
    if k > n {
        return Err(BernsteinError::InvalidIndex { index: k, degree: n });
    }
    let interval = Interval::new(t_a, t_b)?;
    let s = interval.normalize(t);
    Ok(binomial(n, k) * (1.0 - s).powi((n - k) as i32) * s.powi(k as i32))
}

// ---------------------------------------------------------------------------
// Coefficient-level kernels shared by the segment methods.

fn de_casteljau(coeffs: &[f64], s: f64) -> f64 {
    let mut work: Vec<f64> = coeffs.to_vec();
    let n = work.len();
    for level in 1..n {
        for i in 0..n - level {
            work[i] = (1.0 - s) * work[i] + s * work[i + 1];
        }
    }
    work[0]
}

fn elevate_coeffs(coeffs: &[f64], target: usize) -> Vec<f64> {
    let n = coeffs.len() - 1;
    if target == n {
        return coeffs.to_vec();
    }
    let r = target - n;
    (0..=target)
        .map(|i| {
            let lo = i.saturating_sub(r);
            let hi = i.min(n);
            let mut acc = 0.0;
            for (j, c) in coeffs.iter().enumerate().take(hi + 1).skip(lo) {
                acc += binomial(n, j) * binomial(r, i - j) * c;
            }
            acc / binomial(target, i)
        })
        .collect()
}

fn multiply_coeffs(p: &[f64], q: &[f64]) -> Vec<f64> {
    let np = p.len() - 1;
    let nq = q.len() - 1;
    let n = np + nq;
    let wp: Vec<f64> = (0..=np).map(|l| binomial(np, l)).collect();
    let wq: Vec<f64> = (0..=nq).map(|l| binomial(nq, l)).collect();
    (0..=n)
        .map(|k| {
            let lo = k.saturating_sub(nq);
            let hi = k.min(np);
            let mut acc = 0.0;
            for l in lo..=hi {
                acc += wp[l] * wq[k - l] * p[l] * q[k - l];
            }
            acc / binomial(n, k)
        })
        .collect()
}

fn split_coeffs(coeffs: &[f64], s: f64) -> (Vec<f64>, Vec<f64>) {
    let n = coeffs.len();
    let mut work = coeffs.to_vec();
    let mut left = Vec::with_capacity(n);
    let mut right = vec![0.0; n];
    left.push(work[0]);
    right[n - 1] = work[n - 1];
    for level in 1..n {
        for i in 0..n - level {
            work[i] = (1.0 - s) * work[i] + s * work[i + 1];
        }
        left.push(work[0]);
        right[n - 1 - level] = work[n - 1 - level];
    }
    (left, right)
}

fn sign_variations(coeffs: &[f64], zero_tol: f64) -> usize {
    let mut last = 0.0f64;
    let mut count = 0;
    for &c in coeffs {
        if c.abs() <= zero_tol {
            continue;
        }
        if last != 0.0 && (c > 0.0) != (last > 0.0) {
            count += 1;
        }
        last = c;
    }
    count
}

// ---------------------------------------------------------------------------

/// One polynomial piece in Bernstein form with one coefficient row per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct BernsteinSegment {
    interval: Interval,
    coeffs: Vec<Vec<f64>>,
}

impl BernsteinSegment {
    pub fn new(interval: Interval, coeffs: Vec<Vec<f64>>) -> Result<Self> {
        let first = coeffs.first().ok_or(BernsteinError::Empty)?;
        let expected = first.len();
        if expected == 0 {
            return Err(BernsteinError::Empty);
        }
        for (axis, row) in coeffs.iter().enumerate() {
            if row.len() != expected {
                return Err(BernsteinError::CoefficientCount { axis, found: row.len(), expected });
            }
        }
        Ok(Self { interval, coeffs })
    }

    pub fn scalar(interval: Interval, coeffs: Vec<f64>) -> Result<Self> {
        Self::new(interval, vec![coeffs])
    }

    /// Planar segment from a list of 2D control points.
    pub fn planar(interval: Interval, points: &[Vector2<f64>]) -> Result<Self> {
        let xs = points.iter().map(|p| p.x).collect();
        let ys = points.iter().map(|p| p.y).collect();
        Self::new(interval, vec![xs, ys])
    }

    pub fn constant(interval: Interval, value: &[f64]) -> Self {
        Self { interval, coeffs: value.iter().map(|&v| vec![v]).collect() }
    }

    pub fn constant_point(interval: Interval, p: Vector2<f64>) -> Self {
        Self::constant(interval, &[p.x, p.y])
    }

    pub fn zero_scalar(interval: Interval) -> Self {
        Self::constant(interval, &[0.0])
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn degree(&self) -> usize {
        self.coeffs[0].len() - 1
    }

    pub fn axes(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[Vec<f64>] {
        &self.coeffs
    }

    pub fn axis_coeffs(&self, axis: usize) -> &[f64] {
        &self.coeffs[axis]
    }

    /// Scalar segment holding a single axis of `self`.
    pub fn axis(&self, axis: usize) -> BernsteinSegment {
        Self { interval: self.interval, coeffs: vec![self.coeffs[axis].clone()] }
    }

    /// Control point `k` of a planar segment.
    pub fn control_point(&self, k: usize) -> Vector2<f64> {
        Vector2::new(self.coeffs[0][k], self.coeffs[1][k])
    }

    pub fn first_point(&self) -> Vec<f64> {
        self.coeffs.iter().map(|row| row[0]).collect()
    }

    pub fn last_point(&self) -> Vec<f64> {
        self.coeffs.iter().map(|row| *row.last().unwrap()).collect()
    }

    fn check_time(&self, t: f64) -> Result<f64> {
        if !self.interval.contains(t) {
            return Err(BernsteinError::OutOfInterval {
                t,
                start: self.interval.start,
                end: self.interval.end,
            });
        }
        Ok(self.interval.normalize(t).clamp(0.0, 1.0))
    }

    /// Value at `t` by repeated convex combination.
    pub fn evaluate(&self, t: f64) -> Result<Vec<f64>> {
        let s = self.check_time(t)?;
        Ok(self.coeffs.iter().map(|row| de_casteljau(row, s)).collect())
    }

    pub fn eval_scalar(&self, t: f64) -> Result<f64> {
        let s = self.check_time(t)?;
        Ok(de_casteljau(&self.coeffs[0], s))
    }

    pub fn eval2(&self, t: f64) -> Result<Vector2<f64>> {
        let s = self.check_time(t)?;
        Ok(Vector2::new(de_casteljau(&self.coeffs[0], s), de_casteljau(&self.coeffs[1], s)))
    }

    pub fn derivative(&self) -> BernsteinSegment {
        let n = self.degree();
        if n == 0 {
            return Self { interval: self.interval, coeffs: vec![vec![0.0]; self.axes()] };
        }
        let scale = n as f64 / self.interval.duration();
        let coeffs = self
            .coeffs
            .iter()
            .map(|row| row.windows(2).map(|w| scale * (w[1] - w[0])).collect())
            .collect();
        Self { interval: self.interval, coeffs }
    }

    pub fn nth_derivative(&self, order: usize) -> BernsteinSegment {
        (0..order).fold(self.clone(), |acc, _| acc.derivative())
    }

    pub fn elevate(&self, target: usize) -> Result<BernsteinSegment> {
        if target < self.degree() {
            return Err(BernsteinError::InvalidElevation { target, degree: self.degree() });
        }
        let coeffs = self.coeffs.iter().map(|row| elevate_coeffs(row, target)).collect();
        Ok(Self { interval: self.interval, coeffs })
    }

    /// Product with `other`. A scalar operand broadcasts over the axes of the
    /// other one; otherwise axes are multiplied pairwise.
    pub fn multiply(&self, other: &BernsteinSegment) -> Result<BernsteinSegment> {
        if !self.interval.approx_eq(&other.interval) {
            return Err(BernsteinError::IntervalMismatch);
        }
        let coeffs = match (self.axes(), other.axes()) {
            (a, b) if a == b => self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(p, q)| multiply_coeffs(p, q))
                .collect(),
            (_, 1) => self.coeffs.iter().map(|p| multiply_coeffs(p, &other.coeffs[0])).collect(),
            (1, _) => other.coeffs.iter().map(|q| multiply_coeffs(&self.coeffs[0], q)).collect(),
            (a, b) => return Err(BernsteinError::AxisMismatch { left: a, right: b }),
        };
        Ok(Self { interval: self.interval, coeffs })
    }

    /// Sum after elevating both operands to the common degree.
    pub fn add(&self, other: &BernsteinSegment) -> Result<BernsteinSegment> {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &BernsteinSegment) -> Result<BernsteinSegment> {
        self.combine(other, -1.0)
    }

    fn combine(&self, other: &BernsteinSegment, sign: f64) -> Result<BernsteinSegment> {
        if !self.interval.approx_eq(&other.interval) {
            return Err(BernsteinError::IntervalMismatch);
        }
        if self.axes() != other.axes() {
            return Err(BernsteinError::AxisMismatch { left: self.axes(), right: other.axes() });
        }
        let degree = self.degree().max(other.degree());
        let a = self.elevate(degree)?;
        let b = other.elevate(degree)?;
        let coeffs = a
            .coeffs
            .iter()
            .zip(&b.coeffs)
            .map(|(x, y)| x.iter().zip(y).map(|(u, v)| u + sign * v).collect())
            .collect();
        Ok(Self { interval: self.interval, coeffs })
    }

    pub fn scale(&self, factor: f64) -> BernsteinSegment {
        let coeffs =
            self.coeffs.iter().map(|row| row.iter().map(|c| c * factor).collect()).collect();
        Self { interval: self.interval, coeffs }
    }

    pub fn offset(&self, value: f64) -> BernsteinSegment {
        let coeffs =
            self.coeffs.iter().map(|row| row.iter().map(|c| c + value).collect()).collect();
        Self { interval: self.interval, coeffs }
    }

    /// Squared Euclidean norm summed over the axes, as a scalar polynomial.
    pub fn squared_norm(&self) -> BernsteinSegment {
        let n = self.degree();
        let mut acc = vec![0.0; 2 * n + 1];
        for row in &self.coeffs {
            for (a, c) in acc.iter_mut().zip(multiply_coeffs(row, row)) {
                *a += c;
            }
        }
        Self { interval: self.interval, coeffs: vec![acc] }
    }

    /// Inner product over axes of two same-dimension segments.
    pub fn dot(&self, other: &BernsteinSegment) -> Result<BernsteinSegment> {
        let prod = self.multiply(other)?;
        let n = prod.degree();
        let mut acc = vec![0.0; n + 1];
        for row in &prod.coeffs {
            for (a, c) in acc.iter_mut().zip(row) {
                *a += c;
            }
        }
        Ok(Self { interval: self.interval, coeffs: vec![acc] })
    }

    /// De Casteljau subdivision at an interior time.
    pub fn split(&self, tau: f64) -> Result<(BernsteinSegment, BernsteinSegment)> {
        let Interval { start, end } = self.interval;
        if !(tau > start && tau < end) {
            return Err(BernsteinError::InvalidSplit { tau, start, end });
        }
        let s = self.interval.normalize(tau);
        let mut left = Vec::with_capacity(self.axes());
        let mut right = Vec::with_capacity(self.axes());
        for row in &self.coeffs {
            let (l, r) = split_coeffs(row, s);
            left.push(l);
            right.push(r);
        }
        Ok((
            Self { interval: Interval::new(start, tau)?, coeffs: left },
            Self { interval: Interval::new(tau, end)?, coeffs: right },
        ))
    }

    /// Restriction to a sub-interval `[a, b]` of the segment's interval.
    pub fn restrict(&self, a: f64, b: f64) -> Result<BernsteinSegment> {
        let target = Interval::new(a, b)?;
        if !self.interval.contains(a) || !self.interval.contains(b) {
            return Err(BernsteinError::OutOfInterval {
                t: if self.interval.contains(a) { b } else { a },
                start: self.interval.start,
                end: self.interval.end,
            });
        }
        let tol = 1e-12 * (1.0 + self.interval.end.abs());
        let mut seg = self.clone();
        if a > seg.interval.start + tol {
            seg = seg.split(a)?.1;
        }
        if b < seg.interval.end - tol {
            seg = seg.split(b)?.0;
        }
        seg.interval = target;
        Ok(seg)
    }

    /// Re-parameterises the same control points onto a different interval.
    pub fn with_interval(&self, interval: Interval) -> BernsteinSegment {
        Self { interval, coeffs: self.coeffs.clone() }
    }

    /// Sufficient nonnegativity test: every control point is `>= 0`.
    pub fn nonneg_certificate(&self) -> Result<bool> {
        if self.axes() != 1 {
            return Err(BernsteinError::NotScalar { axes: self.axes() });
        }
        Ok(self.coeffs[0].iter().all(|&c| c >= 0.0))
    }

    pub fn min_coefficient(&self) -> f64 {
        self.coeffs.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    /// Real roots in the open interval, sorted.
    ///
    /// Recursive De Casteljau subdivision; subintervals whose control points
    /// have no sign change are pruned, a single sign change is refined by
    /// bisection. Tangent roots end up as a cluster of width below
    /// [`ROOT_TOLERANCE`] and are reported once.
    pub fn roots_in_interval(&self) -> Result<Vec<f64>> {
        if self.axes() != 1 {
            return Err(BernsteinError::NotScalar { axes: self.axes() });
        }
        let coeffs = &self.coeffs[0];
        let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        if scale == 0.0 {
            return Err(BernsteinError::IdenticallyZero);
        }
        let zero_tol = scale * 1e-14;
        let mut roots = Vec::new();
        isolate_roots(coeffs, 0.0, 1.0, zero_tol, 0, &mut roots);
        roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let width = self.interval.duration();
        let mut out: Vec<f64> = Vec::new();
        for s in roots {
            if s <= 0.0 || s >= 1.0 {
                continue;
            }
            let t = self.interval.start + s * width;
            if t <= self.interval.start || t >= self.interval.end {
                continue;
            }
            if let Some(last) = out.last() {
                if t - last <= 1e-7 * width.max(1.0) {
                    continue;
                }
            }
            out.push(t);
        }
        Ok(out)
    }
}

const MAX_ROOT_DEPTH: usize = 60;

fn isolate_roots(coeffs: &[f64], a: f64, b: f64, zero_tol: f64, depth: usize, out: &mut Vec<f64>) {
    let variations = sign_variations(coeffs, zero_tol);
    if variations == 0 {
        return;
    }
    let n = coeffs.len() - 1;
    let first = coeffs[0];
    let last = coeffs[n];
    if variations == 1 && first.abs() > zero_tol && last.abs() > zero_tol {
        // Exactly one simple root: bisection on the unit parameter.
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let f_lo_positive = first > 0.0;
        while (hi - lo) * (b - a) > ROOT_TOLERANCE * 1e-3 {
            let mid = 0.5 * (lo + hi);
            let v = de_casteljau(coeffs, mid);
            if v == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if (v > 0.0) == f_lo_positive {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        out.push(a + 0.5 * (lo + hi) * (b - a));
        return;
    }
    if (b - a) < ROOT_TOLERANCE * 1e-2 || depth >= MAX_ROOT_DEPTH {
        let mid = de_casteljau(coeffs, 0.5);
        let local = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        if mid.abs() <= local.max(zero_tol) {
            out.push(0.5 * (a + b));
        }
        return;
    }
    let (left, right) = split_coeffs(coeffs, 0.5);
    let mid = 0.5 * (a + b);
    if left[n].abs() <= zero_tol {
        out.push(mid);
    }
    isolate_roots(&left, a, mid, zero_tol, depth + 1, out);
    isolate_roots(&right, mid, b, zero_tol, depth + 1, out);
}

// ---------------------------------------------------------------------------

fn vandermonde_inverses() -> &'static Vec<DMatrix<f64>> {
    static CACHE: OnceLock<Vec<DMatrix<f64>>> = OnceLock::new();
    CACHE.get_or_init(|| {
        (0..=MAX_INTERPOLATION_DEGREE)
            .map(|n| {
                let m = DMatrix::from_fn(n + 1, n + 1, |j, k| {
                    if n == 0 {
                        return 1.0;
                    }
                    let s = j as f64 / n as f64;
                    binomial(n, k) * s.powi(k as i32) * (1.0 - s).powi((n - k) as i32)
                });
                m.try_inverse().expect("Bernstein-Vandermonde matrix is invertible for n <= 12")
            })
            .collect()
    })
}

/// Bernstein coefficients of the unique degree-`samples.len()-1` polynomial
/// through samples taken at uniformly spaced nodes of `interval`.
pub fn interpolate_to_bernstein(samples: &[f64], interval: Interval) -> Result<BernsteinSegment> {
    if samples.is_empty() {
        return Err(BernsteinError::Empty);
    }
    let degree = samples.len() - 1;
    if degree > MAX_INTERPOLATION_DEGREE {
        return Err(BernsteinError::IllConditioned(degree));
    }
    let inv = &vandermonde_inverses()[degree];
    let coeffs = inv * DVector::from_column_slice(samples);
    BernsteinSegment::scalar(interval, coeffs.iter().copied().collect())
}

/// Samples `f` at the uniform nodes of `interval` and interpolates.
pub fn interpolate_fn(
    interval: Interval,
    degree: usize,
    mut f: impl FnMut(f64) -> f64,
) -> Result<BernsteinSegment> {
    let samples: Vec<f64> = interval.uniform_nodes(degree).into_iter().map(&mut f).collect();
    interpolate_to_bernstein(&samples, interval)
}

// ---------------------------------------------------------------------------

/// Matrix taking degree-`n` coefficients to their degree-`m` elevation.
pub fn elevation_matrix(n: usize, m: usize) -> Result<DMatrix<f64>> {
    if m < n {
        return Err(BernsteinError::InvalidElevation { target: m, degree: n });
    }
    let r = m - n;
    Ok(DMatrix::from_fn(m + 1, n + 1, |i, j| {
        if j > i || i - j > r {
            0.0
        } else {
            binomial(n, j) * binomial(r, i - j) / binomial(m, i)
        }
    }))
}

/// Matrix taking degree-`n` coefficients `c` to the coefficients of the
/// product `a * c`, which has degree `deg(a) + n`.
pub fn product_matrix(a: &[f64], n: usize) -> DMatrix<f64> {
    let da = a.len() - 1;
    let d = da + n;
    DMatrix::from_fn(d + 1, n + 1, |k, j| {
        if j > k || k - j > da {
            0.0
        } else {
            binomial(da, k - j) * binomial(n, j) / binomial(d, k) * a[k - j]
        }
    })
}

/// `∫ B_k B_l dt` over a segment of the given duration, degree `n`.
pub fn track_gram(n: usize, duration: f64) -> DMatrix<f64> {
    let scale = duration / (2 * n + 1) as f64;
    DMatrix::from_fn(n + 1, n + 1, |k, l| {
        scale * binomial(n, k) * binomial(n, l) / binomial(2 * n, k + l)
    })
}

/// First-difference matrix mapping degree-`m` coefficients to the
/// degree-`m-1` coefficients of the derivative.
pub fn difference_matrix(m: usize, duration: f64) -> DMatrix<f64> {
    let scale = m as f64 / duration;
    DMatrix::from_fn(m, m + 1, |r, c| {
        if c == r {
            -scale
        } else if c == r + 1 {
            scale
        } else {
            0.0
        }
    })
}

/// Matrix mapping degree-`n` coefficients to third-derivative coefficients.
pub fn jerk_difference(n: usize, duration: f64) -> Result<DMatrix<f64>> {
    if n < 3 {
        return Err(BernsteinError::DegreeTooLow(n));
    }
    Ok(difference_matrix(n - 2, duration)
        * difference_matrix(n - 1, duration)
        * difference_matrix(n, duration))
}

/// `∫ ‖p'''‖²` as a quadratic form in the degree-`n` coefficients.
pub fn jerk_gram(n: usize, duration: f64) -> Result<DMatrix<f64>> {
    let d = jerk_difference(n, duration)?;
    let inner = track_gram(n - 3, duration);
    Ok(d.transpose() * inner * d)
}

/// Integral Gram matrices of one segment.
#[derive(Debug, Clone)]
pub struct GramMatrices {
    pub jerk: DMatrix<f64>,
    pub track: DMatrix<f64>,
    pub duration: f64,
}

pub fn gram_matrices(n: usize, duration: f64) -> Result<GramMatrices> {
    Ok(GramMatrices { jerk: jerk_gram(n, duration)?, track: track_gram(n, duration), duration })
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Continuity {
    C0,
    C1,
    C2,
}

impl Continuity {
    pub fn order(self) -> usize {
        match self {
            Continuity::C0 => 0,
            Continuity::C1 => 1,
            Continuity::C2 => 2,
        }
    }
}

/// Piecewise polynomial whose segments tile `[T_0, T_M]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseBernstein {
    knots: Vec<f64>,
    segments: Vec<BernsteinSegment>,
    continuity: Continuity,
}

impl PiecewiseBernstein {
    pub fn new(segments: Vec<BernsteinSegment>, continuity: Continuity) -> Result<Self> {
        let first = segments.first().ok_or(BernsteinError::Empty)?;
        let mut knots = vec![first.interval().start()];
        for (i, seg) in segments.iter().enumerate() {
            if seg.axes() != first.axes() {
                return Err(BernsteinError::AxisMismatch { left: first.axes(), right: seg.axes() });
            }
            let prev = knots[i];
            let tol = 1e-9 * (1.0 + prev.abs());
            if (seg.interval().start() - prev).abs() > tol {
                return Err(BernsteinError::InvalidKnots);
            }
            knots.push(seg.interval().end());
        }
        Ok(Self { knots, segments, continuity })
    }

    pub fn single(segment: BernsteinSegment) -> Self {
        let knots = vec![segment.interval().start(), segment.interval().end()];
        Self { knots, segments: vec![segment], continuity: Continuity::C2 }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn segments(&self) -> &[BernsteinSegment] {
        &self.segments
    }

    pub fn continuity(&self) -> Continuity {
        self.continuity
    }

    pub fn start(&self) -> f64 {
        self.knots[0]
    }

    pub fn end(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    pub fn axes(&self) -> usize {
        self.segments[0].axes()
    }

    /// Index of the segment covering `t` (the left one at interior knots).
    pub fn segment_index(&self, t: f64) -> Result<usize> {
        let span = Interval::new(self.start(), self.end())?;
        if !span.contains(t) {
            return Err(BernsteinError::OutOfInterval { t, start: self.start(), end: self.end() });
        }
        let idx = self.knots[1..self.knots.len() - 1].iter().take_while(|&&k| t > k).count();
        Ok(idx)
    }

    pub fn evaluate(&self, t: f64) -> Result<Vec<f64>> {
        let idx = self.segment_index(t)?;
        let seg = &self.segments[idx];
        let tt = t.clamp(seg.interval().start(), seg.interval().end());
        seg.evaluate(tt)
    }

    pub fn eval2(&self, t: f64) -> Result<Vector2<f64>> {
        let idx = self.segment_index(t)?;
        let seg = &self.segments[idx];
        seg.eval2(t.clamp(seg.interval().start(), seg.interval().end()))
    }

    pub fn eval_scalar(&self, t: f64) -> Result<f64> {
        let idx = self.segment_index(t)?;
        let seg = &self.segments[idx];
        seg.eval_scalar(t.clamp(seg.interval().start(), seg.interval().end()))
    }

    pub fn derivative(&self) -> PiecewiseBernstein {
        let continuity = match self.continuity {
            Continuity::C2 => Continuity::C1,
            _ => Continuity::C0,
        };
        Self {
            knots: self.knots.clone(),
            segments: self.segments.iter().map(|s| s.derivative()).collect(),
            continuity,
        }
    }

    /// Largest jump of the `order`-th derivative across interior knots.
    pub fn junction_defect(&self, order: usize) -> f64 {
        let derivs: Vec<BernsteinSegment> =
            self.segments.iter().map(|s| s.nth_derivative(order)).collect();
        let mut worst = 0.0f64;
        for pair in derivs.windows(2) {
            let left = pair[0].last_point();
            let right = pair[1].first_point();
            for (l, r) in left.iter().zip(&right) {
                worst = worst.max((l - r).abs());
            }
        }
        worst
    }

    /// Whether the recorded continuity class holds within `tol`.
    pub fn verify_continuity(&self, tol: f64) -> bool {
        (0..=self.continuity.order()).all(|k| self.junction_defect(k) <= tol)
    }

    /// The single segment covering `[a, b]`, restricted to it. Fails if the
    /// window straddles an interior knot.
    pub fn restrict(&self, a: f64, b: f64) -> Result<BernsteinSegment> {
        let idx = self.segment_index(0.5 * (a + b))?;
        self.segments[idx].restrict(a, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit() -> Interval {
        Interval::new(0.0, 1.0).unwrap()
    }

    fn scalar(c: &[f64]) -> BernsteinSegment {
        BernsteinSegment::scalar(unit(), c.to_vec()).unwrap()
    }

    #[test]
    fn basis_examples() {
        assert_abs_diff_eq!(basis_eval(1, 2, 0.5, 0.0, 1.0).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(basis_eval(0, 1, 0.25, 0.0, 1.0).unwrap(), 0.75, epsilon = 1e-15);
        let sum: f64 = (0..=5).map(|k| basis_eval(k, 5, 0.37, 0.0, 2.0).unwrap()).sum();
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn basis_rejects_bad_arguments() {
        assert!(matches!(basis_eval(3, 2, 0.5, 0.0, 1.0), Err(BernsteinError::InvalidIndex { .. })));
        assert!(matches!(
            basis_eval(0, 2, 0.5, 1.0, 1.0),
            Err(BernsteinError::DegenerateInterval { .. })
        ));
    }

    #[test]
    fn evaluate_examples() {
        assert_abs_diff_eq!(scalar(&[0.0, 1.0]).eval_scalar(0.5).unwrap(), 0.5);
        // t^2 expanded by hand: B_{2,2} = t^2.
        assert_abs_diff_eq!(scalar(&[0.0, 0.0, 1.0]).eval_scalar(0.3).unwrap(), 0.09, epsilon = 1e-15);
        let p = scalar(&[3.0, -1.0, 7.0, 2.0]);
        assert_eq!(p.eval_scalar(0.0).unwrap(), 3.0);
        assert_eq!(p.eval_scalar(1.0).unwrap(), 2.0);
        assert!(matches!(p.evaluate(1.5), Err(BernsteinError::OutOfInterval { .. })));
    }

    #[test]
    fn derivative_examples() {
        let d = scalar(&[0.0, 2.0]).derivative();
        assert_eq!(d.degree(), 0);
        assert_abs_diff_eq!(d.axis_coeffs(0)[0], 2.0);
        assert_eq!(scalar(&[0.0, 0.0, 1.0]).derivative().axis_coeffs(0), &[0.0, 2.0]);
        let z = scalar(&[4.0]).derivative();
        assert_eq!(z.axis_coeffs(0), &[0.0]);
    }

    #[test]
    fn elevate_examples() {
        assert_eq!(scalar(&[3.0, 3.0]).elevate(2).unwrap().axis_coeffs(0), &[3.0, 3.0, 3.0]);
        let e = scalar(&[0.0, 1.0]).elevate(2).unwrap();
        assert_abs_diff_eq!(e.axis_coeffs(0)[1], 0.5);
        assert!(scalar(&[0.0, 1.0, 2.0]).elevate(1).is_err());
    }

    #[test]
    fn multiply_examples() {
        let p = scalar(&[1.0, 0.0]).multiply(&scalar(&[0.0, 1.0])).unwrap();
        assert_eq!(p.axis_coeffs(0), &[0.0, 0.5, 0.0]);
        let other = BernsteinSegment::scalar(Interval::new(0.0, 2.0).unwrap(), vec![1.0]).unwrap();
        assert!(matches!(p.multiply(&other), Err(BernsteinError::IntervalMismatch)));
    }

    #[test]
    fn split_example() {
        let (l, r) = scalar(&[0.0, 2.0]).split(0.5).unwrap();
        assert_eq!(l.axis_coeffs(0), &[0.0, 1.0]);
        assert_eq!(r.axis_coeffs(0), &[1.0, 2.0]);
        assert!(scalar(&[0.0, 2.0]).split(1.0).is_err());
        assert!(scalar(&[0.0, 2.0]).split(0.0).is_err());
    }

    #[test]
    fn nonneg_certificate_examples() {
        assert!(scalar(&[0.0, 0.5, 0.0]).nonneg_certificate().unwrap());
        let p = scalar(&[1.0, -0.1, 1.0]);
        assert!(!p.nonneg_certificate().unwrap());
        let min = (0..=1000)
            .map(|i| p.eval_scalar(i as f64 / 1000.0).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert_abs_diff_eq!(min, 0.45, epsilon = 1e-6);
        let q = scalar(&[-1.0, 0.0, 0.0]);
        assert!(!q.nonneg_certificate().unwrap());
        assert_eq!(q.eval_scalar(0.0).unwrap(), -1.0);
    }

    #[test]
    fn interpolation_examples() {
        let p = interpolate_to_bernstein(&[2.0, 5.0], unit()).unwrap();
        assert_abs_diff_eq!(p.axis_coeffs(0)[0], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(p.axis_coeffs(0)[1], 5.0, epsilon = 1e-14);
        let q = interpolate_to_bernstein(&[0.0, 0.25, 1.0], unit()).unwrap();
        for (a, b) in q.axis_coeffs(0).iter().zip([0.0, 0.0, 1.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-13);
        }
        let s = interpolate_fn(unit(), 6, f64::sin).unwrap();
        let worst = (0..=1000)
            .map(|i| {
                let t = i as f64 / 1000.0;
                (s.eval_scalar(t).unwrap() - t.sin()).abs()
            })
            .fold(0.0, f64::max);
        assert!(worst < 1e-6, "worst {worst}");
        assert!(matches!(
            interpolate_to_bernstein(&[0.0; 14], unit()),
            Err(BernsteinError::IllConditioned(13))
        ));
    }

    #[test]
    fn track_gram_linear() {
        let g = track_gram(1, 2.0);
        assert_abs_diff_eq!(g[(0, 0)], 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g[(0, 1)], 1.0 / 3.0, epsilon = 1e-15);
        let ones = DVector::from_element(2, 1.0);
        assert_abs_diff_eq!((ones.transpose() * &g * &ones)[0], 2.0, epsilon = 1e-14);
        assert!(matches!(gram_matrices(2, 1.0), Err(BernsteinError::DegreeTooLow(2))));
    }

    #[test]
    fn jerk_gram_annihilates_quadratics() {
        let q = scalar(&[0.3, -2.0, 1.5]).elevate(3).unwrap();
        let c = DVector::from_column_slice(q.axis_coeffs(0));
        let g = jerk_gram(3, 1.0).unwrap();
        assert_abs_diff_eq!((c.transpose() * &g * &c)[0], 0.0, epsilon = 1e-9);
    }

    #[test]
    fn root_examples() {
        let lin = interpolate_fn(unit(), 1, |t| t - 0.3).unwrap();
        let r = lin.roots_in_interval().unwrap();
        assert_eq!(r.len(), 1);
        assert_abs_diff_eq!(r[0], 0.3, epsilon = 1e-9);

        let a = interpolate_fn(unit(), 1, |t| t - 0.25).unwrap();
        let b = interpolate_fn(unit(), 1, |t| t - 0.75).unwrap();
        let quad = a.multiply(&b).unwrap();
        let r = quad.roots_in_interval().unwrap();
        assert_eq!(r.len(), 2);
        assert_abs_diff_eq!(r[0], 0.25, epsilon = 1e-9);
        assert_abs_diff_eq!(r[1], 0.75, epsilon = 1e-9);

        assert!(scalar(&[1.0, 0.2, 3.0]).roots_in_interval().unwrap().is_empty());
        assert!(matches!(
            scalar(&[0.0, 0.0]).roots_in_interval(),
            Err(BernsteinError::IdenticallyZero)
        ));
    }

    #[test]
    fn tangent_root_reported_once() {
        let a = interpolate_fn(unit(), 1, |t| t - 0.3).unwrap();
        let sq = a.multiply(&a).unwrap();
        let r = sq.roots_in_interval().unwrap();
        assert_eq!(r.len(), 1, "{r:?}");
        assert_abs_diff_eq!(r[0], 0.3, epsilon = 1e-6);
    }

    #[test]
    fn piecewise_tiling_and_continuity() {
        let p = scalar(&[0.0, 1.0, -2.0, 4.0]);
        let (l, r) = p.split(0.4).unwrap();
        let pw = PiecewiseBernstein::new(vec![l, r], Continuity::C2).unwrap();
        assert_eq!(pw.knots(), &[0.0, 0.4, 1.0]);
        assert!(pw.verify_continuity(1e-10));
        for i in 0..=50 {
            let t = i as f64 / 50.0;
            assert_abs_diff_eq!(pw.eval_scalar(t).unwrap(), p.eval_scalar(t).unwrap(), epsilon = 1e-12);
        }
        let gap = BernsteinSegment::scalar(Interval::new(0.5, 1.0).unwrap(), vec![0.0]).unwrap();
        assert!(PiecewiseBernstein::new(vec![scalar(&[0.0]), gap], Continuity::C0).is_err());
        assert_eq!(pw.segment_index(0.4).unwrap(), 0);
        assert_eq!(pw.segment_index(0.41).unwrap(), 1);
    }

    #[test]
    fn elevation_and_product_matrices_match_segment_ops() {
        let p = scalar(&[1.0, -2.0, 0.5]);
        let e = elevation_matrix(2, 5).unwrap();
        let lifted = &e * DVector::from_column_slice(p.axis_coeffs(0));
        let direct = p.elevate(5).unwrap();
        for (a, b) in lifted.iter().zip(direct.axis_coeffs(0)) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-14);
        }
        assert!(elevation_matrix(3, 2).is_err());

        let a = scalar(&[0.3, 1.0]);
        let m = product_matrix(a.axis_coeffs(0), 2);
        let prod = &m * DVector::from_column_slice(p.axis_coeffs(0));
        let direct = a.multiply(&p).unwrap();
        for (x, y) in prod.iter().zip(direct.axis_coeffs(0)) {
            assert_abs_diff_eq!(*x, *y, epsilon = 1e-14);
        }
    }

    #[test]
    fn jerk_gram_matches_quadrature_for_min_jerk_cubic() {
        let t_end = 1.7;
        let iv = Interval::new(0.0, t_end).unwrap();
        let c = [0.0, 0.4 * t_end / 3.0, 3.0 / 3.0 + 0.4 * t_end / 3.0, 3.0];
        let seg = BernsteinSegment::scalar(iv, c.to_vec()).unwrap();
        let g = jerk_gram(3, t_end).unwrap();
        let v = DVector::from_column_slice(&c);
        let form = (v.transpose() * &g * &v)[(0, 0)];
        let jerk = seg.nth_derivative(3);
        let steps = 20_000;
        let h = t_end / steps as f64;
        let quad: f64 = (0..steps)
            .map(|i| {
                let t = (i as f64 + 0.5) * h;
                jerk.eval_scalar(t).unwrap().powi(2) * h
            })
            .sum();
        assert!((form - quad).abs() <= 1e-8 * quad.abs().max(1.0));
    }
}
