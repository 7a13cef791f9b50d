//! Clamped cubic spline through timed waypoints.

use nalgebra::{DMatrix, DVector, Vector2};

/// Cubic spline with zero slope at both ends; holds the end points
/// outside the waypoint times.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    times: Vec<f64>,
    points: Vec<Vector2<f64>>,
    /// Second derivatives at the waypoints.
    moments: Vec<Vector2<f64>>,
}

impl CubicSpline {
    /// `times` must be strictly increasing and match `points` in length.
    pub fn new(times: Vec<f64>, points: Vec<Vector2<f64>>) -> Self {
        assert_eq!(times.len(), points.len());
        assert!(!times.is_empty());
        let n = times.len();
        if n == 1 {
            return Self { times, points, moments: vec![Vector2::zeros()] };
        }
        let h: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
        let mut a = DMatrix::zeros(n, n);
        let mut rhs = [DVector::zeros(n), DVector::zeros(n)];
        for i in 0..n {
            if i > 0 {
                a[(i, i - 1)] = h[i - 1];
                a[(i, i)] += 2.0 * h[i - 1];
            }
            if i + 1 < n {
                a[(i, i + 1)] = h[i];
                a[(i, i)] += 2.0 * h[i];
            }
            for (axis, r) in rhs.iter_mut().enumerate() {
                let right = if i + 1 < n { (points[i + 1][axis] - points[i][axis]) / h[i] } else { 0.0 };
                let left = if i > 0 { (points[i][axis] - points[i - 1][axis]) / h[i - 1] } else { 0.0 };
                r[i] = 6.0 * (right - left);
            }
        }
        let lu = a.lu();
        let mx = lu.solve(&rhs[0]).expect("diagonally dominant");
        let my = lu.solve(&rhs[1]).expect("diagonally dominant");
        let moments = (0..n).map(|i| Vector2::new(mx[i], my[i])).collect();
        Self { times, points, moments }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn points(&self) -> &[Vector2<f64>] {
        &self.points
    }

    fn locate(&self, t: f64) -> Option<(usize, f64, f64)> {
        let n = self.times.len();
        if n == 1 || t <= self.times[0] || t >= self.times[n - 1] {
            return None;
        }
        let i = self.times.partition_point(|&x| x <= t) - 1;
        let h = self.times[i + 1] - self.times[i];
        let b = (t - self.times[i]) / h;
        Some((i, h, b))
    }

    pub fn position(&self, t: f64) -> Vector2<f64> {
        let Some((i, h, b)) = self.locate(t) else {
            return if t <= self.times[0] { self.points[0] } else { *self.points.last().expect("non-empty") };
        };
        let a = 1.0 - b;
        let (mi, mj) = (self.moments[i], self.moments[i + 1]);
        self.points[i] * a + self.points[i + 1] * b + (mi * (a * a * a - a) + mj * (b * b * b - b)) * (h * h / 6.0)
    }

    pub fn velocity(&self, t: f64) -> Vector2<f64> {
        let Some((i, h, b)) = self.locate(t) else { return Vector2::zeros() };
        let a = 1.0 - b;
        let (mi, mj) = (self.moments[i], self.moments[i + 1]);
        (self.points[i + 1] - self.points[i]) / h - mi * ((3.0 * a * a - 1.0) * h / 6.0)
            + mj * ((3.0 * b * b - 1.0) * h / 6.0)
    }

    pub fn acceleration(&self, t: f64) -> Vector2<f64> {
        let Some((i, _, b)) = self.locate(t) else { return Vector2::zeros() };
        self.moments[i] * (1.0 - b) + self.moments[i + 1] * b
    }
}
