//! Linear rows of the chasing QP.

use nalgebra::{DMatrix, DVector, Vector2};

use crate::visibility::{AffineBernstein, ConstraintKind};

/// Position of segment control points in the decision vector
/// `[c1x, c1y, c2x, c2y, ...]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecisionLayout {
    pub degree: usize,
    pub segments: usize,
}

impl DecisionLayout {
    pub fn block(&self) -> usize {
        2 * (self.degree + 1)
    }

    pub fn offset(&self, seg: usize, axis: usize) -> usize {
        seg * self.block() + axis * (self.degree + 1)
    }

    pub fn dim(&self) -> usize {
        self.segments * self.block()
    }
}

/// Dense row accumulator for `A x (=|≥) b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rows {
    dim: usize,
    data: Vec<f64>,
    rhs: Vec<f64>,
}

impl Rows {
    pub fn new(dim: usize) -> Self {
        Self { dim, data: Vec::new(), rhs: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.rhs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rhs.is_empty()
    }

    pub fn push_sparse(&mut self, entries: &[(usize, f64)], rhs: f64) {
        let start = self.data.len();
        self.data.resize(start + self.dim, 0.0);
        for &(j, v) in entries {
            self.data[start + j] += v;
        }
        self.rhs.push(rhs);
    }

    pub fn push_dense(&mut self, row: &[f64], rhs: f64) {
        debug_assert_eq!(row.len(), self.dim);
        self.data.extend_from_slice(row);
        self.rhs.push(rhs);
    }

    pub fn extend(&mut self, other: &Rows) {
        debug_assert_eq!(self.dim, other.dim);
        self.data.extend_from_slice(&other.data);
        self.rhs.extend_from_slice(&other.rhs);
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.len(), self.dim, &self.data)
    }

    pub fn rhs(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.rhs)
    }

    /// Same rows over a wider decision vector (new columns zero).
    pub fn widened(&self, dim: usize) -> Rows {
        let mut out = Rows::new(dim);
        for (i, &b) in self.rhs.iter().enumerate() {
            let mut row = self.data[i * self.dim..(i + 1) * self.dim].to_vec();
            row.resize(dim, 0.0);
            out.push_dense(&row, b);
        }
        out
    }
}

/// Equalities and inequalities for initial state, C2 junctions and the
/// per-axis velocity and acceleration boxes.
pub fn assemble_dynamic_rows(
    layout: DecisionLayout,
    knots: &[f64],
    position: Vector2<f64>,
    velocity: Vector2<f64>,
    v_max: f64,
    a_max: f64,
) -> (Rows, Rows) {
    let n = layout.degree;
    let nf = n as f64;
    let dim = layout.dim();
    let mut eq = Rows::new(dim);
    let mut ineq = Rows::new(dim);
    let dur = |s: usize| knots[s + 1] - knots[s];
    let v_box = v_max / std::f64::consts::SQRT_2;
    let a_box = a_max / std::f64::consts::SQRT_2;
    for axis in 0..2 {
        let o = layout.offset(0, axis);
        eq.push_sparse(&[(o, 1.0)], position[axis]);
        let k = nf / dur(0);
        eq.push_sparse(&[(o, -k), (o + 1, k)], velocity[axis]);
    }
    for s in 0..layout.segments.saturating_sub(1) {
        let (h0, h1) = (dur(s), dur(s + 1));
        for axis in 0..2 {
            let a = layout.offset(s, axis);
            let b = layout.offset(s + 1, axis);
            eq.push_sparse(&[(a + n, 1.0), (b, -1.0)], 0.0);
            let (k0, k1) = (nf / h0, nf / h1);
            eq.push_sparse(&[(a + n, k0), (a + n - 1, -k0), (b + 1, -k1), (b, k1)], 0.0);
            if n >= 2 {
                let (k0, k1) = (nf * (nf - 1.0) / (h0 * h0), nf * (nf - 1.0) / (h1 * h1));
                eq.push_sparse(
                    &[(a + n, k0), (a + n - 1, -2.0 * k0), (a + n - 2, k0), (b + 2, -k1), (b + 1, 2.0 * k1), (b, -k1)],
                    0.0,
                );
            }
        }
    }
    for s in 0..layout.segments {
        let h = dur(s);
        for axis in 0..2 {
            let o = layout.offset(s, axis);
            let k = nf / h;
            for i in 0..n {
                ineq.push_sparse(&[(o + i + 1, -k), (o + i, k)], -v_box);
                ineq.push_sparse(&[(o + i + 1, k), (o + i, -k)], -v_box);
            }
            if n >= 2 {
                let k = nf * (nf - 1.0) / (h * h);
                for i in 0..n - 1 {
                    ineq.push_sparse(&[(o + i + 2, -k), (o + i + 1, 2.0 * k), (o + i, -k)], -a_box);
                    ineq.push_sparse(&[(o + i + 2, k), (o + i + 1, -2.0 * k), (o + i, k)], -a_box);
                }
            }
        }
    }
    (eq, ineq)
}

/// One constraint polynomial attached to a planning segment.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanConstraint {
    pub kind: ConstraintKind,
    pub segment: usize,
    pub poly: AffineBernstein,
}

/// One row per Bernstein coefficient: `coefficient(c̄) ≥ 0`. With
/// `slack_offset`, row `k` reads `coefficient + s_k ≥ 0` where `s_k` sits
/// at `slack_offset + k`.
pub fn assemble_visibility_rows(
    layout: DecisionLayout,
    constraints: &[PlanConstraint],
    dim: usize,
    slack_offset: Option<usize>,
) -> Rows {
    let mut rows = Rows::new(dim);
    let mut row = vec![0.0; dim];
    for c in constraints {
        let m = c.poly.matrix();
        let base = layout.offset(c.segment, 0);
        for k in 0..m.nrows() {
            row.iter_mut().for_each(|v| *v = 0.0);
            for j in 0..m.ncols() {
                row[base + j] = m[(k, j)];
            }
            if let Some(off) = slack_offset {
                row[off + rows.len()] = 1.0;
            }
            rows.push_dense(&row, -c.poly.constant()[k]);
        }
    }
    rows
}
