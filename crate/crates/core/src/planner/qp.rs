//! Dense convex QP solver.
//!
//! minimize ½ xᵀ P x + qᵀ x  subject to  E x = f,  A x ≥ b.
//!
//! Dual active-set method of Goldfarb and Idnani: start from the
//! unconstrained minimizer, pin the equalities, then repeatedly add the
//! most violated inequality while dropping active ones whose multipliers
//! would turn negative. No feasible starting point is needed and an
//! infeasible problem is detected when a violated row can not be reached.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

/// Stationarity/feasibility tolerance for an optimal return.
pub const KKT_TOLERANCE: f64 = 1e-8;
/// Primal feasibility tolerance for an optimal return.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct QpData {
    pub quadratic: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub eq_matrix: DMatrix<f64>,
    pub eq_rhs: DVector<f64>,
    pub ineq_matrix: DMatrix<f64>,
    pub ineq_rhs: DVector<f64>,
}

impl QpData {
    pub fn unconstrained(quadratic: DMatrix<f64>, linear: DVector<f64>) -> Self {
        let n = linear.len();
        Self {
            quadratic,
            linear,
            eq_matrix: DMatrix::zeros(0, n),
            eq_rhs: DVector::zeros(0),
            ineq_matrix: DMatrix::zeros(0, n),
            ineq_rhs: DVector::zeros(0),
        }
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.quadratic * x)) + self.linear.dot(x)
    }

    pub fn rows(&self) -> usize {
        self.eq_matrix.nrows() + self.ineq_matrix.nrows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    Stalled,
}

/// Scaled KKT residuals, each relative to the magnitude of its terms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KktResidual {
    pub stationarity: f64,
    pub equality: f64,
    /// Largest violation of `A x ≥ b`, normalized by the row norm.
    pub inequality: f64,
    pub dual: f64,
    pub complementarity: f64,
}

impl KktResidual {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.equality)
            .max(self.inequality)
            .max(self.dual)
            .max(self.complementarity)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub status: QpStatus,
    pub iterations: usize,
    pub eq_multipliers: DVector<f64>,
    pub ineq_multipliers: DVector<f64>,
    pub kkt: KktResidual,
}

pub fn kkt_residuals(
    qp: &QpData,
    x: &DVector<f64>,
    eq_mult: &DVector<f64>,
    ineq_mult: &DVector<f64>,
) -> KktResidual {
    let px = &qp.quadratic * x;
    let eq_term = qp.eq_matrix.transpose() * eq_mult;
    let ineq_term = qp.ineq_matrix.transpose() * ineq_mult;
    let grad = &px + &qp.linear - &eq_term - &ineq_term;
    // Scale by the magnitudes of the summed terms so rounding in `P x` with
    // a widely ranged `P` is not reported as a residual.
    let abs_px = qp.quadratic.abs() * x.abs();
    let abs_eq = qp.eq_matrix.abs().transpose() * eq_mult.abs();
    let abs_in = qp.ineq_matrix.abs().transpose() * ineq_mult.abs();
    let scale = 1.0 + abs_px.amax().max(qp.linear.amax()).max(abs_eq.amax()).max(abs_in.amax());
    let mut res = KktResidual { stationarity: grad.amax() / scale, ..Default::default() };
    for i in 0..qp.eq_matrix.nrows() {
        let row = qp.eq_matrix.row(i);
        let norm = row.norm().max(1e-300);
        res.equality = res.equality.max(((row * x)[0] - qp.eq_rhs[i]).abs() / norm);
    }
    for i in 0..qp.ineq_matrix.nrows() {
        let row = qp.ineq_matrix.row(i);
        let norm = row.norm().max(1e-300);
        let slack = ((row * x)[0] - qp.ineq_rhs[i]) / norm;
        res.inequality = res.inequality.max(-slack);
        res.dual = res.dual.max(-ineq_mult[i]);
        res.complementarity = res.complementarity.max((slack * ineq_mult[i] * norm).abs() / scale);
    }
    res
}

struct Active {
    /// Constraint index: `< n_eq` for equalities, otherwise inequality `i - n_eq`.
    index: usize,
    mult: f64,
}

/// `J = L⁻ᵀ Q` and upper-triangular `R` with `Jᵀ N = [R; 0]` for the
/// active normals `N`, kept up to date with Givens rotations.
struct Factor {
    j: DMatrix<f64>,
    r: DMatrix<f64>,
    k: usize,
}

fn givens(a: f64, b: f64) -> (f64, f64, f64) {
    let h = a.hypot(b);
    if h == 0.0 {
        (1.0, 0.0, 0.0)
    } else {
        (a / h, b / h, h)
    }
}

impl Factor {
    fn new(g: &DMatrix<f64>) -> Option<Self> {
        let n = g.nrows();
        // A trailing diagonal block (slack variables) is factored directly.
        let mut lead = n;
        while lead > 0 {
            let i = lead - 1;
            let diagonal_only = g[(i, i)] > 0.0 && (0..i).all(|j| g[(i, j)] == 0.0 && g[(j, i)] == 0.0);
            if !diagonal_only {
                break;
            }
            lead -= 1;
        }
        let mut j = DMatrix::zeros(n, n);
        if lead > 0 {
            let block = g.view((0, 0), (lead, lead)).into_owned();
            let l = cholesky_lower(&block)?;
            let l_inv = l.solve_lower_triangular(&DMatrix::identity(lead, lead))?;
            j.view_mut((0, 0), (lead, lead)).copy_from(&l_inv.transpose());
        }
        for i in lead..n {
            j[(i, i)] = 1.0 / g[(i, i)].sqrt();
        }
        Some(Self { j, r: DMatrix::zeros(n, n), k: 0 })
    }

    /// `d = Jᵀ n`, step direction `z` in primal space and `r = R⁻¹ d₁`.
    fn directions(&self, np: &DVector<f64>) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let n = np.len();
        let k = self.k;
        let d = self.j.tr_mul(np);
        let z = self.j.columns(k, n - k) * d.rows(k, n - k);
        let mut r = DVector::zeros(k);
        for i in (0..k).rev() {
            let mut acc = d[i];
            for c in i + 1..k {
                acc -= self.r[(i, c)] * r[c];
            }
            r[i] = acc / self.r[(i, i)];
        }
        (d, z, r)
    }

    fn rotate_columns(&mut self, a: usize, b: usize, c: f64, s: f64) {
        for row in 0..self.j.nrows() {
            let (x, y) = (self.j[(row, a)], self.j[(row, b)]);
            self.j[(row, a)] = c * x + s * y;
            self.j[(row, b)] = -s * x + c * y;
        }
    }

    /// Appends a normal given `d = Jᵀ n`.
    fn add(&mut self, mut d: DVector<f64>) {
        let n = d.len();
        let k = self.k;
        for i in (k + 1..n).rev() {
            let (c, s, h) = givens(d[i - 1], d[i]);
            if s == 0.0 {
                continue;
            }
            d[i - 1] = h;
            d[i] = 0.0;
            self.rotate_columns(i - 1, i, c, s);
        }
        for i in 0..=k {
            self.r[(i, k)] = d[i];
        }
        self.k += 1;
    }

    /// One refinement pass on the KKT system of the active set.
    fn refine(
        &self,
        g: &DMatrix<f64>,
        a: &DVector<f64>,
        normals: &[DVector<f64>],
        rhs: &[f64],
        y: &mut DVector<f64>,
        active: &mut [Active],
    ) {
        let n = y.len();
        let k = self.k;
        let mut rs = g * &*y + a;
        for act in active.iter() {
            rs.axpy(-act.mult, &normals[act.index], 1.0);
        }
        let c = self.j.tr_mul(&rs);
        let mut w = -c.clone();
        for i in 0..k {
            let re = normals[active[i].index].dot(y) - rhs[active[i].index];
            let mut acc = -re;
            for m in 0..i {
                acc -= self.r[(m, i)] * w[m];
            }
            w[i] = acc / self.r[(i, i)];
        }
        let mut du = DVector::zeros(k);
        for i in (0..k).rev() {
            let mut acc = w[i] + c[i];
            for m in i + 1..k {
                acc -= self.r[(i, m)] * du[m];
            }
            du[i] = acc / self.r[(i, i)];
        }
        *y += &self.j * w.rows(0, n);
        for (act, dm) in active.iter_mut().zip(du.iter()) {
            act.mult += dm;
        }
    }

    /// Removes active column `l` and restores the triangular form.
    fn remove(&mut self, l: usize) {
        let k = self.k;
        for c in l..k - 1 {
            for i in 0..=c + 1 {
                self.r[(i, c)] = self.r[(i, c + 1)];
            }
        }
        for i in 0..k {
            self.r[(i, k - 1)] = 0.0;
        }
        for c in l..k - 1 {
            let (cs, sn, h) = givens(self.r[(c, c)], self.r[(c + 1, c)]);
            if sn == 0.0 {
                continue;
            }
            self.r[(c, c)] = h;
            self.r[(c + 1, c)] = 0.0;
            for col in c + 1..k - 1 {
                let (x, y) = (self.r[(c, col)], self.r[(c + 1, col)]);
                self.r[(c, col)] = cs * x + sn * y;
                self.r[(c + 1, col)] = -sn * x + cs * y;
            }
            self.rotate_columns(c, c + 1, cs, sn);
        }
        self.k -= 1;
    }
}

/// Solves the QP. The quadratic must be positive semidefinite; a tiny
/// diagonal shift is added when it is singular.
pub fn solve_qp(qp: &QpData) -> QpSolution {
    let n = qp.dim();
    let n_eq = qp.eq_matrix.nrows();
    let n_in = qp.ineq_matrix.nrows();

    // Symmetric diagonal scaling x = D y so that the scaled quadratic has a
    // unit diagonal. Improves conditioning across segments of very
    // different durations.
    let d = DVector::from_fn(n, |i, _| {
        let g = qp.quadratic[(i, i)];
        if g > 0.0 { 1.0 / g.sqrt() } else { 1.0 }
    });
    let mut g = qp.quadratic.clone();
    for i in 0..n {
        for j in 0..n {
            g[(i, j)] *= d[i] * d[j];
        }
    }
    let g = 0.5 * (&g + g.transpose());
    let a = qp.linear.component_mul(&d);

    let Some(mut factor) = Factor::new(&g) else {
        return finish(qp, DVector::zeros(n), QpStatus::Stalled, 0, Vec::new(), &d, n_eq, n_in);
    };

    // Normalized rows in scaled variables.
    let mut normals = Vec::with_capacity(n_eq + n_in);
    let mut rhs = Vec::with_capacity(n_eq + n_in);
    for (m, b) in [(&qp.eq_matrix, &qp.eq_rhs), (&qp.ineq_matrix, &qp.ineq_rhs)] {
        for i in 0..m.nrows() {
            let row = DVector::from_fn(n, |j, _| m[(i, j)] * d[j]);
            let norm = row.norm();
            let s = if norm > 0.0 { 1.0 / norm } else { 1.0 };
            normals.push(row * s);
            rhs.push(b[i] * s);
        }
    }

    // Unconstrained minimizer -G⁻¹a = -J Jᵀ a.
    let mut x = -(&factor.j * factor.j.tr_mul(&a));
    let mut active: Vec<Active> = Vec::new();
    let mut is_active = vec![false; n_eq + n_in];
    let mut iterations = 0;
    let cap = 50 * (n_eq + n_in).max(1);
    let tiny = 1e-14;

    // Equalities are pinned first and never dropped.
    for i in 0..n_eq {
        let np = &normals[i];
        let (dv, z, r) = factor.directions(np);
        let curvature = z.dot(np);
        let residual = rhs[i] - np.dot(&x);
        if curvature <= tiny {
            if residual.abs() > 1e-9 {
                return finish(qp, x, QpStatus::Infeasible, iterations, active, &d, n_eq, n_in);
            }
            continue;
        }
        let t = residual / curvature;
        x += &z * t;
        for (act, ri) in active.iter_mut().zip(r.iter()) {
            act.mult -= t * ri;
        }
        factor.add(dv);
        active.push(Active { index: i, mult: t });
        is_active[i] = true;
        iterations += 1;
    }

    loop {
        if iterations >= cap {
            return finish(qp, x, QpStatus::Stalled, iterations, active, &d, n_eq, n_in);
        }
        // Most violated inactive inequality.
        let mut worst: Option<(usize, f64)> = None;
        for i in n_eq..n_eq + n_in {
            if is_active[i] {
                continue;
            }
            let s = normals[i].dot(&x) - rhs[i];
            if s < -FEASIBILITY_TOLERANCE * 1e-2 && worst.is_none_or(|(_, v)| s < v) {
                worst = Some((i, s));
            }
        }
        let Some((p, _)) = worst else {
            for _ in 0..3 {
                factor.refine(&g, &a, &normals, &rhs, &mut x, &mut active);
            }
            return finish(qp, x, QpStatus::Optimal, iterations, active, &d, n_eq, n_in);
        };
        let np = normals[p].clone();
        let mut u_plus = 0.0;
        loop {
            iterations += 1;
            if iterations >= cap {
                return finish(qp, x, QpStatus::Stalled, iterations, active, &d, n_eq, n_in);
            }
            let (dv, z, r) = factor.directions(&np);
            let curvature = z.dot(&np);
            let slack = np.dot(&x) - rhs[p];
            // Partial step: first active inequality whose multiplier hits zero.
            let mut partial: Option<(usize, f64)> = None;
            for (k, (act, &rk)) in active.iter().zip(r.iter()).enumerate() {
                if act.index < n_eq || rk <= tiny {
                    continue;
                }
                let ratio = act.mult / rk;
                if partial.is_none_or(|(_, v)| ratio < v) {
                    partial = Some((k, ratio));
                }
            }
            let full = if curvature > tiny { Some(-slack / curvature) } else { None };
            let (t, add) = match (full, partial) {
                (None, None) => {
                    return finish(qp, x, QpStatus::Infeasible, iterations, active, &d, n_eq, n_in);
                }
                (None, Some((_, tp))) => (tp, false),
                (Some(tf), partial) => match partial {
                    Some((_, tp)) if tp < tf => (tp, false),
                    _ => (tf, true),
                },
            };
            if full.is_some() {
                x += &z * t;
            }
            for (act, ri) in active.iter_mut().zip(r.iter()) {
                act.mult -= t * ri;
            }
            u_plus += t;
            if add {
                factor.add(dv);
                active.push(Active { index: p, mult: u_plus });
                is_active[p] = true;
                break;
            }
            let (k, _) = partial.expect("partial step");
            is_active[active[k].index] = false;
            active.remove(k);
            factor.remove(k);
        }
    }
}

fn cholesky_lower(g: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = g.nrows();
    if let Some(ch) = Cholesky::<f64, Dyn>::new(g.clone()) {
        return Some(ch.l());
    }
    let mut shift = 1e-12 * g.diagonal().amax().max(1.0);
    for _ in 0..8 {
        let shifted = g + DMatrix::identity(n, n) * shift;
        if let Some(ch) = Cholesky::new(shifted) {
            return Some(ch.l());
        }
        shift *= 100.0;
    }
    None
}

#[allow(clippy::too_many_arguments)]
fn finish(
    qp: &QpData,
    y: DVector<f64>,
    mut status: QpStatus,
    iterations: usize,
    active: Vec<Active>,
    d: &DVector<f64>,
    n_eq: usize,
    n_in: usize,
) -> QpSolution {
    let x = y.component_mul(d);
    let mut eq_mult = DVector::zeros(n_eq);
    let mut ineq_mult = DVector::zeros(n_in);
    // Undo the row normalization: scaled row = s * D * original row.
    for act in &active {
        let (m, rhs_len) = if act.index < n_eq {
            (&qp.eq_matrix, act.index)
        } else {
            (&qp.ineq_matrix, act.index - n_eq)
        };
        let row_norm = DVector::from_fn(qp.dim(), |j, _| m[(rhs_len, j)] * d[j]).norm();
        let s = if row_norm > 0.0 { 1.0 / row_norm } else { 1.0 };
        if act.index < n_eq {
            eq_mult[rhs_len] = act.mult * s;
        } else {
            ineq_mult[rhs_len] = act.mult * s;
        }
    }
    let kkt = kkt_residuals(qp, &x, &eq_mult, &ineq_mult);
    if status == QpStatus::Optimal
        && (kkt.stationarity > KKT_TOLERANCE
            || kkt.equality > FEASIBILITY_TOLERANCE * 10.0
            || kkt.inequality > FEASIBILITY_TOLERANCE
            || kkt.dual > KKT_TOLERANCE)
    {
        status = QpStatus::Stalled;
    }
    QpSolution { x, status, iterations, eq_multipliers: eq_mult, ineq_multipliers: ineq_mult, kkt }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn qp(p: &[f64], q: &[f64], a: &[&[f64]], b: &[f64]) -> QpData {
        let n = q.len();
        let mut data = QpData::unconstrained(DMatrix::from_row_slice(n, n, p), DVector::from_row_slice(q));
        data.ineq_matrix = DMatrix::from_fn(a.len(), n, |i, j| a[i][j]);
        data.ineq_rhs = DVector::from_row_slice(b);
        data
    }

    #[test]
    fn bound_example() {
        let s = solve_qp(&qp(&[2.0], &[0.0], &[&[1.0]], &[1.0]));
        assert_eq!(s.status, QpStatus::Optimal);
        assert_abs_diff_eq!(s.x[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.ineq_multipliers[0], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn halfplane_example() {
        let s = solve_qp(&qp(&[2.0, 0.0, 0.0, 2.0], &[0.0, 0.0], &[&[1.0, 1.0]], &[2.0]));
        assert_eq!(s.status, QpStatus::Optimal);
        assert_abs_diff_eq!(s.x[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.x[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn infeasible_example() {
        let s = solve_qp(&qp(&[2.0], &[0.0], &[&[1.0], &[-1.0]], &[1.0, 0.0]));
        assert_eq!(s.status, QpStatus::Infeasible);
    }

    #[test]
    fn equalities_are_respected() {
        let mut data = qp(&[2.0, 0.0, 0.0, 2.0], &[-2.0, -6.0], &[&[-1.0, 0.0]], &[-0.5]);
        data.eq_matrix = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        data.eq_rhs = DVector::from_row_slice(&[1.0]);
        let s = solve_qp(&data);
        assert_eq!(s.status, QpStatus::Optimal);
        // Unconstrained on the line x + y = 1 gives (-0.5, 1.5); x <= 0.5 is inactive.
        assert_abs_diff_eq!(s.x[0], -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s.x[1], 1.5, epsilon = 1e-12);
        assert!(s.kkt.max() < 1e-10);
    }

    #[test]
    fn degenerate_duplicate_rows() {
        let s = solve_qp(&qp(&[2.0, 0.0, 0.0, 2.0], &[0.0, 0.0], &[&[1.0, 1.0], &[2.0, 2.0], &[1.0, 0.0]], &[2.0, 4.0, 0.5]));
        assert_eq!(s.status, QpStatus::Optimal);
        assert_abs_diff_eq!(s.x[0], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(s.x[1], 1.0, epsilon = 1e-10);
    }
}
