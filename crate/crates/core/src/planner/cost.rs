//! Jerk and reference-tracking cost.

use nalgebra::{DMatrix, DVector};

use crate::bernstein::{gram_matrices, BernsteinSegment};

use super::rows::DecisionLayout;
use super::Result;

/// `c̄ᵀ Q c̄ + H c̄`, dropping the constant `w_e ∫‖c̃*‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostTerms {
    pub quadratic: DMatrix<f64>,
    pub linear: DVector<f64>,
}

pub fn assemble_cost(
    layout: DecisionLayout,
    knots: &[f64],
    reference: &[BernsteinSegment],
    w_j: f64,
    w_e: f64,
) -> Result<CostTerms> {
    let n = layout.degree;
    let dim = layout.dim();
    let mut quadratic = DMatrix::zeros(dim, dim);
    let mut linear = DVector::zeros(dim);
    for s in 0..layout.segments {
        let grams = gram_matrices(n, knots[s + 1] - knots[s])?;
        let block = &grams.jerk * w_j + &grams.track * w_e;
        let reference = reference[s].elevate(n)?;
        for axis in 0..2 {
            let o = layout.offset(s, axis);
            quadratic.view_mut((o, o), (n + 1, n + 1)).copy_from(&block);
            let c = DVector::from_column_slice(reference.axis_coeffs(axis));
            let h = (&grams.track * c) * (-2.0 * w_e);
            linear.rows_mut(o, n + 1).copy_from(&h);
        }
    }
    Ok(CostTerms { quadratic, linear })
}

impl CostTerms {
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.quadratic * x)) + self.linear.dot(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bernstein::Interval;
    use crate::planner::qp::{solve_qp, QpData, QpStatus};
    use approx::assert_abs_diff_eq;
    use nalgebra::Vector2;

    fn seg_from(x: &DVector<f64>, layout: DecisionLayout, knots: &[f64], s: usize) -> BernsteinSegment {
        let n = layout.degree;
        let ox = layout.offset(s, 0);
        let oy = layout.offset(s, 1);
        BernsteinSegment::new(
            Interval::new(knots[s], knots[s + 1]).unwrap(),
            vec![x.rows(ox, n + 1).iter().copied().collect(), x.rows(oy, n + 1).iter().copied().collect()],
        )
        .unwrap()
    }

    #[test]
    fn cost_matches_quadrature() {
        let layout = DecisionLayout { degree: 6, segments: 2 };
        let knots = [0.0, 0.6, 1.5];
        let reference: Vec<_> = (0..2)
            .map(|s| {
                let iv = Interval::new(knots[s], knots[s + 1]).unwrap();
                BernsteinSegment::planar(iv, &[Vector2::new(1.0, 2.0 + s as f64), Vector2::new(-1.0, 0.5), Vector2::new(3.0, 0.0)])
                    .unwrap()
            })
            .collect();
        let cost = assemble_cost(layout, &knots, &reference, 1.0, 10.0).unwrap();
        let x = DVector::from_fn(layout.dim(), |i, _| ((i * 17 % 13) as f64 - 6.0) * 0.2);
        let mut quad = 0.0;
        let mut constant = 0.0;
        for s in 0..2 {
            let seg = seg_from(&x, layout, &knots, s);
            let jerk = seg.nth_derivative(3);
            let steps = 20_000;
            let h = (knots[s + 1] - knots[s]) / steps as f64;
            for i in 0..steps {
                let t = knots[s] + (i as f64 + 0.5) * h;
                let r = reference[s].eval2(t).unwrap();
                quad += (jerk.eval2(t).unwrap().norm_squared() + 10.0 * (seg.eval2(t).unwrap() - r).norm_squared()) * h;
                constant += 10.0 * r.norm_squared() * h;
            }
        }
        let value = cost.value(&x) + constant;
        assert!((value - quad).abs() <= 1e-7 * quad.abs());
    }

    #[test]
    fn pure_tracking_reproduces_reference() {
        let layout = DecisionLayout { degree: 6, segments: 1 };
        let knots = [0.0, 1.5];
        let iv = Interval::new(0.0, 1.5).unwrap();
        let reference = BernsteinSegment::planar(iv, &[Vector2::new(0.0, 1.0), Vector2::new(2.0, -1.0), Vector2::new(1.0, 3.0)]).unwrap();
        let cost = assemble_cost(layout, &knots, std::slice::from_ref(&reference), 0.0, 1.0).unwrap();
        let qp = QpData::unconstrained(cost.quadratic * 2.0, cost.linear);
        let sol = solve_qp(&qp);
        assert_eq!(sol.status, QpStatus::Optimal);
        let seg = seg_from(&sol.x, layout, &knots, 0);
        for t in iv.uniform_nodes(6) {
            assert_abs_diff_eq!(seg.eval2(t).unwrap(), reference.eval2(t).unwrap(), epsilon = 1e-8);
        }
    }
}
