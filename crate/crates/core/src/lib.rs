//! Trajectory planning for a drone that keeps moving targets in view.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bernstein;
pub mod prediction;
pub mod visibility;
pub mod reference;
pub mod planner;
pub mod sim;
