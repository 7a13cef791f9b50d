//! Splitting the horizon where occlusion regimes change.

use crate::bernstein::{BernsteinSegment, Interval};
use crate::prediction::ReachableSetTrajectory;
use crate::visibility::Regime;

use super::{PlanError, Result};

/// Points per segment used to confirm a regime.
const REGIME_SAMPLES: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationResult {
    pub knots: Vec<f64>,
    /// `[segment][target][obstacle]`.
    pub regimes: Vec<Vec<Vec<Regime>>>,
    /// Per segment, whether the two targets are apart (`Separated`) or
    /// merged (`Overlap`). Empty unless two targets are given.
    pub target_pair: Vec<Regime>,
    /// Set when knots had to be merged to respect the segment cap.
    pub merged: bool,
}

impl SegmentationResult {
    pub fn segments(&self) -> usize {
        self.knots.len() - 1
    }

    pub fn interval(&self, seg: usize) -> Interval {
        Interval::new(self.knots[seg], self.knots[seg + 1]).expect("knots increase")
    }
}

/// `‖a - b‖² - (r_a + r_b)²` on `[0, T]`, one piece per center piece.
fn gap_polynomials(a: &ReachableSetTrajectory, b: &ReachableSetTrajectory) -> Result<Vec<BernsteinSegment>> {
    let mut cuts: Vec<f64> = a.center().knots().iter().chain(b.center().knots()).copied().collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
    let end = a.horizon().min(b.horizon());
    let mut out = Vec::new();
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1].min(end));
        if hi - lo <= 1e-12 {
            continue;
        }
        let d = a.center_on(lo, hi)?.sub(&b.center_on(lo, hi)?)?;
        let r = a.radius_on(lo, hi)?.add(&b.radius_on(lo, hi)?)?;
        out.push(d.squared_norm().sub(&r.multiply(&r)?)?);
    }
    Ok(out)
}

fn gap_at(polys: &[BernsteinSegment], t: f64) -> f64 {
    let seg = polys
        .iter()
        .find(|p| t <= p.interval().end())
        .unwrap_or_else(|| polys.last().expect("non-empty"));
    let iv = seg.interval();
    seg.eval_scalar(t.clamp(iv.start(), iv.end())).expect("clamped")
}

fn regime_on(polys: &[BernsteinSegment], a: f64, b: f64) -> Regime {
    let scale = polys.iter().map(|p| p.axis_coeffs(0).iter().fold(0.0f64, |m, c| m.max(c.abs()))).fold(1.0, f64::max);
    let tol = 1e-9 * scale;
    let mid = gap_at(polys, 0.5 * (a + b));
    let all_ok = (0..=REGIME_SAMPLES).all(|i| {
        let t = a + (b - a) * i as f64 / REGIME_SAMPLES as f64;
        gap_at(polys, t) >= -tol
    });
    // Interpolation nodes used by the square-root approximation.
    let nodes_ok = (0..=crate::visibility::INTERPOLATION_DEGREE).all(|i| {
        let t = a + (b - a) * i as f64 / crate::visibility::INTERPOLATION_DEGREE as f64;
        gap_at(polys, t) >= -tol
    });
    if mid > tol && all_ok && nodes_ok {
        Regime::Separated
    } else {
        Regime::Overlap
    }
}

/// Knots at every regime change, thinned to `min_gap` spacing and capped
/// at `max_segments` segments.
pub fn segment_horizon(
    targets: &[ReachableSetTrajectory],
    obstacles: &[ReachableSetTrajectory],
    horizon: f64,
    max_segments: usize,
    min_gap: f64,
) -> Result<SegmentationResult> {
    if !(horizon > 0.0) || max_segments == 0 {
        return Err(PlanError::InvalidParams("horizon and segment cap must be positive"));
    }
    let mut pair_polys = Vec::with_capacity(targets.len() * obstacles.len());
    for q in targets {
        for o in obstacles {
            pair_polys.push(gap_polynomials(q, o)?);
        }
    }
    let target_polys = if targets.len() == 2 { Some(gap_polynomials(&targets[0], &targets[1])?) } else { None };

    let mut candidates = Vec::new();
    for set in targets.iter().chain(obstacles) {
        candidates.extend(set.center().knots().iter().copied());
    }
    for polys in pair_polys.iter().chain(target_polys.iter()) {
        for p in polys {
            match p.roots_in_interval() {
                Ok(roots) => candidates.extend(roots),
                Err(crate::bernstein::BernsteinError::IdenticallyZero) => {}
                Err(e) => return Err(e.into()),
            }
        }
    }
    candidates.retain(|&t| t > 0.0 && t < horizon);
    candidates.sort_by(f64::total_cmp);

    let mut knots = vec![0.0, horizon];
    for t in candidates {
        if knots.iter().all(|&k| (k - t).abs() >= min_gap) {
            let pos = knots.partition_point(|&k| k < t);
            knots.insert(pos, t);
        }
    }
    let mut merged = false;
    while knots.len() - 1 > max_segments {
        // Remove the interior knot bordering the shortest segment.
        let (shortest, _) = knots
            .windows(2)
            .enumerate()
            .map(|(i, w)| (i, w[1] - w[0]))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("at least one segment");
        let last = shortest + 1 == knots.len() - 1;
        let remove = if shortest == 0 {
            1
        } else if last || knots[shortest] - knots[shortest - 1] < knots[shortest + 2] - knots[shortest + 1] {
            shortest
        } else {
            shortest + 1
        };
        knots.remove(remove);
        merged = true;
    }

    let mut out = classify_knots(targets, obstacles, knots)?;
    out.merged = merged;
    Ok(out)
}

/// Regimes on a given knot sequence.
pub fn classify_knots(
    targets: &[ReachableSetTrajectory],
    obstacles: &[ReachableSetTrajectory],
    knots: Vec<f64>,
) -> Result<SegmentationResult> {
    if knots.len() < 2 || knots.windows(2).any(|w| w[1] <= w[0]) {
        return Err(PlanError::InvalidParams("knots must increase"));
    }
    let mut pair_polys = Vec::with_capacity(targets.len() * obstacles.len());
    for q in targets {
        for o in obstacles {
            pair_polys.push(gap_polynomials(q, o)?);
        }
    }
    let target_polys = if targets.len() == 2 { Some(gap_polynomials(&targets[0], &targets[1])?) } else { None };
    let segs = knots.len() - 1;
    let mut regimes = Vec::with_capacity(segs);
    let mut target_pair = Vec::new();
    for s in 0..segs {
        let (a, b) = (knots[s], knots[s + 1]);
        let mut per_target = Vec::with_capacity(targets.len());
        for qi in 0..targets.len() {
            per_target.push(
                (0..obstacles.len())
                    .map(|oi| regime_on(&pair_polys[qi * obstacles.len() + oi], a, b))
                    .collect(),
            );
        }
        regimes.push(per_target);
        if let Some(tp) = &target_polys {
            target_pair.push(regime_on(tp, a, b));
        }
    }
    Ok(SegmentationResult { knots, regimes, target_pair, merged: false })
}
