use std::f64::consts::PI;

use crate::error::{domain, Error, Result};
use crate::multiset::WeightedPointSet;

const TAU: f64 = 2.0 * PI;

fn check(a: &WeightedPointSet, b: &WeightedPointSet) -> Result<()> {
    for s in [a, b] {
        if s.dim() != 1 {
            return Err(Error::DimensionMismatch(1, s.dim()));
        }
        if s.points().any(|p| !(0.0..TAU).contains(&p[0])) {
            return Err(domain("circle angles must lie in [0, 2π)"));
        }
    }
    let (ma, mb) = (a.total_mass(), b.total_mass());
    if (ma - mb).abs() > 1e-9 * ma.max(mb) {
        return Err(Error::MassMismatch(ma, mb));
    }
    Ok(())
}

/// Piecewise-constant `U(s) - V(s)` of the two cumulative distributions on
/// `[0, 2π)`, as `(start, end, value)` segments covering the whole circle.
pub fn circle_cdf_difference(a: &WeightedPointSet, b: &WeightedPointSet) -> Result<Vec<(f64, f64, f64)>> {
    check(a, b)?;
    let mut events: Vec<(f64, f64)> = a
        .points()
        .zip(a.masses())
        .map(|(p, &m)| (p[0], m))
        .chain(b.points().zip(b.masses()).map(|(p, &m)| (p[0], -m)))
        .collect();
    events.sort_by(|x, y| x.0.total_cmp(&y.0));

    let mut segments = Vec::with_capacity(events.len() + 1);
    let mut start = 0.0;
    let mut value = 0.0;
    for (angle, delta) in events {
        if angle > start {
            segments.push((start, angle, value));
            start = angle;
        }
        value += delta;
    }
    segments.push((start, TAU, value));
    Ok(segments)
}

fn l1_about(segments: &[(f64, f64, f64)], alpha: f64) -> f64 {
    segments.iter().map(|&(s, e, v)| (e - s) * (v - alpha).abs()).sum()
}

/// Exact transport between equal-mass sets of angles under the geodesic
/// distance: `‖U - V - α‖₁` with `α` the length-weighted median of `U - V`.
pub fn emd_circle(a: &WeightedPointSet, b: &WeightedPointSet) -> Result<f64> {
    let segments = circle_cdf_difference(a, b)?;
    let mut by_value: Vec<(f64, f64)> = segments.iter().map(|&(s, e, v)| (v, e - s)).collect();
    by_value.sort_by(|x, y| x.0.total_cmp(&y.0));
    let half = 0.5 * by_value.iter().map(|x| x.1).sum::<f64>();
    let mut acc = 0.0;
    // lower weighted median
    let mut alpha = by_value.last().map(|x| x.0).unwrap_or(0.0);
    for (v, w) in by_value {
        acc += w;
        if acc >= half {
            alpha = v;
            break;
        }
    }
    Ok(l1_about(&segments, alpha))
}

/// The same functional with the median replaced by the length-weighted mean.
pub fn emd_circle_mean_approx(a: &WeightedPointSet, b: &WeightedPointSet) -> Result<f64> {
    let segments = circle_cdf_difference(a, b)?;
    let mean = segments.iter().map(|&(s, e, v)| (e - s) * v).sum::<f64>() / TAU;
    Ok(l1_about(&segments, mean))
}
