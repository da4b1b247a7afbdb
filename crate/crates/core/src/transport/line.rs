use crate::error::{Error, Result};
use crate::multiset::WeightedPointSet;

/// Transport between equal-mass sets on the real line under a convex cost
/// `h(a - b)`, by matching quantiles: the i-th unit of mass in ascending
/// order of one set goes to the i-th unit of the other.
pub fn emd_1d(a: &WeightedPointSet, b: &WeightedPointSet, h: impl Fn(f64) -> f64) -> Result<f64> {
    if a.dim() != 1 || b.dim() != 1 {
        return Err(Error::DimensionMismatch(1, if a.dim() != 1 { a.dim() } else { b.dim() }));
    }
    let (ma, mb) = (a.total_mass(), b.total_mass());
    if (ma - mb).abs() > 1e-9 * ma.max(mb) {
        return Err(Error::MassMismatch(ma, mb));
    }
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (a.masses().first().copied().unwrap_or(0.0), b.masses().first().copied().unwrap_or(0.0));
    let mut cost = 0.0;
    while i < a.len() && j < b.len() {
        let m = ra.min(rb);
        cost += m * h(a.point(i)[0] - b.point(j)[0]);
        ra -= m;
        rb -= m;
        // Canonical supports are sorted, so advancing the exhausted side keeps quantiles aligned.
        if ra <= rb {
            i += 1;
            ra = if i < a.len() { a.mass(i) + ra } else { 0.0 };
        } else {
            j += 1;
            rb = if j < b.len() { b.mass(j) + rb } else { 0.0 };
        }
    }
    Ok(cost)
}
