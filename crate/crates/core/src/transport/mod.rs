//! Exact earth mover's distance and the quantities derived from its optimal
//! flow.
//!
//! [`emd`] is the unscaled optimum of the transportation problem that ships
//! `min(μ(A), μ(B))` units of mass; [`emd_rubner`] divides by the shipped
//! mass. The excess of the heavier set is charged by [`emdnot`] against a
//! [`SinkSpec`], giving [`emdhat_p`]; [`emi`] is the kernel obtained from
//! `emdhat_p` by anchoring at the empty set.

mod circle;
mod flow;
mod line;

pub use circle::{circle_cdf_difference, emd_circle, emd_circle_mean_approx};
pub use line::emd_1d;

use crate::error::{domain, Error, Result};
use crate::ground::{GroundMetric, SinkSpec};
use crate::multiset::WeightedPointSet;

/// An optimal flow between the supports of two sets.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub rows: usize,
    pub cols: usize,
    /// Non-zero entries `(i, j, f(a_i, b_j))`.
    pub flows: Vec<(usize, usize, f64)>,
    /// `Σ f·c` against the cost matrix the plan was solved for.
    pub cost: f64,
    pub total_flow: f64,
}

impl TransportPlan {
    fn empty(rows: usize, cols: usize) -> Self {
        TransportPlan { rows, cols, flows: Vec::new(), cost: 0.0, total_flow: 0.0 }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let mut r = vec![0.0; self.rows];
        for &(i, _, f) in &self.flows {
            r[i] += f;
        }
        r
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.cols];
        for &(_, j, f) in &self.flows {
            c[j] += f;
        }
        c
    }

    pub fn transpose(&self) -> Self {
        TransportPlan {
            rows: self.cols,
            cols: self.rows,
            flows: self.flows.iter().map(|&(i, j, f)| (j, i, f)).collect(),
            cost: self.cost,
            total_flow: self.total_flow,
        }
    }

    /// Checks the capacity, total-flow and objective constraints against the
    /// sets and the cost function the plan was solved for.
    pub fn verify(
        &self,
        a: &WeightedPointSet,
        b: &WeightedPointSet,
        cost: impl Fn(&[f64], &[f64]) -> f64,
    ) -> Result<()> {
        let (ma, mb) = (a.total_mass(), b.total_mass());
        for (i, r) in self.row_sums().into_iter().enumerate() {
            if r > a.mass(i) + 1e-9 * ma {
                return Err(Error::Solver(format!("row {i} ships {r} > {}", a.mass(i))));
            }
        }
        for (j, c) in self.col_sums().into_iter().enumerate() {
            if c > b.mass(j) + 1e-9 * mb {
                return Err(Error::Solver(format!("column {j} receives {c} > {}", b.mass(j))));
            }
        }
        if self.flows.iter().any(|&(_, _, f)| f < 0.0) {
            return Err(Error::Solver("negative flow".into()));
        }
        let want = ma.min(mb);
        if (self.total_flow - want).abs() > 1e-9 * want.max(f64::MIN_POSITIVE) {
            return Err(Error::Solver(format!("total flow {} != {want}", self.total_flow)));
        }
        let recomputed: f64 = self
            .flows
            .iter()
            .map(|&(i, j, f)| f * cost(a.point(i), b.point(j)))
            .sum();
        let scale = self
            .flows
            .iter()
            .map(|&(i, j, f)| (f * cost(a.point(i), b.point(j))).abs())
            .sum::<f64>()
            .max(f64::MIN_POSITIVE);
        if (recomputed - self.cost).abs() > 1e-9 * scale {
            return Err(Error::Solver(format!("objective {} != recomputed {recomputed}", self.cost)));
        }
        Ok(())
    }
}

fn check_dims(a: &WeightedPointSet, b: &WeightedPointSet) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    Ok(())
}

fn solve_with_costs(a: &WeightedPointSet, b: &WeightedPointSet, cost: Vec<f64>) -> Result<TransportPlan> {
    let dense = flow::min_cost_flow(a.masses(), b.masses(), &cost)?;
    let m = dense.m;
    let mut flows = Vec::new();
    let mut objective = 0.0;
    let mut total = 0.0;
    for (k, &f) in dense.flow.iter().enumerate() {
        if f > 0.0 {
            flows.push((k / m, k % m, f));
            objective += f * cost[k];
            total += f;
        }
    }
    Ok(TransportPlan { rows: a.len(), cols: b.len(), flows, cost: objective, total_flow: total })
}

fn cost_matrix<G: GroundMetric + ?Sized>(
    a: &WeightedPointSet,
    b: &WeightedPointSet,
    ground: &G,
) -> Result<Vec<f64>> {
    let mut c = Vec::with_capacity(a.len() * b.len());
    for pa in a.points() {
        for pb in b.points() {
            c.push(ground.distance(pa, pb)?);
        }
    }
    Ok(c)
}

/// Minimum-cost flow shipping `min(μ(A), μ(B))` units under `ground`.
///
/// The objective is not divided by the shipped mass; see [`emd_rubner`].
pub fn emd<G: GroundMetric + ?Sized>(
    a: &WeightedPointSet,
    b: &WeightedPointSet,
    ground: &G,
) -> Result<TransportPlan> {
    check_dims(a, b)?;
    if a.is_empty() || b.is_empty() {
        return Ok(TransportPlan::empty(a.len(), b.len()));
    }
    solve_with_costs(a, b, cost_matrix(a, b, ground)?)
}

/// [`emd`] divided by the total flow.
pub fn emd_rubner<G: GroundMetric + ?Sized>(
    a: &WeightedPointSet,
    b: &WeightedPointSet,
    ground: &G,
) -> Result<f64> {
    if a.total_mass().min(b.total_mass()) <= 0.0 {
        return Err(domain("Rubner-scaled EMD needs positive total flow"));
    }
    let plan = emd(a, b, ground)?;
    Ok(plan.cost / plan.total_flow)
}

/// Cost of sending the heavier set's unmatched mass to the sink:
/// `Σ_b (χ_B(b) - Σ_a f(a, b)) · [D(b, p) - D(p, p) / 2]`, with `B` the
/// heavier of the two sets. `plan` must be the optimal plan for `(a, b)`.
pub fn emdnot<G: GroundMetric + ?Sized>(
    a: &WeightedPointSet,
    b: &WeightedPointSet,
    plan: &TransportPlan,
    ground: &G,
    sink: &SinkSpec,
) -> Result<f64> {
    let (ma, mb) = (a.total_mass(), b.total_mass());
    if ma == mb {
        return Ok(0.0);
    }
    let swapped;
    let (heavy, received) = if ma <= mb {
        (b, plan.col_sums())
    } else {
        swapped = plan.transpose();
        (a, swapped.col_sums())
    };
    let half_self = 0.5 * sink.self_cost(ground)?;
    let mut total = 0.0;
    for (j, p) in heavy.points().enumerate() {
        let excess = (heavy.mass(j) - received[j]).max(0.0);
        if excess > 0.0 {
            total += excess * (sink.distance_to(ground, p)? - half_self);
        }
    }
    Ok(total)
}

/// `emd + emdnot`: the cost of turning one set into the other when excess
/// mass may be dumped at the sink.
pub fn emdhat_p<G: GroundMetric + ?Sized>(
    a: &WeightedPointSet,
    b: &WeightedPointSet,
    ground: &G,
    sink: &SinkSpec,
) -> Result<f64> {
    let plan = emd(a, b, ground)?;
    Ok(plan.cost + emdnot(a, b, &plan, ground, sink)?)
}

/// `emd + α |μ(A) - μ(B)| max D` for a bounded ground distance.
pub fn emdhat_alpha<G: GroundMetric + ?Sized>(
    a: &WeightedPointSet,
    b: &WeightedPointSet,
    ground: &G,
    alpha: f64,
) -> Result<f64> {
    if !(alpha >= 0.0) {
        return Err(domain(format!("alpha must be non-negative, got {alpha}")));
    }
    let max_d = ground
        .upper_bound()
        .ok_or_else(|| domain("EMDHat-alpha needs a bounded ground distance (set a threshold)"))?;
    let plan = emd(a, b, ground)?;
    Ok(plan.cost + alpha * (a.total_mass() - b.total_mass()).abs() * max_d)
}

/// Earth mover's intersection:
/// `emdhat_p(A, ∅) + emdhat_p(B, ∅) - emdhat_p(A, B)`.
pub fn emi<G: GroundMetric + ?Sized>(
    a: &WeightedPointSet,
    b: &WeightedPointSet,
    ground: &G,
    sink: &SinkSpec,
) -> Result<f64> {
    check_dims(a, b)?;
    let empty = WeightedPointSet::empty(a.dim());
    Ok(emdhat_p(a, &empty, ground, sink)? + emdhat_p(b, &empty, ground, sink)?
        - emdhat_p(a, b, ground, sink)?)
}

/// Maximum-kernel flow shipping `min(μ(A), μ(B))` units; `cost` of the
/// returned plan is `Σ f·K`.
pub fn max_kernel_flow<K>(a: &WeightedPointSet, b: &WeightedPointSet, kernel: K) -> Result<TransportPlan>
where
    K: Fn(&[f64], &[f64]) -> f64,
{
    check_dims(a, b)?;
    if a.is_empty() || b.is_empty() {
        return Ok(TransportPlan::empty(a.len(), b.len()));
    }
    let mut neg = Vec::with_capacity(a.len() * b.len());
    for pa in a.points() {
        for pb in b.points() {
            neg.push(-kernel(pa, pb));
        }
    }
    let mut plan = solve_with_costs(a, b, neg)?;
    plan.cost = -plan.cost;
    Ok(plan)
}

/// EMI computed directly from a ground kernel as `max_f Σ f(a, b) K(a, b)`.
///
/// With `K = K_p` this equals [`emi`] whenever the excess term of
/// [`emdnot`] does not depend on which points of the heavier set are left
/// unmatched: equal masses, or a sink equidistant from every point (flat
/// rate). For a point sink and unequal masses the two can differ, because
/// [`emdhat_p`] keeps the EMD-optimal flow rather than re-optimising it
/// jointly with the excess cost.
pub fn emi_from_kernel<K>(a: &WeightedPointSet, b: &WeightedPointSet, kernel: K) -> Result<f64>
where
    K: Fn(&[f64], &[f64]) -> f64,
{
    Ok(max_kernel_flow(a, b, kernel)?.cost)
}

/// `emi + Σ f · D(p, p)`, i.e. EMI with the `D(p, p)` term of the excess
/// cost discarded.
pub fn emi_prime<G: GroundMetric + ?Sized>(
    a: &WeightedPointSet,
    b: &WeightedPointSet,
    ground: &G,
    sink: &SinkSpec,
) -> Result<f64> {
    let shipped = a.total_mass().min(b.total_mass());
    Ok(emi(a, b, ground, sink)? + shipped * sink.self_cost(ground)?)
}
