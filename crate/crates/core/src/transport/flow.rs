//! Successive-shortest-path min-cost flow on a dense bipartite graph.
//!
//! Supplies sit on the left, demands on the right, every left/right pair is
//! connected by an uncapacitated arc. The solver ships exactly
//! `min(sum supply, sum demand)` units. Dijkstra runs on reduced costs
//! (Johnson potentials), so arbitrary real costs are accepted: the initial
//! potentials come from the bipartite DAG structure, and the potentials stay
//! feasible after every augmentation.

use crate::error::{Error, Result};

/// Dense optimal flow between `n` supplies and `m` demands.
#[derive(Debug, Clone)]
pub(crate) struct DenseFlow {
    pub m: usize,
    pub flow: Vec<f64>,
}

/// Residuals below this (in pre-scaled units, totals ≤ 1) count as zero.
const EPS: f64 = 1e-14;

/// Largest power of two not below `x`, so that rescaling is exact.
fn pow2_scale(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    2f64.powi(x.log2().ceil() as i32)
}

pub(crate) fn min_cost_flow(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<DenseFlow> {
    let n = supply.len();
    let m = demand.len();
    debug_assert_eq!(cost.len(), n * m);
    let total_s: f64 = supply.iter().sum();
    let total_d: f64 = demand.iter().sum();
    let scale = pow2_scale(total_s.max(total_d));

    let mut res_s: Vec<f64> = supply.iter().map(|s| s / scale).collect();
    let mut res_d: Vec<f64> = demand.iter().map(|d| d / scale).collect();
    let mut flow = vec![0.0; n * m];
    let mut remaining = total_s.min(total_d) / scale;

    if n == 0 || m == 0 || remaining <= 0.0 {
        return Ok(DenseFlow { m, flow });
    }

    // Node layout: 0 = source, 1..=n supplies, n+1..=n+m demands, n+m+1 = target.
    let v = n + m + 2;
    let src = 0;
    let tgt = n + m + 1;
    let mut pot = vec![0.0f64; v];
    for j in 0..m {
        pot[1 + n + j] = (0..n).map(|i| cost[i * m + j]).fold(f64::INFINITY, f64::min);
    }
    pot[tgt] = (0..m).map(|j| pot[1 + n + j]).fold(f64::INFINITY, f64::min);

    let mut dist = vec![0.0f64; v];
    let mut prev = vec![usize::MAX; v];
    let mut done = vec![false; v];
    let max_rounds = 4 * (n * m + n + m) + 64;

    for _round in 0..max_rounds {
        if remaining <= EPS {
            break;
        }
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        prev.iter_mut().for_each(|p| *p = usize::MAX);
        done.iter_mut().for_each(|d| *d = false);
        dist[src] = 0.0;

        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for (k, (&d, &fin)) in dist.iter().zip(&done).enumerate() {
                if !fin && d < best {
                    best = d;
                    u = k;
                }
            }
            if u == usize::MAX || u == tgt {
                break;
            }
            done[u] = true;
            let du = dist[u];
            let relax = |w: usize, c: f64, dist: &mut Vec<f64>, prev: &mut Vec<usize>| {
                let rc = (c + pot[u] - pot[w]).max(0.0);
                if du + rc < dist[w] {
                    dist[w] = du + rc;
                    prev[w] = u;
                }
            };
            if u == src {
                for i in 0..n {
                    if res_s[i] > EPS {
                        relax(1 + i, 0.0, &mut dist, &mut prev);
                    }
                }
            } else if u <= n {
                let i = u - 1;
                for j in 0..m {
                    if !done[1 + n + j] {
                        relax(1 + n + j, cost[i * m + j], &mut dist, &mut prev);
                    }
                }
            } else {
                let j = u - 1 - n;
                for i in 0..n {
                    if flow[i * m + j] > EPS && !done[1 + i] {
                        relax(1 + i, -cost[i * m + j], &mut dist, &mut prev);
                    }
                }
                if res_d[j] > EPS {
                    relax(tgt, 0.0, &mut dist, &mut prev);
                }
            }
        }

        if !dist[tgt].is_finite() {
            break;
        }
        let dt = dist[tgt];
        for k in 0..v {
            pot[k] += dist[k].min(dt);
        }

        // Bottleneck along target <- demand <- supply <- ... <- source.
        let mut push = remaining;
        let mut w = tgt;
        while w != src {
            let u = prev[w];
            if u == src {
                push = push.min(res_s[w - 1]);
            } else if w == tgt {
                push = push.min(res_d[u - 1 - n]);
            } else if u > n {
                // reverse arc demand -> supply cancels flow
                push = push.min(flow[(w - 1) * m + (u - 1 - n)]);
            }
            w = u;
        }

        let mut w = tgt;
        while w != src {
            let u = prev[w];
            if u == src {
                res_s[w - 1] -= push;
            } else if w == tgt {
                res_d[u - 1 - n] -= push;
            } else if u <= n {
                flow[(u - 1) * m + (w - 1 - n)] += push;
            } else {
                let f = &mut flow[(w - 1) * m + (u - 1 - n)];
                *f -= push;
                if *f < EPS {
                    *f = 0.0;
                }
            }
            w = u;
        }
        remaining -= push;
    }

    if remaining > 1e-10 {
        return Err(Error::Solver(format!(
            "min-cost flow stalled with {:.3e} of {:.3e} units unrouted ({n}x{m})",
            remaining * scale,
            total_s.min(total_d)
        )));
    }
    for f in &mut flow {
        *f *= scale;
    }
    Ok(DenseFlow { m, flow })
}
