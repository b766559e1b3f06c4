//! Optimal transport between uniform distributions.
//!
//! The exact path scales the marginals to integers (each source ships
//! `kb` units, each sink takes `ka`) and runs successive shortest paths
//! with Dijkstra over reduced costs. Larger instances use log-domain
//! Sinkhorn iterations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Instances with at most this many cells are solved exactly.
pub const EXACT_CELL_LIMIT: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "solver", rename_all = "snake_case")]
pub enum Solver {
    Exact,
    /// Entropic approximation; `residual` is the final L1 marginal error.
    Sinkhorn { epsilon: f64, residual: f64, iterations: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transport {
    pub distance: f64,
    pub solver: Solver,
}

fn check(cost: &[Vec<f64>]) -> Result<(usize, usize)> {
    let ka = cost.len();
    let kb = cost.first().map_or(0, Vec::len);
    if ka == 0 || kb == 0 {
        return Err(Error::invalid("transport needs a non-empty cost matrix"));
    }
    if cost.iter().any(|r| r.len() != kb) {
        return Err(Error::invalid("ragged cost matrix"));
    }
    if cost.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::invalid("non-finite transport cost"));
    }
    Ok((ka, kb))
}

/// Minimum transport cost between uniform marginals, exact when small.
pub fn transport(cost: &[Vec<f64>]) -> Result<Transport> {
    let (ka, kb) = check(cost)?;
    if ka * kb <= EXACT_CELL_LIMIT {
        Ok(Transport {
            distance: exact(cost)?,
            solver: Solver::Exact,
        })
    } else {
        sinkhorn(cost, 0.01, 1e-9, 20_000)
    }
}

struct Edge {
    to: usize,
    cap: u64,
    cost: f64,
}

/// Exact min-cost flow. Costs may be any finite values.
pub fn exact(cost: &[Vec<f64>]) -> Result<f64> {
    let (ka, kb) = check(cost)?;
    // Shift so every arc cost is non-negative; the shift adds a constant per unit.
    let min = cost.iter().flatten().copied().fold(f64::INFINITY, f64::min).min(0.0);
    let n = ka + kb + 2;
    let (s, t) = (ka + kb, ka + kb + 1);
    let mut edges: Vec<Edge> = Vec::new();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut add = |edges: &mut Vec<Edge>, u: usize, v: usize, cap: u64, c: f64| {
        adj[u].push(edges.len());
        edges.push(Edge { to: v, cap, cost: c });
        adj[v].push(edges.len());
        edges.push(Edge { to: u, cap: 0, cost: -c });
    };
    for i in 0..ka {
        add(&mut edges, s, i, kb as u64, 0.0);
    }
    for (i, row) in cost.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            add(&mut edges, i, ka + j, u64::MAX, c - min);
        }
    }
    for j in 0..kb {
        add(&mut edges, ka + j, t, ka as u64, 0.0);
    }

    let total = (ka * kb) as u64;
    let mut potential = vec![0.0f64; n];
    let mut flowed = 0u64;
    let mut total_cost = 0.0f64;
    while flowed < total {
        // Dense Dijkstra on reduced costs.
        let mut dist = vec![f64::INFINITY; n];
        let mut prev: Vec<Option<usize>> = vec![None; n];
        let mut done = vec![false; n];
        dist[s] = 0.0;
        loop {
            let mut u = None;
            for v in 0..n {
                if !done[v] && dist[v].is_finite() && u.is_none_or(|x: usize| dist[v] < dist[x]) {
                    u = Some(v);
                }
            }
            let Some(u) = u else { break };
            done[u] = true;
            for &e in &adj[u] {
                let edge = &edges[e];
                if edge.cap == 0 {
                    continue;
                }
                // Clamp tiny negative reduced costs from rounding.
                let rc = (edge.cost + potential[u] - potential[edge.to]).max(0.0);
                let nd = dist[u] + rc;
                if nd < dist[edge.to] - 1e-15 {
                    dist[edge.to] = nd;
                    prev[edge.to] = Some(e);
                }
            }
        }
        if !dist[t].is_finite() {
            return Err(Error::invalid("transport network disconnected"));
        }
        for v in 0..n {
            if dist[v].is_finite() {
                potential[v] += dist[v];
            }
        }
        let mut push = total - flowed;
        let mut v = t;
        while let Some(e) = prev[v] {
            push = push.min(edges[e].cap);
            v = edges[e ^ 1].to;
        }
        let mut v = t;
        while let Some(e) = prev[v] {
            edges[e].cap -= push;
            edges[e ^ 1].cap = edges[e ^ 1].cap.saturating_add(push);
            total_cost += push as f64 * edges[e].cost;
            v = edges[e ^ 1].to;
        }
        flowed += push;
    }
    Ok(total_cost / total as f64 + min)
}

fn logsumexp(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Log-domain Sinkhorn with uniform marginals. Returns the transport cost
/// of the regularized plan.
pub fn sinkhorn(cost: &[Vec<f64>], epsilon: f64, tol: f64, max_iter: usize) -> Result<Transport> {
    let (ka, kb) = check(cost)?;
    if epsilon <= 0.0 {
        return Err(Error::invalid("sinkhorn epsilon must be positive"));
    }
    let (la, lb) = (-(ka as f64).ln(), -(kb as f64).ln());
    let mut f = vec![0.0; ka];
    let mut g = vec![0.0; kb];
    let log_plan = |f: &[f64], g: &[f64], i: usize, j: usize| (f[i] + g[j] - cost[i][j]) / epsilon;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        for i in 0..ka {
            let lse = logsumexp((0..kb).map(|j| (g[j] - cost[i][j]) / epsilon));
            f[i] = epsilon * (la - lse);
        }
        for j in 0..kb {
            let lse = logsumexp((0..ka).map(|i| (f[i] - cost[i][j]) / epsilon));
            g[j] = epsilon * (lb - lse);
        }
        // Columns are exact after the g update; measure the row error.
        residual = (0..ka)
            .map(|i| {
                let row: f64 = (0..kb).map(|j| log_plan(&f, &g, i, j).exp()).sum();
                (row - la.exp()).abs()
            })
            .sum();
        if residual < tol {
            break;
        }
    }
    let mut distance = 0.0;
    for (i, row) in cost.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            distance += log_plan(&f, &g, i, j).exp() * c;
        }
    }
    Ok(Transport {
        distance,
        solver: Solver::Sinkhorn {
            epsilon,
            residual,
            iterations,
        },
    })
}
