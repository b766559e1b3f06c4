//! Two-sided Mann-Whitney U test with midranks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pooled sizes up to this use the exact permutation distribution.
pub const EXACT_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// min(U_x, U_y).
    pub u: f64,
    pub u_x: f64,
    pub p_value: f64,
    pub exact: bool,
}

/// Midranks (1-based) of `values`, ties sharing their average rank.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn mann_whitney_u(x: &[f64], y: &[f64]) -> Result<MannWhitney> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::invalid("Mann-Whitney needs two non-empty samples"));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::invalid("Mann-Whitney sample contains NaN"));
    }
    let (nx, ny) = (x.len(), y.len());
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let ranks = midranks(&pooled);
    let rx: f64 = ranks[..nx].iter().sum();
    let u_x = rx - (nx * (nx + 1)) as f64 / 2.0;
    let u = u_x.min((nx * ny) as f64 - u_x);

    let (p_value, exact) = if nx + ny <= EXACT_LIMIT {
        (exact_p(&ranks, nx, u), true)
    } else {
        (normal_p(&pooled, nx, ny, u_x), false)
    };
    Ok(MannWhitney {
        u,
        u_x,
        p_value: p_value.clamp(0.0, 1.0),
        exact,
    })
}

/// Share of all C(n, nx) relabelings whose U is at least as extreme as `u`.
/// Counts subsets by doubled rank sum, which is integral even with ties.
fn exact_p(ranks: &[f64], nx: usize, u: f64) -> f64 {
    let n = ranks.len();
    let ny = n - nx;
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let max_sum: usize = doubled.iter().sum();
    // ways[k][s]: subsets of size k with doubled rank sum s.
    let mut ways = vec![vec![0f64; max_sum + 1]; nx + 1];
    ways[0][0] = 1.0;
    for &d in &doubled {
        for k in (1..=nx).rev() {
            for s in (d..=max_sum).rev() {
                let add = ways[k - 1][s - d];
                if add != 0.0 {
                    ways[k][s] += add;
                }
            }
        }
    }
    let offset = (nx * (nx + 1)) as f64 / 2.0;
    let total: f64 = ways[nx].iter().sum();
    let mut extreme = 0.0;
    for (s, &w) in ways[nx].iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let ux = s as f64 / 2.0 - offset;
        let ui = ux.min((nx * ny) as f64 - ux);
        if ui <= u + 1e-9 {
            extreme += w;
        }
    }
    extreme / total
}

/// Normal approximation with tie-corrected variance and continuity correction.
fn normal_p(pooled: &[f64], nx: usize, ny: usize, u_x: f64) -> f64 {
    let n = (nx + ny) as f64;
    let mut sorted = pooled.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let (fx, fy) = (nx as f64, ny as f64);
    let mean = fx * fy / 2.0;
    let var = fx * fy / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((u_x - mean).abs() - 0.5).max(0.0) / var.sqrt();
    libm::erfc(z / std::f64::consts::SQRT_2)
}
