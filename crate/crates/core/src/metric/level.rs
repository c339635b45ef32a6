use serde::{Deserialize, Serialize};

use super::MetricSolution;
use crate::numerics::{max_gradient, Grid, NodeKind, upwind_gradient_raw};
use crate::vector::{self, ZERO};

/// Nodes with `m <= t`.
pub fn sublevel_set(sol: &MetricSolution, t: f64) -> Vec<bool> {
    sol.m.values().iter().map(|v| *v <= t).collect()
}

/// Squared distance transform of 1D samples (lower envelope of parabolas).
fn edt_1d(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    let first = match f.iter().position(|x| x.is_finite()) {
        Some(i) => i,
        None => {
            out.iter_mut().for_each(|o| *o = f64::INFINITY);
            return;
        }
    };
    v[0] = first;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in (first + 1)..n {
        if !f[q].is_finite() {
            continue;
        }
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] && k > 0 {
                k -= 1;
                continue;
            }
            if s <= z[k] {
                // k == 0: q replaces the first parabola entirely.
                v[0] = q;
                z[1] = f64::INFINITY;
                break;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    let mut j = 0usize;
    for (q, o) in out.iter_mut().enumerate() {
        while z[j + 1] < q as f64 {
            j += 1;
        }
        let d = q as f64 - v[j] as f64;
        *o = d * d + f[v[j]];
    }
}

/// Squared Euclidean distance (in index units) of every node to the set.
pub fn edt_squared(grid: &Grid, set: &[bool]) -> Vec<f64> {
    let mut d: Vec<f64> = set.iter().map(|&b| if b { 0.0 } else { f64::INFINITY }).collect();
    let counts = grid.counts().to_vec();
    for axis in 0..grid.dim() {
        let n = counts[axis];
        let mut line = vec![0.0; n];
        let mut out = vec![0.0; n];
        for start in 0..grid.len() {
            let c = grid.coords(start);
            if c[axis] != 0 {
                continue;
            }
            let idx = |k: usize| {
                let mut cc = c;
                cc[axis] = k;
                grid.index(cc)
            };
            for (k, l) in line.iter_mut().enumerate() {
                *l = d[idx(k)];
            }
            edt_1d(&line, &mut out);
            for (k, o) in out.iter().enumerate() {
                d[idx(k)] = *o;
            }
        }
    }
    d
}

/// Hausdorff distance between two node sets in the grid metric.
pub fn hausdorff(grid: &Grid, a: &[bool], b: &[bool]) -> f64 {
    let da = edt_squared(grid, a);
    let db = edt_squared(grid, b);
    let one_sided = |set: &[bool], d: &[f64]| {
        set.iter()
            .zip(d)
            .filter(|(s, _)| **s)
            .map(|(_, v)| *v)
            .fold(0.0, f64::max)
    };
    grid.h() * one_sided(a, &db).max(one_sided(b, &da)).sqrt()
}

/// Calibrated growth constants of a converged solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// `min (m + 2)/dist` over nodes at distance `>= 2`.
    pub l_est: f64,
    /// Largest discrete gradient magnitude.
    pub big_l_est: f64,
    /// Smallest discrete gradient magnitude over interior nodes off the target.
    pub l_grad: f64,
    /// Nodes violating `l_est·dist − 2 <= m <= L_est·dist` by more than `3h·L_est`.
    pub sandwich_violations: usize,
    pub nodes_checked: usize,
}

pub fn calibrate_constants(sol: &MetricSolution) -> Calibration {
    let grid = sol.grid();
    let h = grid.h();
    let u = sol.m.values();
    let dist = sol.distances();
    let big_l_est = max_gradient(u, grid, &ZERO);
    let mut l_est = f64::INFINITY;
    let mut l_grad = f64::INFINITY;
    for i in 0..grid.len() {
        if dist[i] >= 2.0 {
            l_est = l_est.min((u[i] + 2.0) / dist[i]);
        }
        if grid.kind(i) == NodeKind::Interior && dist[i] >= 2.0 * h {
            l_grad = l_grad.min(vector::norm(&upwind_gradient_raw(u, grid, i, &ZERO)));
        }
    }
    if !l_est.is_finite() {
        l_est = l_grad;
    }
    let slack = 3.0 * h * big_l_est;
    let mut violations = 0;
    for i in 0..grid.len() {
        let lower = l_est * dist[i] - 2.0;
        let upper = big_l_est * dist[i];
        if u[i] < lower - slack || u[i] > upper + slack {
            violations += 1;
        }
    }
    Calibration {
        l_est,
        big_l_est,
        l_grad,
        sandwich_violations: violations,
        nodes_checked: grid.len(),
    }
}
