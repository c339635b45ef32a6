use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fields::CoefficientField;
use crate::metric::solve_planar_for_queries;
use crate::numerics::SolverConfig;
use crate::stats::{linear_fit, log_log_fit};
use crate::vector::{self, Vector};

/// One `(μ, m̄)` estimate in direction `e`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeRow {
    pub e: Vector,
    pub mu: f64,
    pub mbar: f64,
    pub stderr: f64,
    pub t_window: (f64, f64),
    pub intercept: f64,
    /// Slope of `ln |E m(te)/t − m̄|` against `ln t`; absent when the drift vanishes.
    pub defect_exponent: Option<f64>,
    pub seeds: usize,
    /// `(t, E_N m(te))`.
    pub means: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SlopeTable {
    pub e: Vector,
    pub rows: Vec<SlopeRow>,
}

impl SlopeTable {
    pub fn new(e: Vector, mut rows: Vec<SlopeRow>) -> Self {
        rows.sort_by(|a, b| a.mu.total_cmp(&b.mu));
        Self { e, rows }
    }
}

/// `m(te)` for each `t`, from one planar solve per field.
pub fn planar_values(
    field: &CoefficientField,
    mu: f64,
    e: &Vector,
    t_list: &[f64],
    h: f64,
    cfg: &SolverConfig,
) -> Result<Vec<f64>> {
    let t_max = t_list.iter().copied().fold(0.0, f64::max);
    let sol = solve_planar_for_queries(field, mu, e, 0.0, t_max, h, cfg)?;
    t_list
        .iter()
        .map(|t| {
            sol.value_at(&vector::scale(e, *t))
                .ok_or_else(|| invalid(format!("query t = {t} lies outside the slab")))
        })
        .collect()
}

/// Least-squares slope of the ensemble mean of `m_μ(te)` against `t`.
pub fn estimate_mbar(
    fields: &[CoefficientField],
    mu: f64,
    e: &Vector,
    t_list: &[f64],
    h: f64,
    cfg: &SolverConfig,
) -> Result<SlopeRow> {
    if t_list.len() < 3 {
        return Err(Error::DegenerateFit(format!("slope fit needs >= 3 t values, got {}", t_list.len())));
    }
    if t_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("t_list must be strictly increasing"));
    }
    if t_list[0] < 4.0 {
        return Err(invalid("t_list must start at >= 4 range lengths"));
    }
    if fields.is_empty() {
        return Err(invalid("need at least one field realization"));
    }
    let e = vector::normalized(e).ok_or_else(|| invalid("direction must be nonzero"))?;
    let per_field: Vec<Vec<f64>> = fields
        .par_iter()
        .map(|f| planar_values(f, mu, &e, t_list, h, cfg))
        .collect::<Result<_>>()?;
    slope_row_from_values(e, mu, t_list, &per_field)
}

/// Builds a row from per-realization values `m(t_k e)`.
pub fn slope_row_from_values(e: Vector, mu: f64, t_list: &[f64], per_field: &[Vec<f64>]) -> Result<SlopeRow> {
    let n = per_field.len() as f64;
    let means: Vec<f64> = (0..t_list.len())
        .map(|k| per_field.iter().map(|v| v[k]).sum::<f64>() / n)
        .collect();
    let fit = linear_fit(t_list, &means)?;
    let drift: Vec<f64> = t_list.iter().zip(&means).map(|(t, m)| (m / t - fit.slope).abs()).collect();
    let scale = fit.slope.abs().max(1e-300);
    let defect_exponent = if drift.iter().all(|d| *d > 1e-12 * scale) {
        log_log_fit(t_list, &drift).ok().map(|f| f.slope)
    } else {
        None
    };
    Ok(SlopeRow {
        e,
        mu,
        mbar: fit.slope,
        stderr: fit.slope_stderr,
        t_window: (t_list[0], *t_list.last().unwrap()),
        intercept: fit.intercept,
        defect_exponent,
        seeds: per_field.len(),
        means: t_list.iter().copied().zip(means).collect(),
    })
}

/// `H̄(te)` from a slope table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Inversion {
    pub value: f64,
    /// Width of the final bisection bracket.
    pub bracket: f64,
    /// Bracket width plus the slope standard error mapped through the interpolant.
    pub uncertainty: f64,
}

/// Bisection for `inf{μ : m̄_μ(e) > t}` on the piecewise-linear interpolant.
pub fn invert_to_hbar(table: &SlopeTable, t: f64) -> Result<Inversion> {
    let rows = &table.rows;
    if rows.len() < 2 {
        return Err(Error::ExtendTable("need at least two μ rows".into()));
    }
    for w in rows.windows(2) {
        let noise = 2.0 * (w[0].stderr + w[1].stderr);
        if w[1].mu <= w[0].mu || w[1].mbar <= w[0].mbar - noise {
            return Err(Error::NonMonotone(format!(
                "m̄ decreases from {} at μ={} to {} at μ={}",
                w[0].mbar, w[0].mu, w[1].mbar, w[1].mu
            )));
        }
    }
    // Monotone envelope of the interpolant.
    let mut env = Vec::with_capacity(rows.len());
    let mut run = f64::NEG_INFINITY;
    for r in rows {
        run = run.max(r.mbar);
        env.push(run);
    }
    let interp = |mu: f64| {
        let k = rows.partition_point(|r| r.mu <= mu).clamp(1, rows.len() - 1);
        let (m0, m1) = (rows[k - 1].mu, rows[k].mu);
        let s = ((mu - m0) / (m1 - m0)).clamp(0.0, 1.0);
        env[k - 1] + s * (env[k] - env[k - 1])
    };
    if t < env[0] || t >= env[env.len() - 1] {
        return Err(Error::ExtendTable(format!(
            "t = {t} outside the tabulated slope range [{}, {})",
            env[0],
            env[env.len() - 1]
        )));
    }
    let mut lo = rows[0].mu;
    let mut hi = rows[rows.len() - 1].mu;
    while hi - lo > 1e-12 * hi.abs().max(1.0) {
        let mid = 0.5 * (lo + hi);
        if interp(mid) > t {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let value = hi;
    let k = rows.partition_point(|r| r.mu <= value).clamp(1, rows.len() - 1);
    let dm = (env[k] - env[k - 1]) / (rows[k].mu - rows[k - 1].mu);
    let se = rows[k - 1].stderr.max(rows[k].stderr);
    let spread = if dm > 0.0 { se / dm } else { f64::INFINITY };
    Ok(Inversion {
        value,
        bracket: hi - lo,
        uncertainty: (hi - lo) + spread,
    })
}
