//! Time-dependent problems: the oscillatory equation at scale `ε` and the
//! homogenized equation `∂t u + H̄(Du) = 0`.

mod initial;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::effective::EffectiveHamiltonianEstimate;
use crate::error::{invalid, Error, Result};
use crate::fields::CoefficientField;
use crate::numerics::{node_residual, EnvelopeRule, Grid, GridFunction, SampledField, SchemeOptions};
use crate::stats::log_log_fit;
use crate::vector::{self, Vector, ZERO};

pub use initial::InitialCondition;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionConfig {
    pub h_len: f64,
    pub cfl: f64,
    /// Snapshot times; the horizon is always included.
    pub checkpoints_t: Vec<f64>,
    /// Multiplier on the padding beyond the observation ball.
    pub padding_factor: f64,
    /// Fixed time step; must respect the stability bound.
    pub dt: Option<f64>,
    pub eps_reg_len: Option<f64>,
    pub envelope: EnvelopeRule,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            h_len: 1.0 / 64.0,
            cfl: 0.5,
            checkpoints_t: Vec::new(),
            padding_factor: 1.0,
            dt: None,
            eps_reg_len: None,
            envelope: EnvelopeRule::Midpoint,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.h_len > 0.0 && self.h_len.is_finite()) {
            return Err(invalid("h_len must be positive"));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(invalid("cfl must lie in (0, 1]"));
        }
        if !(self.padding_factor >= 1.0) {
            return Err(invalid("padding_factor must be >= 1"));
        }
        if self.checkpoints_t.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return Err(invalid("checkpoint times must be finite and nonnegative"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub t: f64,
    pub u: GridFunction,
}

#[derive(Clone, Debug)]
pub struct EvolutionRun {
    /// Zero for the homogenized problem.
    pub epsilon: f64,
    pub g: InitialCondition,
    pub t_final: f64,
    pub r_obs: f64,
    pub snapshots: Vec<Snapshot>,
    pub dt: f64,
    pub steps: usize,
    pub padding: f64,
    /// Measured space-time Lipschitz constant on the observation ball.
    pub lip: f64,
}

impl EvolutionRun {
    pub fn grid(&self) -> &Arc<Grid> {
        self.snapshots[0].u.grid()
    }

    /// Nodes inside the closed observation ball.
    pub fn observed_nodes(&self) -> Vec<usize> {
        let g = self.grid();
        (0..g.len())
            .filter(|&i| vector::norm(&g.position(i)) <= self.r_obs + 1e-12)
            .collect()
    }

    pub fn final_state(&self) -> &GridFunction {
        &self.snapshots[self.snapshots.len() - 1].u
    }

    /// Level crossing of `u(·e, t)` on `[−R, R]` at each snapshot, and the
    /// least-squares speed of the crossing point.
    pub fn front_speed(&self, e: &Vector, level: f64) -> Result<(f64, Vec<(f64, f64)>)> {
        let e = vector::normalized(e).ok_or_else(|| invalid("direction must be nonzero"))?;
        let h = self.grid().h();
        let n = (2.0 * self.r_obs / h).round() as usize;
        let mut track = Vec::new();
        for snap in &self.snapshots {
            let mut prev: Option<(f64, f64)> = None;
            for k in 0..=n {
                let s = -self.r_obs + k as f64 * h;
                let Some(v) = snap.u.interpolate(&vector::scale(&e, s)) else { continue };
                if let Some((s0, v0)) = prev {
                    if (v0 - level) * (v - level) <= 0.0 && v != v0 {
                        track.push((snap.t, s0 + (level - v0) / (v - v0) * (s - s0)));
                        break;
                    }
                }
                prev = Some((s, v));
            }
        }
        if track.len() < 2 {
            return Err(Error::DegenerateFit("front left the observation window".into()));
        }
        let t: Vec<f64> = track.iter().map(|p| p.0).collect();
        let x: Vec<f64> = track.iter().map(|p| p.1).collect();
        Ok((crate::stats::linear_fit(&t, &x)?.slope, track))
    }
}

fn checkpoint_times(t_final: f64, cfg: &EvolutionConfig) -> Vec<f64> {
    let mut ts: Vec<f64> = cfg.checkpoints_t.iter().copied().filter(|t| *t > 0.0 && *t < t_final).collect();
    ts.push(t_final);
    ts.sort_by(|a, b| a.total_cmp(b));
    ts.dedup();
    ts
}

/// Number of steps of size at most `dt_max` hitting every checkpoint.
fn step_count(times: &[f64], dt_max: f64) -> usize {
    let mut t = 0.0;
    let mut n = 0;
    for &tc in times {
        n += ((tc - t) / dt_max).ceil().max(1.0) as usize;
        t = tc;
    }
    n
}

fn centred_grid(dim: usize, h: f64, half: f64) -> Result<Grid> {
    let n = (half / h).ceil() as usize;
    let lower = vec![-(n as f64) * h; dim];
    let counts = vec![2 * n + 1; dim];
    Grid::new_box(dim, h, &lower, &counts)
}

fn measure_lipschitz(snaps: &[Snapshot], observed: &[usize]) -> f64 {
    let grid = snaps[0].u.grid();
    let h = grid.h();
    let mut lip: f64 = 0.0;
    let inside: std::collections::HashSet<usize> = observed.iter().copied().collect();
    for s in snaps {
        let u = s.u.values();
        for &i in observed {
            for k in 0..grid.dim() {
                if let Some(j) = grid.neighbor_index(i, k, 1) {
                    if inside.contains(&j) {
                        lip = lip.max((u[j] - u[i]).abs() / h);
                    }
                }
            }
        }
    }
    for w in snaps.windows(2) {
        let dt = w[1].t - w[0].t;
        if dt > 0.0 {
            for &i in observed {
                lip = lip.max((w[1].u.at(i) - w[0].u.at(i)).abs() / dt);
            }
        }
    }
    lip
}

fn validate_common(g: &InitialCondition, t_final: f64, r_obs: f64, cfg: &EvolutionConfig) -> Result<()> {
    g.validate()?;
    cfg.validate()?;
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(invalid("horizon T must be positive"));
    }
    if !(r_obs > 0.0 && r_obs.is_finite()) {
        return Err(invalid("observation radius must be positive"));
    }
    Ok(())
}

/// Explicit monotone stepping of `∂t u = ε tr(A D²u) − H(Du, x/ε)`.
pub fn solve_oscillatory(
    field: &CoefficientField,
    epsilon: f64,
    g: &InitialCondition,
    t_final: f64,
    r_obs: f64,
    cfg: &EvolutionConfig,
) -> Result<EvolutionRun> {
    validate_common(g, t_final, r_obs, cfg)?;
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(invalid(format!("ε must lie in (0, 1], got {epsilon}")));
    }
    let dim = field.dim();
    let h = cfg.h_len;
    let d = dim as f64;
    let p = field.exponent();
    let lip_g = g.lipschitz().max(1.0);
    let lambda = epsilon * field.diffusion().max_eigenvalue() * if field.diffusion().is_active(dim) { 1.0 } else { 0.0 };
    let times = checkpoint_times(t_final, cfg);
    // Forcing bound on the domain: exact for periodic fields, sampled otherwise.
    let mut a_max = if field.is_periodic() { field.forcing_bounds().1 } else { 0.0 };
    let mut pad = 0.0;
    let mut grid = None;
    for _ in 0..8 {
        let rate = d.sqrt() * p * a_max.max(0.0) * lip_g.powf(p - 1.0) / h + 2.0 * d * lambda / (h * h);
        let dt_max = cfg.dt.unwrap_or(if rate > 0.0 { cfg.cfl / rate } else { t_final });
        pad = if lambda > 0.0 {
            let sigma = (2.0 * field.diffusion().max_eigenvalue()).sqrt();
            let speed = p * a_max * lip_g.powf(p - 1.0);
            speed * t_final + 2.0 * (epsilon * t_final).sqrt() * sigma
        } else {
            step_count(&times, dt_max) as f64 * h
        };
        pad = cfg.padding_factor * pad + 2.0 * h;
        let gr = centred_grid(dim, h, r_obs + pad)?;
        if field.is_periodic() {
            grid = Some(gr);
            break;
        }
        let sf = SampledField::scaled(field, &gr, epsilon);
        let sampled = sf.forcing_range().1;
        if sampled <= a_max {
            grid = Some(gr);
            break;
        }
        a_max = sampled;
    }
    let grid = Arc::new(grid.ok_or_else(|| invalid("padding iteration did not settle"))?);
    let sf = SampledField::scaled(field, &grid, epsilon);
    let a_top = sf.forcing_range().1;
    let rate = d.sqrt() * p * a_top.max(0.0) * lip_g.powf(p - 1.0) / h + 2.0 * d * sf.lambda_max() / (h * h);
    let bound = if rate > 0.0 { 1.0 / rate } else { f64::INFINITY };
    let dt_max = cfg.dt.unwrap_or(cfg.cfl * bound);
    if dt_max > bound * (1.0 + 1e-12) {
        return Err(Error::Cfl { dt: dt_max, bound });
    }
    let opts = SchemeOptions {
        eps_reg: cfg.eps_reg_len.unwrap_or(h),
        envelope: cfg.envelope,
        shift: ZERO,
        discount: 0.0,
    };
    let step = |u: &[f64], next: &mut [f64], dt: f64| {
        next.par_iter_mut()
            .enumerate()
            .with_min_len(512)
            .for_each(|(i, n)| *n = u[i] - dt * node_residual(u, &grid, &sf, i, 0.0, &opts));
    };
    let (snapshots, steps, dt_used) = march_in_time(&grid, g, &times, dt_max, step)?;
    finish(epsilon, g, t_final, r_obs, snapshots, dt_used, steps, pad)
}

#[allow(clippy::type_complexity)]
fn march_in_time(
    grid: &Arc<Grid>,
    g: &InitialCondition,
    times: &[f64],
    dt_max: f64,
    step: impl Fn(&[f64], &mut [f64], f64),
) -> Result<(Vec<Snapshot>, usize, f64)> {
    let mut u: Vec<f64> = (0..grid.len()).map(|i| g.eval(&grid.position(i))).collect();
    let mut next = u.clone();
    let mut snapshots = vec![Snapshot {
        t: 0.0,
        u: GridFunction::from_values(grid.clone(), u.clone())?,
    }];
    let mut t = 0.0;
    let mut steps = 0;
    let mut dt_seen: f64 = 0.0;
    for &tc in times {
        let n = ((tc - t) / dt_max).ceil().max(1.0) as usize;
        let dt = (tc - t) / n as f64;
        dt_seen = dt_seen.max(dt);
        for _ in 0..n {
            step(&u, &mut next, dt);
            std::mem::swap(&mut u, &mut next);
        }
        steps += n;
        t = tc;
        let snap = GridFunction::from_values(grid.clone(), u.clone())?;
        snap.ensure_finite(&format!("evolution at t = {tc}"))?;
        snapshots.push(Snapshot { t: tc, u: snap });
    }
    Ok((snapshots, steps, dt_seen))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    epsilon: f64,
    g: &InitialCondition,
    t_final: f64,
    r_obs: f64,
    snapshots: Vec<Snapshot>,
    dt: f64,
    steps: usize,
    padding: f64,
) -> Result<EvolutionRun> {
    let mut run = EvolutionRun {
        epsilon,
        g: g.clone(),
        t_final,
        r_obs,
        snapshots,
        dt,
        steps,
        padding,
        lip: 0.0,
    };
    let obs = run.observed_nodes();
    run.lip = measure_lipschitz(&run.snapshots, &obs);
    Ok(run)
}

/// Candidate abscissae for the extrema on `[lo, hi]`: end points, zero and
/// the ray breakpoints (exact in one dimension), or end points, zero and the
/// midpoint in two dimensions.
fn candidates(lo: f64, hi: f64, breaks: &[f64], dim: usize, out: &mut Vec<f64>) {
    out.clear();
    out.push(lo);
    if hi > lo {
        out.push(hi);
    }
    if lo < 0.0 && hi > 0.0 {
        out.push(0.0);
    }
    if dim == 1 {
        for &b in breaks {
            for s in [b, -b] {
                if s > lo && s < hi {
                    out.push(s);
                }
            }
        }
    } else if hi > lo {
        out.push(0.5 * (lo + hi));
    }
}

/// Godunov flux: `ext_{p ∈ I(a, b)} H̄(p)` nested over axes, `min` when
/// `a <= b` and `max` otherwise.
fn godunov_flux(hbar: &EffectiveHamiltonianEstimate, breaks: &[f64], a: &Vector, b: &Vector, dim: usize) -> Result<f64> {
    fn ext(
        hbar: &EffectiveHamiltonianEstimate,
        breaks: &[f64],
        a: &Vector,
        b: &Vector,
        dim: usize,
        axis: usize,
        p: &mut Vector,
    ) -> Result<f64> {
        if axis == dim {
            return hbar.eval(p);
        }
        let (lo, hi, take_min) = if a[axis] <= b[axis] {
            (a[axis], b[axis], true)
        } else {
            (b[axis], a[axis], false)
        };
        let mut best = if take_min { f64::INFINITY } else { f64::NEG_INFINITY };
        let mut cands = Vec::with_capacity(8);
        candidates(lo, hi, breaks, dim, &mut cands);
        for c in cands {
            p[axis] = c;
            let v = ext(hbar, breaks, a, b, dim, axis + 1, p)?;
            best = if take_min { best.min(v) } else { best.max(v) };
        }
        Ok(best)
    }
    let mut p = ZERO;
    ext(hbar, breaks, a, b, dim, 0, &mut p)
}

/// `∂t u + H̄(Du) = 0` with the tabulated `H̄`.
pub fn solve_homogenized(
    hbar: &EffectiveHamiltonianEstimate,
    g: &InitialCondition,
    t_final: f64,
    r_obs: f64,
    cfg: &EvolutionConfig,
) -> Result<EvolutionRun> {
    validate_common(g, t_final, r_obs, cfg)?;
    let dim = hbar.dim;
    let d = dim as f64;
    let h = cfg.h_len;
    let need = d.sqrt() * g.lipschitz();
    if need > hbar.max_magnitude() * (1.0 + 1e-12) {
        return Err(Error::ExtendTable(format!(
            "initial gradients up to {need} exceed the tabulated {}",
            hbar.max_magnitude()
        )));
    }
    let lip_h = hbar.lipschitz();
    let bound = if lip_h > 0.0 { h / (d * lip_h) } else { f64::INFINITY };
    let dt_max = match cfg.dt {
        Some(dt) if dt > bound * (1.0 + 1e-12) => return Err(Error::Cfl { dt, bound }),
        Some(dt) => dt,
        None if bound.is_finite() => cfg.cfl * bound,
        None => t_final,
    };
    let times = checkpoint_times(t_final, cfg);
    let pad = cfg.padding_factor * step_count(&times, dt_max) as f64 * h + 2.0 * h;
    let grid = Arc::new(centred_grid(dim, h, r_obs + pad)?);
    let breaks = hbar.breakpoints();
    let failure = std::sync::Mutex::new(None);
    let step = |u: &[f64], next: &mut [f64], dt: f64| {
        next.par_iter_mut().enumerate().with_min_len(256).for_each(|(i, n)| {
            let c = grid.coords(i);
            let mut a = ZERO;
            let mut b = ZERO;
            for k in 0..dim {
                let m = grid.neighbor(c, k, -1).map(|j| (u[i] - u[grid.index(j)]) / h);
                let p = grid.neighbor(c, k, 1).map(|j| (u[grid.index(j)] - u[i]) / h);
                let (dm, dp) = match (m, p) {
                    (Some(m), Some(p)) => (m, p),
                    (Some(m), None) => (m, m),
                    (None, Some(p)) => (p, p),
                    (None, None) => (0.0, 0.0),
                };
                a[k] = dm;
                b[k] = dp;
            }
            match godunov_flux(hbar, &breaks, &a, &b, dim) {
                Ok(flux) => *n = u[i] - dt * flux,
                Err(e) => {
                    *n = f64::NAN;
                    failure.lock().expect("poisoned").get_or_insert(e.to_string());
                }
            }
        });
    };
    let result = march_in_time(&grid, g, &times, dt_max, step);
    if let Some(msg) = failure.into_inner().expect("poisoned") {
        return Err(Error::ExtendTable(msg));
    }
    let (snapshots, steps, dt_used) = result?;
    finish(0.0, g, t_final, r_obs, snapshots, dt_used, steps, pad)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomogenizationError {
    /// `(ε, sup over B_R × checkpoints of |u^ε − u|)`, sorted by decreasing ε.
    pub rows: Vec<(f64, f64)>,
    /// Fitted slope of `ln error` against `ln ε`.
    pub alpha: Option<f64>,
    pub alpha_stderr: Option<f64>,
    pub strictly_decreasing: bool,
}

/// Sup-error of each oscillatory run against the homogenized run.
pub fn homogenization_error(osc: &[EvolutionRun], hom: &EvolutionRun) -> Result<HomogenizationError> {
    if osc.is_empty() {
        return Err(invalid("no oscillatory runs supplied"));
    }
    let mut rows = Vec::new();
    for run in osc {
        if run.g != hom.g || (run.t_final - hom.t_final).abs() > 1e-12 || (run.r_obs - hom.r_obs).abs() > 1e-12 {
            return Err(invalid("oscillatory and homogenized runs use different g, T or R"));
        }
        if run.snapshots.len() != hom.snapshots.len()
            || run.snapshots.iter().zip(&hom.snapshots).any(|(a, b)| (a.t - b.t).abs() > 1e-12)
        {
            return Err(invalid("checkpoint times differ"));
        }
        let obs = run.observed_nodes();
        let grid = run.grid();
        let mut sup: f64 = 0.0;
        for (s, t) in run.snapshots.iter().zip(&hom.snapshots) {
            for &i in &obs {
                let x = grid.position(i);
                let v = t
                    .u
                    .interpolate(&x)
                    .ok_or_else(|| invalid("homogenized grid does not cover the observation ball"))?;
                sup = sup.max((s.u.at(i) - v).abs());
            }
        }
        rows.push((run.epsilon, sup));
    }
    rows.sort_by(|a, b| b.0.total_cmp(&a.0));
    let strictly_decreasing = rows.windows(2).all(|w| w[1].1 < w[0].1);
    let (alpha, alpha_stderr) = if rows.len() >= 2 && rows.iter().all(|r| r.1 > 0.0) {
        let e: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let v: Vec<f64> = rows.iter().map(|r| r.1).collect();
        match log_log_fit(&e, &v) {
            Ok(f) => (Some(f.slope), Some(f.slope_stderr)),
            Err(_) => (None, None),
        }
    } else {
        (None, None)
    };
    Ok(HomogenizationError {
        rows,
        alpha,
        alpha_stderr,
        strictly_decreasing,
    })
}

/// Largest difference on the observation ball between two runs sharing the ball nodes.
pub fn max_difference_on_ball(a: &EvolutionRun, b: &EvolutionRun) -> Result<f64> {
    let mut sup: f64 = 0.0;
    for (sa, sb) in a.snapshots.iter().zip(&b.snapshots) {
        for i in a.observed_nodes() {
            let x = a.grid().position(i);
            let v = sb.u.interpolate(&x).ok_or_else(|| invalid("grids do not share the ball"))?;
            sup = sup.max((sa.u.at(i) - v).abs());
        }
    }
    Ok(sup)
}

/// Re-runs with doubled padding and the same time step; returns the largest
/// change on the observation ball.
pub fn padding_check(
    field: &CoefficientField,
    epsilon: f64,
    g: &InitialCondition,
    t_final: f64,
    r_obs: f64,
    cfg: &EvolutionConfig,
) -> Result<f64> {
    let base = solve_oscillatory(field, epsilon, g, t_final, r_obs, cfg)?;
    let doubled_cfg = EvolutionConfig {
        padding_factor: 2.0 * cfg.padding_factor,
        dt: Some(base.dt),
        ..cfg.clone()
    };
    let doubled = solve_oscillatory(field, epsilon, g, t_final, r_obs, &doubled_cfg)?;
    max_difference_on_ball(&base, &doubled)
}
