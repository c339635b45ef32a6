use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::{Grid, NodeKind};
use super::operators::{max_gradient, node_residual, EnvelopeRule, SampledField, SchemeOptions};
use crate::error::{invalid, Error, Result};
use crate::vector::ZERO;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    /// Sweeping when the problem is first order, pseudo-time otherwise.
    #[default]
    Auto,
    PseudoTime,
    Sweeping,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: f64,
    pub cfl: f64,
    pub max_iters: usize,
    /// Gradient regularization length; the grid spacing when absent.
    pub eps_reg_len: Option<f64>,
    pub envelope: EnvelopeRule,
    pub method: SolveMethod,
    /// Torus side in units of `1/δ` for corrector solves.
    pub side_factor: f64,
    /// Planar slab depth as a multiple of the largest queried `x·e`.
    pub slab_depth_factor: f64,
    /// Planar slab lateral width as a multiple of the depth.
    pub slab_width_factor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            cfl: 0.5,
            max_iters: 2_000_000,
            eps_reg_len: None,
            envelope: EnvelopeRule::Midpoint,
            method: SolveMethod::Auto,
            side_factor: 8.0,
            slab_depth_factor: 1.5,
            slab_width_factor: 2.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(invalid(format!("solver tolerance must be positive, got {}", self.tol)));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(invalid(format!("cfl must lie in (0, 1], got {}", self.cfl)));
        }
        if self.max_iters == 0 {
            return Err(invalid("max_iters must be positive"));
        }
        if let Some(e) = self.eps_reg_len {
            if !(e > 0.0) {
                return Err(invalid(format!("eps_reg_len must be positive, got {e}")));
            }
        }
        if !(self.side_factor > 0.0 && self.slab_depth_factor >= 1.0 && self.slab_width_factor > 0.0) {
            return Err(invalid("side and slab factors must be positive, depth factor >= 1"));
        }
        Ok(())
    }

    pub fn scheme_options(&self, grid: &Grid) -> SchemeOptions {
        SchemeOptions {
            eps_reg: self.eps_reg_len.unwrap_or(grid.h()),
            envelope: self.envelope,
            shift: ZERO,
            discount: 0.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MarchOutcome {
    pub values: Vec<f64>,
    pub residual: f64,
    pub iters: usize,
    pub history: Vec<(usize, f64)>,
    /// No node value ever increased.
    pub descended: bool,
    pub method: SolveMethod,
}

/// Pseudo-time step `cfl / (√d·p·a_max·L^{p−1}/h + 2dλ_max/h² + δ)`.
pub fn pseudo_time_step(grid: &Grid, sf: &SampledField, opts: &SchemeOptions, lip: f64, cfl: f64) -> f64 {
    let d = grid.dim() as f64;
    let h = grid.h();
    let rate = d.sqrt() * sf.hamiltonian_speed(lip) / h + 2.0 * d * sf.lambda_max() / (h * h) + opts.discount;
    cfl / rate
}

fn max_residual(r: &[f64], grid: &Grid) -> f64 {
    r.par_iter()
        .enumerate()
        .with_min_len(1024)
        .filter(|(i, _)| grid.kind(*i) != NodeKind::Dirichlet)
        .map(|(_, v)| v.abs())
        .reduce(|| 0.0, f64::max)
}

/// Residual sup-norm over unknown nodes.
pub fn residual_norm(u: &[f64], grid: &Grid, sf: &SampledField, mu: f64, opts: &SchemeOptions) -> f64 {
    (0..grid.len())
        .into_par_iter()
        .with_min_len(512)
        .map(|i| node_residual(u, grid, sf, i, mu, opts).abs())
        .reduce(|| 0.0, f64::max)
}

fn sweeping_applies(sf: &SampledField, opts: &SchemeOptions, mu: f64) -> bool {
    !sf.diffusion_active() && (mu > 0.0 || opts.discount > 0.0) && sf.forcing_range().0 > 0.0
}

/// Drives `u` to a fixed point of the scheme; Dirichlet values are kept from `init`.
pub fn march(
    grid: &Grid,
    sf: &SampledField,
    mu: f64,
    opts: &SchemeOptions,
    init: Vec<f64>,
    cfg: &SolverConfig,
) -> Result<MarchOutcome> {
    cfg.validate()?;
    if init.len() != grid.len() {
        return Err(invalid("initial data does not match the grid"));
    }
    if let Some(i) = init.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("initial value at node {i}")));
    }
    let use_sweeping = match cfg.method {
        SolveMethod::Sweeping => {
            if !sweeping_applies(sf, opts, mu) {
                return Err(invalid("sweeping needs a first-order problem with positive forcing and μ > 0 or a discount"));
            }
            true
        }
        SolveMethod::PseudoTime => false,
        SolveMethod::Auto => sweeping_applies(sf, opts, mu),
    };
    if use_sweeping {
        sweep(grid, sf, mu, opts, init, cfg)
    } else {
        pseudo_time(grid, sf, mu, opts, init, cfg)
    }
}

fn pseudo_time(
    grid: &Grid,
    sf: &SampledField,
    mu: f64,
    opts: &SchemeOptions,
    init: Vec<f64>,
    cfg: &SolverConfig,
) -> Result<MarchOutcome> {
    let mut u = init;
    let mut next = u.clone();
    let mut r = vec![0.0; grid.len()];
    let mut history = Vec::new();
    let mut descended = true;
    let mut dt = 0.0;
    let lip0 = max_gradient(&u, grid, &opts.shift);
    let mut lip = lip0;
    for iter in 0..cfg.max_iters {
        if iter % 64 == 0 {
            lip = lip.max(max_gradient(&u, grid, &opts.shift));
            dt = pseudo_time_step(grid, sf, opts, 1.25 * lip, cfg.cfl);
        }
        r.par_iter_mut()
            .zip(next.par_iter_mut())
            .enumerate()
            .with_min_len(512)
            .for_each(|(i, (ri, ni))| {
                let v = node_residual(&u, grid, sf, i, mu, opts);
                *ri = v;
                *ni = u[i] - dt * v;
            });
        let res = max_residual(&r, grid);
        if !res.is_finite() {
            return Err(Error::NonFinite(format!("residual at iteration {iter}")));
        }
        if iter % 256 == 0 {
            history.push((iter, res));
        }
        if res <= cfg.tol {
            history.push((iter, res));
            return Ok(MarchOutcome {
                values: u,
                residual: res,
                iters: iter,
                history,
                descended,
                method: SolveMethod::PseudoTime,
            });
        }
        if descended && r.iter().any(|v| *v < -cfg.tol) {
            descended = false;
        }
        std::mem::swap(&mut u, &mut next);
    }
    let res = residual_norm(&u, grid, sf, mu, opts);
    history.push((cfg.max_iters, res));
    Err(Error::NonConvergence {
        iters: cfg.max_iters,
        residual: res,
        history,
    })
}

/// Root of `Σ_k max(u − m_k, 0)² = f²` for sorted `m`.
fn local_solve(m: &mut [f64], f: f64) -> f64 {
    m.sort_by(|a, b| a.total_cmp(b));
    let mut u = m[0] + f;
    let (mut s1, mut s2) = (m[0], m[0] * m[0]);
    for j in 1..m.len() {
        if u <= m[j] {
            break;
        }
        s1 += m[j];
        s2 += m[j] * m[j];
        let n = (j + 1) as f64;
        let disc = s1 * s1 - n * (s2 - f * f);
        u = (s1 + disc.max(0.0).sqrt()) / n;
    }
    u
}

/// Root of the increasing convex map `δu + c·(Σ_k max(u − m_k, 0)²)^{p/2} − μ`.
fn local_solve_discounted(m: &[f64], delta: f64, c: f64, p: f64, mu: f64) -> f64 {
    let phi = |u: f64| {
        let s: f64 = m.iter().map(|mk| (u - mk).max(0.0).powi(2)).sum();
        let r = s.sqrt();
        let val = delta * u + c * r.powf(p) - mu;
        // derivative: δ + c p r^{p−2} Σ max(u − m_k, 0)
        let lin: f64 = m.iter().map(|mk| (u - mk).max(0.0)).sum();
        let der = if r > 0.0 { delta + c * p * r.powf(p - 2.0) * lin } else { delta };
        (val, der)
    };
    let m_min = m.iter().copied().fold(f64::INFINITY, f64::min);
    let lo = m_min.min(mu / delta);
    let mut step = 1.0f64.max(lo.abs() * 1e-3);
    let mut hi = lo + step;
    while phi(hi).0 < 0.0 {
        step *= 2.0;
        hi = lo + step;
    }
    // Newton from above stays above the root for convex increasing maps.
    let mut u = hi;
    for _ in 0..100 {
        let (val, der) = phi(u);
        let next = u - val / der;
        if !(next < u) || next < lo {
            break;
        }
        u = next;
    }
    u
}

fn sweep(
    grid: &Grid,
    sf: &SampledField,
    mu: f64,
    opts: &SchemeOptions,
    init: Vec<f64>,
    cfg: &SolverConfig,
) -> Result<MarchOutcome> {
    let dim = grid.dim();
    let h = grid.h();
    let p = sf.exponent();
    let delta = opts.discount;
    let shift = opts.shift;
    let speed: Vec<f64> = if delta == 0.0 {
        sf.forcing().iter().map(|a| h * (mu / a).powf(1.0 / p)).collect()
    } else {
        sf.forcing().iter().map(|a| a / h.powf(p)).collect()
    };
    let mut u = init;
    let mut history = Vec::new();
    let mut descended = true;
    let orderings = 1usize << dim;
    let mut rounds = 0;
    let max_rounds = cfg.max_iters.min(100_000);
    loop {
        let mut change: f64 = 0.0;
        for ord in 0..orderings {
            for t in 0..grid.len() {
                let mut c = grid.coords(t);
                for k in 0..dim {
                    if (ord >> k) & 1 == 1 {
                        c[k] = grid.counts()[k] - 1 - c[k];
                    }
                }
                let idx = grid.index(c);
                if grid.kind(idx) == NodeKind::Dirichlet {
                    continue;
                }
                let mut m = [f64::INFINITY; 3];
                for (k, mk) in m.iter_mut().enumerate().take(dim) {
                    if let Some(n) = grid.neighbor(c, k, -1) {
                        *mk = mk.min(u[grid.index(n)] - h * shift[k]);
                    }
                    if let Some(n) = grid.neighbor(c, k, 1) {
                        *mk = mk.min(u[grid.index(n)] + h * shift[k]);
                    }
                }
                let v = if delta == 0.0 {
                    local_solve(&mut m[..dim], speed[idx])
                } else {
                    local_solve_discounted(&m[..dim], delta, speed[idx], p, mu)
                };
                if v > u[idx] {
                    descended = false;
                }
                change = change.max((v - u[idx]).abs());
                u[idx] = v;
            }
        }
        rounds += 1;
        let res = residual_norm(&u, grid, sf, mu, opts);
        history.push((rounds, res));
        if res <= cfg.tol || change == 0.0 {
            if res > cfg.tol {
                return Err(Error::NonConvergence {
                    iters: rounds,
                    residual: res,
                    history,
                });
            }
            return Ok(MarchOutcome {
                values: u,
                residual: res,
                iters: rounds,
                history,
                descended,
                method: SolveMethod::Sweeping,
            });
        }
        if rounds >= max_rounds {
            return Err(Error::NonConvergence {
                iters: rounds,
                residual: res,
                history,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn local_solve_matches_closed_forms() {
        assert_eq!(local_solve(&mut [1.0], 0.5), 1.5);
        // Two equal neighbours: 2(u − m)² = f² ⇒ u = m + f/√2.
        let u = local_solve(&mut [0.0, 0.0], 1.0);
        assert!((u - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        // Far second neighbour is ignored.
        assert_eq!(local_solve(&mut [5.0, 0.0], 1.0), 1.0);
        let u = local_solve(&mut [0.0, 0.1, 0.2], 1.0);
        let s: f64 = [0.0, 0.1, 0.2].iter().map(|m| (u - m).max(0.0).powi(2)).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn discounted_local_solve_zeroes_the_residual() {
        for (m, delta, c, p, mu) in [
            (vec![0.3], 0.5, 2.0, 1.0, 0.0),
            (vec![-4.0, -3.9], 0.1, 16.0, 1.0, 0.0),
            (vec![1.0, 2.0, 0.5], 1.0, 4.0, 2.0, 1.0),
            (vec![-10.0, -10.0], 0.05, 64.0, 1.5, 0.0),
        ] {
            let u = local_solve_discounted(&m, delta, c, p, mu);
            let s: f64 = m.iter().map(|mk| (u - mk).max(0.0).powi(2)).sum();
            let r = delta * u + c * s.sqrt().powf(p) - mu;
            assert!(r.abs() < 1e-9 * (1.0 + u.abs()), "{m:?}: u={u}, r={r}");
        }
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig { cfl: 1.5, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = SolverConfig { tol: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
