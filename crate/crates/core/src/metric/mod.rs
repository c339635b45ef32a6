//! Metric problems `−tr(A D²m) + H(Dm, x) = μ`, `m = 0` on a target set.

mod level;
mod target;

use std::path::Path;
use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::fields::CoefficientField;
use crate::numerics::{march, max_gradient, Grid, GridFunction, NodeKind, SampledField, SolveMethod, SolverConfig};
use crate::vector::{self, Vector};

pub use level::{calibrate_constants, edt_squared, hausdorff, sublevel_set, Calibration};
pub use target::TargetSet;

#[derive(Clone, Debug)]
pub struct MetricSolution {
    pub m: GridFunction,
    pub mu: f64,
    pub target: TargetSet,
    pub residual_norm: f64,
    pub iters: usize,
    /// Largest discrete gradient magnitude.
    pub lip_est: f64,
    /// Initial slope `(μ/min a)^{1/p}` of the starting guess.
    pub init_slope: f64,
    pub descended: bool,
    pub method: SolveMethod,
    pub history: Vec<(usize, f64)>,
}

impl MetricSolution {
    pub fn grid(&self) -> &Arc<Grid> {
        self.m.grid()
    }

    /// Interpolated value at a world point.
    pub fn value_at(&self, x: &Vector) -> Option<f64> {
        self.m.interpolate(x)
    }

    /// Distance of every node to the target.
    pub fn distances(&self) -> Vec<f64> {
        let g = self.grid();
        (0..g.len()).map(|i| self.target.distance(&g.position(i))).collect()
    }

    /// Grid dump plus a sidecar with the solve parameters.
    pub fn write(&self, stem: &Path, field: &CoefficientField) -> Result<()> {
        let cal = calibrate_constants(self);
        let extra = serde_json::json!({
            "mu": self.mu,
            "target": self.target,
            "residual": self.residual_norm,
            "iters": self.iters,
            "l_est": cal.l_est,
            "L_est": cal.big_l_est,
            "l_grad": cal.l_grad,
            "method": self.method,
            "field": field.spec(),
        });
        self.m.write_dump(stem, extra)?;
        Ok(())
    }
}

/// Solves on `grid` with Dirichlet nodes at the target, `m = 0` there.
pub fn solve_metric(
    field: &CoefficientField,
    mu: f64,
    target: &TargetSet,
    grid: Grid,
    cfg: &SolverConfig,
) -> Result<MetricSolution> {
    solve_metric_with_data(field, mu, target, grid, |_| 0.0, cfg)
}

/// As [`solve_metric`] with prescribed values on the target nodes.
pub fn solve_metric_with_data(
    field: &CoefficientField,
    mu: f64,
    target: &TargetSet,
    grid: Grid,
    boundary: impl Fn(&Vector) -> f64,
    cfg: &SolverConfig,
) -> Result<MetricSolution> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(invalid(format!("μ must be positive, got {mu}")));
    }
    if grid.dim() != field.dim() {
        return Err(invalid("grid and field dimensions differ"));
    }
    if grid.is_torus() {
        return Err(invalid("metric problems need a non-periodic grid"));
    }
    target.validate(grid.dim())?;
    cfg.validate()?;
    let grid = match target {
        TargetSet::HalfSpace { e, offset } => grid.with_half_space(*e, -offset)?,
        _ => grid.with_dirichlet(|x| target.contains(x)),
    };
    let summary = grid.mask_summary();
    if summary.dirichlet == 0 {
        return Err(invalid("target does not meet the grid"));
    }
    if summary.interior + summary.outflow == 0 {
        return Err(invalid("grid lies inside the target"));
    }
    let grid = Arc::new(grid);
    let sf = SampledField::new(field, &grid);
    let (a_min, _) = sf.forcing_range();
    if !(a_min > 0.0) {
        return Err(invalid("forcing must be positive on the grid"));
    }
    let init_slope = (mu / a_min).powf(1.0 / field.exponent());
    let init: Vec<f64> = (0..grid.len())
        .map(|i| {
            let x = grid.position(i);
            if grid.kind(i) == NodeKind::Dirichlet {
                boundary(&x)
            } else {
                init_slope * target.distance(&x)
            }
        })
        .collect();
    let opts = cfg.scheme_options(&grid);
    let out = march(&grid, &sf, mu, &opts, init, cfg)?;
    let lip_est = max_gradient(&out.values, &grid, &opts.shift);
    let m = GridFunction::from_values(grid, out.values)?;
    m.ensure_finite("metric solution")?;
    Ok(MetricSolution {
        m,
        mu,
        target: target.clone(),
        residual_norm: out.residual,
        iters: out.iters,
        lip_est,
        init_slope,
        descended: out.descended,
        method: out.method,
        history: out.history,
    })
}

/// Rotated slab for the planar problem in direction `e`: first axis along
/// `e` from the plane `x·e = −s_offset` to depth `depth` beyond it, lateral
/// extent `width` centred on the `e` line.
pub fn planar_grid(dim: usize, h: f64, e: &Vector, s_offset: f64, depth: f64, width: f64) -> Result<Grid> {
    let e = vector::normalized(e).ok_or_else(|| invalid("direction must be nonzero"))?;
    if !(depth > 0.0 && width > 0.0 && h > 0.0) {
        return Err(invalid("slab depth, width and spacing must be positive"));
    }
    let frame = vector::orthonormal_frame(&e, dim);
    let along = (depth / h).ceil() as usize + 1;
    let half = ((0.5 * width) / h).ceil() as usize;
    let mut lower = vec![-s_offset];
    let mut counts = vec![along.max(3)];
    for _ in 1..dim {
        lower.push(-(half as f64) * h);
        counts.push(2 * half.max(1) + 1);
    }
    Grid::new_rotated_box(dim, h, &lower, &counts, frame)
}

/// Planar metric problem with target `{x·e <= −s_offset}` on `grid`.
pub fn solve_planar_metric(
    field: &CoefficientField,
    mu: f64,
    e: &Vector,
    s_offset: f64,
    grid: Grid,
    cfg: &SolverConfig,
) -> Result<MetricSolution> {
    let target = TargetSet::half_space(*e, s_offset)?;
    solve_metric(field, mu, &target, grid, cfg)
}

/// Planar solve on the default slab covering queries up to `x·e = t_max`.
pub fn solve_planar_for_queries(
    field: &CoefficientField,
    mu: f64,
    e: &Vector,
    s_offset: f64,
    t_max: f64,
    h: f64,
    cfg: &SolverConfig,
) -> Result<MetricSolution> {
    let depth = cfg.slab_depth_factor * (t_max + s_offset).max(h);
    let width = cfg.slab_width_factor * depth;
    let grid = planar_grid(field.dim(), h, e, s_offset, depth, width)?;
    solve_planar_metric(field, mu, e, s_offset, grid, cfg)
}
