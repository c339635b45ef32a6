use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::function::GridFunction;
use super::grid::{Grid, NodeKind};
use crate::fields::{Aabb, CoefficientField, DiffusionModel};
use crate::vector::{self, Matrix, Vector, MAX_DIM, ZERO};

/// Which value in `[tr_*, tr*]` the diffusion takes at vanishing gradient.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvelopeRule {
    #[default]
    Midpoint,
    Lower,
    Upper,
}

/// Per-solve options of the discrete operator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchemeOptions {
    pub eps_reg: f64,
    pub envelope: EnvelopeRule,
    /// Constant gradient shift, grid-frame components.
    pub shift: Vector,
    /// Zeroth-order coefficient (the `δ` of the corrector equation).
    pub discount: f64,
}

impl SchemeOptions {
    pub fn for_grid(grid: &Grid) -> Self {
        Self {
            eps_reg: grid.h(),
            envelope: EnvelopeRule::Midpoint,
            shift: ZERO,
            discount: 0.0,
        }
    }
}

/// Coefficients sampled at the nodes of one grid.
#[derive(Clone, Debug)]
pub struct SampledField {
    dim: usize,
    p: f64,
    a: Vec<f64>,
    a_min: f64,
    a_max: f64,
    diffusion: DiffusionModel,
    diffusion_scale: f64,
    frame: [Vector; MAX_DIM],
    rotate: bool,
}

impl SampledField {
    /// `a(x)` at the nodes.
    pub fn new(field: &CoefficientField, grid: &Grid) -> Self {
        Self::scaled(field, grid, 1.0)
    }

    /// `a(x/ε)` at the nodes, diffusion multiplied by `ε`.
    pub fn scaled(field: &CoefficientField, grid: &Grid, epsilon: f64) -> Self {
        let bbox = grid.bounding_box();
        let cover = Aabb::new(
            &bbox.lower.iter().map(|v| v / epsilon).collect::<Vec<_>>(),
            &bbox.upper.iter().map(|v| v / epsilon).collect::<Vec<_>>(),
        );
        let field = field.clone().prepared(&cover.dilate(1.0));
        let a: Vec<f64> = (0..grid.len())
            .into_par_iter()
            .map(|i| field.forcing(&vector::scale(&grid.position(i), 1.0 / epsilon)))
            .collect();
        Self::from_parts(grid, field.exponent(), a, field.diffusion().clone(), epsilon)
    }

    pub fn from_parts(grid: &Grid, p: f64, a: Vec<f64>, diffusion: DiffusionModel, diffusion_scale: f64) -> Self {
        let a_min = a.iter().copied().fold(f64::INFINITY, f64::min);
        let a_max = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let rotate = !grid.is_axis_aligned() && matches!(diffusion, DiffusionModel::Table { .. });
        Self {
            dim: grid.dim(),
            p,
            a,
            a_min,
            a_max,
            diffusion,
            diffusion_scale,
            frame: *grid.frame(),
            rotate,
        }
    }

    pub fn exponent(&self) -> f64 {
        self.p
    }

    pub fn forcing(&self) -> &[f64] {
        &self.a
    }

    pub fn forcing_range(&self) -> (f64, f64) {
        (self.a_min, self.a_max)
    }

    pub fn diffusion_active(&self) -> bool {
        self.diffusion_scale > 0.0 && self.diffusion.is_active(self.dim)
    }

    /// Largest eigenvalue of the scaled diffusion matrix.
    pub fn lambda_max(&self) -> f64 {
        if self.diffusion_active() {
            self.diffusion_scale * self.diffusion.max_eigenvalue()
        } else {
            0.0
        }
    }

    /// Scaled `A(e)` in grid-frame components for a grid-frame unit vector `e`.
    pub fn local_diffusion(&self, e: &Vector) -> Matrix {
        let mut m = if self.rotate {
            let mut ew = ZERO;
            for k in 0..self.dim {
                for (j, w) in ew.iter_mut().enumerate() {
                    *w += e[k] * self.frame[k][j];
                }
            }
            let aw = self.diffusion.matrix(&ew, self.dim);
            let r = self.frame;
            let mut out = vector::zero_matrix();
            for i in 0..self.dim {
                for j in 0..self.dim {
                    let mut s = 0.0;
                    for k in 0..3 {
                        for l in 0..3 {
                            s += r[i][k] * aw[k][l] * r[j][l];
                        }
                    }
                    out[i][j] = s;
                }
            }
            out
        } else {
            self.diffusion.matrix(e, self.dim)
        };
        for v in m.iter_mut().flatten() {
            *v *= self.diffusion_scale;
        }
        m
    }

    /// Largest speed `∂H/∂ξ` over `|ξ| <= lip`.
    pub fn hamiltonian_speed(&self, lip: f64) -> f64 {
        self.p * self.a_max.max(0.0) * lip.max(1.0).powf(self.p - 1.0)
    }
}

/// Godunov/Rouy–Tourin selection per axis: `max(ξ_k + D⁻u, −(ξ_k + D⁺u), 0)`,
/// signed toward the ascent direction. Missing neighbours count as `+∞`.
#[inline]
pub fn upwind_gradient_raw(u: &[f64], grid: &Grid, idx: usize, shift: &Vector) -> Vector {
    let c = grid.coords(idx);
    let h = grid.h();
    let center = u[idx];
    let mut g = ZERO;
    for (k, gk) in g.iter_mut().enumerate().take(grid.dim()) {
        let back = grid.neighbor(c, k, -1).map(|n| shift[k] + (center - u[grid.index(n)]) / h);
        let fwd = grid.neighbor(c, k, 1).map(|n| -(shift[k] + (u[grid.index(n)] - center) / h));
        let b = back.unwrap_or(f64::NEG_INFINITY);
        let f = fwd.unwrap_or(f64::NEG_INFINITY);
        *gk = if b >= f && b > 0.0 {
            b
        } else if f > b && f > 0.0 {
            -f
        } else {
            0.0
        };
    }
    g
}

pub fn upwind_gradient(u: &GridFunction, idx: usize) -> Vector {
    upwind_gradient_raw(u.values(), u.grid(), idx, &ZERO)
}

/// Centred gradient and second-difference Hessian; entries touching a
/// missing neighbour fall back to one-sided (gradient) or zero (Hessian).
#[inline]
pub fn centred_derivatives(u: &[f64], grid: &Grid, idx: usize) -> (Vector, Matrix) {
    let c = grid.coords(idx);
    let h = grid.h();
    let dim = grid.dim();
    let center = u[idx];
    let mut g = ZERO;
    let mut hess = vector::zero_matrix();
    for k in 0..dim {
        let m = grid.neighbor(c, k, -1).map(|n| u[grid.index(n)]);
        let p = grid.neighbor(c, k, 1).map(|n| u[grid.index(n)]);
        match (m, p) {
            (Some(m), Some(p)) => {
                g[k] = (p - m) / (2.0 * h);
                hess[k][k] = (p - 2.0 * center + m) / (h * h);
            }
            (Some(m), None) => g[k] = (center - m) / h,
            (None, Some(p)) => g[k] = (p - center) / h,
            (None, None) => {}
        }
    }
    for k in 0..dim {
        for l in (k + 1)..dim {
            let corner = |sk: isize, sl: isize| {
                grid.neighbor(c, k, sk)
                    .and_then(|n| grid.neighbor(n, l, sl))
                    .map(|n| u[grid.index(n)])
            };
            if let (Some(pp), Some(pm), Some(mp), Some(mm)) = (corner(1, 1), corner(1, -1), corner(-1, 1), corner(-1, -1)) {
                let v = (pp - pm - mp + mm) / (4.0 * h * h);
                hess[k][l] = v;
                hess[l][k] = v;
            }
        }
    }
    (g, hess)
}

fn trace_product(a: &Matrix, b: &Matrix, dim: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            s += a[i][j] * b[i][j];
        }
    }
    s
}

/// `±e_k` and `(±e_k ± e_l)/√2`.
pub fn direction_net(dim: usize) -> Vec<Vector> {
    let mut out = Vec::with_capacity(2 * dim * dim);
    for k in 0..dim {
        for s in [1.0, -1.0] {
            let mut e = ZERO;
            e[k] = s;
            out.push(e);
        }
    }
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for k in 0..dim {
        for l in (k + 1)..dim {
            for (sk, sl) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                let mut e = ZERO;
                e[k] = sk * r;
                e[l] = sl * r;
                out.push(e);
            }
        }
    }
    out
}

#[inline]
pub fn diffusion_term_raw(u: &[f64], grid: &Grid, sf: &SampledField, idx: usize, opts: &SchemeOptions) -> f64 {
    if !sf.diffusion_active() {
        return 0.0;
    }
    let dim = grid.dim();
    let (g, hess) = centred_derivatives(u, grid, idx);
    if !sf.diffusion.is_quasilinear() {
        return trace_product(&sf.local_diffusion(&ZERO), &hess, dim);
    }
    let q = vector::add(&g, &opts.shift);
    let n = vector::norm(&q);
    if n >= opts.eps_reg {
        return trace_product(&sf.local_diffusion(&vector::scale(&q, 1.0 / n)), &hess, dim);
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for e in direction_net(dim) {
        let t = trace_product(&sf.local_diffusion(&e), &hess, dim);
        lo = lo.min(t);
        hi = hi.max(t);
    }
    match opts.envelope {
        EnvelopeRule::Midpoint => 0.5 * (lo + hi),
        EnvelopeRule::Lower => lo,
        EnvelopeRule::Upper => hi,
    }
}

/// `tr(A(ĝ) D²u)` at a node, with the envelope rule when `|ĝ| < eps_reg`.
pub fn diffusion_term(u: &GridFunction, sf: &SampledField, idx: usize, eps_reg: f64) -> f64 {
    let mut opts = SchemeOptions::for_grid(u.grid());
    opts.eps_reg = eps_reg;
    diffusion_term_raw(u.values(), u.grid(), sf, idx, &opts)
}

/// Residual `δu − tr(A D²u) + H(ξ + Du) − μ` at one node; zero at Dirichlet nodes.
#[inline]
pub fn node_residual(u: &[f64], grid: &Grid, sf: &SampledField, idx: usize, mu: f64, opts: &SchemeOptions) -> f64 {
    if grid.kind(idx) == NodeKind::Dirichlet {
        return 0.0;
    }
    let g = upwind_gradient_raw(u, grid, idx, &opts.shift);
    let n = vector::norm(&g);
    let ham = if n == 0.0 { 0.0 } else { sf.a[idx] * n.powf(sf.p) };
    opts.discount * u[idx] - diffusion_term_raw(u, grid, sf, idx, opts) + ham - mu
}

pub fn residual_into(u: &[f64], grid: &Grid, sf: &SampledField, mu: f64, opts: &SchemeOptions, out: &mut [f64]) {
    out.par_iter_mut()
        .enumerate()
        .with_min_len(512)
        .for_each(|(i, r)| *r = node_residual(u, grid, sf, i, mu, opts));
}

pub fn scheme_residual(u: &GridFunction, sf: &SampledField, mu: f64, opts: &SchemeOptions) -> GridFunction {
    let mut out = vec![0.0; u.grid().len()];
    residual_into(u.values(), u.grid(), sf, mu, opts, &mut out);
    GridFunction::from_values(u.grid().clone(), out).expect("sizes match")
}

/// Largest upwind gradient magnitude over non-Dirichlet nodes.
pub fn max_gradient(u: &[f64], grid: &Grid, shift: &Vector) -> f64 {
    (0..grid.len())
        .into_par_iter()
        .with_min_len(512)
        .filter(|&i| grid.kind(i) != NodeKind::Dirichlet)
        .map(|i| vector::norm(&upwind_gradient_raw(u, grid, i, shift)))
        .reduce(|| 0.0, f64::max)
}

/// Smallest upwind gradient magnitude over interior nodes.
pub fn min_gradient(u: &[f64], grid: &Grid) -> f64 {
    (0..grid.len())
        .into_par_iter()
        .with_min_len(512)
        .filter(|&i| grid.kind(i) == NodeKind::Interior)
        .map(|i| vector::norm(&upwind_gradient_raw(u, grid, i, &ZERO)))
        .reduce(|| f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::DiffusionSpec;
    use std::sync::Arc;

    fn grid2(n: usize) -> Arc<Grid> {
        let h = 2.0 / (n - 1) as f64;
        Arc::new(Grid::new_box(2, h, &[-1.0, -1.0], &[n, n]).unwrap())
    }

    fn curvature(dim: usize) -> CoefficientField {
        CoefficientField::constant(dim, 1.0)
            .unwrap()
            .with_diffusion(DiffusionSpec::CurvatureProjection { strength: 1.0 })
            .unwrap()
    }

    #[test]
    fn linear_function_gradient_is_exact() {
        let g = grid2(33);
        let u = GridFunction::from_fn(g.clone(), |x| 3.0 * x[0]);
        for i in 0..g.len() {
            if g.kind(i) == NodeKind::Interior {
                let d = upwind_gradient(&u, i);
                assert!((d[0] - 3.0).abs() < 1e-12 && d[1] == 0.0);
            }
        }
        let z = GridFunction::constant(g.clone(), 4.0);
        assert_eq!(upwind_gradient(&z, g.index([5, 5, 0])), ZERO);
    }

    #[test]
    fn kink_picks_larger_one_sided_slope() {
        let g = Arc::new(Grid::new_box(1, 0.25, &[-1.0], &[9]).unwrap());
        let u = GridFunction::from_fn(g.clone(), |x| x[0].abs());
        assert_eq!(upwind_gradient(&u, g.index([5, 0, 0]))[0], 1.0);
        assert_eq!(upwind_gradient(&u, g.index([3, 0, 0]))[0], -1.0);
        // At the minimum both one-sided slopes point uphill and the selection is 0.
        assert_eq!(upwind_gradient(&u, g.index([4, 0, 0]))[0], 0.0);
        let v = GridFunction::from_fn(g.clone(), |x| -x[0].abs());
        assert_eq!(upwind_gradient(&v, g.index([4, 0, 0]))[0].abs(), 1.0);
    }

    #[test]
    fn paraboloid_curvature_term_is_d_minus_one() {
        let g = grid2(41);
        let f = curvature(2);
        let sf = SampledField::new(&f, &g);
        let u = GridFunction::from_fn(g.clone(), |x| 0.5 * (x[0] * x[0] + x[1] * x[1]));
        let i = g.index([30, 25, 0]);
        assert!((diffusion_term(&u, &sf, i, g.h()) - 1.0).abs() < 1e-10);
        let v = GridFunction::from_fn(g.clone(), |x| 0.5 * x[0] * x[0]);
        assert!(diffusion_term(&v, &sf, i, g.h()).abs() < 1e-10);
        let inert = CoefficientField::constant(2, 1.0).unwrap();
        assert_eq!(diffusion_term(&u, &SampledField::new(&inert, &g), i, g.h()), 0.0);
    }

    #[test]
    fn envelope_rules_bracket_midpoint() {
        let g = grid2(21);
        let sf = SampledField::new(&curvature(2), &g);
        let u = GridFunction::from_fn(g.clone(), |x| x[0] * x[0] + 0.25 * x[1] * x[1]);
        let i = g.index([10, 10, 0]);
        let mut opts = SchemeOptions::for_grid(&g);
        let mut vals = Vec::new();
        for rule in [EnvelopeRule::Lower, EnvelopeRule::Midpoint, EnvelopeRule::Upper] {
            opts.envelope = rule;
            vals.push(diffusion_term_raw(u.values(), &g, &sf, i, &opts));
        }
        // Hessian diag(2, 0.5): tr(P(e)D²u) ranges over [0.5, 2].
        assert!((vals[0] - 0.5).abs() < 1e-9 && (vals[2] - 2.0).abs() < 1e-9);
        assert!((vals[1] - 1.25).abs() < 1e-9);
    }

    #[test]
    fn direction_net_size() {
        assert_eq!(direction_net(1).len(), 2);
        assert_eq!(direction_net(2).len(), 8);
        assert_eq!(direction_net(3).len(), 18);
    }

    #[test]
    fn exact_planar_solution_has_zero_residual() {
        let g = grid2(21);
        let f = CoefficientField::constant(2, 2.0).unwrap();
        let sf = SampledField::new(&f, &g);
        let u = GridFunction::from_fn(g.clone(), |x| 0.5 * x[0]);
        let r = scheme_residual(&u, &sf, 1.0, &SchemeOptions::for_grid(&g));
        for i in 0..g.len() {
            if g.kind(i) == NodeKind::Interior {
                assert!(r.at(i).abs() < 1e-12);
            }
        }
        let z = GridFunction::constant(g.clone(), 0.0);
        let r = scheme_residual(&z, &sf, 1.0, &SchemeOptions::for_grid(&g));
        assert!(r.values().iter().all(|v| *v == -1.0));
    }

    #[test]
    fn rotated_table_diffusion_matches_world_frame() {
        let e = [0.6, 0.8, 0.0];
        let frame = vector::orthonormal_frame(&e, 2);
        let f = CoefficientField::constant(2, 1.0)
            .unwrap()
            .with_diffusion(DiffusionSpec::AnisotropicTable {
                matrix: vec![vec![2.0, 0.3], vec![0.3, 1.0]],
            })
            .unwrap();
        let g = Grid::new_rotated_box(2, 0.1, &[-1.0, -1.0], &[21, 21], frame).unwrap();
        let sf = SampledField::new(&f, &g);
        let dir_local = [0.0, 1.0, 0.0];
        let local = sf.local_diffusion(&dir_local);
        let world = f.eval_diffusion(&g.to_world(&dir_local), &ZERO);
        // vᵀ A_local v equals (Rᵀv)ᵀ A_world (Rᵀv).
        let v = [0.3, -0.7, 0.0];
        let vw = g.to_world(&v);
        let ql: f64 = (0..2).map(|i| (0..2).map(|j| v[i] * local[i][j] * v[j]).sum::<f64>()).sum();
        let qw: f64 = (0..2).map(|i| (0..2).map(|j| vw[i] * world[i][j] * vw[j]).sum::<f64>()).sum();
        assert!((ql - qw).abs() < 1e-12);
    }

    #[test]
    fn smooth_residual_converges_at_first_order() {
        let f = CoefficientField::constant(2, 1.5).unwrap().with_diffusion(DiffusionSpec::CurvatureProjection { strength: 0.5 }).unwrap();
        let exact = |x: &Vector| {
            // u = x₁ + 0.3x₁² + 0.2x₂²; Du ≠ 0 on the box.
            let du = [1.0 + 0.6 * x[0], 0.4 * x[1], 0.0];
            let hess = [[0.6, 0.0, 0.0], [0.0, 0.4, 0.0], [0.0; 3]];
            let a = f.eval_diffusion(&du, x);
            1.5 * vector::norm(&du) - (0..2).map(|i| a[i][i] * hess[i][i]).sum::<f64>()
        };
        let mut errs = Vec::new();
        for n in [21, 41, 81] {
            let g = Arc::new(Grid::new_box(2, 1.0 / (n - 1) as f64, &[0.0, -0.5], &[n, n]).unwrap());
            let sf = SampledField::new(&f, &g);
            let u = GridFunction::from_fn(g.clone(), |x| x[0] + 0.3 * x[0] * x[0] + 0.2 * x[1] * x[1]);
            let r = scheme_residual(&u, &sf, 0.0, &SchemeOptions::for_grid(&g));
            let mut e: f64 = 0.0;
            for i in 0..g.len() {
                if g.kind(i) == NodeKind::Interior {
                    e = e.max((r.at(i) - exact(&g.position(i))).abs());
                }
            }
            errs.push(e);
        }
        for w in errs.windows(2) {
            assert!(w[1] <= 0.55 * w[0], "{errs:?}");
        }
    }
}
