//! Approximate correctors `δv − tr(A(ξ+Dv) D²v) + H(ξ+Dv, x) = 0` on a torus.

use std::path::Path;
use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::fields::CoefficientField;
use crate::numerics::{march, Grid, GridFunction, SampledField, SolveMethod, SolverConfig};
use crate::vector::{self, Vector};

#[derive(Clone, Debug)]
pub struct CorrectorSolution {
    pub v: GridFunction,
    pub delta: f64,
    pub xi: Vector,
    /// `−δ v(0)`.
    pub dvd0: f64,
    pub residual_norm: f64,
    pub iters: usize,
    pub method: SolveMethod,
    /// Sampled extremes of `a` on the torus.
    pub forcing_range: (f64, f64),
}

impl CorrectorSolution {
    /// Nodes outside `[−a_max|ξ|^p/δ − tol, −a_min|ξ|^p/δ + tol]`.
    pub fn bound_violations(&self, p: f64, tol: f64) -> usize {
        let n = vector::norm(&self.xi).powf(p);
        let lo = -self.forcing_range.1 * n / self.delta - tol;
        let hi = -self.forcing_range.0 * n / self.delta + tol;
        self.v.values().iter().filter(|v| **v < lo || **v > hi).count()
    }

    pub fn write(&self, stem: &Path, field: &CoefficientField) -> Result<()> {
        let extra = serde_json::json!({
            "xi": self.xi,
            "delta": self.delta,
            "dvd0": self.dvd0,
            "residual": self.residual_norm,
            "iters": self.iters,
            "method": self.method,
            "field": field.spec(),
        });
        self.v.write_dump(stem, extra)?;
        Ok(())
    }
}

/// Torus of side at least `side_factor/δ`, compatible with the field period,
/// with spacing at most `h`.
pub fn corrector_torus(field: &CoefficientField, delta: f64, h: f64, cfg: &SolverConfig) -> Result<Grid> {
    corrector_torus_with_side(field, cfg.side_factor / delta, h)
}

pub fn corrector_torus_with_side(field: &CoefficientField, side: f64, h: f64) -> Result<Grid> {
    if !(side > 0.0 && h > 0.0) {
        return Err(invalid("torus side and spacing must be positive"));
    }
    let (n, h) = match field.period() {
        Some(period) => {
            let cells = (side / period - 1e-9).ceil().max(1.0) as usize;
            let per = (period / h - 1e-9).ceil() as usize;
            (cells * per, period / per as f64)
        }
        None => {
            let n = (side / h - 1e-9).ceil() as usize;
            (n, side / n as f64)
        }
    };
    Grid::new_torus(field.dim(), h, n.max(3))
}

pub fn solve_corrector(
    field: &CoefficientField,
    xi: &Vector,
    delta: f64,
    torus: Grid,
    cfg: &SolverConfig,
) -> Result<CorrectorSolution> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(invalid(format!("δ must lie in (0, 1], got {delta}")));
    }
    if !torus.is_torus() || torus.dim() != field.dim() {
        return Err(invalid("corrector needs a torus of the field dimension"));
    }
    if xi[field.dim()..].iter().any(|v| *v != 0.0) || xi.iter().any(|v| !v.is_finite()) {
        return Err(invalid("ξ has components beyond the dimension or is not finite"));
    }
    cfg.validate()?;
    let side = torus.period();
    if side < cfg.side_factor / delta * (1.0 - 1e-9) {
        return Err(invalid(format!(
            "torus side {side} is below {}/δ = {}",
            cfg.side_factor,
            cfg.side_factor / delta
        )));
    }
    if let Some(period) = field.period() {
        let ratio = side / period;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return Err(invalid("torus side must be a multiple of the field period"));
        }
    }
    let grid = Arc::new(torus);
    let sf = SampledField::new(field, &grid);
    let forcing_range = sf.forcing_range();
    let xi_p = vector::norm(xi).powf(field.exponent());
    let init = vec![-forcing_range.0 * xi_p / delta; grid.len()];
    let mut opts = cfg.scheme_options(&grid);
    opts.shift = *xi;
    opts.discount = delta;
    let out = march(&grid, &sf, 0.0, &opts, init, cfg)?;
    let v = GridFunction::from_values(grid.clone(), out.values)?;
    v.ensure_finite("corrector")?;
    let origin = v.interpolate(&[0.0; 3]).expect("torus interpolation is total");
    Ok(CorrectorSolution {
        dvd0: -delta * origin,
        v,
        delta,
        xi: *xi,
        residual_norm: out.residual,
        iters: out.iters,
        method: out.method,
        forcing_range,
    })
}

/// Sup-norm distance between the correctors at two slopes.
pub fn corrector_xi_continuity(
    field: &CoefficientField,
    xi1: &Vector,
    xi2: &Vector,
    delta: f64,
    torus: Grid,
    cfg: &SolverConfig,
) -> Result<f64> {
    if vector::norm(xi1) == 0.0 || vector::norm(xi2) == 0.0 {
        return Err(invalid("both slopes must be nonzero"));
    }
    let a = solve_corrector(field, xi1, delta, torus.clone(), cfg)?;
    let b = solve_corrector(field, xi2, delta, torus, cfg)?;
    Ok(a.v
        .values()
        .iter()
        .zip(b.v.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{make_periodic_field, DiffusionSpec, PeriodicProfile};

    fn cfg() -> SolverConfig {
        SolverConfig {
            tol: 1e-9,
            ..Default::default()
        }
    }

    #[test]
    fn constant_field_is_exact() {
        for (p, xi) in [(1.0, [0.6, -0.8, 0.0]), (2.0, [1.5, 0.5, 0.0])] {
            let f = CoefficientField::constant(2, 1.7)
                .unwrap()
                .with_exponent(p)
                .unwrap()
                .with_diffusion(DiffusionSpec::CurvatureProjection { strength: 0.5 })
                .unwrap();
            let torus = corrector_torus(&f, 1.0, 0.5, &cfg()).unwrap();
            let sol = solve_corrector(&f, &xi, 1.0, torus, &cfg()).unwrap();
            let expect = 1.7 * vector::norm(&xi).powf(p);
            assert!((sol.dvd0 - expect).abs() < 1e-12, "{} vs {expect}", sol.dvd0);
        }
    }

    #[test]
    fn periodic_torus_side_is_a_period_multiple() {
        let f = make_periodic_field(PeriodicProfile::sine_1d(2.0, 1.0), 1.0).unwrap();
        let g = corrector_torus(&f, 0.3, 0.1, &cfg()).unwrap();
        let side = g.period();
        assert!(side >= 8.0 / 0.3 && (side - side.round()).abs() < 1e-9);
        assert!(g.h() <= 0.1);
    }

    #[test]
    fn one_dimensional_corrector_approaches_harmonic_mean() {
        let f = make_periodic_field(PeriodicProfile::sine_1d(2.0, 1.0), 1.0).unwrap();
        let mut prev_err = f64::INFINITY;
        for delta in [0.4, 0.2, 0.1] {
            let torus = corrector_torus(&f, delta, 1.0 / 64.0, &cfg()).unwrap();
            let sol = solve_corrector(&f, &[1.0, 0.0, 0.0], delta, torus, &cfg()).unwrap();
            assert_eq!(sol.bound_violations(1.0, 1e-9), 0);
            let err = (sol.dvd0 - 3f64.sqrt()).abs();
            assert!(err < prev_err + 1e-3, "δ={delta}: {}", sol.dvd0);
            prev_err = err;
        }
    }

    #[test]
    fn continuity_of_constant_field() {
        let f = CoefficientField::constant(1, 2.0).unwrap();
        let torus = corrector_torus(&f, 0.5, 0.25, &cfg()).unwrap();
        let d = corrector_xi_continuity(&f, &[1.0, 0.0, 0.0], &[1.5, 0.0, 0.0], 0.5, torus.clone(), &cfg()).unwrap();
        assert!((d - 2.0 * 0.5 / 0.5).abs() < 1e-9);
        let z = corrector_xi_continuity(&f, &[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0], 0.5, torus, &cfg()).unwrap();
        assert_eq!(z, 0.0);
    }

    #[test]
    fn small_torus_and_bad_delta_rejected() {
        let f = CoefficientField::constant(1, 2.0).unwrap();
        let small = Grid::new_torus(1, 0.5, 8).unwrap();
        assert!(solve_corrector(&f, &[1.0, 0.0, 0.0], 0.5, small.clone(), &cfg()).is_err());
        assert!(solve_corrector(&f, &[1.0, 0.0, 0.0], 0.0, small, &cfg()).is_err());
    }
}
