//! Sampled certificates for the coercivity conditions on `(σ, H)`.

use serde::{Deserialize, Serialize};

use super::{Aabb, CoefficientField, DiffusionModel, LsParams, FD_STEP};
use crate::error::{invalid, Error, Result};
use crate::vector::{self, Matrix, Vector, ZERO};

/// Points per axis of the η-net over `B_κ(ξ)`.
const NET_POINTS: usize = 9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoercivityReport {
    pub theta: f64,
    pub kappa: f64,
    pub rho_floor: f64,
    pub r_test: f64,
    /// Sampled infimum of the functional over the (ξ, x) grids.
    pub infimum: f64,
    pub argmin_xi: Vector,
    pub argmin_x: Vector,
    pub samples: usize,
    pub passed: bool,
}

fn eta_net(dim: usize, kappa: f64) -> Vec<Vector> {
    let mut out = Vec::new();
    let step = 2.0 * kappa / (NET_POINTS - 1) as f64;
    let n = |d: usize| if d < dim { NET_POINTS } else { 1 };
    for i0 in 0..n(0) {
        for i1 in 0..n(1) {
            for i2 in 0..n(2) {
                let mut o = ZERO;
                let idx = [i0, i1, i2];
                for k in 0..dim {
                    o[k] = -kappa + idx[k] as f64 * step;
                }
                if vector::norm(&o) <= kappa * (1.0 + 1e-12) {
                    out.push(o);
                }
            }
        }
    }
    out
}

fn sigma_x_derivative_norm(field: &CoefficientField, eta: &Vector, x: &Vector) -> f64 {
    let dim = field.dim();
    let step = FD_STEP;
    let mut acc = 0.0;
    for k in 0..dim {
        let mut xp = *x;
        let mut xm = *x;
        xp[k] += step;
        xm[k] -= step;
        let sp = field.eval_sigma(eta, &xp);
        let sm = field.eval_sigma(eta, &xm);
        for i in 0..3 {
            for j in 0..3 {
                acc += ((sp[i][j] - sm[i][j]) / (2.0 * step)).powi(2);
            }
        }
    }
    acc.sqrt()
}

fn hamiltonian_xi_gradient_norm(field: &CoefficientField, eta: &Vector, x: &Vector) -> f64 {
    let step = FD_STEP * vector::norm(eta).max(1.0);
    let mut acc = 0.0;
    for k in 0..field.dim() {
        let mut ep = *eta;
        let mut em = *eta;
        ep[k] += step;
        em[k] -= step;
        acc += ((field.eval_hamiltonian(&ep, x) - field.eval_hamiltonian(&em, x)) / (2.0 * step)).powi(2);
    }
    acc.sqrt()
}

fn hamiltonian_x_gradient_norm(field: &CoefficientField, eta: &Vector, x: &Vector) -> f64 {
    let step = FD_STEP * field.structural_bounds().range;
    let mut acc = 0.0;
    for k in 0..field.dim() {
        let mut xp = *x;
        let mut xm = *x;
        xp[k] += step;
        xm[k] -= step;
        acc += ((field.eval_hamiltonian(eta, &xp) - field.eval_hamiltonian(eta, &xm)) / (2.0 * step)).powi(2);
    }
    acc.sqrt()
}

fn frob(m: &Matrix) -> f64 {
    vector::frobenius(m)
}

/// Sampled value of the coercivity functional at `(ξ, x)`: the infimum over
/// the η-net of `θ(1−2θ)H² − (1+κ)³|σ|²|D_xσ|²|ξ|² − θ(1+κ)²|σ|²|ξ|(|D_xH| + κ|D_ξH|)`.
pub fn coercivity_functional(field: &CoefficientField, params: &LsParams, xi: &Vector, x: &Vector) -> f64 {
    let theta = params.theta;
    let kappa = params.kappa;
    let xi_norm = vector::norm(xi);
    let mut inf = f64::INFINITY;
    for o in eta_net(field.dim(), kappa) {
        let eta = vector::add(xi, &o);
        if vector::norm(&eta) < 1e-12 {
            continue;
        }
        let h = field.eval_hamiltonian(&eta, x);
        let sigma2 = frob(&field.eval_sigma(&eta, x)).powi(2);
        let dsigma2 = sigma_x_derivative_norm(field, &eta, x).powi(2);
        let dxh = hamiltonian_x_gradient_norm(field, &eta, x);
        let dxih = hamiltonian_xi_gradient_norm(field, &eta, x);
        let value = theta * (1.0 - 2.0 * theta) * h * h
            - (1.0 + kappa).powi(3) * sigma2 * dsigma2 * xi_norm * xi_norm
            - theta * (1.0 + kappa).powi(2) * sigma2 * xi_norm * (dxh + kappa * dxih);
        inf = inf.min(value);
    }
    inf
}

/// Infimum of the coercivity functional over sampled `(ξ, x)` with `|ξ| ≥ r_test`.
pub fn check_ls_coercivity(
    field: &CoefficientField,
    params: &LsParams,
    r_test: f64,
    xi_grid: &[Vector],
    x_grid: &[Vector],
) -> Result<CoercivityReport> {
    params.validate()?;
    if xi_grid.is_empty() || x_grid.is_empty() {
        return Err(invalid("coercivity check needs nonempty ξ and x grids"));
    }
    if let Some(xi) = xi_grid.iter().find(|xi| vector::norm(xi) < r_test * (1.0 - 1e-12)) {
        return Err(invalid(format!("ξ = {xi:?} lies inside the test radius {r_test}")));
    }
    let mut report = CoercivityReport {
        theta: params.theta,
        kappa: params.kappa,
        rho_floor: params.rho_floor,
        r_test,
        infimum: f64::INFINITY,
        argmin_xi: ZERO,
        argmin_x: ZERO,
        samples: 0,
        passed: false,
    };
    for xi in xi_grid {
        for x in x_grid {
            let v = coercivity_functional(field, params, xi, x);
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("coercivity functional at ξ={xi:?}, x={x:?}")));
            }
            report.samples += 1;
            if v < report.infimum {
                report.infimum = v;
                report.argmin_xi = *xi;
                report.argmin_x = *x;
            }
        }
    }
    report.passed = report.infimum >= params.rho_floor;
    Ok(report)
}

/// `inf (a² − s(d−1)|Da|)` over a grid of spacing `h` on `region` for a
/// forced mean-curvature field of strength `s`.
pub fn check_mcm_condition(field: &CoefficientField, region: &Aabb, h: f64) -> Result<f64> {
    let strength = match field.diffusion() {
        DiffusionModel::Curvature(s) => *s,
        _ => return Err(invalid("MCM condition applies to curvature-projection diffusion only")),
    };
    if field.exponent() != 1.0 {
        return Err(invalid("MCM condition applies to p = 1"));
    }
    if !region.is_valid() || region.dim() != field.dim() || !(h > 0.0) {
        return Err(invalid("MCM scan needs a valid region and positive spacing"));
    }
    let dim = field.dim();
    let lo = region.lower_v();
    let hi = region.upper_v();
    let mut counts = [1usize; 3];
    for i in 0..dim {
        counts[i] = ((hi[i] - lo[i]) / h).round() as usize + 1;
    }
    let mut margin = f64::INFINITY;
    for i0 in 0..counts[0] {
        for i1 in 0..counts[1] {
            for i2 in 0..counts[2] {
                let idx = [i0, i1, i2];
                let mut x = ZERO;
                for k in 0..dim {
                    x[k] = (lo[k] + idx[k] as f64 * h).min(hi[k]);
                }
                let a = field.forcing(&x);
                let da = vector::norm(&field.forcing_gradient(&x));
                let v = a * a - strength * (dim as f64 - 1.0) * da;
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!("MCM margin at {x:?}")));
                }
                margin = margin.min(v);
            }
        }
    }
    Ok(margin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{make_periodic_field, DiffusionSpec, PeriodicProfile, TrigMode};
    use std::f64::consts::PI;

    fn planar_sine(base: f64, amp: f64) -> CoefficientField {
        make_periodic_field(
            PeriodicProfile {
                dim: 2,
                base,
                modes: vec![TrigMode {
                    amplitude: amp,
                    wavevector: vec![1, 0],
                    phase: 0.0,
                }],
            },
            1.0,
        )
        .unwrap()
    }

    fn ring(r: f64, n: usize) -> Vec<Vector> {
        (0..n)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / n as f64;
                [r * t.cos(), r * t.sin(), 0.0]
            })
            .collect()
    }

    fn xs(n: usize) -> Vec<Vector> {
        (0..n).map(|k| [k as f64 / n as f64, 0.37, 0.0]).collect()
    }

    #[test]
    fn net_has_expected_size_and_stays_in_ball() {
        let net = eta_net(2, 0.5);
        assert!(net.len() > 40 && net.len() <= 81);
        assert!(net.iter().all(|o| vector::norm(o) <= 0.5 + 1e-12));
    }

    #[test]
    fn first_order_functional_is_scaled_squared_hamiltonian() {
        let f = planar_sine(2.0, 0.5);
        let params = LsParams::default();
        let xi = [3.0, 0.0, 0.0];
        let x = [0.1, 0.2, 0.0];
        let v = coercivity_functional(&f, &params, &xi, &x);
        // inf over the net of H(η)² is attained at the smallest |η| = |ξ| − κ.
        let a = f.forcing(&x);
        let expect = 0.25 * 0.5 * (a * 2.5).powi(2);
        assert!((v - expect).abs() < 1e-9 * expect, "{v} vs {expect}");
        let report = check_ls_coercivity(&f, &params, 3.0, &ring(3.0, 8), &xs(8)).unwrap();
        assert!(report.passed);
    }

    #[test]
    fn superlinear_case_passes_for_large_radius() {
        let f = planar_sine(2.0, 0.1)
            .with_exponent(2.0)
            .unwrap()
            .with_diffusion(DiffusionSpec::Isotropic { coefficient: 0.5 })
            .unwrap();
        let params = LsParams {
            rho_floor: 1.0,
            ..LsParams::default()
        };
        let mut infs = Vec::new();
        for r in [8.0, 16.0, 32.0] {
            let rep = check_ls_coercivity(&f, &params, r, &ring(r, 12), &xs(16)).unwrap();
            assert!(rep.passed, "R={r}: {}", rep.infimum);
            infs.push(rep.infimum);
        }
        assert!(infs.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn strongly_oscillating_mcm_field_fails() {
        let f = planar_sine(1.0, 0.9)
            .with_diffusion(DiffusionSpec::CurvatureProjection { strength: 1.0 })
            .unwrap();
        let rep = check_ls_coercivity(&f, &LsParams::default(), 20.0, &ring(20.0, 16), &xs(32)).unwrap();
        assert!(!rep.passed);
        // Independent dense scan of a² − (d−1)|Da| for the closed form.
        let scan = (0..100_000)
            .map(|k| {
                let x = k as f64 / 100_000.0;
                let a = 1.0 + 0.9 * (2.0 * PI * x).sin();
                let da = 0.9 * 2.0 * PI * (2.0 * PI * x).cos();
                a * a - da.abs()
            })
            .fold(f64::INFINITY, f64::min);
        assert!(scan < 0.0);
        let margin = check_mcm_condition(&f, &Aabb::new(&[0.0, 0.0], &[1.0, 1.0]), 1e-3).unwrap();
        assert!((margin - scan).abs() < 1e-3);
    }

    #[test]
    fn mcm_margin_of_constant_field_is_a_squared() {
        for (dim, c) in [(2, 2.0), (3, 1.5), (1, 0.7)] {
            let f = CoefficientField::constant(dim, c)
                .unwrap()
                .with_diffusion(DiffusionSpec::CurvatureProjection { strength: 1.0 })
                .unwrap();
            let region = Aabb::new(&vec![0.0; dim], &vec![1.0; dim]);
            assert_eq!(check_mcm_condition(&f, &region, 0.25).unwrap(), c * c);
        }
    }

    #[test]
    fn mcm_margin_of_weak_sine_matches_closed_form_minimization() {
        let f = planar_sine(2.0, 0.1)
            .with_diffusion(DiffusionSpec::CurvatureProjection { strength: 1.0 })
            .unwrap();
        // Oracle: minimize (2 + 0.1 sin t)² − 0.2π|cos t| over a fine phase grid.
        let oracle = (0..1_000_000)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / 1_000_000.0;
                (2.0 + 0.1 * t.sin()).powi(2) - 0.2 * PI * t.cos().abs()
            })
            .fold(f64::INFINITY, f64::min);
        let margin = check_mcm_condition(&f, &Aabb::new(&[0.0, 0.0], &[1.0, 0.0]), 1e-4).unwrap();
        assert!((margin - oracle).abs() < 1e-6, "{margin} vs {oracle}");
        assert!((oracle - 3.2578).abs() < 1e-3, "{oracle}");
    }

    #[test]
    fn mcm_check_rejects_other_diffusions() {
        let f = planar_sine(2.0, 0.1);
        assert!(check_mcm_condition(&f, &Aabb::new(&[0.0, 0.0], &[1.0, 1.0]), 0.1).is_err());
    }

    #[test]
    fn xi_inside_test_radius_is_rejected() {
        let f = planar_sine(2.0, 0.1);
        let r = check_ls_coercivity(&f, &LsParams::default(), 2.0, &[[1.0, 0.0, 0.0]], &xs(2));
        assert!(r.is_err());
    }
}
