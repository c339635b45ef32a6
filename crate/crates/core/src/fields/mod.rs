//! Coefficient fields `(σ, H)` with `H(ξ, x) = a(x)|ξ|^p` and `A = ½σσᵀ`.

mod coercivity;
mod keyed;
mod random;
mod spec;

use std::f64::consts::PI;

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

pub use coercivity::{check_ls_coercivity, check_mcm_condition, CoercivityReport};
pub use keyed::{cell_key, mix64};
pub use random::{bump, Checkerboard, PoissonCloud, BUMP_RADIUS, MAX_POINTS_PER_CELL};
pub use spec::{Aabb, DiffusionSpec, FieldSpec, ForcingSpec, Splice, TrigMode};

use crate::error::{invalid, Result};
use crate::vector::{self, Matrix, Vector, ZERO};

/// Step of the centred differences used for spatial derivatives of fields.
pub const FD_STEP: f64 = 1e-4;

/// Structural constants of a field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructuralBounds {
    pub p: f64,
    pub c0: f64,
    pub c_upper: f64,
    /// Range of dependence; one by normalization for the random kinds.
    pub range: f64,
    pub dim: usize,
}

impl StructuralBounds {
    pub fn validate(&self) -> Result<()> {
        if !(self.c0 > 0.0 && self.c0 <= self.c_upper && self.c_upper.is_finite()) {
            return Err(invalid(format!(
                "need 0 < c0 <= C0 < inf, got c0={} C0={}",
                self.c0, self.c_upper
            )));
        }
        if !(self.p >= 1.0) || !(self.range > 0.0) || !(1..=3).contains(&self.dim) {
            return Err(invalid("need p >= 1, range > 0 and 1 <= dim <= 3"));
        }
        Ok(())
    }
}

/// Parameters of the coercivity functional.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LsParams {
    pub theta: f64,
    pub kappa: f64,
    pub rho_floor: f64,
}

impl Default for LsParams {
    fn default() -> Self {
        Self {
            theta: 0.25,
            kappa: 0.5,
            rho_floor: 1e-9,
        }
    }
}

impl LsParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < 0.5) || !(self.kappa > 0.0) {
            return Err(invalid("need 0 < theta < 1/2 and kappa > 0"));
        }
        Ok(())
    }
}

/// Closed-form periodic profile `base + Σ amp_j sin(2π n_j·x / period + φ_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicProfile {
    pub dim: usize,
    pub base: f64,
    pub modes: Vec<TrigMode>,
}

impl PeriodicProfile {
    /// The one-dimensional profile `base + amplitude·sin(2πx)`.
    pub fn sine_1d(base: f64, amplitude: f64) -> Self {
        Self {
            dim: 1,
            base,
            modes: vec![TrigMode {
                amplitude,
                wavevector: vec![1],
                phase: 0.0,
            }],
        }
    }
}

#[derive(Clone, Debug)]
struct Periodic {
    dim: usize,
    base: f64,
    period: f64,
    modes: Vec<(f64, Vector, f64)>,
}

impl Periodic {
    fn eval(&self, x: &Vector) -> f64 {
        // Reduce into the fundamental cell first so that shifts by whole periods
        // reproduce the same argument.
        let mut r = ZERO;
        for i in 0..self.dim {
            r[i] = x[i] - self.period * (x[i] / self.period).floor();
        }
        let k = 2.0 * PI / self.period;
        self.base
            + self
                .modes
                .iter()
                .map(|(amp, n, phase)| amp * (k * vector::dot(n, &r) + phase).sin())
                .sum::<f64>()
    }

    fn sufficient_bounds(&self) -> (f64, f64) {
        let s: f64 = self.modes.iter().map(|m| m.0.abs()).sum();
        (self.base - s, self.base + s)
    }
}

#[derive(Clone, Debug)]
enum Forcing {
    Constant(f64),
    Periodic(Periodic),
    Poisson(PoissonCloud),
    Checkerboard(Checkerboard),
}

/// x-independent diffusion model.
#[derive(Clone, Debug, PartialEq)]
pub enum DiffusionModel {
    None,
    Isotropic(f64),
    Curvature(f64),
    Table { matrix: Matrix, sqrt_twice: Matrix },
}

impl DiffusionModel {
    fn from_spec(spec: &DiffusionSpec, dim: usize) -> Result<Self> {
        Ok(match spec {
            DiffusionSpec::None => DiffusionModel::None,
            DiffusionSpec::Isotropic { coefficient } => {
                if !(*coefficient >= 0.0 && coefficient.is_finite()) {
                    return Err(invalid("isotropic diffusion coefficient must be >= 0"));
                }
                DiffusionModel::Isotropic(*coefficient)
            }
            DiffusionSpec::CurvatureProjection { strength } => {
                if !(*strength >= 0.0 && strength.is_finite()) {
                    return Err(invalid("curvature strength must be >= 0"));
                }
                DiffusionModel::Curvature(*strength)
            }
            DiffusionSpec::AnisotropicTable { matrix } => {
                if matrix.len() != dim || matrix.iter().any(|row| row.len() != dim) {
                    return Err(invalid(format!("anisotropic table must be {dim}x{dim}")));
                }
                let mut m = Matrix3::zeros();
                for i in 0..dim {
                    for j in 0..dim {
                        if (matrix[i][j] - matrix[j][i]).abs() > 1e-12 || !matrix[i][j].is_finite() {
                            return Err(invalid("anisotropic table must be finite and symmetric"));
                        }
                        m[(i, j)] = matrix[i][j];
                    }
                }
                let eig = SymmetricEigen::new(m);
                if eig.eigenvalues.iter().any(|&l| l < -1e-12) {
                    return Err(invalid("anisotropic table must be positive semidefinite"));
                }
                let sqrt_diag = Matrix3::from_diagonal(&eig.eigenvalues.map(|l| (2.0 * l.max(0.0)).sqrt()));
                let root = eig.eigenvectors * sqrt_diag * eig.eigenvectors.transpose();
                let mut mat = vector::zero_matrix();
                let mut sq = vector::zero_matrix();
                for i in 0..3 {
                    for j in 0..3 {
                        mat[i][j] = m[(i, j)];
                        sq[i][j] = root[(i, j)];
                    }
                }
                DiffusionModel::Table {
                    matrix: mat,
                    sqrt_twice: sq,
                }
            }
        })
    }

    pub fn is_active(&self, dim: usize) -> bool {
        match self {
            DiffusionModel::None => false,
            DiffusionModel::Isotropic(c) => *c > 0.0,
            DiffusionModel::Curvature(s) => *s > 0.0 && dim > 1,
            DiffusionModel::Table { matrix, .. } => dim > 1 && matrix.iter().flatten().any(|v| *v != 0.0),
        }
    }

    /// Whether `A` depends on the gradient direction.
    pub fn is_quasilinear(&self) -> bool {
        matches!(self, DiffusionModel::Curvature(_) | DiffusionModel::Table { .. })
    }

    /// Largest eigenvalue of `A(e)` over all directions.
    pub fn max_eigenvalue(&self) -> f64 {
        match self {
            DiffusionModel::None => 0.0,
            DiffusionModel::Isotropic(c) => *c,
            DiffusionModel::Curvature(s) => *s,
            DiffusionModel::Table { matrix, .. } => {
                let m = Matrix3::from_fn(|i, j| matrix[i][j]);
                SymmetricEigen::new(m).eigenvalues.max().max(0.0)
            }
        }
    }

    /// `A(e)` for a unit vector `e` (leading `dim` coordinates).
    pub fn matrix(&self, e: &Vector, dim: usize) -> Matrix {
        match self {
            DiffusionModel::None => vector::zero_matrix(),
            DiffusionModel::Isotropic(c) => {
                let mut a = vector::zero_matrix();
                for (i, row) in a.iter_mut().enumerate().take(dim) {
                    row[i] = *c;
                }
                a
            }
            DiffusionModel::Curvature(s) => {
                let mut p = vector::projection(e, dim);
                for v in p.iter_mut().flatten() {
                    *v *= s;
                }
                p
            }
            DiffusionModel::Table { matrix, .. } => {
                let p = vector::projection(e, dim);
                vector::mat_mul(&vector::mat_mul(&p, matrix), &p)
            }
        }
    }

    /// `σ(e)` with `A = ½σσᵀ`.
    pub fn sigma(&self, e: &Vector, dim: usize) -> Matrix {
        match self {
            DiffusionModel::None => vector::zero_matrix(),
            DiffusionModel::Isotropic(c) => {
                let mut a = vector::zero_matrix();
                for (i, row) in a.iter_mut().enumerate().take(dim) {
                    row[i] = (2.0 * c).sqrt();
                }
                a
            }
            DiffusionModel::Curvature(s) => {
                let mut p = vector::projection(e, dim);
                let f = (2.0 * s).sqrt();
                for v in p.iter_mut().flatten() {
                    *v *= f;
                }
                p
            }
            DiffusionModel::Table { sqrt_twice, .. } => vector::mat_mul(&vector::projection(e, dim), sqrt_twice),
        }
    }
}

/// A coefficient field ready for evaluation.
///
/// Evaluation is a pure function of the descriptor and the query point and is
/// safe to call from any number of threads.
#[derive(Clone, Debug)]
pub struct CoefficientField {
    spec: FieldSpec,
    forcing: Forcing,
    diffusion: DiffusionModel,
}

impl CoefficientField {
    pub fn new(spec: FieldSpec) -> Result<Self> {
        if !(1..=3).contains(&spec.dim) {
            return Err(invalid(format!("dimension must be 1, 2 or 3, got {}", spec.dim)));
        }
        if !(spec.exponent >= 1.0 && spec.exponent.is_finite()) {
            return Err(invalid(format!("exponent p must be >= 1, got {}", spec.exponent)));
        }
        let dim = spec.dim;
        let forcing = match &spec.forcing {
            ForcingSpec::Constant { value } => {
                if !(*value > 0.0 && value.is_finite()) {
                    return Err(invalid("constant forcing must be positive"));
                }
                Forcing::Constant(*value)
            }
            ForcingSpec::PeriodicTrig { base, period, modes } => {
                if !(*period > 0.0 && period.is_finite()) || !base.is_finite() {
                    return Err(invalid("periodic profile needs finite base and positive period"));
                }
                let mut ms = Vec::with_capacity(modes.len());
                for m in modes {
                    if m.wavevector.len() != dim || !m.amplitude.is_finite() || !m.phase.is_finite() {
                        return Err(invalid("trig mode wavevector length must equal dim"));
                    }
                    let mut n = ZERO;
                    for (i, k) in m.wavevector.iter().enumerate() {
                        n[i] = *k as f64;
                    }
                    ms.push((m.amplitude, n, m.phase));
                }
                let p = Periodic {
                    dim,
                    base: *base,
                    period: *period,
                    modes: ms,
                };
                if p.sufficient_bounds().0 <= 0.0 {
                    let min = dense_min(|x| p.eval(x), dim, 0.0, *period, 64);
                    if min <= 0.0 {
                        return Err(invalid(format!("periodic profile is not strictly positive (min {min})")));
                    }
                }
                Forcing::Periodic(p)
            }
            ForcingSpec::PoissonBump {
                seed,
                intensity,
                bump_height,
                base,
                resample_outside,
            } => {
                if !(*intensity >= 0.0 && intensity.is_finite()) {
                    return Err(invalid(format!("intensity must be >= 0, got {intensity}")));
                }
                if !(*base > 0.0 && base.is_finite()) || !bump_height.is_finite() {
                    return Err(invalid(format!("base must be positive, got {base}")));
                }
                if let Some(sp) = resample_outside {
                    if !sp.region.is_valid() || sp.region.dim() != dim {
                        return Err(invalid("splice region must be a valid box of the field dimension"));
                    }
                }
                let cloud = PoissonCloud::new(dim, *seed, *intensity, *bump_height, *base, resample_outside.clone());
                if cloud.nominal_bounds().0 <= 0.0 {
                    return Err(invalid("base does not dominate the negative bump sum; inf a could vanish"));
                }
                Forcing::Poisson(cloud)
            }
            ForcingSpec::CheckerboardSmoothed {
                seed,
                base,
                amplitude,
                resample_outside,
            } => {
                if !(base.is_finite() && amplitude.is_finite()) || base - amplitude.abs() <= 0.0 {
                    return Err(invalid("checkerboard needs base > |amplitude|"));
                }
                if let Some(sp) = resample_outside {
                    if !sp.region.is_valid() || sp.region.dim() != dim {
                        return Err(invalid("splice region must be a valid box of the field dimension"));
                    }
                }
                Forcing::Checkerboard(Checkerboard::new(dim, *seed, *base, *amplitude, resample_outside.clone()))
            }
        };
        let diffusion = DiffusionModel::from_spec(&spec.diffusion, dim)?;
        Ok(Self {
            spec,
            forcing,
            diffusion,
        })
    }

    /// Constant first-order field `a ≡ value`, `p = 1`.
    pub fn constant(dim: usize, value: f64) -> Result<Self> {
        Self::new(FieldSpec {
            dim,
            exponent: 1.0,
            forcing: ForcingSpec::Constant { value },
            diffusion: DiffusionSpec::None,
        })
    }

    pub fn with_exponent(self, p: f64) -> Result<Self> {
        let mut spec = self.spec;
        spec.exponent = p;
        Self::new(spec)
    }

    pub fn with_diffusion(self, diffusion: DiffusionSpec) -> Result<Self> {
        let mut spec = self.spec;
        spec.diffusion = diffusion;
        Self::new(spec)
    }

    /// Pre-generate random cells covering `bbox`; evaluations are unchanged.
    pub fn prepared(mut self, bbox: &Aabb) -> Self {
        if let Forcing::Poisson(cloud) = self.forcing {
            self.forcing = Forcing::Poisson(cloud.with_cache(bbox));
        }
        self
    }

    pub fn spec(&self) -> &FieldSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn exponent(&self) -> f64 {
        self.spec.exponent
    }

    pub fn diffusion(&self) -> &DiffusionModel {
        &self.diffusion
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self.forcing, Forcing::Periodic(_) | Forcing::Constant(_))
    }

    pub fn period(&self) -> Option<f64> {
        match &self.forcing {
            Forcing::Periodic(p) => Some(p.period),
            _ => None,
        }
    }

    /// Forcing factor `a(x)`.
    pub fn forcing(&self, x: &Vector) -> f64 {
        match &self.forcing {
            Forcing::Constant(v) => *v,
            Forcing::Periodic(p) => p.eval(x),
            Forcing::Poisson(c) => c.eval(x),
            Forcing::Checkerboard(c) => c.eval(x),
        }
    }

    /// Centred-difference gradient of `a`.
    pub fn forcing_gradient(&self, x: &Vector) -> Vector {
        let mut g = ZERO;
        if let Forcing::Constant(_) = self.forcing {
            return g;
        }
        let step = FD_STEP * self.structural_bounds().range;
        for (i, gi) in g.iter_mut().enumerate().take(self.dim()) {
            let mut xp = *x;
            let mut xm = *x;
            xp[i] += step;
            xm[i] -= step;
            *gi = (self.forcing(&xp) - self.forcing(&xm)) / (2.0 * step);
        }
        g
    }

    /// Bounds on `a` valid for every point.
    pub fn forcing_bounds(&self) -> (f64, f64) {
        match &self.forcing {
            Forcing::Constant(v) => (*v, *v),
            Forcing::Periodic(p) => {
                let (lo, hi) = p.sufficient_bounds();
                if lo > 0.0 {
                    (lo, hi)
                } else {
                    (dense_min(|x| p.eval(x), p.dim, 0.0, p.period, 64), hi)
                }
            }
            Forcing::Poisson(c) => c.nominal_bounds(),
            Forcing::Checkerboard(c) => c.nominal_bounds(),
        }
    }

    pub fn structural_bounds(&self) -> StructuralBounds {
        let (lo, hi) = self.forcing_bounds();
        let sigma_max = (2.0 * self.diffusion.max_eigenvalue()).sqrt();
        StructuralBounds {
            p: self.exponent(),
            c0: lo,
            c_upper: hi.max(sigma_max),
            range: 1.0,
            dim: self.dim(),
        }
    }

    /// `H(ξ, x) = a(x)|ξ|^p`.
    pub fn eval_hamiltonian(&self, xi: &Vector, x: &Vector) -> f64 {
        let n = vector::norm(xi);
        if n == 0.0 {
            return 0.0;
        }
        self.forcing(x) * n.powf(self.exponent())
    }

    /// `A(e, x)`; `e` is normalized first (0-homogeneous extension). The zero
    /// vector falls back to the direction-free part of the model.
    pub fn eval_diffusion(&self, e: &Vector, _x: &Vector) -> Matrix {
        let u = vector::normalized(e).unwrap_or(ZERO);
        self.diffusion.matrix(&u, self.dim())
    }

    pub fn eval_sigma(&self, e: &Vector, _x: &Vector) -> Matrix {
        let u = vector::normalized(e).unwrap_or(ZERO);
        self.diffusion.sigma(&u, self.dim())
    }

    /// Extremes of `a` on a grid of spacing `h` covering `bbox`.
    pub fn extrema_on_box(&self, bbox: &Aabb, h: f64) -> (f64, f64) {
        let dim = self.dim();
        let lo = bbox.lower_v();
        let hi = bbox.upper_v();
        let mut counts = [1usize; 3];
        for i in 0..dim {
            counts[i] = ((hi[i] - lo[i]) / h).round() as usize + 1;
        }
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for i0 in 0..counts[0] {
            for i1 in 0..counts[1] {
                for i2 in 0..counts[2] {
                    let idx = [i0, i1, i2];
                    let mut x = ZERO;
                    for k in 0..dim {
                        x[k] = (lo[k] + idx[k] as f64 * h).min(hi[k]);
                    }
                    let a = self.forcing(&x);
                    min = min.min(a);
                    max = max.max(a);
                }
            }
        }
        (min, max)
    }
}

fn dense_min(f: impl Fn(&Vector) -> f64, dim: usize, lo: f64, hi: f64, n: usize) -> f64 {
    let step = (hi - lo) / n as f64;
    let mut min = f64::INFINITY;
    let counts = [n, if dim > 1 { n } else { 1 }, if dim > 2 { n } else { 1 }];
    for i0 in 0..counts[0] {
        for i1 in 0..counts[1] {
            for i2 in 0..counts[2] {
                let x = [lo + i0 as f64 * step, lo + i1 as f64 * step, lo + i2 as f64 * step];
                let mut y = ZERO;
                y[..dim].copy_from_slice(&x[..dim]);
                min = min.min(f(&y));
            }
        }
    }
    min
}

/// Random field `a(x) = base + bump_height · Σ_i φ(2(x − x_i))` over a Poisson
/// cloud with the given intensity. Cells meeting `bbox` are generated eagerly.
pub fn sample_poisson_bump_field(
    seed: u64,
    intensity: f64,
    bump_height: f64,
    base: f64,
    bbox: &Aabb,
) -> Result<CoefficientField> {
    if !bbox.is_valid() {
        return Err(invalid("bounding box must be a valid box in 1 to 3 dimensions"));
    }
    let field = CoefficientField::new(FieldSpec {
        dim: bbox.dim(),
        exponent: 1.0,
        forcing: ForcingSpec::PoissonBump {
            seed,
            intensity,
            bump_height,
            base,
            resample_outside: None,
        },
        diffusion: DiffusionSpec::None,
    })?;
    Ok(field.prepared(&bbox.dilate(1.0)))
}

/// Deterministic periodic field with the given profile and period.
pub fn make_periodic_field(profile: PeriodicProfile, period: f64) -> Result<CoefficientField> {
    CoefficientField::new(FieldSpec {
        dim: profile.dim,
        exponent: 1.0,
        forcing: ForcingSpec::PeriodicTrig {
            base: profile.base,
            period,
            modes: profile.modes,
        },
        diffusion: DiffusionSpec::None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sine_field() -> CoefficientField {
        make_periodic_field(PeriodicProfile::sine_1d(2.0, 1.0), 1.0).unwrap()
    }

    #[test]
    fn empty_cloud_gives_the_base_value() {
        let f = sample_poisson_bump_field(3, 0.0, 1.0, 2.0, &Aabb::new(&[0.0, 0.0], &[5.0, 5.0])).unwrap();
        for i in 0..20 {
            assert_eq!(f.forcing(&[0.3 * i as f64, 0.1 * i as f64, 0.0]), 2.0);
        }
    }

    #[test]
    fn poisson_evaluation_is_pure() {
        let f = sample_poisson_bump_field(77, 1.3, 0.8, 1.0, &Aabb::new(&[0.0, 0.0], &[4.0, 4.0])).unwrap();
        let x = [1.234, 2.345, 0.0];
        assert_eq!(f.forcing(&x).to_bits(), f.forcing(&x).to_bits());
        let g = sample_poisson_bump_field(77, 1.3, 0.8, 1.0, &Aabb::new(&[0.0, 0.0], &[1.0, 1.0])).unwrap();
        assert_eq!(f.forcing(&x).to_bits(), g.forcing(&x).to_bits());
    }

    #[test]
    fn poisson_rejects_bad_parameters() {
        let b = Aabb::new(&[0.0], &[1.0]);
        assert!(sample_poisson_bump_field(1, -1.0, 1.0, 1.0, &b).is_err());
        assert!(sample_poisson_bump_field(1, 1.0, 1.0, 0.0, &b).is_err());
        assert!(sample_poisson_bump_field(1, 1.0, 1.0, -2.0, &b).is_err());
    }

    #[test]
    fn periodic_profile_direct_value() {
        assert_eq!(sine_field().forcing(&[0.25, 0.0, 0.0]), 3.0);
    }

    #[test]
    fn periodic_profile_repeats() {
        let f = sine_field();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let x: f64 = rng.gen_range(-50.0..50.0);
            let a = f.forcing(&[x, 0.0, 0.0]);
            let b = f.forcing(&[x + 1.0, 0.0, 0.0]);
            assert!((a - b).abs() <= 8.0 * f64::EPSILON * a.abs());
        }
    }

    #[test]
    fn periodic_minimum_by_dense_scan() {
        let h = 1e-3;
        let (min, max) = sine_field().extrema_on_box(&Aabb::new(&[0.0], &[1.0]), h);
        assert!((min - 1.0).abs() <= h * h);
        assert!((max - 3.0).abs() <= h * h);
    }

    #[test]
    fn non_positive_profile_is_rejected() {
        assert!(make_periodic_field(PeriodicProfile::sine_1d(1.0, 1.5), 1.0).is_err());
        assert!(make_periodic_field(PeriodicProfile::sine_1d(0.5, 0.4), 1.0).is_ok());
    }

    #[test]
    fn hamiltonian_homogeneity() {
        let f = sine_field().with_exponent(1.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert_eq!(f.eval_hamiltonian(&ZERO, &[0.3, 0.0, 0.0]), 0.0);
        for _ in 0..100 {
            let xi = [rng.gen_range(-3.0..3.0), 0.0, 0.0];
            let x = [rng.gen_range(-3.0..3.0), 0.0, 0.0];
            let ratio = f.eval_hamiltonian(&vector::scale(&xi, 2.0), &x) / f.eval_hamiltonian(&xi, &x);
            assert!((ratio - 2f64.powf(1.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn curvature_projection_matrix() {
        let f = CoefficientField::constant(2, 1.0)
            .unwrap()
            .with_diffusion(DiffusionSpec::CurvatureProjection { strength: 1.0 })
            .unwrap();
        let a = f.eval_diffusion(&[1.0, 0.0, 0.0], &ZERO);
        assert_eq!(a[0][0], 0.0);
        assert_eq!(a[0][1], 0.0);
        assert_eq!(a[1][1], 1.0);
        // 0-homogeneous in the direction argument.
        assert_eq!(f.eval_diffusion(&[3.0, 0.0, 0.0], &ZERO), a);
    }

    #[test]
    fn sigma_reproduces_a() {
        let specs = [
            DiffusionSpec::Isotropic { coefficient: 0.7 },
            DiffusionSpec::CurvatureProjection { strength: 1.3 },
            DiffusionSpec::AnisotropicTable {
                matrix: vec![vec![0.5, 0.1], vec![0.1, 0.25]],
            },
        ];
        for spec in specs {
            let f = CoefficientField::constant(2, 1.0).unwrap().with_diffusion(spec).unwrap();
            let e = [0.6, 0.8, 0.0];
            let s = f.eval_sigma(&e, &ZERO);
            let half_sst = vector::mat_mul(&s, &vector::transpose(&s));
            let a = f.eval_diffusion(&e, &ZERO);
            for i in 0..2 {
                for j in 0..2 {
                    assert!((0.5 * half_sst[i][j] - a[i][j]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn non_psd_table_is_rejected() {
        let f = CoefficientField::constant(2, 1.0).unwrap();
        let bad = DiffusionSpec::AnisotropicTable {
            matrix: vec![vec![1.0, 2.0], vec![2.0, 1.0]],
        };
        assert!(f.with_diffusion(bad).is_err());
    }
}
