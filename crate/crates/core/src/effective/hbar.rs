use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::corrector::{corrector_torus, solve_corrector};
use crate::error::{invalid, Error, Result};
use crate::fields::CoefficientField;
use crate::numerics::SolverConfig;
use crate::stats::{fit_power_offset, log_log_fit, PowerFit};
use crate::vector::{self, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    MetricRoute,
    CorrectorRoute,
    Exact,
}

impl Route {
    pub fn as_str(&self) -> &'static str {
        match self {
            Route::MetricRoute => "metric-route",
            Route::CorrectorRoute => "corrector-route",
            Route::Exact => "exact",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectorEstimate {
    pub xi: Vector,
    pub value: f64,
    pub uncertainty: f64,
    pub fit: PowerFit,
    /// `(δ, −δ v(0))` along the ladder.
    pub ladder: Vec<(f64, f64)>,
    pub low_confidence: bool,
}

/// Relative fit residual above which an extrapolation is flagged.
pub const CORRECTOR_FIT_THRESHOLD: f64 = 1e-2;

/// Extrapolates `−δ v^δ(0, ξ)` to `δ = 0` with `A + Bδ^q`.
pub fn hbar_from_corrector(
    field: &CoefficientField,
    xi: &Vector,
    deltas: &[f64],
    h: f64,
    cfg: &SolverConfig,
) -> Result<CorrectorEstimate> {
    if deltas.len() < 3 {
        return Err(Error::DegenerateFit("δ ladder needs >= 3 rungs".into()));
    }
    let mut ladder = Vec::with_capacity(deltas.len());
    for &d in deltas {
        let torus = corrector_torus(field, d, h, cfg)?;
        let sol = solve_corrector(field, xi, d, torus, cfg)?;
        ladder.push((d, sol.dvd0));
    }
    estimate_from_ladder(*xi, ladder)
}

pub fn estimate_from_ladder(xi: Vector, ladder: Vec<(f64, f64)>) -> Result<CorrectorEstimate> {
    let x: Vec<f64> = ladder.iter().map(|l| l.0).collect();
    let y: Vec<f64> = ladder.iter().map(|l| l.1).collect();
    let fit = fit_power_offset(&x, &y, 0.1, 3.0)?;
    let i_min = x
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("nonempty ladder");
    // Half the extrapolation step, plus the fit residual.
    let step = (fit.a - y[i_min]).abs();
    let uncertainty = fit.rms + 0.5 * step;
    let scale = fit.a.abs().max(1e-300);
    Ok(CorrectorEstimate {
        xi,
        value: fit.a,
        uncertainty,
        low_confidence: fit.rms > CORRECTOR_FIT_THRESHOLD * scale,
        fit,
        ladder,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HbarSample {
    pub xi: Vector,
    pub value: f64,
    pub uncertainty: f64,
    pub route: Route,
}

/// Tabulated `H̄` with ray interpolation: piecewise linear in `|ξ|` along each
/// sampled direction (with `H̄(0) = 0`), linear in angle between directions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveHamiltonianEstimate {
    pub dim: usize,
    pub samples: Vec<HbarSample>,
    rays: Vec<Ray>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Ray {
    angle: f64,
    dir: Vector,
    /// `(|ξ|, H̄)` sorted by magnitude, starting at `(0, 0)`.
    points: Vec<(f64, f64)>,
}

fn angle_of(e: &Vector, dim: usize) -> f64 {
    if dim == 1 {
        if e[0] >= 0.0 {
            0.0
        } else {
            PI
        }
    } else {
        e[1].atan2(e[0]).rem_euclid(2.0 * PI)
    }
}

impl EffectiveHamiltonianEstimate {
    pub fn from_samples(dim: usize, samples: Vec<HbarSample>) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(invalid("tabulated H̄ supports dimensions 1 and 2"));
        }
        let mut rays: Vec<Ray> = Vec::new();
        for s in &samples {
            let r = vector::norm(&s.xi);
            if r == 0.0 {
                continue;
            }
            let dir = vector::scale(&s.xi, 1.0 / r);
            let angle = angle_of(&dir, dim);
            match rays.iter_mut().find(|ray| (ray.angle - angle).abs() < 1e-9) {
                Some(ray) => ray.points.push((r, s.value)),
                None => rays.push(Ray {
                    angle,
                    dir,
                    points: vec![(0.0, 0.0), (r, s.value)],
                }),
            }
        }
        if rays.is_empty() {
            return Err(invalid("no nonzero H̄ samples"));
        }
        for ray in &mut rays {
            ray.points.sort_by(|a, b| a.0.total_cmp(&b.0));
            ray.points.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-12);
        }
        rays.sort_by(|a, b| a.angle.total_cmp(&b.angle));
        if dim == 1 && rays.len() != 2 {
            return Err(invalid("one-dimensional H̄ needs samples on both rays"));
        }
        if dim == 2 && rays.len() < 3 {
            return Err(invalid("two-dimensional H̄ needs at least three directions"));
        }
        Ok(Self { dim, samples, rays })
    }

    /// `H̄(ξ) = h(|ξ|)` sampled on `directions` evenly spaced rays.
    pub fn radial(dim: usize, directions: usize, magnitudes: &[f64], h: impl Fn(f64) -> f64) -> Result<Self> {
        let mut samples = Vec::new();
        let dirs: Vec<Vector> = if dim == 1 {
            vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]
        } else {
            (0..directions)
                .map(|k| {
                    let t = 2.0 * PI * k as f64 / directions as f64;
                    [t.cos(), t.sin(), 0.0]
                })
                .collect()
        };
        for d in dirs {
            for &r in magnitudes {
                samples.push(HbarSample {
                    xi: vector::scale(&d, r),
                    value: h(r),
                    uncertainty: 0.0,
                    route: Route::Exact,
                });
            }
        }
        Self::from_samples(dim, samples)
    }

    /// Largest magnitude covered on every ray.
    pub fn max_magnitude(&self) -> f64 {
        self.rays
            .iter()
            .map(|r| r.points.last().map(|p| p.0).unwrap_or(0.0))
            .fold(f64::INFINITY, f64::min)
    }

    /// Breakpoint magnitudes of all rays.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.rays.iter().flat_map(|r| r.points.iter().map(|p| p.0)).collect();
        b.sort_by(|a, c| a.total_cmp(c));
        b.dedup();
        b
    }

    /// Lipschitz bound of the interpolant: radial slopes plus angular variation.
    pub fn lipschitz(&self) -> f64 {
        let mut lip: f64 = 0.0;
        for ray in &self.rays {
            for w in ray.points.windows(2) {
                lip = lip.max(((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs());
            }
        }
        if self.dim == 2 {
            let n = self.rays.len();
            for k in 0..n {
                let a = &self.rays[k];
                let b = &self.rays[(k + 1) % n];
                let mut dtheta = b.angle - a.angle;
                if dtheta <= 0.0 {
                    dtheta += 2.0 * PI;
                }
                for &(r, _) in a.points.iter().skip(1) {
                    if let (Ok(va), Ok(vb)) = (Self::ray_value(a, r), Self::ray_value(b, r)) {
                        lip = lip.max((vb - va).abs() / (r * dtheta));
                    }
                }
            }
        }
        lip
    }

    fn ray_value(ray: &Ray, r: f64) -> Result<f64> {
        let pts = &ray.points;
        let last = pts[pts.len() - 1];
        if r > last.0 * (1.0 + 1e-12) {
            return Err(Error::ExtendTable(format!(
                "|ξ| = {r} beyond the tabulated {} along {:?}",
                last.0, ray.dir
            )));
        }
        let k = pts.partition_point(|p| p.0 < r).clamp(1, pts.len() - 1);
        let (r0, h0) = pts[k - 1];
        let (r1, h1) = pts[k];
        Ok(h0 + (h1 - h0) * (r - r0) / (r1 - r0))
    }

    pub fn eval(&self, xi: &Vector) -> Result<f64> {
        let r = vector::norm(xi);
        if r == 0.0 {
            return Ok(0.0);
        }
        let angle = angle_of(&vector::scale(xi, 1.0 / r), self.dim);
        let n = self.rays.len();
        let k = self.rays.partition_point(|ray| ray.angle <= angle + 1e-12);
        let (i0, i1) = if k == 0 || k == n { (n - 1, 0) } else { (k - 1, k) };
        let a0 = self.rays[i0].angle;
        let mut a1 = self.rays[i1].angle;
        let mut a = angle;
        if a1 <= a0 {
            a1 += 2.0 * PI;
            if a < a0 {
                a += 2.0 * PI;
            }
        }
        let s = if a1 > a0 { ((a - a0) / (a1 - a0)).clamp(0.0, 1.0) } else { 0.0 };
        let v0 = Self::ray_value(&self.rays[i0], r)?;
        if s == 0.0 {
            return Ok(v0);
        }
        let v1 = Self::ray_value(&self.rays[i1], r)?;
        Ok((1.0 - s) * v0 + s * v1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub points: usize,
    pub directions: usize,
    pub sandwich_violations: Vec<Vector>,
    /// Smallest local Hölder exponent over sample triples along rays.
    pub min_holder_exponent: f64,
    /// Largest spread across directions at equal magnitude, in units of the
    /// largest per-point uncertainty at that magnitude (infinite when exact
    /// samples disagree).
    pub direction_spread: f64,
    /// Mean over rays of the slope of `ln H̄` against `ln |ξ|`.
    pub homogeneity_exponent: f64,
    /// Rays along which `H̄` decreases in `|ξ|`.
    pub star_shape_violations: usize,
}

/// Growth sandwich `c0|ξ|^p <= H̄ <= C0|ξ|^p` (with per-point uncertainty),
/// local Hölder exponents and the direction spread.
pub fn hbar_regularity_scan(samples: &[HbarSample], p: f64, c0: f64, c_upper: f64) -> Result<RegularityReport> {
    let mut rays: Vec<(Vector, Vec<&HbarSample>)> = Vec::new();
    for s in samples {
        let r = vector::norm(&s.xi);
        if r == 0.0 {
            continue;
        }
        let d = vector::scale(&s.xi, 1.0 / r);
        match rays.iter_mut().find(|(e, _)| vector::norm(&vector::sub(e, &d)) < 1e-9) {
            Some((_, v)) => v.push(s),
            None => rays.push((d, vec![s])),
        }
    }
    let min_mags = rays.iter().map(|r| r.1.len()).min().unwrap_or(0);
    if rays.len() < 8 || min_mags < 4 {
        return Err(invalid(format!(
            "regularity scan needs >= 8 directions x >= 4 magnitudes, got {} x {min_mags}",
            rays.len()
        )));
    }
    let mut sandwich_violations = Vec::new();
    for s in samples {
        let r = vector::norm(&s.xi).powf(p);
        if s.value < c0 * r - s.uncertainty || s.value > c_upper * r + s.uncertainty {
            sandwich_violations.push(s.xi);
        }
    }
    let mut min_holder = f64::INFINITY;
    let mut hom = 0.0;
    let mut star = 0;
    for (_, pts) in rays.iter_mut() {
        pts.sort_by(|a, b| vector::norm(&a.xi).total_cmp(&vector::norm(&b.xi)));
        if pts.windows(2).any(|w| w[1].value + w[1].uncertainty + w[0].uncertainty < w[0].value) {
            star += 1;
        }
        for w in pts.windows(3) {
            let s1 = vector::norm(&vector::sub(&w[1].xi, &w[0].xi));
            let s2 = vector::norm(&vector::sub(&w[2].xi, &w[0].xi));
            let d1 = (w[1].value - w[0].value).abs();
            let d2 = (w[2].value - w[0].value).abs();
            if d1 > 0.0 && d2 > 0.0 && s2 > s1 {
                min_holder = min_holder.min((d2 / d1).ln() / (s2 / s1).ln());
            }
        }
        let r: Vec<f64> = pts.iter().map(|s| vector::norm(&s.xi)).collect();
        let v: Vec<f64> = pts.iter().map(|s| s.value).collect();
        hom += log_log_fit(&r, &v).map(|f| f.slope).unwrap_or(f64::NAN);
    }
    let mut spread: f64 = 0.0;
    let mags: Vec<f64> = rays[0].1.iter().map(|s| vector::norm(&s.xi)).collect();
    for m in mags {
        let at: Vec<&HbarSample> = samples
            .iter()
            .filter(|s| (vector::norm(&s.xi) - m).abs() < 1e-9 * m.max(1.0))
            .collect();
        if at.len() < 2 {
            continue;
        }
        let hi = at.iter().map(|s| s.value).fold(f64::NEG_INFINITY, f64::max);
        let lo = at.iter().map(|s| s.value).fold(f64::INFINITY, f64::min);
        let unc = at.iter().map(|s| s.uncertainty).fold(0.0, f64::max);
        let ratio = if unc > 0.0 {
            (hi - lo) / unc
        } else if hi - lo <= 1e-12 * hi.abs().max(1.0) {
            0.0
        } else {
            f64::INFINITY
        };
        spread = spread.max(ratio);
    }
    Ok(RegularityReport {
        points: samples.len(),
        directions: rays.len(),
        sandwich_violations,
        min_holder_exponent: min_holder,
        direction_spread: spread,
        homogeneity_exponent: hom / rays.len() as f64,
        star_shape_violations: star,
    })
}
