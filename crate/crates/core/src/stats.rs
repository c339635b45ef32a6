//! Small statistics toolkit: least squares, quantiles, tail checks, power fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub intercept_stderr: f64,
    pub rms: f64,
}

/// Ordinary least squares `y ≈ intercept + slope·x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let n = x.len();
    if n != y.len() || n < 2 {
        return Err(Error::DegenerateFit(format!("need >= 2 paired points, got {n}")));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::DegenerateFit("abscissae do not vary".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let (slope_stderr, intercept_stderr) = if n > 2 {
        let s2 = sse / (nf - 2.0);
        let se = (s2 / sxx).sqrt();
        (se, (s2 * (1.0 / nf + mx * mx / sxx)).sqrt())
    } else {
        (0.0, 0.0)
    };
    Ok(LinearFit {
        slope,
        intercept,
        slope_stderr,
        intercept_stderr,
        rms: (sse / nf).sqrt(),
    })
}

/// Slope of `ln y` against `ln x`.
pub fn log_log_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::DegenerateFit("log-log fit needs positive data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly)
}

/// Arithmetic mean; exact when all samples coincide.
pub fn mean(x: &[f64]) -> f64 {
    if x.windows(2).all(|w| w[0] == w[1]) {
        return x.first().copied().unwrap_or(f64::NAN);
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance; zero for fewer than two samples.
pub fn variance(x: &[f64]) -> f64 {
    if x.len() < 2 || x.windows(2).all(|w| w[0] == w[1]) {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

/// Nearest-rank quantile of `q ∈ [0, 1]`.
pub fn quantile(x: &[f64], q: f64) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len();
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
    s[rank - 1]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailCheck {
    /// `(λ, empirical P[|X − mean| > λ])` at tail levels `2^{−k}`.
    pub points: Vec<(f64, f64)>,
    /// Least-squares slope of `ln P` against `λ²`.
    pub slope_lambda2: f64,
    pub decreasing: bool,
    pub convex: bool,
}

impl TailCheck {
    pub fn sub_gaussian(&self) -> bool {
        self.decreasing && self.convex && self.slope_lambda2 < 0.0
    }
}

/// Empirical tail of `|X − mean|` on the levels `2^{−k}`, `k = 1, 2, …` with
/// at least `min_count` samples beyond the level, checked for decrease and
/// convexity in `λ²` (interior points on or below the end-point chord up to
/// twice the binomial standard error of `ln P`).
pub fn tail_check(x: &[f64], min_count: usize) -> Result<TailCheck> {
    let n = x.len();
    if n < 8 {
        return Err(Error::DegenerateFit(format!("tail check needs >= 8 samples, got {n}")));
    }
    let m = mean(x);
    let mut dev: Vec<f64> = x.iter().map(|v| (v - m).abs()).collect();
    dev.sort_by(|a, b| b.total_cmp(a));
    let mut points = Vec::new();
    let mut k = 1;
    loop {
        let count = n >> k;
        if count < min_count.max(1) {
            break;
        }
        // λ is the count-th largest deviation; the tail beyond it holds count − 1 samples,
        // so use the midpoint between the count-th and (count+1)-th to hit the level.
        let lam = 0.5 * (dev[count - 1] + dev[count]);
        let p = dev.iter().filter(|d| **d > lam).count() as f64 / n as f64;
        points.push((lam, p));
        k += 1;
    }
    if points.len() < 3 {
        return Err(Error::DegenerateFit("too few tail levels".into()));
    }
    let decreasing = points.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 < w[0].1);
    let xs: Vec<f64> = points.iter().map(|p| p.0 * p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let fit = linear_fit(&xs, &ys)?;
    let (x0, y0) = (xs[0], ys[0]);
    let (x1, y1) = (*xs.last().unwrap(), *ys.last().unwrap());
    let mut convex = true;
    for i in 1..xs.len() - 1 {
        let chord = if x1 > x0 { y0 + (y1 - y0) * (xs[i] - x0) / (x1 - x0) } else { y0 };
        let p = points[i].1;
        let se = ((1.0 - p) / (n as f64 * p)).sqrt();
        if ys[i] > chord + 2.0 * se {
            convex = false;
        }
    }
    Ok(TailCheck {
        points,
        slope_lambda2: fit.slope,
        decreasing,
        convex,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    /// Limit value `A` in `A + B x^q`.
    pub a: f64,
    pub b: f64,
    pub q: f64,
    pub rms: f64,
}

fn fit_ab(x: &[f64], y: &[f64], q: f64) -> Option<(f64, f64, f64)> {
    let z: Vec<f64> = x.iter().map(|v| v.powf(q)).collect();
    let fit = linear_fit(&z, y).ok()?;
    let sse: f64 = z.iter().zip(y).map(|(a, b)| (b - fit.intercept - fit.slope * a).powi(2)).sum();
    Some((fit.intercept, fit.slope, sse))
}

/// Fit `y ≈ A + B x^q` with `q ∈ [q_lo, q_hi]` by golden-section search on
/// the residual of the inner linear least-squares problem.
pub fn fit_power_offset(x: &[f64], y: &[f64], q_lo: f64, q_hi: f64) -> Result<PowerFit> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::DegenerateFit("power fit needs >= 3 points".into()));
    }
    if x.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::DegenerateFit("power fit needs positive abscissae".into()));
    }
    let spread = y.iter().copied().fold(f64::NEG_INFINITY, f64::max) - y.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    if spread <= 1e-13 * scale {
        return Ok(PowerFit {
            a: mean(y),
            b: 0.0,
            q: 1.0,
            rms: 0.0,
        });
    }
    let cost = |q: f64| fit_ab(x, y, q).map(|r| r.2).unwrap_or(f64::INFINITY);
    // Coarse scan then golden-section refinement around the best cell.
    let n: usize = 64;
    let step = (q_hi - q_lo) / n as f64;
    let mut best = 0;
    let mut best_cost = f64::INFINITY;
    for i in 0..=n {
        let c = cost(q_lo + i as f64 * step);
        if c < best_cost {
            best_cost = c;
            best = i;
        }
    }
    let mut lo = q_lo + (best.saturating_sub(1)) as f64 * step;
    let mut hi = (q_lo + (best + 1) as f64 * step).min(q_hi);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    for _ in 0..80 {
        if cost(c) < cost(d) {
            hi = d;
        } else {
            lo = c;
        }
        c = hi - g * (hi - lo);
        d = lo + g * (hi - lo);
    }
    let q = 0.5 * (lo + hi);
    let (a, b, sse) = fit_ab(x, y, q).ok_or_else(|| Error::DegenerateFit("power fit failed".into()))?;
    Ok(PowerFit {
        a,
        b,
        q,
        rms: (sse / x.len() as f64).sqrt(),
    })
}
