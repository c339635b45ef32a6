//! Monte Carlo experiments over random coefficient fields.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::effective::planar_values;
use crate::error::{invalid, Error, Result};
use crate::fields::{Aabb, CoefficientField, FieldSpec, ForcingSpec, Splice};
use crate::metric::{calibrate_constants, planar_grid, solve_metric, solve_metric_with_data, TargetSet};
use crate::numerics::{Grid, SolverConfig};
use crate::stats::{log_log_fit, mean, tail_check, variance, TailCheck};
use crate::vector::{self, Vector};

pub const MIN_FLUCTUATION_SEEDS: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedObservables {
    pub seed: u64,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRecord {
    pub experiment_id: String,
    pub kind: String,
    pub observable_names: Vec<String>,
    pub per_seed: Vec<SeedObservables>,
    pub summary: BTreeMap<String, f64>,
    pub lambda_thresholds: Vec<f64>,
}

impl EnsembleRecord {
    fn new(kind: &str, names: Vec<String>) -> Self {
        Self {
            kind: kind.into(),
            observable_names: names,
            ..Default::default()
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.per_seed.iter().map(|r| r.seed).collect()
    }

    /// Column `k` of the per-seed table.
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.per_seed.iter().map(|r| r.values[k]).collect()
    }

    fn put(&mut self, key: &str, value: f64) {
        if value.is_finite() {
            self.summary.insert(key.into(), value);
        }
    }
}

fn realize(template: &FieldSpec, seed: u64) -> Result<CoefficientField> {
    CoefficientField::new(template.with_seed(seed))
}

fn unit(e: &Vector) -> Result<Vector> {
    vector::normalized(e).ok_or_else(|| invalid("direction must be nonzero"))
}

fn label(t: f64) -> String {
    format!("m(t={t})")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluctuationRow {
    pub t: f64,
    pub mean: f64,
    pub variance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluctuationResult {
    pub record: EnsembleRecord,
    pub rows: Vec<FluctuationRow>,
    /// Fitted exponent of `std ~ t^β`; absent when every variance vanishes.
    pub beta: Option<f64>,
    pub beta_stderr: Option<f64>,
    /// Tail of `m(t_max e)`; absent for deterministic ensembles.
    pub tail: Option<TailCheck>,
}

/// Spread of `m_μ(te)` across seeds of one field family.
pub fn run_fluctuation_experiment(
    template: &FieldSpec,
    mu: f64,
    e: &Vector,
    t_list: &[f64],
    seeds: &[u64],
    h: f64,
    cfg: &SolverConfig,
) -> Result<FluctuationResult> {
    if seeds.len() < MIN_FLUCTUATION_SEEDS {
        return Err(invalid(format!(
            "insufficient seeds: {} < {MIN_FLUCTUATION_SEEDS}",
            seeds.len()
        )));
    }
    if t_list.len() < 2 || t_list.windows(2).any(|w| w[1] <= w[0]) || t_list[0] <= 0.0 {
        return Err(invalid("t_list must be positive and strictly increasing"));
    }
    if t_list[t_list.len() - 1] < 4.0 * t_list[0] {
        return Err(invalid("t_list must span at least a factor 4"));
    }
    let e = unit(e)?;
    let per_seed: Vec<SeedObservables> = seeds
        .par_iter()
        .map(|&seed| {
            let field = realize(template, seed)?;
            let values = planar_values(&field, mu, &e, t_list, h, cfg)?;
            Ok(SeedObservables { seed, values })
        })
        .collect::<Result<_>>()?;

    let mut record = EnsembleRecord::new("fluctuation", t_list.iter().map(|t| label(*t)).collect());
    record.per_seed = per_seed;
    let rows: Vec<FluctuationRow> = t_list
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let col = record.column(k);
            FluctuationRow {
                t,
                mean: mean(&col),
                variance: variance(&col),
            }
        })
        .collect();
    let stds: Vec<f64> = rows.iter().map(|r| r.variance.sqrt()).collect();
    let (beta, beta_stderr) = if stds.iter().all(|s| *s > 0.0) {
        let fit = log_log_fit(t_list, &stds)?;
        (Some(fit.slope), Some(fit.slope_stderr))
    } else {
        (None, None)
    };
    let last = record.column(t_list.len() - 1);
    let tail = if variance(&last) > 0.0 {
        tail_check(&last, 4).ok()
    } else {
        None
    };
    for r in &rows {
        record.put(&format!("mean@{}", r.t), r.mean);
        record.put(&format!("variance@{}", r.t), r.variance);
    }
    if let (Some(b), Some(se)) = (beta, beta_stderr) {
        record.put("beta", b);
        record.put("beta_stderr", se);
    }
    if let Some(tc) = &tail {
        record.lambda_thresholds = tc.points.iter().map(|p| p.0).collect();
        record.put("tail_slope_lambda2", tc.slope_lambda2);
        record.put("tail_sub_gaussian", if tc.sub_gaussian() { 1.0 } else { 0.0 });
    }
    Ok(FluctuationResult {
        record,
        rows,
        beta,
        beta_stderr,
        tail,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdditivityRow {
    pub s: f64,
    pub t: f64,
    /// `|E m((s+t)e) − E m(te) − E m(se)|`.
    pub defect: f64,
    pub defect_stderr: f64,
    /// `defect / (s+t)^0.6`.
    pub normalized: f64,
    /// Discretisation error of the defect from one refinement; deterministic fields only.
    pub scheme_error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdditivityResult {
    pub record: EnsembleRecord,
    pub rows: Vec<AdditivityRow>,
}

pub const ADDITIVITY_EXPONENT: f64 = 0.6;

/// Additivity defect of the ensemble mean of the planar metric.
pub fn run_additivity_experiment(
    template: &FieldSpec,
    mu: f64,
    e: &Vector,
    pairs: &[(f64, f64)],
    seeds: &[u64],
    h: f64,
    cfg: &SolverConfig,
) -> Result<AdditivityResult> {
    if pairs.is_empty() || seeds.is_empty() {
        return Err(invalid("need at least one (s, t) pair and one seed"));
    }
    if pairs.iter().any(|(s, t)| !(*s >= 4.0 && *t >= 4.0)) {
        return Err(invalid("s and t must be at least 4 range lengths"));
    }
    let e = unit(e)?;
    let mut queries: Vec<f64> = pairs.iter().flat_map(|(s, t)| [*s, *t, s + t]).collect();
    queries.sort_by(f64::total_cmp);
    queries.dedup();
    let pos = |x: f64| queries.iter().position(|q| *q == x).unwrap();

    let per_seed: Vec<SeedObservables> = seeds
        .par_iter()
        .map(|&seed| {
            let field = realize(template, seed)?;
            let values = planar_values(&field, mu, &e, &queries, h, cfg)?;
            Ok(SeedObservables { seed, values })
        })
        .collect::<Result<_>>()?;

    let refined = if template.is_random() {
        None
    } else {
        let field = CoefficientField::new(template.clone())?;
        Some(planar_values(&field, mu, &e, &queries, 0.5 * h, cfg)?)
    };

    let mut record = EnsembleRecord::new("additivity", queries.iter().map(|t| label(*t)).collect());
    record.per_seed = per_seed;
    let n = record.per_seed.len() as f64;
    let rows: Vec<AdditivityRow> = pairs
        .iter()
        .map(|&(s, t)| {
            let (is, it, ist) = (pos(s), pos(t), pos(s + t));
            let d: Vec<f64> = record
                .per_seed
                .iter()
                .map(|r| r.values[ist] - r.values[it] - r.values[is])
                .collect();
            let defect = mean(&d).abs();
            let defect_stderr = if d.len() > 1 { (variance(&d) / n).sqrt() } else { 0.0 };
            let scheme_error = refined.as_ref().map(|fine| {
                let coarse = &record.per_seed[0].values;
                // Rounding in the three values bounds what any refinement can resolve.
                let floor = 64.0 * f64::EPSILON * [is, it, ist].iter().map(|&k| coarse[k].abs()).sum::<f64>();
                [is, it, ist].iter().map(|&k| (coarse[k] - fine[k]).abs()).sum::<f64>() + floor
            });
            AdditivityRow {
                s,
                t,
                defect,
                defect_stderr,
                normalized: defect / (s + t).powf(ADDITIVITY_EXPONENT),
                scheme_error,
            }
        })
        .collect();
    for r in &rows {
        record.put(&format!("defect@{},{}", r.s, r.t), r.defect);
        record.put(&format!("normalized@{},{}", r.s, r.t), r.normalized);
    }
    Ok(AdditivityResult { record, rows })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationResult {
    pub record: EnsembleRecord,
    /// Box outside of which the second field was resampled.
    pub region: Aabb,
    /// `(buffer b, sup over {m₁ <= t − b} of |m₁ − m₂|)`.
    pub curve: Vec<(f64, f64)>,
    pub l_est: f64,
    /// Smallest buffer from which every sup stays below `l_est`.
    pub b_star: Option<f64>,
    pub nodes_in_level_set: usize,
}

fn splice_spec(spec: &FieldSpec, region: Aabb, outer_seed: u64) -> Option<FieldSpec> {
    let mut out = spec.clone();
    match &mut out.forcing {
        ForcingSpec::PoissonBump { resample_outside, .. }
        | ForcingSpec::CheckerboardSmoothed { resample_outside, .. } => {
            *resample_outside = Some(Splice { region, outer_seed });
            Some(out)
        }
        _ => None,
    }
}

/// Compares metric solutions for two fields that agree on `{m₁ <= t}`. The
/// second field keeps the first one's coefficients on a box containing that
/// sublevel set and draws fresh ones, keyed on `outer_seed`, elsewhere.
/// Deterministic fields are compared with themselves.
#[allow(clippy::too_many_arguments)]
pub fn run_localization_experiment(
    spec: &FieldSpec,
    mu: f64,
    target: &TargetSet,
    grid: &Grid,
    t: f64,
    outer_seed: u64,
    buffers: &[f64],
    cfg: &SolverConfig,
) -> Result<LocalizationResult> {
    if buffers.is_empty() || buffers.iter().any(|b| !(*b >= 0.0)) {
        return Err(invalid("buffers must be a non-empty list of non-negative values"));
    }
    if !(t > 0.0) {
        return Err(invalid("level t must be positive"));
    }
    let field1 = CoefficientField::new(spec.clone())?;
    let sol1 = solve_metric(&field1, mu, target, grid.clone(), cfg)?;
    let g = sol1.grid().clone();
    let m1 = sol1.m.values();
    let inside: Vec<usize> = (0..g.len()).filter(|&i| m1[i] <= t).collect();
    if inside.is_empty() {
        return Err(invalid("sublevel set {m <= t} is empty on the grid"));
    }
    let dim = g.dim();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for &i in &inside {
        let x = g.position(i);
        for k in 0..dim {
            lo[k] = lo[k].min(x[k]);
            hi[k] = hi[k].max(x[k]);
        }
    }
    let region = Aabb::new(&lo, &hi).dilate(g.h());
    let spec2 = splice_spec(spec, region.clone(), outer_seed).unwrap_or_else(|| spec.clone());
    let field2 = CoefficientField::new(spec2)?;
    for &i in &inside {
        let x = g.position(i);
        let (a1, a2) = (field1.forcing(&x), field2.forcing(&x));
        if a1 != a2 {
            return Err(Error::Construction(format!(
                "resampled field differs on the sublevel set at {:?}: {a1} vs {a2}",
                &x[..dim]
            )));
        }
    }
    let sol2 = solve_metric(&field2, mu, target, grid.clone(), cfg)?;
    let m2 = sol2.m.values();
    let mut curve: Vec<(f64, f64)> = buffers
        .iter()
        .map(|&b| {
            let sup = (0..g.len())
                .filter(|&i| m1[i] <= t - b)
                .map(|i| (m1[i] - m2[i]).abs())
                .fold(0.0, f64::max);
            (b, sup)
        })
        .collect();
    curve.sort_by(|a, b| a.0.total_cmp(&b.0));
    let l_est = calibrate_constants(&sol1).l_est;
    let b_star = curve
        .iter()
        .rposition(|(_, sup)| *sup >= l_est)
        .map_or(Some(curve[0].0), |k| curve.get(k + 1).map(|c| c.0));

    let mut record = EnsembleRecord::new("localization", curve.iter().map(|(b, _)| format!("sup(b={b})")).collect());
    record.per_seed = vec![SeedObservables {
        seed: spec.seed().unwrap_or(0),
        values: curve.iter().map(|c| c.1).collect(),
    }];
    record.put("l_est", l_est);
    record.put("level", t);
    if let Some(b) = b_star {
        record.put("b_star", b);
    }
    Ok(LocalizationResult {
        record,
        region,
        curve,
        l_est,
        b_star,
        nodes_in_level_set: inside.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteSpeedRow {
    pub radius: f64,
    pub m1: f64,
    pub m2: f64,
    /// `(m¹(se) − m²(se) − 1)₊`.
    pub violation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteSpeedResult {
    pub record: EnsembleRecord,
    pub rows: Vec<FiniteSpeedRow>,
    /// Smallest ladder radius from which the violation stays at zero.
    pub r_star: Option<f64>,
    /// `μ⁻⁵ (1 + M + s)^{9/2}`.
    pub envelope: f64,
}

/// Metric problems on `{x·e > 0}` whose boundary data agree only on the disc
/// of radius `R` about the origin: `m¹` has zero data, `m²` has zero data in
/// the disc and `−M` outside it.
#[allow(clippy::too_many_arguments)]
pub fn run_finite_speed_experiment(
    field: &CoefficientField,
    mu: f64,
    e: &Vector,
    s: f64,
    big_m: f64,
    radii: &[f64],
    h: f64,
    cfg: &SolverConfig,
) -> Result<FiniteSpeedResult> {
    if field.dim() < 2 {
        return Err(invalid("finite-speed experiment needs dimension >= 2"));
    }
    if !(s > 0.0 && big_m >= 0.0) {
        return Err(invalid("need s > 0 and M >= 0"));
    }
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(invalid("R-ladder must be non-empty and positive"));
    }
    let e = unit(e)?;
    let r_max = radii.iter().copied().fold(0.0, f64::max);
    let depth = cfg.slab_depth_factor * s + 2.0;
    let width = 2.0 * (r_max + s + 2.0);
    let grid = planar_grid(field.dim(), h, &e, 0.0, depth, width)?;
    let target = TargetSet::half_space(e, 0.0)?;
    let query = vector::scale(&e, s);
    let at = |sol: &crate::metric::MetricSolution| {
        sol.value_at(&query).ok_or_else(|| invalid("query point lies outside the slab"))
    };
    let m1 = at(&solve_metric(field, mu, &target, grid.clone(), cfg)?)?;
    let mut ladder: Vec<f64> = radii.to_vec();
    ladder.sort_by(f64::total_cmp);
    let rows: Vec<FiniteSpeedRow> = ladder
        .iter()
        .map(|&radius| {
            let data = |x: &Vector| if vector::norm(x) <= radius { 0.0 } else { -big_m };
            let m2 = at(&solve_metric_with_data(field, mu, &target, grid.clone(), data, cfg)?)?;
            Ok(FiniteSpeedRow {
                radius,
                m1,
                m2,
                violation: (m1 - m2 - 1.0).max(0.0),
            })
        })
        .collect::<Result<_>>()?;
    let r_star = match rows.iter().rposition(|r| r.violation > 0.0) {
        None => Some(rows[0].radius),
        Some(k) => rows.get(k + 1).map(|r| r.radius),
    };
    let envelope = mu.powi(-5) * (1.0 + big_m + s).powf(4.5);

    let mut record = EnsembleRecord::new("finite-speed", rows.iter().map(|r| format!("violation(R={})", r.radius)).collect());
    record.per_seed = vec![SeedObservables {
        seed: field.spec().seed().unwrap_or(0),
        values: rows.iter().map(|r| r.violation).collect(),
    }];
    record.put("m1", m1);
    record.put("envelope", envelope);
    if let Some(r) = r_star {
        record.put("r_star", r);
        record.put("r_star_over_envelope", r / envelope);
    }
    Ok(FiniteSpeedResult {
        record,
        rows,
        r_star,
        envelope,
    })
}
