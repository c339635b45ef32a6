//! Dispatch of one configuration to the solver modules.

use std::collections::BTreeMap;

use homog_core::corrector::{corrector_torus, corrector_torus_with_side, solve_corrector};
use homog_core::effective::{
    estimate_mbar, hbar_from_corrector, invert_to_hbar, EffectiveHamiltonianEstimate, HbarSample, Route, SlopeRow,
    SlopeTable,
};
use homog_core::ensemble::{
    run_additivity_experiment, run_finite_speed_experiment, run_fluctuation_experiment, run_localization_experiment,
    EnsembleRecord,
};
use homog_core::evolution::{homogenization_error, solve_homogenized, solve_oscillatory};
use homog_core::fields::{Aabb, CoefficientField, FieldSpec};
use homog_core::metric::{calibrate_constants, solve_metric};
use homog_core::numerics::Grid;
use homog_core::vector::{self, Vector};

use crate::config::{replicate_seed, replicate_seeds, Experiment, ExperimentConfig, HbarSource};
use crate::oracles::exact_hbar_1d;
use crate::output::{num, opt, Sink};
use crate::CliError;

pub type Summary = BTreeMap<String, f64>;

fn vec_cols(v: &Vector) -> [String; 3] {
    [num(v[0]), num(v[1]), num(v[2])]
}

fn put(summary: &mut Summary, key: impl Into<String>, v: f64) {
    if v.is_finite() {
        summary.insert(key.into(), v);
    }
}

/// Runs the experiment, writing artifacts through `sink`.
pub fn execute(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<Summary, CliError> {
    let field = CoefficientField::new(cfg.field.clone())?;
    let solver = &cfg.solver;
    let mut summary = Summary::new();
    match &cfg.experiment {
        Experiment::Metric {
            mu,
            target,
            lower_len,
            upper_len,
            h_len,
            dump,
        } => {
            let bbox = Aabb::new(lower_len, upper_len);
            let grid = Grid::covering(&bbox, *h_len)?;
            let sol = solve_metric(&field, *mu, target, grid, solver)?;
            let cal = calibrate_constants(&sol);
            let (a_lo, a_hi) = field.extrema_on_box(&bbox, *h_len);
            let p = field.exponent();
            let (lo_slope, hi_slope) = ((mu / a_hi).powf(1.0 / p), (mu / a_lo).powf(1.0 / p));
            let slack = 3.0 * h_len * cal.big_l_est;
            let dist = sol.distances();
            let growth = sol
                .m
                .values()
                .iter()
                .zip(&dist)
                .filter(|(m, d)| **m < lo_slope * **d - slack || **m > hi_slope * **d + slack)
                .count();
            sink.csv(
                "metric.csv",
                &[
                    "mu", "h", "nodes", "iters", "residual", "method", "lip_est", "l_est", "big_l_est", "l_grad",
                    "sandwich_violations", "growth_violations",
                ],
                &[vec![
                    num(*mu),
                    num(*h_len),
                    sol.grid().len().to_string(),
                    sol.iters.to_string(),
                    num(sol.residual_norm),
                    format!("{:?}", sol.method).to_lowercase(),
                    num(sol.lip_est),
                    num(cal.l_est),
                    num(cal.big_l_est),
                    num(cal.l_grad),
                    cal.sandwich_violations.to_string(),
                    growth.to_string(),
                ]],
            )?;
            if *dump {
                let stem = sink.dump("metric");
                sol.write(&stem, &field)?;
            }
            put(&mut summary, "residual", sol.residual_norm);
            put(&mut summary, "iters", sol.iters as f64);
            put(&mut summary, "lip_est", sol.lip_est);
            put(&mut summary, "l_est", cal.l_est);
            put(&mut summary, "big_l_est", cal.big_l_est);
            put(&mut summary, "sandwich_violations", cal.sandwich_violations as f64);
            put(&mut summary, "growth_violations", growth as f64);
        }
        Experiment::Corrector {
            xi,
            delta,
            h_len,
            side_len,
            dump,
        } => {
            let torus = match side_len {
                Some(s) => corrector_torus_with_side(&field, *s, *h_len)?,
                None => corrector_torus(&field, *delta, *h_len, solver)?,
            };
            let sol = solve_corrector(&field, xi, *delta, torus, solver)?;
            let violations = sol.bound_violations(field.exponent(), solver.tol);
            let [x0, x1, x2] = vec_cols(xi);
            sink.csv(
                "corrector.csv",
                &[
                    "xi_0", "xi_1", "xi_2", "delta", "side", "dvd0", "residual", "iters", "method", "bound_violations",
                ],
                &[vec![
                    x0,
                    x1,
                    x2,
                    num(*delta),
                    num(sol.v.grid().period()),
                    num(sol.dvd0),
                    num(sol.residual_norm),
                    sol.iters.to_string(),
                    format!("{:?}", sol.method).to_lowercase(),
                    violations.to_string(),
                ]],
            )?;
            if *dump {
                let stem = sink.dump("corrector");
                sol.write(&stem, &field)?;
            }
            put(&mut summary, "dvd0", sol.dvd0);
            put(&mut summary, "residual", sol.residual_norm);
            put(&mut summary, "bound_violations", violations as f64);
        }
        Experiment::Effective {
            directions,
            mu_list,
            t_list_len,
            h_len,
            magnitudes,
            corrector_deltas,
            corrector_h_len,
            ..
        } => {
            let fields = realizations(&cfg.field, &replicate_seeds(cfg))?;
            let mut slope_rows = Vec::new();
            let mut hbar_rows = Vec::new();
            for (d, e) in directions.iter().enumerate() {
                let e = vector::normalized(e).expect("validated direction");
                let rows: Vec<SlopeRow> = mu_list
                    .iter()
                    .map(|mu| estimate_mbar(&fields, *mu, &e, t_list_len, *h_len, solver))
                    .collect::<Result<_, _>>()?;
                for r in &rows {
                    put(&mut summary, format!("mbar_d{d}_mu{}", r.mu), r.mbar);
                    slope_rows.push(slope_cols(d, r));
                }
                let table = SlopeTable::new(e, rows);
                for &t in magnitudes {
                    let inv = invert_to_hbar(&table, t)?;
                    put(&mut summary, format!("hbar_metric_d{d}_t{t}"), inv.value);
                    hbar_rows.push(hbar_cols(Route::MetricRoute, &vector::scale(&e, t), inv.value, inv.uncertainty, false));
                }
                if !corrector_deltas.is_empty() {
                    let h = corrector_h_len.unwrap_or(*h_len);
                    for &t in magnitudes {
                        let xi = vector::scale(&e, t);
                        let est = hbar_from_corrector(&fields[0], &xi, corrector_deltas, h, solver)?;
                        put(&mut summary, format!("hbar_corrector_d{d}_t{t}"), est.value);
                        hbar_rows.push(hbar_cols(Route::CorrectorRoute, &xi, est.value, est.uncertainty, est.low_confidence));
                    }
                }
            }
            sink.csv("slopes.csv", &SLOPE_HEADER, &slope_rows)?;
            sink.csv("hbar.csv", &HBAR_HEADER, &hbar_rows)?;
        }
        Experiment::Fluctuation {
            mu,
            e,
            t_list_len,
            h_len,
            ..
        } => {
            let res = run_fluctuation_experiment(&cfg.field, *mu, e, t_list_len, &replicate_seeds(cfg), *h_len, solver)?;
            let rows: Vec<Vec<String>> = res
                .rows
                .iter()
                .map(|r| vec![num(r.t), num(r.mean), num(r.variance), num(r.variance.sqrt())])
                .collect();
            sink.csv("fluctuation.csv", &["t", "mean", "variance", "std"], &rows)?;
            let tail: Vec<Vec<String>> = res
                .tail
                .iter()
                .flat_map(|tc| tc.points.iter().map(|(l, p)| vec![num(*l), num(*p)]))
                .collect();
            sink.csv("tail.csv", &["lambda", "probability"], &tail)?;
            finish_record(cfg, res.record, sink, &mut summary)?;
        }
        Experiment::Additivity {
            mu,
            e,
            pairs_len,
            h_len,
            ..
        } => {
            let res = run_additivity_experiment(&cfg.field, *mu, e, pairs_len, &replicate_seeds(cfg), *h_len, solver)?;
            let rows: Vec<Vec<String>> = res
                .rows
                .iter()
                .map(|r| {
                    vec![
                        num(r.s),
                        num(r.t),
                        num(r.defect),
                        num(r.defect_stderr),
                        num(r.normalized),
                        num(r.defect / r.t),
                        opt(r.scheme_error),
                    ]
                })
                .collect();
            sink.csv(
                "additivity.csv",
                &["s", "t", "defect", "defect_stderr", "normalized", "defect_over_t", "scheme_error"],
                &rows,
            )?;
            for r in &res.rows {
                put(&mut summary, format!("defect_over_t@{},{}", r.s, r.t), r.defect / r.t);
                if let Some(se) = r.scheme_error {
                    put(&mut summary, format!("scheme_error@{},{}", r.s, r.t), se);
                }
            }
            finish_record(cfg, res.record, sink, &mut summary)?;
        }
        Experiment::Localization {
            mu,
            target,
            lower_len,
            upper_len,
            h_len,
            level,
            buffers,
        } => {
            let grid = Grid::covering(&Aabb::new(lower_len, upper_len), *h_len)?;
            let outer = replicate_seed(cfg.seed_base, &format!("{}/outer", cfg.name), 0);
            let res = run_localization_experiment(&cfg.field, *mu, target, &grid, *level, outer, buffers, solver)?;
            let rows: Vec<Vec<String>> = res.curve.iter().map(|(b, s)| vec![num(*b), num(*s)]).collect();
            sink.csv("localization.csv", &["buffer", "sup_difference"], &rows)?;
            put(&mut summary, "nodes_in_level_set", res.nodes_in_level_set as f64);
            finish_record(cfg, res.record, sink, &mut summary)?;
        }
        Experiment::FiniteSpeed {
            mu,
            e,
            s_len,
            lowered_data,
            radii_len,
            h_len,
        } => {
            let res = run_finite_speed_experiment(&field, *mu, e, *s_len, *lowered_data, radii_len, *h_len, solver)?;
            let rows: Vec<Vec<String>> = res
                .rows
                .iter()
                .map(|r| vec![num(r.radius), num(r.m1), num(r.m2), num(r.violation)])
                .collect();
            sink.csv("finite_speed.csv", &["radius", "m1", "m2", "violation"], &rows)?;
            let last = res.rows.last().map_or(f64::NAN, |r| r.violation);
            put(&mut summary, "violation_at_largest_radius", last);
            finish_record(cfg, res.record, sink, &mut summary)?;
        }
        Experiment::Homogenization {
            epsilons,
            g,
            t_final_time,
            r_obs_len,
            h_over_epsilon,
            homogenized_h_len,
            hbar,
            front,
            ..
        } => {
            let table = homogenized_table(cfg, &field, hbar)?;
            let hom_cfg = cfg.evolution_config(*homogenized_h_len).expect("homogenization config");
            let hom = solve_homogenized(&table, g, *t_final_time, *r_obs_len, &hom_cfg)?;
            let mut ladder: Vec<f64> = epsilons.clone();
            ladder.sort_by(|a, b| b.total_cmp(a));
            let runs = ladder
                .iter()
                .map(|eps| {
                    let c = cfg.evolution_config(eps * h_over_epsilon).expect("homogenization config");
                    solve_oscillatory(&field, *eps, g, *t_final_time, *r_obs_len, &c)
                })
                .collect::<Result<Vec<_>, _>>()?;
            let err = homogenization_error(&runs, &hom)?;
            let rows: Vec<Vec<String>> = err
                .rows
                .iter()
                .zip(&runs)
                .map(|((eps, e), run)| {
                    vec![num(*eps), num(*e), num(run.grid().h()), run.steps.to_string(), num(run.lip), opt(err.alpha)]
                })
                .collect();
            sink.csv("errors_vs_epsilon.csv", &["epsilon", "sup_error", "h", "steps", "lip", "alpha"], &rows)?;
            let trows: Vec<Vec<String>> = table
                .samples
                .iter()
                .map(|s| hbar_cols(s.route, &s.xi, s.value, s.uncertainty, false))
                .collect();
            sink.csv("hbar.csv", &HBAR_HEADER, &trows)?;
            for (eps, e) in &err.rows {
                put(&mut summary, format!("error@{eps}"), *e);
            }
            put(&mut summary, "strictly_decreasing", if err.strictly_decreasing { 1.0 } else { 0.0 });
            if let Some(a) = err.alpha {
                put(&mut summary, "alpha", a);
            }
            if let Some(se) = err.alpha_stderr {
                put(&mut summary, "alpha_stderr", se);
            }
            if let Some(fp) = front {
                let (speed, track) = hom.front_speed(&fp.e, fp.level)?;
                let rows: Vec<Vec<String>> = track.iter().map(|(t, x)| vec![num(*t), num(*x)]).collect();
                sink.csv("front.csv", &["t", "crossing"], &rows)?;
                put(&mut summary, "front_speed", speed);
            }
        }
    }
    Ok(summary)
}

pub const SLOPE_HEADER: [&str; 12] = [
    "direction", "e_0", "e_1", "e_2", "mu", "mbar", "stderr", "t_min", "t_max", "intercept", "defect_exponent", "seeds",
];

pub const HBAR_HEADER: [&str; 7] = ["route", "xi_0", "xi_1", "xi_2", "value", "uncertainty", "low_confidence"];

fn slope_cols(d: usize, r: &SlopeRow) -> Vec<String> {
    let [e0, e1, e2] = vec_cols(&r.e);
    vec![
        d.to_string(),
        e0,
        e1,
        e2,
        num(r.mu),
        num(r.mbar),
        num(r.stderr),
        num(r.t_window.0),
        num(r.t_window.1),
        num(r.intercept),
        opt(r.defect_exponent),
        r.seeds.to_string(),
    ]
}

fn hbar_cols(route: Route, xi: &Vector, value: f64, uncertainty: f64, low: bool) -> Vec<String> {
    let [x0, x1, x2] = vec_cols(xi);
    vec![route.as_str().into(), x0, x1, x2, num(value), num(uncertainty), low.to_string()]
}

fn realizations(spec: &FieldSpec, seeds: &[u64]) -> Result<Vec<CoefficientField>, CliError> {
    if !spec.is_random() {
        return Ok(vec![CoefficientField::new(spec.clone())?]);
    }
    seeds
        .iter()
        .map(|s| CoefficientField::new(spec.with_seed(*s)).map_err(CliError::from))
        .collect()
}

fn homogenized_table(
    cfg: &ExperimentConfig,
    field: &CoefficientField,
    source: &HbarSource,
) -> Result<EffectiveHamiltonianEstimate, CliError> {
    match source {
        HbarSource::Exact1d { magnitudes } => {
            let c = exact_hbar_1d(field)?;
            let p = field.exponent();
            Ok(EffectiveHamiltonianEstimate::radial(1, 2, magnitudes, |r| c * r.powf(p))?)
        }
        HbarSource::MetricRoute {
            directions,
            magnitudes,
            mu_list,
            t_list_len,
            h_len,
        } => {
            let dim = field.dim();
            let dirs: Vec<Vector> = if dim == 1 {
                vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]
            } else {
                (0..*directions)
                    .map(|k| {
                        let a = 2.0 * std::f64::consts::PI * k as f64 / *directions as f64;
                        [a.cos(), a.sin(), 0.0]
                    })
                    .collect()
            };
            let fields = realizations(&cfg.field, &replicate_seeds(cfg))?;
            let mut samples = Vec::new();
            for e in dirs {
                let rows: Vec<SlopeRow> = mu_list
                    .iter()
                    .map(|mu| estimate_mbar(&fields, *mu, &e, t_list_len, *h_len, &cfg.solver))
                    .collect::<Result<_, _>>()?;
                let table = SlopeTable::new(e, rows);
                for &t in magnitudes {
                    let inv = invert_to_hbar(&table, t)?;
                    samples.push(HbarSample {
                        xi: vector::scale(&e, t),
                        value: inv.value,
                        uncertainty: inv.uncertainty,
                        route: Route::MetricRoute,
                    });
                }
            }
            Ok(EffectiveHamiltonianEstimate::from_samples(dim, samples)?)
        }
    }
}

fn finish_record(
    cfg: &ExperimentConfig,
    mut record: EnsembleRecord,
    sink: &mut Sink,
    summary: &mut Summary,
) -> Result<(), CliError> {
    record.experiment_id = cfg.name.clone();
    let mut header = vec!["seed".to_string()];
    header.extend(record.observable_names.iter().cloned());
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = record
        .per_seed
        .iter()
        .map(|r| std::iter::once(r.seed.to_string()).chain(r.values.iter().map(|v| num(*v))).collect())
        .collect();
    sink.csv("per_seed.csv", &header_refs, &rows)?;
    for (k, v) in &record.summary {
        put(summary, k.clone(), *v);
    }
    sink.json("record.json", &record)?;
    Ok(())
}
