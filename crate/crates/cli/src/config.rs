//! Experiment configuration files.
//!
//! Keys carrying a length end in `_len` and keys carrying a time end in
//! `_time`; both are in units of the field's range of dependence.

use std::collections::BTreeMap;
use std::path::Path;

use homog_core::evolution::{EvolutionConfig, InitialCondition};
use homog_core::fields::{Aabb, CoefficientField, FieldSpec};
use homog_core::metric::TargetSet;
use homog_core::numerics::{EnvelopeRule, SolverConfig};
use homog_core::vector::{self, Vector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Experiment id; also keys the seed stream, so adding replicates keeps
    /// the seeds already in use.
    pub name: String,
    #[serde(default)]
    pub seed_base: u64,
    pub field: FieldSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    pub experiment: Experiment,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<Check>,
}

/// Threshold on one summary quantity; a failed check gives exit status 4.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Check {
    pub quantity: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
}

impl Check {
    /// `None` when the check passes, otherwise a reason.
    pub fn evaluate(&self, summary: &BTreeMap<String, f64>) -> Option<String> {
        let Some(&v) = summary.get(&self.quantity) else {
            return Some(format!("{}: quantity missing from the summary", self.quantity));
        };
        if let (Some(t), Some(tol)) = (self.target, self.rel_tol) {
            if (v - t).abs() > tol * t.abs() {
                return Some(format!("{}: {v} differs from {t} by more than {tol} relative", self.quantity));
            }
        }
        if let Some(m) = self.min {
            if !(v >= m) {
                return Some(format!("{}: {v} < {m}", self.quantity));
            }
        }
        if let Some(m) = self.max {
            if !(v <= m) {
                return Some(format!("{}: {v} > {m}", self.quantity));
            }
        }
        None
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    Metric {
        mu: f64,
        target: TargetSet,
        lower_len: Vec<f64>,
        upper_len: Vec<f64>,
        h_len: f64,
        #[serde(default)]
        dump: bool,
    },
    Corrector {
        xi: Vector,
        delta: f64,
        h_len: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        side_len: Option<f64>,
        #[serde(default)]
        dump: bool,
    },
    Effective {
        directions: Vec<Vector>,
        mu_list: Vec<f64>,
        t_list_len: Vec<f64>,
        h_len: f64,
        #[serde(default = "one")]
        replicates: usize,
        magnitudes: Vec<f64>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        corrector_deltas: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        corrector_h_len: Option<f64>,
    },
    Fluctuation {
        mu: f64,
        e: Vector,
        t_list_len: Vec<f64>,
        replicates: usize,
        h_len: f64,
    },
    Additivity {
        mu: f64,
        e: Vector,
        pairs_len: Vec<(f64, f64)>,
        #[serde(default = "one")]
        replicates: usize,
        h_len: f64,
    },
    Localization {
        mu: f64,
        target: TargetSet,
        lower_len: Vec<f64>,
        upper_len: Vec<f64>,
        h_len: f64,
        level: f64,
        buffers: Vec<f64>,
    },
    FiniteSpeed {
        mu: f64,
        e: Vector,
        s_len: f64,
        lowered_data: f64,
        radii_len: Vec<f64>,
        h_len: f64,
    },
    Homogenization {
        epsilons: Vec<f64>,
        g: InitialCondition,
        t_final_time: f64,
        r_obs_len: f64,
        /// Spacing of the oscillatory runs as a fraction of `ε`.
        h_over_epsilon: f64,
        homogenized_h_len: f64,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        checkpoints_time: Vec<f64>,
        #[serde(default = "half")]
        cfl: f64,
        #[serde(default)]
        envelope: EnvelopeRule,
        hbar: HbarSource,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        front: Option<FrontProbe>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum HbarSource {
    /// Closed form for one-dimensional first-order periodic fields.
    #[serde(rename = "exact-1d")]
    Exact1d { magnitudes: Vec<f64> },
    MetricRoute {
        directions: usize,
        magnitudes: Vec<f64>,
        mu_list: Vec<f64>,
        t_list_len: Vec<f64>,
        h_len: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrontProbe {
    pub e: Vector,
    pub level: f64,
}

fn one() -> usize {
    1
}

fn half() -> f64 {
    0.5
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Metric { .. } => "metric",
            Experiment::Corrector { .. } => "corrector",
            Experiment::Effective { .. } => "effective",
            Experiment::Fluctuation { .. } => "fluctuation",
            Experiment::Additivity { .. } => "additivity",
            Experiment::Localization { .. } => "localization",
            Experiment::FiniteSpeed { .. } => "finite-speed",
            Experiment::Homogenization { .. } => "homogenization",
        }
    }

    pub fn replicates(&self) -> usize {
        match self {
            Experiment::Effective { replicates, .. }
            | Experiment::Fluctuation { replicates, .. }
            | Experiment::Additivity { replicates, .. } => *replicates,
            _ => 1,
        }
    }
}

pub const KINDS: [&str; 8] = [
    "metric",
    "corrector",
    "effective",
    "fluctuation",
    "additivity",
    "localization",
    "finite-speed",
    "homogenization",
];

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(format!("{name} must be positive and finite, got {v}")))
    }
}

fn all_positive(name: &str, v: &[f64]) -> Result<(), CliError> {
    if v.is_empty() {
        return Err(bad(format!("{name} must not be empty")));
    }
    v.iter().try_for_each(|x| positive(name, *x))
}

fn increasing(name: &str, v: &[f64]) -> Result<(), CliError> {
    if v.windows(2).any(|w| w[1] <= w[0]) {
        return Err(bad(format!("{name} must be strictly increasing")));
    }
    Ok(())
}

fn direction(name: &str, e: &Vector, dim: usize) -> Result<(), CliError> {
    if e[dim..].iter().any(|v| *v != 0.0) || vector::normalized(e).is_none() {
        return Err(bad(format!("{name} must be a nonzero vector in dimension {dim}")));
    }
    Ok(())
}

fn domain(lower: &[f64], upper: &[f64], dim: usize) -> Result<Aabb, CliError> {
    let b = Aabb::new(lower, upper);
    if b.dim() != dim || !b.is_valid() {
        return Err(bad("domain corners must match the field dimension with lower < upper"));
    }
    Ok(b)
}

const MAX_NODES: f64 = 5e7;

fn node_budget(extent: f64, h: f64, dim: usize) -> Result<(), CliError> {
    let n = (extent / h + 1.0).powi(dim as i32);
    if n > MAX_NODES {
        return Err(bad(format!("grid of about {n:.2e} nodes exceeds the {MAX_NODES:.0e} budget")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| bad(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Canonical JSON: object keys sorted, so key order in the file does not matter.
    pub fn canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        serde_json::to_string(&value).expect("value serializes")
    }

    pub fn content_hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn dir_name(&self) -> String {
        format!("{}-{}", self.name, &self.content_hash()[..12])
    }

    /// Checks module preconditions without running anything.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return Err(bad("name must be non-empty and use only [A-Za-z0-9_-]"));
        }
        let field = CoefficientField::new(self.field.clone()).map_err(|e| bad(format!("field: {e}")))?;
        self.solver.validate().map_err(|e| bad(format!("solver: {e}")))?;
        let dim = self.field.dim;
        for c in &self.checks {
            let has_target = c.target.is_some() && c.rel_tol.is_some();
            if !has_target && c.min.is_none() && c.max.is_none() {
                return Err(bad(format!("check on {} sets no threshold", c.quantity)));
            }
        }
        match &self.experiment {
            Experiment::Metric {
                mu,
                target,
                lower_len,
                upper_len,
                h_len,
                ..
            } => {
                positive("mu", *mu)?;
                positive("h_len", *h_len)?;
                target.validate(dim).map_err(|e| bad(e.to_string()))?;
                let b = domain(lower_len, upper_len, dim)?;
                let extent = (0..dim).map(|k| b.upper[k] - b.lower[k]).fold(0.0, f64::max);
                node_budget(extent, *h_len, dim)?;
            }
            Experiment::Corrector {
                xi, delta, h_len, side_len, ..
            } => {
                positive("h_len", *h_len)?;
                if !(*delta > 0.0 && *delta <= 1.0) {
                    return Err(bad(format!("delta must lie in (0, 1], got {delta}")));
                }
                if xi[dim..].iter().any(|v| *v != 0.0) || xi.iter().any(|v| !v.is_finite()) {
                    return Err(bad("xi must be finite and live in the field dimension"));
                }
                let side = side_len.unwrap_or(self.solver.side_factor / delta);
                if side < self.solver.side_factor / delta * (1.0 - 1e-9) {
                    return Err(bad(format!("side_len must be at least {}", self.solver.side_factor / delta)));
                }
                node_budget(side, *h_len, dim)?;
            }
            Experiment::Effective {
                directions,
                mu_list,
                t_list_len,
                h_len,
                replicates,
                magnitudes,
                corrector_deltas,
                corrector_h_len,
            } => {
                if directions.is_empty() {
                    return Err(bad("directions must not be empty"));
                }
                for e in directions {
                    direction("direction", e, dim)?;
                }
                all_positive("mu_list", mu_list)?;
                increasing("mu_list", mu_list)?;
                if mu_list.len() < 2 {
                    return Err(bad("mu_list needs at least two values"));
                }
                all_positive("t_list_len", t_list_len)?;
                increasing("t_list_len", t_list_len)?;
                if t_list_len.len() < 3 || t_list_len[0] < 4.0 {
                    return Err(bad("t_list_len needs >= 3 values starting at >= 4"));
                }
                positive("h_len", *h_len)?;
                all_positive("magnitudes", magnitudes)?;
                if *replicates == 0 {
                    return Err(bad("replicates must be at least 1"));
                }
                if !corrector_deltas.is_empty() {
                    if corrector_deltas.len() < 3 || corrector_deltas.iter().any(|d| !(*d > 0.0 && *d <= 1.0)) {
                        return Err(bad("corrector_deltas needs >= 3 values in (0, 1]"));
                    }
                    positive("corrector_h_len", corrector_h_len.unwrap_or(*h_len))?;
                }
            }
            Experiment::Fluctuation {
                mu,
                e,
                t_list_len,
                replicates,
                h_len,
            } => {
                positive("mu", *mu)?;
                positive("h_len", *h_len)?;
                direction("e", e, dim)?;
                all_positive("t_list_len", t_list_len)?;
                increasing("t_list_len", t_list_len)?;
                if t_list_len[t_list_len.len() - 1] < 4.0 * t_list_len[0] {
                    return Err(bad("t_list_len must span at least a factor 4"));
                }
                if *replicates < homog_core::ensemble::MIN_FLUCTUATION_SEEDS {
                    return Err(bad(format!(
                        "insufficient seeds: {replicates} < {}",
                        homog_core::ensemble::MIN_FLUCTUATION_SEEDS
                    )));
                }
            }
            Experiment::Additivity {
                mu,
                e,
                pairs_len,
                replicates,
                h_len,
            } => {
                positive("mu", *mu)?;
                positive("h_len", *h_len)?;
                direction("e", e, dim)?;
                if pairs_len.is_empty() || pairs_len.iter().any(|(s, t)| !(*s >= 4.0 && *t >= 4.0)) {
                    return Err(bad("pairs_len needs pairs with s, t >= 4"));
                }
                if *replicates == 0 {
                    return Err(bad("replicates must be at least 1"));
                }
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
                positive("mu", *mu)?;
                positive("h_len", *h_len)?;
                positive("level", *level)?;
                target.validate(dim).map_err(|e| bad(e.to_string()))?;
                let b = domain(lower_len, upper_len, dim)?;
                let extent = (0..dim).map(|k| b.upper[k] - b.lower[k]).fold(0.0, f64::max);
                node_budget(extent, *h_len, dim)?;
                if buffers.is_empty() || buffers.iter().any(|b| !(*b >= 0.0)) {
                    return Err(bad("buffers must be non-negative and non-empty"));
                }
            }
            Experiment::FiniteSpeed {
                mu,
                e,
                s_len,
                lowered_data,
                radii_len,
                h_len,
            } => {
                if dim < 2 {
                    return Err(bad("finite-speed needs dimension >= 2"));
                }
                positive("mu", *mu)?;
                positive("s_len", *s_len)?;
                positive("h_len", *h_len)?;
                direction("e", e, dim)?;
                if !(*lowered_data >= 0.0) {
                    return Err(bad("lowered_data must be non-negative"));
                }
                all_positive("radii_len", radii_len)?;
            }
            Experiment::Homogenization {
                epsilons,
                g,
                t_final_time,
                r_obs_len,
                h_over_epsilon,
                homogenized_h_len,
                checkpoints_time,
                cfl,
                hbar,
                front,
                ..
            } => {
                if epsilons.is_empty() || epsilons.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
                    return Err(bad("epsilons must lie in (0, 1]"));
                }
                g.validate().map_err(|e| bad(format!("g: {e}")))?;
                positive("t_final_time", *t_final_time)?;
                positive("r_obs_len", *r_obs_len)?;
                positive("h_over_epsilon", *h_over_epsilon)?;
                positive("homogenized_h_len", *homogenized_h_len)?;
                if !(*cfl > 0.0 && *cfl <= 1.0) {
                    return Err(bad("cfl must lie in (0, 1]"));
                }
                if checkpoints_time.iter().any(|t| !(*t > 0.0 && *t <= *t_final_time)) {
                    return Err(bad("checkpoints must lie in (0, t_final_time]"));
                }
                if dim > 2 {
                    return Err(bad("homogenized solves support dimensions 1 and 2"));
                }
                match hbar {
                    HbarSource::Exact1d { magnitudes } => {
                        all_positive("hbar.magnitudes", magnitudes)?;
                        if dim != 1 || !self.field.is_first_order() || !field.is_periodic() {
                            return Err(bad("exact-1d H̄ needs a one-dimensional first-order periodic field"));
                        }
                    }
                    HbarSource::MetricRoute {
                        directions,
                        magnitudes,
                        mu_list,
                        t_list_len,
                        h_len,
                    } => {
                        if dim == 2 && *directions < 3 {
                            return Err(bad("hbar.directions must be at least 3 in two dimensions"));
                        }
                        all_positive("hbar.magnitudes", magnitudes)?;
                        all_positive("hbar.mu_list", mu_list)?;
                        increasing("hbar.mu_list", mu_list)?;
                        increasing("hbar.t_list_len", t_list_len)?;
                        if t_list_len.len() < 3 || t_list_len[0] < 4.0 {
                            return Err(bad("hbar.t_list_len needs >= 3 values starting at >= 4"));
                        }
                        positive("hbar.h_len", *h_len)?;
                    }
                }
                if let Some(f) = front {
                    direction("front.e", &f.e, dim)?;
                }
            }
        }
        Ok(())
    }

    /// Evolution settings shared by the oscillatory and homogenized runs.
    pub fn evolution_config(&self, h: f64) -> Option<EvolutionConfig> {
        match &self.experiment {
            Experiment::Homogenization {
                checkpoints_time,
                cfl,
                envelope,
                ..
            } => Some(EvolutionConfig {
                h_len: h,
                cfl: *cfl,
                checkpoints_t: checkpoints_time.clone(),
                padding_factor: 1.0,
                dt: None,
                eps_reg_len: self.solver.eps_reg_len,
                envelope: *envelope,
            }),
            _ => None,
        }
    }
}

/// Seed of replicate `index`: the low 63 bits of SHA-256 over the base seed,
/// the experiment id and the index.
pub fn replicate_seed(seed_base: u64, experiment_id: &str, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(seed_base.to_le_bytes());
    h.update((experiment_id.len() as u64).to_le_bytes());
    h.update(experiment_id.as_bytes());
    h.update(index.to_le_bytes());
    let d = h.finalize();
    let mut b = [0u8; 8];
    b.copy_from_slice(&d[..8]);
    u64::from_le_bytes(b) & (u64::MAX >> 1)
}

pub fn replicate_seeds(cfg: &ExperimentConfig) -> Vec<u64> {
    (0..cfg.experiment.replicates() as u64)
        .map(|i| replicate_seed(cfg.seed_base, &cfg.name, i))
        .collect()
}
