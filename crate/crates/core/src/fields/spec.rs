use serde::{Deserialize, Serialize};

use crate::vector::{self, Vector};

/// Serializable description of a coefficient field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub dim: usize,
    /// Homogeneity exponent p of the Hamiltonian `a(x)|ξ|^p`.
    pub exponent: f64,
    pub forcing: ForcingSpec,
    #[serde(default)]
    pub diffusion: DiffusionSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ForcingSpec {
    Constant {
        value: f64,
    },
    PeriodicTrig {
        base: f64,
        period: f64,
        modes: Vec<TrigMode>,
    },
    PoissonBump {
        seed: u64,
        /// Mean number of bump centres per unit volume.
        intensity: f64,
        bump_height: f64,
        base: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        resample_outside: Option<Splice>,
    },
    CheckerboardSmoothed {
        seed: u64,
        base: f64,
        amplitude: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        resample_outside: Option<Splice>,
    },
}

/// One term `amplitude * sin(2π (wavevector·x)/period + phase)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigMode {
    pub amplitude: f64,
    pub wavevector: Vec<i32>,
    #[serde(default)]
    pub phase: f64,
}

/// Replace the random stream outside `region` by the one keyed on
/// `outer_seed`. Inside `region` the field is unchanged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Splice {
    pub region: Aabb,
    pub outer_seed: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DiffusionSpec {
    #[default]
    None,
    /// `A = coefficient * I`.
    Isotropic { coefficient: f64 },
    /// `A(e) = strength * (I - e⊗e)`; strength 1 is forced mean curvature.
    CurvatureProjection {
        #[serde(default = "one")]
        strength: f64,
    },
    /// `A(e) = (I - e⊗e) M (I - e⊗e)` for a fixed symmetric PSD matrix M.
    AnisotropicTable { matrix: Vec<Vec<f64>> },
}

fn one() -> f64 {
    1.0
}

/// Axis-aligned box given by its lower and upper corners.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Aabb {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Aabb {
    pub fn new(lower: &[f64], upper: &[f64]) -> Self {
        Self {
            lower: lower.to_vec(),
            upper: upper.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower_v(&self) -> Vector {
        vector::from_slice(&self.lower)
    }

    pub fn upper_v(&self) -> Vector {
        vector::from_slice(&self.upper)
    }

    pub fn contains(&self, x: &Vector) -> bool {
        (0..self.dim()).all(|i| x[i] >= self.lower[i] && x[i] <= self.upper[i])
    }

    /// Box grown by `r` on every side.
    pub fn dilate(&self, r: f64) -> Aabb {
        Aabb {
            lower: self.lower.iter().map(|v| v - r).collect(),
            upper: self.upper.iter().map(|v| v + r).collect(),
        }
    }

    /// Whether the closed cube `[lo, hi]` (per axis) meets this box.
    pub fn intersects(&self, lo: &Vector, hi: &Vector) -> bool {
        (0..self.dim()).all(|i| hi[i] >= self.lower[i] && lo[i] <= self.upper[i])
    }

    pub fn is_valid(&self) -> bool {
        !self.lower.is_empty()
            && self.lower.len() == self.upper.len()
            && self.lower.len() <= vector::MAX_DIM
            && self
                .lower
                .iter()
                .zip(&self.upper)
                .all(|(l, u)| l.is_finite() && u.is_finite() && l <= u)
    }
}

impl FieldSpec {
    /// Same field family with a different random seed. Deterministic kinds
    /// are returned unchanged.
    pub fn with_seed(&self, seed: u64) -> FieldSpec {
        let mut out = self.clone();
        match &mut out.forcing {
            ForcingSpec::PoissonBump { seed: s, .. } | ForcingSpec::CheckerboardSmoothed { seed: s, .. } => *s = seed,
            _ => {}
        }
        out
    }

    pub fn seed(&self) -> Option<u64> {
        match &self.forcing {
            ForcingSpec::PoissonBump { seed, .. } | ForcingSpec::CheckerboardSmoothed { seed, .. } => Some(*seed),
            _ => None,
        }
    }

    pub fn is_random(&self) -> bool {
        self.seed().is_some()
    }

    pub fn is_first_order(&self) -> bool {
        match &self.diffusion {
            DiffusionSpec::None => true,
            DiffusionSpec::CurvatureProjection { strength } => *strength == 0.0 || self.dim == 1,
            DiffusionSpec::Isotropic { coefficient } => *coefficient == 0.0,
            DiffusionSpec::AnisotropicTable { matrix } => {
                self.dim == 1 || matrix.iter().flatten().all(|v| *v == 0.0)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_specs() -> Vec<FieldSpec> {
        vec![
            FieldSpec {
                dim: 1,
                exponent: 1.0,
                forcing: ForcingSpec::PeriodicTrig {
                    base: 2.0,
                    period: 1.0,
                    modes: vec![TrigMode {
                        amplitude: 1.0,
                        wavevector: vec![1],
                        phase: 0.0,
                    }],
                },
                diffusion: DiffusionSpec::None,
            },
            FieldSpec {
                dim: 2,
                exponent: 1.5,
                forcing: ForcingSpec::PoissonBump {
                    seed: 12345678901234,
                    intensity: 1.25,
                    bump_height: 0.5,
                    base: 1.0,
                    resample_outside: Some(Splice {
                        region: Aabb::new(&[-1.0, -2.0], &[3.0, 4.0]),
                        outer_seed: 99,
                    }),
                },
                diffusion: DiffusionSpec::CurvatureProjection { strength: 1.0 },
            },
            FieldSpec {
                dim: 2,
                exponent: 2.0,
                forcing: ForcingSpec::CheckerboardSmoothed {
                    seed: 3,
                    base: 2.0,
                    amplitude: 0.3,
                    resample_outside: None,
                },
                diffusion: DiffusionSpec::AnisotropicTable {
                    matrix: vec![vec![0.5, 0.1], vec![0.1, 0.25]],
                },
            },
        ]
    }

    #[test]
    fn descriptors_round_trip_through_toml_and_json() {
        for spec in sample_specs() {
            let text = toml::to_string(&spec).unwrap();
            let back: FieldSpec = toml::from_str(&text).unwrap();
            assert_eq!(back, spec, "toml:\n{text}");
            let json = serde_json::to_string(&spec).unwrap();
            let back: FieldSpec = serde_json::from_str(&json).unwrap();
            assert_eq!(back, spec);
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = "dim = 1\nexponent = 1.0\nbogus = 3\n[forcing]\nkind = \"constant\"\nvalue = 2.0\n";
        assert!(toml::from_str::<FieldSpec>(text).is_err());
    }

    #[test]
    fn reseeding_only_touches_random_kinds() {
        let specs = sample_specs();
        assert_eq!(specs[0].with_seed(5), specs[0]);
        assert_eq!(specs[1].with_seed(5).seed(), Some(5));
    }
}
