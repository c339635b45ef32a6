use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::vector::{self, Vector};

/// Closed-form initial data `g`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialCondition {
    Zero,
    /// `g(x) = slope·x`.
    Plane { slope: Vector },
    /// `g(x) = slope·|x − center|`.
    Cone { center: Vector, slope: f64 },
    /// `g(x) = slope·(√(|x − center|² + radius²) − radius)`.
    SmoothCone { center: Vector, slope: f64, radius: f64 },
    /// `g(x) = amplitude·sin(k·x + phase)`.
    Wave {
        amplitude: f64,
        wavevector: Vector,
        #[serde(default)]
        phase: f64,
    },
}

impl InitialCondition {
    pub fn validate(&self) -> Result<()> {
        let finite = |v: &Vector| v.iter().all(|x| x.is_finite());
        let ok = match self {
            InitialCondition::Zero => true,
            InitialCondition::Plane { slope } => finite(slope),
            InitialCondition::Cone { center, slope } => finite(center) && slope.is_finite(),
            InitialCondition::SmoothCone { center, slope, radius } => finite(center) && slope.is_finite() && *radius > 0.0,
            InitialCondition::Wave { amplitude, wavevector, phase } => {
                amplitude.is_finite() && finite(wavevector) && phase.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("malformed initial condition {self:?}")))
        }
    }

    pub fn eval(&self, x: &Vector) -> f64 {
        match self {
            InitialCondition::Zero => 0.0,
            InitialCondition::Plane { slope } => vector::dot(slope, x),
            InitialCondition::Cone { center, slope } => slope * vector::norm(&vector::sub(x, center)),
            InitialCondition::SmoothCone { center, slope, radius } => {
                let r = vector::norm(&vector::sub(x, center));
                slope * ((r * r + radius * radius).sqrt() - radius)
            }
            InitialCondition::Wave {
                amplitude,
                wavevector,
                phase,
            } => amplitude * (vector::dot(wavevector, x) + phase).sin(),
        }
    }

    /// Global Lipschitz constant.
    pub fn lipschitz(&self) -> f64 {
        match self {
            InitialCondition::Zero => 0.0,
            InitialCondition::Plane { slope } => vector::norm(slope),
            InitialCondition::Cone { slope, .. } | InitialCondition::SmoothCone { slope, .. } => slope.abs(),
            InitialCondition::Wave {
                amplitude, wavevector, ..
            } => amplitude.abs() * vector::norm(wavevector),
        }
    }

    /// Whether `Dg` is globally Lipschitz.
    pub fn is_c11(&self) -> bool {
        !matches!(self, InitialCondition::Cone { .. })
    }
}
