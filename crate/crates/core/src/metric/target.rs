use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fields::Aabb;
use crate::vector::{self, Vector};

/// Target set `S` of a metric problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TargetSet {
    /// `{x·e <= −offset}`.
    HalfSpace { e: Vector, offset: f64 },
    /// Union of closed balls with a common radius `>= 1`.
    BallUnion { centers: Vec<Vector>, radius: f64 },
    Box { region: Aabb },
}

impl TargetSet {
    pub fn half_space(e: Vector, offset: f64) -> Result<Self> {
        let e = vector::normalized(&e).ok_or_else(|| invalid("half-space normal must be nonzero"))?;
        Ok(TargetSet::HalfSpace { e, offset })
    }

    pub fn ball(center: Vector, radius: f64) -> Self {
        TargetSet::BallUnion {
            centers: vec![center],
            radius,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            TargetSet::HalfSpace { e, offset } => {
                if (vector::norm(e) - 1.0).abs() > 1e-9 || !offset.is_finite() {
                    return Err(invalid("half-space target needs a unit normal and finite offset"));
                }
                if e[dim..].iter().any(|v| *v != 0.0) {
                    return Err(invalid("half-space normal has components beyond the dimension"));
                }
            }
            TargetSet::BallUnion { centers, radius } => {
                if centers.is_empty() {
                    return Err(invalid("ball-union target needs at least one center"));
                }
                // Balls of radius >= 1 are unions of closed unit balls, which is the
                // interior-ball condition.
                if !(*radius >= 1.0) {
                    return Err(invalid(format!("ball radius must be >= 1 for the interior-ball condition, got {radius}")));
                }
                if centers.iter().any(|c| c.iter().any(|v| !v.is_finite())) {
                    return Err(invalid("ball centers must be finite"));
                }
            }
            TargetSet::Box { region } => {
                if !region.is_valid() || region.dim() != dim {
                    return Err(invalid("box target must be a valid box of the field dimension"));
                }
            }
        }
        Ok(())
    }

    /// Euclidean distance to `S`; zero inside.
    pub fn distance(&self, x: &Vector) -> f64 {
        match self {
            TargetSet::HalfSpace { e, offset } => (vector::dot(x, e) + offset).max(0.0),
            TargetSet::BallUnion { centers, radius } => centers
                .iter()
                .map(|c| (vector::norm(&vector::sub(x, c)) - radius).max(0.0))
                .fold(f64::INFINITY, f64::min),
            TargetSet::Box { region } => {
                let mut s = 0.0;
                for i in 0..region.dim() {
                    let d = (region.lower[i] - x[i]).max(x[i] - region.upper[i]).max(0.0);
                    s += d * d;
                }
                s.sqrt()
            }
        }
    }

    pub fn contains(&self, x: &Vector) -> bool {
        self.distance(x) <= 1e-12
    }

    pub fn translated(&self, v: &Vector) -> Self {
        match self {
            TargetSet::HalfSpace { e, offset } => TargetSet::HalfSpace {
                e: *e,
                offset: offset - vector::dot(v, e),
            },
            TargetSet::BallUnion { centers, radius } => TargetSet::BallUnion {
                centers: centers.iter().map(|c| vector::add(c, v)).collect(),
                radius: *radius,
            },
            TargetSet::Box { region } => TargetSet::Box {
                region: Aabb {
                    lower: region.lower.iter().zip(v).map(|(l, d)| l + d).collect(),
                    upper: region.upper.iter().zip(v).map(|(u, d)| u + d).collect(),
                },
            },
        }
    }
}
