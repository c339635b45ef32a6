//! Finite-range random forcing fields.
//!
//! Both kinds are generated lattice cell by lattice cell from a stream keyed on
//! `(seed, cell)`, so any point can be evaluated without storing the whole
//! realization and evaluations at points more than one unit apart never read
//! the same cell.

use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use super::keyed::{cell_key, unit_from_key};
use super::spec::{Aabb, Splice};
use crate::vector::{Vector, ZERO};

/// Radius of the compactly supported bumps; diameter one keeps the range exact.
pub const BUMP_RADIUS: f64 = 0.5;

/// Hard cap on centres per unit cell, needed for a finite upper bound on `a`.
pub const MAX_POINTS_PER_CELL: usize = 32;

/// Smooth bump `exp(1 - 1/(1-|z|²))` supported in the unit ball, equal to 1 at 0.
pub fn bump(z2: f64) -> f64 {
    if z2 >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - z2)).exp()
    }
}

fn cell_range(x: f64, r: f64) -> (i64, i64) {
    ((x - r).floor() as i64, (x + r).floor() as i64)
}

#[derive(Clone, Debug)]
pub struct PoissonCloud {
    pub dim: usize,
    pub seed: u64,
    pub intensity: f64,
    pub height: f64,
    pub base: f64,
    pub splice: Option<Splice>,
    cache: Option<Arc<HashMap<[i64; 3], Vec<Vector>>>>,
}

impl PoissonCloud {
    pub fn new(dim: usize, seed: u64, intensity: f64, height: f64, base: f64, splice: Option<Splice>) -> Self {
        Self {
            dim,
            seed,
            intensity,
            height,
            base,
            splice,
            cache: None,
        }
    }

    fn seed_for_cell(&self, cell: [i64; 3]) -> u64 {
        match &self.splice {
            None => self.seed,
            Some(sp) => {
                let mut lo = ZERO;
                let mut hi = ZERO;
                for i in 0..self.dim {
                    lo[i] = cell[i] as f64;
                    hi[i] = cell[i] as f64 + 1.0;
                }
                if sp.region.dilate(BUMP_RADIUS).intersects(&lo, &hi) {
                    self.seed
                } else {
                    sp.outer_seed
                }
            }
        }
    }

    /// Centres in one unit cell, regenerated from the keyed stream.
    pub fn generate_cell(&self, cell: [i64; 3]) -> Vec<Vector> {
        if self.intensity <= 0.0 {
            return Vec::new();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cell_key(self.seed_for_cell(cell), cell));
        let count = Poisson::new(self.intensity)
            .map(|d| d.sample(&mut rng) as usize)
            .unwrap_or(0)
            .min(MAX_POINTS_PER_CELL);
        (0..count)
            .map(|_| {
                let mut p = ZERO;
                for (i, c) in p.iter_mut().enumerate().take(self.dim) {
                    *c = cell[i] as f64 + rng.gen::<f64>();
                }
                p
            })
            .collect()
    }

    /// Pre-generate every cell that can influence points of `bbox`.
    pub fn with_cache(mut self, bbox: &Aabb) -> Self {
        let mut map = HashMap::new();
        let lo = bbox.lower_v();
        let hi = bbox.upper_v();
        let mut ranges = [(0i64, 0i64); 3];
        for i in 0..self.dim {
            ranges[i] = ((lo[i] - BUMP_RADIUS).floor() as i64, (hi[i] + BUMP_RADIUS).floor() as i64);
        }
        for c0 in ranges[0].0..=ranges[0].1 {
            for c1 in ranges[1].0..=ranges[1].1 {
                for c2 in ranges[2].0..=ranges[2].1 {
                    let cell = [c0, c1, c2];
                    map.insert(cell, self.generate_cell(cell));
                }
            }
        }
        self.cache = Some(Arc::new(map));
        self
    }

    fn bump_sum(&self, x: &Vector) -> f64 {
        let mut ranges = [(0i64, 0i64); 3];
        for i in 0..self.dim {
            ranges[i] = cell_range(x[i], BUMP_RADIUS);
        }
        let inv_r2 = 1.0 / (BUMP_RADIUS * BUMP_RADIUS);
        let mut sum = 0.0;
        let mut scratch;
        for c0 in ranges[0].0..=ranges[0].1 {
            for c1 in ranges[1].0..=ranges[1].1 {
                for c2 in ranges[2].0..=ranges[2].1 {
                    let cell = [c0, c1, c2];
                    let pts: &[Vector] = match self.cache.as_ref().and_then(|m| m.get(&cell)) {
                        Some(p) => p,
                        None => {
                            scratch = self.generate_cell(cell);
                            &scratch
                        }
                    };
                    for p in pts {
                        let z2: f64 = (0..self.dim).map(|i| (x[i] - p[i]).powi(2)).sum::<f64>() * inv_r2;
                        sum += bump(z2);
                    }
                }
            }
        }
        sum
    }

    pub fn eval(&self, x: &Vector) -> f64 {
        self.base + self.height * self.bump_sum(x)
    }

    /// Bounds valid for every realization: at most `2^d` cells meet a ball of
    /// diameter one.
    pub fn nominal_bounds(&self) -> (f64, f64) {
        let k = (1usize << self.dim) as f64 * MAX_POINTS_PER_CELL as f64;
        (
            self.base + self.height.min(0.0) * k,
            self.base + self.height.max(0.0) * k,
        )
    }
}

/// Smoothed checkerboard: i.i.d. uniform values on a lattice of spacing
/// `1/(2√d)`, blended by a C¹ tensor-product partition of unity whose
/// supports have diameter one.
#[derive(Clone, Debug)]
pub struct Checkerboard {
    pub dim: usize,
    pub seed: u64,
    pub base: f64,
    pub amplitude: f64,
    pub splice: Option<Splice>,
    spacing: f64,
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

fn blend_weight(s: f64) -> f64 {
    let t = s.abs();
    if t >= 1.0 {
        0.0
    } else {
        1.0 - smoothstep(t)
    }
}

impl Checkerboard {
    pub fn new(dim: usize, seed: u64, base: f64, amplitude: f64, splice: Option<Splice>) -> Self {
        Self {
            dim,
            seed,
            base,
            amplitude,
            splice,
            spacing: 0.5 / (dim as f64).sqrt(),
        }
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    fn node_value(&self, k: [i64; 3]) -> f64 {
        let seed = match &self.splice {
            None => self.seed,
            Some(sp) => {
                let mut lo = ZERO;
                let mut hi = ZERO;
                for i in 0..self.dim {
                    lo[i] = (k[i] as f64 - 1.0) * self.spacing;
                    hi[i] = (k[i] as f64 + 1.0) * self.spacing;
                }
                if sp.region.intersects(&lo, &hi) {
                    self.seed
                } else {
                    sp.outer_seed
                }
            }
        };
        2.0 * unit_from_key(cell_key(seed, k)) - 1.0
    }

    pub fn eval(&self, x: &Vector) -> f64 {
        let mut base_k = [0i64; 3];
        let mut frac = [0.0; 3];
        for i in 0..self.dim {
            let s = x[i] / self.spacing;
            base_k[i] = s.floor() as i64;
            frac[i] = s - s.floor();
        }
        let mut acc = 0.0;
        let corners = 1usize << self.dim;
        for mask in 0..corners {
            let mut k = [0i64; 3];
            let mut w = 1.0;
            for i in 0..self.dim {
                let bit = (mask >> i) & 1;
                k[i] = base_k[i] + bit as i64;
                w *= blend_weight(frac[i] - bit as f64);
            }
            if w != 0.0 {
                acc += w * self.node_value(k);
            }
        }
        self.base + self.amplitude * acc
    }

    pub fn nominal_bounds(&self) -> (f64, f64) {
        (self.base - self.amplitude.abs(), self.base + self.amplitude.abs())
    }
}
