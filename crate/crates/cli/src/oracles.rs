//! Closed-form reference cases shipped with the tool.

use homog_core::fields::CoefficientField;

use crate::config::ExperimentConfig;
use crate::CliError;

pub struct Oracle {
    pub name: &'static str,
    pub description: &'static str,
    /// `(summary quantity, expected value)`.
    pub expected: &'static [(&'static str, f64)],
    pub config: &'static str,
}

const INV_SQRT3: f64 = 0.577_350_269_189_625_8;
const SQRT3: f64 = 1.732_050_807_568_877_2;

pub const ORACLES: &[Oracle] = &[
    Oracle {
        name: "periodic-1d-harmonic-mean",
        description: "a = 2 + sin(2πx), p = 1, no diffusion: slope <1/a> = 1/√3 and H̄(1) = √3 by both routes",
        expected: &[
            ("mbar_d0_mu1", INV_SQRT3),
            ("hbar_metric_d0_t1", SQRT3),
            ("hbar_corrector_d0_t1", SQRT3),
        ],
        config: include_str!("../configs/periodic-1d-harmonic-mean.toml"),
    },
    Oracle {
        name: "constant-planar-metric",
        description: "a = 2, p = 1, half-space target: m(x) = x·e/2; l_est carries a +2/d_max bias, so the box is long",
        expected: &[("l_est", 0.5), ("big_l_est", 0.5)],
        config: include_str!("../configs/constant-planar-metric.toml"),
    },
    Oracle {
        name: "constant-corrector",
        description: "a = 1.5, p = 2, ξ = (0.6, 0.8): −δv(0) = a|ξ|^p = 1.5",
        expected: &[("dvd0", 1.5)],
        config: include_str!("../configs/constant-corrector.toml"),
    },
    Oracle {
        name: "periodic-1d-homogenization",
        description: "a = 2 + sin(2πx), plane data: error against H̄ = √3|ξ| decreasing in ε, front speed √3",
        expected: &[("front_speed", SQRT3)],
        config: include_str!("../configs/periodic-1d-homogenization.toml"),
    },
];

pub fn find(name: &str) -> Option<&'static Oracle> {
    ORACLES.iter().find(|o| o.name == name)
}

impl Oracle {
    pub fn parsed(&self) -> ExperimentConfig {
        ExperimentConfig::from_toml(self.config).expect("shipped oracle config parses")
    }
}

/// `c` with `H̄(ξ) = c|ξ|^p` for a one-dimensional first-order periodic field:
/// `c = <a^{−1/p}>^{−p}` by the midpoint rule, which is spectrally accurate
/// for smooth periodic integrands.
pub fn exact_hbar_1d(field: &CoefficientField) -> Result<f64, CliError> {
    let period = field
        .period()
        .filter(|_| field.dim() == 1 && field.spec().is_first_order())
        .ok_or_else(|| CliError::Config("exact H̄ needs a one-dimensional first-order periodic field".into()))?;
    let n = 4096;
    let p = field.exponent();
    let mean = (0..n)
        .map(|k| field.forcing(&[(k as f64 + 0.5) * period / n as f64, 0.0, 0.0]).powf(-1.0 / p))
        .sum::<f64>()
        / n as f64;
    Ok(mean.powf(-p))
}
