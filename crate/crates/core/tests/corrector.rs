use homog_core::corrector::{corrector_torus, solve_corrector};
use homog_core::fields::{CoefficientField, DiffusionSpec, FieldSpec, ForcingSpec};
use homog_core::numerics::SolverConfig;
use homog_core::vector;
use proptest::prelude::*;

fn cfg() -> SolverConfig {
    SolverConfig {
        tol: 1e-10,
        ..Default::default()
    }
}

fn poisson(seed: u64, base: f64) -> CoefficientField {
    CoefficientField::new(FieldSpec {
        dim: 2,
        exponent: 1.0,
        forcing: ForcingSpec::PoissonBump {
            seed,
            intensity: 1.0,
            bump_height: 1.0,
            base,
            resample_outside: None,
        },
        diffusion: DiffusionSpec::None,
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn larger_forcing_raises_dvd0(seed in 0u64..1000, bump in 0.05..0.5f64, xi in (-2.0..2.0f64, -2.0..2.0f64)) {
        let xi = [xi.0, xi.1, 0.0];
        prop_assume!(vector::norm(&xi) > 0.1);
        let delta = 0.5;
        let lo = poisson(seed, 0.5);
        let hi = poisson(seed, 0.5 + bump);
        let torus = corrector_torus(&lo, delta, 0.25, &cfg()).unwrap();
        let a = solve_corrector(&lo, &xi, delta, torus.clone(), &cfg()).unwrap();
        let b = solve_corrector(&hi, &xi, delta, torus, &cfg()).unwrap();
        prop_assert!(b.dvd0 > a.dvd0, "{} vs {}", b.dvd0, a.dvd0);
    }
}

#[test]
fn constant_field_dvd0_is_homogeneous() {
    for p in [1.0, 1.5, 2.0] {
        let f = CoefficientField::constant(2, 1.3).unwrap().with_exponent(p).unwrap();
        let delta = 0.5;
        let torus = corrector_torus(&f, delta, 0.5, &cfg()).unwrap();
        let xi = [0.4, -0.3, 0.0];
        let base = solve_corrector(&f, &xi, delta, torus.clone(), &cfg()).unwrap().dvd0;
        for t in [0.5, 2.0, 3.0] {
            let v = solve_corrector(&f, &vector::scale(&xi, t), delta, torus.clone(), &cfg()).unwrap().dvd0;
            let expect = t.powf(p) * base;
            assert!((v - expect).abs() <= 1e-9 * expect.abs().max(1.0), "p={p} t={t}: {v} vs {expect}");
        }
    }
}
