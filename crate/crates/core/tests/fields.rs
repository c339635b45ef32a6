use homog_core::fields::{
    check_mcm_condition, Aabb, CoefficientField, DiffusionSpec, FieldSpec, ForcingSpec, TrigMode,
};
use homog_core::stats::mean;
use homog_core::vector::{self, Vector};
use proptest::prelude::*;

fn field_kinds() -> impl Strategy<Value = FieldSpec> {
    let p = prop_oneof![Just(1.0), 1.0..3.0f64];
    let forcing = prop_oneof![
        (0u64..1000).prop_map(|seed| ForcingSpec::PoissonBump {
            seed,
            intensity: 1.0,
            bump_height: 0.75,
            base: 0.5,
            resample_outside: None,
        }),
        (0u64..1000).prop_map(|seed| ForcingSpec::CheckerboardSmoothed {
            seed,
            base: 1.0,
            amplitude: 0.4,
            resample_outside: None,
        }),
        (0.0..0.9f64).prop_map(|amp| ForcingSpec::PeriodicTrig {
            base: 1.0,
            period: 1.0,
            modes: vec![TrigMode {
                amplitude: amp,
                wavevector: vec![1, 2],
                phase: 0.3,
            }],
        }),
    ];
    let diffusion = prop_oneof![
        Just(DiffusionSpec::None),
        Just(DiffusionSpec::CurvatureProjection { strength: 1.0 }),
        (0.0..2.0f64).prop_map(|c| DiffusionSpec::Isotropic { coefficient: c }),
    ];
    (p, forcing, diffusion).prop_map(|(exponent, forcing, diffusion)| FieldSpec {
        dim: 2,
        exponent,
        forcing,
        diffusion,
    })
}

fn point() -> impl Strategy<Value = Vector> {
    (-20.0..20.0f64, -20.0..20.0f64).prop_map(|(x, y)| [x, y, 0.0])
}

fn slope() -> impl Strategy<Value = Vector> {
    (-5.0..5.0f64, -5.0..5.0f64)
        .prop_filter("nonzero", |(x, y)| x.hypot(*y) > 1e-3)
        .prop_map(|(x, y)| [x, y, 0.0])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hamiltonian_is_positively_homogeneous(spec in field_kinds(), x in point(), xi in slope(), t in 0.01..50.0f64) {
        let f = CoefficientField::new(spec).unwrap();
        let lhs = f.eval_hamiltonian(&vector::scale(&xi, t), &x);
        let rhs = t.powf(f.exponent()) * f.eval_hamiltonian(&xi, &x);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
    }

    #[test]
    fn hamiltonian_within_structural_bounds(spec in field_kinds(), x in point(), xi in slope()) {
        let f = CoefficientField::new(spec).unwrap();
        let b = f.structural_bounds();
        let n = vector::norm(&xi).powf(b.p);
        let hv = f.eval_hamiltonian(&xi, &x);
        prop_assert!(hv >= b.c0 * n * (1.0 - 1e-12));
        prop_assert!(hv <= b.c_upper * n * (1.0 + 1e-12));
    }

    #[test]
    fn diffusion_is_half_sigma_sigma_transpose(spec in field_kinds(), x in point(), e in slope()) {
        let f = CoefficientField::new(spec).unwrap();
        let a = f.eval_diffusion(&e, &x);
        let s = f.eval_sigma(&e, &x);
        let sst = vector::mat_mul(&s, &vector::transpose(&s));
        for i in 0..2 {
            for j in 0..2 {
                prop_assert!((a[i][j] - a[j][i]).abs() < 1e-12);
                prop_assert!((a[i][j] - 0.5 * sst[i][j]).abs() < 1e-12);
            }
        }
        // 2x2 eigenvalues in closed form.
        let tr = a[0][0] + a[1][1];
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
        let c0 = f.structural_bounds().c_upper;
        prop_assert!(0.5 * tr - disc >= -1e-12);
        prop_assert!(0.5 * tr + disc <= 0.5 * c0 * c0 + 1e-12);
    }
}

#[test]
fn poisson_field_decorrelates_beyond_its_range() {
    let n = 10_000;
    let x = [0.25, 0.0, 0.0];
    let y = [1.75, 0.0, 0.0];
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for seed in 0..n as u64 {
        let f = CoefficientField::new(FieldSpec {
            dim: 1,
            exponent: 1.0,
            forcing: ForcingSpec::PoissonBump {
                seed,
                intensity: 1.0,
                bump_height: 1.0,
                base: 1.0,
                resample_outside: None,
            },
            diffusion: DiffusionSpec::None,
        })
        .unwrap();
        a.push(f.forcing(&x));
        b.push(f.forcing(&y));
    }
    let (ma, mb) = (mean(&a), mean(&b));
    let prod: Vec<f64> = a.iter().zip(&b).map(|(u, v)| (u - ma) * (v - mb)).collect();
    let cov = mean(&prod);
    let se = (prod.iter().map(|p| (p - cov).powi(2)).sum::<f64>() / (n as f64 - 1.0) / n as f64).sqrt();
    assert!(cov.abs() <= 3.0 * se, "cov {cov} se {se}");
    // Sanity: the same point is strongly correlated with itself.
    let var = a.iter().map(|u| (u - ma).powi(2)).sum::<f64>() / n as f64;
    assert!(var > 10.0 * se);
}

#[test]
fn mcm_condition_on_constant_field() {
    for a in [0.5, 1.0, 2.5] {
        let f = CoefficientField::constant(2, a)
            .unwrap()
            .with_diffusion(DiffusionSpec::CurvatureProjection { strength: 1.0 })
            .unwrap();
        let v = check_mcm_condition(&f, &Aabb::new(&[0.0, 0.0], &[2.0, 2.0]), 0.1).unwrap();
        assert!((v - a * a).abs() < 1e-12, "{v}");
    }
}

#[test]
fn descriptors_survive_json_round_trip() {
    let spec = FieldSpec {
        dim: 3,
        exponent: 1.75,
        forcing: ForcingSpec::CheckerboardSmoothed {
            seed: u64::MAX >> 1,
            base: 1.5,
            amplitude: 0.25,
            resample_outside: None,
        },
        diffusion: DiffusionSpec::Isotropic { coefficient: 0.1 },
    };
    let json = serde_json::to_string(&spec).unwrap();
    let back: FieldSpec = serde_json::from_str(&json).unwrap();
    assert_eq!(spec, back);
    let f1 = CoefficientField::new(spec).unwrap();
    let f2 = CoefficientField::new(back).unwrap();
    let x = [0.3, -7.1, 2.2];
    assert_eq!(f1.forcing(&x), f2.forcing(&x));
}
