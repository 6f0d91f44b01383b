//! Randomised invariants.

use besovlab::besov::{besov_norm, BesovParams};
use besovlab::fit::fit_rate;
use besovlab::grid::{assemble_laplacian, build_domain, Field, GridSpec};
use besovlab::partition::{build_partition, phi, DyadicPartition};
use besovlab::spectral::{decompose, SpectralDecomposition};
use proptest::prelude::*;
use std::sync::OnceLock;

fn fixture() -> &'static (SpectralDecomposition, DyadicPartition) {
    static F: OnceLock<(SpectralDecomposition, DyadicPartition)> = OnceLock::new();
    F.get_or_init(|| {
        let d = build_domain(GridSpec::unit_interval(47).unwrap()).unwrap();
        let dec = decompose(&assemble_laplacian(&d)).unwrap();
        let part = build_partition(&dec);
        (dec, part)
    })
}

fn field(values: Vec<f64>) -> Field {
    Field::new(fixture().0.domain().clone(), values).unwrap()
}

fn exponent() -> impl Strategy<Value = f64> {
    prop_oneof![Just(1.0), Just(2.0), Just(f64::INFINITY), 1.0f64..6.0]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partition_sums_to_one(x in 1e-3f64..1e6) {
        let j = x.log2().floor() as i32;
        let total: f64 = (j - 3..=j + 3).map(|k| phi(k, x)).sum();
        prop_assert!((total - 1.0).abs() < 1e-14);
        prop_assert!((j - 3..=j + 3).filter(|&k| phi(k, x) > 0.0).count() <= 2);
    }

    #[test]
    fn fit_recovers_power_laws(a in -3.0f64..3.0, c in 0.1f64..10.0, x0 in 1e-4f64..1.0) {
        let pts: Vec<_> = (0..8).map(|i| {
            let x = x0 * 2f64.powi(i);
            (x, c * x.powf(a))
        }).collect();
        let f = fit_rate(&pts).unwrap();
        prop_assert!((f.slope - a).abs() < 1e-10);
        prop_assert!((f.intercept - c.ln()).abs() < 1e-9);
    }

    #[test]
    fn semigroup_contracts_in_l2(v in prop::collection::vec(-1.0f64..1.0, 47), t in 0.0f64..0.1, alpha in 0.5f64..2.0) {
        let dec = &fixture().0;
        let f = field(v);
        let u = dec.semigroup_apply(t, alpha, &f).unwrap();
        prop_assert!(u.lp_norm(2.0).unwrap() <= f.lp_norm(2.0).unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn besov_norm_is_absolutely_homogeneous(
        v in prop::collection::vec(-1.0f64..1.0, 47),
        c in -5.0f64..5.0,
        s in -1.0f64..2.0,
        p in exponent(),
        q in exponent(),
    ) {
        let (dec, part) = fixture();
        let prm = BesovParams::homogeneous(s, p, q);
        let f = field(v.clone());
        let g = field(v.iter().map(|x| c * x).collect());
        let (nf, ng) = (besov_norm(dec, part, &f, &prm).unwrap(), besov_norm(dec, part, &g, &prm).unwrap());
        prop_assert!((ng - c.abs() * nf).abs() <= 1e-10 * (1.0 + nf));
    }

    #[test]
    fn besov_triangle_inequality(
        a in prop::collection::vec(-1.0f64..1.0, 47),
        b in prop::collection::vec(-1.0f64..1.0, 47),
        p in exponent(),
        q in exponent(),
    ) {
        let (dec, part) = fixture();
        let prm = BesovParams::homogeneous(0.5, p, q);
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let n = |v: Vec<f64>| besov_norm(dec, part, &field(v), &prm).unwrap();
        let (na, nb) = (n(a), n(b));
        prop_assert!(n(sum) <= (na + nb) * (1.0 + 1e-12));
    }

    #[test]
    fn coefficients_round_trip(v in prop::collection::vec(-1.0f64..1.0, 47)) {
        let dec = &fixture().0;
        let f = field(v);
        let back = dec.synthesize(&dec.coefficients(&f).unwrap());
        for (x, y) in back.values().iter().zip(f.values()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}
