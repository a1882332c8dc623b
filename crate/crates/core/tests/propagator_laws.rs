use expsplit::norms::lp_norm;
use expsplit::propagators::{HeatSpec, HeatTorus, Propagator, WaveDirichlet, WaveSpec};
use expsplit::{StateVector, WChoice};
use proptest::prelude::*;

fn heat() -> HeatTorus {
    HeatTorus::new(HeatSpec::lebesgue(1, 64, 2.0, 2.0, WChoice::V, 1.0)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn heat_is_an_l2_contraction(v in proptest::collection::vec(-1.0f64..1.0, 64), t in 0.0f64..1.0) {
        let h = heat();
        let out = h.apply(t, &v).unwrap();
        let cell = h.geometry().cell_volume();
        prop_assert!(lp_norm(&out, 2.0, cell) <= lp_norm(&v, 2.0, cell) * (1.0 + 1e-12));
    }

    #[test]
    fn heat_preserves_mean_and_order(v in proptest::collection::vec(-1.0f64..1.0, 64), t in 0.01f64..1.0) {
        let h = heat();
        let out = h.apply(t, &v).unwrap();
        let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
        prop_assert!((mean(&out) - mean(&v)).abs() < 1e-13);
        let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(*x), b.max(*x)));
        prop_assert!(out.iter().all(|x| *x >= lo - 1e-12 && *x <= hi + 1e-12));
    }

    #[test]
    fn heat_is_linear(
        a in proptest::collection::vec(-1.0f64..1.0, 64),
        b in proptest::collection::vec(-1.0f64..1.0, 64),
        c in -2.0f64..2.0,
        t in 0.0f64..1.0,
    ) {
        let h = heat();
        let (a, b) = (StateVector::new(a), StateVector::new(b));
        let mut combo = a.clone();
        combo.axpy(c, &b);
        let lhs = h.apply(t, &combo).unwrap();
        let mut rhs = h.apply(t, &a).unwrap();
        rhs.axpy(c, &h.apply(t, &b).unwrap());
        prop_assert!(lhs.sub(&rhs).max_abs() < 1e-12);
    }

    #[test]
    fn wave_conserves_energy(v in proptest::collection::vec(-1.0f64..1.0, 64), t in 0.0f64..20.0) {
        let w = WaveDirichlet::new(WaveSpec { n: 32, horizon: 20.0 }).unwrap();
        let norms = w.norms();
        let out = w.apply(t, &v).unwrap();
        let (e0, e1) = (norms.v_norm(&StateVector::new(v)), norms.v_norm(&out));
        prop_assert!((e0 - e1).abs() < 1e-11 * e0.max(1.0));
    }
}
