//! Invariants over randomly drawn inputs.

mod common;

use std::sync::OnceLock;

use proptest::prelude::*;
use scalesim_core::quadrature::QuadratureOptions;
use scalesim_core::*;

use common::*;

struct Fixtures {
    cantor: DiffusionSpec64,
    family: Vec<(String, DiffusionSpec64)>,
    staircase: DiffusionSpec64,
    orey: DiffusionSpec64,
    skew: DiffusionSpec64,
}

fn fx() -> &'static Fixtures {
    static F: OnceLock<Fixtures> = OnceLock::new();
    F.get_or_init(|| Fixtures {
        cantor: cantor_spec(),
        family: cantor_family(),
        staircase: staircase_spec(),
        orey: orey_spec(f64::sin),
        skew: skew_spec(0.3),
    })
}

fn all_specs() -> Vec<&'static DiffusionSpec64> {
    let f = fx();
    let mut v = vec![&f.cantor, &f.staircase, &f.orey, &f.skew];
    v.extend(f.family.iter().map(|(_, s)| s));
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inverse_undoes_scale(x in -5.0f64..5.0) {
        for spec in all_specs() {
            let y = spec.scale().eval(x);
            let back = spec.inverse().eval(y).unwrap();
            prop_assert!((back - x).abs() <= 1e-9 * (1.0 + x.abs()), "{} at {x}: {back}", spec.scale().kind_name());
        }
    }

    #[test]
    fn scale_is_strictly_increasing(x in -5.0f64..5.0, d in 1e-6f64..2.0) {
        for spec in all_specs() {
            let s = spec.scale();
            prop_assert!(s.eval(x) < s.eval(x + d));
        }
    }

    #[test]
    fn decomposition_reconstructs_increments(a in -3.0f64..3.0, len in 1e-3f64..3.0) {
        for spec in all_specs() {
            let dec = lebesgue_decompose(spec.scale());
            let summary = dec.audit(&[(a, a + len)], 1e-8, 1e-12);
            prop_assert!(summary.is_ok(), "{:?}", summary);
        }
    }

    #[test]
    fn family_is_ordered_in_c(x in -3.0f64..3.0) {
        let f = fx();
        let vals: Vec<f64> = f.family.iter().map(|(_, s)| s.scale().eval(x).abs()).collect();
        for w in vals.windows(2) {
            prop_assert!(w[0] <= w[1] + 1e-12, "{vals:?}");
        }
    }

    #[test]
    fn coefficients_do_not_depend_on_c(x in -3.0f64..3.0) {
        let f = fx();
        let parent = &f.cantor;
        let sig0 = sigma(parent).unwrap();
        let b0 = drift_b(parent).unwrap();
        let b0 = b0.function().unwrap();
        let mu0 = smooth_measure_n(parent).unwrap();
        for (label, spec) in &f.family {
            let sig = sigma(spec).unwrap();
            let b = drift_b(spec).unwrap();
            let b = b.function().unwrap();
            let mu = smooth_measure_n(spec).unwrap();
            let tp = spec.scale().tprime_of_state(x);
            let tp0 = parent.scale().tprime_of_state(x);
            prop_assert!((sig.eval(x) - sig0.eval(x)).abs() <= 1e-8, "{label}: σ at {x}");
            prop_assert!((b.eval(x) - b0.eval(x)).abs() <= 1e-8 * (1.0 + b0.eval(x).abs()), "{label}: b at {x}");
            prop_assert!((tp - tp0).abs() <= 1e-8, "{label}: m̃ density at {x}");
            prop_assert!((mu.density(x) - mu0.density(x)).abs() <= 1e-8 * (1.0 + mu0.density(x).abs()), "{label}: μ_N at {x}");
        }
    }

    #[test]
    fn sigma_squared_times_speed_is_tprime(x in -4.0f64..4.0) {
        let f = fx();
        for spec in [&f.cantor, &f.orey, &f.staircase] {
            let sig = sigma(spec).unwrap();
            let lhs = sig.squared(x) * spec.speed().density_at(x);
            let rhs = spec.scale().tprime_of_state(x);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn drift_times_speed_is_smooth_measure(a in -3.0f64..2.5, len in 0.05f64..1.5) {
        let f = fx();
        for spec in [&f.cantor, &f.orey] {
            let b = drift_b(spec).unwrap();
            let b = b.function().unwrap();
            let mu = smooth_measure_n(spec).unwrap();
            let s = spec.scale();
            let (ua, ub) = (s.param(a), s.param(a + len));
            let opts = QuadratureOptions::default().with_abs_tol(1e-14).with_max_subintervals(20_000);
            let bm = spec.integrate_speed(ua, ub, |u, _| b.at_param(u), &opts).value;
            let exact = mu.exact_mass(a, a + len);
            prop_assert!((bm - exact).abs() <= 1e-6 * (1.0 + exact.abs()), "∫b dm = {bm}, μ_N = {exact}");
        }
    }
}

#[test]
fn anchor_is_a_zero_of_every_scale() {
    for spec in all_specs() {
        let s = spec.scale();
        assert_eq!(s.eval(s.anchor()), 0.0, "{}", s.kind_name());
    }
}
