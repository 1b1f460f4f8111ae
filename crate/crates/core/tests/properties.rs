//! Property tests for the invariants the library promises unconditionally:
//! positivity, gauge/scale behavior, round trips, and moment invariances.

use num_complex::Complex64;
use proptest::prelude::*;

use fringe_core::analysis::local_moments;
use fringe_core::born::{decompose, deformed_probability, recompose};
use fringe_core::field::{ProbabilityField, WaveField};
use fringe_core::params::DeformationParams;

fn smooth_field(coeffs: &[(f64, f64, f64)], tilt: f64, n: usize, dx: f64) -> WaveField {
    // A nodeless smooth test field: positive envelope times a phase whose
    // derivative stays bounded, so no accidental zeros spoil the unwrap.
    WaveField::from_fn(n, -0.5 * (n - 1) as f64 * dx, dx, |x| {
        let mut amp = 2.0;
        let mut phase = tilt * x;
        for &(a, k, p) in coeffs {
            amp += a * (k * x + p).cos();
            phase += 0.3 * a * (k * x - p).sin();
        }
        Complex64::from_polar(amp, phase)
    })
    .unwrap()
}

fn coeff_strategy() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec(
        (0.05f64..0.4, 0.3f64..3.0, -3.0f64..3.0),
        1..4,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn deformed_probability_stays_positive(
        coeffs in coeff_strategy(),
        tilt in -1.0f64..1.0,
        theta in -0.3f64..0.3,
    ) {
        let field = smooth_field(&coeffs, tilt, 257, 0.05);
        let params = DeformationParams::new(1.0, theta).unwrap();
        let p = deformed_probability(&field, &params, 128).unwrap();
        prop_assert!(p.values().iter().all(|&v| v >= 0.0 && v.is_finite()));
    }

    #[test]
    fn decompose_recompose_round_trip(
        coeffs in coeff_strategy(),
        tilt in -1.0f64..1.0,
        theta in -0.3f64..0.3,
    ) {
        let field = smooth_field(&coeffs, tilt, 257, 0.05);
        let params = DeformationParams::new(1.0, theta).unwrap();
        let pa = decompose(&field, &params, 128).unwrap();
        let back = recompose(&pa, &params).unwrap();
        let scale = field.max_abs();
        for (a, b) in back.samples().iter().zip(field.samples()) {
            prop_assert!((a - b).norm() <= 1e-11 * scale);
        }
    }

    #[test]
    fn global_phase_leaves_probability_unchanged(
        coeffs in coeff_strategy(),
        theta in -0.3f64..0.3,
        alpha in -3.0f64..3.0,
    ) {
        // e^{iα}ψ moves the anchor phase by α, so P picks up the exact
        // factor e^{−2θα}; dividing it out must land on the original P.
        let field = smooth_field(&coeffs, 0.4, 257, 0.05);
        let rotated = WaveField::new(
            field.samples().iter().map(|s| s * Complex64::from_polar(1.0, alpha)).collect(),
            field.x0(),
            field.dx(),
        )
        .unwrap();
        let params = DeformationParams::new(1.0, theta).unwrap();
        let p = deformed_probability(&field, &params, 128).unwrap();
        let p_rot = deformed_probability(&rotated, &params, 128).unwrap();
        let gauge = (-2.0 * theta * alpha).exp();
        for (a, b) in p.values().iter().zip(p_rot.values()) {
            prop_assert!((b / gauge - a).abs() <= 1e-10 * a.abs().max(1.0));
        }
    }

    #[test]
    fn moments_invariant_under_scale_and_shift(
        coeffs in coeff_strategy(),
        theta in -0.2f64..0.2,
        scale in 0.01f64..100.0,
        shift in -5.0f64..5.0,
    ) {
        let field = smooth_field(&coeffs, 0.7, 513, 0.04);
        let params = DeformationParams::new(1.0, theta).unwrap();
        let p = deformed_probability(&field, &params, 256).unwrap();
        let center = 0.0;
        let window = (-2.0, 2.0);
        let (_, _, s0) = local_moments(&p, center, window).unwrap();
        let (_, _, s1) = local_moments(&p.scaled(scale), center, window).unwrap();
        prop_assert!((s1 - s0).abs() <= 1e-9 * s0.abs().max(1.0));
        let (_, _, s2) = local_moments(
            &p.translated(shift),
            center + shift,
            (window.0 + shift, window.1 + shift),
        )
        .unwrap();
        prop_assert!((s2 - s0).abs() <= 1e-9 * s0.abs().max(1.0));
    }

    #[test]
    fn undeformed_limit_is_born_rule(
        coeffs in coeff_strategy(),
        tilt in -1.0f64..1.0,
    ) {
        let field = smooth_field(&coeffs, tilt, 257, 0.05);
        let params = DeformationParams::undeformed(1.0);
        let p = deformed_probability(&field, &params, 40).unwrap();
        for (v, s) in p.values().iter().zip(field.samples()) {
            prop_assert_eq!(*v, s.norm_sqr());
        }
    }

    #[test]
    fn counts_are_conserved_by_event_sampling(
        coeffs in coeff_strategy(),
        seed in 0u64..1_000_000,
    ) {
        let field = smooth_field(&coeffs, 0.5, 257, 0.05);
        let p = ProbabilityField::unmasked(field.abs_squared(), field.x0(), field.dx()).unwrap();
        let events = 200_000u64;
        let counts = fringe_core::noise::sample_shots(&p, events, seed).unwrap();
        prop_assert_eq!(counts.iter().sum::<u64>(), events);
    }
}
