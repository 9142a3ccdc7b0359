//! Properties of the randomized and sampled estimators.

use maxreg_core::rbound::{
    feedback_sup, log_spaced, rbound_estimate, sector_sup, Contour, HalfPlaneSamples, OperatorFamily,
};
use maxreg_core::{assemble_extended, generator_matrix, make_grid, BoundaryCondition, LinearMap};
use proptest::prelude::*;

fn shifted_free(n: usize) -> LinearMap {
    generator_matrix(&assemble_extended(make_grid(n).unwrap()), BoundaryCondition::Free)
        .unwrap()
        .shifted(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn rbound_scales_linearly(c in 0.1f64..10.0, seed in any::<u64>()) {
        let fam = OperatorFamily::resolvent(&shifted_free(16), Contour::Vertical { omega: 0.0 }, &log_spaced(0.1, 100.0, 6), 1.0).unwrap();
        let base = rbound_estimate(&fam, 3, 100, seed).unwrap();
        let scaled = rbound_estimate(&fam.scaled(c), 3, 100, seed).unwrap();
        prop_assert!((scaled.max_ratio - c * base.max_ratio).abs() <= 1e-9 * c * base.max_ratio);
        prop_assert!(base.estimate >= base.member_norm_max);
    }

    #[test]
    fn singleton_family_returns_member_norm(s in 0.1f64..100.0, seed in any::<u64>()) {
        let fam = OperatorFamily::resolvent(&shifted_free(16), Contour::Vertical { omega: 0.0 }, &[s], 1.0).unwrap();
        let r = rbound_estimate(&fam, 1, 100, seed).unwrap();
        prop_assert!((r.estimate - fam.members()[0].norm()).abs() <= 1e-6 * r.estimate);
    }

    #[test]
    fn sector_sup_monotone_in_samples(extra_r in 0.01f64..1e4, extra_theta in -1.5f64..1.5) {
        let a = shifted_free(16);
        let base = HalfPlaneSamples::log_radial(0.1, 100.0, 5, 5, 1e-3);
        let more = base.union(&HalfPlaneSamples::from_points(vec![num_complex::Complex64::from_polar(extra_r, extra_theta)]));
        let r0 = sector_sup(&a, 0.0, &base).unwrap();
        let r1 = sector_sup(&a, 0.0, &more).unwrap();
        prop_assert!(r1.sup >= r0.sup);
    }
}

#[test]
fn feedback_tends_to_one() {
    let sys = assemble_extended(make_grid(128).unwrap());
    let far = HalfPlaneSamples::from_points(log_spaced(1e2, 1e6, 5).into_iter().map(|x| num_complex::Complex64::new(x, 0.0)).collect());
    let r = feedback_sup(&sys, 0.0, &far).unwrap();
    assert!(r.values.windows(2).all(|w| w[1] <= w[0]));
    assert!((r.values[4] - 1.0).abs() < 1e-2, "{}", r.values[4]);
}

#[test]
fn estimates_repeat_for_same_seed() {
    let sys = assemble_extended(make_grid(32).unwrap());
    let fam = OperatorFamily::dirichlet(&sys, Contour::Vertical { omega: 1.0 }, &log_spaced(0.1, 1e3, 10), 0.5).unwrap();
    let a = rbound_estimate(&fam, 4, 100, 9).unwrap();
    let b = rbound_estimate(&fam, 4, 100, 9).unwrap();
    assert_eq!(a, b);
}
