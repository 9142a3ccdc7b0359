//! Dense oracles for the p = 2 maximal-regularity norm.

use maxreg_core::maxreg::{maxreg_norm_estimate, EstimateMethod};
use maxreg_core::operators::state_weights;
use maxreg_core::{assemble_extended, generator_matrix, make_grid, BoundaryCondition, TimeGrid};
use nalgebra::DMatrix;

/// `(e^{dt M}, dt phi_1(dt M))` from the exponential of `[[dt M, dt I], [0, 0]]`.
fn exp_pair(m: &DMatrix<f64>, dt: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let k = m.nrows();
    let mut aug = DMatrix::<f64>::zeros(2 * k, 2 * k);
    aug.view_mut((0, 0), (k, k)).copy_from(&(m * dt));
    aug.view_mut((0, k), (k, k)).copy_from(&(DMatrix::<f64>::identity(k, k) * dt));
    let big = aug.exp();
    (big.view((0, 0), (k, k)).into_owned(), big.view((0, k), (k, k)).into_owned())
}

/// Largest singular value of the full block matrix of `f -> (M z_k)_k` in
/// the weighted `l^2` norm.
fn dense_norm(m: &DMatrix<f64>, w: &[f64], tg: TimeGrid) -> f64 {
    let k = m.nrows();
    let steps = tg.steps();
    let (e, phi) = exp_pair(m, tg.dt());
    let b = phi * 0.5;
    let tw = tg.trapezoid_weights();
    let dim = k * (steps + 1);
    let mut t = DMatrix::<f64>::zeros(dim, dim);
    // z_r = sum_{i<r} E^{r-1-i} B (f_i + f_{i+1})
    for r in 1..=steps {
        let mut pow = DMatrix::<f64>::identity(k, k);
        for i in (0..r).rev() {
            let blk = m * &pow * &b;
            for col in [i, i + 1] {
                let mut v = t.view_mut((r * k, col * k), (k, k));
                v += &blk;
            }
            pow = &pow * &e;
        }
    }
    let scale: Vec<f64> = (0..dim).map(|i| (tw[i / k] * w[i % k]).sqrt()).collect();
    let weighted = DMatrix::from_fn(dim, dim, |i, j| scale[i] * t[(i, j)] / scale[j]);
    weighted.singular_values().max()
}

#[test]
fn exact_estimate_matches_dense_svd() {
    for bc in [BoundaryCondition::Free, BoundaryCondition::ClosedLoop] {
        let g = make_grid(8).unwrap();
        let tg = TimeGrid::new(1.0, 8).unwrap();
        let a = generator_matrix(&assemble_extended(g), bc).unwrap().shifted(1.0);
        let est = maxreg_norm_estimate(&a, tg, 2.0, EstimateMethod::ExactP2).unwrap();
        let oracle = dense_norm(a.matrix(), &state_weights(g), tg);
        assert!(est.converged);
        assert!((est.value - oracle).abs() < 1e-6 * oracle, "{bc:?}: {} vs {oracle}", est.value);
    }
}

#[test]
fn random_search_is_a_lower_bound() {
    let g = make_grid(8).unwrap();
    let tg = TimeGrid::new(1.0, 8).unwrap();
    let a = generator_matrix(&assemble_extended(g), BoundaryCondition::ClosedLoop).unwrap().shifted(1.0);
    let oracle = dense_norm(a.matrix(), &state_weights(g), tg);
    let est = maxreg_norm_estimate(&a, tg, 2.0, EstimateMethod::RandomSearch { trials: 200, seed: 5 }).unwrap();
    assert!(est.lower_bound);
    assert!(est.value <= oracle * (1.0 + 1e-9) && est.value > 0.1 * oracle);
}

#[test]
fn free_norm_stays_below_multiplier_bound() {
    let g = make_grid(32).unwrap();
    let tg = TimeGrid::new(1.0, 64).unwrap();
    let a = generator_matrix(&assemble_extended(g), BoundaryCondition::Free).unwrap().shifted(1.0);
    let est = maxreg_norm_estimate(&a, tg, 2.0, EstimateMethod::ExactP2).unwrap();
    assert!(est.value <= 1.05, "{}", est.value);
}
