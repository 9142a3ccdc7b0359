//! Grid-refinement checks against closed-form solutions.

use maxreg_core::analytic::{closed_loop_leading_eigenvalues, neumann_leading_eigenvalues, nu_star};
use maxreg_core::nonauto::{nonauto_solve, CoefficientProfile};
use maxreg_core::semigroup::mild_solution;
use maxreg_core::{
    assemble_extended, dirichlet_closed_form, dirichlet_map, generator_matrix, make_grid, spectrum,
    transfer_value, BoundaryCondition, GridFunction, TimeGrid, TimeSignal,
};
use num_complex::Complex64;

fn dirichlet_error(n: usize, lambda: Complex64) -> f64 {
    let g = make_grid(n).unwrap();
    let d = dirichlet_map(&assemble_extended(g), lambda).unwrap();
    g.nodes()
        .zip(d.profile().values())
        .map(|(s, v)| (v - dirichlet_closed_form(lambda, s).unwrap()).norm())
        .fold(0.0, f64::max)
}

#[test]
fn dirichlet_profile_second_order() {
    for lambda in [Complex64::new(1.0, 0.0), Complex64::new(2.0, 3.0), Complex64::new(50.0, 0.0)] {
        let ratio = dirichlet_error(64, lambda) / dirichlet_error(128, lambda);
        assert!((3.0..=5.0).contains(&ratio), "{lambda}: {ratio}");
    }
    let k = transfer_value(&assemble_extended(make_grid(128).unwrap()), Complex64::new(1.0, 0.0)).unwrap();
    assert!((k.re - 0.46212).abs() < 2e-3 && k.im.abs() < 1e-12, "{k}");
}

#[test]
fn leading_eigenvalues() {
    let sys = assemble_extended(make_grid(128).unwrap());
    for (bc, exact, tol) in [
        (BoundaryCondition::Free, neumann_leading_eigenvalues(), 5e-3),
        (BoundaryCondition::ClosedLoop, closed_loop_leading_eigenvalues(), 1e-2),
    ] {
        let ev = spectrum(&generator_matrix(&sys, bc).unwrap()).unwrap();
        assert!(ev[0].norm() < 1e-8, "{bc:?}: {}", ev[0]);
        for (got, want) in ev[1..3].iter().zip(&exact[1..]) {
            assert!(got.im.abs() < 1e-8);
            assert!(((got.re - want) / want).abs() < tol, "{bc:?}: {got} vs {want}");
        }
    }
}

fn manufactured_error(n: usize, m: usize) -> f64 {
    let nu = nu_star();
    let g = make_grid(n).unwrap();
    let tg = TimeGrid::new(1.0, m).unwrap();
    let phi = |t: f64| 1.0 + t + (2.0 * t).sin();
    let dphi = |t: f64| 1.0 + 2.0 * (2.0 * t).cos();
    let f = TimeSignal::from_real_fn(tg, g, |t, s| (dphi(t) + nu * nu * phi(t)) * (nu * s).cos());
    let x0 = GridFunction::from_real_fn(g, |s| (nu * s).cos());
    let a = generator_matrix(&assemble_extended(g), BoundaryCondition::ClosedLoop).unwrap();
    let z = mild_solution(&a, &f, &x0).unwrap();
    z.sub(&TimeSignal::from_real_fn(tg, g, |t, s| phi(t) * (nu * s).cos())).max_abs()
}

#[test]
fn closed_loop_manufactured_order() {
    let order = (manufactured_error(64, 128) / manufactured_error(128, 256)).log2();
    assert!(order >= 1.9, "{order}");
}

#[test]
fn time_rescaled_decay() {
    let nu = nu_star();
    let err = |n: usize, m: usize| {
        let g = make_grid(n).unwrap();
        let tg = TimeGrid::new(1.0, m).unwrap();
        let prof = CoefficientProfile::constant(2.0, 1.0).unwrap();
        let x0 = GridFunction::from_real_fn(g, |s| (nu * s).cos());
        let z = nonauto_solve(&assemble_extended(g), &prof, &TimeSignal::zeros(tg, g), &x0).unwrap();
        z.sub(&TimeSignal::from_real_fn(tg, g, |t, s| (-2.0 * nu * nu * t).exp() * (nu * s).cos())).max_abs()
    };
    let order = (err(32, 64) / err(64, 128)).log2();
    assert!(order >= 1.9, "{order}");
}
