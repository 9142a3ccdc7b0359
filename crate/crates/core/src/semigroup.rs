//! Matrix exponentials, the exponential integrator for mild solutions,
//! Yosida approximants and the residual checks built on them.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{LabError, Result};
use crate::grid::{weighted_lp, GridFunction, TimeGrid, TimeSignal};
use crate::linalg;
use crate::operators::{
    self, cmat_vec, generator_matrix, mat_vec, perturbed_generator, state_weights,
    BoundaryCondition, ExtendedSystem, LinearMap,
};

/// Largest accepted `t ||M||_1` for the exponential.
pub const EXPM_LIMIT: f64 = 1e4;

/// Relative tolerance on the spectral abscissa before a generator counts as unstable.
pub const STABILITY_TOLERANCE: f64 = 1e-9;

const TAYLOR_DEGREE: usize = 16;

/// `(e^{tM}, phi_1(tM))` with `phi_1(X) = sum_k X^k / (k+1)!`.
///
/// Scales `tM` to 1-norm at most 1/2, sums the `phi_1` series there, and
/// undoes the scaling with `phi_1(2Y) = phi_1(Y) (e^Y + I) / 2`,
/// `e^{2Y} = (e^Y)^2`. This stays valid for singular `M`.
pub fn expm_phi1_matrix(m: &DMatrix<f64>, t: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(LabError::InvalidArgument(format!("need t >= 0, got {t}")));
    }
    let k = m.nrows();
    let id = DMatrix::<f64>::identity(k, k);
    let x = m * t;
    let norm = linalg::matrix_norm1(&x);
    if !norm.is_finite() || norm > EXPM_LIMIT {
        return Err(LabError::ExpmOverflow {
            scaled_norm: norm,
            limit: EXPM_LIMIT,
        });
    }
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let y = x * 0.5f64.powi(squarings);

    let mut fact = 1.0;
    let mut inv_fact = [1.0; TAYLOR_DEGREE + 2];
    for (j, slot) in inv_fact.iter_mut().enumerate().skip(1) {
        fact *= j as f64;
        *slot = 1.0 / fact;
    }
    // phi_1(Y) = sum_{j=0}^{q} Y^j / (j+1)!
    let mut phi = &id * inv_fact[TAYLOR_DEGREE + 1];
    for j in (0..TAYLOR_DEGREE).rev() {
        phi = &y * &phi + &id * inv_fact[j + 1];
    }
    let mut e = &id + &y * &phi;
    for _ in 0..squarings {
        phi = &phi * (&e + &id) * 0.5;
        e = &e * &e;
    }
    Ok((e, phi))
}

/// Semigroup operator `e^{tM}`.
pub fn expm(map: &LinearMap, t: f64) -> Result<LinearMap> {
    let (e, _) = expm_phi1_matrix(map.matrix(), t)?;
    map.with_matrix(e, t > 0.0)
}

/// `phi_1(tM)`.
pub fn phi1(map: &LinearMap, t: f64) -> Result<LinearMap> {
    let (_, p) = expm_phi1_matrix(map.matrix(), t)?;
    map.with_matrix(p, false)
}

/// `1 + max(0, abscissa)` over the given generators.
pub fn canonical_shift(maps: &[&LinearMap]) -> Result<f64> {
    let mut top = 0.0f64;
    for m in maps {
        top = top.max(operators::spectral_abscissa(m)?);
    }
    Ok(1.0 + top)
}

fn check_stable(map: &LinearMap) -> Result<f64> {
    let abscissa = operators::spectral_abscissa(map)?;
    let tol = STABILITY_TOLERANCE * linalg::matrix_norm1(map.matrix()).max(1.0);
    if abscissa > tol {
        return Err(LabError::UnstableGenerator { abscissa });
    }
    Ok(abscissa)
}

/// One-step exponential integrator for `z' = M z + f` with fixed step `dt`:
/// `z_{k+1} = e^{dt M} z_k + dt phi_1(dt M) (f_k + f_{k+1}) / 2`.
#[derive(Debug, Clone)]
pub struct Propagator {
    generator: LinearMap,
    shift: f64,
    dt: f64,
    step: DMatrix<f64>,
    input: DMatrix<f64>,
    abscissa: f64,
}

impl Propagator {
    /// Uses `map` as given; fails if its spectral abscissa is positive.
    pub fn new(map: &LinearMap, dt: f64) -> Result<Self> {
        Self::with_shift(map, 0.0, dt)
    }

    /// Shifts `map` by [`canonical_shift`] so the generator has negative type.
    pub fn shifted(map: &LinearMap, dt: f64) -> Result<Self> {
        let omega = canonical_shift(&[map])?;
        Self::with_shift(map, omega, dt)
    }

    /// Integrates with `map - omega I`.
    pub fn with_shift(map: &LinearMap, omega: f64, dt: f64) -> Result<Self> {
        let generator = if omega == 0.0 { map.clone() } else { map.shifted(omega) };
        let abscissa = check_stable(&generator)?;
        Self::unchecked(generator, omega, dt, abscissa)
    }

    pub(crate) fn unchecked(generator: LinearMap, shift: f64, dt: f64, abscissa: f64) -> Result<Self> {
        let (step, phi) = expm_phi1_matrix(generator.matrix(), dt)?;
        Ok(Self {
            generator,
            shift,
            dt,
            step,
            input: phi * dt,
            abscissa,
        })
    }

    pub fn generator(&self) -> &LinearMap {
        &self.generator
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Spectral abscissa of the (shifted) generator.
    pub fn abscissa(&self) -> f64 {
        self.abscissa
    }

    /// `e^{dt M}`.
    pub fn step_matrix(&self) -> &DMatrix<f64> {
        &self.step
    }

    /// `dt phi_1(dt M)`.
    pub fn input_matrix(&self) -> &DMatrix<f64> {
        &self.input
    }

    pub fn advance(&self, z: &[Complex64], f0: &[Complex64], f1: &[Complex64]) -> Vec<Complex64> {
        let avg: Vec<Complex64> = f0.iter().zip(f1).map(|(a, b)| (a + b) * 0.5).collect();
        let mut out = mat_vec(&self.step, z);
        for (o, v) in out.iter_mut().zip(mat_vec(&self.input, &avg)) {
            *o += v;
        }
        out
    }

    /// Coordinate trajectory `z_0 = x0, ..., z_m`.
    pub fn trajectory(&self, forcing: &[Vec<Complex64>], x0: &[Complex64]) -> Vec<Vec<Complex64>> {
        let mut out = Vec::with_capacity(forcing.len());
        out.push(x0.to_vec());
        for k in 1..forcing.len() {
            let next = self.advance(&out[k - 1], &forcing[k - 1], &forcing[k]);
            out.push(next);
        }
        out
    }
}

fn check_signal(map: &LinearMap, f: &TimeSignal, x0: &GridFunction) -> Result<()> {
    if f.grid() != map.grid() || x0.grid() != map.grid() {
        return Err(LabError::DimensionMismatch {
            expected: map.grid().cells(),
            got: f.grid().cells(),
        });
    }
    Ok(())
}

/// Assembles a signal from coordinate frames. Frame 0 is `x0`; later frames
/// lie in the domain of the generator.
pub(crate) fn frames_to_signal(
    map: &LinearMap,
    tg: TimeGrid,
    coords: &[Vec<Complex64>],
    x0: &GridFunction,
) -> Result<TimeSignal> {
    let mut frames = Vec::with_capacity(coords.len());
    frames.push(x0.clone());
    for z in &coords[1..] {
        frames.push(map.to_grid_function(z, true)?);
    }
    TimeSignal::new(tg, frames)
}

/// Mild solution through a prepared propagator.
pub fn mild_solution_with(prop: &Propagator, f: &TimeSignal, x0: &GridFunction) -> Result<TimeSignal> {
    let map = prop.generator();
    check_signal(map, f, x0)?;
    if (f.timegrid().dt() - prop.dt()).abs() > 1e-14 * prop.dt() {
        return Err(LabError::InvalidArgument(format!(
            "propagator step {} does not match signal step {}",
            prop.dt(),
            f.timegrid().dt()
        )));
    }
    let forcing: Vec<Vec<Complex64>> = f.frames().iter().map(|g| map.coords(g)).collect();
    let coords = prop.trajectory(&forcing, &map.coords(x0));
    frames_to_signal(map, f.timegrid(), &coords, x0)
}

/// `z(t) = e^{tM} x0 + int_0^t e^{(t-s)M} f(s) ds` on the time grid of `f`.
pub fn mild_solution(map: &LinearMap, f: &TimeSignal, x0: &GridFunction) -> Result<TimeSignal> {
    check_signal(map, f, x0)?;
    let prop = Propagator::new(map, f.timegrid().dt())?;
    mild_solution_with(&prop, f, x0)
}

/// `n^2 R(n, M) - n I`.
pub fn yosida_matrix(map: &LinearMap, n: f64) -> Result<LinearMap> {
    if !(n > 0.0 && n.is_finite()) {
        return Err(LabError::InvalidArgument(format!("need n > 0, got {n}")));
    }
    let k = map.dim();
    let a = DMatrix::<f64>::identity(k, k) * n - map.matrix();
    let (r, _) = linalg::inverse_checked(a, Complex64::new(n, 0.0))?;
    let y = r * (n * n) - DMatrix::<f64>::identity(k, k) * n;
    map.with_matrix(y, false)
}

/// `n M R(n, M)`, algebraically equal to [`yosida_matrix`].
pub fn yosida_matrix_product_form(map: &LinearMap, n: f64) -> Result<LinearMap> {
    let k = map.dim();
    let a = DMatrix::<f64>::identity(k, k) * n - map.matrix();
    let (r, _) = linalg::inverse_checked(a, Complex64::new(n, 0.0))?;
    map.with_matrix(map.matrix() * r * n, false)
}

/// Pieces of the closed-loop Yosida approximant expressed through free objects.
pub(crate) struct YosidaParts {
    /// `n^2 R(n, A) - n I`.
    pub free_part: DMatrix<f64>,
    /// `n^2 d_n (1 - K d_n)^{-1}` as a column.
    pub column: Vec<f64>,
    /// `K E R(n, A)` as a row.
    pub row: Vec<f64>,
}

pub(crate) fn yosida_parts(sys: &ExtendedSystem, n: f64) -> Result<YosidaParts> {
    let free = generator_matrix(sys, BoundaryCondition::Free)?;
    let k = free.dim();
    let a = DMatrix::<f64>::identity(k, k) * n - free.matrix();
    let (r, _) = linalg::inverse_checked(a, Complex64::new(n, 0.0))?;
    let (d, inv_gap) = operators::feedback_factor(sys, Complex64::new(n, 0.0))?;
    let pull = free.lift().expect("generator has a lift").pull_back(sys.k_row());
    let row: Vec<f64> = (0..k)
        .map(|j| (0..k).map(|i| pull[i] * r[(i, j)]).sum())
        .collect();
    let column = d.interior().iter().map(|v| (v * inv_gap).re * n * n).collect();
    let free_part = r * (n * n) - DMatrix::<f64>::identity(k, k) * n;
    Ok(YosidaParts {
        free_part,
        column,
        row,
    })
}

/// `|| A_cl,n - (n A R(n, A) + n^2 d_n (1 - K d_n)^{-1} K R(n, A)) ||` in the
/// weighted operator norm.
pub fn yosida_decomposition_residual(sys: &ExtendedSystem, n: f64) -> Result<f64> {
    let closed = generator_matrix(sys, BoundaryCondition::ClosedLoop)?;
    let lhs = yosida_matrix(&closed, n)?;
    let parts = yosida_parts(sys, n)?;
    let k = closed.dim();
    let mut rhs = parts.free_part;
    for i in 0..k {
        for j in 0..k {
            rhs[(i, j)] += parts.column[i] * parts.row[j];
        }
    }
    let w = state_weights(sys.grid());
    Ok(linalg::weighted_norm(&(lhs.matrix() - rhs), &w, &w))
}

/// Trapezoid Laplace transform `sum_k w_k e^{-lambda t_k} f(t_k)` in state coordinates.
pub(crate) fn laplace_coords(map: &LinearMap, f: &TimeSignal, lambda: Complex64) -> Vec<Complex64> {
    let tg = f.timegrid();
    let w = tg.trapezoid_weights();
    let mut acc = vec![Complex64::new(0.0, 0.0); map.dim()];
    for (k, frame) in f.frames().iter().enumerate() {
        let c = (-lambda * tg.time(k)).exp() * w[k];
        for (a, v) in acc.iter_mut().zip(map.coords(frame)) {
            *a += v * c;
        }
    }
    acc
}

/// Default Laplace points for [`vcf_residual`].
pub const VCF_SAMPLES: [Complex64; 4] = [
    Complex64::new(1.0, 0.0),
    Complex64::new(2.0, 3.0),
    Complex64::new(50.0, 0.0),
    Complex64::new(5.0, -20.0),
];

/// Laplace-side check of the feedback variation-of-constants formula:
/// `zhat = R(lambda, A_cl)(x0 + fhat)` against
/// `R(lambda, A)(x0 + fhat) + d_lambda K zhat`. Returns the largest residual
/// relative to `max(1, ||zhat||)`.
pub fn vcf_residual_at(
    sys: &ExtendedSystem,
    x0: &GridFunction,
    f: &TimeSignal,
    lambdas: &[Complex64],
) -> Result<f64> {
    let free = generator_matrix(sys, BoundaryCondition::Free)?;
    let closed = generator_matrix(sys, BoundaryCondition::ClosedLoop)?;
    check_signal(&free, f, x0)?;
    let w = state_weights(sys.grid());
    let cl_lift = closed.lift().expect("generator has a lift");
    let mut worst = 0.0f64;
    for &lambda in lambdas {
        let fhat = laplace_coords(&free, f, lambda);
        let rhs: Vec<Complex64> = free.coords(x0).iter().zip(&fhat).map(|(a, b)| a + b).collect();
        let direct = cmat_vec(&closed.resolvent_matrix(lambda)?, &rhs);
        let kz = sys.k_row().apply(&cl_lift.extend(&direct));
        let d = operators::dirichlet_map(sys, lambda)?;
        let formula: Vec<Complex64> = cmat_vec(&free.resolvent_matrix(lambda)?, &rhs)
            .iter()
            .zip(d.interior())
            .map(|(r, di)| r + di * kz)
            .collect();
        let diff: Vec<Complex64> = direct.iter().zip(&formula).map(|(a, b)| a - b).collect();
        let scale = weighted_lp(&direct, &w, 2.0).max(1.0);
        worst = worst.max(weighted_lp(&diff, &w, 2.0) / scale);
    }
    Ok(worst)
}

/// [`vcf_residual_at`] on [`VCF_SAMPLES`].
pub fn vcf_residual(sys: &ExtendedSystem, x0: &GridFunction, f: &TimeSignal) -> Result<f64> {
    vcf_residual_at(sys, x0, f, &VCF_SAMPLES)
}

/// Solves with the closed-loop generator plus `P` and, independently, with the
/// closed-loop generator forced by `P z + f`; returns the largest state-norm
/// gap over the time grid. Both generators are shifted by the canonical shift
/// of the perturbed one.
pub fn perturbed_mild_residual(sys: &ExtendedSystem, p: &LinearMap, f: &TimeSignal) -> Result<f64> {
    let grid = sys.grid();
    let perturbed = perturbed_generator(sys, BoundaryCondition::ClosedLoop, p)?;
    let closed = generator_matrix(sys, BoundaryCondition::ClosedLoop)?;
    let omega = canonical_shift(&[&perturbed, &closed])?;
    let dt = f.timegrid().dt();
    let zero = GridFunction::zeros(grid);

    let z = mild_solution_with(&Propagator::with_shift(&perturbed, omega, dt)?, f, &zero)?;
    let lift = closed.lift().expect("generator has a lift");
    let forcing = z
        .frames()
        .iter()
        .zip(f.frames())
        .map(|(zk, fk)| {
            let full = lift.extend(zk.interior());
            let pz = mat_vec(p.matrix(), &full);
            let vals: Vec<Complex64> = pz.iter().zip(fk.values()).map(|(a, b)| a + b).collect();
            GridFunction::new(grid, vals)
        })
        .collect::<Result<Vec<_>>>()?;
    let g = TimeSignal::new(f.timegrid(), forcing)?;
    let w = mild_solution_with(&Propagator::with_shift(&closed, omega, dt)?, &g, &zero)?;

    let weights = state_weights(grid);
    Ok(z
        .frames()
        .iter()
        .zip(w.frames())
        .map(|(a, b)| weighted_lp(a.sub(b).interior(), &weights, 2.0))
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::nu_star;
    use crate::grid::make_grid;
    use crate::operators::assemble_extended;
    use std::f64::consts::PI;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).amax() / b.amax().max(1e-300)
    }

    #[test]
    fn expm_matches_nalgebra() {
        let g = make_grid(32).unwrap();
        let s = assemble_extended(g);
        for bc in [BoundaryCondition::Free, BoundaryCondition::ClosedLoop] {
            let m = generator_matrix(&s, bc).unwrap();
            for t in [0.0, 1e-4, 0.01, 0.1] {
                let (e, _) = expm_phi1_matrix(m.matrix(), t).unwrap();
                let oracle = (m.matrix() * t).exp();
                assert!(rel_diff(&e, &oracle) < 1e-10, "{bc:?} t={t}");
            }
        }
    }

    #[test]
    fn phi1_matches_definition_on_invertible_matrix() {
        let m = DMatrix::from_row_slice(3, 3, &[-2.0, 1.0, 0.0, 0.5, -3.0, 1.0, 0.0, 2.0, -4.0]);
        for t in [1e-6, 0.3, 2.0, 10.0] {
            let (e, p) = expm_phi1_matrix(&m, t).unwrap();
            let x = &m * t;
            let oracle = x.clone().try_inverse().unwrap() * (e - DMatrix::identity(3, 3));
            assert!(rel_diff(&p, &oracle) < 1e-10, "t={t}");
        }
    }

    #[test]
    fn expm_rejects_huge_argument() {
        let g = make_grid(64).unwrap();
        let m = generator_matrix(&assemble_extended(g), BoundaryCondition::Free).unwrap();
        assert!(matches!(expm(&m, 10.0), Err(LabError::ExpmOverflow { .. })));
        assert!(expm(&m, -1.0).is_err());
    }

    #[test]
    fn eigenfunction_decay() {
        let g = make_grid(128).unwrap();
        let m = generator_matrix(&assemble_extended(g), BoundaryCondition::Free).unwrap();
        let f = GridFunction::from_real_fn(g, |s| (PI * s).cos());
        let out = expm(&m, 0.1).unwrap().apply(&f).unwrap();
        let expect = f.scale(c((-PI * PI * 0.1).exp()));
        assert!((0.37271 - (-PI * PI * 0.1f64).exp()).abs() < 1e-5);
        assert!(out.sub(&expect).max_abs() < 1e-3);
    }

    #[test]
    fn zero_map_gives_linear_growth() {
        let g = make_grid(8).unwrap();
        let tg = TimeGrid::new(1.0, 16).unwrap();
        let gf = GridFunction::from_real_fn(g, |s| 1.0 + s * s);
        let f = TimeSignal::from_fn(tg, g, |_, s| c(1.0 + s * s));
        let z = mild_solution(&LinearMap::zeros(g), &f, &GridFunction::zeros(g)).unwrap();
        for (k, frame) in z.frames().iter().enumerate() {
            assert!(frame.sub(&gf.scale(c(tg.time(k)))).max_abs() < 1e-14);
        }
    }

    #[test]
    fn manufactured_closed_loop_solution() {
        let nu = nu_star();
        let err = |n: usize, m: usize| {
            let g = make_grid(n).unwrap();
            let tg = TimeGrid::new(1.0, m).unwrap();
            let a = generator_matrix(&assemble_extended(g), BoundaryCondition::ClosedLoop).unwrap();
            let f = TimeSignal::from_real_fn(tg, g, |t, s| {
                ((-t).exp() + nu * nu * (1.0 - (-t).exp())) * (nu * s).cos()
            });
            let z = mild_solution(&a, &f, &GridFunction::zeros(g)).unwrap();
            let exact = TimeSignal::from_real_fn(tg, g, |t, s| (1.0 - (-t).exp()) * (nu * s).cos());
            z.sub(&exact).max_abs()
        };
        let (e1, e2) = (err(32, 64), err(64, 128));
        let order = (e1 / e2).log2();
        assert!(order > 1.9, "errors {e1} {e2} order {order}");
    }

    #[test]
    fn unstable_generator_rejected() {
        let g = make_grid(16).unwrap();
        let a = generator_matrix(&assemble_extended(g), BoundaryCondition::Free).unwrap();
        let tg = TimeGrid::new(1.0, 8).unwrap();
        let f = TimeSignal::zeros(tg, g);
        let err = mild_solution(&a.shifted(-0.5), &f, &GridFunction::zeros(g)).unwrap_err();
        assert!(matches!(err, LabError::UnstableGenerator { .. }));
        let p = Propagator::shifted(&a.shifted(-0.5), tg.dt()).unwrap();
        assert!((p.shift() - 1.5).abs() < 1e-8);
    }

    #[test]
    fn yosida_forms_agree() {
        let g = make_grid(32).unwrap();
        let a = generator_matrix(&assemble_extended(g), BoundaryCondition::ClosedLoop).unwrap();
        for n in [10.0, 100.0, 1e4] {
            let y1 = yosida_matrix(&a, n).unwrap();
            let y2 = yosida_matrix_product_form(&a, n).unwrap();
            assert!(rel_diff(y1.matrix(), y2.matrix()) < 1e-9, "n={n}");
        }
        let z = LinearMap::zeros(g);
        assert!(yosida_matrix(&z, 5.0).unwrap().matrix().amax() == 0.0);
    }

    #[test]
    fn yosida_decomposition_exact() {
        let s = assemble_extended(make_grid(64).unwrap());
        assert!(yosida_decomposition_residual(&s, 50.0).unwrap() < 1e-9);
        assert!(yosida_decomposition_residual(&s, 1e4).unwrap() < 1e-8);
        assert!(yosida_decomposition_residual(&s.without_feedback(), 50.0).unwrap() < 1e-12);
    }

    #[test]
    fn vcf_laplace_side() {
        let g = make_grid(64).unwrap();
        let s = assemble_extended(g);
        let tg = TimeGrid::new(1.0, 32).unwrap();
        let x0 = GridFunction::from_real_fn(g, |x| (3.0 * x).sin() + x);
        let f = TimeSignal::from_real_fn(tg, g, |t, x| (t * x).cos());
        assert!(vcf_residual(&s, &x0, &f).unwrap() < 1e-10);
        assert!(vcf_residual(&s.without_feedback(), &x0, &f).unwrap() < 1e-12);
        assert!(vcf_residual(&s, &x0, &TimeSignal::zeros(tg, g)).unwrap() < 1e-10);
    }

    #[test]
    fn perturbed_residuals() {
        let g = make_grid(32).unwrap();
        let s = assemble_extended(g);
        let tg = TimeGrid::new(1.0, 32).unwrap();
        let f = TimeSignal::from_real_fn(tg, g, |t, x| (1.0 + t) * (PI * x).cos());
        let zero = GridFunction::zeros(g);
        let p0 = crate::operators::perturbation_matrix(g, &zero, &zero).unwrap();
        assert!(perturbed_mild_residual(&s, &p0, &f).unwrap() < 1e-10);
    }
}
