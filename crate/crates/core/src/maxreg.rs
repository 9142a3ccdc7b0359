//! Maximal-regularity diagnostics: per-trajectory constants and estimates of
//! the norm of `f -> M z`, where `z` is the mild solution with zero initial
//! value, on `L^p([0, T], X)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{LabError, Result};
use crate::grid::{bochner_norm, check_exponent, time_derivative, time_lp, weighted_lp, GridFunction, TimeGrid, TimeSignal};
use crate::linalg::weighted_matrix;
use crate::operators::{
    assemble_extended, generator_matrix, perturbation_matrix, perturbed_generator, state_weights,
    BoundaryCondition, LinearMap,
};
use crate::semigroup::{canonical_shift, mild_solution, Propagator};

/// Norms of one trajectory of `z' = M z + f`, `z(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxRegReport {
    pub p: f64,
    pub horizon: f64,
    pub tag: String,
    pub dz_norm: f64,
    pub z_norm: f64,
    pub gen_z_norm: f64,
    pub f_norm: f64,
    /// `(||z'|| + ||z|| + ||M z||) / ||f||`.
    pub ratio: f64,
    /// `||z' - M z - f|| / ||f||` on interior nodes.
    pub residual: f64,
}

pub(crate) fn report_from_frames(
    tag: &str,
    p: f64,
    f: &TimeSignal,
    z: &TimeSignal,
    gen_z: &TimeSignal,
) -> Result<MaxRegReport> {
    let f_norm = bochner_norm(f, p)?;
    let dz = time_derivative(z);
    let dz_norm = bochner_norm(&dz, p)?;
    let z_norm = bochner_norm(z, p)?;
    let gen_z_norm = bochner_norm(gen_z, p)?;
    let w = state_weights(f.grid());
    let frame_res: Vec<f64> = (0..f.frames().len())
        .map(|k| {
            let r: Vec<Complex64> = dz.frame(k).interior().iter()
                .zip(gen_z.frame(k).interior())
                .zip(f.frame(k).interior())
                .map(|((a, b), c)| a - b - c)
                .collect();
            weighted_lp(&r, &w, p)
        })
        .collect();
    let residual = time_lp(&frame_res, &f.timegrid(), p) / f_norm;
    Ok(MaxRegReport {
        p,
        horizon: f.timegrid().horizon(),
        tag: tag.to_string(),
        dz_norm,
        z_norm,
        gen_z_norm,
        f_norm,
        ratio: (dz_norm + z_norm + gen_z_norm) / f_norm,
        residual,
    })
}

/// Solves with zero initial value and reports the four Bochner norms.
pub fn maxreg_report(map: &LinearMap, f: &TimeSignal, p: f64) -> Result<MaxRegReport> {
    maxreg_report_tagged(map, f, p, "generator")
}

pub fn maxreg_report_tagged(map: &LinearMap, f: &TimeSignal, p: f64, tag: &str) -> Result<MaxRegReport> {
    check_exponent(p)?;
    if bochner_norm(f, p)? == 0.0 {
        return Err(LabError::ZeroForcing);
    }
    let z = mild_solution(map, f, &GridFunction::zeros(map.grid()))?;
    let gen_z = TimeSignal::new(
        f.timegrid(),
        z.frames().iter().map(|g| map.apply(g)).collect::<Result<Vec<_>>>()?,
    )?;
    report_from_frames(tag, p, f, &z, &gen_z)
}

/// How an [`RNormEstimate`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateMethod {
    /// Largest singular value at `p = 2`, by power iteration on the normal
    /// operator, finished by Lanczos bidiagonalization when it stalls.
    ExactP2,
    /// Largest ratio over random band-limited forcings; a lower bound.
    RandomSearch { trials: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RNormEstimate {
    pub method: EstimateMethod,
    pub value: f64,
    /// Power iterations, or trials for random search.
    pub iterations: usize,
    pub converged: bool,
    /// True when `value` is only a lower bound.
    pub lower_bound: bool,
}

pub const POWER_TOLERANCE: f64 = 1e-8;
pub const POWER_MAX_ITERATIONS: usize = 500;
pub const MIN_RANDOM_TRIALS: usize = 200;

/// The discrete map `f -> (M z_k)_k` with
/// `z_{k+1} = E z_k + B (f_k + f_{k+1})`, `B = dt phi_1(dt M) / 2`, in
/// coordinates where both sides carry plain Euclidean norms.
struct Convolution {
    e: DMatrix<f64>,
    b: DMatrix<f64>,
    g: DMatrix<f64>,
    scale: Vec<f64>,
}

impl Convolution {
    fn new(prop: &Propagator, tg: TimeGrid, weighted: bool) -> Self {
        let m = prop.generator();
        let (e, b, g) = (prop.step_matrix().clone(), prop.input_matrix() * 0.5, m.matrix().clone());
        let k = m.dim();
        if weighted {
            let w = m.weights();
            let scale = tg.trapezoid_weights().iter().map(|x| x.sqrt()).collect();
            Self {
                e: weighted_matrix(&e, &w, &w),
                b: weighted_matrix(&b, &w, &w),
                g: weighted_matrix(&g, &w, &w),
                scale,
            }
        } else {
            let _ = k;
            Self { e, b, g, scale: vec![1.0; tg.steps() + 1] }
        }
    }

    fn forward(&self, u: &[DVector<f64>]) -> Vec<DVector<f64>> {
        let k = self.e.nrows();
        let f: Vec<DVector<f64>> = u.iter().zip(&self.scale).map(|(x, s)| x / *s).collect();
        let mut out = Vec::with_capacity(u.len());
        out.push(DVector::zeros(k));
        let mut z = DVector::<f64>::zeros(k);
        for j in 0..u.len() - 1 {
            z = &self.e * &z + &self.b * (&f[j] + &f[j + 1]);
            out.push(&self.g * &z * self.scale[j + 1]);
        }
        out
    }

    fn adjoint(&self, y: &[DVector<f64>]) -> Vec<DVector<f64>> {
        let k = self.e.nrows();
        let m = y.len() - 1;
        let gt = self.g.transpose();
        let et = self.e.transpose();
        let bt = self.b.transpose();
        // p_j = a_{j+1} + E^T p_{j+1}, p_{m-1} = a_m
        let mut q = vec![DVector::<f64>::zeros(k); m];
        let mut acc = DVector::<f64>::zeros(k);
        for j in (0..m).rev() {
            acc = &gt * &y[j + 1] * self.scale[j + 1] + &et * &acc;
            q[j] = &bt * &acc;
        }
        (0..=m)
            .map(|i| {
                let mut g = DVector::<f64>::zeros(k);
                if i < m {
                    g += &q[i];
                }
                if i > 0 {
                    g += &q[i - 1];
                }
                g / self.scale[i]
            })
            .collect()
    }
}

fn block_norm(v: &[DVector<f64>]) -> f64 {
    v.iter().map(|x| x.norm_squared()).sum::<f64>().sqrt()
}

pub const LANCZOS_MAX_STEPS: usize = 300;

fn flatten(v: &[DVector<f64>]) -> DVector<f64> {
    DVector::from_iterator(v.iter().map(|x| x.len()).sum(), v.iter().flat_map(|x| x.iter().copied()))
}

fn unflatten(x: &DVector<f64>, k: usize) -> Vec<DVector<f64>> {
    x.as_slice().chunks(k).map(DVector::from_column_slice).collect()
}

fn orthogonalize(x: &mut DVector<f64>, basis: &[DVector<f64>]) {
    for _ in 0..2 {
        for b in basis {
            let c = b.dot(x);
            x.axpy(-c, b, 1.0);
        }
    }
}

/// Golub-Kahan bidiagonalization with full reorthogonalization, started from
/// `start`. Returns the top singular value of the bidiagonal, the number of
/// steps and whether it settled to [`POWER_TOLERANCE`].
fn lanczos_top_singular(op: &Convolution, start: Vec<DVector<f64>>) -> (f64, usize, bool) {
    let k = start[0].len();
    let mut v = flatten(&start);
    v /= v.norm();
    let mut vs: Vec<DVector<f64>> = Vec::new();
    let mut us: Vec<DVector<f64>> = Vec::new();
    let (mut alpha, mut beta) = (Vec::new(), Vec::new());
    let mut sigma = 0.0f64;
    for step in 1..=LANCZOS_MAX_STEPS {
        let mut u = flatten(&op.forward(&unflatten(&v, k)));
        vs.push(v.clone());
        orthogonalize(&mut u, &us);
        let a = u.norm();
        alpha.push(a);
        if a == 0.0 {
            return (sigma, step, true);
        }
        u /= a;
        let mut w = flatten(&op.adjoint(&unflatten(&u, k)));
        us.push(u);
        orthogonalize(&mut w, &vs);
        let b = w.norm();
        let j = alpha.len();
        let bidiag = DMatrix::from_fn(j, j, |r, c| {
            if r == c {
                alpha[r]
            } else if c == r + 1 {
                beta[r]
            } else {
                0.0
            }
        });
        let new_sigma = bidiag.singular_values().max();
        if b <= 1e-14 * new_sigma || (step > 1 && (new_sigma - sigma).abs() <= POWER_TOLERANCE * new_sigma) {
            return (new_sigma, step, true);
        }
        sigma = new_sigma;
        beta.push(b);
        v = w / b;
    }
    (sigma, LANCZOS_MAX_STEPS, false)
}

fn band_limited_forcing(rng: &mut ChaCha8Rng, tg: TimeGrid, grid: crate::grid::Grid) -> Vec<DVector<f64>> {
    const SPACE_MODES: usize = 10;
    const TIME_MODES: usize = 6;
    let mut coef = [[0.0f64; TIME_MODES]; SPACE_MODES];
    for row in coef.iter_mut() {
        for c in row.iter_mut() {
            *c = StandardNormal.sample(rng);
        }
    }
    let pi = std::f64::consts::PI;
    let k = grid.interior_len();
    tg.times()
        .map(|t| {
            let tc: Vec<f64> = (0..TIME_MODES).map(|j| (j as f64 * pi * t / tg.horizon()).cos()).collect();
            DVector::from_iterator(
                k,
                (1..=k).map(|i| {
                    let s = grid.node(i);
                    (0..SPACE_MODES)
                        .map(|m| (m as f64 * pi * s).cos() * coef[m].iter().zip(&tc).map(|(a, b)| a * b).sum::<f64>())
                        .sum()
                }),
            )
        })
        .collect()
}

fn signal_norm(v: &[DVector<f64>], w: &[f64], tg: &TimeGrid, p: f64) -> f64 {
    let frames: Vec<f64> = v
        .iter()
        .map(|x| {
            let c: Vec<Complex64> = x.iter().map(|&r| Complex64::new(r, 0.0)).collect();
            weighted_lp(&c, w, p)
        })
        .collect();
    time_lp(&frames, tg, p)
}

/// Estimates the norm of `f -> M z` for a stable (already shifted) generator.
pub fn maxreg_norm_estimate(map: &LinearMap, tg: TimeGrid, p: f64, method: EstimateMethod) -> Result<RNormEstimate> {
    check_exponent(p)?;
    if map.lift().is_none() {
        return Err(LabError::InvalidArgument("generator must act on interior values".into()));
    }
    let prop = Propagator::new(map, tg.dt())?;
    let k = map.dim();
    match method {
        EstimateMethod::ExactP2 => {
            if p != 2.0 {
                return Err(LabError::InvalidArgument(format!("exact estimate needs p = 2, got {p}")));
            }
            let op = Convolution::new(&prop, tg, true);
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
            let mut v: Vec<DVector<f64>> = (0..=tg.steps())
                .map(|_| DVector::from_iterator(k, (0..k).map(|_| StandardNormal.sample(&mut rng))))
                .collect();
            let n0 = block_norm(&v);
            v.iter_mut().for_each(|x| *x /= n0);
            let mut sigma = 0.0;
            let mut converged = false;
            let mut iterations = 0;
            while iterations < POWER_MAX_ITERATIONS {
                iterations += 1;
                let y = op.forward(&v);
                let new_sigma = block_norm(&y);
                let w = op.adjoint(&y);
                let nw = block_norm(&w);
                if nw == 0.0 {
                    sigma = 0.0;
                    converged = true;
                    break;
                }
                v = w.into_iter().map(|x| x / nw).collect();
                if (new_sigma - sigma).abs() <= POWER_TOLERANCE * new_sigma {
                    sigma = new_sigma;
                    converged = true;
                    break;
                }
                sigma = new_sigma;
            }
            if !converged {
                let (ls, lit, lconv) = lanczos_top_singular(&op, v);
                return Ok(RNormEstimate {
                    method,
                    value: ls.max(sigma),
                    iterations: iterations + lit,
                    converged: lconv,
                    lower_bound: false,
                });
            }
            Ok(RNormEstimate { method, value: sigma, iterations, converged, lower_bound: false })
        }
        EstimateMethod::RandomSearch { trials, seed } => {
            if trials < MIN_RANDOM_TRIALS {
                return Err(LabError::InvalidArgument(format!(
                    "random search needs at least {MIN_RANDOM_TRIALS} trials, got {trials}"
                )));
            }
            let op = Convolution::new(&prop, tg, false);
            let w = map.weights();
            let mut best = 0.0f64;
            for trial in 0..trials {
                let mut rng = ChaCha8Rng::seed_from_u64(crate::rbound::trial_seed(seed, trial as u64));
                let f = band_limited_forcing(&mut rng, tg, map.grid());
                let fn_ = signal_norm(&f, &w, &tg, p);
                if fn_ == 0.0 {
                    continue;
                }
                best = best.max(signal_norm(&op.forward(&f), &w, &tg, p) / fn_);
            }
            Ok(RNormEstimate { method, value: best, iterations: trials, converged: true, lower_bound: true })
        }
    }
}

/// Generators covered by [`maxreg_stability_sweep`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GeneratorKind {
    Free,
    ClosedLoop,
    /// Closed loop plus `g -> b g' + c g` with constant coefficients.
    Perturbed { b: f64, c: f64 },
}

impl GeneratorKind {
    pub fn label(&self) -> &'static str {
        match self {
            GeneratorKind::Free => "free",
            GeneratorKind::ClosedLoop => "closed-loop",
            GeneratorKind::Perturbed { .. } => "perturbed",
        }
    }

    /// Unshifted generator on a grid with `n` cells.
    pub fn generator(&self, n: usize) -> Result<LinearMap> {
        let grid = crate::grid::make_grid(n)?;
        let sys = assemble_extended(grid);
        match *self {
            GeneratorKind::Free => generator_matrix(&sys, BoundaryCondition::Free),
            GeneratorKind::ClosedLoop => generator_matrix(&sys, BoundaryCondition::ClosedLoop),
            GeneratorKind::Perturbed { b, c } => {
                let p = perturbation_matrix(
                    grid,
                    &GridFunction::constant(grid, Complex64::new(b, 0.0)),
                    &GridFunction::constant(grid, Complex64::new(c, 0.0)),
                )?;
                perturbed_generator(&sys, BoundaryCondition::ClosedLoop, &p)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub shift: f64,
    pub estimate: RNormEstimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub kind: GeneratorKind,
    pub p: f64,
    pub rows: Vec<SweepRow>,
    /// Largest relative change between successive grids.
    pub max_relative_change: f64,
    /// Stability threshold on successive relative changes.
    pub threshold: f64,
    pub pass: bool,
}

pub const SWEEP_THRESHOLD: f64 = 0.10;

/// Estimates the shifted generator's norm on each grid and checks that
/// successive estimates differ by less than [`SWEEP_THRESHOLD`].
pub fn maxreg_stability_sweep(kind: GeneratorKind, grids: &[usize], tg: TimeGrid, p: f64, seed: u64) -> Result<SweepTable> {
    if grids.windows(2).any(|w| w[1] <= w[0]) || grids.is_empty() {
        return Err(LabError::InvalidArgument("grid sizes must be increasing".into()));
    }
    let mut rows = Vec::with_capacity(grids.len());
    for &n in grids {
        let gen = kind.generator(n)?;
        let shift = canonical_shift(&[&gen])?;
        let method = if p == 2.0 {
            EstimateMethod::ExactP2
        } else {
            EstimateMethod::RandomSearch { trials: MIN_RANDOM_TRIALS, seed }
        };
        let estimate = maxreg_norm_estimate(&gen.shifted(shift), tg, p, method)?;
        rows.push(SweepRow { n, shift, estimate });
    }
    let max_relative_change = rows
        .windows(2)
        .map(|w| (w[1].estimate.value - w[0].estimate.value).abs() / w[0].estimate.value.max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    let pass = max_relative_change < SWEEP_THRESHOLD && rows.iter().all(|r| r.estimate.converged);
    Ok(SweepTable { kind, p, rows, max_relative_change, threshold: SWEEP_THRESHOLD, pass })
}
