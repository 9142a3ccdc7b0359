//! Non-autonomous problems `z' = a(t) A_cl z + f` with a scalar coefficient
//! profile, their maximal-regularity reports and the structural checks for
//! the family `a(t) A_cl`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{LabError, Result};
use crate::grid::{bochner_norm, check_exponent, GridFunction, TimeSignal};
use crate::linalg::{self, weighted_norm};
use crate::maxreg::{report_from_frames, MaxRegReport};
use crate::operators::{
    dirichlet_map, generator_matrix, spectral_abscissa, BoundaryCondition, ExtendedSystem, LinearMap,
};
use crate::semigroup::{frames_to_signal, Propagator, STABILITY_TOLERANCE};

/// Samples used to validate a profile and its modulus of continuity.
pub const PROFILE_SAMPLES: usize = 1024;

#[derive(Clone)]
enum Rule {
    Constant(f64),
    Affine { a0: f64, slope: f64 },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

/// Continuous coefficient `a(t) >= alpha > 0` on `[0, T]`.
#[derive(Clone)]
pub struct CoefficientProfile {
    rule: Rule,
    horizon: f64,
    alpha: f64,
    max_increment: f64,
}

impl fmt::Debug for CoefficientProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rule = match &self.rule {
            Rule::Constant(c) => format!("constant {c}"),
            Rule::Affine { a0, slope } => format!("{a0} + {slope} t"),
            Rule::Custom(_) => "custom".to_string(),
        };
        f.debug_struct("CoefficientProfile")
            .field("rule", &rule)
            .field("horizon", &self.horizon)
            .field("alpha", &self.alpha)
            .finish()
    }
}

impl CoefficientProfile {
    fn build(rule: Rule, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(LabError::InvalidArgument(format!("horizon must be positive, got {horizon}")));
        }
        let mut p = Self { rule, horizon, alpha: f64::INFINITY, max_increment: 0.0 };
        let vals: Vec<f64> = (0..=PROFILE_SAMPLES)
            .map(|i| p.eval(horizon * i as f64 / PROFILE_SAMPLES as f64))
            .collect();
        if let Some(i) = vals.iter().position(|v| !v.is_finite()) {
            return Err(LabError::NonFinite { index: i });
        }
        p.alpha = vals.iter().copied().fold(f64::INFINITY, f64::min);
        if p.alpha <= 0.0 {
            return Err(LabError::InvalidArgument(format!(
                "coefficient must stay positive, minimum sample {}",
                p.alpha
            )));
        }
        p.max_increment = vals.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
        Ok(p)
    }

    pub fn constant(c: f64, horizon: f64) -> Result<Self> {
        Self::build(Rule::Constant(c), horizon)
    }

    /// `a(t) = a0 + slope t`.
    pub fn affine(a0: f64, slope: f64, horizon: f64) -> Result<Self> {
        Self::build(Rule::Affine { a0, slope }, horizon)
    }

    pub fn from_fn(f: impl Fn(f64) -> f64 + Send + Sync + 'static, horizon: f64) -> Result<Self> {
        Self::build(Rule::Custom(Arc::new(f)), horizon)
    }

    pub fn eval(&self, t: f64) -> f64 {
        match &self.rule {
            Rule::Constant(c) => *c,
            Rule::Affine { a0, slope } => a0 + slope * t,
            Rule::Custom(f) => f(t),
        }
    }

    /// `int_0^t a`, exact for constant and affine rules, Simpson otherwise.
    pub fn integral(&self, t: f64) -> f64 {
        match &self.rule {
            Rule::Constant(c) => c * t,
            Rule::Affine { a0, slope } => a0 * t + 0.5 * slope * t * t,
            Rule::Custom(f) => {
                let n = 512;
                let h = t / n as f64;
                let inner: f64 = (1..n).map(|i| f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
                h / 3.0 * (f(0.0) + inner + f(t))
            }
        }
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Smallest sampled value.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Largest increment between neighbouring samples.
    pub fn max_increment(&self) -> f64 {
        self.max_increment
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.rule, Rule::Constant(_))
    }
}

fn closed_loop(sys: &ExtendedSystem) -> Result<LinearMap> {
    let m = generator_matrix(sys, BoundaryCondition::ClosedLoop)?;
    let abscissa = spectral_abscissa(&m)?;
    if abscissa > STABILITY_TOLERANCE * linalg::matrix_norm1(m.matrix()).max(1.0) {
        return Err(LabError::UnstableGenerator { abscissa });
    }
    Ok(m)
}

fn check_horizon(prof: &CoefficientProfile, f: &TimeSignal) -> Result<()> {
    let t = f.timegrid().horizon();
    if t > prof.horizon() * (1.0 + 1e-12) {
        return Err(LabError::InvalidArgument(format!(
            "signal horizon {t} exceeds profile horizon {}",
            prof.horizon()
        )));
    }
    Ok(())
}

/// Exponential midpoint rule for `z' = a(t) A_cl z + f`:
/// `z_{k+1} = e^{dt a_k M} z_k + dt phi_1(dt a_k M) (f_k + f_{k+1}) / 2`
/// with `a_k = a(t_k + dt/2)`.
pub fn nonauto_solve(sys: &ExtendedSystem, prof: &CoefficientProfile, f: &TimeSignal, x0: &GridFunction) -> Result<TimeSignal> {
    if f.grid() != sys.grid() || x0.grid() != sys.grid() {
        return Err(LabError::DimensionMismatch { expected: sys.grid().cells(), got: f.grid().cells() });
    }
    check_horizon(prof, f)?;
    let m = closed_loop(sys)?;
    let tg = f.timegrid();
    let dt = tg.dt();
    let forcing: Vec<Vec<Complex64>> = f.frames().iter().map(|g| m.coords(g)).collect();
    let mut coords = Vec::with_capacity(forcing.len());
    coords.push(m.coords(x0));
    let mut cached: Option<(f64, Propagator)> = None;
    for k in 0..tg.steps() {
        let a = prof.eval(tg.time(k) + 0.5 * dt);
        if cached.as_ref().is_none_or(|(c, _)| *c != a) {
            cached = Some((a, Propagator::unchecked(m.scaled(a), 0.0, dt, 0.0)?));
        }
        let prop = &cached.as_ref().expect("propagator cached").1;
        let next = prop.advance(&coords[k], &forcing[k], &forcing[k + 1]);
        coords.push(next);
    }
    frames_to_signal(&m, tg, &coords, x0)
}

/// Maximal-regularity report for zero initial value, with `a(t_k) A_cl z_k`
/// in place of the generator term.
pub fn nonauto_maxreg_report(sys: &ExtendedSystem, prof: &CoefficientProfile, f: &TimeSignal, p: f64) -> Result<MaxRegReport> {
    check_exponent(p)?;
    if bochner_norm(f, p)? == 0.0 {
        return Err(LabError::ZeroForcing);
    }
    let m = closed_loop(sys)?;
    let z = nonauto_solve(sys, prof, f, &GridFunction::zeros(sys.grid()))?;
    let tg = f.timegrid();
    let gen_z = TimeSignal::new(
        tg,
        z.frames()
            .iter()
            .enumerate()
            .map(|(k, g)| Ok(m.apply(g)?.scale(Complex64::new(prof.eval(tg.time(k)), 0.0))))
            .collect::<Result<Vec<_>>>()?,
    )?;
    report_from_frames("nonautonomous", p, f, &z, &gen_z)
}

/// Relative residual of `a A_cl - mu0 = (a A - mu0)(I - d K)` at `a = a(t)`,
/// with `d` the Dirichlet profile at `mu0 / a(t)`, so that
/// `(mu0 - a A_m) d = 0`.
pub fn nonauto_identity_residual(sys: &ExtendedSystem, prof: &CoefficientProfile, mu0: f64, t: f64) -> Result<f64> {
    if !(0.0..=prof.horizon()).contains(&t) {
        return Err(LabError::InvalidArgument(format!("t = {t} outside [0, {}]", prof.horizon())));
    }
    let a = prof.eval(t);
    let free = generator_matrix(sys, BoundaryCondition::Free)?;
    let closed = generator_matrix(sys, BoundaryCondition::ClosedLoop)?;
    let d = dirichlet_map(sys, Complex64::new(mu0 / a, 0.0))?;
    let k_cl = closed.lift().expect("closed loop has a lift").pull_back(sys.k_row());
    let dim = free.dim();
    let id = DMatrix::<f64>::identity(dim, dim);
    let d_int: Vec<f64> = d.interior().iter().map(|v| v.re).collect();
    let factor = DMatrix::from_fn(dim, dim, |i, j| id[(i, j)] - d_int[i] * k_cl[j]);
    let lhs = closed.matrix() * a - &id * mu0;
    let rhs = (free.matrix() * a - &id * mu0) * factor;
    let w = free.weights();
    let scale = weighted_norm(&lhs, &w, &w);
    Ok(weighted_norm(&(&lhs - rhs), &w, &w) / scale.max(f64::MIN_POSITIVE))
}

/// `||M (mu0 - a M)^{-1}||` in the state norm: the norm of `M` from the
/// graph norm `||(mu0 - a M) x||` to the state space.
fn graph_relative_norm(m: &LinearMap, a: f64, mu0: f64) -> Result<f64> {
    let dim = m.dim();
    let shifted = DMatrix::<f64>::identity(dim, dim) * mu0 - m.matrix() * a;
    let (inv, _) = linalg::inverse_checked(shifted, Complex64::new(mu0, 0.0))?;
    let w = m.weights();
    Ok(weighted_norm(&(m.matrix() * inv), &w, &w))
}

/// `(||A_cl(t) - A_cl(s)||, ||A(t) - A(s)||)`, each measured from the graph
/// norm `||(mu0 - X(0)) x||` of the respective operator at time zero.
pub fn continuity_bound_check(
    sys: &ExtendedSystem,
    prof: &CoefficientProfile,
    t: f64,
    s: f64,
    mu0: f64,
) -> Result<(f64, f64)> {
    let h = prof.horizon();
    if !(0.0..=h).contains(&t) || !(0.0..=h).contains(&s) {
        return Err(LabError::InvalidArgument(format!("times ({t}, {s}) outside [0, {h}]")));
    }
    if !(mu0 > 0.0) {
        return Err(LabError::InvalidArgument(format!("need mu0 > 0, got {mu0}")));
    }
    let da = (prof.eval(t) - prof.eval(s)).abs();
    if da == 0.0 {
        return Ok((0.0, 0.0));
    }
    let a0 = prof.eval(0.0);
    let closed = generator_matrix(sys, BoundaryCondition::ClosedLoop)?;
    let free = generator_matrix(sys, BoundaryCondition::Free)?;
    Ok((da * graph_relative_norm(&closed, a0, mu0)?, da * graph_relative_norm(&free, a0, mu0)?))
}

/// Largest `max(||G_t G_0^{-1}||, ||G_0 G_t^{-1}||)` over `times`, with
/// `G_t = mu0 - a(t) A_cl`: the equivalence constant between the graph norms.
pub fn graph_norm_equivalence(sys: &ExtendedSystem, prof: &CoefficientProfile, mu0: f64, times: &[f64]) -> Result<f64> {
    let closed = generator_matrix(sys, BoundaryCondition::ClosedLoop)?;
    let dim = closed.dim();
    let w = closed.weights();
    let g = |t: f64| DMatrix::<f64>::identity(dim, dim) * mu0 - closed.matrix() * prof.eval(t);
    let g0 = g(0.0);
    let (g0_inv, _) = linalg::inverse_checked(g0.clone(), Complex64::new(mu0, 0.0))?;
    let mut worst = 1.0f64;
    for &t in times {
        let gt = g(t);
        let (gt_inv, _) = linalg::inverse_checked(gt.clone(), Complex64::new(mu0, 0.0))?;
        worst = worst
            .max(weighted_norm(&(&gt * &g0_inv), &w, &w))
            .max(weighted_norm(&(&g0 * gt_inv), &w, &w));
    }
    Ok(worst)
}
