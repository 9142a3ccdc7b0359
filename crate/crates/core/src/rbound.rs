//! Randomized R-bound estimates for finite operator families, resolvent
//! suprema over half-planes, Dirichlet-map growth and the feedback supremum.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{LabError, Result};
use crate::grid::{check_exponent, lp_norm, time_lp, weighted_lp, Grid, GridFunction, TimeSignal};
use crate::linalg;
use crate::operators::{
    self, cmat_vec, dirichlet_map, generator_matrix, mat_vec, state_weights, BoundaryCondition,
    ExtendedSystem, LinearMap,
};
use crate::semigroup::{canonical_shift, mild_solution, yosida_matrix, yosida_parts};

/// Per-trial seed derived from a master seed (splitmix64 finalizer).
pub fn trial_seed(master: u64, trial: u64) -> u64 {
    let mut z = master ^ trial.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Space a family member reads from, used to draw random test vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InputSpace {
    /// Interior values of a grid, state weights.
    Interior(Grid),
    /// All nodal values, trapezoid weights.
    Nodal(Grid),
    /// One complex scalar.
    Scalar,
}

impl InputSpace {
    fn weights(&self) -> Vec<f64> {
        match *self {
            InputSpace::Interior(g) => state_weights(g),
            InputSpace::Nodal(g) => g.trapezoid_weights(),
            InputSpace::Scalar => vec![1.0],
        }
    }

    /// First ten cosine modes with complex Gaussian weights; a complex
    /// Gaussian for the scalar space.
    fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
        const MODES: usize = 10;
        let mut gauss = || Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng));
        let (grid, nodes): (Grid, Vec<usize>) = match *self {
            InputSpace::Scalar => return vec![gauss()],
            InputSpace::Interior(g) => (g, (1..g.cells()).collect()),
            InputSpace::Nodal(g) => (g, (0..=g.cells()).collect()),
        };
        let coef: Vec<Complex64> = (0..MODES).map(|_| gauss()).collect();
        let pi = std::f64::consts::PI;
        nodes
            .iter()
            .map(|&j| {
                let s = grid.node(j);
                coef.iter().enumerate().map(|(m, c)| c * (m as f64 * pi * s).cos()).sum()
            })
            .collect()
    }
}

/// A complex matrix between two weighted spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedOperator {
    matrix: DMatrix<Complex64>,
    w_in: Vec<f64>,
    w_out: Vec<f64>,
}

impl WeightedOperator {
    pub fn new(matrix: DMatrix<Complex64>, w_in: Vec<f64>, w_out: Vec<f64>) -> Result<Self> {
        if matrix.ncols() != w_in.len() || matrix.nrows() != w_out.len() {
            return Err(LabError::DimensionMismatch {
                expected: w_in.len(),
                got: matrix.ncols(),
            });
        }
        Ok(Self { matrix, w_in, w_out })
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    /// Weighted operator 2-norm.
    pub fn norm(&self) -> f64 {
        linalg::weighted_norm(&self.matrix, &self.w_in, &self.w_out)
    }

    fn scaled(&self, c: f64) -> Self {
        Self {
            matrix: &self.matrix * Complex64::new(c, 0.0),
            ..self.clone()
        }
    }
}

/// Parametrization of the spectral points of a family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Contour {
    /// `lambda = omega + i s`.
    Vertical { omega: f64 },
    /// `lambda = s + shift`.
    RealShift { shift: f64 },
}

impl Contour {
    pub fn point(&self, s: f64) -> Complex64 {
        match *self {
            Contour::Vertical { omega } => Complex64::new(omega, s),
            Contour::RealShift { shift } => Complex64::new(s + shift, 0.0),
        }
    }
}

/// Finite family of operators sharing input and output spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorFamily {
    label: String,
    members: Vec<WeightedOperator>,
    params: Vec<f64>,
    exponent: f64,
    input: InputSpace,
}

/// `n` points spaced evenly in `log10` between `lo` and `hi`.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (a, b) = (lo.log10(), hi.log10());
    (0..n)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
        .collect()
}

impl OperatorFamily {
    pub fn new(label: &str, members: Vec<WeightedOperator>, params: Vec<f64>, exponent: f64, input: InputSpace) -> Result<Self> {
        if members.is_empty() {
            return Err(LabError::InvalidArgument("empty operator family".into()));
        }
        if params.len() != members.len() {
            return Err(LabError::DimensionMismatch {
                expected: members.len(),
                got: params.len(),
            });
        }
        let w = input.weights();
        if members.iter().any(|m| m.w_in != w || m.w_out != members[0].w_out) {
            return Err(LabError::InvalidArgument("family members act on different spaces".into()));
        }
        Ok(Self {
            label: label.to_string(),
            members,
            params,
            exponent,
            input,
        })
    }

    /// Family of real maps on the same space.
    pub fn from_maps(label: &str, maps: &[LinearMap]) -> Result<Self> {
        let first = maps
            .first()
            .ok_or_else(|| LabError::InvalidArgument("empty operator family".into()))?;
        let input = match first.space() {
            operators::Space::Nodal => InputSpace::Nodal(first.grid()),
            operators::Space::State { .. } => InputSpace::Interior(first.grid()),
        };
        let members = maps
            .iter()
            .map(|m| WeightedOperator::new(linalg::to_complex(m.matrix()), m.weights(), m.weights()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(label, members, (0..maps.len()).map(|i| i as f64).collect(), 0.0, input)
    }

    /// `{|s|^theta R(lambda(s), M)}`.
    pub fn resolvent(map: &LinearMap, contour: Contour, s_values: &[f64], theta: f64) -> Result<Self> {
        let w = map.weights();
        let members = s_values
            .iter()
            .map(|&s| {
                let r = map.resolvent_matrix(contour.point(s))? * Complex64::new(s.abs().powf(theta), 0.0);
                WeightedOperator::new(r, w.clone(), w.clone())
            })
            .collect::<Result<Vec<_>>>()?;
        let input = match map.space() {
            operators::Space::Nodal => InputSpace::Nodal(map.grid()),
            operators::Space::State { .. } => InputSpace::Interior(map.grid()),
        };
        Self::new(&format!("s^{theta} R"), members, s_values.to_vec(), theta, input)
    }

    /// `{|s|^theta d_lambda(s)}` from boundary scalars to interior values.
    pub fn dirichlet(sys: &ExtendedSystem, contour: Contour, s_values: &[f64], theta: f64) -> Result<Self> {
        let w = state_weights(sys.grid());
        let members = s_values
            .iter()
            .map(|&s| {
                let d = dirichlet_map(sys, contour.point(s))?;
                let c = s.abs().powf(theta);
                let col = DMatrix::from_iterator(w.len(), 1, d.interior().iter().map(|v| v * c));
                WeightedOperator::new(col, vec![1.0], w.clone())
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(&format!("s^{theta} D"), members, s_values.to_vec(), theta, InputSpace::Scalar)
    }

    /// `{|s|^theta K R(lambda(s), A)}` from interior values to boundary scalars.
    pub fn observation(sys: &ExtendedSystem, contour: Contour, s_values: &[f64], theta: f64) -> Result<Self> {
        let free = generator_matrix(sys, BoundaryCondition::Free)?;
        let w = free.weights();
        let members = s_values
            .iter()
            .map(|&s| {
                let row = observation_row(sys, &free, contour.point(s))?;
                let c = s.abs().powf(theta);
                let m = DMatrix::from_iterator(1, w.len(), row.iter().map(|v| v * c));
                WeightedOperator::new(m, w.clone(), vec![1.0])
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(&format!("s^{theta} K R"), members, s_values.to_vec(), theta, InputSpace::Interior(sys.grid()))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn members(&self) -> &[WeightedOperator] {
        &self.members
    }

    /// Every member multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            members: self.members.iter().map(|m| m.scaled(c)).collect(),
            ..self.clone()
        }
    }

    /// Largest member norm.
    pub fn max_member_norm(&self) -> f64 {
        self.members.iter().map(|m| m.norm()).fold(0.0, f64::max)
    }
}

/// Row vector `K E R(lambda, A)` on interior values.
fn observation_row(sys: &ExtendedSystem, free: &LinearMap, lambda: Complex64) -> Result<Vec<Complex64>> {
    let pull = free.lift().expect("generator has a lift").pull_back(sys.k_row());
    let r = free.resolvent_matrix(lambda)?;
    let k = pull.len();
    Ok((0..k).map(|j| (0..k).map(|i| r[(i, j)] * pull[i]).sum()).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RBoundReport {
    pub label: String,
    pub seed: u64,
    pub trials: usize,
    pub subset_size: usize,
    /// Ratio of Rademacher averages per trial, in trial order.
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub p95_ratio: f64,
    /// Largest member norm; every R-bound is at least this.
    pub member_norm_max: f64,
    /// `max(max_ratio, member_norm_max)`.
    pub estimate: f64,
    /// Trials whose test vectors were redrawn because they were numerically zero.
    pub redraws: usize,
}

pub const SIGN_VECTORS: usize = 64;
pub const MIN_TRIALS: usize = 100;

/// Monte Carlo lower estimate of the R-bound of a finite family.
///
/// Each trial picks `k` distinct members and `k` random test vectors, then
/// averages `||sum e_j T_j x_j||` and `||sum e_j x_j||` over
/// [`SIGN_VECTORS`] independent sign vectors and records their ratio.
pub fn rbound_estimate(fam: &OperatorFamily, k: usize, trials: usize, seed: u64) -> Result<RBoundReport> {
    if k == 0 || k > fam.len() {
        return Err(LabError::InvalidArgument(format!(
            "subset size {k} must lie in 1..={}",
            fam.len()
        )));
    }
    if trials < MIN_TRIALS {
        return Err(LabError::InvalidArgument(format!(
            "need at least {MIN_TRIALS} trials, got {trials}"
        )));
    }
    let w_in = fam.input.weights();
    let w_out = fam.members[0].w_out.clone();
    let mut ratios = Vec::with_capacity(trials);
    let mut redraws = 0;
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, trial as u64));
        let picks = rand::seq::index::sample(&mut rng, fam.len(), k).into_vec();
        let (xs, txs) = loop {
            let xs: Vec<Vec<Complex64>> = (0..k).map(|_| fam.input.draw(&mut rng)).collect();
            if xs.iter().any(|x| weighted_lp(x, &w_in, 2.0) > 1e-300) {
                let txs: Vec<Vec<Complex64>> = picks
                    .iter()
                    .zip(&xs)
                    .map(|(&i, x)| cmat_vec(&fam.members[i].matrix, x))
                    .collect();
                break (xs, txs);
            }
            redraws += 1;
        };
        let mut num = 0.0;
        let mut den = 0.0;
        let mut sx = vec![Complex64::new(0.0, 0.0); w_in.len()];
        let mut stx = vec![Complex64::new(0.0, 0.0); w_out.len()];
        for _ in 0..SIGN_VECTORS {
            sx.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            stx.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            for (x, tx) in xs.iter().zip(&txs) {
                let e = if rng.random::<bool>() { 1.0 } else { -1.0 };
                sx.iter_mut().zip(x).for_each(|(a, b)| *a += b * e);
                stx.iter_mut().zip(tx).for_each(|(a, b)| *a += b * e);
            }
            num += weighted_lp(&stx, &w_out, 2.0);
            den += weighted_lp(&sx, &w_in, 2.0);
        }
        ratios.push(if den > 0.0 { num / den } else { 0.0 });
    }
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    let mut sorted = ratios.clone();
    sorted.sort_by(f64::total_cmp);
    let idx = ((0.95 * trials as f64).ceil() as usize).clamp(1, trials) - 1;
    let member_norm_max = fam.max_member_norm();
    Ok(RBoundReport {
        label: fam.label.clone(),
        seed,
        trials,
        subset_size: k,
        p95_ratio: sorted[idx],
        max_ratio,
        member_norm_max,
        estimate: max_ratio.max(member_norm_max),
        ratios,
        redraws,
    })
}

/// Offsets `lambda - beta` sampled in the closed right half-plane.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfPlaneSamples {
    offsets: Vec<Complex64>,
}

impl HalfPlaneSamples {
    /// `r e^{i theta}` for log-spaced radii and evenly spaced angles in
    /// `[-(pi/2 - margin), pi/2 - margin]`.
    pub fn log_radial(r_min: f64, r_max: f64, radii: usize, angles: usize, margin: f64) -> Self {
        let half = std::f64::consts::FRAC_PI_2 - margin;
        let mut offsets = Vec::with_capacity(radii * angles);
        for r in log_spaced(r_min, r_max, radii) {
            for a in 0..angles {
                let theta = if angles == 1 {
                    0.0
                } else {
                    -half + 2.0 * half * a as f64 / (angles - 1) as f64
                };
                offsets.push(Complex64::from_polar(r, theta));
            }
        }
        Self { offsets }
    }

    /// Default set: 20 radii in `[1e-2, 1e6]`, 11 angles, margin `1e-3`.
    pub fn standard() -> Self {
        Self::log_radial(1e-2, 1e6, 20, 11, 1e-3)
    }

    pub fn from_points(offsets: Vec<Complex64>) -> Self {
        Self { offsets }
    }

    pub fn offsets(&self) -> &[Complex64] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut offsets = self.offsets.clone();
        offsets.extend_from_slice(&other.offsets);
        Self { offsets }
    }
}

/// Which supremum a [`SectorReport`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    /// `|lambda - beta| ||R(lambda, M)||`.
    M1,
    /// `|z|^{1/q} ||K R(z, A)||`.
    M2,
    /// `|z|^{1/p} ||d_z||`.
    M3,
    /// `|1 - K d_lambda|^{-1}`.
    Nu,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SectorReport {
    pub quantity: Quantity,
    pub points: Vec<Complex64>,
    pub values: Vec<f64>,
    pub sup: f64,
    pub argmax: Option<Complex64>,
    /// Points dropped because they sit on the spectrum.
    pub skipped: Vec<Complex64>,
}

impl SectorReport {
    fn collect(quantity: Quantity, rows: Vec<(Complex64, Option<f64>)>) -> Self {
        let mut points = Vec::new();
        let mut values = Vec::new();
        let mut skipped = Vec::new();
        let mut sup = 0.0f64;
        let mut argmax = None;
        for (z, v) in rows {
            match v {
                Some(v) => {
                    if argmax.is_none() || v > sup {
                        sup = v;
                        argmax = Some(z);
                    }
                    points.push(z);
                    values.push(v);
                }
                None => skipped.push(z),
            }
        }
        Self { quantity, points, values, sup, argmax, skipped }
    }
}

/// `sup |lambda - beta| ||R(lambda, M)||` over `lambda = beta + offset`.
pub fn sector_sup(map: &LinearMap, beta: f64, samples: &HalfPlaneSamples) -> Result<SectorReport> {
    let scale = map.norm();
    let rows = samples
        .offsets()
        .iter()
        .map(|&off| {
            let lambda = off + beta;
            let rn = map.resolvent_norm(lambda);
            let on_spectrum = !rn.is_finite() || 1.0 / rn < 1e-14 * (lambda.norm() + scale);
            (lambda, (!on_spectrum).then(|| off.norm() * rn))
        })
        .collect();
    Ok(SectorReport::collect(Quantity::M1, rows))
}

/// The two admissibility suprema.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    pub omega: f64,
    pub p: f64,
    pub m2: SectorReport,
    pub m3: SectorReport,
}

/// `(sum_j w_j |r_j / w_j|^q)^{1/q}`: norm of `x -> sum r_j x_j` dual to the
/// weighted `l^p` norm.
fn dual_norm(row: &[Complex64], w: &[f64], q: f64) -> f64 {
    let scaled: Vec<Complex64> = row.iter().zip(w).map(|(r, w)| r / *w).collect();
    weighted_lp(&scaled, w, q)
}

/// `M2 = sup |z|^{1/q} ||K R(z, A)||` and `M3 = sup |z|^{1/p} ||d_z||_p` over
/// `z = omega + offset`, with `omega` the canonical shift of the free generator.
pub fn admissibility_sup(sys: &ExtendedSystem, p: f64, samples: &HalfPlaneSamples) -> Result<AdmissibilityReport> {
    check_exponent(p)?;
    if p.is_infinite() {
        return Err(LabError::InvalidExponent(p));
    }
    let q = if p == 1.0 { f64::INFINITY } else { p / (p - 1.0) };
    let free = generator_matrix(sys, BoundaryCondition::Free)?;
    let omega = canonical_shift(&[&free])?;
    let w = free.weights();
    let mut m2 = Vec::with_capacity(samples.len());
    let mut m3 = Vec::with_capacity(samples.len());
    for &off in samples.offsets() {
        let z = off + omega;
        let inv_q = if q.is_infinite() { 0.0 } else { 1.0 / q };
        let v2 = match observation_row(sys, &free, z) {
            Ok(row) => Some(z.norm().powf(inv_q) * dual_norm(&row, &w, q)),
            Err(LabError::Singular { .. }) => None,
            Err(e) => return Err(e),
        };
        let v3 = match dirichlet_map(sys, z) {
            Ok(d) => Some(z.norm().powf(1.0 / p) * lp_norm(d.profile(), p)?),
            Err(LabError::NearSpectrum { .. }) => None,
            Err(e) => return Err(e),
        };
        m2.push((z, v2));
        m3.push((z, v3));
    }
    Ok(AdmissibilityReport {
        omega,
        p,
        m2: SectorReport::collect(Quantity::M2, m2),
        m3: SectorReport::collect(Quantity::M3, m3),
    })
}

/// Growth of the Dirichlet map along the positive real axis.
#[derive(Debug, Clone, PartialEq)]
pub struct KappaReport {
    pub p: f64,
    pub n: usize,
    pub lambdas: Vec<f64>,
    /// `||d_lambda||_p`.
    pub norms: Vec<f64>,
    /// Least-squares slope of `log(lambda ||d_lambda||)` against `log lambda`.
    pub slope_scaled: f64,
    /// Least-squares slope of `log ||d_lambda||`.
    pub slope: f64,
    /// `sup lambda^{(p+1)/(2p)} ||d_lambda||`.
    pub weighted_sup: f64,
}

fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Fits the growth exponent of `lambda ||d_lambda||_p` over real `lambdas`.
pub fn kappa_growth(sys: &ExtendedSystem, p: f64, lambdas: &[f64]) -> Result<KappaReport> {
    check_exponent(p)?;
    if lambdas.len() < 2 || lambdas.iter().any(|&l| !(l > 0.0)) {
        return Err(LabError::InvalidArgument("need at least two positive lambdas".into()));
    }
    let norms = lambdas
        .iter()
        .map(|&l| lp_norm(dirichlet_map(sys, Complex64::new(l, 0.0))?.profile(), p))
        .collect::<Result<Vec<_>>>()?;
    let lx: Vec<f64> = lambdas.iter().map(|l| l.ln()).collect();
    let ly: Vec<f64> = norms.iter().map(|v| v.ln()).collect();
    let slope = ls_slope(&lx, &ly);
    let e = if p.is_infinite() { 0.5 } else { (p + 1.0) / (2.0 * p) };
    let weighted_sup = lambdas
        .iter()
        .zip(&norms)
        .map(|(l, v)| l.powf(e) * v)
        .fold(0.0, f64::max);
    Ok(KappaReport {
        p,
        n: sys.grid().cells(),
        lambdas: lambdas.to_vec(),
        norms,
        slope_scaled: slope + 1.0,
        slope,
        weighted_sup,
    })
}

/// `sup |1 - K d_lambda|^{-1}` over `lambda = alpha + offset`.
pub fn feedback_sup(sys: &ExtendedSystem, alpha: f64, samples: &HalfPlaneSamples) -> Result<SectorReport> {
    let rows = samples
        .offsets()
        .iter()
        .map(|&off| {
            let lambda = off + alpha;
            let v = match dirichlet_map(sys, lambda) {
                Ok(d) => {
                    let gap = (1.0 - sys.k_row().value(d.profile())).norm();
                    (gap >= operators::FEEDBACK_TOLERANCE).then(|| 1.0 / gap)
                }
                Err(LabError::NearSpectrum { .. }) => None,
                Err(e) => return Err(e),
            };
            Ok((lambda, v))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SectorReport::collect(Quantity::Nu, rows))
}

/// Bochner norms of the four pieces of `A_cl,n z` for the closed-loop mild
/// solution `z`: with `v` the free mild solution and `w = z - v`,
/// `I1 = A_n v`, `I2 = n^2 d_n (1 - K d_n)^{-1} K R(n, A) v`, and `I3`, `I4`
/// the same two operators applied to `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct YosidaTermReport {
    pub n: f64,
    pub p: f64,
    pub terms: [f64; 4],
    pub sum_norm: f64,
    pub direct_norm: f64,
    /// `||I1 + I2 + I3 + I4 - A_cl,n z|| / ||A_cl,n z||`.
    pub residual: f64,
    pub f_norm: f64,
}

pub fn yosida_term_norms(sys: &ExtendedSystem, n: f64, f: &TimeSignal, p: f64) -> Result<YosidaTermReport> {
    check_exponent(p)?;
    let grid = sys.grid();
    let free = generator_matrix(sys, BoundaryCondition::Free)?;
    let closed = generator_matrix(sys, BoundaryCondition::ClosedLoop)?;
    let zero = GridFunction::zeros(grid);
    let v = mild_solution(&free, f, &zero)?;
    let z = mild_solution(&closed, f, &zero)?;
    let parts = yosida_parts(sys, n)?;
    let direct = yosida_matrix(&closed, n)?;
    let w = state_weights(grid);
    let tg = f.timegrid();

    let feedback = |x: &[Complex64]| -> Vec<Complex64> {
        let s: Complex64 = parts.row.iter().zip(x).map(|(r, v)| v * r).sum();
        parts.column.iter().map(|c| s * c).collect()
    };
    let mut frames = [vec![], vec![], vec![], vec![], vec![], vec![]];
    for (vk, zk) in v.frames().iter().zip(z.frames()) {
        let vi = vk.interior();
        let wi: Vec<Complex64> = zk.interior().iter().zip(vi).map(|(a, b)| a - b).collect();
        let t = [
            mat_vec(&parts.free_part, vi),
            feedback(vi),
            mat_vec(&parts.free_part, &wi),
            feedback(&wi),
        ];
        let d = mat_vec(direct.matrix(), zk.interior());
        let sum: Vec<Complex64> = (0..d.len()).map(|i| t[0][i] + t[1][i] + t[2][i] + t[3][i]).collect();
        let diff: Vec<Complex64> = sum.iter().zip(&d).map(|(a, b)| a - b).collect();
        for (slot, vec) in frames.iter_mut().zip([&t[0], &t[1], &t[2], &t[3], &sum, &diff]) {
            slot.push(weighted_lp(vec, &w, p));
        }
        frames[5].push(weighted_lp(&d, &w, p));
    }
    // frames[5] holds both diff and direct norms interleaved
    let diff_norms: Vec<f64> = frames[5].iter().step_by(2).copied().collect();
    let direct_norms: Vec<f64> = frames[5].iter().skip(1).step_by(2).copied().collect();
    let norm = |x: &[f64]| time_lp(x, &tg, p);
    let direct_norm = norm(&direct_norms);
    let f_frames = f
        .frames()
        .iter()
        .map(|g| weighted_lp(g.interior(), &w, p))
        .collect::<Vec<_>>();
    Ok(YosidaTermReport {
        n,
        p,
        terms: [norm(&frames[0]), norm(&frames[1]), norm(&frames[2]), norm(&frames[3])],
        sum_norm: norm(&frames[4]),
        direct_norm,
        residual: norm(&diff_norms) / direct_norm.max(f64::MIN_POSITIVE),
        f_norm: norm(&f_frames),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, TimeGrid};
    use crate::operators::assemble_extended;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn identity_family_ratio_is_one() {
        let g = make_grid(16).unwrap();
        let fam = OperatorFamily::from_maps("id", &[LinearMap::identity(g)]).unwrap();
        let r = rbound_estimate(&fam, 1, 100, 7).unwrap();
        assert!(r.ratios.iter().all(|&x| x == 1.0));
        assert_eq!(r.max_ratio, 1.0);
        assert!((r.estimate - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scalar_multiple_ratio() {
        let g = make_grid(16).unwrap();
        let fam = OperatorFamily::from_maps("3id", &[LinearMap::identity(g).scaled(-3.0)]).unwrap();
        let r = rbound_estimate(&fam, 1, 100, 7).unwrap();
        assert!(r.ratios.iter().all(|&x| (x - 3.0).abs() < 1e-12));
    }

    #[test]
    fn estimate_scales_and_repeats() {
        let g = make_grid(16).unwrap();
        let a = generator_matrix(&assemble_extended(g), BoundaryCondition::Free).unwrap().shifted(1.0);
        let fam = OperatorFamily::resolvent(&a, Contour::Vertical { omega: 0.0 }, &log_spaced(0.1, 1e3, 12), 1.0).unwrap();
        let r1 = rbound_estimate(&fam, 4, 100, 11).unwrap();
        let r2 = rbound_estimate(&fam, 4, 100, 11).unwrap();
        assert_eq!(r1.ratios, r2.ratios);
        let r3 = rbound_estimate(&fam.scaled(2.5), 4, 100, 11).unwrap();
        assert!((r3.max_ratio - 2.5 * r1.max_ratio).abs() < 1e-8 * r1.max_ratio);
        assert!(r1.estimate >= r1.member_norm_max - 1e-6);
        assert!(rbound_estimate(&fam, 13, 100, 1).is_err());
        assert!(rbound_estimate(&fam, 2, 10, 1).is_err());
    }

    #[test]
    fn zero_map_sector_values() {
        let g = make_grid(8).unwrap();
        let z = LinearMap::zeros(g);
        let samples = HalfPlaneSamples::log_radial(0.1, 10.0, 4, 3, 0.1);
        let r = sector_sup(&z, -1.0, &samples).unwrap();
        for (lam, v) in r.points.iter().zip(&r.values) {
            assert!((v - (lam + 1.0).norm() / lam.norm()).abs() < 1e-10);
        }
    }

    #[test]
    fn free_sector_bound() {
        let g = make_grid(32).unwrap();
        let a = generator_matrix(&assemble_extended(g), BoundaryCondition::Free).unwrap().shifted(1.0);
        let r = sector_sup(&a, 0.0, &HalfPlaneSamples::standard()).unwrap();
        assert!(r.sup <= 1.0 + 1e-6, "{}", r.sup);
        assert!(r.points.len() >= 200);
    }

    #[test]
    fn feedback_examples() {
        let s = assemble_extended(make_grid(128).unwrap());
        let one = HalfPlaneSamples::from_points(vec![c(0.0)]);
        let r = feedback_sup(&s, 1.0, &one).unwrap();
        assert!((r.sup - 1.8592).abs() < 0.01);
        let r0 = feedback_sup(&s.without_feedback(), 1.0, &HalfPlaneSamples::standard()).unwrap();
        assert_eq!(r0.sup, 1.0);
        let tail = feedback_sup(&s, 0.0, &HalfPlaneSamples::from_points(vec![c(1e4), c(1e6)])).unwrap();
        assert!(tail.values[1] < tail.values[0] && tail.values[1] < 1.01);
    }

    #[test]
    fn admissibility_without_feedback() {
        let s = assemble_extended(make_grid(32).unwrap());
        let samples = HalfPlaneSamples::log_radial(0.1, 100.0, 5, 3, 0.1);
        let r = admissibility_sup(&s.without_feedback(), 2.0, &samples).unwrap();
        assert_eq!(r.m2.sup, 0.0);
        assert!(r.m3.sup > 0.0);
    }

    #[test]
    fn kappa_slope_small_grid() {
        let s = assemble_extended(make_grid(4096).unwrap());
        let r = kappa_growth(&s, 2.0, &log_spaced(10.0, 1e4, 12)).unwrap();
        assert!((r.slope_scaled - 0.25).abs() < 0.05, "{}", r.slope_scaled);
    }

    #[test]
    fn yosida_terms_sum() {
        let g = make_grid(32).unwrap();
        let s = assemble_extended(g);
        let tg = TimeGrid::new(1.0, 16).unwrap();
        let f = TimeSignal::from_real_fn(tg, g, |t, x| (1.0 + t) * (2.0 * x).cos());
        let r = yosida_term_norms(&s, 100.0, &f, 2.0).unwrap();
        assert!(r.residual < 1e-8, "{}", r.residual);
        let r0 = yosida_term_norms(&s.without_feedback(), 100.0, &f, 2.0).unwrap();
        assert_eq!(r0.terms[1], 0.0);
        assert_eq!(r0.terms[2], 0.0);
        assert_eq!(r0.terms[3], 0.0);
    }
}
