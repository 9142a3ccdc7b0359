//! Discrete operators of the boundary-feedback heat problem.
//!
//! Nodes `s_j = j h`, `j = 0..=n`. The maximal operator is the second
//! difference on interior nodes; three boundary rows act on full nodal
//! vectors:
//!
//! * `N g = (-3 g_0 + 4 g_1 - g_2) / (2h)` discretizes `g'(0)`,
//! * `G g = (3 g_n - 4 g_{n-1} + g_{n-2}) / (2h)` discretizes `g'(1)`,
//! * `K g = g_n - g_0`.
//!
//! Generators act on the `n - 1` interior values. The two end values are
//! recovered from `N g = 0` and `G g = c K g` (`c = 0` free, `c = 1` closed
//! loop) by a [`Lift`]. State norms use the weights
//! `[3h/2, h, ..., h, 3h/2]`, under which the free generator is symmetric.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{LabError, Result};
use crate::grid::{Grid, GridFunction};
use crate::linalg::{self, BandMatrix, SymTridiagonal};

pub use crate::analytic::dirichlet_closed_form;

/// Largest number of cells for which dense generators are assembled.
pub const DENSE_LIMIT: usize = 4096;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Weights of the discrete state norm on interior values.
pub fn state_weights(grid: Grid) -> Vec<f64> {
    let h = grid.h();
    let mut w = vec![h; grid.interior_len()];
    w[0] = 1.5 * h;
    let last = w.len() - 1;
    w[last] = 1.5 * h;
    w
}

/// Linear functional `g -> sum_j w_j g(s_j)` on nodal values.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFunctional {
    weights: Vec<f64>,
}

impl BoundaryFunctional {
    pub fn new(grid: Grid, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != grid.len() {
            return Err(LabError::DimensionMismatch {
                expected: grid.len(),
                got: weights.len(),
            });
        }
        if let Some(index) = weights.iter().position(|w| !w.is_finite()) {
            return Err(LabError::NonFinite { index });
        }
        Ok(Self { weights })
    }

    pub fn zero(grid: Grid) -> Self {
        Self {
            weights: vec![0.0; grid.len()],
        }
    }

    /// Second-order one-sided `g'(0)`.
    pub fn left_derivative(grid: Grid) -> Self {
        let mut w = vec![0.0; grid.len()];
        let s = 0.5 / grid.h();
        w[0] = -3.0 * s;
        w[1] = 4.0 * s;
        w[2] = -s;
        Self { weights: w }
    }

    /// Second-order one-sided `g'(1)`.
    pub fn right_derivative(grid: Grid) -> Self {
        let n = grid.cells();
        let mut w = vec![0.0; grid.len()];
        let s = 0.5 / grid.h();
        w[n] = 3.0 * s;
        w[n - 1] = -4.0 * s;
        w[n - 2] = s;
        Self { weights: w }
    }

    /// `g(1) - g(0)`.
    pub fn jump(grid: Grid) -> Self {
        let mut w = vec![0.0; grid.len()];
        w[0] = -1.0;
        w[grid.cells()] = 1.0;
        Self { weights: w }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_zero(&self) -> bool {
        self.weights.iter().all(|&w| w == 0.0)
    }

    pub fn apply(&self, values: &[Complex64]) -> Complex64 {
        debug_assert_eq!(values.len(), self.weights.len());
        self.weights.iter().zip(values).map(|(w, v)| v * w).sum()
    }

    pub fn value(&self, g: &GridFunction) -> Complex64 {
        self.apply(g.values())
    }

    fn scaled_sub(&self, other: &Self, c: f64) -> Self {
        Self {
            weights: self
                .weights
                .iter()
                .zip(&other.weights)
                .map(|(a, b)| a - c * b)
                .collect(),
        }
    }
}

/// Interior second-difference rows plus the boundary rows `N`, `G`, `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedSystem {
    grid: Grid,
    neumann_row: BoundaryFunctional,
    g_row: BoundaryFunctional,
    k_row: BoundaryFunctional,
}

/// Boundary condition at the right end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryCondition {
    /// `g'(1) = 0`.
    Free,
    /// `g'(1) = g(1) - g(0)`.
    ClosedLoop,
}

pub fn assemble_extended(grid: Grid) -> ExtendedSystem {
    ExtendedSystem {
        grid,
        neumann_row: BoundaryFunctional::left_derivative(grid),
        g_row: BoundaryFunctional::right_derivative(grid),
        k_row: BoundaryFunctional::jump(grid),
    }
}

impl ExtendedSystem {
    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn neumann_row(&self) -> &BoundaryFunctional {
        &self.neumann_row
    }

    pub fn g_row(&self) -> &BoundaryFunctional {
        &self.g_row
    }

    pub fn k_row(&self) -> &BoundaryFunctional {
        &self.k_row
    }

    /// Same system with a different feedback functional.
    pub fn with_k_row(&self, k_row: BoundaryFunctional) -> Result<Self> {
        if k_row.weights.len() != self.grid.len() {
            return Err(LabError::DimensionMismatch {
                expected: self.grid.len(),
                got: k_row.weights.len(),
            });
        }
        Ok(Self {
            k_row,
            ..self.clone()
        })
    }

    /// Same system with `K = 0`, so that the closed loop equals the free generator.
    pub fn without_feedback(&self) -> Self {
        Self {
            k_row: BoundaryFunctional::zero(self.grid),
            ..self.clone()
        }
    }

    /// Interior second differences `(g_{j-1} - 2 g_j + g_{j+1}) / h^2`, `j = 1..n-1`.
    pub fn apply_interior(&self, values: &[Complex64]) -> Vec<Complex64> {
        let n = self.grid.cells();
        let ih2 = 1.0 / (self.grid.h() * self.grid.h());
        (1..n)
            .map(|j| (values[j - 1] - 2.0 * values[j] + values[j + 1]) * ih2)
            .collect()
    }

    /// Boundary row that defines the domain for `bc`.
    pub fn domain_row(&self, bc: BoundaryCondition) -> BoundaryFunctional {
        match bc {
            BoundaryCondition::Free => self.g_row.clone(),
            BoundaryCondition::ClosedLoop => self.g_row.scaled_sub(&self.k_row, 1.0),
        }
    }

    /// Recovers the end values from interior values under `N g = 0` and the
    /// domain row of `bc`.
    pub fn lift(&self, bc: BoundaryCondition) -> Result<Lift> {
        let n = self.grid.cells();
        let r1 = self.neumann_row.weights();
        let r2_row = self.domain_row(bc);
        let r2 = r2_row.weights();
        let det = r1[0] * r2[n] - r1[n] * r2[0];
        let scale = (r1[0].abs() + r1[n].abs()) * (r2[0].abs() + r2[n].abs());
        if !(det.abs() > 1e-12 * scale) {
            return Err(LabError::DegenerateBoundary { det });
        }
        // [g0; gn] = -B^{-1} (interior columns) g_int, B = [[r1_0, r1_n], [r2_0, r2_n]]
        let mut rows = DMatrix::<f64>::zeros(2, n - 1);
        for j in 1..n {
            let (a, b) = (r1[j], r2[j]);
            rows[(0, j - 1)] = -(r2[n] * a - r1[n] * b) / det;
            rows[(1, j - 1)] = -(-r2[0] * a + r1[0] * b) / det;
        }
        Ok(Lift {
            grid: self.grid,
            rows,
        })
    }

    /// The free generator symmetrized by the state weights; its eigenvalues
    /// are those of the free generator.
    pub fn free_tridiagonal(&self) -> SymTridiagonal {
        let k = self.grid.interior_len();
        let ih2 = 1.0 / (self.grid.h() * self.grid.h());
        let mut diag = vec![-2.0 * ih2; k];
        let mut off = vec![ih2; k - 1];
        diag[0] = -2.0 / 3.0 * ih2;
        diag[k - 1] = -2.0 / 3.0 * ih2;
        let edge = (2.0f64 / 3.0).sqrt() * ih2;
        off[0] = edge;
        off[k - 2] = edge;
        SymTridiagonal::new(diag, off)
    }
}

/// End values as linear functions of the interior values.
#[derive(Debug, Clone, PartialEq)]
pub struct Lift {
    grid: Grid,
    rows: DMatrix<f64>,
}

impl Lift {
    /// `2 x (n-1)` matrix: first row gives `g_0`, second row `g_n`.
    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }

    /// Full `(n+1) x (n-1)` extension matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        let k = self.grid.interior_len();
        let mut e = DMatrix::<f64>::zeros(k + 2, k);
        e.row_mut(0).copy_from(&self.rows.row(0));
        e.row_mut(k + 1).copy_from(&self.rows.row(1));
        for j in 0..k {
            e[(j + 1, j)] = 1.0;
        }
        e
    }

    pub fn extend(&self, interior: &[Complex64]) -> Vec<Complex64> {
        let k = self.grid.interior_len();
        debug_assert_eq!(interior.len(), k);
        let mut left = ZERO;
        let mut right = ZERO;
        for (j, v) in interior.iter().enumerate() {
            left += v * self.rows[(0, j)];
            right += v * self.rows[(1, j)];
        }
        let mut out = Vec::with_capacity(k + 2);
        out.push(left);
        out.extend_from_slice(interior);
        out.push(right);
        out
    }

    pub fn to_grid_function(&self, interior: &[Complex64]) -> GridFunction {
        GridFunction::new(self.grid, self.extend(interior)).expect("finite lifted values")
    }

    /// Row functional `b^T E` on interior values for a nodal functional `b`.
    pub fn pull_back(&self, b: &BoundaryFunctional) -> Vec<f64> {
        let k = self.grid.interior_len();
        let w = b.weights();
        (0..k)
            .map(|j| w[j + 1] + w[0] * self.rows[(0, j)] + w[k + 1] * self.rows[(1, j)])
            .collect()
    }
}

/// Which vectors a [`LinearMap`] acts on.
#[derive(Debug, Clone, PartialEq)]
pub enum Space {
    /// All `n + 1` nodal values; trapezoid weights.
    Nodal,
    /// The `n - 1` interior values; state weights. `lift` reconstructs end
    /// values of vectors in the domain.
    State { lift: Option<Lift> },
}

/// Dense real operator on grid functions.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    grid: Grid,
    matrix: DMatrix<f64>,
    space: Space,
    maps_into_domain: bool,
}

pub(crate) fn mat_vec(m: &DMatrix<f64>, x: &[Complex64]) -> Vec<Complex64> {
    debug_assert_eq!(m.ncols(), x.len());
    let mut out = vec![ZERO; m.nrows()];
    for (j, xj) in x.iter().enumerate() {
        if *xj == ZERO {
            continue;
        }
        for (o, a) in out.iter_mut().zip(m.column(j).iter()) {
            *o += xj * *a;
        }
    }
    out
}

pub(crate) fn cmat_vec(m: &DMatrix<Complex64>, x: &[Complex64]) -> Vec<Complex64> {
    (m * DVector::from_column_slice(x)).as_slice().to_vec()
}

impl LinearMap {
    fn checked(grid: Grid, matrix: DMatrix<f64>, space: Space) -> Result<Self> {
        let dim = match space {
            Space::Nodal => grid.len(),
            Space::State { .. } => grid.interior_len(),
        };
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(LabError::DimensionMismatch {
                expected: dim,
                got: matrix.nrows().max(matrix.ncols()),
            });
        }
        if let Some(index) = matrix.iter().position(|x| !x.is_finite()) {
            return Err(LabError::NonFinite { index });
        }
        Ok(Self {
            grid,
            matrix,
            space,
            maps_into_domain: false,
        })
    }

    /// Operator on all nodal values.
    pub fn nodal(grid: Grid, matrix: DMatrix<f64>) -> Result<Self> {
        Self::checked(grid, matrix, Space::Nodal)
    }

    /// Operator on interior values with an optional domain lift.
    pub fn state(grid: Grid, matrix: DMatrix<f64>, lift: Option<Lift>) -> Result<Self> {
        Self::checked(grid, matrix, Space::State { lift })
    }

    pub fn zeros(grid: Grid) -> Self {
        let k = grid.len();
        Self::nodal(grid, DMatrix::zeros(k, k)).expect("square")
    }

    pub fn identity(grid: Grid) -> Self {
        let k = grid.len();
        Self::nodal(grid, DMatrix::identity(k, k)).expect("square")
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn lift(&self) -> Option<&Lift> {
        match &self.space {
            Space::State { lift } => lift.as_ref(),
            Space::Nodal => None,
        }
    }

    /// Norm weights of the space the map acts on.
    pub fn weights(&self) -> Vec<f64> {
        match self.space {
            Space::Nodal => self.grid.trapezoid_weights(),
            Space::State { .. } => state_weights(self.grid),
        }
    }

    /// Same space and lift, new matrix.
    pub fn with_matrix(&self, matrix: DMatrix<f64>, maps_into_domain: bool) -> Result<Self> {
        let mut out = Self::checked(self.grid, matrix, self.space.clone())?;
        out.maps_into_domain = maps_into_domain;
        Ok(out)
    }

    /// `self - omega I`.
    pub fn shifted(&self, omega: f64) -> Self {
        let k = self.dim();
        let mut m = self.matrix.clone();
        for i in 0..k {
            m[(i, i)] -= omega;
        }
        Self {
            matrix: m,
            ..self.clone()
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            matrix: &self.matrix * c,
            ..self.clone()
        }
    }

    /// Coordinates of `g` in the space of the map.
    pub fn coords(&self, g: &GridFunction) -> Vec<Complex64> {
        match self.space {
            Space::Nodal => g.values().to_vec(),
            Space::State { .. } => g.interior().to_vec(),
        }
    }

    /// Grid function for coordinates `x`. In-domain vectors use the lift,
    /// anything else gets linearly extrapolated end values.
    pub fn to_grid_function(&self, x: &[Complex64], in_domain: bool) -> Result<GridFunction> {
        match &self.space {
            Space::Nodal => GridFunction::new(self.grid, x.to_vec()),
            Space::State { lift } => match lift {
                Some(l) if in_domain => GridFunction::new(self.grid, l.extend(x)),
                _ => GridFunction::from_interior(self.grid, x),
            },
        }
    }

    pub fn apply_coords(&self, x: &[Complex64]) -> Vec<Complex64> {
        mat_vec(&self.matrix, x)
    }

    pub fn apply(&self, g: &GridFunction) -> Result<GridFunction> {
        if g.grid() != self.grid {
            return Err(LabError::DimensionMismatch {
                expected: self.grid.cells(),
                got: g.grid().cells(),
            });
        }
        let y = self.apply_coords(&self.coords(g));
        self.to_grid_function(&y, self.maps_into_domain)
    }

    /// Weighted operator 2-norm.
    pub fn norm(&self) -> f64 {
        let w = self.weights();
        linalg::weighted_norm(&self.matrix, &w, &w)
    }

    /// Complex resolvent matrix `(lambda - M)^{-1}`.
    pub fn resolvent_matrix(&self, lambda: Complex64) -> Result<DMatrix<Complex64>> {
        let mut a = linalg::to_complex(&self.matrix).map(|x| -x);
        for i in 0..self.dim() {
            a[(i, i)] += lambda;
        }
        Ok(linalg::inverse_checked(a, lambda)?.0)
    }

    /// Weighted norm of `(lambda - M)^{-1}`, as the reciprocal of the
    /// smallest weighted singular value of `lambda - M`.
    pub fn resolvent_norm(&self, lambda: Complex64) -> f64 {
        let mut a = linalg::to_complex(&self.matrix).map(|x| -x);
        for i in 0..self.dim() {
            a[(i, i)] += lambda;
        }
        let w = self.weights();
        1.0 / linalg::weighted_min_singular(&a, &w, &w)
    }
}

/// Folds the two lifted end values into the adjacent interior rows.
pub fn generator_matrix(sys: &ExtendedSystem, bc: BoundaryCondition) -> Result<LinearMap> {
    let grid = sys.grid();
    let n = grid.cells();
    if n > DENSE_LIMIT {
        return Err(LabError::TooLargeForDense {
            n,
            limit: DENSE_LIMIT,
        });
    }
    let lift = sys.lift(bc)?;
    let k = n - 1;
    let ih2 = 1.0 / (grid.h() * grid.h());
    let mut m = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        m[(i, i)] = -2.0 * ih2;
        if i > 0 {
            m[(i, i - 1)] = ih2;
        }
        if i + 1 < k {
            m[(i, i + 1)] = ih2;
        }
    }
    for j in 0..k {
        m[(0, j)] += ih2 * lift.rows[(0, j)];
        m[(k - 1, j)] += ih2 * lift.rows[(1, j)];
    }
    LinearMap::state(grid, m, Some(lift))
}

/// Solution of `(lambda - A_m) g = 0`, `N g = 0`, `G g = 1` on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletMap {
    lambda: Complex64,
    profile: GridFunction,
    condition: f64,
    near_eigenvalue: Option<f64>,
}

impl DirichletMap {
    pub fn lambda(&self) -> Complex64 {
        self.lambda
    }

    /// Response to the unit boundary datum.
    pub fn profile(&self) -> &GridFunction {
        &self.profile
    }

    pub fn interior(&self) -> &[Complex64] {
        self.profile.interior()
    }

    /// Condition estimate `(|lambda| + ||A||) / dist(lambda, spectrum)`.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// Set when `lambda` is close to (but not on) a free eigenvalue.
    pub fn near_eigenvalue(&self) -> Option<f64> {
        self.near_eigenvalue
    }

    /// Defining residuals `(interior max, |N g|, |G g - 1|)`.
    pub fn residuals(&self, sys: &ExtendedSystem) -> (f64, f64, f64) {
        let v = self.profile.values();
        let interior = sys
            .apply_interior(v)
            .iter()
            .zip(&v[1..])
            .map(|(ag, g)| (self.lambda * g - ag).norm())
            .fold(0.0, f64::max);
        let neumann = sys.neumann_row().apply(v).norm();
        let g = (sys.g_row().apply(v) - 1.0).norm();
        (interior, neumann, g)
    }
}

/// Relative distance below which a Dirichlet solve is flagged as close to
/// the free spectrum.
pub const NEAR_SPECTRUM_WARNING: f64 = 1e-3;

/// Banded solve of the Dirichlet problem; works for grids far beyond
/// [`DENSE_LIMIT`].
pub fn dirichlet_map(sys: &ExtendedSystem, lambda: Complex64) -> Result<DirichletMap> {
    if !(lambda.re.is_finite() && lambda.im.is_finite()) {
        return Err(LabError::InvalidArgument(format!("non-finite lambda {lambda}")));
    }
    let grid = sys.grid();
    let n = grid.cells();
    let tri = sys.free_tridiagonal();
    let (nearest, dist) = tri.nearest(lambda);
    let condition = (lambda.norm() + tri.norm_bound()) / dist;
    if !condition.is_finite() || condition > linalg::MAX_CONDITION {
        return Err(LabError::NearSpectrum {
            lambda,
            nearest: re(nearest),
            condition,
        });
    }
    let near_eigenvalue =
        (dist <= NEAR_SPECTRUM_WARNING * lambda.norm().max(1.0)).then_some(nearest);

    let ih2 = 1.0 / (grid.h() * grid.h());
    let mut band = BandMatrix::zeros(n + 1, 2, 2);
    for j in 0..3 {
        band.set(0, j, re(sys.neumann_row().weights()[j]));
    }
    for j in 1..n {
        band.set(j, j - 1, re(-ih2));
        band.set(j, j, lambda + 2.0 * ih2);
        band.set(j, j + 1, re(-ih2));
    }
    for j in n - 2..=n {
        band.set(n, j, re(sys.g_row().weights()[j]));
    }
    let mut rhs = vec![ZERO; n + 1];
    rhs[n] = re(1.0);
    let values = band.solve(rhs).ok_or(LabError::NearSpectrum {
        lambda,
        nearest: re(nearest),
        condition: f64::INFINITY,
    })?;
    Ok(DirichletMap {
        lambda,
        profile: GridFunction::new(grid, values)?,
        condition,
        near_eigenvalue,
    })
}

/// `K` applied to the Dirichlet profile.
pub fn transfer_value(sys: &ExtendedSystem, lambda: Complex64) -> Result<Complex64> {
    Ok(sys.k_row().value(dirichlet_map(sys, lambda)?.profile()))
}

/// Solves `(lambda - M) x = f`.
pub fn resolvent_apply(map: &LinearMap, lambda: Complex64, f: &GridFunction) -> Result<GridFunction> {
    let r = map.resolvent_matrix(lambda)?;
    let x = cmat_vec(&r, &map.coords(f));
    map.to_grid_function(&x, true)
}

/// Residuals of the two closed-loop resolvent formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityResidual {
    /// `|| R(lambda, A_cl) - (I - D K)^{-1} R(lambda, A) ||`.
    pub multiplicative: f64,
    /// `|| R(lambda, A_cl) - R(lambda, A) - D (1 - K D)^{-1} K R(lambda, A) ||`.
    pub additive: f64,
    /// `K D_lambda`.
    pub transfer: Complex64,
}

impl IdentityResidual {
    pub fn max(&self) -> f64 {
        self.multiplicative.max(self.additive)
    }
}

/// Smallest `|1 - K D_lambda|` treated as invertible.
pub const FEEDBACK_TOLERANCE: f64 = 1e-12;

pub(crate) fn feedback_factor(sys: &ExtendedSystem, lambda: Complex64) -> Result<(DirichletMap, Complex64)> {
    let d = dirichlet_map(sys, lambda)?;
    let h = sys.k_row().value(d.profile());
    let gap = (1.0 - h).norm();
    if gap < FEEDBACK_TOLERANCE {
        return Err(LabError::FeedbackSingular { lambda, gap });
    }
    Ok((d, 1.0 / (1.0 - h)))
}

/// Compares the closed-loop resolvent with its expressions through free
/// objects: the inverse of the nodal matrix `I - D_lambda K` applied to the
/// lifted free resolvent, and the rank-one additive form. Both hold exactly
/// in exact arithmetic.
pub fn resolvent_identity_residual(sys: &ExtendedSystem, lambda: Complex64) -> Result<IdentityResidual> {
    let grid = sys.grid();
    let free = generator_matrix(sys, BoundaryCondition::Free)?;
    let closed = generator_matrix(sys, BoundaryCondition::ClosedLoop)?;
    let r_free = free.resolvent_matrix(lambda)?;
    let r_cl = closed.resolvent_matrix(lambda)?;
    let (d, inv_gap) = feedback_factor(sys, lambda)?;
    let transfer = 1.0 - 1.0 / inv_gap;

    let lift = free.lift().expect("generator has a lift");
    let e = linalg::to_complex(&lift.matrix());
    let y = &e * &r_free;
    let k = grid.interior_len();
    let np1 = grid.len();
    let dv = d.profile().values();
    let kw = sys.k_row().weights();

    let mut q = DMatrix::<Complex64>::identity(np1, np1);
    for i in 0..np1 {
        for j in 0..np1 {
            q[(i, j)] -= dv[i] * kw[j];
        }
    }
    let x = q.lu().solve(&y).ok_or(LabError::FeedbackSingular {
        lambda,
        gap: (1.0 / inv_gap).norm(),
    })?;
    let x_int = x.rows(1, k).into_owned();

    let ky = DVector::from_iterator(
        k,
        (0..k).map(|j| (0..np1).map(|i| y[(i, j)] * kw[i]).sum::<Complex64>()),
    );
    let d_int = DVector::from_column_slice(d.interior());
    let additive = &r_free + (d_int * inv_gap) * ky.transpose();

    let w = state_weights(grid);
    Ok(IdentityResidual {
        multiplicative: linalg::weighted_norm(&(&r_cl - x_int), &w, &w),
        additive: linalg::weighted_norm(&(&r_cl - additive), &w, &w),
        transfer,
    })
}

fn greiner_candidate(
    sys: &ExtendedSystem,
    lambda: Complex64,
    mu: Complex64,
    at: Complex64,
) -> Result<f64> {
    let d_lambda = dirichlet_map(sys, lambda)?;
    if lambda == mu {
        return Ok(0.0);
    }
    let d_mu = dirichlet_map(sys, mu)?;
    let free = generator_matrix(sys, BoundaryCondition::Free)?;
    let r = free.resolvent_matrix(at)?;
    let ri = cmat_vec(&r, d_mu.interior());
    let lifted = free.lift().expect("generator has a lift").extend(&ri);
    let values: Vec<Complex64> = d_mu
        .profile()
        .values()
        .iter()
        .zip(&lifted)
        .zip(d_lambda.profile().values())
        .map(|((dm, rl), dl)| dl - (dm - (lambda - mu) * rl))
        .collect();
    crate::grid::lp_norm(&GridFunction::new(sys.grid(), values)?, 2.0)
}

/// `|| D_lambda - (I - (lambda - mu) R(lambda, A)) D_mu ||_2` on the grid.
pub fn greiner_residual(sys: &ExtendedSystem, lambda: Complex64, mu: Complex64) -> Result<f64> {
    greiner_candidate(sys, lambda, mu, lambda)
}

/// Same expression with `R(mu, A)` in place of `R(lambda, A)`. This variant
/// is not an identity; it is kept as a diagnostic.
pub fn greiner_residual_mu_resolvent(sys: &ExtendedSystem, lambda: Complex64, mu: Complex64) -> Result<f64> {
    greiner_candidate(sys, lambda, mu, mu)
}

/// Nodal matrix of `g -> b g' + c g` with centered differences inside and
/// second-order one-sided differences at the ends.
pub fn perturbation_matrix(grid: Grid, b: &GridFunction, c: &GridFunction) -> Result<LinearMap> {
    for f in [b, c] {
        if f.grid() != grid {
            return Err(LabError::DimensionMismatch {
                expected: grid.cells(),
                got: f.grid().cells(),
            });
        }
        if f.values().iter().any(|v| v.im != 0.0) {
            return Err(LabError::InvalidArgument(
                "perturbation coefficients must be real".into(),
            ));
        }
    }
    let n = grid.cells();
    let s = 0.5 / grid.h();
    let mut m = DMatrix::<f64>::zeros(n + 1, n + 1);
    for j in 0..=n {
        let bj = b.values()[j].re;
        m[(j, j)] += c.values()[j].re;
        if bj == 0.0 {
            continue;
        }
        if j == 0 {
            m[(0, 0)] -= 3.0 * s * bj;
            m[(0, 1)] += 4.0 * s * bj;
            m[(0, 2)] -= s * bj;
        } else if j == n {
            m[(n, n)] += 3.0 * s * bj;
            m[(n, n - 1)] -= 4.0 * s * bj;
            m[(n, n - 2)] += s * bj;
        } else {
            m[(j, j - 1)] -= s * bj;
            m[(j, j + 1)] += s * bj;
        }
    }
    LinearMap::nodal(grid, m)
}

/// Generator `A_bc + P` on interior values: `P` acts on the lifted vector and
/// its interior rows are kept.
pub fn perturbed_generator(sys: &ExtendedSystem, bc: BoundaryCondition, p: &LinearMap) -> Result<LinearMap> {
    if !matches!(p.space(), Space::Nodal) || p.grid() != sys.grid() {
        return Err(LabError::InvalidArgument(
            "perturbation must be a nodal map on the system grid".into(),
        ));
    }
    let base = generator_matrix(sys, bc)?;
    let lift = base.lift().expect("generator has a lift").clone();
    let k = sys.grid().interior_len();
    let pe = p.matrix().rows(1, k) * lift.matrix();
    LinearMap::state(sys.grid(), base.matrix() + pe, Some(lift))
}

/// All eigenvalues, sorted by real part (descending), ties by imaginary part.
pub fn spectrum(map: &LinearMap) -> Result<Vec<Complex64>> {
    let k = map.dim();
    let schur = nalgebra::linalg::Schur::try_new(map.matrix().clone(), f64::EPSILON, 1000 * k.max(1))
        .ok_or(LabError::EigenFailure)?;
    let mut ev: Vec<Complex64> = schur.complex_eigenvalues().iter().copied().collect();
    if ev.iter().any(|z| !z.is_finite()) {
        return Err(LabError::EigenFailure);
    }
    ev.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    Ok(ev)
}

/// Largest real part of the spectrum.
pub fn spectral_abscissa(map: &LinearMap) -> Result<f64> {
    Ok(spectrum(map)?.first().map_or(f64::NEG_INFINITY, |z| z.re))
}

/// Second-order first derivative on all nodes.
pub fn grid_derivative(g: &GridFunction) -> GridFunction {
    let grid = g.grid();
    let n = grid.cells();
    let v = g.values();
    let s = 0.5 / grid.h();
    let values = (0..=n)
        .map(|j| {
            if j == 0 {
                (-3.0 * v[0] + 4.0 * v[1] - v[2]) * s
            } else if j == n {
                (3.0 * v[n] - 4.0 * v[n - 1] + v[n - 2]) * s
            } else {
                (v[j + 1] - v[j - 1]) * s
            }
        })
        .collect();
    GridFunction::new(grid, values).expect("finite differences of finite values")
}

/// Second derivative on all nodes; four-point one-sided formulas at the ends.
pub fn grid_second_derivative(g: &GridFunction) -> GridFunction {
    let grid = g.grid();
    let n = grid.cells();
    let v = g.values();
    let ih2 = 1.0 / (grid.h() * grid.h());
    let values = (0..=n)
        .map(|j| {
            if j == 0 {
                (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) * ih2
            } else if j == n {
                (2.0 * v[n] - 5.0 * v[n - 1] + 4.0 * v[n - 2] - v[n - 3]) * ih2
            } else {
                (v[j - 1] - 2.0 * v[j] + v[j + 1]) * ih2
            }
        })
        .collect();
    GridFunction::new(grid, values).expect("finite differences of finite values")
}
