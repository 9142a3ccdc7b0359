//! Uniform grids on the unit interval, nodal grid functions, time grids and
//! time-sampled signals, together with the discrete `L^p` and Bochner norms.
//!
//! Norms use the composite trapezoid rule on `|g|^p`, so constants have unit
//! norm for every `p` and smooth functions are integrated to second order.

use num_complex::Complex64;

use crate::error::{LabError, Result};

/// Smallest admissible number of cells.
pub const MIN_CELLS: usize = 8;
/// Smallest admissible number of time steps.
pub const MIN_STEPS: usize = 8;

/// Uniform grid with `n` cells on `[0, 1]`; nodes `s_j = j / n`, `j = 0..=n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid {
    n: usize,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n < MIN_CELLS {
            return Err(LabError::GridTooCoarse { n, min: MIN_CELLS });
        }
        Ok(Self { n })
    }

    /// Number of cells.
    pub fn cells(&self) -> usize {
        self.n
    }

    /// Number of nodes, `n + 1`.
    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of interior nodes, `n - 1`.
    pub fn interior_len(&self) -> usize {
        self.n - 1
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 / self.n as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n).map(move |j| self.node(j))
    }

    /// Trapezoid weights over all nodes.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let h = self.h();
        let mut w = vec![h; self.len()];
        w[0] = 0.5 * h;
        w[self.n] = 0.5 * h;
        w
    }
}

/// Shorthand for [`Grid::new`].
pub fn make_grid(n: usize) -> Result<Grid> {
    Grid::new(n)
}

/// Complex nodal values on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(LabError::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(LabError::NonFinite { index });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn constant(grid: Grid, c: Complex64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Samples a real function at the nodes.
    pub fn from_real_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid,
            values: grid.nodes().map(|s| Complex64::new(f(s), 0.0)).collect(),
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> Complex64) -> Self {
        Self {
            grid,
            values: grid.nodes().map(f).collect(),
        }
    }

    /// Builds a grid function from interior values, filling both end nodes by
    /// linear extrapolation. Used for elements of `X` that carry no boundary
    /// condition of their own.
    pub fn from_interior(grid: Grid, interior: &[Complex64]) -> Result<Self> {
        if interior.len() != grid.interior_len() {
            return Err(LabError::DimensionMismatch {
                expected: grid.interior_len(),
                got: interior.len(),
            });
        }
        let k = interior.len();
        let mut values = Vec::with_capacity(grid.len());
        values.push(2.0 * interior[0] - interior[1]);
        values.extend_from_slice(interior);
        values.push(2.0 * interior[k - 1] - interior[k - 2]);
        Self::new(grid, values)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn interior(&self) -> &[Complex64] {
        &self.values[1..self.grid.cells()]
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

pub(crate) fn check_exponent(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        return Err(LabError::InvalidExponent(p));
    }
    Ok(())
}

/// `(sum_j w_j |v_j|^p)^(1/p)`, or `max |v_j|` when `p` is infinite.
pub(crate) fn weighted_lp(values: &[Complex64], weights: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    }
    let sum: f64 = values
        .iter()
        .zip(weights)
        .map(|(v, w)| w * v.norm().powf(p))
        .sum();
    sum.powf(1.0 / p)
}

/// Discrete `L^p(0,1)` norm of a grid function (composite trapezoid on `|g|^p`).
pub fn lp_norm(g: &GridFunction, p: f64) -> Result<f64> {
    check_exponent(p)?;
    Ok(weighted_lp(&g.values, &g.grid.trapezoid_weights(), p))
}

/// Uniform time grid on `[0, T]` with `m` steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    m: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, m: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(LabError::InvalidArgument(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if m < MIN_STEPS {
            return Err(LabError::TimeGridTooCoarse { m, min: MIN_STEPS });
        }
        Ok(Self { horizon, m })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.m
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.m as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.m {
            self.horizon
        } else {
            k as f64 * self.dt()
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.m).map(move |k| self.time(k))
    }

    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let dt = self.dt();
        let mut w = vec![dt; self.m + 1];
        w[0] = 0.5 * dt;
        w[self.m] = 0.5 * dt;
        w
    }
}

/// Grid functions sampled at the nodes of a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSignal {
    timegrid: TimeGrid,
    frames: Vec<GridFunction>,
}

impl TimeSignal {
    pub fn new(timegrid: TimeGrid, frames: Vec<GridFunction>) -> Result<Self> {
        if frames.len() != timegrid.steps() + 1 {
            return Err(LabError::DimensionMismatch {
                expected: timegrid.steps() + 1,
                got: frames.len(),
            });
        }
        let grid = frames[0].grid();
        if frames.iter().any(|f| f.grid() != grid) {
            return Err(LabError::InvalidArgument(
                "frames live on different grids".into(),
            ));
        }
        Ok(Self { timegrid, frames })
    }

    pub fn zeros(timegrid: TimeGrid, grid: Grid) -> Self {
        Self {
            timegrid,
            frames: vec![GridFunction::zeros(grid); timegrid.steps() + 1],
        }
    }

    /// Samples `f(t, s)` on the space-time grid.
    pub fn from_fn(timegrid: TimeGrid, grid: Grid, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let frames = timegrid
            .times()
            .map(|t| GridFunction::from_fn(grid, |s| f(t, s)))
            .collect();
        Self { timegrid, frames }
    }

    pub fn from_real_fn(timegrid: TimeGrid, grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        Self::from_fn(timegrid, grid, |t, s| Complex64::new(f(t, s), 0.0))
    }

    pub fn timegrid(&self) -> TimeGrid {
        self.timegrid
    }

    pub fn grid(&self) -> Grid {
        self.frames[0].grid()
    }

    pub fn frames(&self) -> &[GridFunction] {
        &self.frames
    }

    pub fn frame(&self, k: usize) -> &GridFunction {
        &self.frames[k]
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            timegrid: self.timegrid,
            frames: self
                .frames
                .iter()
                .zip(&other.frames)
                .map(|(a, b)| a.sub(b))
                .collect(),
        }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            timegrid: self.timegrid,
            frames: self.frames.iter().map(|f| f.scale(c)).collect(),
        }
    }

    /// Largest nodal modulus over all frames.
    pub fn max_abs(&self) -> f64 {
        self.frames.iter().map(|f| f.max_abs()).fold(0.0, f64::max)
    }
}

/// Discrete `L^p([0,T], L^p(0,1))` norm: trapezoid in time of the frame norms to the power `p`.
pub fn bochner_norm(sig: &TimeSignal, p: f64) -> Result<f64> {
    check_exponent(p)?;
    let frame_norms = sig
        .frames
        .iter()
        .map(|g| lp_norm(g, p))
        .collect::<Result<Vec<_>>>()?;
    Ok(time_lp(&frame_norms, &sig.timegrid, p))
}

/// Trapezoid-in-time `L^p` norm of a sequence of frame norms.
pub(crate) fn time_lp(frame_norms: &[f64], tg: &TimeGrid, p: f64) -> f64 {
    if p.is_infinite() {
        return frame_norms.iter().copied().fold(0.0, f64::max);
    }
    let w = tg.trapezoid_weights();
    let sum: f64 = frame_norms
        .iter()
        .zip(&w)
        .map(|(v, w)| w * v.powf(p))
        .sum();
    sum.powf(1.0 / p)
}

/// Second-order time derivative: central differences inside, one-sided
/// three-point formulas at both ends.
pub fn time_derivative(sig: &TimeSignal) -> TimeSignal {
    let m = sig.timegrid.steps();
    let dt = sig.timegrid.dt();
    let grid = sig.grid();
    let f = &sig.frames;
    let combine = |terms: &[(f64, usize)]| -> GridFunction {
        let values = (0..grid.len())
            .map(|i| {
                terms
                    .iter()
                    .map(|&(c, k)| f[k].values[i] * c)
                    .sum::<Complex64>()
            })
            .collect();
        GridFunction { grid, values }
    };
    let inv = 1.0 / (2.0 * dt);
    let mut frames = Vec::with_capacity(m + 1);
    frames.push(combine(&[(-3.0 * inv, 0), (4.0 * inv, 1), (-inv, 2)]));
    for k in 1..m {
        frames.push(combine(&[(-inv, k - 1), (inv, k + 1)]));
    }
    frames.push(combine(&[(inv, m - 2), (-4.0 * inv, m - 1), (3.0 * inv, m)]));
    TimeSignal {
        timegrid: sig.timegrid,
        frames,
    }
}
