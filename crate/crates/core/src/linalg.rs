//! Dense and banded linear-algebra helpers shared by the operator modules.

use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex64;

use crate::error::{LabError, Result};

/// Returns `W_out^{1/2} m W_in^{-1/2}` for diagonal weights.
pub fn weighted_matrix<T>(m: &DMatrix<T>, w_in: &[f64], w_out: &[f64]) -> DMatrix<T>
where
    T: ComplexField<RealField = f64>,
{
    assert_eq!(m.ncols(), w_in.len());
    assert_eq!(m.nrows(), w_out.len());
    let mut out = m.clone();
    for j in 0..m.ncols() {
        let cj = 1.0 / w_in[j].sqrt();
        for i in 0..m.nrows() {
            out[(i, j)] = out[(i, j)].clone() * T::from_real(w_out[i].sqrt() * cj);
        }
    }
    out
}

/// Operator norm from `l^2(w_in)` to `l^2(w_out)`: largest singular value of
/// the weighted matrix.
pub fn weighted_norm<T>(m: &DMatrix<T>, w_in: &[f64], w_out: &[f64]) -> f64
where
    T: ComplexField<RealField = f64>,
{
    if m.is_empty() {
        return 0.0;
    }
    weighted_matrix(m, w_in, w_out)
        .singular_values()
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// Smallest singular value of the weighted matrix.
pub fn weighted_min_singular<T>(m: &DMatrix<T>, w_in: &[f64], w_out: &[f64]) -> f64
where
    T: ComplexField<RealField = f64>,
{
    weighted_matrix(m, w_in, w_out)
        .singular_values()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|x| Complex64::new(x, 0.0))
}

fn norm1<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.clone().modulus()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Induced 1-norm (max column sum).
pub fn matrix_norm1(m: &DMatrix<f64>) -> f64 {
    norm1(m)
}

/// Largest condition number accepted by [`inverse_checked`].
pub const MAX_CONDITION: f64 = 1e12;

/// Inverse of `m` together with its 1-norm condition number. Fails with
/// [`LabError::Singular`] when the condition number exceeds [`MAX_CONDITION`];
/// `lambda` is only used to label the error.
pub fn inverse_checked<T>(m: DMatrix<T>, lambda: Complex64) -> Result<(DMatrix<T>, f64)>
where
    T: ComplexField<RealField = f64>,
{
    let a1 = norm1(&m);
    let inv = match m.lu().try_inverse() {
        Some(inv) => inv,
        None => {
            return Err(LabError::Singular {
                lambda,
                condition: f64::INFINITY,
            })
        }
    };
    let cond = a1 * norm1(&inv);
    if !cond.is_finite() || cond > MAX_CONDITION {
        return Err(LabError::Singular {
            lambda,
            condition: cond,
        });
    }
    Ok((inv, cond))
}

/// Banded matrix with `kl` sub- and `ku` super-diagonals, factored by
/// Gaussian elimination with partial pivoting.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<Complex64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        // room for pivoting fill: columns i - kl ..= i + kl + ku
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![Complex64::new(0.0, 0.0); n * width],
        }
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let off = j as isize - i as isize + self.kl as isize;
        (off >= 0 && (off as usize) < self.width).then(|| i * self.width + off as usize)
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        assert!(
            j + self.kl >= i && j <= i + self.ku,
            "entry ({i}, {j}) outside the band"
        );
        let k = self.slot(i, j).expect("entry inside the band");
        self.data[k] = v;
    }

    fn get(&self, i: usize, j: usize) -> Complex64 {
        self.slot(i, j).map_or(Complex64::new(0.0, 0.0), |k| self.data[k])
    }

    fn put(&mut self, i: usize, j: usize, v: Complex64) {
        if let Some(k) = self.slot(i, j) {
            self.data[k] = v;
        } else {
            debug_assert!(v.norm() == 0.0);
        }
    }

    /// Solves `self x = rhs`. Returns `None` on an exactly zero pivot.
    pub fn solve(mut self, mut rhs: Vec<Complex64>) -> Option<Vec<Complex64>> {
        let n = self.n;
        assert_eq!(rhs.len(), n);
        let reach = self.kl + self.ku;
        for k in 0..n {
            let last_row = (k + self.kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).norm();
            for i in k + 1..=last_row {
                let v = self.get(i, k).norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return None;
            }
            let last_col = (k + reach).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let a = self.get(k, j);
                    let b = self.get(p, j);
                    self.put(k, j, b);
                    self.put(p, j, a);
                }
                rhs.swap(k, p);
            }
            let pivot = self.get(k, k);
            for i in k + 1..=last_row {
                let factor = self.get(i, k) / pivot;
                if factor.norm() == 0.0 {
                    continue;
                }
                self.put(i, k, Complex64::new(0.0, 0.0));
                for j in k + 1..=last_col {
                    let v = self.get(i, j) - factor * self.get(k, j);
                    self.put(i, j, v);
                }
                rhs[i] = rhs[i] - factor * rhs[k];
            }
        }
        for k in (0..n).rev() {
            let last_col = (k + reach).min(n - 1);
            let mut acc = rhs[k];
            for j in k + 1..=last_col {
                acc -= self.get(k, j) * rhs[j];
            }
            rhs[k] = acc / self.get(k, k);
        }
        Some(rhs)
    }
}

/// Real symmetric tridiagonal matrix with Sturm-sequence eigenvalue location.
#[derive(Debug, Clone)]
pub struct SymTridiagonal {
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert_eq!(off.len() + 1, diag.len());
        Self { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = 1.0f64;
        for i in 0..self.diag.len() {
            let e2 = if i == 0 { 0.0 } else { self.off[i - 1] * self.off[i - 1] };
            q = self.diag[i] - x - if i == 0 { 0.0 } else { e2 / q };
            if q == 0.0 {
                q = -f64::EPSILON * (x.abs() + 1.0);
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Gershgorin interval containing the spectrum.
    pub fn bounds(&self) -> (f64, f64) {
        let n = self.diag.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.off[i - 1].abs();
            }
            if i + 1 < n {
                r += self.off[i].abs();
            }
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// `k`-th smallest eigenvalue (0-based) by bisection.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        assert!(k < self.len());
        let (mut lo, mut hi) = self.bounds();
        let scale = lo.abs().max(hi.abs()).max(1.0);
        lo -= 1e-12 * scale;
        hi += 1e-12 * scale;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Eigenvalue nearest to the complex point `z`, and its distance.
    pub fn nearest(&self, z: Complex64) -> (f64, f64) {
        let below = self.count_below(z.re);
        let mut best = (f64::NAN, f64::INFINITY);
        for k in [below.checked_sub(1), (below < self.len()).then_some(below)]
            .into_iter()
            .flatten()
        {
            let ev = self.eigenvalue(k);
            let d = (z - ev).norm();
            if d < best.1 {
                best = (ev, d);
            }
        }
        best
    }

    /// Largest absolute eigenvalue bound.
    pub fn norm_bound(&self) -> f64 {
        let (lo, hi) = self.bounds();
        lo.abs().max(hi.abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn band_solver_matches_dense() {
        let n = 12;
        let mut band = BandMatrix::zeros(n, 2, 2);
        let mut dense = DMatrix::<Complex64>::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(2)..=(i + 2).min(n - 1) {
                // small diagonal forces pivoting
                let v = if i == j {
                    Complex64::new(1e-3 * (i as f64 + 1.0), 0.1)
                } else {
                    Complex64::new((i * 7 + j * 3) as f64 % 5.0 - 2.0, 0.5 * j as f64)
                };
                band.set(i, j, v);
                dense[(i, j)] = v;
            }
        }
        let rhs: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let x = band.solve(rhs.clone()).unwrap();
        let xv = nalgebra::DVector::from_vec(x);
        let r = &dense * &xv - nalgebra::DVector::from_vec(rhs);
        assert!(r.norm() < 1e-10, "residual {}", r.norm());
    }

    #[test]
    fn band_solver_detects_zero_pivot() {
        let band = BandMatrix::zeros(5, 1, 1);
        assert!(band.solve(vec![c(1.0); 5]).is_none());
    }

    #[test]
    fn tridiagonal_eigenvalues_match_closed_form() {
        // second difference with Dirichlet ends: -4 sin^2(k pi / (2(n+1)))
        let n = 50;
        let t = SymTridiagonal::new(vec![-2.0; n], vec![1.0; n - 1]);
        for k in 0..n {
            let exact = -4.0
                * ((n - k) as f64 * std::f64::consts::PI / (2.0 * (n + 1) as f64))
                    .sin()
                    .powi(2);
            assert!((t.eigenvalue(k) - exact).abs() < 1e-12);
        }
        let (ev, d) = t.nearest(Complex64::new(-1.0, 0.5));
        assert!((0.5..0.6).contains(&d));
        assert!((ev + 1.0).abs() < 0.4);
    }

    #[test]
    fn weighted_norm_of_diagonal() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, -5.0, 1.0]));
        let w = [0.2, 0.5, 0.3];
        assert!((weighted_norm(&m, &w, &w) - 5.0).abs() < 1e-12);
        assert!((weighted_min_singular(&m, &w, &w) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_checked_rejects_singular() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(inverse_checked(m, c(0.0)).is_err());
        let (inv, cond) =
            inverse_checked(DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]), c(0.0)).unwrap();
        assert!((inv[(1, 1)] - 0.25).abs() < 1e-15);
        assert!((cond - 2.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn sturm_count_agrees_with_dense(d in prop::collection::vec(-5.0..5.0f64, 8), e in prop::collection::vec(-2.0..2.0f64, 7), x in -8.0..8.0f64) {
            let t = SymTridiagonal::new(d.clone(), e.clone());
            let mut m = DMatrix::<f64>::zeros(8, 8);
            for i in 0..8 {
                m[(i, i)] = d[i];
                if i < 7 {
                    m[(i, i + 1)] = e[i];
                    m[(i + 1, i)] = e[i];
                }
            }
            let eig = m.symmetric_eigenvalues();
            let dense = eig.iter().filter(|&&v| v < x).count();
            let near = eig.iter().any(|&v| (v - x).abs() < 1e-9);
            prop_assume!(!near);
            prop_assert_eq!(t.count_below(x), dense);
        }
    }
}
