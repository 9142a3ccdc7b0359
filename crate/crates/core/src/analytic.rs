//! Closed-form reference values for the heat example on `(0, 1)`.

use num_complex::Complex64;

use crate::error::{LabError, Result};

/// Principal square root with positive real part; rejects the cut `(-inf, 0]`.
fn root(lambda: Complex64) -> Result<Complex64> {
    if lambda.im == 0.0 && lambda.re <= 0.0 {
        return Err(LabError::InvalidArgument(format!(
            "lambda = {lambda} lies on the branch cut (-inf, 0]"
        )));
    }
    if !(lambda.re.is_finite() && lambda.im.is_finite()) {
        return Err(LabError::InvalidArgument(format!("non-finite lambda {lambda}")));
    }
    Ok(lambda.sqrt())
}

/// `cosh(r s) / sinh(r)` without overflow for large `Re r`.
fn cosh_over_sinh(r: Complex64, s: f64) -> Complex64 {
    if r.re > 1.0 {
        let num = (r * (s - 1.0)).exp() + (-r * (s + 1.0)).exp();
        num / (1.0 - (-2.0 * r).exp())
    } else {
        (r * s).cosh() / r.sinh()
    }
}

/// Profile of the Dirichlet map: the solution of `g'' = lambda g`, `g'(0) = 0`,
/// `g'(1) = 1`, namely `cosh(sqrt(lambda) s) / (sqrt(lambda) sinh(sqrt(lambda)))`.
pub fn dirichlet_closed_form(lambda: Complex64, s: f64) -> Result<Complex64> {
    let r = root(lambda)?;
    Ok(cosh_over_sinh(r, s) / r)
}

/// Derivative in `s` of [`dirichlet_closed_form`].
pub fn dirichlet_closed_form_derivative(lambda: Complex64, s: f64) -> Result<Complex64> {
    let r = root(lambda)?;
    if r.re > 1.0 {
        let num = (r * (s - 1.0)).exp() - (-r * (s + 1.0)).exp();
        Ok(num / (1.0 - (-2.0 * r).exp()))
    } else {
        Ok((r * s).sinh() / r.sinh())
    }
}

/// Transfer function `g(1) - g(0)` of the Dirichlet profile:
/// `(cosh(sqrt(lambda)) - 1) / (sqrt(lambda) sinh(sqrt(lambda)))`.
pub fn transfer_closed_form(lambda: Complex64) -> Result<Complex64> {
    Ok(dirichlet_closed_form(lambda, 1.0)? - dirichlet_closed_form(lambda, 0.0)?)
}

/// `L^2(0,1)` norm of the Dirichlet profile for real `lambda > 0`.
pub fn dirichlet_l2_norm(lambda: f64) -> Result<f64> {
    if lambda <= 0.0 {
        return Err(LabError::InvalidArgument(format!("need lambda > 0, got {lambda}")));
    }
    let a = lambda.sqrt();
    // int_0^1 cosh^2(a s) ds = 1/2 + sinh(2a) / (4a)
    let e = (-2.0 * a).exp();
    // divide numerator and denominator by e^{2a}/4 to stay finite
    let num = 2.0 * e + (1.0 - e * e) / (2.0 * a);
    let den = (1.0 - e) * (1.0 - e);
    Ok((num / den).sqrt() / a)
}

/// Characteristic function whose positive roots give the non-trivial
/// closed-loop eigenvalues `-nu^2` off the branch `nu = 2 k pi`.
pub fn closed_loop_characteristic(nu: f64) -> f64 {
    nu * nu.sin() - (1.0 - nu.cos())
}

/// Smallest positive root of `tan(nu / 2) = nu`, by bisection on `[2, 3]`.
pub fn nu_star() -> f64 {
    let (mut lo, mut hi) = (2.0f64, 3.0f64);
    let f_lo = closed_loop_characteristic(lo);
    debug_assert!(f_lo > 0.0 && closed_loop_characteristic(hi) < 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (closed_loop_characteristic(mid) > 0.0) == (f_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// First three closed-loop eigenvalues of the continuous problem: `0, -nu*^2, -4 pi^2`.
pub fn closed_loop_leading_eigenvalues() -> [f64; 3] {
    let nu = nu_star();
    let two_pi = 2.0 * std::f64::consts::PI;
    [0.0, -nu * nu, -two_pi * two_pi]
}

/// First three Neumann eigenvalues: `0, -pi^2, -4 pi^2`.
pub fn neumann_leading_eigenvalues() -> [f64; 3] {
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    [0.0, -pi2, -4.0 * pi2]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn closed_form_values_at_one() {
        let one = c(1.0);
        let d1 = dirichlet_closed_form(one, 1.0).unwrap();
        let d0 = dirichlet_closed_form(one, 0.0).unwrap();
        assert!((d1.re - 1.0f64.cosh() / 1.0f64.sinh()).abs() < 1e-15);
        assert!((d1.re - 1.31304).abs() < 1e-5);
        assert!((d0.re - 0.85092).abs() < 1e-5);
        let h = transfer_closed_form(one).unwrap();
        assert!((h.re - 0.46212).abs() < 1e-5);
        assert!(((1.0 - h.re).recip() - 1.8592).abs() < 1e-4);
    }

    #[test]
    fn derivative_at_right_end_is_one() {
        for lam in [c(0.5), c(1.0), Complex64::new(2.0, 3.0), c(1e4), Complex64::new(-5.0, 40.0)] {
            let d = dirichlet_closed_form_derivative(lam, 1.0).unwrap();
            assert!((d - 1.0).norm() < 1e-12, "{lam}: {d}");
            assert!(dirichlet_closed_form_derivative(lam, 0.0).unwrap().norm() < 1e-12);
        }
    }

    #[test]
    fn overflow_safe_branch_matches_direct_formula() {
        let lam = Complex64::new(3.0, 2.0);
        let r = lam.sqrt();
        for s in [0.0, 0.3, 1.0] {
            let direct = (r * s).cosh() / (r * r.sinh());
            assert!((dirichlet_closed_form(lam, s).unwrap() - direct).norm() < 1e-14);
        }
        assert!(dirichlet_closed_form(c(1e12), 1.0).unwrap().is_finite());
    }

    #[test]
    fn branch_cut_rejected() {
        assert!(dirichlet_closed_form(c(-1.0), 0.5).is_err());
        assert!(dirichlet_closed_form(c(0.0), 0.5).is_err());
    }

    #[test]
    fn l2_norm_matches_quadrature() {
        for lam in [0.3, 1.0, 50.0, 1e4] {
            let n = 200_000;
            let mut acc = 0.0;
            for j in 0..=n {
                let s = j as f64 / n as f64;
                let w = if j == 0 || j == n { 0.5 } else { 1.0 };
                acc += w * dirichlet_closed_form(c(lam), s).unwrap().norm_sqr();
            }
            let quad = (acc / n as f64).sqrt();
            let exact = dirichlet_l2_norm(lam).unwrap();
            assert!((quad - exact).abs() < 1e-6 * exact, "{lam}: {quad} vs {exact}");
        }
    }

    #[test]
    fn nu_star_root() {
        let nu = nu_star();
        assert!((nu - 2.3311).abs() < 1e-4);
        assert!(((nu / 2.0).tan() - nu).abs() < 1e-12);
        // cos(nu s) satisfies g'(1) = g(1) - g(0)
        let lhs = -nu * nu.sin();
        let rhs = nu.cos() - 1.0;
        assert!((lhs - rhs).abs() < 1e-14);
    }
}
