//! Fundamental solution of `-Δ - λ` in three dimensions.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::Point3;

const FOUR_PI: f64 = 4.0 * PI;

/// Square root with `Im ≥ 0`; on the non-negative real axis, `Re ≥ 0`.
pub fn sqrt_branch(lambda: Complex64) -> Complex64 {
    if lambda.im == 0.0 && lambda.re < 0.0 {
        return Complex64::new(0.0, (-lambda.re).sqrt());
    }
    let k = lambda.sqrt();
    if k.im < 0.0 || (k.im == 0.0 && k.re < 0.0) {
        -k
    } else {
        k
    }
}

/// Energy `λ` together with its wavenumber `k = √λ`, `Im k ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPoint {
    lambda: Complex64,
    k: Complex64,
}

impl SpectralPoint {
    pub fn new(lambda: Complex64) -> Self {
        Self {
            lambda,
            k: sqrt_branch(lambda),
        }
    }

    pub fn real(lambda: f64) -> Self {
        Self::new(Complex64::new(lambda, 0.0))
    }

    pub fn lambda(&self) -> Complex64 {
        self.lambda
    }

    pub fn wavenumber(&self) -> Complex64 {
        self.k
    }

    /// True iff `λ` is real and negative: the kernel is then the real Yukawa kernel.
    pub fn is_real_negative(&self) -> bool {
        self.lambda.im == 0.0 && self.lambda.re < 0.0
    }

    /// `e^{ikr}`.
    #[inline]
    pub fn phase(&self, r: f64) -> Complex64 {
        let decay = (-self.k.im * r).exp();
        if self.k.re == 0.0 {
            Complex64::new(decay, 0.0)
        } else {
            let (s, c) = (self.k.re * r).sin_cos();
            Complex64::new(decay * c, decay * s)
        }
    }

    /// `G` as a function of the distance `r > 0`.
    #[inline]
    pub fn green_r(&self, r: f64) -> Complex64 {
        self.phase(r) / (FOUR_PI * r)
    }

    /// Radial factor `g(r)` with `∇_y G(x, y) = g(r)·(x − y)`,
    /// i.e. `e^{ikr}(1 − ikr)/(4π r³)`.
    #[inline]
    pub fn grad_factor_r(&self, r: f64) -> Complex64 {
        let ikr = Complex64::new(-self.k.im * r, self.k.re * r);
        self.phase(r) * (Complex64::new(1.0, 0.0) - ikr) / (FOUR_PI * r * r * r)
    }
}

/// `G(λ; x, y) = e^{ik|x−y|}/(4π|x−y|)`.
pub fn green(sp: &SpectralPoint, x: &Point3, y: &Point3) -> Result<Complex64> {
    let r = (x - y).norm();
    if r == 0.0 {
        return Err(Error::SingularEvaluation);
    }
    Ok(sp.green_r(r))
}

/// `∇_y G(λ; x, y)`; its dot product with `ν(y)` is the double-layer kernel.
pub fn green_grad_y(sp: &SpectralPoint, x: &Point3, y: &Point3) -> Result<[Complex64; 3]> {
    let d = x - y;
    let r = d.norm();
    if r == 0.0 {
        return Err(Error::SingularEvaluation);
    }
    let g = sp.grad_factor_r(r);
    Ok([g * d.x, g * d.y, g * d.z])
}

/// Diagnostic: whether the kernel is real (Yukawa) at this spectral point.
pub fn green_is_real_for_negative_lambda(sp: &SpectralPoint) -> bool {
    sp.is_real_negative()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn branch_examples() {
        assert_eq!(sqrt_branch(c(-1.0, 0.0)), c(0.0, 1.0));
        assert_eq!(sqrt_branch(c(4.0, 0.0)), c(2.0, 0.0));
        let k = sqrt_branch(c(-8.955, 0.0));
        assert_eq!(k.re, 0.0);
        assert!((k.im - 2.9925).abs() <= 1e-4);
        // just below the positive axis the principal root has Im < 0
        let k = sqrt_branch(c(4.0, -1e-3));
        assert!(k.im >= 0.0);
        assert!(k.re < 0.0);
    }

    #[test]
    fn branch_squares_back() {
        for &(re, im) in &[(-3.0, 0.5), (-3.0, -0.5), (2.0, 1.0), (2.0, -1.0), (0.0, -2.0)] {
            let z = c(re, im);
            let k = sqrt_branch(z);
            assert!(k.im >= 0.0);
            assert!((k * k - z).norm() <= 1e-14 * z.norm());
        }
    }

    #[test]
    fn green_values() {
        let x = Point3::new(0.0, 0.0, 0.0);
        let y = Point3::new(1.0, 0.0, 0.0);
        let g0 = green(&SpectralPoint::real(0.0), &x, &y).unwrap();
        assert_relative_eq!(g0.re, 1.0 / (4.0 * PI), epsilon = 1e-16);
        assert_relative_eq!(g0.re, 0.0795775, epsilon = 1e-7);
        let g1 = green(&SpectralPoint::real(-1.0), &x, &y).unwrap();
        assert_relative_eq!(g1.re, (-1.0f64).exp() / (4.0 * PI), epsilon = 1e-16);
        assert_eq!(g1.im, 0.0);
        assert!(matches!(green(&SpectralPoint::real(-1.0), &x, &x), Err(Error::SingularEvaluation)));
        assert!(green_grad_y(&SpectralPoint::real(-1.0), &x, &x).is_err());
    }

    #[test]
    fn laplace_double_layer() {
        let sp = SpectralPoint::real(0.0);
        let x = Point3::new(0.3, -0.2, 0.9);
        let y = Point3::new(-0.1, 0.4, 0.2);
        let nu = Point3::new(1.0, 2.0, 2.0) / 3.0;
        let g = green_grad_y(&sp, &x, &y).unwrap();
        let d = x - y;
        let dl = g[0] * nu.x + g[1] * nu.y + g[2] * nu.z;
        assert_relative_eq!(dl.re, d.dot(&nu) / (4.0 * PI * d.norm().powi(3)), epsilon = 1e-15);
        // x − y ⟂ ν
        let nu_perp = Point3::new(0.0, 0.0, 1.0);
        let x2 = y + Point3::new(0.5, 0.5, 0.0);
        let g = green_grad_y(&SpectralPoint::real(-3.0), &x2, &y).unwrap();
        assert_eq!(g[2] * nu_perp.z, c(0.0, 0.0));
    }

    #[test]
    fn gradient_matches_central_difference() {
        let x = Point3::new(0.2, 0.1, -0.3);
        let dir = Point3::new(0.6, -0.48, 0.64);
        let y = x - dir; // r = 1
        let h = 1e-5;
        for sp in [SpectralPoint::real(-4.0), SpectralPoint::new(c(-3.0, 0.7)), SpectralPoint::real(2.0)] {
            let g = green_grad_y(&sp, &x, &y).unwrap();
            for k in 0..3 {
                let mut e = Point3::zeros();
                e[k] = h;
                let fd = (green(&sp, &x, &(y + e)).unwrap() - green(&sp, &x, &(y - e)).unwrap())
                    / (2.0 * h);
                assert!((fd - g[k]).norm() <= 1e-6, "{k}: {fd} vs {}", g[k]);
            }
        }
    }

    #[test]
    fn helmholtz_equation_residual() {
        let y = Point3::zeros();
        let x = Point3::new(0.48, 0.6, 0.64); // r = 1
        let h = 1e-3;
        for sp in [SpectralPoint::real(-6.25), SpectralPoint::new(c(-2.0, 0.5))] {
            let f = |p: Point3| green(&sp, &p, &y).unwrap();
            let mut lap = -6.0 * f(x);
            for k in 0..3 {
                let mut e = Point3::zeros();
                e[k] = h;
                lap += f(x + e) + f(x - e);
            }
            lap /= h * h;
            let residual = -lap - sp.lambda() * f(x);
            assert!(residual.norm() <= 1e-4, "{residual}");
        }
    }

    #[test]
    fn decay_bound() {
        let x = Point3::zeros();
        for &r in &[0.1, 1.0, 3.0] {
            let y = Point3::new(r, 0.0, 0.0);
            let sp = SpectralPoint::new(c(-2.0, 1.5));
            let bound = (-sp.wavenumber().im * r).exp() / (4.0 * PI * r);
            assert!(green(&sp, &x, &y).unwrap().norm() <= bound * (1.0 + 1e-15));
            let real = SpectralPoint::real(-2.0);
            let bound = (-real.wavenumber().im * r).exp() / (4.0 * PI * r);
            assert_relative_eq!(green(&real, &x, &y).unwrap().re, bound, epsilon = 1e-16);
        }
    }

    #[test]
    fn real_negative_diagnostic() {
        assert!(green_is_real_for_negative_lambda(&SpectralPoint::real(-6.25)));
        assert!(!green_is_real_for_negative_lambda(&SpectralPoint::real(1.0)));
        assert!(!green_is_real_for_negative_lambda(&SpectralPoint::new(c(-1.0, 0.1))));
    }

    #[test]
    fn conjugation_symmetry() {
        let x = Point3::new(0.1, 0.2, 0.3);
        let y = Point3::new(-0.4, 0.0, 0.5);
        let z = c(-3.0, 0.2);
        let a = green(&SpectralPoint::new(z), &x, &y).unwrap();
        let b = green(&SpectralPoint::new(z.conj()), &x, &y).unwrap();
        assert_relative_eq!(a.re, b.re, epsilon = 1e-16);
        assert_relative_eq!(a.im, -b.im, epsilon = 1e-16);
    }
}
