//! Reference eigenvalues on the unit ball from half-integer order modified
//! Bessel functions.
//!
//! Spherical functions follow the Abramowitz–Stegun convention
//! `i_l(x) = √(π/(2x)) I_{l+1/2}(x)`, `k_l(x) = √(π/(2x)) K_{l+1/2}(x)`, so
//! `k_0(x) = (π/2) e^{−x}/x` and `i_l k_l' − i_l' k_l = −π/(2x²)`.
//!
//! For an eigenfunction `f = a·i_l(κr)` inside and `b·k_l(κr)` outside,
//! `λ = −κ²`:
//! * δ interaction (`γf` continuous, `∂_ν f_e − ∂_ν f_i = α γf`):
//!   `1 + α I_{l+1/2}(κ) K_{l+1/2}(κ) = 0`, solvable iff `2l + 1 < −α`.
//! * δ' interaction (`∂_ν f` continuous, `γf_e − γf_i = β ∂_ν f`): eliminating
//!   `b` with the Wronskian gives `β⁻¹ + μ_l(κ) = 0`,
//!   `μ_l(κ) = −(2/π) κ³ i_l'(κ) k_l'(κ)`. This condition is derived here,
//!   not quoted, and is cross-checked by the 2×2 matching determinant.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};

pub const MAX_BESSEL_ORDER: usize = 10;

/// Above this argument the scaled functions come from upward recurrence on
/// the elementary closed forms instead of the power series.
const SERIES_LIMIT: f64 = 50.0;

/// Exponentially scaled spherical modified Bessel values at one argument:
/// `e^{−x} i_l`, `e^{−x} i_l'`, `e^{x} k_l`, `e^{x} k_l'` for `l = 0..=l_max`.
#[derive(Debug, Clone)]
pub struct ScaledSpherical {
    pub x: f64,
    pub i: Vec<f64>,
    pub di: Vec<f64>,
    pub k: Vec<f64>,
    pub dk: Vec<f64>,
}

fn check_argument(l: usize, x: f64) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("Bessel argument must be positive and finite, got {x}")));
    }
    if l > MAX_BESSEL_ORDER {
        return Err(Error::Domain(format!(
            "Bessel order l = {l} exceeds the supported maximum {MAX_BESSEL_ORDER}"
        )));
    }
    Ok(())
}

/// `i_l(x)` by its power series `x^l Σ_m (x²/2)^m / (m! (2l+2m+1)!!)`;
/// every term is positive, so there is no cancellation.
fn i_series(l: usize, x: f64) -> f64 {
    let mut lead = 1.0;
    for j in 0..l {
        lead *= x / (2 * j + 3) as f64;
    }
    let y = 0.5 * x * x;
    let mut term = lead;
    let mut sum = term;
    for m in 1..1000 {
        term *= y / (m as f64 * (2 * l + 2 * m + 1) as f64);
        sum += term;
        if term <= 1e-17 * sum {
            break;
        }
    }
    sum
}

/// Scaled values and derivatives for all orders up to `l_max`.
pub fn scaled_spherical(l_max: usize, x: f64) -> Result<ScaledSpherical> {
    check_argument(l_max, x)?;
    let n = l_max + 2;
    let mut i = vec![0.0; n];
    let mut k = vec![0.0; n];
    // k̂_0 = (π/2)/x, k̂_1 = (π/2)(1/x + 1/x²), k_{l+1} = k_{l−1} + (2l+1)/x k_l
    k[0] = 0.5 * PI / x;
    k[1] = 0.5 * PI * (1.0 / x + 1.0 / (x * x));
    for l in 1..n - 1 {
        k[l + 1] = k[l - 1] + (2 * l + 1) as f64 / x * k[l];
    }
    if x <= SERIES_LIMIT {
        let scale = (-x).exp();
        for (l, v) in i.iter_mut().enumerate() {
            *v = i_series(l, x) * scale;
        }
    } else {
        let e = (-2.0 * x).exp();
        i[0] = (1.0 - e) / (2.0 * x);
        i[1] = (1.0 + e) / (2.0 * x) - (1.0 - e) / (2.0 * x * x);
        for l in 1..n - 1 {
            i[l + 1] = i[l - 1] - (2 * l + 1) as f64 / x * i[l];
        }
    }
    let mut di = vec![0.0; n - 1];
    let mut dk = vec![0.0; n - 1];
    di[0] = i[1];
    dk[0] = -k[1];
    for l in 1..n - 1 {
        di[l] = i[l - 1] - (l + 1) as f64 / x * i[l];
        dk[l] = -k[l - 1] - (l + 1) as f64 / x * k[l];
    }
    i.truncate(n - 1);
    k.truncate(n - 1);
    Ok(ScaledSpherical { x, i, di, k, dk })
}

/// Spherical modified Bessel values `(i_l, k_l, i_l', k_l')` at `x`.
pub fn spherical_bessel(l: usize, x: f64) -> Result<(f64, f64, f64, f64)> {
    let s = scaled_spherical(l, x)?;
    let up = x.exp();
    let down = (-x).exp();
    Ok((s.i[l] * up, s.k[l] * down, s.di[l] * up, s.dk[l] * down))
}

/// `(I_{l+1/2}(x), K_{l+1/2}(x))`.
pub fn bessel_half(l: usize, x: f64) -> Result<(f64, f64)> {
    let (i, k, _, _) = spherical_bessel(l, x)?;
    let factor = (2.0 * x / PI).sqrt();
    Ok((factor * i, factor * k))
}

/// Single-layer symbol on the unit sphere, `σ_l(κ) = I_{l+1/2}(κ) K_{l+1/2}(κ)`:
/// the eigenvalue of `S(−κ²)` on degree-`l` spherical harmonics.
pub fn single_layer_sphere_symbol(l: usize, kappa: f64) -> Result<f64> {
    let s = scaled_spherical(l, kappa)?;
    Ok(2.0 * kappa / PI * s.i[l] * s.k[l])
}

/// Hypersingular symbol on the unit sphere, `μ_l(κ) = −(2/π) κ³ i_l'(κ) k_l'(κ)`:
/// the eigenvalue of `R(−κ²)` on degree-`l` spherical harmonics.
pub fn hypersingular_sphere_symbol(l: usize, kappa: f64) -> Result<f64> {
    let s = scaled_spherical(l, kappa)?;
    Ok(-2.0 / PI * kappa.powi(3) * s.di[l] * s.dk[l])
}

/// Which sphere condition an eigenvalue solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SphereCondition {
    Delta,
    /// Derived radial-matching condition; flagged in reports.
    DeltaPrimeDerived,
}

/// Eigenvalue `λ = −κ²` of multiplicity `2l + 1` on the unit ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SphereEigenvalue {
    pub l: usize,
    pub kappa: f64,
    pub lambda: f64,
    pub multiplicity: usize,
    /// Absolute residual of the defining condition at the returned root.
    pub residual: f64,
    pub condition: SphereCondition,
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let mut f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::RootNotFound(format!("no sign change on [{lo}, {hi}]")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-15 * hi {
            break;
        }
        let f_mid = f(mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// The δ eigenvalue of degree `l`; requires `α < 0` and `2l + 1 < −α`.
pub fn delta_sphere_root(alpha: f64, l: usize) -> Result<SphereEigenvalue> {
    if !(alpha < 0.0) {
        return Err(Error::Domain(format!("alpha must be negative, got {alpha}")));
    }
    if (2 * l + 1) as f64 >= -alpha {
        return Err(Error::RootNotFound(format!(
            "no delta eigenvalue for l = {l}: needs 2l+1 < -alpha = {}",
            -alpha
        )));
    }
    let condition = |kappa: f64| Ok(1.0 + alpha * single_layer_sphere_symbol(l, kappa)?);
    let kappa = bisect(1e-8, -alpha, condition)?;
    Ok(SphereEigenvalue {
        l,
        kappa,
        lambda: -kappa * kappa,
        multiplicity: 2 * l + 1,
        residual: condition(kappa)?.abs(),
        condition: SphereCondition::Delta,
    })
}

/// All δ eigenvalues with `l ≤ l_max`, ordered by `l` (and hence by `λ`).
pub fn delta_sphere_eigs(alpha: f64, l_max: usize) -> Result<Vec<SphereEigenvalue>> {
    if !(alpha < 0.0) {
        return Err(Error::Domain(format!("alpha must be negative, got {alpha}")));
    }
    (0..=l_max.min(MAX_BESSEL_ORDER))
        .filter(|&l| ((2 * l + 1) as f64) < -alpha)
        .map(|l| delta_sphere_root(alpha, l))
        .collect()
}

/// `lim_{κ→0} μ_l(κ) = l(l+1)/(2l+1)`; a δ' root of degree `l` exists iff
/// this is below `−β⁻¹`.
pub fn hypersingular_symbol_at_zero(l: usize) -> f64 {
    (l * (l + 1)) as f64 / (2 * l + 1) as f64
}

/// The δ' eigenvalue of degree `l` from the derived condition `β⁻¹ + μ_l(κ) = 0`.
pub fn deltaprime_sphere_root(beta_inv: f64, l: usize) -> Result<SphereEigenvalue> {
    if !(beta_inv < 0.0) || !beta_inv.is_finite() {
        return Err(Error::Domain(format!("beta_inv must be negative, got {beta_inv}")));
    }
    if hypersingular_symbol_at_zero(l) >= -beta_inv {
        return Err(Error::RootNotFound(format!(
            "no delta-prime eigenvalue for l = {l}: needs l(l+1)/(2l+1) < -beta_inv = {}",
            -beta_inv
        )));
    }
    let condition = |kappa: f64| Ok(beta_inv + hypersingular_sphere_symbol(l, kappa)?);
    // μ_l grows like κ/2, so the bracket closes near 2|β⁻¹|
    let mut hi = 1.0;
    while condition(hi)? <= 0.0 {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::RootNotFound("delta-prime bracket search diverged".into()));
        }
    }
    let kappa = bisect(1e-8, hi, condition)?;
    Ok(SphereEigenvalue {
        l,
        kappa,
        lambda: -kappa * kappa,
        multiplicity: 2 * l + 1,
        residual: condition(kappa)?.abs(),
        condition: SphereCondition::DeltaPrimeDerived,
    })
}

/// All δ' eigenvalues with `l ≤ l_max`.
pub fn deltaprime_sphere_eigs(beta_inv: f64, l_max: usize) -> Result<Vec<SphereEigenvalue>> {
    if !(beta_inv < 0.0) || !beta_inv.is_finite() {
        return Err(Error::Domain(format!("beta_inv must be negative, got {beta_inv}")));
    }
    (0..=l_max.min(MAX_BESSEL_ORDER))
        .filter(|&l| hypersingular_symbol_at_zero(l) < -beta_inv)
        .map(|l| deltaprime_sphere_root(beta_inv, l))
        .collect()
}

/// Determinant of the 2×2 δ' matching system for `(a, b)` at `r = 1`, with
/// rows scaled to unit norm:
/// `a κ i_l' − b κ k_l' = 0` and `b k_l − a i_l − β b κ k_l' = 0`.
pub fn deltaprime_matching_determinant(beta_inv: f64, l: usize, kappa: f64) -> Result<f64> {
    let s = scaled_spherical(l, kappa)?;
    let beta = 1.0 / beta_inv;
    let r1 = [kappa * s.di[l], -kappa * s.dk[l]];
    let r2 = [-s.i[l], s.k[l] - beta * kappa * s.dk[l]];
    let n1 = (r1[0] * r1[0] + r1[1] * r1[1]).sqrt();
    let n2 = (r2[0] * r2[0] + r2[1] * r2[1]).sqrt();
    Ok((r1[0] * r2[1] - r1[1] * r2[0]) / (n1 * n2))
}

/// Same for the δ system: `a i_l − b k_l = 0` and
/// `b κ k_l' − a κ i_l' − α a i_l = 0`.
pub fn delta_matching_determinant(alpha: f64, l: usize, kappa: f64) -> Result<f64> {
    let s = scaled_spherical(l, kappa)?;
    let r1 = [s.i[l], -s.k[l]];
    let r2 = [-kappa * s.di[l] - alpha * s.i[l], kappa * s.dk[l]];
    let n1 = (r1[0] * r1[0] + r1[1] * r1[1]).sqrt();
    let n2 = (r2[0] * r2[0] + r2[1] * r2[1]).sqrt();
    Ok((r1[0] * r2[1] - r1[1] * r2[0]) / (n1 * n2))
}
