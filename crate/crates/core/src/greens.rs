//! Green's functions `G^(d)_z(x) = ∫₀^∞ (4πt)^{−d/2} e^{−x²/4t + zt} dt` of
//! `(−Δ_d − z)⁻¹` for real `z < 0`, by heat-kernel quadrature and in closed form.

use crate::error::{Error, Result};
use crate::quad;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// How a Green's function value is produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GreensMethod {
    /// Elementary/Bessel closed form (d ∈ {1, 3, 4}).
    ClosedForm,
    /// Heat-kernel quadrature (d ∈ {1, 2, 3, 4}).
    Quadrature,
}

/// A Green's function `G^(d)_z` with a fixed evaluation method.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreensEval {
    /// Spatial dimension.
    pub dim: usize,
    /// Spectral parameter `z = −κ² < 0`.
    pub z: f64,
    /// Evaluation method.
    pub method: GreensMethod,
}

impl GreensEval {
    /// Checks `dim` and `z` against the method's domain.
    pub fn new(dim: usize, z: f64, method: GreensMethod) -> Result<Self> {
        let ok = match method {
            GreensMethod::ClosedForm => matches!(dim, 1 | 3 | 4),
            GreensMethod::Quadrature => (1..=4).contains(&dim),
        };
        if !ok {
            return Err(Error::UnsupportedDimension(dim));
        }
        if !(z < 0.0) {
            return Err(Error::InvalidSpec(format!("Green's functions need z < 0, got {z}")));
        }
        Ok(Self { dim, z, method })
    }

    /// Value at distance `x ≥ 0`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        match self.method {
            GreensMethod::ClosedForm => greens_closed(self.dim, self.z, x),
            GreensMethod::Quadrature => greens_quadrature(self.dim, self.z, x),
        }
    }
}

/// Heat-kernel quadrature with the substitution `t = e^s`; absolute target 1e−14,
/// relative 1e−12.
pub fn greens_quadrature(d: usize, z: f64, x: f64) -> Result<f64> {
    if !(1..=4).contains(&d) {
        return Err(Error::UnsupportedDimension(d));
    }
    if d >= 2 && x == 0.0 {
        return Err(Error::SingularAtOrigin { dim: d });
    }
    let x = x.abs();
    let kappa2 = -z;
    let half_d = d as f64 / 2.0;
    let integrand = |s: f64| {
        let t = s.exp();
        let expo = -x * x / (4.0 * t) - kappa2 * t;
        if expo < -745.0 {
            return 0.0;
        }
        (4.0 * PI * t).powf(-half_d) * t * expo.exp()
    };
    // Beyond these limits the integrand is below e^{-60} of its peak scale.
    let s_hi = (80.0 / kappa2).ln();
    let s_lo = if x > 0.0 { (x * x / 320.0).ln() } else { -160.0 };
    // The peak of the integrand sits near t* ≈ x/(2κ) (or t ~ 1/κ² when x = 0).
    let t_star = if x > 0.0 { x / (2.0 * kappa2.sqrt()) } else { 1.0 / kappa2 };
    let s_star = t_star.ln().clamp(s_lo, s_hi);
    let left = quad::integrate(integrand, s_lo, s_star, 1e-15, 1e-13)?;
    let right = quad::integrate(integrand, s_star, s_hi, 1e-15, 1e-13)?;
    Ok(left.value + right.value)
}

/// Closed forms with `κ = √|z|`: `e^{−κ|x|}/(2κ)`, `e^{−κx}/(4πx)`, `κK₁(κx)/(4π²x)`.
pub fn greens_closed(d: usize, z: f64, x: f64) -> Result<f64> {
    let kappa = (-z).sqrt();
    let x = x.abs();
    match d {
        1 => Ok((-kappa * x).exp() / (2.0 * kappa)),
        3 | 4 if x == 0.0 => Err(Error::SingularAtOrigin { dim: d }),
        3 => Ok((-kappa * x).exp() / (4.0 * PI * x)),
        4 => Ok(kappa * bessel_k1(kappa * x) / (4.0 * PI * PI * x)),
        _ => Err(Error::UnsupportedDimension(d)),
    }
}

/// Modified Bessel function `K₁(x)` for `x > 0`.
///
/// Ascending series for `x ≤ 2`, the exponentially convergent trapezoidal rule
/// on `∫₀^∞ e^{−x cosh t} cosh t dt` for `2 < x < 25`, and the asymptotic
/// expansion beyond.
pub fn bessel_k1(x: f64) -> f64 {
    assert!(x > 0.0, "K1 needs a positive argument");
    if x <= 2.0 {
        k1_series(x)
    } else if x < 25.0 {
        k1_trapezoid(x)
    } else {
        k1_asymptotic(x)
    }
}

fn k1_series(x: f64) -> f64 {
    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
    let y = x * x / 4.0;
    let (mut term, mut harmonic, mut i1, mut s) = (1.0, 0.0, 0.0, 0.0);
    for k in 0..60 {
        let psi1 = -EULER_GAMMA + harmonic;
        let psi2 = psi1 + 1.0 / (k as f64 + 1.0);
        s += (psi1 + psi2) * term;
        i1 += 0.5 * x * term;
        term *= y / ((k as f64 + 1.0) * (k as f64 + 2.0));
        harmonic += 1.0 / (k as f64 + 1.0);
        if term < 1e-18 * s.abs().max(1.0) {
            break;
        }
    }
    1.0 / x + i1 * (x / 2.0).ln() - x / 4.0 * s
}

fn k1_trapezoid(x: f64) -> f64 {
    // Integrand e^{-x(cosh t - 1)} cosh t, scaled by e^{-x} at the end.
    let h = 0.05;
    let mut sum = 0.5;
    let mut k = 1;
    loop {
        let t = k as f64 * h;
        let v = (-x * (t.cosh() - 1.0)).exp() * t.cosh();
        sum += v;
        if v < 1e-18 * sum {
            break;
        }
        k += 1;
    }
    (-x).exp() * h * sum
}

fn k1_asymptotic(x: f64) -> f64 {
    let mu = 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..40 {
        let odd = (2 * k - 1) as f64;
        let next = term * (mu - odd * odd) / (k as f64 * 8.0 * x);
        if next.abs() > term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 {
            break;
        }
    }
    (PI / (2.0 * x)).sqrt() * (-x).exp() * sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k1_reference_values() {
        // Reference values of K1 at 1, 5 and 30.
        assert!((bessel_k1(1.0) / 0.601_907_230_197_234_6 - 1.0).abs() < 1e-13);
        assert!((bessel_k1(5.0) / 0.004_044_613_445_452_164 - 1.0).abs() < 1e-12);
        assert!((bessel_k1(30.0) / 2.167_732_001_891_549_5e-14 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn k1_branches_are_continuous() {
        // Neighbouring branches agree at the switch points.
        assert!((k1_series(2.0) / k1_trapezoid(2.0) - 1.0).abs() < 1e-13);
        assert!((k1_trapezoid(25.0) / k1_asymptotic(25.0) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn origin_is_singular_in_higher_dims() {
        assert!(matches!(greens_closed(3, -1.0, 0.0), Err(Error::SingularAtOrigin { dim: 3 })));
        assert!(matches!(greens_quadrature(2, -1.0, 0.0), Err(Error::SingularAtOrigin { dim: 2 })));
        assert!(greens_closed(2, -1.0, 1.0).is_err());
    }
}
