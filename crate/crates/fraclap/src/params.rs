//! Operator parameters and the special constants attached to them.
//!
//! The kernel normalization is fixed so that the operator's Fourier symbol is
//! exactly |xi|^alpha; everything else in the crate inherits that convention.

use crate::error::{FracError, Result};
use libm::tgamma;

/// Parameters identifying one fractional Laplacian: dimension, order, and the
/// kernel normalization constant (always derived, never user-set).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FracParams {
    n: usize,
    alpha: f64,
    c_norm: f64,
}

impl FracParams {
    pub fn new(n: usize, alpha: f64) -> Result<Self> {
        let c_norm = normalization_constant(n, alpha)?;
        Ok(FracParams { n, alpha, c_norm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Kernel normalization constant C(n, alpha).
    pub fn c_norm(&self) -> f64 {
        self.c_norm
    }

    /// Surface measure of the unit sphere in dimension n (2 for n=1, 2*pi for n=2).
    pub fn sphere_measure(&self) -> f64 {
        sphere_measure(self.n)
    }

    /// Critical exponent (n+alpha)/(n-alpha) for n > alpha, infinity otherwise.
    pub fn p_critical(&self) -> f64 {
        let n = self.n as f64;
        if n > self.alpha {
            (n + self.alpha) / (n - self.alpha)
        } else {
            f64::INFINITY
        }
    }
}

pub fn sphere_measure(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        _ => unreachable!("dimension restricted to 1 or 2 at construction"),
    }
}

fn check_range(n: usize, alpha: f64) -> Result<()> {
    if n != 1 && n != 2 {
        return Err(FracError::Parameter(format!(
            "dimension must be 1 or 2, got {n}"
        )));
    }
    if !(alpha > 0.0 && alpha < 2.0) || !alpha.is_finite() {
        return Err(FracError::Parameter(format!(
            "order out of (0,2): alpha = {alpha}"
        )));
    }
    Ok(())
}

/// Kernel normalization constant making the Fourier symbol exactly |xi|^alpha:
///
///   C(n, alpha) = alpha * 2^(alpha-1) * Gamma((n+alpha)/2)
///                 / ( pi^(n/2) * Gamma(1 - alpha/2) )
///
/// For (1,1) this is 1/pi, for (2,1) it is 1/(2 pi).
pub fn normalization_constant(n: usize, alpha: f64) -> Result<f64> {
    check_range(n, alpha)?;
    let nf = n as f64;
    let c = alpha * f64::powf(2.0, alpha - 1.0) * tgamma((nf + alpha) / 2.0)
        / (f64::powf(std::f64::consts::PI, nf / 2.0) * tgamma(1.0 - alpha / 2.0));
    Ok(c)
}

/// Interior constant of the bare ball profile (1-|x|^2)_+^(alpha/2):
/// applying the operator to that profile inside the unit ball gives exactly
///
///   kappa(n, alpha) = 2^alpha * Gamma(1 + alpha/2) * Gamma((n+alpha)/2) / Gamma(n/2).
///
/// kappa(1,1) = 1; the torsion profile (operator image identically 1) is the
/// bare profile divided by kappa.
pub fn kappa_constant(n: usize, alpha: f64) -> Result<f64> {
    check_range(n, alpha)?;
    let nf = n as f64;
    Ok(f64::powf(2.0, alpha) * tgamma(1.0 + alpha / 2.0) * tgamma((nf + alpha) / 2.0)
        / tgamma(nf / 2.0))
}

/// Constant relating the weighted normal trace of the degenerate extension to
/// the operator: value = -d(alpha) * lim_{y->0} y^(1-alpha) dU/dy, with
///
///   d(alpha) = 2^(alpha-1) * Gamma(alpha/2) / Gamma(1 - alpha/2),
///
/// normalized to d(1) = 1 so the harmonic-extension case reduces to the
/// classical Dirichlet-to-Neumann map.
pub fn trace_constant(alpha: f64) -> Result<f64> {
    check_range(1, alpha)?;
    Ok(f64::powf(2.0, alpha - 1.0) * tgamma(alpha / 2.0) / tgamma(1.0 - alpha / 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn normalization_matches_closed_forms() {
        // Values recorded from the Fourier-calibration oracle before the build.
        assert_relative_eq!(
            normalization_constant(1, 1.0).unwrap(),
            1.0 / PI,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            normalization_constant(2, 1.0).unwrap(),
            1.0 / (2.0 * PI),
            max_relative = 1e-14
        );
        // (1, 0.5): 1/(2 sqrt(2 pi)) = 0.199471 to six digits.
        let c = normalization_constant(1, 0.5).unwrap();
        assert_relative_eq!(c, 0.199471, max_relative = 5e-6);
        assert_relative_eq!(c, 1.0 / (2.0 * (2.0 * PI).sqrt()), max_relative = 1e-14);
    }

    #[test]
    fn normalization_rejects_out_of_range() {
        assert!(normalization_constant(3, 1.0).is_err());
        assert!(normalization_constant(1, 0.0).is_err());
        assert!(normalization_constant(1, 2.0).is_err());
        assert!(normalization_constant(1, 2.5).is_err());
        assert!(normalization_constant(1, -0.3).is_err());
    }

    #[test]
    fn kappa_reference_values() {
        assert_relative_eq!(kappa_constant(1, 1.0).unwrap(), 1.0, max_relative = 1e-13);
        assert_relative_eq!(
            kappa_constant(2, 1.0).unwrap(),
            PI / 2.0,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            kappa_constant(1, 0.5).unwrap(),
            0.8862269254527584,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            kappa_constant(1, 1.5).unwrap(),
            1.329340388179138,
            max_relative = 1e-13
        );
    }

    #[test]
    fn trace_constant_reference_values() {
        assert_relative_eq!(trace_constant(1.0).unwrap(), 1.0, max_relative = 1e-13);
        assert_relative_eq!(
            trace_constant(0.5).unwrap(),
            2.092099240106203,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            trace_constant(1.5).unwrap(),
            0.4779887974861251,
            max_relative = 1e-13
        );
    }

    #[test]
    fn params_cache_constant() {
        let p = FracParams::new(1, 0.5).unwrap();
        assert_eq!(p.c_norm(), normalization_constant(1, 0.5).unwrap());
        assert_eq!(p.p_critical(), 3.0);
        let p = FracParams::new(1, 1.0).unwrap();
        assert!(p.p_critical().is_infinite());
        let p = FracParams::new(2, 0.5).unwrap();
        assert_relative_eq!(p.p_critical(), 2.5 / 1.5, max_relative = 1e-15);
    }
}
