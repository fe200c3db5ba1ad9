//! Scalar fields given as evaluation rules, with declared growth classes.
//!
//! A growth class certifies membership in the admissible space (the weighted
//! integral of |u| against (1 + |x|^(n+alpha))^-1 must be finite) and drives
//! the far-field handling of the pointwise evaluator.

use crate::error::{FracError, Result};
use std::sync::Arc;

/// Declared behavior of a field at infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GrowthClass {
    /// The field is exactly this constant everywhere.
    Constant(f64),
    /// |u| vanishes outside |x| <= radius and is bounded by `bound` inside.
    CompactSupport { radius: f64, bound: f64 },
    /// u equals `constant` exactly outside |x| <= radius, |u| <= bound inside.
    ConstantOutside {
        radius: f64,
        constant: f64,
        bound: f64,
    },
    /// |u(x)| <= bound everywhere.
    Bounded { bound: f64 },
    /// |u(x)| <= coeff * (1 + |x|)^exponent. Admissible only for exponent < alpha.
    Algebraic { coeff: f64, exponent: f64 },
}

impl GrowthClass {
    /// Pointwise envelope used by the honesty-check helper.
    pub fn envelope(&self, r: f64) -> f64 {
        match *self {
            GrowthClass::Constant(v) => v.abs(),
            GrowthClass::CompactSupport { radius, bound } => {
                if r <= radius {
                    bound
                } else {
                    0.0
                }
            }
            GrowthClass::ConstantOutside {
                radius,
                constant,
                bound,
            } => {
                if r <= radius {
                    bound.max(constant.abs())
                } else {
                    constant.abs()
                }
            }
            GrowthClass::Bounded { bound } => bound,
            GrowthClass::Algebraic { coeff, exponent } => coeff * (1.0 + r).powf(exponent),
        }
    }

    /// Whether the class certifies admissibility for the given order.
    pub fn admissible(&self, alpha: f64) -> bool {
        match *self {
            GrowthClass::Algebraic { exponent, .. } => exponent < alpha,
            _ => true,
        }
    }
}

type EvalFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A scalar field on R^n packaged with its growth class.
#[derive(Clone)]
pub struct FieldFn {
    n: usize,
    eval: Arc<EvalFn>,
    growth: GrowthClass,
}

impl std::fmt::Debug for FieldFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FieldFn")
            .field("n", &self.n)
            .field("growth", &self.growth)
            .finish()
    }
}

impl FieldFn {
    pub fn new<F>(n: usize, growth: GrowthClass, eval: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        FieldFn {
            n,
            eval: Arc::new(eval),
            growth,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn growth(&self) -> GrowthClass {
        self.growth
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.n);
        (self.eval)(x)
    }

    /// Constant field.
    pub fn constant(n: usize, value: f64) -> Self {
        FieldFn::new(n, GrowthClass::Constant(value), move |_| value)
    }

    /// Plane wave cos(xi . x).
    pub fn cosine(n: usize, xi: Vec<f64>) -> Self {
        assert_eq!(xi.len(), n);
        FieldFn::new(n, GrowthClass::Bounded { bound: 1.0 }, move |x| {
            let phase: f64 = x.iter().zip(xi.iter()).map(|(a, b)| a * b).sum();
            phase.cos()
        })
    }

    /// Bare unit-ball profile (1 - |x - z|^2)_+^(alpha/2), maximum 1 at z.
    pub fn ball_profile(n: usize, z: Vec<f64>, alpha: f64) -> Self {
        assert_eq!(z.len(), n);
        FieldFn::new(
            n,
            GrowthClass::CompactSupport {
                radius: 1.0 + z.iter().map(|c| c * c).sum::<f64>().sqrt(),
                bound: 1.0,
            },
            move |x| {
                let r2: f64 = x.iter().zip(z.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                if r2 < 1.0 {
                    (1.0 - r2).powf(alpha / 2.0)
                } else {
                    0.0
                }
            },
        )
    }

    /// Smooth bump exp(1 - 1/(1 - |x|^2)) supported in the unit ball, max 1 at 0.
    pub fn smooth_bump(n: usize) -> Self {
        FieldFn::new(
            n,
            GrowthClass::CompactSupport {
                radius: 1.0,
                bound: 1.0,
            },
            move |x| {
                let r2: f64 = x.iter().map(|c| c * c).sum();
                if r2 < 1.0 {
                    (1.0 - 1.0 / (1.0 - r2)).exp()
                } else {
                    0.0
                }
            },
        )
    }

    /// Rational decaying field 1/(1 + |x|^2).
    pub fn lorentzian(n: usize) -> Self {
        FieldFn::new(
            n,
            GrowthClass::Algebraic {
                coeff: 2.0,
                exponent: -2.0,
            },
            move |x| {
                let r2: f64 = x.iter().map(|c| c * c).sum();
                1.0 / (1.0 + r2)
            },
        )
    }

    /// Spot-check that the declared growth class is honored on sampled probes
    /// with |x| <= 10^3. Probes are deterministic.
    pub fn check_growth(&self, samples: usize) -> Result<()> {
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            // splitmix64, plenty for probe generation
            state = state.wrapping_add(0x9e3779b97f4a7c15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
            (z ^ (z >> 31)) as f64 / u64::MAX as f64
        };
        for _ in 0..samples {
            let mut x = vec![0.0; self.n];
            let scale = 10f64.powf(3.0 * next());
            for c in x.iter_mut() {
                *c = (2.0 * next() - 1.0) * scale;
            }
            let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
            if r > 1e3 {
                continue;
            }
            let v = self.eval(&x);
            if !v.is_finite() {
                return Err(FracError::Input(format!(
                    "field sample non-finite at {:?}",
                    x
                )));
            }
            let env = self.growth.envelope(r);
            if v.abs() > env * (1.0 + 1e-9) + 1e-300 {
                return Err(FracError::Input(format!(
                    "growth class violated at {:?}: |{}| > {}",
                    x, v, env
                )));
            }
        }
        Ok(())
    }
}

/// Pushforward under dilation: returns x -> u(lambda x), with the growth
/// class adjusted so the declared envelope still holds.
pub fn scaling_pushforward(u: &FieldFn, lambda: f64) -> Result<FieldFn> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(FracError::Parameter(format!(
            "scaling factor must be positive, got {lambda}"
        )));
    }
    let growth = match u.growth() {
        GrowthClass::Constant(v) => GrowthClass::Constant(v),
        GrowthClass::CompactSupport { radius, bound } => GrowthClass::CompactSupport {
            radius: radius / lambda,
            bound,
        },
        GrowthClass::ConstantOutside {
            radius,
            constant,
            bound,
        } => GrowthClass::ConstantOutside {
            radius: radius / lambda,
            constant,
            bound,
        },
        GrowthClass::Bounded { bound } => GrowthClass::Bounded { bound },
        GrowthClass::Algebraic { coeff, exponent } => {
            // |u(lambda x)| <= coeff (1 + lambda |x|)^e <= coeff' (1 + |x|)^e
            let factor = if exponent >= 0.0 {
                lambda.max(1.0).powf(exponent)
            } else {
                lambda.min(1.0).powf(exponent)
            };
            GrowthClass::Algebraic {
                coeff: coeff * factor,
                exponent,
            }
        }
    };
    let inner = u.clone();
    let n = u.dim();
    Ok(FieldFn::new(n, growth, move |x| {
        let scaled: Vec<f64> = x.iter().map(|c| c * lambda).collect();
        inner.eval(&scaled)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pushforward_identity_and_definition() {
        let u = FieldFn::cosine(1, vec![1.0]);
        let same = scaling_pushforward(&u, 1.0).unwrap();
        for x in [-2.0, 0.0, 0.7] {
            assert_eq!(u.eval(&[x]), same.eval(&[x]));
        }
        let double = scaling_pushforward(&u, 2.0).unwrap();
        assert_relative_eq!(double.eval(&[0.3]), (0.6f64).cos(), max_relative = 1e-15);
    }

    #[test]
    fn pushforward_rejects_nonpositive_lambda() {
        let u = FieldFn::constant(1, 1.0);
        assert!(scaling_pushforward(&u, 0.0).is_err());
        assert!(scaling_pushforward(&u, -2.0).is_err());
    }

    #[test]
    fn growth_check_accepts_declared_fields() {
        FieldFn::cosine(1, vec![2.0]).check_growth(200).unwrap();
        FieldFn::lorentzian(1).check_growth(200).unwrap();
        FieldFn::smooth_bump(2).check_growth(200).unwrap();
        let shifted = FieldFn::ball_profile(1, vec![3.0], 0.5);
        shifted.check_growth(200).unwrap();
    }

    #[test]
    fn growth_check_rejects_lying_class() {
        let liar = FieldFn::new(1, GrowthClass::Bounded { bound: 0.5 }, |x| x[0].cos());
        assert!(liar.check_growth(500).is_err());
    }

    #[test]
    fn bump_is_smooth_compactly_supported() {
        let b = FieldFn::smooth_bump(1);
        assert_eq!(b.eval(&[1.0]), 0.0);
        assert_eq!(b.eval(&[-1.2]), 0.0);
        assert_relative_eq!(b.eval(&[0.0]), 1.0);
        assert!(b.eval(&[0.9]) > 0.0);
    }
}
