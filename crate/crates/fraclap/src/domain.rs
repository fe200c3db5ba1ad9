//! Bounded domains with indicator and boundary-distance rules.

use crate::error::{FracError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum DomainSpec {
    /// Open interval (a, b), n = 1.
    Interval { a: f64, b: f64 },
    /// Open square (-half, half)^2, n = 2.
    Square { half: f64 },
    /// Open disc of the given radius about the origin, n = 2.
    Disc { radius: f64 },
}

impl DomainSpec {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(FracError::Parameter(format!(
                "interval needs finite a < b, got ({a}, {b})"
            )));
        }
        Ok(DomainSpec::Interval { a, b })
    }

    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::Interval { .. } => 1,
            _ => 2,
        }
    }

    /// Signed distance convention: positive inside, non-positive outside.
    pub fn dist(&self, x: &[f64]) -> f64 {
        match *self {
            DomainSpec::Interval { a, b } => (x[0] - a).min(b - x[0]),
            DomainSpec::Square { half } => (half - x[0].abs()).min(half - x[1].abs()),
            DomainSpec::Disc { radius } => radius - (x[0] * x[0] + x[1] * x[1]).sqrt(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.dist(x) > 0.0
    }

    pub fn diameter(&self) -> f64 {
        match *self {
            DomainSpec::Interval { a, b } => b - a,
            DomainSpec::Square { half } => 2.0 * half * 2f64.sqrt(),
            DomainSpec::Disc { radius } => 2.0 * radius,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_distance() {
        let d = DomainSpec::interval(-1.0, 1.0).unwrap();
        assert_eq!(d.dist(&[0.0]), 1.0);
        assert_eq!(d.dist(&[0.5]), 0.5);
        assert!(d.dist(&[1.0]) == 0.0);
        assert!(!d.contains(&[1.0]));
        assert!(d.contains(&[0.99]));
        assert!(d.dist(&[2.0]) < 0.0);
    }

    #[test]
    fn distance_is_one_lipschitz_on_probes() {
        let d = DomainSpec::interval(-1.0, 1.0).unwrap();
        let mut prev: Option<(f64, f64)> = None;
        for k in 0..200 {
            let x = -1.5 + 3.0 * k as f64 / 199.0;
            let v = d.dist(&[x]);
            if let Some((px, pv)) = prev {
                assert!((v - pv).abs() <= (x - px).abs() + 1e-12);
            }
            prev = Some((x, v));
        }
    }

    #[test]
    fn rejects_bad_interval() {
        assert!(DomainSpec::interval(1.0, -1.0).is_err());
        assert!(DomainSpec::interval(0.0, f64::INFINITY).is_err());
    }
}
