//! Adaptive quadrature built from Gauss-Legendre pairs.
//!
//! Nodes and weights are generated at startup by Newton iteration on the
//! Legendre recurrence, so no hard-coded tables are carried around. The
//! adaptive driver uses an embedded low/high order pair per segment and a
//! worst-first refinement queue; accepted segments are re-summed in increasing
//! position with compensated addition so results do not depend on the
//! refinement history.

use crate::error::{FracError, Result};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

/// Nodes (on [-1,1]) and weights of an n-point Gauss-Legendre rule.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

fn legendre_and_derivative(order: usize, x: f64) -> (f64, f64) {
    // Three-term recurrence for P_k, derivative from the standard identity.
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=order {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = order as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Compute the n-point Gauss-Legendre rule by Newton iteration.
pub fn gauss_legendre(order: usize) -> GaussRule {
    assert!(order >= 2);
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    for i in 0..order {
        // Chebyshev-based initial guess, refined by Newton.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
        for _ in 0..60 {
            let (p, d) = legendre_and_derivative(order, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_and_derivative(order, x);
        nodes[order - 1 - i] = x;
        weights[order - 1 - i] = 2.0 / ((1.0 - x * x) * d * d);
    }
    GaussRule { nodes, weights }
}

static GL7: OnceLock<GaussRule> = OnceLock::new();
static GL15: OnceLock<GaussRule> = OnceLock::new();
static GL32: OnceLock<GaussRule> = OnceLock::new();

pub fn gl7() -> &'static GaussRule {
    GL7.get_or_init(|| gauss_legendre(7))
}
pub fn gl15() -> &'static GaussRule {
    GL15.get_or_init(|| gauss_legendre(15))
}
pub fn gl32() -> &'static GaussRule {
    GL32.get_or_init(|| gauss_legendre(32))
}

/// Compensated (Kahan) accumulator; used wherever summation order is pinned.
#[derive(Debug, Clone, Copy, Default)]
pub struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    pub fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Apply a fixed rule on [a, b].
pub fn fixed_rule<F: FnMut(f64) -> f64>(rule: &GaussRule, a: f64, b: f64, mut f: F) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = Kahan::default();
    for (x, w) in rule.nodes.iter().zip(rule.weights.iter()) {
        acc.add(w * f(mid + half * x));
    }
    acc.value() * half
}

/// Shared evaluation budget across all adaptive calls of one operator
/// evaluation. One unit = one segment evaluated with the embedded pair.
#[derive(Debug)]
pub struct QuadBudget {
    remaining: usize,
}

impl QuadBudget {
    pub fn new(max_segments: usize) -> Self {
        QuadBudget {
            remaining: max_segments,
        }
    }

    fn take(&mut self) -> bool {
        if self.remaining == 0 {
            false
        } else {
            self.remaining -= 1;
            true
        }
    }

    pub fn remaining(&self) -> usize {
        self.remaining
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err && self.a == other.a
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        // Worst error first; ties broken by position for determinism.
        self.err
            .total_cmp(&other.err)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

pub struct AdaptiveOutcome {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

fn eval_segment<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Segment {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let hi = gl15();
    let lo = gl7();
    let mut acc_hi = Kahan::default();
    for (x, w) in hi.nodes.iter().zip(hi.weights.iter()) {
        acc_hi.add(w * f(mid + half * x));
    }
    let mut acc_lo = Kahan::default();
    for (x, w) in lo.nodes.iter().zip(lo.weights.iter()) {
        acc_lo.add(w * f(mid + half * x));
    }
    let v_hi = acc_hi.value() * half;
    let v_lo = acc_lo.value() * half;
    Segment {
        a,
        b,
        value: v_hi,
        err: (v_hi - v_lo).abs(),
    }
}

/// Integrate f over the chain of breakpoints with a global worst-first
/// strategy until the summed error estimate drops below `tol` or the budget
/// runs out. Segment values are summed left to right regardless of the
/// refinement order.
pub fn adaptive<F: FnMut(f64) -> f64>(
    mut f: F,
    breakpoints: &[f64],
    tol: f64,
    budget: &mut QuadBudget,
) -> Result<AdaptiveOutcome> {
    if breakpoints.len() < 2 {
        return Err(FracError::Parameter(
            "adaptive quadrature needs at least one interval".into(),
        ));
    }
    let mut heap = BinaryHeap::new();
    let mut total_err = 0.0f64;
    for w in breakpoints.windows(2) {
        if !(w[1] > w[0]) {
            return Err(FracError::Parameter(format!(
                "breakpoints must be strictly increasing, got {} then {}",
                w[0], w[1]
            )));
        }
        if !budget.take() {
            return finish(heap, false);
        }
        let seg = eval_segment(&mut f, w[0], w[1]);
        total_err += seg.err;
        heap.push(seg);
    }
    while total_err > tol {
        let worst = match heap.peek() {
            Some(s) if s.err > 0.0 => *s,
            _ => break,
        };
        if worst.b - worst.a < 1e-15 * (worst.a.abs() + worst.b.abs() + 1.0) {
            break; // interval at floating-point resolution
        }
        if !budget.take() || !budget.take() {
            return finish(heap, false);
        }
        heap.pop();
        total_err -= worst.err;
        let mid = 0.5 * (worst.a + worst.b);
        let left = eval_segment(&mut f, worst.a, mid);
        let right = eval_segment(&mut f, mid, worst.b);
        total_err += left.err + right.err;
        heap.push(left);
        heap.push(right);
    }
    finish(heap, true)
}

fn finish(heap: BinaryHeap<Segment>, converged: bool) -> Result<AdaptiveOutcome> {
    let mut segs: Vec<Segment> = heap.into_vec();
    segs.sort_by(|s, t| s.a.total_cmp(&t.a));
    let mut value = Kahan::default();
    let mut error = Kahan::default();
    for s in &segs {
        value.add(s.value);
        error.add(s.err);
    }
    Ok(AdaptiveOutcome {
        value: value.value(),
        error: error.value(),
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_rule_integrates_polynomials_exactly() {
        let r = gauss_legendre(7);
        // degree 13 is exact for a 7-point rule
        let val = fixed_rule(&r, 0.0, 1.0, |x| 14.0 * x.powi(13));
        assert_relative_eq!(val, 1.0, max_relative = 1e-13);
        let r = gauss_legendre(15);
        let val = fixed_rule(&r, -1.0, 2.0, |x| x.powi(29));
        assert_relative_eq!(val, (2.0f64.powi(30) - 1.0) / 30.0, max_relative = 1e-12);
    }

    #[test]
    fn gauss_weights_sum_to_two() {
        for order in [2, 7, 15, 32, 64] {
            let r = gauss_legendre(order);
            let s: f64 = r.weights.iter().sum();
            assert_relative_eq!(s, 2.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        // integral of x^{-1/2} over (0,1] = 2, integrable endpoint singularity
        let mut budget = QuadBudget::new(20_000);
        let out = adaptive(
            |x| 1.0 / x.sqrt(),
            &[1e-12, 0.25, 1.0],
            1e-10,
            &mut budget,
        )
        .unwrap();
        assert!(out.converged);
        assert_relative_eq!(out.value, 2.0, max_relative = 1e-6);
    }

    #[test]
    fn adaptive_oscillatory() {
        let mut budget = QuadBudget::new(200_000);
        let out = adaptive(|x| (40.0 * x).cos(), &[0.0, 100.0], 1e-10, &mut budget).unwrap();
        assert!(out.converged);
        assert_relative_eq!(out.value, (4000.0f64).sin() / 40.0, epsilon = 1e-9);
    }

    #[test]
    fn budget_exhaustion_reported() {
        let mut budget = QuadBudget::new(3);
        let out = adaptive(|x| (40.0 * x).cos(), &[0.0, 100.0], 1e-12, &mut budget).unwrap();
        assert!(!out.converged);
    }
}
