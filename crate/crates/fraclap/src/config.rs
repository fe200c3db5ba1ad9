//! Experiment configuration document: one JSON file mirroring the operator,
//! domain, solver, quadrature, and extension settings, with a validator
//! that reports every violation at once.

use crate::error::{FracError, Result};
use crate::operator::QuadConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub alpha: f64,
    pub dim: usize,
    pub domain: DomainConfig,
    pub grid: GridConfig,
    pub solve: SolveSection,
    pub quad: QuadSection,
    pub extension: ExtensionSection,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct DomainConfig {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub h: f64,
    pub extent: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SolveSection {
    pub p: f64,
    pub newton_tol: f64,
    pub max_iters: usize,
    pub max_damping: usize,
    pub schedule: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct QuadSection {
    pub delta: f64,
    pub r_far: f64,
    pub tol: f64,
    pub max_subdivisions: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ExtensionSection {
    pub y_max: f64,
    pub ny: usize,
    pub grading: f64,
    pub calibrate: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            alpha: 0.5,
            dim: 1,
            domain: DomainConfig::default(),
            grid: GridConfig::default(),
            solve: SolveSection::default(),
            quad: QuadSection::default(),
            extension: ExtensionSection::default(),
        }
    }
}

impl Default for DomainConfig {
    fn default() -> Self {
        DomainConfig { a: -1.0, b: 1.0 }
    }
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            h: 0.005,
            extent: 1.0,
        }
    }
}

impl Default for SolveSection {
    fn default() -> Self {
        SolveSection {
            p: 2.0,
            newton_tol: 1e-10,
            max_iters: 100,
            max_damping: 30,
            schedule: Vec::new(),
        }
    }
}

impl Default for QuadSection {
    fn default() -> Self {
        let q = QuadConfig::default();
        QuadSection {
            delta: q.delta,
            r_far: q.r_far,
            tol: q.tol,
            max_subdivisions: q.max_subdivisions,
        }
    }
}

impl Default for ExtensionSection {
    fn default() -> Self {
        ExtensionSection {
            y_max: 10.0,
            ny: 96,
            grading: 2.0,
            calibrate: true,
        }
    }
}

impl ExperimentConfig {
    /// Critical exponent for the configured dimension and order.
    pub fn p_critical(&self) -> f64 {
        let n = self.dim as f64;
        if n > self.alpha {
            (n + self.alpha) / (n - self.alpha)
        } else {
            f64::INFINITY
        }
    }

    /// Collect every violation; an empty list means the config is usable.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            v.push(format!("order out of (0,2): alpha = {}", self.alpha));
        }
        if self.dim != 1 && self.dim != 2 {
            v.push(format!("dimension must be 1 or 2: dim = {}", self.dim));
        }
        if !(self.domain.a < self.domain.b) {
            v.push(format!(
                "domain must satisfy a < b: a = {}, b = {}",
                self.domain.a, self.domain.b
            ));
        }
        if !(self.grid.h > 0.0) {
            v.push(format!("grid spacing must be positive: h = {}", self.grid.h));
        }
        if !(self.grid.extent > 0.0) {
            v.push(format!(
                "grid extent must be positive: extent = {}",
                self.grid.extent
            ));
        } else if self.grid.h > 0.0 {
            let ratio = self.grid.extent / self.grid.h;
            if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
                v.push(format!(
                    "grid extent {} must be an integer multiple of spacing {}",
                    self.grid.extent, self.grid.h
                ));
            } else if ratio.round() < 2.0 {
                v.push("degenerate mesh: fewer than 3 interior nodes".into());
            }
        }
        let p_crit = self.p_critical();
        let check_p = |p: f64, what: &str, v: &mut Vec<String>| {
            if !(p > 1.0) {
                v.push(format!("{what} must exceed 1: p = {p}"));
            } else if p >= p_crit {
                v.push(format!(
                    "supercritical: {what} p = {p} is not below (n+alpha)/(n-alpha) = {p_crit}"
                ));
            }
        };
        check_p(self.solve.p, "exponent", &mut v);
        for &p in &self.solve.schedule {
            check_p(p, "schedule exponent", &mut v);
        }
        for w in self.solve.schedule.windows(2) {
            if !(w[1] > w[0]) {
                v.push(format!(
                    "schedule must be strictly increasing: {} then {}",
                    w[0], w[1]
                ));
            }
        }
        if !(self.solve.newton_tol > 0.0) {
            v.push(format!(
                "newton_tol must be positive: {}",
                self.solve.newton_tol
            ));
        }
        if !(self.quad.delta > 0.0 && self.quad.delta < self.quad.r_far) {
            v.push(format!(
                "need 0 < delta < r_far: delta = {}, r_far = {}",
                self.quad.delta, self.quad.r_far
            ));
        }
        if !(self.quad.tol > 0.0) {
            v.push(format!("quadrature tol must be positive: {}", self.quad.tol));
        }
        if !(self.extension.y_max > 0.0) {
            v.push(format!(
                "extension y_max must be positive: {}",
                self.extension.y_max
            ));
        }
        if self.extension.ny < 16 {
            v.push(format!(
                "degenerate mesh: extension ny = {} is below 16",
                self.extension.ny
            ));
        }
        if !(self.extension.grading >= 1.0) {
            v.push(format!(
                "extension grading must be >= 1: {}",
                self.extension.grading
            ));
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(FracError::Validation(v))
        }
    }

    pub fn quad_config(&self) -> Result<QuadConfig> {
        QuadConfig::new(
            self.quad.delta,
            self.quad.r_far,
            self.quad.tol,
            self.quad.max_subdivisions,
        )
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

/// Parse and validate a JSON configuration document. Syntax errors carry
/// line and column; semantic violations are reported all at once.
pub fn parse_config(document: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig =
        serde_json::from_str(document).map_err(|e| FracError::ConfigSyntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subcritical_accepted() {
        let cfg = parse_config(r#"{"alpha": 0.5, "dim": 1, "solve": {"p": 2.0}}"#).unwrap();
        assert_eq!(cfg.alpha, 0.5);
        assert_eq!(cfg.p_critical(), 3.0);
    }

    #[test]
    fn supercritical_rejected_with_message() {
        let err = parse_config(r#"{"alpha": 0.5, "dim": 1, "solve": {"p": 3.5}}"#).unwrap_err();
        match err {
            FracError::Validation(v) => {
                assert!(v.iter().any(|m| m.contains("supercritical")), "{v:?}");
            }
            other => panic!("expected validation error, got {other}"),
        }
    }

    #[test]
    fn alpha_out_of_range_rejected() {
        let err = parse_config(r#"{"alpha": 2.5}"#).unwrap_err();
        match err {
            FracError::Validation(v) => {
                assert!(v.iter().any(|m| m.contains("order out of (0,2)")), "{v:?}");
            }
            other => panic!("expected validation error, got {other}"),
        }
    }

    #[test]
    fn all_violations_reported_together() {
        let err = parse_config(
            r#"{"alpha": 2.5, "dim": 3, "solve": {"p": 0.5}, "extension": {"ny": 4}}"#,
        )
        .unwrap_err();
        match err {
            FracError::Validation(v) => {
                assert!(v.len() >= 4, "expected several violations, got {v:?}");
            }
            other => panic!("expected validation error, got {other}"),
        }
    }

    #[test]
    fn syntax_error_carries_position() {
        let err = parse_config("{\n  \"alpha\": 0.5,\n  oops\n}").unwrap_err();
        match err {
            FracError::ConfigSyntax { line, .. } => assert_eq!(line, 3),
            other => panic!("expected syntax error, got {other}"),
        }
    }

    #[test]
    fn no_critical_window_when_alpha_at_least_dim() {
        let cfg = parse_config(r#"{"alpha": 1.5, "dim": 1, "solve": {"p": 40.0}}"#).unwrap();
        assert!(cfg.p_critical().is_infinite());
    }
}
