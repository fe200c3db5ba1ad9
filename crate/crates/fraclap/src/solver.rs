//! Semilinear exterior-Dirichlet solves on the discrete operator, plus the
//! discrete comparison (inverse-positivity) checker.

use crate::domain::DomainSpec;
use crate::error::{FracError, Result};
use crate::grid::{Grid, GridFunction};
use crate::operator::{assemble_discrete, DiscreteOperator};
use crate::params::FracParams;
use nalgebra::{Cholesky, DMatrix, DVector, LU};

/// Controls for one semilinear solve.
#[derive(Debug, Clone)]
pub struct SolveConfig {
    /// Nonlinearity exponent, 1 < p < p_critical.
    pub p: f64,
    /// Residual max-norm target.
    pub newton_tol: f64,
    pub max_iters: usize,
    /// Maximum step halvings per iteration.
    pub max_damping: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            p: 2.0,
            newton_tol: 1e-10,
            max_iters: 100,
            max_damping: 30,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self, params: &FracParams) -> Result<()> {
        let p_crit = params.p_critical();
        if !(self.p > 1.0) {
            return Err(FracError::Parameter(format!(
                "exponent must exceed 1, got p = {}",
                self.p
            )));
        }
        if self.p >= p_crit {
            return Err(FracError::Parameter(format!(
                "supercritical exponent: p = {} is not below (n+alpha)/(n-alpha) = {p_crit}",
                self.p
            )));
        }
        if !(self.newton_tol > 0.0) {
            return Err(FracError::Parameter("newton_tol must be positive".into()));
        }
        Ok(())
    }
}

/// One converged solve: the solution, its maximum, maximizer, and boundary
/// distance.
#[derive(Debug, Clone)]
pub struct SolutionRecord {
    pub u: GridFunction,
    pub domain: DomainSpec,
    pub p: f64,
    pub residual_norm: f64,
    pub m: f64,
    pub x_star: Vec<f64>,
    pub x_star_id: usize,
    pub d: f64,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
}

/// The discrete system restricted to the interior of a domain.
pub struct RestrictedSystem {
    pub op: DiscreteOperator,
    pub domain: DomainSpec,
}

/// Restrict the assembled operator to the nodes interior to the domain.
pub fn restrict_to_domain(
    full: &DiscreteOperator,
    domain: &DomainSpec,
) -> Result<RestrictedSystem> {
    let grid = full.grid().clone();
    let keep: Vec<usize> = full
        .node_ids()
        .iter()
        .copied()
        .filter(|&id| domain.contains(&grid.coord(id)))
        .collect();
    if keep.len() < 3 {
        return Err(FracError::Parameter(
            "domain contains fewer than 3 interior grid nodes".into(),
        ));
    }
    Ok(RestrictedSystem {
        op: full.restrict(&keep)?,
        domain: domain.clone(),
    })
}

/// Solve the linear system A u = f on the interior nodes of the domain
/// (dense symmetric factorization), extending by zero outside.
pub fn solve_linear(
    domain: &DomainSpec,
    f: &GridFunction,
    grid: &Grid,
    params: &FracParams,
) -> Result<GridFunction> {
    let full = assemble_discrete(grid, params)?;
    let sys = restrict_to_domain(&full, domain)?;
    let rhs = sys.op.gather(f);
    let sol = cholesky_solve(sys.op.matrix(), &rhs)?;
    Ok(sys.op.scatter(&sol))
}

fn cholesky_solve(a: &DMatrix<f64>, rhs: &[f64]) -> Result<Vec<f64>> {
    let chol = Cholesky::new(a.clone()).ok_or_else(|| {
        FracError::Numerical("symmetric factorization failed (system not SPD)".into())
    })?;
    let x = chol.solve(&DVector::from_column_slice(rhs));
    Ok(x.as_slice().to_vec())
}

/// Reusable factorization for repeated right-hand sides.
pub struct LinearSolver {
    chol: Cholesky<f64, nalgebra::Dyn>,
}

impl LinearSolver {
    pub fn new(op: &DiscreteOperator) -> Result<Self> {
        let chol = Cholesky::new(op.matrix().clone()).ok_or_else(|| {
            FracError::Numerical("symmetric factorization failed (system not SPD)".into())
        })?;
        Ok(LinearSolver { chol })
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(rhs)
    }
}

/// Amplitude for the profile initial guess: t such that the projection of
/// the residual of t*w onto the profile w vanishes, where w solves A w = 1.
pub fn initial_amplitude(torsion: &[f64], p: f64) -> f64 {
    let sum_w: f64 = torsion.iter().sum();
    let sum_wp1: f64 = torsion.iter().map(|w| w.powf(p + 1.0)).sum();
    (sum_w / sum_wp1).powf(1.0 / (p - 1.0))
}

/// Damped Newton on F(u) = A u - max(u,0)^p with residual line search.
pub fn solve_semilinear(
    domain: &DomainSpec,
    cfg: &SolveConfig,
    grid: &Grid,
    params: &FracParams,
    init: &GridFunction,
) -> Result<SolutionRecord> {
    let full = assemble_discrete(grid, params)?;
    let sys = restrict_to_domain(&full, domain)?;
    solve_semilinear_on(&sys, cfg, params, init)
}

/// Same solve against an already-restricted system (reused by continuation).
pub fn solve_semilinear_on(
    sys: &RestrictedSystem,
    cfg: &SolveConfig,
    params: &FracParams,
    init: &GridFunction,
) -> Result<SolutionRecord> {
    cfg.validate(params)?;
    let op = &sys.op;
    let a = op.matrix();
    let m = op.len();
    let mut u = DVector::from_vec(op.gather(init));
    if u.iter().any(|v| *v < 0.0) {
        return Err(FracError::Parameter(
            "initial iterate must be nonnegative".into(),
        ));
    }
    let p = cfg.p;
    let residual = |u: &DVector<f64>| -> DVector<f64> {
        let mut r = a * u;
        for i in 0..m {
            r[i] -= u[i].max(0.0).powf(p);
        }
        r
    };
    let mut r = residual(&u);
    let mut rnorm = r.amax();
    let mut merit = r.norm();
    let mut history = vec![rnorm];
    let mut iters = 0;
    while rnorm > cfg.newton_tol {
        if iters >= cfg.max_iters {
            return Err(FracError::Solve {
                message: format!(
                    "no convergence in {} iterations (residual {rnorm:.3e})",
                    cfg.max_iters
                ),
                history,
            });
        }
        iters += 1;
        // Jacobian A - diag(p max(u,0)^(p-1))
        let mut jac = a.clone();
        for i in 0..m {
            jac[(i, i)] -= p * u[i].max(0.0).powf(p - 1.0);
        }
        let lu = LU::new(jac);
        let step = match lu.solve(&(-&r)) {
            Some(s) => s,
            None => {
                return Err(FracError::Solve {
                    message: "singular Jacobian".into(),
                    history,
                })
            }
        };
        // Backtrack on the Euclidean residual norm; the max norm only
        // declares convergence. (The max norm makes a poor merit function:
        // its level sets have corners the search can stall against.)
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=cfg.max_damping {
            let trial = &u + t * &step;
            let tr = residual(&trial);
            let tm = tr.norm();
            if tm < merit {
                u = trial;
                r = tr;
                rnorm = r.amax();
                merit = tm;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(FracError::Solve {
                message: format!("line search stalled at residual {rnorm:.3e}"),
                history,
            });
        }
        history.push(rnorm);
    }
    // Reject the trivial root and sign-changing artifacts.
    let max = u.max();
    if max <= 1e-8 {
        return Err(FracError::Solve {
            message: "converged to the trivial solution".into(),
            history,
        });
    }
    let min = u.min();
    if min < 0.0 {
        return Err(FracError::Solve {
            message: format!("converged iterate has negative interior minimum {min:.3e}"),
            history,
        });
    }
    let gf = op.scatter(u.as_slice());
    let (m_val, node) = gf.max_with_node();
    let x_star = op.grid().coord(node);
    let d = sys.domain.dist(&x_star);
    Ok(SolutionRecord {
        u: gf,
        domain: sys.domain.clone(),
        p,
        residual_norm: rnorm,
        m: m_val,
        x_star,
        x_star_id: node,
        d,
        iterations: iters,
        residual_history: history,
    })
}

/// Profile initial guess: t * w with w the discrete torsion solution
/// (A w = 1 on the domain interior) and t from the projection rule.
pub fn profile_init(sys: &RestrictedSystem, p: f64) -> Result<GridFunction> {
    let ones = vec![1.0; sys.op.len()];
    let w = cholesky_solve(sys.op.matrix(), &ones)?;
    let t = initial_amplitude(&w, p);
    let scaled: Vec<f64> = w.iter().map(|v| t * v).collect();
    Ok(sys.op.scatter(&scaled))
}

/// Sup-normalized fixed-point iteration v <- A^{-1} max(v,0)^p / sup, with
/// the amplitude recovered from the converged scaling factor. Converges
/// linearly whenever the positive ground state is a nondegenerate index-one
/// critical point; used as a robust initializer when Newton stalls.
pub fn normalized_ground_state(
    sys: &RestrictedSystem,
    p: f64,
    tol: f64,
    max_iters: usize,
) -> Result<GridFunction> {
    let solver = LinearSolver::new(&sys.op)?;
    let m = sys.op.len();
    let mut v = DVector::from_element(m, 1.0);
    let mut sigma = 1.0;
    let mut converged = false;
    for _ in 0..max_iters {
        let vp = v.map(|x: f64| x.max(0.0).powf(p));
        let w = solver.solve(&vp);
        sigma = w.amax();
        if !(sigma > 0.0) {
            return Err(FracError::Numerical(
                "fixed-point iteration collapsed to zero".into(),
            ));
        }
        let vn = &w / sigma;
        let delta = (&vn - &v).amax();
        v = vn;
        if delta < tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(FracError::Numerical(format!(
            "fixed-point iteration did not settle within {max_iters} sweeps"
        )));
    }
    let amplitude = sigma.powf(-1.0 / (p - 1.0));
    let u: Vec<f64> = v.iter().map(|x| amplitude * x).collect();
    Ok(sys.op.scatter(&u))
}

/// Outcome of a continuation sweep; `aborted` carries the failing exponent
/// when a solve fails partway.
#[derive(Debug)]
pub struct ContinuationRun {
    pub records: Vec<SolutionRecord>,
    pub aborted: Option<(f64, FracError)>,
}

/// Solve along an increasing schedule of exponents, warm-starting each solve
/// from the previous solution rescaled by m^((p_old - p_new)/(p_new - 1)).
pub fn continuation_run(
    domain: &DomainSpec,
    schedule: &[f64],
    grid: &Grid,
    params: &FracParams,
    base: &SolveConfig,
) -> Result<ContinuationRun> {
    for w in schedule.windows(2) {
        if !(w[1] > w[0]) {
            return Err(FracError::Parameter(format!(
                "schedule must be strictly increasing, got {} then {}",
                w[0], w[1]
            )));
        }
    }
    for &p in schedule {
        let cfg = SolveConfig { p, ..base.clone() };
        cfg.validate(params)?;
    }
    let mut run = ContinuationRun {
        records: Vec::new(),
        aborted: None,
    };
    if schedule.is_empty() {
        return Ok(run);
    }
    let full = assemble_discrete(grid, params)?;
    let sys = restrict_to_domain(&full, domain)?;
    let mut warm: Option<SolutionRecord> = None;
    for &p in schedule {
        match advance_to(&sys, base, params, &mut warm, p, 6) {
            Ok(()) => run.records.push(warm.clone().expect("advance_to sets warm")),
            Err(e) => {
                run.aborted = Some((p, e));
                break;
            }
        }
    }
    Ok(run)
}

/// Advance the warm state to the target exponent, bisecting the step in p
/// when a solve fails (intermediate solves are not reported).
fn advance_to(
    sys: &RestrictedSystem,
    base: &SolveConfig,
    params: &FracParams,
    warm: &mut Option<SolutionRecord>,
    target: f64,
    depth: usize,
) -> std::result::Result<(), FracError> {
    let cfg = SolveConfig {
        p: target,
        ..base.clone()
    };
    let init = match warm.as_ref() {
        Some(prev) => {
            let factor = prev.m.powf((prev.p - target) / (target - 1.0));
            let vals: Vec<f64> = sys
                .op
                .gather(&prev.u)
                .iter()
                .map(|v| v * factor)
                .collect();
            sys.op.scatter(&vals)
        }
        None => profile_init(sys, target)?,
    };
    match solve_semilinear_on(sys, &cfg, params, &init) {
        Ok(rec) => {
            *warm = Some(rec);
            Ok(())
        }
        Err(first_err) => {
            // Newton stalled: restart from the normalized fixed-point state,
            // which tracks the ground state even where the warm path crosses
            // a fold.
            if let Ok(gs) = normalized_ground_state(sys, target, 1e-12, 30_000) {
                if let Ok(rec) = solve_semilinear_on(sys, &cfg, params, &gs) {
                    *warm = Some(rec);
                    return Ok(());
                }
            }
            if depth == 0 {
                return Err(first_err);
            }
            let from = warm
                .as_ref()
                .map(|r| r.p)
                .unwrap_or(1.0 + 0.5 * (target - 1.0));
            let mid = 0.5 * (from + target);
            if (target - mid).abs() < 1e-6 {
                return Err(first_err);
            }
            advance_to(sys, base, params, warm, mid, depth - 1)?;
            advance_to(sys, base, params, warm, target, depth - 1)
        }
    }
}

/// Result of the discrete comparison check.
#[derive(Debug, Clone, PartialEq)]
pub enum ComparisonOutcome {
    /// Hypotheses and conclusion both hold; margin is the worst slack in the
    /// conclusion.
    Holds { margin: f64 },
    /// A hypothesis failed; distinct from a conclusion failure.
    HypothesesNotMet { node: usize, detail: String },
    /// Hypotheses held but the conclusion failed at the witness node.
    ConclusionFailed { node: usize, value: f64 },
}

impl ComparisonOutcome {
    pub fn holds(&self) -> bool {
        matches!(self, ComparisonOutcome::Holds { .. })
    }
}

/// Discrete comparison: if A(a-b) >= -slack on the region and a >= b on the
/// system nodes outside it, then inverse-positivity of the restricted
/// operator forces a >= b - slack * ||A_region^-1 1|| on the region.
/// Hypotheses are verified first and reported separately from the
/// conclusion.
pub fn comparison_check(
    a: &GridFunction,
    b: &GridFunction,
    region: &[usize],
    op: &DiscreteOperator,
    slack: f64,
) -> Result<ComparisonOutcome> {
    if a.grid() != b.grid() || a.grid() != op.grid() {
        return Err(FracError::Parameter(
            "comparison fields must share the operator grid".into(),
        ));
    }
    if slack < 0.0 {
        return Err(FracError::Parameter("slack must be nonnegative".into()));
    }
    let mut in_region = vec![false; a.grid().node_count()];
    for &id in region {
        if op.index_of(id).is_none() {
            return Err(FracError::Parameter(format!(
                "region node {id} is not part of the operator"
            )));
        }
        in_region[id] = true;
    }
    let scale = 1.0 + a.sup_norm().max(b.sup_norm());
    let tol_round = 1e-12 * scale;

    // Hypothesis 1: a >= b at system nodes outside the region.
    for &id in op.node_ids() {
        if !in_region[id] {
            let diff = a.value_at(id) - b.value_at(id);
            if diff < -tol_round {
                return Ok(ComparisonOutcome::HypothesesNotMet {
                    node: id,
                    detail: format!("a - b = {diff:.3e} < 0 outside the region"),
                });
            }
        }
    }
    // Hypothesis 2: A(a-b) >= -slack on the region.
    let mut w = a.clone();
    for (va, vb) in w.values_mut().iter_mut().zip(b.values().iter()) {
        *va -= vb;
    }
    let img = op.apply(&w);
    for &id in region {
        let v = img.value_at(id);
        if v < -slack - tol_round {
            return Ok(ComparisonOutcome::HypothesesNotMet {
                node: id,
                detail: format!("A(a-b) = {v:.3e} < -slack on the region"),
            });
        }
    }
    // Conclusion with the amplification constant ||A_region^-1 1||_inf.
    let sub = op.restrict(region)?;
    let ones = vec![1.0; sub.len()];
    let z = cholesky_solve(sub.matrix(), &ones)?;
    let amplification = z.iter().fold(0.0f64, |m, v| m.max(*v));
    let slack_out = slack * amplification + tol_round;
    let mut margin = f64::INFINITY;
    for &id in region {
        let diff = a.value_at(id) - b.value_at(id);
        if diff < -slack_out {
            return Ok(ComparisonOutcome::ConclusionFailed {
                node: id,
                value: diff,
            });
        }
        margin = margin.min(diff + slack_out);
    }
    Ok(ComparisonOutcome::Holds { margin })
}
