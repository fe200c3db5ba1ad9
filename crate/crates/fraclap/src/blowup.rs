//! Blow-up/rescaling experiment harness: generate solution sequences along
//! an exponent schedule, rescale by the maximum and the concentration scale,
//! classify the boundary-distance trichotomy, and measure profile
//! convergence and regularity ratios.

use crate::domain::DomainSpec;
use crate::error::{FracError, Result};
use crate::grid::{Grid, GridFunction};
use crate::operator::assemble_discrete;
use crate::params::FracParams;
use crate::solver::{continuation_run, SolutionRecord, SolveConfig};

/// Concentration scale attached to one solve: m^((1-p)/alpha).
pub fn lambda_scale(m: f64, p: f64, alpha: f64) -> f64 {
    m.powf((1.0 - p) / alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseClass {
    CaseI,
    CaseII,
    CaseIII,
    Inconclusive,
}

impl CaseClass {
    pub fn label(&self) -> &'static str {
        match self {
            CaseClass::CaseI => "case_i",
            CaseClass::CaseII => "case_ii",
            CaseClass::CaseIII => "case_iii",
            CaseClass::Inconclusive => "inconclusive",
        }
    }
}

/// Decision rule on the ratio sequence r_k = d_k / lambda_k, applied to the
/// last three entries: diverging (strictly increasing with the final ratio
/// above 10) is case i, vanishing (strictly decreasing with the final ratio
/// below 0.1) is case iii, and stabilized (within 20 percent of their mean,
/// mean inside [0.1, 10]) is case ii. Anything else, or fewer than three
/// entries, is inconclusive.
pub fn classify_case(ratios: &[f64]) -> CaseClass {
    if ratios.len() < 3 {
        return CaseClass::Inconclusive;
    }
    let tail = &ratios[ratios.len() - 3..];
    let increasing = tail[0] < tail[1] && tail[1] < tail[2];
    let decreasing = tail[0] > tail[1] && tail[1] > tail[2];
    if increasing && tail[2] > 10.0 {
        return CaseClass::CaseI;
    }
    if decreasing && tail[2] < 0.1 {
        return CaseClass::CaseIII;
    }
    let mean = tail.iter().sum::<f64>() / 3.0;
    if (0.1..=10.0).contains(&mean)
        && tail.iter().all(|r| (r - mean).abs() <= 0.2 * mean)
    {
        return CaseClass::CaseII;
    }
    CaseClass::Inconclusive
}

/// Ordered solve records with their scales, ratios, and classification.
#[derive(Debug)]
pub struct BlowupSequence {
    pub records: Vec<SolutionRecord>,
    pub lambdas: Vec<f64>,
    pub ratios: Vec<f64>,
    pub classification: CaseClass,
    /// Exponent and message of a failed continuation step, if any.
    pub aborted: Option<(f64, String)>,
}

/// Run the continuation along the schedule and assemble the blow-up data.
/// Fewer than three successful solves yields an inconclusive classification
/// with the partial records, not an error.
pub fn run_sequence(
    domain: &DomainSpec,
    schedule: &[f64],
    grid: &Grid,
    params: &FracParams,
    base: &SolveConfig,
) -> Result<BlowupSequence> {
    let run = continuation_run(domain, schedule, grid, params, base)?;
    let alpha = params.alpha();
    let lambdas: Vec<f64> = run
        .records
        .iter()
        .map(|r| lambda_scale(r.m, r.p, alpha))
        .collect();
    let ratios: Vec<f64> = run
        .records
        .iter()
        .zip(lambdas.iter())
        .map(|(r, l)| r.d / l)
        .collect();
    let classification = classify_case(&ratios);
    Ok(BlowupSequence {
        records: run.records,
        lambdas,
        ratios,
        classification,
        aborted: run.aborted.map(|(p, e)| (p, e.to_string())),
    })
}

/// One solution pulled back to the concentration frame: v(x) =
/// u(lambda x + x*) / m, with the maximizer at the origin and value 1 there.
#[derive(Debug, Clone)]
pub struct RescaledProfile {
    pub v: GridFunction,
    /// Rescaled domain interval ((a - x*)/lambda, (b - x*)/lambda) for 1D
    /// domains.
    pub omega: (f64, f64),
    pub lambda: f64,
    pub m: f64,
    pub p: f64,
    pub source_index: usize,
    /// Whether every frame node mapped exactly onto a source node (or the
    /// exact exterior), so no interpolation error was introduced.
    pub node_aligned: bool,
}

/// The frame whose nodes are exactly the source grid nodes pulled back
/// through the rescaling (possible when the maximizer sits on a node, which
/// it does by construction). Rescaled samples on this frame carry no
/// interpolation error.
pub fn node_aligned_frame(record: &SolutionRecord, params: &FracParams) -> Result<Grid> {
    if record.u.grid().dim() != 1 {
        return Err(FracError::Parameter(
            "rescaling frames are implemented for 1D grids".into(),
        ));
    }
    let lambda = lambda_scale(record.m, record.p, params.alpha());
    let grid = record.u.grid();
    let half_width = grid.extent() - record.x_star[0].abs();
    Grid::new(1, grid.spacing() / lambda, half_width / lambda)
}

/// Pull one record back to the given frame. Frame nodes that map onto
/// source nodes are copied exactly (so v(0) = 1 bit-for-bit); off-node
/// points are filled by cubic interpolation; points outside the rescaled
/// domain are exactly zero.
pub fn rescale_profile(
    record: &SolutionRecord,
    params: &FracParams,
    frame: &Grid,
    source_index: usize,
) -> Result<RescaledProfile> {
    if record.u.grid().dim() != 1 || frame.dim() != 1 {
        return Err(FracError::Parameter(
            "rescaling frames are implemented for 1D grids".into(),
        ));
    }
    let lambda = lambda_scale(record.m, record.p, params.alpha());
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(FracError::Numerical(format!(
            "degenerate concentration scale lambda = {lambda}"
        )));
    }
    let source = &record.u;
    if lambda * frame.extent() > 100.0 * source.grid().extent() {
        return Err(FracError::Parameter(
            "frame window extends far beyond the rescaled data".into(),
        ));
    }
    let x_star = record.x_star[0];
    let m = record.m;
    let mut aligned = true;
    let mut values = Vec::with_capacity(frame.node_count());
    for id in 0..frame.node_count() {
        let xf = frame.axis_coord(id);
        let xs = lambda * xf + x_star;
        let v = if xs.abs() > source.grid().extent() {
            0.0
        } else if let Some(si) = source.grid().axis_index_of(xs) {
            source.value_at(si) / m
        } else {
            aligned = false;
            source.interp_cubic(xs)? / m
        };
        values.push(v);
    }
    // Interpolation overshoot guard: ten times the cubic error budget.
    let cap = 1.0 + 10.0 * 1e-3;
    if let Some(bad) = values.iter().position(|v| *v > cap) {
        return Err(FracError::Numerical(format!(
            "rescaled value {} at frame node {bad} exceeds the interpolation cap {cap}",
            values[bad]
        )));
    }
    let v = GridFunction::new(frame.clone(), values)?;
    let omega = match record.domain {
        DomainSpec::Interval { a, b } => ((a - x_star) / lambda, (b - x_star) / lambda),
        _ => {
            return Err(FracError::Parameter(
                "rescaling frames are implemented for interval domains".into(),
            ))
        }
    };
    Ok(RescaledProfile {
        v,
        omega,
        lambda,
        m,
        p: record.p,
        source_index,
        node_aligned: aligned,
    })
}

/// Discrete residual of the rescaled equation on the profile's own frame,
/// together with its acceptance budget: the source residual scaled by
/// m^(-p), a factor-10 allowance, and the interpolation budget when the
/// frame is not node aligned.
pub fn rescaled_residual(
    profile: &RescaledProfile,
    record: &SolutionRecord,
    params: &FracParams,
) -> Result<(f64, f64)> {
    let op = assemble_discrete(profile.v.grid(), params)?;
    let img = op.apply(&profile.v);
    let mut max_resid: f64 = 0.0;
    for &id in op.node_ids() {
        let v = profile.v.value_at(id);
        let r = (img.value_at(id) - v.max(0.0).powf(profile.p)).abs();
        max_resid = max_resid.max(r);
    }
    let mut budget = 10.0 * record.residual_norm / record.m.powf(profile.p);
    if !profile.node_aligned {
        budget += 1e-3 * (1.0 + op.inf_norm());
    }
    // rounding floor for the dense row sums
    budget += 1e-12 * op.inf_norm();
    Ok((max_resid, budget))
}

/// Successive sup-norm differences of rescaled profiles on a common frame:
/// for each consecutive pair, the sup of |v_{k+1} - v_k| and the sup of the
/// discrete operator images' difference.
pub fn convergence_metric(
    profiles: &[RescaledProfile],
    params: &FracParams,
) -> Result<Vec<(f64, f64)>> {
    if profiles.len() < 2 {
        return Err(FracError::Parameter(
            "need at least two profiles on a common frame".into(),
        ));
    }
    let frame = profiles[0].v.grid().clone();
    for p in profiles {
        if p.v.grid() != &frame {
            return Err(FracError::Parameter(
                "profiles do not share a common frame".into(),
            ));
        }
    }
    let op = assemble_discrete(&frame, params)?;
    let imgs: Vec<GridFunction> = profiles.iter().map(|p| op.apply(&p.v)).collect();
    let mut out = Vec::new();
    for k in 0..profiles.len() - 1 {
        let mut dv: f64 = 0.0;
        for (a, b) in profiles[k + 1]
            .v
            .values()
            .iter()
            .zip(profiles[k].v.values().iter())
        {
            dv = dv.max((a - b).abs());
        }
        let mut dav: f64 = 0.0;
        for (a, b) in imgs[k + 1].values().iter().zip(imgs[k].values().iter()) {
            dav = dav.max((a - b).abs());
        }
        out.push((dv, dav));
    }
    Ok(out)
}

/// Discrete Hoelder data of a grid function against the right-hand side
/// w = A u: the seminorm over node pairs with separation at most 1, and its
/// ratio to the sup norms.
#[derive(Debug, Clone, Copy)]
pub struct HolderReport {
    pub sigma: f64,
    pub seminorm: f64,
    pub ratio: f64,
}

pub fn holder_seminorm(
    u: &GridFunction,
    sigma: f64,
    w: &GridFunction,
    alpha: f64,
) -> Result<HolderReport> {
    if !(sigma > 0.0 && sigma < alpha.min(1.0)) {
        return Err(FracError::Parameter(format!(
            "sigma must lie in (0, min(alpha, 1)); got sigma = {sigma}, alpha = {alpha}"
        )));
    }
    if u.grid() != w.grid() {
        return Err(FracError::Parameter(
            "u and w must share a grid".into(),
        ));
    }
    let grid = u.grid();
    let mut seminorm: f64 = 0.0;
    match grid.dim() {
        1 => {
            let n = grid.nodes_per_axis();
            let reach = (1.0 / grid.spacing()).floor() as usize;
            for i in 0..n {
                for j in i + 1..=(i + reach).min(n - 1) {
                    let sep = (j - i) as f64 * grid.spacing();
                    if sep > 1.0 {
                        break;
                    }
                    let diff = (u.value_at(i) - u.value_at(j)).abs();
                    seminorm = seminorm.max(diff / sep.powf(sigma));
                }
            }
        }
        2 => {
            let n = grid.node_count();
            for i in 0..n {
                let xi = grid.coord(i);
                for j in i + 1..n {
                    let xj = grid.coord(j);
                    let sep = ((xi[0] - xj[0]).powi(2) + (xi[1] - xj[1]).powi(2)).sqrt();
                    if sep <= 1.0 {
                        let diff = (u.value_at(i) - u.value_at(j)).abs();
                        seminorm = seminorm.max(diff / sep.powf(sigma));
                    }
                }
            }
        }
        _ => unreachable!(),
    }
    let denom = u.sup_norm() + w.sup_norm();
    Ok(HolderReport {
        sigma,
        seminorm,
        ratio: if denom > 0.0 { seminorm / denom } else { 0.0 },
    })
}

/// Least-squares exponent of u against the boundary distance.
#[derive(Debug, Clone, Copy)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub rms_residual: f64,
    pub points: usize,
}

/// Fit log u against log d over the window d in [2h, 0.1 diam(domain)].
pub fn boundary_exponent_fit(u: &GridFunction, domain: &DomainSpec) -> Result<ExponentFit> {
    let grid = u.grid();
    let lo = 2.0 * grid.spacing();
    let hi = 0.1 * domain.diameter();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for id in 0..grid.node_count() {
        let x = grid.coord(id);
        let d = domain.dist(&x);
        if d >= lo && d <= hi {
            let v = u.value_at(id);
            if v <= 0.0 {
                return Err(FracError::Input(format!(
                    "u is not positive in the fit window (node at {x:?})"
                )));
            }
            xs.push(d.ln());
            ys.push(v.ln());
        }
    }
    if xs.len() < 5 {
        return Err(FracError::Parameter(format!(
            "only {} nodes in the fit window [{lo:.3e}, {hi:.3e}]",
            xs.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys.iter()) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut ss = 0.0;
    for (x, y) in xs.iter().zip(ys.iter()) {
        let r = y - (intercept + slope * x);
        ss += r * r;
    }
    Ok(ExponentFit {
        slope,
        intercept,
        rms_residual: (ss / n).sqrt(),
        points: xs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{profile_init, restrict_to_domain, solve_semilinear_on};
    use approx::assert_relative_eq;

    #[test]
    fn lambda_formula_examples() {
        assert_eq!(lambda_scale(16.0, 3.0, 1.0), 16.0f64.powf(-2.0));
        assert_relative_eq!(lambda_scale(16.0, 3.0, 1.0), 1.0 / 256.0, epsilon = 1e-18);
        // p -> 1 gives exponent 0
        assert_eq!(lambda_scale(7.3, 1.0, 0.5), 1.0);
        // bit-exact recomputation from stored fields
        let (m, p, alpha) = (4.909f64, 2.95f64, 0.5f64);
        let stored = lambda_scale(m, p, alpha);
        assert_eq!(stored.to_bits(), m.powf((1.0 - p) / alpha).to_bits());
    }

    #[test]
    fn classification_rule_examples() {
        assert_eq!(classify_case(&[2.0, 8.0, 40.0, 300.0]), CaseClass::CaseI);
        assert_eq!(classify_case(&[0.9, 1.02, 0.98, 1.01]), CaseClass::CaseII);
        assert_eq!(classify_case(&[0.5, 0.08, 0.01, 0.002]), CaseClass::CaseIII);
        assert_eq!(classify_case(&[1.0, 2.0]), CaseClass::Inconclusive);
        assert_eq!(classify_case(&[30.0, 20.0, 40.0]), CaseClass::Inconclusive);
    }

    #[test]
    fn classification_scale_invariance() {
        // multiplying all distances and scales by one factor leaves the
        // ratios, and hence the classification, unchanged
        let ds = [0.9, 0.8, 0.7, 0.6];
        let ls = [0.05, 0.01, 0.004, 0.0011];
        let base: Vec<f64> = ds.iter().zip(ls.iter()).map(|(d, l)| d / l).collect();
        for scale in [0.25, 3.0, 1e4] {
            let scaled: Vec<f64> = ds
                .iter()
                .zip(ls.iter())
                .map(|(d, l)| (d * scale) / (l * scale))
                .collect();
            assert_eq!(classify_case(&base), classify_case(&scaled));
        }
    }

    fn small_record() -> (SolutionRecord, FracParams) {
        let dom = DomainSpec::interval(-1.0, 1.0).unwrap();
        let grid = Grid::new(1, 0.01, 1.0).unwrap();
        let fp = FracParams::new(1, 0.5).unwrap();
        let full = assemble_discrete(&grid, &fp).unwrap();
        let sys = restrict_to_domain(&full, &dom).unwrap();
        let cfg = SolveConfig {
            p: 2.0,
            ..Default::default()
        };
        let init = profile_init(&sys, 2.0).unwrap();
        let rec = solve_semilinear_on(&sys, &cfg, &fp, &init).unwrap();
        (rec, fp)
    }

    #[test]
    fn rescaled_profile_normalization_and_exterior() {
        let (rec, fp) = small_record();
        let frame = node_aligned_frame(&rec, &fp).unwrap();
        let prof = rescale_profile(&rec, &fp, &frame, 0).unwrap();
        assert!(prof.node_aligned);
        let center = frame.axis_index_of(0.0).unwrap();
        assert_eq!(prof.v.value_at(center), 1.0);
        let (max, node) = prof.v.max_with_node();
        assert_eq!(node, center);
        assert!(max <= 1.0 + 1e-9);
        // domain edge maps outside the rescaled domain: exactly zero
        assert_eq!(prof.v.value_at(0), 0.0);
        assert_relative_eq!(prof.omega.1, frame.extent(), max_relative = 1e-12);
        // off-node frame: interpolation path, still normalized at 0
        let window = Grid::new(1, 0.37, 7.4).unwrap();
        let prof2 = rescale_profile(&rec, &fp, &window, 0).unwrap();
        assert!(!prof2.node_aligned);
        let c2 = window.axis_index_of(0.0).unwrap();
        assert_eq!(prof2.v.value_at(c2), 1.0);
        assert!(prof2.v.values().iter().all(|v| *v >= -1e-12));
    }

    #[test]
    fn rescaled_equation_residual_within_budget() {
        let (rec, fp) = small_record();
        let frame = node_aligned_frame(&rec, &fp).unwrap();
        let prof = rescale_profile(&rec, &fp, &frame, 0).unwrap();
        let (resid, budget) = rescaled_residual(&prof, &rec, &fp).unwrap();
        assert!(
            resid <= budget,
            "residual {resid:.3e} exceeds budget {budget:.3e}"
        );
    }

    #[test]
    fn convergence_metric_edges() {
        let (rec, fp) = small_record();
        let frame = Grid::new(1, 0.1, 6.0).unwrap();
        let prof = rescale_profile(&rec, &fp, &frame, 0).unwrap();
        assert!(convergence_metric(&[prof.clone()], &fp).is_err());
        let pair = vec![prof.clone(), prof.clone()];
        let diffs = convergence_metric(&pair, &fp).unwrap();
        assert_eq!(diffs.len(), 1);
        assert_eq!(diffs[0].0, 0.0);
        assert_eq!(diffs[0].1, 0.0);
    }

    #[test]
    fn holder_ratio_homogeneous_and_validated() {
        let (rec, fp) = small_record();
        let op = assemble_discrete(rec.u.grid(), &fp).unwrap();
        let w = op.apply(&rec.u);
        let rep = holder_seminorm(&rec.u, 0.2, &w, 0.5).unwrap();
        assert!(rep.seminorm > 0.0);
        let mut u3 = rec.u.clone();
        for v in u3.values_mut() {
            *v *= 3.0;
        }
        let mut w3 = w.clone();
        for v in w3.values_mut() {
            *v *= 3.0;
        }
        let rep3 = holder_seminorm(&u3, 0.2, &w3, 0.5).unwrap();
        assert_relative_eq!(rep3.ratio, rep.ratio, max_relative = 1e-12);
        assert_relative_eq!(rep3.seminorm, 3.0 * rep.seminorm, max_relative = 1e-12);
        // sigma out of range
        assert!(holder_seminorm(&rec.u, 0.6, &w, 0.5).is_err());
        assert!(holder_seminorm(&rec.u, 0.0, &w, 0.5).is_err());
    }

    #[test]
    fn boundary_fit_recovers_half_exponent_of_profile() {
        let dom = DomainSpec::interval(-1.0, 1.0).unwrap();
        let grid = Grid::new(1, 0.005, 1.0).unwrap();
        let u = GridFunction::sample(grid, |x| {
            let r2 = x[0] * x[0];
            if r2 < 1.0 {
                (1.0 - r2).sqrt()
            } else {
                0.0
            }
        })
        .unwrap();
        let fit = boundary_exponent_fit(&u, &dom).unwrap();
        assert!(
            (fit.slope - 0.5).abs() <= 0.02,
            "slope {} from {} points",
            fit.slope,
            fit.points
        );
    }

    #[test]
    fn boundary_fit_error_paths() {
        let dom = DomainSpec::interval(-1.0, 1.0).unwrap();
        let grid = Grid::new(1, 0.005, 1.0).unwrap();
        let zero = GridFunction::zeros(grid.clone());
        assert!(matches!(
            boundary_exponent_fit(&zero, &dom),
            Err(FracError::Input(_))
        ));
        let coarse = Grid::new(1, 0.25, 1.0).unwrap();
        let u = GridFunction::sample(coarse, |x| 1.0 + x[0]).unwrap();
        assert!(matches!(
            boundary_exponent_fit(&u, &dom),
            Err(FracError::Parameter(_))
        ));
    }

    #[test]
    fn run_sequence_partial_data_is_inconclusive() {
        // a schedule that cannot produce three solves classifies as
        // inconclusive rather than erroring
        let dom = DomainSpec::interval(-1.0, 1.0).unwrap();
        let grid = Grid::new(1, 0.02, 1.0).unwrap();
        let fp = FracParams::new(1, 0.5).unwrap();
        let seq = run_sequence(
            &dom,
            &[2.0, 2.2],
            &grid,
            &fp,
            &SolveConfig::default(),
        )
        .unwrap();
        assert_eq!(seq.records.len(), 2);
        assert_eq!(seq.classification, CaseClass::Inconclusive);
    }
}
