//! Run orchestration: the CLI subcommands and the acceptance suite both go
//! through these functions, so reproducibility checks exercise the same
//! pipeline end to end. Every run directory gets a manifest; all CSV bytes
//! are deterministic functions of the configuration.

use crate::blowup::{
    boundary_exponent_fit, convergence_metric, holder_seminorm, node_aligned_frame,
    rescale_profile, rescaled_residual, run_sequence, BlowupSequence, RescaledProfile,
};
use crate::config::ExperimentConfig;
use crate::domain::DomainSpec;
use crate::error::{FracError, Result};
use crate::extension::{cross_validate, CrossValidation, ExtensionConfig};
use crate::field::FieldFn;
use crate::grid::{Grid, GridFunction};
use crate::io::{emit_csv, emit_svg_plot, Cell, PlotStyle, RunManifest, Series, Table};
use crate::operator::{assemble_discrete, eval_point_pv, PointEval, QuadConfig};
use crate::params::FracParams;
use crate::solver::{profile_init, restrict_to_domain, solve_semilinear_on, SolutionRecord, SolveConfig};
use std::path::Path;

fn domain_from(cfg: &ExperimentConfig) -> Result<DomainSpec> {
    DomainSpec::interval(cfg.domain.a, cfg.domain.b)
}

fn grid_from(cfg: &ExperimentConfig) -> Result<Grid> {
    Grid::new(cfg.dim, cfg.grid.h, cfg.grid.extent)
}

fn solve_config_from(cfg: &ExperimentConfig) -> SolveConfig {
    SolveConfig {
        p: cfg.solve.p,
        newton_tol: cfg.solve.newton_tol,
        max_iters: cfg.solve.max_iters,
        max_damping: cfg.solve.max_damping,
    }
}

fn extension_config_from(cfg: &ExperimentConfig) -> ExtensionConfig {
    ExtensionConfig {
        y_max: cfg.extension.y_max,
        ny: cfg.extension.ny,
        grading: cfg.extension.grading,
        calibrate: cfg.extension.calibrate,
    }
}

/// Named analytic test fields available to the operator CLI.
pub fn named_field(name: &str, cfg: &ExperimentConfig) -> Result<FieldFn> {
    match name {
        "const" => Ok(FieldFn::constant(cfg.dim, 1.0)),
        "cos" => {
            let mut xi = vec![0.0; cfg.dim];
            xi[0] = 1.0;
            Ok(FieldFn::cosine(cfg.dim, xi))
        }
        "psi1" => Ok(FieldFn::ball_profile(
            cfg.dim,
            vec![0.0; cfg.dim],
            cfg.alpha,
        )),
        other => Err(FracError::Parameter(format!(
            "unknown field {other:?}; expected const, cos, or psi1"
        ))),
    }
}

/// Pointwise operator evaluation for the CLI.
pub fn run_operator_eval(
    cfg: &ExperimentConfig,
    field: &str,
    at: &[f64],
    tol: Option<f64>,
) -> Result<PointEval> {
    cfg.validate()?;
    let params = FracParams::new(cfg.dim, cfg.alpha)?;
    let u = named_field(field, cfg)?;
    let mut quad = QuadConfig {
        r_far: cfg.quad.r_far.max(1e6),
        max_subdivisions: cfg.quad.max_subdivisions.max(500_000),
        ..cfg.quad_config()?
    };
    if let Some(t) = tol {
        quad.tol = t;
    }
    eval_point_pv(&u, at, &params, &quad)
}

/// Dense operator matrix written as row-major CSV.
pub fn run_operator_assemble(cfg: &ExperimentConfig, argv: &[String], out: &Path) -> Result<()> {
    cfg.validate()?;
    let params = FracParams::new(cfg.dim, cfg.alpha)?;
    let grid = grid_from(cfg)?;
    let op = assemble_discrete(&grid, &params)?;
    let m = op.len();
    let columns: Vec<String> = (0..m).map(|j| format!("c{j}")).collect();
    let col_refs: Vec<&str> = columns.iter().map(|s| s.as_str()).collect();
    let mut table = Table::new(&col_refs);
    for r in 0..m {
        let row: Vec<Cell> = (0..m).map(|c| Cell::Num(op.matrix()[(r, c)])).collect();
        table.push(row);
    }
    emit_csv(&table, out)?;
    let mut manifest = RunManifest::new(argv.to_vec(), cfg.to_json());
    manifest.record(out);
    manifest.write(&manifest_path(out))?;
    Ok(())
}

fn manifest_path(artifact: &Path) -> std::path::PathBuf {
    artifact.with_extension("manifest.json")
}

/// Rows of the transform-identity report for the CLI.
pub fn run_barrier_verify(
    cfg: &ExperimentConfig,
    probes: &[f64],
    argv: &[String],
    out: Option<&Path>,
) -> Result<Table> {
    cfg.validate()?;
    let params = FracParams::new(cfg.dim, cfg.alpha)?;
    let quad = QuadConfig {
        tol: 1e-6,
        r_far: 1e6,
        max_subdivisions: 500_000,
        ..QuadConfig::default()
    };
    let report = crate::barrier::verify_psi2_identity(&params, probes, &quad)?;
    let mut table = Table::new(&["probe", "lhs", "rhs", "rel_err"]);
    for row in &report.rows {
        table.push(vec![
            Cell::Num(row.probe),
            Cell::Num(row.lhs),
            Cell::Num(row.rhs),
            Cell::Num(row.rel_err),
        ]);
    }
    if let Some(path) = out {
        emit_csv(&table, path)?;
        let mut manifest = RunManifest::new(argv.to_vec(), cfg.to_json());
        manifest.record(path);
        manifest.write(&manifest_path(path))?;
    }
    Ok(table)
}

/// Artifacts of one semilinear solve run.
pub struct SolveRun {
    pub record: SolutionRecord,
    pub boundary_fit: Option<(f64, f64)>,
}

/// Solve the configured problem and write solution.csv, convergence.csv,
/// record.json, and manifest.json into the run directory.
pub fn run_solve(cfg: &ExperimentConfig, argv: &[String], out_dir: &Path) -> Result<SolveRun> {
    cfg.validate()?;
    let params = FracParams::new(cfg.dim, cfg.alpha)?;
    let domain = domain_from(cfg)?;
    let grid = grid_from(cfg)?;
    let full = assemble_discrete(&grid, &params)?;
    let sys = restrict_to_domain(&full, &domain)?;
    let scfg = solve_config_from(cfg);
    let init = profile_init(&sys, scfg.p)?;
    let record = solve_semilinear_on(&sys, &scfg, &params, &init)?;

    std::fs::create_dir_all(out_dir)?;
    let mut manifest = RunManifest::new(argv.to_vec(), cfg.to_json());

    let mut sol = Table::new(&["x", "u"]);
    for id in 0..grid.node_count() {
        sol.push(vec![
            Cell::Num(grid.coord(id)[0]),
            Cell::Num(record.u.value_at(id)),
        ]);
    }
    let sol_path = out_dir.join("solution.csv");
    emit_csv(&sol, &sol_path)?;
    manifest.record(&sol_path);

    let mut conv = Table::new(&["iteration", "residual"]);
    for (k, r) in record.residual_history.iter().enumerate() {
        conv.push(vec![Cell::Int(k as i64), Cell::Num(*r)]);
    }
    let conv_path = out_dir.join("convergence.csv");
    emit_csv(&conv, &conv_path)?;
    manifest.record(&conv_path);

    let boundary_fit = boundary_exponent_fit(&record.u, &domain)
        .ok()
        .map(|f| (f.slope, f.rms_residual));
    let record_json = serde_json::json!({
        "p": record.p,
        "m": record.m,
        "x_star": record.x_star,
        "d": record.d,
        "residual_norm": record.residual_norm,
        "iterations": record.iterations,
        "alpha": cfg.alpha,
        "dim": cfg.dim,
        "grid": {"h": cfg.grid.h, "extent": cfg.grid.extent},
        "domain": {"a": cfg.domain.a, "b": cfg.domain.b},
        "boundary_exponent": boundary_fit.map(|f| f.0),
    });
    let rec_path = out_dir.join("record.json");
    crate::io::atomic_write(
        &rec_path,
        serde_json::to_string_pretty(&record_json)
            .map_err(|e| FracError::Input(e.to_string()))?
            .as_bytes(),
    )?;
    manifest.record(&rec_path);
    manifest.write(&out_dir.join("manifest.json"))?;
    Ok(SolveRun {
        record,
        boundary_fit,
    })
}

/// Artifacts of one blow-up experiment.
pub struct BlowupRun {
    pub sequence: BlowupSequence,
    /// Profiles on the shared comparison window, one per record.
    pub window_profiles: Vec<RescaledProfile>,
    /// Successive (sup |dv|, sup |dAv|) over the window.
    pub diffs: Vec<(f64, f64)>,
    /// Per-record (max residual, budget) of the rescaled equation on the
    /// node-aligned frame.
    pub residuals: Vec<(f64, f64)>,
    /// Per-record Hoelder ratio at sigma = alpha/2 on the window.
    pub holder_ratios: Vec<f64>,
}

/// Comparison window for rescaled profiles (shared across the sequence).
pub fn blowup_window() -> Result<Grid> {
    Grid::new(1, 0.05, 8.0)
}

/// Run the full blow-up experiment and write sequence.csv, profiles/k.csv,
/// classification.json, holder.csv, plots, and the manifest.
pub fn run_blowup(cfg: &ExperimentConfig, argv: &[String], out_dir: &Path) -> Result<BlowupRun> {
    cfg.validate()?;
    if cfg.solve.schedule.is_empty() {
        return Err(FracError::Parameter(
            "blow-up runs need a non-empty exponent schedule".into(),
        ));
    }
    let params = FracParams::new(cfg.dim, cfg.alpha)?;
    let domain = domain_from(cfg)?;
    let grid = grid_from(cfg)?;
    let base = solve_config_from(cfg);
    let sequence = run_sequence(&domain, &cfg.solve.schedule, &grid, &params, &base)?;

    std::fs::create_dir_all(out_dir)?;
    let mut manifest = RunManifest::new(argv.to_vec(), cfg.to_json());

    let mut seq_table = Table::new(&["k", "p", "m", "lambda", "d", "ratio"]);
    for (k, rec) in sequence.records.iter().enumerate() {
        seq_table.push(vec![
            Cell::Int(k as i64),
            Cell::Num(rec.p),
            Cell::Num(rec.m),
            Cell::Num(sequence.lambdas[k]),
            Cell::Num(rec.d),
            Cell::Num(sequence.ratios[k]),
        ]);
    }
    let seq_path = out_dir.join("sequence.csv");
    emit_csv(&seq_table, &seq_path)?;
    manifest.record(&seq_path);

    // Profiles on the common window, written per record.
    let window = blowup_window()?;
    let mut window_profiles = Vec::new();
    let mut residuals = Vec::new();
    for (k, rec) in sequence.records.iter().enumerate() {
        let prof = rescale_profile(rec, &params, &window, k)?;
        let mut table = Table::new(&["x", "v"]);
        for id in 0..window.node_count() {
            table.push(vec![
                Cell::Num(window.coord(id)[0]),
                Cell::Num(prof.v.value_at(id)),
            ]);
        }
        let path = out_dir.join("profiles").join(format!("{k}.csv"));
        emit_csv(&table, &path)?;
        manifest.record(&path);
        window_profiles.push(prof);

        let aligned = node_aligned_frame(rec, &params)?;
        let aligned_prof = rescale_profile(rec, &params, &aligned, k)?;
        residuals.push(rescaled_residual(&aligned_prof, rec, &params)?);
    }

    let diffs = if window_profiles.len() >= 2 {
        convergence_metric(&window_profiles, &params)?
    } else {
        Vec::new()
    };

    // Hoelder ratios at sigma = alpha/2 over the window.
    let sigma = 0.5 * cfg.alpha;
    let window_op = assemble_discrete(&window, &params)?;
    let mut holder_table = Table::new(&["k", "sigma", "seminorm", "ratio"]);
    let mut holder_ratios = Vec::new();
    for (k, prof) in window_profiles.iter().enumerate() {
        let w = window_op.apply(&prof.v);
        let rep = holder_seminorm(&prof.v, sigma, &w, cfg.alpha)?;
        holder_ratios.push(rep.ratio);
        holder_table.push(vec![
            Cell::Int(k as i64),
            Cell::Num(rep.sigma),
            Cell::Num(rep.seminorm),
            Cell::Num(rep.ratio),
        ]);
    }
    let holder_path = out_dir.join("holder.csv");
    emit_csv(&holder_table, &holder_path)?;
    manifest.record(&holder_path);

    let class_json = serde_json::json!({
        "classification": sequence.classification.label(),
        "ratios": sequence.ratios,
        "lambdas": sequence.lambdas,
        "m": sequence.records.iter().map(|r| r.m).collect::<Vec<_>>(),
        "p": sequence.records.iter().map(|r| r.p).collect::<Vec<_>>(),
        "rescaled_residuals": residuals.iter().map(|r| r.0).collect::<Vec<_>>(),
        "rescaled_budgets": residuals.iter().map(|r| r.1).collect::<Vec<_>>(),
        "aborted": sequence.aborted.as_ref().map(|(p, e)| serde_json::json!({"p": p, "error": e})),
    });
    let class_path = out_dir.join("classification.json");
    crate::io::atomic_write(
        &class_path,
        serde_json::to_string_pretty(&class_json)
            .map_err(|e| FracError::Input(e.to_string()))?
            .as_bytes(),
    )?;
    manifest.record(&class_path);

    // Ratio plot on a log scale.
    if !sequence.ratios.is_empty() {
        let series = vec![Series {
            label: "d/lambda".into(),
            points: sequence
                .ratios
                .iter()
                .enumerate()
                .map(|(k, r)| (k as f64 + 1.0, *r))
                .collect(),
        }];
        let plot_path = out_dir.join("plots").join("ratios.svg");
        emit_svg_plot(
            &series,
            &plot_path,
            PlotStyle {
                log_y: true,
                ..Default::default()
            },
        )?;
        manifest.record(&plot_path);
    }

    manifest.write(&out_dir.join("manifest.json"))?;
    Ok(BlowupRun {
        sequence,
        window_profiles,
        diffs,
        residuals,
        holder_ratios,
    })
}

/// Extension cross-check for the CLI: report.csv with one row per interior
/// node.
pub fn run_extension_compare(
    cfg: &ExperimentConfig,
    argv: &[String],
    out: &Path,
) -> Result<CrossValidation> {
    cfg.validate()?;
    let params = FracParams::new(cfg.dim, cfg.alpha)?;
    let domain = domain_from(cfg)?;
    let grid = grid_from(cfg)?;
    let bump = FieldFn::smooth_bump(1);
    let u = GridFunction::sample(grid, |x| bump.eval(x))?;
    let ecfg = extension_config_from(cfg);
    let cv = cross_validate(&u, &domain, &ecfg, &params)?;
    let mut table = Table::new(&["x", "direct", "trace", "rel_diff"]);
    for i in 0..cv.xs.len() {
        table.push(vec![
            Cell::Num(cv.xs[i]),
            Cell::Num(cv.direct[i]),
            Cell::Num(cv.trace[i]),
            Cell::Num(cv.rel_diff[i]),
        ]);
    }
    emit_csv(&table, out)?;
    let mut manifest = RunManifest::new(argv.to_vec(), cfg.to_json());
    manifest.record(out);
    manifest.write(&manifest_path(out))?;
    Ok(cv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_cfg() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.alpha = 0.5;
        cfg.grid.h = 0.02;
        cfg.grid.extent = 1.0;
        cfg.solve.p = 2.0;
        cfg
    }

    #[test]
    fn solve_run_writes_deterministic_artifacts() {
        let cfg = quick_cfg();
        let dir1 = tempfile::tempdir().unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        let argv = vec!["solve".to_string()];
        run_solve(&cfg, &argv, dir1.path()).unwrap();
        run_solve(&cfg, &argv, dir2.path()).unwrap();
        for name in ["solution.csv", "convergence.csv", "record.json"] {
            let a = std::fs::read(dir1.path().join(name)).unwrap();
            let b = std::fs::read(dir2.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between identical runs");
        }
    }

    #[test]
    fn blowup_run_writes_expected_files() {
        let mut cfg = quick_cfg();
        cfg.grid.h = 0.01;
        cfg.solve.schedule = vec![1.6, 2.0, 2.3];
        let dir = tempfile::tempdir().unwrap();
        let run = run_blowup(&cfg, &["blowup".to_string()], dir.path()).unwrap();
        assert_eq!(run.sequence.records.len(), 3);
        for name in [
            "sequence.csv",
            "holder.csv",
            "classification.json",
            "manifest.json",
        ] {
            assert!(dir.path().join(name).exists(), "{name} missing");
        }
        for k in 0..3 {
            assert!(dir.path().join("profiles").join(format!("{k}.csv")).exists());
        }
        assert!(dir.path().join("plots").join("ratios.svg").exists());
        // every profile normalized at the origin
        for prof in &run.window_profiles {
            let c = prof.v.grid().axis_index_of(0.0).unwrap();
            assert_eq!(prof.v.value_at(c), 1.0);
        }
        // rescaled equation within budget on the aligned frame
        for (resid, budget) in &run.residuals {
            assert!(resid <= budget);
        }
    }

    #[test]
    fn operator_eval_runs() {
        let cfg = quick_cfg();
        let out = run_operator_eval(&cfg, "cos", &[0.3], Some(1e-5)).unwrap();
        approx::assert_relative_eq!(
            out.value,
            0.3f64.cos(),
            max_relative = 1e-4
        );
        assert!(run_operator_eval(&cfg, "nosuch", &[0.0], None).is_err());
    }
}
