use crate::config::{ModelSource, RunConfig};
use crate::failure::{Failure, EXIT_MALFORMED, EXIT_MISSING, EXIT_NOT_CONVERGED, EXIT_VIOLATION};
use crate::report::{ConfigInfo, GridInfo, ModelInfo, Report};
use airga::airga::{airga_reduce, AirgaOptions, AirgaResult, SolverConfig, SolverMode};
use airga::diagnostics::{condition_number, stability_report};
use airga::model::io::{read_system, write_system};
use airga::model::mtx::write_dense;
use airga::model::{generate, ModelSpec};
use airga::system::SecondOrderSystem;
use airga::transfer::h2_error;
use anyhow::Context;
use serde::Serialize;
use std::path::Path;
use std::time::Instant;

pub fn generate_cmd(spec: &ModelSpec, out: &Path) -> Result<i32, Failure> {
    spec.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let sys = generate(spec)?;
    write_system(&sys, out, Some(&spec.family.to_string()))
        .map_err(|e| Failure::Other(e.into()))?;
    println!(
        "wrote {} model (n = {}) to {}",
        spec.family,
        spec.n,
        out.display()
    );
    Ok(0)
}

fn load_model(cfg: &RunConfig) -> Result<(SecondOrderSystem, ModelInfo), Failure> {
    match &cfg.model {
        ModelSource::Generated(spec) => {
            let sys = generate(spec)?;
            let info = ModelInfo {
                source: "generated".into(),
                family: Some(spec.family.to_string()),
                n: spec.n,
                seed: Some(spec.seed),
                alpha: spec.alpha,
                beta: spec.beta,
                damping_warning: false,
            };
            Ok((sys, info))
        }
        ModelSource::Directory(dir) => {
            if !dir.is_dir() {
                return Err(Failure::Missing(format!(
                    "model directory {}",
                    dir.display()
                )));
            }
            let loaded = read_system(dir)?;
            if loaded.damping_warning {
                eprintln!("warning: stored D differs from alpha M + beta K; using the stored D");
            }
            let info = ModelInfo {
                source: dir.display().to_string(),
                family: loaded.meta.family.clone(),
                n: loaded.system.n(),
                seed: None,
                alpha: loaded.meta.alpha,
                beta: loaded.meta.beta,
                damping_warning: loaded.damping_warning,
            };
            Ok((loaded.system, info))
        }
    }
}

fn options(cfg: &RunConfig, solver: SolverConfig) -> Result<AirgaOptions, Failure> {
    Ok(AirgaOptions {
        r_max: cfg.r_max,
        outer_tol: cfg.outer_tol,
        inner_tol: cfg.inner_tol,
        max_outer: cfg.max_outer,
        grid: cfg.grid()?,
        solver,
        replay: None,
    })
}

fn config_info(cfg: &RunConfig) -> Result<ConfigInfo, Failure> {
    Ok(ConfigInfo {
        r_max: cfg.r_max,
        initial_points: cfg.initial_points()?.points().to_vec(),
        outer_tol: cfg.outer_tol,
        inner_tol: cfg.inner_tol,
        max_outer: cfg.max_outer,
        solver: cfg.solver,
        grid: GridInfo {
            lo: cfg.grid_lo,
            hi: cfg.grid_hi,
            points: cfg.grid_points,
        },
    })
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))
        .map_err(Failure::Other)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).context("serializing JSON")?;
    std::fs::write(path, text + "\n")
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(Failure::Other)
}

#[derive(Serialize)]
struct SolverFailure<'a> {
    schema_version: u32,
    error: &'static str,
    message: String,
    solver: &'a SolverConfig,
}

/// Runs the reduction; a solver failure is also written to `error.json`.
fn run_reduction(
    sys: &SecondOrderSystem,
    cfg: &RunConfig,
    opts: &AirgaOptions,
) -> Result<AirgaResult, Failure> {
    airga_reduce(sys, &cfg.initial_points()?, opts).map_err(|e| {
        let failure = Failure::from(e);
        if let Failure::Solver(inner) = &failure {
            let diag = SolverFailure {
                schema_version: crate::report::SCHEMA_VERSION,
                error: "solver_failure",
                message: inner.to_string(),
                solver: &opts.solver,
            };
            if let Ok(text) = serde_json::to_string_pretty(&diag) {
                println!("{text}");
                let _ = std::fs::create_dir_all(&cfg.output_dir);
                let _ = std::fs::write(cfg.output_dir.join("error.json"), text + "\n");
            }
        }
        failure
    })
}

pub fn reduce_cmd(cfg: &RunConfig) -> Result<i32, Failure> {
    let start = Instant::now();
    let (sys, model) = load_model(cfg)?;
    let opts = options(cfg, cfg.solver)?;
    let run = run_reduction(&sys, cfg, &opts)?;
    let cond = if cfg.kappa {
        Some(condition_number(&sys, &opts.grid)?)
    } else {
        None
    };
    let report = Report::new(
        model,
        config_info(cfg)?,
        &run,
        cond.as_ref(),
        start.elapsed().as_secs_f64(),
    )?;

    let out = &cfg.output_dir;
    create_dir(out)?;
    let red = &run.reduced;
    for (name, block) in [
        ("M_hat.mtx", &red.m_hat),
        ("D_hat.mtx", &red.d_hat),
        ("K_hat.mtx", &red.k_hat),
        ("F_hat.mtx", &red.f_hat),
        ("Cp_hat.mtx", &red.cp_hat),
        ("Cv_hat.mtx", &red.cv_hat),
        ("V.mtx", &red.basis_v),
    ] {
        write_dense(&out.join(name), block).map_err(|e| Failure::Other(e.into()))?;
    }
    write_json(&out.join("report.json"), &report)?;

    println!(
        "reduced order {} after {} outer iterations ({}), report in {}",
        report.reduced_order,
        report.iterations.len(),
        if run.converged {
            "converged"
        } else {
            "not converged"
        },
        out.join("report.json").display()
    );
    Ok(if run.converged { 0 } else { EXIT_NOT_CONVERGED })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendRow {
    pub iteration: usize,
    pub tol: f64,
    pub h2_error: f64,
    pub eta_f: f64,
    pub xpinv_f: Option<f64>,
    pub z2: Option<f64>,
    pub cg_iters: usize,
    pub rcg_iters: usize,
    pub cg_secs: f64,
    pub rcg_secs: f64,
}

pub fn sweep_cmd(cfg: &RunConfig) -> Result<i32, Failure> {
    if cfg.tolerances.len() < 2 {
        return Err(Failure::Usage("sweep needs at least two tolerances".into()));
    }
    if cfg.tolerances.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
        return Err(Failure::Usage("tolerances must lie in (0, 1)".into()));
    }
    let (sys, _) = load_model(cfg)?;
    let reference = run_reduction(&sys, cfg, &options(cfg, SolverConfig::direct())?)?;
    let plan = reference.replay_plan();
    let pc = cfg.solver.preconditioner;
    // The η, X⁺ and Z columns come from rcg when it was requested, else cg.
    let primary = if cfg.solver.mode == SolverMode::Rcg {
        SolverMode::Rcg
    } else {
        SolverMode::Cg
    };

    let mut rows = Vec::new();
    for &tol in &cfg.tolerances {
        let mut runs = Vec::new();
        for solver in [SolverConfig::cg(tol, pc), SolverConfig::rcg(tol, pc)] {
            let mut opts = options(
                cfg,
                SolverConfig {
                    max_iter: cfg.solver.max_iter,
                    ..solver
                },
            )?;
            opts.replay = Some(plan.clone());
            runs.push(run_reduction(&sys, cfg, &opts)?);
        }
        let (cg, rcg) = (&runs[0], &runs[1]);
        let main = if primary == SolverMode::Rcg { rcg } else { cg };
        for (k, exact) in reference.trace.iter().enumerate() {
            let rep = stability_report(&main.trace[k], None)?;
            rows.push(TrendRow {
                iteration: k + 1,
                tol,
                h2_error: h2_error(&exact.reduced, &main.trace[k].reduced, &cfg.grid()?)?,
                eta_f: rep.eta_norm_f,
                xpinv_f: rep.x_pinv_norm_f.is_finite().then_some(rep.x_pinv_norm_f),
                z2: rep.z_norm_2.is_finite().then_some(rep.z_norm_2),
                cg_iters: cg.trace[k].total_iterations(),
                rcg_iters: rcg.trace[k].total_iterations(),
                cg_secs: cg.trace[k].solve_seconds(),
                rcg_secs: rcg.trace[k].solve_seconds(),
            });
        }
        eprintln!("tolerance {tol:e} done");
    }

    create_dir(&cfg.output_dir)?;
    write_trends(&cfg.output_dir.join("trends.csv"), &rows)?;
    write_accuracy_table(&cfg.output_dir.join("accuracy.csv"), &cfg.tolerances, &rows)?;
    print_trends(&rows);
    Ok(0)
}

fn csv_err(e: csv::Error) -> Failure {
    Failure::Other(anyhow::Error::new(e))
}

fn write_trends(path: &Path, rows: &[TrendRow]) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().context("flushing trends.csv")?;
    Ok(())
}

/// Final H₂ errors laid out as outer iteration × tolerance.
fn write_accuracy_table(path: &Path, tols: &[f64], rows: &[TrendRow]) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header = vec!["iteration".to_string()];
    header.extend(tols.iter().map(|t| format!("tol={t:e}")));
    w.write_record(&header).map_err(csv_err)?;
    let iterations = rows.iter().map(|r| r.iteration).max().unwrap_or(0);
    for k in 1..=iterations {
        let mut rec = vec![k.to_string()];
        for &t in tols {
            let v = rows
                .iter()
                .find(|r| r.iteration == k && r.tol == t)
                .map(|r| r.h2_error);
            rec.push(v.map(|v| format!("{v:e}")).unwrap_or_default());
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().context("flushing accuracy.csv")?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.3e}"))
}

fn print_trends(rows: &[TrendRow]) {
    println!(
        "{:>4} {:>8} {:>11} {:>11} {:>11} {:>11} {:>9} {:>9}",
        "iter", "tol", "h2_error", "eta_f", "xpinv_f", "z2", "cg_iters", "rcg_iters"
    );
    for r in rows {
        println!(
            "{:>4} {:>8.0e} {:>11.3e} {:>11.3e} {:>11} {:>11} {:>9} {:>9}",
            r.iteration,
            r.tol,
            r.h2_error,
            r.eta_f,
            opt(r.xpinv_f),
            opt(r.z2),
            r.cg_iters,
            r.rcg_iters
        );
    }
}

fn verdict(ok: Option<bool>) -> &'static str {
    match ok {
        Some(true) => "PASS",
        Some(false) => "FAIL",
        None => "n/a (rerun reduce with --kappa)",
    }
}

pub fn diagnose_cmd(run_dir: &Path) -> Result<i32, Failure> {
    let path = run_dir.join("report.json");
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            eprintln!("missing file: {}", path.display());
            return Ok(EXIT_MISSING);
        }
        Err(e) => return Err(Failure::Other(anyhow::Error::new(e))),
    };
    let report: Report = match serde_json::from_str(&text) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("malformed report {}: {e}", path.display());
            return Ok(EXIT_MALFORMED);
        }
    };
    if report.schema_version != crate::report::SCHEMA_VERSION {
        eprintln!(
            "unsupported report schema_version {}",
            report.schema_version
        );
        return Ok(EXIT_MALFORMED);
    }

    println!(
        "model n = {} ({}), solver {} (tol {:e}), reduced order {}, {}",
        report.model.n,
        report
            .model
            .family
            .as_deref()
            .unwrap_or(&report.model.source),
        report.config.solver.mode,
        report.config.solver.rel_tol,
        report.reduced_order,
        if report.converged {
            "converged"
        } else {
            "not converged"
        }
    );
    println!(
        "{:>4} {:>11} {:>11} {:>11} {:>11} {:>11} {:>11} {:>8}",
        "iter", "h2_change", "eta_f", "xpinv_f", "z2", "orth_diag", "orth_off", "its"
    );
    for it in &report.iterations {
        println!(
            "{:>4} {:>11} {:>11.3e} {:>11} {:>11} {:>11.3e} {:>11.3e} {:>8}",
            it.iteration,
            opt(it.h2_change),
            it.eta_norm_f,
            opt(it.x_pinv_norm_f),
            opt(it.z_norm_2),
            it.orthogonality.diag,
            it.orthogonality.off_diagonal(),
            it.solver_iterations
        );
    }
    if let Some(c) = &report.conditioning {
        println!(
            "conditioning: |L^-1|_Hinf = {:.3e}, |K|_2 = {:.3e}, kappa = {}",
            c.l_inv_hinf,
            c.k_norm_2,
            opt(c.kappa)
        );
    }

    let c = report.theorem2_checks;
    println!(
        "Theorem 2(a) Ritz-Galerkin orthogonality: {}",
        verdict(Some(c.ritz_galerkin_ok))
    );
    println!(
        "Theorem 2(a) extra orthogonality:        {}",
        verdict(Some(c.extra_orthogonality_ok))
    );
    println!(
        "Theorem 2(b) L(s) invertible:            {}",
        verdict(c.l_invertible_ok)
    );
    println!(
        "Theorem 2(b) |L^-1|_Hinf < 1:            {}",
        verdict(c.l_hinf_lt_1)
    );
    println!(
        "Theorem 2(c) |Z|_2 < 1:                  {}",
        verdict(Some(c.z_norm_lt_1))
    );

    let mut violated = Vec::new();
    if !(c.ritz_galerkin_ok && c.extra_orthogonality_ok) {
        violated.push("Theorem 2(a) violated");
    }
    if c.l_invertible_ok == Some(false) || c.l_hinf_lt_1 == Some(false) {
        violated.push("Theorem 2(b) violated");
    }
    if !c.z_norm_lt_1 {
        violated.push("Theorem 2(c) violated");
    }
    for v in &violated {
        println!("{v}");
    }
    Ok(if violated.is_empty() {
        0
    } else {
        EXIT_VIOLATION
    })
}
