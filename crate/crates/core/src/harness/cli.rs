//! The `magspec` command line.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::json;

use super::{
    discretization, effective_run, fit_report, oscillator_suite, parse_config, prepare_well, run_sweep, solver_options,
    stability_sweep, write_sweep_csv, HarnessError, RunConfig,
};
use crate::asymptotics::{predict_gap, predict_lambda};
use crate::output::{write_csv_file, write_json_file, Cell};
use crate::solver2d::{assemble, lower_bound_check, lowest_eigs_with, write_eigenvector_csv, write_triplets};

#[derive(Debug, Parser)]
#[command(name = "magspec", version, about = "Low-lying spectra of 2D magnetic Schrödinger operators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Seed for every random start.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Two-term eigenvalue predictions for every h and j.
    Predict,
    /// Effective symbol grid, action profile and quantized levels.
    Effective,
    /// Direct 2D solve at every h, with eigenvectors and matrix dumps.
    Solve2d,
    /// Full sweep across all routes with expansion fits.
    Sweep,
    /// Eigenvalue shifts under a far-field bump.
    Stability,
    /// Random fiber oscillator suite.
    Oscillator,
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("magspec: {e}");
            e.exit_code()
        }
    }
}

fn load(cli: &Cli) -> Result<RunConfig, HarnessError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| HarnessError::Config("--config <path> is required".into()))?;
    let text = fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
    let mut cfg = parse_config(&text)?;
    if let Some(o) = &cli.out {
        cfg.output.dir = o.clone();
    }
    if let Some(j) = cli.jobs {
        cfg.jobs = Some(j);
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<i32, HarnessError> {
    let cfg = load(cli)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.unwrap_or(0))
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let out = cfg.output.dir.clone();
    fs::create_dir_all(&out)?;
    fs::write(out.join("config.toml"), cfg.to_toml())?;
    pool.install(|| match cli.command {
        Command::Predict => predict(&cfg, &out),
        Command::Effective => effective(&cfg, &out),
        Command::Solve2d => solve2d(&cfg, &out),
        Command::Sweep => sweep(&cfg, &out),
        Command::Stability => stability(&cfg, &out),
        Command::Oscillator => oscillator(&cfg, &out),
    })
}

fn predict(cfg: &RunConfig, out: &Path) -> Result<i32, HarnessError> {
    let (_, well) = prepare_well(cfg)?;
    let mut rows = Vec::new();
    let mut preds = Vec::new();
    for &h in &cfg.h {
        for &j in &cfg.j {
            let p = predict_lambda(&well, j, h, cfg.solver.bracket_c);
            rows.push(vec![h.into(), j.into(), p.value.into(), p.lower.into(), p.upper.into(), predict_gap(&well, h).into()]);
            preds.push(p);
        }
    }
    write_csv_file(&out.join("predict.csv"), &["h", "j", "lambda_thm11", "lambda_lower", "lambda_upper", "gap"], &rows)?;
    write_json_file(&out.join("predict.json"), &json!({ "config": cfg, "well": well, "predictions": preds }))?;
    Ok(0)
}

fn effective(cfg: &RunConfig, out: &Path) -> Result<i32, HarnessError> {
    let run = effective_run(cfg)?;
    run.grid.write_csv_file(&out.join("b_hat.csv"))?;
    let prof: Vec<Vec<Cell>> = run
        .profile
        .energies
        .iter()
        .zip(&run.profile.actions)
        .map(|(e, s)| vec![(*e).into(), (*s).into()])
        .collect();
    write_csv_file(&out.join("action.csv"), &["energy", "action"], &prof)?;
    let mut rows = Vec::new();
    for l in &run.levels {
        for (n, e) in l.bohr_sommerfeld.iter().enumerate() {
            rows.push(vec![l.h.into(), n.into(), (*e).into(), l.quantized.get(n).copied().unwrap_or(f64::NAN).into()]);
        }
    }
    write_csv_file(&out.join("levels.csv"), &["h", "n", "e_bs", "e_1d"], &rows)?;
    let g = &run.grid;
    write_json_file(
        &out.join("effective.json"),
        &json!({
            "config": cfg,
            "well": run.well,
            "window": { "u": [g.u_grid[0], g.u_grid[g.nu() - 1]], "v": [g.v_grid[0], g.v_grid[g.nv() - 1]], "points": [g.nu(), g.nv()], "e_max": g.e_max },
            "action_at_ceiling": run.profile.actions.last(),
            "flux_at_ceiling": run.flux_at_ceiling,
            "levels": run.levels,
        }),
    )?;
    Ok(0)
}

fn solve2d(cfg: &RunConfig, out: &Path) -> Result<i32, HarnessError> {
    let (model, well) = prepare_well(cfg)?;
    let mut meta = Vec::new();
    for (k, &h) in cfg.h.iter().enumerate() {
        let dcfg = discretization(cfg, &model, &well, h)?;
        let op = assemble(&model, &dcfg)?;
        let res = lowest_eigs_with(&op, cfg.pairs_needed(), &solver_options(cfg))?;
        let margins = lower_bound_check(&res, &model);
        let rows: Vec<Vec<Cell>> = (0..res.eigenvalues.len())
            .map(|j| {
                vec![
                    j.into(),
                    res.eigenvalues[j].into(),
                    res.residuals[j].into(),
                    Cell::Int(res.clustered[j] as i64),
                    margins[j].into(),
                ]
            })
            .collect();
        write_csv_file(
            &out.join(format!("eigenvalues_h{k}.csv")),
            &["j", "lambda", "residual", "clustered", "lower_bound_margin"],
            &rows,
        )?;
        for &j in &cfg.j {
            write_eigenvector_csv(&res, j, &out.join(format!("eigenvector_h{k}_j{j}.csv")))?;
        }
        write_triplets(&op.matrix, &out.join(format!("matrix_h{k}.bin")))?;
        meta.push(json!({ "h": h, "index": k, "dim": op.dim(), "nnz": op.matrix.nnz(), "result": res }));
    }
    write_json_file(&out.join("solve2d.json"), &json!({ "config": cfg, "well": well, "solves": meta }))?;
    Ok(0)
}

fn sweep(cfg: &RunConfig, out: &Path) -> Result<i32, HarnessError> {
    let report = run_sweep(cfg)?;
    write_sweep_csv(&report, &out.join("sweep.csv"))?;
    let fits = fit_report(&report, cfg.fit_order);
    let (fits, fit_error) = match fits {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    write_json_file(
        &out.join("sweep.json"),
        &json!({
            "config": report.config,
            "well": report.well,
            "failures": report.failures,
            "fits": fits,
            "fit_error": fit_error,
            "rows": report.rows,
        }),
    )?;
    for f in &report.failures {
        eprintln!("magspec: {} failed at h = {:?}: {}", f.stage, f.h, f.message);
    }
    Ok(if report.is_clean() { 0 } else { 3 })
}

fn stability(cfg: &RunConfig, out: &Path) -> Result<i32, HarnessError> {
    let (well, reports) = stability_sweep(cfg)?;
    let mut rows = Vec::new();
    for r in &reports {
        for (j, ((a, b), s)) in r.eigenvalues.iter().zip(&r.perturbed).zip(&r.shifts).enumerate() {
            rows.push(vec![r.h.into(), j.into(), (*a).into(), (*b).into(), (*s).into()]);
        }
    }
    write_csv_file(&out.join("stability.csv"), &["h", "j", "lambda", "lambda_perturbed", "shift"], &rows)?;
    write_json_file(&out.join("stability.json"), &json!({ "config": cfg, "well": well, "reports": reports }))?;
    Ok(0)
}

fn oscillator(cfg: &RunConfig, out: &Path) -> Result<i32, HarnessError> {
    let reports = oscillator_suite(cfg)?;
    let rows: Vec<Vec<Cell>> = reports
        .iter()
        .map(|r| {
            vec![
                r.fiber.b_hat.into(),
                r.fiber.a_hat_y.into(),
                r.max_relative_error.into(),
                r.gauge_difference.into(),
                r.delta_error.into(),
                r.rho_error.into(),
            ]
        })
        .collect();
    write_csv_file(
        &out.join("oscillator.csv"),
        &["b_hat", "a_hat_y", "max_relative_error", "gauge_difference", "delta_error", "rho_error"],
        &rows,
    )?;
    let worst = |f: fn(&crate::oscillator::FiberReport) -> f64| reports.iter().map(f).fold(0.0, f64::max);
    write_json_file(
        &out.join("oscillator.json"),
        &json!({
            "config": cfg,
            "fibers": reports.len(),
            "max_relative_error": worst(|r| r.max_relative_error),
            "max_gauge_difference": worst(|r| r.gauge_difference),
            "max_delta_error": worst(|r| r.delta_error),
            "max_rho_error": worst(|r| r.rho_error),
        }),
    )?;
    Ok(0)
}
