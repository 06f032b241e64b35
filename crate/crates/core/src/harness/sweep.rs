use std::path::Path;

use serde::Serialize;

use super::{HarnessError, RunConfig};
use crate::asymptotics::predict_lambda;
use crate::effective::{bs_levels, quantize_1d_with, HatFieldGrid, QuantizeOptions};
use crate::field::{locate_minimum, normalize_at_minimum, well_constants, FieldModel, Point, WellData, DEFAULT_MIN_TOL};
use crate::output::{write_csv_file, Cell};
use crate::solver2d::{
    agmon_mass, assemble, count_below, lower_bound_check, lowest_eigs_with, DiscretizationConfig, SolverOptions,
};

/// One `(h, j)` comparison across the four routes. Missing values are NaN
/// and the reason is in `status`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub h: f64,
    pub j: usize,
    pub lambda_direct: f64,
    pub residual_direct: f64,
    pub lambda_thm11: f64,
    pub lambda_lower: f64,
    pub lambda_upper: f64,
    /// `h·E_j` from Bohr–Sommerfeld.
    pub lambda_bs: f64,
    /// `h·E_j` from the quantized symbol.
    pub lambda_1d: f64,
    pub gap_direct: f64,
    pub count_below_threshold: Option<usize>,
    pub agmon_mass: f64,
    pub lower_bound_margin: f64,
    /// `|λ_direct − λ_thm11| / h^{5/2}`.
    pub bracket_ratio: f64,
    pub status: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct StageFailure {
    pub h: Option<f64>,
    pub stage: &'static str,
    pub message: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub config: RunConfig,
    pub well: Option<WellData>,
    pub rows: Vec<SweepRow>,
    pub failures: Vec<StageFailure>,
}

impl SweepReport {
    pub fn is_clean(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn rows_for(&self, j: usize) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(move |r| r.j == j)
    }
}

/// The field of a configuration, translated to its minimum and gauge
/// normalized, with its well constants (`gamma0` overridden if set).
pub fn prepare_well(config: &RunConfig) -> Result<(FieldModel, WellData), HarnessError> {
    let raw = config.field.build().map_err(|e| HarnessError::Config(e.to_string()))?;
    let (x0, _) = locate_minimum(&raw, Point::ORIGIN, DEFAULT_MIN_TOL)?;
    let model = normalize_at_minimum(&raw, x0);
    let mut well = well_constants(&model, Point::ORIGIN)?;
    well.x0 = x0;
    if let Some(g) = config.gamma0 {
        well.gamma0 = g;
    }
    Ok((model, well))
}

pub fn solver_options(config: &RunConfig) -> SolverOptions {
    SolverOptions {
        tol: config.solver.tol,
        memory_budget: config.solver.memory_budget_mb << 20,
        seed: config.seed,
        ..Default::default()
    }
}

pub fn discretization(config: &RunConfig, model: &FieldModel, well: &WellData, h: f64) -> Result<DiscretizationConfig, HarnessError> {
    let mut local = well.clone();
    local.x0 = Point::ORIGIN;
    Ok(DiscretizationConfig::for_well(model, &local, h, config.grid_factor, config.stencil_order)?)
}

struct Direct {
    values: Vec<f64>,
    residuals: Vec<f64>,
    agmon: Vec<f64>,
    margins: Vec<f64>,
    count: Option<usize>,
}

struct Job {
    direct: Result<Direct, String>,
    count_error: Option<String>,
    bs: Result<Vec<f64>, String>,
    quantized: Result<Vec<f64>, String>,
}

fn run_direct(config: &RunConfig, model: &FieldModel, well: &WellData, h: f64) -> Result<(Direct, Option<String>), HarnessError> {
    let cfg = discretization(config, model, well, h)?;
    let op = assemble(model, &cfg)?;
    let res = lowest_eigs_with(&op, config.pairs_needed(), &solver_options(config))?;
    let level = config.experiments.agmon_level.unwrap_or(well.b0 + well.gamma0);
    let agmon = if config.experiments.agmon { agmon_mass(&res, model, level) } else { vec![f64::NAN; res.eigenvalues.len()] };
    let margins = lower_bound_check(&res, model);
    let (count, count_error) = if config.experiments.count {
        match count_below(&op, config.experiments.count_level * h) {
            Ok(c) => (Some(c), None),
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        (None, None)
    };
    let values = res.eigenvalues.clone();
    Ok((Direct { values, residuals: res.residuals, agmon, margins, count }, count_error))
}

/// Runs every route for every `h` of the configuration. Only configuration
/// problems are returned as errors; numerical failures become markers in
/// the report.
pub fn run_sweep(config: &RunConfig) -> Result<SweepReport, HarnessError> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs.unwrap_or(0))
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    pool.install(|| sweep_inner(config))
}

fn sweep_inner(config: &RunConfig) -> Result<SweepReport, HarnessError> {
    let (model, well) = match prepare_well(config) {
        Ok(p) => p,
        Err(HarnessError::Config(m)) => return Err(HarnessError::Config(m)),
        Err(e) => return Ok(failed_report(config, "well", e.to_string())),
    };
    let grid = HatFieldGrid::build(&model, &well, config.effective.hat_points).map_err(|e| e.to_string());
    let qopts = QuantizeOptions {
        oversample: config.effective.oversample,
        collar: config.effective.collar,
        ..Default::default()
    };
    let m = config.pairs_needed();
    let jobs: Vec<Job> = {
        use rayon::prelude::*;
        config
            .h
            .par_iter()
            .map(|&h| {
                let (direct, count_error) = match run_direct(config, &model, &well, h) {
                    Ok((d, ce)) => (Ok(d), ce),
                    Err(e) => (Err(e.to_string()), None),
                };
                let (bs, quantized) = match &grid {
                    Ok(g) => (
                        bs_levels(g, h).map(|l| l.levels).map_err(|e| e.to_string()),
                        quantize_1d_with(g, h, m, &qopts).map_err(|e| e.to_string()),
                    ),
                    Err(e) => (Err(e.clone()), Err(e.clone())),
                };
                Job { direct, count_error, bs, quantized }
            })
            .collect()
    };
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    if let Err(e) = &grid {
        failures.push(StageFailure { h: None, stage: "effective", message: e.clone() });
    }
    for (&h, job) in config.h.iter().zip(&jobs) {
        if let Err(e) = &job.direct {
            failures.push(StageFailure { h: Some(h), stage: "solve2d", message: e.clone() });
        }
        if let Some(e) = &job.count_error {
            failures.push(StageFailure { h: Some(h), stage: "count", message: e.clone() });
        }
        if grid.is_ok() {
            if let Err(e) = &job.bs {
                failures.push(StageFailure { h: Some(h), stage: "bohr-sommerfeld", message: e.clone() });
            }
            if let Err(e) = &job.quantized {
                failures.push(StageFailure { h: Some(h), stage: "quantize", message: e.clone() });
            }
        }
        for &j in &config.j {
            rows.push(make_row(config, &well, h, j, job));
        }
    }
    Ok(SweepReport { config: config.clone(), well: Some(well), rows, failures })
}

fn make_row(config: &RunConfig, well: &WellData, h: f64, j: usize, job: &Job) -> SweepRow {
    let p = predict_lambda(well, j, h, config.solver.bracket_c);
    let mut status = Vec::new();
    let pick = |v: &Result<Vec<f64>, String>, what: &str, status: &mut Vec<String>| match v {
        Ok(l) => l.get(j).map(|e| h * e).unwrap_or_else(|| {
            status.push(format!("{what}: level {j} above the window"));
            f64::NAN
        }),
        Err(_) => {
            status.push(format!("{what} failed"));
            f64::NAN
        }
    };
    let lambda_bs = pick(&job.bs, "bohr-sommerfeld", &mut status);
    let lambda_1d = pick(&job.quantized, "quantize", &mut status);
    let nan = f64::NAN;
    let (lambda_direct, residual_direct, gap_direct, agmon, margin, count) = match &job.direct {
        Ok(d) => {
            let band_top = h * (3.0 - 0.25) * well.b0;
            if d.values[j] > band_top {
                status.push(format!("direct eigenvalue {j} lies above the lowest band"));
            }
            (d.values[j], d.residuals[j], d.values[j + 1] - d.values[j], d.agmon[j], d.margins[j], d.count)
        }
        Err(_) => {
            status.push("solve2d failed".into());
            (nan, nan, nan, nan, nan, None)
        }
    };
    if job.count_error.is_some() {
        status.push("count failed".into());
    }
    SweepRow {
        h,
        j,
        lambda_direct,
        residual_direct,
        lambda_thm11: p.value,
        lambda_lower: p.lower,
        lambda_upper: p.upper,
        lambda_bs,
        lambda_1d,
        gap_direct,
        count_below_threshold: count,
        agmon_mass: agmon,
        lower_bound_margin: margin,
        bracket_ratio: (lambda_direct - p.value).abs() / h.powf(2.5),
        status: if status.is_empty() { "ok".into() } else { status.join("; ") },
    }
}

fn failed_report(config: &RunConfig, stage: &'static str, message: String) -> SweepReport {
    let nan = f64::NAN;
    let mut rows = Vec::new();
    for &h in &config.h {
        for &j in &config.j {
            rows.push(SweepRow {
                h,
                j,
                lambda_direct: nan,
                residual_direct: nan,
                lambda_thm11: nan,
                lambda_lower: nan,
                lambda_upper: nan,
                lambda_bs: nan,
                lambda_1d: nan,
                gap_direct: nan,
                count_below_threshold: None,
                agmon_mass: nan,
                lower_bound_margin: nan,
                bracket_ratio: nan,
                status: format!("{stage}: {message}"),
            });
        }
    }
    SweepReport { config: config.clone(), well: None, rows, failures: vec![StageFailure { h: None, stage, message }] }
}

pub const SWEEP_COLUMNS: &[&str] = &[
    "h",
    "j",
    "lambda_direct",
    "residual_direct",
    "lambda_thm11",
    "lambda_lower",
    "lambda_upper",
    "lambda_bs",
    "lambda_1d",
    "gap_direct",
    "count_below_threshold",
    "agmon_mass",
    "lower_bound_margin",
    "bracket_ratio",
    "status",
];

pub fn write_sweep_csv(report: &SweepReport, path: &Path) -> std::io::Result<()> {
    let rows: Vec<Vec<Cell>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.h.into(),
                r.j.into(),
                r.lambda_direct.into(),
                r.residual_direct.into(),
                r.lambda_thm11.into(),
                r.lambda_lower.into(),
                r.lambda_upper.into(),
                r.lambda_bs.into(),
                r.lambda_1d.into(),
                r.gap_direct.into(),
                r.count_below_threshold.map_or(Cell::Text(String::new()), Cell::from),
                r.agmon_mass.into(),
                r.lower_bound_margin.into(),
                r.bracket_ratio.into(),
                r.status.clone().into(),
            ]
        })
        .collect();
    write_csv_file(path, SWEEP_COLUMNS, &rows)
}
