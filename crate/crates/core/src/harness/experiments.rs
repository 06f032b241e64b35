use serde::Serialize;

use super::{discretization, prepare_well, solver_options, HarnessError, RunConfig};
use crate::effective::{action_profile, bs_levels, quantize_1d_with, sublevel_flux, ActionProfile, HatFieldGrid, QuantizeOptions};
use crate::field::{FieldModel, Point, Rect, WellData};
use crate::oscillator::{random_fiber_suite, FiberReport};
use crate::solver2d::{stability_experiment, BumpSpec, StabilityReport};

/// The bump experiment at every `h` of the configuration.
pub fn stability_sweep(config: &RunConfig) -> Result<(WellData, Vec<StabilityReport>), HarnessError> {
    let (model, well) = prepare_well(config)?;
    let s = &config.stability;
    let bump = BumpSpec { center: Point::new(s.center[0], s.center[1]), radius: s.radius, amplitude: s.amplitude, eta: s.eta };
    let reports = config
        .h
        .iter()
        .map(|&h| {
            let cfg = discretization(config, &model, &well, h)?;
            let c = bump.center;
            let r = bump.radius + 0.1;
            let cfg = cfg.enlarged_to(&Rect::new(c.x - r, c.x + r, c.y - r, c.y + r));
            Ok(stability_experiment(&model, well.b0, &bump, &cfg, config.pairs_needed(), &solver_options(config))?)
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    Ok((well, reports))
}

#[derive(Clone, Debug, Serialize)]
pub struct EffectiveLevels {
    pub h: f64,
    pub bohr_sommerfeld: Vec<f64>,
    pub quantized: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EffectiveRun {
    pub well: WellData,
    #[serde(skip)]
    pub grid: HatFieldGrid,
    #[serde(skip)]
    pub model: FieldModel,
    pub profile: ActionProfile,
    /// `∫_{b ≤ E_max} b`, the phase-space area by an independent route.
    pub flux_at_ceiling: f64,
    pub levels: Vec<EffectiveLevels>,
}

/// `b̂` grid, action profile and both quantizations at every `h`.
pub fn effective_run(config: &RunConfig) -> Result<EffectiveRun, HarnessError> {
    let (model, well) = prepare_well(config)?;
    let grid = HatFieldGrid::build(&model, &well, config.effective.hat_points)?;
    let lo = grid.min_value();
    let energies: Vec<f64> = (0..=128).map(|i| lo + (grid.e_max - lo) * i as f64 / 128.0).collect();
    let profile = action_profile(&grid, &energies)?;
    let qopts = QuantizeOptions { oversample: config.effective.oversample, collar: config.effective.collar, ..Default::default() };
    let levels = config
        .h
        .iter()
        .map(|&h| {
            let bs = bs_levels(&grid, h)?.levels;
            let quantized = quantize_1d_with(&grid, h, bs.len().max(1), &qopts)?;
            Ok(EffectiveLevels { h, bohr_sommerfeld: bs, quantized })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    let flux_at_ceiling = sublevel_flux(&model, grid.e_max, 256);
    Ok(EffectiveRun { well, grid, model, profile, flux_at_ceiling, levels })
}

pub fn oscillator_suite(config: &RunConfig) -> Result<Vec<FiberReport>, HarnessError> {
    let o = &config.oscillator;
    Ok(random_fiber_suite(o.count, config.seed, o.k_max, o.n_grid, o.order)?)
}
