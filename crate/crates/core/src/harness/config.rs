use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::field::{FieldSpec, CATALOG};
use crate::solver2d::MAX_SPACING_FACTOR;

fn default_j() -> Vec<usize> {
    vec![0, 1, 2]
}
fn default_grid_factor() -> f64 {
    0.12
}
fn default_order() -> usize {
    4
}
fn default_fit_order() -> usize {
    2
}
fn default_seed() -> u64 {
    0x5eed
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    /// Relative residual required of every eigenpair.
    pub tol: f64,
    /// Band factor budget in MiB before falling back to LOBPCG.
    pub memory_budget_mb: usize,
    /// Bracket constant for the two-term prediction.
    pub bracket_c: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings { tol: 1e-10, memory_budget_mb: 2048, bracket_c: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EffectiveSettings {
    /// Points per axis of the `b̂` grid.
    pub hat_points: usize,
    pub oversample: f64,
    pub collar: f64,
}

impl Default for EffectiveSettings {
    fn default() -> Self {
        EffectiveSettings { hat_points: 401, oversample: 1.5, collar: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Experiments {
    pub count: bool,
    /// Count eigenvalues below `count_level·h`.
    pub count_level: f64,
    pub agmon: bool,
    /// Mass outside `{b ≤ agmon_level}`; defaults to `b₀ + γ₀`.
    pub agmon_level: Option<f64>,
    pub stability: bool,
}

impl Default for Experiments {
    fn default() -> Self {
        Experiments { count: true, count_level: 1.5, agmon: true, agmon_level: None, stability: false }
    }
}

/// Bump in the potential, placed in coordinates centred at the minimum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StabilitySettings {
    pub center: [f64; 2],
    pub radius: f64,
    pub amplitude: f64,
    /// The bump support must lie in `{b > b₀ + eta}`.
    pub eta: f64,
}

impl Default for StabilitySettings {
    fn default() -> Self {
        StabilitySettings { center: [1.2, 0.0], radius: 0.2, amplitude: 1.0, eta: 0.8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OscillatorSettings {
    pub count: usize,
    pub k_max: usize,
    pub n_grid: usize,
    pub order: usize,
}

impl Default for OscillatorSettings {
    fn default() -> Self {
        OscillatorSettings {
            count: 50,
            k_max: 5,
            n_grid: crate::oscillator::DEFAULT_N_GRID,
            order: crate::oscillator::DEFAULT_ORDER,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputSettings {
    pub dir: PathBuf,
}

impl Default for OutputSettings {
    fn default() -> Self {
        OutputSettings { dir: PathBuf::from("out") }
    }
}

/// A validated run configuration with every default filled in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub field: FieldSpec,
    pub h: Vec<f64>,
    #[serde(default = "default_j")]
    pub j: Vec<usize>,
    /// Grid spacing in units of `√(h/b₀)`.
    #[serde(default = "default_grid_factor")]
    pub grid_factor: f64,
    #[serde(default = "default_order")]
    pub stencil_order: usize,
    /// Energy window above `b₀`; the well's own default when absent.
    #[serde(default)]
    pub gamma0: Option<f64>,
    #[serde(default = "default_fit_order")]
    pub fit_order: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub jobs: Option<usize>,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub effective: EffectiveSettings,
    #[serde(default)]
    pub experiments: Experiments,
    #[serde(default)]
    pub stability: StabilitySettings,
    #[serde(default)]
    pub oscillator: OscillatorSettings,
    #[serde(default)]
    pub output: OutputSettings,
}

const TOP_KEYS: &[&str] = &[
    "field",
    "h",
    "j",
    "grid_factor",
    "stencil_order",
    "gamma0",
    "fit_order",
    "seed",
    "jobs",
    "solver",
    "effective",
    "experiments",
    "stability",
    "oscillator",
    "output",
];

const TABLE_KEYS: &[(&str, &[&str])] = &[
    ("field", &["terms", "domain"]),
    ("solver", &["tol", "memory_budget_mb", "bracket_c"]),
    ("effective", &["hat_points", "oversample", "collar"]),
    ("experiments", &["count", "count_level", "agmon", "agmon_level", "stability"]),
    ("stability", &["center", "radius", "amplitude", "eta"]),
    ("oscillator", &["count", "k_max", "n_grid", "order"]),
    ("output", &["dir"]),
];

fn unknown_keys(doc: &toml::Table) -> Vec<String> {
    let mut out = Vec::new();
    for (k, v) in doc {
        if !TOP_KEYS.contains(&k.as_str()) {
            out.push(k.clone());
            continue;
        }
        if let (Some((_, known)), Some(t)) = (TABLE_KEYS.iter().find(|(name, _)| name == k), v.as_table()) {
            out.extend(t.keys().filter(|s| !known.contains(&s.as_str())).map(|s| format!("{k}.{s}")));
        }
    }
    out
}

/// Parses and validates a TOML run configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, HarnessError> {
    let doc: toml::Table = text.parse().map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
    let unknown = unknown_keys(&doc);
    if !unknown.is_empty() {
        return Err(HarnessError::Config(format!("unknown keys: {}", unknown.join(", "))));
    }
    let cfg: RunConfig = doc.try_into().map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    /// A configuration with every default and the given field and `h` list.
    pub fn new(field: FieldSpec, h: Vec<f64>) -> Self {
        RunConfig {
            field,
            h,
            j: default_j(),
            grid_factor: default_grid_factor(),
            stencil_order: default_order(),
            gamma0: None,
            fit_order: default_fit_order(),
            seed: default_seed(),
            jobs: None,
            solver: SolverSettings::default(),
            effective: EffectiveSettings::default(),
            experiments: Experiments::default(),
            stability: StabilitySettings::default(),
            oscillator: OscillatorSettings::default(),
            output: OutputSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if let FieldSpec::Catalog(name) = &self.field {
            if !CATALOG.contains(&name.as_str()) {
                return bad(format!("unknown catalog field {name:?}; known: {}", CATALOG.join(", ")));
            }
        }
        if self.h.is_empty() {
            return bad("h must list at least one value".into());
        }
        if self.h.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
            return bad("h must be positive".into());
        }
        let mut hs = self.h.clone();
        hs.sort_by(f64::total_cmp);
        if hs.windows(2).any(|w| w[0] == w[1]) {
            return bad("h values must be distinct".into());
        }
        if self.j.is_empty() {
            return bad("j must list at least one index".into());
        }
        if !(self.grid_factor > 0.0 && self.grid_factor <= MAX_SPACING_FACTOR) {
            return bad(format!(
                "grid_factor must lie in (0, {MAX_SPACING_FACTOR}] (spacing ≤ 0.15·√(h/b₀)), got {}",
                self.grid_factor
            ));
        }
        if self.stencil_order < 2 || !self.stencil_order.is_multiple_of(2) {
            return bad(format!("stencil_order must be even and >= 2, got {}", self.stencil_order));
        }
        if let Some(g) = self.gamma0 {
            if !(g > 0.0 && g.is_finite()) {
                return bad(format!("gamma0 must be positive, got {g}"));
            }
        }
        if !(self.solver.tol > 0.0 && self.solver.tol < 1e-3) {
            return bad(format!("solver.tol must lie in (0, 1e-3), got {}", self.solver.tol));
        }
        if !(self.solver.bracket_c > 0.0) {
            return bad("solver.bracket_c must be positive".into());
        }
        if self.effective.hat_points < 8 {
            return bad("effective.hat_points must be at least 8".into());
        }
        if !(self.effective.oversample >= 1.0) || !(self.effective.collar >= 0.0) {
            return bad("effective.oversample must be >= 1 and effective.collar >= 0".into());
        }
        if !(self.experiments.count_level > 0.0) {
            return bad("experiments.count_level must be positive".into());
        }
        if !(self.stability.radius > 0.0) || !(self.stability.eta >= 0.0) {
            return bad("stability.radius must be positive and stability.eta non-negative".into());
        }
        if self.oscillator.n_grid < 16 || self.oscillator.order < 2 || !self.oscillator.order.is_multiple_of(2) {
            return bad("oscillator.n_grid must be >= 16 and oscillator.order even".into());
        }
        if self.jobs == Some(0) {
            return bad("jobs must be at least 1".into());
        }
        Ok(())
    }

    /// Number of eigenpairs the sweep needs: every requested index plus the
    /// next one for the gap.
    pub fn pairs_needed(&self) -> usize {
        self.j.iter().max().map_or(1, |m| m + 2)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config("field = \"isotropic_quadratic\"\nh = [0.05]\n").unwrap();
        assert_eq!(c, RunConfig::new(FieldSpec::catalog("isotropic_quadratic"), vec![0.05]));
        assert_eq!(c.j, vec![0, 1, 2]);
        assert_eq!(c.grid_factor, 0.12);
        assert_eq!(c.solver.tol, 1e-10);
    }

    #[test]
    fn partial_tables_keep_other_defaults() {
        let c = parse_config("field = \"isotropic_quadratic\"\nh = [0.05]\n[oscillator]\ncount = 4\n").unwrap();
        assert_eq!(c.oscillator.count, 4);
        assert_eq!(c.oscillator.k_max, OscillatorSettings::default().k_max);
    }

    #[test]
    fn negative_h_is_rejected() {
        let e = parse_config("field = \"isotropic_quadratic\"\nh = [0.1, -0.05]\n").unwrap_err();
        assert!(e.to_string().contains("h must be positive"), "{e}");
    }

    #[test]
    fn unknown_keys_are_listed() {
        let e = parse_config("field = \"isotropic_quadratic\"\nh = [0.1]\nfoo = 1\n[solver]\ntoll = 1e-9\n").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("foo") && msg.contains("solver.toll"), "{msg}");
    }

    #[test]
    fn overrides_are_echoed() {
        let c = parse_config("field = \"isotropic_quadratic\"\nh = [0.05]\ngamma0 = 0.4\ngrid_factor = 0.1\n").unwrap();
        let echo = c.to_toml();
        assert!(echo.contains("gamma0 = 0.4") && echo.contains("grid_factor = 0.1"), "{echo}");
        assert_eq!(parse_config(&echo).unwrap(), c);
    }

    #[test]
    fn polynomial_field_and_rules() {
        let c = parse_config("field = { terms = [[1, 0, 1.0], [3, 0, 0.5], [1, 2, 1.0]] }\nh = [0.1, 0.05]\n").unwrap();
        assert!(matches!(c.field, FieldSpec::Polynomial { .. }));
        assert!(parse_config("field = \"isotropic_quadratic\"\nh = [0.1]\ngrid_factor = 0.2\n").is_err());
        assert!(parse_config("field = \"isotropic_quadratic\"\nh = [0.1, 0.1]\n").is_err());
        assert!(parse_config("field = \"nope\"\nh = [0.1]\n").is_err());
    }
}
