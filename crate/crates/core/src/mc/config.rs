//! Experiment configuration: a TOML document with sections `network`,
//! `demand`, `policy`, `sweep`, `rng` and `output`. Unknown keys are
//! rejected.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::budget::GecParams;
use crate::demand::{FieldParams, FieldPreset};
use crate::error::{Error, Result};
use crate::pointprocess::IndependentMode;

pub const POLICIES: [&str; 3] = ["independent", "matII", "gec"];
pub const PRESETS: [&str; 4] = ["fig5-R3", "fig5-R10", "fig7-urban-shift", "fig7-urban-weighted"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub network: NetworkConfig,
    pub demand: DemandConfig,
    #[serde(default)]
    pub policy: PolicyConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    pub rng: RngConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    /// Mother intensity per km².
    pub lambda: f64,
    /// Window side `L` in km.
    #[serde(default = "default_side")]
    pub side: f64,
    /// Communication radius `R_dd` in km.
    pub r_dd: f64,
}

fn default_side() -> f64 {
    100.0
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemandMode {
    #[default]
    Uniform,
    TiltShift,
    TiltWeighted,
}

/// Which pmf the allocator optimises against under spatial demand.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocationDemand {
    /// The global Zipf law (placement blind to local demand).
    #[default]
    Global,
    /// The local pmfs averaged over every sampled pixel.
    LocalAverage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandConfig {
    pub catalog_size: usize,
    pub zipf_exponent: f64,
    #[serde(default)]
    pub mode: DemandMode,
    #[serde(default)]
    pub allocation: AllocationDemand,
    #[serde(default)]
    pub field: FieldConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    #[serde(default = "default_preset")]
    pub preset: FieldPreset,
    /// Explicit lognormal parameters; override the preset when present.
    #[serde(default)]
    pub params: Option<FieldParams>,
    #[serde(default = "default_field_side")]
    pub side: usize,
    /// Pixel edge in km.
    #[serde(default = "default_pixel")]
    pub pixel_size: f64,
    #[serde(default = "default_region_side")]
    pub region_side: usize,
    #[serde(default = "default_regions")]
    pub n_regions: usize,
}

fn default_preset() -> FieldPreset {
    FieldPreset::Urban
}
fn default_field_side() -> usize {
    120
}
fn default_pixel() -> f64 {
    0.01
}
fn default_region_side() -> usize {
    10
}
fn default_regions() -> usize {
    20
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self {
            preset: default_preset(),
            params: None,
            side: default_field_side(),
            pixel_size: default_pixel(),
            region_side: default_region_side(),
            n_regions: default_regions(),
        }
    }
}

impl FieldConfig {
    pub fn resolved_params(&self) -> FieldParams {
        self.params.unwrap_or_else(|| self.preset.params())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    #[serde(default = "default_policies")]
    pub policies: Vec<String>,
    #[serde(default)]
    pub independent_mode: IndependentMode,
    #[serde(default)]
    pub gec: GecParams,
}

fn default_policies() -> Vec<String> {
    POLICIES.iter().map(|s| s.to_string()).collect()
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self { policies: default_policies(), independent_mode: IndependentMode::default(), gec: GecParams::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Explicit budget grid; overrides `budget_range`/`budget_points`.
    #[serde(default)]
    pub budgets: Option<Vec<f64>>,
    /// Defaults to `[M/50, 0.8 M]`.
    #[serde(default)]
    pub budget_range: Option<[f64; 2]>,
    #[serde(default = "default_points")]
    pub budget_points: usize,
    #[serde(default = "default_reps")]
    pub n_replications: usize,
    #[serde(default = "default_probes")]
    pub n_probes: usize,
    #[serde(default = "default_target")]
    pub target_hit: f64,
    /// Overshoots `ε` for violation frequencies `P(C > N + ε)`.
    #[serde(default = "default_eps")]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_path_length")]
    pub path_length: usize,
    #[serde(default = "default_alpha")]
    pub path_loss_exponent: f64,
    /// Budget used by the bound-validation suite; mid-grid when absent.
    #[serde(default)]
    pub validation_budget: Option<f64>,
}

fn default_points() -> usize {
    20
}
fn default_reps() -> usize {
    200
}
fn default_probes() -> usize {
    400
}
fn default_target() -> f64 {
    0.7
}
fn default_eps() -> Vec<f64> {
    vec![1.0, 2.0, 4.0, 8.0]
}
fn default_path_length() -> usize {
    4
}
fn default_alpha() -> f64 {
    2.0
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            budgets: None,
            budget_range: None,
            budget_points: default_points(),
            n_replications: default_reps(),
            n_probes: default_probes(),
            target_hit: default_target(),
            epsilons: default_eps(),
            path_length: default_path_length(),
            path_loss_exponent: default_alpha(),
            validation_budget: None,
        }
    }
}

impl SweepConfig {
    pub fn grid(&self, catalog_size: usize) -> Vec<f64> {
        if let Some(b) = &self.budgets {
            return b.clone();
        }
        let m = catalog_size as f64;
        let [lo, hi] = self.budget_range.unwrap_or([m / 50.0, 0.8 * m]);
        let k = self.budget_points;
        if k == 1 {
            return vec![lo];
        }
        (0..k).map(|j| lo + (hi - lo) * j as f64 / (k - 1) as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RngConfig {
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Also write the first replication's marked realization.
    #[serde(default)]
    pub realizations: bool,
}

fn cfg_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 over the canonical JSON form of every field.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serialises");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        let n = &self.network;
        if !(n.lambda > 0.0 && n.lambda.is_finite()) {
            return cfg_err(format!("network.lambda must be positive, got {}", n.lambda));
        }
        if !(n.side > 0.0 && n.side.is_finite()) {
            return cfg_err(format!("network.side must be positive, got {}", n.side));
        }
        if !(n.r_dd > 0.0 && n.r_dd < n.side / 3.0) {
            return cfg_err(format!("network.r_dd must lie in (0, side/3), got {}", n.r_dd));
        }
        let d = &self.demand;
        if d.catalog_size == 0 {
            return cfg_err("demand.catalog_size must be at least 1");
        }
        if !(d.zipf_exponent >= 0.0 && d.zipf_exponent.is_finite()) {
            return cfg_err(format!("demand.zipf_exponent must be >= 0, got {}", d.zipf_exponent));
        }
        if d.mode == DemandMode::TiltWeighted && d.catalog_size % 2 != 0 {
            return cfg_err("tilt_weighted demand needs an even catalog_size");
        }
        if d.mode != DemandMode::Uniform {
            let f = &d.field;
            let p = f.resolved_params();
            if !(p.sigma > 0.0) || !(p.vario_scale > 0.0) || !(f.pixel_size > 0.0) {
                return cfg_err("demand.field needs sigma, vario_scale and pixel_size positive");
            }
            if f.region_side == 0 || f.region_side > f.side || f.n_regions == 0 {
                return cfg_err("demand.field needs 0 < region_side <= side and n_regions >= 1");
            }
        }
        if self.policy.policies.is_empty() {
            return cfg_err("policy.policies is empty");
        }
        if let Some(p) = self.policy.policies.iter().find(|p| !POLICIES.contains(&p.as_str())) {
            return cfg_err(format!("unknown policy {p:?}; expected one of {POLICIES:?}"));
        }
        let g = &self.policy.gec;
        if !(g.c > 0.0) || !(g.mark_fraction > 0.0) || !(g.mark_scale >= 0.0) {
            return cfg_err("policy.gec needs c > 0, mark_fraction > 0, mark_scale >= 0");
        }
        let s = &self.sweep;
        let m = d.catalog_size as f64;
        let grid = s.grid(d.catalog_size);
        if grid.is_empty() {
            return cfg_err("sweep grid is empty");
        }
        if let Some(b) = grid.iter().find(|b| !(**b > 0.0 && **b <= m)) {
            return cfg_err(format!("sweep budget {b} outside (0, M={m}]"));
        }
        if s.budgets.is_none() && (s.budget_points == 0 || s.budget_range.is_some_and(|[lo, hi]| lo > hi)) {
            return cfg_err("sweep.budget_range must be ordered and budget_points >= 1");
        }
        if s.n_replications < 2 || s.n_probes == 0 {
            return cfg_err("sweep needs n_replications >= 2 and n_probes >= 1");
        }
        if !(s.target_hit > 0.0 && s.target_hit < 1.0) {
            return cfg_err(format!("sweep.target_hit must lie in (0,1), got {}", s.target_hit));
        }
        if s.epsilons.iter().any(|e| !(*e >= 0.0)) {
            return cfg_err("sweep.epsilons must be >= 0");
        }
        if s.path_length < 2 || !(s.path_loss_exponent > 0.0) {
            return cfg_err("sweep needs path_length >= 2 and path_loss_exponent > 0");
        }
        if let Some(v) = s.validation_budget {
            if !(v > 0.0 && v <= m) {
                return cfg_err(format!("sweep.validation_budget {v} outside (0, M]"));
            }
        }
        Ok(())
    }

    pub fn validation_budget(&self) -> f64 {
        self.sweep.validation_budget.unwrap_or_else(|| {
            let g = self.sweep.grid(self.demand.catalog_size);
            g[g.len() / 2]
        })
    }

    /// Named presets with their recorded seeds.
    pub fn preset(name: &str) -> Result<Self> {
        let base = |r_dd: f64, range: [f64; 2], mode: DemandMode, seed: u64| ExperimentConfig {
            network: NetworkConfig { lambda: 0.1, side: 100.0, r_dd },
            demand: DemandConfig {
                catalog_size: 100,
                zipf_exponent: 0.1,
                mode,
                allocation: AllocationDemand::Global,
                field: FieldConfig::default(),
            },
            policy: PolicyConfig::default(),
            sweep: SweepConfig { budget_range: Some(range), ..SweepConfig::default() },
            rng: RngConfig { seed },
            output: OutputConfig::default(),
        };
        let cfg = match name {
            "fig5-R3" => base(3.0, [10.0, 86.0], DemandMode::Uniform, 20_190_503),
            "fig5-R10" => base(10.0, [2.0, 40.0], DemandMode::Uniform, 20_190_510),
            "fig7-urban-shift" => base(3.0, [10.0, 86.0], DemandMode::TiltShift, 20_190_503),
            "fig7-urban-weighted" => base(3.0, [10.0, 86.0], DemandMode::TiltWeighted, 20_190_503),
            other => return cfg_err(format!("unknown preset {other:?}; expected one of {PRESETS:?}")),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
