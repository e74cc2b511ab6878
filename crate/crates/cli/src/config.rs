//! TOML configuration: schema, dotted-path overrides, validation.

use serde::{Deserialize, Serialize};

use lpvsteer_core::lmi_synthesis::{
    LMIRegion, PoleScope, Refinement, RefineScope, SynthesisMode, SynthesisOptions,
};
use lpvsteer_core::lq_preview::CostWeights;
use lpvsteer_core::models::{ErrorModelVariant, PreviewConfig, VehicleParams};
use lpvsteer_core::scheduling::InterpolationMode;
use lpvsteer_core::simulator::{PathKind, PathSpec, Scenario, SpeedProfile};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VehicleSection {
    pub m: f64,
    pub iz: f64,
    pub lf: f64,
    pub lr: f64,
    pub caf: f64,
    pub car: f64,
    #[serde(default)]
    pub stiffness_uncertainty: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreviewSection {
    pub t: f64,
    pub n: usize,
    pub v_min: f64,
    pub v_max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightsSection {
    pub q1: f64,
    pub q2: f64,
    pub r: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisSection {
    /// lq | hinf-common-p | hinf-paper
    pub mode: String,
    pub uncertain: bool,
    /// positivity margin of the pole region (inside the unit disk)
    pub zeta_p: f64,
    pub pole_region: bool,
    /// full | vehicle-block
    pub pole_scope: String,
    /// paper | standard (placement of the −Vx speed term in the error model)
    pub error_model: String,
    /// paper | gain (runtime gain recovery)
    pub interpolation: String,
    pub block_diag_p: bool,
    /// none | vehicle | full (fixed-μ Lyapunov-bound refinement)
    pub refine: String,
    pub refine_mu_margin: f64,
    pub feas_tol: f64,
    pub opt_tol: f64,
    pub freq_points: usize,
    pub grid_points: usize,
    pub dare_tol: f64,
    pub dare_max_iter: usize,
    /// optional SDPA sparse dump of the synthesis problem
    pub dump_sdpa: bool,
}

impl Default for SynthesisSection {
    fn default() -> Self {
        SynthesisSection {
            mode: "hinf-common-p".into(),
            uncertain: false,
            zeta_p: 0.05,
            pole_region: true,
            pole_scope: "vehicle-block".into(),
            error_model: "paper".into(),
            interpolation: "paper".into(),
            block_diag_p: false,
            refine: "none".into(),
            refine_mu_margin: 0.05,
            feas_tol: 1e-7,
            opt_tol: 1e-6,
            freq_points: 1000,
            grid_points: 100,
            dare_tol: 1e-10,
            dare_max_iter: 10_000,
            dump_sdpa: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSection {
    /// speeds at which `model` dumps the matrices; empty = interval
    /// endpoints plus midpoint
    pub speeds: Vec<f64>,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection { speeds: Vec::new() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CheckSection {
    pub grid_points: usize,
    pub corners: bool,
}

impl Default for CheckSection {
    fn default() -> Self {
        CheckSection {
            grid_points: 100,
            corners: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioSection {
    pub name: String,
    /// straight | lane-change | waypoints
    #[serde(default = "default_kind")]
    pub kind: String,
    #[serde(default)]
    pub speed: Option<f64>,
    /// piecewise-linear (time, speed) knots; overrides `speed`
    #[serde(default)]
    pub profile: Vec<(f64, f64)>,
    #[serde(default = "default_length")]
    pub length: f64,
    #[serde(default = "default_shift")]
    pub lateral_shift: f64,
    #[serde(default = "default_tstart")]
    pub transition_start: f64,
    #[serde(default = "default_tlen")]
    pub transition_length: f64,
    #[serde(default)]
    pub waypoints: Vec<(f64, f64)>,
    #[serde(default)]
    pub duration: Option<f64>,
    #[serde(default)]
    pub initial_lateral_offset: f64,
    #[serde(default)]
    pub initial_heading_error: f64,
}

fn default_kind() -> String {
    "lane-change".into()
}
fn default_length() -> f64 {
    150.0
}
fn default_shift() -> f64 {
    3.5
}
fn default_tstart() -> f64 {
    20.0
}
fn default_tlen() -> f64 {
    50.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToolConfig {
    pub vehicle: VehicleSection,
    pub preview: PreviewSection,
    pub weights: WeightsSection,
    #[serde(default)]
    pub synthesis: SynthesisSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub check: CheckSection,
    #[serde(default)]
    pub scenarios: Vec<ScenarioSection>,
    #[serde(default)]
    pub seed: u64,
}

impl ToolConfig {
    /// Parse from TOML text, applying dotted-path `--set key=value`
    /// overrides before deserialization. Schema errors name the offending
    /// key path.
    pub fn parse(text: &str, overrides: &[String]) -> Result<ToolConfig, CliError> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e| CliError::Config(format!("TOML syntax: {e}")))?;
        for ov in overrides {
            let (path, raw) = ov
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("--set expects key=value (got '{ov}')")))?;
            let value = parse_toml_value(raw.trim());
            set_path(&mut table, path.trim(), value)?;
        }
        let text = toml::to_string(&table)
            .map_err(|e| CliError::Config(format!("internal TOML rebuild: {e}")))?;
        let de = toml::de::Deserializer::parse(&text)
            .map_err(|e| CliError::Config(format!("TOML syntax: {e}")))?;
        let cfg: ToolConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            CliError::Config(format!("config key '{}': {}", e.path(), e.inner()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.vehicle_params()
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        self.preview_config()
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        self.cost_weights()
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        // fail fast on enum-ish strings
        self.synthesis_mode()?;
        self.error_model()?;
        self.interpolation_mode()?;
        self.synthesis_options()?;
        let mut names = std::collections::HashSet::new();
        for s in &self.scenarios {
            if !names.insert(s.name.clone()) {
                return Err(CliError::Config(format!("duplicate scenario name '{}'", s.name)));
            }
            self.scenario(&s.name)?;
        }
        Ok(())
    }

    pub fn vehicle_params(&self) -> VehicleParams {
        VehicleParams {
            m: self.vehicle.m,
            iz: self.vehicle.iz,
            lf: self.vehicle.lf,
            lr: self.vehicle.lr,
            caf: self.vehicle.caf,
            car: self.vehicle.car,
            stiffness_uncertainty: self.vehicle.stiffness_uncertainty,
        }
    }

    pub fn preview_config(&self) -> PreviewConfig {
        PreviewConfig {
            t: self.preview.t,
            n: self.preview.n,
            v_min: self.preview.v_min,
            v_max: self.preview.v_max,
        }
    }

    pub fn cost_weights(&self) -> CostWeights {
        CostWeights {
            q1: self.weights.q1,
            q2: self.weights.q2,
            r: self.weights.r,
        }
    }

    pub fn error_model(&self) -> Result<ErrorModelVariant, CliError> {
        match self.synthesis.error_model.as_str() {
            "paper" => Ok(ErrorModelVariant::Paper),
            "standard" => Ok(ErrorModelVariant::Standard),
            other => Err(CliError::Config(format!(
                "synthesis.error_model must be 'paper' or 'standard' (got '{other}')"
            ))),
        }
    }

    pub fn synthesis_mode(&self) -> Result<&str, CliError> {
        match self.synthesis.mode.as_str() {
            m @ ("lq" | "hinf-common-p" | "hinf-paper") => Ok(m),
            other => Err(CliError::Config(format!(
                "synthesis.mode must be lq | hinf-common-p | hinf-paper (got '{other}')"
            ))),
        }
    }

    pub fn interpolation_mode(&self) -> Result<InterpolationMode, CliError> {
        match self.synthesis.interpolation.as_str() {
            "paper" => Ok(InterpolationMode::Paper),
            "gain" => Ok(InterpolationMode::Gain),
            other => Err(CliError::Config(format!(
                "synthesis.interpolation must be 'paper' or 'gain' (got '{other}')"
            ))),
        }
    }

    pub fn synthesis_options(&self) -> Result<SynthesisOptions, CliError> {
        let mode = match self.synthesis_mode()? {
            "hinf-paper" => SynthesisMode::PerVertexP,
            _ => SynthesisMode::CommonP,
        };
        let pole_scope = match self.synthesis.pole_scope.as_str() {
            "full" => PoleScope::Full,
            "vehicle-block" => PoleScope::VehicleBlock,
            other => {
                return Err(CliError::Config(format!(
                    "synthesis.pole_scope must be 'full' or 'vehicle-block' (got '{other}')"
                )))
            }
        };
        let region = if self.synthesis.pole_region {
            Some(
                LMIRegion::positivity(self.synthesis.zeta_p)
                    .map_err(|e| CliError::Config(e.to_string()))?,
            )
        } else {
            None
        };
        let refine = match self.synthesis.refine.as_str() {
            "none" => None,
            "vehicle" => Some(Refinement {
                mu_margin: self.synthesis.refine_mu_margin,
                scope: RefineScope::Vehicle,
                ..Refinement::default()
            }),
            "full" => Some(Refinement {
                mu_margin: self.synthesis.refine_mu_margin,
                scope: RefineScope::Full,
                ..Refinement::default()
            }),
            other => {
                return Err(CliError::Config(format!(
                    "synthesis.refine must be none | vehicle | full (got '{other}')"
                )))
            }
        };
        Ok(SynthesisOptions {
            mode,
            region,
            pole_scope,
            block_diag_p: self.synthesis.block_diag_p,
            interpolation: self.interpolation_mode()?,
            refine,
            feas_tol: self.synthesis.feas_tol,
            opt_tol: self.synthesis.opt_tol,
            freq_points: self.synthesis.freq_points,
            grid_points: self.synthesis.grid_points,
        })
    }

    pub fn dump_speeds(&self) -> Vec<f64> {
        if self.model.speeds.is_empty() {
            let mid = 0.5 * (self.preview.v_min + self.preview.v_max);
            vec![self.preview.v_min, mid, self.preview.v_max]
        } else {
            self.model.speeds.clone()
        }
    }

    pub fn scenario(&self, name: &str) -> Result<Scenario, CliError> {
        let s = self
            .scenarios
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| CliError::Config(format!("scenario '{name}' is not defined")))?;
        let kind = match s.kind.as_str() {
            "straight" => PathKind::Straight,
            "lane-change" => PathKind::LaneChange,
            "waypoints" => PathKind::Waypoints(s.waypoints.clone()),
            other => {
                return Err(CliError::Config(format!(
                    "scenario '{name}': kind must be straight | lane-change | waypoints (got '{other}')"
                )))
            }
        };
        let profile = if !s.profile.is_empty() {
            SpeedProfile::PiecewiseLinear(s.profile.clone())
        } else if let Some(v) = s.speed {
            SpeedProfile::Constant(v)
        } else {
            return Err(CliError::Config(format!(
                "scenario '{name}': needs 'speed' or 'profile'"
            )));
        };
        Ok(Scenario {
            name: s.name.clone(),
            path: PathSpec {
                kind,
                length: s.length,
                lateral_shift: s.lateral_shift,
                transition_start: s.transition_start,
                transition_length: s.transition_length,
            },
            profile,
            duration: s.duration,
            initial_lateral_offset: s.initial_lateral_offset,
            initial_heading_error: s.initial_heading_error,
        })
    }
}

fn parse_toml_value(raw: &str) -> toml::Value {
    // try a full TOML value first (numbers, bools, arrays, quoted strings);
    // bare words fall back to strings
    let wrapped = format!("v = {raw}");
    if let Ok(table) = wrapped.parse::<toml::Table>() {
        if let Some(v) = table.get("v") {
            return v.clone();
        }
    }
    toml::Value::String(raw.to_string())
}

fn set_path(table: &mut toml::Table, path: &str, value: toml::Value) -> Result<(), CliError> {
    let parts: Vec<&str> = path.split('.').collect();
    if parts.is_empty() || parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("invalid --set path '{path}'")));
    }
    let mut current = table;
    for p in &parts[..parts.len() - 1] {
        current = current
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| {
                CliError::Config(format!("--set path '{path}': '{p}' is not a table"))
            })?;
    }
    current.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
