//! Gain-schedule file: a JSON record of the polytope, per-vertex gains,
//! optional Lyapunov certificates, and synthesis metadata. Matrices are
//! stored row-major as nested arrays; serde's shortest-round-trip float
//! formatting keeps reload bit-exact.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use lpvsteer_core::scheduling::{GainSchedule, InterpolationMode, SpeedPolytope, VertexGains};

use crate::config::ToolConfig;
use crate::CliError;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PolytopeRecord {
    pub v_min: f64,
    pub v_max: f64,
    pub vertices: [[f64; 2]; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct VertexRecord {
    pub kv: Vec<f64>,
    pub kr: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct WeightsRecord {
    pub q1: f64,
    pub q2: f64,
    pub r: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Metadata {
    pub mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_optimal: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta_p: Option<f64>,
    pub uncertain: bool,
    pub error_model: String,
    pub weights: WeightsRecord,
    pub vehicle: crate::config::VehicleSection,
    pub preview: crate::config::PreviewSection,
    /// seconds since the epoch; honors SOURCE_DATE_EPOCH for reproducible
    /// output
    pub created_unix: u64,
    pub tool_version: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GainScheduleFile {
    pub format_version: u32,
    pub n_v: usize,
    pub n_r: usize,
    /// paper | gain
    pub interpolation: String,
    pub polytope: PolytopeRecord,
    pub vertices: Vec<VertexRecord>,
    pub metadata: Metadata,
}

pub fn timestamp() -> u64 {
    if let Ok(v) = std::env::var("SOURCE_DATE_EPOCH") {
        if let Ok(secs) = v.parse::<u64>() {
            return secs;
        }
    }
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn rows_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, CliError> {
    let r = rows.len();
    if r == 0 {
        return Err(CliError::Config("empty matrix in schedule file".into()));
    }
    let c = rows[0].len();
    if rows.iter().any(|row| row.len() != c) {
        return Err(CliError::Config("ragged matrix in schedule file".into()));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

impl GainScheduleFile {
    pub fn from_schedule(
        schedule: &GainSchedule,
        config: &ToolConfig,
        mode: &str,
        mu: Option<f64>,
        mu_optimal: Option<f64>,
        zeta_p: Option<f64>,
    ) -> Self {
        GainScheduleFile {
            format_version: FORMAT_VERSION,
            n_v: schedule.n_v,
            n_r: schedule.n_r,
            interpolation: match schedule.mode {
                InterpolationMode::Paper => "paper".into(),
                InterpolationMode::Gain => "gain".into(),
            },
            polytope: PolytopeRecord {
                v_min: schedule.polytope.v_min,
                v_max: schedule.polytope.v_max,
                vertices: schedule.polytope.vertices,
            },
            vertices: schedule
                .vertices
                .iter()
                .map(|v| VertexRecord {
                    kv: v.kv.iter().cloned().collect(),
                    kr: v.kr.iter().cloned().collect(),
                    p: v.p.as_ref().map(matrix_rows),
                    z: v.z.as_ref().map(|z| z.iter().cloned().collect()),
                })
                .collect(),
            metadata: Metadata {
                mode: mode.to_string(),
                mu,
                mu_optimal,
                norm_bound: mu.map(|m| m.max(0.0).sqrt()),
                zeta_p,
                uncertain: config.synthesis.uncertain,
                error_model: config.synthesis.error_model.clone(),
                weights: WeightsRecord {
                    q1: config.weights.q1,
                    q2: config.weights.q2,
                    r: config.weights.r,
                },
                vehicle: config.vehicle.clone(),
                preview: config.preview.clone(),
                created_unix: timestamp(),
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
            },
        }
    }

    pub fn to_schedule(&self) -> Result<GainSchedule, CliError> {
        if self.format_version != FORMAT_VERSION {
            return Err(CliError::Config(format!(
                "unsupported schedule format version {}",
                self.format_version
            )));
        }
        let mode = match self.interpolation.as_str() {
            "paper" => InterpolationMode::Paper,
            "gain" => InterpolationMode::Gain,
            other => {
                return Err(CliError::Config(format!(
                    "unknown interpolation mode '{other}' in schedule file"
                )))
            }
        };
        let mut vertices = Vec::with_capacity(self.vertices.len());
        for v in &self.vertices {
            if v.kv.len() != self.n_v || v.kr.len() != self.n_r {
                return Err(CliError::Config(
                    "schedule file gain dimensions are inconsistent".into(),
                ));
            }
            vertices.push(VertexGains {
                kv: DVector::from_column_slice(&v.kv),
                kr: DVector::from_column_slice(&v.kr),
                p: v.p.as_deref().map(rows_matrix).transpose()?,
                z: v.z.as_ref().map(|z| DVector::from_column_slice(z)),
            });
        }
        let schedule = GainSchedule {
            polytope: SpeedPolytope {
                vertices: self.polytope.vertices,
                v_min: self.polytope.v_min,
                v_max: self.polytope.v_max,
            },
            n_v: self.n_v,
            n_r: self.n_r,
            vertices,
            mode,
        };
        schedule
            .validate()
            .map_err(|e| CliError::Config(format!("schedule file: {e}")))?;
        Ok(schedule)
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Io(format!("serializing schedule: {e}")))?;
        std::fs::write(path, json)
            .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("schedule file {}: {e}", path.display())))
    }
}
