//! Trace CSV export/import and scenario summaries.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use lpvsteer_core::simulator::{SimulationTrace, TraceRow};

use crate::CliError;

pub const CSV_HEADER: &str =
    "t,X,Y,psi,y_err,vy,psi_err,psi_rate,u_steer,Vx,alpha1,alpha2,alpha3";

pub fn write_trace_csv(trace: &SimulationTrace, path: &Path) -> Result<(), CliError> {
    let mut out = Vec::with_capacity(trace.rows.len() * 160);
    writeln!(out, "{CSV_HEADER}").unwrap();
    for r in &trace.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.t,
            r.x_w,
            r.y_w,
            r.psi_global,
            r.x_ve[0],
            r.x_ve[1],
            r.x_ve[2],
            r.x_ve[3],
            r.u_steer,
            r.vx,
            r.alpha[0],
            r.alpha[1],
            r.alpha[2]
        )
        .unwrap();
    }
    std::fs::write(path, out)
        .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))
}

/// Reload a trace CSV (enough of it to recompute summaries; the geometric
/// lateral error column is reconstructed from the logged error state).
pub fn read_trace_csv(path: &Path) -> Result<SimulationTrace, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header.trim() != CSV_HEADER {
        return Err(CliError::Config(format!(
            "unexpected trace header in {}",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| {
                CliError::Config(format!("{} line {}: {e}", path.display(), lineno + 2))
            })?;
        if f.len() != 13 {
            return Err(CliError::Config(format!(
                "{} line {}: expected 13 columns",
                path.display(),
                lineno + 2
            )));
        }
        rows.push(TraceRow {
            t: f[0],
            x_w: f[1],
            y_w: f[2],
            psi_global: f[3],
            x_ve: [f[4], f[5], f[6], f[7]],
            u_steer: f[8],
            vx: f[9],
            alpha: [f[10], f[11], f[12]],
            y_r_head: 0.0,
            lat_err: f[4],
        });
    }
    let dt = if rows.len() >= 2 { rows[1].t - rows[0].t } else { 0.0 };
    Ok(SimulationTrace { rows, dt })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub name: String,
    pub speed_description: String,
    pub steps: usize,
    pub max_abs_lat_err: f64,
    pub steady_state_abs_err: f64,
    pub max_abs_u: f64,
    pub max_abs_psi_rate: f64,
    pub final_lat_err: f64,
}
