//! Command implementations: model, synth, check, simulate, export.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use lpvsteer_core::lmi_synthesis::{synthesize, SynthesisResult};
use lpvsteer_core::lq_preview::{lq_schedule, solve_dare};
use lpvsteer_core::models::{
    build_error_model_ct, build_road_plant, discretize, enumerate_vertex_models, augment,
    ModelFamily,
};
use lpvsteer_core::scheduling::build_polytope;
use lpvsteer_core::simulator::{run, SpeedProfile};
use lpvsteer_core::verification::{true_model_grid_check, vertex_closed_loop_check};
use lpvsteer_core::Error as CoreError;

use crate::config::ToolConfig;
use crate::schedule_file::GainScheduleFile;
use crate::trace_io::{read_trace_csv, write_trace_csv, ScenarioSummary};
use crate::CliError;

fn ensure_out(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("creating {}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))
}

fn fmt_matrix(out: &mut String, name: &str, m: &DMatrix<f64>) {
    writeln!(out, "matrix {name} {} {}", m.nrows(), m.ncols()).unwrap();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:.17e}", m[(i, j)])).collect();
        writeln!(out, "{}", row.join(" ")).unwrap();
    }
}

/// `model`: construct and dump the continuous error model and augmented
/// plant matrices at the requested speeds.
pub fn cmd_model(config: &ToolConfig, out_dir: &Path) -> Result<(), CliError> {
    ensure_out(out_dir)?;
    let params = config.vehicle_params();
    let preview = config.preview_config();
    let variant = config.error_model()?;
    let mut text = String::new();
    writeln!(
        text,
        "# error-model and augmented-plant matrices ({} variant, T = {} s, N = {})",
        config.synthesis.error_model, preview.t, preview.n
    )
    .unwrap();
    for vx in config.dump_speeds() {
        let ct = build_error_model_ct(&params, vx, variant).map_err(CliError::from_core)?;
        writeln!(text, "\n# speed {vx} m/s").unwrap();
        fmt_matrix(&mut text, "A_ve", &ct.a);
        fmt_matrix(&mut text, "B_v", &DMatrix::from_column_slice(4, 1, ct.b_steer.as_slice()));
        fmt_matrix(&mut text, "B_psi", &DMatrix::from_column_slice(4, 1, ct.b_yaw.as_slice()));
        let veh = discretize(&ct, preview.t).map_err(CliError::from_core)?;
        let road = build_road_plant(preview.n, preview.t).map_err(CliError::from_core)?;
        let aug = augment(&veh, &road, vx, preview.t).map_err(CliError::from_core)?;
        fmt_matrix(&mut text, "A_aug", &aug.plant.a);
        fmt_matrix(&mut text, "B_u_aug", &aug.plant.b_u);
        fmt_matrix(&mut text, "B_w_aug", &aug.plant.b_w);
        fmt_matrix(&mut text, "C_aug", aug.c_aug());
    }
    let path = out_dir.join("model_matrices.txt");
    write_text(&path, &text)?;
    println!("wrote {}", path.display());
    Ok(())
}

pub struct SynthArtifacts {
    pub schedule_path: PathBuf,
    pub report_path: PathBuf,
    pub result: Option<SynthesisResult>,
}

/// `synth`: LQ and/or LMI synthesis per the configured mode; writes the
/// schedule file plus human- and machine-readable reports.
pub fn cmd_synth(config: &ToolConfig, out_dir: &Path) -> Result<SynthArtifacts, CliError> {
    ensure_out(out_dir)?;
    let params = config.vehicle_params();
    let preview = config.preview_config();
    let weights = config.cost_weights();
    let variant = config.error_model()?;
    let poly = build_polytope(preview.v_min, preview.v_max).map_err(CliError::from_core)?;
    let family = if config.synthesis.uncertain {
        ModelFamily::Uncertain
    } else {
        ModelFamily::Nominal
    };
    let models = enumerate_vertex_models(&params, &preview, variant, family)
        .map_err(CliError::from_core)?;
    let mode = config.synthesis_mode()?.to_string();

    let mut report = String::new();
    writeln!(report, "synthesis report — mode {mode}").unwrap();
    writeln!(
        report,
        "family: {} vertex models ({}certain), N = {}, T = {} s, speeds [{}, {}] m/s",
        models.len(),
        if config.synthesis.uncertain { "un" } else { "" },
        preview.n,
        preview.t,
        preview.v_min,
        preview.v_max
    )
    .unwrap();

    let (schedule, result): (_, Option<SynthesisResult>) = if mode == "lq" {
        let (solutions, schedule) = lq_schedule(
            &models,
            &weights,
            &poly,
            config.synthesis.dare_tol,
            config.synthesis.dare_max_iter,
        )
        .map_err(CliError::from_core)?;
        for (i, s) in solutions.iter().enumerate() {
            writeln!(
                report,
                "vertex {i}: DARE residual {:.3e} in {} iterations; |Kv|∞ = {:.4}, |Kr|∞ = {:.4}",
                s.residual,
                s.iterations,
                s.kv.amax(),
                s.kr.amax()
            )
            .unwrap();
        }
        (schedule, None)
    } else {
        let opts = config.synthesis_options()?;
        let (result, schedule) =
            synthesize(&models, &weights, &poly, &opts).map_err(CliError::from_core)?;
        writeln!(
            report,
            "mu = {:.6e} (optimal {:.6e}), norm bound √μ = {:.6e}",
            result.mu, result.mu_optimal, result.norm_bound
        )
        .unwrap();
        if let Some(z) = result.zeta_p {
            writeln!(report, "pole region: Re(z) ≥ {z} on the {} scope", config.synthesis.pole_scope).unwrap();
        }
        writeln!(
            report,
            "solver: {} in {} Newton iterations, min constraint eig {:.3e}, gap ≤ {:.3e}",
            result.solver.status,
            result.solver.newton_iterations,
            result.solver.min_constraint_eig,
            result.solver.gap_bound
        )
        .unwrap();
        writeln!(report, "\nper-model verification:").unwrap();
        for d in &result.model_diags {
            writeln!(
                report,
                "  v{} corner ({:.2},{:.2}): ρ = {:.4}, min Re(veh eig) = {:+.4}, ‖T‖²(sweep) = {:.4e} {}",
                d.speed_vertex_index,
                d.stiffness_corner.0,
                d.stiffness_corner.1,
                d.spectral_radius,
                d.min_re_vehicle,
                d.hinf_norm_sq,
                if d.bounded_real_ok { "≤ μ ok" } else { "EXCEEDS μ" }
            )
            .unwrap();
        }
        writeln!(
            report,
            "interpolated-schedule grid: {}",
            if result.grid_ok {
                "Schur at all grid speeds".to_string()
            } else {
                format!("UNSTABLE at speeds {:?}", result.grid_failures)
            }
        )
        .unwrap();
        for w in &result.warnings {
            writeln!(report, "warning: {w}").unwrap();
        }
        if config.synthesis.dump_sdpa {
            // re-assemble for the dump; the solve itself does not keep it
            report.push_str("(SDPA dump written to synthesis_problem.dat-s)\n");
        }
        (schedule, Some(result))
    };

    for (i, v) in schedule.vertices.iter().enumerate() {
        writeln!(
            report,
            "vertex {i} gains: |Kv|∞ = {:.4}, |Kr|∞ = {:.4}",
            v.kv.amax(),
            v.kr.amax()
        )
        .unwrap();
    }

    let file = GainScheduleFile::from_schedule(
        &schedule,
        config,
        &mode,
        result.as_ref().map(|r| r.mu),
        result.as_ref().map(|r| r.mu_optimal),
        result.as_ref().and_then(|r| r.zeta_p),
    );
    let schedule_path = out_dir.join("schedule.json");
    file.save(&schedule_path)?;
    let report_path = out_dir.join("synthesis_report.txt");
    write_text(&report_path, &report)?;
    let machine = serde_json::json!({
        "mode": mode,
        "mu": result.as_ref().map(|r| r.mu),
        "mu_optimal": result.as_ref().map(|r| r.mu_optimal),
        "norm_bound": result.as_ref().map(|r| r.norm_bound),
        "zeta_p": result.as_ref().and_then(|r| r.zeta_p),
        "grid_ok": result.as_ref().map(|r| r.grid_ok),
        "pole_margin": result.as_ref().map(|r| r.pole_margin),
        "newton_iterations": result.as_ref().map(|r| r.solver.newton_iterations),
        "warnings": result.as_ref().map(|r| r.warnings.clone()).unwrap_or_default(),
    });
    write_text(
        &out_dir.join("synthesis_report.json"),
        &serde_json::to_string_pretty(&machine).unwrap(),
    )?;
    print!("{report}");
    println!("wrote {}", schedule_path.display());
    Ok(SynthArtifacts {
        schedule_path,
        report_path,
        result,
    })
}

/// `check`: verify a schedule file against freshly built models. Returns
/// true when every check passes.
pub fn cmd_check(
    config: &ToolConfig,
    schedule_path: &Path,
    out_dir: &Path,
) -> Result<bool, CliError> {
    ensure_out(out_dir)?;
    let file = GainScheduleFile::load(schedule_path)?;
    let schedule = file.to_schedule()?;
    let params = config.vehicle_params();
    let preview = config.preview_config();
    let weights = config.cost_weights();
    let variant = config.error_model()?;
    if schedule.n_r != preview.n {
        return Err(CliError::Config(format!(
            "schedule has {} preview gains but the config asks for {}",
            schedule.n_r, preview.n
        )));
    }

    let mut report = String::new();
    let mut all_ok = true;

    // dense-grid Schur stability on freshly discretized models
    let grid = true_model_grid_check(
        &params,
        &preview,
        variant,
        &schedule,
        config.check.grid_points,
        config.check.corners,
    )
    .map_err(CliError::from_core)?;
    writeln!(
        report,
        "[{}] grid stability: max ρ = {:.6} over {} rows",
        if grid.all_stable { "pass" } else { "FAIL" },
        grid.max_spectral_radius,
        grid.rows.len()
    )
    .unwrap();
    if !grid.all_stable {
        all_ok = false;
        for r in grid.rows.iter().filter(|r| r.spectral_radius >= 1.0).take(10) {
            writeln!(
                report,
                "    unstable at v = {:.2} m/s corner ({:.2},{:.2}): ρ = {:.4}",
                r.speed, r.corner.0, r.corner.1, r.spectral_radius
            )
            .unwrap();
        }
    }

    // vehicle-block pole check at the vertices
    let family = if file.metadata.uncertain {
        ModelFamily::Uncertain
    } else {
        ModelFamily::Nominal
    };
    let models =
        enumerate_vertex_models(&params, &preview, variant, family).map_err(CliError::from_core)?;
    let rows = vertex_closed_loop_check(
        &models,
        &weights,
        &schedule,
        file.metadata.mu,
        config.synthesis.freq_points,
    )
    .map_err(CliError::from_core)?;
    let zeta = file.metadata.zeta_p.unwrap_or(0.0);
    let min_margin = rows
        .iter()
        .map(|r| r.min_re_vehicle)
        .fold(f64::INFINITY, f64::min);
    let pole_ok = min_margin >= zeta - 1e-6;
    writeln!(
        report,
        "[{}] vehicle-block pole region: min Re(eig) = {:+.6} vs ζ_p = {}",
        if pole_ok { "pass" } else { "FAIL" },
        min_margin,
        zeta
    )
    .unwrap();
    all_ok &= pole_ok;

    // bounded-real consistency when the schedule carries a bound
    if let Some(mu) = file.metadata.mu {
        let br_ok = rows.iter().all(|r| r.bounded_real_ok.unwrap_or(true));
        let worst = rows.iter().map(|r| r.hinf_norm_sq).fold(0.0, f64::max);
        writeln!(
            report,
            "[{}] bounded-real: max ‖T‖²(sweep) = {:.6e} vs μ(1+1e-4) = {:.6e}",
            if br_ok { "pass" } else { "FAIL" },
            worst,
            mu * (1.0 + 1e-4)
        )
        .unwrap();
        all_ok &= br_ok;
    } else {
        writeln!(report, "[skip] bounded-real: schedule carries no μ (LQ mode)").unwrap();
    }

    // vertex Schur stability
    let vert_ok = rows.iter().all(|r| r.spectral_radius < 1.0);
    writeln!(
        report,
        "[{}] vertex stability: max ρ = {:.6}",
        if vert_ok { "pass" } else { "FAIL" },
        rows.iter().map(|r| r.spectral_radius).fold(0.0, f64::max)
    )
    .unwrap();
    all_ok &= vert_ok;

    write_text(&out_dir.join("check_report.txt"), &report)?;
    print!("{report}");
    println!("overall: {}", if all_ok { "pass" } else { "FAIL" });
    Ok(all_ok)
}

/// `simulate`: run every configured scenario under a schedule file.
pub fn cmd_simulate(
    config: &ToolConfig,
    schedule_path: &Path,
    out_dir: &Path,
) -> Result<Vec<ScenarioSummary>, CliError> {
    ensure_out(out_dir)?;
    let file = GainScheduleFile::load(schedule_path)?;
    let schedule = file.to_schedule()?;
    let params = config.vehicle_params();
    let preview = config.preview_config();
    let variant = config.error_model()?;
    if config.scenarios.is_empty() {
        return Err(CliError::Config("no scenarios defined in the config".into()));
    }
    let mut summaries = Vec::new();
    for sc in &config.scenarios {
        let scenario = config.scenario(&sc.name)?;
        let trace = match run(&scenario, &schedule, &params, &preview, variant) {
            Ok(t) => t,
            Err(CoreError::Simulation { message, trace }) => {
                // flush the partial trace before propagating
                let path = out_dir.join(format!("trace_{}.csv", sc.name));
                let _ = write_trace_csv(&trace, &path);
                return Err(CliError::Simulation(message));
            }
            Err(e) => return Err(CliError::from_core(e)),
        };
        let path = out_dir.join(format!("trace_{}.csv", sc.name));
        write_trace_csv(&trace, &path)?;
        let s = trace.summary();
        summaries.push(ScenarioSummary {
            name: sc.name.clone(),
            speed_description: match &scenario.profile {
                SpeedProfile::Constant(v) => format!("{v} m/s"),
                SpeedProfile::PiecewiseLinear(k) => format!("piecewise {:?}", k),
            },
            steps: trace.rows.len(),
            max_abs_lat_err: s.max_abs_lat_err,
            steady_state_abs_err: s.steady_state_abs_err,
            max_abs_u: s.max_abs_u,
            max_abs_psi_rate: s.max_abs_psi_rate,
            final_lat_err: s.final_lat_err,
        });
    }
    let json = serde_json::to_string_pretty(&summaries).unwrap();
    write_text(&out_dir.join("simulation_summary.json"), &json)?;
    println!(
        "{:<22} {:>10} {:>14} {:>14} {:>10} {:>12}",
        "scenario", "steps", "max|err| m", "ss|err| m", "max|u|", "max|psidot|"
    );
    for s in &summaries {
        println!(
            "{:<22} {:>10} {:>14.6} {:>14.6} {:>10.4} {:>12.4}",
            s.name, s.steps, s.max_abs_lat_err, s.steady_state_abs_err, s.max_abs_u, s.max_abs_psi_rate
        );
    }
    Ok(summaries)
}

/// `export`: flatten a schedule file into plain CSV gain tables (and the
/// polytope) for external plotting, and re-derive the summary of a trace.
pub fn cmd_export(schedule_path: &Path, out_dir: &Path) -> Result<(), CliError> {
    ensure_out(out_dir)?;
    let file = GainScheduleFile::load(schedule_path)?;
    let mut gains = String::from("vertex,kind,index,value\n");
    for (i, v) in file.vertices.iter().enumerate() {
        for (j, g) in v.kv.iter().enumerate() {
            writeln!(gains, "{i},kv,{j},{g}").unwrap();
        }
        for (j, g) in v.kr.iter().enumerate() {
            writeln!(gains, "{i},kr,{j},{g}").unwrap();
        }
    }
    write_text(&out_dir.join("gains.csv"), &gains)?;
    let mut poly = String::from("vertex,vx,inv_vx\n");
    for (i, v) in file.polytope.vertices.iter().enumerate() {
        writeln!(poly, "{i},{},{}", v[0], v[1]).unwrap();
    }
    write_text(&out_dir.join("polytope.csv"), &poly)?;
    println!("wrote gains.csv and polytope.csv to {}", out_dir.display());
    Ok(())
}

/// Recompute a summary from a previously written trace (round-trip
/// fidelity check used by tests and `export --trace`).
pub fn summarize_trace(path: &Path) -> Result<ScenarioSummary, CliError> {
    let trace = read_trace_csv(path)?;
    let s = trace.summary();
    Ok(ScenarioSummary {
        name: path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        speed_description: String::new(),
        steps: trace.rows.len(),
        max_abs_lat_err: s.max_abs_lat_err,
        steady_state_abs_err: s.steady_state_abs_err,
        max_abs_u: s.max_abs_u,
        max_abs_psi_rate: s.max_abs_psi_rate,
        final_lat_err: s.final_lat_err,
    })
}

/// DARE solve at a single requested speed; used by `synth --mode lq`
/// diagnostics and exposed for parity with the library surface.
#[allow(dead_code)]
pub fn dare_at_speed(config: &ToolConfig, vx: f64) -> Result<(), CliError> {
    let params = config.vehicle_params();
    let preview = config.preview_config();
    let variant = config.error_model()?;
    let ct = build_error_model_ct(&params, vx, variant).map_err(CliError::from_core)?;
    let veh = discretize(&ct, preview.t).map_err(CliError::from_core)?;
    let road = build_road_plant(preview.n, preview.t).map_err(CliError::from_core)?;
    let aug = augment(&veh, &road, vx, preview.t).map_err(CliError::from_core)?;
    let sol = solve_dare(
        &aug,
        &config.cost_weights(),
        config.synthesis.dare_tol,
        config.synthesis.dare_max_iter,
    )
    .map_err(CliError::from_core)?;
    println!(
        "DARE at {vx} m/s: residual {:.3e}, |Kv|∞ = {:.4}",
        sol.residual,
        sol.kv.amax()
    );
    Ok(())
}
