//! Post-synthesis verification: Schur stability of the interpolated
//! schedule over a dense speed grid, re-checks against freshly discretized
//! models, vehicle-block pole margins, and bounded-real consistency.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{hinf_norm_sweep, min_re_eig, spectral_radius};
use crate::lmi_synthesis::build_generalized_plant;
use crate::lq_preview::CostWeights;
use crate::models::{
    augment_at, build_error_model_at, build_road_plant, discretize, ErrorModelVariant,
    PreviewConfig, VehicleParams, VertexModel,
};
use crate::scheduling::{barycentric, interpolate_gains, GainSchedule};

fn grid_speeds(v_min: f64, v_max: f64, points: usize) -> Vec<f64> {
    let p = points.max(2);
    (0..p)
        .map(|k| v_min + (v_max - v_min) * (k as f64) / ((p - 1) as f64))
        .collect()
}

#[derive(Debug, Clone)]
pub struct GridReport {
    pub speeds: Vec<f64>,
    pub all_stable: bool,
    pub failing_speeds: Vec<f64>,
    pub max_spectral_radius: f64,
}

/// Schur stability of the interpolated closed loop A(α) − B(α)K(α) over a
/// uniform speed grid, for every stiffness corner present in the family.
pub fn interpolated_grid_check(
    models: &[VertexModel],
    schedule: &GainSchedule,
    points: usize,
) -> Result<GridReport> {
    schedule.validate()?;
    // group vertex plants by stiffness corner
    let mut corners: Vec<((f64, f64), Vec<Option<&VertexModel>>)> = Vec::new();
    for m in models {
        let slot = match corners
            .iter_mut()
            .find(|(c, _)| c.0 == m.stiffness_corner.0 && c.1 == m.stiffness_corner.1)
        {
            Some((_, v)) => v,
            None => {
                corners.push((m.stiffness_corner, vec![None; 3]));
                &mut corners.last_mut().unwrap().1
            }
        };
        if m.speed_vertex_index < 3 {
            slot[m.speed_vertex_index] = Some(m);
        }
    }

    let speeds = grid_speeds(schedule.polytope.v_min, schedule.polytope.v_max, points);
    let mut failing = Vec::new();
    let mut max_rho: f64 = 0.0;
    for &v in &speeds {
        let coords = barycentric(&schedule.polytope, v)?;
        let gains = interpolate_gains(schedule, &coords)?;
        let k = gains.full();
        for (corner, verts) in &corners {
            if verts.iter().any(|m| m.is_none()) {
                return Err(Error::Config(format!(
                    "corner {corner:?} is missing a speed vertex model"
                )));
            }
            let n = schedule.n_states();
            let mut a = DMatrix::zeros(n, n);
            let mut b = DMatrix::zeros(n, 1);
            for (ai, m) in coords.alpha.iter().zip(verts.iter()) {
                let plant = &m.unwrap().plant.plant;
                a += &plant.a * *ai;
                b += &plant.b_u * *ai;
            }
            let a_cl = &a - &b * k.transpose();
            let rho = spectral_radius(&a_cl);
            max_rho = max_rho.max(rho);
            if rho >= 1.0 {
                failing.push(v);
                break;
            }
        }
    }
    Ok(GridReport {
        speeds,
        all_stable: failing.is_empty(),
        failing_speeds: failing,
        max_spectral_radius: max_rho,
    })
}

#[derive(Debug, Clone)]
pub struct TrueGridRow {
    pub speed: f64,
    pub corner: (f64, f64),
    pub spectral_radius: f64,
    pub min_re_vehicle: f64,
}

#[derive(Debug, Clone)]
pub struct TrueGridReport {
    pub rows: Vec<TrueGridRow>,
    pub all_stable: bool,
    pub max_spectral_radius: f64,
}

/// Re-check the schedule against freshly discretized models at every grid
/// speed (not the polytopic interpolants), optionally at all four
/// stiffness corners. This is the physically meaningful stability check:
/// it includes the discretization drift the polytope certificate cannot
/// see.
pub fn true_model_grid_check(
    params: &VehicleParams,
    config: &PreviewConfig,
    variant: ErrorModelVariant,
    schedule: &GainSchedule,
    points: usize,
    include_corners: bool,
) -> Result<TrueGridReport> {
    schedule.validate()?;
    params.validate()?;
    config.validate()?;
    let u = params.stiffness_uncertainty;
    let corners: Vec<(f64, f64)> = if include_corners && u > 0.0 {
        vec![
            (1.0, 1.0),
            (1.0 - u, 1.0 - u),
            (1.0 - u, 1.0 + u),
            (1.0 + u, 1.0 - u),
            (1.0 + u, 1.0 + u),
        ]
    } else {
        vec![(1.0, 1.0)]
    };
    let road = build_road_plant(config.n, config.t)?;
    let speeds = grid_speeds(schedule.polytope.v_min, schedule.polytope.v_max, points);
    let mut rows = Vec::with_capacity(speeds.len() * corners.len());
    let mut max_rho: f64 = 0.0;
    for &v in &speeds {
        let coords = barycentric(&schedule.polytope, v)?;
        let gains = interpolate_gains(schedule, &coords)?;
        let k = gains.full();
        for &(mf, mr) in &corners {
            let p = params.with_stiffness_scaled(mf, mr);
            let ct = build_error_model_at(&p, v, 1.0 / v, variant);
            let veh = discretize(&ct, config.t)?;
            let aug = augment_at(&veh, &road, v, 1.0 / v, config.t)?;
            let a_cl = &aug.plant.a - &aug.plant.b_u * k.transpose();
            let rho = spectral_radius(&a_cl);
            let mre = min_re_eig(&a_cl.view((0, 0), (4, 4)).into_owned());
            max_rho = max_rho.max(rho);
            rows.push(TrueGridRow {
                speed: v,
                corner: (mf, mr),
                spectral_radius: rho,
                min_re_vehicle: mre,
            });
        }
    }
    Ok(TrueGridReport {
        all_stable: rows.iter().all(|r| r.spectral_radius < 1.0),
        max_spectral_radius: max_rho,
        rows,
    })
}

#[derive(Debug, Clone)]
pub struct VertexCheckRow {
    pub speed_vertex_index: usize,
    pub corner: (f64, f64),
    pub spectral_radius: f64,
    pub min_re_vehicle: f64,
    pub hinf_norm_sq: f64,
    pub bounded_real_ok: Option<bool>,
}

/// Closed-loop checks at every vertex model using the schedule's vertex
/// gains: spectral radius, vehicle-block eigenvalue real parts, and the
/// frequency-sweep H∞ norm compared against √μ when a bound is given.
pub fn vertex_closed_loop_check(
    models: &[VertexModel],
    weights: &CostWeights,
    schedule: &GainSchedule,
    mu: Option<f64>,
    freq_points: usize,
) -> Result<Vec<VertexCheckRow>> {
    schedule.validate()?;
    let mut rows = Vec::with_capacity(models.len());
    for m in models {
        let i = m.speed_vertex_index;
        if i >= schedule.vertices.len() {
            return Err(Error::Config(format!(
                "model references speed vertex {i} beyond the schedule"
            )));
        }
        let vg = &schedule.vertices[i];
        let mut k = DVector::zeros(schedule.n_states());
        k.rows_mut(0, schedule.n_v).copy_from(&vg.kv);
        k.rows_mut(schedule.n_v, schedule.n_r).copy_from(&vg.kr);
        let gp = build_generalized_plant(m, weights)?;
        let a_cl = &gp.a - &gp.b_u * k.transpose();
        let c_cl = &gp.c_z - &gp.d_zu * k.transpose();
        let rho = spectral_radius(&a_cl);
        let mre = min_re_eig(&a_cl.view((0, 0), (schedule.n_v, schedule.n_v)).into_owned());
        let norm = hinf_norm_sweep(&a_cl, &gp.b_w, &c_cl, &gp.d_zw, freq_points);
        rows.push(VertexCheckRow {
            speed_vertex_index: i,
            corner: m.stiffness_corner,
            spectral_radius: rho,
            min_re_vehicle: mre,
            hinf_norm_sq: norm * norm,
            bounded_real_ok: mu.map(|m| norm * norm <= m * (1.0 + 1e-4)),
        });
    }
    Ok(rows)
}
