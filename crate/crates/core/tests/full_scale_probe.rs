//! Full-size (N = 50) synthesis probe, run explicitly during development:
//! `cargo test -p lpvsteer-core --test full_scale_probe -- --ignored --nocapture`

use std::time::Instant;

use lpvsteer_core::lmi_synthesis::{LMIRegion, PoleScope, SynthesisOptions};
use lpvsteer_core::lq_preview::{solve_dare, CostWeights};
use lpvsteer_core::models::{
    enumerate_vertex_models, ErrorModelVariant, ModelFamily, PreviewConfig, VehicleParams,
};
use lpvsteer_core::scheduling::build_polytope;

fn nominal(u: f64) -> VehicleParams {
    VehicleParams {
        m: 1500.0,
        iz: 2500.0,
        lf: 1.1,
        lr: 1.6,
        caf: 60_000.0,
        car: 60_000.0,
        stiffness_uncertainty: u,
    }
}

#[test]
#[ignore]
fn probe_full_scale_synthesis() {
    let config = PreviewConfig {
        t: 0.02,
        n: 50,
        v_min: 3.0,
        v_max: 30.0,
    };
    let weights = CostWeights {
        q1: 0.95,
        q2: 3e-3,
        r: 0.25,
    };
    let poly = build_polytope(3.0, 30.0).unwrap();

    let t0 = Instant::now();
    let models = enumerate_vertex_models(
        &nominal(0.0),
        &config,
        ErrorModelVariant::Paper,
        ModelFamily::Nominal,
    )
    .unwrap();
    println!("models built in {:?}", t0.elapsed());

    let t1 = Instant::now();
    let lq = solve_dare(&models[0].plant, &weights, 1e-10, 10_000).unwrap();
    println!(
        "DARE solved in {:?} ({} iters, residual {:.2e})",
        t1.elapsed(),
        lq.iterations,
        lq.residual
    );
    let kr_max = lq.kr.amax();
    let tail: f64 = (35..50).map(|i| lq.kr[i].abs()).fold(0.0, f64::max);
    println!("LQ |Kr| max {kr_max:.4}, tail(>35) {tail:.2e}, ratio {:.2e}", tail / kr_max);
    println!("LQ Kv = {:?}", lq.kv.as_slice());

    let t2 = Instant::now();
    let opts = SynthesisOptions {
        region: Some(LMIRegion::positivity(0.05).unwrap()),
        pole_scope: PoleScope::VehicleBlock,
        ..SynthesisOptions::default()
    };
    let (result, schedule) = lpvsteer_core::lmi_synthesis::synthesize(
        &models, &weights, &poly, &opts,
    )
    .unwrap();
    println!(
        "H∞ synthesis (zeta 0.05) in {:?}: mu = {:.4}, newton iters = {}, grid_ok = {}, pole margin = {:.4}",
        t2.elapsed(),
        result.mu,
        result.solver.newton_iterations,
        result.grid_ok,
        result.pole_margin
    );
    for (i, v) in schedule.vertices.iter().enumerate() {
        let krm = v.kr.amax();
        let tail: f64 = (35..50).map(|k| v.kr[k].abs()).fold(0.0, f64::max);
        println!(
            "vertex {i}: |Kv|max {:.4}, |Kr|max {:.4}, tail ratio {:.2e}",
            v.kv.amax(),
            krm,
            tail / krm
        );
    }
    for d in &result.model_diags {
        println!(
            "diag v{}: rho {:.4}, minRe(veh) {:.4}, ||T||^2 {:.4} (mu {:.4}, ok {})",
            d.speed_vertex_index, d.spectral_radius, d.min_re_vehicle, d.hinf_norm_sq, result.mu, d.bounded_real_ok
        );
    }

    let t3 = Instant::now();
    let opts0 = SynthesisOptions {
        region: Some(LMIRegion::positivity(0.0).unwrap()),
        pole_scope: PoleScope::VehicleBlock,
        ..SynthesisOptions::default()
    };
    let (r0, s0) = lpvsteer_core::lmi_synthesis::synthesize(&models, &weights, &poly, &opts0).unwrap();
    println!(
        "H∞ synthesis (zeta 0) in {:?}: mu = {:.4}, kvmax {:.4} vs {:.4}",
        t3.elapsed(),
        r0.mu,
        s0.vertices.iter().map(|v| v.kv.amax()).fold(0.0, f64::max),
        schedule.vertices.iter().map(|v| v.kv.amax()).fold(0.0, f64::max),
    );
}
