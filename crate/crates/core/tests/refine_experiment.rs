use lpvsteer_core::lmi_synthesis::{
    synthesize, LMIRegion, PoleScope, Refinement, RefineScope, SynthesisOptions,
};
use lpvsteer_core::lq_preview::CostWeights;
use lpvsteer_core::models::{
    enumerate_vertex_models, ErrorModelVariant, ModelFamily, PreviewConfig, VehicleParams,
};
use lpvsteer_core::scheduling::build_polytope;

fn nominal() -> VehicleParams {
    VehicleParams { m: 1500.0, iz: 2500.0, lf: 1.1, lr: 1.6, caf: 60_000.0, car: 60_000.0, stiffness_uncertainty: 0.3 }
}

#[test]
#[ignore]
fn refine_experiment() {
    let cfg = PreviewConfig { t: 0.02, n: 8, v_min: 3.0, v_max: 30.0 };
    let w = CostWeights { q1: 0.95, q2: 3e-3, r: 0.25 };
    let models = enumerate_vertex_models(&nominal(), &cfg, ErrorModelVariant::Paper, ModelFamily::Nominal).unwrap();
    let poly = build_polytope(3.0, 30.0).unwrap();
    for (label, refine, mode, bdp) in [
        ("common", None, lpvsteer_core::lmi_synthesis::SynthesisMode::CommonP, false),
        ("paper", None, lpvsteer_core::lmi_synthesis::SynthesisMode::PerVertexP, false),
        ("bdp", None, lpvsteer_core::lmi_synthesis::SynthesisMode::CommonP, true),
    ] {
        for zeta in [0.0_f64, 0.05] {
            let t0 = std::time::Instant::now();
            let opts = SynthesisOptions {
                region: Some(LMIRegion::positivity(zeta).unwrap()),
                pole_scope: PoleScope::VehicleBlock,
                refine,
                mode,
                block_diag_p: bdp,
                ..SynthesisOptions::default()
            };
            let (r, s) = synthesize(&models, &w, &poly, &opts).unwrap();
            let kvmax = s.vertices.iter().map(|v| v.kv.amax()).fold(0.0, f64::max);
            let tail_ratio = {
                let mut t = 0.0f64; let mut m = 0.0f64;
                for v in &s.vertices {
                    m = m.max(v.kr.amax());
                    for i in 6..8 { t = t.max(v.kr[i].abs()); }
                }
                t / m
            };
            println!(
                "{label} z={zeta}: mu*={:.4} mu={:.4} kvmax={:.3} margin={:.4} rho_max={:.4} tail8={:.3} grid={} {:?}",
                r.mu_optimal, r.mu, kvmax, r.pole_margin,
                r.model_diags.iter().map(|d| d.spectral_radius).fold(0.0, f64::max),
                tail_ratio, r.grid_ok, t0.elapsed()
            );
        }
    }
}
