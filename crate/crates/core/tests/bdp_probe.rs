use lpvsteer_core::lmi_synthesis::{synthesize, LMIRegion, PoleScope, SynthesisOptions};
use lpvsteer_core::lq_preview::CostWeights;
use lpvsteer_core::models::{enumerate_vertex_models, ErrorModelVariant, ModelFamily, PreviewConfig, VehicleParams};
use lpvsteer_core::scheduling::build_polytope;

#[test]
#[ignore]
fn bdp_probe() {
    let nominal = VehicleParams { m: 1500.0, iz: 2500.0, lf: 1.1, lr: 1.6, caf: 60_000.0, car: 60_000.0, stiffness_uncertainty: 0.3 };
    let cfg = PreviewConfig { t: 0.02, n: 8, v_min: 3.0, v_max: 30.0 };
    let w = CostWeights { q1: 0.95, q2: 3e-3, r: 0.25 };
    let models = enumerate_vertex_models(&nominal, &cfg, ErrorModelVariant::Paper, ModelFamily::Nominal).unwrap();
    let poly = build_polytope(3.0, 30.0).unwrap();
    let opts = SynthesisOptions {
        region: Some(LMIRegion::positivity(0.0).unwrap()),
        pole_scope: PoleScope::VehicleBlock,
        block_diag_p: true,
        ..SynthesisOptions::default()
    };
    match synthesize(&models, &w, &poly, &opts) {
        Ok((r, _)) => println!("ok mu={} margin={}", r.mu, r.pole_margin),
        Err(e) => println!("ERR: {e}"),
    }
}
