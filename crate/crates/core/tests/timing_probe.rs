use std::time::Instant;
use lpvsteer_core::lmi_synthesis::{synthesize, LMIRegion, PoleScope, SynthesisOptions};
use lpvsteer_core::lq_preview::CostWeights;
use lpvsteer_core::models::{enumerate_vertex_models, ErrorModelVariant, ModelFamily, PreviewConfig, VehicleParams};
use lpvsteer_core::scheduling::build_polytope;

#[test]
#[ignore]
fn timing_probe() {
    let cfg = PreviewConfig { t: 0.02, n: 50, v_min: 3.0, v_max: 30.0 };
    let w = CostWeights { q1: 0.95, q2: 3e-3, r: 0.25 };
    let poly = build_polytope(3.0, 30.0).unwrap();
    let base = |u: f64, fam| {
        let p = VehicleParams { m: 1500.0, iz: 2500.0, lf: 1.1, lr: 1.6, caf: 60_000.0, car: 60_000.0, stiffness_uncertainty: u };
        enumerate_vertex_models(&p, &cfg, ErrorModelVariant::Paper, fam).unwrap()
    };
    let opts = SynthesisOptions {
        region: Some(LMIRegion::positivity(0.05).unwrap()),
        pole_scope: PoleScope::VehicleBlock,
        ..SynthesisOptions::default()
    };
    let t0 = Instant::now();
    let (rc, sc) = synthesize(&base(0.0, ModelFamily::Nominal), &w, &poly, &opts).unwrap();
    println!("certain: {:?} iters={} mu={:.4} margin={:.4} grid={} kv={:.2}",
        t0.elapsed(), rc.solver.newton_iterations, rc.mu, rc.pole_margin, rc.grid_ok,
        sc.vertices.iter().map(|v| v.kv.amax()).fold(0.0, f64::max));
    let t1 = Instant::now();
    let (ru, su) = synthesize(&base(0.3, ModelFamily::Uncertain), &w, &poly, &opts).unwrap();
    println!("uncertain: {:?} iters={} mu={:.4} margin={:.4} grid={} kv={:.2}",
        t1.elapsed(), ru.solver.newton_iterations, ru.mu, ru.pole_margin, ru.grid_ok,
        su.vertices.iter().map(|v| v.kv.amax()).fold(0.0, f64::max));
    let t2 = Instant::now();
    let (r15, _) = synthesize(&base(0.15, ModelFamily::Uncertain), &w, &poly, &opts).unwrap();
    println!("u=0.15: {:?} iters={} mu={:.4}", t2.elapsed(), r15.solver.newton_iterations, r15.mu);
    println!("monotonic: {} <= {} <= {}", rc.mu, r15.mu, ru.mu);
}
