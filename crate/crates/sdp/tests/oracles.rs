//! Solver oracles: closed-form and eigenvalue-based optima.

use lpvsteer_sdp::{check_solution, solve, AffineBlock, SdpProblem, SolveOptions, SolveStatus};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// min t s.t. [[t, 1], [1, t]] ⪰ 0. PSD iff t ≥ 0 and t² ≥ 1, so t* = 1.
fn unit_corner_problem(scale: f64) -> SdpProblem {
    let mut p = SdpProblem::new();
    let t = p.scalar_var("t");
    let mut block = AffineBlock::new(2);
    block.put_const(0, 0, &(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]) * scale));
    block.put_scalar_diag(t, 0, &(DMatrix::identity(2, 2) * scale));
    p.add_psd(block, "corner");
    p.set_objective(vec![(t, 1.0)]);
    p
}

#[test]
fn corner_problem_optimum_is_one() {
    let p = unit_corner_problem(1.0);
    let opts = SolveOptions {
        opt_tol: 1e-10,
        ..Default::default()
    };
    let sol = solve(&p, &opts).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!(
        (sol.objective - 1.0).abs() < 1e-8,
        "t* = {} (expected 1)",
        sol.objective
    );

    // independent check: the active constraint touches its boundary
    let check = check_solution(&p, &sol);
    assert!(check.min_eig_overall.abs() < 1e-8);
    assert!(check.feasible_within(1e-7));
}

#[test]
fn corner_problem_perturbed_solution_is_flagged() {
    let p = unit_corner_problem(1.0);
    let mut sol = solve(&p, &SolveOptions::default()).unwrap();
    sol.scalar_values[0] = 0.9; // deliberate violation
    let check = check_solution(&p, &sol);
    assert!(check.min_eig_overall < -0.05);
    assert!(!check.feasible_within(1e-7));
}

#[test]
fn lambda_max_matches_eigen_oracle_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..20 {
        let n = 5;
        let raw = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let a = (&raw + &raw.transpose()) * 0.5;
        let lam_max = a
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);

        let mut p = SdpProblem::new();
        let t = p.scalar_var("t");
        let mut block = AffineBlock::new(n);
        block.put_const(0, 0, &(-&a));
        block.put_scalar_diag(t, 0, &DMatrix::identity(n, n));
        p.add_psd(block, "tI-A");
        p.set_objective(vec![(t, 1.0)]);

        let opts = SolveOptions {
            opt_tol: 1e-9,
            ..Default::default()
        };
        let sol = solve(&p, &opts).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(
            (sol.objective - lam_max).abs() < 1e-6,
            "trial {trial}: t* = {} vs λ_max = {}",
            sol.objective,
            lam_max
        );
    }
}

#[test]
fn negative_identity_block_is_infeasible() {
    let mut p = SdpProblem::new();
    let t = p.scalar_var("t");
    let mut block = AffineBlock::new(3);
    block.put_const(0, 0, &(-DMatrix::<f64>::identity(3, 3)));
    p.add_psd(block, "neg");
    // give t some harmless incidence elsewhere so the objective is bounded
    let mut other = AffineBlock::new(1);
    other.put_scalar_diag(t, 0, &DMatrix::identity(1, 1));
    p.add_psd(other, "t>=0");
    p.set_objective(vec![(t, 1.0)]);

    let sol = solve(&p, &SolveOptions::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Infeasible);
    assert!(sol.feasibility_residual >= 0.9); // -I needs a full unit shift
}

#[test]
fn empty_constraint_list_is_trivially_feasible() {
    let p = SdpProblem::new();
    let sol = solve(&p, &SolveOptions::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    let check = check_solution(&p, &sol);
    assert!(check.feasible_within(0.0));
}

#[test]
fn constraint_scaling_leaves_optimizer_unchanged() {
    let sol1 = solve(&unit_corner_problem(1.0), &SolveOptions::default()).unwrap();
    let sol10 = solve(&unit_corner_problem(10.0), &SolveOptions::default()).unwrap();
    let rel = (sol1.scalar_values[0] - sol10.scalar_values[0]).abs()
        / sol1.scalar_values[0].abs().max(1.0);
    assert!(rel < 1e-6, "optimizers differ by {rel:.3e}");
}

#[test]
fn check_solution_passes_on_solver_output_corpus() {
    // idempotence: every optimal solve in this corpus verifies
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..5 {
        let n = 4;
        let raw = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let a = (&raw + &raw.transpose()) * 0.5;
        let mut p = SdpProblem::new();
        let t = p.scalar_var("t");
        let mut block = AffineBlock::new(n);
        block.put_const(0, 0, &(-&a));
        block.put_scalar_diag(t, 0, &DMatrix::identity(n, n));
        p.add_psd(block, "tI-A");
        p.set_objective(vec![(t, 1.0)]);
        let sol = solve(&p, &SolveOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(check_solution(&p, &sol).feasible_within(1e-7));
    }
}

#[test]
fn solves_are_deterministic() {
    let p = unit_corner_problem(1.0);
    let a = solve(&p, &SolveOptions::default()).unwrap();
    let b = solve(&p, &SolveOptions::default()).unwrap();
    assert_eq!(a.scalar_values[0].to_bits(), b.scalar_values[0].to_bits());
    assert_eq!(a.newton_iterations, b.newton_iterations);
}

#[test]
fn sdpa_dump_is_parseable_text() {
    let p = unit_corner_problem(1.0);
    let mut buf = Vec::new();
    p.write_sdpa(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('*'));
    assert_eq!(lines.next().unwrap().trim(), "1"); // one variable
    assert_eq!(lines.next().unwrap().trim(), "1"); // one block
    assert_eq!(lines.next().unwrap().trim(), "2"); // block dim
}
