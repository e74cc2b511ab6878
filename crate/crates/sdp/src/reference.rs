//! Brute-force barrier derivatives, used only as a test oracle.
//!
//! Builds every coefficient matrix ∂F/∂x_k densely and evaluates the
//! gradient and Hessian of −Σ log det F_c(x) by the defining trace formulas.
//! Deliberately independent of the solver's Gram-matrix assembly path.

use nalgebra::DMatrix;

use crate::problem::{Layout, SdpProblem};

pub(crate) fn barrier_derivatives_dense(
    problem: &SdpProblem,
    x_orig: &[f64],
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let layout = Layout::new(problem);
    let m = layout.n_comps;

    // unpack variable values
    let sym_values: Vec<DMatrix<f64>> = (0..problem.sym_vars.len())
        .map(|v| layout.unpack_sym(v, x_orig))
        .collect();
    let scalar_values: Vec<f64> = (0..problem.scalar_vars.len())
        .map(|v| x_orig[layout.scalar_comp[v]])
        .collect();

    let mut g = vec![0.0; m];
    let mut h = vec![vec![0.0; m]; m];

    for (block, _) in &problem.constraints {
        let s = block.eval(&sym_values, &scalar_values);
        let w = s
            .cholesky()
            .expect("reference point must be strictly feasible")
            .inverse();
        let coeffs: Vec<DMatrix<f64>> = (0..m)
            .map(|k| layout.comp_coefficient(problem, block, k))
            .collect();
        for k in 0..m {
            let wk = &w * &coeffs[k];
            g[k] -= wk.trace();
            for l in k..m {
                let v = (&wk * &w * &coeffs[l]).trace();
                h[k][l] += v;
                if l != k {
                    h[l][k] += v;
                }
            }
        }
    }
    (g, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::AffineBlock;
    use crate::solve::test_hooks::assemble_original_order;
    use nalgebra::DMatrix;

    fn rng_matrix(seed: &mut u64, rows: usize, cols: usize) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| {
            // xorshift64*
            *seed ^= *seed << 13;
            *seed ^= *seed >> 7;
            *seed ^= *seed << 17;
            ((*seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
    }

    /// Construct a small random problem that is strictly feasible at a
    /// random point x̂, then compare the optimized assembly against the
    /// dense trace formulas at x̂.
    fn check_random_problem(seed: u64) {
        let mut s = seed.wrapping_mul(0x9e3779b97f4a7c15).max(1);
        let mut p = SdpProblem::new();
        let n1 = 3;
        let n2 = 2;
        let xv = p.sym_var("X", n1);
        let yv = p.sym_var("Y", n2);
        let a = p.scalar_var("a");
        let b = p.scalar_var("b");
        p.set_objective(vec![(a, 1.0)]);

        let d = 7;
        let mut block = AffineBlock::new(d);
        block.put_var(xv, n1, 0, 1.0);
        block.put_sym_at(xv, n1, 0, 3, &rng_matrix(&mut s, 3, n1), &rng_matrix(&mut s, 4, n1));
        block.put_sym_at(yv, n2, 3, 3, &rng_matrix(&mut s, 4, n2), &rng_matrix(&mut s, 4, n2));
        block.put_sym_at(yv, n2, 0, 3, &rng_matrix(&mut s, 3, n2), &rng_matrix(&mut s, 4, n2));
        block.put_scalar_at(a, 0, 3, &rng_matrix(&mut s, 3, 4));
        block.put_scalar_diag(b, 3, &{
            let mm = rng_matrix(&mut s, 4, 4);
            &mm + &mm.transpose()
        });

        let mut block2 = AffineBlock::new(4);
        block2.put_var(yv, n2, 0, 1.0);
        block2.put_sym_at(xv, n1, 0, 2, &rng_matrix(&mut s, 2, n1), &rng_matrix(&mut s, 2, n1));
        block2.put_scalar_diag(a, 0, &DMatrix::identity(4, 4));

        // pick x̂ and shift constants so both blocks are strictly PD there
        let layout = Layout::new(&p);
        let xhat: Vec<f64> = (0..layout.n_comps)
            .map(|_| rng_matrix(&mut s, 1, 1)[(0, 0)] * 0.4)
            .collect();
        let sym_values: Vec<DMatrix<f64>> = (0..2).map(|v| layout.unpack_sym(v, &xhat)).collect();
        let scalar_values = vec![xhat[layout.scalar_comp[0]], xhat[layout.scalar_comp[1]]];
        for blk in [&mut block, &mut block2] {
            let at = blk.eval(&sym_values, &scalar_values);
            let dim = at.nrows();
            let shift = DMatrix::identity(dim, dim) * (at.amax() + 1.0) - at;
            blk.put_const(0, 0, &{
                let sym = (&shift + &shift.transpose()) * 0.5;
                sym
            });
        }
        p.add_psd(block, "b1");
        p.add_psd(block2, "b2");

        let (g_ref, h_ref) = barrier_derivatives_dense(&p, &xhat);
        let (h_opt, g_opt, orig_of_active) = assemble_original_order(&p, &xhat);

        let ma = g_opt.len();
        for k in 0..ma {
            let ko = orig_of_active[k];
            let diff = (g_opt[k] - g_ref[ko]).abs();
            assert!(
                diff <= 1e-8 * (1.0 + g_ref[ko].abs()),
                "gradient mismatch at comp {k}: {} vs {}",
                g_opt[k],
                g_ref[ko]
            );
            for l in 0..ma {
                let lo = orig_of_active[l];
                let diff = (h_opt[k * ma + l] - h_ref[ko][lo]).abs();
                assert!(
                    diff <= 1e-7 * (1.0 + h_ref[ko][lo].abs()),
                    "hessian mismatch at ({k},{l}): {} vs {}",
                    h_opt[k * ma + l],
                    h_ref[ko][lo]
                );
            }
        }
    }

    #[test]
    fn optimized_assembly_matches_dense_reference() {
        for seed in 1..=8u64 {
            check_random_problem(seed);
        }
    }

    #[test]
    fn blocked_cholesky_matches_nalgebra() {
        let mut s = 42u64;
        for n in [1usize, 5, 17, 97, 130] {
            let a = rng_matrix(&mut s, n, n);
            let spd = &a * &a.transpose() + DMatrix::identity(n, n) * (n as f64);
            let mut fac = spd.clone();
            assert!(crate::solve::test_hooks::cholesky_blocked_test(&mut fac));
            let lref = spd.cholesky().unwrap();
            let lr = lref.l();
            for i in 0..n {
                for j in 0..=i {
                    assert!(
                        (fac[(i, j)] - lr[(i, j)]).abs() <= 1e-9 * (1.0 + lr[(i, j)].abs()),
                        "L mismatch at ({i},{j})"
                    );
                }
            }
        }
    }
}
