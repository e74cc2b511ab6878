//! Infinite-horizon discrete LQ preview control via the DARE.
//!
//! The state cost is carried through the tracking measurement,
//! Q̃ = C_augᵀ Q C_aug, so the regulator penalizes the next-point deviation
//! and the heading mismatch rather than raw states. The stabilizing DARE
//! solution is computed with the structured doubling iteration; the
//! backward finite-horizon recursion doubles as its independent oracle.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg::{complex_eigenvalues, sigma_min_complex, spectral_radius};
use crate::models::AugmentedPlant;

/// Output and control-effort weights of the tracking cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostWeights {
    /// weight on the lateral next-point deviation
    pub q1: f64,
    /// weight on the heading-error output
    pub q2: f64,
    /// control effort weight
    pub r: f64,
}

impl CostWeights {
    pub fn validate(&self) -> Result<()> {
        if self.q1 < 0.0 || self.q2 < 0.0 || !self.q1.is_finite() || !self.q2.is_finite() {
            return Err(Error::Domain(format!(
                "output weights must be nonnegative (got q1={}, q2={})",
                self.q1, self.q2
            )));
        }
        if !(self.r > 0.0) || !self.r.is_finite() {
            return Err(Error::Domain(format!(
                "control weight must be strictly positive (got r={})",
                self.r
            )));
        }
        Ok(())
    }

    pub fn q_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&[self.q1, self.q2]))
    }

    pub fn q_sqrt(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&[
            self.q1.sqrt(),
            self.q2.sqrt(),
        ]))
    }
}

/// Solution of the preview LQ problem.
#[derive(Debug, Clone)]
pub struct LQSolution {
    /// stabilizing DARE solution (symmetric PSD)
    pub p: DMatrix<f64>,
    /// state-feedback part of the gain (vehicle states)
    pub kv: DVector<f64>,
    /// feedforward part of the gain (preview states)
    pub kr: DVector<f64>,
    /// relative DARE residual ‖AᵀPA − P − AᵀPB(R+BᵀPB)⁻¹BᵀPA + Q̃‖ / (1+‖P‖)
    pub residual: f64,
    pub iterations: usize,
}

/// Stabilizing DARE solution by structured doubling.
///
/// Iterates (A, G, H) with G = B R⁻¹ Bᵀ, H = Q; H converges quadratically
/// to the stabilizing P under stabilizability/detectability. Convergence is
/// declared when the relative change of H drops below `tol`.
pub fn dare(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<(DMatrix<f64>, usize)> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n);
    assert_eq!(b.nrows(), n);
    assert_eq!(q.shape(), (n, n));
    assert_eq!(r.shape(), (b.ncols(), b.ncols()));

    let r_inv = r.clone().try_inverse().ok_or_else(|| {
        Error::Domain("control weight matrix is singular".into())
    })?;
    let mut ak = a.clone();
    let mut g = b * r_inv * b.transpose();
    let mut h = q.clone();

    for it in 0..max_iter.max(1) {
        let w = DMatrix::identity(n, n) + &g * &h;
        let lu = w.lu();
        let va = lu
            .solve(&ak)
            .ok_or_else(|| Error::Convergence {
                message: "doubling iteration hit a singular I + G H".into(),
                residual: f64::NAN,
            })?;
        let vg = lu.solve(&g).ok_or_else(|| Error::Convergence {
            message: "doubling iteration hit a singular I + G H".into(),
            residual: f64::NAN,
        })?;
        let a_next = &ak * &va;
        let g_next = &g + &ak * &vg * ak.transpose();
        let h_next = &h + ak.transpose() * &h * &va;

        let step = (&h_next - &h).amax();
        let scale = h_next.amax().max(1.0);
        ak = a_next;
        g = g_next;
        h = (h_next.clone() + h_next.transpose()) * 0.5;
        if !h.iter().all(|v| v.is_finite()) {
            return Err(Error::Convergence {
                message: "doubling iteration diverged".into(),
                residual: f64::INFINITY,
            });
        }
        if step <= tol * scale {
            return Ok((h, it + 1));
        }
    }
    let res = (&h - &h.transpose()).amax();
    Err(Error::Convergence {
        message: format!("DARE doubling did not converge in {max_iter} iterations"),
        residual: res,
    })
}

/// LQ gain from a DARE solution: K = (R + BᵀPB)⁻¹ BᵀPA.
pub fn lq_gain(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let denom = r + b.transpose() * p * b;
    let rhs = b.transpose() * p * a;
    denom
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Domain("R + BᵀPB is singular".into()))
}

/// Relative DARE residual at P.
pub fn dare_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> f64 {
    let k = match lq_gain(a, b, r, p) {
        Ok(k) => k,
        Err(_) => return f64::INFINITY,
    };
    let res = a.transpose() * p * a - p - a.transpose() * p * b * k + q;
    res.amax() / (1.0 + p.amax())
}

/// Unstable-mode reachability/observability screen (PBH rank tests).
///
/// A genuinely unreachable unstable mode is a hard error; weak-rank
/// warnings on marginal modes are logged but tolerated because the
/// nilpotent preview block is reachable only through the disturbance
/// channel by design.
fn pbh_screen(a: &DMatrix<f64>, b: &DMatrix<f64>, c_detect: &DMatrix<f64>) -> Result<()> {
    let n = a.nrows();
    let scale = a.amax().max(1.0);
    let threshold = 1e-8 * scale;
    let eigs = complex_eigenvalues(a);
    for lam in eigs {
        if lam.norm() < 1.0 - 1e-9 {
            continue;
        }
        // [A − λI, B]
        let mut stab = DMatrix::from_fn(n, n + b.ncols(), |i, j| {
            if j < n {
                Complex::new(a[(i, j)], 0.0)
            } else {
                Complex::new(b[(i, j - n)], 0.0)
            }
        });
        for i in 0..n {
            stab[(i, i)] -= lam;
        }
        if sigma_min_complex(&stab) < threshold {
            return Err(Error::Synthesis(format!(
                "unstable mode λ = {:.6} + {:.6}i is not stabilizable (PBH σ_min below {threshold:.1e})",
                lam.re, lam.im
            )));
        }
        // [A − λI; C]
        let p = c_detect.nrows();
        let mut det = DMatrix::from_fn(n + p, n, |i, j| {
            if i < n {
                Complex::new(a[(i, j)], 0.0)
            } else {
                Complex::new(c_detect[(i - n, j)], 0.0)
            }
        });
        for i in 0..n {
            det[(i, i)] -= lam;
        }
        if sigma_min_complex(&det) < threshold {
            log::warn!(
                "unstable mode λ = {:.6} + {:.6}i appears unobservable through the weighted \
                 outputs (PBH σ_min below {threshold:.1e}); DARE may not admit a stabilizing solution",
                lam.re,
                lam.im
            );
        }
    }
    Ok(())
}

/// Solve the infinite-horizon preview LQ problem for an augmented plant.
pub fn solve_dare(
    plant: &AugmentedPlant,
    weights: &CostWeights,
    tol: f64,
    max_iter: usize,
) -> Result<LQSolution> {
    weights.validate()?;
    let a = &plant.plant.a;
    let b = &plant.plant.b_u;
    let c = plant.c_aug();
    let q_tilde = c.transpose() * weights.q_matrix() * c;
    let r = DMatrix::from_element(1, 1, weights.r);

    pbh_screen(a, b, &(weights.q_sqrt() * c))?;

    let (p, iterations) = dare(a, b, &q_tilde, &r, tol, max_iter)?;
    let k = lq_gain(a, b, &r, &p)?;
    let residual = dare_residual(a, b, &q_tilde, &r, &p);

    let a_cl = a - b * &k;
    let rho = spectral_radius(&a_cl);
    if rho >= 1.0 {
        return Err(Error::Convergence {
            message: format!("DARE gain is not stabilizing (closed-loop spectral radius {rho:.6})"),
            residual,
        });
    }

    let krow = k.row(0).transpose();
    Ok(LQSolution {
        p,
        kv: krow.rows(0, plant.n_v).into_owned(),
        kr: krow.rows(plant.n_v, plant.n_r).into_owned(),
        residual,
        iterations,
    })
}

/// DARE gains at every speed vertex, packaged as a schedule (gain
/// interpolation; there are no Lyapunov certificates to interpolate).
pub fn lq_schedule(
    models: &[crate::models::VertexModel],
    weights: &CostWeights,
    poly: &crate::scheduling::SpeedPolytope,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<LQSolution>, crate::scheduling::GainSchedule)> {
    use crate::scheduling::{GainSchedule, InterpolationMode, VertexGains};
    let n_vertices = models
        .iter()
        .map(|m| m.speed_vertex_index)
        .max()
        .map(|m| m + 1)
        .ok_or_else(|| Error::Synthesis("empty model family".into()))?;
    if n_vertices != 3 {
        return Err(Error::Synthesis(format!(
            "LQ schedule needs the three speed vertices (got {n_vertices})"
        )));
    }
    let mut solutions = Vec::with_capacity(3);
    let mut vertices = Vec::with_capacity(3);
    for i in 0..3 {
        let model = models
            .iter()
            .find(|m| m.speed_vertex_index == i && m.stiffness_corner == (1.0, 1.0))
            .or_else(|| models.iter().find(|m| m.speed_vertex_index == i))
            .ok_or_else(|| Error::Synthesis(format!("no model at speed vertex {i}")))?;
        let sol = solve_dare(&model.plant, weights, tol, max_iter)?;
        vertices.push(VertexGains {
            kv: sol.kv.clone(),
            kr: sol.kr.clone(),
            p: None,
            z: None,
        });
        solutions.push(sol);
    }
    Ok((
        solutions,
        GainSchedule {
            polytope: poly.clone(),
            n_v: models[0].plant.n_v,
            n_r: models[0].plant.n_r,
            vertices,
            mode: InterpolationMode::Gain,
        },
    ))
}

/// Backward Riccati recursion gains on a generic quadruple. `gains[j]` is
/// the gain after `j+1` recursion steps starting from zero terminal cost;
/// the last element converges to the DARE gain as the horizon grows.
pub fn finite_horizon_gains(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    horizon: usize,
) -> Vec<DMatrix<f64>> {
    let mut p = DMatrix::zeros(a.nrows(), a.nrows());
    let mut gains = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        // Riccati map applied first, so one step yields the gain at P = Q̃
        p = riccati_map(a, b, q, r, &p);
        if let Ok(k) = lq_gain(a, b, r, &p) {
            gains.push(k);
        } else {
            break;
        }
    }
    gains
}

/// One backward Riccati step P⁺ = Q̃ + AᵀPA − AᵀPB(R+BᵀPB)⁻¹BᵀPA.
pub fn riccati_map(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> DMatrix<f64> {
    let k = lq_gain(a, b, r, p).expect("R + BᵀPB must stay invertible for R ≻ 0");
    let next = q + a.transpose() * p * a - a.transpose() * p * b * k;
    (next.clone() + next.transpose()) * 0.5
}

/// Finite-horizon preview gains for an augmented plant (oracle for
/// `solve_dare`).
pub fn finite_horizon_riccati(
    plant: &AugmentedPlant,
    weights: &CostWeights,
    horizon: usize,
) -> Result<Vec<DVector<f64>>> {
    weights.validate()?;
    if horizon < 1 {
        return Err(Error::Domain("horizon must be at least 1".into()));
    }
    let a = &plant.plant.a;
    let b = &plant.plant.b_u;
    let c = plant.c_aug();
    let q_tilde = c.transpose() * weights.q_matrix() * c;
    let r = DMatrix::from_element(1, 1, weights.r);
    Ok(finite_horizon_gains(a, b, &q_tilde, &r, horizon)
        .into_iter()
        .map(|k| k.row(0).transpose())
        .collect())
}
