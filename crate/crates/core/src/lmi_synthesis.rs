//! H∞ static state-feedback synthesis over the vertex model family.
//!
//! Per vertex model, feasibility of the 4×4 block inequality
//!
//! ```text
//! [ P        A P + B_u Z   B_w   0                 ]
//! [ ·        P             0     P C_zᵀ + Zᵀ D_zuᵀ ]   ≻ 0
//! [ ·        ·             I     D_zwᵀ             ]
//! [ ·        ·             ·     μ I               ]
//! ```
//!
//! certifies ‖T_zw‖∞² < μ for the closed loop A + B_u K with K = Z P⁻¹.
//! Minimizing μ subject to every vertex instance (optionally plus the
//! positivity pole region on the vehicle block) gives the robust schedule.
//!
//! Two variable modes are supported. With per-vertex Lyapunov matrices
//! (the printed formulation) stability under interpolation is not implied
//! by the vertex certificates, so a dense speed-grid check runs after
//! every synthesis; the shared-P mode certifies the interpolated family
//! directly and is the default.

use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex;

use lpvsteer_sdp::{
    check_solution, solve, AffineBlock, ScalarVarId, SdpProblem, SolveOptions, SolveStatus,
    SymVarId,
};

use crate::error::{Error, Result};
use crate::linalg::{hinf_norm_sweep, min_re_eig, spectral_radius};
use crate::lq_preview::CostWeights;
use crate::models::VertexModel;
use crate::scheduling::{
    GainSchedule, InterpolationMode, SpeedPolytope, VertexGains,
};

/// Performance interconnection at one vertex: weighted tracking outputs
/// plus the weighted steering effort form z; ω = [y_ri; ψ̇_des].
#[derive(Debug, Clone)]
pub struct GeneralizedPlant {
    pub a: DMatrix<f64>,
    pub b_u: DMatrix<f64>,
    pub b_w: DMatrix<f64>,
    pub c_z: DMatrix<f64>,
    pub d_zu: DMatrix<f64>,
    pub d_zw: DMatrix<f64>,
    pub n_v: usize,
    pub n_r: usize,
    pub speed_vertex_index: usize,
    pub stiffness_corner: (f64, f64),
}

impl GeneralizedPlant {
    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }
}

pub fn build_generalized_plant(model: &VertexModel, weights: &CostWeights) -> Result<GeneralizedPlant> {
    weights.validate()?;
    let plant = &model.plant.plant;
    let n = plant.a.nrows();
    let c_aug = model.plant.c_aug();
    let mut c_z = DMatrix::zeros(3, n);
    c_z.view_mut((0, 0), (2, n))
        .copy_from(&(weights.q_sqrt() * c_aug));
    let mut d_zu = DMatrix::zeros(3, 1);
    d_zu[(2, 0)] = weights.r.sqrt();
    let d_zw = DMatrix::zeros(3, plant.b_w.ncols());
    Ok(GeneralizedPlant {
        a: plant.a.clone(),
        b_u: plant.b_u.clone(),
        b_w: plant.b_w.clone(),
        c_z,
        d_zu,
        d_zw,
        n_v: model.plant.n_v,
        n_r: model.plant.n_r,
        speed_vertex_index: model.speed_vertex_index,
        stiffness_corner: model.stiffness_corner,
    })
}

/// D-stability region for the discrete positivity constraint
/// Re(z) ≥ ζ_p, encoded by f(z) = α₀ + βz + βᵀz̄ ⪰ 0 with
/// α₀ = ζ_p·diag(2, −2) and β = [[0,0],[0,1]].
#[derive(Debug, Clone)]
pub struct LMIRegion {
    pub alpha0: Matrix2<f64>,
    pub beta: Matrix2<f64>,
    pub zeta_p: f64,
}

impl LMIRegion {
    pub fn positivity(zeta_p: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&zeta_p) {
            return Err(Error::Domain(format!(
                "positivity margin must lie in [0, 1) inside the unit disk (got {zeta_p})"
            )));
        }
        Ok(LMIRegion {
            alpha0: Matrix2::new(2.0 * zeta_p, 0.0, 0.0, -2.0 * zeta_p),
            beta: Matrix2::new(0.0, 0.0, 0.0, 1.0),
            zeta_p,
        })
    }

    /// Evaluate the region function at a complex point (β is symmetric, so
    /// the value is real symmetric).
    pub fn eval(&self, z: Complex<f64>) -> Matrix2<f64> {
        self.alpha0 + self.beta * (2.0 * z.re)
    }
}

/// Which closed-loop block the pole region constrains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PoleScope {
    /// entire closed loop — infeasible for ζ_p > 0 with a preview block,
    /// whose shift-register eigenvalues are pinned at the origin
    Full,
    /// leading (vehicle) partition of the Lyapunov matrix
    #[default]
    VehicleBlock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SynthesisMode {
    /// one shared Lyapunov matrix: certifies the interpolated schedule
    #[default]
    CommonP,
    /// per-vertex Lyapunov matrices: the printed vertex conditions
    PerVertexP,
}

/// Handle for the Lyapunov variable, placed either as one full matrix or as
/// a block-diagonal pair (vehicle / road partition).
#[derive(Debug, Clone)]
pub enum PVar {
    Full {
        id: SymVarId,
        n: usize,
    },
    BlockDiag {
        p11: SymVarId,
        p22: SymVarId,
        n_v: usize,
        n_r: usize,
    },
}

impl PVar {
    pub fn n(&self) -> usize {
        match self {
            PVar::Full { n, .. } => *n,
            PVar::BlockDiag { n_v, n_r, .. } => n_v + n_r,
        }
    }

    /// Place `L P Rᵀ` at block (r0, c0) (mirror implied), splitting over the
    /// partition when P is block-diagonal.
    fn place(&self, block: &mut AffineBlock, r0: usize, c0: usize, l: &DMatrix<f64>, r: &DMatrix<f64>) {
        match self {
            PVar::Full { id, n } => block.put_sym_at(*id, *n, r0, c0, l, r),
            PVar::BlockDiag { p11, p22, n_v, n_r } => {
                let l1 = l.columns(0, *n_v).into_owned();
                let r1 = r.columns(0, *n_v).into_owned();
                block.put_sym_at(*p11, *n_v, r0, c0, &l1, &r1);
                let l2 = l.columns(*n_v, *n_r).into_owned();
                let r2 = r.columns(*n_v, *n_r).into_owned();
                block.put_sym_at(*p22, *n_r, r0, c0, &l2, &r2);
            }
        }
    }
}

/// The 4×4 block H∞ inequality for one vertex, affine in (P, Z, μ).
/// In a shared-P synthesis the caller passes the same handle to every
/// vertex instance.
pub fn assemble_hinf_lmi(
    gp: &GeneralizedPlant,
    p: &PVar,
    z: &[ScalarVarId],
    mu: ScalarVarId,
) -> AffineBlock {
    let n = gp.n_states();
    assert_eq!(p.n(), n);
    assert_eq!(z.len(), n);
    let mw = gp.b_w.ncols();
    let mz = gp.c_z.nrows();
    let (o1, o2, o3, o4) = (0, n, 2 * n, 2 * n + mw);
    let mut block = AffineBlock::new(2 * n + mw + mz);

    let eye = DMatrix::identity(n, n);
    let half = &eye * 0.5;
    p.place(&mut block, o1, o1, &eye, &half);
    p.place(&mut block, o2, o2, &eye, &half);
    p.place(&mut block, o1, o2, &gp.a, &eye);
    p.place(&mut block, o2, o4, &eye, &gp.c_z);

    // B_u Z at (1,2) and Zᵀ D_zuᵀ at (2,4), one column at a time
    for (c, zc) in z.iter().enumerate() {
        let mut trips = Vec::new();
        for row in 0..n {
            let v = gp.b_u[(row, 0)];
            if v != 0.0 {
                trips.push((o1 + row, o2 + c, v));
            }
        }
        for k in 0..mz {
            let v = gp.d_zu[(k, 0)];
            if v != 0.0 {
                trips.push((o2 + c, o4 + k, v));
            }
        }
        block.put_scalar_triplets(*zc, trips);
    }

    block.put_const(o1, o3, &gp.b_w);
    block.put_const(o3, o3, &DMatrix::identity(mw, mw));
    if gp.d_zw.amax() != 0.0 {
        block.put_const(o3, o4, &gp.d_zw.transpose());
    }
    block.put_scalar_diag(mu, o4, &DMatrix::identity(mz, mz));
    block
}

/// Pole-region constraints M_D = α₀⊗P_sel + β⊗G + βᵀ⊗Gᵀ ≻ 0 with
/// G = (A P + B_u Z) restricted to the scope.
///
/// For the positivity region β has a zero first row, so M_D is block
/// diagonal and is emitted as its diagonal blocks: ζ_p·2·P_sel (dropped
/// when ζ_p = 0, where it is identically zero) and
/// G + Gᵀ − 2ζ_p·P_sel.
pub fn assemble_pole_constraint(
    gp: &GeneralizedPlant,
    region: &LMIRegion,
    scope: PoleScope,
    p: &PVar,
    z: &[ScalarVarId],
) -> Result<Vec<(AffineBlock, String)>> {
    if !(0.0..1.0).contains(&region.zeta_p) {
        return Err(Error::Domain(format!(
            "positivity margin must lie in [0, 1) (got {})",
            region.zeta_p
        )));
    }
    let n = gp.n_states();
    let sel = match scope {
        PoleScope::Full => DMatrix::identity(n, n),
        PoleScope::VehicleBlock => {
            let mut s = DMatrix::zeros(gp.n_v, n);
            for i in 0..gp.n_v {
                s[(i, i)] = 1.0;
            }
            s
        }
    };
    let ns = sel.nrows();
    let zeta = region.zeta_p;
    let scope_name = match scope {
        PoleScope::Full => "full",
        PoleScope::VehicleBlock => "vehicle",
    };
    let mut out = Vec::new();

    if zeta > 0.0 {
        let mut b1 = AffineBlock::new(ns);
        p.place(&mut b1, 0, 0, &(&sel * (2.0 * zeta)), &(&sel * 0.5));
        out.push((b1, format!("pole[{scope_name}]:P")));
    }

    let mut b2 = AffineBlock::new(ns);
    if zeta > 0.0 {
        p.place(&mut b2, 0, 0, &(&sel * (-2.0 * zeta)), &(&sel * 0.5));
    }
    let sa = &sel * &gp.a;
    p.place(&mut b2, 0, 0, &sa, &sel);
    let sb = &sel * &gp.b_u;
    for c in 0..ns {
        // Z Sᵀ keeps only the scoped gain columns
        let col = (0..n).find(|&j| sel[(c, j)] != 0.0).expect("selector row has a pivot");
        let mut trips = Vec::new();
        for row in 0..ns {
            let v = sb[(row, 0)];
            if v != 0.0 {
                trips.push((row, c, v));
            }
        }
        if !trips.is_empty() {
            // symmetrized contribution covers both G and Gᵀ
            let mut blk_trips = Vec::new();
            for (rr, cc, v) in trips {
                blk_trips.push((rr, cc, v));
            }
            b2.put_scalar_triplets(z[col], blk_trips);
        }
    }
    out.push((b2, format!("pole[{scope_name}]:rate")));
    Ok(out)
}

/// Optional secondary solve executed at (essentially) the optimal μ.
///
/// The μ-optimal set of this synthesis is typically a large flat face —
/// the worst-case norm is pinned by an unavoidable low-speed disturbance
/// response, leaving the gain magnitudes undetermined. The refinement
/// re-solves with μ capped at μ*(1 + margin) and minimizes an eigenvalue
/// bound t with tI − P ⪰ 0. Shrinking the Lyapunov matrix selects the
/// fast-transient corner of the optimal face (the behavior pole-region
/// constraints exist to counteract), which makes "with region" and
/// "without region" runs comparable design points instead of arbitrary
/// interior points.
/// Which partition of the Lyapunov matrix the refinement bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefineScope {
    /// tI − P ⪰ 0 on the whole matrix
    Full,
    /// tI − P₁₁ ⪰ 0 on the vehicle partition: shrinking the vehicle-block
    /// Lyapunov matrix selects the fast-transient corner of the optimal set
    Vehicle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Refinement {
    /// relative slack on the achieved μ during refinement; the certified
    /// norm bound of the returned gains is μ*(1 + mu_margin)
    pub mu_margin: f64,
    /// relative optimality tolerance of the refinement solve (gain shaping
    /// needs far less accuracy than the norm bound itself)
    pub opt_tol: f64,
    pub scope: RefineScope,
}

impl Default for Refinement {
    fn default() -> Self {
        Refinement {
            mu_margin: 5e-2,
            opt_tol: 1e-4,
            scope: RefineScope::Vehicle,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthesisOptions {
    pub mode: SynthesisMode,
    pub region: Option<LMIRegion>,
    pub pole_scope: PoleScope,
    /// restrict the Lyapunov matrix to the vehicle/road block diagonal
    pub block_diag_p: bool,
    pub interpolation: InterpolationMode,
    pub refine: Option<Refinement>,
    pub feas_tol: f64,
    pub opt_tol: f64,
    /// frequency points for the bounded-real verification sweep
    pub freq_points: usize,
    /// speed points for the interpolated-stability grid check
    pub grid_points: usize,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions {
            mode: SynthesisMode::CommonP,
            region: None,
            pole_scope: PoleScope::VehicleBlock,
            block_diag_p: false,
            interpolation: InterpolationMode::Paper,
            refine: None,
            feas_tol: 1e-7,
            opt_tol: 1e-6,
            freq_points: 1000,
            grid_points: 100,
        }
    }
}

/// Per-model verification entry.
#[derive(Debug, Clone)]
pub struct VertexDiag {
    pub speed_vertex_index: usize,
    pub stiffness_corner: (f64, f64),
    pub spectral_radius: f64,
    pub min_re_vehicle: f64,
    /// squared H∞ norm of the verified closed loop (frequency sweep)
    pub hinf_norm_sq: f64,
    pub bounded_real_ok: bool,
}

#[derive(Debug, Clone)]
pub struct SolverDiag {
    pub status: String,
    pub newton_iterations: usize,
    /// minimum eigenvalue over all constraint blocks at the solution
    pub min_constraint_eig: f64,
    pub gap_bound: f64,
}

#[derive(Debug, Clone)]
pub struct SynthesisResult {
    pub mode: SynthesisMode,
    /// squared norm bound certified for the returned gains (equals the
    /// optimum unless a refinement pass with a μ margin ran)
    pub mu: f64,
    /// optimal squared norm bound of the μ-minimization itself
    pub mu_optimal: f64,
    /// √μ, the certified H∞ norm bound
    pub norm_bound: f64,
    pub zeta_p: Option<f64>,
    /// per speed vertex: Lyapunov matrix and Z row (schedule sign
    /// convention, u = −K x)
    pub p_vertices: Vec<DMatrix<f64>>,
    pub z_vertices: Vec<DVector<f64>>,
    pub k_vertices: Vec<DVector<f64>>,
    pub model_diags: Vec<VertexDiag>,
    /// interpolated-schedule stability over the speed grid
    pub grid_ok: bool,
    pub grid_failures: Vec<f64>,
    /// min over models of min Re(eig) of the closed-loop vehicle block
    pub pole_margin: f64,
    pub solver: SolverDiag,
    pub warnings: Vec<String>,
}

/// Synthesize a gain schedule over a three-vertex speed polytope.
pub fn synthesize(
    models: &[VertexModel],
    weights: &CostWeights,
    poly: &SpeedPolytope,
    opts: &SynthesisOptions,
) -> Result<(SynthesisResult, GainSchedule)> {
    let (result, schedule) = synthesize_family(models, weights, opts, Some(poly))?;
    Ok((result, schedule.expect("polytope given")))
}

/// Core synthesis over an arbitrary vertex family (single-vertex families
/// are tolerated for verification purposes; a schedule is produced only
/// when a polytope is supplied and the family has three speed vertices).
pub fn synthesize_family(
    models: &[VertexModel],
    weights: &CostWeights,
    opts: &SynthesisOptions,
    poly: Option<&SpeedPolytope>,
) -> Result<(SynthesisResult, Option<GainSchedule>)> {
    if models.is_empty() {
        return Err(Error::Synthesis("empty vertex model family".into()));
    }
    weights.validate()?;
    let n_v = models[0].plant.n_v;
    let n_r = models[0].plant.n_r;
    let n = n_v + n_r;
    for m in models {
        if m.plant.n_v != n_v || m.plant.n_r != n_r {
            return Err(Error::Synthesis("vertex models have mismatched partitions".into()));
        }
    }
    let n_vertices = models
        .iter()
        .map(|m| m.speed_vertex_index)
        .max()
        .unwrap()
        + 1;

    let gps: Vec<GeneralizedPlant> = models
        .iter()
        .map(|m| build_generalized_plant(m, weights))
        .collect::<Result<_>>()?;

    // problem assembly, reused by the refinement pass
    let build_problem = |problem: &mut SdpProblem| -> Result<(Vec<PVar>, Vec<Vec<ScalarVarId>>, ScalarVarId)> {
        let make_p = |problem: &mut SdpProblem, tag: &str| -> PVar {
            if opts.block_diag_p {
                PVar::BlockDiag {
                    p11: problem.sym_var(&format!("P11{tag}"), n_v),
                    p22: problem.sym_var(&format!("P22{tag}"), n_r),
                    n_v,
                    n_r,
                }
            } else {
                PVar::Full {
                    id: problem.sym_var(&format!("P{tag}"), n),
                    n,
                }
            }
        };
        let p_vars: Vec<PVar> = match opts.mode {
            SynthesisMode::CommonP => {
                let p = make_p(problem, "");
                vec![p; n_vertices]
            }
            SynthesisMode::PerVertexP => (0..n_vertices)
                .map(|i| make_p(problem, &format!("_{i}")))
                .collect(),
        };
        let z_vars: Vec<Vec<ScalarVarId>> = (0..n_vertices)
            .map(|i| {
                (0..n)
                    .map(|c| problem.scalar_var(&format!("Z{i}[{c}]")))
                    .collect()
            })
            .collect();
        let mu = problem.scalar_var("mu");
        for gp in &gps {
            let i = gp.speed_vertex_index;
            let block = assemble_hinf_lmi(gp, &p_vars[i], &z_vars[i], mu);
            problem.add_psd(
                block,
                &format!(
                    "hinf v{} corner({:.2},{:.2})",
                    i, gp.stiffness_corner.0, gp.stiffness_corner.1
                ),
            );
            if let Some(region) = &opts.region {
                for (blk, label) in
                    assemble_pole_constraint(gp, region, opts.pole_scope, &p_vars[i], &z_vars[i])?
                {
                    problem.add_psd(blk, &format!("{label} v{i}"));
                }
            }
        }
        Ok((p_vars, z_vars, mu))
    };

    let solve_opts = SolveOptions {
        feas_tol: opts.feas_tol,
        opt_tol: opts.opt_tol,
        ..Default::default()
    };

    let mut problem = SdpProblem::new();
    let (p_vars, z_vars, mu) = build_problem(&mut problem)?;
    problem.set_objective(vec![(mu, 1.0)]);
    let mut solution = solve(&problem, &solve_opts)?;
    match solution.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => {
            return Err(Error::Synthesis(format!(
                "vertex LMIs infeasible: {} (residual {:.3e})",
                solution.message, solution.feasibility_residual
            )));
        }
        SolveStatus::NumericalFailure => {
            return Err(Error::Synthesis(format!(
                "SDP solver failed: {}",
                solution.message
            )));
        }
    }
    let mut refine_note = None;
    let mu_optimal = solution.objective;

    if let Some(refine) = &opts.refine {
        let mu_star = solution.objective;
        let mu_cap = mu_star * (1.0 + refine.mu_margin) + 1e-12;
        let mut problem2 = SdpProblem::new();
        let (p_vars2, _z_vars2, mu2) = build_problem(&mut problem2)?;
        let t = problem2.scalar_var("t_pbound");
        // tI − P ⪰ 0 for every distinct Lyapunov variable
        let distinct: &[PVar] = match opts.mode {
            SynthesisMode::CommonP => &p_vars2[..1],
            SynthesisMode::PerVertexP => &p_vars2[..],
        };
        let bound_dim = match refine.scope {
            RefineScope::Full => n,
            RefineScope::Vehicle => n_v,
        };
        let mut sel = DMatrix::zeros(bound_dim, n);
        for i in 0..bound_dim {
            sel[(i, i)] = 1.0;
        }
        for (i, pv) in distinct.iter().enumerate() {
            let mut blk = AffineBlock::new(bound_dim);
            blk.put_scalar_diag(t, 0, &DMatrix::identity(bound_dim, bound_dim));
            pv.place(&mut blk, 0, 0, &(-&sel), &(&sel * 0.5));
            problem2.add_psd(blk, &format!("lyapunov bound {i}"));
        }
        // μ ≤ μ*(1 + margin)
        let mut cap = AffineBlock::new(1);
        cap.put_const(0, 0, &DMatrix::from_element(1, 1, mu_cap));
        cap.put_scalar_diag(mu2, 0, &DMatrix::from_element(1, 1, -1.0));
        problem2.add_psd(cap, "mu cap");
        problem2.set_objective(vec![(t, 1.0)]);

        // warm start from the μ-optimal point
        let mut warm = lpvsteer_sdp::WarmStart::default();
        for (idx, v) in solution.sym_values.iter().enumerate() {
            warm.sym_values.push((idx, v.clone()));
        }
        for (idx, v) in solution.scalar_values.iter().enumerate() {
            warm.scalar_values.push((idx, *v));
        }
        let lam_max = solution
            .sym_values
            .iter()
            .map(|p| p.clone().symmetric_eigen().eigenvalues.amax())
            .fold(0.0_f64, f64::max);
        warm.scalar_values.push((t.index(), lam_max * 1.05));
        let refine_opts = SolveOptions {
            feas_tol: opts.feas_tol,
            opt_tol: refine.opt_tol.max(opts.opt_tol),
            max_newton: 500,
            ..Default::default()
        };
        let refined = lpvsteer_sdp::solve_with_start(&problem2, &refine_opts, Some(&warm))?;
        if refined.status == SolveStatus::Optimal {
            solution = refined;
            refine_note = Some(format!(
                "refined at μ ≤ {mu_cap:.6e}: λmax bound {:.6e}",
                solution.objective
            ));
        } else {
            refine_note = Some(format!(
                "refinement skipped ({}); using the μ-optimal point",
                refined.message
            ));
        }
        solution.objective = solution.scalar_values[mu2.index()];
    }

    let check = check_solution(&problem, &solution);
    if !check.feasible_within(opts.feas_tol) {
        return Err(Error::Synthesis(format!(
            "solution violates feasibility tolerance: min eig {:.3e}",
            check.min_eig_overall
        )));
    }

    let mu_val = solution.objective;
    let extract_p = |pv: &PVar| -> DMatrix<f64> {
        match pv {
            PVar::Full { id, .. } => solution.sym_values[id_index(*id)].clone(),
            PVar::BlockDiag { p11, p22, n_v, n_r } => {
                let mut p = DMatrix::zeros(n_v + n_r, n_v + n_r);
                p.view_mut((0, 0), (*n_v, *n_v))
                    .copy_from(&solution.sym_values[id_index(*p11)]);
                p.view_mut((*n_v, *n_v), (*n_r, *n_r))
                    .copy_from(&solution.sym_values[id_index(*p22)]);
                p
            }
        }
    };

    let mut p_vertices = Vec::with_capacity(n_vertices);
    let mut z_vertices = Vec::with_capacity(n_vertices);
    let mut k_vertices = Vec::with_capacity(n_vertices);
    for i in 0..n_vertices {
        let p = extract_p(&p_vars[i]);
        let z_lmi = DVector::from_fn(n, |c, _| solution.scalar_values[id_index_s(z_vars[i][c])]);
        // schedule sign convention u = −K x: store negated synthesis rows
        let z = -z_lmi;
        let k = p
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Synthesis(format!("vertex {i} Lyapunov matrix not PD")))?
            .solve(&z);
        p_vertices.push(p);
        z_vertices.push(z);
        k_vertices.push(k);
    }

    // post-hoc verification at every vertex model
    let mut model_diags = Vec::with_capacity(gps.len());
    let mut warnings = Vec::new();
    if let Some(note) = refine_note {
        warnings.push(note);
    }
    let mut pole_margin = f64::INFINITY;
    for gp in &gps {
        let k = &k_vertices[gp.speed_vertex_index];
        let a_cl = &gp.a - &gp.b_u * k.transpose();
        let c_cl = &gp.c_z - &gp.d_zu * k.transpose();
        let rho = spectral_radius(&a_cl);
        let veh = a_cl.view((0, 0), (n_v, n_v)).into_owned();
        let mre = min_re_eig(&veh);
        pole_margin = pole_margin.min(mre);
        let norm = hinf_norm_sweep(&a_cl, &gp.b_w, &c_cl, &gp.d_zw, opts.freq_points);
        let ok = norm * norm <= mu_val * (1.0 + 1e-4);
        if !ok {
            warnings.push(format!(
                "bounded-real check failed at vertex {} corner {:?}: ‖T‖² = {:.6e} > μ = {:.6e}",
                gp.speed_vertex_index,
                gp.stiffness_corner,
                norm * norm,
                mu_val
            ));
        }
        model_diags.push(VertexDiag {
            speed_vertex_index: gp.speed_vertex_index,
            stiffness_corner: gp.stiffness_corner,
            spectral_radius: rho,
            min_re_vehicle: mre,
            hinf_norm_sq: norm * norm,
            bounded_real_ok: ok,
        });
    }

    // schedule + interpolated grid check
    let schedule = match poly {
        Some(poly) if n_vertices == 3 => Some(GainSchedule {
            polytope: poly.clone(),
            n_v,
            n_r,
            vertices: (0..3)
                .map(|i| VertexGains {
                    kv: k_vertices[i].rows(0, n_v).into_owned(),
                    kr: k_vertices[i].rows(n_v, n_r).into_owned(),
                    p: Some(p_vertices[i].clone()),
                    z: Some(z_vertices[i].clone()),
                })
                .collect(),
            mode: opts.interpolation,
        }),
        _ => None,
    };

    let (grid_ok, grid_failures) = match &schedule {
        Some(sched) => {
            let report = crate::verification::interpolated_grid_check(models, sched, opts.grid_points)?;
            if !report.all_stable {
                warnings.push(format!(
                    "interpolated schedule loses Schur stability at speeds {:?}",
                    report.failing_speeds
                ));
            }
            (report.all_stable, report.failing_speeds)
        }
        None => (true, Vec::new()),
    };

    let result = SynthesisResult {
        mode: opts.mode,
        mu: mu_val,
        mu_optimal,
        norm_bound: mu_val.max(0.0).sqrt(),
        zeta_p: opts.region.as_ref().map(|r| r.zeta_p),
        p_vertices,
        z_vertices,
        k_vertices,
        model_diags,
        grid_ok,
        grid_failures,
        pole_margin,
        solver: SolverDiag {
            status: format!("{:?}", solution.status),
            newton_iterations: solution.newton_iterations,
            min_constraint_eig: check.min_eig_overall,
            gap_bound: solution.gap_bound,
        },
        warnings,
    };
    Ok((result, schedule))
}

fn id_index(id: SymVarId) -> usize {
    id.index()
}

fn id_index_s(id: ScalarVarId) -> usize {
    id.index()
}
