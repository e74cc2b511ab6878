//! Two-phase log-barrier interior-point solver.
//!
//! Phase 1 minimizes the feasibility slack `s` subject to `F_k(x) + s·I ⪰ 0`
//! until a strictly feasible point is found (or infeasibility is concluded).
//! Phase 2 follows the central path of `t·cᵀx − Σ log det F_k(x)` with a
//! geometric schedule on `t`.
//!
//! The per-iteration cost is dominated by the barrier Hessian. Every matrix
//! variable placement has the form `L X Rᵀ + R X Lᵀ`, so Hessian entries are
//! traces of products of small Gram matrices `TᵀWT'` (`W = S⁻¹`), which are
//! computed once per iteration and consumed by tight fill loops over the
//! upper triangle.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::expr::ScalarVarId;
use crate::problem::{Layout, SdpError, SdpProblem, SQRT2};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Feasibility tolerance on constraint minimum eigenvalues.
    pub feas_tol: f64,
    /// Relative duality-gap tolerance for the barrier path.
    pub opt_tol: f64,
    /// Barrier parameter multiplier between centering stages.
    pub barrier_factor: f64,
    /// Total Newton iteration budget across both phases.
    pub max_newton: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            feas_tol: 1e-7,
            opt_tol: 1e-6,
            barrier_factor: 20.0,
            max_newton: 2000,
        }
    }
}

/// Initial values for (a subset of) the decision variables.
#[derive(Debug, Clone, Default)]
pub struct WarmStart {
    pub sym_values: Vec<(usize, DMatrix<f64>)>,
    pub scalar_values: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SolveStatus,
    pub sym_values: Vec<DMatrix<f64>>,
    pub scalar_values: Vec<f64>,
    pub objective: f64,
    /// max(0, −min over blocks of λ_min) at the returned point, recomputed
    /// from the constraint definitions.
    pub feasibility_residual: f64,
    pub newton_iterations: usize,
    /// Upper bound on the distance to optimality (barrier gap) at exit.
    pub gap_bound: f64,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct ConstraintResidual {
    pub label: String,
    pub min_eig: f64,
}

/// Independent recomputation of constraint residuals and objective.
#[derive(Debug, Clone)]
pub struct SolutionCheck {
    pub residuals: Vec<ConstraintResidual>,
    pub min_eig_overall: f64,
    pub objective: f64,
}

impl SolutionCheck {
    pub fn feasible_within(&self, tol: f64) -> bool {
        self.min_eig_overall >= -tol
    }
}

/// Recompute the minimum eigenvalue of every constraint block and the
/// objective from the problem definition; does not trust any solver state.
pub fn check_solution(problem: &SdpProblem, solution: &SdpSolution) -> SolutionCheck {
    let mut residuals = Vec::with_capacity(problem.constraints.len());
    let mut min_overall = f64::INFINITY;
    for (block, label) in &problem.constraints {
        let s = block.eval(&solution.sym_values, &solution.scalar_values);
        let eig = s.symmetric_eigen();
        let min_eig = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        min_overall = min_overall.min(min_eig);
        residuals.push(ConstraintResidual {
            label: label.clone(),
            min_eig,
        });
    }
    if residuals.is_empty() {
        min_overall = 0.0; // trivially feasible
    }
    let mut objective = 0.0;
    for (v, c) in &problem.objective {
        objective += c * solution.scalar_values[v.0];
    }
    SolutionCheck {
        residuals,
        min_eig_overall: min_overall,
        objective,
    }
}

pub fn solve(problem: &SdpProblem, opts: &SolveOptions) -> Result<SdpSolution, SdpError> {
    solve_with_start(problem, opts, None)
}

pub fn solve_with_start(
    problem: &SdpProblem,
    opts: &SolveOptions,
    warm: Option<&WarmStart>,
) -> Result<SdpSolution, SdpError> {
    problem.validate()?;
    let compiled = Compiled::build(problem)?;
    let mut solver = Solver::new(&compiled, opts);

    if let Some(w) = warm {
        solver.apply_warm_start(w);
    }

    let outcome = solver.run();
    Ok(solver.extract(problem, outcome))
}

// ---------------------------------------------------------------------------
// compiled problem
// ---------------------------------------------------------------------------

#[derive(Debug, Error)]
enum Halt {
    #[error("line search failed: {0}")]
    LineSearch(String),
    #[error("newton iteration budget exhausted")]
    IterationLimit,
    #[error("hessian factorization failed: {0}")]
    Factorization(String),
}

struct VTerm {
    /// component offset of this variable in the active layout
    off: usize,
    dim: usize,
    /// (l, r) indices into the constraint's term-matrix table
    pairs: Vec<(usize, usize)>,
}

struct CCon {
    dim: usize,
    f0: DMatrix<f64>,
    tmats: Vec<DMatrix<f64>>,
    vterms: Vec<VTerm>,
    /// (active component, symmetrized triplets of the coefficient)
    sterms: Vec<(usize, Vec<(u32, u32, f64)>)>,
    label: String,
}

pub(crate) struct Compiled {
    /// active components excluding the phase-1 slack
    m: usize,
    /// component index of the phase-1 slack (== m)
    s_comp: usize,
    /// barrier parameter: sum of block dimensions
    nu: f64,
    cons: Vec<CCon>,
    /// objective over active components
    c: DVector<f64>,
    has_objective: bool,
    /// derivative scaling per component (0.5 diag, 1/√2 off-diag, 1 scalar)
    wscale: Vec<f64>,
    /// contiguous component ranges of the independent variable groups
    groups: Vec<std::ops::Range<usize>>,
    tail_start: usize,
    /// active component offset per sym var (None if pruned)
    sym_new_off: Vec<Option<usize>>,
    /// active component per scalar var (None if pruned)
    scalar_new: Vec<Option<usize>>,
    sym_dims: Vec<usize>,
}

impl Compiled {
    pub(crate) fn build(p: &SdpProblem) -> Result<Self, SdpError> {
        let nsym = p.sym_vars.len();
        let nsca = p.scalar_vars.len();

        // variable incidence
        let mut sym_used = vec![false; nsym];
        let mut sca_used = vec![false; nsca];
        for (block, _) in &p.constraints {
            for t in &block.sym_terms {
                sym_used[t.var.0] = true;
            }
            for t in &block.scalar_terms {
                sca_used[t.var.0] = true;
            }
        }
        let mut obj_coeff = vec![0.0; nsca];
        for (v, c) in &p.objective {
            obj_coeff[v.0] += *c;
        }
        for (v, c) in &p.objective {
            if *c != 0.0 && !sca_used[v.0] {
                return Err(SdpError::UnboundedDirection(p.scalar_vars[v.0].name.clone()));
            }
        }

        // tail variables: scalars carrying objective weight couple every
        // vertex subproblem, so they are eliminated last (arrow border)
        let is_tail: Vec<bool> = (0..nsca)
            .map(|i| sca_used[i] && obj_coeff[i] != 0.0)
            .collect();

        // union-find over non-tail variables, joined per constraint
        let n_nodes = nsym + nsca;
        let mut parent: Vec<usize> = (0..n_nodes).collect();
        fn find(parent: &mut Vec<usize>, mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for (block, _) in &p.constraints {
            let mut nodes: Vec<usize> = Vec::new();
            for t in &block.sym_terms {
                if sym_used[t.var.0] {
                    nodes.push(t.var.0);
                }
            }
            for t in &block.scalar_terms {
                if sca_used[t.var.0] && !is_tail[t.var.0] {
                    nodes.push(nsym + t.var.0);
                }
            }
            nodes.dedup();
            for w in nodes.windows(2) {
                let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
                if a != b {
                    parent[a] = b;
                }
            }
        }

        // group roots in deterministic order of first appearance
        let mut roots: Vec<usize> = Vec::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        for node in 0..n_nodes {
            let used = if node < nsym {
                sym_used[node]
            } else {
                sca_used[node - nsym] && !is_tail[node - nsym]
            };
            if !used {
                continue;
            }
            let r = find(&mut parent, node);
            match roots.iter().position(|&x| x == r) {
                Some(g) => members[g].push(node),
                None => {
                    roots.push(r);
                    members.push(vec![node]);
                }
            }
        }

        // lay out active components: groups first, then the tail
        let mut sym_new_off = vec![None; nsym];
        let mut scalar_new = vec![None; nsca];
        let mut wscale: Vec<f64> = Vec::new();
        let mut groups = Vec::new();
        let mut off = 0usize;
        for group in &members {
            let start = off;
            for &node in group {
                if node < nsym {
                    let n = p.sym_vars[node].dim;
                    sym_new_off[node] = Some(off);
                    for (i, j) in Layout::tri_pairs(n) {
                        wscale.push(if i == j { 0.5 } else { 1.0 / SQRT2 });
                    }
                    off += n * (n + 1) / 2;
                } else {
                    scalar_new[node - nsym] = Some(off);
                    wscale.push(1.0);
                    off += 1;
                }
            }
            groups.push(start..off);
        }
        let tail_start = off;
        for v in 0..nsca {
            if is_tail[v] {
                scalar_new[v] = Some(off);
                wscale.push(1.0);
                off += 1;
            }
        }
        let m = off;
        wscale.push(1.0); // phase-1 slack

        let mut c = DVector::zeros(m);
        for (v, coeff) in &p.objective {
            if let Some(comp) = scalar_new[v.0] {
                c[comp] += *coeff;
            }
        }

        // compile constraints
        let mut cons = Vec::with_capacity(p.constraints.len());
        let mut nu = 0.0;
        for (block, label) in &p.constraints {
            nu += block.dim as f64;
            let mut tmats: Vec<DMatrix<f64>> = Vec::new();
            let mut vterms: Vec<VTerm> = Vec::new();
            for t in &block.sym_terms {
                let l_idx = tmats.len();
                tmats.push(t.l.clone());
                let r_idx = tmats.len();
                tmats.push(t.r.clone());
                let voff = sym_new_off[t.var.0].expect("used sym var has offset");
                let dim = p.sym_vars[t.var.0].dim;
                match vterms.iter_mut().find(|v| v.off == voff) {
                    Some(v) => v.pairs.push((l_idx, r_idx)),
                    None => vterms.push(VTerm {
                        off: voff,
                        dim,
                        pairs: vec![(l_idx, r_idx)],
                    }),
                }
            }
            let mut sterms: Vec<(usize, Vec<(u32, u32, f64)>)> = Vec::new();
            for t in &block.scalar_terms {
                let comp = scalar_new[t.var.0].expect("used scalar var has component");
                let trips: Vec<(u32, u32, f64)> = t
                    .trips
                    .iter()
                    .map(|&(i, j, v)| (i as u32, j as u32, v))
                    .collect();
                match sterms.iter_mut().find(|(c, _)| *c == comp) {
                    Some((_, existing)) => existing.extend_from_slice(&trips),
                    None => sterms.push((comp, trips)),
                }
            }
            // deterministic ordering by component
            vterms.sort_by_key(|v| v.off);
            sterms.sort_by_key(|(c, _)| *c);
            cons.push(CCon {
                dim: block.dim,
                f0: block.f0.clone(),
                tmats,
                vterms,
                sterms,
                label: label.clone(),
            });
        }

        Ok(Compiled {
            m,
            s_comp: m,
            nu,
            cons,
            c,
            has_objective: p.objective.iter().any(|(_, c)| *c != 0.0),
            wscale,
            groups,
            tail_start,
            sym_new_off,
            scalar_new,
            sym_dims: p.sym_vars.iter().map(|v| v.dim).collect(),
        })
    }

    fn unpack_sym_at(&self, off: usize, n: usize, x: &[f64]) -> DMatrix<f64> {
        let mut mmat = DMatrix::zeros(n, n);
        for (k, (i, j)) in Layout::tri_pairs(n).enumerate() {
            let v = if i == j {
                x[off + k]
            } else {
                x[off + k] / SQRT2
            };
            mmat[(i, j)] = v;
            mmat[(j, i)] = v;
        }
        mmat
    }

    /// Evaluate one constraint block at `x` (with optional slack `s`).
    fn eval_con(&self, con: &CCon, x: &[f64], s: Option<f64>) -> DMatrix<f64> {
        let mut smat = con.f0.clone();
        for vt in &con.vterms {
            let xv = self.unpack_sym_at(vt.off, vt.dim, x);
            for &(l, r) in &vt.pairs {
                let lx = &con.tmats[l] * &xv;
                smat.gemm(1.0, &lx, &con.tmats[r].transpose(), 1.0);
                smat.gemm(1.0, &con.tmats[r], &lx.transpose(), 1.0);
            }
        }
        for (comp, trips) in &con.sterms {
            let v = x[*comp];
            for &(i, j, cval) in trips {
                smat[(i as usize, j as usize)] += v * cval;
                smat[(j as usize, i as usize)] += v * cval;
            }
        }
        if let Some(sv) = s {
            for i in 0..con.dim {
                smat[(i, i)] += sv;
            }
        }
        smat
    }
}

// ---------------------------------------------------------------------------
// row-major scratch matrices for the fill loops
// ---------------------------------------------------------------------------

struct RowMat {
    cols: usize,
    data: Vec<f64>,
}

impl RowMat {
    fn from_dmatrix(m: &DMatrix<f64>) -> Self {
        let (r, c) = m.shape();
        let mut data = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                data[i * c + j] = m[(i, j)];
            }
        }
        RowMat { cols: c, data }
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }
}

// ---------------------------------------------------------------------------
// solver
// ---------------------------------------------------------------------------

struct Solver<'a> {
    cp: &'a Compiled,
    opts: SolveOptions,
    /// current iterate over active components; slot `m` is the phase-1 slack
    x: Vec<f64>,
    newton_iters: usize,
    gap_bound: f64,
}

enum RunOutcome {
    Optimal,
    Infeasible { slack: f64 },
    Failed { reason: String },
}

impl<'a> Solver<'a> {
    fn new(cp: &'a Compiled, opts: &SolveOptions) -> Self {
        Solver {
            cp,
            opts: opts.clone(),
            x: vec![0.0; cp.m + 1],
            newton_iters: 0,
            gap_bound: f64::INFINITY,
        }
    }

    fn apply_warm_start(&mut self, w: &WarmStart) {
        for (var, mat) in &w.sym_values {
            if let Some(off) = self.cp.sym_new_off.get(*var).copied().flatten() {
                let n = self.cp.sym_dims[*var];
                for (k, (i, j)) in Layout::tri_pairs(n).enumerate() {
                    self.x[off + k] = if i == j {
                        mat[(i, i)]
                    } else {
                        SQRT2 * 0.5 * (mat[(i, j)] + mat[(j, i)])
                    };
                }
            }
        }
        for (var, val) in &w.scalar_values {
            if let Some(comp) = self.cp.scalar_new.get(*var).copied().flatten() {
                self.x[comp] = *val;
            }
        }
    }

    fn run(&mut self) -> RunOutcome {
        if self.cp.cons.is_empty() {
            self.gap_bound = 0.0;
            return RunOutcome::Optimal;
        }

        // strict feasibility of the start point?
        let strictly_feasible = self.min_eig_lower_bound(None) > 0.0;
        if !strictly_feasible {
            match self.phase1() {
                Ok(true) => {}
                Ok(false) => {
                    return RunOutcome::Infeasible {
                        slack: self.x[self.cp.s_comp],
                    }
                }
                Err(h) => {
                    return RunOutcome::Failed {
                        reason: h.to_string(),
                    }
                }
            }
        }

        if !self.cp.has_objective {
            self.gap_bound = 0.0;
            return RunOutcome::Optimal;
        }

        match self.phase2() {
            Ok(()) => RunOutcome::Optimal,
            Err(h) => RunOutcome::Failed {
                reason: h.to_string(),
            },
        }
    }

    /// Cheap strict-feasibility probe via Cholesky success (returns a lower
    /// bound: +1 if all blocks factor, else a negative estimate).
    fn min_eig_lower_bound(&self, s: Option<f64>) -> f64 {
        for con in &self.cp.cons {
            let smat = self.cp.eval_con(con, &self.x, s);
            if smat.cholesky().is_none() {
                return -1.0;
            }
        }
        1.0
    }

    fn max_diag_violation(&self) -> f64 {
        // eigenvalue-based estimate of how far from feasible the start is
        let mut worst: f64 = 0.0;
        for con in &self.cp.cons {
            let smat = self.cp.eval_con(con, &self.x, None);
            let eig = smat.symmetric_eigen();
            let min_eig = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            worst = worst.max(-min_eig);
        }
        worst
    }

    fn phase1(&mut self) -> Result<bool, Halt> {
        let s0 = self.max_diag_violation() + 1.0;
        self.x[self.cp.s_comp] = s0;
        let target = -1e-8 * s0.max(1.0);

        let nu = self.cp.nu;
        let mut t = (nu / s0.max(1.0)).clamp(1e-3, 1e3);
        let mut obj = vec![0.0; self.cp.m + 1];
        obj[self.cp.s_comp] = 1.0;

        loop {
            self.center(t, &obj, true, Some(target), 1e-5)?;
            let s = self.x[self.cp.s_comp];
            if s < target {
                // verified strictly feasible without the slack
                if self.min_eig_lower_bound(None) > 0.0 {
                    return Ok(true);
                }
            }
            let gap = nu / t;
            if gap <= self.opts.opt_tol * s.abs().max(1.0) {
                // converged: s* is (to tolerance) the best achievable slack
                return Ok(s < 0.0 && self.min_eig_lower_bound(None) > 0.0);
            }
            t *= self.opts.barrier_factor;
        }
    }

    fn phase2(&mut self) -> Result<(), Halt> {
        let nu = self.cp.nu;
        let mut obj = vec![0.0; self.cp.m + 1];
        for k in 0..self.cp.m {
            obj[k] = self.cp.c[k];
        }
        let obj0: f64 = self.current_objective().abs().max(1.0);
        let mut t = (nu / obj0).clamp(1e-3, 1e6);
        loop {
            let gap_after = nu / t;
            let last_stage = gap_after <= self.opts.opt_tol
                * self.current_objective().abs().max(1.0)
                * self.opts.barrier_factor;
            // loose centering mid-path; tight only near the end
            let ctol = if last_stage { 1e-8 } else { 1e-4 };
            self.center(t, &obj, false, None, ctol)?;
            let gap = nu / t;
            self.gap_bound = gap;
            if gap <= self.opts.opt_tol * self.current_objective().abs().max(1.0) {
                return Ok(());
            }
            t *= self.opts.barrier_factor;
        }
    }

    fn current_objective(&self) -> f64 {
        let mut v = 0.0;
        for k in 0..self.cp.m {
            v += self.cp.c[k] * self.x[k];
        }
        v
    }

    /// Newton centering for fixed barrier parameter `t`.
    ///
    /// `early_exit`: in phase 1 we abandon centering as soon as the slack
    /// drops below `exit_below` (strict feasibility is all we need).
    fn center(
        &mut self,
        t: f64,
        obj: &[f64],
        phase1: bool,
        exit_below: Option<f64>,
        ctol: f64,
    ) -> Result<(), Halt> {
        let m_active = if phase1 { self.cp.m + 1 } else { self.cp.m };
        let max_inner = 60;
        for _ in 0..max_inner {
            if self.newton_iters >= self.opts.max_newton {
                return Err(Halt::IterationLimit);
            }
            if let Some(th) = exit_below {
                if self.x[self.cp.s_comp] < th && self.min_eig_lower_bound(None) > 0.0 {
                    return Ok(());
                }
            }
            let (mut h, mut g, logdet) = self.assemble(m_active, phase1);
            for k in 0..m_active {
                g[k] += t * obj[k];
            }
            let phi0 = t * dot(obj, &self.x, m_active) - logdet;

            let dir = self.newton_direction(&mut h, &g, m_active, phase1)?;
            let decrement = -dot_slice(&g, &dir);
            self.newton_iters += 1;
            if decrement <= 0.0 {
                // numerical floor reached
                return Ok(());
            }

            // backtracking line search on the barrier merit
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let trial: Vec<f64> = (0..self.cp.m + 1)
                    .map(|k| {
                        if k < m_active {
                            self.x[k] + alpha * dir[k]
                        } else {
                            self.x[k]
                        }
                    })
                    .collect();
                if let Some(ld) = self.logdet_at(&trial, phase1) {
                    let phi = t * dot(obj, &trial, m_active) - ld;
                    if phi <= phi0 - 0.01 * alpha * decrement {
                        self.x = trial;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                return Err(Halt::LineSearch(format!(
                    "no acceptable step at t={t:.3e} (decrement {decrement:.3e})"
                )));
            }
            if decrement / 2.0 < ctol {
                return Ok(());
            }
        }
        Ok(())
    }

    fn logdet_at(&self, x: &[f64], phase1: bool) -> Option<f64> {
        let s = if phase1 { Some(x[self.cp.s_comp]) } else { None };
        let mut total = 0.0;
        for con in &self.cp.cons {
            let smat = self.cp.eval_con(con, x, s);
            let chol = smat.cholesky()?;
            let l = chol.l_dirty();
            let mut ld = 0.0;
            for i in 0..con.dim {
                let d = l[(i, i)];
                if d <= 0.0 {
                    return None;
                }
                ld += d.ln();
            }
            total += 2.0 * ld;
        }
        Some(total)
    }

    /// Assemble the barrier gradient and Hessian at the current iterate.
    /// Returns (H row-major upper-filled+mirrored, gradient, Σ log det).
    fn assemble(&self, m_active: usize, phase1: bool) -> (Vec<f64>, Vec<f64>, f64) {
        let m = m_active;
        let mut h = vec![0.0; m * m];
        let mut g = vec![0.0; m];
        let mut logdet = 0.0;
        let s = if phase1 {
            Some(self.x[self.cp.s_comp])
        } else {
            None
        };

        for con in &self.cp.cons {
            let smat = self.cp.eval_con(con, &self.x, s);
            let chol = smat.cholesky().unwrap_or_else(|| {
                panic!(
                    "assemble called at infeasible point (block '{}')",
                    con.label
                )
            });
            let l = chol.l_dirty();
            for i in 0..con.dim {
                logdet += 2.0 * l[(i, i)].ln();
            }
            let w = chol.inverse();
            let w_row = RowMat::from_dmatrix(&w);

            // caches: U_t = W · T_t  and Grams G(a,b) = T_aᵀ W T_b
            let nt = con.tmats.len();
            let u_mats: Vec<DMatrix<f64>> = con.tmats.iter().map(|tm| &w * tm).collect();
            let u_rows: Vec<RowMat> = u_mats.iter().map(RowMat::from_dmatrix).collect();
            let mut grams: Vec<Option<RowMat>> = (0..nt * nt).map(|_| None).collect();
            let gram = |a: usize, b: usize, grams: &mut Vec<Option<RowMat>>| {
                if grams[a * nt + b].is_none() {
                    let gm = con.tmats[a].transpose() * &u_mats[b];
                    grams[a * nt + b] = Some(RowMat::from_dmatrix(&gm));
                }
            };

            // gradient: sym components
            for vt in &con.vterms {
                for &(lt, rt) in &vt.pairs {
                    gram(rt, lt, &mut grams);
                    let gmat = grams[rt * nt + lt].as_ref().unwrap();
                    let mut k = 0;
                    for i in 0..vt.dim {
                        for j in i..vt.dim {
                            g[vt.off + k] -= 2.0 * (gmat.get(i, j) + gmat.get(j, i));
                            k += 1;
                        }
                    }
                }
            }
            // gradient: scalar components
            for (comp, trips) in &con.sterms {
                let mut acc = 0.0;
                for &(p, q, v) in trips {
                    acc += v * w_row.get(p as usize, q as usize);
                }
                g[*comp] -= 2.0 * acc;
            }
            if phase1 {
                let mut tr = 0.0;
                for i in 0..con.dim {
                    tr += w_row.get(i, i);
                }
                g[self.cp.s_comp] -= tr;
            }

            // Hessian: sym × sym
            for (ai, va) in con.vterms.iter().enumerate() {
                for vb in &con.vterms[ai..] {
                    let same = va.off == vb.off;
                    for &(la, ra) in &va.pairs {
                        for &(lb, rb) in &vb.pairs {
                            gram(ra, lb, &mut grams);
                            gram(la, rb, &mut grams);
                            gram(ra, rb, &mut grams);
                            gram(la, lb, &mut grams);
                            let g1 = grams[ra * nt + lb].as_ref().unwrap();
                            let g2 = grams[la * nt + rb].as_ref().unwrap();
                            let g3 = grams[ra * nt + rb].as_ref().unwrap();
                            let g4 = grams[la * nt + lb].as_ref().unwrap();
                            fill_sym_sym(
                                &mut h, m, va.off, va.dim, vb.off, vb.dim, same, g1, g2, g3, g4,
                            );
                        }
                    }
                }
            }

            // Hessian: scalar × sym (including the phase-1 slack)
            let mut scalar_list: Vec<(usize, &[(u32, u32, f64)])> = con
                .sterms
                .iter()
                .map(|(c, t)| (*c, t.as_slice()))
                .collect();
            let s_trips: Vec<(u32, u32, f64)>;
            if phase1 {
                s_trips = (0..con.dim as u32).map(|i| (i, i, 0.5)).collect();
                scalar_list.push((self.cp.s_comp, &s_trips));
            }
            for &(comp, trips) in &scalar_list {
                for vt in &con.vterms {
                    for &(lt, rt) in &vt.pairs {
                        let ua = &u_rows[lt];
                        let ub = &u_rows[rt];
                        let mut k = 0;
                        for i in 0..vt.dim {
                            for j in i..vt.dim {
                                let mut acc = 0.0;
                                for &(p, q, v) in trips {
                                    let (p, q) = (p as usize, q as usize);
                                    acc += v
                                        * (ua.get(q, i) * ub.get(p, j)
                                            + ua.get(q, j) * ub.get(p, i)
                                            + ua.get(p, i) * ub.get(q, j)
                                            + ua.get(p, j) * ub.get(q, i));
                                }
                                let col = vt.off + k;
                                let (lo, hi) = if comp <= col { (comp, col) } else { (col, comp) };
                                h[lo * m + hi] += 2.0 * acc;
                                k += 1;
                            }
                        }
                    }
                }
            }

            // Hessian: scalar × scalar
            for (i1, &(c1, t1)) in scalar_list.iter().enumerate() {
                for &(c2, t2) in &scalar_list[i1..] {
                    let mut acc = 0.0;
                    for &(p, q, v) in t1 {
                        for &(r, sq, v2) in t2 {
                            let (p, q, r, sq) = (p as usize, q as usize, r as usize, sq as usize);
                            acc += v
                                * v2
                                * (w_row.get(q, r) * w_row.get(p, sq)
                                    + w_row.get(q, sq) * w_row.get(p, r));
                        }
                    }
                    let (lo, hi) = if c1 <= c2 { (c1, c2) } else { (c2, c1) };
                    h[lo * m + hi] += 2.0 * acc;
                }
            }
        }

        // orthonormal-basis scaling, then mirror the upper triangle
        for k in 0..m {
            g[k] *= self.cp.wscale[k];
        }
        for k in 0..m {
            let wk = self.cp.wscale[k];
            for l in k..m {
                h[k * m + l] *= wk * self.cp.wscale[l];
            }
        }
        for k in 0..m {
            for l in (k + 1)..m {
                h[l * m + k] = h[k * m + l];
            }
        }
        (h, g, logdet)
    }

    /// Solve H d = −g using the group/arrow structure of the problem.
    fn newton_direction(
        &self,
        h: &mut [f64],
        g: &[f64],
        m: usize,
        phase1: bool,
    ) -> Result<Vec<f64>, Halt> {
        // jitter escalations for near-singular Hessians
        let mut max_diag = 0.0f64;
        for k in 0..m {
            max_diag = max_diag.max(h[k * m + k].abs());
        }
        let base = vec_to_dmatrix(h, m);
        let mut jitter = 0.0;
        for attempt in 0..4 {
            let mut hm = base.clone();
            if jitter > 0.0 {
                for k in 0..m {
                    hm[(k, k)] += jitter;
                }
            }
            let mut tail_start = if phase1 { self.cp.tail_start } else { self.cp.tail_start };
            if tail_start > m {
                tail_start = m;
            }
            match arrow_solve(&mut hm, &self.cp.groups, tail_start, m, g) {
                Some(d) => return Ok(d),
                None => {
                    jitter = if attempt == 0 {
                        1e-12 * max_diag.max(1.0)
                    } else {
                        jitter * 1e4
                    };
                }
            }
        }
        Err(Halt::Factorization(format!(
            "hessian not positive definite (dim {m}, max diag {max_diag:.3e})"
        )))
    }

    fn extract(&self, problem: &SdpProblem, outcome: RunOutcome) -> SdpSolution {
        let mut sym_values = Vec::with_capacity(problem.sym_vars.len());
        for v in 0..problem.sym_vars.len() {
            let n = self.cp.sym_dims[v];
            match self.cp.sym_new_off[v] {
                Some(off) => sym_values.push(self.cp.unpack_sym_at(off, n, &self.x)),
                None => sym_values.push(DMatrix::zeros(n, n)),
            }
        }
        let mut scalar_values = Vec::with_capacity(problem.scalar_vars.len());
        for v in 0..problem.scalar_vars.len() {
            match self.cp.scalar_new[v] {
                Some(comp) => scalar_values.push(self.x[comp]),
                None => scalar_values.push(0.0),
            }
        }
        let mut objective = 0.0;
        for (v, c) in &problem.objective {
            objective += c * scalar_values[v.0];
        }

        let (status, message) = match outcome {
            RunOutcome::Optimal => (SolveStatus::Optimal, String::from("optimal")),
            RunOutcome::Infeasible { slack } => (
                SolveStatus::Infeasible,
                format!("infeasible: best achievable slack {slack:.6e} (>= 0 means no strictly feasible point)"),
            ),
            RunOutcome::Failed { reason } => (SolveStatus::NumericalFailure, reason),
        };

        // honest residual from the constraint definitions
        let mut min_eig = f64::INFINITY;
        for (block, _) in &problem.constraints {
            let s = block.eval(&sym_values, &scalar_values);
            let eig = s.symmetric_eigen();
            min_eig = min_eig.min(eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min));
        }
        if problem.constraints.is_empty() {
            min_eig = 0.0;
        }

        SdpSolution {
            status,
            sym_values,
            scalar_values,
            objective,
            feasibility_residual: (-min_eig).max(0.0),
            newton_iterations: self.newton_iters,
            gap_bound: self.gap_bound,
            message,
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for k in 0..n {
        s += a[k] * b[k];
    }
    s
}

#[inline]
fn dot_slice(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b, a.len().min(b.len()))
}

fn vec_to_dmatrix(h: &[f64], m: usize) -> DMatrix<f64> {
    // h is symmetric, so row-major data doubles as column-major storage
    DMatrix::from_vec(m, m, h.to_vec())
}

/// Upper-triangle fill of the sym×sym Hessian block for one ordered pair of
/// placements `(A X Bᵀ + B X Aᵀ)` and `(A' X' B'ᵀ + B' X' A'ᵀ)`.
///
/// With Grams G₁ = BᵀWA', G₂ = AᵀWB', G₃ = BᵀWB', G₄ = AᵀWA', the entry at
/// components (i,j),(k,l) is 2·e(G₁,G₂) + 2·e(G₃,G₄) where
/// e(P,Q) = P[j,k]Q[i,l] + P[j,l]Q[i,k] + P[i,k]Q[j,l] + P[i,l]Q[j,k].
#[allow(clippy::too_many_arguments)]
fn fill_sym_sym(
    h: &mut [f64],
    m: usize,
    off_a: usize,
    na: usize,
    off_b: usize,
    nb: usize,
    same: bool,
    g1: &RowMat,
    g2: &RowMat,
    g3: &RowMat,
    g4: &RowMat,
) {
    let mut row = off_a;
    for i in 0..na {
        let g1i = g1.row(i);
        let g2i = g2.row(i);
        let g3i = g3.row(i);
        let g4i = g4.row(i);
        for j in i..na {
            let g1j = g1.row(j);
            let g2j = g2.row(j);
            let g3j = g3.row(j);
            let g4j = g4.row(j);
            let hrow = &mut h[row * m..row * m + m];
            let k_start = if same { i } else { 0 };
            for k in k_start..nb {
                let l_start = if same && k == i { j } else { k };
                let mut col = off_b + Layout::tri_index(k, l_start, nb);
                let c1jk = g1j[k];
                let c1ik = g1i[k];
                let c2ik = g2i[k];
                let c2jk = g2j[k];
                let c3jk = g3j[k];
                let c3ik = g3i[k];
                let c4ik = g4i[k];
                let c4jk = g4j[k];
                for l in l_start..nb {
                    let acc = c1jk * g2i[l]
                        + g1j[l] * c2ik
                        + c1ik * g2j[l]
                        + g1i[l] * c2jk
                        + c3jk * g4i[l]
                        + g3j[l] * c4ik
                        + c3ik * g4j[l]
                        + g3i[l] * c4jk;
                    hrow[col] += 2.0 * acc;
                    col += 1;
                }
            }
            row += 1;
        }
    }
}

// ---------------------------------------------------------------------------
// linear algebra: blocked Cholesky and block-arrow Newton solves
// ---------------------------------------------------------------------------

/// In-place lower Cholesky with blocked trailing updates. Returns false if
/// the matrix is not (numerically) positive definite.
fn cholesky_blocked(a: &mut DMatrix<f64>) -> bool {
    let n = a.nrows();
    let bs = 96usize;
    let mut p = 0;
    while p < n {
        let pb = bs.min(n - p);
        // unblocked factorization of the diagonal block
        for j in p..p + pb {
            let mut d = a[(j, j)];
            for k in p..j {
                d -= a[(j, k)] * a[(j, k)];
            }
            if d <= 0.0 || !d.is_finite() {
                return false;
            }
            let dj = d.sqrt();
            a[(j, j)] = dj;
            for i in (j + 1)..(p + pb) {
                let mut s = a[(i, j)];
                for k in p..j {
                    s -= a[(i, k)] * a[(j, k)];
                }
                a[(i, j)] = s / dj;
            }
        }
        let rest = n - p - pb;
        if rest > 0 {
            // panel solve: A21 := A21 · L11⁻ᵀ (column by column)
            for jj in 0..pb {
                let j = p + jj;
                let inv = 1.0 / a[(j, j)];
                for kk in 0..jj {
                    let k = p + kk;
                    let f = a[(j, k)];
                    if f != 0.0 {
                        for i in (p + pb)..n {
                            let v = a[(i, k)];
                            a[(i, j)] -= v * f;
                        }
                    }
                }
                for i in (p + pb)..n {
                    a[(i, j)] *= inv;
                }
            }
            // trailing update A22 −= L21 L21ᵀ
            let l21 = a.view((p + pb, p), (rest, pb)).into_owned();
            let l21t = l21.transpose();
            let mut a22 = a.view_mut((p + pb, p + pb), (rest, rest));
            a22.gemm(-1.0, &l21, &l21t, 1.0);
        }
        p += pb;
    }
    true
}

/// Forward substitution L y = b over a view of the factored matrix.
fn forward_solve(l: &DMatrix<f64>, r0: usize, n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(r0 + i, r0 + k)] * b[k];
        }
        b[i] = s / l[(r0 + i, r0 + i)];
    }
}

/// Back substitution Lᵀ x = y.
fn backward_solve(l: &DMatrix<f64>, r0: usize, n: usize, b: &mut [f64]) {
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[(r0 + k, r0 + i)] * b[k];
        }
        b[i] = s / l[(r0 + i, r0 + i)];
    }
}

/// Solve H d = −g where H is block-diagonal over the variable groups plus a
/// dense coupling border (the objective scalars). The factorization is done
/// group by group, with a Schur complement on the border.
fn arrow_solve(
    h: &mut DMatrix<f64>,
    groups: &[std::ops::Range<usize>],
    tail_start: usize,
    m: usize,
    g: &[f64],
) -> Option<Vec<f64>> {
    let nt = m - tail_start;

    // degenerate cases: no groups (tail-only) or a single group covering
    // everything
    let groups: Vec<std::ops::Range<usize>> = groups
        .iter()
        .filter(|r| r.start < m && !r.is_empty())
        .map(|r| r.start..r.end.min(tail_start))
        .collect();

    // factor each group block in place; collect X_i = L_i⁻¹ H[i, tail]
    let mut xg: Vec<DMatrix<f64>> = Vec::with_capacity(groups.len());
    let mut schur = DMatrix::zeros(nt, nt);
    for i in 0..nt {
        for j in 0..nt {
            schur[(i, j)] = h[(tail_start + i, tail_start + j)];
        }
    }
    for r in &groups {
        let ng = r.len();
        let mut block = h.view((r.start, r.start), (ng, ng)).into_owned();
        if !cholesky_blocked(&mut block) {
            return None;
        }
        // X = L⁻¹ B, column by column
        let mut xm = DMatrix::zeros(ng, nt);
        for c in 0..nt {
            let mut col: Vec<f64> = (0..ng).map(|i| h[(r.start + i, tail_start + c)]).collect();
            forward_solve(&block, 0, ng, &mut col);
            for i in 0..ng {
                xm[(i, c)] = col[i];
            }
        }
        if nt > 0 {
            schur.gemm(-1.0, &xm.transpose(), &xm, 1.0);
        }
        // stash factor back into h (we own the storage anyway)
        h.view_mut((r.start, r.start), (ng, ng)).copy_from(&block);
        xg.push(xm);
    }
    let mut schur_f = schur;
    if nt > 0 && !cholesky_blocked(&mut schur_f) {
        return None;
    }

    // forward pass
    let mut y: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut ytail: Vec<f64> = (0..nt).map(|i| y[tail_start + i]).collect();
    let mut ygs: Vec<Vec<f64>> = Vec::with_capacity(groups.len());
    for (gi, r) in groups.iter().enumerate() {
        let ng = r.len();
        let mut yb: Vec<f64> = y[r.start..r.start + ng].to_vec();
        forward_solve(h, r.start, ng, &mut yb);
        for c in 0..nt {
            let mut acc = 0.0;
            for i in 0..ng {
                acc += xg[gi][(i, c)] * yb[i];
            }
            ytail[c] -= acc;
        }
        ygs.push(yb);
    }
    if nt > 0 {
        forward_solve(&schur_f, 0, nt, &mut ytail);
        backward_solve(&schur_f, 0, nt, &mut ytail);
    }
    // backward pass
    for (gi, r) in groups.iter().enumerate() {
        let ng = r.len();
        let yb = &mut ygs[gi];
        for i in 0..ng {
            let mut acc = 0.0;
            for c in 0..nt {
                acc += xg[gi][(i, c)] * ytail[c];
            }
            yb[i] -= acc;
        }
        backward_solve(h, r.start, ng, yb);
        for i in 0..ng {
            y[r.start + i] = yb[i];
        }
    }
    for c in 0..nt {
        y[tail_start + c] = ytail[c];
    }
    Some(y)
}

#[cfg(test)]
pub(crate) mod test_hooks {
    use super::*;

    /// Assemble the barrier gradient/Hessian at a point given in the
    /// problem's original component order (test oracle access).
    pub fn assemble_original_order(
        problem: &SdpProblem,
        x_orig: &[f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<usize>) {
        let cp = Compiled::build(problem).unwrap();
        let layout = Layout::new(problem);
        // map original comps -> active comps
        let mut orig_of_active = vec![usize::MAX; cp.m];
        for v in 0..problem.sym_vars.len() {
            if let Some(off) = cp.sym_new_off[v] {
                let n = cp.sym_dims[v];
                for k in 0..n * (n + 1) / 2 {
                    orig_of_active[off + k] = layout.sym_comp_offset[v] + k;
                }
            }
        }
        for v in 0..problem.scalar_vars.len() {
            if let Some(c) = cp.scalar_new[v] {
                orig_of_active[c] = layout.scalar_comp[v];
            }
        }
        let mut solver = Solver::new(&cp, &SolveOptions::default());
        for k in 0..cp.m {
            solver.x[k] = x_orig[orig_of_active[k]];
        }
        let (h, g, _) = solver.assemble(cp.m, false);
        (h, g, orig_of_active)
    }

    pub fn cholesky_blocked_test(a: &mut DMatrix<f64>) -> bool {
        cholesky_blocked(a)
    }
}

// keep the id type in the public surface used by the objective setter
#[allow(unused)]
fn _objective_uses(_: ScalarVarId) {}
