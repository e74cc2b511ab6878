//! Problem container and compilation to the solver's internal layout.

use std::io::Write;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::expr::{AffineBlock, ScalarVarId, SymVarId};

#[derive(Debug, Error)]
pub enum SdpError {
    #[error("malformed problem: {0}")]
    Malformed(String),
    #[error("objective references a variable with no constraint incidence: {0}")]
    UnboundedDirection(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub(crate) struct SymVarInfo {
    pub name: String,
    pub dim: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct ScalarVarInfo {
    pub name: String,
}

/// A linear SDP: scalar objective, symmetric-matrix and scalar variables,
/// affine PSD constraint blocks.
#[derive(Debug, Clone, Default)]
pub struct SdpProblem {
    pub(crate) sym_vars: Vec<SymVarInfo>,
    pub(crate) scalar_vars: Vec<ScalarVarInfo>,
    pub(crate) constraints: Vec<(AffineBlock, String)>,
    pub(crate) objective: Vec<(ScalarVarId, f64)>,
}

impl SdpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn sym_var(&mut self, name: &str, dim: usize) -> SymVarId {
        assert!(dim > 0);
        self.sym_vars.push(SymVarInfo {
            name: name.to_string(),
            dim,
        });
        SymVarId(self.sym_vars.len() - 1)
    }

    pub fn scalar_var(&mut self, name: &str) -> ScalarVarId {
        self.scalar_vars.push(ScalarVarInfo {
            name: name.to_string(),
        });
        ScalarVarId(self.scalar_vars.len() - 1)
    }

    pub fn sym_dim(&self, var: SymVarId) -> usize {
        self.sym_vars[var.0].dim
    }

    pub fn add_psd(&mut self, block: AffineBlock, label: &str) {
        self.constraints.push((block, label.to_string()));
    }

    /// Minimize the given linear combination of scalar variables.
    pub fn set_objective(&mut self, terms: Vec<(ScalarVarId, f64)>) {
        self.objective = terms;
    }

    pub fn n_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn constraint_label(&self, k: usize) -> &str {
        &self.constraints[k].1
    }

    pub fn validate(&self) -> Result<(), SdpError> {
        for (block, label) in &self.constraints {
            let skew = (&block.f0 - block.f0.transpose()).amax();
            if skew > 1e-10 * (1.0 + block.f0.amax()) {
                return Err(SdpError::Malformed(format!(
                    "constraint '{label}': constant part is not symmetric (skew {skew:.3e})"
                )));
            }
            for t in &block.sym_terms {
                if t.var.0 >= self.sym_vars.len() {
                    return Err(SdpError::Malformed(format!(
                        "constraint '{label}': undeclared matrix variable"
                    )));
                }
                let n = self.sym_vars[t.var.0].dim;
                if t.l.ncols() != n || t.r.ncols() != n || t.l.nrows() != block.dim {
                    return Err(SdpError::Malformed(format!(
                        "constraint '{label}': term shape mismatch for variable {}",
                        self.sym_vars[t.var.0].name
                    )));
                }
            }
            for t in &block.scalar_terms {
                if t.var.0 >= self.scalar_vars.len() {
                    return Err(SdpError::Malformed(format!(
                        "constraint '{label}': undeclared scalar variable"
                    )));
                }
            }
        }
        for (v, _) in &self.objective {
            if v.0 >= self.scalar_vars.len() {
                return Err(SdpError::Malformed("objective references undeclared scalar".into()));
            }
        }
        Ok(())
    }

    /// Write the problem in SDPA sparse format (`.dat-s`).
    ///
    /// The decision vector is the internal component layout: each matrix
    /// variable contributes its upper triangle row by row (off-diagonal
    /// components carry the isometric √2 scaling), followed by the scalar
    /// variables. Each PSD constraint becomes one SDPA block; with the SDPA
    /// convention `Σ x_i F_i − F₀ ⪰ 0`, the written `F₀` is the negated
    /// constant part of the block. Intended for cross-checking small
    /// problems against external solvers.
    pub fn write_sdpa(&self, w: &mut impl Write) -> Result<(), SdpError> {
        self.validate()?;
        let layout = Layout::new(self);
        writeln!(w, "* generated by lpvsteer-sdp")?;
        for (i, v) in self.sym_vars.iter().enumerate() {
            writeln!(w, "* x[{}..]: svec of {} ({}x{})", layout.sym_comp_offset[i], v.name, v.dim, v.dim)?;
        }
        for (i, v) in self.scalar_vars.iter().enumerate() {
            writeln!(w, "* x[{}]: scalar {}", layout.scalar_comp[i], v.name)?;
        }
        writeln!(w, "{}", layout.n_comps)?;
        writeln!(w, "{}", self.constraints.len())?;
        let dims: Vec<String> = self
            .constraints
            .iter()
            .map(|(b, _)| b.dim.to_string())
            .collect();
        writeln!(w, "{}", dims.join(" "))?;
        let mut cost = vec![0.0; layout.n_comps];
        for (v, c) in &self.objective {
            cost[layout.scalar_comp[v.0]] += *c;
        }
        let cost_strs: Vec<String> = cost.iter().map(|c| format!("{c:.17e}")).collect();
        writeln!(w, "{}", cost_strs.join(" "))?;

        // entries: <matno> <blkno> <i> <j> <value>, 1-based, upper triangle
        for (k, (block, _)) in self.constraints.iter().enumerate() {
            let f0 = &block.f0;
            for i in 0..block.dim {
                for j in i..block.dim {
                    // SDPA convention: constraint is sum x_i F_i - F0 >= 0
                    let v = -f0[(i, j)];
                    if v != 0.0 {
                        writeln!(w, "0 {} {} {} {v:.17e}", k + 1, i + 1, j + 1)?;
                    }
                }
            }
        }
        for (k, (block, _)) in self.constraints.iter().enumerate() {
            for comp in 0..layout.n_comps {
                let coeff = layout.comp_coefficient(self, block, comp);
                for i in 0..block.dim {
                    for j in i..block.dim {
                        let v = coeff[(i, j)];
                        if v.abs() > 0.0 {
                            writeln!(w, "{} {} {} {} {v:.17e}", comp + 1, k + 1, i + 1, j + 1)?;
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Component layout: matrix variables flattened over the upper triangle
/// (row-wise) with √2 off-diagonal scaling, then scalar variables.
#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub sym_comp_offset: Vec<usize>,
    pub sym_dims: Vec<usize>,
    pub scalar_comp: Vec<usize>,
    pub n_comps: usize,
}

pub(crate) const SQRT2: f64 = std::f64::consts::SQRT_2;

impl Layout {
    pub fn new(p: &SdpProblem) -> Self {
        let mut off = 0usize;
        let mut sym_comp_offset = Vec::with_capacity(p.sym_vars.len());
        let mut sym_dims = Vec::with_capacity(p.sym_vars.len());
        for v in &p.sym_vars {
            sym_comp_offset.push(off);
            sym_dims.push(v.dim);
            off += v.dim * (v.dim + 1) / 2;
        }
        let mut scalar_comp = Vec::with_capacity(p.scalar_vars.len());
        for _ in &p.scalar_vars {
            scalar_comp.push(off);
            off += 1;
        }
        Layout {
            sym_comp_offset,
            sym_dims,
            scalar_comp,
            n_comps: off,
        }
    }

    /// Local component index of entry (i, j), i ≤ j, in an n-dim sym var.
    #[inline]
    pub fn tri_index(i: usize, j: usize, n: usize) -> usize {
        debug_assert!(i <= j && j < n);
        i * (2 * n - i + 1) / 2 + (j - i)
    }

    /// Inverse of `tri_index` as an iterator helper: all (i, j) pairs in
    /// component order.
    pub fn tri_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
        (0..n).flat_map(move |i| (i..n).map(move |j| (i, j)))
    }

    /// Reconstruct a symmetric matrix variable from the component vector.
    #[cfg(test)]
    pub fn unpack_sym(&self, var: usize, x: &[f64]) -> DMatrix<f64> {
        let n = self.sym_dims[var];
        let off = self.sym_comp_offset[var];
        let mut m = DMatrix::zeros(n, n);
        for (k, (i, j)) in Self::tri_pairs(n).enumerate() {
            let v = if i == j { x[off + k] } else { x[off + k] / SQRT2 };
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        m
    }

    /// Dense coefficient matrix ∂F/∂x_comp for one constraint block. Slow;
    /// used only by the SDPA dump and reference checks.
    pub fn comp_coefficient(
        &self,
        p: &SdpProblem,
        block: &AffineBlock,
        comp: usize,
    ) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(block.dim, block.dim);
        // symmetric variable components
        for (v, &off) in self.sym_comp_offset.iter().enumerate() {
            let n = self.sym_dims[v];
            let count = n * (n + 1) / 2;
            if comp >= off && comp < off + count {
                let local = comp - off;
                let (i, j) = Self::tri_pairs(n).nth(local).unwrap();
                let scale = if i == j { 1.0 } else { 1.0 / SQRT2 };
                let mut d = DMatrix::zeros(n, n);
                d[(i, j)] += scale;
                d[(j, i)] = d[(i, j)];
                if i == j {
                    d[(i, i)] = scale;
                }
                for t in &block.sym_terms {
                    if t.var.0 == v {
                        let ld = &t.l * &d;
                        out += &ld * t.r.transpose();
                        out += &t.r * ld.transpose();
                    }
                }
                return out;
            }
        }
        for (v, &c) in self.scalar_comp.iter().enumerate() {
            if comp == c {
                for t in &block.scalar_terms {
                    if t.var.0 == v {
                        for &(i, j, val) in &t.trips {
                            out[(i, j)] += val;
                            out[(j, i)] += val;
                        }
                    }
                }
                let _ = p;
                return out;
            }
        }
        out
    }
}
