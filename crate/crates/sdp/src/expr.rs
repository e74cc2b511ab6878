//! Affine matrix expressions: the constraint-building vocabulary.

use nalgebra::DMatrix;

/// Handle to a symmetric matrix decision variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SymVarId(pub(crate) usize);

/// Handle to a scalar decision variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ScalarVarId(pub(crate) usize);

impl SymVarId {
    /// Position of this variable in the solution's `sym_values`.
    pub fn index(&self) -> usize {
        self.0
    }
}

impl ScalarVarId {
    /// Position of this variable in the solution's `scalar_values`.
    pub fn index(&self) -> usize {
        self.0
    }
}

/// One bilinear placement of a symmetric variable inside a block:
/// contributes `L X Rᵀ + R X Lᵀ` to the block, where `L` and `R` are
/// constant `dim × n` matrices (already embedded at their block rows).
#[derive(Debug, Clone)]
pub(crate) struct SymTerm {
    pub var: SymVarId,
    pub l: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

/// Sparse coefficient of a scalar variable: contributes `s (M + Mᵀ)` where
/// `M` is given by `(row, col, value)` triplets in block coordinates.
#[derive(Debug, Clone)]
pub(crate) struct ScalarTerm {
    pub var: ScalarVarId,
    pub trips: Vec<(usize, usize, f64)>,
}

/// A symmetric matrix expression, affine in the declared variables, that a
/// problem requires to be positive semidefinite.
///
/// All placement helpers keep the overall expression symmetric by
/// construction: placing something at block position `(r0, c0)` always
/// places the transpose at `(c0, r0)`.
#[derive(Debug, Clone)]
pub struct AffineBlock {
    pub(crate) dim: usize,
    pub(crate) f0: DMatrix<f64>,
    pub(crate) sym_terms: Vec<SymTerm>,
    pub(crate) scalar_terms: Vec<ScalarTerm>,
}

impl AffineBlock {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "constraint block must have positive dimension");
        AffineBlock {
            dim,
            f0: DMatrix::zeros(dim, dim),
            sym_terms: Vec::new(),
            scalar_terms: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Add a constant matrix `m` at block position `(r0, c0)`; the mirror
    /// `mᵀ` is added at `(c0, r0)` unless the placement is on the diagonal,
    /// in which case `m` must itself be symmetric.
    pub fn put_const(&mut self, r0: usize, c0: usize, m: &DMatrix<f64>) {
        self.check_extent(r0, m.nrows());
        self.check_extent(c0, m.ncols());
        if r0 == c0 {
            assert_eq!(m.nrows(), m.ncols());
            let skew = (m - m.transpose()).amax();
            assert!(
                skew <= 1e-12 * (1.0 + m.amax()),
                "diagonal constant placement must be symmetric"
            );
            self.f0.view_mut((r0, c0), m.shape()).add_assign_mat(m);
        } else {
            self.f0.view_mut((r0, c0), m.shape()).add_assign_mat(m);
            let mt = m.transpose();
            self.f0.view_mut((c0, r0), mt.shape()).add_assign_mat(&mt);
        }
    }

    /// Add `L X Rᵀ` at block position `(r0, c0)` and `R X Lᵀ` at `(c0, r0)`.
    ///
    /// `L` has `n_rows(r0 slot)` rows, `R` has `n_rows(c0 slot)` rows, and
    /// both have `dim(X)` columns. When `r0 == c0` the contribution is the
    /// symmetric sum `L X Rᵀ + R X Lᵀ` at that diagonal slot.
    pub fn put_sym_at(
        &mut self,
        var: SymVarId,
        var_dim: usize,
        r0: usize,
        c0: usize,
        l: &DMatrix<f64>,
        r: &DMatrix<f64>,
    ) {
        assert_eq!(l.ncols(), var_dim, "L column count must match variable dim");
        assert_eq!(r.ncols(), var_dim, "R column count must match variable dim");
        self.check_extent(r0, l.nrows());
        self.check_extent(c0, r.nrows());
        if l.amax() == 0.0 || r.amax() == 0.0 {
            return; // structurally zero term
        }
        let mut le = DMatrix::zeros(self.dim, var_dim);
        le.view_mut((r0, 0), l.shape()).copy_from(l);
        let mut re = DMatrix::zeros(self.dim, var_dim);
        re.view_mut((c0, 0), r.shape()).copy_from(r);
        self.sym_terms.push(SymTerm { var, l: le, r: re });
    }

    /// Place the variable itself at diagonal block position `(r0, r0)`,
    /// scaled by `coeff`.
    pub fn put_var(&mut self, var: SymVarId, var_dim: usize, r0: usize, coeff: f64) {
        let l = DMatrix::identity(var_dim, var_dim) * coeff;
        let r = DMatrix::identity(var_dim, var_dim) * 0.5;
        self.put_sym_at(var, var_dim, r0, r0, &l, &r);
    }

    /// Place the congruence `coeff · S X Sᵀ` at diagonal block `(r0, r0)`.
    pub fn put_quad(
        &mut self,
        var: SymVarId,
        var_dim: usize,
        r0: usize,
        s: &DMatrix<f64>,
        coeff: f64,
    ) {
        let l = s * coeff;
        let r = s * 0.5;
        self.put_sym_at(var, var_dim, r0, r0, &l, &r);
    }

    /// Add `s · M` at `(r0, c0)` plus `s · Mᵀ` at `(c0, r0)` for a scalar
    /// variable `s`; on the diagonal the contribution is `s (M + Mᵀ)`.
    pub fn put_scalar_at(&mut self, var: ScalarVarId, r0: usize, c0: usize, m: &DMatrix<f64>) {
        self.check_extent(r0, m.nrows());
        self.check_extent(c0, m.ncols());
        let mut trips = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v != 0.0 {
                    trips.push((r0 + i, c0 + j, v));
                }
            }
        }
        self.put_scalar_triplets(var, trips);
    }

    /// Place `s · M` at diagonal block `(r0, r0)` for symmetric `M`.
    pub fn put_scalar_diag(&mut self, var: ScalarVarId, r0: usize, m: &DMatrix<f64>) {
        assert_eq!(m.nrows(), m.ncols());
        let half = m * 0.5;
        self.put_scalar_at(var, r0, r0, &half);
    }

    /// Raw triplet form of a scalar coefficient: contributes `s (M + Mᵀ)`
    /// where `M` has the given `(row, col, value)` entries.
    pub fn put_scalar_triplets(&mut self, var: ScalarVarId, trips: Vec<(usize, usize, f64)>) {
        for &(i, j, _) in &trips {
            assert!(i < self.dim && j < self.dim, "triplet out of block bounds");
        }
        let trips: Vec<_> = trips.into_iter().filter(|&(_, _, v)| v != 0.0).collect();
        if trips.is_empty() {
            return;
        }
        self.scalar_terms.push(ScalarTerm { var, trips });
    }

    /// Evaluate the block at concrete variable values. This is the defining
    /// formula, used by solution checking independently of the solver's
    /// compiled caches.
    pub fn eval(&self, sym_values: &[DMatrix<f64>], scalar_values: &[f64]) -> DMatrix<f64> {
        let mut s = self.f0.clone();
        for t in &self.sym_terms {
            let x = &sym_values[t.var.0];
            let lx = &t.l * x;
            s += &lx * t.r.transpose();
            s += &t.r * lx.transpose();
        }
        for t in &self.scalar_terms {
            let v = scalar_values[t.var.0];
            for &(i, j, c) in &t.trips {
                s[(i, j)] += v * c;
                s[(j, i)] += v * c;
            }
        }
        s
    }

    fn check_extent(&self, start: usize, len: usize) {
        assert!(
            start + len <= self.dim,
            "placement ({start}+{len}) exceeds block dimension {}",
            self.dim
        );
    }
}

/// Small extension so `view_mut(...) += m` reads cleanly above.
trait AddAssignMat {
    fn add_assign_mat(&mut self, m: &DMatrix<f64>);
}

impl AddAssignMat for nalgebra::DMatrixViewMut<'_, f64> {
    fn add_assign_mat(&mut self, m: &DMatrix<f64>) {
        *self += m;
    }
}
