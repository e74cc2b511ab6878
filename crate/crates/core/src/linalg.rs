//! Shared dense linear-algebra helpers: ZOH discretization, eigenvalue
//! queries, discrete Lyapunov solves, and an H∞ norm evaluator based on a
//! Hessenberg-accelerated frequency sweep.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

/// Exact zero-order-hold discretization of (A, B) with sampling period `t`:
/// the matrix exponential of the stacked block `[A B; 0 0]·t`.
pub fn zoh(a: &DMatrix<f64>, b: &DMatrix<f64>, t: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let m = b.ncols();
    assert_eq!(a.ncols(), n);
    assert_eq!(b.nrows(), n);
    let mut stacked = DMatrix::zeros(n + m, n + m);
    stacked.view_mut((0, 0), (n, n)).copy_from(&(a * t));
    stacked.view_mut((0, n), (n, m)).copy_from(&(b * t));
    let e = stacked.exp();
    (
        e.view((0, 0), (n, n)).into_owned(),
        e.view((0, n), (n, m)).into_owned(),
    )
}

pub fn complex_eigenvalues(a: &DMatrix<f64>) -> Vec<Complex<f64>> {
    a.clone().complex_eigenvalues().iter().cloned().collect()
}

pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    complex_eigenvalues(a)
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

pub fn min_re_eig(a: &DMatrix<f64>) -> f64 {
    complex_eigenvalues(a)
        .iter()
        .map(|z| z.re)
        .fold(f64::INFINITY, f64::min)
}

/// Solve the discrete Lyapunov equation `A P Aᵀ − P + Q = 0` by doubling.
/// Requires `A` Schur stable.
pub fn dlyap(a: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    let mut p = q.clone();
    let mut ak = a.clone();
    for _ in 0..200 {
        let incr = &ak * &p * ak.transpose();
        let step = incr.amax();
        p += incr;
        ak = &ak * &ak;
        if step <= 1e-300 || ak.amax() < 1e-150 {
            break;
        }
    }
    (p.clone() + p.transpose()) * 0.5
}

/// Smallest singular value of a complex matrix via the Hermitian Gram
/// matrix of the smaller side, evaluated through a real embedding.
pub fn sigma_min_complex(m: &DMatrix<Complex<f64>>) -> f64 {
    let gram = if m.nrows() <= m.ncols() {
        m * m.adjoint()
    } else {
        m.adjoint() * m
    };
    hermitian_eigenvalues(&gram)
        .into_iter()
        .fold(f64::INFINITY, f64::min)
        .max(0.0)
        .sqrt()
}

pub fn sigma_max_complex(m: &DMatrix<Complex<f64>>) -> f64 {
    let gram = if m.nrows() <= m.ncols() {
        m * m.adjoint()
    } else {
        m.adjoint() * m
    };
    hermitian_eigenvalues(&gram)
        .into_iter()
        .fold(0.0_f64, f64::max)
        .max(0.0)
        .sqrt()
}

/// Eigenvalues of a Hermitian matrix via the symmetric real embedding
/// `[Re −Im; Im Re]` (each eigenvalue appears twice; duplicates are fine
/// for min/max queries).
fn hermitian_eigenvalues(g: &DMatrix<Complex<f64>>) -> Vec<f64> {
    let n = g.nrows();
    let mut e = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            e[(i, j)] = g[(i, j)].re;
            e[(i, j + n)] = -g[(i, j)].im;
            e[(i + n, j)] = g[(i, j)].im;
            e[(i + n, j + n)] = g[(i, j)].re;
        }
    }
    e.symmetric_eigen().eigenvalues.iter().cloned().collect()
}

/// H∞ norm of the discrete transfer `C (zI − A)⁻¹ B + D` estimated by a
/// uniform sweep of the unit circle.
///
/// `A` is reduced to Hessenberg form once, so each frequency point costs
/// O(n²) instead of O(n³). A grid sweep lower-bounds the true norm, which
/// is the conservative direction for bounded-real verification.
pub fn hinf_norm_sweep(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    d: &DMatrix<f64>,
    points: usize,
) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return sigma_max_complex(&d.map(|v| Complex::new(v, 0.0)));
    }
    let hess = a.clone().hessenberg();
    let q = hess.q();
    let h = hess.h();
    let bh = (q.transpose() * b).map(|v| Complex::new(v, 0.0));
    let cq = c * &q;
    let hc = h.map(|v| Complex::new(v, 0.0));

    let mut worst = 0.0_f64;
    for k in 0..points {
        let theta = 2.0 * std::f64::consts::PI * (k as f64) / (points as f64);
        let z = Complex::new(theta.cos(), theta.sin());
        let x = hessenberg_solve(&hc, z, &bh);
        let mut t = DMatrix::from_fn(c.nrows(), b.ncols(), |i, j| {
            let mut acc = Complex::new(0.0, 0.0);
            for l in 0..n {
                acc += Complex::new(cq[(i, l)], 0.0) * x[(l, j)];
            }
            acc
        });
        for i in 0..d.nrows() {
            for j in 0..d.ncols() {
                t[(i, j)] += Complex::new(d[(i, j)], 0.0);
            }
        }
        worst = worst.max(sigma_max_complex(&t));
    }
    worst
}

/// Solve `(zI − H) X = B` for upper-Hessenberg `H` by Gaussian elimination
/// with partial pivoting restricted to the single subdiagonal.
fn hessenberg_solve(
    h: &DMatrix<Complex<f64>>,
    z: Complex<f64>,
    b: &DMatrix<Complex<f64>>,
) -> DMatrix<Complex<f64>> {
    let n = h.nrows();
    let mut m = DMatrix::from_fn(n, n, |i, j| {
        let mut v = -h[(i, j)];
        if i == j {
            v += z;
        }
        v
    });
    let mut x = b.clone();
    for k in 0..n - 1 {
        // pivot between rows k and k+1 (the only candidates)
        if m[(k + 1, k)].norm() > m[(k, k)].norm() {
            m.swap_rows(k, k + 1);
            x.swap_rows(k, k + 1);
        }
        let piv = m[(k, k)];
        if piv.norm() == 0.0 {
            continue; // singular within the grid point; downstream norms stay finite via later columns
        }
        let f = m[(k + 1, k)] / piv;
        if f.norm() != 0.0 {
            for j in k..n {
                let v = m[(k, j)] * f;
                m[(k + 1, j)] -= v;
            }
            for j in 0..x.ncols() {
                let v = x[(k, j)] * f;
                x[(k + 1, j)] -= v;
            }
        }
    }
    // back substitution
    for j in 0..x.ncols() {
        for i in (0..n).rev() {
            let mut s = x[(i, j)];
            for l in (i + 1)..n {
                s -= m[(i, l)] * x[(l, j)];
            }
            let d = m[(i, i)];
            x[(i, j)] = if d.norm() > 0.0 {
                s / d
            } else {
                Complex::new(f64::MAX.sqrt(), 0.0)
            };
        }
    }
    x
}

/// Convenience: numeric equality check tolerating scale.
pub fn approx_eq(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

/// Row vector × matrix, returning a DVector for gain arithmetic.
pub fn row_times(m: &DMatrix<f64>, v: &DVector<f64>) -> DVector<f64> {
    m.transpose() * v
}
