//! Speed polytope construction and runtime gain interpolation.
//!
//! The scheduling parameter pair (Vx, 1/Vx) traces a hyperbola arc over the
//! speed interval. The arc is enclosed by a triangle whose first two
//! vertices sit on the curve at the interval endpoints and whose third is
//! the intersection of the endpoint tangents, which lies below the curve by
//! convexity. Barycentric coordinates in that triangle recover any interior
//! operating point as a convex combination of the vertices.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedPolytope {
    /// vertex coordinates in the (Vx, 1/Vx) plane
    pub vertices: [[f64; 2]; 3],
    pub v_min: f64,
    pub v_max: f64,
}

pub fn build_polytope(v_min: f64, v_max: f64) -> Result<SpeedPolytope> {
    if !(v_min > 0.0 && v_min < v_max && v_max.is_finite()) {
        return Err(Error::Domain(format!(
            "speed interval must satisfy 0 < v_min < v_max (got [{v_min}, {v_max}])"
        )));
    }
    // intersection of the tangents to y = 1/x at the two endpoints
    let x3 = 2.0 * v_min * v_max / (v_min + v_max);
    let y3 = 2.0 / (v_min + v_max);
    Ok(SpeedPolytope {
        vertices: [[v_min, 1.0 / v_min], [v_max, 1.0 / v_max], [x3, y3]],
        v_min,
        v_max,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarycentricCoords {
    pub alpha: [f64; 3],
}

/// Barycentric coordinates of the operating point (Vx, 1/Vx).
///
/// Out-of-range speeds are clamped to the scheduling interval with a
/// warning; the schedule stays on its certified polytope.
pub fn barycentric(poly: &SpeedPolytope, vx: f64) -> Result<BarycentricCoords> {
    if !vx.is_finite() {
        return Err(Error::Domain(format!("speed must be finite (got {vx})")));
    }
    let clamped = vx.clamp(poly.v_min, poly.v_max);
    if clamped != vx {
        log::warn!(
            "scheduling speed {vx:.3} m/s outside [{}, {}]; clamped to {clamped:.3}",
            poly.v_min,
            poly.v_max
        );
    }
    let v = poly.vertices;
    let m = Matrix3::new(
        v[0][0], v[1][0], v[2][0],
        v[0][1], v[1][1], v[2][1],
        1.0, 1.0, 1.0,
    );
    let rhs = Vector3::new(clamped, 1.0 / clamped, 1.0);
    let alpha = m.lu().solve(&rhs).ok_or_else(|| {
        Error::Domain("degenerate speed polytope: barycentric system is singular".into())
    })?;
    Ok(BarycentricCoords {
        alpha: [alpha[0], alpha[1], alpha[2]],
    })
}

/// How runtime gains are recovered from the per-vertex synthesis results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InterpolationMode {
    /// K(α) = (Σ αᵢ Zᵢ)(Σ αᵢ Pᵢ)⁻¹ — the printed recovery formula.
    #[default]
    Paper,
    /// K(α) = Σ αᵢ Kᵢ — direct interpolation of the vertex gains.
    Gain,
}

/// Gains stored at one polytope vertex.
#[derive(Debug, Clone)]
pub struct VertexGains {
    pub kv: DVector<f64>,
    pub kr: DVector<f64>,
    /// per-vertex Lyapunov matrix, when the synthesis produced one
    pub p: Option<DMatrix<f64>>,
    /// per-vertex Z row, when the synthesis produced one
    pub z: Option<DVector<f64>>,
}

/// A complete speed-scheduled controller: per-vertex gains plus the
/// polytope needed to interpolate them at runtime.
#[derive(Debug, Clone)]
pub struct GainSchedule {
    pub polytope: SpeedPolytope,
    pub n_v: usize,
    pub n_r: usize,
    pub vertices: Vec<VertexGains>,
    pub mode: InterpolationMode,
}

/// Interpolated feedback/feedforward pair.
#[derive(Debug, Clone)]
pub struct Gains {
    pub kv: DVector<f64>,
    pub kr: DVector<f64>,
}

impl Gains {
    pub fn full(&self) -> DVector<f64> {
        let mut k = DVector::zeros(self.kv.len() + self.kr.len());
        k.rows_mut(0, self.kv.len()).copy_from(&self.kv);
        k.rows_mut(self.kv.len(), self.kr.len()).copy_from(&self.kr);
        k
    }
}

impl GainSchedule {
    pub fn n_states(&self) -> usize {
        self.n_v + self.n_r
    }

    pub fn validate(&self) -> Result<()> {
        if self.vertices.len() != 3 {
            return Err(Error::Config(format!(
                "gain schedule must carry one gain per polytope vertex (got {})",
                self.vertices.len()
            )));
        }
        for (i, v) in self.vertices.iter().enumerate() {
            if v.kv.len() != self.n_v || v.kr.len() != self.n_r {
                return Err(Error::Config(format!("vertex {i} gain dimensions inconsistent")));
            }
            if self.mode == InterpolationMode::Paper && (v.p.is_none() || v.z.is_none()) {
                return Err(Error::Config(format!(
                    "vertex {i} lacks (P, Z) required by the Lyapunov interpolation mode"
                )));
            }
        }
        Ok(())
    }
}

pub fn interpolate_gains(schedule: &GainSchedule, coords: &BarycentricCoords) -> Result<Gains> {
    schedule.validate()?;
    let n = schedule.n_states();
    let alpha = coords.alpha;
    match schedule.mode {
        InterpolationMode::Gain => {
            let mut kv = DVector::zeros(schedule.n_v);
            let mut kr = DVector::zeros(schedule.n_r);
            for (a, v) in alpha.iter().zip(&schedule.vertices) {
                kv += &v.kv * *a;
                kr += &v.kr * *a;
            }
            Ok(Gains { kv, kr })
        }
        InterpolationMode::Paper => {
            let mut p_hat = DMatrix::zeros(n, n);
            let mut z_hat = DVector::zeros(n);
            for (a, v) in alpha.iter().zip(&schedule.vertices) {
                p_hat += v.p.as_ref().unwrap() * *a;
                z_hat += v.z.as_ref().unwrap() * *a;
            }
            // K = Ẑ P̂⁻¹, via the symmetric solve P̂ kᵀ = ẑᵀ
            let eig = p_hat.clone().symmetric_eigen();
            let lmin = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            let lmax = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
            let chol = p_hat.clone().cholesky().ok_or_else(|| {
                Error::Interpolation(format!(
                    "interpolated Lyapunov matrix is not positive definite \
                     (λ_min = {lmin:.3e}, λ_max = {lmax:.3e})"
                ))
            })?;
            if lmin <= 1e-14 * lmax {
                return Err(Error::Interpolation(format!(
                    "interpolated Lyapunov matrix is numerically singular \
                     (condition ≈ {:.3e})",
                    lmax / lmin.max(f64::MIN_POSITIVE)
                )));
            }
            let k = chol.solve(&z_hat);
            Ok(Gains {
                kv: k.rows(0, schedule.n_v).into_owned(),
                kr: k.rows(schedule.n_v, schedule.n_r).into_owned(),
            })
        }
    }
}
