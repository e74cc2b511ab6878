//! Vehicle, road, and augmented preview plant construction.
//!
//! The single-track error model is linear-parameter-varying in the pair
//! ρ = (Vx, 1/Vx): every entry of the continuous error dynamics is affine in
//! ρ, which is what makes the three-vertex speed polytope exact for the
//! continuous family. Vertex models are therefore built at polytope
//! *coordinates* — the tangent-intersection vertex has independent first and
//! second components that do not satisfy ρ₂ = 1/ρ₁.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::zoh;
use crate::scheduling::{build_polytope, SpeedPolytope};

/// Physical single-track parameters plus the cornering-stiffness
/// uncertainty range.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleParams {
    /// mass (kg)
    pub m: f64,
    /// yaw inertia (kg·m²)
    pub iz: f64,
    /// CG to front axle (m)
    pub lf: f64,
    /// CG to rear axle (m)
    pub lr: f64,
    /// front cornering stiffness (N/rad)
    pub caf: f64,
    /// rear cornering stiffness (N/rad)
    pub car: f64,
    /// relative stiffness uncertainty, e.g. 0.3 for ±30 %
    pub stiffness_uncertainty: f64,
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("m", self.m),
            ("iz", self.iz),
            ("lf", self.lf),
            ("lr", self.lr),
            ("caf", self.caf),
            ("car", self.car),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!(
                    "vehicle parameter {name} must be strictly positive (got {v})"
                )));
            }
        }
        if !(0.0..1.0).contains(&self.stiffness_uncertainty) {
            return Err(Error::Domain(format!(
                "stiffness_uncertainty must lie in [0, 1) (got {})",
                self.stiffness_uncertainty
            )));
        }
        Ok(())
    }

    /// Copy with cornering stiffnesses scaled by the given multipliers.
    pub fn with_stiffness_scaled(&self, front: f64, rear: f64) -> VehicleParams {
        VehicleParams {
            caf: self.caf * front,
            car: self.car * rear,
            ..self.clone()
        }
    }
}

/// Sampling / preview horizon configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PreviewConfig {
    /// sampling period (s)
    pub t: f64,
    /// number of preview points
    pub n: usize,
    /// scheduling interval lower bound (m/s)
    pub v_min: f64,
    /// scheduling interval upper bound (m/s)
    pub v_max: f64,
}

impl PreviewConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t > 0.0) || !self.t.is_finite() {
            return Err(Error::Domain(format!(
                "sampling period must be positive (got {})",
                self.t
            )));
        }
        if self.n < 1 {
            return Err(Error::Domain("preview point count must be at least 1".into()));
        }
        if !(self.v_min > 0.0 && self.v_min < self.v_max && self.v_max.is_finite()) {
            return Err(Error::Domain(format!(
                "speed interval must satisfy 0 < v_min < v_max (got [{}, {}])",
                self.v_min, self.v_max
            )));
        }
        Ok(())
    }
}

/// Which lateral error model to build.
///
/// The `Paper` variant keeps the −Vx speed term inside the state matrix
/// entry (2,4) in addition to the disturbance channel; the `Standard`
/// variant carries −Vx only in the disturbance input, which is the common
/// textbook formulation. The two differ in how heading-rate coupling is
/// attributed and are both retained for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorModelVariant {
    #[default]
    Paper,
    Standard,
}

/// Continuous-time single-track error model quadruple.
#[derive(Debug, Clone)]
pub struct ContinuousErrorModel {
    /// 4×4 error-state transition matrix
    pub a: DMatrix<f64>,
    /// steering input column
    pub b_steer: DVector<f64>,
    /// desired-yaw-rate disturbance column
    pub b_yaw: DVector<f64>,
    /// output matrix (states are directly measured)
    pub c: DMatrix<f64>,
}

/// Error model evaluated at a physical speed.
pub fn build_error_model_ct(
    params: &VehicleParams,
    vx: f64,
    variant: ErrorModelVariant,
) -> Result<ContinuousErrorModel> {
    if !(vx > 0.0) || !vx.is_finite() {
        return Err(Error::Domain(format!("speed must be positive (got {vx})")));
    }
    Ok(build_error_model_at(params, vx, 1.0 / vx, variant))
}

/// Error model evaluated at independent polytope coordinates
/// ρ = (vx_coord, inv_vx_coord). All entries are affine in ρ.
pub fn build_error_model_at(
    params: &VehicleParams,
    vx_coord: f64,
    inv_vx_coord: f64,
    variant: ErrorModelVariant,
) -> ContinuousErrorModel {
    let VehicleParams {
        m,
        iz,
        lf,
        lr,
        caf,
        car,
        ..
    } = *params;
    let sum = 2.0 * (caf + car);
    let diff = 2.0 * (caf * lf - car * lr);
    let second = 2.0 * (caf * lf * lf + car * lr * lr);

    let a24 = match variant {
        ErrorModelVariant::Paper => -vx_coord - diff / m * inv_vx_coord,
        ErrorModelVariant::Standard => -diff / m * inv_vx_coord,
    };
    let a = DMatrix::from_row_slice(
        4,
        4,
        &[
            0.0,
            1.0,
            0.0,
            0.0,
            0.0,
            -sum / m * inv_vx_coord,
            sum / m,
            a24,
            0.0,
            0.0,
            0.0,
            1.0,
            0.0,
            -diff / iz * inv_vx_coord,
            diff / iz,
            -second / iz * inv_vx_coord,
        ],
    );
    let b_steer = DVector::from_column_slice(&[0.0, 2.0 * caf / m, 0.0, 2.0 * caf * lf / iz]);
    let b_yaw = DVector::from_column_slice(&[
        0.0,
        -vx_coord - diff / m * inv_vx_coord,
        0.0,
        -second / iz * inv_vx_coord,
    ]);
    ContinuousErrorModel {
        a,
        b_steer,
        b_yaw,
        c: DMatrix::identity(4, 4),
    }
}

/// Discrete state-space quadruple with separate control and disturbance
/// input channels.
#[derive(Debug, Clone)]
pub struct DiscretePlant {
    pub a: DMatrix<f64>,
    pub b_u: DMatrix<f64>,
    pub b_w: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    /// sampling period (s)
    pub t: f64,
}

impl DiscretePlant {
    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.a.nrows();
        if self.a.ncols() != n
            || self.b_u.nrows() != n
            || self.b_w.nrows() != n
            || self.c.ncols() != n
            || self.d.nrows() != self.c.nrows()
            || self.d.ncols() != self.b_u.ncols()
        {
            return Err(Error::Config("discrete plant dimensions inconsistent".into()));
        }
        if !(self.t > 0.0) {
            return Err(Error::Config("sampling period must be positive".into()));
        }
        Ok(())
    }
}

/// Exact ZOH discretization of the continuous error model.
pub fn discretize(ct: &ContinuousErrorModel, t: f64) -> Result<DiscretePlant> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("sampling period must be positive (got {t})")));
    }
    let n = ct.a.nrows();
    let mut b = DMatrix::zeros(n, 2);
    b.set_column(0, &ct.b_steer);
    b.set_column(1, &ct.b_yaw);
    let (ad, bd) = zoh(&ct.a, &b, t);
    Ok(DiscretePlant {
        a: ad,
        b_u: bd.columns(0, 1).into_owned(),
        b_w: bd.columns(1, 1).into_owned(),
        c: ct.c.clone(),
        d: DMatrix::zeros(ct.c.nrows(), 1),
        t,
    })
}

/// Road preview plant: an N-state shift register. The single input enters
/// at the preview horizon and the first stored deviation is the output.
pub fn build_road_plant(n: usize, t: f64) -> Result<DiscretePlant> {
    if n == 0 {
        return Err(Error::Domain("road plant needs at least one preview point".into()));
    }
    if !(t > 0.0) {
        return Err(Error::Domain("sampling period must be positive".into()));
    }
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n - 1 {
        a[(i, i + 1)] = 1.0;
    }
    let mut b = DMatrix::zeros(n, 1);
    b[(n - 1, 0)] = 1.0;
    let mut c = DMatrix::zeros(1, n);
    c[(0, 0)] = 1.0;
    Ok(DiscretePlant {
        a,
        b_u: b,
        b_w: DMatrix::zeros(n, 0),
        c,
        d: DMatrix::zeros(1, 1),
        t,
    })
}

/// Vehicle-error and road plants joined block-diagonally, with the
/// tracking measurement matrix connecting them.
///
/// The disturbance channel is ω = [y_ri; ψ̇_des]: the preview input feeding
/// the shift register and the desired yaw rate acting on the vehicle.
#[derive(Debug, Clone)]
pub struct AugmentedPlant {
    pub plant: DiscretePlant,
    pub n_v: usize,
    pub n_r: usize,
    /// speed coordinate at which the model was built (m/s)
    pub vx: f64,
    /// inverse-speed coordinate (1/ρ₁ only on the physical hyperbola)
    pub inv_vx: f64,
}

impl AugmentedPlant {
    pub fn n_states(&self) -> usize {
        self.n_v + self.n_r
    }

    /// 2×(n_v+n_r) measurement matrix.
    pub fn c_aug(&self) -> &DMatrix<f64> {
        &self.plant.c
    }
}

/// Augment at a physical speed.
pub fn augment(
    vehicle: &DiscretePlant,
    road: &DiscretePlant,
    vx: f64,
    t: f64,
) -> Result<AugmentedPlant> {
    if !(vx > 0.0) {
        return Err(Error::Domain(format!("speed must be positive (got {vx})")));
    }
    augment_at(vehicle, road, vx, 1.0 / vx, t)
}

/// Augment at independent polytope coordinates; the measurement matrix row
/// for the heading error uses the inverse-speed coordinate directly.
pub fn augment_at(
    vehicle: &DiscretePlant,
    road: &DiscretePlant,
    vx_coord: f64,
    inv_vx_coord: f64,
    t: f64,
) -> Result<AugmentedPlant> {
    if vehicle.n_states() != 4 {
        return Err(Error::Config(format!(
            "vehicle error model must have 4 states (got {})",
            vehicle.n_states()
        )));
    }
    let teq = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
    if !teq(vehicle.t, road.t) || !teq(vehicle.t, t) {
        return Err(Error::Config(format!(
            "sampling periods differ: vehicle {} s, road {} s, requested {} s",
            vehicle.t, road.t, t
        )));
    }
    let nv = 4;
    let nr = road.n_states();
    let n = nv + nr;

    let mut a = DMatrix::zeros(n, n);
    a.view_mut((0, 0), (nv, nv)).copy_from(&vehicle.a);
    a.view_mut((nv, nv), (nr, nr)).copy_from(&road.a);

    let mut b_u = DMatrix::zeros(n, 1);
    b_u.view_mut((0, 0), (nv, 1)).copy_from(&vehicle.b_u);

    // ω = [y_ri; ψ̇_des]
    let mut b_w = DMatrix::zeros(n, 2);
    b_w.view_mut((nv, 0), (nr, 1)).copy_from(&road.b_u);
    b_w.view_mut((0, 1), (nv, 1)).copy_from(&vehicle.b_w);

    let mut c = DMatrix::zeros(2, n);
    c[(0, 0)] = 1.0;
    c[(0, nv)] = -1.0;
    c[(1, 2)] = 1.0;
    c[(1, nv)] = inv_vx_coord / t;
    if nr >= 2 {
        c[(1, nv + 1)] = -inv_vx_coord / t;
    }

    Ok(AugmentedPlant {
        plant: DiscretePlant {
            a,
            b_u,
            b_w,
            c,
            d: DMatrix::zeros(2, 1),
            t,
        },
        n_v: nv,
        n_r: nr,
        vx: vx_coord,
        inv_vx: inv_vx_coord,
    })
}

/// Which model family to enumerate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelFamily {
    Nominal,
    Uncertain,
}

/// One corner of the (speed polytope × stiffness box) vertex set.
#[derive(Debug, Clone)]
pub struct VertexModel {
    pub plant: AugmentedPlant,
    pub speed_vertex_index: usize,
    /// multipliers applied to (Caf, Car)
    pub stiffness_corner: (f64, f64),
}

/// Enumerate the vertex model family over the three-vertex speed polytope,
/// times the four stiffness corners for the uncertain family.
///
/// Models are ordered speed-vertex-major; corners within a vertex follow
/// (−,−), (−,+), (+,−), (+,+).
pub fn enumerate_vertex_models(
    params: &VehicleParams,
    config: &PreviewConfig,
    variant: ErrorModelVariant,
    family: ModelFamily,
) -> Result<Vec<VertexModel>> {
    params.validate()?;
    config.validate()?;
    let poly = build_polytope(config.v_min, config.v_max)?;
    enumerate_vertex_models_with(params, config, variant, family, &poly)
}

pub fn enumerate_vertex_models_with(
    params: &VehicleParams,
    config: &PreviewConfig,
    variant: ErrorModelVariant,
    family: ModelFamily,
    poly: &SpeedPolytope,
) -> Result<Vec<VertexModel>> {
    let u = params.stiffness_uncertainty;
    let corners: Vec<(f64, f64)> = match family {
        ModelFamily::Uncertain if u > 0.0 => vec![
            (1.0 - u, 1.0 - u),
            (1.0 - u, 1.0 + u),
            (1.0 + u, 1.0 - u),
            (1.0 + u, 1.0 + u),
        ],
        _ => vec![(1.0, 1.0)],
    };
    let road = build_road_plant(config.n, config.t)?;
    let mut out = Vec::with_capacity(3 * corners.len());
    for (idx, vtx) in poly.vertices.iter().enumerate() {
        let (vc, ic) = (vtx[0], vtx[1]);
        for &(mf, mr) in &corners {
            let p = params.with_stiffness_scaled(mf, mr);
            let ct = build_error_model_at(&p, vc, ic, variant);
            let veh = discretize(&ct, config.t)?;
            let aug = augment_at(&veh, &road, vc, ic, config.t)?;
            out.push(VertexModel {
                plant: aug,
                speed_vertex_index: idx,
                stiffness_corner: (mf, mr),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn nominal_params() -> VehicleParams {
        VehicleParams {
            m: 1500.0,
            iz: 2500.0,
            lf: 1.1,
            lr: 1.6,
            caf: 60_000.0,
            car: 60_000.0,
            stiffness_uncertainty: 0.3,
        }
    }

    #[test]
    fn symmetric_axle_cancellation() {
        let p = VehicleParams {
            lf: 1.3,
            lr: 1.3,
            ..nominal_params()
        };
        let vx = 17.0;
        let m = build_error_model_ct(&p, vx, ErrorModelVariant::Paper).unwrap();
        assert!((m.a[(1, 3)] + vx).abs() < 1e-12, "A(2,4) = {}", m.a[(1, 3)]);
        assert!(m.a[(3, 1)].abs() < 1e-12);
        assert!(m.a[(3, 2)].abs() < 1e-12); // a_43 = 0
    }

    #[test]
    fn entry_2_2_direct_substitution() {
        let m = build_error_model_ct(&nominal_params(), 10.0, ErrorModelVariant::Paper).unwrap();
        assert!((m.a[(1, 1)] - (-16.0)).abs() < 1e-12);
    }

    #[test]
    fn steering_column_is_speed_independent() {
        let p = nominal_params();
        let m1 = build_error_model_ct(&p, 20.0, ErrorModelVariant::Paper).unwrap();
        let m2 = build_error_model_ct(&p, 3.0, ErrorModelVariant::Paper).unwrap();
        assert_eq!(m1.b_steer, m2.b_steer);
        let expected = [
            0.0,
            2.0 * p.caf / p.m,
            0.0,
            2.0 * p.caf * p.lf / p.iz,
        ];
        for (i, e) in expected.iter().enumerate() {
            assert!((m1.b_steer[i] - e).abs() < 1e-12);
        }
    }

    #[test]
    fn standard_variant_moves_speed_term_out_of_state_matrix() {
        let p = nominal_params();
        let vx = 12.0;
        let paper = build_error_model_ct(&p, vx, ErrorModelVariant::Paper).unwrap();
        let std = build_error_model_ct(&p, vx, ErrorModelVariant::Standard).unwrap();
        assert!((paper.a[(1, 3)] - (std.a[(1, 3)] - vx)).abs() < 1e-12);
        assert_eq!(paper.b_yaw, std.b_yaw);
    }

    #[test]
    fn negative_speed_rejected() {
        assert!(build_error_model_ct(&nominal_params(), -1.0, ErrorModelVariant::Paper).is_err());
        assert!(build_error_model_ct(&nominal_params(), 0.0, ErrorModelVariant::Paper).is_err());
    }

    #[test]
    fn road_plant_shift_semantics() {
        let road = build_road_plant(3, 0.02).unwrap();
        let x = DVector::from_column_slice(&[1.0, 2.0, 3.0]);
        let next = &road.a * &x + &road.b_u * DVector::from_element(1, 4.0);
        assert_eq!(next.as_slice(), &[2.0, 3.0, 4.0]);
        let y = &road.c * &x;
        assert_eq!(y[(0, 0)], 1.0);
    }

    #[test]
    fn road_plant_nilpotent() {
        let n = 50;
        let road = build_road_plant(n, 0.02).unwrap();
        let mut p = DMatrix::<f64>::identity(n, n);
        for _ in 0..n {
            p = &p * &road.a;
        }
        assert_eq!(p.amax(), 0.0);
        assert!(build_road_plant(0, 0.02).is_err());
    }

    #[test]
    fn c_aug_structure() {
        let p = nominal_params();
        let ct = build_error_model_ct(&p, 10.0, ErrorModelVariant::Paper).unwrap();
        let veh = discretize(&ct, 0.02).unwrap();
        let road = build_road_plant(3, 0.02).unwrap();
        let aug = augment(&veh, &road, 10.0, 0.02).unwrap();
        let c = aug.c_aug();
        assert!((c[(1, 4)] - 5.0).abs() < 1e-12);
        assert!((c[(1, 5)] + 5.0).abs() < 1e-12);
        // row 1: y − y_r1; row 2: Ψ + (y_r1 − y_r2)/(Vx T)
        assert_eq!(c[(0, 0)], 1.0);
        assert_eq!(c[(0, 4)], -1.0);
        assert_eq!(c[(1, 2)], 1.0);
        let nnz = c.iter().filter(|v| **v != 0.0).count();
        assert_eq!(nnz, 5);

        // off-diagonal blocks of A are zero
        let a = &aug.plant.a;
        assert_eq!(a.view((0, 4), (4, 3)).amax(), 0.0);
        assert_eq!(a.view((4, 0), (3, 4)).amax(), 0.0);

        // zero state maps to zero measurement
        let x = DVector::zeros(7);
        assert_eq!((c * x).amax(), 0.0);
    }

    #[test]
    fn mismatched_sampling_periods_rejected() {
        let p = nominal_params();
        let ct = build_error_model_ct(&p, 10.0, ErrorModelVariant::Paper).unwrap();
        let veh = discretize(&ct, 0.02).unwrap();
        let road = build_road_plant(3, 0.01).unwrap();
        assert!(matches!(
            augment(&veh, &road, 10.0, 0.02),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn vertex_family_counts_and_multipliers() {
        let config = PreviewConfig {
            t: 0.02,
            n: 5,
            v_min: 3.0,
            v_max: 30.0,
        };
        let mut p = nominal_params();
        p.stiffness_uncertainty = 0.0;
        let nominal =
            enumerate_vertex_models(&p, &config, ErrorModelVariant::Paper, ModelFamily::Uncertain)
                .unwrap();
        assert_eq!(nominal.len(), 3);
        assert!(nominal.iter().all(|m| m.stiffness_corner == (1.0, 1.0)));

        p.stiffness_uncertainty = 0.3;
        let unc =
            enumerate_vertex_models(&p, &config, ErrorModelVariant::Paper, ModelFamily::Uncertain)
                .unwrap();
        assert_eq!(unc.len(), 12);
        for m in &unc {
            let (f, r) = m.stiffness_corner;
            assert!(f == 0.7 || f == 1.3);
            assert!(r == 0.7 || r == 1.3);
        }

        // road blocks identical across all vertices
        let r0 = unc[0].plant.plant.a.view((4, 4), (5, 5)).into_owned();
        for m in &unc {
            let r = m.plant.plant.a.view((4, 4), (5, 5)).into_owned();
            assert_eq!(r, r0);
        }
    }
}
