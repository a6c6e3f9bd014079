//! 15-state inertial error model for a stationary, leveled platform.
//!
//! State layout (NED, body = nav frame):
//!
//! | indices | state | units |
//! |---------|-------|-------|
//! | 0..3    | position error δp | m |
//! | 3..6    | velocity error δv | m/s |
//! | 6..9    | misalignment ε | rad |
//! | 9..12   | accel bias b_a | m/s² |
//! | 12..15  | gyro bias b_g | rad/s |
//!
//! The system matrix is nilpotent (F⁴ = 0), so the transition matrix is an
//! exact cubic polynomial in τ and the process-noise covariance has closed
//! polynomial blocks.

mod ellipsoid;
mod noise;
mod propagation;

pub use ellipsoid::{ellipsoid_from_cov, Ellipsoid};
pub use noise::{
    array_q_scale, audit_printed_coefficients, q_closed, q_numeric_oracle, q_printed, semigroup_check,
    CoefficientDiscrepancy, CovarianceMatrix, NoiseInterpretation, NoiseSpectra, DEFAULT_QUADRATURE_STEPS,
};
pub use propagation::{array_bias_average, propagate_discrete, propagate_mean, KinematicError, Trajectory};

use nalgebra::{SMatrix, SVector};

use crate::error::{Error, Result};
use crate::sensor_model::{GravityModel, Mat3, Vec3};

pub const STATE_DIM: usize = 15;
pub const NOISE_DIM: usize = 12;

pub type Mat15 = SMatrix<f64, STATE_DIM, STATE_DIM>;
pub type Vec15 = SVector<f64, STATE_DIM>;
pub type ShapingMatrix = SMatrix<f64, STATE_DIM, NOISE_DIM>;

/// Offsets of each 3-vector block in the flattened state.
pub mod block {
    pub const POS: usize = 0;
    pub const VEL: usize = 3;
    pub const ATT: usize = 6;
    pub const ACC_BIAS: usize = 9;
    pub const GYRO_BIAS: usize = 12;
}

/// Names of the flattened state components, in index order.
pub const STATE_NAMES: [&str; STATE_DIM] = [
    "p_n", "p_e", "p_d", "v_n", "v_e", "v_d", "eps_n", "eps_e", "eps_d", "ba_x", "ba_y", "ba_z", "bg_x", "bg_y", "bg_z",
];

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorState {
    pub dp: Vec3,
    pub dv: Vec3,
    pub eps: Vec3,
    pub ba: Vec3,
    pub bg: Vec3,
}

impl ErrorState {
    /// Zero kinematics with the given sensor biases.
    pub fn from_biases(ba: Vec3, bg: Vec3) -> Self {
        Self {
            ba,
            bg,
            ..Self::default()
        }
    }

    pub fn to_vector(&self) -> Vec15 {
        let mut v = Vec15::zeros();
        v.fixed_rows_mut::<3>(block::POS).copy_from(&self.dp);
        v.fixed_rows_mut::<3>(block::VEL).copy_from(&self.dv);
        v.fixed_rows_mut::<3>(block::ATT).copy_from(&self.eps);
        v.fixed_rows_mut::<3>(block::ACC_BIAS).copy_from(&self.ba);
        v.fixed_rows_mut::<3>(block::GYRO_BIAS).copy_from(&self.bg);
        v
    }

    pub fn from_vector(v: &Vec15) -> Self {
        Self {
            dp: v.fixed_rows::<3>(block::POS).into(),
            dv: v.fixed_rows::<3>(block::VEL).into(),
            eps: v.fixed_rows::<3>(block::ATT).into(),
            ba: v.fixed_rows::<3>(block::ACC_BIAS).into(),
            bg: v.fixed_rows::<3>(block::GYRO_BIAS).into(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrices {
    pub f: Mat15,
    /// Skew gravity coupling [g^n ×] of misalignment into velocity error.
    pub f23: Mat3,
    pub g: ShapingMatrix,
}

pub(crate) fn set_block(m: &mut Mat15, row: usize, col: usize, value: &Mat3) {
    m.fixed_view_mut::<3, 3>(row, col).copy_from(value);
}

pub(crate) fn get_block(m: &Mat15, row: usize, col: usize) -> Mat3 {
    m.fixed_view::<3, 3>(row, col).into()
}

/// Cross-product matrix [v ×].
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

pub fn build_system(gravity: &GravityModel) -> SystemMatrices {
    use block::*;
    let i3 = Mat3::identity();
    let f23 = skew(&gravity.nav_gravity());
    let mut f = Mat15::zeros();
    set_block(&mut f, POS, VEL, &i3);
    set_block(&mut f, VEL, ATT, &f23);
    set_block(&mut f, VEL, ACC_BIAS, &i3);
    set_block(&mut f, ATT, GYRO_BIAS, &i3);

    // noise inputs: w_a -> v, w_g -> ε, w_ab -> b_a, w_gb -> b_g
    let mut g = ShapingMatrix::zeros();
    for (j, row) in [VEL, ATT, ACC_BIAS, GYRO_BIAS].into_iter().enumerate() {
        g.fixed_view_mut::<3, 3>(row, 3 * j).copy_from(&i3);
    }
    SystemMatrices { f, f23, g }
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::invalid(format!("propagation interval must be >= 0, got {tau}")));
    }
    Ok(())
}

/// Closed-form state-transition matrix e^{Fτ}.
pub fn phi_closed(sys: &SystemMatrices, tau: f64) -> Result<Mat15> {
    use block::*;
    check_tau(tau)?;
    let i3 = Mat3::identity();
    let f23 = &sys.f23;
    let (t, t2, t3) = (tau, tau * tau, tau * tau * tau);
    let mut phi = Mat15::identity();
    set_block(&mut phi, POS, VEL, &(i3 * t));
    set_block(&mut phi, POS, ATT, &(f23 * (t2 / 2.0)));
    set_block(&mut phi, POS, ACC_BIAS, &(i3 * (t2 / 2.0)));
    set_block(&mut phi, POS, GYRO_BIAS, &(f23 * (t3 / 6.0)));
    set_block(&mut phi, VEL, ATT, &(f23 * t));
    set_block(&mut phi, VEL, ACC_BIAS, &(i3 * t));
    set_block(&mut phi, VEL, GYRO_BIAS, &(f23 * (t2 / 2.0)));
    set_block(&mut phi, ATT, GYRO_BIAS, &(i3 * t));
    Ok(phi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f23_entries() {
        let sys = build_system(&GravityModel::default());
        assert_eq!(sys.f23[(1, 0)], 9.81);
        assert_eq!(sys.f23[(0, 1)], -9.81);
        let nonzero = sys.f23.iter().filter(|v| **v != 0.0).count();
        assert_eq!(nonzero, 2);
        assert_eq!(sys.f23.transpose(), -sys.f23);
    }

    #[test]
    fn f_is_nilpotent_of_order_four() {
        let sys = build_system(&GravityModel::default());
        let f2 = sys.f * sys.f;
        let f3 = f2 * sys.f;
        assert!(f3.iter().any(|v| *v != 0.0));
        assert_eq!(f3 * sys.f, Mat15::zeros());
    }

    #[test]
    fn shaping_layout() {
        let sys = build_system(&GravityModel::default());
        assert_eq!(
            sys.g.fixed_rows::<3>(block::POS).into_owned(),
            SMatrix::<f64, 3, 12>::zeros()
        );
        for (j, row) in [block::VEL, block::ATT, block::ACC_BIAS, block::GYRO_BIAS]
            .into_iter()
            .enumerate()
        {
            for c in 0..4 {
                let b: Mat3 = sys.g.fixed_view::<3, 3>(row, 3 * c).into();
                let expected = if c == j { Mat3::identity() } else { Mat3::zeros() };
                assert_eq!(b, expected);
            }
        }
    }

    #[test]
    fn phi_at_zero_is_identity() {
        let sys = build_system(&GravityModel::default());
        assert_eq!(phi_closed(&sys, 0.0).unwrap(), Mat15::identity());
        assert!(phi_closed(&sys, -1.0).is_err());
    }

    #[test]
    fn phi_gyro_bias_to_position_entry() {
        let sys = build_system(&GravityModel::default());
        let phi = phi_closed(&sys, 2.0).unwrap();
        assert!((phi[(block::POS, block::GYRO_BIAS + 1)] + 13.08).abs() < 1e-12);
    }

    #[test]
    fn state_vector_layout() {
        let x = ErrorState {
            dp: Vec3::new(1.0, 2.0, 3.0),
            dv: Vec3::new(4.0, 5.0, 6.0),
            eps: Vec3::new(7.0, 8.0, 9.0),
            ba: Vec3::new(10.0, 11.0, 12.0),
            bg: Vec3::new(13.0, 14.0, 15.0),
        };
        let v = x.to_vector();
        for i in 0..15 {
            assert_eq!(v[i], (i + 1) as f64);
        }
        assert_eq!(ErrorState::from_vector(&v), x);
    }
}
