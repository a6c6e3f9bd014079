//! Mean and covariance propagation of the error state.

use super::{check_tau, phi_closed, q_closed, CovarianceMatrix, ErrorState, NoiseSpectra, SystemMatrices};
use crate::error::{Error, Result};
use crate::estimation::Vec6;
use crate::numeric;
use crate::sensor_model::Vec3;

/// Kinematic part of the expected error state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KinematicError {
    pub dp: Vec3,
    pub dv: Vec3,
    pub eps: Vec3,
}

impl KinematicError {
    /// Row-major 3×3 grid: rows position, velocity, misalignment; columns n, e, d.
    pub fn as_grid(&self) -> [[f64; 3]; 3] {
        [
            [self.dp.x, self.dp.y, self.dp.z],
            [self.dv.x, self.dv.y, self.dv.z],
            [self.eps.x, self.eps.y, self.eps.z],
        ]
    }
}

/// Expected kinematic error after τ seconds from zero initial kinematics,
/// driven only by constant sensor biases.
pub fn propagate_mean(bias_a: &Vec3, bias_g: &Vec3, sys: &SystemMatrices, tau: f64) -> Result<KinematicError> {
    check_tau(tau)?;
    let (t2, t3) = (tau * tau, tau * tau * tau);
    let coupled = sys.f23 * bias_g;
    Ok(KinematicError {
        dp: bias_a * (t2 / 2.0) + coupled * (t3 / 6.0),
        dv: bias_a * tau + coupled * (t2 / 2.0),
        eps: bias_g * tau,
    })
}

/// Component-wise mean of K six-vectors of sensor biases (gyro, then accel).
pub fn array_bias_average(biases: &[Vec6]) -> Result<Vec6> {
    if biases.is_empty() {
        return Err(Error::invalid("bias average over an empty array"));
    }
    let k = biases.len() as f64;
    Ok(Vec6::from_fn(|i, _| numeric::sum(biases.iter().map(|b| b[i])) / k))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    /// States at steps 0..=n.
    pub states: Vec<ErrorState>,
    /// Covariances at steps 0..=n.
    pub covariances: Vec<CovarianceMatrix>,
}

impl Trajectory {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.states.len()).map(|k| k as f64 * self.dt)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Discrete propagation x_{k+1} = Φ(dt)·x_k, P_{k+1} = Φ(dt)·P_k·Φ(dt)ᵀ + Q(dt).
pub fn propagate_discrete(
    x0: &ErrorState,
    p0: &CovarianceMatrix,
    sys: &SystemMatrices,
    spectra: &NoiseSpectra,
    dt: f64,
    n_steps: usize,
) -> Result<Trajectory> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid(format!("time step must be positive, got {dt}")));
    }
    if n_steps < 1 {
        return Err(Error::invalid("propagation needs at least one step"));
    }
    let phi = phi_closed(sys, dt)?;
    let phi_t = phi.transpose();
    let q = *q_closed(sys, spectra, dt)?.matrix();

    let mut states = Vec::with_capacity(n_steps + 1);
    let mut covariances = Vec::with_capacity(n_steps + 1);
    let mut x = x0.to_vector();
    let mut p = *p0.matrix();
    states.push(*x0);
    covariances.push(*p0);
    for _ in 0..n_steps {
        x = phi * x;
        p = phi * p * phi_t + q;
        p = (p + p.transpose()) * 0.5;
        states.push(ErrorState::from_vector(&x));
        covariances.push(CovarianceMatrix::from_symmetric(p));
    }
    Ok(Trajectory {
        dt,
        states,
        covariances,
    })
}
