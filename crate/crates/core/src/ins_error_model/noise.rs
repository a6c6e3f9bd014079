//! Process-noise spectra and the accumulated process-noise covariance Q(τ).

use nalgebra::SymmetricEigen;
use serde::Serialize;

use super::{block, check_tau, get_block, phi_closed, set_block, Mat15, SystemMatrices};
use crate::error::{Error, Result};
use crate::sensor_model::{Mat3, SensorErrorParams};

pub const DEFAULT_QUADRATURE_STEPS: usize = 2000;

/// How per-sample noise std values are turned into white-noise intensities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseInterpretation {
    /// σ² substituted directly as the spectral intensity.
    #[default]
    Direct,
    /// Per-sample std at rate f_s converted to a density, s = σ²/f_s.
    PerSample,
}

/// Diagonal white-noise intensities of (w_a, w_g, w_ab, w_gb), isotropic per triad.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct NoiseSpectra {
    pub s_a: f64,
    pub s_g: f64,
    pub s_ab: f64,
    pub s_gb: f64,
}

impl NoiseSpectra {
    pub fn new(s_a: f64, s_g: f64, s_ab: f64, s_gb: f64) -> Result<Self> {
        let s = Self { s_a, s_g, s_ab, s_gb };
        if s.as_array().iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid(format!("noise spectra must be non-negative: {s:?}")));
        }
        Ok(s)
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.s_a, self.s_g, self.s_ab, self.s_gb]
    }

    /// Spectra of one sensor. Per-axis std overrides are folded into their mean square.
    pub fn from_params(params: &SensorErrorParams, interpretation: NoiseInterpretation, rate_hz: f64) -> Result<Self> {
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(Error::invalid(format!("rate must be positive, got {rate_hz}")));
        }
        let mean_sq = |v: nalgebra::Vector3<f64>| v.norm_squared() / 3.0;
        let white = match interpretation {
            NoiseInterpretation::Direct => 1.0,
            NoiseInterpretation::PerSample => 1.0 / rate_hz,
        };
        Self::new(
            mean_sq(params.accel_sigmas()) * white,
            mean_sq(params.gyro_sigmas()) * white,
            params.sigma_accel_bias.powi(2),
            params.sigma_gyro_bias.powi(2),
        )
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            s_a: self.s_a * factor,
            s_g: self.s_g * factor,
            s_ab: self.s_ab * factor,
            s_gb: self.s_gb * factor,
        }
    }

    /// Diagonal of G·S·Gᵀ.
    fn driving_diagonal(&self) -> [f64; 15] {
        let mut d = [0.0; 15];
        for (j, s) in self.as_array().into_iter().enumerate() {
            for i in 0..3 {
                d[3 * (j + 1) + i] = s;
            }
        }
        d
    }
}

/// Symmetric positive semidefinite 15×15 covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceMatrix(Mat15);

impl CovarianceMatrix {
    pub fn zeros() -> Self {
        Self(Mat15::zeros())
    }

    /// Validates symmetry (1e-12 relative) and PSD (min eigenvalue ≥ -1e-10·trace).
    pub fn new(m: Mat15) -> Result<Self> {
        let c = Self(m);
        c.validate()?;
        Ok(c)
    }

    pub(crate) fn from_symmetric(m: Mat15) -> Self {
        Self(m)
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.0;
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("covariance has non-finite entries".into()));
        }
        let scale = m.norm();
        if (m - m.transpose()).norm() > 1e-12 * scale {
            return Err(Error::Numerical("covariance is not symmetric".into()));
        }
        let min_eig = SymmetricEigen::new(*m).eigenvalues.min();
        if min_eig < -1e-10 * m.trace().abs() {
            return Err(Error::Numerical(format!(
                "covariance is not positive semidefinite (min eigenvalue {min_eig:e})"
            )));
        }
        Ok(())
    }

    pub fn matrix(&self) -> &Mat15 {
        &self.0
    }

    pub fn into_matrix(self) -> Mat15 {
        self.0
    }

    pub fn block(&self, row: usize, col: usize) -> Mat3 {
        get_block(&self.0, row, col)
    }

    pub fn position_block(&self) -> Mat3 {
        self.block(block::POS, block::POS)
    }

    /// Square roots of the diagonal (1-sigma state uncertainties).
    pub fn std_devs(&self) -> [f64; 15] {
        std::array::from_fn(|i| self.0[(i, i)].max(0.0).sqrt())
    }
}

fn assemble(sys: &SystemMatrices, spectra: &NoiseSpectra, tau: f64, vv_white_accel: f64) -> Mat15 {
    use block::*;
    let NoiseSpectra { s_a, s_g, s_ab, s_gb } = *spectra;
    let i3 = Mat3::identity();
    let f = sys.f23;
    let ff = f * f.transpose();
    let t = |p: i32| tau.powi(p);
    let mixed = ff * s_g + i3 * s_ab;

    let upper = [
        (
            POS,
            POS,
            ff * (s_gb * t(7) / 252.0) + mixed * (t(5) / 20.0) + i3 * (s_a * t(3) / 3.0),
        ),
        (
            POS,
            VEL,
            ff * (s_gb * t(6) / 72.0) + mixed * (t(4) / 8.0) + i3 * (s_a * t(2) / 2.0),
        ),
        (POS, ATT, f * (s_gb * t(5) / 30.0 + s_g * t(3) / 6.0)),
        (POS, ACC_BIAS, i3 * (s_ab * t(3) / 6.0)),
        (POS, GYRO_BIAS, f * (s_gb * t(4) / 24.0)),
        (
            VEL,
            VEL,
            ff * (s_gb * t(5) / 20.0) + mixed * (t(3) / 3.0) + i3 * (s_a * tau * vv_white_accel),
        ),
        (VEL, ATT, f * (s_gb * t(4) / 8.0 + s_g * t(2) / 2.0)),
        (VEL, ACC_BIAS, i3 * (s_ab * t(2) / 2.0)),
        (VEL, GYRO_BIAS, f * (s_gb * t(3) / 6.0)),
        (ATT, ATT, i3 * (s_gb * t(3) / 3.0 + s_g * tau)),
        (ATT, GYRO_BIAS, i3 * (s_gb * t(2) / 2.0)),
        (ACC_BIAS, ACC_BIAS, i3 * (s_ab * tau)),
        (GYRO_BIAS, GYRO_BIAS, i3 * (s_gb * tau)),
    ];
    let mut q = Mat15::zeros();
    for (r, c, b) in upper {
        set_block(&mut q, r, c, &b);
        if r != c {
            set_block(&mut q, c, r, &b.transpose());
        }
    }
    q
}

/// Closed-form Q(τ) = ∫₀^τ Φ(s)·G·S·Gᵀ·Φ(s)ᵀ ds.
///
/// The white accelerometer term of the velocity block is σ_a²·τ; see
/// [`audit_printed_coefficients`] for the commonly printed σ_a²·τ/2 variant.
pub fn q_closed(sys: &SystemMatrices, spectra: &NoiseSpectra, tau: f64) -> Result<CovarianceMatrix> {
    check_tau(tau)?;
    Ok(CovarianceMatrix::from_symmetric(assemble(sys, spectra, tau, 1.0)))
}

/// Q(τ) with the block coefficients as commonly printed, including σ_a²·τ/2 in
/// the velocity block. Kept only for auditing against the quadrature oracle.
pub fn q_printed(sys: &SystemMatrices, spectra: &NoiseSpectra, tau: f64) -> Result<Mat15> {
    check_tau(tau)?;
    Ok(assemble(sys, spectra, tau, 0.5))
}

/// Composite Simpson quadrature of the Q(τ) integrand built from [`phi_closed`].
/// An odd `steps` is rounded up to the next even count.
pub fn q_numeric_oracle(
    sys: &SystemMatrices,
    spectra: &NoiseSpectra,
    tau: f64,
    steps: usize,
) -> Result<CovarianceMatrix> {
    check_tau(tau)?;
    if steps < 100 {
        return Err(Error::invalid(format!(
            "quadrature needs at least 100 steps, got {steps}"
        )));
    }
    let steps = steps + steps % 2;
    let d = spectra.driving_diagonal();
    let integrand = |s: f64| -> Result<Mat15> {
        let phi = phi_closed(sys, s)?;
        let mut scaled = phi;
        for (j, dj) in d.iter().enumerate() {
            scaled.column_mut(j).scale_mut(*dj);
        }
        Ok(scaled * phi.transpose())
    };
    let h = tau / steps as f64;
    let mut acc = integrand(0.0)? + integrand(tau)?;
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += integrand(h * i as f64)? * w;
    }
    let q = acc * (h / 3.0);
    Ok(CovarianceMatrix::from_symmetric((q + q.transpose()) * 0.5))
}

/// A block/channel where the printed closed form disagrees with quadrature.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientDiscrepancy {
    pub block: String,
    pub channel: String,
    /// Printed coefficient divided by the coefficient the integral yields.
    pub printed_to_oracle_ratio: f64,
    pub relative_difference: f64,
    pub resolution: String,
}

/// Compares every block of [`q_printed`] against [`q_numeric_oracle`], one
/// noise channel at a time with unit intensity over τ = 1, and lists
/// mismatches. The closed form in [`q_closed`] follows the oracle.
pub fn audit_printed_coefficients(sys: &SystemMatrices, steps: usize) -> Result<Vec<CoefficientDiscrepancy>> {
    const NAMES: [&str; 5] = ["p", "v", "eps", "ba", "bg"];
    const CHANNELS: [&str; 4] = ["s_a", "s_g", "s_ab", "s_gb"];
    let mut found = Vec::new();
    for (c, channel) in CHANNELS.iter().enumerate() {
        let mut unit = [0.0; 4];
        unit[c] = 1.0;
        let spectra = NoiseSpectra::new(unit[0], unit[1], unit[2], unit[3])?;
        let printed = q_printed(sys, &spectra, 1.0)?;
        let oracle = q_numeric_oracle(sys, &spectra, 1.0, steps)?.into_matrix();
        for (r, row_name) in NAMES.iter().enumerate() {
            for (k, col_name) in NAMES.iter().enumerate().skip(r) {
                let p = get_block(&printed, 3 * r, 3 * k);
                let o = get_block(&oracle, 3 * r, 3 * k);
                let diff = (p - o).norm();
                let scale = p.norm().max(o.norm());
                if scale > 0.0 && diff > 1e-8 * scale {
                    let ratio = if o.norm() > 0.0 {
                        p.dot(&o) / o.norm_squared()
                    } else {
                        f64::INFINITY
                    };
                    found.push(CoefficientDiscrepancy {
                        block: format!("Q_{row_name}{col_name}"),
                        channel: channel.to_string(),
                        printed_to_oracle_ratio: ratio,
                        relative_difference: diff / scale,
                        resolution: "closed form uses the quadrature value".into(),
                    });
                }
            }
        }
    }
    Ok(found)
}

/// ‖Q(τ₁+τ₂) − [Φ(τ₂)Q(τ₁)Φ(τ₂)ᵀ + Q(τ₂)]‖_F / ‖Q(τ₁+τ₂)‖_F, or 0 when Q(τ₁+τ₂) = 0.
pub fn semigroup_check(sys: &SystemMatrices, spectra: &NoiseSpectra, tau1: f64, tau2: f64) -> Result<f64> {
    let total = q_closed(sys, spectra, tau1 + tau2)?.into_matrix();
    let phi = phi_closed(sys, tau2)?;
    let composed =
        phi * q_closed(sys, spectra, tau1)?.matrix() * phi.transpose() + q_closed(sys, spectra, tau2)?.matrix();
    let norm = total.norm();
    if norm == 0.0 {
        return Ok((total - composed).norm());
    }
    Ok((total - composed).norm() / norm)
}

/// Process-noise covariance of a K-sensor average: Q/K.
pub fn array_q_scale(q_single: &CovarianceMatrix, k: usize) -> Result<CovarianceMatrix> {
    if k < 1 {
        return Err(Error::invalid("sensor count must be at least 1"));
    }
    Ok(CovarianceMatrix::from_symmetric(q_single.0 / k as f64))
}
