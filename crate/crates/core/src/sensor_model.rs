//! Stationary gyro/accelerometer measurement model and residuals against the
//! known ground truth (zero rotation, gravity on the down axis).

use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::units::deg_to_rad;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Default local gravity, m/s².
pub const STANDARD_GRAVITY: f64 = 9.81;

/// Slack allowed on the sample spacing of an in-memory recording, seconds.
pub const SPACING_TOLERANCE: f64 = 1e-9;

/// Reference error ranges of a ten-sensor consumer-grade array at 100 Hz,
/// given as (min, median, max) of the 3-axis RMS.
pub mod reference {
    /// Gyro turn-on bias RMS, deg/s.
    pub const GYRO_BIAS_RMS_DEG: [f64; 3] = [1.987, 2.164, 2.343];
    /// Gyro white-noise std RMS, deg/s.
    pub const GYRO_NOISE_RMS_DEG: [f64; 3] = [0.026, 0.033, 0.038];
    /// Accelerometer turn-on bias RMS, m/s².
    pub const ACCEL_BIAS_RMS: [f64; 3] = [0.176, 0.181, 0.197];
    /// Accelerometer white-noise std RMS, m/s².
    pub const ACCEL_NOISE_RMS: [f64; 3] = [0.007, 0.007, 0.009];
    /// In-run bias drift over the nominal 100 s run, as a fraction of the turn-on bias.
    pub const IN_RUN_FRACTION: f64 = 0.1;
    pub const RUN_DURATION_S: f64 = 100.0;
    pub const RATE_HZ: f64 = 100.0;
}

/// Deterministic and stochastic error parameters of one IMU (SI units).
#[derive(Debug, Clone, PartialEq)]
pub struct SensorErrorParams {
    pub bias_gyro: Vec3,
    pub bias_accel: Vec3,
    /// White-noise std per sample, rad/s (isotropic).
    pub sigma_gyro: f64,
    /// White-noise std per sample, m/s² (isotropic).
    pub sigma_accel: f64,
    /// Optional per-axis override of `sigma_gyro`.
    pub sigma_gyro_axes: Option<Vec3>,
    /// Optional per-axis override of `sigma_accel`.
    pub sigma_accel_axes: Option<Vec3>,
    /// In-run gyro-bias intensity, rad/s/√s.
    pub sigma_gyro_bias: f64,
    /// In-run accel-bias intensity, m/s²/√s.
    pub sigma_accel_bias: f64,
    pub gain_gyro: Mat3,
    pub gain_accel: Mat3,
}

impl Default for SensorErrorParams {
    fn default() -> Self {
        Self {
            bias_gyro: Vec3::zeros(),
            bias_accel: Vec3::zeros(),
            sigma_gyro: 0.0,
            sigma_accel: 0.0,
            sigma_gyro_axes: None,
            sigma_accel_axes: None,
            sigma_gyro_bias: 0.0,
            sigma_accel_bias: 0.0,
            gain_gyro: Mat3::zeros(),
            gain_accel: Mat3::zeros(),
        }
    }
}

impl SensorErrorParams {
    /// Builds a sensor whose bias vectors have the requested 3-axis RMS
    /// (gyro in deg/s, accel in m/s²) and whose noise is isotropic.
    ///
    /// `sign_pattern` picks the sign of each bias component from its low six
    /// bits (bits 0..3 gyro, 3..6 accel), so that sensors in an array do not all
    /// share one bias direction.
    pub fn from_rms(
        gyro_bias_rms_deg: f64,
        gyro_noise_deg: f64,
        accel_bias_rms: f64,
        accel_noise: f64,
        sign_pattern: u32,
    ) -> Self {
        let sign = |bit: u32| if sign_pattern >> bit & 1 == 1 { -1.0 } else { 1.0 };
        let gyro_bias = deg_to_rad(gyro_bias_rms_deg);
        let in_run = reference::IN_RUN_FRACTION / reference::RUN_DURATION_S.sqrt();
        Self {
            bias_gyro: Vec3::new(sign(0), sign(1), sign(2)) * gyro_bias,
            bias_accel: Vec3::new(sign(3), sign(4), sign(5)) * accel_bias_rms,
            sigma_gyro: deg_to_rad(gyro_noise_deg),
            sigma_accel: accel_noise,
            sigma_gyro_bias: in_run * gyro_bias,
            sigma_accel_bias: in_run * accel_bias_rms,
            ..Self::default()
        }
    }

    /// Sensor at the reference median of every error range.
    pub fn reference_median() -> Self {
        Self::from_rms(
            reference::GYRO_BIAS_RMS_DEG[1],
            reference::GYRO_NOISE_RMS_DEG[1],
            reference::ACCEL_BIAS_RMS[1],
            reference::ACCEL_NOISE_RMS[1],
            0,
        )
    }

    pub fn gyro_sigmas(&self) -> Vec3 {
        self.sigma_gyro_axes.unwrap_or_else(|| Vec3::repeat(self.sigma_gyro))
    }

    pub fn accel_sigmas(&self) -> Vec3 {
        self.sigma_accel_axes.unwrap_or_else(|| Vec3::repeat(self.sigma_accel))
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.bias_gyro.iter().all(|v| v.is_finite())
            && self.bias_accel.iter().all(|v| v.is_finite())
            && self.gain_gyro.iter().all(|v| v.is_finite())
            && self.gain_accel.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("sensor bias/gain parameters must be finite"));
        }
        let (gs, acs) = (self.gyro_sigmas(), self.accel_sigmas());
        let sigmas = [
            self.sigma_gyro,
            self.sigma_accel,
            self.sigma_gyro_bias,
            self.sigma_accel_bias,
        ]
        .into_iter()
        .chain(gs.iter().copied())
        .chain(acs.iter().copied());
        for s in sigmas {
            if !s.is_finite() || s < 0.0 {
                return Err(Error::invalid(format!(
                    "noise intensities must be finite and non-negative, got {s}"
                )));
            }
        }
        Ok(())
    }
}

/// Gravity in a NED navigation frame that coincides with the body frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GravityModel {
    pub g_magnitude: f64,
}

impl Default for GravityModel {
    fn default() -> Self {
        Self {
            g_magnitude: STANDARD_GRAVITY,
        }
    }
}

impl GravityModel {
    pub fn new(g_magnitude: f64) -> Result<Self> {
        if !g_magnitude.is_finite() || g_magnitude < 0.0 {
            return Err(Error::invalid(format!(
                "gravity magnitude must be finite and non-negative, got {g_magnitude}"
            )));
        }
        Ok(Self { g_magnitude })
    }

    /// g^n = (0, 0, +g), positive down.
    pub fn nav_gravity(&self) -> Vec3 {
        Vec3::new(0.0, 0.0, self.g_magnitude)
    }

    /// Body and navigation frames coincide.
    pub fn body_to_nav(&self) -> Mat3 {
        Mat3::identity()
    }

    /// Specific force a perfect leveled accelerometer reads at rest.
    pub fn static_specific_force(&self) -> Vec3 {
        -(self.body_to_nav().transpose() * self.nav_gravity())
    }
}

/// RMS over the three components of the gravity vector, ‖g‖/√3.
pub fn gravity_rms(gravity: &GravityModel) -> f64 {
    gravity.nav_gravity().norm() / 3f64.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    pub t: f64,
    pub gyro: Vec3,
    pub accel: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorRecording {
    sensor_id: String,
    rate_hz: f64,
    samples: Vec<ImuSample>,
}

impl SensorRecording {
    pub fn new(sensor_id: impl Into<String>, rate_hz: f64, samples: Vec<ImuSample>) -> Result<Self> {
        Self::with_spacing_tolerance(sensor_id, rate_hz, samples, SPACING_TOLERANCE)
    }

    /// Like [`SensorRecording::new`] with a caller-chosen spacing slack (seconds).
    pub fn with_spacing_tolerance(
        sensor_id: impl Into<String>,
        rate_hz: f64,
        samples: Vec<ImuSample>,
        tolerance: f64,
    ) -> Result<Self> {
        let sensor_id = sensor_id.into();
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(Error::invalid(format!("rate_hz must be positive, got {rate_hz}")));
        }
        if samples.is_empty() {
            return Err(Error::invalid(format!("recording {sensor_id:?} has no samples")));
        }
        let finite = samples
            .iter()
            .all(|s| s.t.is_finite() && s.gyro.iter().all(|v| v.is_finite()) && s.accel.iter().all(|v| v.is_finite()));
        if !finite {
            return Err(Error::Data(format!(
                "recording {sensor_id:?} contains non-finite values"
            )));
        }
        if samples[0].t < 0.0 {
            return Err(Error::Data(format!("recording {sensor_id:?} starts at negative time")));
        }
        let dt = 1.0 / rate_hz;
        for (i, w) in samples.windows(2).enumerate() {
            let step = w[1].t - w[0].t;
            if step <= 0.0 {
                return Err(Error::Data(format!(
                    "recording {sensor_id:?}: time not increasing at sample {}",
                    i + 1
                )));
            }
            if (step - dt).abs() >= tolerance {
                return Err(Error::Data(format!(
                    "recording {sensor_id:?}: spacing {step} s at sample {} differs from 1/rate = {dt} s",
                    i + 1
                )));
            }
        }
        Ok(Self {
            sensor_id,
            rate_hz,
            samples,
        })
    }

    pub fn sensor_id(&self) -> &str {
        &self.sensor_id
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn samples(&self) -> &[ImuSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// K time-aligned recordings with identical length, rate and time base.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayRecording {
    recordings: Vec<SensorRecording>,
}

impl ArrayRecording {
    pub fn new(recordings: Vec<SensorRecording>) -> Result<Self> {
        let Some(first) = recordings.first() else {
            return Err(Error::invalid("array needs at least one sensor"));
        };
        for rec in &recordings[1..] {
            if rec.len() != first.len() {
                return Err(Error::Data(format!(
                    "sensor {:?} has {} samples, {:?} has {}",
                    rec.sensor_id,
                    rec.len(),
                    first.sensor_id,
                    first.len()
                )));
            }
            if rec.rate_hz != first.rate_hz {
                return Err(Error::Data(format!(
                    "sensor {:?} sampled at {} Hz, {:?} at {} Hz",
                    rec.sensor_id, rec.rate_hz, first.sensor_id, first.rate_hz
                )));
            }
            let aligned = rec
                .samples
                .iter()
                .zip(&first.samples)
                .all(|(a, b)| (a.t - b.t).abs() < SPACING_TOLERANCE.max(1e-6));
            if !aligned {
                return Err(Error::Data(format!(
                    "sensor {:?} is not time-aligned with {:?}",
                    rec.sensor_id, first.sensor_id
                )));
            }
        }
        Ok(Self { recordings })
    }

    pub fn recordings(&self) -> &[SensorRecording] {
        &self.recordings
    }

    pub fn into_recordings(self) -> Vec<SensorRecording> {
        self.recordings
    }

    pub fn n_sensors(&self) -> usize {
        self.recordings.len()
    }

    pub fn n_samples(&self) -> usize {
        self.recordings[0].len()
    }

    pub fn rate_hz(&self) -> f64 {
        self.recordings[0].rate_hz
    }

    /// First `k` sensors as a new array.
    pub fn take(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.n_sensors() {
            return Err(Error::invalid(format!(
                "cannot take {k} of {} sensors",
                self.n_sensors()
            )));
        }
        Ok(Self {
            recordings: self.recordings[..k].to_vec(),
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimulationOptions {
    /// Drive the biases with the in-run random-walk intensities.
    pub bias_random_walk: bool,
}

/// Number of samples for a run: round(duration·rate).
pub fn sample_count(duration_s: f64, rate_hz: f64) -> Result<usize> {
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(Error::invalid(format!("duration must be positive, got {duration_s}")));
    }
    if !(rate_hz.is_finite() && rate_hz > 0.0) {
        return Err(Error::invalid(format!("rate must be positive, got {rate_hz}")));
    }
    let n = (duration_s * rate_hz).round();
    if n < 1.0 {
        return Err(Error::invalid(format!(
            "duration {duration_s} s at {rate_hz} Hz yields no samples"
        )));
    }
    Ok(n as usize)
}

/// Seeded RNG for sensor `index`; independent of scheduling order.
pub fn sensor_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

pub fn sensor_id_for(index: usize) -> String {
    format!("imu{:02}", index + 1)
}

pub fn simulate_array(
    params_list: &[SensorErrorParams],
    gravity: &GravityModel,
    duration_s: f64,
    rate_hz: f64,
    seed: u64,
) -> Result<ArrayRecording> {
    simulate_array_with(
        params_list,
        gravity,
        duration_s,
        rate_hz,
        seed,
        SimulationOptions::default(),
    )
}

pub fn simulate_array_with(
    params_list: &[SensorErrorParams],
    gravity: &GravityModel,
    duration_s: f64,
    rate_hz: f64,
    seed: u64,
    options: SimulationOptions,
) -> Result<ArrayRecording> {
    if params_list.is_empty() {
        return Err(Error::invalid("at least one sensor parameter set is required"));
    }
    let n = sample_count(duration_s, rate_hz)?;
    for p in params_list {
        p.validate()?;
    }
    let recordings = params_list
        .par_iter()
        .enumerate()
        .map(|(k, p)| simulate_sensor(p, gravity, n, rate_hz, sensor_rng(seed, k), options, sensor_id_for(k)))
        .collect::<Result<Vec<_>>>()?;
    ArrayRecording::new(recordings)
}

fn simulate_sensor(
    params: &SensorErrorParams,
    gravity: &GravityModel,
    n: usize,
    rate_hz: f64,
    mut rng: ChaCha8Rng,
    options: SimulationOptions,
    sensor_id: String,
) -> Result<SensorRecording> {
    let dt = 1.0 / rate_hz;
    let sg = params.gyro_sigmas();
    let sa = params.accel_sigmas();
    let true_force = gravity.static_specific_force();
    let accel_mean = (Mat3::identity() + params.gain_accel) * true_force;
    let walk_g = params.sigma_gyro_bias * dt.sqrt();
    let walk_a = params.sigma_accel_bias * dt.sqrt();

    let mut bg = params.bias_gyro;
    let mut ba = params.bias_accel;
    let normal3 = |rng: &mut ChaCha8Rng| {
        Vec3::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        )
    };
    let samples = (0..n)
        .map(|i| {
            let wg = normal3(&mut rng).component_mul(&sg);
            let wa = normal3(&mut rng).component_mul(&sa);
            let sample = ImuSample {
                t: i as f64 / rate_hz,
                gyro: bg + wg,
                accel: accel_mean + ba + wa,
            };
            if options.bias_random_walk {
                bg += normal3(&mut rng) * walk_g;
                ba += normal3(&mut rng) * walk_a;
            }
            sample
        })
        .collect();
    SensorRecording::new(sensor_id, rate_hz, samples)
}

/// Per-axis residual series in column layout: axes 0..3 gyro, 3..6 accel.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSeries {
    pub axes: [Vec<f64>; 6],
}

pub const AXIS_NAMES: [&str; 6] = ["gx", "gy", "gz", "ax", "ay", "az"];

impl ResidualSeries {
    pub fn len(&self) -> usize {
        self.axes[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.axes[0].is_empty()
    }

    pub fn axis(&self, i: usize) -> &[f64] {
        &self.axes[i]
    }
}

/// Measurement minus stationary ground truth: δω = ω̃, δf = f̃ + g·e_z.
pub fn residuals(recording: &SensorRecording, gravity: &GravityModel) -> ResidualSeries {
    let truth = gravity.static_specific_force();
    let n = recording.len();
    let mut axes: [Vec<f64>; 6] = std::array::from_fn(|_| Vec::with_capacity(n));
    for s in recording.samples() {
        let df = s.accel - truth;
        for i in 0..3 {
            axes[i].push(s.gyro[i]);
            axes[3 + i].push(df[i]);
        }
    }
    ResidualSeries { axes }
}
