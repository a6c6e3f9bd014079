//! Parametric estimation of bias and noise from stationary recordings:
//! sample means over time and sensors, their variance laws, information
//! bounds, running-window statistics, sensor ranking and the evaluation
//! matrix relating single-sensor to array statistics.

mod kde;
mod wss;

pub use kde::{density_grid, kde_density, silverman_bandwidth};
pub use wss::{wss_check, wss_check_with_lags, WssVerdict, DEFAULT_LAGS, MIN_SAMPLES};

use nalgebra::{DMatrix, Vector6};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric;
use crate::sensor_model::{
    residuals, sensor_rng, ArrayRecording, GravityModel, ResidualSeries, SensorRecording, AXIS_NAMES,
};
use crate::units;

pub type Vec6 = Vector6<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub value: f64,
    pub n_time: usize,
    pub n_sensors: usize,
    /// σ²/(N·K), present when a noise level was supplied.
    pub predicted_variance: Option<f64>,
}

/// Mean over all N×K entries (rows are time, columns sensors).
pub fn sample_mean(data: &DMatrix<f64>, sigma: Option<f64>) -> Result<MeanEstimate> {
    let (n, k) = data.shape();
    if n == 0 || k == 0 {
        return Err(Error::invalid("sample mean of an empty matrix"));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("sample mean input contains non-finite entries"));
    }
    let value = numeric::sum(data.iter().copied()) / (n * k) as f64;
    let predicted_variance = sigma.map(|s| variance_of_mean(s, n, k)).transpose()?;
    Ok(MeanEstimate {
        value,
        n_time: n,
        n_sensors: k,
        predicted_variance,
    })
}

/// σ²/(N·K): variance of the sample mean over N samples from K independent sensors.
pub fn variance_of_mean(sigma: f64, n_time: usize, n_sensors: usize) -> Result<f64> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::invalid(format!("sigma must be non-negative, got {sigma}")));
    }
    if n_time == 0 || n_sensors == 0 {
        return Err(Error::invalid(format!(
            "sample counts must be positive (N = {n_time}, K = {n_sensors})"
        )));
    }
    Ok(sigma * sigma / (n_time as f64 * n_sensors as f64))
}

pub fn rms(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("rms of an empty vector"));
    }
    Ok((numeric::sum(values.iter().map(|v| v * v)) / values.len() as f64).sqrt())
}

pub fn mse(estimates: &[f64], truth: f64) -> Result<f64> {
    if estimates.is_empty() {
        return Err(Error::invalid("mse of an empty vector"));
    }
    Ok(numeric::sum(estimates.iter().map(|e| (e - truth) * (e - truth))) / estimates.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InformationBound {
    /// Fisher information of N Gaussian samples about their mean, N/σ².
    pub fisher: f64,
    /// Cramér–Rao lower bound σ²/N.
    pub crlb: f64,
}

pub fn fisher_crlb(sigma: f64, n: usize) -> Result<InformationBound> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid(format!(
            "fisher information undefined for sigma = {sigma}"
        )));
    }
    if n == 0 {
        return Err(Error::invalid("fisher information needs n >= 1"));
    }
    let var = sigma * sigma;
    Ok(InformationBound {
        fisher: n as f64 / var,
        crlb: var / n as f64,
    })
}

/// 10·log10(x).
pub fn db_ratio(x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::invalid(format!("dB ratio needs a positive value, got {x}")));
    }
    Ok(10.0 * x.log10())
}

/// Row-wise average of an N×K matrix: the K-sensor averaged series.
pub fn sensor_average(data: &DMatrix<f64>) -> Vec<f64> {
    let k = data.ncols() as f64;
    data.row_iter()
        .map(|row| numeric::sum(row.iter().copied()) / k)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunningStdProfile {
    pub window_ends: Vec<usize>,
    /// Standard deviation of the mean over the first `n` samples, s_n/√n.
    pub std_estimates: Vec<f64>,
}

/// Window ends on a logarithmic grid, ten per decade, from 2 through `n`.
pub fn log_window_ends(n: usize) -> Vec<usize> {
    let mut ends = Vec::new();
    let mut j = 3; // 10^(3/10) ≈ 2
    loop {
        let w = 10f64.powf(j as f64 / 10.0).round() as usize;
        if w > n {
            break;
        }
        if ends.last() != Some(&w) && w >= 2 {
            ends.push(w);
        }
        j += 1;
    }
    if n >= 2 && ends.last() != Some(&n) {
        ends.push(n);
    }
    ends
}

/// Growing-window estimate of the uncertainty of the K-averaged sample mean.
///
/// The data is averaged across sensors, the overall mean (bias) removed, and
/// for each window end `n` the sample std of the first `n` values divided by
/// √n is reported.
pub fn running_std_profile(data: &DMatrix<f64>) -> Result<RunningStdProfile> {
    let n = data.nrows();
    if n < 2 || data.ncols() == 0 {
        return Err(Error::invalid(format!(
            "running profile needs at least 2 samples, got {n}"
        )));
    }
    let series = sensor_average(data);
    let centre = numeric::mean(&series);
    let window_ends = log_window_ends(n);
    let mut std_estimates = Vec::with_capacity(window_ends.len());
    let (mut count, mut mean, mut m2) = (0usize, 0.0f64, 0.0f64);
    let mut next = 0;
    for &x in &series {
        let x = x - centre;
        count += 1;
        let delta = x - mean;
        mean += delta / count as f64;
        m2 += delta * (x - mean);
        if next < window_ends.len() && count == window_ends[next] {
            let s = (m2.max(0.0) / (count - 1) as f64).sqrt();
            std_estimates.push(s / (count as f64).sqrt());
            next += 1;
        }
    }
    Ok(RunningStdProfile {
        window_ends,
        std_estimates,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasEstimate {
    /// Time-mean of the residuals: gyro x,y,z (rad/s) then accel x,y,z (m/s²).
    pub bias: Vec6,
    /// Per-axis standard error, sample std / √N.
    pub uncertainty: Vec6,
    /// Per-axis sample std of the residuals (N-1 denominator).
    pub noise_std: Vec6,
}

pub fn estimate_bias(recording: &SensorRecording, gravity: &GravityModel) -> Result<BiasEstimate> {
    if recording.len() < 2 {
        return Err(Error::invalid(format!(
            "bias estimation needs at least 2 samples, {:?} has {}",
            recording.sensor_id(),
            recording.len()
        )));
    }
    Ok(bias_from_residuals(&residuals(recording, gravity)))
}

pub(crate) fn bias_from_residuals(res: &ResidualSeries) -> BiasEstimate {
    let n = res.len() as f64;
    let bias = Vec6::from_fn(|i, _| numeric::mean(res.axis(i)));
    let noise_std = Vec6::from_fn(|i, _| numeric::sample_std(res.axis(i)));
    BiasEstimate {
        bias,
        uncertainty: noise_std / n.sqrt(),
        noise_std,
    }
}

/// Residuals with the estimated bias removed from every axis.
pub fn compensate(res: &ResidualSeries, estimate: &BiasEstimate) -> ResidualSeries {
    ResidualSeries {
        axes: std::array::from_fn(|i| res.axes[i].iter().map(|v| v - estimate.bias[i]).collect()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QualityScore {
    pub sensor_id: String,
    /// RMS of the six bias components with gyro in deg/s and accel in m/s².
    pub score: f64,
}

/// Quality score of a bias estimate; larger means a less reliable sensor.
pub fn bias_quality_score(bias: &Vec6) -> f64 {
    let parts: Vec<f64> = (0..6)
        .map(|i| if i < 3 { units::rad_to_deg(bias[i]) } else { bias[i] })
        .collect();
    rms(&parts).expect("six components")
}

/// Orders sensors worst-first by bias-RMS score; ties broken by sensor id.
pub fn sort_by_quality(array: &ArrayRecording, gravity: &GravityModel) -> Result<(ArrayRecording, Vec<QualityScore>)> {
    let mut scored: Vec<(f64, &SensorRecording)> = array
        .recordings()
        .par_iter()
        .map(|rec| {
            (
                bias_quality_score(&bias_from_residuals(&residuals(rec, gravity)).bias),
                rec,
            )
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.sensor_id().cmp(b.1.sensor_id())));
    let scores = scored
        .iter()
        .map(|(score, rec)| QualityScore {
            sensor_id: rec.sensor_id().to_string(),
            score: *score,
        })
        .collect();
    let ordered = ArrayRecording::new(scored.into_iter().map(|(_, r)| r.clone()).collect())?;
    Ok((ordered, scores))
}

/// N×K matrix of one residual axis across the first `k` sensors.
pub fn axis_matrix(residuals: &[ResidualSeries], axis: usize, k: usize) -> Result<DMatrix<f64>> {
    if k == 0 || k > residuals.len() {
        return Err(Error::invalid(format!(
            "requested {k} sensors out of {}",
            residuals.len()
        )));
    }
    let n = residuals[0].len();
    Ok(DMatrix::from_fn(n, k, |r, c| residuals[c].axes[axis][r]))
}

/// Single-sensor vs array statistics at the first and last time step, with
/// the ratios along each axis.
///
/// The t0 cells hold the per-sample dispersion (uncertainty of an estimate from
/// one time step), the tf cells the uncertainty of the mean over all N samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvaluationMatrix {
    pub single_t0: f64,
    pub multi_t0: f64,
    pub k_ratio_t0: f64,
    pub single_tf: f64,
    pub multi_tf: f64,
    pub k_ratio_tf: f64,
    pub n_ratio_single: f64,
    pub n_ratio_multi: f64,
    pub diagonal_ratio: f64,
}

impl EvaluationMatrix {
    pub fn from_cells(single_t0: f64, multi_t0: f64, single_tf: f64, multi_tf: f64) -> Self {
        Self {
            single_t0,
            multi_t0,
            k_ratio_t0: multi_t0 / single_t0,
            single_tf,
            multi_tf,
            k_ratio_tf: multi_tf / single_tf,
            n_ratio_single: single_tf / single_t0,
            n_ratio_multi: multi_tf / multi_t0,
            diagonal_ratio: multi_tf / single_t0,
        }
    }

    /// Row-major 3×3 layout.
    pub fn as_rows(&self) -> [[f64; 3]; 3] {
        [
            [self.single_t0, self.multi_t0, self.k_ratio_t0],
            [self.single_tf, self.multi_tf, self.k_ratio_tf],
            [self.n_ratio_single, self.n_ratio_multi, self.diagonal_ratio],
        ]
    }

    pub fn db(&self) -> Result<DbSummary> {
        Ok(DbSummary {
            k_ratio_t0: db_ratio(self.k_ratio_t0)?,
            k_ratio_tf: db_ratio(self.k_ratio_tf)?,
            n_ratio_single: db_ratio(self.n_ratio_single)?,
            n_ratio_multi: db_ratio(self.n_ratio_multi)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DbSummary {
    pub k_ratio_t0: f64,
    pub k_ratio_tf: f64,
    pub n_ratio_single: f64,
    pub n_ratio_multi: f64,
}

/// Cells for one axis: column 0 is the single sensor, columns 0..K the array.
pub fn axis_evaluation(data: &DMatrix<f64>) -> Result<(f64, f64, f64, f64)> {
    let n = data.nrows();
    if n < 2 {
        return Err(Error::invalid("evaluation matrix needs at least 2 samples"));
    }
    let single: Vec<f64> = data.column(0).iter().copied().collect();
    let multi = sensor_average(data);
    let s0 = numeric::sample_std(&single);
    let m0 = numeric::sample_std(&multi);
    let sf = *running_std_profile(&DMatrix::from_column_slice(n, 1, &single))?
        .std_estimates
        .last()
        .expect("profile ends at N");
    let mf = *running_std_profile(data)?
        .std_estimates
        .last()
        .expect("profile ends at N");
    Ok((s0, m0, sf, mf))
}

/// Evaluation matrix of one sensor triad (axes `first..first+3`), cells
/// aggregated as the RMS over the three axes.
pub fn triad_evaluation(residuals: &[ResidualSeries], first_axis: usize, k: usize) -> Result<EvaluationMatrix> {
    let mut cells = [[0.0; 3]; 4];
    for (j, axis) in (first_axis..first_axis + 3).enumerate() {
        let (s0, m0, sf, mf) = axis_evaluation(&axis_matrix(residuals, axis, k)?)?;
        cells[0][j] = s0;
        cells[1][j] = m0;
        cells[2][j] = sf;
        cells[3][j] = mf;
    }
    let r = |c: &[f64; 3]| rms(c).expect("three axes");
    Ok(EvaluationMatrix::from_cells(
        r(&cells[0]),
        r(&cells[1]),
        r(&cells[2]),
        r(&cells[3]),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxisEstimate {
    pub axis: String,
    pub k: usize,
    /// Sample mean over N samples and K sensors (the bias estimate).
    pub mean: f64,
    /// Sample variance of the K-averaged series.
    pub sample_variance: f64,
    /// Mean per-sensor variance over N·K, the bound for the array mean.
    pub crlb: f64,
}

/// Sample means, variances and information bounds over a (N, K) grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub n_time: usize,
    pub k_grid: Vec<usize>,
    pub gyro_unit: String,
    pub entries: Vec<AxisEstimate>,
    pub gyro_matrix: EvaluationMatrix,
    pub accel_matrix: EvaluationMatrix,
    pub gyro_db: DbSummary,
    pub accel_db: DbSummary,
}

impl EstimateReport {
    /// `residuals` must already be ordered worst-first.
    pub fn build(residuals: &[ResidualSeries], k_grid: &[usize]) -> Result<Self> {
        let k_max = residuals.len();
        if k_max == 0 {
            return Err(Error::invalid("no sensors"));
        }
        let n = residuals[0].len();
        if n < 2 {
            return Err(Error::invalid("estimate report needs at least 2 samples"));
        }
        let mut entries = Vec::new();
        for &k in k_grid {
            for (axis, name) in AXIS_NAMES.iter().enumerate() {
                let data = axis_matrix(residuals, axis, k)?;
                let mean = sample_mean(&data, None)?.value;
                let sample_variance = numeric::sample_variance(&sensor_average(&data));
                let per_sensor_var = numeric::mean(
                    &(0..k)
                        .map(|c| numeric::sample_variance(residuals[c].axis(axis)))
                        .collect::<Vec<_>>(),
                );
                let crlb = variance_of_mean(per_sensor_var.sqrt(), n, k)?;
                entries.push(AxisEstimate {
                    axis: name.to_string(),
                    k,
                    mean,
                    sample_variance,
                    crlb,
                });
            }
        }
        let gyro_matrix = triad_evaluation(residuals, 0, k_max)?;
        let accel_matrix = triad_evaluation(residuals, 3, k_max)?;
        Ok(Self {
            n_time: n,
            k_grid: k_grid.to_vec(),
            gyro_unit: units::GyroUnit::RadPerSec.as_str().into(),
            gyro_db: gyro_matrix.db()?,
            accel_db: accel_matrix.db()?,
            entries,
            gyro_matrix,
            accel_matrix,
        })
    }

    /// Same report with gyro quantities expressed in `unit`. Ratios and dB are unit-free.
    pub fn in_gyro_unit(&self, unit: units::GyroUnit) -> Self {
        let current: units::GyroUnit = self.gyro_unit.parse().expect("report unit is valid");
        let scale = unit.from_si(current.to_si(1.0));
        let mut out = self.clone();
        for e in out.entries.iter_mut().filter(|e| e.axis.starts_with('g')) {
            e.mean *= scale;
            e.sample_variance *= scale * scale;
            e.crlb *= scale * scale;
        }
        let m = &self.gyro_matrix;
        out.gyro_matrix = EvaluationMatrix::from_cells(
            m.single_t0 * scale,
            m.multi_t0 * scale,
            m.single_tf * scale,
            m.multi_tf * scale,
        );
        out.gyro_unit = unit.as_str().into();
        out
    }
}

/// Sample means of `trials` independent N×K blocks of N(0, σ²) noise.
///
/// Trial `i` draws from its own RNG stream, so the result does not depend on
/// thread scheduling.
pub fn monte_carlo_sample_means(sigma: f64, n: usize, k: usize, trials: usize, seed: u64) -> Vec<f64> {
    (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = sensor_rng(seed, trial);
            let total = numeric::sum((0..n * k).map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                sigma * z
            }));
            total / (n * k) as f64
        })
        .collect()
}
