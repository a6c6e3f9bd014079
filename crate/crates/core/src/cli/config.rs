use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataio::ReportFormat;
use crate::error::{Error, Result};
use crate::ins_error_model::NoiseInterpretation;
use crate::sensor_model::{reference, GravityModel, Mat3, SensorErrorParams, Vec3, STANDARD_GRAVITY};
use crate::units::deg_to_rad;

/// Built-in synthetic arrays drawn at the reference error ranges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Every sensor at the median of each range.
    Median,
    /// Sensor i of K spread linearly from the minimum to the maximum.
    Spread,
}

/// One sensor's parameters as written in a config file (gyro in deg/s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorParamsConfig {
    pub bias_gyro_deg: [f64; 3],
    pub bias_accel: [f64; 3],
    pub sigma_gyro_deg: f64,
    pub sigma_accel: f64,
    #[serde(default)]
    pub sigma_gyro_axes_deg: Option<[f64; 3]>,
    #[serde(default)]
    pub sigma_accel_axes: Option<[f64; 3]>,
    #[serde(default)]
    pub sigma_gyro_bias_deg: f64,
    #[serde(default)]
    pub sigma_accel_bias: f64,
    #[serde(default)]
    pub gain_accel: Option<[[f64; 3]; 3]>,
}

impl SensorParamsConfig {
    pub fn to_params(&self) -> SensorErrorParams {
        let deg3 = |v: [f64; 3]| Vec3::new(deg_to_rad(v[0]), deg_to_rad(v[1]), deg_to_rad(v[2]));
        SensorErrorParams {
            bias_gyro: deg3(self.bias_gyro_deg),
            bias_accel: Vec3::from(self.bias_accel),
            sigma_gyro: deg_to_rad(self.sigma_gyro_deg),
            sigma_accel: self.sigma_accel,
            sigma_gyro_axes: self.sigma_gyro_axes_deg.map(deg3),
            sigma_accel_axes: self.sigma_accel_axes.map(Vec3::from),
            sigma_gyro_bias: deg_to_rad(self.sigma_gyro_bias_deg),
            sigma_accel_bias: self.sigma_accel_bias,
            gain_accel: self
                .gain_accel
                .map(|m| Mat3::from_fn(|r, c| m[r][c]))
                .unwrap_or_else(Mat3::zeros),
            ..SensorErrorParams::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub duration_s: f64,
    pub rate_hz: f64,
    pub sensors: usize,
    pub gravity_mps2: f64,
    pub preset: Option<Preset>,
    pub sensor_params: Option<Vec<SensorParamsConfig>>,
    pub manifest: Option<PathBuf>,
    pub tau_grid: Vec<f64>,
    pub k_grid: Vec<usize>,
    pub out_dir: PathBuf,
    pub format: ReportFormat,
    pub noise_interpretation: NoiseInterpretation,
    pub bias_random_walk: bool,
    pub quadrature_steps: usize,
    /// 1-sigma initial uncertainty of the 15 states; `None` means P₀ = 0.
    pub initial_sigma: Option<Vec<f64>>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            duration_s: reference::RUN_DURATION_S,
            rate_hz: reference::RATE_HZ,
            sensors: 10,
            gravity_mps2: STANDARD_GRAVITY,
            preset: None,
            sensor_params: None,
            manifest: None,
            tau_grid: (0..=100).map(f64::from).collect(),
            k_grid: vec![1, 4, 10],
            out_dir: PathBuf::from("imulab-out"),
            format: ReportFormat::Csv,
            noise_interpretation: NoiseInterpretation::Direct,
            bias_random_walk: false,
            quadrature_steps: crate::ins_error_model::DEFAULT_QUADRATURE_STEPS,
            initial_sigma: None,
        }
    }
}

/// Where the sensor data of an experiment comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic(Vec<SensorErrorParams>),
    Manifest(PathBuf),
}

impl ExperimentConfig {
    /// Config used when no file is given: the median preset.
    pub fn builtin() -> Self {
        Self {
            preset: Some(Preset::Median),
            ..Self::default()
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn gravity(&self) -> Result<GravityModel> {
        GravityModel::new(self.gravity_mps2).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let sources = [
            self.preset.is_some(),
            self.sensor_params.is_some(),
            self.manifest.is_some(),
        ];
        if sources.iter().filter(|s| **s).count() != 1 {
            return Err(Error::Config(
                "exactly one of preset, sensor_params or manifest must be set".into(),
            ));
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(Error::Config(format!(
                "duration_s must be positive, got {}",
                self.duration_s
            )));
        }
        if !(self.rate_hz.is_finite() && self.rate_hz > 0.0) {
            return Err(Error::Config(format!("rate_hz must be positive, got {}", self.rate_hz)));
        }
        if self.sensors == 0 {
            return Err(Error::Config("sensors must be at least 1".into()));
        }
        if let Some(p) = &self.sensor_params {
            if p.len() != self.sensors {
                return Err(Error::Config(format!(
                    "sensor_params lists {} sensors but sensors = {}",
                    p.len(),
                    self.sensors
                )));
            }
        }
        if self.tau_grid.is_empty() || self.tau_grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::Config(
                "tau_grid must be a non-empty list of non-negative times".into(),
            ));
        }
        if self.tau_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("tau_grid must be strictly increasing".into()));
        }
        if self.k_grid.is_empty() || self.k_grid.contains(&0) {
            return Err(Error::Config(
                "k_grid must be a non-empty list of positive counts".into(),
            ));
        }
        if self.quadrature_steps < 100 {
            return Err(Error::Config("quadrature_steps must be at least 100".into()));
        }
        if let Some(s) = &self.initial_sigma {
            if s.len() != crate::ins_error_model::STATE_DIM || s.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::Config("initial_sigma must list 15 non-negative values".into()));
            }
        }
        self.gravity()?;
        Ok(())
    }

    pub fn source(&self) -> Result<DataSource> {
        self.validate()?;
        if let Some(m) = &self.manifest {
            return Ok(DataSource::Manifest(m.clone()));
        }
        if let Some(p) = &self.sensor_params {
            return Ok(DataSource::Synthetic(
                p.iter().map(SensorParamsConfig::to_params).collect(),
            ));
        }
        let preset = self.preset.expect("validated");
        Ok(DataSource::Synthetic(preset_params(preset, self.sensors)))
    }

    /// `k_grid` clipped to the available sensors, sorted, deduplicated.
    pub fn k_values(&self, available: usize) -> Vec<usize> {
        let mut ks: Vec<usize> = self.k_grid.iter().map(|&k| k.min(available)).collect();
        ks.sort_unstable();
        ks.dedup();
        ks
    }
}

pub fn preset_params(preset: Preset, k: usize) -> Vec<SensorErrorParams> {
    use reference::*;
    let at = |range: [f64; 3], i: usize| match preset {
        Preset::Median => range[1],
        Preset::Spread if k == 1 => range[1],
        Preset::Spread => range[0] + (range[2] - range[0]) * i as f64 / (k - 1) as f64,
    };
    (0..k)
        .map(|i| {
            SensorErrorParams::from_rms(
                at(GYRO_BIAS_RMS_DEG, i),
                at(GYRO_NOISE_RMS_DEG, i),
                at(ACCEL_BIAS_RMS, i),
                at(ACCEL_NOISE_RMS, i),
                i as u32,
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exactly_one_source() {
        let mut c = ExperimentConfig::builtin();
        assert!(c.validate().is_ok());
        c.manifest = Some("m.json".into());
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        c.preset = None;
        assert!(c.validate().is_ok());
        c.manifest = None;
        assert!(c.validate().is_err());
    }

    #[test]
    fn grids_must_be_valid() {
        let mut c = ExperimentConfig::builtin();
        c.tau_grid.clear();
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::builtin();
        c.k_grid = vec![0];
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::builtin();
        c.duration_s = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let c = ExperimentConfig::builtin();
        let text = serde_json::to_string(&c).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
        assert!(serde_json::from_str::<ExperimentConfig>("{\"bogus\": 1}").is_err());
    }

    #[test]
    fn spread_preset_covers_range() {
        let p = preset_params(Preset::Spread, 10);
        let first = crate::units::rad_to_deg(p[0].bias_gyro.norm() / 3f64.sqrt());
        let last = crate::units::rad_to_deg(p[9].bias_gyro.norm() / 3f64.sqrt());
        assert!((first - 1.987).abs() < 1e-9 && (last - 2.343).abs() < 1e-9);
    }

    #[test]
    fn k_values_clip() {
        let c = ExperimentConfig::builtin();
        assert_eq!(c.k_values(10), vec![1, 4, 10]);
        assert_eq!(c.k_values(3), vec![1, 3]);
    }
}
