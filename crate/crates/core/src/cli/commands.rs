use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::config::{DataSource, ExperimentConfig};
use crate::dataio::{
    dataset_summary, load_array, read_json, write_array, write_json, ArrayManifest, EllipsoidRecord, SeriesTable,
};
use crate::error::{Error, Result};
use crate::estimation::{
    axis_matrix, bias_from_residuals, bias_quality_score, compensate, density_grid, kde_density, running_std_profile,
    sort_by_quality, wss_check, EstimateReport, QualityScore, Vec6, WssVerdict, MIN_SAMPLES,
};
use crate::ins_error_model::{
    array_bias_average, array_q_scale, audit_printed_coefficients, block, build_system, ellipsoid_from_cov, phi_closed,
    propagate_discrete, propagate_mean, q_closed, q_numeric_oracle, CoefficientDiscrepancy, CovarianceMatrix,
    ErrorState, KinematicError, Mat15, NoiseInterpretation, NoiseSpectra, STATE_NAMES,
};
use crate::numeric;
use crate::sensor_model::{
    reference, residuals, simulate_array_with, ArrayRecording, GravityModel, ResidualSeries, SensorErrorParams,
    SimulationOptions, Vec3, AXIS_NAMES,
};
use crate::units::GyroUnit;

pub const ESTIMATE_DIR: &str = "estimate";
pub const PROPAGATE_DIR: &str = "propagate";
const REPORT_GYRO: GyroUnit = GyroUnit::DegPerSec;
const KDE_POINTS: usize = 200;
const KDE_PAD_BANDWIDTHS: f64 = 4.0;
const WSS_ALPHA: f64 = 0.01;

fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn table_path(dir: &Path, stem: &str, config: &ExperimentConfig) -> PathBuf {
    dir.join(format!("{stem}.{}", config.format.extension()))
}

fn gyro_scale(axis: usize) -> f64 {
    if axis < 3 {
        REPORT_GYRO.from_si(1.0)
    } else {
        1.0
    }
}

pub fn cmd_simulate(config: &ExperimentConfig) -> Result<()> {
    let params = match config.source()? {
        DataSource::Synthetic(p) => p,
        DataSource::Manifest(_) => {
            return Err(Error::Config(
                "simulate needs synthetic sensor parameters, not a manifest".into(),
            ))
        }
    };
    let gravity = config.gravity()?;
    let options = SimulationOptions {
        bias_random_walk: config.bias_random_walk,
    };
    let array = simulate_array_with(
        &params,
        &gravity,
        config.duration_s,
        config.rate_hz,
        config.seed,
        options,
    )?;
    ensure_dir(&config.out_dir)?;
    write_array(&array, &gravity, &config.out_dir, REPORT_GYRO)?;
    write_json(config, &config.out_dir.join("config.json"))
}

fn load_recordings(config: &ExperimentConfig) -> Result<(ArrayRecording, GravityModel)> {
    let path = match config.source()? {
        DataSource::Manifest(p) => p,
        DataSource::Synthetic(_) => config.out_dir.join("manifest.json"),
    };
    if !path.is_file() {
        return Err(Error::Config(format!(
            "no recordings at {}: run `imulab simulate` first or set `manifest`",
            path.display()
        )));
    }
    let manifest = ArrayManifest::read(&path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let array = load_array(&manifest, base)?;
    Ok((array, manifest.gravity()?))
}

/// Per-sensor estimates written by `estimate` and read by `propagate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatesFile {
    pub gyro_unit: String,
    pub gravity_mps2: f64,
    pub rate_hz: f64,
    pub n_samples: usize,
    /// Worst sensor first.
    pub sensors: Vec<SensorEstimateRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorEstimateRecord {
    pub sensor_id: String,
    pub quality_score: f64,
    pub bias_gyro: [f64; 3],
    pub bias_accel: [f64; 3],
    pub uncertainty_gyro: [f64; 3],
    pub uncertainty_accel: [f64; 3],
    pub noise_gyro: [f64; 3],
    pub noise_accel: [f64; 3],
}

impl SensorEstimateRecord {
    /// Sensor parameters for propagation; in-run intensities follow the
    /// reference rule (a tenth of the bias accumulated over the run length).
    fn to_params(&self, unit: GyroUnit) -> Result<SensorErrorParams> {
        let g = |v: [f64; 3]| Vec3::new(unit.to_si(v[0]), unit.to_si(v[1]), unit.to_si(v[2]));
        let bias_gyro = g(self.bias_gyro);
        let bias_accel = Vec3::from(self.bias_accel);
        let in_run = reference::IN_RUN_FRACTION / reference::RUN_DURATION_S.sqrt();
        let triad_rms = |v: &Vec3| v.norm() / 3f64.sqrt();
        let gyro_axes = g(self.noise_gyro);
        let accel_axes = Vec3::from(self.noise_accel);
        let params = SensorErrorParams {
            bias_gyro,
            bias_accel,
            sigma_gyro: triad_rms(&gyro_axes),
            sigma_accel: triad_rms(&accel_axes),
            sigma_gyro_axes: Some(gyro_axes),
            sigma_accel_axes: Some(accel_axes),
            sigma_gyro_bias: in_run * triad_rms(&bias_gyro),
            sigma_accel_bias: in_run * triad_rms(&bias_accel),
            ..SensorErrorParams::default()
        };
        params
            .validate()
            .map_err(|e| Error::Data(format!("estimates for {:?}: {e}", self.sensor_id)))?;
        Ok(params)
    }
}

#[derive(Debug, Clone, Serialize)]
struct WssRecord {
    sensor_id: String,
    axis: &'static str,
    verdict: WssVerdict,
}

pub fn cmd_estimate(config: &ExperimentConfig) -> Result<()> {
    let (array, gravity) = load_recordings(config)?;
    let n = array.n_samples();
    if n < 2 {
        return Err(Error::Data(format!(
            "estimation needs at least 2 samples per sensor, got {n}"
        )));
    }
    let summary = dataset_summary(&array, &gravity)?.in_gyro_unit(REPORT_GYRO)?;
    let (sorted, scores) = sort_by_quality(&array, &gravity)?;
    let raw: Vec<ResidualSeries> = sorted.recordings().par_iter().map(|r| residuals(r, &gravity)).collect();
    let estimates: Vec<_> = raw.iter().map(bias_from_residuals).collect();
    let comp: Vec<ResidualSeries> = raw.iter().zip(&estimates).map(|(r, e)| compensate(r, e)).collect();
    let ks = config.k_values(sorted.n_sensors());

    let dir = config.out_dir.join(ESTIMATE_DIR);
    ensure_dir(&dir)?;
    write_json(&summary, &dir.join("summary.json"))?;
    write_json(
        &estimates_file(&sorted, &gravity, &scores, &estimates),
        &dir.join("estimates.json"),
    )?;

    // K-averaged measurement (gravity kept) and bias-compensated residual per axis
    let static_f = gravity.static_specific_force();
    let truth = |axis: usize| if axis < 3 { 0.0 } else { static_f[axis - 3] };
    let average = |series: &[ResidualSeries], axis: usize, k: usize| -> Vec<f64> {
        let scale = gyro_scale(axis);
        (0..n)
            .map(|t| numeric::sum(series[..k].iter().map(|s| s.axes[axis][t])) / k as f64 * scale)
            .collect()
    };
    let mut raw_series = Vec::new();
    let mut comp_series = Vec::new();
    for &k in &ks {
        let r: Vec<Vec<f64>> = (0..6)
            .map(|a| average(&raw, a, k).into_iter().map(|v| v + truth(a)).collect())
            .collect();
        let c: Vec<Vec<f64>> = (0..6).map(|a| average(&comp, a, k)).collect();
        let mut table = SeriesTable::default();
        table.push("t", sorted.recordings()[0].samples().iter().map(|s| s.t).collect());
        for (a, name) in AXIS_NAMES.iter().enumerate() {
            table.push(*name, r[a].clone());
        }
        for (a, name) in AXIS_NAMES.iter().enumerate() {
            table.push(format!("{name}_comp"), c[a].clone());
        }
        table.write(&table_path(&dir, &format!("series_k{k}"), config), config.format)?;
        raw_series.push(r);
        comp_series.push(c);
    }

    for (stem, series) in [("kde_raw", &raw_series), ("kde_comp", &comp_series)] {
        let columns: Vec<Vec<(String, Vec<f64>)>> = (0..6)
            .into_par_iter()
            .map(|a| -> Result<Vec<(String, Vec<f64>)>> {
                let pooled: Vec<f64> = series.iter().flat_map(|s| s[a].iter().copied()).collect();
                let grid = density_grid(&pooled, KDE_POINTS, KDE_PAD_BANDWIDTHS);
                let mut cols = vec![(format!("{}_x", AXIS_NAMES[a]), grid.clone())];
                for (s, k) in series.iter().zip(&ks) {
                    cols.push((format!("{}_k{k}", AXIS_NAMES[a]), kde_density(&s[a], &grid, None)?));
                }
                Ok(cols)
            })
            .collect::<Result<_>>()?;
        let mut table = SeriesTable::default();
        for (name, values) in columns.into_iter().flatten() {
            table.push(name, values);
        }
        table.write(&table_path(&dir, stem, config), config.format)?;
    }

    let mut profile = SeriesTable::default();
    let ends = crate::estimation::log_window_ends(n);
    profile.push("n", ends.iter().map(|&w| w as f64).collect());
    profile.push("t", ends.iter().map(|&w| w as f64 / sorted.rate_hz()).collect());
    for &k in &ks {
        for (a, name) in AXIS_NAMES.iter().enumerate() {
            let scale = gyro_scale(a);
            let p = running_std_profile(&axis_matrix(&comp, a, k)?)?;
            let per_sensor_var = numeric::mean(
                &comp[..k]
                    .iter()
                    .map(|s| numeric::sample_variance(s.axis(a)))
                    .collect::<Vec<_>>(),
            );
            profile.push(
                format!("{name}_k{k}"),
                p.std_estimates.iter().map(|s| s * scale).collect(),
            );
            profile.push(
                format!("{name}_crlb_k{k}"),
                ends.iter()
                    .map(|&w| (per_sensor_var / (w * k) as f64).sqrt() * scale)
                    .collect(),
            );
        }
    }
    profile.write(&table_path(&dir, "running_std", config), config.format)?;

    let report = EstimateReport::build(&raw, &ks)?.in_gyro_unit(REPORT_GYRO);
    write_json(&report, &dir.join("evaluation.json"))?;

    let wss: Vec<WssRecord> = if n >= MIN_SAMPLES {
        comp.par_iter()
            .zip(sorted.recordings().par_iter())
            .map(|(c, rec)| -> Result<Vec<WssRecord>> {
                (0..6)
                    .map(|a| {
                        Ok(WssRecord {
                            sensor_id: rec.sensor_id().to_string(),
                            axis: AXIS_NAMES[a],
                            verdict: wss_check(c.axis(a), WSS_ALPHA)?,
                        })
                    })
                    .collect()
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect()
    } else {
        Vec::new()
    };
    write_json(&wss, &dir.join("wss.json"))
}

fn estimates_file(
    sorted: &ArrayRecording,
    gravity: &GravityModel,
    scores: &[QualityScore],
    estimates: &[crate::estimation::BiasEstimate],
) -> EstimatesFile {
    let triple = |v: &Vec6, first: usize| -> [f64; 3] { std::array::from_fn(|i| v[first + i] * gyro_scale(first + i)) };
    EstimatesFile {
        gyro_unit: REPORT_GYRO.as_str().into(),
        gravity_mps2: gravity.g_magnitude,
        rate_hz: sorted.rate_hz(),
        n_samples: sorted.n_samples(),
        sensors: scores
            .iter()
            .zip(estimates)
            .map(|(s, e)| SensorEstimateRecord {
                sensor_id: s.sensor_id.clone(),
                quality_score: s.score,
                bias_gyro: triple(&e.bias, 0),
                bias_accel: triple(&e.bias, 3),
                uncertainty_gyro: triple(&e.uncertainty, 0),
                uncertainty_accel: triple(&e.uncertainty, 3),
                noise_gyro: triple(&e.noise_std, 0),
                noise_accel: triple(&e.noise_std, 3),
            })
            .collect(),
    }
}

/// Headline numbers of a `propagate` run.
#[derive(Debug, Clone, Serialize)]
pub struct PropagationSummary {
    /// `estimates` when read from a previous `estimate` run, else `config`.
    pub source: String,
    pub noise_interpretation: NoiseInterpretation,
    pub gravity_mps2: f64,
    pub gyro_unit: String,
    pub k_max: usize,
    pub tau_final: f64,
    pub spectra_single: NoiseSpectra,
    pub spectra_array: NoiseSpectra,
    pub bias_single: [f64; 6],
    pub bias_array: [f64; 6],
    /// |mean error| of the array over the single sensor at τ_final; rows p, v, eps.
    pub mean_ratio: [[f64; 3]; 3],
    /// √(P_m,jj / P_s,jj) at τ_final; rows p, v, eps.
    pub uncertainty_ratio: [[f64; 3]; 3],
    /// Relative Frobenius gap of discrete propagation against the closed form at τ_final.
    pub discrete_vs_closed: f64,
    /// Relative Frobenius gap of the closed-form Q against quadrature at τ_final.
    pub q_vs_quadrature: f64,
    pub coefficient_discrepancies: Vec<CoefficientDiscrepancy>,
}

fn ranked_config_params(config: &ExperimentConfig) -> Result<Vec<SensorErrorParams>> {
    let mut params = match config.source()? {
        DataSource::Synthetic(p) => p,
        DataSource::Manifest(_) => {
            return Err(Error::Config(
                "propagate with a manifest needs estimates: run `imulab estimate` first".into(),
            ))
        }
    };
    let score = |p: &SensorErrorParams| {
        bias_quality_score(&Vec6::new(
            p.bias_gyro.x,
            p.bias_gyro.y,
            p.bias_gyro.z,
            p.bias_accel.x,
            p.bias_accel.y,
            p.bias_accel.z,
        ))
    };
    // stable: equal scores keep config order
    params.sort_by(|a, b| score(b).total_cmp(&score(a)));
    Ok(params)
}

fn initial_covariance(config: &ExperimentConfig) -> Result<CovarianceMatrix> {
    match &config.initial_sigma {
        None => Ok(CovarianceMatrix::zeros()),
        Some(s) => CovarianceMatrix::new(Mat15::from_diagonal(&crate::ins_error_model::Vec15::from_fn(|i, _| {
            s[i] * s[i]
        }))),
    }
}

fn relative_frobenius(a: &Mat15, b: &Mat15) -> f64 {
    let norm = b.norm();
    if norm == 0.0 {
        (a - b).norm()
    } else {
        (a - b).norm() / norm
    }
}

pub fn cmd_propagate(config: &ExperimentConfig) -> Result<()> {
    let estimates_path = config.out_dir.join(ESTIMATE_DIR).join("estimates.json");
    let (source, params, gravity, rate) = if estimates_path.is_file() {
        let file: EstimatesFile = read_json(&estimates_path)?;
        let unit: GyroUnit = file.gyro_unit.parse()?;
        let params = file
            .sensors
            .iter()
            .map(|s| s.to_params(unit))
            .collect::<Result<Vec<_>>>()?;
        if params.is_empty() {
            return Err(Error::Data(format!("{} lists no sensors", estimates_path.display())));
        }
        (
            "estimates",
            params,
            GravityModel::new(file.gravity_mps2).map_err(|e| Error::Data(e.to_string()))?,
            file.rate_hz,
        )
    } else {
        (
            "config",
            ranked_config_params(config)?,
            config.gravity()?,
            config.rate_hz,
        )
    };
    let sys = build_system(&gravity);
    let k_max = params.len();
    let p0 = initial_covariance(config)?;
    let worst = &params[0];
    let spectra_single = NoiseSpectra::from_params(worst, config.noise_interpretation, rate)?;
    let biases: Vec<Vec6> = params
        .iter()
        .map(|p| {
            Vec6::new(
                p.bias_gyro.x,
                p.bias_gyro.y,
                p.bias_gyro.z,
                p.bias_accel.x,
                p.bias_accel.y,
                p.bias_accel.z,
            )
        })
        .collect();
    let bias_array = array_bias_average(&biases)?;
    let split = |b: &Vec6| (Vec3::new(b[3], b[4], b[5]), Vec3::new(b[0], b[1], b[2]));
    let cases = [(1usize, split(&biases[0])), (k_max, split(&bias_array))];

    struct Point {
        mean: [KinematicError; 2],
        cov: [Mat15; 2],
    }
    let points: Vec<Point> = config
        .tau_grid
        .par_iter()
        .map(|&tau| -> Result<Point> {
            let phi = phi_closed(&sys, tau)?;
            let carried = phi * p0.matrix() * phi.transpose();
            let q_s = q_closed(&sys, &spectra_single, tau)?;
            let q_m = array_q_scale(&q_s, k_max)?;
            Ok(Point {
                mean: [
                    propagate_mean(&cases[0].1 .0, &cases[0].1 .1, &sys, tau)?,
                    propagate_mean(&cases[1].1 .0, &cases[1].1 .1, &sys, tau)?,
                ],
                cov: [carried + q_s.matrix(), carried + q_m.matrix()],
            })
        })
        .collect::<Result<_>>()?;

    let dir = config.out_dir.join(PROPAGATE_DIR);
    ensure_dir(&dir)?;
    let mut states = SeriesTable::default();
    let mut sigmas = SeriesTable::default();
    states.push("t", config.tau_grid.clone());
    sigmas.push("t", config.tau_grid.clone());
    for (c, (k, _)) in cases.iter().enumerate() {
        for (j, name) in STATE_NAMES[..9].iter().enumerate() {
            states.push(
                format!("{name}_k{k}"),
                points.iter().map(|p| p.mean[c].as_grid()[j / 3][j % 3].abs()).collect(),
            );
            sigmas.push(
                format!("sigma_{name}_k{k}"),
                points.iter().map(|p| p.cov[c][(j, j)].max(0.0).sqrt()).collect(),
            );
        }
    }
    states.write(&table_path(&dir, "error_states", config), config.format)?;
    sigmas.write(&table_path(&dir, "uncertainties", config), config.format)?;

    let last = points.last().expect("tau grid is non-empty");
    let tau_final = *config.tau_grid.last().expect("tau grid is non-empty");
    let (es, em) = (last.mean[0].as_grid(), last.mean[1].as_grid());
    let mean_ratio = std::array::from_fn(|r| std::array::from_fn(|c| em[r][c].abs() / es[r][c].abs()));
    let uncertainty_ratio = std::array::from_fn(|r| {
        std::array::from_fn(|c| (last.cov[1][(3 * r + c, 3 * r + c)] / last.cov[0][(3 * r + c, 3 * r + c)]).sqrt())
    });

    for (c, (k, _)) in cases.iter().enumerate() {
        let p_block = last.cov[c].fixed_view::<3, 3>(block::POS, block::POS).into_owned();
        let e = ellipsoid_from_cov(&p_block, last.mean[c].dp)?;
        write_json(&EllipsoidRecord::from(&e), &dir.join(format!("ellipsoid_k{k}.json")))?;
    }

    let (discrete_vs_closed, q_vs_quadrature) = if tau_final > 0.0 {
        let steps = ((tau_final * rate).round() as usize).max(1);
        let (ba, bg) = cases[0].1;
        let traj = propagate_discrete(
            &ErrorState::from_biases(ba, bg),
            &p0,
            &sys,
            &spectra_single,
            tau_final / steps as f64,
            steps,
        )?;
        let p_end = traj.covariances.last().expect("n+1 covariances").matrix();
        let q = q_closed(&sys, &spectra_single, tau_final)?;
        let oracle = q_numeric_oracle(&sys, &spectra_single, tau_final, config.quadrature_steps)?;
        (
            relative_frobenius(p_end, &last.cov[0]),
            relative_frobenius(q.matrix(), oracle.matrix()),
        )
    } else {
        (0.0, 0.0)
    };

    let to_report = |b: &Vec6| -> [f64; 6] { std::array::from_fn(|i| b[i] * gyro_scale(i)) };
    let summary = PropagationSummary {
        source: source.into(),
        noise_interpretation: config.noise_interpretation,
        gravity_mps2: gravity.g_magnitude,
        gyro_unit: REPORT_GYRO.as_str().into(),
        k_max,
        tau_final,
        spectra_single,
        spectra_array: spectra_single.scaled(1.0 / k_max as f64),
        bias_single: to_report(&biases[0]),
        bias_array: to_report(&bias_array),
        mean_ratio,
        uncertainty_ratio,
        discrete_vs_closed,
        q_vs_quadrature,
        coefficient_discrepancies: audit_printed_coefficients(&sys, config.quadrature_steps)?,
    };
    write_json(&summary, &dir.join("propagation.json"))
}

fn read_input(path: &Path) -> Result<Value> {
    if !path.is_file() {
        return Err(Error::Config(format!(
            "missing input {}: run `imulab estimate` and `imulab propagate` first",
            path.display()
        )));
    }
    read_json(path)
}

pub fn cmd_report(config: &ExperimentConfig) -> Result<()> {
    let out = &config.out_dir;
    let summary = read_input(&out.join(ESTIMATE_DIR).join("summary.json"))?;
    let evaluation = read_input(&out.join(ESTIMATE_DIR).join("evaluation.json"))?;
    let propagation = read_input(&out.join(PROPAGATE_DIR).join("propagation.json"))?;
    let bundle = json!({
        "software": { "name": env!("CARGO_PKG_NAME"), "version": env!("CARGO_PKG_VERSION") },
        "gravity_mps2": summary["gravity_mps2"],
        "noise_interpretation": propagation["noise_interpretation"],
        "config": serde_json::to_value(config)?,
        "dataset_summary": summary,
        "evaluation": {
            "gyro_unit": evaluation["gyro_unit"],
            "n_time": evaluation["n_time"],
            "gyro_matrix": evaluation["gyro_matrix"],
            "accel_matrix": evaluation["accel_matrix"],
        },
        "db_ratios": { "gyro": evaluation["gyro_db"], "accel": evaluation["accel_db"] },
        "propagation": {
            "k_max": propagation["k_max"],
            "tau_final": propagation["tau_final"],
            "mean_ratio": propagation["mean_ratio"],
            "uncertainty_ratio": propagation["uncertainty_ratio"],
            "discrete_vs_closed": propagation["discrete_vs_closed"],
            "q_vs_quadrature": propagation["q_vs_quadrature"],
        },
        "q_coefficient_discrepancies": propagation["coefficient_discrepancies"],
    });
    write_json(&bundle, &out.join("report.json"))
}
