use imulab::cli::{preset_params, Preset};
use imulab::dataio::{
    dataset_summary, load_array, read_json, write_array, write_json, write_report, ArrayManifest, DatasetSummary,
    EllipsoidRecord, ReportFormat, TrajectoryReport,
};
use imulab::ins_error_model::{
    build_system, ellipsoid_from_cov, propagate_discrete, CovarianceMatrix, ErrorState, NoiseSpectra,
};
use imulab::sensor_model::{simulate_array, GravityModel, Mat3, SensorErrorParams, Vec3};
use imulab::units::GyroUnit;

fn gravity() -> GravityModel {
    GravityModel::new(9.81).unwrap()
}

#[test]
fn spread_summary_recovers_bias_range() {
    let g = gravity();
    let array = simulate_array(&preset_params(Preset::Spread, 10), &g, 100.0, 100.0, 21).unwrap();
    let s = dataset_summary(&array, &g)
        .unwrap()
        .in_gyro_unit(GyroUnit::DegPerSec)
        .unwrap();
    // bias estimate standard error is about 0.038/√10⁴ deg/s; allow 5 of those
    let tol = 5.0 * 0.038 / 100.0;
    assert!((s.gyro_bias.min - 1.987).abs() < tol, "{:?}", s.gyro_bias);
    assert!((s.gyro_bias.max - 2.343).abs() < tol, "{:?}", s.gyro_bias);
    // lower-middle of ten linearly spaced targets is the fifth
    let fifth = 1.987 + (2.343 - 1.987) * 4.0 / 9.0;
    assert!((s.gyro_bias.median - fifth).abs() < tol);
    assert!((s.gyro_noise.median - 0.033).abs() < 0.002);
    assert_eq!(s.gyro_unit, "deg/s");
}

#[test]
fn perfect_sensor_summary_is_zero() {
    let g = gravity();
    let array = simulate_array(&[SensorErrorParams::default()], &g, 1.0, 100.0, 0).unwrap();
    let s = dataset_summary(&array, &g).unwrap();
    let one = &s.sensors[0];
    assert_eq!([one.gyro_bias_rms, one.gyro_noise_rms], [0.0, 0.0]);
    // accel z residual is exact up to the last bit of g
    assert!(one.accel_bias_rms < 1e-15 && one.accel_noise_rms < 1e-15);
}

#[test]
fn dataset_summary_json_round_trip_is_bit_exact() {
    let g = gravity();
    let array = simulate_array(&preset_params(Preset::Spread, 4), &g, 2.0, 100.0, 3).unwrap();
    let s = dataset_summary(&array, &g).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("summary.json");
    write_report(&s, ReportFormat::Json, &path).unwrap();
    let back: DatasetSummary = read_json(&path).unwrap();
    assert_eq!(back, s);
    let bits = |d: &DatasetSummary| -> Vec<u64> {
        d.sensors
            .iter()
            .flat_map(|x| [x.gyro_bias_rms, x.gyro_noise_rms, x.accel_bias_rms, x.accel_noise_rms])
            .map(f64::to_bits)
            .collect()
    };
    assert_eq!(bits(&back), bits(&s));
}

#[test]
fn degree_files_round_trip_within_one_ulp() {
    let g = gravity();
    let array = simulate_array(&preset_params(Preset::Median, 2), &g, 1.0, 100.0, 5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_array(&array, &g, dir.path(), GyroUnit::DegPerSec).unwrap();
    let manifest = ArrayManifest::read(&dir.path().join("manifest.json")).unwrap();
    assert_eq!(manifest.units.gyro, "deg/s");
    let back = load_array(&manifest, dir.path()).unwrap();
    for (a, b) in array.recordings().iter().zip(back.recordings()) {
        for (x, y) in a.samples().iter().zip(b.samples()) {
            assert_eq!(x.accel, y.accel);
            for i in 0..3 {
                let ulps = (x.gyro[i].to_bits() as i64 - y.gyro[i].to_bits() as i64).abs();
                assert!(ulps <= 1, "{} vs {}", x.gyro[i], y.gyro[i]);
            }
        }
    }
}

#[test]
fn ellipsoid_json_schema() {
    let e = ellipsoid_from_cov(
        &Mat3::from_diagonal(&Vec3::new(4.0, 1.0, 0.25)),
        Vec3::new(1.0, 0.0, 0.0),
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e.json");
    write_json(&EllipsoidRecord::from(&e), &path).unwrap();
    let v: serde_json::Value = read_json(&path).unwrap();
    let obj = v.as_object().unwrap();
    let mut keys: Vec<&str> = obj.keys().map(String::as_str).collect();
    keys.sort_unstable();
    assert_eq!(keys, ["centroid", "orientation", "semi_axes"]);
    assert_eq!(v["semi_axes"], serde_json::json!([2.0, 1.0, 0.5]));
}

#[test]
fn trajectory_report_columns_and_rows() {
    let sys = build_system(&gravity());
    let traj = propagate_discrete(
        &ErrorState::from_biases(Vec3::new(0.0, 0.0, 0.1), Vec3::zeros()),
        &CovarianceMatrix::zeros(),
        &sys,
        &NoiseSpectra::default(),
        0.5,
        4,
    )
    .unwrap();
    let report = TrajectoryReport::from_trajectory(&traj);
    assert_eq!(report.table.columns.len(), 31);
    assert_eq!(report.table.rows(), 5);
    assert_eq!(report.table.get("p_d").unwrap()[4], 0.5 * 0.1 * 4.0);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("traj.csv");
    write_report(&report, ReportFormat::Csv, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("t,p_n,p_e,p_d,"));
    assert_eq!(text.lines().count(), 6);
}

/// Runs only when a real recording set is provided through `IMULAB_REAL_DATA`
/// (path to its manifest.json).
#[test]
fn real_dataset_noise_median() {
    let Ok(path) = std::env::var("IMULAB_REAL_DATA") else {
        eprintln!("IMULAB_REAL_DATA not set; skipping real-data check");
        return;
    };
    let path = std::path::PathBuf::from(path);
    let manifest = ArrayManifest::read(&path).unwrap();
    let array = load_array(&manifest, path.parent().unwrap()).unwrap();
    let g = manifest.gravity().unwrap();
    let s = dataset_summary(&array, &g)
        .unwrap()
        .in_gyro_unit(GyroUnit::DegPerSec)
        .unwrap();
    assert!((s.gyro_noise.median - 0.033).abs() <= 0.002, "{:?}", s.gyro_noise);
}
