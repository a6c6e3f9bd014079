//! Disk formats: array manifests (JSON), per-sensor recordings (CSV), dataset
//! summaries and report writers.
//!
//! Recording CSV header is `t,gx,gy,gz,ax,ay,az`; gyro columns carry the unit
//! declared in the manifest, accelerometer columns m/s². Values are written as
//! the shortest decimal that round-trips the f64.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{bias_from_residuals, rms};
use crate::ins_error_model::{Ellipsoid, Trajectory, STATE_NAMES};
use crate::numeric;
use crate::sensor_model::{residuals, ArrayRecording, GravityModel, ImuSample, SensorRecording, Vec3};
use crate::units::{AccelUnit, GyroUnit};

pub const RECORDING_HEADER: [&str; 7] = ["t", "gx", "gy", "gz", "ax", "ay", "az"];

/// Spacing slack accepted when reading timestamps from text, seconds.
pub const FILE_SPACING_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestUnits {
    pub gyro: String,
    pub accel: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorFileEntry {
    pub sensor_id: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayManifest {
    pub rate_hz: f64,
    pub sensor_files: Vec<SensorFileEntry>,
    pub gravity_mps2: f64,
    pub units: ManifestUnits,
}

/// Units and rate a recording file is read with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordingFormat {
    pub rate_hz: f64,
    pub gyro: GyroUnit,
    pub accel: AccelUnit,
}

impl ArrayManifest {
    pub fn new(rate_hz: f64, sensor_files: Vec<SensorFileEntry>, gravity_mps2: f64, gyro: GyroUnit) -> Self {
        Self {
            rate_hz,
            sensor_files,
            gravity_mps2,
            units: ManifestUnits {
                gyro: gyro.as_str().into(),
                accel: AccelUnit::MetersPerSec2.as_str().into(),
            },
        }
    }

    pub fn validate(&self) -> Result<RecordingFormat> {
        if self.sensor_files.is_empty() {
            return Err(Error::Config("manifest lists no sensor files".into()));
        }
        if !(self.rate_hz.is_finite() && self.rate_hz > 0.0) {
            return Err(Error::Config(format!(
                "manifest rate_hz must be positive, got {}",
                self.rate_hz
            )));
        }
        if !(self.gravity_mps2.is_finite() && self.gravity_mps2 >= 0.0) {
            return Err(Error::Config(format!(
                "manifest gravity must be non-negative, got {}",
                self.gravity_mps2
            )));
        }
        Ok(RecordingFormat {
            rate_hz: self.rate_hz,
            gyro: self.units.gyro.parse()?,
            accel: self.units.accel.parse()?,
        })
    }

    pub fn gravity(&self) -> Result<GravityModel> {
        GravityModel::new(self.gravity_mps2).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(self, path)
    }
}

/// Reads one recording CSV into SI units.
pub fn parse_recording_csv<R: Read>(reader: R, sensor_id: &str, format: &RecordingFormat) -> Result<SensorRecording> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let mut columns = [0usize; 7];
    for (slot, name) in columns.iter_mut().zip(RECORDING_HEADER) {
        *slot = headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            line: 1,
            message: format!(
                "missing column {name:?} (expected header {})",
                RECORDING_HEADER.join(",")
            ),
        })?;
    }

    let mut samples = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let mut values = [0.0f64; 7];
        for (v, (&col, name)) in values.iter_mut().zip(columns.iter().zip(RECORDING_HEADER)) {
            let field = record.get(col).ok_or_else(|| Error::Parse {
                line,
                message: format!("missing value for {name:?}"),
            })?;
            *v = field.parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("column {name:?}: {field:?} is not a number"),
            })?;
        }
        if let Some(prev) = samples.last().map(|s: &ImuSample| s.t) {
            if values[0] <= prev {
                return Err(Error::Data(format!(
                    "{sensor_id}: time not increasing at line {line} ({} after {prev})",
                    values[0]
                )));
            }
        }
        samples.push(ImuSample {
            t: values[0],
            gyro: Vec3::new(
                format.gyro.to_si(values[1]),
                format.gyro.to_si(values[2]),
                format.gyro.to_si(values[3]),
            ),
            accel: Vec3::new(values[4], values[5], values[6]),
        });
    }
    if samples.is_empty() {
        return Err(Error::Data(format!("{sensor_id}: recording has no rows")));
    }
    SensorRecording::with_spacing_tolerance(sensor_id, format.rate_hz, samples, FILE_SPACING_TOLERANCE)
}

pub fn write_recording_csv<W: Write>(writer: W, recording: &SensorRecording, gyro: GyroUnit) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| Error::Serialization(e.to_string());
    w.write_record(RECORDING_HEADER).map_err(csv_err)?;
    for s in recording.samples() {
        let row = [
            s.t,
            gyro.from_si(s.gyro.x),
            gyro.from_si(s.gyro.y),
            gyro.from_si(s.gyro.z),
            s.accel.x,
            s.accel.y,
            s.accel.z,
        ];
        w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Serialization(e.to_string()))?;
    Ok(())
}

/// Loads every recording listed in the manifest (paths relative to `base_dir`).
pub fn load_array(manifest: &ArrayManifest, base_dir: &Path) -> Result<ArrayRecording> {
    let format = manifest.validate()?;
    let recordings = manifest
        .sensor_files
        .par_iter()
        .map(|entry| {
            let path = base_dir.join(&entry.path);
            let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
            parse_recording_csv(file, &entry.sensor_id, &format)
        })
        .collect::<Result<Vec<_>>>()?;
    ArrayRecording::new(recordings)
}

/// Writes every recording as `<sensor_id>.csv` plus `manifest.json` into `dir`.
pub fn write_array(
    array: &ArrayRecording,
    gravity: &GravityModel,
    dir: &Path,
    gyro: GyroUnit,
) -> Result<ArrayManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(array.n_sensors());
    for rec in array.recordings() {
        let rel = PathBuf::from(format!("{}.csv", rec.sensor_id()));
        let path = dir.join(&rel);
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        write_recording_csv(BufWriter::new(file), rec, gyro)?;
        entries.push(SensorFileEntry {
            sensor_id: rec.sensor_id().to_string(),
            path: rel,
        });
    }
    let manifest = ArrayManifest::new(array.rate_hz(), entries, gravity.g_magnitude, gyro);
    manifest.write(&dir.join("manifest.json"))?;
    Ok(manifest)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeStats {
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

impl RangeStats {
    /// Min, lower-middle median and max.
    pub fn of(values: &[f64]) -> Self {
        Self {
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            median: numeric::lower_median(values),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    fn scaled(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            min: f(self.min),
            median: f(self.median),
            max: f(self.max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSummary {
    pub sensor_id: String,
    pub gyro_bias_rms: f64,
    pub gyro_noise_rms: f64,
    pub accel_bias_rms: f64,
    pub accel_noise_rms: f64,
}

/// Per-sensor bias/noise RMS and their ranges across the array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub gyro_unit: String,
    pub accel_unit: String,
    pub gravity_mps2: f64,
    pub sensors: Vec<SensorSummary>,
    pub gyro_bias: RangeStats,
    pub gyro_noise: RangeStats,
    pub accel_bias: RangeStats,
    pub accel_noise: RangeStats,
}

impl DatasetSummary {
    /// Same summary with gyro quantities in `unit`.
    pub fn in_gyro_unit(&self, unit: GyroUnit) -> Result<Self> {
        let current: GyroUnit = self.gyro_unit.parse()?;
        let conv = |v: f64| unit.from_si(current.to_si(v));
        let mut out = self.clone();
        for s in &mut out.sensors {
            s.gyro_bias_rms = conv(s.gyro_bias_rms);
            s.gyro_noise_rms = conv(s.gyro_noise_rms);
        }
        out.gyro_bias = self.gyro_bias.scaled(conv);
        out.gyro_noise = self.gyro_noise.scaled(conv);
        out.gyro_unit = unit.as_str().into();
        Ok(out)
    }
}

pub fn dataset_summary(array: &ArrayRecording, gravity: &GravityModel) -> Result<DatasetSummary> {
    if array.n_samples() < 2 {
        return Err(Error::invalid("dataset summary needs at least 2 samples per sensor"));
    }
    let sensors: Vec<SensorSummary> = array
        .recordings()
        .par_iter()
        .map(|rec| {
            let e = bias_from_residuals(&residuals(rec, gravity));
            let triad = |v: &[f64]| rms(v).expect("three axes");
            SensorSummary {
                sensor_id: rec.sensor_id().to_string(),
                gyro_bias_rms: triad(&e.bias.as_slice()[0..3]),
                gyro_noise_rms: triad(&e.noise_std.as_slice()[0..3]),
                accel_bias_rms: triad(&e.bias.as_slice()[3..6]),
                accel_noise_rms: triad(&e.noise_std.as_slice()[3..6]),
            }
        })
        .collect();
    let range = |f: fn(&SensorSummary) -> f64| RangeStats::of(&sensors.iter().map(f).collect::<Vec<_>>());
    Ok(DatasetSummary {
        gyro_unit: GyroUnit::RadPerSec.as_str().into(),
        accel_unit: AccelUnit::MetersPerSec2.as_str().into(),
        gravity_mps2: gravity.g_magnitude,
        gyro_bias: range(|s| s.gyro_bias_rms),
        gyro_noise: range(|s| s.gyro_noise_rms),
        accel_bias: range(|s| s.accel_bias_rms),
        accel_noise: range(|s| s.accel_noise_rms),
        sensors,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Csv,
    Json,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        }
    }
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::Config(format!("unknown output format {other:?}"))),
        }
    }
}

/// Named columns of equal length.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SeriesTable {
    pub columns: Vec<(String, Vec<f64>)>,
}

impl SeriesTable {
    pub fn push(&mut self, name: impl Into<String>, values: Vec<f64>) {
        self.columns.push((name.into(), values));
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.1.len())
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|c| c.0 == name).map(|c| c.1.as_slice())
    }

    fn check(&self) -> Result<()> {
        let n = self.rows();
        if let Some((name, _)) = self.columns.iter().find(|c| c.1.len() != n) {
            return Err(Error::Numerical(format!("column {name:?} length differs from {n}")));
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        self.check()?;
        let mut w = csv::Writer::from_writer(writer);
        let csv_err = |e: csv::Error| Error::Serialization(e.to_string());
        w.write_record(self.columns.iter().map(|c| c.0.as_str()))
            .map_err(csv_err)?;
        for r in 0..self.rows() {
            w.write_record(self.columns.iter().map(|c| c.1[r].to_string()))
                .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::Parse {
                line: 1,
                message: e.to_string(),
            })?
            .clone();
        let mut columns: Vec<(String, Vec<f64>)> = headers.iter().map(|h| (h.to_string(), Vec::new())).collect();
        for record in rdr.records() {
            let record = record.map_err(|e| Error::Parse {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line());
            for (col, field) in columns.iter_mut().zip(record.iter()) {
                col.1.push(field.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("{field:?} is not a number"),
                })?);
            }
        }
        Ok(Self { columns })
    }

    /// JSON object of column name → array, in column order.
    pub fn to_json(&self) -> Result<serde_json::Value> {
        self.check()?;
        let mut map = serde_json::Map::new();
        for (name, values) in &self.columns {
            map.insert(name.clone(), serde_json::to_value(values)?);
        }
        Ok(serde_json::Value::Object(map))
    }

    pub fn write(&self, path: &Path, format: ReportFormat) -> Result<()> {
        match format {
            ReportFormat::Csv => {
                let file = File::create(path).map_err(|e| Error::io(path, e))?;
                self.write_csv(BufWriter::new(file))
            }
            ReportFormat::Json => write_json(&self.to_json()?, path),
        }
    }
}

/// Anything that can be written as a report.
pub trait Report: Serialize {
    fn table(&self) -> SeriesTable;
}

pub fn write_report<R: Report>(report: &R, format: ReportFormat, destination: &Path) -> Result<()> {
    match format {
        ReportFormat::Json => write_json(report, destination),
        ReportFormat::Csv => report.table().write(destination, ReportFormat::Csv),
    }
}

pub fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

impl Report for DatasetSummary {
    fn table(&self) -> SeriesTable {
        let mut t = SeriesTable::default();
        let col = |f: fn(&SensorSummary) -> f64| self.sensors.iter().map(f).collect::<Vec<_>>();
        t.push("sensor_index", (0..self.sensors.len()).map(|i| i as f64).collect());
        t.push("gyro_bias_rms", col(|s| s.gyro_bias_rms));
        t.push("gyro_noise_rms", col(|s| s.gyro_noise_rms));
        t.push("accel_bias_rms", col(|s| s.accel_bias_rms));
        t.push("accel_noise_rms", col(|s| s.accel_noise_rms));
        t
    }
}

/// Mean states and 1-sigma uncertainties over time, keyed by state name.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryReport {
    pub table: SeriesTable,
}

impl TrajectoryReport {
    pub fn from_trajectory(traj: &Trajectory) -> Self {
        let mut table = SeriesTable::default();
        table.push("t", traj.times().collect());
        let vectors: Vec<_> = traj.states.iter().map(|s| s.to_vector()).collect();
        let sigmas: Vec<_> = traj.covariances.iter().map(|c| c.std_devs()).collect();
        for (i, name) in STATE_NAMES.iter().enumerate() {
            table.push(*name, vectors.iter().map(|v| v[i]).collect());
        }
        for (i, name) in STATE_NAMES.iter().enumerate() {
            table.push(format!("sigma_{name}"), sigmas.iter().map(|s| s[i]).collect());
        }
        Self { table }
    }
}

impl Serialize for TrajectoryReport {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.table.to_json().map_err(serde::ser::Error::custom)?.serialize(s)
    }
}

impl Report for TrajectoryReport {
    fn table(&self) -> SeriesTable {
        self.table.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidRecord {
    pub centroid: [f64; 3],
    pub semi_axes: [f64; 3],
    /// Row-major; column j is the direction of semi-axis j.
    pub orientation: [[f64; 3]; 3],
}

impl From<&Ellipsoid> for EllipsoidRecord {
    fn from(e: &Ellipsoid) -> Self {
        Self {
            centroid: e.centroid.into(),
            semi_axes: e.semi_axes.into(),
            orientation: std::array::from_fn(|r| std::array::from_fn(|c| e.orientation[(r, c)])),
        }
    }
}

impl Report for EllipsoidRecord {
    fn table(&self) -> SeriesTable {
        let mut t = SeriesTable::default();
        t.push("centroid", self.centroid.to_vec());
        t.push("semi_axes", self.semi_axes.to_vec());
        for c in 0..3 {
            t.push(format!("axis_{c}"), (0..3).map(|r| self.orientation[r][c]).collect());
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fmt(gyro: GyroUnit) -> RecordingFormat {
        RecordingFormat {
            rate_hz: 100.0,
            gyro,
            accel: AccelUnit::MetersPerSec2,
        }
    }

    #[test]
    fn single_row() {
        let csv = "t,gx,gy,gz,ax,ay,az\n0,0,0,0,0,0,-9.81\n";
        let r = parse_recording_csv(csv.as_bytes(), "s", &fmt(GyroUnit::RadPerSec)).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r.samples()[0].accel, Vec3::new(0.0, 0.0, -9.81));
    }

    #[test]
    fn gyro_degrees_are_converted() {
        let csv = "t,gx,gy,gz,ax,ay,az\r\n0,2.164,0,0,0,0,-9.81\r\n";
        let r = parse_recording_csv(csv.as_bytes(), "s", &fmt(GyroUnit::DegPerSec)).unwrap();
        assert!((r.samples()[0].gyro.x - 0.03777).abs() < 1e-5);
    }

    #[test]
    fn bad_value_names_line() {
        let csv = "t,gx,gy,gz,ax,ay,az\n0,0,0,0,abc,0,-9.81\n";
        match parse_recording_csv(csv.as_bytes(), "s", &fmt(GyroUnit::RadPerSec)) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("ax"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_column() {
        let csv = "t,gx,gy,gz,ax,ay\n0,0,0,0,0,0\n";
        assert!(matches!(
            parse_recording_csv(csv.as_bytes(), "s", &fmt(GyroUnit::RadPerSec)),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn non_monotone_time() {
        let csv = "t,gx,gy,gz,ax,ay,az\n0,0,0,0,0,0,0\n0.01,0,0,0,0,0,0\n0.005,0,0,0,0,0,0\n";
        assert!(matches!(
            parse_recording_csv(csv.as_bytes(), "s", &fmt(GyroUnit::RadPerSec)),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn unknown_unit_in_manifest() {
        let mut m = ArrayManifest::new(
            100.0,
            vec![SensorFileEntry {
                sensor_id: "a".into(),
                path: "a.csv".into(),
            }],
            9.81,
            GyroUnit::DegPerSec,
        );
        assert!(m.validate().is_ok());
        m.units.gyro = "rpm".into();
        assert!(matches!(m.validate(), Err(Error::Config(_))));
        m.units.gyro = "deg/s".into();
        m.sensor_files.clear();
        assert!(m.validate().is_err());
    }

    #[test]
    fn empty_table_has_header_only() {
        let mut t = SeriesTable::default();
        t.push("t", vec![]);
        t.push("p_n", vec![]);
        let mut out = Vec::new();
        t.write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "t,p_n\n");
    }

    #[test]
    fn range_stats_order() {
        let r = RangeStats::of(&[3.0, 1.0, 2.0, 5.0]);
        assert_eq!((r.min, r.median, r.max), (1.0, 2.0, 5.0));
    }
}
