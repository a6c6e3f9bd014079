//! Unit tags and the only deg <-> rad conversions in the crate.
//!
//! Everything inside the library is SI (rad/s, m/s²). Files and CLI output may
//! carry gyro quantities in deg/s; they pass through here on the way in or out.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GyroUnit {
    #[serde(rename = "deg/s")]
    DegPerSec,
    #[serde(rename = "rad/s")]
    RadPerSec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AccelUnit {
    #[serde(rename = "m/s2")]
    MetersPerSec2,
}

impl GyroUnit {
    pub fn as_str(self) -> &'static str {
        match self {
            GyroUnit::DegPerSec => "deg/s",
            GyroUnit::RadPerSec => "rad/s",
        }
    }

    /// Converts a value expressed in this unit into rad/s.
    pub fn to_si(self, value: f64) -> f64 {
        match self {
            GyroUnit::DegPerSec => deg_to_rad(value),
            GyroUnit::RadPerSec => value,
        }
    }

    /// Converts a rad/s value into this unit.
    pub fn from_si(self, value: f64) -> f64 {
        match self {
            GyroUnit::DegPerSec => rad_to_deg(value),
            GyroUnit::RadPerSec => value,
        }
    }
}

impl AccelUnit {
    pub fn as_str(self) -> &'static str {
        "m/s2"
    }
}

impl FromStr for GyroUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "deg/s" => Ok(GyroUnit::DegPerSec),
            "rad/s" => Ok(GyroUnit::RadPerSec),
            other => Err(Error::Config(format!(
                "unknown gyro unit {other:?} (expected \"deg/s\" or \"rad/s\")"
            ))),
        }
    }
}

impl FromStr for AccelUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "m/s2" => Ok(AccelUnit::MetersPerSec2),
            other => Err(Error::Config(format!(
                "unknown accel unit {other:?} (expected \"m/s2\")"
            ))),
        }
    }
}

impl fmt::Display for GyroUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn deg_to_rad(deg: f64) -> f64 {
    deg.to_radians()
}

pub fn rad_to_deg(rad: f64) -> f64 {
    rad.to_degrees()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_unit_is_config_error() {
        let err = "deg/h".parse::<GyroUnit>().unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!("m/s^2".parse::<AccelUnit>().is_err());
    }

    #[test]
    fn deg_per_sec_scaling() {
        let r = GyroUnit::DegPerSec.to_si(2.164);
        assert!((r - 0.037_768_9).abs() < 1e-6);
        assert_eq!(GyroUnit::RadPerSec.to_si(0.5), 0.5);
        assert!((GyroUnit::DegPerSec.from_si(std::f64::consts::PI) - 180.0).abs() < 1e-12);
    }
}
