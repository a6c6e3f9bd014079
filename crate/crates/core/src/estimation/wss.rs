//! Wide-sense stationarity screen for a single residual series.
//!
//! Two checks, each run at level alpha/2 so the joint false-rejection rate on
//! white noise stays at or below alpha:
//! - mean drift: split-half mean difference over its pooled standard error,
//!   compared against the two-sided normal quantile;
//! - whiteness: Ljung–Box sum of squared normalized autocorrelations at lags
//!   1..L, compared against the chi-square quantile with L degrees of freedom.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::numeric;

pub const MIN_SAMPLES: usize = 100;
pub const DEFAULT_LAGS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WssVerdict {
    pub mean_drift_stat: f64,
    pub mean_drift_threshold: f64,
    pub acf_whiteness_stat: f64,
    pub acf_whiteness_threshold: f64,
    pub lags: usize,
    pub alpha: f64,
    pub passed: bool,
}

impl WssVerdict {
    pub fn mean_drift_passed(&self) -> bool {
        self.mean_drift_stat < self.mean_drift_threshold
    }

    pub fn whiteness_passed(&self) -> bool {
        self.acf_whiteness_stat < self.acf_whiteness_threshold
    }
}

pub fn wss_check(series: &[f64], alpha: f64) -> Result<WssVerdict> {
    wss_check_with_lags(series, alpha, DEFAULT_LAGS)
}

pub fn wss_check_with_lags(series: &[f64], alpha: f64, lags: usize) -> Result<WssVerdict> {
    let n = series.len();
    if n < MIN_SAMPLES {
        return Err(Error::invalid(format!(
            "stationarity check needs at least {MIN_SAMPLES} samples, got {n}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if lags == 0 || lags >= n / 2 {
        return Err(Error::invalid(format!("lag count {lags} out of range for {n} samples")));
    }
    let per_test = alpha / 2.0;

    let (first, second) = series.split_at(n / 2);
    let pooled_var = ((first.len() - 1) as f64 * numeric::sample_variance(first)
        + (second.len() - 1) as f64 * numeric::sample_variance(second))
        / (n - 2) as f64;
    let se = (pooled_var * (1.0 / first.len() as f64 + 1.0 / second.len() as f64)).sqrt();
    let diff = (numeric::mean(second) - numeric::mean(first)).abs();
    let mean_drift_stat = if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    let std_normal = Normal::new(0.0, 1.0).expect("standard normal");
    let mean_drift_threshold = std_normal.inverse_cdf(1.0 - per_test / 2.0);

    let m = numeric::mean(series);
    let centered: Vec<f64> = series.iter().map(|x| x - m).collect();
    let c0 = numeric::sum(centered.iter().map(|x| x * x));
    let nf = n as f64;
    let acf_whiteness_stat = if c0 > 0.0 {
        let q: f64 = (1..=lags)
            .map(|k| {
                let ck = numeric::sum(centered[k..].iter().zip(&centered).map(|(a, b)| a * b));
                let r = ck / c0;
                r * r / (nf - k as f64)
            })
            .sum();
        nf * (nf + 2.0) * q
    } else {
        0.0
    };
    let chi2 = ChiSquared::new(lags as f64).expect("positive degrees of freedom");
    let acf_whiteness_threshold = chi2.inverse_cdf(1.0 - per_test);

    let passed = mean_drift_stat < mean_drift_threshold && acf_whiteness_stat < acf_whiteness_threshold;
    Ok(WssVerdict {
        mean_drift_stat,
        mean_drift_threshold,
        acf_whiteness_stat,
        acf_whiteness_threshold,
        lags,
        alpha,
        passed,
    })
}
