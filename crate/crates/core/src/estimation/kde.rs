//! Gaussian kernel density estimation.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numeric;

/// Silverman-style rule of thumb, h = 1.06·s·n^(-1/5).
///
/// A zero-spread sample falls back to a tiny positive width relative to its
/// magnitude so the density is still defined (a near-delta at the value).
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let s = numeric::sample_std(samples);
    if s > 0.0 {
        1.06 * s * n.powf(-0.2)
    } else {
        1e-6 * numeric::mean(samples).abs().max(1.0)
    }
}

/// Gaussian-kernel density of `samples` evaluated at each of `eval_points`.
pub fn kde_density(samples: &[f64], eval_points: &[f64], bandwidth: Option<f64>) -> Result<Vec<f64>> {
    if samples.len() < 2 {
        return Err(Error::invalid(format!(
            "kde needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    let h = match bandwidth {
        Some(h) if h.is_finite() && h > 0.0 => h,
        Some(h) => return Err(Error::invalid(format!("bandwidth must be positive, got {h}"))),
        None => silverman_bandwidth(samples),
    };
    let norm = 1.0 / (samples.len() as f64 * h * (2.0 * PI).sqrt());
    Ok(eval_points
        .iter()
        .map(|&x| {
            let acc = numeric::sum(samples.iter().map(|&s| {
                let u = (x - s) / h;
                (-0.5 * u * u).exp()
            }));
            acc * norm
        })
        .collect())
}

/// `points` evenly spaced values covering the sample range padded by `pad` bandwidths.
pub fn density_grid(samples: &[f64], points: usize, pad: f64) -> Vec<f64> {
    let h = silverman_bandwidth(samples);
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min) - pad * h;
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max) + pad * h;
    let points = points.max(2);
    let step = (hi - lo) / (points - 1) as f64;
    (0..points).map(|i| lo + step * i as f64).collect()
}
