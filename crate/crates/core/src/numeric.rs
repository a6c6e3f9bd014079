//! Small summation and moment helpers shared by the estimators.
//!
//! Sums use Neumaier compensation so results do not depend on how a caller
//! chunks its data.

/// Compensated (Neumaier) sum.
pub fn sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut total = 0.0;
    let mut carry = 0.0;
    for x in values {
        let t = total + x;
        if total.abs() >= x.abs() {
            carry += (total - t) + x;
        } else {
            carry += (x - t) + total;
        }
        total = t;
    }
    total + carry
}

pub fn mean(values: &[f64]) -> f64 {
    sum(values.iter().copied()) / values.len() as f64
}

/// Unbiased (N-1) sample variance. Returns 0 for fewer than two values.
pub fn sample_variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    sum(values.iter().map(|x| (x - m) * (x - m))) / (values.len() - 1) as f64
}

pub fn sample_std(values: &[f64]) -> f64 {
    sample_variance(values).sqrt()
}

/// Lower-middle median. Input need not be sorted; NaNs are not expected.
pub fn lower_median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted[(sorted.len() - 1) / 2]
}

/// Least-squares slope of log10(y) against log10(x).
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.log10()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.log10()).collect();
    let mx = mean(&lx);
    let my = mean(&ly);
    let sxy = sum(lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)));
    let sxx = sum(lx.iter().map(|a| (a - mx) * (a - mx)));
    sxy / sxx
}
