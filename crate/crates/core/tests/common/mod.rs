//! Test-side oracles built without the library's closed forms.
#![allow(dead_code)]

use nalgebra::{DMatrix, SMatrix};

pub type M15 = SMatrix<f64, 15, 15>;

/// Error dynamics matrix written out entry by entry for gravity `g` (NED).
pub fn f_oracle(g: f64) -> M15 {
    let mut f = M15::zeros();
    for i in 0..3 {
        f[(i, 3 + i)] = 1.0; // dp/dt = dv
        f[(3 + i, 9 + i)] = 1.0; // accel bias into dv
        f[(6 + i, 12 + i)] = 1.0; // gyro bias into eps
    }
    // dv += g^n × eps with g^n = (0, 0, g)
    f[(3, 7)] = -g;
    f[(4, 6)] = g;
    f
}

/// Truncated exponential series Σ (Fτ)^k / k!, exact for nilpotent F of index ≤ `terms`.
pub fn phi_series(f: &M15, tau: f64, terms: usize) -> M15 {
    let mut out = M15::identity();
    let mut term = M15::identity();
    for k in 1..terms {
        term = term * f * (tau / k as f64);
        out += term;
    }
    out
}

/// Diagonal of G·S·Gᵀ for spectra (s_a, s_g, s_ab, s_gb) driving v, eps, ba, bg.
pub fn driving(s: [f64; 4]) -> M15 {
    let mut d = M15::zeros();
    for (j, v) in s.iter().enumerate() {
        for i in 0..3 {
            d[(3 * (j + 1) + i, 3 * (j + 1) + i)] = *v;
        }
    }
    d
}

/// ∫₀^τ Φ(s)·D·Φ(s)ᵀ ds by composite 5-point Gauss–Legendre, exact for the
/// degree-6 polynomial integrand up to rounding.
pub fn q_gauss(f: &M15, s: [f64; 4], tau: f64, panels: usize) -> M15 {
    let r = (10.0f64 / 7.0).sqrt();
    let (x1, x2) = ((5.0 - 2.0 * r).sqrt() / 3.0, (5.0 + 2.0 * r).sqrt() / 3.0);
    let (w1, w2) = (
        (322.0 + 13.0 * 70f64.sqrt()) / 900.0,
        (322.0 - 13.0 * 70f64.sqrt()) / 900.0,
    );
    let nodes = [(0.0, 128.0 / 225.0), (-x1, w1), (x1, w1), (-x2, w2), (x2, w2)];
    let d = driving(s);
    let h = tau / panels as f64;
    let mut acc = M15::zeros();
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * h;
        for (x, w) in nodes {
            let phi = phi_series(f, mid + 0.5 * h * x, 5);
            acc += phi * d * phi.transpose() * (w * 0.5 * h);
        }
    }
    acc
}

pub fn rel_frobenius(a: &M15, b: &M15) -> f64 {
    (a - b).norm() / b.norm()
}

/// Least-squares slope of ln y against ln x.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Two-pass unbiased variance.
pub fn variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
}

/// Growing-window std of the mean computed directly from its definition.
pub fn running_std_direct(series: &[f64], n: usize) -> f64 {
    let centre = series.iter().sum::<f64>() / series.len() as f64;
    let w: Vec<f64> = series[..n].iter().map(|x| x - centre).collect();
    (variance(&w) / n as f64).sqrt()
}

pub fn column_mean(m: &DMatrix<f64>, row: usize) -> f64 {
    m.row(row).iter().sum::<f64>() / m.ncols() as f64
}
