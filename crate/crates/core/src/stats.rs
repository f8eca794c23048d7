//! Order statistics and moments shared by the estimators.
//!
//! Medians of even-length inputs are the midpoint of the two central order
//! statistics everywhere in the crate.

use crate::error::{Error, Result};

pub fn mean(data: &[f64]) -> f64 {
    data.iter().sum::<f64>() / data.len() as f64
}

/// Population standard deviation (divides by `n`).
pub fn std_pop(data: &[f64]) -> f64 {
    let mu = mean(data);
    let ss: f64 = data.iter().map(|x| (x - mu) * (x - mu)).sum();
    (ss / data.len() as f64).sqrt()
}

/// Sample median; midpoint of the central pair for even lengths.
///
/// Panics on empty input.
pub fn median(data: &[f64]) -> f64 {
    assert!(!data.is_empty(), "median of empty slice");
    let mut v = data.to_vec();
    median_in_place(&mut v)
}

/// Median that reorders `v` instead of allocating.
pub fn median_in_place(v: &mut [f64]) -> f64 {
    let n = v.len();
    let mid = n / 2;
    let (lower, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let hi = *m;
    if n % 2 == 1 {
        hi
    } else {
        let lo = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lo + hi)
    }
}

/// Median absolute deviation about the median (unscaled).
pub fn mad(data: &[f64]) -> f64 {
    let med = median(data);
    let mut dev: Vec<f64> = data.iter().map(|x| (x - med).abs()).collect();
    median_in_place(&mut dev)
}

/// Linear-interpolation quantile of an ascending sample.
///
/// Position `h = q (R - 1)`; returns `v[floor h] + frac(h) (v[ceil h] - v[floor h])`.
pub fn quantile_linear(sorted: &[f64], q: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::Argument("quantile of empty sample".into()));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Argument(format!("quantile level {q} outside [0, 1]")));
    }
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Ok(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}
