//! Monte Carlo checks of the large-sample behaviour of the central-root and
//! median-of-blocks estimators.
//!
//! Each check draws replication `r` with seed `seed + r` and returns the
//! observed statistics together with a pass/fail verdict against fixed bands.

use std::fmt;

use crate::dgp::{self, DgpSpec, Rng};
use crate::error::Result;
use crate::estimators::{self, Regime, TheoryTuning};
use crate::stats;

#[derive(Clone, Debug, PartialEq)]
pub struct TheoryReport {
    pub check: &'static str,
    pub stats: Vec<(&'static str, f64)>,
    pub pass: bool,
}

impl TheoryReport {
    pub fn stat(&self, name: &str) -> Option<f64> {
        self.stats.iter().find(|(k, _)| *k == name).map(|(_, v)| *v)
    }
}

impl fmt::Display for TheoryReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "check={}", self.check)?;
        for (k, v) in &self.stats {
            writeln!(f, "{k}={v:.16e}")?;
        }
        write!(f, "pass={}", self.pass)
    }
}

fn sample_variance(v: &[f64]) -> f64 {
    let m = stats::mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
}

/// Standard normal quantile (Acklam's rational approximation, |error| < 1.2e-9).
pub fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [-3.969683028665376e1, 2.209460984245205e2, -2.759285104469687e2, 1.383577518672690e2, -3.066479806614716e1, 2.506628277459239];
    const B: [f64; 5] = [-5.447609879822406e1, 1.615858368580409e2, -1.556989798598866e2, 6.680131188771972e1, -1.328068155288572e1];
    const C: [f64; 6] = [-7.784894002430293e-3, -3.223964580411365e-1, -2.400758277161838, -2.549732539343734, 4.374664141464968, 2.938163982698783];
    const D: [f64; 4] = [7.784695709041462e-3, 3.224671290700398e-1, 2.445134137142996, 3.754408661907416];
    let tail = |q: f64| {
        let q = (-2.0 * q.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5]) / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    if p < 0.02425 {
        tail(p)
    } else if p > 1.0 - 0.02425 {
        -tail(1.0 - p)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Correlation between sorted values and normal scores at (i − ½)/R.
pub fn qq_correlation(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let r = v.len() as f64;
    let z: Vec<f64> = (0..v.len()).map(|i| normal_quantile((i as f64 + 0.5) / r)).collect();
    let (mv, mz) = (stats::mean(&v), stats::mean(&z));
    let cov: f64 = v.iter().zip(&z).map(|(a, b)| (a - mv) * (b - mz)).sum();
    let sv: f64 = v.iter().map(|a| (a - mv) * (a - mv)).sum::<f64>().sqrt();
    let sz: f64 = z.iter().map(|b| (b - mz) * (b - mz)).sum::<f64>().sqrt();
    cov / (sv * sz)
}

fn fv(gamma_exp: f64) -> TheoryTuning {
    TheoryTuning { regime: Regime::FiniteVariance { gamma_exp }, alpha: 1.0 }
}

/// Single-block central root on N(1, 1): the variance of √m(X̃ − μ) should be
/// within [0.9, 1.1] and its normal Q–Q correlation at least 0.995.
pub fn clt(m: usize, gamma_exp: f64, reps: usize, seed: u64) -> Result<TheoryReport> {
    let spec = DgpSpec::gaussian();
    let tuning = fv(gamma_exp);
    let mut z = Vec::with_capacity(reps);
    for r in 0..reps as u64 {
        let x = dgp::sample(&spec, m, seed.wrapping_add(r))?;
        let est = estimators::central_root_estimate(&x, &tuning, Some(1))?;
        z.push((m as f64).sqrt() * (est - spec.mu_star()));
    }
    let var = sample_variance(&z);
    let qq = qq_correlation(&z);
    Ok(TheoryReport {
        check: "clt",
        stats: vec![("variance", var), ("qq_correlation", qq)],
        pass: (0.9..=1.1).contains(&var) && qq >= 0.995,
    })
}

/// Var(median of k block central roots) / Var(sample mean) on N(1, 1);
/// passes inside [1.3, 1.9] around the limit π/2.
pub fn efficiency(n: usize, k: usize, gamma_exp: f64, reps: usize, seed: u64) -> Result<TheoryReport> {
    let spec = DgpSpec::gaussian();
    let tuning = fv(gamma_exp);
    let mut robust = Vec::with_capacity(reps);
    let mut means = Vec::with_capacity(reps);
    for r in 0..reps as u64 {
        let x = dgp::sample(&spec, n, seed.wrapping_add(r))?;
        robust.push(estimators::central_root_estimate(&x, &tuning, Some(k))?);
        means.push(stats::mean(&x));
    }
    let ratio = sample_variance(&robust) / sample_variance(&means);
    Ok(TheoryReport {
        check: "efficiency",
        stats: vec![("variance_ratio", ratio), ("limit", std::f64::consts::FRAC_PI_2)],
        pass: (1.3..=1.9).contains(&ratio),
    })
}

/// Constant in the deviation radius C·(v ln(C₂/δ)/n)^{1/2}, fixed from a
/// calibration run at n = 2000.
pub const HT_BOUND_C: f64 = 2.0;
pub const HT_BOUND_C2: f64 = 1.0;
/// Second moment of Student-t with 4 degrees of freedom.
pub const T4_VARIANCE: f64 = 2.0;

/// Heavy-tailed plan on Student-t(4) at n and 4n: coverage of the deviation
/// radius must reach 1 − δ at both sizes and the 0.9-quantile of the absolute
/// error must shrink by a factor in [1.6, 2.4] (rate n^{−1/2}).
pub fn ht_bound(n: usize, delta: f64, reps: usize, seed: u64) -> Result<TheoryReport> {
    let spec = DgpSpec::student_t();
    let tuning = TheoryTuning {
        regime: Regime::HeavyTailed { delta, eps_moment: 1.0, v_moment: T4_VARIANCE, tau: 1.0 },
        alpha: 1.0,
    };
    let mut coverage = [0.0; 2];
    let mut q90 = [0.0; 2];
    for (i, size) in [n, 4 * n].into_iter().enumerate() {
        let radius = HT_BOUND_C * (T4_VARIANCE * (HT_BOUND_C2 / delta).ln() / size as f64).sqrt();
        let mut errs = Vec::with_capacity(reps);
        for r in 0..reps as u64 {
            let x = dgp::sample(&spec, size, seed.wrapping_add(r))?;
            errs.push((estimators::central_root_estimate(&x, &tuning, None)? - spec.mu_star()).abs());
        }
        coverage[i] = errs.iter().filter(|e| **e <= radius).count() as f64 / reps as f64;
        errs.sort_by(f64::total_cmp);
        q90[i] = stats::quantile_linear(&errs, 0.9)?;
    }
    let shrink = q90[0] / q90[1];
    Ok(TheoryReport {
        check: "ht-bound",
        stats: vec![
            ("coverage_n", coverage[0]),
            ("coverage_4n", coverage[1]),
            ("q90_n", q90[0]),
            ("q90_4n", q90[1]),
            ("shrink_factor", shrink),
        ],
        pass: coverage.iter().all(|c| *c >= 1.0 - delta) && (1.6..=2.4).contains(&shrink),
    })
}

/// Median of k synthetic block estimates, each within r of θ with probability
/// exactly ¾ and otherwise placed beyond θ + r (all failures on one side).
/// The failure rate must stay below e^{−k/8} plus 0.012 of sampling slack.
pub fn median_boost(k: usize, trials: usize, seed: u64) -> Result<TheoryReport> {
    let (theta, r) = (0.0, 1.0);
    let mut rng = Rng::new(seed);
    let mut failures = 0usize;
    let mut blocks = vec![0.0; k];
    for _ in 0..trials {
        for b in blocks.iter_mut() {
            let u = rng.uniform();
            let v = rng.uniform();
            *b = if u < 0.75 { theta + r * (2.0 * v - 1.0) } else { theta + r * (1.0 + v) };
        }
        if (stats::median_in_place(&mut blocks) - theta).abs() > r {
            failures += 1;
        }
    }
    let rate = failures as f64 / trials as f64;
    let bound = (-(k as f64) / 8.0).exp();
    Ok(TheoryReport {
        check: "median-boost",
        stats: vec![("failure_rate", rate), ("bound", bound)],
        pass: rate <= bound + 0.012,
    })
}
