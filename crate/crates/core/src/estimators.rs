//! Location estimators: the benchmark roster, median-of-means, the adaptive
//! robust estimator (ARE) and the central-root estimator used by the theory
//! checks.

use serde::{Deserialize, Serialize};

use crate::calibration::{self, CalibConfig, LocationStep};
use crate::dgp::Rng;
use crate::error::{Error, Result};
use crate::gnc::{self, GncConfig, Init};
use crate::loss::{LossParams, Shape};
use crate::stats;

/// How observations are dealt into blocks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Assignment {
    /// Contiguous runs in input order.
    Sequential,
    /// Values are sorted, shuffled with the seed, then split contiguously, so
    /// the partition does not depend on the input order.
    Shuffled(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockPlan {
    pub k: usize,
    pub assignment: Assignment,
}

impl BlockPlan {
    pub fn sequential(k: usize) -> Self {
        BlockPlan { k, assignment: Assignment::Sequential }
    }

    pub fn shuffled(k: usize, seed: u64) -> Self {
        BlockPlan { k, assignment: Assignment::Shuffled(seed) }
    }

    /// Splits `data` into `k` disjoint blocks of size ⌊n/k⌋, the first
    /// `n mod k` blocks taking one leftover each.
    pub fn blocks(&self, data: &[f64]) -> Result<Vec<Vec<f64>>> {
        let n = data.len();
        if self.k == 0 || self.k > n {
            return Err(Error::Argument(format!("block count k = {} must lie in [1, n = {n}]", self.k)));
        }
        let ordered: Vec<f64> = match self.assignment {
            Assignment::Sequential => data.to_vec(),
            Assignment::Shuffled(seed) => {
                let mut v = data.to_vec();
                v.sort_by(f64::total_cmp);
                Rng::new(seed).shuffle(&mut v);
                v
            }
        };
        let (base, extra) = (n / self.k, n % self.k);
        let mut out = Vec::with_capacity(self.k);
        let mut start = 0;
        for j in 0..self.k {
            let len = base + usize::from(j < extra);
            out.push(ordered[start..start + len].to_vec());
            start += len;
        }
        Ok(out)
    }
}

/// Median of block means.
pub fn mom(data: &[f64], plan: &BlockPlan) -> Result<f64> {
    let mut means: Vec<f64> = plan.blocks(data)?.iter().map(|b| stats::mean(b)).collect();
    Ok(stats::median_in_place(&mut means))
}

/// Multiplier in the confidence-driven block count ⌈c₀ ln(1/δ)⌉.
pub const DEFAULT_C0: f64 = 4.0;

/// ⌈c₀ ln(1/δ)⌉ when δ is given, ⌈ln n⌉ otherwise, clamped to [1, ⌊n/2⌋].
pub fn default_block_count(n: usize, delta: Option<f64>) -> usize {
    default_block_count_with(n, delta, DEFAULT_C0)
}

pub fn default_block_count_with(n: usize, delta: Option<f64>, c0: f64) -> usize {
    let raw = match delta {
        Some(d) => (c0 * (1.0 / d).ln()).ceil(),
        None => (n as f64).ln().ceil(),
    };
    let hi = (n / 2).max(1);
    (raw.max(1.0) as usize).clamp(1, hi)
}

/// Per-block outcome of [`are_detailed`]. `params` is `None` for blocks that
/// were constant and skipped calibration.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockFit {
    pub x: f64,
    pub params: Option<LossParams>,
    pub alternations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AreReport {
    pub estimate: f64,
    pub blocks: Vec<BlockFit>,
    /// Parameters fitted once on the whole sample when `shared_fit` is on.
    pub shared_params: Option<LossParams>,
}

/// Switches for [`are_detailed`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct AreOptions {
    /// Calibrate (α, c) once on the pooled sample instead of per block.
    pub shared_fit: bool,
    /// Pin the location step to the fitted shape instead of GNC continuation.
    pub pinned: bool,
}

fn constant_value(data: &[f64]) -> Option<f64> {
    let first = *data.first()?;
    data.iter().all(|v| *v == first).then_some(first)
}

/// Adaptive robust estimator: median of per-block alternating fits.
pub fn are(data: &[f64], plan: &BlockPlan, calib: &CalibConfig, gnc_config: &GncConfig) -> Result<f64> {
    are_detailed(data, plan, calib, gnc_config, AreOptions::default()).map(|r| r.estimate)
}

pub fn are_detailed(
    data: &[f64],
    plan: &BlockPlan,
    calib: &CalibConfig,
    gnc_config: &GncConfig,
    options: AreOptions,
) -> Result<AreReport> {
    let blocks = plan.blocks(data)?;
    if blocks.iter().any(|b| b.len() < 2) {
        return Err(Error::Argument(format!(
            "k = {} leaves blocks with fewer than 2 points (n = {})",
            plan.k,
            data.len()
        )));
    }
    let step = if options.pinned { LocationStep::Pinned } else { LocationStep::Gnc };
    let shared_params = match (options.shared_fit, constant_value(data)) {
        (true, None) => Some(calibration::alternate_fit_with(data, calib, gnc_config, step)?.params),
        _ => None,
    };
    let mut fits = Vec::with_capacity(blocks.len());
    for block in &blocks {
        let fit = if let Some(v) = constant_value(block) {
            BlockFit { x: v, params: None, alternations: 0, converged: true }
        } else if let Some(p) = shared_params {
            let alpha = p.alpha_value().expect("calibrated shape is finite");
            let r = match step {
                LocationStep::Gnc => gnc::gnc_irls(block, alpha, p.c(), gnc_config)?,
                LocationStep::Pinned => gnc::irls_fixed(block, alpha, p.c(), &median_init(gnc_config))?,
            };
            BlockFit { x: r.x, params: Some(p), alternations: 0, converged: r.converged }
        } else {
            let r = calibration::alternate_fit_with(block, calib, gnc_config, step)?;
            BlockFit { x: r.x, params: Some(r.params), alternations: r.alternations, converged: r.converged }
        };
        fits.push(fit);
    }
    let mut xs: Vec<f64> = fits.iter().map(|f| f.x).collect();
    Ok(AreReport { estimate: stats::median_in_place(&mut xs), blocks: fits, shared_params })
}

fn median_init(config: &GncConfig) -> GncConfig {
    GncConfig { init: Init::Median, ..*config }
}

/// Block plan and scale for the heavy-tailed regime.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HtPlan {
    pub k: usize,
    pub m: usize,
    pub c_m: f64,
    pub r_m: f64,
}

/// Confidence level each block targets before median boosting.
pub const HT_BLOCK_DELTA: f64 = 0.25;

/// k = ⌈8 ln(2/δ)⌉, m = ⌊n/k⌋, c_m = τ (v m / ln(2/δ₀))^{1/(1+ε)} with δ₀ = ¼,
/// and radius r_m = √c_m.
pub fn are_ht_plan(n: usize, delta: f64, eps_moment: f64, v_moment: f64, tau: f64) -> Result<HtPlan> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::Argument(format!("delta = {delta} must lie in (0, 1/2)")));
    }
    if !(eps_moment > 0.0 && eps_moment <= 1.0) || !(v_moment > 0.0) || !(tau > 0.0) {
        return Err(Error::Argument("need eps_moment in (0, 1], v_moment > 0, tau > 0".into()));
    }
    // Absorb the last-ulp error of the logarithm so exact integers do not round up.
    let k = (8.0 * (2.0 / delta).ln() - 1e-9).ceil() as usize;
    let m = n / k;
    if m < 2 {
        return Err(Error::Argument(format!("n = {n} gives blocks of size {m} < 2 for k = {k}")));
    }
    let c_m = tau * (v_moment * m as f64 / (2.0 / HT_BLOCK_DELTA).ln()).powf(1.0 / (1.0 + eps_moment));
    Ok(HtPlan { k, m, c_m, r_m: c_m.sqrt() })
}

/// c_m = m^{1/2+γ}, r_m = m^{γ/4}.
pub fn fv_tuning(m: usize, gamma_exp: f64) -> (f64, f64) {
    let m = m as f64;
    (m.powf(0.5 + gamma_exp), m.powf(gamma_exp / 4.0))
}

/// Number of grid points used to bracket the central root.
pub const ROOT_SCAN_POINTS: usize = 64;

/// ĝ(x) = −(1/m) Σ ψ(Xᵢ − x; α, c).
pub fn empirical_score(data: &[f64], x: f64, params: &LossParams) -> f64 {
    let k = params.kernel();
    -data.iter().map(|&v| k.drho(v - x)).sum::<f64>() / data.len() as f64
}

/// Zero of the empirical score on `[pilot − r_m, pilot + r_m]`.
///
/// The interval is scanned on a uniform grid; exactly one sign change must be
/// present, and it is refined by bisection to a width of 1e-12·c_m.
pub fn central_root(data: &[f64], alpha: f64, c_m: f64, pilot: f64, r_m: f64) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Argument("central root of empty data".into()));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!("central root needs alpha in (0, 1], got {alpha}")));
    }
    if !(r_m > 0.0 && r_m.is_finite()) || !pilot.is_finite() {
        return Err(Error::Argument(format!("radius r_m = {r_m} must be positive and the pilot finite")));
    }
    let params = LossParams::new(alpha, c_m)?;
    let g = |x: f64| empirical_score(data, x, &params);
    let (lo, hi) = (pilot - r_m, pilot + r_m);
    let grid: Vec<(f64, f64)> = (0..ROOT_SCAN_POINTS)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / (ROOT_SCAN_POINTS - 1) as f64;
            (x, g(x))
        })
        .collect();
    let mut brackets = Vec::new();
    for w in grid.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.1 == 0.0 {
            brackets.push((a, a));
        } else if a.1.signum() != b.1.signum() && b.1 != 0.0 {
            brackets.push((a, b));
        }
    }
    if let Some(last) = grid.last() {
        if last.1 == 0.0 {
            brackets.push((*last, *last));
        }
    }
    match brackets.len() {
        0 => return Err(Error::NoCentralRoot { lo, hi }),
        1 => {}
        sign_changes => return Err(Error::NonUniqueRoot { lo, hi, sign_changes }),
    }
    let ((mut a, mut ga), (mut b, _)) = brackets[0];
    let tol = 1e-12 * c_m;
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            return Ok(mid);
        }
        if gm.signum() == ga.signum() {
            a = mid;
            ga = gm;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// IRLS fixed point at a pinned shape, started from the median.
pub fn m_estimate_fixed(data: &[f64], loss_alpha: impl Into<Shape>, c: f64) -> Result<f64> {
    let config = GncConfig { init: Init::Median, ..GncConfig::default() };
    gnc::irls_fixed(data, loss_alpha, c, &config).map(|r| r.x)
}

/// Continuation cap for [`gnc_tls`].
pub const TLS_MAX_STEPS: usize = 1000;

/// Graduated non-convexity for the truncated quadratic min(½(ε/c̄)², ½).
///
/// The surrogate parameter μ starts at c̄²/(2 r²_max − c̄²), where the
/// surrogate is convex over the residual range, and is multiplied by
/// `gamma` until every weight is 0 or 1.
pub fn gnc_tls(data: &[f64], cbar: f64, gamma: f64) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Argument("gnc_tls of empty data".into()));
    }
    if !(cbar > 0.0 && cbar.is_finite()) || !(gamma > 1.0 && gamma.is_finite()) {
        return Err(Error::Argument(format!("need cbar > 0 and gamma > 1, got cbar = {cbar}, gamma = {gamma}")));
    }
    let c2 = cbar * cbar;
    let mut x = stats::mean(data);
    let r2_max = data.iter().map(|v| (v - x) * (v - x)).fold(0.0, f64::max);
    if r2_max <= c2 {
        return Ok(x);
    }
    let mut mu = c2 / (2.0 * r2_max - c2);
    let mut weights = vec![0.0; data.len()];
    for _ in 0..TLS_MAX_STEPS {
        let inner = mu / (mu + 1.0) * c2;
        let outer = (mu + 1.0) / mu * c2;
        let mut binary = true;
        for (w, v) in weights.iter_mut().zip(data) {
            let r2 = (v - x) * (v - x);
            *w = if r2 <= inner {
                1.0
            } else if r2 >= outer {
                0.0
            } else {
                binary = false;
                cbar * (mu * (mu + 1.0)).sqrt() / r2.sqrt() - mu
            };
        }
        let total: f64 = weights.iter().sum();
        if total > 0.0 {
            x = weights.iter().zip(data).map(|(w, v)| w * v).sum::<f64>() / total;
        }
        if binary {
            break;
        }
        mu *= gamma;
    }
    Ok(x)
}

/// Fixed robust losses available to [`m_estimate_fixed`] from the roster.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixedLoss {
    Cauchy,
    #[serde(rename = "gm")]
    GemanMcClure,
    Welsch,
}

impl FixedLoss {
    pub fn shape(self) -> Shape {
        match self {
            FixedLoss::Cauchy => Shape::Finite(0.0),
            FixedLoss::GemanMcClure => Shape::Finite(-2.0),
            FixedLoss::Welsch => Shape::NegInfinity,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FixedLoss::Cauchy => "cauchy",
            FixedLoss::GemanMcClure => "gm",
            FixedLoss::Welsch => "welsch",
        }
    }
}

/// Tuning regime of the central-root estimator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Regime {
    /// c_m = m^{1/2+γ}, r_m = m^{γ/4}, blocks as given.
    FiniteVariance { gamma_exp: f64 },
    /// Block count and scale from [`are_ht_plan`].
    HeavyTailed { delta: f64, eps_moment: f64, v_moment: f64, tau: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryTuning {
    #[serde(flatten)]
    pub regime: Regime,
    #[serde(default = "one")]
    pub alpha: f64,
}

fn one() -> f64 {
    1.0
}

impl TheoryTuning {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Argument(format!("alpha = {} must lie in (0, 1]", self.alpha)));
        }
        match self.regime {
            Regime::FiniteVariance { gamma_exp } if !(gamma_exp > 0.0) => {
                Err(Error::Argument(format!("gamma_exp = {gamma_exp} must be positive")))
            }
            Regime::HeavyTailed { delta, eps_moment, v_moment, tau } => {
                if !(delta > 0.0 && delta < 0.5) {
                    Err(Error::Argument(format!("delta = {delta} must lie in (0, 1/2)")))
                } else if !(eps_moment > 0.0 && eps_moment <= 1.0) || !(v_moment > 0.0) || !(tau > 0.0) {
                    Err(Error::Argument("need eps_moment in (0, 1], v_moment > 0, tau > 0".into()))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

/// Median of per-block central roots. In the finite-variance regime `k`
/// blocks are used (one if `None`); the heavy-tailed regime takes k from its plan.
pub fn central_root_estimate(data: &[f64], tuning: &TheoryTuning, k: Option<usize>) -> Result<f64> {
    tuning.validate()?;
    let (k, scale): (usize, Box<dyn Fn(usize) -> (f64, f64)>) = match tuning.regime {
        Regime::FiniteVariance { gamma_exp } => (k.unwrap_or(1), Box::new(move |m| fv_tuning(m, gamma_exp))),
        Regime::HeavyTailed { delta, eps_moment, v_moment, tau } => {
            let plan = are_ht_plan(data.len(), delta, eps_moment, v_moment, tau)?;
            (plan.k, Box::new(move |_| (plan.c_m, plan.r_m)))
        }
    };
    let blocks = BlockPlan::sequential(k).blocks(data)?;
    let mut roots = Vec::with_capacity(k);
    for block in &blocks {
        let (c_m, r_m) = scale(block.len());
        roots.push(central_root(block, tuning.alpha, c_m, stats::median(block), r_m)?);
    }
    Ok(stats::median_in_place(&mut roots))
}

fn default_gamma() -> f64 {
    1.4
}

/// A location estimator from the benchmark roster. Serialized with a `kind` tag.
///
/// `k = None` resolves to [`default_block_count`] for the sample size at hand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EstimatorSpec {
    /// Sample mean (the l2 estimator).
    Mean,
    FixedLoss { loss: FixedLoss, c: f64 },
    /// Alternating calibration with the shape pinned in the location step.
    Adapt,
    /// Alternating calibration with GNC continuation in the location step.
    GncAdapt,
    /// `cbar = None` uses 3·MAD of the sample.
    GncTls {
        #[serde(default)]
        cbar: Option<f64>,
        #[serde(default = "default_gamma")]
        gamma: f64,
    },
    Mom {
        #[serde(default)]
        k: Option<usize>,
        #[serde(default)]
        shuffle_seed: Option<u64>,
    },
    Are {
        #[serde(default)]
        k: Option<usize>,
        #[serde(default)]
        shuffle_seed: Option<u64>,
        #[serde(default)]
        shared_fit: bool,
        #[serde(skip)]
        calib: CalibConfig,
        #[serde(skip)]
        gnc: GncConfig,
    },
    CentralRoot {
        tuning: TheoryTuning,
        #[serde(default)]
        k: Option<usize>,
    },
    /// Reserved roster names without a definition; always unimplemented.
    Amb,
    GncAmb,
}

impl EstimatorSpec {
    pub fn are_default() -> Self {
        EstimatorSpec::Are {
            k: None,
            shuffle_seed: None,
            shared_fit: false,
            calib: CalibConfig::default(),
            gnc: GncConfig::default(),
        }
    }

    /// Identifier used in reports and benchmark output.
    pub fn name(&self) -> String {
        let with_k = |base: &str, k: &Option<usize>| match k {
            Some(k) => format!("{base}_k{k}"),
            None => base.to_string(),
        };
        match self {
            EstimatorSpec::Mean => "l2".into(),
            EstimatorSpec::FixedLoss { loss, .. } => loss.name().into(),
            EstimatorSpec::Adapt => "adapt".into(),
            EstimatorSpec::GncAdapt => "gnc_adapt".into(),
            EstimatorSpec::GncTls { .. } => "gnc_tls".into(),
            EstimatorSpec::Mom { k, .. } => with_k("mom", k),
            EstimatorSpec::Are { k, .. } => with_k("are", k),
            EstimatorSpec::CentralRoot { k, .. } => with_k("central_root", k),
            EstimatorSpec::Amb => "amb".into(),
            EstimatorSpec::GncAmb => "gnc_amb".into(),
        }
    }

    fn plan(n: usize, k: &Option<usize>, seed: &Option<u64>) -> BlockPlan {
        let k = k.unwrap_or_else(|| default_block_count(n.max(2), None));
        match seed {
            Some(s) => BlockPlan::shuffled(k, *s),
            None => BlockPlan::sequential(k),
        }
    }

    pub fn estimate(&self, data: &[f64]) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::Argument("cannot estimate a location from no data".into()));
        }
        match self {
            EstimatorSpec::Mean => Ok(stats::mean(data)),
            EstimatorSpec::FixedLoss { loss, c } => m_estimate_fixed(data, loss.shape(), *c),
            EstimatorSpec::Adapt | EstimatorSpec::GncAdapt => {
                if let Some(v) = constant_value(data) {
                    return Ok(v);
                }
                let step = if matches!(self, EstimatorSpec::Adapt) { LocationStep::Pinned } else { LocationStep::Gnc };
                calibration::alternate_fit_with(data, &CalibConfig::default(), &GncConfig::default(), step).map(|r| r.x)
            }
            EstimatorSpec::GncTls { cbar, gamma } => {
                let cbar = match cbar {
                    Some(c) => *c,
                    None => {
                        let s = 3.0 * stats::mad(data);
                        if s == 0.0 {
                            // At least half the sample sits on the median.
                            return Ok(stats::median(data));
                        }
                        s
                    }
                };
                gnc_tls(data, cbar, *gamma)
            }
            EstimatorSpec::Mom { k, shuffle_seed } => mom(data, &Self::plan(data.len(), k, shuffle_seed)),
            EstimatorSpec::Are { k, shuffle_seed, shared_fit, calib, gnc } => {
                let options = AreOptions { shared_fit: *shared_fit, pinned: false };
                are_detailed(data, &Self::plan(data.len(), k, shuffle_seed), calib, gnc, options).map(|r| r.estimate)
            }
            EstimatorSpec::CentralRoot { tuning, k } => central_root_estimate(data, tuning, *k),
            EstimatorSpec::Amb => Err(Error::Unimplemented("amb")),
            EstimatorSpec::GncAmb => Err(Error::Unimplemented("gnc_amb")),
        }
    }
}
