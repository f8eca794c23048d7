//! Group-relative reward utilities: cross-improvement returns for the
//! answer/critique/rewrite protocol, sparse spike noise, robust advantage
//! normalization and the clipped surrogate objective.

use crate::calibration::CalibConfig;
use crate::dgp::Rng;
use crate::error::{Error, Result};
use crate::estimators::{self, BlockPlan};
use crate::gnc::GncConfig;
use crate::stats;

/// Scorer outputs for both agents' answers and rewrites.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DacrScores {
    pub s_ans_1: f64,
    pub s_ans_2: f64,
    pub s_rw_1: f64,
    pub s_rw_2: f64,
}

/// Returns `(R₁, R₂)` with `Rᵢ = s_rw_i + γ Δᵢ`, where agent i is credited
/// with its partner's improvement: Δ₁ = s_rw_2 − s_ans_2, Δ₂ = s_rw_1 − s_ans_1.
pub fn dacr_returns(scores: &DacrScores, gamma_dacr: f64) -> (f64, f64) {
    let delta_1 = scores.s_rw_2 - scores.s_ans_2;
    let delta_2 = scores.s_rw_1 - scores.s_ans_1;
    (scores.s_rw_1 + gamma_dacr * delta_1, scores.s_rw_2 + gamma_dacr * delta_2)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RewardGroup {
    pub group_id: usize,
    pub rewards: Vec<f64>,
}

/// Sparse one-sided Cauchy spikes on the group maximum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    pub p_group: f64,
    pub cauchy_scale: f64,
    pub spike_scale: f64,
    pub spike_clip: f64,
    /// +1 inflates the group maximum, −1 deflates it.
    pub sign: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec { p_group: 0.2, cauchy_scale: 1.0, spike_scale: 10.0, spike_clip: 10.0, sign: 1.0 }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_group) {
            return Err(Error::Argument(format!("p_group = {} must lie in [0, 1]", self.p_group)));
        }
        for (name, v) in [("cauchy_scale", self.cauchy_scale), ("spike_scale", self.spike_scale), ("spike_clip", self.spike_clip)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Argument(format!("{name} = {v} must be positive")));
            }
        }
        if self.sign != 1.0 && self.sign != -1.0 {
            return Err(Error::Argument(format!("sign = {} must be +1 or -1", self.sign)));
        }
        Ok(())
    }

    /// Spike added to a selected reward: sign · min(spike_scale·|C|, spike_clip).
    pub fn spike(&self, cauchy_draw: f64) -> f64 {
        self.sign * (self.spike_scale * cauchy_draw.abs()).min(self.spike_clip)
    }
}

/// Index of the largest reward, lowest index on ties.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        if best.is_none_or(|b| *v > values[b]) {
            best = Some(i);
        }
    }
    best
}

/// Corrupts each group's maximum with probability `p_group`.
///
/// Every group consumes exactly two uniforms (selection, then the Cauchy
/// draw), so the decision for one group does not shift the stream of the next.
pub fn inject_spike_noise(groups: &[RewardGroup], spec: &NoiseSpec, seed: u64) -> Result<Vec<RewardGroup>> {
    spec.validate()?;
    let mut rng = Rng::new(seed);
    let mut out = groups.to_vec();
    for g in &mut out {
        let selected = rng.uniform() < spec.p_group;
        let c = rng.cauchy(spec.cauchy_scale);
        if selected {
            if let Some(i) = argmax(&g.rewards) {
                g.rewards[i] += spec.spike(c);
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdvantageConfig {
    pub eps_floor: f64,
    pub gamma_dacr: f64,
    /// Block count for the robust center; `None` uses ⌈ln |batch|⌉.
    pub k: Option<usize>,
    pub calib: CalibConfig,
    pub gnc: GncConfig,
    pub clip_eps: f64,
    pub kl_beta: f64,
    /// Use 1.4826·MAD instead of the standard deviation as the scale.
    pub robust_scale: bool,
}

impl Default for AdvantageConfig {
    fn default() -> Self {
        AdvantageConfig {
            eps_floor: 1e-8,
            gamma_dacr: 1.0,
            k: None,
            calib: CalibConfig::default(),
            gnc: GncConfig::default(),
            clip_eps: 0.2,
            kl_beta: 0.0,
            robust_scale: false,
        }
    }
}

/// Normal-consistency factor for the median absolute deviation.
pub const MAD_TO_SIGMA: f64 = 1.4826;

/// Robust center of a batch: ARE with sequential blocks, falling back to a
/// single block when the batch holds fewer than 4k rewards.
pub fn robust_center(batch: &[f64], cfg: &AdvantageConfig) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Argument("empty reward batch".into()));
    }
    if batch.len() == 1 {
        return Ok(batch[0]);
    }
    let k = cfg.k.unwrap_or_else(|| estimators::default_block_count(batch.len(), None));
    let k = if batch.len() < 4 * k { 1 } else { k };
    estimators::are(batch, &BlockPlan::sequential(k), &cfg.calib, &cfg.gnc).or_else(|e| match e {
        // A constant batch has no scale to calibrate; its center is the constant.
        Error::Degenerate(_) => Ok(stats::median(batch)),
        other => Err(other),
    })
}

/// Aₖ = (Rₖ − μ̃) / (σ + ε) with μ̃ the robust center and σ the population
/// standard deviation of the batch.
pub fn robust_advantages(batch: &[f64], cfg: &AdvantageConfig) -> Result<Vec<f64>> {
    if !(cfg.eps_floor > 0.0) {
        return Err(Error::Argument(format!("eps_floor = {} must be positive", cfg.eps_floor)));
    }
    let center = robust_center(batch, cfg)?;
    let scale = if cfg.robust_scale { MAD_TO_SIGMA * stats::mad(batch) } else { stats::std_pop(batch) };
    let denom = scale + cfg.eps_floor;
    Ok(batch.iter().map(|r| (r - center) / denom).collect())
}

/// mean(min(ηA, clip(η, 1 − ε, 1 + ε) A)) − β mean(KL).
pub fn clipped_surrogate(ratios: &[f64], advantages: &[f64], clip_eps: f64, kl_values: &[f64], kl_beta: f64) -> Result<f64> {
    if ratios.len() != advantages.len() || ratios.len() != kl_values.len() {
        return Err(Error::Argument(format!(
            "length mismatch: {} ratios, {} advantages, {} KL values",
            ratios.len(),
            advantages.len(),
            kl_values.len()
        )));
    }
    if ratios.is_empty() {
        return Err(Error::Argument("surrogate of an empty batch".into()));
    }
    if ratios.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::Argument("probability ratios must be positive".into()));
    }
    let m = ratios.len() as f64;
    let surrogate: f64 = ratios
        .iter()
        .zip(advantages)
        .map(|(&eta, &a)| (eta * a).min(eta.clamp(1.0 - clip_eps, 1.0 + clip_eps) * a))
        .sum::<f64>()
        / m;
    Ok(surrogate - kl_beta * kl_values.iter().sum::<f64>() / m)
}
