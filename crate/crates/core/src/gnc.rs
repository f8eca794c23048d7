//! Graduated non-convexity IRLS for scalar location.
//!
//! The target loss ρ(·; α, c) is reached through a family of surrogates
//! ρ(·; f(β, α), c), where the shape mapping f starts at the convex quadratic
//! (f = 2) and moves to α as the continuation parameter β is stepped. At each
//! β the location is refined by iteratively reweighted least squares:
//! weights ψ(ε)/ε, clipped to [δ, 1], feed a closed-form weighted mean.
//!
//! Weights are normalized by c², so w̃(0) = 1 for every scale and the clip
//! range [δ, 1] means the same thing regardless of c. The weighted mean is
//! invariant to a uniform rescaling of the weights, so the update is unchanged.

use crate::error::{Error, Result};
use crate::loss::{Kernel, LossParams, Shape};
use crate::stats;

/// Required closeness of the first surrogate to the quadratic: |f(β₀, α) − 2| ≤ 1e-2.
pub const BETA0_GAP: f64 = 1e-2;

/// Shape mapping f(β, α) interpolating between 2 and α.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ShapeMapKind {
    /// f₁ = 2 − (2 − α)/β^p, β decreasing from ∞ to 1.
    Polynomial { p: f64 },
    /// f₂ = α e^(−1/β) + 2 (1 − e^(−1/β)), β increasing from 0⁺ to ∞.
    Exponential,
    /// f₃ = (2 + α β^q)/(1 + β^q), β increasing from 0⁺ to ∞.
    Rational { q: f64 },
}

impl ShapeMapKind {
    fn validate(&self) -> Result<()> {
        match *self {
            ShapeMapKind::Polynomial { p } if !(p > 0.0 && p.is_finite()) => {
                Err(Error::Config(format!("polynomial exponent p = {p} must be positive")))
            }
            ShapeMapKind::Rational { q } if !(q > 0.0 && q.is_finite()) => {
                Err(Error::Config(format!("rational exponent q = {q} must be positive")))
            }
            _ => Ok(()),
        }
    }

    fn check_beta(&self, beta: f64) -> Result<()> {
        let ok = match self {
            ShapeMapKind::Polynomial { .. } => beta >= 1.0,
            _ => beta > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("continuation parameter beta = {beta} out of range for {self:?}")))
        }
    }

    /// The β at which |f(β, α) − 2| equals `gap`.
    fn beta_for_gap(&self, alpha: f64, gap: f64) -> f64 {
        let span = 2.0 - alpha;
        if span <= gap {
            // Any beta is close enough; start where the map is already at its target.
            return match self {
                ShapeMapKind::Polynomial { .. } => 1.0,
                _ => 1.0,
            };
        }
        match *self {
            ShapeMapKind::Polynomial { p } => (span / gap).powf(1.0 / p),
            ShapeMapKind::Exponential => -1.0 / (gap / span).ln(),
            ShapeMapKind::Rational { q } => (gap / (span - gap)).powf(1.0 / q),
        }
    }
}

/// Initial continuation value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Beta0 {
    /// Used verbatim; must satisfy the near-quadratic condition for the target α.
    Fixed(f64),
    /// Solved per target α so that the first surrogate sits just inside the gap.
    Auto,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShapeSchedule {
    pub kind: ShapeMapKind,
    /// Geometric rate γ > 1.
    pub gamma: f64,
    pub beta0: Beta0,
}

impl Default for ShapeSchedule {
    fn default() -> Self {
        ShapeSchedule {
            kind: ShapeMapKind::Rational { q: 1.0 },
            gamma: 1.4,
            beta0: Beta0::Fixed(1e-3),
        }
    }
}

impl ShapeSchedule {
    pub fn validate(&self) -> Result<()> {
        self.kind.validate()?;
        if !(self.gamma > 1.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("continuation rate gamma = {} must exceed 1", self.gamma)));
        }
        if let Beta0::Fixed(b) = self.beta0 {
            self.kind
                .check_beta(b)
                .map_err(|_| Error::Config(format!("beta0 = {b} out of range for {:?}", self.kind)))?;
        }
        Ok(())
    }

    /// Resolves β₀ for a target shape, enforcing |f(β₀, α) − 2| ≤ 1e-2.
    pub fn initial_beta(&self, alpha_target: f64) -> Result<f64> {
        let beta = match self.beta0 {
            Beta0::Fixed(b) => b,
            Beta0::Auto => {
                let b = self.kind.beta_for_gap(alpha_target, 0.99 * BETA0_GAP);
                b.max(if matches!(self.kind, ShapeMapKind::Polynomial { .. }) { 1.0 } else { f64::MIN_POSITIVE })
            }
        };
        let f = shape_map(self.kind, beta, alpha_target)?;
        if (f - 2.0).abs() > BETA0_GAP {
            return Err(Error::Config(format!(
                "beta0 = {beta} gives f = {f}, farther than {BETA0_GAP} from the quadratic for alpha = {alpha_target}"
            )));
        }
        Ok(beta)
    }
}

/// Evaluates the shape mapping; the result lies in [α, 2].
pub fn shape_map(kind: ShapeMapKind, beta: f64, alpha_target: f64) -> Result<f64> {
    if !(alpha_target <= 2.0) {
        return Err(Error::Domain(format!("target shape {alpha_target} exceeds 2")));
    }
    kind.validate()?;
    kind.check_beta(beta)?;
    let a = alpha_target;
    let f = match kind {
        ShapeMapKind::Polynomial { p } => 2.0 - (2.0 - a) / beta.powf(p),
        ShapeMapKind::Exponential => {
            let e = (-1.0 / beta).exp();
            a * e + 2.0 * (1.0 - e)
        }
        ShapeMapKind::Rational { q } => {
            if beta.is_infinite() {
                a
            } else {
                let bq = beta.powf(q);
                if bq.is_infinite() {
                    a
                } else {
                    (2.0 + a * bq) / (1.0 + bq)
                }
            }
        }
    };
    Ok(f.clamp(a, 2.0))
}

/// One continuation step: β ← 1 + (β − 1)/γ (polynomial) or β ← γ β.
pub fn schedule_step(schedule: &ShapeSchedule, beta: f64) -> Result<f64> {
    schedule.kind.check_beta(beta)?;
    Ok(match schedule.kind {
        ShapeMapKind::Polynomial { .. } => 1.0 + (beta - 1.0) / schedule.gamma,
        _ => schedule.gamma * beta,
    })
}

/// Starting point of the location iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    Mean,
    Median,
    Explicit(f64),
}

impl Init {
    fn resolve(self, data: &[f64]) -> f64 {
        match self {
            Init::Mean => stats::mean(data),
            Init::Median => stats::median(data),
            Init::Explicit(x) => x,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GncConfig {
    pub schedule: ShapeSchedule,
    /// Inner tolerance on |X_new − X|.
    pub eps_x: f64,
    /// Outer tolerance on |f − α|.
    pub eps_f: f64,
    pub t_max: usize,
    pub k_max: usize,
    /// Lower clip δ for normalized weights.
    pub weight_floor: f64,
    pub init: Init,
}

impl Default for GncConfig {
    fn default() -> Self {
        GncConfig {
            schedule: ShapeSchedule::default(),
            eps_x: 1e-8,
            eps_f: 1e-6,
            t_max: 100,
            k_max: 100,
            weight_floor: 1e-6,
            init: Init::Mean,
        }
    }
}

impl GncConfig {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if !(self.eps_x > 0.0) || !(self.eps_f > 0.0) {
            return Err(Error::Config("tolerances eps_x and eps_f must be positive".into()));
        }
        if self.t_max == 0 || self.k_max == 0 {
            return Err(Error::Config("iteration caps t_max and k_max must be positive".into()));
        }
        if !(self.weight_floor > 0.0 && self.weight_floor < 1.0) {
            return Err(Error::Config(format!("weight floor {} outside (0, 1)", self.weight_floor)));
        }
        Ok(())
    }
}

/// Outcome of a GNC or fixed-shape IRLS solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RobustLocation {
    pub x: f64,
    pub outer_steps: usize,
    pub inner_steps_total: usize,
    /// Shape tolerance met and the final inner loop reached eps_x.
    pub converged: bool,
    pub final_shape: f64,
}

/// Normalized IRLS weight c²·ψ(ε)/ε clipped to [floor, 1].
pub fn irls_weight(eps: f64, f: impl Into<Shape>, c: f64, weight_floor: f64) -> Result<f64> {
    let kernel = LossParams::new(f, c)?.kernel();
    Ok(kernel.unit_weight(eps).clamp(weight_floor, 1.0))
}

/// Σ wᵢ xᵢ / Σ wᵢ.
pub fn weighted_mean(data: &[f64], weights: &[f64]) -> Result<f64> {
    if data.len() != weights.len() {
        return Err(Error::Argument(format!(
            "weighted_mean: {} values but {} weights",
            data.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::Argument("weighted_mean: weights must be nonnegative".into()));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Argument("weighted_mean: weights sum to zero".into()));
    }
    let s: f64 = data.iter().zip(weights).map(|(x, w)| w * x).sum();
    // Keep the convex-combination bound under rounding.
    let (lo, hi) = min_max(data);
    Ok((s / total).clamp(lo, hi))
}

fn min_max(data: &[f64]) -> (f64, f64) {
    data.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// One IRLS update of a centered sample at the current location `x`.
#[inline]
pub(crate) fn irls_step(centered: &[f64], x: f64, kernel: &Kernel, floor: f64) -> f64 {
    let (mut sw, mut swx) = (0.0, 0.0);
    for &d in centered {
        let w = kernel.unit_weight(d - x).clamp(floor, 1.0);
        sw += w;
        swx += w * d;
    }
    swx / sw
}

fn all_equal(data: &[f64]) -> bool {
    data.iter().all(|&x| x == data[0])
}

fn check_inputs(data: &[f64], c: f64) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Argument("location solve on empty data".into()));
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(Error::Argument("data contain non-finite values".into()));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Domain(format!("scale c = {c} must be positive")));
    }
    Ok(())
}

/// Runs IRLS at fixed shape until |ΔX| ≤ eps_x or t_max; returns (x, steps, converged).
fn inner_loop(centered: &[f64], mut x: f64, kernel: &Kernel, config: &GncConfig) -> (f64, usize, bool) {
    for t in 1..=config.t_max {
        let x_new = irls_step(centered, x, kernel, config.weight_floor);
        let done = (x_new - x).abs() <= config.eps_x;
        x = x_new;
        if done {
            return (x, t, true);
        }
    }
    (x, config.t_max, false)
}

/// GNC-IRLS solve of argminₓ Σ ρ(Xᵢ − x; α, c).
pub fn gnc_irls(data: &[f64], alpha_target: f64, c: f64, config: &GncConfig) -> Result<RobustLocation> {
    check_inputs(data, c)?;
    if !(alpha_target <= 2.0 && alpha_target.is_finite()) {
        return Err(Error::Domain(format!("target shape {alpha_target} must be finite and <= 2")));
    }
    config.validate()?;
    let mut beta = config.schedule.initial_beta(alpha_target)?;
    if all_equal(data) {
        return Ok(RobustLocation {
            x: data[0],
            outer_steps: 0,
            inner_steps_total: 0,
            converged: true,
            final_shape: alpha_target,
        });
    }

    // Work relative to the starting point so the solve is translation equivariant.
    let origin = config.init.resolve(data);
    let centered: Vec<f64> = data.iter().map(|v| v - origin).collect();
    let mut x = 0.0;
    let mut inner_total = 0;
    let mut f = 2.0;
    let mut converged = false;
    let mut outer = 0;
    for k in 1..=config.k_max {
        outer = k;
        f = shape_map(config.schedule.kind, beta, alpha_target)?;
        let kernel = LossParams::new(f, c)?.kernel();
        let (x_new, steps, inner_ok) = inner_loop(&centered, x, &kernel, config);
        x = x_new;
        inner_total += steps;
        if (f - alpha_target).abs() <= config.eps_f {
            converged = inner_ok;
            break;
        }
        beta = schedule_step(&config.schedule, beta)?;
    }
    Ok(RobustLocation {
        x: origin + x,
        outer_steps: outer,
        inner_steps_total: inner_total,
        converged,
        final_shape: f,
    })
}

/// IRLS with the shape pinned at `shape` (no continuation).
pub fn irls_fixed(data: &[f64], shape: impl Into<Shape>, c: f64, config: &GncConfig) -> Result<RobustLocation> {
    check_inputs(data, c)?;
    config.validate()?;
    let params = LossParams::new(shape, c)?;
    let final_shape = params.alpha_value().unwrap_or(f64::NEG_INFINITY);
    if all_equal(data) {
        return Ok(RobustLocation {
            x: data[0],
            outer_steps: 0,
            inner_steps_total: 0,
            converged: true,
            final_shape,
        });
    }
    let origin = config.init.resolve(data);
    let centered: Vec<f64> = data.iter().map(|v| v - origin).collect();
    let (x, steps, ok) = inner_loop(&centered, 0.0, &params.kernel(), config);
    Ok(RobustLocation {
        x: origin + x,
        outer_steps: 1,
        inner_steps_total: steps,
        converged: ok,
        final_shape,
    })
}
