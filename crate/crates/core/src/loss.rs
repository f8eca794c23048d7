//! The adaptive robust loss family ρ(ε; α, c).
//!
//! For shape α ≤ 2 and scale c > 0,
//!
//! ```text
//! ρ(ε; α, c) = |α−2|/α · [ (1 + (ε/c)²/|α−2|)^(α/2) − 1 ]
//! ```
//!
//! with removable singularities at α = 2 (least squares) and α = 0 (Cauchy),
//! plus the Welsch limit α → −∞. Charbonnier (α = 1) and Geman–McClure
//! (α = −2) also get closed forms. Away from the closed-form points the
//! general formula is evaluated in log space,
//! `expm1((α/2) · log1p((ε/c)²/|α−2|))`, which stays accurate as α nears
//! 0 or 2.
//!
//! The likelihood normalizer Z(α) = ∫ exp(−ρ(u; α, 1)) du is finite only for
//! α ≥ 0, so likelihood work is restricted to α ∈ [0, 2].

use std::collections::HashMap;
use std::f64::consts::{PI, SQRT_2};
use std::sync::{Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::quadrature;

/// Closed-form branches are used within this distance of α = 0 and α = 2.
pub const SINGULAR_SWITCH: f64 = 1e-4;

/// Shape parameter α of the loss. The Welsch limit has its own variant so it
/// is never confused with a very negative finite shape.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape {
    Finite(f64),
    NegInfinity,
}

impl Shape {
    pub fn finite(self) -> Option<f64> {
        match self {
            Shape::Finite(a) => Some(a),
            Shape::NegInfinity => None,
        }
    }
}

impl From<f64> for Shape {
    fn from(a: f64) -> Self {
        Shape::Finite(a)
    }
}

/// Shape α and scale c of the adaptive loss.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossParams {
    alpha: Shape,
    c: f64,
}

impl LossParams {
    /// Validates `alpha ≤ 2` (finite, not NaN) and `c > 0`.
    pub fn new(alpha: impl Into<Shape>, c: f64) -> Result<Self> {
        let alpha = alpha.into();
        if let Shape::Finite(a) = alpha {
            if !a.is_finite() || a > 2.0 {
                return Err(Error::Domain(format!("shape alpha = {a} must be finite and <= 2")));
            }
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Domain(format!("scale c = {c} must be positive and finite")));
        }
        Ok(LossParams { alpha, c })
    }

    pub fn welsch(c: f64) -> Result<Self> {
        Self::new(Shape::NegInfinity, c)
    }

    pub fn alpha(&self) -> Shape {
        self.alpha
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Finite α, or `None` for the Welsch limit.
    pub fn alpha_value(&self) -> Option<f64> {
        self.alpha.finite()
    }

    pub fn kernel(&self) -> Kernel {
        Kernel::new(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Branch {
    Quadratic,
    Charbonnier,
    Cauchy,
    GemanMcClure,
    Welsch,
    // kappa = |α − 2|
    General { alpha: f64, kappa: f64 },
}

/// Pre-dispatched evaluator for one `LossParams`; use it in hot loops.
#[derive(Clone, Copy, Debug)]
pub struct Kernel {
    branch: Branch,
    inv_c: f64,
}

impl Kernel {
    fn new(p: &LossParams) -> Self {
        let branch = match p.alpha {
            Shape::NegInfinity => Branch::Welsch,
            Shape::Finite(a) if (2.0 - a).abs() < SINGULAR_SWITCH => Branch::Quadratic,
            Shape::Finite(a) if a.abs() < SINGULAR_SWITCH => Branch::Cauchy,
            Shape::Finite(a) if a == 1.0 => Branch::Charbonnier,
            Shape::Finite(a) if a == -2.0 => Branch::GemanMcClure,
            Shape::Finite(a) => Branch::General {
                alpha: a,
                kappa: (a - 2.0).abs(),
            },
        };
        Kernel {
            branch,
            inv_c: 1.0 / p.c,
        }
    }

    #[inline]
    pub fn rho(&self, eps: f64) -> f64 {
        let x = eps * self.inv_c;
        let x2 = x * x;
        match self.branch {
            Branch::Quadratic => 0.5 * x2,
            Branch::Charbonnier => (x2 + 1.0).sqrt() - 1.0,
            Branch::Cauchy => (0.5 * x2).ln_1p(),
            Branch::GemanMcClure => 2.0 * x2 / (x2 + 4.0),
            Branch::Welsch => -(-0.5 * x2).exp_m1(),
            Branch::General { alpha, kappa } => {
                kappa / alpha * (0.5 * alpha * (x2 / kappa).ln_1p()).exp_m1()
            }
        }
    }

    /// ∂ρ/∂ε.
    #[inline]
    pub fn drho(&self, eps: f64) -> f64 {
        let x = eps * self.inv_c;
        let x2 = x * x;
        let scale = eps * self.inv_c * self.inv_c;
        match self.branch {
            Branch::Quadratic => scale,
            Branch::Charbonnier => scale / (x2 + 1.0).sqrt(),
            Branch::Cauchy => scale / (0.5 * x2 + 1.0),
            Branch::GemanMcClure => {
                let s = 0.25 * x2 + 1.0;
                scale / (s * s)
            }
            Branch::Welsch => scale * (-0.5 * x2).exp(),
            Branch::General { alpha, kappa } => {
                scale * ((0.5 * alpha - 1.0) * (x2 / kappa).ln_1p()).exp()
            }
        }
    }

    /// The IRLS weight ψ(ε)/ε normalized by c², i.e. in (0, 1] with value 1 at ε = 0.
    #[inline]
    pub fn unit_weight(&self, eps: f64) -> f64 {
        let x = eps * self.inv_c;
        let x2 = x * x;
        match self.branch {
            Branch::Quadratic => 1.0,
            Branch::Charbonnier => 1.0 / (x2 + 1.0).sqrt(),
            Branch::Cauchy => 1.0 / (0.5 * x2 + 1.0),
            Branch::GemanMcClure => {
                let s = 0.25 * x2 + 1.0;
                1.0 / (s * s)
            }
            Branch::Welsch => (-0.5 * x2).exp(),
            Branch::General { alpha, kappa } => ((0.5 * alpha - 1.0) * (x2 / kappa).ln_1p()).exp(),
        }
    }
}

/// ρ(ε; α, c).
pub fn rho(eps: f64, params: &LossParams) -> f64 {
    params.kernel().rho(eps)
}

/// The general expression (κ/α)[(1 + (ε/c)²/κ)^(α/2) − 1], κ = |α − 2|, with
/// no closed-form dispatch. Meaningless at α ∈ {0, 2}; used to probe the
/// removable singularities.
pub fn rho_general_form(eps: f64, alpha: f64, c: f64) -> f64 {
    let x2 = (eps / c).powi(2);
    let kappa = (alpha - 2.0).abs();
    kappa / alpha * (0.5 * alpha * (x2 / kappa).ln_1p()).exp_m1()
}

/// ∂ρ/∂ε(ε; α, c); for α ∈ (0, 1] this is the score ψ.
pub fn drho_deps(eps: f64, params: &LossParams) -> f64 {
    params.kernel().drho(eps)
}

/// Second derivative ψ′(ε) = (1/c²) s^(α/2−2) [1 + (α−1)u], u = (ε/c)²/(2−α), s = 1+u.
///
/// Only defined here for α ∈ (0, 1].
pub fn psi_prime(eps: f64, params: &LossParams) -> Result<f64> {
    let alpha = match params.alpha {
        Shape::Finite(a) if a > 0.0 && a <= 1.0 => a,
        other => {
            return Err(Error::Domain(format!(
                "psi_prime requires alpha in (0, 1], got {other:?}"
            )))
        }
    };
    let c = params.c;
    let u = (eps / c).powi(2) / (2.0 - alpha);
    let s = 1.0 + u;
    Ok(s.powf(0.5 * alpha - 2.0) * (1.0 + (alpha - 1.0) * u) / (c * c))
}

fn check_likelihood_alpha(alpha: f64) -> Result<()> {
    if alpha.is_nan() || alpha < 0.0 {
        Err(Error::Domain(format!(
            "Z(alpha) diverges for alpha = {alpha} < 0: the loss is bounded so exp(-rho) is not integrable"
        )))
    } else if alpha > 2.0 {
        Err(Error::Domain(format!("alpha = {alpha} exceeds 2")))
    } else {
        Ok(())
    }
}

// exp(-rho(u;a,1)) <= 1/(1 + u^2/2) for every a in [0, 2] (rho is nondecreasing
// in a), so the tail beyond U is at most 2/U per side.
const TAIL_CUTOFF: f64 = 4e12;

fn partition_quadrature(alpha: f64) -> f64 {
    let kernel = LossParams::new(alpha, 1.0).expect("alpha checked").kernel();
    let core = quadrature::integrate(|u| (-kernel.rho(u)).exp(), 0.0, 1.0, 1e-15, 1e-14);
    // Substitute u = e^s on [1, U].
    let tail = quadrature::integrate(
        |s| {
            let u = s.exp();
            (s - kernel.rho(u)).exp()
        },
        0.0,
        TAIL_CUTOFF.ln(),
        1e-14,
        1e-13,
    );
    2.0 * (core + tail)
}

fn partition_cache() -> &'static Mutex<HashMap<i64, f64>> {
    static CACHE: OnceLock<Mutex<HashMap<i64, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

const CACHE_LIMIT: usize = 1 << 16;

/// Z(α) = ∫ exp(−ρ(u; α, 1)) du for α ∈ [0, 2], memoized on α rounded to 1e-12.
pub fn partition_function(alpha: f64) -> Result<f64> {
    check_likelihood_alpha(alpha)?;
    if alpha.abs() < SINGULAR_SWITCH {
        return Ok(PI * SQRT_2);
    }
    if (2.0 - alpha).abs() < SINGULAR_SWITCH {
        return Ok((2.0 * PI).sqrt());
    }
    let key = (alpha * 1e12).round() as i64;
    if let Some(z) = partition_cache().lock().expect("cache poisoned").get(&key) {
        return Ok(*z);
    }
    let z = partition_quadrature(key as f64 * 1e-12);
    let mut cache = partition_cache().lock().expect("cache poisoned");
    if cache.len() >= CACHE_LIMIT {
        cache.clear();
    }
    cache.insert(key, z);
    Ok(z)
}

/// ln Z(α).
pub fn log_partition(alpha: f64) -> Result<f64> {
    partition_function(alpha).map(f64::ln)
}

/// Negative log-likelihood Σ ρ(Xᵢ − x; α, c) + m (ln c + ln Z(α)).
pub fn nll(data: &[f64], x: f64, params: &LossParams) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Argument("nll of empty data".into()));
    }
    let alpha = params
        .alpha_value()
        .ok_or_else(|| Error::Domain("Z(alpha) diverges for the Welsch limit".into()))?;
    let log_z = log_partition(alpha)?;
    let k = params.kernel();
    let fit: f64 = data.iter().map(|&xi| k.rho(xi - x)).sum();
    Ok(fit + data.len() as f64 * (params.c.ln() + log_z))
}
