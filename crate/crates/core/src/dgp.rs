//! Seeded data-generating processes for the simulation study.
//!
//! Streams are reproducible from the algorithm description alone:
//!
//! * generator: xoshiro256++ seeded through SplitMix64 (`seed_from_u64`);
//! * uniform on (0, 1): `((next_u64 >> 11) + 0.5) · 2⁻⁵³`, never 0 or 1;
//! * standard normal: Box–Muller `√(−2 ln u₁) · cos(2π u₂)`, two uniforms per
//!   draw and the sine half discarded;
//! * χ²(ν): sum of ν squared normals for integer ν, Marsaglia–Tsang gamma
//!   otherwise;
//! * Rademacher sign: `+1` iff a uniform is below ½.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Portable random stream used by every sampler in the crate.
#[derive(Clone, Debug)]
pub struct Rng(Xoshiro256PlusPlus);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng(Xoshiro256PlusPlus::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    }

    pub fn sign(&mut self) -> f64 {
        if self.uniform() < 0.5 {
            1.0
        } else {
            -1.0
        }
    }

    /// Cauchy(0, scale) by inversion.
    pub fn cauchy(&mut self, scale: f64) -> f64 {
        scale * (PI * (self.uniform() - 0.5)).tan()
    }

    /// Uniform index in `0..n` (n > 0); rejects the biased top zone before reducing.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        let zone = u64::MAX - u64::MAX % n;
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % n;
            }
        }
    }

    /// Gamma(shape, 1) by Marsaglia–Tsang, with the boost for shape < 1.
    pub fn gamma(&mut self, shape: f64) -> f64 {
        if shape < 1.0 {
            let g = self.gamma(shape + 1.0);
            return g * self.uniform().powf(1.0 / shape);
        }
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / (9.0 * d).sqrt();
        loop {
            let z = self.normal();
            let v = 1.0 + c * z;
            if v <= 0.0 {
                continue;
            }
            let v = v * v * v;
            let u = self.uniform();
            if u.ln() < 0.5 * z * z + d - d * v + d * v.ln() {
                return d * v;
            }
        }
    }

    pub fn chi_squared(&mut self, nu: f64) -> f64 {
        if nu.fract() == 0.0 && nu <= 64.0 {
            (0..nu as usize).map(|_| self.normal().powi(2)).sum()
        } else {
            2.0 * self.gamma(0.5 * nu)
        }
    }

    /// In-place Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, v: &mut [T]) {
        for i in (1..v.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            v.swap(i, j);
        }
    }
}

/// Data-generating process. Serialized with a `kind` tag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DgpSpec {
    Gaussian {
        #[serde(default = "one")]
        mu_star: f64,
        #[serde(default = "one")]
        sigma: f64,
    },
    #[serde(rename = "lognormal")]
    CenteredLogNormal {
        #[serde(default = "one")]
        mu_star: f64,
        #[serde(default = "lognormal_tau")]
        tau: f64,
    },
    #[serde(rename = "student-t")]
    StudentT {
        #[serde(default = "one")]
        mu_star: f64,
        #[serde(default = "one")]
        s: f64,
        #[serde(default = "student_nu")]
        nu: f64,
    },
    #[serde(rename = "pareto")]
    SymmetricPareto {
        #[serde(default = "one")]
        mu_star: f64,
        #[serde(default = "pareto_a")]
        tail_a: f64,
    },
    ContamRandom {
        #[serde(default = "one")]
        mu_star: f64,
        #[serde(default = "one")]
        sigma0: f64,
        #[serde(default = "contam_kappa")]
        kappa: f64,
        #[serde(default = "contam_m")]
        m_big: f64,
    },
    ContamAdversarial {
        #[serde(default = "one")]
        mu_star: f64,
        #[serde(default = "one")]
        sigma0: f64,
        #[serde(default = "contam_kappa")]
        kappa: f64,
        #[serde(default = "contam_m")]
        m_big: f64,
    },
    #[serde(rename = "contam-block")]
    ContamBlockAware {
        #[serde(default = "one")]
        mu_star: f64,
        #[serde(default = "one")]
        sigma0: f64,
        k: usize,
        #[serde(default = "contam_m")]
        m_big: f64,
        #[serde(default)]
        budget: Option<usize>,
    },
}

fn one() -> f64 {
    1.0
}
fn lognormal_tau() -> f64 {
    1.5
}
fn student_nu() -> f64 {
    4.0
}
fn pareto_a() -> f64 {
    1.5
}
fn contam_kappa() -> f64 {
    0.05
}
fn contam_m() -> f64 {
    100.0
}

impl DgpSpec {
    pub fn gaussian() -> Self {
        DgpSpec::Gaussian { mu_star: 1.0, sigma: 1.0 }
    }
    pub fn lognormal() -> Self {
        DgpSpec::CenteredLogNormal { mu_star: 1.0, tau: 1.5 }
    }
    pub fn student_t() -> Self {
        DgpSpec::StudentT { mu_star: 1.0, s: 1.0, nu: 4.0 }
    }
    pub fn pareto() -> Self {
        DgpSpec::SymmetricPareto { mu_star: 1.0, tail_a: 1.5 }
    }
    pub fn contam_random() -> Self {
        DgpSpec::ContamRandom { mu_star: 1.0, sigma0: 1.0, kappa: 0.05, m_big: 100.0 }
    }
    pub fn contam_adversarial() -> Self {
        DgpSpec::ContamAdversarial { mu_star: 1.0, sigma0: 1.0, kappa: 0.05, m_big: 100.0 }
    }

    /// Reference location errors are measured against.
    pub fn mu_star(&self) -> f64 {
        match *self {
            DgpSpec::Gaussian { mu_star, .. }
            | DgpSpec::CenteredLogNormal { mu_star, .. }
            | DgpSpec::StudentT { mu_star, .. }
            | DgpSpec::SymmetricPareto { mu_star, .. }
            | DgpSpec::ContamRandom { mu_star, .. }
            | DgpSpec::ContamAdversarial { mu_star, .. }
            | DgpSpec::ContamBlockAware { mu_star, .. } => mu_star,
        }
    }

    /// Short identifier used in benchmark output.
    pub fn label(&self) -> String {
        match self {
            DgpSpec::Gaussian { .. } => "gaussian".into(),
            DgpSpec::CenteredLogNormal { .. } => "lognormal".into(),
            DgpSpec::StudentT { .. } => "student-t".into(),
            DgpSpec::SymmetricPareto { .. } => "pareto".into(),
            DgpSpec::ContamRandom { .. } => "contam-random".into(),
            DgpSpec::ContamAdversarial { .. } => "contam-adversarial".into(),
            DgpSpec::ContamBlockAware { k, .. } => format!("contam-block-k{k}"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, v: f64, want: &str| Err(Error::Argument(format!("{field} = {v} must be {want}")));
        let finite = |field: &str, v: f64| if v.is_finite() { Ok(()) } else { bad(field, v, "finite") };
        finite("mu_star", self.mu_star())?;
        match *self {
            DgpSpec::Gaussian { sigma, .. } if !(sigma > 0.0 && sigma.is_finite()) => bad("sigma", sigma, "> 0"),
            DgpSpec::CenteredLogNormal { tau, .. } if !(tau > 0.0 && tau.is_finite()) => bad("tau", tau, "> 0"),
            DgpSpec::StudentT { s, .. } if !(s > 0.0 && s.is_finite()) => bad("s", s, "> 0"),
            DgpSpec::StudentT { nu, .. } if !(nu > 2.0 && nu.is_finite()) => bad("nu", nu, "> 2"),
            DgpSpec::SymmetricPareto { tail_a, .. } if !(tail_a > 1.0 && tail_a < 2.0) => bad("tail_a", tail_a, "in (1, 2)"),
            DgpSpec::ContamRandom { sigma0, kappa, m_big, .. } | DgpSpec::ContamAdversarial { sigma0, kappa, m_big, .. } => {
                if !(sigma0 > 0.0 && sigma0.is_finite()) {
                    bad("sigma0", sigma0, "> 0")
                } else if !(kappa > 0.0 && kappa < 1.0) {
                    bad("kappa", kappa, "in (0, 1)")
                } else if !(m_big > 0.0 && m_big.is_finite()) {
                    bad("m_big", m_big, "> 0")
                } else {
                    Ok(())
                }
            }
            DgpSpec::ContamBlockAware { sigma0, k, m_big, .. } => {
                if !(sigma0 > 0.0 && sigma0.is_finite()) {
                    bad("sigma0", sigma0, "> 0")
                } else if k == 0 {
                    Err(Error::Argument("k must be a positive block count".into()))
                } else if !(m_big > 0.0 && m_big.is_finite()) {
                    bad("m_big", m_big, "> 0")
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

fn gaussian_sample(mu: f64, sigma: f64, n: usize, rng: &mut Rng) -> Vec<f64> {
    (0..n).map(|_| mu + sigma * rng.normal()).collect()
}

/// Draws `n` observations. Deterministic for `(spec, n, seed)`.
pub fn sample(spec: &DgpSpec, n: usize, seed: u64) -> Result<Vec<f64>> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::Argument("n must be at least 1".into()));
    }
    let mut rng = Rng::new(seed);
    let out = match *spec {
        DgpSpec::Gaussian { mu_star, sigma } => gaussian_sample(mu_star, sigma, n, &mut rng),
        DgpSpec::CenteredLogNormal { mu_star, tau } => {
            let shift = (0.5 * tau * tau).exp();
            (0..n).map(|_| mu_star + ((tau * rng.normal()).exp() - shift)).collect()
        }
        DgpSpec::StudentT { mu_star, s, nu } => (0..n)
            .map(|_| {
                let z = rng.normal();
                let v = rng.chi_squared(nu);
                mu_star + s * z / (v / nu).sqrt()
            })
            .collect(),
        DgpSpec::SymmetricPareto { mu_star, tail_a } => (0..n)
            .map(|_| {
                let sign = rng.sign();
                let u = rng.uniform().powf(-1.0 / tail_a);
                mu_star + sign * u
            })
            .collect(),
        DgpSpec::ContamRandom { mu_star, sigma0, kappa, m_big } => (0..n)
            .map(|_| {
                let clean = mu_star + sigma0 * rng.normal();
                if rng.uniform() < kappa {
                    mu_star + rng.sign() * m_big
                } else {
                    clean
                }
            })
            .collect(),
        DgpSpec::ContamAdversarial { mu_star, sigma0, kappa, m_big } => {
            let mut x = gaussian_sample(mu_star, sigma0, n, &mut rng);
            let corrupt = (kappa * n as f64).floor() as usize;
            for v in x.iter_mut().take(corrupt) {
                *v = mu_star + m_big;
            }
            x
        }
        DgpSpec::ContamBlockAware { mu_star, sigma0, k, m_big, budget } => {
            let mut x = gaussian_sample(mu_star, sigma0, n, &mut rng);
            for idx in block_aware_victims(n, k, budget) {
                x[idx] = mu_star + m_big;
            }
            x
        }
    };
    Ok(out)
}

/// Indices corrupted by the block-aware adversary: index 0 of each of the
/// first ⌈k/2⌉ size-⌊n/k⌋ blocks, truncated to `budget`.
pub fn block_aware_victims(n: usize, k: usize, budget: Option<usize>) -> Vec<usize> {
    let m = n / k.max(1);
    if m == 0 {
        return Vec::new();
    }
    let r = k.div_ceil(2);
    let r = budget.map_or(r, |b| r.min(b));
    (0..r).map(|j| j * m).collect()
}

/// Writes one value per line under a `value` header, 17 significant digits.
pub fn write_csv(values: &[f64], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_values(values, &mut w).map_err(|e| Error::io(path, e))
}

pub fn write_values<W: Write>(values: &[f64], w: &mut W) -> std::io::Result<()> {
    writeln!(w, "value")?;
    for v in values {
        writeln!(w, "{v:.16e}")?;
    }
    w.flush()
}
