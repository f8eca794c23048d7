//! Likelihood calibration of (α, c) and the alternating location/parameter fit.
//!
//! Minimizing the raw loss over (α, c) is degenerate: ρ is nondecreasing in α,
//! so the minimizer runs α toward −∞. The parameter step therefore always
//! minimizes the negative log-likelihood
//!
//! ```text
//! NLL(α, c) = Σ ρ(Xᵢ − x; α, c) + m (ln c + ln Z(α)),   α ∈ [0, 2], c > 0
//! ```
//!
//! by a coarse grid (α linear, c log-spaced) followed by box-projected
//! Nelder–Mead polishing in (α, ln c) from the best grid local minima.

use crate::error::{Error, Result};
use crate::gnc::{self, GncConfig};
use crate::loss::{self, LossParams};
use crate::stats;

/// Box for the scale parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScaleBounds {
    /// Multiples of the sample's median absolute deviation.
    Relative { lo: f64, hi: f64 },
    Absolute { lo: f64, hi: f64 },
}

/// Outer convergence tolerance on |Δx| between alternations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Tolerance {
    /// 1e-8 · (1 + MAD(data)).
    Auto,
    Absolute(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CalibConfig {
    pub alpha_bounds: (f64, f64),
    pub c_bounds: ScaleBounds,
    pub max_alternations: usize,
    pub tol_x: Tolerance,
    pub optimizer_restarts: usize,
    pub grid_alpha: usize,
    pub grid_c: usize,
}

impl Default for CalibConfig {
    fn default() -> Self {
        CalibConfig {
            alpha_bounds: (0.0, 2.0),
            c_bounds: ScaleBounds::Relative { lo: 1e-3, hi: 1e3 },
            max_alternations: 10,
            tol_x: Tolerance::Auto,
            optimizer_restarts: 2,
            grid_alpha: 17,
            grid_c: 17,
        }
    }
}

impl CalibConfig {
    pub fn validate(&self) -> Result<()> {
        let (alo, ahi) = self.alpha_bounds;
        if !(0.0 <= alo && alo <= ahi && ahi <= 2.0) {
            return Err(Error::Config(format!("alpha bounds [{alo}, {ahi}] must be ordered within [0, 2]")));
        }
        let (clo, chi) = match self.c_bounds {
            ScaleBounds::Relative { lo, hi } | ScaleBounds::Absolute { lo, hi } => (lo, hi),
        };
        if !(clo > 0.0 && clo <= chi && chi.is_finite()) {
            return Err(Error::Config(format!("scale bounds [{clo}, {chi}] must be ordered and positive")));
        }
        if self.max_alternations == 0 || self.optimizer_restarts == 0 {
            return Err(Error::Config("max_alternations and optimizer_restarts must be positive".into()));
        }
        if self.grid_alpha < 2 || self.grid_c < 2 {
            return Err(Error::Config("calibration grid needs at least 2 points per axis".into()));
        }
        if let Tolerance::Absolute(t) = self.tol_x {
            if !(t > 0.0) {
                return Err(Error::Config(format!("tol_x = {t} must be positive")));
            }
        }
        Ok(())
    }
}

/// Result of [`alternate_fit`].
#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub x: f64,
    pub params: LossParams,
    pub alternations: usize,
    /// NLL at (x, params) on return.
    pub nll_value: f64,
    pub converged: bool,
    /// NLL after each alternation.
    pub nll_trace: Vec<f64>,
}

/// Spread used to place the scale box; never zero unless every residual is.
fn reference_scale(data: &[f64], residuals: &[f64]) -> f64 {
    let s = stats::mad(data);
    if s > 0.0 {
        s
    } else {
        residuals.iter().map(|r| r.abs()).sum::<f64>() / residuals.len() as f64
    }
}

const POLISH_TOL: f64 = 1e-6;
const POLISH_MAX_ITER: usize = 1000;

struct Objective<'a> {
    residuals: &'a [f64],
}

impl Objective<'_> {
    // Point is (alpha, ln c).
    fn eval(&self, alpha: f64, log_c: f64) -> f64 {
        let c = log_c.exp();
        let params = match LossParams::new(alpha, c) {
            Ok(p) => p,
            Err(_) => return f64::INFINITY,
        };
        let log_z = match loss::log_partition(alpha) {
            Ok(v) => v,
            Err(_) => return f64::INFINITY,
        };
        let k = params.kernel();
        let fit: f64 = self.residuals.iter().map(|&r| k.rho(r)).sum();
        fit + self.residuals.len() as f64 * (log_c + log_z)
    }
}

/// Box-projected Nelder–Mead in two dimensions. Returns the best vertex and value.
fn nelder_mead_box(
    f: &dyn Fn([f64; 2]) -> f64,
    start: [f64; 2],
    step: [f64; 2],
    lo: [f64; 2],
    hi: [f64; 2],
) -> ([f64; 2], f64) {
    let project = |p: [f64; 2]| [p[0].clamp(lo[0], hi[0]), p[1].clamp(lo[1], hi[1])];
    let mut simplex: Vec<([f64; 2], f64)> = Vec::with_capacity(3);
    simplex.push((start, f(start)));
    for d in 0..2 {
        let mut p = start;
        p[d] += step[d];
        if p[d] > hi[d] {
            p[d] = start[d] - step[d];
        }
        let p = project(p);
        simplex.push((p, f(p)));
    }
    for _ in 0..POLISH_MAX_ITER {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].0;
        let size = simplex[1..]
            .iter()
            .map(|(p, _)| [(p[0] - best[0]).abs(), (p[1] - best[1]).abs()])
            .fold([0.0f64, 0.0f64], |acc, d| [acc[0].max(d[0]), acc[1].max(d[1])]);
        if size[0] <= POLISH_TOL && size[1] <= POLISH_TOL {
            break;
        }
        let centroid = [
            0.5 * (simplex[0].0[0] + simplex[1].0[0]),
            0.5 * (simplex[0].0[1] + simplex[1].0[1]),
        ];
        let worst = simplex[2];
        let along = |t: f64| project([centroid[0] + t * (worst.0[0] - centroid[0]), centroid[1] + t * (worst.0[1] - centroid[1])]);
        let xr = along(-1.0);
        let fr = f(xr);
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = f(xe);
            simplex[2] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[1].1 {
            simplex[2] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let xc = along(-0.5);
                (xc, f(xc))
            } else {
                let xc = along(0.5);
                (xc, f(xc))
            };
            if fc < worst.1.min(fr) {
                simplex[2] = (xc, fc);
            } else {
                let b = simplex[0].0;
                for v in simplex.iter_mut().skip(1) {
                    let p = [b[0] + 0.5 * (v.0[0] - b[0]), b[1] + 0.5 * (v.0[1] - b[1])];
                    *v = (p, f(p));
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex[0]
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if lo == hi {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Minimizes the NLL of `data` about a fixed location `x0` over the (α, c) box.
pub fn fit_shape_scale(data: &[f64], x0: f64, config: &CalibConfig) -> Result<LossParams> {
    config.validate()?;
    if data.len() < 2 {
        return Err(Error::Argument("shape/scale calibration needs at least 2 points".into()));
    }
    let residuals: Vec<f64> = data.iter().map(|v| v - x0).collect();
    if residuals.iter().all(|r| *r == 0.0) {
        return Err(Error::Degenerate("all observations equal the location; the scale would collapse".into()));
    }
    let (c_lo, c_hi) = match config.c_bounds {
        ScaleBounds::Absolute { lo, hi } => (lo, hi),
        ScaleBounds::Relative { lo, hi } => {
            let s = reference_scale(data, &residuals);
            (lo * s, hi * s)
        }
    };
    let (a_lo, a_hi) = config.alpha_bounds;
    let (t_lo, t_hi) = (c_lo.ln(), c_hi.ln());
    let objective = Objective { residuals: &residuals };

    let alphas = linspace(a_lo, a_hi, config.grid_alpha);
    let logcs = linspace(t_lo, t_hi, config.grid_c);
    let grid: Vec<Vec<f64>> = alphas
        .iter()
        .map(|&a| logcs.iter().map(|&t| objective.eval(a, t)).collect())
        .collect();

    // Grid local minima (4-neighbourhood), best first.
    let mut starts: Vec<(usize, usize, f64)> = Vec::new();
    for (i, row) in grid.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let neighbours = [
                i.checked_sub(1).map(|k| grid[k][j]),
                grid.get(i + 1).map(|r| r[j]),
                j.checked_sub(1).map(|k| row[k]),
                row.get(j + 1).copied(),
            ];
            if neighbours.iter().flatten().all(|&u| v <= u) {
                starts.push((i, j, v));
            }
        }
    }
    starts.sort_by(|a, b| a.2.total_cmp(&b.2));
    starts.truncate(config.optimizer_restarts);

    let step_a = if alphas.len() > 1 { alphas[1] - alphas[0] } else { 0.0 };
    let step_t = logcs[1] - logcs[0];
    let f = |p: [f64; 2]| objective.eval(p[0], p[1]);
    let mut best = ([alphas[starts[0].0], logcs[starts[0].1]], starts[0].2);
    for &(i, j, _) in &starts {
        let (p, v) = nelder_mead_box(&f, [alphas[i], logcs[j]], [step_a, step_t], [a_lo, t_lo], [a_hi, t_hi]);
        if v < best.1 {
            best = (p, v);
        }
    }
    if !best.1.is_finite() {
        return Err(Error::Degenerate("negative log-likelihood is not finite on the calibration box".into()));
    }
    LossParams::new(best.0[0], best.0[1].exp())
}

/// How the location half-step is solved.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LocationStep {
    /// GNC continuation from the quadratic to the fitted shape.
    Gnc,
    /// IRLS with the shape pinned to the fitted α.
    Pinned,
}

/// Alternates NLL calibration of (α, c) with GNC-IRLS location updates,
/// starting from the sample median.
pub fn alternate_fit(data: &[f64], calib: &CalibConfig, gnc: &GncConfig) -> Result<FitResult> {
    alternate_fit_with(data, calib, gnc, LocationStep::Gnc)
}

pub fn alternate_fit_with(data: &[f64], calib: &CalibConfig, gnc_config: &GncConfig, step: LocationStep) -> Result<FitResult> {
    calib.validate()?;
    gnc_config.validate()?;
    if data.len() < 2 {
        return Err(Error::Argument("alternating fit needs at least 2 points".into()));
    }
    // Everything runs relative to the median, so the fit is translation equivariant.
    let origin = stats::median(data);
    let centered: Vec<f64> = data.iter().map(|v| v - origin).collect();
    let tol = match calib.tol_x {
        Tolerance::Absolute(t) => t,
        Tolerance::Auto => 1e-8 * (1.0 + stats::mad(&centered)),
    };

    let mut x = 0.0;
    let mut params = LossParams::new(1.0, 1.0)?;
    let mut trace = Vec::with_capacity(calib.max_alternations);
    let mut converged = false;
    for _ in 0..calib.max_alternations {
        params = fit_shape_scale(&centered, x, calib)?;
        let alpha = params.alpha_value().expect("calibrated shape is finite");
        let x_new = match step {
            LocationStep::Gnc => gnc::gnc_irls(&centered, alpha, params.c(), gnc_config)?.x,
            LocationStep::Pinned => gnc::irls_fixed(&centered, alpha, params.c(), gnc_config)?.x,
        };
        trace.push(loss::nll(&centered, x_new, &params)?);
        let delta = (x_new - x).abs();
        x = x_new;
        if delta <= tol {
            converged = true;
            break;
        }
    }
    Ok(FitResult {
        x: origin + x,
        params,
        alternations: trace.len(),
        nll_value: *trace.last().expect("at least one alternation"),
        converged,
        nll_trace: trace,
    })
}
