//! Monte Carlo harness: common random numbers across estimators, error
//! summaries and CSV emission.
//!
//! For every `(dgp, n, r)` cell one dataset is drawn with seed
//! `base_seed + r` and every estimator is evaluated on it. Errors are
//! `estimate − μ*` with the DGP's nominal μ*, also for one-sided
//! contamination. Failed replications are left out of the summaries and
//! counted in the `failures` column.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dgp::{self, DgpSpec};
use crate::error::{Error, Result};
use crate::estimators::{EstimatorSpec, FixedLoss};
use crate::stats;

pub const CSV_HEADER: &str = "dgp,n,estimator,mae,mse,median_abs,q90_abs,q95_abs,failures";

/// Benchmark sweep, read from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_dgps")]
    pub dgps: Vec<DgpSpec>,
    #[serde(default = "default_ns")]
    pub ns: Vec<usize>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_base_seed")]
    pub base_seed: u64,
    #[serde(default = "default_roster")]
    pub estimators: Vec<EstimatorSpec>,
    /// Worker threads; `None` uses all available cores.
    #[serde(default)]
    pub workers: Option<usize>,
}

pub fn default_dgps() -> Vec<DgpSpec> {
    vec![
        DgpSpec::gaussian(),
        DgpSpec::lognormal(),
        DgpSpec::student_t(),
        DgpSpec::pareto(),
        DgpSpec::contam_random(),
        DgpSpec::contam_adversarial(),
    ]
}

pub fn default_ns() -> Vec<usize> {
    vec![200, 500, 1000, 2000, 5000]
}

fn default_replications() -> usize {
    100
}

fn default_base_seed() -> u64 {
    12345
}

/// l2, Cauchy, GM, Adapt, GNC_Adapt, GNC_TLS and ARE; fixed losses use c = 1.
pub fn default_roster() -> Vec<EstimatorSpec> {
    vec![
        EstimatorSpec::Mean,
        EstimatorSpec::FixedLoss { loss: FixedLoss::Cauchy, c: 1.0 },
        EstimatorSpec::FixedLoss { loss: FixedLoss::GemanMcClure, c: 1.0 },
        EstimatorSpec::Adapt,
        EstimatorSpec::GncAdapt,
        EstimatorSpec::GncTls { cbar: None, gamma: 1.4 },
        EstimatorSpec::are_default(),
    ]
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dgps: default_dgps(),
            ns: default_ns(),
            replications: default_replications(),
            base_seed: default_base_seed(),
            estimators: default_roster(),
            workers: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.ns.is_empty() || self.ns.contains(&0) {
            return Err(Error::Config("ns must be a nonempty list of positive sizes".into()));
        }
        if self.dgps.is_empty() || self.estimators.is_empty() {
            return Err(Error::Config("dgps and estimators must be nonempty".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be positive".into()));
        }
        for d in &self.dgps {
            d.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }
}

/// Error summary of one estimator on one `(dgp, n)` cell.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub dgp: String,
    pub n: usize,
    pub estimator: String,
    pub mae: f64,
    pub mse: f64,
    pub median_abs: f64,
    pub q90_abs: f64,
    pub q95_abs: f64,
    pub failures: usize,
}

impl MetricsRow {
    /// Summarizes signed errors; NaN metrics when every replication failed.
    pub fn from_errors(dgp: String, n: usize, estimator: String, errors: &[f64], failures: usize) -> Self {
        let mut abs: Vec<f64> = errors.iter().map(|e| e.abs()).collect();
        abs.sort_by(f64::total_cmp);
        let q = |p| stats::quantile_linear(&abs, p).unwrap_or(f64::NAN);
        let (mae, mse) = if abs.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            let m = abs.len() as f64;
            (abs.iter().sum::<f64>() / m, abs.iter().map(|a| a * a).sum::<f64>() / m)
        };
        MetricsRow { dgp, n, estimator, mae, mse, median_abs: q(0.5), q90_abs: q(0.9), q95_abs: q(0.95), failures }
    }
}

/// Raw outcome of one replication: the dataset fingerprint and one result per estimator.
#[derive(Clone, Debug)]
pub struct CellOutcome {
    pub dataset_hash: u64,
    pub estimates: Vec<Option<f64>>,
}

/// FNV-1a over the IEEE bit patterns.
pub fn hash_dataset(data: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in data {
        for b in v.to_bits().to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

fn run_cell(dgp: &DgpSpec, n: usize, seed: u64, estimators: &[EstimatorSpec]) -> Result<CellOutcome> {
    let data = dgp::sample(dgp, n, seed)?;
    let estimates = estimators.iter().map(|e| e.estimate(&data).ok().filter(|x| x.is_finite())).collect();
    Ok(CellOutcome { dataset_hash: hash_dataset(&data), estimates })
}

/// All replications of every `(dgp, n)` cell, in `(dgp, n, r)` order.
pub fn run_cells(config: &ExperimentConfig) -> Result<Vec<Vec<CellOutcome>>> {
    config.validate()?;
    let tasks: Vec<(usize, usize, u64)> = config
        .dgps
        .iter()
        .enumerate()
        .flat_map(|(d, _)| {
            config.ns.iter().flat_map(move |&n| (0..config.replications as u64).map(move |r| (d, n, r)))
        })
        .collect();
    let work = |&(d, n, r): &(usize, usize, u64)| {
        run_cell(&config.dgps[d], n, config.base_seed.wrapping_add(r), &config.estimators)
    };
    let results: Vec<Result<CellOutcome>> = match config.workers {
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            pool.install(|| tasks.par_iter().map(work).collect())
        }
        None => tasks.par_iter().map(work).collect(),
    };
    let flat: Vec<CellOutcome> = results.into_iter().collect::<Result<_>>()?;
    Ok(flat.chunks(config.replications).map(<[CellOutcome]>::to_vec).collect())
}

/// Runs the sweep; rows come out in `(dgp, n, estimator)` order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<MetricsRow>> {
    let cells = run_cells(config)?;
    let mut rows = Vec::new();
    let mut cell_iter = cells.iter();
    for dgp in &config.dgps {
        let mu = dgp.mu_star();
        for &n in &config.ns {
            let reps = cell_iter.next().expect("one cell per (dgp, n)");
            for (j, est) in config.estimators.iter().enumerate() {
                let errors: Vec<f64> = reps.iter().filter_map(|c| c.estimates[j]).map(|x| x - mu).collect();
                let failures = reps.len() - errors.len();
                rows.push(MetricsRow::from_errors(dgp.label(), n, est.name(), &errors, failures));
            }
        }
    }
    Ok(rows)
}

/// CSV text with 17 significant digits per float.
pub fn to_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            r.dgp, r.n, r.estimator, r.mae, r.mse, r.median_abs, r.q90_abs, r.q95_abs, r.failures
        );
    }
    out
}

pub fn emit_csv(rows: &[MetricsRow], path: &Path) -> Result<()> {
    std::fs::write(path, to_csv(rows)).map_err(|e| Error::io(path, e))
}

/// Inverse of [`to_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<MetricsRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => return Err(Error::Parse { line: 1, msg: format!("expected header `{CSV_HEADER}`") }),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { line: i + 1, msg };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(err(format!("expected 9 fields, found {}", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| err(format!("`{s}`: {e}")));
        let int = |s: &str| s.parse::<usize>().map_err(|e| err(format!("`{s}`: {e}")));
        rows.push(MetricsRow {
            dgp: f[0].to_string(),
            n: int(f[1])?,
            estimator: f[2].to_string(),
            mae: num(f[3])?,
            mse: num(f[4])?,
            median_abs: num(f[5])?,
            q90_abs: num(f[6])?,
            q95_abs: num(f[7])?,
            failures: int(f[8])?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_summaries() {
        let r = MetricsRow::from_errors("g".into(), 5, "e".into(), &[-1.0, 2.0, -3.0, 4.0, 5.0], 0);
        assert_eq!(r.mae, 3.0);
        assert_eq!(r.mse, 11.0);
        assert_eq!(r.median_abs, 3.0);
        assert!((r.q90_abs - 4.6).abs() < 1e-12);
        let empty = MetricsRow::from_errors("g".into(), 5, "e".into(), &[], 3);
        assert!(empty.mae.is_nan() && empty.failures == 3);
    }

    #[test]
    fn config_defaults_and_overrides() {
        let cfg = ExperimentConfig::from_toml("replications = 3\nns = [50]\n").unwrap();
        assert_eq!(cfg.replications, 3);
        assert_eq!(cfg.base_seed, 12345);
        assert_eq!(cfg.dgps.len(), 6);
        assert_eq!(cfg.estimators.len(), 7);
        let text = "ns = [10]\n[[dgps]]\nkind = \"pareto\"\ntail_a = 1.2\n[[estimators]]\nkind = \"mom\"\nk = 2\n";
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.dgps, vec![DgpSpec::SymmetricPareto { mu_star: 1.0, tail_a: 1.2 }]);
        assert_eq!(cfg.estimators, vec![EstimatorSpec::Mom { k: Some(2), shuffle_seed: None }]);
        assert!(ExperimentConfig::from_toml("replications = 0").is_err());
        assert!(ExperimentConfig::from_toml("bogus = 1").is_err());
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![MetricsRow::from_errors("d".into(), 7, "l2".into(), &[0.1, -1.0 / 3.0, 2.0e-17], 1)];
        let back = parse_csv(&to_csv(&rows)).unwrap();
        assert_eq!(back, rows);
        assert!(matches!(parse_csv("nope\n"), Err(Error::Parse { line: 1, .. })));
        let bad = format!("{CSV_HEADER}\nd,1,x,1,2,3\n");
        assert!(matches!(parse_csv(&bad), Err(Error::Parse { line: 2, .. })));
    }
}
