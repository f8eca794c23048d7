//! `are`: data generation, location estimation, benchmark sweeps, theory
//! checks and robust advantages from the command line.
//!
//! Exit codes: 0 success, 2 invalid flags or input, 3 I/O failure,
//! 4 numerical failure (for example no central root).

use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use are_core::advantage::{self, AdvantageConfig, NoiseSpec, RewardGroup};
use are_core::bench::{self, ExperimentConfig};
use are_core::calibration::{self, CalibConfig, LocationStep};
use are_core::dgp::{self, DgpSpec};
use are_core::estimators::{self, AreOptions, BlockPlan, EstimatorSpec, FixedLoss, Regime, TheoryTuning};
use are_core::gnc::GncConfig;
use are_core::{theory, Error};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "are", version, about = "Adaptive robust mean estimation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a sample from a data-generating process and write it as CSV (header `value`).
    Dgp(DgpArgs),
    /// Estimate the location of a one-column sample.
    Estimate(EstimateArgs),
    /// Run the Monte Carlo benchmark sweep and write the metrics CSV.
    Bench(BenchArgs),
    /// Run one Monte Carlo check of the estimators' large-sample behaviour.
    Theory(TheoryArgs),
    /// Compute robust advantages for reward groups, one comma-separated group per line.
    Advantage(AdvantageArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DgpKind {
    Gaussian,
    Lognormal,
    StudentT,
    Pareto,
    ContamRandom,
    ContamAdversarial,
    ContamBlock,
}

#[derive(Args)]
struct DgpArgs {
    #[arg(long, value_enum)]
    kind: DgpKind,
    /// Sample size.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 12345)]
    seed: u64,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    mu_star: f64,
    /// Gaussian standard deviation.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Log-normal log-scale.
    #[arg(long, default_value_t = 1.5)]
    tau: f64,
    /// Student-t scale.
    #[arg(long, default_value_t = 1.0)]
    s: f64,
    /// Student-t degrees of freedom (> 2).
    #[arg(long, default_value_t = 4.0)]
    nu: f64,
    /// Pareto tail index in (1, 2).
    #[arg(long, default_value_t = 1.5)]
    tail_a: f64,
    /// Clean-sample standard deviation for the contamination models.
    #[arg(long, default_value_t = 1.0)]
    sigma0: f64,
    /// Contamination fraction in (0, 1).
    #[arg(long, default_value_t = 0.05)]
    kappa: f64,
    /// Outlier magnitude M.
    #[arg(long, default_value_t = 100.0)]
    m_big: f64,
    /// Block count targeted by the block-aware adversary (required for contam-block).
    #[arg(long)]
    k: Option<usize>,
    /// Cap on the number of corrupted blocks.
    #[arg(long)]
    budget: Option<usize>,
}

impl DgpArgs {
    fn spec(&self) -> Result<DgpSpec, Error> {
        let mu_star = self.mu_star;
        Ok(match self.kind {
            DgpKind::Gaussian => DgpSpec::Gaussian { mu_star, sigma: self.sigma },
            DgpKind::Lognormal => DgpSpec::CenteredLogNormal { mu_star, tau: self.tau },
            DgpKind::StudentT => DgpSpec::StudentT { mu_star, s: self.s, nu: self.nu },
            DgpKind::Pareto => DgpSpec::SymmetricPareto { mu_star, tail_a: self.tail_a },
            DgpKind::ContamRandom => DgpSpec::ContamRandom { mu_star, sigma0: self.sigma0, kappa: self.kappa, m_big: self.m_big },
            DgpKind::ContamAdversarial => {
                DgpSpec::ContamAdversarial { mu_star, sigma0: self.sigma0, kappa: self.kappa, m_big: self.m_big }
            }
            DgpKind::ContamBlock => DgpSpec::ContamBlockAware {
                mu_star,
                sigma0: self.sigma0,
                k: self.k.ok_or_else(|| Error::Argument("--k is required for --kind contam-block".into()))?,
                m_big: self.m_big,
                budget: self.budget,
            },
        })
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EstimatorKind {
    Mean,
    Cauchy,
    Gm,
    Welsch,
    Adapt,
    GncAdapt,
    GncTls,
    Mom,
    Are,
    CentralRoot,
}

#[derive(Args)]
struct EstimateArgs {
    /// Input file with one number per line (optional `value` header); `-` or omitted reads stdin.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "are")]
    estimator: EstimatorKind,
    /// Scale c for the fixed losses (cauchy, gm, welsch).
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Block count for mom, are and central-root; default ⌈ln n⌉ (central-root: 1).
    #[arg(long)]
    k: Option<usize>,
    /// Shuffle blocks with this seed instead of splitting in input order.
    #[arg(long)]
    shuffle_seed: Option<u64>,
    /// Calibrate (α, c) once on the pooled sample for are.
    #[arg(long)]
    shared_fit: bool,
    /// Truncation threshold for gnc-tls; default 3·MAD.
    #[arg(long)]
    cbar: Option<f64>,
    /// Continuation rate for gnc-tls.
    #[arg(long, default_value_t = 1.4)]
    gamma: f64,
    /// Loss shape for central-root, in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Finite-variance tuning exponent for central-root: c_m = m^(1/2+γ), r_m = m^(γ/4).
    #[arg(long, default_value_t = 0.25)]
    gamma_exp: f64,
    /// Switch central-root to the heavy-tailed plan at this confidence level in (0, 1/2).
    #[arg(long)]
    delta: Option<f64>,
    /// Moment order ε of the heavy-tailed plan.
    #[arg(long, default_value_t = 1.0)]
    eps_moment: f64,
    /// Moment bound v of the heavy-tailed plan.
    #[arg(long, default_value_t = 1.0)]
    v_moment: f64,
    /// Scale multiplier τ of the heavy-tailed plan.
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
}

#[derive(Args)]
struct BenchArgs {
    /// TOML configuration; the built-in sweep is used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Override the number of replications (default 100).
    #[arg(long)]
    replications: Option<usize>,
    /// Override the base seed (default 12345).
    #[arg(long)]
    base_seed: Option<u64>,
    /// Override the sample sizes (default 200,500,1000,2000,5000).
    #[arg(long, value_delimiter = ',')]
    ns: Option<Vec<usize>>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TheoryCheck {
    Clt,
    Efficiency,
    HtBound,
    MedianBoost,
}

#[derive(Args)]
struct TheoryArgs {
    #[arg(long, value_enum)]
    which: TheoryCheck,
    /// Replications (default: clt 2000, efficiency 1000, ht-bound 1000, median-boost 20000 trials).
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long, default_value_t = 12345)]
    seed: u64,
    /// Sample size (default: clt 5000, efficiency 20000, ht-bound 2000 and 4× that).
    #[arg(long)]
    n: Option<usize>,
    /// Block count (default: efficiency ⌈ln n⌉, median-boost 32).
    #[arg(long)]
    k: Option<usize>,
    /// Finite-variance tuning exponent.
    #[arg(long, default_value_t = 0.25)]
    gamma_exp: f64,
    /// Confidence level for ht-bound.
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
}

#[derive(Args)]
struct AdvantageArgs {
    /// Reward groups, one comma-separated group per line; `-` or omitted reads stdin.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Inject sparse Cauchy spikes before normalizing.
    #[arg(long)]
    noise: bool,
    #[arg(long, default_value_t = 12345)]
    seed: u64,
    /// Probability that a group is corrupted.
    #[arg(long, default_value_t = 0.2)]
    p_group: f64,
    /// Cauchy scale of the spike draw.
    #[arg(long, default_value_t = 1.0)]
    cauchy_scale: f64,
    /// Multiplier on |Cauchy| before clipping.
    #[arg(long, default_value_t = 10.0)]
    spike_scale: f64,
    /// Largest spike magnitude Δ_max.
    #[arg(long, default_value_t = 10.0)]
    spike_clip: f64,
    /// Push the group maximum down instead of up.
    #[arg(long)]
    negative_spikes: bool,
    /// Block count for the robust center; default ⌈ln |group|⌉, one block below 4k rewards.
    #[arg(long)]
    k: Option<usize>,
    /// Denominator floor ε in (R − μ̃)/(σ + ε).
    #[arg(long, default_value_t = 1e-8)]
    eps_floor: f64,
    /// Scale by 1.4826·MAD instead of the standard deviation.
    #[arg(long)]
    robust_scale: bool,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Io(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io { .. } => Failure::Io(e.to_string()),
            ref n if n.is_numerical() => Failure::Numerical(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

fn io_failure(what: &str, e: io::Error) -> Failure {
    Failure::Io(format!("{what}: {e}"))
}

fn read_input(path: Option<&Path>) -> Result<String, Failure> {
    let mut text = String::new();
    match path {
        Some(p) if p != Path::new("-") => {
            text = std::fs::read_to_string(p).map_err(|e| io_failure(&p.display().to_string(), e))?;
        }
        _ => {
            io::stdin().read_to_string(&mut text).map_err(|e| io_failure("stdin", e))?;
        }
    }
    Ok(text)
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| io_failure(&p.display().to_string(), e)),
        None => io::stdout().lock().write_all(text.as_bytes()).map_err(|e| io_failure("stdout", e)),
    }
}

/// One number per line; blank lines skipped; an optional non-numeric header on line 1.
fn parse_column(text: &str) -> Result<Vec<f64>, Failure> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        match t.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            Ok(_) => return Err(Failure::Usage(format!("line {}: non-finite value `{t}`", i + 1))),
            Err(_) if i == 0 && t.chars().all(|c| c.is_ascii_alphabetic() || c == '_') => {}
            Err(e) => return Err(Failure::Usage(format!("line {}: `{t}`: {e}", i + 1))),
        }
    }
    if out.is_empty() {
        return Err(Failure::Usage("input holds no values".into()));
    }
    Ok(out)
}

fn parse_groups(text: &str) -> Result<Vec<RewardGroup>, Failure> {
    let mut groups = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rewards = line
            .split(',')
            .map(|f| {
                let f = f.trim();
                match f.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(Failure::Usage(format!("line {}: invalid reward `{f}`", i + 1))),
                }
            })
            .collect::<Result<Vec<f64>, Failure>>()?;
        groups.push(RewardGroup { group_id: groups.len(), rewards });
    }
    Ok(groups)
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn cmd_dgp(args: &DgpArgs) -> Result<(), Failure> {
    let values = dgp::sample(&args.spec()?, args.n, args.seed)?;
    let mut buf = Vec::new();
    dgp::write_values(&values, &mut buf).map_err(|e| io_failure("buffer", e))?;
    write_output(args.out.as_deref(), &String::from_utf8(buf).expect("ascii output"))
}

fn cmd_estimate(args: &EstimateArgs) -> Result<(), Failure> {
    let data = parse_column(&read_input(args.input.as_deref())?)?;
    let mut lines: Vec<String> = Vec::new();
    let plan = |n: usize| {
        let k = args.k.unwrap_or_else(|| estimators::default_block_count(n.max(2), None));
        match args.shuffle_seed {
            Some(s) => BlockPlan::shuffled(k, s),
            None => BlockPlan::sequential(k),
        }
    };
    let estimate = match args.estimator {
        EstimatorKind::Are => {
            let p = plan(data.len());
            let options = AreOptions { shared_fit: args.shared_fit, pinned: false };
            let report = estimators::are_detailed(&data, &p, &CalibConfig::default(), &GncConfig::default(), options)?;
            lines.push(format!("blocks={}", report.blocks.len()));
            for (j, b) in report.blocks.iter().enumerate() {
                lines.push(format!("block.{j}.x={}", fmt(b.x)));
                if let Some(params) = b.params {
                    lines.push(format!("block.{j}.alpha={}", fmt(params.alpha_value().unwrap_or(f64::NEG_INFINITY))));
                    lines.push(format!("block.{j}.c={}", fmt(params.c())));
                }
                lines.push(format!("block.{j}.alternations={}", b.alternations));
                lines.push(format!("block.{j}.converged={}", b.converged));
            }
            report.estimate
        }
        EstimatorKind::Adapt | EstimatorKind::GncAdapt if data.iter().any(|v| *v != data[0]) => {
            let step = if args.estimator == EstimatorKind::Adapt { LocationStep::Pinned } else { LocationStep::Gnc };
            let fit = calibration::alternate_fit_with(&data, &CalibConfig::default(), &GncConfig::default(), step)?;
            lines.push(format!("alpha={}", fmt(fit.params.alpha_value().unwrap_or(f64::NEG_INFINITY))));
            lines.push(format!("c={}", fmt(fit.params.c())));
            lines.push(format!("alternations={}", fit.alternations));
            lines.push(format!("converged={}", fit.converged));
            lines.push(format!("nll={}", fmt(fit.nll_value)));
            fit.x
        }
        kind => {
            let spec = match kind {
                EstimatorKind::Mean => EstimatorSpec::Mean,
                EstimatorKind::Cauchy => EstimatorSpec::FixedLoss { loss: FixedLoss::Cauchy, c: args.c },
                EstimatorKind::Gm => EstimatorSpec::FixedLoss { loss: FixedLoss::GemanMcClure, c: args.c },
                EstimatorKind::Welsch => EstimatorSpec::FixedLoss { loss: FixedLoss::Welsch, c: args.c },
                EstimatorKind::Adapt => EstimatorSpec::Adapt,
                EstimatorKind::GncAdapt => EstimatorSpec::GncAdapt,
                EstimatorKind::GncTls => EstimatorSpec::GncTls { cbar: args.cbar, gamma: args.gamma },
                EstimatorKind::Mom => {
                    let p = plan(data.len());
                    lines.push(format!("blocks={}", p.k));
                    EstimatorSpec::Mom { k: Some(p.k), shuffle_seed: args.shuffle_seed }
                }
                EstimatorKind::CentralRoot => {
                    let regime = match args.delta {
                        Some(delta) => Regime::HeavyTailed {
                            delta,
                            eps_moment: args.eps_moment,
                            v_moment: args.v_moment,
                            tau: args.tau,
                        },
                        None => Regime::FiniteVariance { gamma_exp: args.gamma_exp },
                    };
                    EstimatorSpec::CentralRoot { tuning: TheoryTuning { regime, alpha: args.alpha }, k: args.k }
                }
                EstimatorKind::Are => unreachable!("handled above"),
            };
            spec.estimate(&data)?
        }
    };
    let mut out = format!("estimator={}\nn={}\nestimate={}\n", args.estimator.to_possible_value().expect("named").get_name(), data.len(), fmt(estimate));
    for l in lines {
        out.push_str(&l);
        out.push('\n');
    }
    write_output(None, &out)
}

fn cmd_bench(args: &BenchArgs) -> Result<(), Failure> {
    let mut config = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(w) = args.workers {
        config.workers = Some(w);
    }
    if let Some(r) = args.replications {
        config.replications = r;
    }
    if let Some(s) = args.base_seed {
        config.base_seed = s;
    }
    if let Some(ns) = &args.ns {
        config.ns = ns.clone();
    }
    let rows = bench::run_experiment(&config)?;
    match &args.out {
        Some(p) => bench::emit_csv(&rows, p)?,
        None => write_output(None, &bench::to_csv(&rows))?,
    }
    Ok(())
}

fn cmd_theory(args: &TheoryArgs) -> Result<(), Failure> {
    let report = match args.which {
        TheoryCheck::Clt => theory::clt(args.n.unwrap_or(5000), args.gamma_exp, args.reps.unwrap_or(2000), args.seed)?,
        TheoryCheck::Efficiency => {
            let n = args.n.unwrap_or(20_000);
            let k = args.k.unwrap_or_else(|| (n as f64).ln().ceil() as usize);
            theory::efficiency(n, k, args.gamma_exp, args.reps.unwrap_or(1000), args.seed)?
        }
        TheoryCheck::HtBound => theory::ht_bound(args.n.unwrap_or(2000), args.delta, args.reps.unwrap_or(1000), args.seed)?,
        TheoryCheck::MedianBoost => theory::median_boost(args.k.unwrap_or(32), args.reps.unwrap_or(20_000), args.seed)?,
    };
    // A check that runs but misses its band is reported through `pass=false`, not the exit code.
    write_output(None, &format!("{report}\n"))
}

fn cmd_advantage(args: &AdvantageArgs) -> Result<(), Failure> {
    let mut groups = parse_groups(&read_input(args.input.as_deref())?)?;
    if args.noise {
        let spec = NoiseSpec {
            p_group: args.p_group,
            cauchy_scale: args.cauchy_scale,
            spike_scale: args.spike_scale,
            spike_clip: args.spike_clip,
            sign: if args.negative_spikes { -1.0 } else { 1.0 },
        };
        groups = advantage::inject_spike_noise(&groups, &spec, args.seed)?;
    }
    let cfg = AdvantageConfig { eps_floor: args.eps_floor, k: args.k, robust_scale: args.robust_scale, ..AdvantageConfig::default() };
    let mut out = String::new();
    for g in &groups {
        let adv = advantage::robust_advantages(&g.rewards, &cfg)?;
        out.push_str(&adv.iter().map(|a| fmt(*a)).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    write_output(args.out.as_deref(), &out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Dgp(a) => cmd_dgp(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Theory(a) => cmd_theory(a),
        Command::Advantage(a) => cmd_advantage(a),
    };
    let _ = io::stdout().lock().flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (code, msg) = match f {
                Failure::Usage(m) => (2, m),
                Failure::Io(m) => (3, m),
                Failure::Numerical(m) => (4, m),
            };
            let _ = writeln!(io::stderr().lock(), "error: {msg}");
            ExitCode::from(code)
        }
    }
}
