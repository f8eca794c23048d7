//! Acceptance gate: every criterion runs at its stated tolerance and prints one
//! PASS/FAIL line with the observed values. The process exits nonzero if any
//! criterion fails.

use std::f64::consts::PI;
use std::time::Instant;

use are_core::advantage::{self, AdvantageConfig, DacrScores};
use are_core::bench::{self, ExperimentConfig, MetricsRow};
use are_core::calibration::{self, CalibConfig, ScaleBounds};
use are_core::dgp::{self, DgpSpec, Rng};
use are_core::estimators::{self, BlockPlan, EstimatorSpec};
use are_core::gnc::{self, GncConfig, Init};
use are_core::loss::{self, LossParams};
use are_core::{stats, theory};

const SEED: u64 = 12345;

struct Gate {
    failed: Vec<String>,
}

impl Gate {
    fn record(&mut self, id: &str, what: &str, pass: bool, observed: String) {
        println!("{} {id}: {what} | {observed}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failed.push(id.to_string());
        }
    }
}

fn sweep(dgp: DgpSpec, n: usize) -> (Vec<MetricsRow>, f64) {
    let cfg = ExperimentConfig {
        dgps: vec![dgp],
        ns: vec![n],
        replications: 100,
        base_seed: SEED,
        estimators: vec![EstimatorSpec::Mean, EstimatorSpec::are_default()],
        workers: Some(1),
    };
    let t = Instant::now();
    let rows = bench::run_experiment(&cfg).expect("sweep runs");
    (rows, t.elapsed().as_secs_f64())
}

fn gaussian_sweep(gate: &mut Gate) {
    let (rows, secs) = sweep(DgpSpec::gaussian(), 5000);
    let (l2, are) = (rows[0].mae, rows[1].mae);
    let pass = (0.009..=0.015).contains(&l2) && (0.014..=0.030).contains(&are) && secs <= 180.0;
    gate.record(
        "gaussian-sweep",
        "Gaussian n=5000 R=100: l2 MAE in [0.009,0.015], ARE MAE in [0.014,0.030], <= 180 s",
        pass,
        format!("l2={l2:.6} are={are:.6} runtime={secs:.1}s failures={}", rows[1].failures),
    );
}

fn adversarial_sweep(gate: &mut Gate) {
    let (rows, _) = sweep(DgpSpec::contam_adversarial(), 1000);
    let (l2, are) = (rows[0].mae, rows[1].mae);
    gate.record(
        "adversarial-sweep",
        "adversarial contamination n=1000: l2 MAE in [4.5,5.5], ARE MAE <= 0.10",
        (4.5..=5.5).contains(&l2) && are <= 0.10,
        format!("l2={l2:.6} are={are:.6}"),
    );
}

fn pareto_sweep(gate: &mut Gate) {
    let (rows, _) = sweep(DgpSpec::pareto(), 5000);
    let (l2, are) = (rows[0].mae, rows[1].mae);
    gate.record(
        "pareto-sweep",
        "symmetric Pareto n=5000: ARE MAE in [1.1,1.6], l2 MAE <= 0.5",
        (1.1..=1.6).contains(&are) && l2 <= 0.5,
        format!("l2={l2:.6} are={are:.6} are_median_abs={:.6}", rows[1].median_abs),
    );
}

fn block_efficiency(gate: &mut Gate) {
    let n = 20_000;
    let k = (n as f64).ln().ceil() as usize;
    let t = Instant::now();
    let rep = theory::efficiency(n, k, 0.25, 1000, SEED).expect("efficiency check runs");
    let secs = t.elapsed().as_secs_f64();
    let ratio = rep.stat("variance_ratio").unwrap();
    gate.record(
        "block-efficiency",
        "efficiency n=20000 k=10 R=1000: Var(ARE)/Var(mean) in [1.3,1.9], <= 300 s",
        (1.3..=1.9).contains(&ratio) && secs <= 300.0 && k == 10,
        format!("ratio={ratio:.4} k={k} runtime={secs:.1}s"),
    );
}

fn central_root_clt(gate: &mut Gate) {
    let rep = theory::clt(5000, 0.25, 2000, SEED).expect("clt check runs");
    let (var, qq) = (rep.stat("variance").unwrap(), rep.stat("qq_correlation").unwrap());
    gate.record(
        "central-root-clt",
        "central root m=5000 R=2000: Var(sqrt(m)(X-mu)) in [0.9,1.1], Q-Q corr >= 0.995",
        (0.9..=1.1).contains(&var) && qq >= 0.995,
        format!("variance={var:.4} qq={qq:.5}"),
    );
}

fn heavy_tail_bound(gate: &mut Gate) {
    let rep = theory::ht_bound(2000, 0.05, 1000, SEED).expect("ht check runs");
    let (c1, c4, shrink) = (
        rep.stat("coverage_n").unwrap(),
        rep.stat("coverage_4n").unwrap(),
        rep.stat("shrink_factor").unwrap(),
    );
    gate.record(
        "heavy-tail-bound",
        "Student-t(4) heavy-tailed plan delta=0.05: coverage >= 0.95 at n=2000 and 8000, shrink in [1.6,2.4]",
        c1 >= 0.95 && c4 >= 0.95 && (1.6..=2.4).contains(&shrink),
        format!("C={} coverage_2000={c1:.3} coverage_8000={c4:.3} shrink={shrink:.3}", theory::HT_BOUND_C),
    );
}

fn median_boosting(gate: &mut Gate) {
    let rep = theory::median_boost(32, 20_000, SEED).expect("median boost runs");
    let rate = rep.stat("failure_rate").unwrap();
    gate.record(
        "median-boosting",
        "median boosting k=32, 20000 trials: failure rate <= 0.03",
        rate <= 0.03,
        format!("rate={rate:.5} bound={:.5}", rep.stat("bound").unwrap()),
    );
}

fn block_aware_breakdown(gate: &mut Gate) {
    let spec = DgpSpec::ContamBlockAware { mu_star: 1.0, sigma0: 1.0, k: 10, m_big: 1e6, budget: None };
    let plan = BlockPlan::sequential(10);
    let (mut worst_mom, mut worst_are) = (f64::INFINITY, 0.0f64);
    let mut ok = 0;
    for s in 0..20 {
        let x = dgp::sample(&spec, 1000, SEED + s).unwrap();
        let m = (estimators::mom(&x, &plan).unwrap() - 1.0).abs();
        let a = (estimators::are(&x, &plan, &CalibConfig::default(), &GncConfig::default()).unwrap() - 1.0).abs();
        worst_mom = worst_mom.min(m);
        worst_are = worst_are.max(a);
        if m >= 50.0 && a <= 0.5 {
            ok += 1;
        }
    }
    gate.record(
        "block-aware-breakdown",
        "block-aware adversary n=1000 k=10 M=1e6: |mom-mu| >= 50 and |are-mu| <= 0.5 on 20/20 seeds",
        ok == 20,
        format!("seeds_ok={ok}/20 min|mom-mu|={worst_mom:.2} max|are-mu|={worst_are:.4}"),
    );
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn loss_and_solver_analytics(gate: &mut Gate) {
    // Gradient against central differences.
    let mut worst_grad = 0.0f64;
    for &alpha in &[-2.0, -0.5, 0.0, 0.5, 1.0, 2.0] {
        for &c in &[0.5, 1.0, 3.0] {
            let p = LossParams::new(alpha, c).unwrap();
            for i in -40..=40 {
                let eps = 0.25 * i as f64;
                let d = loss::drho_deps(eps, &p);
                if i == 0 {
                    worst_grad = worst_grad.max(d.abs());
                    continue;
                }
                let h = 1e-5 * eps.abs().max(1.0);
                let fd = (loss::rho(eps + h, &p) - loss::rho(eps - h, &p)) / (2.0 * h);
                worst_grad = worst_grad.max(rel_err(fd, d));
            }
        }
    }
    // General expression next to the closed forms.
    let mut worst_cont = 0.0f64;
    for (alpha, closed) in [(2.0 - 1e-6, 2.0), (1e-6, 0.0), (-2.0 - 1e-6, -2.0), (-2.0 + 1e-6, -2.0)] {
        let p = LossParams::new(closed, 1.0).unwrap();
        for i in 1..=40 {
            let eps = 0.25 * i as f64;
            worst_cont = worst_cont.max(rel_err(loss::rho_general_form(eps, alpha, 1.0), loss::rho(eps, &p)));
        }
    }
    // Normalizers.
    let z2 = (loss::partition_function(2.0).unwrap() - (2.0 * PI).sqrt()).abs();
    let z0 = (loss::partition_function(0.0).unwrap() - PI * 2f64.sqrt()).abs();
    let h = 1e-4;
    let trap: f64 = (0..=1_200_000)
        .map(|i| {
            let u = -60.0 + i as f64 * h;
            let w = if i == 0 || i == 1_200_000 { 0.5 } else { 1.0 };
            w * (1.0 - (1.0 + u * u).sqrt()).exp()
        })
        .sum::<f64>()
        * h;
    let z1 = (loss::partition_function(1.0).unwrap() - trap).abs();
    // IRLS majorize-minimize descent at fixed shape, one update per call.
    let data = [0.0, 0.2, -0.4, 0.1, 0.3, 8.0, -6.0, 15.0, 0.05, -0.15];
    let mut worst_rise = f64::NEG_INFINITY;
    for &(f, c) in &[(0.0, 1.0), (1.0, 0.5), (-2.0, 1.0), (0.5, 2.0)] {
        let p = LossParams::new(f, c).unwrap();
        let obj = |x: f64| data.iter().map(|v| loss::rho(v - x, &p)).sum::<f64>();
        let mut x = 5.0;
        for _ in 0..50 {
            let cfg = GncConfig { t_max: 1, weight_floor: 1e-12, init: Init::Explicit(x), ..GncConfig::default() };
            let next = gnc::irls_fixed(&data, f, c, &cfg).unwrap().x;
            worst_rise = worst_rise.max(obj(next) - obj(x));
            x = next;
        }
    }
    // Equivariance of the solver and of the alternating fit.
    let sample = dgp::sample(&DgpSpec::student_t(), 300, SEED).unwrap();
    let shift = 7.5;
    let scale = 3.0;
    let shifted: Vec<f64> = sample.iter().map(|v| v + shift).collect();
    let scaled: Vec<f64> = sample.iter().map(|v| v * scale).collect();
    let base = gnc::gnc_irls(&sample, 0.5, 1.0, &GncConfig::default()).unwrap().x;
    let g_shift = (gnc::gnc_irls(&shifted, 0.5, 1.0, &GncConfig::default()).unwrap().x - shift - base).abs();
    let scaled_cfg = GncConfig { eps_x: 1e-8 * scale, ..GncConfig::default() };
    let g_scale = (gnc::gnc_irls(&scaled, 0.5, scale, &scaled_cfg).unwrap().x / scale - base).abs();
    let wide = CalibConfig { c_bounds: ScaleBounds::Relative { lo: 1e-4, hi: 1e4 }, ..CalibConfig::default() };
    let fit = calibration::alternate_fit(&sample, &wide, &GncConfig::default()).unwrap();
    let fit_shift = calibration::alternate_fit(&shifted, &wide, &GncConfig::default()).unwrap();
    let fit_scale = calibration::alternate_fit(&scaled, &wide, &scaled_cfg).unwrap();
    let a_shift = (fit_shift.x - shift - fit.x)
        .abs()
        .max((fit_shift.params.alpha_value().unwrap() - fit.params.alpha_value().unwrap()).abs());
    let a_scale = (fit_scale.x / scale - fit.x)
        .abs()
        .max((fit_scale.params.c() / scale - fit.params.c()).abs())
        .max((fit_scale.params.alpha_value().unwrap() - fit.params.alpha_value().unwrap()).abs());
    let equi = g_shift.max(g_scale).max(a_shift).max(a_scale);

    let pass = worst_grad < 1e-6 && worst_cont < 1e-5 && z2 < 1e-6 && z0 < 1e-6 && z1 < 1e-7 && worst_rise <= 1e-10 && equi <= 1e-9;
    gate.record(
        "loss-and-solver-analytics",
        "analytic suite: gradient rel err < 1e-6, continuity < 1e-5, Z values, IRLS descent, equivariance",
        pass,
        format!(
            "grad={worst_grad:.2e} cont={worst_cont:.2e} |Z2|={z2:.1e} |Z0|={z0:.1e} |Z1-trap|={z1:.1e} rise={worst_rise:.1e} equivariance={equi:.1e}"
        ),
    );
}

fn advantage_normalization(gate: &mut Gate) {
    let cfg = AdvantageConfig::default();
    let mut rng = Rng::new(SEED);
    let clean: Vec<f64> = (0..32).map(|_| 0.5 + 0.1 * rng.normal()).collect();
    let mut shift_err = 0.0f64;
    for t in [-3.0, 0.25, 5.0, 100.0] {
        let moved: Vec<f64> = clean.iter().map(|r| r + t).collect();
        let a = advantage::robust_advantages(&clean, &cfg).unwrap();
        let b = advantage::robust_advantages(&moved, &cfg).unwrap();
        for (x, y) in a.iter().zip(&b) {
            shift_err = shift_err.max((x - y).abs());
        }
    }
    let mut spiked = clean.clone();
    spiked.push(10.0);
    let clean_mean = stats::mean(&clean);
    let robust = advantage::robust_center(&spiked, &cfg).unwrap();
    let plain = stats::mean(&spiked);
    let contrast = (robust - 0.5).abs() <= 0.05 && plain >= 0.75;
    let s1 = advantage::clipped_surrogate(&[2.0], &[1.0], 0.2, &[0.0], 0.0).unwrap();
    let s2 = advantage::clipped_surrogate(&[2.0], &[-1.0], 0.2, &[0.0], 0.0).unwrap();
    let (r1, r2) = advantage::dacr_returns(&DacrScores { s_ans_1: 0.2, s_ans_2: 0.5, s_rw_1: 0.8, s_rw_2: 0.6 }, 1.0);
    let hand = s1 == 1.2 && s2 == -2.0 && (r1 - 0.9).abs() < 1e-15 && (r2 - 1.2).abs() < 1e-15;
    gate.record(
        "advantage-normalization",
        "advantages: shift invariance to 1e-9, spiked-batch center contrast, surrogate and return hand examples",
        shift_err <= 1e-9 && contrast && hand,
        format!(
            "shift_err={shift_err:.1e} robust={robust:.4} mean={plain:.4} clean_mean={clean_mean:.4} surrogate=({s1},{s2}) returns=({r1:.15},{r2:.15})"
        ),
    );
}

fn bench_determinism(gate: &mut Gate) {
    let base = ExperimentConfig {
        dgps: vec![DgpSpec::gaussian(), DgpSpec::contam_random(), DgpSpec::pareto()],
        ns: vec![200, 500],
        replications: 8,
        ..ExperimentConfig::default()
    };
    let run = |workers| bench::to_csv(&bench::run_experiment(&ExperimentConfig { workers: Some(workers), ..base.clone() }).unwrap());
    let serial = run(1);
    let parallel = run(8);
    let again = run(1);
    gate.record(
        "bench-determinism",
        "bench output bit-identical for 1 vs 8 workers and across repeated runs",
        serial == parallel && serial == again,
        format!("rows={} bytes={}", serial.lines().count() - 1, serial.len()),
    );
}

fn main() {
    let mut gate = Gate { failed: Vec::new() };
    let criteria: [fn(&mut Gate); 11] = [gaussian_sweep, adversarial_sweep, pareto_sweep, block_efficiency, central_root_clt, heavy_tail_bound, median_boosting, block_aware_breakdown, loss_and_solver_analytics, advantage_normalization, bench_determinism];
    for c in criteria {
        c(&mut gate);
    }
    if gate.failed.is_empty() {
        println!("acceptance: all 11 criteria passed");
    } else {
        println!("acceptance: {} of 11 criteria failed: {}", gate.failed.len(), gate.failed.join(", "));
        std::process::exit(1);
    }
}
