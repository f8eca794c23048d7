//! Monte Carlo and oracle checks for calibration, block estimators, samplers,
//! the benchmark harness and spike noise.

use are_core::advantage::NoiseSpec;
use are_core::bench::{self, ExperimentConfig};
use are_core::calibration::{self, CalibConfig};
use are_core::dgp::{self, DgpSpec, Rng};
use are_core::estimators::{self, BlockPlan, EstimatorSpec};
use are_core::gnc::GncConfig;
use are_core::loss::{self, LossParams};
use are_core::stats;

#[test]
fn gaussian_sample_calibrates_near_quadratic_unit_scale() {
    let mut rng = Rng::new(11);
    let x: Vec<f64> = (0..2000).map(|_| rng.normal()).collect();
    let p = calibration::fit_shape_scale(&x, 0.0, &CalibConfig::default()).unwrap();
    let (alpha, c) = (p.alpha_value().unwrap(), p.c());
    assert!(alpha >= 1.7, "alpha = {alpha}");
    assert!((0.8..=1.25).contains(&c), "c = {c}");
    // Grid oracle: no point near the Gaussian corner beats the fit.
    let best = loss::nll(&x, 0.0, &p).unwrap();
    for i in 0..=20 {
        for j in 0..=20 {
            let q = LossParams::new(1.0 + 0.05 * i as f64, 0.8 + 0.0225 * j as f64).unwrap();
            assert!(loss::nll(&x, 0.0, &q).unwrap() >= best - 1e-6);
        }
    }
}

#[test]
fn cauchy_like_sample_calibrates_to_small_shape() {
    // √2 times a standard Cauchy has density proportional to 1/(1 + u²/2).
    let mut rng = Rng::new(12);
    let x: Vec<f64> = (0..2000).map(|_| rng.cauchy(2f64.sqrt())).collect();
    let p = calibration::fit_shape_scale(&x, 0.0, &CalibConfig::default()).unwrap();
    assert!(p.alpha_value().unwrap() <= 0.3, "{p:?}");
}

#[test]
fn contaminated_sample_location_matches_grid_minimizer() {
    let mut x = dgp::sample(&DgpSpec::gaussian(), 1000, 13).unwrap();
    x.extend([100.0; 5]);
    let fit = calibration::alternate_fit(&x, &CalibConfig::default(), &GncConfig::default()).unwrap();
    assert!((fit.x - 1.0).abs() <= 0.15, "x = {}", fit.x);
    let (mut best_x, mut best) = (0.0, f64::INFINITY);
    for i in 0..=20_000 {
        let t = i as f64 * 1e-4;
        let v = loss::nll(&x, t, &fit.params).unwrap();
        if v < best {
            (best_x, best) = (t, v);
        }
    }
    assert!((fit.x - best_x).abs() <= 1e-3, "fit {} vs grid {best_x}", fit.x);
    for w in fit.nll_trace.windows(2) {
        assert!(w[1] <= w[0] + 1e-6, "trace {:?}", fit.nll_trace);
    }
}

#[test]
fn are_on_gaussian_sample() {
    let x = dgp::sample(&DgpSpec::gaussian(), 2000, 14).unwrap();
    let est = estimators::are(&x, &BlockPlan::sequential(7), &CalibConfig::default(), &GncConfig::default()).unwrap();
    assert!((est - 1.0).abs() <= 0.15, "{est}");
}

#[test]
fn central_root_matches_grid_zero() {
    let data = [-1.0, 0.0, 1.0, 10.0];
    let root = estimators::central_root(&data, 1.0, 5.0, 0.5, 5.0).unwrap();
    let p = LossParams::new(1.0, 5.0).unwrap();
    let h = 1e-7;
    let steps = (10.0 / h) as usize;
    let mut prev = estimators::empirical_score(&data, -4.5, &p);
    let mut zero = None;
    for i in 1..=steps {
        let t = -4.5 + i as f64 * h;
        let g = estimators::empirical_score(&data, t, &p);
        if prev.signum() != g.signum() {
            zero = Some(t - h / 2.0);
            break;
        }
        prev = g;
    }
    let zero = zero.expect("grid sign change");
    assert!((root - zero).abs() <= 1e-6, "{root} vs {zero}");
}

#[test]
fn central_root_with_huge_scale_is_the_mean() {
    let data = [-1.0, 0.0, 1.0, 10.0, 3.5, -2.25];
    let pilot = stats::median(&data);
    let root = estimators::central_root(&data, 1.0, 1e6, pilot, 10.0).unwrap();
    assert!((root - stats::mean(&data)).abs() <= 1e-6);
    let p = LossParams::new(1.0, 1e6).unwrap();
    assert!(estimators::empirical_score(&data, root, &p).abs() <= 1e-10 / 1e6);
}

#[test]
fn block_aware_adversary_breaks_mom_but_not_are() {
    let spec = DgpSpec::ContamBlockAware { mu_star: 1.0, sigma0: 1.0, k: 10, m_big: 1e6, budget: None };
    let x = dgp::sample(&spec, 1000, 15).unwrap();
    assert_eq!(x.iter().filter(|v| **v == 1.0 + 1e6).count(), 5);
    let plan = BlockPlan::sequential(10);
    assert!((estimators::mom(&x, &plan).unwrap() - 1.0).abs() >= 50.0);
    let are = estimators::are(&x, &plan, &CalibConfig::default(), &GncConfig::default()).unwrap();
    assert!((are - 1.0).abs() <= 0.5, "{are}");
}

#[test]
fn median_of_blocks_fails_rarely() {
    for k in [16, 32] {
        let rep = are_core::theory::median_boost(k, 20_000, 16).unwrap();
        assert!(rep.pass, "{rep}");
    }
}

#[test]
fn gaussian_sample_obeys_law_of_large_numbers() {
    let x = dgp::sample(&DgpSpec::gaussian(), 1_000_000, 17).unwrap();
    assert!((stats::mean(&x) - 1.0).abs() < 0.005);
    assert!((stats::std_pop(&x) - 1.0).abs() < 0.005);
}

#[test]
fn pareto_magnitudes_and_symmetry() {
    let x = dgp::sample(&DgpSpec::pareto(), 1_000_000, 18).unwrap();
    let dev: Vec<f64> = x.iter().map(|v| v - 1.0).collect();
    let mean_abs = dev.iter().map(|d| d.abs()).sum::<f64>() / dev.len() as f64;
    assert!((2.5..=3.5).contains(&mean_abs), "{mean_abs}");
    // P(|U| > 2) = 2^{-1.5}
    let tail = dev.iter().filter(|d| d.abs() > 2.0).count() as f64 / dev.len() as f64;
    assert!((tail - 2f64.powf(-1.5)).abs() < 0.005, "{tail}");
    let pos = dev.iter().filter(|d| **d > 0.0).count() as f64 / dev.len() as f64;
    assert!((pos - 0.5).abs() < 0.005, "{pos}");
}

#[test]
fn lognormal_is_mean_preserving() {
    let x = dgp::sample(&DgpSpec::lognormal(), 1_000_000, 19).unwrap();
    assert!((stats::mean(&x) - 1.0).abs() <= 0.05, "{}", stats::mean(&x));
}

#[test]
fn bench_uses_common_random_numbers() {
    let cfg = ExperimentConfig {
        dgps: vec![DgpSpec::gaussian(), DgpSpec::student_t()],
        ns: vec![50, 80],
        replications: 5,
        base_seed: 100,
        estimators: vec![EstimatorSpec::Mean, EstimatorSpec::Mom { k: Some(1), shuffle_seed: None }],
        workers: Some(2),
    };
    let cells = bench::run_cells(&cfg).unwrap();
    assert_eq!(cells.len(), 4);
    let mut idx = 0;
    for spec in &cfg.dgps {
        for &n in &cfg.ns {
            for (r, out) in cells[idx].iter().enumerate() {
                let data = dgp::sample(spec, n, 100 + r as u64).unwrap();
                assert_eq!(out.dataset_hash, bench::hash_dataset(&data));
                // One block is the plain mean.
                let (a, b) = (out.estimates[0].unwrap(), out.estimates[1].unwrap());
                assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            }
            idx += 1;
        }
    }
    let rows = bench::run_experiment(&cfg).unwrap();
    assert_eq!(rows.len(), 2 * 2 * 2);
    let csv = bench::to_csv(&rows);
    assert_eq!(csv.lines().next().unwrap(), bench::CSV_HEADER);
    assert_eq!(bench::parse_csv(&csv).unwrap(), rows);
}

#[test]
fn sample_mean_error_on_small_gaussian_cells() {
    let cfg = ExperimentConfig {
        dgps: vec![DgpSpec::gaussian()],
        ns: vec![200],
        replications: 100,
        base_seed: 20,
        estimators: vec![EstimatorSpec::Mean],
        workers: None,
    };
    let rows = bench::run_experiment(&cfg).unwrap();
    assert!((0.04..=0.08).contains(&rows[0].mae), "{}", rows[0].mae);
}

#[test]
fn spikes_never_exceed_the_clip() {
    let spec = NoiseSpec::default();
    let mut rng = Rng::new(21);
    for _ in 0..100_000 {
        let s = spec.spike(rng.cauchy(spec.cauchy_scale));
        assert!(s.abs() <= spec.spike_clip);
        assert!(s >= 0.0);
    }
}
