use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn are(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_are")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn field(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in {text}"))
        .parse()
        .unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn dgp_is_deterministic_and_sized() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        stdout(&are(&["dgp", "--kind", "gaussian", "--n", "100", "--seed", "1", "--out", p.to_str().unwrap()]));
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert_eq!(text.lines().count(), 101);
    assert_eq!(text.lines().next(), Some("value"));
}

#[test]
fn block_aware_dgp_corrupts_five_values() {
    let text = stdout(&are(&["dgp", "--kind", "contam-block", "--k", "10", "--m-big", "1e6", "--n", "1000"]));
    let big = text.lines().skip(1).filter(|l| l.parse::<f64>().unwrap() > 1e5).count();
    assert_eq!(big, 5);
}

#[test]
fn estimate_examples() {
    let dir = tempfile::tempdir().unwrap();
    let three = write(dir.path(), "three.txt", "1\n2\n3\n");
    assert_eq!(field(&stdout(&are(&["estimate", "--input", &three, "--estimator", "mean"])), "estimate"), 2.0);
    let six = write(dir.path(), "six.txt", "value\n1\n2\n3\n4\n5\n6\n");
    let out = stdout(&are(&["estimate", "--input", &six, "--estimator", "mom", "--k", "3"]));
    assert_eq!(field(&out, "estimate"), 3.5);
    assert_eq!(field(&out, "blocks"), 3.0);
    let constant = write(dir.path(), "const.txt", &"7\n".repeat(40));
    assert_eq!(field(&stdout(&are(&["estimate", "--input", &constant])), "estimate"), 7.0);
}

#[test]
fn estimate_reports_block_fits() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("g.csv");
    stdout(&are(&["dgp", "--kind", "gaussian", "--n", "400", "--out", data.to_str().unwrap()]));
    let out = stdout(&are(&["estimate", "--input", data.to_str().unwrap(), "--k", "4"]));
    assert_eq!(field(&out, "blocks"), 4.0);
    assert!(field(&out, "block.3.c") > 0.0);
    assert!((field(&out, "estimate") - 1.0).abs() < 0.3);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.txt", "1\n2\nx3\n");
    let out = are(&["estimate", "--input", &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains('3'));
    let missing = dir.path().join("missing.txt");
    assert_eq!(are(&["estimate", "--input", missing.to_str().unwrap()]).status.code(), Some(3));
    assert_eq!(are(&["dgp", "--kind", "pareto", "--n", "10", "--tail-a", "3"]).status.code(), Some(2));
    let two = write(dir.path(), "two.txt", "1\n2\n");
    assert_eq!(are(&["estimate", "--input", &two, "--estimator", "mom", "--k", "5"]).status.code(), Some(2));
}

#[test]
fn advantages_are_shift_invariant_and_zero_on_constant_groups() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.txt", "1,1,1\n0.1,0.5,0.9,0.3,0.7\n");
    let b = write(dir.path(), "b.txt", "6,6,6\n5.1,5.5,5.9,5.3,5.7\n");
    let ra = stdout(&are(&["advantage", "--input", &a]));
    let rb = stdout(&are(&["advantage", "--input", &b]));
    let parse = |s: &str| -> Vec<Vec<f64>> {
        s.lines().map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect()
    };
    let (pa, pb) = (parse(&ra), parse(&rb));
    assert!(pa[0].iter().all(|v| *v == 0.0));
    for (x, y) in pa.iter().flatten().zip(pb.iter().flatten()) {
        assert!((x - y).abs() <= 1e-9);
    }
}

#[test]
fn theory_median_boost_reports_rate() {
    let out = stdout(&are(&["theory", "--which", "median-boost", "--k", "32"]));
    assert!(field(&out, "failure_rate") <= 0.03);
    assert!(out.contains("pass=true"));
}

#[test]
fn bench_output_does_not_depend_on_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "b.toml",
        "ns = [60, 120]\nreplications = 6\n\n[[dgps]]\nkind = \"gaussian\"\n\n[[dgps]]\nkind = \"contam-random\"\n\n\
         [[estimators]]\nkind = \"mean\"\n\n[[estimators]]\nkind = \"are\"\n",
    );
    let one = stdout(&are(&["bench", "--config", &cfg, "--workers", "1"]));
    let four = stdout(&are(&["bench", "--config", &cfg, "--workers", "4"]));
    assert_eq!(one, four);
    assert_eq!(one.lines().count(), 1 + 2 * 2 * 2);
    assert!(one.starts_with("dgp,n,estimator,mae"));
}
