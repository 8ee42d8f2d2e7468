//! One PASS/FAIL line per acceptance criterion, at full experimental scale.

use std::sync::OnceLock;

use levysde::experiment::{builtin_config, run, RunOptions, RunSummary};
use levysde::measure::{wasserstein_k, EmpiricalMeasure};
use levysde::model::builtin;
use levysde::noise::{
    sample_alpha_stable, sample_brownian_increments, sample_tempered_stable, IncrementMatrix,
    LevyDriver, NoiseSpec, TemperedStableSampler,
};
use levysde::stats::{ks_two_sample_sorted, CompensatedSum, MeanAccumulator};
use levysde::{solve_implicit_step, ImplicitStepConfig, SeedPolicy, StreamTag};
use rand::Rng;
use serde_json::Value;

fn report(id: u32, what: &str, passed: bool, measured: String) {
    println!(
        "{} criterion {id}: {what}: {measured}",
        if passed { "PASS" } else { "FAIL" }
    );
    assert!(passed, "criterion {id} failed: {measured}");
}

fn run_builtin(name: &str) -> RunSummary {
    let root = std::env::temp_dir().join(format!("levysde-acceptance-{}", std::process::id()));
    let options = RunOptions {
        output_root: Some(root),
        ..Default::default()
    };
    run(&builtin_config(name).unwrap(), &options).unwrap()
}

fn example_5_4() -> &'static RunSummary {
    static RUN: OnceLock<RunSummary> = OnceLock::new();
    RUN.get_or_init(|| run_builtin("paper-5.4"))
}

fn convergence(id: u32, name: &str, lo: f64, hi: f64) {
    let s = run_builtin(name);
    let fit = &s.details["fit"];
    let slope = fit["slope"].as_f64().unwrap();
    let ci = &fit["slope_ci"];
    let solver = &s.details["solver"];
    report(
        id,
        &format!("{name} fitted rmse order in [{lo}, {hi}]"),
        (lo..=hi).contains(&slope),
        format!(
            "slope {slope:.4} (95% CI [{:.4}, {:.4}], r2 {:.4}, predicted {:.4}, {} paths, {} fallbacks)",
            ci[0].as_f64().unwrap(),
            ci[1].as_f64().unwrap(),
            fit["r_squared"].as_f64().unwrap(),
            s.details["predicted_order"].as_f64().unwrap(),
            s.n_paths,
            solver["fallbacks"],
        ),
    );
}

#[test]
fn criterion_01_example_5_1a_order() {
    convergence(1, "paper-5.1a", 0.12, 0.30);
}

#[test]
fn criterion_02_example_5_1c_order() {
    convergence(2, "paper-5.1c", 0.40, 0.60);
}

#[test]
fn criterion_03_example_5_2_order() {
    convergence(3, "paper-5.2", 0.65, 0.90);
}

#[test]
fn criterion_04_example_5_3_ks_decay() {
    let s = run_builtin("paper-5.3");
    let r = &s.details["report"];
    let rows = r["rows"].as_array().unwrap();
    let ks: Vec<String> = rows
        .iter()
        .map(|row| {
            format!(
                "t={} D={:.4}±{:.4}",
                row["time"],
                row["ks"].as_f64().unwrap(),
                row["ks_stderr"].as_f64().unwrap()
            )
        })
        .collect();
    let last = rows.last().unwrap();
    let p = last["p_value"].as_f64().unwrap();
    let decreasing = r["ks_decreasing"].as_bool().unwrap();
    report(
        4,
        "paper-5.3 KS decreasing over t in {0.1, 0.3, 0.7, 2} and p > 0.01 at t = 2",
        s.n_paths == 10_000 && decreasing && p > 0.01,
        format!(
            "{}; decreasing {decreasing}; p(t=2) = {p:.3e}",
            ks.join(", ")
        ),
    );
}

#[test]
fn criterion_05_example_5_4_distance_ratio() {
    let s = example_5_4();
    let d = &s.details["distance_ratio"];
    let ratio = d["ratio"].as_f64().unwrap();
    report(
        5,
        "paper-5.4 W1(t=1, t=10) <= W1(t=0.2, t=10) / 5",
        s.n_paths == 10_000 && ratio <= 0.2,
        format!(
            "W1(1) = {:.5}, W1(0.2) = {:.5}, ratio {ratio:.4}",
            d["numerator"].as_f64().unwrap(),
            d["denominator"].as_f64().unwrap()
        ),
    );
}

fn curve_violations(s: &RunSummary, file: &str) -> (usize, usize) {
    let text = std::fs::read_to_string(s.output_dir.join(file)).unwrap();
    let mut n = 0;
    let mut bad = 0;
    for line in text.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        n += 1;
        if v[2] > v[4] + 3.0 * v[3] {
            bad += 1;
        }
    }
    (n, bad)
}

#[test]
fn criterion_06_second_moment_envelope() {
    let s = example_5_4();
    let (n, bad) = curve_violations(s, "moment_curve.csv");
    let reported = s.details["moment_curve_violations"].as_u64().unwrap() as usize;
    report(
        6,
        "paper-5.4 E|X_i|^2 <= Q1/Q2 envelope + 3 stderr for i <= 1000",
        n == 1001 && bad == 0 && reported == 0,
        format!("{bad} violations over {n} grid points, {} paths", s.n_paths),
    );
}

#[test]
fn criterion_07_contraction_envelope() {
    let s = example_5_4();
    let (n, bad) = curve_violations(s, "coupling_curve.csv");
    let reported = s.details["coupling_curve_violations"].as_u64().unwrap() as usize;
    report(
        7,
        "paper-5.4 E|X^10 - X^-10|^2 <= 400 Q3^i + 3 stderr for i <= 1000",
        n == 1001 && bad == 0 && reported == 0,
        format!("{bad} violations over {n} grid points, {} paths", s.n_paths),
    );
}

fn bisection_root(c: f64, dt: f64) -> f64 {
    let g = |y: f64| y + dt * (y * y * y + 5.0 * y - 5.0) - c;
    let (mut lo, mut hi) = (-100.0f64, 100.0f64);
    while hi - lo > 1e-14 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid
        } else {
            hi = mid
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn criterion_08_solver_oracle() {
    let p = builtin::problem("paper-5.4").unwrap();
    let cfg = ImplicitStepConfig::default();
    let mut rng = SeedPolicy::new(8, 0, StreamTag::Auxiliary).rng();
    let (mut worst_err, mut worst_res) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let c: f64 = rng.random_range(-50.0..50.0);
        let dt: f64 = rng.random_range(1e-6..1.0);
        let (y, d) = solve_implicit_step(&p, 1.0, &[c], dt, &cfg).unwrap();
        worst_err = worst_err.max((y[0] - bisection_root(c, dt)).abs());
        worst_res = worst_res.max(d.final_residual);
    }
    report(
        8,
        "implicit step matches bisection to 1e-10 with residual <= 1e-12 on 1000 draws",
        worst_err <= 1e-10 && worst_res <= 1e-12,
        format!("max |y - y_bisect| = {worst_err:.2e}, max residual = {worst_res:.2e}"),
    );
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

#[test]
fn criterion_09_sampler_suite() {
    let seed = |s| SeedPolicy::new(s, 0, StreamTag::Levy);
    let mut notes = Vec::new();
    let mut ok = true;

    let x = sample_alpha_stable(1.5, 1.0, 1.0, 1_000_000, seed(13)).unwrap();
    let mut ecf = true;
    for t in [0.25f64, 0.5, 1.0, 2.0] {
        let acc: MeanAccumulator = x.iter().map(|v| (t * v).cos()).collect();
        let exact = (-t.powf(1.5)).exp();
        ecf &= (acc.mean() - exact).abs() <= 3.0 * acc.stderr();
    }
    notes.push(format!("ECF within 3se: {ecf}"));
    ok &= ecf;

    let n = 100_000;
    let s = sorted(sample_alpha_stable(2.0, 1.0 / 2f64.sqrt(), 1.0, n, seed(11)).unwrap());
    let spec = NoiseSpec::new(LevyDriver::None, 1, 1.5, 2.0).unwrap();
    let g = sample_brownian_increments(&spec, 1.0, n, SeedPolicy::new(12, 0, StreamTag::Brownian))
        .unwrap();
    let ks = ks_two_sample_sorted(&s, &sorted(g.as_slice().to_vec()));
    notes.push(format!("alpha=2 vs N(0,1) KS p = {:.3}", ks.p_value));
    ok &= ks.p_value > 0.01;

    let fourth: Vec<(f64, f64)> = [0.5, 1.0, 2.0, 4.0]
        .iter()
        .enumerate()
        .map(|(i, &lambda)| {
            let s = sample_tempered_stable(1.3, lambda, 1.0, 1.0, n, seed(20 + i as u64)).unwrap();
            let acc: MeanAccumulator = s.values.iter().map(|x| x.powi(4)).collect();
            (acc.mean(), acc.stderr())
        })
        .collect();
    let monotone = fourth.windows(2).all(|w| w[1].0 < w[0].0);
    notes.push(format!("4th moment decreasing in lambda: {monotone}"));
    ok &= monotone;

    let sample = sample_tempered_stable(1.3, 1.0, 1.0, 1.0, 1_000_000, seed(30)).unwrap();
    let oracle = sample_tempered_stable(1.3, 1.0, 1.0, 1.0, 10_000_000, seed(31)).unwrap();
    let sampler = TemperedStableSampler::new(1.3, 1.0, 1.0).unwrap();
    let mut mgf = true;
    for theta in [0.1f64, 0.2] {
        let est: MeanAccumulator = sample.values.iter().map(|x| (theta * x).exp()).collect();
        let reference: MeanAccumulator = oracle.values.iter().map(|x| (theta * x).exp()).collect();
        let closed = sampler.log_mgf(theta, 1.0).exp();
        mgf &= (est.mean() - reference.mean()).abs() <= 3.0 * est.stderr();
        mgf &= (reference.mean() - closed).abs() <= 3.0 * reference.stderr();
    }
    notes.push(format!("exponential moments match oracle: {mgf}"));
    ok &= mgf;

    report(9, "sampler suite", ok, notes.join("; "));
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn csv_outputs(s: &RunSummary) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = s
        .artifacts
        .iter()
        .filter(|a| a.ends_with(".csv") || a.ends_with(".dat"))
        .map(|a| (a.clone(), std::fs::read(s.output_dir.join(a)).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn criterion_10_property_suites() {
    let mut rng = SeedPolicy::new(10, 0, StreamTag::Auxiliary).rng();
    let mut notes = Vec::new();

    let mut worst = 0.0f64;
    for _ in 0..300 {
        let n = rng.random_range(1..=6);
        let k: f64 = rng.random_range(0.05..=1.0);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let w = wasserstein_k(
            &EmpiricalMeasure::new(a.clone(), 0.0).unwrap(),
            &EmpiricalMeasure::new(b.clone(), 0.0).unwrap(),
            k,
        )
        .unwrap();
        let best = permutations(n)
            .into_iter()
            .map(|p| {
                p.iter()
                    .enumerate()
                    .map(|(i, &j)| (a[i] - b[j]).abs().powf(k))
                    .sum::<f64>()
                    / n as f64
            })
            .fold(f64::INFINITY, f64::min);
        worst = worst.max((w - best).abs() / best.max(1.0));
    }
    let wasserstein = worst <= 1e-12;
    notes.push(format!("W_k vs brute force max rel diff {worst:.1e}"));

    let mut rank = true;
    for _ in 0..200 {
        let a: Vec<f64> = (0..rng.random_range(1..300))
            .map(|_| rng.random_range(-5.0..5.0))
            .collect();
        let b: Vec<f64> = (0..rng.random_range(1..300))
            .map(|_| rng.random_range(-5.0..5.0))
            .collect();
        let base = ks_two_sample_sorted(&sorted(a.clone()), &sorted(b.clone()));
        for t in [f64::exp as fn(f64) -> f64, |x: f64| x * x * x] {
            let r = ks_two_sample_sorted(
                &sorted(a.iter().map(|&x| t(x)).collect()),
                &sorted(b.iter().map(|&x| t(x)).collect()),
            );
            rank &= r == base;
        }
    }
    notes.push(format!("KS rank invariance: {rank}"));

    let mut worst_agg = 0.0f64;
    for _ in 0..200 {
        let (rows, cols, factor) = (
            rng.random_range(1..50),
            rng.random_range(1..4),
            rng.random_range(1..17),
        );
        let data: Vec<f64> = (0..rows * factor * cols)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let m = IncrementMatrix::from_vec(rows * factor, cols, data);
        let agg = m.aggregate(factor, rows);
        for i in 0..rows {
            for j in 0..cols {
                let exact: CompensatedSum = (0..factor).map(|r| m.row(i * factor + r)[j]).collect();
                let scale: f64 = (0..factor).map(|r| m.row(i * factor + r)[j].abs()).sum();
                worst_agg = worst_agg.max((agg.row(i)[j] - exact.value()).abs() / scale);
            }
        }
    }
    let aggregation = worst_agg <= 1e-12;
    notes.push(format!("aggregation max rel error {worst_agg:.1e}"));

    let mut determinism = true;
    for name in ["paper-5.2", "paper-5.4"] {
        let config = builtin_config(name).unwrap();
        let outputs = |workers: usize| {
            let root = tempfile::tempdir().unwrap();
            let options = RunOptions {
                n_paths: Some(200),
                output_root: Some(root.path().to_path_buf()),
                workers: Some(workers),
                ..Default::default()
            };
            let s = run(&config, &options).unwrap();
            let summary: Value = serde_json::from_str(
                &std::fs::read_to_string(s.output_dir.join("summary.json")).unwrap(),
            )
            .unwrap();
            assert!(summary["timestamp"].is_string());
            csv_outputs(&s)
        };
        let first = outputs(1);
        determinism &= !first.is_empty() && first == outputs(1) && first == outputs(2);
    }
    notes.push(format!(
        "byte-identical outputs across repeats and workers: {determinism}"
    ));

    report(
        10,
        "property suites",
        wasserstein && rank && aggregation && determinism,
        notes.join("; "),
    );
}
