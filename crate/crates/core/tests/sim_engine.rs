use std::sync::Arc;

use levysde::model::{builtin, ScalarModel};
use levysde::noise::{LevyDriver, NoiseSpec};
use levysde::sim::{
    coarsen, contraction_factor, make_tape, moment_factors, second_moment_curve, simulate_ensemble,
    simulate_path, step_count, two_initial_value_coupling, Increments, SimConfig,
};
use levysde::stats::MeanAccumulator;
use levysde::{AssumptionConstants, Error, RawConstants, SdeProblem, SeedPolicy, StreamTag};

fn seed(path: u64) -> SeedPolicy {
    SeedPolicy::new(7, path, StreamTag::Brownian)
}

fn linear(x0: f64) -> SdeProblem {
    let raw = RawConstants {
        h: 4.0,
        sigma: 1.0,
        q: 4.0,
        m: 1.0,
        k1: 1.0,
        k2: 1.0,
        gamma1: 0.5,
        gamma2: 0.5,
        k3: -2.0,
        k4: 0.5,
        growth: None,
    };
    let model = ScalarModel::parse("-2*x", "0").unwrap();
    let constants = AssumptionConstants::dissipative(raw, &model, 1.0).unwrap();
    let noise = NoiseSpec::new(LevyDriver::None, 0, 1.5, 2.0).unwrap();
    SdeProblem::new("linear", Arc::new(model), noise, vec![x0], 1.0, constants).unwrap()
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    while hi - lo > 1e-14 {
        let mid = 0.5 * (lo + hi);
        if f(mid).signum() == f(lo).signum() {
            lo = mid
        } else {
            hi = mid
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn tape_length_on_reference_grid() {
    let p = builtin::problem("paper-5.1a").unwrap();
    let tape = make_tape(&p, 2f64.powi(-15), seed(0)).unwrap();
    assert_eq!(tape.n_fine, 32768);
    assert_eq!(tape.brownian.rows(), 32768);
    assert_eq!(step_count(1.0, 0.1), 10);
    assert_eq!(step_count(10.0, 0.01), 1000);
}

#[test]
fn coarse_increments_telescope() {
    let p = builtin::problem("paper-5.1a").unwrap();
    let tape = make_tape(&p, 2f64.powi(-10), seed(3)).unwrap();
    let whole = coarsen(&tape, 1.0).unwrap();
    assert_eq!(whole.steps(), 1);
    let mut sum = MeanAccumulator::new();
    for &v in tape.brownian.as_slice() {
        sum.push(v);
    }
    let total = sum.mean() * tape.n_fine as f64;
    assert!((whole.brownian.row(0)[0] - total).abs() < 1e-12);

    let same = coarsen(&tape, tape.fine_dt).unwrap();
    assert_eq!(same.brownian, tape.brownian);
    let pairs = coarsen(&tape, 2.0 * tape.fine_dt).unwrap();
    for i in 0..pairs.steps() {
        let s = tape.brownian.row(2 * i)[0] + tape.brownian.row(2 * i + 1)[0];
        assert_eq!(pairs.brownian.row(i)[0], s);
    }
    assert!(matches!(
        coarsen(&tape, 3.3 * tape.fine_dt),
        Err(Error::Config(_))
    ));
}

#[test]
fn tapes_regenerate_and_are_independent_across_paths() {
    let p = builtin::problem("paper-5.2").unwrap();
    let fine = 2f64.powi(-14);
    let a = make_tape(&p, fine, seed(0)).unwrap();
    assert_eq!(a, make_tape(&p, fine, seed(0)).unwrap());
    let b = make_tape(&p, fine, seed(1)).unwrap();
    let (x, y) = (a.levy.as_slice(), b.levy.as_slice());
    let n = x.len() as f64;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n;
    let (mx, my) = (mean(x), mean(y));
    let cov = x
        .iter()
        .zip(y)
        .map(|(u, v)| (u - mx) * (v - my))
        .sum::<f64>()
        / n;
    let sx = (x.iter().map(|u| (u - mx).powi(2)).sum::<f64>() / n).sqrt();
    let sy = (y.iter().map(|v| (v - my).powi(2)).sum::<f64>() / n).sqrt();
    let corr = cov / (sx * sy);
    assert!(corr.abs() < 3.0 / n.sqrt(), "corr = {corr}");
}

#[test]
fn linear_recursion_closed_form() {
    let p = linear(1.0);
    let inc = Increments::zeros(&p, 0.1, 10);
    let path = simulate_path(&p, 0.1, &inc, &SimConfig::default()).unwrap();
    assert_eq!(path.state(0), &[1.0]);
    for i in 0..=10 {
        assert!((path.state(i)[0] - 1.2f64.powi(-(i as i32))).abs() < 1e-12);
    }
    assert!((path.terminal()[0] - 0.161505).abs() < 1e-6);
}

#[test]
fn deterministic_skeleton_approaches_root() {
    let root = bisect(|x| x * x * x + 5.0 * x - 5.0, 0.0, 2.0);
    assert!((root - 0.868830).abs() < 1e-6);
    let p = builtin::problem("paper-5.4").unwrap();
    let dt = 0.01;
    let inc = Increments::zeros(&p, dt, step_count(p.horizon, dt));
    let path = simulate_path(&p, dt, &inc, &SimConfig::default()).unwrap();
    let mut prev = (path.state(0)[0] - root).abs();
    for i in 1..=path.steps() {
        let gap = (path.state(i)[0] - root).abs();
        assert!(gap <= prev + 1e-12, "step {i}");
        prev = gap;
    }
    assert!(prev < 1e-9);
}

#[test]
fn full_path_on_coarsest_grid_has_no_failures() {
    let p = builtin::problem("paper-5.1a").unwrap();
    let dt = 2f64.powi(-9);
    let tape = make_tape(&p, dt, seed(11)).unwrap();
    let path = simulate_path(&p, dt, &coarsen(&tape, dt).unwrap(), &SimConfig::default()).unwrap();
    assert_eq!(path.steps(), 512);
    assert_eq!(path.diagnostics.steps, 512);
    assert!(path.diagnostics.max_residual <= 1e-12);
    assert!(path.states.iter().all(|v| v.is_finite()));
}

#[test]
fn single_path_ensemble_matches_direct_simulation() {
    let p = builtin::problem("paper-5.1c").unwrap();
    let fine = 2f64.powi(-12);
    let dts = [2f64.powi(-9), 2f64.powi(-10)];
    let cfg = SimConfig::default();
    let ens = simulate_ensemble(&p, &dts, 1, fine, &cfg, 7).unwrap();
    let tape = make_tape(&p, fine, seed(0)).unwrap();
    for (j, &dt) in dts.iter().enumerate() {
        let direct = simulate_path(&p, dt, &coarsen(&tape, dt).unwrap(), &cfg).unwrap();
        assert_eq!(ens[0][j], direct);
    }
    let again = simulate_ensemble(&p, &dts, 1, fine, &cfg, 7).unwrap();
    assert_eq!(ens, again);
}

#[test]
fn ensemble_rejects_non_multiple_step() {
    let p = builtin::problem("paper-5.1c").unwrap();
    let r = simulate_ensemble(&p, &[0.003], 2, 2f64.powi(-12), &SimConfig::default(), 1);
    assert!(matches!(r, Err(Error::Config(_))));
}

#[test]
fn envelope_factors() {
    let p = builtin::problem("paper-5.4").unwrap();
    let (q1, q2) = moment_factors(&p, 0.01).unwrap();
    assert!((q1 - 1.02 / 1.09).abs() < 1e-12);
    assert!((q2 - 0.44 / 1.09).abs() < 1e-9);
    let q3 = contraction_factor(&p, 0.01).unwrap();
    assert!((q3 - 1.01 / 1.1).abs() < 1e-12);
    for k in 1..100 {
        let dt = k as f64 / 100.0;
        assert!(moment_factors(&p, dt).unwrap().0 < 1.0);
        assert!(contraction_factor(&p, dt).unwrap() < 1.0);
    }
    assert!(matches!(
        moment_factors(&p, 1.0),
        Err(Error::Precondition(_))
    ));
    let finite = builtin::problem("paper-5.1a").unwrap();
    assert!(matches!(
        moment_factors(&finite, 0.01),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn second_moment_stays_under_envelope() {
    let p = builtin::problem("paper-5.4").unwrap();
    let curve = second_moment_curve(&p, 0.01, 300, 10_000, &SimConfig::default(), 5).unwrap();
    assert_eq!(curve.mean.len(), 301);
    assert_eq!(curve.mean[0], 100.0);
    assert!(curve.violations(3.0).is_empty());
}

#[test]
fn coupled_paths_contract() {
    let p = builtin::problem("paper-5.4").unwrap();
    let cfg = SimConfig::default();
    let curve =
        two_initial_value_coupling(&p, 0.01, &[10.0], &[-10.0], 2000, 3.0, 5, &cfg).unwrap();
    assert_eq!(curve.mean[0], 400.0);
    assert!(curve.violations(3.0).is_empty());
    assert!(curve.mean.last().unwrap() < &1e-6);
    let same = two_initial_value_coupling(&p, 0.01, &[2.0], &[2.0], 50, 1.0, 5, &cfg).unwrap();
    assert!(same.mean.iter().all(|&v| v == 0.0));
}
