use std::sync::Arc;

use levysde::measure::{
    evolve_empirical_law, invariant_convergence_report, kernel_density, ks_statistic,
    ou_stationary_scale, wasserstein_k, EmpiricalMeasure, StationaryReference,
};
use levysde::model::{builtin, ScalarModel};
use levysde::noise::{sample_alpha_stable, JumpLaw, LevyDriver, NoiseSpec};
use levysde::sim::{contraction_factor, two_initial_value_coupling, SimConfig};
use levysde::stats::ks_critical_value;
use levysde::{AssumptionConstants, Error, RawConstants, SdeProblem, SeedPolicy, StreamTag};
use rand::Rng;

fn m(v: &[f64]) -> EmpiricalMeasure {
    EmpiricalMeasure::new(v.to_vec(), 0.0).unwrap()
}

fn deterministic_linear() -> SdeProblem {
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
    SdeProblem::new("still", Arc::new(model), noise, vec![3.0], 1.0, constants).unwrap()
}

#[test]
fn wasserstein_examples() {
    assert_eq!(wasserstein_k(&m(&[0.0]), &m(&[2.0]), 1.0).unwrap(), 2.0);
    let a = m(&[0.0, 1.0]);
    let b = m(&[1.0, 3.0]);
    // Both couplings of two atoms: order statistics and the crossed pairing.
    let sorted = (1.0 + 2f64.sqrt()) / 2.0;
    let crossed = (3f64.sqrt() + 0.0) / 2.0;
    assert!((sorted - 1.2071).abs() < 1e-4);
    assert!(crossed < sorted);
    assert!((wasserstein_k(&a, &b, 0.5).unwrap() - crossed).abs() < 1e-15);
    assert!((wasserstein_k(&a, &b, 1.0).unwrap() - 1.5).abs() < 1e-15);
    assert_eq!(wasserstein_k(&a, &a, 0.3).unwrap(), 0.0);
    assert!(matches!(wasserstein_k(&a, &b, 0.0), Err(Error::Config(_))));
    assert!(wasserstein_k(&a, &b, 1.5).is_err());
    assert!(EmpiricalMeasure::new(vec![], 0.0).is_err());
    assert!(EmpiricalMeasure::new(vec![1.0, f64::NAN], 0.0).is_err());
}

#[test]
fn wasserstein_is_a_metric() {
    let mut rng = SeedPolicy::new(5, 0, StreamTag::Auxiliary).rng();
    for _ in 0..1000 {
        let n = rng.random_range(1..20);
        let k: f64 = rng.random_range(0.05..=1.0);
        let mut draw = || {
            m(&(0..n)
                .map(|_| rng.random_range(-5.0..5.0))
                .collect::<Vec<f64>>())
        };
        let (a, b, c) = (draw(), draw(), draw());
        let ab = wasserstein_k(&a, &b, k).unwrap();
        assert_eq!(ab, wasserstein_k(&b, &a, k).unwrap());
        let ac = wasserstein_k(&a, &c, k).unwrap();
        let cb = wasserstein_k(&c, &b, k).unwrap();
        assert!(ab <= ac + cb + 1e-12);
    }
}

#[test]
fn unequal_sizes_are_subsampled_deterministically() {
    let a = m(&(0..100).map(|i| i as f64).collect::<Vec<_>>());
    let b = m(&[0.0; 10]);
    let w1 = wasserstein_k(&a, &b, 1.0).unwrap();
    assert_eq!(w1, wasserstein_k(&a, &b, 1.0).unwrap());
    assert_eq!(w1, wasserstein_k(&b, &a, 1.0).unwrap());
    assert!(w1 > 0.0 && w1 < 100.0);
}

#[test]
fn ks_against_own_law() {
    let scale = ou_stationary_scale(1.5);
    assert!((scale - 0.961499).abs() < 1e-6);
    let reference = StationaryReference::stable(1.5, scale, 1).unwrap();
    let n = 10_000;
    let draw = sample_alpha_stable(
        1.5,
        scale,
        1.0,
        n,
        SeedPolicy::new(2, 0, StreamTag::Auxiliary),
    )
    .unwrap();
    let a = EmpiricalMeasure::new(draw.clone(), 0.0).unwrap();
    let r = ks_statistic(&a, &reference).unwrap();
    let m_ref = reference.realize(10 * n).unwrap().len();
    assert_eq!(m_ref, 1_000_000);
    let crit = 1.358 * (1.0 / n as f64 + 1.0 / m_ref as f64).sqrt();
    assert!((crit - ks_critical_value(0.05, n, m_ref)).abs() < 1e-4);
    assert!(r.statistic < 0.0272, "D = {}", r.statistic);
    assert!(r.p_value > 0.01);

    let shifted = EmpiricalMeasure::new(draw.iter().map(|x| x + 1.0).collect(), 0.0).unwrap();
    let s = ks_statistic(&shifted, &reference).unwrap();
    assert!(s.statistic > 0.2, "D = {}", s.statistic);
    assert!(s.p_value < 1e-100);

    let own = reference.realize(0).unwrap();
    let snap = StationaryReference::EmpiricalSnapshot(own.clone());
    assert_eq!(ks_statistic(&own, &snap).unwrap().statistic, 0.0);
}

#[test]
fn degenerate_reference_is_rejected() {
    let point = StationaryReference::EmpiricalSnapshot(m(&[1.0, 1.0, 1.0]));
    assert!(matches!(
        ks_statistic(&m(&[0.0, 1.0]), &point),
        Err(Error::Precondition(_))
    ));
    assert!(StationaryReference::stable(1.5, 0.0, 1).is_err());
}

#[test]
fn deterministic_snapshots_are_point_masses() {
    let p = deterministic_linear();
    let checkpoints = [1.0, 2.0, 4.0, 8.0, 16.0];
    let snaps = evolve_empirical_law(&p, 0.01, 50, &checkpoints, 1, &SimConfig::default()).unwrap();
    for (s, &t) in snaps.iter().zip(&checkpoints) {
        assert!(s.is_degenerate());
        assert_eq!(s.time, t);
        let expected = 3.0 * 1.02f64.powi(-(t / 0.01).round() as i32);
        assert!(
            (s.values()[0] - expected).abs() < 1e-10,
            "{} vs {expected}",
            s.values()[0]
        );
        let prov = s.provenance.as_ref().unwrap();
        assert_eq!(prov.n_paths, 50);
    }
    let gaps: Vec<f64> = snaps
        .windows(2)
        .map(|w| wasserstein_k(&w[0], &w[1], 1.0).unwrap())
        .collect();
    assert!(gaps.windows(2).all(|g| g[1] < g[0]));
    assert!(*gaps.last().unwrap() < 1e-6);
}

#[test]
fn off_grid_checkpoint_and_biased_driver_rejected() {
    let p = builtin::problem("paper-5.3").unwrap();
    let cfg = SimConfig::default();
    let r = evolve_empirical_law(&p, 0.01, 10, &[0.105], 1, &cfg);
    assert!(matches!(r, Err(Error::Config(_))));
    let biased = NoiseSpec::new(
        LevyDriver::CompoundPoisson {
            rate: 1.0,
            jump_law: JumpLaw::PointMass { value: 1.0 },
            centered: false,
        },
        0,
        1.5,
        2.0,
    )
    .unwrap();
    let q = p.with_noise(biased).unwrap();
    assert!(matches!(
        evolve_empirical_law(&q, 0.01, 10, &[0.1], 1, &cfg),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn report_against_identical_snapshots_is_zero() {
    let values: Vec<f64> = (0..500).map(|i| (i as f64 * 0.731).sin()).collect();
    let reference = EmpiricalMeasure::new(values, 10.0).unwrap();
    let snaps = vec![reference.clone(), reference.clone()];
    let report = invariant_convergence_report(
        &snaps,
        &StationaryReference::EmpiricalSnapshot(reference),
        1.0,
        0.01,
    )
    .unwrap();
    for row in &report.rows {
        assert_eq!(row.ks, 0.0);
        assert_eq!(row.wasserstein, 0.0);
        assert_eq!(row.p_value, 1.0);
    }
    assert!(report.ks_decreasing && report.wasserstein_decreasing);
    assert!(report.final_below_threshold);
    assert_eq!(report.bootstrap_replicates, 20);
    assert!(report.to_csv().starts_with("t,ks,"));
}

#[test]
fn ou_law_approaches_stable_reference() {
    let p = builtin::problem("paper-5.3").unwrap();
    let snaps =
        evolve_empirical_law(&p, 0.01, 2000, &[0.1, 0.7, 2.0], 3, &SimConfig::default()).unwrap();
    let reference = StationaryReference::stable(1.5, ou_stationary_scale(1.5), 4).unwrap();
    let report = invariant_convergence_report(&snaps, &reference, 1.0, 0.01).unwrap();
    assert!(report.ks_decreasing);
    assert!(report.rows[0].ks > report.rows[2].ks);
    assert!(report.rows.iter().all(|r| r.ks_stderr > 0.0));
}

#[test]
fn coupling_of_equal_starts_vanishes() {
    let p = builtin::problem("paper-5.4").unwrap();
    let q3 = contraction_factor(&p, 0.01).unwrap();
    assert!(q3 < 1.0);
    let curve =
        two_initial_value_coupling(&p, 0.01, &[1.5], &[1.5], 20, 0.5, 2, &SimConfig::default())
            .unwrap();
    assert!(curve.mean.iter().all(|&v| v == 0.0));
    assert!(curve.envelope.iter().all(|&v| v == 0.0));
}

#[test]
fn density_integrates_to_about_one() {
    let draw = sample_alpha_stable(
        2.0,
        1.0,
        1.0,
        20_000,
        SeedPolicy::new(8, 0, StreamTag::Auxiliary),
    )
    .unwrap();
    let s = EmpiricalMeasure::new(draw, 0.0).unwrap();
    let d = kernel_density(&s, 400);
    assert_eq!(d.len(), 400);
    let mass: f64 = d
        .windows(2)
        .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
        .sum();
    assert!(mass > 0.95 && mass < 1.01, "mass = {mass}");
}

#[test]
fn concave_cost_on_large_samples() {
    let draw = |s| {
        sample_alpha_stable(
            2.0,
            1.0,
            1.0,
            10_000,
            SeedPolicy::new(s, 0, StreamTag::Auxiliary),
        )
        .unwrap()
    };
    let a = EmpiricalMeasure::new(draw(1), 0.0).unwrap();
    let b = EmpiricalMeasure::new(draw(2), 0.0).unwrap();
    let sorted_cost: f64 = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(u, v)| (u - v).abs().sqrt())
        .sum::<f64>()
        / 10_000.0;
    let start = std::time::Instant::now();
    let w = wasserstein_k(&a, &b, 0.5).unwrap();
    println!("W_0.5 = {w}, sorted = {sorted_cost}, {:?}", start.elapsed());
    assert!(w > 0.0 && w <= sorted_cost + 1e-12);
    assert_eq!(w, wasserstein_k(&b, &a, 0.5).unwrap());
}
