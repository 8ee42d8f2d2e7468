use std::sync::Arc;

use levysde::model::{
    builtin, probe_diffusion_lipschitz, probe_one_sided_lipschitz, probe_polynomial_lipschitz,
    probe_time_holder, ScalarModel,
};
use levysde::noise::{LevyDriver, NoiseSpec};
use levysde::{AssumptionConstants, Error, RawConstants, SdeProblem, SeedPolicy, StreamTag};

fn seed() -> SeedPolicy {
    SeedPolicy::new(99, 0, StreamTag::Auxiliary)
}

fn raw() -> RawConstants {
    RawConstants {
        h: 1.0,
        sigma: 1.0,
        q: 4.0,
        m: 1.0,
        k1: 1.0,
        k2: 1.0,
        gamma1: 0.5,
        gamma2: 0.5,
        k3: -1.0,
        k4: 0.5,
        growth: None,
    }
}

fn custom(drift: &str, diffusion: &str, raw: RawConstants) -> SdeProblem {
    let model = ScalarModel::parse(drift, diffusion).unwrap();
    let constants = AssumptionConstants::finite_horizon(raw, &model, 1.0).unwrap();
    let m = usize::from(diffusion != "0");
    let noise = NoiseSpec::new(LevyDriver::None, m, 1.5, 2.0).unwrap();
    SdeProblem::new("custom", Arc::new(model), noise, vec![1.0], 1.0, constants).unwrap()
}

#[test]
fn linear_drift_has_exact_ratio() {
    let p = custom("-2*x", "0", RawConstants { k3: -2.0, ..raw() });
    let r = probe_one_sided_lipschitz(&p, &p.constants, 1000, 5.0, seed()).unwrap();
    assert!((r.max_ratio + 2.0).abs() < 1e-12);
    assert_eq!(r.violations, 0);
    assert!(r.passed);
}

/// `sup (f(x) - f(y)) / (x - y)` for `f = -x^3 - 5x + 5` on a grid of
/// `[-10, 10]^2`.
fn grid_scan_54() -> f64 {
    let f = |x: f64| -x * x * x - 5.0 * x + 5.0;
    let mut best = f64::NEG_INFINITY;
    for i in 0..=400 {
        for j in 0..=400 {
            let (x, y) = (-10.0 + 0.05 * i as f64, -10.0 + 0.05 * j as f64 + 0.025);
            best = best.max((f(x) - f(y)) / (x - y));
        }
    }
    best
}

#[test]
fn cubic_drift_respects_declared_constant() {
    let oracle = grid_scan_54();
    assert!(oracle <= -5.0 && oracle > -5.01, "{oracle}");
    let p = builtin::problem("paper-5.4").unwrap();
    let r = probe_one_sided_lipschitz(&p, &p.constants, 10_000, 10.0, seed()).unwrap();
    assert!(r.max_ratio <= -5.0 + 1e-9, "{}", r.max_ratio);
    assert_eq!(r.violations, 0);
}

#[test]
fn expanding_drift_is_flagged() {
    let p = custom("x", "0", raw());
    let r = probe_one_sided_lipschitz(&p, &p.constants, 1000, 5.0, seed()).unwrap();
    assert!(r.violations > 0);
    assert!(!r.passed);
}

#[test]
fn polynomial_lipschitz_for_quintic_drift() {
    let p = builtin::problem("paper-5.1a").unwrap();
    assert_eq!(p.constants.raw.sigma, 8.0);
    let r = probe_polynomial_lipschitz(&p, &p.constants, 10_000, 5.0, seed()).unwrap();
    assert_eq!(r.violations, 0, "{r:?}");
}

#[test]
fn polynomial_lipschitz_for_constant_drift() {
    let p = custom("3", "0", raw());
    let r = probe_polynomial_lipschitz(&p, &p.constants, 1000, 5.0, seed()).unwrap();
    assert_eq!(r.max_ratio, 0.0);
    assert!(r.passed);
}

#[test]
fn understated_sigma_is_flagged() {
    let p = builtin::problem("paper-5.1a").unwrap();
    let mut c = p.constants;
    c.raw.sigma = 1.0;
    let r = probe_polynomial_lipschitz(&p, &c, 10_000, 10.0, seed()).unwrap();
    assert!(r.violations > 0);
    // Oracle: along x = y = r the ratio is |f'(r)|^2 / (1 + 2 r), which
    // grows like r^8 / 2r and exceeds H = 220 already at r = 3.
    let fp = |x: f64| 2.0 * x.abs() - 10.0 * x.powi(4);
    assert!(fp(3.0).powi(2) / (1.0 + 2.0 * 3.0) > 220.0);
}

#[test]
fn affine_diffusion_ratio() {
    let p = builtin::problem("paper-5.4").unwrap();
    let (lip, growth) = probe_diffusion_lipschitz(&p, &p.constants, 1000, 5.0, seed()).unwrap();
    assert!((lip.max_ratio - 1.0).abs() < 1e-9);
    assert!(lip.passed && growth.passed, "{growth:?}");
}

#[test]
fn zero_diffusion_ratio() {
    let p = builtin::problem("paper-5.2").unwrap();
    let (lip, growth) = probe_diffusion_lipschitz(&p, &p.constants, 1000, 5.0, seed()).unwrap();
    assert_eq!(lip.max_ratio, 0.0);
    assert!(lip.passed && growth.passed);
}

#[test]
fn quadratic_diffusion_is_flagged() {
    let p = custom("-2*x", "x^2", RawConstants { k4: 1.0, ..raw() });
    let (lip, _) = probe_diffusion_lipschitz(&p, &p.constants, 1000, 10.0, seed()).unwrap();
    assert!(lip.violations > 0);
}

#[test]
fn time_holder_for_first_example() {
    let p = builtin::problem("paper-5.1a").unwrap();
    assert_eq!((p.constants.raw.gamma1, p.constants.raw.gamma2), (0.2, 0.4));
    let r = probe_time_holder(&p, &p.constants, 10_000, 5.0, seed()).unwrap();
    assert!(r.passed, "{r:?}");
}

#[test]
fn time_holder_autonomous() {
    let p = builtin::problem("paper-5.4").unwrap();
    let r = probe_time_holder(&p, &p.constants, 1000, 5.0, seed()).unwrap();
    assert_eq!(r.drift.max_ratio, 0.0);
    assert!(r.passed);
}

#[test]
fn overstated_holder_exponent_is_flagged() {
    let p = builtin::problem("paper-5.1a").unwrap();
    let mut c = p.constants;
    c.raw.gamma1 = 0.9;
    let r = probe_time_holder(&p, &c, 10_000, 5.0, seed()).unwrap();
    assert!(r.drift.violations > 0);
    // Oracle: |a(1) - a(1 - h)| / h^0.9 = h^(0.2 - 0.9) (2-(1-h))^0.2 near t = 1.
    let h: f64 = 1e-6;
    assert!(h.powf(0.2 - 0.9) > 1.3 * 2.0);
}

#[test]
fn builtin_problems_pass_their_probes() {
    for name in builtin::NAMES {
        let p = builtin::problem(name).unwrap();
        let c = &p.constants;
        let s = seed();
        let osl = probe_one_sided_lipschitz(&p, c, 10_000, 5.0, s).unwrap();
        let poly = probe_polynomial_lipschitz(&p, c, 10_000, 5.0, s).unwrap();
        let (lip, growth) = probe_diffusion_lipschitz(&p, c, 10_000, 5.0, s).unwrap();
        let holder = probe_time_holder(&p, c, 10_000, 5.0, s).unwrap();
        for r in [&osl, &poly, &lip, &growth, &holder.drift, &holder.diffusion] {
            assert_eq!(r.violations, 0, "{name}: {r:?}");
        }
    }
}

#[test]
fn constants_gate() {
    let model = ScalarModel::parse("-2*x", "0").unwrap();
    let base = RawConstants {
        k3: -2.0,
        k4: 0.5,
        ..raw()
    };
    assert!(AssumptionConstants::dissipative(base, &model, 1.0).is_ok());
    for bad in [
        RawConstants { k3: -0.5, ..base },
        RawConstants { k4: 3.5, ..base },
        RawConstants { q: 3.9, ..base },
        RawConstants {
            gamma1: 1.0,
            ..base
        },
        RawConstants { h: 0.0, ..base },
    ] {
        assert!(matches!(
            AssumptionConstants::dissipative(bad, &model, 1.0),
            Err(Error::Precondition(_))
        ));
    }
}

#[test]
fn dimension_mismatch_is_rejected() {
    let model = ScalarModel::parse("-2*x", "x").unwrap();
    let constants = AssumptionConstants::finite_horizon(raw(), &model, 1.0).unwrap();
    let noise = NoiseSpec::new(LevyDriver::None, 0, 1.5, 2.0).unwrap();
    assert!(SdeProblem::new("bad", Arc::new(model), noise, vec![1.0], 1.0, constants).is_err());
}
