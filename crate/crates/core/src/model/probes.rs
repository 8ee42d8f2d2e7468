//! Monte Carlo probes of the declared structural constants.
//!
//! A probe evaluates an inequality at random points and reports the largest
//! observed ratio against its constant. Zero violations is evidence, not proof.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AssumptionConstants, SdeProblem};
use crate::error::{Error, Result};
use crate::rng::{SeedPolicy, StreamTag};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub name: String,
    /// Bound the ratio is compared against.
    pub constant: f64,
    pub n_samples: usize,
    pub max_ratio: f64,
    pub violations: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeHolderReport {
    pub drift: ProbeReport,
    pub diffusion: ProbeReport,
    pub passed: bool,
}

fn slack(constant: f64) -> f64 {
    1e-9 * constant.abs().max(1.0)
}

fn report(name: &str, constant: f64, ratios: &[f64]) -> ProbeReport {
    let max_ratio = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let violations = ratios
        .iter()
        .filter(|&&r| !(r <= constant + slack(constant)))
        .count();
    ProbeReport {
        name: name.to_string(),
        constant,
        n_samples: ratios.len(),
        max_ratio,
        violations,
        passed: violations == 0,
    }
}

fn check_args(n: usize, radius: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::config("probe needs at least one sample"));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::config(format!(
            "probe radius must be positive, got {radius}"
        )));
    }
    Ok(())
}

fn point_in_ball<R: Rng>(rng: &mut R, d: usize, radius: f64) -> Vec<f64> {
    loop {
        let p: Vec<f64> = (0..d).map(|_| rng.random_range(-radius..=radius)).collect();
        if norm_sq(&p) <= radius * radius {
            return p;
        }
    }
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn diff_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

struct Pair {
    t: f64,
    x: Vec<f64>,
    y: Vec<f64>,
}

fn pairs(problem: &SdeProblem, n: usize, radius: f64, seed: SeedPolicy) -> Vec<Pair> {
    let mut rng = seed.with_tag(StreamTag::Auxiliary).rng();
    let d = problem.dim();
    (0..n)
        .map(|_| {
            let t = rng.random_range(0.0..=problem.horizon);
            let x = point_in_ball(&mut rng, d, radius);
            let mut y = point_in_ball(&mut rng, d, radius);
            while diff_sq(&x, &y) == 0.0 {
                y = point_in_ball(&mut rng, d, radius);
            }
            Pair { t, x, y }
        })
        .collect()
}

/// `(x-y).(f(t,x)-f(t,y)) <= K3 |x-y|^2`.
pub fn probe_one_sided_lipschitz(
    problem: &SdeProblem,
    constants: &AssumptionConstants,
    n_pairs: usize,
    radius: f64,
    seed: SeedPolicy,
) -> Result<ProbeReport> {
    check_args(n_pairs, radius)?;
    let d = problem.dim();
    let ratios: Vec<f64> = pairs(problem, n_pairs, radius, seed)
        .par_iter()
        .map(|p| {
            let (mut fx, mut fy) = (vec![0.0; d], vec![0.0; d]);
            problem.coeffs.drift(p.t, &p.x, &mut fx);
            problem.coeffs.drift(p.t, &p.y, &mut fy);
            let inner: f64 = (0..d).map(|i| (p.x[i] - p.y[i]) * (fx[i] - fy[i])).sum();
            inner / diff_sq(&p.x, &p.y)
        })
        .collect();
    Ok(report("one_sided_lipschitz", constants.raw.k3, &ratios))
}

/// `|f(t,x)-f(t,y)|^2 <= H (1+|x|^sigma+|y|^sigma) |x-y|^2`.
pub fn probe_polynomial_lipschitz(
    problem: &SdeProblem,
    constants: &AssumptionConstants,
    n_pairs: usize,
    radius: f64,
    seed: SeedPolicy,
) -> Result<ProbeReport> {
    check_args(n_pairs, radius)?;
    let d = problem.dim();
    let sigma = constants.raw.sigma;
    let ratios: Vec<f64> = pairs(problem, n_pairs, radius, seed)
        .par_iter()
        .map(|p| {
            let (mut fx, mut fy) = (vec![0.0; d], vec![0.0; d]);
            problem.coeffs.drift(p.t, &p.x, &mut fx);
            problem.coeffs.drift(p.t, &p.y, &mut fy);
            let weight = 1.0 + norm_sq(&p.x).sqrt().powf(sigma) + norm_sq(&p.y).sqrt().powf(sigma);
            diff_sq(&fx, &fy) / (weight * diff_sq(&p.x, &p.y))
        })
        .collect();
    Ok(report("polynomial_lipschitz", constants.raw.h, &ratios))
}

/// `|g(t,x)-g(t,y)|^2 <= K4 |x-y|^2`, plus the growth bound
/// `|g(t,x)|^2 <= M2 |x|^2 + m2` reported as a second probe.
pub fn probe_diffusion_lipschitz(
    problem: &SdeProblem,
    constants: &AssumptionConstants,
    n_pairs: usize,
    radius: f64,
    seed: SeedPolicy,
) -> Result<(ProbeReport, ProbeReport)> {
    check_args(n_pairs, radius)?;
    let (d, m) = (problem.dim(), problem.brownian_dim());
    let bounds = constants.derived;
    let pts = pairs(problem, n_pairs, radius, seed);
    let ratios: Vec<(f64, f64)> = pts
        .par_iter()
        .map(|p| {
            let (mut gx, mut gy) = (vec![0.0; d * m], vec![0.0; d * m]);
            problem.coeffs.diffusion(p.t, &p.x, &mut gx);
            problem.coeffs.diffusion(p.t, &p.y, &mut gy);
            let lip = diff_sq(&gx, &gy) / diff_sq(&p.x, &p.y);
            let denom = bounds.m2_big * norm_sq(&p.x) + bounds.m2_small;
            let g2 = norm_sq(&gx);
            let growth = if g2 == 0.0 {
                0.0
            } else if denom > 0.0 {
                g2 / denom
            } else {
                f64::INFINITY
            };
            (lip, growth)
        })
        .collect();
    let lip: Vec<f64> = ratios.iter().map(|r| r.0).collect();
    let growth: Vec<f64> = ratios.iter().map(|r| r.1).collect();
    Ok((
        report("diffusion_lipschitz", constants.raw.k4, &lip),
        report("diffusion_growth", 1.0, &growth),
    ))
}

/// Time-Hölder bounds of drift and diffusion,
/// `|f(s,x)-f(t,x)| <= K1 (1+|x|^(sigma+1)) |t-s|^gamma1` and the analogue
/// for `g` with `K2`, `gamma2`. Half of the time pairs are drawn at
/// log-uniform separations down to `1e-6` to expose Hölder singularities.
pub fn probe_time_holder(
    problem: &SdeProblem,
    constants: &AssumptionConstants,
    n_samples: usize,
    radius: f64,
    seed: SeedPolicy,
) -> Result<TimeHolderReport> {
    check_args(n_samples, radius)?;
    let (d, m) = (problem.dim(), problem.brownian_dim());
    let horizon = problem.horizon;
    let raw = constants.raw;
    let mut rng = seed.with_tag(StreamTag::Auxiliary).rng();
    let samples: Vec<(f64, f64, Vec<f64>)> = (0..n_samples)
        .map(|i| {
            let s = rng.random_range(0.0..=horizon);
            let mut t = if i % 2 == 0 {
                rng.random_range(0.0..=horizon)
            } else {
                let gap = 10f64.powf(rng.random_range(-6.0..0.0)) * horizon;
                if rng.random_bool(0.5) {
                    s + gap
                } else {
                    s - gap
                }
            };
            t = t.clamp(0.0, horizon);
            if t == s {
                t = if s > 0.5 * horizon {
                    s - 1e-6 * horizon
                } else {
                    s + 1e-6 * horizon
                };
            }
            (s, t, point_in_ball(&mut rng, d, radius))
        })
        .collect();
    let ratios: Vec<(f64, f64)> = samples
        .par_iter()
        .map(|(s, t, x)| {
            let weight = 1.0 + norm_sq(x).sqrt().powf(raw.sigma + 1.0);
            let gap = (t - s).abs();
            let (mut fs, mut ft) = (vec![0.0; d], vec![0.0; d]);
            problem.coeffs.drift(*s, x, &mut fs);
            problem.coeffs.drift(*t, x, &mut ft);
            let (mut gs, mut gt) = (vec![0.0; d * m], vec![0.0; d * m]);
            problem.coeffs.diffusion(*s, x, &mut gs);
            problem.coeffs.diffusion(*t, x, &mut gt);
            (
                diff_sq(&fs, &ft).sqrt() / (weight * gap.powf(raw.gamma1)),
                diff_sq(&gs, &gt).sqrt() / (weight * gap.powf(raw.gamma2)),
            )
        })
        .collect();
    let drift = report(
        "time_holder_drift",
        raw.k1,
        &ratios.iter().map(|r| r.0).collect::<Vec<_>>(),
    );
    let diffusion = report(
        "time_holder_diffusion",
        raw.k2,
        &ratios.iter().map(|r| r.1).collect::<Vec<_>>(),
    );
    let passed = drift.passed && diffusion.passed;
    Ok(TimeHolderReport {
        drift,
        diffusion,
        passed,
    })
}
