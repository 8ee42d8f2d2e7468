//! Admissibility of the Lévy measure: the small-jump moment of order
//! `gamma0` and the large-jump moment of order `gamma_inf` must be finite.

use serde::{Deserialize, Serialize};

use super::tempered::levy_density_constant;
use super::{JumpLaw, LevyDriver, LevyKind, NoiseSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentCheck {
    /// `"small_jumps"` (|z| < 1) or `"large_jumps"` (|z| >= 1).
    pub condition: String,
    pub exponent: f64,
    /// Value of the integral when finite.
    pub integral: Option<f64>,
    pub passed: bool,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub levy_kind: LevyKind,
    /// Set for pure stable drivers, which are admitted for long-time
    /// experiments only.
    pub heavy_tailed: bool,
    pub small_jumps: MomentCheck,
    pub large_jumps: MomentCheck,
}

impl MomentReport {
    pub fn passed(&self) -> bool {
        self.small_jumps.passed && self.large_jumps.passed
    }
}

fn check(condition: &str, exponent: f64, integral: Option<f64>, fail_reason: &str) -> MomentCheck {
    let passed = integral.is_some_and(f64::is_finite);
    MomentCheck {
        condition: condition.to_string(),
        exponent,
        integral,
        passed,
        reason: if passed {
            "integral finite".to_string()
        } else {
            fail_reason.to_string()
        },
    }
}

/// Evaluate both moment conditions for the driver of `spec`.
pub fn validate_moment_conditions(spec: &NoiseSpec) -> MomentReport {
    let (g0, ginf) = (spec.gamma0, spec.gamma_inf);
    let (small, large) = match &spec.levy {
        LevyDriver::None => (
            MomentCheck {
                condition: "small_jumps".into(),
                exponent: g0,
                integral: Some(0.0),
                passed: true,
                reason: "no jumps (empty Lévy measure)".into(),
            },
            MomentCheck {
                condition: "large_jumps".into(),
                exponent: ginf,
                integral: Some(0.0),
                passed: true,
                reason: "no jumps (empty Lévy measure)".into(),
            },
        ),
        LevyDriver::AlphaStable { alpha, scale } => {
            let c2 = 2.0 * levy_density_constant(*alpha, *scale);
            let small = (g0 > *alpha).then(|| c2 / (g0 - alpha));
            let large = (ginf < *alpha).then(|| c2 / (alpha - ginf));
            (
                check(
                    "small_jumps",
                    g0,
                    small,
                    "small-jump activity too high: gamma0 must exceed alpha",
                ),
                check(
                    "large_jumps",
                    ginf,
                    large,
                    "heavy tail: stable moments of order >= alpha diverge",
                ),
            )
        }
        LevyDriver::TemperedStable {
            alpha,
            lambda,
            scale,
        } => {
            let c2 = 2.0 * levy_density_constant(*alpha, *scale);
            let small = (g0 > *alpha).then(|| c2 * lower_tempered_integral(g0 - alpha, *lambda));
            let large = Some(c2 * upper_tempered_integral(ginf - alpha, *lambda));
            (
                check(
                    "small_jumps",
                    g0,
                    small,
                    "small-jump activity too high: gamma0 must exceed alpha",
                ),
                check("large_jumps", ginf, large, "unreachable"),
            )
        }
        LevyDriver::CompoundPoisson { rate, jump_law, .. } => {
            let (s, _) = jump_law.split_abs_moment(g0);
            let (_, l) = jump_law.split_abs_moment(ginf);
            (
                check(
                    "small_jumps",
                    g0,
                    s.map(|v| rate * v),
                    "jump law moment diverges",
                ),
                check(
                    "large_jumps",
                    ginf,
                    l.map(|v| rate * v),
                    "jump law moment diverges",
                ),
            )
        }
    };
    MomentReport {
        levy_kind: spec.levy.kind(),
        heavy_tailed: matches!(spec.levy, LevyDriver::AlphaStable { .. }),
        small_jumps: small,
        large_jumps: large,
    }
}

/// `int_0^1 z^(a-1) e^(-lambda z) dz` for `a > 0`, after `z = w^(1/a)`.
fn lower_tempered_integral(a: f64, lambda: f64) -> f64 {
    simpson(|w| (-lambda * w.powf(1.0 / a)).exp(), 0.0, 1.0, 4000) / a
}

/// `int_1^inf z^(a-1) e^(-lambda z) dz` for any real `a`.
fn upper_tempered_integral(a: f64, lambda: f64) -> f64 {
    // Substitute w = lambda z; the integrand is negligible beyond the cutoff.
    let lo = lambda;
    let hi = lambda + 80.0 + 4.0 * a.abs() * (1.0 + a.abs()).ln().max(1.0);
    lambda.powf(-a) * simpson(|w| w.powf(a - 1.0) * (-w).exp(), lo, hi, 40_000)
}

pub(crate) fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

impl JumpLaw {
    /// `(E[|J|^g; |J| < 1], E[|J|^g; |J| >= 1])`; `None` when infinite.
    pub fn split_abs_moment(&self, g: f64) -> (Option<f64>, Option<f64>) {
        match *self {
            JumpLaw::PointMass { value } => {
                let m = value.abs().powf(g);
                if value.abs() < 1.0 {
                    (Some(m), Some(0.0))
                } else {
                    (Some(0.0), Some(m))
                }
            }
            JumpLaw::Uniform { low, high } => {
                let prim = |z: f64| z.signum() * z.abs().powf(g + 1.0) / (g + 1.0);
                let piece = |a: f64, b: f64| {
                    if b <= a {
                        0.0
                    } else if a >= 0.0 || b <= 0.0 {
                        (prim(b) - prim(a)).abs()
                    } else {
                        prim(b) - prim(a)
                    }
                };
                let w = high - low;
                let inner = piece(low.max(-1.0), high.min(1.0)) / w;
                let outer = (piece(low, high.min(-1.0)) + piece(low.max(1.0), high)) / w;
                (Some(inner), Some(outer))
            }
            JumpLaw::Normal { mean, std_dev } => {
                let pdf = |z: f64| {
                    let u = (z - mean) / std_dev;
                    (-0.5 * u * u).exp() / (std_dev * (2.0 * std::f64::consts::PI).sqrt())
                };
                let f = |z: f64| z.abs().powf(g) * pdf(z);
                let inner = simpson(f, -1.0, 0.0, 2000) + simpson(f, 0.0, 1.0, 2000);
                let reach = mean.abs() + 40.0 * std_dev + 1.0;
                let outer = simpson(f, -reach, -1.0, 20_000) + simpson(f, 1.0, reach, 20_000);
                (Some(inner), Some(outer))
            }
        }
    }
}
