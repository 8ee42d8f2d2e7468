//! The four worked examples, as ready-made problems.

use std::sync::Arc;

use super::{AssumptionConstants, GrowthBound, RawConstants, ScalarModel, SdeProblem};
use crate::error::{Error, Result};
use crate::noise::{LevyDriver, NoiseSpec};

pub const NAMES: [&str; 6] = [
    "paper-5.1a",
    "paper-5.1b",
    "paper-5.1c",
    "paper-5.2",
    "paper-5.3",
    "paper-5.4",
];

/// Tempered stable driver for the convergence examples. The declared
/// small-jump exponent must exceed the activity index, so the sampler uses
/// `alpha = gamma0 - 0.01`.
fn convergence_noise(gamma0: f64, brownian_dim: usize) -> NoiseSpec {
    NoiseSpec {
        levy: LevyDriver::TemperedStable {
            alpha: gamma0 - 0.01,
            lambda: 1.0,
            scale: 1.0,
        },
        brownian_dim,
        gamma0,
        gamma_inf: 4.0,
    }
}

fn finite_horizon_constants() -> RawConstants {
    RawConstants {
        h: 220.0,
        sigma: 8.0,
        q: 18.0,
        m: 40.0,
        k1: 1.3,
        k2: 3.2,
        gamma1: 0.2,
        gamma2: 0.4,
        k3: 0.7,
        k4: 7.0,
        growth: None,
    }
}

pub fn problem(name: &str) -> Result<SdeProblem> {
    let (drift, diffusion, noise, x0, horizon, raw, dissipative) = match name {
        "paper-5.1" | "paper-5.1a" | "paper-5.1b" => {
            let gamma0 = if name == "paper-5.1b" { 1.5 } else { 1.3 };
            (
                "[(t-1)(2-t)]^(1/5)*x^2 - 2*x^5",
                "2*[(t-1)(2-t)]^(2/5)*x",
                convergence_noise(gamma0, 1),
                1.0,
                1.0,
                finite_horizon_constants(),
                false,
            )
        }
        "paper-5.1c" => (
            "[(t-1)(2-t)]^(4/5)*x^2 - 2*x^5",
            "2*[(t-1)(2-t)]^(3/5)*x",
            convergence_noise(1.3, 1),
            1.0,
            1.0,
            RawConstants {
                h: 230.0,
                m: 55.0,
                k1: 2.5,
                k2: 4.0,
                gamma1: 0.8,
                gamma2: 0.6,
                k3: 1.2,
                k4: 9.2,
                ..finite_horizon_constants()
            },
            false,
        ),
        "paper-5.2" => (
            "|(t-1)(2-t)|^0.9*x^2 - 2*x^5",
            "0",
            convergence_noise(1.3, 0),
            1.0,
            1.0,
            RawConstants {
                h: 230.0,
                m: 1.0,
                k1: 2.7,
                k2: 1.0,
                gamma1: 0.9,
                gamma2: 0.5,
                k3: 1.3,
                k4: 0.1,
                ..finite_horizon_constants()
            },
            false,
        ),
        "paper-5.3" => (
            "-2*x",
            "0",
            NoiseSpec {
                levy: LevyDriver::AlphaStable {
                    alpha: 1.5,
                    scale: 2.0,
                },
                brownian_dim: 0,
                gamma0: 1.6,
                gamma_inf: 2.0,
            },
            10.0,
            2.0,
            RawConstants {
                h: 4.0,
                sigma: 1.0,
                q: 4.0,
                m: 1.0,
                k1: 1.0,
                k2: 1.0,
                gamma1: 0.5,
                gamma2: 0.5,
                k3: -2.0,
                k4: 0.1,
                growth: None,
            },
            true,
        ),
        "paper-5.4" => (
            "-x^3 - 5*x + 5",
            "-x + 3",
            NoiseSpec {
                levy: LevyDriver::TemperedStable {
                    alpha: 1.5,
                    lambda: 1.0,
                    scale: 2.0,
                },
                brownian_dim: 1,
                gamma0: 1.6,
                gamma_inf: 4.0,
            },
            10.0,
            10.0,
            RawConstants {
                h: 50.0,
                sigma: 4.0,
                q: 10.0,
                m: 45.0,
                k1: 1.0,
                k2: 1.0,
                gamma1: 0.5,
                gamma2: 0.5,
                k3: -5.0,
                k4: 1.0,
                // (3 - x)^2 <= 2 x^2 + 18; the bound K4 |x|^2 + |g(0)|^2 fails for x < 0.
                growth: Some(GrowthBound {
                    m2_big: 2.0,
                    m2_small: 18.0,
                }),
            },
            true,
        ),
        other => {
            return Err(Error::config(format!(
                "unknown built-in problem {other:?}; known: {}",
                NAMES.join(", ")
            )))
        }
    };
    let model = ScalarModel::parse(drift, diffusion)?;
    let constants = if dissipative {
        AssumptionConstants::dissipative(raw, &model, horizon)?
    } else {
        AssumptionConstants::finite_horizon(raw, &model, horizon)?
    };
    let id = if name == "paper-5.1" {
        "paper-5.1a"
    } else {
        name
    };
    SdeProblem::new(id, Arc::new(model), noise, vec![x0], horizon, constants)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_builtins_construct() {
        for name in NAMES {
            let p = problem(name).unwrap();
            assert_eq!(p.id, name);
            assert_eq!(p.dim(), 1);
        }
        assert!(problem("paper-9.9").is_err());
    }

    #[test]
    fn long_time_examples_are_dissipative() {
        assert!(problem("paper-5.3").unwrap().constants.is_dissipative());
        assert!(problem("paper-5.4").unwrap().constants.is_dissipative());
        assert!(!problem("paper-5.1a").unwrap().constants.is_dissipative());
    }
}
