//! Semi-implicit Euler-Maruyama simulation of SDEs with super-linear drift
//! driven by Brownian motion and Lévy noise, with tools to measure strong
//! convergence orders and long-time distributional behaviour.
//!
//! The scheme advances
//!
//! ```text
//! Y[i+1] = Y[i] + f(t[i+1], Y[i+1]) dt + g(t[i], Y[i]) dB[i+1] + dL[i+1]
//! ```
//!
//! solving the implicit drift equation at every step.

pub mod convergence;
pub mod error;
pub mod experiment;
pub mod measure;
pub mod model;
pub mod noise;
pub mod rng;
pub mod sim;
pub mod solver;
pub mod stats;

pub use error::{Error, Result};
pub use model::{AssumptionConstants, Coefficients, RawConstants, Regime, SdeProblem};
pub use noise::{LevyDriver, LevyKind, NoiseSpec};
pub use rng::{SeedPolicy, StreamTag};
pub use solver::{solve_implicit_step, ImplicitStepConfig, StepDiagnostics};
