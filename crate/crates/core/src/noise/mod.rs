//! Brownian and Lévy increments.
//!
//! All samplers are pure functions of their parameters and a [`SeedPolicy`];
//! increments over a step `dt` are drawn exactly in law through
//! self-similarity (stable) or infinite divisibility (tempered stable,
//! compound Poisson).

mod moments;
pub mod stable;
mod tempered;

pub use moments::{validate_moment_conditions, MomentCheck, MomentReport};
pub use tempered::{levy_density_constant, AcceptanceStats, TemperedStableSampler};

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{SeedPolicy, StreamTag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevyKind {
    None,
    AlphaStable,
    TemperedStable,
    CompoundPoisson,
}

/// Jump size distribution of a compound Poisson driver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum JumpLaw {
    PointMass { value: f64 },
    Normal { mean: f64, std_dev: f64 },
    Uniform { low: f64, high: f64 },
}

impl JumpLaw {
    pub fn mean(&self) -> f64 {
        match *self {
            JumpLaw::PointMass { value } => value,
            JumpLaw::Normal { mean, .. } => mean,
            JumpLaw::Uniform { low, high } => 0.5 * (low + high),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            JumpLaw::PointMass { value } => value,
            JumpLaw::Normal { mean, std_dev } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + std_dev * z
            }
            JumpLaw::Uniform { low, high } => rng.random_range(low..high),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            JumpLaw::PointMass { value } => value.is_finite(),
            JumpLaw::Normal { mean, std_dev } => {
                mean.is_finite() && std_dev > 0.0 && std_dev.is_finite()
            }
            JumpLaw::Uniform { low, high } => low.is_finite() && high.is_finite() && low < high,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid jump law {self:?}")))
        }
    }
}

/// The pure-jump driver `L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LevyDriver {
    None,
    /// Symmetric stable, characteristic function `exp(-t |scale u|^alpha)`.
    AlphaStable {
        alpha: f64,
        scale: f64,
    },
    /// Symmetric stable tempered by `e^{-lambda |z|}`; `scale` refers to the
    /// untempered process.
    TemperedStable {
        alpha: f64,
        lambda: f64,
        scale: f64,
    },
    CompoundPoisson {
        rate: f64,
        jump_law: JumpLaw,
        /// Subtract the compensator `rate * dt * E[J]`.
        #[serde(default)]
        centered: bool,
    },
}

impl LevyDriver {
    pub fn kind(&self) -> LevyKind {
        match self {
            LevyDriver::None => LevyKind::None,
            LevyDriver::AlphaStable { .. } => LevyKind::AlphaStable,
            LevyDriver::TemperedStable { .. } => LevyKind::TemperedStable,
            LevyDriver::CompoundPoisson { .. } => LevyKind::CompoundPoisson,
        }
    }
}

/// Noise specification: Lévy driver, Brownian dimension and the declared
/// moment exponents of the Lévy measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub levy: LevyDriver,
    pub brownian_dim: usize,
    /// Small-jump exponent, in `[1, 2]`.
    pub gamma0: f64,
    /// Large-jump exponent, `> 1`.
    pub gamma_inf: f64,
}

impl NoiseSpec {
    pub fn new(levy: LevyDriver, brownian_dim: usize, gamma0: f64, gamma_inf: f64) -> Result<Self> {
        let spec = Self {
            levy,
            brownian_dim,
            gamma0,
            gamma_inf,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1.0..=2.0).contains(&self.gamma0) {
            return Err(Error::config(format!(
                "gamma0 must lie in [1, 2], got {}",
                self.gamma0
            )));
        }
        if !(self.gamma_inf > 1.0) {
            return Err(Error::config(format!(
                "gamma_inf must exceed 1, got {}",
                self.gamma_inf
            )));
        }
        LevySampler::new(&self.levy).map(|_| ())
    }

    /// Pure stable drivers violate the large-jump condition and are only
    /// admitted for long-time experiments.
    pub fn is_heavy_tailed(&self) -> bool {
        matches!(self.levy, LevyDriver::AlphaStable { .. })
    }

    pub fn sampler(&self) -> Result<LevySampler> {
        LevySampler::new(&self.levy)
    }
}

/// Driver with its derived sampling constants.
#[derive(Debug, Clone, Copy)]
pub enum LevySampler {
    None,
    Stable {
        alpha: f64,
        scale: f64,
    },
    Tempered(TemperedStableSampler),
    CompoundPoisson {
        rate: f64,
        jump_law: JumpLaw,
        centered: bool,
    },
}

impl LevySampler {
    pub fn new(driver: &LevyDriver) -> Result<Self> {
        Ok(match *driver {
            LevyDriver::None => LevySampler::None,
            LevyDriver::AlphaStable { alpha, scale } => {
                check_stable(alpha, scale)?;
                LevySampler::Stable { alpha, scale }
            }
            LevyDriver::TemperedStable {
                alpha,
                lambda,
                scale,
            } => LevySampler::Tempered(TemperedStableSampler::new(alpha, lambda, scale)?),
            LevyDriver::CompoundPoisson {
                rate,
                jump_law,
                centered,
            } => {
                if !(rate > 0.0 && rate.is_finite()) {
                    return Err(Error::config(format!(
                        "jump rate must be positive, got {rate}"
                    )));
                }
                jump_law.validate()?;
                LevySampler::CompoundPoisson {
                    rate,
                    jump_law,
                    centered,
                }
            }
        })
    }

    pub fn is_none(&self) -> bool {
        matches!(self, LevySampler::None)
    }

    /// One scalar increment over a step of length `dt`.
    pub fn increment<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        dt: f64,
        stats: &mut AcceptanceStats,
    ) -> f64 {
        match self {
            LevySampler::None => 0.0,
            LevySampler::Stable { alpha, scale } => {
                scale * dt.powf(1.0 / alpha) * stable::symmetric_unit(*alpha, rng)
            }
            LevySampler::Tempered(s) => s.draw(rng, dt, stats),
            LevySampler::CompoundPoisson {
                rate,
                jump_law,
                centered,
            } => {
                let count = Poisson::new(rate * dt)
                    .map(|p| p.sample(rng) as u64)
                    .unwrap_or(0);
                let mut sum = 0.0;
                for _ in 0..count {
                    sum += jump_law.sample(rng);
                }
                if *centered {
                    sum -= rate * dt * jump_law.mean();
                }
                sum
            }
        }
    }
}

fn check_stable(alpha: f64, scale: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::config(format!(
            "stable alpha must lie in (0, 2], got {alpha}"
        )));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::config(format!(
            "scale must be positive, got {scale}"
        )));
    }
    Ok(())
}

pub(crate) fn check_grid(dt: f64, n: usize) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::config(format!("step dt must be positive, got {dt}")));
    }
    if n == 0 {
        return Err(Error::config("increment count n must be at least 1"));
    }
    Ok(())
}

/// Row-major `rows x cols` block of increments.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IncrementMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl IncrementMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "shape mismatch");
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Column `j` as a vector.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.data[i * self.cols + j])
            .collect()
    }

    /// Sums of consecutive blocks of `factor` rows.
    pub fn aggregate(&self, factor: usize, out_rows: usize) -> IncrementMatrix {
        assert!(factor >= 1 && out_rows * factor <= self.rows);
        let mut out = IncrementMatrix::zeros(out_rows, self.cols);
        for i in 0..out_rows {
            let dst = &mut out.data[i * self.cols..(i + 1) * self.cols];
            for r in i * factor..(i + 1) * factor {
                for (d, s) in dst.iter_mut().zip(self.row(r)) {
                    *d += s;
                }
            }
        }
        out
    }
}

pub(crate) fn fill_brownian<R: Rng + ?Sized>(rng: &mut R, dt: f64, out: &mut [f64]) {
    let sd = dt.sqrt();
    for v in out {
        let z: f64 = rng.sample(StandardNormal);
        *v = sd * z;
    }
}

/// `n` Brownian increments of dimension `spec.brownian_dim`, each component
/// `N(0, dt)`.
pub fn sample_brownian_increments(
    spec: &NoiseSpec,
    dt: f64,
    n: usize,
    seed: SeedPolicy,
) -> Result<IncrementMatrix> {
    check_grid(dt, n)?;
    let mut m = IncrementMatrix::zeros(n, spec.brownian_dim);
    let mut rng = seed.with_tag(StreamTag::Brownian).rng();
    fill_brownian(&mut rng, dt, &mut m.data);
    Ok(m)
}

/// Symmetric alpha-stable increments with scale `scale * dt^(1/alpha)`.
pub fn sample_alpha_stable(
    alpha: f64,
    scale: f64,
    dt: f64,
    n: usize,
    seed: SeedPolicy,
) -> Result<Vec<f64>> {
    check_stable(alpha, scale)?;
    check_grid(dt, n)?;
    let sampler = LevySampler::Stable { alpha, scale };
    let mut rng = seed.rng();
    let mut stats = AcceptanceStats::default();
    Ok((0..n)
        .map(|_| sampler.increment(&mut rng, dt, &mut stats))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemperedSample {
    pub values: Vec<f64>,
    pub acceptance: AcceptanceStats,
}

pub fn sample_tempered_stable(
    alpha: f64,
    lambda: f64,
    scale: f64,
    dt: f64,
    n: usize,
    seed: SeedPolicy,
) -> Result<TemperedSample> {
    let sampler = TemperedStableSampler::new(alpha, lambda, scale)?;
    check_grid(dt, n)?;
    let mut rng = seed.rng();
    let mut acceptance = AcceptanceStats::default();
    let values = (0..n)
        .map(|_| sampler.draw(&mut rng, dt, &mut acceptance))
        .collect();
    Ok(TemperedSample { values, acceptance })
}

pub fn sample_compound_poisson(
    rate: f64,
    jump_law: JumpLaw,
    dt: f64,
    n: usize,
    seed: SeedPolicy,
) -> Result<Vec<f64>> {
    compound_poisson(rate, jump_law, false, dt, n, seed)
}

/// Compound Poisson increments minus their mean `rate * dt * E[J]`.
pub fn sample_compound_poisson_centered(
    rate: f64,
    jump_law: JumpLaw,
    dt: f64,
    n: usize,
    seed: SeedPolicy,
) -> Result<Vec<f64>> {
    compound_poisson(rate, jump_law, true, dt, n, seed)
}

fn compound_poisson(
    rate: f64,
    jump_law: JumpLaw,
    centered: bool,
    dt: f64,
    n: usize,
    seed: SeedPolicy,
) -> Result<Vec<f64>> {
    let sampler = LevySampler::new(&LevyDriver::CompoundPoisson {
        rate,
        jump_law,
        centered,
    })?;
    check_grid(dt, n)?;
    let mut rng = seed.rng();
    let mut stats = AcceptanceStats::default();
    Ok((0..n)
        .map(|_| sampler.increment(&mut rng, dt, &mut stats))
        .collect())
}
