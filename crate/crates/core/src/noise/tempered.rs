//! Symmetric tempered stable increments by exponential tilting.
//!
//! The symmetric Lévy measure `C e^{-lambda|z|} |z|^{-1-alpha} dz` splits into
//! two independent one-sided halves. Each half is the exponential tilt
//! `e^{-lambda x}` of a totally skewed stable law, drawn by rejection from
//! the untempered sampler. For `alpha >= 1` the skewed law has a (very light)
//! left tail, so proposals below `-kappa` are discarded and the acceptance
//! weight is shifted by `kappa`; the discarded mass is below `1e-12`.
//! Location constants are ignored: they are identical for both halves and
//! cancel in the difference.
//!
//! Rejection slows down as `lambda * sigma` grows, so an increment is split
//! into `m` independent pieces with small per-piece tilt.

use std::f64::consts::FRAC_PI_2;

use rand::distr::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use super::stable::{skewed_unit_s0, skewed_unit_s1};
use crate::error::{Error, Result};

/// Proposal / acceptance counters of the rejection step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptanceStats {
    pub proposals: u64,
    pub accepted: u64,
}

impl AcceptanceStats {
    pub fn ratio(&self) -> f64 {
        if self.proposals == 0 {
            1.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }

    pub fn merge(&mut self, other: &AcceptanceStats) {
        self.proposals += other.proposals;
        self.accepted += other.accepted;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemperedStableSampler {
    alpha: f64,
    lambda: f64,
    scale: f64,
    side_scale: f64,
    kappa: f64,
    piece_tilt: f64,
}

impl TemperedStableSampler {
    /// `scale` is the scale per unit time of the untempered symmetric stable
    /// process, whose characteristic function is `exp(-t |scale u|^alpha)`.
    pub fn new(alpha: f64, lambda: f64, scale: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::config(format!(
                "tempered stable alpha must lie in (0, 2), got {alpha}"
            )));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::config(format!(
                "tempering rate lambda must be positive, got {lambda}"
            )));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::config(format!(
                "scale must be positive, got {scale}"
            )));
        }
        let side_scale = scale * 0.5f64.powf(1.0 / alpha);
        let (kappa, piece_tilt) = if alpha < 1.0 {
            // Expected acceptance exp(-s^alpha / cos(pi alpha / 2)) ~ 0.6.
            (0.0, (0.5 * (FRAC_PI_2 * alpha).cos()).powf(1.0 / alpha))
        } else {
            let kappa = 3.5 + 7.0 * (alpha - 1.0);
            (kappa, alpha / kappa)
        };
        Ok(Self {
            alpha,
            lambda,
            scale,
            side_scale,
            kappa,
            piece_tilt,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Constant `C` of the Lévy density `C e^{-lambda|z|} |z|^{-1-alpha}`.
    pub fn levy_density_constant(&self) -> f64 {
        levy_density_constant(self.alpha, self.scale)
    }

    /// Variance per unit time, `2 C Gamma(2 - alpha) lambda^(alpha - 2)`.
    pub fn variance_rate(&self) -> f64 {
        2.0 * self.levy_density_constant()
            * gamma(2.0 - self.alpha)
            * self.lambda.powf(self.alpha - 2.0)
    }

    /// `log E exp(theta X)` for the increment over `dt`, finite for `|theta| < lambda`.
    pub fn log_mgf(&self, theta: f64, dt: f64) -> f64 {
        let (a, l) = (self.alpha, self.lambda);
        assert!(theta.abs() < l, "mgf only exists for |theta| < lambda");
        let c = self.levy_density_constant();
        if a == 1.0 {
            let h = |x: f64| x * x.ln();
            return dt * c * (h(l - theta) + h(l + theta) - 2.0 * h(l));
        }
        dt * c * gamma(-a) * ((l - theta).powf(a) + (l + theta).powf(a) - 2.0 * l.powf(a))
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, dt: f64, stats: &mut AcceptanceStats) -> f64 {
        self.draw_side(rng, dt, stats) - self.draw_side(rng, dt, stats)
    }

    fn draw_side<R: Rng + ?Sized>(&self, rng: &mut R, dt: f64, stats: &mut AcceptanceStats) -> f64 {
        let inv = 1.0 / self.alpha;
        let total_tilt = self.lambda * self.side_scale * dt.powf(inv);
        let pieces = if total_tilt <= self.piece_tilt {
            1
        } else {
            (total_tilt / self.piece_tilt).powf(self.alpha).ceil() as u64
        };
        let sigma = self.side_scale * (dt / pieces as f64).powf(inv);
        let tilt = self.lambda * sigma;
        let mut sum = 0.0;
        for _ in 0..pieces {
            loop {
                stats.proposals += 1;
                let z = if self.alpha < 1.0 {
                    skewed_unit_s1(self.alpha, rng)
                } else {
                    skewed_unit_s0(self.alpha, rng)
                };
                if z <= -self.kappa {
                    continue;
                }
                let u: f64 = rng.sample(Open01);
                if u <= (-tilt * (z + self.kappa)).exp() {
                    stats.accepted += 1;
                    sum += sigma * z;
                    break;
                }
            }
        }
        sum
    }
}

/// `C` such that the one-sided measure `C z^{-1-alpha}` generates a totally
/// skewed stable law of scale `scale * 2^{-1/alpha}`; two such halves make
/// the symmetric stable law of scale `scale`.
pub fn levy_density_constant(alpha: f64, scale: f64) -> f64 {
    let side = 0.5 * scale.powf(alpha);
    if alpha == 1.0 {
        side / FRAC_PI_2
    } else {
        side * alpha / (gamma(1.0 - alpha) * (FRAC_PI_2 * alpha).cos())
    }
}
