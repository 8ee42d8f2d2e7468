//! Chambers-Mallows-Stuck transforms for unit stable variates.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::distr::Open01;
use rand::Rng;
use rand_distr::Exp1;

fn uniform_angle<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    PI * (u - 0.5)
}

/// Symmetric stable variate with characteristic function `exp(-|u|^alpha)`.
///
/// `alpha = 2` yields `N(0, 2)`.
pub fn symmetric_unit<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let v = uniform_angle(rng);
    if alpha == 1.0 {
        return v.tan();
    }
    let e: f64 = rng.sample(Exp1);
    let inv = 1.0 / alpha;
    (alpha * v).sin() / v.cos().powf(inv)
        * (((1.0 - alpha) * v).cos() / e).powf((1.0 - alpha) * inv)
}

/// Totally skewed (`beta = 1`) unit stable variate in the
/// Samorodnitsky-Taqqu parametrisation `S_alpha(1, 1, 0)`.
///
/// For `alpha < 1` the support is `[0, inf)`.
pub fn skewed_unit_s1<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let v = uniform_angle(rng);
    let e: f64 = rng.sample(Exp1);
    if alpha == 1.0 {
        let a = FRAC_PI_2 + v;
        return (a * v.tan() - (FRAC_PI_2 * e * v.cos() / a).ln()) / FRAC_PI_2;
    }
    let zeta = (FRAC_PI_2 * alpha).tan();
    let b = zeta.atan() / alpha;
    let s = (1.0 + zeta * zeta).powf(0.5 / alpha);
    let avb = alpha * (v + b);
    s * avb.sin() / v.cos().powf(1.0 / alpha) * ((v - avb).cos() / e).powf((1.0 - alpha) / alpha)
}

/// Totally skewed unit stable variate in Nolan's `S0` parametrisation,
/// which is continuous in `alpha` and keeps the mode near the origin.
pub fn skewed_unit_s0<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let x = skewed_unit_s1(alpha, rng);
    if alpha == 1.0 {
        x
    } else {
        x - (FRAC_PI_2 * alpha).tan()
    }
}
