//! SDE problems `dy = f(t, y) dt + g(t, y) dB + dL` and their declared
//! structural constants.

pub mod builtin;
mod expr;
mod probes;

pub use expr::{Expr, TimeFactor};
pub use probes::{
    probe_diffusion_lipschitz, probe_one_sided_lipschitz, probe_polynomial_lipschitz,
    probe_time_holder, ProbeReport, TimeHolderReport,
};

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::NoiseSpec;

/// Drift and diffusion of an SDE in `R^d` driven by an `m`-dimensional
/// Brownian motion. Implementations must be reentrant.
pub trait Coefficients: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    /// Brownian dimension `m`.
    fn noise_dim(&self) -> usize;

    fn drift(&self, t: f64, x: &[f64], out: &mut [f64]);

    /// Row-major `d x d` Jacobian of the drift. Returns `false` when no
    /// analytic Jacobian exists, in which case finite differences are used.
    fn drift_jacobian(&self, _t: f64, _x: &[f64], _out: &mut [f64]) -> bool {
        false
    }

    /// Row-major `d x m` diffusion matrix.
    fn diffusion(&self, t: f64, x: &[f64], out: &mut [f64]);

    fn is_autonomous(&self) -> bool {
        false
    }

    fn describe(&self) -> String {
        format!("{self:?}")
    }
}

/// One-dimensional model whose coefficients come from the expression grammar.
#[derive(Debug, Clone)]
pub struct ScalarModel {
    drift: Expr,
    diffusion: Expr,
}

impl ScalarModel {
    pub fn new(drift: Expr, diffusion: Expr) -> Self {
        Self { drift, diffusion }
    }

    pub fn parse(drift: &str, diffusion: &str) -> Result<Self> {
        Ok(Self::new(Expr::parse(drift)?, Expr::parse(diffusion)?))
    }

    pub fn drift_expr(&self) -> &Expr {
        &self.drift
    }

    pub fn diffusion_expr(&self) -> &Expr {
        &self.diffusion
    }
}

impl Coefficients for ScalarModel {
    fn dim(&self) -> usize {
        1
    }

    fn noise_dim(&self) -> usize {
        usize::from(!self.diffusion.is_zero())
    }

    fn drift(&self, t: f64, x: &[f64], out: &mut [f64]) {
        out[0] = self.drift.eval(t, x[0]);
    }

    fn drift_jacobian(&self, t: f64, x: &[f64], out: &mut [f64]) -> bool {
        out[0] = self.drift.derivative(t, x[0]);
        true
    }

    fn diffusion(&self, t: f64, x: &[f64], out: &mut [f64]) {
        if let Some(o) = out.first_mut() {
            *o = self.diffusion.eval(t, x[0]);
        }
    }

    fn is_autonomous(&self) -> bool {
        self.drift.is_autonomous() && self.diffusion.is_autonomous()
    }

    fn describe(&self) -> String {
        format!("f(t,x) = {}; g(t,x) = {}", self.drift, self.diffusion)
    }
}

type VecFn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;

/// Model assembled from closures, for `d > 1` or coefficients outside the
/// expression grammar.
#[derive(Clone)]
pub struct FnModel {
    dim: usize,
    noise_dim: usize,
    drift: Arc<VecFn>,
    jacobian: Option<Arc<VecFn>>,
    diffusion: Arc<VecFn>,
    autonomous: bool,
}

impl FnModel {
    pub fn new(
        dim: usize,
        noise_dim: usize,
        drift: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
        diffusion: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            noise_dim,
            drift: Arc::new(drift),
            jacobian: None,
            diffusion: Arc::new(diffusion),
            autonomous: false,
        }
    }

    pub fn with_jacobian(
        mut self,
        jac: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.jacobian = Some(Arc::new(jac));
        self
    }

    pub fn autonomous(mut self) -> Self {
        self.autonomous = true;
        self
    }
}

impl fmt::Debug for FnModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnModel")
            .field("dim", &self.dim)
            .field("noise_dim", &self.noise_dim)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .finish()
    }
}

impl Coefficients for FnModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    fn drift(&self, t: f64, x: &[f64], out: &mut [f64]) {
        (self.drift)(t, x, out)
    }

    fn drift_jacobian(&self, t: f64, x: &[f64], out: &mut [f64]) -> bool {
        match &self.jacobian {
            Some(j) => {
                j(t, x, out);
                true
            }
            None => false,
        }
    }

    fn diffusion(&self, t: f64, x: &[f64], out: &mut [f64]) {
        (self.diffusion)(t, x, out)
    }

    fn is_autonomous(&self) -> bool {
        self.autonomous
    }
}

/// Growth bound `|g(t,x)|^2 <= m2_big |x|^2 + m2_small` declared explicitly
/// instead of derived from the diffusion Lipschitz constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthBound {
    pub m2_big: f64,
    pub m2_small: f64,
}

/// Constants as declared by the user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawConstants {
    /// Polynomial Lipschitz factor: `|f(t,x)-f(t,y)|^2 <= h (1+|x|^sigma+|y|^sigma) |x-y|^2`.
    pub h: f64,
    pub sigma: f64,
    /// Khasminskii-type condition `x.f + (q-1)/2 |g|^2 <= m (1 + |x|^2)`.
    pub q: f64,
    pub m: f64,
    /// Time-Hölder constants and exponents of drift (`k1`, `gamma1`) and diffusion (`k2`, `gamma2`).
    pub k1: f64,
    pub k2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    /// One-sided Lipschitz constant of the drift.
    pub k3: f64,
    /// Lipschitz constant (squared) of the diffusion.
    pub k4: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth: Option<GrowthBound>,
}

/// What the constants are certified for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// All conditions hold, including `k3 < -1/2` and `k4 + 2 k3 < -1`;
    /// long-time results (moment bound, contraction, invariant measure) apply.
    Dissipative,
    /// Only the finite-horizon conditions are asserted; the implicit step
    /// still needs `k3 * dt < 1`.
    FiniteHorizon,
}

/// Bounds derived from the declared constants:
/// `x.f(t,x) <= m1_big |x|^2 + m1_small` and `|g(t,x)|^2 <= m2_big |x|^2 + m2_small`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedBounds {
    pub m1_big: f64,
    pub m1_small: f64,
    pub m2_big: f64,
    pub m2_small: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssumptionConstants {
    pub raw: RawConstants,
    pub regime: Regime,
    pub derived: DerivedBounds,
}

const SUP_GRID: usize = 1000;

impl AssumptionConstants {
    /// Full gate: every finite-horizon and long-time condition.
    pub fn dissipative(raw: RawConstants, coeffs: &dyn Coefficients, horizon: f64) -> Result<Self> {
        let c = Self::build(raw, coeffs, horizon, Regime::Dissipative)?;
        let violations = c.violations();
        if !violations.is_empty() {
            return Err(Error::precondition(format!(
                "constants rejected: {}",
                violations.join("; ")
            )));
        }
        Ok(c)
    }

    /// Gate for finite-horizon convergence problems whose drift is not
    /// globally dissipative.
    pub fn finite_horizon(
        raw: RawConstants,
        coeffs: &dyn Coefficients,
        horizon: f64,
    ) -> Result<Self> {
        let c = Self::build(raw, coeffs, horizon, Regime::FiniteHorizon)?;
        let violations = c.violations();
        if !violations.is_empty() {
            return Err(Error::precondition(format!(
                "constants rejected: {}",
                violations.join("; ")
            )));
        }
        Ok(c)
    }

    fn build(
        raw: RawConstants,
        coeffs: &dyn Coefficients,
        horizon: f64,
        regime: Regime,
    ) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::config(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        let (m1_small, g0_sq) = sup_at_origin(coeffs, horizon);
        let (m2_big, m2_small) = match raw.growth {
            Some(g) => (g.m2_big, g.m2_small),
            None => (raw.k4, g0_sq),
        };
        Ok(Self {
            raw,
            regime,
            derived: DerivedBounds {
                m1_big: 0.5 + raw.k3,
                m1_small,
                m2_big,
                m2_small,
            },
        })
    }

    /// Conditions that fail for the declared regime.
    pub fn violations(&self) -> Vec<String> {
        let r = &self.raw;
        let mut v = Vec::new();
        let mut need = |ok: bool, msg: String| {
            if !ok {
                v.push(msg)
            }
        };
        need(r.h > 0.0, format!("H = {} must be positive", r.h));
        need(
            r.sigma > 0.0,
            format!("sigma = {} must be positive", r.sigma),
        );
        need(
            r.q >= 2.0 * r.sigma + 2.0,
            format!(
                "q = {} must be at least 2 sigma + 2 = {}",
                r.q,
                2.0 * r.sigma + 2.0
            ),
        );
        need(r.m > 0.0, format!("M = {} must be positive", r.m));
        need(
            r.k1 > 0.0 && r.k2 > 0.0,
            "K1, K2 must be positive".to_string(),
        );
        need(
            r.gamma1 > 0.0 && r.gamma1 < 1.0,
            format!("gamma1 = {} must lie in (0, 1)", r.gamma1),
        );
        need(
            r.gamma2 > 0.0 && r.gamma2 < 1.0,
            format!("gamma2 = {} must lie in (0, 1)", r.gamma2),
        );
        need(r.k4 > 0.0, format!("K4 = {} must be positive", r.k4));
        if self.regime == Regime::Dissipative {
            let d = &self.derived;
            need(r.k3 < -0.5, format!("K3 = {} must be below -1/2", r.k3));
            need(
                r.k4 + 2.0 * r.k3 < -1.0,
                format!("K4 + 2 K3 = {} must be below -1", r.k4 + 2.0 * r.k3),
            );
            need(
                d.m1_big < 0.0,
                format!("M1 = {} must be negative", d.m1_big),
            );
            need(
                d.m2_big + 2.0 * d.m1_big < 0.0,
                format!("M2 + 2 M1 = {} must be negative", d.m2_big + 2.0 * d.m1_big),
            );
        }
        v
    }

    pub fn k3(&self) -> f64 {
        self.raw.k3
    }

    pub fn k4(&self) -> f64 {
        self.raw.k4
    }

    pub fn is_dissipative(&self) -> bool {
        self.regime == Regime::Dissipative
    }
}

/// `(sup_t |f(t,0)|^2 / 2, sup_t |g(t,0)|^2)` over a uniform grid on `[0, T]`.
fn sup_at_origin(coeffs: &dyn Coefficients, horizon: f64) -> (f64, f64) {
    let (d, m) = (coeffs.dim(), coeffs.noise_dim());
    let zero = vec![0.0; d];
    let mut f = vec![0.0; d];
    let mut g = vec![0.0; d * m];
    let (mut sf, mut sg) = (0.0f64, 0.0f64);
    for i in 0..SUP_GRID {
        let t = horizon * i as f64 / (SUP_GRID - 1) as f64;
        coeffs.drift(t, &zero, &mut f);
        coeffs.diffusion(t, &zero, &mut g);
        sf = sf.max(0.5 * f.iter().map(|v| v * v).sum::<f64>());
        sg = sg.max(g.iter().map(|v| v * v).sum::<f64>());
    }
    (sf, sg)
}

/// A complete problem: coefficients, noise, initial value, horizon and constants.
#[derive(Debug, Clone)]
pub struct SdeProblem {
    pub id: String,
    pub coeffs: Arc<dyn Coefficients>,
    pub noise: NoiseSpec,
    pub x0: Vec<f64>,
    pub horizon: f64,
    pub constants: AssumptionConstants,
}

impl SdeProblem {
    pub fn new(
        id: impl Into<String>,
        coeffs: Arc<dyn Coefficients>,
        noise: NoiseSpec,
        x0: Vec<f64>,
        horizon: f64,
        constants: AssumptionConstants,
    ) -> Result<Self> {
        noise.validate()?;
        if x0.len() != coeffs.dim() {
            return Err(Error::config(format!(
                "initial value has dimension {}, model has {}",
                x0.len(),
                coeffs.dim()
            )));
        }
        if noise.brownian_dim != coeffs.noise_dim() {
            return Err(Error::config(format!(
                "noise declares {} Brownian components, diffusion has {}",
                noise.brownian_dim,
                coeffs.noise_dim()
            )));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::config(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("initial value must be finite"));
        }
        Ok(Self {
            id: id.into(),
            coeffs,
            noise,
            x0,
            horizon,
            constants,
        })
    }

    pub fn dim(&self) -> usize {
        self.coeffs.dim()
    }

    pub fn brownian_dim(&self) -> usize {
        self.noise.brownian_dim
    }

    pub fn has_diffusion(&self) -> bool {
        self.noise.brownian_dim > 0
    }

    pub fn with_x0(&self, x0: Vec<f64>) -> Result<Self> {
        Self::new(
            self.id.clone(),
            self.coeffs.clone(),
            self.noise,
            x0,
            self.horizon,
            self.constants,
        )
    }

    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        let constants = match self.constants.regime {
            Regime::Dissipative => {
                AssumptionConstants::dissipative(self.constants.raw, &*self.coeffs, horizon)?
            }
            Regime::FiniteHorizon => {
                AssumptionConstants::finite_horizon(self.constants.raw, &*self.coeffs, horizon)?
            }
        };
        Self::new(
            self.id.clone(),
            self.coeffs.clone(),
            self.noise,
            self.x0.clone(),
            horizon,
            constants,
        )
    }

    pub fn with_noise(&self, noise: NoiseSpec) -> Result<Self> {
        Self::new(
            self.id.clone(),
            self.coeffs.clone(),
            noise,
            self.x0.clone(),
            self.horizon,
            self.constants,
        )
    }
}
