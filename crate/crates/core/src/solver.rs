//! Root solver for the implicit drift step `Y = c + dt f(t, Y)`.
//!
//! If the drift satisfies the one-sided Lipschitz bound with constant `K3`
//! and `K3 dt < 1`, the map `Y -> Y - dt f(t, Y)` is strongly monotone with
//! modulus `1 - K3 dt` and the root is unique. Damped Newton from the
//! explicit predictor `Y = c` handles nearly every step; scalar problems fall
//! back to bisection on a bracket that provably contains the root, vector
//! problems to Picard iteration.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Coefficients, SdeProblem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImplicitStepConfig {
    /// Absolute tolerance on the residual norm.
    pub abs_tol: f64,
    pub max_newton_iters: u32,
    pub max_bisection_iters: u32,
    /// Initial Newton damping factor in `(0, 1]`.
    pub damping: f64,
}

impl Default for ImplicitStepConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            max_newton_iters: 50,
            max_bisection_iters: 200,
            damping: 1.0,
        }
    }
}

impl ImplicitStepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) {
            return Err(Error::config("abs_tol must be positive"));
        }
        if self.max_newton_iters == 0 || self.max_bisection_iters == 0 {
            return Err(Error::config("iteration caps must be at least 1"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::config("damping must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub newton_iters: u32,
    pub fell_back: bool,
    pub final_residual: f64,
}

const MAX_HALVINGS: u32 = 30;

/// Reusable solver bound to one problem.
pub struct ImplicitSolver<'a> {
    coeffs: &'a dyn Coefficients,
    k3: f64,
    cfg: ImplicitStepConfig,
    f: Vec<f64>,
    y_trial: Vec<f64>,
    r: Vec<f64>,
    r_trial: Vec<f64>,
    jac: Vec<f64>,
}

impl<'a> ImplicitSolver<'a> {
    pub fn new(problem: &'a SdeProblem, cfg: ImplicitStepConfig) -> Result<Self> {
        cfg.validate()?;
        let d = problem.dim();
        Ok(Self {
            coeffs: &*problem.coeffs,
            k3: problem.constants.k3(),
            cfg,
            f: vec![0.0; d],
            y_trial: vec![0.0; d],
            r: vec![0.0; d],
            r_trial: vec![0.0; d],
            jac: vec![0.0; d * d],
        })
    }

    pub fn config(&self) -> &ImplicitStepConfig {
        &self.cfg
    }

    /// Check `K3 dt < 1`, the sufficient condition for a unique root.
    pub fn check_step(&self, dt: f64) -> Result<()> {
        if !(dt >= 0.0 && dt.is_finite()) {
            return Err(Error::config(format!(
                "step must be non-negative, got {dt}"
            )));
        }
        if self.k3 * dt >= 1.0 {
            return Err(Error::precondition(format!(
                "K3 * dt = {} must be below 1 for a unique implicit root",
                self.k3 * dt
            )));
        }
        Ok(())
    }

    /// Solve `y - c - dt f(t, y) = 0`, writing the root into `y`.
    pub fn solve(&mut self, t: f64, c: &[f64], dt: f64, y: &mut [f64]) -> Result<StepDiagnostics> {
        self.check_step(dt)?;
        y.copy_from_slice(c);
        if dt == 0.0 {
            return Ok(StepDiagnostics::default());
        }
        if c.len() == 1 {
            self.solve_scalar(t, c[0], dt, &mut y[0])
        } else {
            self.solve_vector(t, c, dt, y)
        }
    }

    fn residual_scalar(&self, t: f64, c: f64, dt: f64, y: f64) -> f64 {
        let mut f = [0.0];
        self.coeffs.drift(t, &[y], &mut f);
        y - c - dt * f[0]
    }

    /// Rounding floor of the residual evaluation.
    fn floor(&self, terms: f64) -> f64 {
        self.cfg.abs_tol.max(8.0 * f64::EPSILON * terms)
    }

    fn solve_scalar(&mut self, t: f64, c: f64, dt: f64, y: &mut f64) -> Result<StepDiagnostics> {
        let mut diag = StepDiagnostics::default();
        let mut f = [0.0];
        let mut jac = [0.0];
        let mut yv = c;
        self.coeffs.drift(t, &[yv], &mut f);
        let mut r = -dt * f[0];
        let mut tol = self.floor(yv.abs() + c.abs() + (dt * f[0]).abs());
        let mut converged = r.abs() <= tol;
        while !converged && diag.newton_iters < self.cfg.max_newton_iters {
            let deriv = if self.coeffs.drift_jacobian(t, &[yv], &mut jac) {
                jac[0]
            } else {
                central_difference(self.coeffs, t, &[yv], &mut jac);
                jac[0]
            };
            let j = 1.0 - dt * deriv;
            if !(j.is_finite() && j.abs() > 1e-300) {
                break;
            }
            let step = r / j;
            let mut lam = self.cfg.damping;
            let mut improved = false;
            for _ in 0..=MAX_HALVINGS {
                let trial = yv - lam * step;
                self.coeffs.drift(t, &[trial], &mut f);
                let rt = trial - c - dt * f[0];
                if rt.abs() < r.abs() {
                    yv = trial;
                    r = rt;
                    tol = self.floor(yv.abs() + c.abs() + (dt * f[0]).abs());
                    improved = true;
                    break;
                }
                lam *= 0.5;
            }
            diag.newton_iters += 1;
            if !improved {
                break;
            }
            converged = r.abs() <= tol;
        }
        if !converged {
            diag.fell_back = true;
            let (lo, hi) = self.bracket(t, c, dt)?;
            let (root, res) = self.bisect(t, c, dt, lo, hi);
            yv = root;
            r = res;
            self.coeffs.drift(t, &[yv], &mut f);
            tol = self.floor(yv.abs() + c.abs() + (dt * f[0]).abs());
            if !(r.abs() <= tol) {
                diag.final_residual = r.abs();
                return Err(Error::StepFailure {
                    t,
                    reason: "bisection did not reach tolerance".into(),
                    diagnostics: diag,
                });
            }
        }
        diag.final_residual = r.abs();
        *y = yv;
        Ok(diag)
    }

    /// Bracket `[c - A, c + A]` whose endpoints have residuals of opposite sign.
    ///
    /// With modulus `mu = 1 - K3 dt` the root satisfies both
    /// `|Y| <= (|c| + dt |f(t,0)|) / mu` and `|Y - c| <= dt |f(t,c)| / mu`.
    pub fn bracket(&self, t: f64, c: f64, dt: f64) -> Result<(f64, f64)> {
        let mu = 1.0 - self.k3 * dt;
        let mut f = [0.0];
        self.coeffs.drift(t, &[0.0], &mut f);
        let f0 = f[0].abs();
        self.coeffs.drift(t, &[c], &mut f);
        let fc = f[0].abs();
        let mut half =
            (2.0 * (c.abs() + dt * f0 + 1.0) / mu).max(2.0 * dt * fc / mu + self.cfg.abs_tol);
        for _ in 0..64 {
            let (lo, hi) = (c - half, c + half);
            if self.residual_scalar(t, c, dt, lo) <= 0.0
                && self.residual_scalar(t, c, dt, hi) >= 0.0
            {
                return Ok((lo, hi));
            }
            half *= 2.0;
        }
        Err(Error::StepFailure {
            t,
            reason: "no sign change found for bisection".into(),
            diagnostics: StepDiagnostics {
                fell_back: true,
                ..Default::default()
            },
        })
    }

    fn bisect(&self, t: f64, c: f64, dt: f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
        let mut best = (lo, self.residual_scalar(t, c, dt, lo));
        for _ in 0..self.cfg.max_bisection_iters {
            let mid = 0.5 * (lo + hi);
            let r = self.residual_scalar(t, c, dt, mid);
            if r.abs() < best.1.abs() {
                best = (mid, r);
            }
            if r.abs() <= self.cfg.abs_tol || mid <= lo || mid >= hi {
                break;
            }
            if r < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        best
    }

    fn vector_residual(&mut self, t: f64, c: &[f64], dt: f64, y: &[f64], out: &mut [f64]) -> f64 {
        self.coeffs.drift(t, y, &mut self.f);
        let mut scale: f64 = 0.0;
        for i in 0..y.len() {
            out[i] = y[i] - c[i] - dt * self.f[i];
            scale = scale.max(y[i].abs() + c[i].abs() + (dt * self.f[i]).abs());
        }
        scale
    }

    fn solve_vector(
        &mut self,
        t: f64,
        c: &[f64],
        dt: f64,
        y: &mut [f64],
    ) -> Result<StepDiagnostics> {
        let d = c.len();
        let mut diag = StepDiagnostics::default();
        let mut r = std::mem::take(&mut self.r);
        let mut r_trial = std::mem::take(&mut self.r_trial);
        let mut y_trial = std::mem::take(&mut self.y_trial);
        let scale = self.vector_residual(t, c, dt, y, &mut r);
        let mut tol = self.floor(scale);
        let mut norm = l2(&r);
        while norm > tol && diag.newton_iters < self.cfg.max_newton_iters {
            if !self.coeffs.drift_jacobian(t, y, &mut self.jac) {
                central_difference(self.coeffs, t, y, &mut self.jac);
            }
            let j = DMatrix::from_fn(d, d, |i, k| f64::from(i == k) - dt * self.jac[i * d + k]);
            let Some(step) = j.lu().solve(&DVector::from_column_slice(&r)) else {
                break;
            };
            let mut lam = self.cfg.damping;
            let mut improved = false;
            for _ in 0..=MAX_HALVINGS {
                for i in 0..d {
                    y_trial[i] = y[i] - lam * step[i];
                }
                let s = self.vector_residual(t, c, dt, &y_trial, &mut r_trial);
                let n = l2(&r_trial);
                if n < norm {
                    y.copy_from_slice(&y_trial);
                    r.copy_from_slice(&r_trial);
                    norm = n;
                    tol = self.floor(s);
                    improved = true;
                    break;
                }
                lam *= 0.5;
            }
            diag.newton_iters += 1;
            if !improved {
                break;
            }
        }
        if norm > tol {
            // Picard: a contraction only when dt * Lip(f) < 1 near the root.
            diag.fell_back = true;
            for _ in 0..self.cfg.max_bisection_iters {
                self.coeffs.drift(t, y, &mut self.f);
                for i in 0..d {
                    y[i] = c[i] + dt * self.f[i];
                }
                let s = self.vector_residual(t, c, dt, y, &mut r);
                norm = l2(&r);
                tol = self.floor(s);
                if norm <= tol || !norm.is_finite() {
                    break;
                }
            }
        }
        self.r = r;
        self.r_trial = r_trial;
        self.y_trial = y_trial;
        diag.final_residual = norm;
        if norm <= tol {
            Ok(diag)
        } else {
            Err(Error::StepFailure {
                t,
                reason: "Newton and Picard iterations did not converge".into(),
                diagnostics: diag,
            })
        }
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Central-difference Jacobian with step `(1 + |x_j|) 1e-6` per coordinate.
pub fn central_difference(coeffs: &dyn Coefficients, t: f64, x: &[f64], out: &mut [f64]) {
    let d = x.len();
    let mut xp = x.to_vec();
    let mut fp = vec![0.0; d];
    let mut fm = vec![0.0; d];
    for j in 0..d {
        let h = (1.0 + x[j].abs()) * 1e-6;
        xp[j] = x[j] + h;
        coeffs.drift(t, &xp, &mut fp);
        xp[j] = x[j] - h;
        coeffs.drift(t, &xp, &mut fm);
        xp[j] = x[j];
        for i in 0..d {
            out[i * d + j] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
}

/// Solve one implicit step. `c` packs all explicit terms of the update.
pub fn solve_implicit_step(
    problem: &SdeProblem,
    t_next: f64,
    c: &[f64],
    dt: f64,
    cfg: &ImplicitStepConfig,
) -> Result<(Vec<f64>, StepDiagnostics)> {
    if c.len() != problem.dim() {
        return Err(Error::config("explicit part has the wrong dimension"));
    }
    let mut solver = ImplicitSolver::new(problem, *cfg)?;
    let mut y = vec![0.0; c.len()];
    let diag = solver.solve(t_next, c, dt, &mut y)?;
    Ok((y, diag))
}

/// Residual `r = Y - c - dt f(t, Y)` and Jacobian `J = I - dt Df(t, Y)`
/// (row-major). Errors if `J` is numerically singular.
pub fn newton_residual(
    problem: &SdeProblem,
    t: f64,
    y: &[f64],
    c: &[f64],
    dt: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = problem.dim();
    if y.len() != d || c.len() != d {
        return Err(Error::config("state has the wrong dimension"));
    }
    let mut f = vec![0.0; d];
    problem.coeffs.drift(t, y, &mut f);
    let r: Vec<f64> = (0..d).map(|i| y[i] - c[i] - dt * f[i]).collect();
    let mut df = vec![0.0; d * d];
    if !problem.coeffs.drift_jacobian(t, y, &mut df) {
        central_difference(&*problem.coeffs, t, y, &mut df);
    }
    let jac: Vec<f64> = (0..d * d)
        .map(|k| f64::from(k / d == k % d) - dt * df[k])
        .collect();
    let det = DMatrix::from_row_slice(d, d, &jac).determinant();
    if !(det.abs() > 1e-12) {
        return Err(Error::precondition(format!(
            "Newton Jacobian is singular (det = {det:e})"
        )));
    }
    Ok((r, jac))
}
