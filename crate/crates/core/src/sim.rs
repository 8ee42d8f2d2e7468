//! Path simulation on uniform grids.
//!
//! All step sizes of one path are driven by a single [`IncrementTape`] at the
//! finest resolution; coarse increments are exact block sums of the tape, so
//! every resolution sees the same Brownian and Lévy path.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SdeProblem;
use crate::noise::{fill_brownian, AcceptanceStats, IncrementMatrix};
use crate::rng::{SeedPolicy, StreamTag};
use crate::solver::{ImplicitSolver, ImplicitStepConfig, StepDiagnostics};
use crate::stats::MeanAccumulator;

/// Number of steps `N = floor(T / dt)`, tolerant of rounding in `T / dt`.
pub fn step_count(horizon: f64, dt: f64) -> usize {
    let q = horizon / dt;
    let r = q.round();
    if (q - r).abs() <= 1e-9 * r.max(1.0) {
        r as usize
    } else {
        q.floor() as usize
    }
}

/// Integer ratio `dt / fine_dt`, or a configuration error.
pub fn refinement_factor(dt: f64, fine_dt: f64) -> Result<usize> {
    if !(dt > 0.0 && fine_dt > 0.0) {
        return Err(Error::config("step sizes must be positive"));
    }
    let q = dt / fine_dt;
    let r = q.round();
    if r < 1.0 || (q - r).abs() > 1e-9 * r {
        return Err(Error::config(format!(
            "dt = {dt} is not a multiple of the tape step {fine_dt}"
        )));
    }
    Ok(r as usize)
}

/// Finest-grid Brownian (`n_fine x m`) and Lévy (`n_fine x d`) increments of
/// one path.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementTape {
    pub fine_dt: f64,
    pub n_fine: usize,
    pub brownian: IncrementMatrix,
    pub levy: IncrementMatrix,
    pub seed: SeedPolicy,
    pub acceptance: AcceptanceStats,
}

/// Increments at one resolution, ready for [`simulate_path`].
#[derive(Debug, Clone, PartialEq)]
pub struct Increments {
    pub dt: f64,
    pub brownian: IncrementMatrix,
    pub levy: IncrementMatrix,
}

impl Increments {
    pub fn steps(&self) -> usize {
        self.brownian.rows()
    }

    /// All-zero increments for `n` steps: the deterministic skeleton.
    pub fn zeros(problem: &SdeProblem, dt: f64, n: usize) -> Self {
        Self {
            dt,
            brownian: IncrementMatrix::zeros(n, problem.brownian_dim()),
            levy: IncrementMatrix::zeros(n, problem.dim()),
        }
    }
}

/// Draw the tape of one path. The Brownian and Lévy parts use separate
/// streams of `seed`.
pub fn make_tape(problem: &SdeProblem, fine_dt: f64, seed: SeedPolicy) -> Result<IncrementTape> {
    if !(fine_dt > 0.0 && fine_dt.is_finite()) {
        return Err(Error::config(format!(
            "tape step must be positive, got {fine_dt}"
        )));
    }
    let n_fine = step_count(problem.horizon, fine_dt);
    if n_fine == 0 {
        return Err(Error::config("tape step exceeds the horizon"));
    }
    let (m, d) = (problem.brownian_dim(), problem.dim());
    let mut brownian = IncrementMatrix::zeros(n_fine, m);
    if m > 0 {
        let mut rng = seed.with_tag(StreamTag::Brownian).rng();
        fill_brownian(&mut rng, fine_dt, brownian.as_mut_slice());
    }
    let mut levy = IncrementMatrix::zeros(n_fine, d);
    let mut acceptance = AcceptanceStats::default();
    let sampler = problem.noise.sampler()?;
    if !sampler.is_none() {
        let mut rng = seed.with_tag(StreamTag::Levy).rng();
        for v in levy.as_mut_slice() {
            *v = sampler.increment(&mut rng, fine_dt, &mut acceptance);
        }
    }
    Ok(IncrementTape {
        fine_dt,
        n_fine,
        brownian,
        levy,
        seed,
        acceptance,
    })
}

/// Increments at resolution `dt`: sums of `dt / fine_dt` consecutive tape
/// entries.
pub fn coarsen(tape: &IncrementTape, dt: f64) -> Result<Increments> {
    let factor = refinement_factor(dt, tape.fine_dt)?;
    let n = tape.n_fine / factor;
    if n == 0 {
        return Err(Error::config(format!("dt = {dt} exceeds the tape length")));
    }
    Ok(Increments {
        dt,
        brownian: tape.brownian.aggregate(factor, n),
        levy: tape.levy.aggregate(factor, n),
    })
}

/// Solver statistics over many steps.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub steps: u64,
    pub newton_iters: u64,
    pub max_newton_iters: u32,
    pub fallbacks: u64,
    pub max_residual: f64,
}

impl SolverStats {
    pub fn record(&mut self, d: &StepDiagnostics) {
        self.steps += 1;
        self.newton_iters += u64::from(d.newton_iters);
        self.max_newton_iters = self.max_newton_iters.max(d.newton_iters);
        self.fallbacks += u64::from(d.fell_back);
        self.max_residual = self.max_residual.max(d.final_residual);
    }

    pub fn merge(&mut self, other: &SolverStats) {
        self.steps += other.steps;
        self.newton_iters += other.newton_iters;
        self.max_newton_iters = self.max_newton_iters.max(other.max_newton_iters);
        self.fallbacks += other.fallbacks;
        self.max_residual = self.max_residual.max(other.max_residual);
    }

    pub fn mean_newton_iters(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.newton_iters as f64 / self.steps as f64
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub solver: ImplicitStepConfig,
}

/// Trajectory `Y_0, ..., Y_N` on the grid `t_i = i dt`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    pub dt: f64,
    pub dim: usize,
    pub states: Vec<f64>,
    pub diagnostics: SolverStats,
}

impl PathResult {
    pub fn steps(&self) -> usize {
        self.states.len() / self.dim - 1
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn terminal(&self) -> &[f64] {
        self.state(self.steps())
    }

    /// Piecewise-constant interpolant `Y(t) = Y_i` on `[t_i, t_{i+1})`.
    pub fn at_time(&self, t: f64) -> &[f64] {
        let i = ((t / self.dt) + 1e-9).floor().max(0.0) as usize;
        self.state(i.min(self.steps()))
    }
}

/// Advance the scheme through `increments`, calling `visit(i, Y_i)` at every
/// grid point including `i = 0`.
pub fn run_path(
    problem: &SdeProblem,
    x0: &[f64],
    increments: &Increments,
    cfg: &SimConfig,
    mut visit: impl FnMut(usize, &[f64]),
) -> Result<SolverStats> {
    let (d, m) = (problem.dim(), problem.brownian_dim());
    if x0.len() != d || increments.levy.cols() != d || increments.brownian.cols() != m {
        return Err(Error::config(
            "increments do not match the problem dimensions",
        ));
    }
    let dt = increments.dt;
    let mut solver = ImplicitSolver::new(problem, cfg.solver)?;
    solver.check_step(dt)?;
    let mut y = x0.to_vec();
    let mut next = vec![0.0; d];
    let mut c = vec![0.0; d];
    let mut g = vec![0.0; d * m];
    let mut stats = SolverStats::default();
    visit(0, &y);
    for i in 0..increments.steps() {
        let t = i as f64 * dt;
        c.copy_from_slice(increments.levy.row(i));
        if m > 0 {
            problem.coeffs.diffusion(t, &y, &mut g);
            let db = increments.brownian.row(i);
            for r in 0..d {
                let mut s = 0.0;
                for k in 0..m {
                    s += g[r * m + k] * db[k];
                }
                c[r] += s;
            }
        }
        for r in 0..d {
            c[r] += y[r];
        }
        let t_next = (i + 1) as f64 * dt;
        let diag = solver.solve(t_next, &c, dt, &mut next)?;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::StepFailure {
                t: t_next,
                reason: "state is not finite".into(),
                diagnostics: diag,
            });
        }
        stats.record(&diag);
        std::mem::swap(&mut y, &mut next);
        visit(i + 1, &y);
    }
    Ok(stats)
}

/// Full trajectory from `problem.x0`.
pub fn simulate_path(
    problem: &SdeProblem,
    dt: f64,
    increments: &Increments,
    cfg: &SimConfig,
) -> Result<PathResult> {
    if (increments.dt - dt).abs() > 1e-12 * dt {
        return Err(Error::config("increments were built for a different step"));
    }
    let d = problem.dim();
    let mut states = Vec::with_capacity((increments.steps() + 1) * d);
    let diagnostics = run_path(problem, &problem.x0, increments, cfg, |_, y| {
        states.extend_from_slice(y)
    })?;
    Ok(PathResult {
        dt,
        dim: d,
        states,
        diagnostics,
    })
}

/// Run `f` for every path index in parallel and return the results in path
/// order, so any subsequent fold is independent of scheduling.
pub fn par_paths<A, F>(n_paths: usize, f: F) -> Result<Vec<A>>
where
    A: Send,
    F: Fn(u64) -> Result<A> + Sync + Send,
{
    (0..n_paths as u64).into_par_iter().map(f).collect()
}

/// For every path: build one tape at `fine_dt`, simulate each `dt` of
/// `dt_list` on it and hand the coupled results to `reduce`. Only the
/// reduced values are kept.
pub fn map_ensemble<A, F>(
    problem: &SdeProblem,
    dt_list: &[f64],
    n_paths: usize,
    fine_dt: f64,
    cfg: &SimConfig,
    master_seed: u64,
    reduce: F,
) -> Result<Vec<A>>
where
    A: Send,
    F: Fn(u64, &IncrementTape, &[PathResult]) -> A + Sync + Send,
{
    if dt_list.is_empty() || n_paths == 0 {
        return Err(Error::config(
            "ensemble needs at least one step size and one path",
        ));
    }
    for &dt in dt_list {
        refinement_factor(dt, fine_dt)?;
    }
    par_paths(n_paths, |p| {
        let tape = make_tape(
            problem,
            fine_dt,
            SeedPolicy::new(master_seed, p, StreamTag::Brownian),
        )?;
        let paths = dt_list
            .iter()
            .map(|&dt| simulate_path(problem, dt, &coarsen(&tape, dt)?, cfg))
            .collect::<Result<Vec<_>>>()?;
        Ok(reduce(p, &tape, &paths))
    })
}

/// Coupled paths for every `dt` of `dt_list`: `result[p][j]` is path `p` at
/// `dt_list[j]`. Keeps every trajectory; use [`map_ensemble`] for large runs.
pub fn simulate_ensemble(
    problem: &SdeProblem,
    dt_list: &[f64],
    n_paths: usize,
    fine_dt: f64,
    cfg: &SimConfig,
    master_seed: u64,
) -> Result<Vec<Vec<PathResult>>> {
    map_ensemble(
        problem,
        dt_list,
        n_paths,
        fine_dt,
        cfg,
        master_seed,
        |_, _, paths| paths.to_vec(),
    )
}

/// `Q1 = (1 + M2 dt) / (1 - 2 M1 dt)` and `Q2 = (2 m1 + m2 + 1) dt / (1 - 2 M1 dt)`.
pub fn moment_factors(problem: &SdeProblem, dt: f64) -> Result<(f64, f64)> {
    let d = &problem.constants.derived;
    if !problem.constants.is_dissipative() {
        return Err(Error::precondition(
            "the moment bound needs dissipative constants",
        ));
    }
    if !(dt > 0.0 && dt < 1.0) {
        return Err(Error::precondition(format!("dt = {dt} must lie in (0, 1)")));
    }
    let den = 1.0 - 2.0 * d.m1_big * dt;
    let q1 = (1.0 + d.m2_big * dt) / den;
    let q2 = (2.0 * d.m1_small + d.m2_small + 1.0) * dt / den;
    if !(q1 < 1.0) {
        return Err(Error::precondition(format!("Q1 = {q1} is not below 1")));
    }
    Ok((q1, q2))
}

/// `Q3 = (1 + K4 dt) / (1 - 2 K3 dt)`.
pub fn contraction_factor(problem: &SdeProblem, dt: f64) -> Result<f64> {
    if !problem.constants.is_dissipative() {
        return Err(Error::precondition(
            "the contraction bound needs dissipative constants",
        ));
    }
    if !(dt > 0.0 && dt < 1.0) {
        return Err(Error::precondition(format!("dt = {dt} must lie in (0, 1)")));
    }
    let q3 = (1.0 + problem.constants.k4() * dt) / (1.0 - 2.0 * problem.constants.k3() * dt);
    if !(q3 < 1.0) {
        return Err(Error::precondition(format!("Q3 = {q3} is not below 1")));
    }
    Ok(q3)
}

/// Monte Carlo curve `i -> E f_i` with standard errors and an analytic
/// envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentCurve {
    pub dt: f64,
    pub n_paths: usize,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub envelope: Vec<f64>,
}

impl MomentCurve {
    /// Grid indices where `mean > envelope + slack * stderr`.
    pub fn violations(&self, slack: f64) -> Vec<usize> {
        (0..self.mean.len())
            .filter(|&i| self.mean[i] > self.envelope[i] + slack * self.stderr[i])
            .collect()
    }
}

fn fold_curves(per_path: Vec<Vec<f64>>, len: usize) -> (Vec<f64>, Vec<f64>) {
    let mut acc = vec![MeanAccumulator::new(); len];
    for v in &per_path {
        for (a, &x) in acc.iter_mut().zip(v) {
            a.push(x);
        }
    }
    (
        acc.iter().map(|a| a.mean()).collect(),
        acc.iter().map(|a| a.stderr()).collect(),
    )
}

/// `E|X_i|^2` for `i = 0..=n_steps` against
/// `Q1^i E|X_0|^2 + Q2 (1 - Q1^i) / (1 - Q1)`.
pub fn second_moment_curve(
    problem: &SdeProblem,
    dt: f64,
    n_steps: usize,
    n_paths: usize,
    cfg: &SimConfig,
    master_seed: u64,
) -> Result<MomentCurve> {
    let (q1, q2) = moment_factors(problem, dt)?;
    let horizon = n_steps as f64 * dt;
    let problem = problem.with_horizon(horizon)?;
    let per_path = par_paths(n_paths, |p| {
        let tape = make_tape(
            &problem,
            dt,
            SeedPolicy::new(master_seed, p, StreamTag::Brownian),
        )?;
        let inc = coarsen(&tape, dt)?;
        let mut out = Vec::with_capacity(n_steps + 1);
        run_path(&problem, &problem.x0, &inc, cfg, |_, y| {
            out.push(norm_sq(y))
        })?;
        Ok(out)
    })?;
    let (mean, stderr) = fold_curves(per_path, n_steps + 1);
    let x0_sq = norm_sq(&problem.x0);
    let envelope = (0..=n_steps)
        .map(|i| {
            let qi = q1.powi(i as i32);
            qi * x0_sq + q2 * (1.0 - qi) / (1.0 - q1)
        })
        .collect();
    Ok(MomentCurve {
        dt,
        n_paths,
        mean,
        stderr,
        envelope,
    })
}

/// `E|X_i^a - X_i^b|^2` for two initial values under shared noise, against
/// `Q3^i |x_a - x_b|^2`.
pub fn two_initial_value_coupling(
    problem: &SdeProblem,
    dt: f64,
    x0_a: &[f64],
    x0_b: &[f64],
    n_paths: usize,
    horizon: f64,
    master_seed: u64,
    cfg: &SimConfig,
) -> Result<MomentCurve> {
    let q3 = contraction_factor(problem, dt)?;
    let problem = problem.with_horizon(horizon)?;
    let n_steps = step_count(horizon, dt);
    let per_path = par_paths(n_paths, |p| {
        let tape = make_tape(
            &problem,
            dt,
            SeedPolicy::new(master_seed, p, StreamTag::Brownian),
        )?;
        let inc = coarsen(&tape, dt)?;
        let mut a = Vec::with_capacity((n_steps + 1) * x0_a.len());
        run_path(&problem, x0_a, &inc, cfg, |_, y| a.extend_from_slice(y))?;
        let d = x0_a.len();
        let mut out = Vec::with_capacity(n_steps + 1);
        run_path(&problem, x0_b, &inc, cfg, |i, y| {
            let xa = &a[i * d..(i + 1) * d];
            out.push(xa.iter().zip(y).map(|(u, v)| (u - v) * (u - v)).sum());
        })?;
        Ok(out)
    })?;
    let (mean, stderr) = fold_curves(per_path, n_steps + 1);
    let d0: f64 = x0_a.iter().zip(x0_b).map(|(u, v)| (u - v) * (u - v)).sum();
    let envelope = (0..=n_steps).map(|i| q3.powi(i as i32) * d0).collect();
    Ok(MomentCurve {
        dt,
        n_paths,
        mean,
        stderr,
        envelope,
    })
}

fn norm_sq(y: &[f64]) -> f64 {
    y.iter().map(|v| v * v).sum()
}
