//! Strong error against a fine reference path on the same tape, and
//! log-log order fits.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AssumptionConstants, SdeProblem};
use crate::noise::{AcceptanceStats, NoiseSpec};
use crate::sim::{map_ensemble, refinement_factor, SimConfig, SolverStats};
use crate::stats::MeanAccumulator;

/// Where the error is measured.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMode {
    /// `E|y_ref(T) - Y(T)|^2`.
    #[default]
    Terminal,
    /// `E max_i |y_ref(t_i) - Y_i|^2` over the coarse grid.
    MaxOverGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub dt: f64,
    pub mse: f64,
    pub stderr: f64,
    pub n_paths: usize,
    pub rmse: f64,
    /// Delta-method standard error of `rmse`.
    pub rmse_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorTable {
    pub problem_id: String,
    pub reference_dt: f64,
    pub mode: ErrorMode,
    pub master_seed: u64,
    pub rows: Vec<ErrorRow>,
    pub solver: SolverStats,
    pub acceptance: AcceptanceStats,
}

impl ErrorTable {
    /// Table from precomputed rows. `dt` must strictly decrease.
    pub fn from_rows(reference_dt: f64, rows: Vec<ErrorRow>) -> Result<Self> {
        check_decreasing(&rows.iter().map(|r| r.dt).collect::<Vec<_>>())?;
        if rows.iter().any(|r| !(r.mse >= 0.0)) {
            return Err(Error::config("mse must be non-negative"));
        }
        Ok(Self {
            problem_id: String::new(),
            reference_dt,
            mode: ErrorMode::Terminal,
            master_seed: 0,
            rows,
            solver: SolverStats::default(),
            acceptance: AcceptanceStats::default(),
        })
    }

    pub fn row(dt: f64, mse: f64, stderr: f64, n_paths: usize) -> ErrorRow {
        let rmse = mse.sqrt();
        let rmse_stderr = if rmse > 0.0 {
            stderr / (2.0 * rmse)
        } else {
            0.0
        };
        ErrorRow {
            dt,
            mse,
            stderr,
            n_paths,
            rmse,
            rmse_stderr,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("dt,mse,mse_stderr,rmse,rmse_stderr,n_paths\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.dt, r.mse, r.stderr, r.rmse, r.rmse_stderr, r.n_paths
            );
        }
        s
    }
}

fn check_decreasing(dts: &[f64]) -> Result<()> {
    if dts.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::config("step sizes must be strictly decreasing"));
    }
    Ok(())
}

/// Mean-square error at every `dt` of `dt_list` against the path at
/// `reference_dt` driven by the same tape.
pub fn strong_error_table(
    problem: &SdeProblem,
    dt_list: &[f64],
    reference_dt: f64,
    n_paths: usize,
    master_seed: u64,
    cfg: &SimConfig,
    mode: ErrorMode,
) -> Result<ErrorTable> {
    if n_paths < 100 {
        return Err(Error::config(format!(
            "at least 100 paths are required, got {n_paths}"
        )));
    }
    if dt_list.is_empty() {
        return Err(Error::config("dt list is empty"));
    }
    check_decreasing(dt_list)?;
    let factors = dt_list
        .iter()
        .map(|&dt| refinement_factor(dt, reference_dt))
        .collect::<Result<Vec<_>>>()?;
    let mut all = dt_list.to_vec();
    all.push(reference_dt);
    let d = problem.dim();
    let per_path = map_ensemble(
        problem,
        &all,
        n_paths,
        reference_dt,
        cfg,
        master_seed,
        |_, tape, paths| {
            let reference = paths.last().expect("reference path");
            let mut stats = SolverStats::default();
            for p in paths {
                stats.merge(&p.diagnostics);
            }
            let errors: Vec<f64> = paths[..paths.len() - 1]
                .iter()
                .zip(&factors)
                .map(|(p, &k)| {
                    let sq = |i: usize| -> f64 {
                        let (a, b) = (p.state(i), reference.state(i * k));
                        (0..d).map(|r| (a[r] - b[r]) * (a[r] - b[r])).sum()
                    };
                    match mode {
                        ErrorMode::Terminal => sq(p.steps()),
                        ErrorMode::MaxOverGrid => (0..=p.steps()).map(sq).fold(0.0, f64::max),
                    }
                })
                .collect();
            (errors, stats, tape.acceptance)
        },
    )?;
    let mut acc = vec![MeanAccumulator::new(); dt_list.len()];
    let mut solver = SolverStats::default();
    let mut acceptance = AcceptanceStats::default();
    for (errors, stats, a) in &per_path {
        for (m, &e) in acc.iter_mut().zip(errors) {
            m.push(e);
        }
        solver.merge(stats);
        acceptance.merge(a);
    }
    let rows = dt_list
        .iter()
        .zip(&acc)
        .map(|(&dt, m)| ErrorTable::row(dt, m.mean(), m.stderr(), n_paths))
        .collect();
    Ok(ErrorTable {
        problem_id: problem.id.clone(),
        reference_dt,
        mode,
        master_seed,
        rows,
        solver,
        acceptance,
    })
}

/// Least-squares line `log2 rmse = slope * log2 dt + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// 95% interval from the per-row standard errors.
    pub slope_ci: (f64, f64),
    /// Slope of `log2 mse`, twice `slope`.
    pub mse_slope: f64,
    pub n_points: usize,
}

/// Fit the strong order on the rows with positive error.
pub fn fit_order(table: &ErrorTable) -> Result<OrderFit> {
    let rows: Vec<&ErrorRow> = table.rows.iter().filter(|r| r.rmse > 0.0).collect();
    if rows.len() < 3 {
        return Err(Error::config(format!(
            "order fit needs at least 3 rows with positive error, got {}",
            rows.len()
        )));
    }
    let n = rows.len() as f64;
    let x: Vec<f64> = rows.iter().map(|r| r.dt.log2()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.rmse.log2()).collect();
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if !(sxx > 0.0) {
        return Err(Error::config(
            "order fit needs at least two distinct step sizes",
        ));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(&y)
        .map(|(a, b)| {
            let e = b - (slope * a + intercept);
            e * e
        })
        .sum();
    let ss_tot: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let r_squared = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    };
    let var: f64 = rows
        .iter()
        .zip(&x)
        .map(|(r, a)| {
            let w = (a - mx) / sxx;
            let sd = r.rmse_stderr / (r.rmse * std::f64::consts::LN_2);
            w * w * sd * sd
        })
        .sum();
    let half = 1.96 * var.sqrt();
    Ok(OrderFit {
        slope,
        intercept,
        r_squared,
        slope_ci: (slope - half, slope + half),
        mse_slope: 2.0 * slope,
        n_points: rows.len(),
    })
}

/// `min(gamma1, gamma2, 1/2)` with Brownian noise, `min(gamma1, 1/gamma0)`
/// without.
pub fn predicted_order(
    constants: &AssumptionConstants,
    noise: &NoiseSpec,
    has_diffusion: bool,
) -> f64 {
    let r = &constants.raw;
    if has_diffusion {
        r.gamma1.min(r.gamma2).min(0.5)
    } else {
        r.gamma1.min(1.0 / noise.gamma0)
    }
}

/// Whitespace-separated columns `dt rmse rmse_stderr fit predicted`; the last
/// two are guide lines through the first point with the fitted and predicted
/// slopes.
pub fn plot_data(table: &ErrorTable, fit: &OrderFit, predicted: f64) -> String {
    let mut s = String::from("# dt rmse rmse_stderr fit predicted\n");
    let Some(first) = table.rows.iter().find(|r| r.rmse > 0.0) else {
        return s;
    };
    for r in &table.rows {
        let ratio = r.dt / first.dt;
        let fitted = 2f64.powf(fit.intercept) * r.dt.powf(fit.slope);
        let guide = first.rmse * ratio.powf(predicted);
        let _ = writeln!(
            s,
            "{} {} {} {} {}",
            r.dt, r.rmse, r.rmse_stderr, fitted, guide
        );
    }
    s
}
