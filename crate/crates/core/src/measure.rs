//! Empirical laws of scalar ensembles: transport and Kolmogorov-Smirnov
//! distances, snapshot evolution and convergence reports.

use std::fmt::Write as _;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SdeProblem;
use crate::noise::{sample_alpha_stable, LevyDriver};
use crate::rng::{SeedPolicy, StreamTag};
use crate::sim::{make_tape, par_paths, run_path, step_count, SimConfig};
use crate::stats::{ks_critical_value, ks_two_sample_sorted, KsResult, MeanAccumulator};

/// Fixed seed for subsampling and bootstrap draws.
const RESAMPLE_SEED: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub problem_id: String,
    pub dt: f64,
    pub n_paths: usize,
    pub master_seed: u64,
}

/// Sorted scalar sample observed at time `time`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMeasure {
    values: Vec<f64>,
    pub time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl EmpiricalMeasure {
    pub fn new(mut values: Vec<f64>, time: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::config("empirical measure needs at least one value"));
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::config("empirical measure contains NaN"));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self {
            values,
            time,
            provenance: None,
        })
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .collect::<MeanAccumulator>()
            .mean()
    }

    /// Linear-interpolation quantile, `p` in `[0, 1]`.
    pub fn quantile(&self, p: f64) -> f64 {
        let h = p.clamp(0.0, 1.0) * (self.len() - 1) as f64;
        let (lo, frac) = (h.floor() as usize, h.fract());
        let hi = (lo + 1).min(self.len() - 1);
        self.values[lo] + frac * (self.values[hi] - self.values[lo])
    }

    /// `true` when all values coincide.
    pub fn is_degenerate(&self) -> bool {
        self.values[0] == self.values[self.len() - 1]
    }

    /// `n` values drawn without replacement, sorted.
    fn subsample(&self, n: usize, seed: u64) -> Vec<f64> {
        if n >= self.len() {
            return self.values.clone();
        }
        let mut rng = SeedPolicy::new(seed, 0, StreamTag::Auxiliary).rng();
        let mut idx = index::sample(&mut rng, self.len(), n).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| self.values[i]).collect()
    }

    fn bootstrap<R: Rng + ?Sized>(&self, rng: &mut R) -> EmpiricalMeasure {
        let n = self.len();
        let mut v: Vec<f64> = (0..n)
            .map(|_| self.values[rng.random_range(0..n)])
            .collect();
        v.sort_by(f64::total_cmp);
        EmpiricalMeasure {
            values: v,
            time: self.time,
            provenance: None,
        }
    }
}

/// `W_k = inf E|u - v|^k` between two empirical measures, `k` in `(0, 1]`.
/// The larger sample is subsampled to the size of the smaller one with a
/// fixed seed.
///
/// For `k = 1` the sorted coupling is optimal. For `k < 1` the cost is
/// concave and an optimal matching can be taken non-crossing, so each pair
/// encloses a balanced block; the merged sample then splits into
/// independent alternating chains (one per level of the running count
/// `#a - #b`), each solved by an interval recursion.
pub fn wasserstein_k(a: &EmpiricalMeasure, b: &EmpiricalMeasure, k: f64) -> Result<f64> {
    if !(k > 0.0 && k <= 1.0) {
        return Err(Error::config(format!("k must lie in (0, 1], got {k}")));
    }
    let n = a.len().min(b.len());
    let (sa, sb);
    let (xa, xb): (&[f64], &[f64]) = if a.len() == b.len() {
        (a.values(), b.values())
    } else {
        sa = a.subsample(n, RESAMPLE_SEED);
        sb = b.subsample(n, RESAMPLE_SEED);
        (&sa, &sb)
    };
    let total = if k == 1.0 {
        xa.iter()
            .zip(xb)
            .map(|(u, v)| (u - v).abs())
            .collect::<crate::stats::CompensatedSum>()
            .value()
    } else {
        concave_matching_cost(xa, xb, k)?
    };
    Ok(total / n as f64)
}

/// Longest chain the `k < 1` recursion accepts.
pub const MAX_CHAIN: usize = 2000;

fn concave_matching_cost(xa: &[f64], xb: &[f64], k: f64) -> Result<f64> {
    let mut chains: std::collections::BTreeMap<i64, Vec<f64>> = Default::default();
    let (mut i, mut j, mut h) = (0, 0, 0i64);
    while i < xa.len() || j < xb.len() {
        if j == xb.len() || (i < xa.len() && xa[i] <= xb[j]) {
            chains.entry(h).or_default().push(xa[i]);
            h += 1;
            i += 1;
        } else {
            h -= 1;
            chains.entry(h).or_default().push(xb[j]);
            j += 1;
        }
    }
    let mut total = crate::stats::CompensatedSum::new();
    for chain in chains.values() {
        if chain.len() > MAX_CHAIN {
            return Err(Error::config(format!(
                "W_k with k < 1 needs a chain of {} points (limit {MAX_CHAIN}); use k = 1",
                chain.len()
            )));
        }
        total.add(chain_cost(chain, k));
    }
    Ok(total.value())
}

/// Minimal non-crossing perfect matching of an alternating chain under the
/// cost `|u - v|^k`.
fn chain_cost(x: &[f64], k: f64) -> f64 {
    let l = x.len();
    debug_assert!(l % 2 == 0);
    if l == 2 {
        return (x[1] - x[0]).abs().powf(k);
    }
    // c[s * (l + 1) + e] is the cost of x[s..e]; only even lengths are used.
    let w = l + 1;
    let mut c = vec![0.0; w * w];
    for len in (2..=l).step_by(2) {
        for s in 0..=l - len {
            let e = s + len;
            let mut best = f64::INFINITY;
            for u in (s + 1..e).step_by(2) {
                let v = (x[u] - x[s]).abs().powf(k) + c[(s + 1) * w + u] + c[(u + 1) * w + e];
                if v < best {
                    best = v;
                }
            }
            c[s * w + e] = best;
        }
    }
    c[l]
}

/// Target law for long-time experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StationaryReference {
    /// Symmetric alpha-stable law, realised by a large sample.
    AnalyticStable {
        alpha: f64,
        scale: f64,
        sample_size: usize,
        seed: u64,
    },
    /// A late-time ensemble snapshot.
    EmpiricalSnapshot(EmpiricalMeasure),
}

pub const DEFAULT_REFERENCE_SIZE: usize = 1_000_000;

/// Stationary scale `2 (1 / (2 alpha))^(1/alpha)` of `dx = -2x dt + 2 dL`
/// for a unit symmetric alpha-stable `L`.
pub fn ou_stationary_scale(alpha: f64) -> f64 {
    2.0 * (1.0 / (2.0 * alpha)).powf(1.0 / alpha)
}

impl StationaryReference {
    pub fn stable(alpha: f64, scale: f64, seed: u64) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(Error::config("reference scale must be positive"));
        }
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::config("reference alpha must lie in (0, 2]"));
        }
        Ok(StationaryReference::AnalyticStable {
            alpha,
            scale,
            sample_size: DEFAULT_REFERENCE_SIZE,
            seed,
        })
    }

    /// The reference as a sample of at least `min_size` values.
    pub fn realize(&self, min_size: usize) -> Result<EmpiricalMeasure> {
        match self {
            StationaryReference::AnalyticStable {
                alpha,
                scale,
                sample_size,
                seed,
            } => {
                let n = (*sample_size).max(min_size);
                let v = sample_alpha_stable(
                    *alpha,
                    *scale,
                    1.0,
                    n,
                    SeedPolicy::new(*seed, 0, StreamTag::Auxiliary),
                )?;
                EmpiricalMeasure::new(v, f64::INFINITY)
            }
            StationaryReference::EmpiricalSnapshot(m) => {
                if m.len() < 2 || m.is_degenerate() {
                    return Err(Error::precondition("reference snapshot is degenerate"));
                }
                Ok(m.clone())
            }
        }
    }
}

/// Two-sample KS of `a` against the reference. An analytic reference is
/// sampled with at least `10 n` values.
pub fn ks_statistic(a: &EmpiricalMeasure, reference: &StationaryReference) -> Result<KsResult> {
    let r = reference.realize(10 * a.len())?;
    Ok(ks_two_sample_sorted(a.values(), r.values()))
}

/// Snapshots of the scalar state at each checkpoint from one ensemble run on
/// the grid `t_i = i dt`.
pub fn evolve_empirical_law(
    problem: &SdeProblem,
    dt: f64,
    n_paths: usize,
    checkpoints: &[f64],
    master_seed: u64,
    cfg: &SimConfig,
) -> Result<Vec<EmpiricalMeasure>> {
    if problem.dim() != 1 {
        return Err(Error::config(
            "empirical laws are implemented for scalar problems",
        ));
    }
    if n_paths == 0 || checkpoints.is_empty() {
        return Err(Error::config("need at least one path and one checkpoint"));
    }
    if !has_mean_zero(&problem.noise.levy) {
        return Err(Error::precondition(
            "long-time experiments need a mean-zero Lévy driver",
        ));
    }
    let mut index = Vec::with_capacity(checkpoints.len());
    for &t in checkpoints {
        let i = step_count(t, dt);
        if !(t > 0.0) || (i as f64 * dt - t).abs() > 1e-9 * t.max(1.0) {
            return Err(Error::config(format!(
                "checkpoint {t} is not a grid point of step {dt}"
            )));
        }
        index.push(i);
    }
    let horizon = checkpoints.iter().copied().fold(0.0, f64::max);
    let problem = problem.with_horizon(horizon)?;
    let per_path = par_paths(n_paths, |p| {
        let tape = make_tape(
            &problem,
            dt,
            SeedPolicy::new(master_seed, p, StreamTag::Brownian),
        )?;
        let inc = crate::sim::coarsen(&tape, dt)?;
        let mut out = vec![0.0; index.len()];
        run_path(&problem, &problem.x0, &inc, cfg, |i, y| {
            for (o, &k) in out.iter_mut().zip(&index) {
                if k == i {
                    *o = y[0];
                }
            }
        })?;
        Ok(out)
    })?;
    checkpoints
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let m = EmpiricalMeasure::new(per_path.iter().map(|v| v[j]).collect(), t)?;
            Ok(m.with_provenance(Provenance {
                problem_id: problem.id.clone(),
                dt,
                n_paths,
                master_seed,
            }))
        })
        .collect()
}

fn has_mean_zero(levy: &LevyDriver) -> bool {
    match levy {
        LevyDriver::CompoundPoisson {
            centered, jump_law, ..
        } => *centered || jump_law.mean() == 0.0,
        _ => true,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceRow {
    pub time: f64,
    pub ks: f64,
    pub ks_stderr: f64,
    pub p_value: f64,
    pub wasserstein: f64,
    pub wasserstein_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub k: f64,
    pub rows: Vec<DistanceRow>,
    /// `D_{j+1} < D_j + 3 sqrt(se_j^2 + se_{j+1}^2)` for every consecutive pair.
    pub ks_decreasing: bool,
    pub wasserstein_decreasing: bool,
    pub level: f64,
    /// Final KS p-value exceeds `level`.
    pub final_below_threshold: bool,
    pub final_critical_value: f64,
    pub bootstrap_replicates: usize,
}

impl InvariantReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,ks,ks_stderr,ks_p_value,wasserstein,wasserstein_stderr\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.time, r.ks, r.ks_stderr, r.p_value, r.wasserstein, r.wasserstein_stderr
            );
        }
        s
    }
}

pub const BOOTSTRAP_REPLICATES: usize = 20;
pub const SLACK: f64 = 3.0;

fn decreasing(values: &[(f64, f64)]) -> bool {
    values
        .windows(2)
        .all(|w| w[1].0 < w[0].0 + SLACK * (w[0].1 * w[0].1 + w[1].1 * w[1].1).sqrt())
}

/// Distances of each snapshot to the reference, with bootstrap standard
/// errors over paths.
pub fn invariant_convergence_report(
    snapshots: &[EmpiricalMeasure],
    reference: &StationaryReference,
    k: f64,
    level: f64,
) -> Result<InvariantReport> {
    if snapshots.is_empty() {
        return Err(Error::config("no snapshots"));
    }
    let n_max = snapshots.iter().map(|s| s.len()).max().unwrap_or(0);
    let r = reference.realize(10 * n_max)?;
    let mut rng = SeedPolicy::new(RESAMPLE_SEED, 1, StreamTag::Auxiliary).rng();
    let mut rows = Vec::with_capacity(snapshots.len());
    for s in snapshots {
        let ks = ks_two_sample_sorted(s.values(), r.values());
        let w = wasserstein_k(s, &r, k)?;
        let mut ks_acc = MeanAccumulator::new();
        let mut w_acc = MeanAccumulator::new();
        for _ in 0..BOOTSTRAP_REPLICATES {
            let b = s.bootstrap(&mut rng);
            ks_acc.push(ks_two_sample_sorted(b.values(), r.values()).statistic);
            w_acc.push(wasserstein_k(&b, &r, k)?);
        }
        rows.push(DistanceRow {
            time: s.time,
            ks: ks.statistic,
            ks_stderr: ks_acc.variance().sqrt(),
            p_value: ks.p_value,
            wasserstein: w,
            wasserstein_stderr: w_acc.variance().sqrt(),
        });
    }
    let last = rows.last().expect("non-empty");
    let final_critical_value =
        ks_critical_value(level, snapshots.last().expect("non-empty").len(), r.len());
    Ok(InvariantReport {
        k,
        ks_decreasing: decreasing(&rows.iter().map(|r| (r.ks, r.ks_stderr)).collect::<Vec<_>>()),
        wasserstein_decreasing: decreasing(
            &rows
                .iter()
                .map(|r| (r.wasserstein, r.wasserstein_stderr))
                .collect::<Vec<_>>(),
        ),
        level,
        final_below_threshold: last.p_value > level,
        final_critical_value,
        bootstrap_replicates: BOOTSTRAP_REPLICATES,
        rows,
    })
}

/// Gaussian kernel density estimate on `n_points` between the 0.5% and
/// 99.5% quantiles with Silverman's bandwidth
/// `0.9 min(sd, IQR / 1.34) n^(-1/5)`.
pub fn kernel_density(m: &EmpiricalMeasure, n_points: usize) -> Vec<(f64, f64)> {
    let n = m.len() as f64;
    let acc: MeanAccumulator = m.values().iter().copied().collect();
    let sd = acc.variance().sqrt();
    let iqr = m.quantile(0.75) - m.quantile(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = 0.9 * spread * n.powf(-0.2);
    let (lo, hi) = (m.quantile(0.005), m.quantile(0.995));
    if !(h > 0.0) || n_points < 2 {
        return vec![(lo, f64::INFINITY)];
    }
    let norm = 1.0 / (n * h * (2.0 * std::f64::consts::PI).sqrt());
    (0..n_points)
        .map(|j| {
            let x = lo + (hi - lo) * j as f64 / (n_points - 1) as f64;
            // Only values within 8 bandwidths contribute above 1e-14.
            let from = m.values().partition_point(|v| *v < x - 8.0 * h);
            let to = m.values().partition_point(|v| *v <= x + 8.0 * h);
            let s: f64 = m.values()[from..to]
                .iter()
                .map(|v| {
                    let z = (x - v) / h;
                    (-0.5 * z * z).exp()
                })
                .sum();
            (x, s * norm)
        })
        .collect()
}
