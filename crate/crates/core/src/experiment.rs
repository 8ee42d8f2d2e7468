//! Config-driven experiments and their on-disk artifacts.
//!
//! A run writes into one directory: `summary.json` plus CSV tables and
//! whitespace-separated plot data. Only `summary.json` carries a timestamp;
//! every other file is a deterministic function of the config.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::convergence::{fit_order, plot_data, predicted_order, strong_error_table, ErrorMode};
use crate::error::{Error, Result};
use crate::measure::{
    evolve_empirical_law, invariant_convergence_report, kernel_density, ou_stationary_scale,
    EmpiricalMeasure, StationaryReference,
};
use crate::model::{
    builtin, probe_diffusion_lipschitz, probe_one_sided_lipschitz, probe_polynomial_lipschitz,
    probe_time_holder, AssumptionConstants, RawConstants, Regime, ScalarModel, SdeProblem,
};
use crate::noise::{validate_moment_conditions, AcceptanceStats, LevyDriver, NoiseSpec};
use crate::rng::{SeedPolicy, StreamTag};
use crate::sim::{
    refinement_factor, second_moment_curve, two_initial_value_coupling, MomentCurve, SimConfig,
};
use crate::solver::ImplicitStepConfig;
use crate::stats::MeanAccumulator;

/// A scalar problem written in the expression grammar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineProblem {
    pub id: String,
    pub drift: String,
    #[serde(default = "zero_expr")]
    pub diffusion: String,
    pub noise: NoiseSpec,
    pub x0: f64,
    pub horizon: f64,
    pub constants: RawConstants,
    pub regime: Regime,
}

fn zero_expr() -> String {
    "0".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemRef {
    Builtin(String),
    Inline(InlineProblem),
}

impl ProblemRef {
    pub fn build(&self) -> Result<SdeProblem> {
        match self {
            ProblemRef::Builtin(name) => builtin::problem(name),
            ProblemRef::Inline(p) => {
                let model = ScalarModel::parse(&p.drift, &p.diffusion)?;
                let constants = match p.regime {
                    Regime::Dissipative => {
                        AssumptionConstants::dissipative(p.constants, &model, p.horizon)?
                    }
                    Regime::FiniteHorizon => {
                        AssumptionConstants::finite_horizon(p.constants, &model, p.horizon)?
                    }
                };
                SdeProblem::new(
                    p.id.clone(),
                    Arc::new(model),
                    p.noise,
                    vec![p.x0],
                    p.horizon,
                    constants,
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReferenceSpec {
    /// Symmetric stable law with the given scale.
    Stable { alpha: f64, scale: f64 },
    /// Stationary law `S(2 (1/(2 alpha))^(1/alpha))` of `dx = -2x dt + 2 dL`.
    OuStationary { alpha: f64 },
    /// The snapshot of the same run at `time`.
    Snapshot { time: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSpec {
    pub x0_a: f64,
    pub x0_b: f64,
}

fn default_k() -> f64 {
    1.0
}

fn default_level() -> f64 {
    0.01
}

fn default_radius() -> f64 {
    5.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExperimentKind {
    Convergence {
        dt_list: Vec<f64>,
        reference_dt: f64,
        #[serde(default)]
        mode: ErrorMode,
    },
    InvariantMeasure {
        dt: f64,
        checkpoints: Vec<f64>,
        reference: ReferenceSpec,
        #[serde(default = "default_k")]
        k: f64,
        #[serde(default = "default_level")]
        level: f64,
        /// Snapshot times whose distance ratio to the reference is the headline.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ratio_times: Option<(f64, f64)>,
        #[serde(default)]
        moment_curve: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        coupling: Option<CouplingSpec>,
    },
    ProbeAssumptions {
        n_pairs: usize,
        #[serde(default = "default_radius")]
        radius: f64,
    },
    SamplerValidation {
        n: usize,
        dt: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub problem: ProblemRef,
    /// Replaces the problem's noise when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
    pub n_paths: usize,
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub solver: ImplicitStepConfig,
    pub experiment: ExperimentKind,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    fn sim_config(&self) -> SimConfig {
        SimConfig {
            solver: self.solver,
        }
    }

    /// Build the problem and check every precondition of the experiment
    /// without simulating.
    pub fn validate(&self) -> Result<SdeProblem> {
        self.solver.validate()?;
        let mut problem = self.problem.build()?;
        if let Some(noise) = self.noise {
            problem = problem.with_noise(noise)?;
        }
        if self.n_paths == 0 {
            return Err(Error::config("n_paths must be at least 1"));
        }
        let k3 = problem.constants.k3();
        let check_step = |dt: f64| -> Result<()> {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::config(format!("step must be positive, got {dt}")));
            }
            if k3 * dt >= 1.0 {
                return Err(Error::precondition(format!(
                    "K3 * dt = {} must be below 1",
                    k3 * dt
                )));
            }
            Ok(())
        };
        match &self.experiment {
            ExperimentKind::Convergence {
                dt_list,
                reference_dt,
                ..
            } => {
                if problem.noise.is_heavy_tailed() {
                    return Err(Error::precondition(
                        "pure stable drivers lack the large-jump moment needed for strong convergence",
                    ));
                }
                if self.n_paths < 100 {
                    return Err(Error::config(format!(
                        "at least 100 paths are required, got {}",
                        self.n_paths
                    )));
                }
                if dt_list.len() < 3 {
                    return Err(Error::config("an order fit needs at least 3 step sizes"));
                }
                if dt_list.windows(2).any(|w| !(w[1] < w[0])) {
                    return Err(Error::config("dt_list must be strictly decreasing"));
                }
                check_step(*reference_dt)?;
                for &dt in dt_list {
                    check_step(dt)?;
                    refinement_factor(dt, *reference_dt)?;
                    if dt > problem.horizon {
                        return Err(Error::config(format!("dt = {dt} exceeds the horizon")));
                    }
                }
            }
            ExperimentKind::InvariantMeasure {
                dt,
                checkpoints,
                reference,
                k,
                level,
                ratio_times,
                moment_curve,
                coupling,
            } => {
                check_step(*dt)?;
                if problem.dim() != 1 {
                    return Err(Error::config(
                        "invariant-measure experiments need a scalar problem",
                    ));
                }
                if !problem.constants.is_dissipative() {
                    return Err(Error::precondition(
                        "invariant-measure experiments need dissipative constants",
                    ));
                }
                if !(*k > 0.0 && *k <= 1.0) {
                    return Err(Error::config(format!("k must lie in (0, 1], got {k}")));
                }
                if !(*level > 0.0 && *level < 1.0) {
                    return Err(Error::config(format!(
                        "level must lie in (0, 1), got {level}"
                    )));
                }
                if checkpoints.is_empty() || checkpoints.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::config(
                        "checkpoints must be non-empty and increasing",
                    ));
                }
                for &t in checkpoints {
                    if !(t > 0.0) || refinement_factor(t, *dt).is_err() {
                        return Err(Error::config(format!(
                            "checkpoint {t} is not a grid point of step {dt}"
                        )));
                    }
                }
                match reference {
                    ReferenceSpec::Snapshot { time } => {
                        if !checkpoints.contains(time) {
                            return Err(Error::config(format!(
                                "reference time {time} is not a checkpoint"
                            )));
                        }
                    }
                    ReferenceSpec::Stable { alpha, scale } => {
                        StationaryReference::stable(*alpha, *scale, 0)?;
                    }
                    ReferenceSpec::OuStationary { alpha } => {
                        StationaryReference::stable(*alpha, 1.0, 0)?;
                    }
                }
                if let Some((a, b)) = ratio_times {
                    if !checkpoints.contains(a) || !checkpoints.contains(b) {
                        return Err(Error::config("ratio_times must be checkpoints"));
                    }
                }
                if *moment_curve || coupling.is_some() {
                    if !(*dt < 1.0) {
                        return Err(Error::precondition(
                            "moment and contraction bounds need dt < 1",
                        ));
                    }
                    crate::sim::moment_factors(&problem, *dt)?;
                    crate::sim::contraction_factor(&problem, *dt)?;
                }
            }
            ExperimentKind::ProbeAssumptions { n_pairs, radius } => {
                if *n_pairs == 0 || !(*radius > 0.0) {
                    return Err(Error::config(
                        "probes need n_pairs >= 1 and a positive radius",
                    ));
                }
            }
            ExperimentKind::SamplerValidation { n, dt } => {
                crate::noise::check_grid(*dt, *n)?;
                if matches!(problem.noise.levy, LevyDriver::None) {
                    return Err(Error::config("the problem has no Lévy driver to validate"));
                }
            }
        }
        Ok(problem)
    }
}

/// Overrides applied on top of a config.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub n_paths: Option<usize>,
    pub master_seed: Option<u64>,
    /// Root under which the run directory `<root>/<name>` is created.
    pub output_root: Option<PathBuf>,
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Headline {
    pub label: String,
    pub value: f64,
    pub band: Option<(f64, f64)>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub kind: String,
    pub problem_id: String,
    pub n_paths: usize,
    pub master_seed: u64,
    pub workers: usize,
    pub output_dir: PathBuf,
    pub headline: Option<Headline>,
    pub artifacts: Vec<String>,
    pub details: Value,
}

/// Entry of the built-in experiment catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub kind: &'static str,
    pub description: &'static str,
    pub headline: &'static str,
    /// Band the headline must fall into, when it is a number.
    pub band: Option<(f64, f64)>,
    pub criterion: &'static str,
}

pub fn list_builtin() -> Vec<CatalogEntry> {
    vec![
        CatalogEntry {
            name: "paper-5.1a",
            kind: "convergence",
            description: "time-singular quintic drift, multiplicative Brownian noise, tempered stable gamma0 = 1.3",
            headline: "fitted rmse order",
            band: Some((0.12, 0.30)),
            criterion: "order in band",
        },
        CatalogEntry {
            name: "paper-5.1b",
            kind: "convergence",
            description: "as paper-5.1a with gamma0 = 1.5",
            headline: "fitted rmse order",
            band: Some((0.12, 0.30)),
            criterion: "order in band",
        },
        CatalogEntry {
            name: "paper-5.1c",
            kind: "convergence",
            description: "drift time exponent 4/5, diffusion time exponent 3/5",
            headline: "fitted rmse order",
            band: Some((0.40, 0.60)),
            criterion: "order in band",
        },
        CatalogEntry {
            name: "paper-5.2",
            kind: "convergence",
            description: "no Brownian noise, drift time exponent 0.9, gamma0 = 1.3",
            headline: "fitted rmse order",
            band: Some((0.65, 0.90)),
            criterion: "order in band",
        },
        CatalogEntry {
            name: "paper-5.3",
            kind: "invariant_measure",
            description: "Ornstein-Uhlenbeck with 1.5-stable noise from x0 = 10",
            headline: "KS p-value at t = 2 against S(0.9615)",
            band: Some((0.01, 1.0)),
            criterion: "KS decreasing over checkpoints and final p-value above 0.01",
        },
        CatalogEntry {
            name: "paper-5.4",
            kind: "invariant_measure",
            description: "cubic drift, affine diffusion, tempered stable noise, T = 10",
            headline: "W1(t=1, t=10) / W1(t=0.2, t=10)",
            band: Some((0.0, 0.2)),
            criterion: "ratio at most 1/5",
        },
    ]
}

fn pow2(j: i32) -> f64 {
    2f64.powi(-j)
}

/// The ready-made config of a catalog entry.
pub fn builtin_config(name: &str) -> Result<ExperimentConfig> {
    let problem = ProblemRef::Builtin(name.to_string());
    let convergence = || ExperimentKind::Convergence {
        dt_list: (9..=12).map(pow2).collect(),
        reference_dt: pow2(15),
        mode: ErrorMode::Terminal,
    };
    let (n_paths, experiment) = match name {
        "paper-5.1" | "paper-5.1a" | "paper-5.1b" | "paper-5.1c" | "paper-5.2" => {
            (1000, convergence())
        }
        "paper-5.3" => (
            10_000,
            ExperimentKind::InvariantMeasure {
                dt: 0.01,
                checkpoints: vec![0.1, 0.3, 0.7, 2.0],
                reference: ReferenceSpec::OuStationary { alpha: 1.5 },
                k: 1.0,
                level: 0.01,
                ratio_times: None,
                moment_curve: false,
                coupling: None,
            },
        ),
        "paper-5.4" => (
            10_000,
            ExperimentKind::InvariantMeasure {
                dt: 0.01,
                checkpoints: vec![0.04, 0.1, 0.2, 1.0, 2.0, 10.0],
                reference: ReferenceSpec::Snapshot { time: 10.0 },
                k: 1.0,
                level: 0.01,
                ratio_times: Some((1.0, 0.2)),
                moment_curve: true,
                coupling: Some(CouplingSpec {
                    x0_a: 10.0,
                    x0_b: -10.0,
                }),
            },
        ),
        other => {
            return Err(Error::config(format!(
                "unknown built-in experiment {other:?}; known: {}",
                builtin::NAMES.join(", ")
            )))
        }
    };
    Ok(ExperimentConfig {
        name: name.to_string(),
        problem,
        noise: None,
        n_paths,
        master_seed: 20240601,
        output_dir: None,
        solver: ImplicitStepConfig::default(),
        experiment,
    })
}

struct Out {
    dir: PathBuf,
    artifacts: Vec<String>,
}

impl Out {
    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let text = serde_json::to_string_pretty(value).expect("serializable") + "\n";
        self.write(name, &text)
    }
}

/// Validate, simulate and write all artifacts. Returns the summary that was
/// written to `summary.json`.
pub fn run(config: &ExperimentConfig, options: &RunOptions) -> Result<RunSummary> {
    let mut config = config.clone();
    if let Some(n) = options.n_paths {
        config.n_paths = n;
    }
    if let Some(s) = options.master_seed {
        config.master_seed = s;
    }
    let problem = config.validate()?;
    let root = options
        .output_root
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs"));
    let dir = root.join(&config.name);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let workers = options
        .workers
        .unwrap_or_else(rayon::current_num_threads)
        .max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config(format!("cannot start {workers} workers: {e}")))?;
    let mut out = Out {
        dir: dir.clone(),
        artifacts: Vec::new(),
    };
    out.json("config.json", &config)?;
    let (headline, details) = pool.install(|| execute(&config, &problem, &mut out))?;
    let summary = RunSummary {
        name: config.name.clone(),
        kind: kind_name(&config.experiment).to_string(),
        problem_id: problem.id.clone(),
        n_paths: config.n_paths,
        master_seed: config.master_seed,
        workers,
        output_dir: dir,
        headline,
        artifacts: {
            let mut a = out.artifacts.clone();
            a.push("summary.json".into());
            a
        },
        details,
    };
    let mut value = serde_json::to_value(&summary).expect("serializable");
    value["timestamp"] = json!(chrono::Utc::now().to_rfc3339());
    out.json("summary.json", &value)?;
    Ok(summary)
}

fn kind_name(kind: &ExperimentKind) -> &'static str {
    match kind {
        ExperimentKind::Convergence { .. } => "convergence",
        ExperimentKind::InvariantMeasure { .. } => "invariant_measure",
        ExperimentKind::ProbeAssumptions { .. } => "probe_assumptions",
        ExperimentKind::SamplerValidation { .. } => "sampler_validation",
    }
}

fn catalog_band(name: &str) -> Option<(f64, f64)> {
    list_builtin()
        .into_iter()
        .find(|e| e.name == name)
        .and_then(|e| e.band)
}

fn execute(
    config: &ExperimentConfig,
    problem: &SdeProblem,
    out: &mut Out,
) -> Result<(Option<Headline>, Value)> {
    let cfg = config.sim_config();
    let seed = config.master_seed;
    match &config.experiment {
        ExperimentKind::Convergence {
            dt_list,
            reference_dt,
            mode,
        } => {
            let table = strong_error_table(
                problem,
                dt_list,
                *reference_dt,
                config.n_paths,
                seed,
                &cfg,
                *mode,
            )?;
            let fit = fit_order(&table)?;
            let predicted =
                predicted_order(&problem.constants, &problem.noise, problem.has_diffusion());
            out.write("error_table.csv", &table.to_csv())?;
            out.write("error_plot.dat", &plot_data(&table, &fit, predicted))?;
            out.json(
                "fit.json",
                &json!({ "fit": fit, "predicted_order": predicted }),
            )?;
            let band = catalog_band(&config.name);
            let headline = Headline {
                label: "fitted rmse order".into(),
                value: fit.slope,
                band,
                passed: band.is_none_or(|(lo, hi)| fit.slope >= lo && fit.slope <= hi),
            };
            let details = json!({
                "fit": fit,
                "predicted_order": predicted,
                "rows": table.rows,
                "solver": table.solver,
                "acceptance_ratio": table.acceptance.ratio(),
            });
            Ok((Some(headline), details))
        }
        ExperimentKind::InvariantMeasure {
            dt,
            checkpoints,
            reference,
            k,
            level,
            ratio_times,
            moment_curve,
            coupling,
        } => {
            let snapshots =
                evolve_empirical_law(problem, *dt, config.n_paths, checkpoints, seed, &cfg)?;
            for s in &snapshots {
                let stem = format!("snapshots/t_{}", s.time);
                let mut csv = String::from("value\n");
                for v in s.values() {
                    let _ = writeln!(csv, "{v}");
                }
                out.write(&format!("{stem}.csv"), &csv)?;
                out.json(
                    &format!("{stem}.json"),
                    &json!({ "time": s.time, "n": s.len(), "provenance": s.provenance }),
                )?;
            }
            let reference = match reference {
                ReferenceSpec::Stable { alpha, scale } => {
                    StationaryReference::stable(*alpha, *scale, seed)?
                }
                ReferenceSpec::OuStationary { alpha } => {
                    StationaryReference::stable(*alpha, ou_stationary_scale(*alpha), seed)?
                }
                ReferenceSpec::Snapshot { time } => StationaryReference::EmpiricalSnapshot(
                    snapshots
                        .iter()
                        .find(|s| s.time == *time)
                        .cloned()
                        .expect("validated checkpoint"),
                ),
            };
            let report = invariant_convergence_report(&snapshots, &reference, *k, *level)?;
            out.write("distances.csv", &report.to_csv())?;
            out.json("report.json", &report)?;
            out.write("density.dat", &density_blocks(&snapshots))?;
            let mut details = json!({ "report": report });
            let mut headline = None;
            if let Some((num, den)) = ratio_times {
                let at = |t: f64| {
                    report
                        .rows
                        .iter()
                        .find(|r| r.time == t)
                        .map(|r| r.wasserstein)
                        .unwrap_or(f64::NAN)
                };
                let (w_num, w_den) = (at(*num), at(*den));
                let ratio = w_num / w_den;
                let band = catalog_band(&config.name).unwrap_or((0.0, 0.2));
                details["distance_ratio"] = json!({ "numerator_time": num, "denominator_time": den,
                    "numerator": w_num, "denominator": w_den, "ratio": ratio });
                headline = Some(Headline {
                    label: format!("W{k}(t={num}) / W{k}(t={den}) against the reference"),
                    value: ratio,
                    band: Some(band),
                    passed: ratio >= band.0 && ratio <= band.1,
                });
            } else if let Some(last) = report.rows.last() {
                headline = Some(Headline {
                    label: format!("KS p-value at t = {}", last.time),
                    value: last.p_value,
                    band: Some((*level, 1.0)),
                    passed: report.ks_decreasing && report.final_below_threshold,
                });
            }
            let steps =
                crate::sim::step_count(checkpoints.last().copied().unwrap_or(problem.horizon), *dt);
            if *moment_curve {
                let curve = second_moment_curve(problem, *dt, steps, config.n_paths, &cfg, seed)?;
                out.write("moment_curve.csv", &curve_csv(&curve))?;
                details["moment_curve_violations"] = json!(curve.violations(3.0).len());
            }
            if let Some(c) = coupling {
                let horizon = steps as f64 * dt;
                let curve = two_initial_value_coupling(
                    problem,
                    *dt,
                    &[c.x0_a],
                    &[c.x0_b],
                    config.n_paths,
                    horizon,
                    seed,
                    &cfg,
                )?;
                out.write("coupling_curve.csv", &curve_csv(&curve))?;
                details["coupling_curve_violations"] = json!(curve.violations(3.0).len());
            }
            Ok((headline, details))
        }
        ExperimentKind::ProbeAssumptions { n_pairs, radius } => {
            let c = &problem.constants;
            let s = SeedPolicy::new(seed, 0, StreamTag::Auxiliary);
            let osl = probe_one_sided_lipschitz(problem, c, *n_pairs, *radius, s)?;
            let poly = probe_polynomial_lipschitz(problem, c, *n_pairs, *radius, s.with_path(1))?;
            let (lip, growth) =
                probe_diffusion_lipschitz(problem, c, *n_pairs, *radius, s.with_path(2))?;
            let holder = probe_time_holder(problem, c, *n_pairs, *radius, s.with_path(3))?;
            let moments = validate_moment_conditions(&problem.noise);
            let probes = [&osl, &poly, &lip, &growth, &holder.drift, &holder.diffusion];
            let mut csv = String::from("probe,constant,n_samples,max_ratio,violations,passed\n");
            for p in probes {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{}",
                    p.name, p.constant, p.n_samples, p.max_ratio, p.violations, p.passed
                );
            }
            out.write("probes.csv", &csv)?;
            let violations: usize = probes.iter().map(|p| p.violations).sum();
            let details = json!({
                "probes": probes,
                "moment_conditions": moments,
                "constants": c,
                "constant_violations": c.violations(),
            });
            out.json("probes.json", &details)?;
            Ok((
                Some(Headline {
                    label: "probe violations".into(),
                    value: violations as f64,
                    band: Some((0.0, 0.0)),
                    passed: violations == 0,
                }),
                details,
            ))
        }
        ExperimentKind::SamplerValidation { n, dt } => {
            let sampler = problem.noise.sampler()?;
            let mut rng = SeedPolicy::new(seed, 0, StreamTag::Levy).rng();
            let mut acceptance = AcceptanceStats::default();
            let values: Vec<f64> = (0..*n)
                .map(|_| sampler.increment(&mut rng, *dt, &mut acceptance))
                .collect();
            let acc: MeanAccumulator = values.iter().copied().collect();
            let m = EmpiricalMeasure::new(values, *dt)?;
            let mut csv = String::from("p,quantile\n");
            for p in [0.001, 0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99, 0.999] {
                let _ = writeln!(csv, "{p},{}", m.quantile(p));
            }
            out.write("quantiles.csv", &csv)?;
            out.write("density.dat", &density_blocks(std::slice::from_ref(&m)))?;
            let moments = validate_moment_conditions(&problem.noise);
            let details = json!({
                "n": n,
                "dt": dt,
                "mean": acc.mean(),
                "mean_stderr": acc.stderr(),
                "variance": acc.variance(),
                "acceptance_ratio": acceptance.ratio(),
                "moment_conditions": moments,
            });
            out.json("validation.json", &details)?;
            Ok((
                Some(Headline {
                    label: "moment conditions".into(),
                    value: f64::from(u8::from(moments.passed())),
                    band: Some((1.0, 1.0)),
                    passed: moments.passed(),
                }),
                details,
            ))
        }
    }
}

fn curve_csv(c: &MomentCurve) -> String {
    let mut s = String::from("i,t,mean,stderr,envelope\n");
    for i in 0..c.mean.len() {
        let _ = writeln!(
            s,
            "{i},{},{},{},{}",
            i as f64 * c.dt,
            c.mean[i],
            c.stderr[i],
            c.envelope[i]
        );
    }
    s
}

/// One `x density` block per snapshot, separated by blank lines.
fn density_blocks(snapshots: &[EmpiricalMeasure]) -> String {
    let mut s = String::new();
    for m in snapshots {
        let _ = writeln!(s, "# t = {}", m.time);
        for (x, d) in kernel_density(m, 200) {
            let _ = writeln!(s, "{x} {d}");
        }
        s.push_str("\n\n");
    }
    s
}
