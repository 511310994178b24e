//! End-to-end experiments: generate, compile, solve, decode and score a
//! batch of seeded runs described by one JSON config.

mod config;
mod diagnose;

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use config::{
    DataKind, DataSection, DecodeSection, ExperimentConfig, OutputSection, RelaxationSection, SolverSection,
    EXPERIMENT_MAX_ITER,
};
pub use diagnose::{
    anticoncentration, correlation, diagnose, gaussian_mass, AnticoncentrationRow, DiagnosticReport, SlackSummary,
    ANTICONCENTRATION_ETAS, CERTIFIED_GAUSSIAN_CONSTANT, HIGH_FACTOR, NUM_DIRECTIONS,
};

use crate::datagen::{self, Dataset, GaussianParams, HypercubeParams};
use crate::decoder::{self, default_merge_radius, default_trials, DecodeSettings, DecodedList};
use crate::par::map_indexed;
use crate::program::{compile, RecoveryConfig};
use crate::rng::derive_seed;
use crate::sdp::{frobenius_minimize, SolveStatus};

pub const RESULTS_SCHEMA: &str = "v1";
pub const RESULTS_FILE: &str = "results.json";
pub const SUMMARY_FILE: &str = "summary.txt";

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Stage {
    Generate,
    Compile,
    Solve,
    Decode,
    Evaluate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SolverStats {
    pub status: SolveStatus,
    pub iterations: usize,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunRecord {
    pub seed: u64,
    /// Stage at which the run stopped, if it did not complete.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failed_stage: Option<Stage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_cost: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverStats>,
    pub list_length: usize,
    /// `min_j ‖P - Π̂_j‖²`, when a plant is known and a list was produced.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_error: Option<f64>,
    /// For each recorded decoy structure, its distance to the closest
    /// candidate.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub decoy_min_errors: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correlation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_eigenvalue: Option<f64>,
    pub success: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub list: Option<DecodedList>,
    /// Seconds; kept out of the JSON so results are reproducible.
    #[serde(skip)]
    pub wall_clock: f64,
}

impl RunRecord {
    fn new(seed: u64) -> Self {
        Self {
            seed,
            failed_stage: None,
            error: None,
            eps_cost: None,
            solver: None,
            list_length: 0,
            min_error: None,
            decoy_min_errors: Vec::new(),
            correlation: None,
            min_eigenvalue: None,
            success: false,
            list: None,
            wall_clock: 0.0,
        }
    }

    fn fail(&mut self, stage: Stage, err: impl std::fmt::Display) {
        self.failed_stage = Some(stage);
        self.error = Some(err.to_string());
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Aggregate {
    pub threshold: f64,
    pub runs: usize,
    pub successes: usize,
    pub failures: usize,
    pub success_rate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub median_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExperimentResult {
    pub schema: String,
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub runs: Vec<RunRecord>,
    pub aggregate: Aggregate,
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    })
}

pub fn aggregate(runs: &[RunRecord], threshold: f64) -> Aggregate {
    let successes = runs.iter().filter(|r| r.success).count();
    let failures = runs.iter().filter(|r| r.failed_stage.is_some()).count();
    let mut errors: Vec<f64> = runs.iter().filter_map(|r| r.min_error).collect();
    Aggregate {
        threshold,
        runs: runs.len(),
        successes,
        failures,
        success_rate: if runs.is_empty() {
            0.0
        } else {
            successes as f64 / runs.len() as f64
        },
        median_error: median(&mut errors),
    }
}

/// Builds the dataset of one run.
pub fn generate_dataset(cfg: &ExperimentConfig, seed: u64) -> Result<Dataset, datagen::DataError> {
    let d = &cfg.data;
    match d.kind {
        DataKind::Gaussian => datagen::generate_gaussian(&GaussianParams {
            d: d.d,
            k: d.k,
            n: d.n,
            alpha: d.alpha,
            noise_sigma: d.noise_sigma,
            adversary: d.adversary,
            seed,
        }),
        DataKind::Hypercube => datagen::generate_hypercube(&HypercubeParams {
            k: d.k,
            alpha: d.alpha,
            d: d.d,
            points_per_corner: d.points_per_corner,
            entropy_eps: d.entropy_eps,
            seed,
        })
        .map(|inst| inst.dataset),
        DataKind::File => datagen::io::load(d.path.as_deref().expect("validated")),
    }
}

/// The relaxation parameters of one run on `data`.
pub fn recovery_config(cfg: &ExperimentConfig, data: &Dataset) -> Result<RecoveryConfig, String> {
    let eps = match cfg.relaxation.eps_cost {
        Some(e) => e,
        None => RecoveryConfig::default_budget(data)
            .ok_or("relaxation.epsCost is required when the dataset has no ground truth")?,
    };
    Ok(RecoveryConfig {
        k: cfg.k(),
        alpha: cfg.alpha(),
        eps_cost: eps,
        degree: cfg.relaxation.degree,
        include_localizers: cfg.relaxation.include_localizers,
    })
}

pub fn decode_settings(cfg: &ExperimentConfig, seed: u64) -> DecodeSettings {
    let k = cfg.k();
    DecodeSettings {
        trials: cfg
            .decode
            .trials
            .unwrap_or_else(|| default_trials(cfg.alpha(), cfg.decode.failure_prob)),
        list_cap: cfg.decode.list_cap,
        merge_radius: cfg.decode.merge_radius.unwrap_or_else(|| default_merge_radius(k)),
        seed: derive_seed(seed, "decode", 0),
        floor: crate::moment::DEFAULT_CONDITIONING_FLOOR,
        max_primal_residual: cfg.decode.max_primal_residual,
        // runs are already spread over the pool
        execution: crate::par::Execution::Sequential,
    }
}

/// One seeded run of the pipeline. Failures are recorded, not returned.
pub fn run_once(cfg: &ExperimentConfig, seed: u64) -> RunRecord {
    let start = Instant::now();
    let mut rec = RunRecord::new(seed);
    run_stages(cfg, seed, &mut rec);
    rec.wall_clock = start.elapsed().as_secs_f64();
    rec
}

fn run_stages(cfg: &ExperimentConfig, seed: u64, rec: &mut RunRecord) {
    let data = match generate_dataset(cfg, seed) {
        Ok(d) => d,
        Err(e) => return rec.fail(Stage::Generate, e),
    };
    let rcfg = match recovery_config(cfg, &data) {
        Ok(c) => c,
        Err(e) => return rec.fail(Stage::Compile, e),
    };
    rec.eps_cost = Some(rcfg.eps_cost);
    let rel = match compile(&data, &rcfg) {
        Ok(r) => r,
        Err(e) => return rec.fail(Stage::Compile, e),
    };
    let solution = match frobenius_minimize(
        &rel.problem,
        &rel.selector_entries(),
        &cfg.relaxation.solver.settings(),
    ) {
        Ok(s) => s,
        Err(e) => return rec.fail(Stage::Solve, e),
    };
    rec.solver = Some(SolverStats {
        status: solution.status,
        iterations: solution.iterations,
        objective: solution.objective,
        primal_residual: solution.primal_residual,
        dual_residual: solution.dual_residual,
        gap: solution.gap,
    });
    let settings = decode_settings(cfg, seed);
    let pe = match decoder::accept_solution(&rel, &solution, settings.max_primal_residual) {
        Ok(pe) => pe,
        Err(e) => return rec.fail(Stage::Solve, e),
    };
    let list = match decoder::decode_pe(&pe, rcfg.k, &settings) {
        Ok(l) => l,
        Err(e) => return rec.fail(Stage::Decode, e),
    };
    rec.list_length = list.len();
    if let Err(e) = evaluate(&data, &pe, &list, cfg.threshold(), rec) {
        rec.fail(Stage::Evaluate, e);
    }
    rec.list = Some(list);
}

fn evaluate(
    data: &Dataset,
    pe: &crate::moment::Pseudoexpectation,
    list: &DecodedList,
    threshold: f64,
    rec: &mut RunRecord,
) -> Result<(), Box<dyn std::error::Error>> {
    rec.min_eigenvalue = Some(pe.min_eigenvalue()?);
    let Some(truth) = &data.truth else {
        return Ok(());
    };
    let err = list.min_error(&truth.plant)?;
    rec.min_error = Some(err);
    rec.success = err <= threshold;
    rec.decoy_min_errors = truth
        .decoys
        .iter()
        .map(|p| list.min_error(p))
        .collect::<Result<_, _>>()?;
    rec.correlation = Some(correlation(pe, &truth.inlier_mask)?);
    Ok(())
}

/// Runs every seed of `cfg`; results are in seed order regardless of
/// scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult, ExperimentError> {
    cfg.validate()?;
    let seeds = cfg.seeds();
    let runs = map_indexed(seeds.len(), cfg.execution, |r| run_once(cfg, seeds[r]));
    Ok(ExperimentResult {
        schema: RESULTS_SCHEMA.to_string(),
        config: cfg.clone(),
        aggregate: aggregate(&runs, cfg.threshold()),
        seeds,
        runs,
    })
}

impl ExperimentResult {
    pub fn to_json(&self) -> Result<String, ExperimentError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, ExperimentError> {
        let r: Self = serde_json::from_str(s)?;
        if r.schema != RESULTS_SCHEMA {
            return Err(ExperimentError::Config(format!("unsupported results schema {:?}", r.schema)));
        }
        Ok(r)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let c = &self.config;
        s.push_str(&format!(
            "data {:?} d={} k={} n={} alpha={} sigma={} adversary={}\n",
            c.data.kind, c.data.d, c.data.k, c.data.n, c.data.alpha, c.data.noise_sigma, c.data.adversary
        ));
        s.push_str(&format!(
            "{:>20}  {:>8}  {:>4}  {:>10}  {:>7}  {:>6}  {:>9}  {:>8}  {:>8}\n",
            "seed", "status", "list", "min_err", "success", "iters", "primal", "corr", "secs"
        ));
        for r in &self.runs {
            let status = match r.failed_stage {
                Some(st) => format!("{st:?}").to_lowercase(),
                None => "ok".to_string(),
            };
            let opt = |v: Option<f64>, w: usize| match v {
                Some(x) => format!("{x:>w$.3e}"),
                None => format!("{:>w$}", "-"),
            };
            s.push_str(&format!(
                "{:>20}  {:>8}  {:>4}  {}  {:>7}  {:>6}  {}  {}  {:>8.2}\n",
                r.seed,
                status,
                r.list_length,
                opt(r.min_error, 10),
                if r.success { "yes" } else { "no" },
                r.solver.as_ref().map_or(0, |x| x.iterations),
                opt(r.solver.as_ref().map(|x| x.primal_residual), 9),
                opt(r.correlation, 8),
                r.wall_clock
            ));
        }
        let a = &self.aggregate;
        s.push_str(&format!(
            "success rate {}/{} = {:.3} at threshold {}\n",
            a.successes, a.runs, a.success_rate, a.threshold
        ));
        match a.median_error {
            Some(m) => s.push_str(&format!("median min error {m:.3e}\n")),
            None => s.push_str("median min error -\n"),
        }
        if a.failures > 0 {
            s.push_str(&format!("{} run(s) failed\n", a.failures));
        }
        s
    }

    /// Writes `results.json` and `summary.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), ExperimentError> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(RESULTS_FILE), self.to_json()?)?;
        std::fs::write(dir.join(SUMMARY_FILE), self.summary())?;
        Ok(())
    }
}
