//! `sossr`: generate instances, compile and solve relaxations, decode lists
//! and run seeded experiments.
//!
//! Exit codes: 0 success, 2 bad config or input, 3 solver failure, 4 I/O.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sossr_core::datagen::{self, Adversary, DataError};
use sossr_core::decoder::{self, DecodeError, DecodeSettings, DecodedList};
use sossr_core::experiment::{self, DataKind, ExperimentConfig, ExperimentError, Stage};
use sossr_core::program::{compile, CompiledRelaxation, ProgramError, RecoveryConfig};
use sossr_core::sdp::{frobenius_minimize, ConicSolution, SdpError, SolveStatus, SolverSettings};

#[derive(Debug)]
enum CliError {
    Config(String),
    Solver(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Solver(m) => write!(f, "solver failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Io(e) => CliError::Io(e.to_string()),
            DataError::Csv(e) if e.is_io_error() => CliError::Io(e.to_string()),
            e => CliError::Config(e.to_string()),
        }
    }
}

impl From<ProgramError> for CliError {
    fn from(e: ProgramError) -> Self {
        match e {
            ProgramError::Io(e) => CliError::Io(e.to_string()),
            e => CliError::Config(e.to_string()),
        }
    }
}

impl From<SdpError> for CliError {
    fn from(e: SdpError) -> Self {
        match e {
            SdpError::Io(e) => CliError::Io(e.to_string()),
            SdpError::Json(e) => CliError::Config(e.to_string()),
            SdpError::InvalidProblem(e) => CliError::Config(e),
            e => CliError::Solver(e.to_string()),
        }
    }
}

impl From<DecodeError> for CliError {
    fn from(e: DecodeError) -> Self {
        match e {
            DecodeError::SolverFailed { .. } | DecodeError::Sdp(_) => CliError::Solver(e.to_string()),
            DecodeError::Moment(_) => CliError::Solver(e.to_string()),
            DecodeError::Io(e) => CliError::Io(e.to_string()),
            e => CliError::Config(e.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Io(e) => CliError::Io(e.to_string()),
            e => CliError::Config(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "sossr", version, about = "List-decodable subspace recovery with moment relaxations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a dataset and write it as CSV plus a JSON sidecar.
    Generate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, env = "SOSSR_SEED", default_value_t = 0)]
        seed: u64,
        /// CSV path; the sidecar goes next to it.
        #[arg(long, env = "SOSSR_OUT")]
        out: PathBuf,
    },
    /// Compile a dataset into its moment relaxation.
    Compile {
        #[arg(long)]
        data: PathBuf,
        /// Subspace dimension (defaults to the sidecar's).
        #[arg(long, env = "SOSSR_K")]
        k: Option<usize>,
        /// Inlier fraction (defaults to the sidecar's).
        #[arg(long, env = "SOSSR_ALPHA")]
        alpha: Option<f64>,
        #[command(flatten)]
        relax: RelaxArgs,
        #[arg(long, env = "SOSSR_OUT")]
        out: PathBuf,
    },
    /// Minimise Σ pE[w_i]² over a compiled relaxation.
    Solve {
        #[arg(long)]
        problem: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, env = "SOSSR_OUT")]
        out: PathBuf,
    },
    /// Round a solved relaxation into a list of projections.
    Decode {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        solution: PathBuf,
        #[command(flatten)]
        decode: DecodeArgs,
        #[arg(long, env = "SOSSR_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, env = "SOSSR_OUT")]
        out: PathBuf,
    },
    /// Score a decoded list against the dataset's planted subspace.
    Evaluate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        list: PathBuf,
        /// Success threshold; defaults to 0.1 k.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Anticoncentration, correlation and slack diagnostics.
    Diag {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        solution: PathBuf,
        #[arg(long, env = "SOSSR_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
    /// Size of the greedy constant-weight code and its counting bounds.
    GvCount {
        #[arg(long)]
        length: usize,
        #[arg(long)]
        weight: usize,
        #[arg(long)]
        min_distance: usize,
    },
    /// Run an experiment config end to end.
    Run {
        /// JSON config; every field has a default.
        #[arg(long, env = "SOSSR_CONFIG")]
        config: Option<PathBuf>,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        relax: RelaxArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        decode: DecodeArgs,
        #[arg(long, env = "SOSSR_SEED")]
        seed: Option<u64>,
        #[arg(long, env = "SOSSR_RUNS")]
        runs: Option<usize>,
        /// Output directory for results.json and summary.txt.
        #[arg(long, env = "SOSSR_OUT")]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Clone, Default)]
struct DataArgs {
    /// gaussian or hypercube (run also accepts file with --data-path).
    #[arg(long, env = "SOSSR_KIND")]
    kind: Option<String>,
    #[arg(long, env = "SOSSR_D")]
    d: Option<usize>,
    #[arg(long, env = "SOSSR_K")]
    k: Option<usize>,
    #[arg(long, env = "SOSSR_N")]
    n: Option<usize>,
    #[arg(long, env = "SOSSR_ALPHA")]
    alpha: Option<f64>,
    #[arg(long, env = "SOSSR_NOISE_SIGMA")]
    noise_sigma: Option<f64>,
    #[arg(long, env = "SOSSR_ADVERSARY")]
    adversary: Option<String>,
    #[arg(long, env = "SOSSR_POINTS_PER_CORNER")]
    points_per_corner: Option<usize>,
    #[arg(long, env = "SOSSR_ENTROPY_EPS")]
    entropy_eps: Option<f64>,
    #[arg(long, env = "SOSSR_DATA_PATH")]
    data_path: Option<PathBuf>,
}

#[derive(Args, Clone, Default)]
struct RelaxArgs {
    /// Relaxation k (defaults to the dataset's).
    #[arg(long = "relax-k", env = "SOSSR_RELAX_K")]
    relax_k: Option<usize>,
    /// Relaxation alpha (defaults to the dataset's).
    #[arg(long = "relax-alpha", env = "SOSSR_RELAX_ALPHA")]
    relax_alpha: Option<f64>,
    #[arg(long, env = "SOSSR_DEGREE")]
    degree: Option<usize>,
    #[arg(long, env = "SOSSR_EPS_COST")]
    eps_cost: Option<f64>,
    #[arg(long)]
    no_localizers: bool,
}

#[derive(Args, Clone, Default)]
struct SolverArgs {
    #[arg(long, env = "SOSSR_TOL")]
    tol: Option<f64>,
    #[arg(long, env = "SOSSR_MAX_ITER")]
    max_iter: Option<usize>,
    /// Print solver progress every this many iterations.
    #[arg(long, env = "SOSSR_LOG_EVERY")]
    log_every: Option<usize>,
}

#[derive(Args, Clone, Default)]
struct DecodeArgs {
    #[arg(long, env = "SOSSR_TRIALS")]
    trials: Option<usize>,
    #[arg(long, env = "SOSSR_LIST_CAP")]
    list_cap: Option<usize>,
    #[arg(long, env = "SOSSR_MERGE_RADIUS")]
    merge_radius: Option<f64>,
}

fn parse_adversary(s: &str) -> Result<Adversary, CliError> {
    s.parse().map_err(|e: DataError| CliError::Config(e.to_string()))
}

fn parse_kind(s: &str) -> Result<DataKind, CliError> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| CliError::Config(format!("unknown data kind {s:?}")))
}

impl DataArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) -> Result<(), CliError> {
        let d = &mut cfg.data;
        if let Some(k) = &self.kind {
            d.kind = parse_kind(k)?;
        }
        if let Some(a) = &self.adversary {
            d.adversary = parse_adversary(a)?;
        }
        d.d = self.d.unwrap_or(d.d);
        d.k = self.k.unwrap_or(d.k);
        d.n = self.n.unwrap_or(d.n);
        d.alpha = self.alpha.unwrap_or(d.alpha);
        d.noise_sigma = self.noise_sigma.unwrap_or(d.noise_sigma);
        d.points_per_corner = self.points_per_corner.unwrap_or(d.points_per_corner);
        d.entropy_eps = self.entropy_eps.unwrap_or(d.entropy_eps);
        if self.data_path.is_some() {
            d.path = self.data_path.clone();
            if self.kind.is_none() {
                d.kind = DataKind::File;
            }
        }
        Ok(())
    }
}

impl RelaxArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        let r = &mut cfg.relaxation;
        r.k = self.relax_k.or(r.k);
        r.alpha = self.relax_alpha.or(r.alpha);
        r.eps_cost = self.eps_cost.or(r.eps_cost);
        r.degree = self.degree.unwrap_or(r.degree);
        if self.no_localizers {
            r.include_localizers = false;
        }
    }
}

impl SolverArgs {
    fn apply(&self, s: &mut SolverSettings) {
        s.tol = self.tol.unwrap_or(s.tol);
        s.max_iter = self.max_iter.unwrap_or(s.max_iter);
        s.log_every = self.log_every.unwrap_or(s.log_every);
    }
}

impl DecodeArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        let d = &mut cfg.decode;
        d.trials = self.trials.or(d.trials);
        d.list_cap = self.list_cap.unwrap_or(d.list_cap);
        d.merge_radius = self.merge_radius.or(d.merge_radius);
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}

fn load_dataset(path: &Path) -> Result<datagen::Dataset, CliError> {
    Ok(datagen::io::load(path)?)
}

fn generate(data: &DataArgs, seed: u64, out: &Path) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::default();
    data.apply(&mut cfg)?;
    if cfg.data.kind == DataKind::File {
        return Err(CliError::Config("generate needs kind gaussian or hypercube".into()));
    }
    let ds = experiment::generate_dataset(&cfg, seed)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    datagen::io::save(&ds, out)?;
    println!("wrote {} points in R^{} to {}", ds.len(), ds.dim(), out.display());
    Ok(())
}

fn compile_cmd(
    data: &Path,
    k: Option<usize>,
    alpha: Option<f64>,
    relax: &RelaxArgs,
    out: &Path,
) -> Result<(), CliError> {
    let ds = load_dataset(data)?;
    let truth = ds.truth.as_ref();
    let k = k.or(relax.relax_k).or(truth.map(|t| t.k)).ok_or_else(|| {
        CliError::Config("--k is required when the dataset has no sidecar".into())
    })?;
    let alpha = alpha.or(relax.relax_alpha).or(truth.map(|t| t.alpha)).ok_or_else(|| {
        CliError::Config("--alpha is required when the dataset has no sidecar".into())
    })?;
    let eps = relax
        .eps_cost
        .or_else(|| RecoveryConfig::default_budget(&ds))
        .ok_or_else(|| CliError::Config("--eps-cost is required when the dataset has no sidecar".into()))?;
    let mut rcfg = RecoveryConfig::new(k, alpha, eps);
    rcfg.degree = relax.degree.unwrap_or(rcfg.degree);
    rcfg.include_localizers = !relax.no_localizers;
    let rel = compile(&ds, &rcfg)?;
    write_file(out, &rel.to_json()?)?;
    println!(
        "compiled {} blocks, {} equalities, {} inequalities to {}",
        rel.problem.blocks.len(),
        rel.problem.equalities.len(),
        rel.problem.inequalities.len(),
        out.display()
    );
    Ok(())
}

fn solve_cmd(problem: &Path, solver: &SolverArgs, out: &Path) -> Result<(), CliError> {
    let rel = CompiledRelaxation::load(problem)?;
    let mut settings = ExperimentConfig::default().relaxation.solver.settings();
    solver.apply(&mut settings);
    let sol = frobenius_minimize(&rel.problem, &rel.selector_entries(), &settings)?;
    write_file(out, &sol.to_json()?)?;
    println!(
        "status {:?} after {} iterations, objective {:.6}, primal {:.2e}, dual {:.2e}",
        sol.status, sol.iterations, sol.objective, sol.primal_residual, sol.dual_residual
    );
    if sol.status == SolveStatus::Infeasible {
        return Err(CliError::Solver("relaxation is infeasible".into()));
    }
    Ok(())
}

fn decode_cmd(problem: &Path, solution: &Path, args: &DecodeArgs, seed: u64, out: &Path) -> Result<(), CliError> {
    let rel = CompiledRelaxation::load(problem)?;
    let sol = ConicSolution::load(solution)?;
    let mut settings = DecodeSettings::new(rel.config.k, rel.config.alpha, seed);
    settings.trials = args.trials.unwrap_or(settings.trials);
    settings.list_cap = args.list_cap.unwrap_or(settings.list_cap);
    settings.merge_radius = args.merge_radius.unwrap_or(settings.merge_radius);
    settings.validate()?;
    let pe = decoder::accept_solution(&rel, &sol, settings.max_primal_residual)?;
    let list = decoder::decode_pe(&pe, rel.config.k, &settings)?;
    write_file(out, &list.to_json()?)?;
    println!("{} candidate(s) from {} trials to {}", list.len(), list.trials, out.display());
    Ok(())
}

fn evaluate_cmd(data: &Path, list: &Path, threshold: Option<f64>) -> Result<(), CliError> {
    let ds = load_dataset(data)?;
    let list = DecodedList::load(list)?;
    let truth = ds
        .truth
        .as_ref()
        .ok_or_else(|| CliError::Config("dataset has no ground truth sidecar".into()))?;
    let tau = threshold.unwrap_or(0.1 * truth.k as f64);
    let err = list.min_error(&truth.plant)?;
    println!("list length {}", list.len());
    println!("min error {err:.6e}");
    for (j, p) in truth.decoys.iter().enumerate() {
        println!("decoy {j} min error {:.6e}", list.min_error(p)?);
    }
    println!("success {} at threshold {tau}", err <= tau);
    Ok(())
}

fn diag_cmd(data: &Path, problem: &Path, solution: &Path, seed: u64, json: bool) -> Result<(), CliError> {
    let ds = load_dataset(data)?;
    let rel = CompiledRelaxation::load(problem)?;
    let sol = ConicSolution::load(solution)?;
    let tol = decoder::solution_tolerance(&rel, &sol);
    let pe = rel.pseudoexpectation(&sol, tol)?;
    let report = experiment::diagnose(&ds, &pe, Some(&rel), seed)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print!("{}", report.to_text());
    }
    Ok(())
}

fn gv_count(length: usize, weight: usize, min_distance: usize) -> Result<(), CliError> {
    if weight > length {
        return Err(CliError::Config(format!("weight {weight} exceeds length {length}")));
    }
    if length > 128 {
        return Err(CliError::Config("length above 128 is not supported".into()));
    }
    let count = datagen::gv_count(length, weight, min_distance);
    println!("greedy code size {count}");
    println!(
        "sphere-covering bound {:.3}",
        datagen::sphere_covering_bound(length, weight, min_distance)
    );
    Ok(())
}

fn run_cmd(
    config: Option<&Path>,
    data: &DataArgs,
    relax: &RelaxArgs,
    solver: &SolverArgs,
    decode: &DecodeArgs,
    seed: Option<u64>,
    runs: Option<usize>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let mut cfg = match config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    data.apply(&mut cfg)?;
    relax.apply(&mut cfg);
    let mut s = cfg.relaxation.solver.settings();
    solver.apply(&mut s);
    cfg.relaxation.solver.tol = s.tol;
    cfg.relaxation.solver.max_iter = s.max_iter;
    cfg.relaxation.solver.log_every = s.log_every;
    decode.apply(&mut cfg);
    cfg.seed = seed.unwrap_or(cfg.seed);
    cfg.runs = runs.unwrap_or(cfg.runs);
    if let Some(o) = out {
        cfg.output.dir = o.to_path_buf();
    }
    cfg.validate()?;

    let result = experiment::run_experiment(&cfg)?;
    result.write(&cfg.output.dir)?;
    print!("{}", result.summary());
    let solver_failed = result.runs.iter().any(|r| r.failed_stage == Some(Stage::Solve));
    if solver_failed {
        return Err(CliError::Solver("at least one run failed in the solve stage".into()));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Generate { data, seed, out } => generate(data, *seed, out),
        Command::Compile {
            data,
            k,
            alpha,
            relax,
            out,
        } => compile_cmd(data, *k, *alpha, relax, out),
        Command::Solve { problem, solver, out } => solve_cmd(problem, solver, out),
        Command::Decode {
            problem,
            solution,
            decode,
            seed,
            out,
        } => decode_cmd(problem, solution, decode, *seed, out),
        Command::Evaluate { data, list, threshold } => evaluate_cmd(data, list, *threshold),
        Command::Diag {
            data,
            problem,
            solution,
            seed,
            json,
        } => diag_cmd(data, problem, solution, *seed, *json),
        Command::GvCount {
            length,
            weight,
            min_distance,
        } => gv_count(*length, *weight, *min_distance),
        Command::Run {
            config,
            data,
            relax,
            solver,
            decode,
            seed,
            runs,
            out,
        } => run_cmd(
            config.as_deref(),
            data,
            relax,
            solver,
            decode,
            *seed,
            *runs,
            out.as_deref(),
        ),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sossr: {e}");
            ExitCode::from(e.code())
        }
    }
}
