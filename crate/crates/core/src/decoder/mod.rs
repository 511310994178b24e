//! Rounding a pseudoexpectation into a short list of subspaces: sample a
//! sample index by its selector mass, read off the conditional projection
//! moments, snap them to the nearest rank-`k` projection and deduplicate.

mod spectral;

use std::path::Path;

use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::moment::{MomentError, Pseudoexpectation, DEFAULT_CONDITIONING_FLOOR, DEFAULT_PSD_TOLERANCE};
use crate::par::{map_indexed, Execution};
use crate::program::{CompiledRelaxation, ProgramError};
use crate::rng::{substream, Rng};
use crate::sdp::{frobenius_minimize, ConicSolution, SdpError, SolveStatus, SolverSettings};

pub use spectral::{eigenspace_round, sorted_eigen};

#[derive(Debug, thiserror::Error)]
pub enum DecodeError {
    #[error("solver failed: status {status:?}, primal residual {primal_residual:.3e}")]
    SolverFailed { status: SolveStatus, primal_residual: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid decode settings: {0}")]
    ConfigInvalid(String),
    #[error(transparent)]
    Moment(#[from] MomentError),
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error(transparent)]
    Program(#[from] ProgramError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SubspaceCandidate {
    /// `pE[w_i Π] / pE[w_i]`.
    #[serde(with = "crate::matrix_serde")]
    pub raw: DMatrix<f64>,
    /// Projection onto the top `k` eigenvectors of `raw`.
    #[serde(with = "crate::matrix_serde")]
    pub rounded: DMatrix<f64>,
    pub source_index: usize,
    /// `pE[w_i]`.
    pub weight: f64,
}

/// Default failure probability for amplifying the one-shot rounding.
pub const DEFAULT_FAILURE_PROB: f64 = 0.05;
pub const DEFAULT_LIST_CAP: usize = 4;
/// Solutions stopped at the iteration cap are still rounded when their
/// primal residual is below this.
pub const DEFAULT_MAX_PRIMAL_RESIDUAL: f64 = 1e-4;

/// `⌈(4/α) ln(1/δ)⌉` independent roundings.
pub fn default_trials(alpha: f64, failure_prob: f64) -> usize {
    ((4.0 / alpha) * (1.0 / failure_prob).ln()).ceil().max(1.0) as usize
}

pub fn default_merge_radius(k: usize) -> f64 {
    (k as f64).sqrt() / 2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DecodeSettings {
    pub trials: usize,
    pub list_cap: usize,
    /// Frobenius (not squared) distance under which candidates are merged.
    pub merge_radius: f64,
    pub seed: u64,
    #[serde(default = "default_floor")]
    pub floor: f64,
    #[serde(default = "default_max_primal")]
    pub max_primal_residual: f64,
    #[serde(default)]
    pub execution: Execution,
}

fn default_floor() -> f64 {
    DEFAULT_CONDITIONING_FLOOR
}

fn default_max_primal() -> f64 {
    DEFAULT_MAX_PRIMAL_RESIDUAL
}

impl DecodeSettings {
    pub fn new(k: usize, alpha: f64, seed: u64) -> Self {
        Self {
            trials: default_trials(alpha, DEFAULT_FAILURE_PROB),
            list_cap: DEFAULT_LIST_CAP,
            merge_radius: default_merge_radius(k),
            seed,
            floor: DEFAULT_CONDITIONING_FLOOR,
            max_primal_residual: DEFAULT_MAX_PRIMAL_RESIDUAL,
            execution: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<(), DecodeError> {
        let bad = |m: String| Err(DecodeError::ConfigInvalid(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.list_cap == 0 {
            return bad("listCap must be at least 1".into());
        }
        if !(self.merge_radius >= 0.0 && self.merge_radius.is_finite()) {
            return bad(format!("mergeRadius = {} must be finite and nonnegative", self.merge_radius));
        }
        if !(self.floor > 0.0) {
            return bad(format!("conditioning floor = {} must be positive", self.floor));
        }
        Ok(())
    }
}

/// Which retained cluster a trial landed in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MergeDecision {
    pub trial: usize,
    pub source_index: usize,
    /// Cluster id in order of first appearance.
    pub cluster: usize,
    /// Squared distance to the cluster representative; `None` if this
    /// trial opened the cluster.
    pub distance_sq: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DecodedList {
    /// Cluster representatives, heaviest cluster first.
    pub candidates: Vec<SubspaceCandidate>,
    /// Accumulated `pE[w_i]` of the trials merged into each candidate.
    pub cluster_weights: Vec<f64>,
    /// Cluster id (see [`MergeDecision::cluster`]) of each candidate.
    pub cluster_ids: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub merges: Vec<MergeDecision>,
    /// Clusters dropped by the list cap.
    pub truncated: usize,
}

impl DecodedList {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    /// `min_j ‖P - Π̂_j‖²_F`.
    pub fn min_error(&self, plant: &DMatrix<f64>) -> Result<f64, DecodeError> {
        let mut best = f64::INFINITY;
        for c in &self.candidates {
            best = best.min(frobenius_distance_sq(plant, &c.rounded)?);
        }
        Ok(best)
    }

    pub fn to_json(&self) -> Result<String, DecodeError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, DecodeError> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), DecodeError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, DecodeError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

pub fn frobenius_distance_sq(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64, DecodeError> {
    if a.shape() != b.shape() {
        return Err(DecodeError::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// One rounding: draw `i` with probability `pE[w_i] / Σ_j pE[w_j]` and
/// return the conditional projection moments.
///
/// Indices whose mass is below `floor` are redrawn, at most `10 N` times.
pub fn round_once(
    pe: &Pseudoexpectation,
    k: usize,
    rng: &mut Rng,
    floor: f64,
) -> Result<SubspaceCandidate, DecodeError> {
    let means = pe.selector_means()?;
    let n = means.len();
    let weights: Vec<f64> = means.iter().map(|&m| m.max(0.0)).collect();
    let total: f64 = weights.iter().sum();
    let dist = WeightedIndex::new(&weights).map_err(|_| MomentError::DegenerateConditioning {
        index: 0,
        mass: total,
        floor,
    })?;
    let mut last = 0;
    for _ in 0..10 * n {
        let i = dist.sample(rng);
        last = i;
        let w = means[i];
        if w > floor {
            let raw = pe.localized_params(i)? / w;
            let rounded = eigenspace_round(&raw, k);
            return Ok(SubspaceCandidate {
                raw,
                rounded,
                source_index: i,
                weight: w,
            });
        }
    }
    Err(MomentError::DegenerateConditioning {
        index: last,
        mass: means[last],
        floor,
    }
    .into())
}

/// Runs `settings.trials` roundings of `pe` and assembles the list.
pub fn decode_pe(pe: &Pseudoexpectation, k: usize, settings: &DecodeSettings) -> Result<DecodedList, DecodeError> {
    settings.validate()?;
    if k == 0 || k > pe.basis().dim() {
        return Err(DecodeError::ConfigInvalid(format!(
            "k = {k} outside 1..={}",
            pe.basis().dim()
        )));
    }
    let drawn = map_indexed(settings.trials, settings.execution, |t| {
        let mut rng = substream(settings.seed, "decoder/trial", t as u64);
        round_once(pe, k, &mut rng, settings.floor)
    });
    let drawn = drawn.into_iter().collect::<Result<Vec<_>, _>>()?;
    merge(drawn, settings)
}

struct Cluster {
    representative: SubspaceCandidate,
    weight: f64,
}

fn merge(drawn: Vec<SubspaceCandidate>, settings: &DecodeSettings) -> Result<DecodedList, DecodeError> {
    let trials = drawn.len();
    let radius_sq = settings.merge_radius * settings.merge_radius;
    let mut clusters: Vec<Cluster> = Vec::new();
    let mut merges = Vec::with_capacity(trials);
    for (trial, cand) in drawn.into_iter().enumerate() {
        let mut hit = None;
        for (id, c) in clusters.iter().enumerate() {
            let dist = frobenius_distance_sq(&c.representative.rounded, &cand.rounded)?;
            if dist < radius_sq {
                hit = Some((id, dist));
                break;
            }
        }
        let source_index = cand.source_index;
        match hit {
            Some((id, dist)) => {
                clusters[id].weight += cand.weight;
                merges.push(MergeDecision {
                    trial,
                    source_index,
                    cluster: id,
                    distance_sq: Some(dist),
                });
            }
            None => {
                merges.push(MergeDecision {
                    trial,
                    source_index,
                    cluster: clusters.len(),
                    distance_sq: None,
                });
                clusters.push(Cluster {
                    weight: cand.weight,
                    representative: cand,
                });
            }
        }
    }
    let mut order: Vec<usize> = (0..clusters.len()).collect();
    order.sort_by(|&a, &b| clusters[b].weight.total_cmp(&clusters[a].weight).then(a.cmp(&b)));
    let truncated = order.len().saturating_sub(settings.list_cap);
    order.truncate(settings.list_cap);

    let mut slots: Vec<Option<Cluster>> = clusters.into_iter().map(Some).collect();
    let mut list = DecodedList {
        candidates: Vec::with_capacity(order.len()),
        cluster_weights: Vec::with_capacity(order.len()),
        cluster_ids: order.clone(),
        trials,
        seed: settings.seed,
        merges,
        truncated,
    };
    for id in order {
        let c = slots[id].take().expect("cluster ids are distinct");
        list.cluster_weights.push(c.weight);
        list.candidates.push(c.representative);
    }
    Ok(list)
}

/// A relaxation solved, validated and rounded.
#[derive(Debug, Clone)]
pub struct Decoding {
    pub list: DecodedList,
    pub solution: ConicSolution,
    pub pe: Pseudoexpectation,
}

/// Moment-validation tolerance for a solution with the given relative
/// primal residual: the absolute residual, with a factor 10 of headroom.
pub fn solution_tolerance(relaxation: &CompiledRelaxation, solution: &ConicSolution) -> f64 {
    let b_norm = relaxation
        .problem
        .equalities
        .iter()
        .chain(&relaxation.problem.inequalities)
        .map(|c| c.rhs * c.rhs)
        .sum::<f64>()
        .sqrt();
    DEFAULT_PSD_TOLERANCE.max(10.0 * solution.primal_residual * (1.0 + b_norm))
}

/// Checks the solver status and turns the moment block into a
/// pseudoexpectation.
pub fn accept_solution(
    relaxation: &CompiledRelaxation,
    solution: &ConicSolution,
    max_primal_residual: f64,
) -> Result<Pseudoexpectation, DecodeError> {
    let usable = match solution.status {
        SolveStatus::Optimal => true,
        SolveStatus::MaxIter => solution.primal_residual <= max_primal_residual,
        SolveStatus::Infeasible => false,
    };
    if !usable {
        return Err(DecodeError::SolverFailed {
            status: solution.status,
            primal_residual: solution.primal_residual,
        });
    }
    Ok(relaxation.pseudoexpectation(solution, solution_tolerance(relaxation, solution))?)
}

/// Minimises `Σ pE[w_i]²` over the relaxation and rounds the minimiser.
pub fn decode(
    relaxation: &CompiledRelaxation,
    settings: &DecodeSettings,
    solver: &SolverSettings,
) -> Result<Decoding, DecodeError> {
    settings.validate()?;
    let solution = frobenius_minimize(&relaxation.problem, &relaxation.selector_entries(), solver)?;
    let pe = accept_solution(relaxation, &solution, settings.max_primal_residual)?;
    let list = decode_pe(&pe, relaxation.config.k, settings)?;
    Ok(Decoding { list, solution, pe })
}
