use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::datagen::Adversary;
use crate::decoder::{DEFAULT_FAILURE_PROB, DEFAULT_LIST_CAP, DEFAULT_MAX_PRIMAL_RESIDUAL};
use crate::par::Execution;
use crate::sdp::SolverSettings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase")]
pub enum DataKind {
    #[default]
    Gaussian,
    Hypercube,
    /// Points read from `path` (CSV plus optional sidecar).
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct DataSection {
    pub kind: DataKind,
    pub d: usize,
    pub k: usize,
    pub n: usize,
    pub alpha: f64,
    pub noise_sigma: f64,
    pub adversary: Adversary,
    pub points_per_corner: usize,
    pub entropy_eps: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            kind: DataKind::Gaussian,
            d: 6,
            k: 2,
            n: 200,
            alpha: 1.0,
            noise_sigma: 0.0,
            adversary: Adversary::OrthogonalMixture,
            points_per_corner: 4,
            entropy_eps: 0.25,
            path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct SolverSection {
    pub tol: f64,
    pub max_iter: usize,
    pub rho: f64,
    pub relaxation: f64,
    pub adaptive_rho: bool,
    pub log_every: usize,
}

/// Iteration cap used by experiments; far below the solver's own default
/// so a desk-scale run stays within a minute.
pub const EXPERIMENT_MAX_ITER: usize = 2500;

impl Default for SolverSection {
    fn default() -> Self {
        let s = SolverSettings::default();
        Self {
            tol: s.tol,
            max_iter: EXPERIMENT_MAX_ITER,
            rho: s.rho,
            relaxation: s.relaxation,
            adaptive_rho: s.adaptive_rho,
            log_every: 0,
        }
    }
}

impl SolverSection {
    pub fn settings(&self) -> SolverSettings {
        SolverSettings {
            tol: self.tol,
            max_iter: self.max_iter,
            rho: self.rho,
            relaxation: self.relaxation,
            adaptive_rho: self.adaptive_rho,
            log_every: self.log_every,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct RelaxationSection {
    /// Defaults to the generator's `k`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// Defaults to the generator's `alpha`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Defaults to twice the measured noise energy per inlier.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_cost: Option<f64>,
    pub degree: usize,
    pub include_localizers: bool,
    pub solver: SolverSection,
}

impl Default for RelaxationSection {
    fn default() -> Self {
        Self {
            k: None,
            alpha: None,
            eps_cost: None,
            degree: 2,
            include_localizers: true,
            solver: SolverSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct DecodeSection {
    /// Defaults to `⌈(4/α) ln(1/failureProb)⌉`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    pub failure_prob: f64,
    pub list_cap: usize,
    /// Defaults to `√k / 2`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub merge_radius: Option<f64>,
    pub max_primal_residual: f64,
}

impl Default for DecodeSection {
    fn default() -> Self {
        Self {
            trials: None,
            failure_prob: DEFAULT_FAILURE_PROB,
            list_cap: DEFAULT_LIST_CAP,
            merge_radius: None,
            max_primal_residual: DEFAULT_MAX_PRIMAL_RESIDUAL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Success threshold on `min_j ‖P - Π̂_j‖²`; defaults to `0.1 k`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            threshold: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Root seed; run `r` uses seed `seed + r`.
    pub seed: u64,
    pub runs: usize,
    pub execution: Execution,
    pub data: DataSection,
    pub relaxation: RelaxationSection,
    pub decode: DecodeSection,
    pub output: OutputSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            runs: 1,
            execution: Execution::default(),
            data: DataSection::default(),
            relaxation: RelaxationSection::default(),
            decode: DecodeSection::default(),
            output: OutputSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self, ExperimentError> {
        let cfg: Self = serde_json::from_str(s).map_err(|e| ExperimentError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// Run seeds, in run order.
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.runs as u64).map(|r| self.seed.wrapping_add(r)).collect()
    }

    /// The relaxation's `k`.
    pub fn k(&self) -> usize {
        self.relaxation.k.unwrap_or(self.data.k)
    }

    /// The relaxation's `alpha`.
    pub fn alpha(&self) -> f64 {
        self.relaxation.alpha.unwrap_or(self.data.alpha)
    }

    pub fn threshold(&self) -> f64 {
        self.output.threshold.unwrap_or(0.1 * self.k() as f64)
    }

    /// Structural checks that need no data. Generator and relaxation
    /// parameters are checked again when they are used.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if self.data.kind == DataKind::File && self.data.path.is_none() {
            return bad("data.kind = file needs data.path".into());
        }
        let alpha = self.alpha();
        if !(alpha > 0.0 && alpha <= 1.0) {
            return bad(format!("alpha = {alpha} must lie in (0, 1]"));
        }
        if self.k() == 0 {
            return bad("k must be positive".into());
        }
        let s = &self.relaxation.solver;
        if !(s.tol > 0.0) || s.max_iter == 0 || !(s.rho > 0.0) || !(s.relaxation > 0.0 && s.relaxation < 2.0) {
            return bad("solver needs tol > 0, maxIter > 0, rho > 0 and relaxation in (0, 2)".into());
        }
        let d = &self.decode;
        if !(d.failure_prob > 0.0 && d.failure_prob < 1.0) {
            return bad(format!("failureProb = {} must lie in (0, 1)", d.failure_prob));
        }
        if d.trials == Some(0) || d.list_cap == 0 {
            return bad("trials and listCap must be at least 1".into());
        }
        if matches!(d.merge_radius, Some(r) if !(r >= 0.0 && r.is_finite())) {
            return bad("mergeRadius must be finite and nonnegative".into());
        }
        if matches!(self.output.threshold, Some(t) if !(t >= 0.0)) {
            return bad("threshold must be nonnegative".into());
        }
        Ok(())
    }
}
