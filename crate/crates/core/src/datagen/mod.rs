//! Synthetic instances: Gaussian inliers on a planted subspace with several
//! outlier strategies, and the boolean hypercube construction on which no
//! short list can succeed.

mod code;
mod gaussian;
mod hypercube;
pub mod io;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use code::{binary_entropy, codeword_bound, greedy_constant_weight_code, gv_count, sphere_covering_bound};
pub use gaussian::{generate_gaussian, GaussianParams};
pub use hypercube::{generate_hypercube, HypercubeInstance, HypercubeParams};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("dataset file {path}: {message}")]
    Format { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Adversary {
    /// Outliers Gaussian on subspaces orthogonal to the plant.
    OrthogonalMixture,
    /// Outliers drawn from `N(0, I_d)`.
    FullSpaceGaussian,
    /// Every outlier is the same far point.
    PointCluster,
    /// A clean sample is drawn and the points furthest from the plant are
    /// reflected onto a random rogue subspace.
    TvCorruption,
}

impl Adversary {
    pub const ALL: [Adversary; 4] = [
        Adversary::OrthogonalMixture,
        Adversary::FullSpaceGaussian,
        Adversary::PointCluster,
        Adversary::TvCorruption,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Adversary::OrthogonalMixture => "orthogonalMixture",
            Adversary::FullSpaceGaussian => "fullSpaceGaussian",
            Adversary::PointCluster => "pointCluster",
            Adversary::TvCorruption => "tvCorruption",
        }
    }
}

impl std::str::FromStr for Adversary {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Adversary::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| DataError::ConfigInvalid(format!("unknown adversary {s:?}")))
    }
}

impl std::fmt::Display for Adversary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// What is known about how a dataset was planted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// The inlier set `S`.
    pub inlier_mask: Vec<bool>,
    /// Rank-`k` projection onto the planted subspace.
    #[serde(with = "crate::matrix_serde")]
    pub plant: DMatrix<f64>,
    pub k: usize,
    /// `|S| / N`.
    pub alpha: f64,
    /// `Σ_{i∈S} ‖γ_i‖²`.
    pub noise_energy: f64,
    /// Other planted structures that a list is allowed (or expected) to
    /// report: the orthogonal outlier subspaces or the rogue subspace.
    #[serde(with = "crate::matrix_serde::vec", default)]
    pub decoys: Vec<DMatrix<f64>>,
    /// Per-point additive noise (rows); zero outside `S`. Not persisted.
    #[serde(skip)]
    pub noise: Option<DMatrix<f64>>,
}

impl GroundTruth {
    pub fn num_inliers(&self) -> usize {
        self.inlier_mask.iter().filter(|&&b| b).count()
    }

    /// Mean inlier noise energy, the default per-point cost budget before slack.
    pub fn noise_per_inlier(&self) -> f64 {
        let s = self.num_inliers();
        if s == 0 {
            0.0
        } else {
            self.noise_energy / s as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum Origin {
    #[serde(rename_all = "camelCase")]
    Gaussian {
        seed: u64,
        adversary: Adversary,
        noise_sigma: f64,
    },
    #[serde(rename_all = "camelCase")]
    Hypercube {
        seed: u64,
        points_per_corner: usize,
        entropy_eps: f64,
        codewords: Vec<Vec<u8>>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `N × d`, one point per row.
    pub points: DMatrix<f64>,
    pub truth: Option<GroundTruth>,
    pub origin: Option<Origin>,
}

impl Dataset {
    pub fn from_points(points: DMatrix<f64>) -> Self {
        Self {
            points,
            truth: None,
            origin: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn point(&self, i: usize) -> nalgebra::DVector<f64> {
        self.points.row(i).transpose()
    }

    pub fn seed(&self) -> Option<u64> {
        match &self.origin {
            Some(Origin::Gaussian { seed, .. }) | Some(Origin::Hypercube { seed, .. }) => Some(*seed),
            None => None,
        }
    }
}

/// Rank-`k` projection onto the span of the first `k` columns of `q`.
pub(crate) fn projection(q: &DMatrix<f64>) -> DMatrix<f64> {
    q * q.transpose()
}
