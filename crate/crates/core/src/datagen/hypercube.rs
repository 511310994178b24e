use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::code::greedy_constant_weight_code;
use super::{DataError, Dataset, GroundTruth, Origin};
use crate::rng::substream;

const MAX_CUBE_DIM: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HypercubeParams {
    pub k: usize,
    pub alpha: f64,
    pub d: usize,
    pub points_per_corner: usize,
    pub entropy_eps: f64,
    pub seed: u64,
}

impl HypercubeParams {
    /// `k / α`, if integral.
    pub fn cube_dim(&self) -> Result<usize, DataError> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(DataError::ConfigInvalid(format!("alpha = {} must lie in (0, 1]", self.alpha)));
        }
        let l = self.k as f64 / self.alpha;
        let rounded = l.round();
        if (l - rounded).abs() > 1e-9 * l.max(1.0) {
            return Err(DataError::ConfigInvalid(format!("k / alpha = {l} is not an integer")));
        }
        Ok(rounded as usize)
    }

    /// Minimum Hamming distance `2⌈εk⌉` between codewords.
    pub fn min_distance(&self) -> usize {
        2 * ((self.entropy_eps * self.k as f64 - 1e-9).ceil().max(0.0) as usize)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypercubeInstance {
    pub dataset: Dataset,
    /// Weight-`k` words of length `k/α`; word `j` selects the coordinate
    /// subspace of candidate projection `j`. Word 0 is the plant.
    pub codewords: Vec<Vec<u8>>,
    pub entropy_eps: f64,
}

impl HypercubeInstance {
    /// Coordinate projection (padded to `d`) selected by codeword `j`.
    pub fn codeword_projection(&self, j: usize) -> DMatrix<f64> {
        coordinate_projection(&self.codewords[j], self.dataset.dim())
    }
}

fn coordinate_projection(word: &[u8], d: usize) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(d, d);
    for (i, &b) in word.iter().enumerate() {
        if b == 1 {
            p[(i, i)] = 1.0;
        }
    }
    p
}

/// Every corner of `{0,1}^{k/α}` with `pointsPerCorner` copies, padded
/// with zeros to `d` coordinates and shuffled.
///
/// The ground-truth plant is the subspace of the first codeword and `S`
/// the points lying inside it; `alpha` in the ground truth records the
/// realised fraction `2^{k - k/α}`.
pub fn generate_hypercube(params: &HypercubeParams) -> Result<HypercubeInstance, DataError> {
    let l = params.cube_dim()?;
    let bad = |m: String| Err(DataError::ConfigInvalid(m));
    if params.k == 0 {
        return bad("k must be positive".into());
    }
    if l > MAX_CUBE_DIM {
        return bad(format!("cube dimension {l} exceeds {MAX_CUBE_DIM}"));
    }
    if params.d < l {
        return bad(format!("d = {} is smaller than k / alpha = {l}", params.d));
    }
    if params.points_per_corner == 0 {
        return bad("pointsPerCorner must be positive".into());
    }
    if !(params.entropy_eps > 0.0 && params.entropy_eps < 0.5) {
        return bad(format!("entropy eps = {} must lie in (0, 1/2)", params.entropy_eps));
    }

    let codewords = greedy_constant_weight_code(l, params.k, params.min_distance());
    let corners = 1usize << l;
    let n = corners * params.points_per_corner;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut substream(params.seed, "datagen/hypercube", 0));

    let plant_word = &codewords[0];
    let mut points = DMatrix::zeros(n, params.d);
    let mut mask = vec![false; n];
    for (slot, &src) in order.iter().enumerate() {
        let corner = src / params.points_per_corner;
        let mut inside = true;
        for j in 0..l {
            if (corner >> j) & 1 == 1 {
                points[(slot, j)] = 1.0;
                inside &= plant_word[j] == 1;
            }
        }
        mask[slot] = inside;
    }
    let s = mask.iter().filter(|&&b| b).count();
    let truth = GroundTruth {
        inlier_mask: mask,
        plant: coordinate_projection(plant_word, params.d),
        k: params.k,
        alpha: s as f64 / n as f64,
        noise_energy: 0.0,
        decoys: codewords[1..]
            .iter()
            .map(|w| coordinate_projection(w, params.d))
            .collect(),
        noise: Some(DMatrix::zeros(n, params.d)),
    };
    Ok(HypercubeInstance {
        dataset: Dataset {
            points,
            truth: Some(truth),
            origin: Some(Origin::Hypercube {
                seed: params.seed,
                points_per_corner: params.points_per_corner,
                entropy_eps: params.entropy_eps,
                codewords: codewords.clone(),
            }),
        },
        codewords,
        entropy_eps: params.entropy_eps,
    })
}
