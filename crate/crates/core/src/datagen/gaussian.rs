use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{projection, Adversary, DataError, Dataset, GroundTruth, Origin};
use crate::rng::{substream, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GaussianParams {
    pub d: usize,
    pub k: usize,
    pub n: usize,
    pub alpha: f64,
    pub noise_sigma: f64,
    pub adversary: Adversary,
    pub seed: u64,
}

impl GaussianParams {
    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |m: String| Err(DataError::ConfigInvalid(m));
        if self.d < 2 {
            return bad(format!("dimension d = {} must be at least 2", self.d));
        }
        if self.k == 0 || self.k >= self.d {
            return bad(format!("subspace dimension k = {} must satisfy 1 <= k < d", self.k));
        }
        if self.n < 2 {
            return bad(format!("need at least 2 points, got {}", self.n));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha = {} must lie in (0, 1]", self.alpha));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise sigma = {} must be finite and nonnegative", self.noise_sigma));
        }
        Ok(())
    }

    /// `⌈αN⌉`, guarding against `0.5 · 200 = 100.00000000000001`.
    pub fn num_inliers(&self) -> usize {
        ((self.alpha * self.n as f64 - 1e-9).ceil() as usize).clamp(1, self.n)
    }
}

fn gaussian_matrix(rng: &mut Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    // column-major fill order is part of the reproducibility contract
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn gaussian_vector(rng: &mut Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Orthonormal `d × k` basis of a uniformly random subspace of `span(within)`.
fn random_subspace(rng: &mut Rng, within: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let g = within * gaussian_matrix(rng, within.ncols(), k);
    g.qr().q().columns(0, k).into_owned()
}

/// Orthogonal matrix mapping `span(from)` onto `span(to)` as a product of
/// Householder reflections taking column `j` of `from` to column `j` of `to`.
pub(crate) fn householder_chain(from: &DMatrix<f64>, to: &DMatrix<f64>) -> DMatrix<f64> {
    let d = from.nrows();
    let mut h = DMatrix::identity(d, d);
    for j in 0..from.ncols() {
        let u = &h * from.column(j);
        let v = &u - to.column(j);
        let nv2 = v.norm_squared();
        if nv2 < 1e-24 {
            continue;
        }
        let refl = DMatrix::identity(d, d) - (&v * v.transpose()) * (2.0 / nv2);
        h = refl * h;
    }
    h
}

fn orthogonal_mixture_bases(rng: &mut Rng, q: &DMatrix<f64>, k: usize, alpha: f64) -> Vec<DMatrix<f64>> {
    let d = q.nrows();
    let count = (((1.0 / alpha) + 1e-9).floor() as usize).saturating_sub(1).max(1);
    let complement = q.columns(k, d - k).into_owned();
    let rank = k.min(d - k);
    (0..count)
        .map(|j| {
            if (j + 2) * k <= d {
                q.columns((j + 1) * k, k).into_owned()
            } else {
                random_subspace(rng, &complement, rank)
            }
        })
        .collect()
}

/// Draws a planted-subspace instance.
///
/// `⌈αN⌉` inliers `P x* + γ` with `x* ~ N(0, I_d)`, `γ ~ N(0, σ² I_d)`, at
/// random positions; the rest follow `adversary`.
pub fn generate_gaussian(params: &GaussianParams) -> Result<Dataset, DataError> {
    params.validate()?;
    let GaussianParams { d, k, n, alpha, noise_sigma, adversary, seed } = *params;
    let mut rng = substream(seed, "datagen/gaussian", 0);

    let q = gaussian_matrix(&mut rng, d, d).qr().q();
    let basis = q.columns(0, k).into_owned();
    let plant = projection(&basis);
    let s = params.num_inliers();

    let mut points = DMatrix::zeros(n, d);
    let mut noise = DMatrix::zeros(n, d);
    let mut mask = vec![false; n];
    let mut decoys = Vec::new();

    let draw_inlier = |rng: &mut Rng, i: usize, points: &mut DMatrix<f64>, noise: &mut DMatrix<f64>| {
        let x = &plant * gaussian_vector(rng, d);
        let g = gaussian_vector(rng, d) * noise_sigma;
        points.set_row(i, &(x + &g).transpose());
        noise.set_row(i, &g.transpose());
    };

    if adversary == Adversary::TvCorruption {
        for i in 0..n {
            draw_inlier(&mut rng, i, &mut points, &mut noise);
        }
        mask.iter_mut().for_each(|m| *m = true);
        let complement = DMatrix::identity(d, d) - &plant;
        let mut by_residual: Vec<(f64, usize)> = (0..n)
            .map(|i| ((&complement * points.row(i).transpose()).norm(), i))
            .collect();
        by_residual.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let rogue = random_subspace(&mut rng, &DMatrix::identity(d, d), k);
        let h = householder_chain(&basis, &rogue);
        for &(_, i) in by_residual.iter().take(n - s) {
            let reflected = &h * points.row(i).transpose();
            points.set_row(i, &reflected.transpose());
            noise.row_mut(i).fill(0.0);
            mask[i] = false;
        }
        if n > s {
            decoys.push(projection(&rogue));
        }
    } else {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        for &i in &order[..s] {
            mask[i] = true;
        }
        let mixture = if adversary == Adversary::OrthogonalMixture && s < n {
            orthogonal_mixture_bases(&mut rng, &q, k, alpha)
        } else {
            Vec::new()
        };
        let far = {
            let v = gaussian_vector(&mut rng, d);
            v.normalize() * (10.0 * (d as f64).sqrt())
        };
        let mut outlier = 0usize;
        for i in 0..n {
            if mask[i] {
                draw_inlier(&mut rng, i, &mut points, &mut noise);
                continue;
            }
            let x = match adversary {
                Adversary::OrthogonalMixture => {
                    let b = &mixture[outlier % mixture.len()];
                    b * gaussian_vector(&mut rng, b.ncols()) + gaussian_vector(&mut rng, d) * noise_sigma
                }
                Adversary::FullSpaceGaussian => gaussian_vector(&mut rng, d),
                Adversary::PointCluster => far.clone(),
                Adversary::TvCorruption => unreachable!(),
            };
            points.set_row(i, &x.transpose());
            outlier += 1;
        }
        decoys.extend(mixture.iter().map(projection));
    }

    let noise_energy = (0..n)
        .filter(|&i| mask[i])
        .map(|i| noise.row(i).norm_squared())
        .sum();
    let truth = GroundTruth {
        alpha: s as f64 / n as f64,
        inlier_mask: mask,
        plant,
        k,
        noise_energy,
        decoys,
        noise: Some(noise),
    };
    Ok(Dataset {
        points,
        truth: Some(truth),
        origin: Some(Origin::Gaussian {
            seed,
            adversary,
            noise_sigma,
        }),
    })
}
