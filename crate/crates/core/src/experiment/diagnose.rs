use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::datagen::Dataset;
use crate::moment::{MomentError, Pseudoexpectation};
use crate::program::{evaluate_constraints, CompiledRelaxation, ProgramError};
use crate::rng::substream;

pub const ANTICONCENTRATION_ETAS: [f64; 2] = [0.1, 0.2];
pub const NUM_DIRECTIONS: usize = 100;
/// Certified anticoncentration constant of the standard Gaussian, `2√e`.
pub const CERTIFIED_GAUSSIAN_CONSTANT: f64 = 3.297_442_541_400_256;
/// A fraction this many times the Gaussian mass is flagged.
pub const HIGH_FACTOR: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AnticoncentrationRow {
    pub eta: f64,
    /// Mean over directions of the fraction of points with `⟨x, v⟩² < η²`.
    pub mean_fraction: f64,
    pub max_fraction: f64,
    /// `P(|g| < η)` for `g ~ N(0, 1)`.
    pub gaussian_reference: f64,
    pub high: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DiagnosticReport {
    pub anticoncentration: Vec<AnticoncentrationRow>,
    pub certified_constant: f64,
    /// `(1/|S|) Σ_{i∈S} pE[w_i]`, when the inlier set is known.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correlation: Option<f64>,
    pub min_eigenvalue: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slacks: Option<SlackSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SlackSummary {
    pub min_inequality_slack: f64,
    pub max_equality_residual: f64,
    pub violations: usize,
    pub tolerance: f64,
}

/// Gaussian mass of `(-η, η)`.
pub fn gaussian_mass(eta: f64) -> f64 {
    libm::erf(eta / std::f64::consts::SQRT_2)
}

/// Fraction of points (inliers, when known) with `⟨x, v⟩² < η²` over
/// random unit directions `v`, drawn inside the planted subspace when it
/// is known.
pub fn anticoncentration(data: &Dataset, seed: u64) -> Vec<AnticoncentrationRow> {
    let d = data.dim();
    let rows: Vec<usize> = match &data.truth {
        Some(t) => (0..data.len()).filter(|&i| t.inlier_mask[i]).collect(),
        None => (0..data.len()).collect(),
    };
    let within = data.truth.as_ref().map(|t| t.plant.clone());
    let mut rng = substream(seed, "diagnose/directions", 0);
    let mut dirs: Vec<DVector<f64>> = Vec::with_capacity(NUM_DIRECTIONS);
    while dirs.len() < NUM_DIRECTIONS {
        let g = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let v = match &within {
            Some(p) => p * g,
            None => g,
        };
        let norm = v.norm();
        if norm > 1e-12 {
            dirs.push(v / norm);
        }
    }
    let proj: DMatrix<f64> = if rows.is_empty() {
        DMatrix::zeros(0, NUM_DIRECTIONS)
    } else {
        let pts = DMatrix::from_fn(rows.len(), d, |r, c| data.points[(rows[r], c)]);
        pts * DMatrix::from_columns(&dirs)
    };
    ANTICONCENTRATION_ETAS
        .iter()
        .map(|&eta| {
            let fractions: Vec<f64> = (0..NUM_DIRECTIONS)
                .map(|j| {
                    if rows.is_empty() {
                        return 0.0;
                    }
                    let c = proj.column(j).iter().filter(|&&x| x * x < eta * eta).count();
                    c as f64 / rows.len() as f64
                })
                .collect();
            let mean = fractions.iter().sum::<f64>() / NUM_DIRECTIONS as f64;
            let max = fractions.iter().copied().fold(0.0, f64::max);
            let reference = gaussian_mass(eta);
            AnticoncentrationRow {
                eta,
                mean_fraction: mean,
                max_fraction: max,
                gaussian_reference: reference,
                high: mean > HIGH_FACTOR * reference,
            }
        })
        .collect()
}

/// `(1/|S|) Σ_{i∈S} pE[w_i]` for the inlier mask `mask`.
pub fn correlation(pe: &Pseudoexpectation, mask: &[bool]) -> Result<f64, MomentError> {
    let means = pe.selector_means()?;
    if means.len() != mask.len() {
        return Err(MomentError::DimensionMismatch {
            expected: means.len(),
            found: mask.len(),
        });
    }
    let s = mask.iter().filter(|&&b| b).count();
    if s == 0 {
        return Ok(0.0);
    }
    let total: f64 = means.iter().zip(mask).filter(|(_, &b)| b).map(|(m, _)| m).sum();
    Ok(total / s as f64)
}

/// Empirical diagnostics of a dataset and a solved pseudoexpectation.
pub fn diagnose(
    data: &Dataset,
    pe: &Pseudoexpectation,
    relaxation: Option<&CompiledRelaxation>,
    seed: u64,
) -> Result<DiagnosticReport, ProgramError> {
    let correlation = match &data.truth {
        Some(t) => Some(correlation(pe, &t.inlier_mask)?),
        None => None,
    };
    let slacks = match relaxation {
        Some(rel) => {
            let report = evaluate_constraints(rel, pe)?;
            let tol = pe.tolerance();
            let (min_slack, max_eq) = report.worst();
            Some(SlackSummary {
                min_inequality_slack: min_slack,
                max_equality_residual: max_eq,
                violations: report.violations(tol).len(),
                tolerance: tol,
            })
        }
        None => None,
    };
    Ok(DiagnosticReport {
        anticoncentration: anticoncentration(data, seed),
        certified_constant: CERTIFIED_GAUSSIAN_CONSTANT,
        correlation,
        min_eigenvalue: pe.min_eigenvalue()?,
        slacks,
    })
}

impl DiagnosticReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for r in &self.anticoncentration {
            s.push_str(&format!(
                "anticoncentration eta={:.2}: mean {:.4} max {:.4} gaussian {:.4}{}\n",
                r.eta,
                r.mean_fraction,
                r.max_fraction,
                r.gaussian_reference,
                if r.high { "  HIGH" } else { "" }
            ));
        }
        s.push_str(&format!("certified gaussian constant: {:.4}\n", self.certified_constant));
        if let Some(c) = self.correlation {
            s.push_str(&format!("frobenius correlation: {c:.6}\n"));
        }
        s.push_str(&format!("moment matrix min eigenvalue: {:.3e}\n", self.min_eigenvalue));
        if let Some(sl) = &self.slacks {
            s.push_str(&format!(
                "min inequality/psd slack: {:.3e}, max equality residual: {:.3e}, violations at {:.1e}: {}\n",
                sl.min_inequality_slack, sl.max_equality_residual, sl.tolerance, sl.violations
            ));
        }
        s
    }
}
