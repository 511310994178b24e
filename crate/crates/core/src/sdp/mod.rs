//! Standard-form semidefinite programs and a first-order conic solver.
//!
//! A [`ConicProblem`] minimises `Σ_b ⟨C_b, X_b⟩` over PSD blocks `X_b`
//! subject to linear equalities and `≥` inequalities in the block entries.

mod admm;
mod psd;

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use admm::solve;
pub use psd::project_psd;

#[derive(Debug, thiserror::Error)]
pub enum SdpError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("factorisation of the constraint Gram matrix failed: {0}")]
    Factorization(String),
    #[error("eigendecomposition failed on block {0}")]
    Eigen(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// One entry of a symmetric coefficient matrix: `C[row, col] = C[col, row] = value`.
///
/// An off-diagonal entry therefore contributes `2 · value · X[row, col]`
/// to `⟨C, X⟩`. Use [`LinearForm::add`] to think in terms of the scalar
/// coefficient on `X[row, col]` instead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoeffEntry {
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// A linear function of block entries, `Σ ⟨C_b, X_b⟩`, as symmetric triplets.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LinearForm {
    terms: Vec<CoeffEntry>,
}

impl LinearForm {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `coeff · X_block[row, col]`.
    pub fn add(&mut self, block: usize, row: usize, col: usize, coeff: f64) -> &mut Self {
        let value = if row == col { coeff } else { coeff / 2.0 };
        self.add_symmetric(block, row, col, value)
    }

    /// Adds the symmetric coefficient `C[row, col] = C[col, row] = value`.
    pub fn add_symmetric(&mut self, block: usize, row: usize, col: usize, value: f64) -> &mut Self {
        let (row, col) = if row >= col { (row, col) } else { (col, row) };
        self.terms.push(CoeffEntry {
            block,
            row,
            col,
            value,
        });
        self
    }

    pub fn terms(&self) -> &[CoeffEntry] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `Σ ⟨C_b, X_b⟩` at the given block matrices.
    pub fn evaluate(&self, blocks: &[DMatrix<f64>]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let x = blocks[t.block][(t.row, t.col)];
                if t.row == t.col {
                    t.value * x
                } else {
                    2.0 * t.value * x
                }
            })
            .sum()
    }
}

impl From<Vec<CoeffEntry>> for LinearForm {
    fn from(terms: Vec<CoeffEntry>) -> Self {
        let mut form = LinearForm::new();
        for t in terms {
            form.add_symmetric(t.block, t.row, t.col, t.value);
        }
        form
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub form: LinearForm,
    pub rhs: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConicProblem {
    /// Side length of each PSD block.
    pub blocks: Vec<usize>,
    /// `form = rhs`.
    pub equalities: Vec<Constraint>,
    /// `form ≥ rhs`.
    pub inequalities: Vec<Constraint>,
    /// Minimised.
    pub objective: LinearForm,
}

impl ConicProblem {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares a new PSD block and returns its index.
    pub fn add_block(&mut self, size: usize) -> usize {
        self.blocks.push(size);
        self.blocks.len() - 1
    }

    pub fn add_equality(&mut self, form: LinearForm, rhs: f64) -> usize {
        self.equalities.push(Constraint { form, rhs });
        self.equalities.len() - 1
    }

    pub fn add_inequality(&mut self, form: LinearForm, rhs: f64) -> usize {
        self.inequalities.push(Constraint { form, rhs });
        self.inequalities.len() - 1
    }

    pub fn set_objective(&mut self, form: LinearForm) {
        self.objective = form;
    }

    /// Total number of scalar unknowns in the lower triangles of all blocks.
    pub fn num_entries(&self) -> usize {
        self.blocks.iter().map(|n| n * (n + 1) / 2).sum()
    }

    pub fn validate(&self) -> Result<(), SdpError> {
        if self.blocks.is_empty() {
            return Err(SdpError::InvalidProblem("no blocks".into()));
        }
        if let Some(b) = self.blocks.iter().position(|&n| n == 0) {
            return Err(SdpError::InvalidProblem(format!("block {b} is empty")));
        }
        let check = |form: &LinearForm, what: &str| -> Result<(), SdpError> {
            for t in form.terms() {
                let size = *self.blocks.get(t.block).ok_or_else(|| {
                    SdpError::InvalidProblem(format!("{what}: block {} not declared", t.block))
                })?;
                if t.row >= size || t.col >= size {
                    return Err(SdpError::InvalidProblem(format!(
                        "{what}: entry ({}, {}) outside block {} of size {size}",
                        t.row, t.col, t.block
                    )));
                }
                if !t.value.is_finite() {
                    return Err(SdpError::InvalidProblem(format!("{what}: non-finite coefficient")));
                }
            }
            Ok(())
        };
        check(&self.objective, "objective")?;
        for (i, c) in self.equalities.iter().enumerate() {
            check(&c.form, &format!("equality {i}"))?;
            if !c.rhs.is_finite() {
                return Err(SdpError::InvalidProblem(format!("equality {i}: non-finite rhs")));
            }
        }
        for (i, c) in self.inequalities.iter().enumerate() {
            check(&c.form, &format!("inequality {i}"))?;
            if !c.rhs.is_finite() {
                return Err(SdpError::InvalidProblem(format!("inequality {i}: non-finite rhs")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String, SdpError> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, SdpError> {
        let p: Self = serde_json::from_str(s)?;
        p.validate()?;
        Ok(p)
    }

    pub fn save(&self, path: &Path) -> Result<(), SdpError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, SdpError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    MaxIter,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iter: usize,
    /// Initial ADMM penalty.
    pub rho: f64,
    /// Over-relaxation factor in `(0, 2)`.
    pub relaxation: f64,
    /// Rescale the penalty when one residual dominates the other by 10x.
    /// Off by default: on the recovery relaxations a fixed penalty
    /// converges markedly faster.
    #[serde(default)]
    pub adaptive_rho: bool,
    /// Print a progress line to stderr every this many iterations (0 = quiet).
    pub log_every: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 50_000,
            rho: 1.0,
            relaxation: 1.6,
            adaptive_rho: false,
            log_every: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicSolution {
    #[serde(with = "crate::matrix_serde::vec")]
    pub blocks: Vec<DMatrix<f64>>,
    /// Slack `form - rhs ≥ 0` of each inequality.
    pub slacks: Vec<f64>,
    /// Multipliers for the equalities followed by the inequalities.
    pub duals: Vec<f64>,
    pub objective: f64,
    pub dual_objective: f64,
    /// `‖A x - b‖ / (1 + ‖b‖)`.
    pub primal_residual: f64,
    /// `‖c - Aᵀy - S‖ / (1 + ‖c‖)`.
    pub dual_residual: f64,
    pub gap: f64,
    pub iterations: usize,
    pub status: SolveStatus,
}

impl ConicSolution {
    pub fn max_residual(&self) -> f64 {
        self.primal_residual.max(self.dual_residual)
    }

    pub fn to_json(&self) -> Result<String, SdpError> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, SdpError> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), SdpError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, SdpError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Address of a scalar block entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryRef {
    pub block: usize,
    pub row: usize,
    pub col: usize,
}

/// Minimises `Σ m_j²` over the feasible set, where `m` lists the given
/// scalar entries.
///
/// A PSD epigraph block `[[t, mᵀ], [m, I]]` is appended after the existing
/// blocks and `t` becomes the objective; the returned solution keeps that
/// block last and reports `t` as its objective.
pub fn frobenius_minimize(
    problem: &ConicProblem,
    entries: &[EntryRef],
    settings: &SolverSettings,
) -> Result<ConicSolution, SdpError> {
    let augmented = frobenius_epigraph(problem, entries)?;
    solve(&augmented, settings)
}

/// The problem solved by [`frobenius_minimize`].
pub fn frobenius_epigraph(
    problem: &ConicProblem,
    entries: &[EntryRef],
) -> Result<ConicProblem, SdpError> {
    problem.validate()?;
    for e in entries {
        let size = *problem.blocks.get(e.block).ok_or_else(|| {
            SdpError::InvalidProblem(format!("entry refers to missing block {}", e.block))
        })?;
        if e.row >= size || e.col >= size {
            return Err(SdpError::InvalidProblem(format!(
                "entry ({}, {}) outside block {}",
                e.row, e.col, e.block
            )));
        }
    }
    let mut p = problem.clone();
    let l = entries.len();
    let epi = p.add_block(l + 1);
    for (j, e) in entries.iter().enumerate() {
        let mut f = LinearForm::new();
        f.add(epi, j + 1, 0, 1.0).add(e.block, e.row, e.col, -1.0);
        p.add_equality(f, 0.0);
    }
    for r in 1..=l {
        for c in 1..=r {
            let mut f = LinearForm::new();
            f.add(epi, r, c, 1.0);
            p.add_equality(f, if r == c { 1.0 } else { 0.0 });
        }
    }
    let mut obj = LinearForm::new();
    obj.add(epi, 0, 0, 1.0);
    p.set_objective(obj);
    Ok(p)
}
