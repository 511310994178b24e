use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{compile, CompiledRelaxation, ProgramError, Provenance, RecoveryConfig};
use crate::datagen::Dataset;
use crate::moment::{Atom, Pseudoexpectation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    /// Slack is `lhs - rhs`, feasible when zero.
    Equality,
    /// Slack is `lhs - rhs`, feasible when nonnegative.
    Inequality,
    /// Slack is the smallest eigenvalue of the block.
    Psd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSlack {
    pub tag: Provenance,
    pub kind: ConstraintKind,
    /// Index among constraints of the same kind.
    pub index: usize,
    pub slack: f64,
}

impl ConstraintSlack {
    pub fn satisfied(&self, tol: f64) -> bool {
        match self.kind {
            ConstraintKind::Equality => self.slack.abs() <= tol,
            _ => self.slack >= -tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub entries: Vec<ConstraintSlack>,
}

impl ConstraintReport {
    pub fn violations(&self, tol: f64) -> Vec<&ConstraintSlack> {
        self.entries.iter().filter(|e| !e.satisfied(tol)).collect()
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.entries.iter().all(|e| e.satisfied(tol))
    }

    /// Entries carrying `tag`.
    pub fn with_tag(&self, tag: Provenance) -> impl Iterator<Item = &ConstraintSlack> {
        self.entries.iter().filter(move |e| e.tag == tag)
    }

    /// Smallest inequality or PSD slack, and largest equality residual.
    pub fn worst(&self) -> (f64, f64) {
        let mut min_slack = f64::INFINITY;
        let mut max_eq = 0.0f64;
        for e in &self.entries {
            match e.kind {
                ConstraintKind::Equality => max_eq = max_eq.max(e.slack.abs()),
                _ => min_slack = min_slack.min(e.slack),
            }
        }
        (min_slack, max_eq)
    }
}

/// The block matrices a pseudoexpectation induces in the compiled layout.
pub fn induced_blocks(
    rel: &CompiledRelaxation,
    pe: &Pseudoexpectation,
) -> Result<Vec<DMatrix<f64>>, ProgramError> {
    let d = rel.dim();
    let mut blocks = Vec::with_capacity(rel.problem.blocks.len());
    blocks.push(pe.moment_matrix()?);
    let g = pe.param_means()?;
    blocks.push(DMatrix::identity(d, d) - &g);
    blocks.insert(1, g);
    let means = pe.selector_means()?;
    for (i, &m) in means.iter().enumerate() {
        let l = pe.localized_params(i)?;
        blocks.push(l.clone());
        blocks.push(DMatrix::identity(d, d) * m - l);
    }
    Ok(blocks)
}

/// Evaluates every compiled constraint at `pe`.
pub fn evaluate_constraints(
    rel: &CompiledRelaxation,
    pe: &Pseudoexpectation,
) -> Result<ConstraintReport, ProgramError> {
    let blocks = induced_blocks(rel, pe)?;
    let mut entries = Vec::new();
    for (index, (c, &tag)) in rel
        .problem
        .equalities
        .iter()
        .zip(&rel.provenance.equalities)
        .enumerate()
    {
        entries.push(ConstraintSlack {
            tag,
            kind: ConstraintKind::Equality,
            index,
            slack: c.form.evaluate(&blocks) - c.rhs,
        });
    }
    for (index, (c, &tag)) in rel
        .problem
        .inequalities
        .iter()
        .zip(&rel.provenance.inequalities)
        .enumerate()
    {
        entries.push(ConstraintSlack {
            tag,
            kind: ConstraintKind::Inequality,
            index,
            slack: c.form.evaluate(&blocks) - c.rhs,
        });
    }
    for (index, (b, &tag)) in blocks.iter().zip(&rel.provenance.blocks).enumerate() {
        entries.push(ConstraintSlack {
            tag,
            kind: ConstraintKind::Psd,
            index,
            slack: b.clone().symmetric_eigenvalues().min(),
        });
    }
    Ok(ConstraintReport { entries })
}

/// Slack of every compiled constraint at the point mass on `(w, Π)`.
///
/// # Errors
/// Only for malformed input: invalid config or mismatched dimensions.
pub fn check_assignment(
    data: &Dataset,
    cfg: &RecoveryConfig,
    w: &[bool],
    pi: &DMatrix<f64>,
) -> Result<ConstraintReport, ProgramError> {
    let (n, d) = (data.len(), data.dim());
    if w.len() != n || pi.shape() != (d, d) {
        return Err(ProgramError::DimensionMismatch(format!(
            "assignment has {} selectors and a {}x{} matrix for {n} points in R^{d}",
            w.len(),
            pi.nrows(),
            pi.ncols()
        )));
    }
    let rel = compile(data, cfg)?;
    let pe = Pseudoexpectation::from_distribution(
        rel.basis.clone(),
        &[Atom {
            weight: 1.0,
            selectors: w.to_vec(),
            params: pi.clone(),
        }],
    )?;
    evaluate_constraints(&rel, &pe)
}
