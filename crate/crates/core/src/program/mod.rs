//! Compiles a dataset into the degree-2 moment relaxation of the subspace
//! recovery system over selectors `w` and projection entries `Π`.
//!
//! Block layout of the compiled problem: block 0 is the moment matrix over
//! `{1, w_1..w_N, π_ab}`, blocks 1 and 2 hold `pE[Π]` and `I - pE[Π]`, and
//! blocks `3 + 2i`, `4 + 2i` hold `pE[w_i Π]` and `pE[w_i] I - pE[w_i Π]`.

mod check;

use std::path::Path;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::datagen::Dataset;
use crate::moment::{MomentError, MonomialBasis, PolynomialExpr, Pseudoexpectation, VarId};
use crate::sdp::{ConicProblem, ConicSolution, EntryRef, LinearForm};

pub use check::{
    check_assignment, evaluate_constraints, induced_blocks, ConstraintKind, ConstraintReport, ConstraintSlack,
};

#[derive(Debug, thiserror::Error)]
pub enum ProgramError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Moment(#[from] MomentError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RecoveryConfig {
    pub k: usize,
    pub alpha: f64,
    /// Budget per selected point: `Σ w_i Φ(x_i, Π) ≤ epsCost · Σ w_i`.
    pub eps_cost: f64,
    #[serde(default = "default_degree")]
    pub degree: usize,
    #[serde(default = "default_true")]
    pub include_localizers: bool,
}

fn default_degree() -> usize {
    2
}

fn default_true() -> bool {
    true
}

/// Slack factor applied to the measured noise energy per inlier.
pub const DEFAULT_BUDGET_SLACK: f64 = 2.0;

impl RecoveryConfig {
    pub fn new(k: usize, alpha: f64, eps_cost: f64) -> Self {
        Self {
            k,
            alpha,
            eps_cost,
            degree: 2,
            include_localizers: true,
        }
    }

    /// Budget `2 · noiseEnergy / |S|` from the dataset's ground truth.
    pub fn default_budget(data: &Dataset) -> Option<f64> {
        data.truth
            .as_ref()
            .map(|t| DEFAULT_BUDGET_SLACK * t.noise_per_inlier())
    }

    pub fn validate(&self, n: usize, d: usize) -> Result<(), ProgramError> {
        let bad = |m: String| Err(ProgramError::ConfigInvalid(m));
        if n < 2 {
            return bad(format!("need at least 2 points, got {n}"));
        }
        if self.k == 0 || self.k >= d {
            return bad(format!("k = {} must satisfy 1 <= k < d = {d}", self.k));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha = {} must lie in (0, 1]", self.alpha));
        }
        if self.alpha * (n as f64) < 1.0 - 1e-9 {
            return bad(format!("alpha * N = {} is below 1", self.alpha * n as f64));
        }
        if !(self.eps_cost >= 0.0 && self.eps_cost.is_finite()) {
            return bad(format!("epsCost = {} must be finite and nonnegative", self.eps_cost));
        }
        if self.degree < 2 {
            return bad(format!("degree {} is below 2", self.degree));
        }
        if self.degree > 3 {
            return bad(format!(
                "degree {} relaxations are not compiled; use degree 2",
                self.degree
            ));
        }
        Ok(())
    }
}

/// Which constraint of the polynomial system a conic row comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// `pE[1] = 1`.
    Normalization,
    /// `w_i² = w_i`, as ties between moment-matrix entries.
    Bool,
    /// `Σ w_i ≥ αN`.
    Sum,
    /// `w_i (Σ_j w_j - αN) ≥ 0`.
    LocalizedSum,
    /// `Σ w_i Φ(x_i, Π) ≤ ε Σ w_i`.
    Cost,
    /// `0 ⪯ Π ⪯ I`, `Tr Π = k`.
    Spectral,
    /// `0 ⪯ w_i Π ⪯ w_i I`, `Tr w_i Π = k w_i`.
    Localizer,
    /// Moment block PSD.
    Moment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceMap {
    pub equalities: Vec<Provenance>,
    pub inequalities: Vec<Provenance>,
    pub blocks: Vec<Provenance>,
}

impl ProvenanceMap {
    pub fn count(&self, tag: Provenance) -> usize {
        self.equalities
            .iter()
            .chain(&self.inequalities)
            .chain(&self.blocks)
            .filter(|&&t| t == tag)
            .count()
    }
}

#[derive(Debug, Clone)]
pub struct CompiledRelaxation {
    pub problem: ConicProblem,
    pub basis: Arc<MonomialBasis>,
    pub provenance: ProvenanceMap,
    pub config: RecoveryConfig,
}

/// Persisted form of a [`CompiledRelaxation`]; the basis is rebuilt from
/// `(n, d, degree)`.
#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct CompiledFile {
    version: u32,
    n: usize,
    d: usize,
    config: RecoveryConfig,
    provenance: ProvenanceMap,
    problem: ConicProblem,
}

pub const MOMENT_BLOCK: usize = 0;

impl CompiledRelaxation {
    pub fn num_samples(&self) -> usize {
        self.basis.num_samples()
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Block indices of `pE[w_i Π]` and `pE[w_i] I - pE[w_i Π]`.
    pub fn localizer_blocks(&self, i: usize) -> (usize, usize) {
        (3 + 2 * i, 4 + 2 * i)
    }

    /// Moment-matrix entries holding `pE[w_i]`, in sample order.
    pub fn selector_entries(&self) -> Vec<EntryRef> {
        (0..self.num_samples())
            .map(|i| {
                let (row, col) = self
                    .basis
                    .entry_for(&self.basis.var(self.basis.selector(i)))
                    .expect("selectors are basis rows");
                EntryRef {
                    block: MOMENT_BLOCK,
                    row,
                    col,
                }
            })
            .collect()
    }

    /// Validates the moment block of a solution as a pseudoexpectation.
    pub fn pseudoexpectation(
        &self,
        solution: &ConicSolution,
        tolerance: f64,
    ) -> Result<Pseudoexpectation, ProgramError> {
        let m = solution.blocks.get(MOMENT_BLOCK).ok_or_else(|| {
            ProgramError::DimensionMismatch("solution has no moment block".into())
        })?;
        Ok(Pseudoexpectation::from_moment_matrix(
            Arc::clone(&self.basis),
            m,
            tolerance,
        )?)
    }

    pub fn to_json(&self) -> Result<String, ProgramError> {
        Ok(serde_json::to_string(&CompiledFile {
            version: 1,
            n: self.num_samples(),
            d: self.dim(),
            config: self.config.clone(),
            provenance: self.provenance.clone(),
            problem: self.problem.clone(),
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self, ProgramError> {
        let f: CompiledFile = serde_json::from_str(s)?;
        f.problem
            .validate()
            .map_err(|e| ProgramError::ConfigInvalid(e.to_string()))?;
        let basis = MonomialBasis::new(f.n, f.d, f.config.degree)?;
        if f.problem.blocks.first() != Some(&basis.len()) {
            return Err(ProgramError::DimensionMismatch(
                "moment block does not match the basis".into(),
            ));
        }
        Ok(Self {
            problem: f.problem,
            basis: Arc::new(basis),
            provenance: f.provenance,
            config: f.config,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), ProgramError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ProgramError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// `Φ(x, Π) = xᵀx - Σ_ab x_a x_b π_ab`, which equals `‖x - Πx‖²` whenever
/// `Π` is a projection.
pub fn cost_polynomial(basis: &MonomialBasis, x: &DVector<f64>) -> PolynomialExpr {
    let d = basis.dim();
    let mut p = PolynomialExpr::zero();
    let sq = x.norm_squared();
    if sq != 0.0 {
        p.push_term(sq, Vec::new());
    }
    for a in 0..d {
        for b in 0..d {
            let c = x[a] * x[b];
            if c != 0.0 {
                p.push_term(-c, vec![basis.param(a, b)]);
            }
        }
    }
    p
}

/// Linear form on the moment block equal to `pE[p]`.
pub(crate) fn moment_form(basis: &MonomialBasis, p: &PolynomialExpr) -> Result<LinearForm, MomentError> {
    let mut f = LinearForm::new();
    for (c, ids) in p.terms() {
        if *c == 0.0 {
            continue;
        }
        let mono = basis.reduce(ids.iter().copied());
        let (r, col) = basis
            .entry_for(&mono)
            .ok_or_else(|| MomentError::DegreeTooHigh(basis.monomial_name(&mono)))?;
        f.add(MOMENT_BLOCK, r, col, *c);
    }
    Ok(f)
}

fn moment_entry(basis: &MonomialBasis, ids: &[VarId]) -> (usize, usize) {
    let mono = basis.reduce(ids.iter().copied());
    basis.entry_for(&mono).expect("degree-2 moment")
}

/// Builds the conic program for `data` under `cfg`.
pub fn compile(data: &Dataset, cfg: &RecoveryConfig) -> Result<CompiledRelaxation, ProgramError> {
    let (n, d) = (data.len(), data.dim());
    cfg.validate(n, d)?;
    if !data.points.iter().all(|v| v.is_finite()) {
        return Err(ProgramError::ConfigInvalid("dataset has non-finite coordinates".into()));
    }
    let basis = MonomialBasis::new(n, d, cfg.degree)?;
    let nb = basis.len();
    let alpha_n = cfg.alpha * n as f64;
    let k = cfg.k as f64;

    let mut p = ConicProblem::new();
    let mut prov = ProvenanceMap {
        equalities: Vec::new(),
        inequalities: Vec::new(),
        blocks: Vec::new(),
    };
    let eq = |p: &mut ConicProblem, f: LinearForm, rhs: f64, tag: Provenance, prov: &mut ProvenanceMap| {
        p.add_equality(f, rhs);
        prov.equalities.push(tag);
    };

    let main = p.add_block(nb);
    prov.blocks.push(Provenance::Moment);
    let lower = p.add_block(d);
    let upper = p.add_block(d);
    prov.blocks.extend([Provenance::Spectral; 2]);
    for _ in 0..n {
        p.add_block(d);
        p.add_block(d);
        prov.blocks.extend([Provenance::Localizer; 2]);
    }

    // normalisation
    let mut f = LinearForm::new();
    f.add(main, 0, 0, 1.0);
    eq(&mut p, f, 1.0, Provenance::Normalization, &mut prov);

    // entries reducing to the same moment, i.e. the boolean identities
    for r in 0..nb {
        for c in 0..=r {
            let id = basis.entry_moment(r, c);
            let canon = basis.canonical_entry(id);
            if canon != (r, c) {
                let mut f = LinearForm::new();
                f.add(main, r, c, 1.0).add(main, canon.0, canon.1, -1.0);
                eq(&mut p, f, 0.0, Provenance::Bool, &mut prov);
            }
        }
    }

    let w_entry: Vec<(usize, usize)> = (0..n).map(|i| moment_entry(&basis, &[basis.selector(i)])).collect();

    // Σ pE[w_i] ≥ αN
    let mut f = LinearForm::new();
    for &(r, c) in &w_entry {
        f.add(main, r, c, 1.0);
    }
    p.add_inequality(f, alpha_n);
    prov.inequalities.push(Provenance::Sum);

    if cfg.include_localizers {
        for i in 0..n {
            let wi = basis.selector(i);
            let mut poly = PolynomialExpr::monomial(-alpha_n, vec![wi]);
            for j in 0..n {
                poly.push_term(1.0, vec![wi, basis.selector(j)]);
            }
            p.add_inequality(moment_form(&basis, &poly)?, 0.0);
            prov.inequalities.push(Provenance::LocalizedSum);
        }
    }

    // Σ_i w_i (ε - Φ(x_i, Π)) ≥ 0
    let mut poly = PolynomialExpr::zero();
    for i in 0..n {
        let wi = PolynomialExpr::var(basis.selector(i));
        let phi = cost_polynomial(&basis, &data.point(i));
        poly = poly + &wi * &(PolynomialExpr::constant(cfg.eps_cost) - phi);
    }
    p.add_inequality(moment_form(&basis, &poly)?, 0.0);
    prov.inequalities.push(Provenance::Cost);

    // spectral: G = pE[Π], H = I - pE[Π], Tr pE[Π] = k
    let mut trace = LinearForm::new();
    for a in 0..d {
        for b in 0..=a {
            let (r, c) = moment_entry(&basis, &[basis.param(a, b)]);
            let mut f = LinearForm::new();
            f.add(lower, a, b, 1.0).add(main, r, c, -1.0);
            eq(&mut p, f, 0.0, Provenance::Spectral, &mut prov);
            let mut f = LinearForm::new();
            f.add(upper, a, b, 1.0).add(main, r, c, 1.0);
            eq(&mut p, f, if a == b { 1.0 } else { 0.0 }, Provenance::Spectral, &mut prov);
        }
        let (r, c) = moment_entry(&basis, &[basis.param(a, a)]);
        trace.add(main, r, c, 1.0);
    }
    eq(&mut p, trace, k, Provenance::Spectral, &mut prov);

    // localized spectral constraints
    for i in 0..n {
        let wi = basis.selector(i);
        let lo = 3 + 2 * i;
        let hi = 4 + 2 * i;
        let (wr, wc) = w_entry[i];
        let mut trace = LinearForm::new();
        for a in 0..d {
            for b in 0..=a {
                let (r, c) = moment_entry(&basis, &[wi, basis.param(a, b)]);
                let mut f = LinearForm::new();
                f.add(lo, a, b, 1.0).add(main, r, c, -1.0);
                eq(&mut p, f, 0.0, Provenance::Localizer, &mut prov);
                let mut f = LinearForm::new();
                f.add(hi, a, b, 1.0).add(main, r, c, 1.0);
                if a == b {
                    f.add(main, wr, wc, -1.0);
                }
                eq(&mut p, f, 0.0, Provenance::Localizer, &mut prov);
            }
            let (r, c) = moment_entry(&basis, &[wi, basis.param(a, a)]);
            trace.add(main, r, c, 1.0);
        }
        trace.add(main, wr, wc, -k);
        eq(&mut p, trace, 0.0, Provenance::Localizer, &mut prov);
    }

    Ok(CompiledRelaxation {
        problem: p,
        basis: Arc::new(basis),
        provenance: prov,
        config: cfg.clone(),
    })
}
