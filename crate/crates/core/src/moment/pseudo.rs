use std::sync::Arc;

use nalgebra::DMatrix;

use super::basis::{Monomial, MonomialBasis, VarId};
use super::polynomial::PolynomialExpr;
use super::MomentError;

/// Default slack allowed below zero in the moment matrix spectrum.
pub const DEFAULT_PSD_TOLERANCE: f64 = 1e-7;

/// Default lower bound on the normaliser when conditioning.
pub const DEFAULT_CONDITIONING_FLOOR: f64 = 1e-8;

/// A point mass of a finite distribution over `(w, Π)`.
#[derive(Debug, Clone)]
pub struct Atom {
    pub weight: f64,
    pub selectors: Vec<bool>,
    pub params: DMatrix<f64>,
}

/// A linear functional on low-degree polynomials in `(w, Π)`, stored as one
/// value per distinct reduced moment of its basis.
///
/// Values that the functional cannot supply (for instance degree-3 moments
/// after conditioning a degree-2 functional) are absent and evaluating a
/// polynomial that needs them fails with [`MomentError::DegreeTooHigh`].
#[derive(Debug, Clone)]
pub struct Pseudoexpectation {
    basis: Arc<MonomialBasis>,
    degree: usize,
    values: Vec<Option<f64>>,
    tolerance: f64,
}

impl Pseudoexpectation {
    /// Validates a moment matrix over `basis` and extracts its moments.
    ///
    /// Checks normalisation, symmetry, agreement of entries that reduce to
    /// the same monomial (all within `tolerance`) and that the spectrum is
    /// bounded below by `-tolerance`. Tied entries are averaged and the
    /// matrix rescaled so that `pE[1] = 1` exactly.
    pub fn from_moment_matrix(
        basis: Arc<MonomialBasis>,
        matrix: &DMatrix<f64>,
        tolerance: f64,
    ) -> Result<Self, MomentError> {
        let n = basis.len();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(MomentError::DimensionMismatch {
                expected: n,
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        if !matrix.iter().all(|v| v.is_finite()) {
            return Err(MomentError::Invalid("moment matrix has non-finite entries".into()));
        }
        let norm = matrix[(0, 0)];
        if (norm - 1.0).abs() > tolerance {
            return Err(MomentError::Invalid(format!(
                "normalisation pE[1] = {norm}, expected 1"
            )));
        }

        let m = basis.num_moments();
        let mut sum = vec![0.0; m];
        let mut count = vec![0usize; m];
        let mut lo = vec![f64::INFINITY; m];
        let mut hi = vec![f64::NEG_INFINITY; m];
        for r in 0..n {
            for c in 0..n {
                let v = matrix[(r, c)];
                let id = basis.entry_moment(r, c);
                sum[id] += v;
                count[id] += 1;
                lo[id] = lo[id].min(v);
                hi[id] = hi[id].max(v);
            }
        }
        for id in 0..m {
            if hi[id] - lo[id] > 2.0 * tolerance {
                let (r, c) = basis.canonical_entry(id);
                return Err(MomentError::Invalid(format!(
                    "entries reducing to {} disagree by {:.3e} (first at row {r}, col {c})",
                    basis.monomial_name(&basis.moments()[id]),
                    hi[id] - lo[id]
                )));
            }
        }
        let values = (0..m)
            .map(|id| Some(sum[id] / count[id] as f64 / norm))
            .collect();
        let pe = Self {
            degree: basis.degree(),
            basis,
            values,
            tolerance,
        };
        let min_eig = pe.min_eigenvalue()?;
        if min_eig < -tolerance {
            return Err(MomentError::NotPsd {
                min_eigenvalue: min_eig,
                tolerance,
            });
        }
        Ok(pe)
    }

    /// The exact moments of a finite distribution over boolean `w` and real `Π`.
    pub fn from_distribution(
        basis: Arc<MonomialBasis>,
        atoms: &[Atom],
    ) -> Result<Self, MomentError> {
        if atoms.is_empty() {
            return Err(MomentError::Invalid("distribution has no atoms".into()));
        }
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if !(total > 0.0) || atoms.iter().any(|a| a.weight < 0.0) {
            return Err(MomentError::Invalid("atom weights must be nonnegative with positive sum".into()));
        }
        let (n, d) = (basis.num_samples(), basis.dim());
        for atom in atoms {
            if atom.selectors.len() != n {
                return Err(MomentError::DimensionMismatch {
                    expected: n,
                    found: atom.selectors.len(),
                });
            }
            if atom.params.nrows() != d || atom.params.ncols() != d {
                return Err(MomentError::DimensionMismatch {
                    expected: d,
                    found: atom.params.nrows(),
                });
            }
        }
        let values = basis
            .moments()
            .iter()
            .map(|mono| {
                let v: f64 = atoms
                    .iter()
                    .map(|a| a.weight * atom_value(&basis, a, mono))
                    .sum();
                Some(v / total)
            })
            .collect();
        Ok(Self {
            degree: basis.degree(),
            basis,
            values,
            tolerance: DEFAULT_PSD_TOLERANCE,
        })
    }

    /// Point mass at `(w, Π)`.
    pub fn atomic(
        basis: Arc<MonomialBasis>,
        selectors: &[bool],
        params: &DMatrix<f64>,
    ) -> Result<Self, MomentError> {
        Self::from_distribution(
            basis,
            &[Atom {
                weight: 1.0,
                selectors: selectors.to_vec(),
                params: params.clone(),
            }],
        )
    }

    pub fn basis(&self) -> &Arc<MonomialBasis> {
        &self.basis
    }

    /// Degree of polynomials on which the functional is defined.
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    /// Value of the basis moment with id `moment`, if defined.
    pub fn value(&self, moment: usize) -> Option<f64> {
        self.values.get(moment).copied().flatten()
    }

    /// `pE[m]` for a reduced monomial.
    pub fn moment(&self, monomial: &Monomial) -> Result<f64, MomentError> {
        self.basis
            .moment_id(monomial)
            .and_then(|id| self.values[id])
            .ok_or_else(|| MomentError::DegreeTooHigh(self.basis.monomial_name(monomial)))
    }

    /// `pE[m]` for the product of raw variable ids.
    pub fn moment_of(&self, ids: &[VarId]) -> Result<f64, MomentError> {
        self.moment(&self.basis.reduce(ids.iter().copied()))
    }

    /// `Σ coeff · pE[monomial]` after reduction.
    pub fn evaluate(&self, p: &PolynomialExpr) -> Result<f64, MomentError> {
        p.terms().iter().try_fold(0.0, |acc, (c, ids)| {
            if *c == 0.0 {
                return Ok(acc);
            }
            Ok(acc + c * self.moment_of(ids)?)
        })
    }

    /// The functional conditioned on `w_i = value`:
    /// `pE[p · w_i] / pE[w_i]` (or with `1 - w_i`), one degree lower.
    pub fn condition(&self, i: usize, value: bool, floor: f64) -> Result<Self, MomentError> {
        if i >= self.basis.num_samples() {
            return Err(MomentError::Invalid(format!("sample index {i} out of range")));
        }
        if self.degree == 0 {
            return Err(MomentError::DegreeTooHigh(format!("w{}", i + 1)));
        }
        let w = self.basis.selector(i);
        let p1 = self.moment(&self.basis.var(w))?;
        let normaliser = if value { p1 } else { 1.0 - p1 };
        if !(normaliser > floor) {
            return Err(MomentError::DegenerateConditioning {
                index: i,
                mass: normaliser,
                floor,
            });
        }
        let values = self
            .basis
            .moments()
            .iter()
            .enumerate()
            .map(|(id, mono)| {
                let with_w = self.basis.reduce(mono.ids().iter().copied().chain([w]));
                let joint = self.basis.moment_id(&with_w).and_then(|j| self.values[j])?;
                if value {
                    Some(joint / normaliser)
                } else {
                    let base = self.values[id]?;
                    Some((base - joint) / normaliser)
                }
            })
            .collect();
        Ok(Self {
            basis: Arc::clone(&self.basis),
            degree: self.degree - 1,
            values,
            tolerance: self.tolerance,
        })
    }

    /// `pE[v vᵀ] - pE[v] pE[v]ᵀ` over the listed degree-1 variables.
    pub fn pseudo_covariance(&self, vars: &[VarId]) -> Result<DMatrix<f64>, MomentError> {
        let means: Vec<f64> = vars
            .iter()
            .map(|&v| self.moment_of(&[v]))
            .collect::<Result<_, _>>()?;
        let k = vars.len();
        let mut cov = DMatrix::zeros(k, k);
        for a in 0..k {
            for b in 0..=a {
                let second = self.moment_of(&[vars[a], vars[b]])?;
                let c = second - means[a] * means[b];
                cov[(a, b)] = c;
                cov[(b, a)] = c;
            }
        }
        Ok(cov)
    }

    /// The moment matrix over the full row basis.
    pub fn moment_matrix(&self) -> Result<DMatrix<f64>, MomentError> {
        let n = self.basis.len();
        let mut m = DMatrix::zeros(n, n);
        for r in 0..n {
            for c in 0..=r {
                let id = self.basis.entry_moment(r, c);
                let v = self.values[id].ok_or_else(|| {
                    MomentError::DegreeTooHigh(self.basis.monomial_name(&self.basis.moments()[id]))
                })?;
                m[(r, c)] = v;
                m[(c, r)] = v;
            }
        }
        Ok(m)
    }

    pub fn min_eigenvalue(&self) -> Result<f64, MomentError> {
        let m = self.moment_matrix()?;
        Ok(m.symmetric_eigenvalues().min())
    }

    /// `pE[w_i]` for every sample.
    pub fn selector_means(&self) -> Result<Vec<f64>, MomentError> {
        (0..self.basis.num_samples())
            .map(|i| self.moment_of(&[self.basis.selector(i)]))
            .collect()
    }

    /// The `d × d` matrix `pE[Π]`.
    pub fn param_means(&self) -> Result<DMatrix<f64>, MomentError> {
        let d = self.basis.dim();
        let mut out = DMatrix::zeros(d, d);
        for a in 0..d {
            for b in a..d {
                let v = self.moment_of(&[self.basis.param(a, b)])?;
                out[(a, b)] = v;
                out[(b, a)] = v;
            }
        }
        Ok(out)
    }

    /// The `d × d` matrix `pE[w_i Π]`.
    pub fn localized_params(&self, i: usize) -> Result<DMatrix<f64>, MomentError> {
        let d = self.basis.dim();
        let w = self.basis.selector(i);
        let mut out = DMatrix::zeros(d, d);
        for a in 0..d {
            for b in a..d {
                let v = self.moment_of(&[w, self.basis.param(a, b)])?;
                out[(a, b)] = v;
                out[(b, a)] = v;
            }
        }
        Ok(out)
    }
}

fn atom_value(basis: &MonomialBasis, atom: &Atom, mono: &Monomial) -> f64 {
    use super::basis::Indeterminate;
    mono.ids()
        .iter()
        .map(|&v| match basis.decode(v) {
            Indeterminate::One => 1.0,
            Indeterminate::Selector(i) => {
                if atom.selectors[i] {
                    1.0
                } else {
                    0.0
                }
            }
            Indeterminate::Param(a, b) => atom.params[(a, b)],
        })
        .product()
}
