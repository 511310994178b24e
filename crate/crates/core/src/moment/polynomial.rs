use std::ops::{Add, Mul, Neg, Sub};

use super::basis::VarId;

/// A polynomial as a list of `(coefficient, monomial)` terms.
///
/// Monomials are kept as raw multisets of variable ids; boolean and
/// symmetry reduction happen when the polynomial is evaluated against a
/// basis, so `w_i² - w_i` is representable and evaluates to zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PolynomialExpr {
    terms: Vec<(f64, Vec<VarId>)>,
}

impl PolynomialExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self {
            terms: vec![(c, Vec::new())],
        }
    }

    pub fn var(id: VarId) -> Self {
        Self {
            terms: vec![(1.0, vec![id])],
        }
    }

    pub fn monomial(coeff: f64, ids: Vec<VarId>) -> Self {
        Self {
            terms: vec![(coeff, ids)],
        }
    }

    /// `Σ coeffs[j] · vars[j]`.
    pub fn linear(coeffs: &[f64], vars: &[VarId]) -> Self {
        assert_eq!(coeffs.len(), vars.len());
        Self {
            terms: coeffs
                .iter()
                .zip(vars)
                .map(|(&c, &v)| (c, vec![v]))
                .collect(),
        }
    }

    pub fn push_term(&mut self, coeff: f64, ids: Vec<VarId>) {
        self.terms.push((coeff, ids));
    }

    pub fn terms(&self) -> &[(f64, Vec<VarId>)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|(c, _)| *c == 0.0)
    }

    /// Largest raw (unreduced) monomial degree.
    pub fn degree(&self) -> usize {
        self.terms.iter().map(|(_, m)| m.len()).max().unwrap_or(0)
    }

    pub fn scale(mut self, s: f64) -> Self {
        for (c, _) in &mut self.terms {
            *c *= s;
        }
        self
    }

    pub fn square(&self) -> Self {
        self * self
    }

    /// Substitutes real values for every variable.
    pub fn substitute(&self, value: impl Fn(VarId) -> f64) -> f64 {
        self.terms
            .iter()
            .map(|(c, m)| c * m.iter().map(|&v| value(v)).product::<f64>())
            .sum()
    }
}

impl Add for PolynomialExpr {
    type Output = PolynomialExpr;

    fn add(mut self, rhs: PolynomialExpr) -> PolynomialExpr {
        self.terms.extend(rhs.terms);
        self
    }
}

impl Sub for PolynomialExpr {
    type Output = PolynomialExpr;

    fn sub(self, rhs: PolynomialExpr) -> PolynomialExpr {
        self + (-rhs)
    }
}

impl Neg for PolynomialExpr {
    type Output = PolynomialExpr;

    fn neg(self) -> PolynomialExpr {
        self.scale(-1.0)
    }
}

impl Mul for &PolynomialExpr {
    type Output = PolynomialExpr;

    fn mul(self, rhs: &PolynomialExpr) -> PolynomialExpr {
        let mut terms = Vec::with_capacity(self.terms.len() * rhs.terms.len());
        for (a, ma) in &self.terms {
            for (b, mb) in &rhs.terms {
                let mut ids = ma.clone();
                ids.extend_from_slice(mb);
                terms.push((a * b, ids));
            }
        }
        PolynomialExpr { terms }
    }
}

impl Mul for PolynomialExpr {
    type Output = PolynomialExpr;

    fn mul(self, rhs: PolynomialExpr) -> PolynomialExpr {
        &self * &rhs
    }
}
