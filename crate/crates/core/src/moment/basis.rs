use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::MomentError;

/// Identifier of an indeterminate.
///
/// Id `0` is the constant `1`, ids `1..=N` are the selector variables
/// `w_1..w_N`, and the remaining ids enumerate the upper triangle `π_ab`
/// (`a ≤ b`) of the symmetric parameter matrix in row-major order.
pub type VarId = u32;

/// The id reserved for the constant monomial.
pub const CONSTANT: VarId = 0;

/// A decoded indeterminate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Indeterminate {
    One,
    /// Selector `w_i`, zero-based sample index.
    Selector(usize),
    /// Parameter entry `π_ab` with `a ≤ b`, zero-based.
    Param(usize, usize),
}

/// A reduced monomial: a sorted multiset of variable ids with selector ids
/// appearing at most once and the constant id never stored.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Monomial(Vec<VarId>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn ids(&self) -> &[VarId] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }
}

/// Monomial bookkeeping for the relaxation: the variable layout, the row
/// basis of the moment matrix, and the table of distinct moments reachable
/// as products of two rows.
#[derive(Debug, Clone)]
pub struct MonomialBasis {
    num_samples: usize,
    dim: usize,
    degree: usize,
    rows: Vec<Monomial>,
    row_index: HashMap<Monomial, usize>,
    moments: Vec<Monomial>,
    moment_index: HashMap<Monomial, usize>,
    /// `entry_moment[r * n + c]` is the moment id of row product `r · c`.
    entry_moment: Vec<usize>,
    /// First `(row, col)` with `row ≥ col` realising each moment.
    canonical_entry: Vec<(usize, usize)>,
}

impl MonomialBasis {
    /// Builds the basis whose rows are all reduced monomials of degree at
    /// most `degree / 2` in `N` selectors and `d(d+1)/2` parameter entries.
    pub fn new(num_samples: usize, dim: usize, degree: usize) -> Result<Self, MomentError> {
        if degree < 2 {
            return Err(MomentError::InvalidBasis(format!(
                "relaxation degree must be at least 2, got {degree}"
            )));
        }
        if dim == 0 {
            return Err(MomentError::InvalidBasis("dimension must be positive".into()));
        }
        let num_vars = 1 + num_samples + dim * (dim + 1) / 2;
        if num_vars > VarId::MAX as usize {
            return Err(MomentError::InvalidBasis("too many indeterminates".into()));
        }
        let half = degree / 2;

        let mut rows = vec![Monomial::one()];
        let mut row_index = HashMap::new();
        row_index.insert(Monomial::one(), 0);
        let mut frontier = vec![Vec::<VarId>::new()];
        for _ in 0..half {
            let mut next = Vec::new();
            for base in &frontier {
                let start = base.last().copied().unwrap_or(1);
                for v in start..num_vars as VarId {
                    let mut ids = base.clone();
                    ids.push(v);
                    next.push(ids);
                }
            }
            for ids in &next {
                let m = reduce_with(num_samples, ids.iter().copied());
                if !row_index.contains_key(&m) {
                    row_index.insert(m.clone(), rows.len());
                    rows.push(m);
                }
            }
            frontier = next;
        }

        let n = rows.len();
        let mut moments = Vec::new();
        let mut moment_index = HashMap::new();
        let mut entry_moment = vec![0usize; n * n];
        let mut canonical_entry = Vec::new();
        for r in 0..n {
            for c in 0..=r {
                let m = reduce_with(
                    num_samples,
                    rows[r].ids().iter().chain(rows[c].ids()).copied(),
                );
                let id = *moment_index.entry(m.clone()).or_insert_with(|| {
                    moments.push(m);
                    canonical_entry.push((r, c));
                    moments.len() - 1
                });
                entry_moment[r * n + c] = id;
                entry_moment[c * n + r] = id;
            }
        }

        Ok(Self {
            num_samples,
            dim,
            degree: 2 * half,
            rows,
            row_index,
            moments,
            moment_index,
            entry_moment,
            canonical_entry,
        })
    }

    pub fn num_samples(&self) -> usize {
        self.num_samples
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The (even) degree of the moments this basis spans.
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Monomial] {
        &self.rows
    }

    pub fn row(&self, index: usize) -> &Monomial {
        &self.rows[index]
    }

    pub fn row_of(&self, monomial: &Monomial) -> Option<usize> {
        self.row_index.get(monomial).copied()
    }

    pub fn num_vars(&self) -> usize {
        1 + self.num_samples + self.dim * (self.dim + 1) / 2
    }

    pub fn num_moments(&self) -> usize {
        self.moments.len()
    }

    pub fn moments(&self) -> &[Monomial] {
        &self.moments
    }

    pub fn moment_id(&self, monomial: &Monomial) -> Option<usize> {
        self.moment_index.get(monomial).copied()
    }

    /// Moment id of the entry `(row, col)` of the moment matrix.
    pub fn entry_moment(&self, row: usize, col: usize) -> usize {
        self.entry_moment[row * self.rows.len() + col]
    }

    pub fn canonical_entry(&self, moment: usize) -> (usize, usize) {
        self.canonical_entry[moment]
    }

    /// The `(row, col)` entry realising `monomial`, if it is a product of two rows.
    pub fn entry_for(&self, monomial: &Monomial) -> Option<(usize, usize)> {
        self.moment_id(monomial).map(|id| self.canonical_entry[id])
    }

    /// Id of the selector `w_i` (zero-based `i`).
    pub fn selector(&self, i: usize) -> VarId {
        debug_assert!(i < self.num_samples);
        (1 + i) as VarId
    }

    /// Id of `π_ab`; `π_ba` maps to the same id.
    pub fn param(&self, a: usize, b: usize) -> VarId {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        debug_assert!(b < self.dim);
        // pairs (a', b') with a' < a: Σ_{a'<a} (d - a')
        let before = a * self.dim - a * a.saturating_sub(1) / 2;
        (1 + self.num_samples + before + (b - a)) as VarId
    }

    pub fn decode(&self, id: VarId) -> Indeterminate {
        let id = id as usize;
        if id == 0 {
            return Indeterminate::One;
        }
        if id <= self.num_samples {
            return Indeterminate::Selector(id - 1);
        }
        let mut rest = id - 1 - self.num_samples;
        for a in 0..self.dim {
            let span = self.dim - a;
            if rest < span {
                return Indeterminate::Param(a, a + rest);
            }
            rest -= span;
        }
        panic!("variable id {id} outside the basis");
    }

    pub fn is_selector(&self, id: VarId) -> bool {
        id >= 1 && (id as usize) <= self.num_samples
    }

    /// Human-readable name: `1`, `w3`, `pi_1_2` (one-based indices).
    pub fn var_name(&self, id: VarId) -> String {
        match self.decode(id) {
            Indeterminate::One => "1".to_string(),
            Indeterminate::Selector(i) => format!("w{}", i + 1),
            Indeterminate::Param(a, b) => format!("pi_{}_{}", a + 1, b + 1),
        }
    }

    pub fn monomial_name(&self, m: &Monomial) -> String {
        if m.is_one() {
            return "1".to_string();
        }
        m.ids()
            .iter()
            .map(|&v| self.var_name(v))
            .collect::<Vec<_>>()
            .join("*")
    }

    /// Applies boolean (`w_i² = w_i`) and constant reduction.
    pub fn reduce<I: IntoIterator<Item = VarId>>(&self, ids: I) -> Monomial {
        reduce_with(self.num_samples, ids)
    }

    /// Monomial of a single variable.
    pub fn var(&self, id: VarId) -> Monomial {
        self.reduce([id])
    }
}

fn reduce_with<I: IntoIterator<Item = VarId>>(num_samples: usize, ids: I) -> Monomial {
    let mut v: Vec<VarId> = ids.into_iter().filter(|&id| id != CONSTANT).collect();
    v.sort_unstable();
    let mut out: Vec<VarId> = Vec::with_capacity(v.len());
    for id in v {
        let selector = (id as usize) <= num_samples;
        if selector && out.last() == Some(&id) {
            continue;
        }
        out.push(id);
    }
    Monomial(out)
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        let parts: Vec<String> = self.0.iter().map(|v| format!("x{v}")).collect();
        write!(f, "{}", parts.join("*"))
    }
}
