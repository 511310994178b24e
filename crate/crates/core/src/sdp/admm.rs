//! Douglas–Rachford splitting between the affine set `{x : Ax = b}` and the
//! cone `K = PSD blocks × R₊` (one slack per inequality), in the packed
//! coordinates where the Frobenius inner product is the Euclidean one.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};

use super::psd::{to_dmatrix, PsdWork};
use super::{ConicProblem, ConicSolution, SdpError, SolveStatus, SolverSettings};

const SQRT2: f64 = std::f64::consts::SQRT_2;
const GRAM_REGULARIZATION: f64 = 1e-10;
const CHECK_EVERY: usize = 10;
const ADAPT_EVERY: usize = 100;
const INFEASIBILITY_EVERY: usize = 200;
const INFEASIBILITY_START: usize = 1000;

/// Row-compressed constraint matrix with unit-norm rows.
struct Rows {
    start: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
}

impl Rows {
    fn len(&self) -> usize {
        self.start.len() - 1
    }

    fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.start[i], self.start[i + 1]);
        (&self.col[a..b], &self.val[a..b])
    }

    fn mul(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *o = cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum();
        }
    }

    /// `out += scale · Aᵀ w`.
    fn mul_t_add(&self, w: &[f64], scale: f64, out: &mut [f64]) {
        for (i, &wi) in w.iter().enumerate() {
            let (cols, vals) = self.row(i);
            let s = scale * wi;
            for (&c, &v) in cols.iter().zip(vals) {
                out[c] += s * v;
            }
        }
    }
}

struct Layout {
    offsets: Vec<usize>,
    sizes: Vec<usize>,
    num_entries: usize,
    num_vars: usize,
}

impl Layout {
    fn new(problem: &ConicProblem) -> Self {
        let mut offsets = Vec::with_capacity(problem.blocks.len());
        let mut off = 0;
        for &n in &problem.blocks {
            offsets.push(off);
            off += n * (n + 1) / 2;
        }
        Self {
            offsets,
            sizes: problem.blocks.clone(),
            num_entries: off,
            num_vars: off + problem.inequalities.len(),
        }
    }

    fn var(&self, block: usize, row: usize, col: usize) -> usize {
        let (r, c) = if row >= col { (row, col) } else { (col, row) };
        self.offsets[block] + r * (r + 1) / 2 + c
    }

    fn segment<'a>(&self, x: &'a [f64], block: usize) -> &'a [f64] {
        let n = self.sizes[block];
        &x[self.offsets[block]..self.offsets[block] + n * (n + 1) / 2]
    }
}

/// Projection onto `K`.
struct Cone {
    works: Vec<PsdWork>,
}

impl Cone {
    fn new(layout: &Layout) -> Self {
        Self {
            works: layout.sizes.iter().map(|&n| PsdWork::new(n)).collect(),
        }
    }

    fn project(&mut self, layout: &Layout, x: &mut [f64]) -> Result<(), SdpError> {
        for (b, work) in self.works.iter_mut().enumerate() {
            let n = layout.sizes[b];
            let off = layout.offsets[b];
            work.project(&mut x[off..off + n * (n + 1) / 2], b)?;
        }
        for v in &mut x[layout.num_entries..] {
            *v = v.max(0.0);
        }
        Ok(())
    }
}

struct Residuals {
    primal: f64,
    dual: f64,
    gap: f64,
    pobj: f64,
    dobj: f64,
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `problem` to the requested accuracy.
///
/// The result carries its own status; an `Err` is returned only for
/// malformed input or a numerical breakdown of the factorisation.
pub fn solve(problem: &ConicProblem, settings: &SolverSettings) -> Result<ConicSolution, SdpError> {
    problem.validate()?;
    if !(settings.tol > 0.0) || settings.max_iter == 0 {
        return Err(SdpError::InvalidProblem("tol must be positive and max_iter at least 1".into()));
    }
    if !(settings.relaxation > 0.0 && settings.relaxation < 2.0) || !(settings.rho > 0.0) {
        return Err(SdpError::InvalidProblem("relaxation must lie in (0, 2) and rho be positive".into()));
    }

    let layout = Layout::new(problem);
    let n = layout.num_vars;
    let n_eq = problem.equalities.len();

    // assemble unit-norm rows; `kept[i]` maps constraint i to its row
    let mut start = vec![0];
    let mut col = Vec::new();
    let mut val = Vec::new();
    let mut b = Vec::new();
    let mut row_norm = Vec::new();
    let mut kept = Vec::new();
    let mut b_orig_sq = 0.0;
    let constraints = problem.equalities.iter().chain(&problem.inequalities);
    for (ci, con) in constraints.enumerate() {
        b_orig_sq += con.rhs * con.rhs;
        let mut entries: Vec<(usize, f64)> = con
            .form
            .terms()
            .iter()
            .map(|t| {
                let v = if t.row == t.col { t.value } else { SQRT2 * t.value };
                (layout.var(t.block, t.row, t.col), v)
            })
            .collect();
        if ci >= n_eq {
            entries.push((layout.num_entries + ci - n_eq, -1.0));
        }
        entries.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
        for (c, v) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == c => last.1 += v,
                _ => merged.push((c, v)),
            }
        }
        merged.retain(|e| e.1 != 0.0);
        let nrm = merged.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
        if nrm == 0.0 {
            if con.rhs != 0.0 {
                // 0 = rhs with rhs ≠ 0
                return Ok(trivially_infeasible(problem, &layout));
            }
            kept.push(None);
            continue;
        }
        kept.push(Some(row_norm.len()));
        for (c, v) in merged {
            col.push(c);
            val.push(v / nrm);
        }
        start.push(col.len());
        b.push(con.rhs / nrm);
        row_norm.push(nrm);
    }
    let rows = Rows { start, col, val };
    let m = rows.len();
    let b_orig_norm = b_orig_sq.sqrt();

    let mut c_orig = vec![0.0; n];
    for t in problem.objective.terms() {
        let v = if t.row == t.col { t.value } else { SQRT2 * t.value };
        c_orig[layout.var(t.block, t.row, t.col)] += v;
    }
    let c_norm = norm(&c_orig);
    let sigma = if c_norm > 0.0 { 1.0 / c_norm } else { 1.0 };
    let c: Vec<f64> = c_orig.iter().map(|v| v * sigma).collect();

    let gram = factor_gram(&rows, n)?;
    let solve_gram = |rhs: &mut Vec<f64>| {
        if m > 0 {
            let mut mat = Mat::from_fn(m, 1, |i, _| rhs[i]);
            gram.as_ref().unwrap().solve_in_place(mat.as_mut());
            for (i, r) in rhs.iter_mut().enumerate() {
                *r = mat[(i, 0)];
            }
        }
    };

    let mut cone = Cone::new(&layout);
    let alpha = settings.relaxation;
    let mut rho = settings.rho;
    let mut x = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; m];
    let mut scratch_m = vec![0.0; m];
    let mut scratch_n = vec![0.0; n];
    let mut lambda_snapshot: Option<Vec<f64>> = None;
    let mut last = None;
    let mut status = SolveStatus::MaxIter;
    let mut iterations = settings.max_iter;

    for k in 1..=settings.max_iter {
        for i in 0..n {
            v[i] = z[i] - u[i] - c[i] / rho;
        }
        rows.mul(&v, &mut w);
        for i in 0..m {
            w[i] -= b[i];
        }
        solve_gram(&mut w);
        x.copy_from_slice(&v);
        rows.mul_t_add(&w, -1.0, &mut x);
        for i in 0..n {
            let xh = alpha * x[i] + (1.0 - alpha) * z[i];
            scratch_n[i] = xh;
            z[i] = xh + u[i];
        }
        cone.project(&layout, &mut z)?;
        for i in 0..n {
            u[i] += scratch_n[i] - z[i];
        }

        if k % CHECK_EVERY == 0 || k == settings.max_iter {
            // primal residual in the original row scaling
            rows.mul(&z, &mut scratch_m);
            let mut pr = 0.0;
            for i in 0..m {
                let r = (scratch_m[i] - b[i]) * row_norm[i];
                pr += r * r;
            }
            let primal = pr.sqrt() / (1.0 + b_orig_norm);
            // y = -ρw, S = -ρu: c - Aᵀy - S = c + ρAᵀw + ρu
            for i in 0..n {
                scratch_n[i] = c[i] + rho * u[i];
            }
            rows.mul_t_add(&w, rho, &mut scratch_n);
            let dual = norm(&scratch_n) / sigma / (1.0 + c_norm);
            let pobj = dot(&c_orig, &z);
            let dobj = -rho * dot(&b, &w) / sigma;
            let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
            if settings.log_every > 0 && k % settings.log_every == 0 {
                eprintln!(
                    "iter {k:6}  pres {primal:.2e}  dres {dual:.2e}  gap {gap:.2e}  obj {pobj:.6e}  rho {rho:.2e}"
                );
            }
            let done = primal <= settings.tol && dual <= settings.tol && gap <= settings.tol;
            last = Some(Residuals {
                primal,
                dual,
                gap,
                pobj,
                dobj,
            });
            if done {
                status = SolveStatus::Optimal;
                iterations = k;
                break;
            }
            if settings.adaptive_rho && k % ADAPT_EVERY == 0 {
                let r = last.as_ref().unwrap();
                let factor = if r.primal > 10.0 * r.dual {
                    2.0
                } else if r.dual > 10.0 * r.primal {
                    0.5
                } else {
                    1.0
                };
                if factor != 1.0 {
                    rho *= factor;
                    for ui in &mut u {
                        *ui /= factor;
                    }
                }
            }
        }

        if k >= INFEASIBILITY_START && k % INFEASIBILITY_EVERY == 0 {
            let lambda: Vec<f64> = u.iter().map(|ui| rho * ui).collect();
            if let Some(prev) = &lambda_snapshot {
                let g: Vec<f64> = lambda.iter().zip(prev).map(|(a, p)| a - p).collect();
                if infeasibility_certified(&rows, &b, &g, &layout, &mut cone, &solve_gram)? {
                    status = SolveStatus::Infeasible;
                    iterations = k;
                    break;
                }
            }
            lambda_snapshot = Some(lambda);
        }
    }

    // the final iteration always records residuals
    let last = last.expect("residuals are checked on the last iteration");

    let blocks: Vec<_> = (0..layout.sizes.len())
        .map(|bi| to_dmatrix(layout.segment(&z, bi), layout.sizes[bi]))
        .collect();
    let slacks = problem
        .inequalities
        .iter()
        .map(|con| con.form.evaluate(&blocks) - con.rhs)
        .collect();
    let duals = kept
        .iter()
        .map(|k| match k {
            Some(r) => -rho * w[*r] / (row_norm[*r] * sigma),
            None => 0.0,
        })
        .collect();
    Ok(ConicSolution {
        blocks,
        slacks,
        duals,
        objective: last.pobj,
        dual_objective: last.dobj,
        primal_residual: last.primal,
        dual_residual: last.dual,
        gap: last.gap,
        iterations,
        status,
    })
}

type Gram = Option<faer::sparse::linalg::solvers::Llt<usize, f64>>;

/// Sparse Cholesky factor of `A Aᵀ + εI`.
fn factor_gram(rows: &Rows, n: usize) -> Result<Gram, SdpError> {
    let m = rows.len();
    if m == 0 {
        return Ok(None);
    }
    // column-wise view
    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for i in 0..m {
        let (cols, vals) = rows.row(i);
        for (&c, &v) in cols.iter().zip(vals) {
            by_col[c].push((i, v));
        }
    }
    let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
    for entries in &by_col {
        for (a, &(i, vi)) in entries.iter().enumerate() {
            for &(k, vk) in &entries[..=a] {
                // rows are pushed in increasing order, so i ≥ k
                pairs.push((i, k, vi * vk));
            }
        }
    }
    pairs.sort_by(|p, q| (p.1, p.0).cmp(&(q.1, q.0)));
    let mut triplets: Vec<Triplet<usize, usize, f64>> = Vec::with_capacity(pairs.len());
    for (i, k, v) in pairs {
        match triplets.last_mut() {
            Some(t) if t.row == i && t.col == k => t.val += v,
            _ => triplets.push(Triplet::new(i, k, v)),
        }
    }
    for t in &mut triplets {
        if t.row == t.col {
            t.val += GRAM_REGULARIZATION;
        }
    }
    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(m, m, &triplets)
        .map_err(|e| SdpError::Factorization(format!("{e:?}")))?;
    let llt = mat
        .sp_cholesky(Side::Lower)
        .map_err(|e| SdpError::Factorization(format!("{e:?}")))?;
    Ok(Some(llt))
}

/// Tests whether the drift `g` of the dual iterates yields a Farkas
/// certificate: some `y` with `b·y = -1` and `Aᵀy` within `1e-6` of `K`.
fn infeasibility_certified(
    rows: &Rows,
    b: &[f64],
    g: &[f64],
    layout: &Layout,
    cone: &mut Cone,
    solve_gram: &impl Fn(&mut Vec<f64>),
) -> Result<bool, SdpError> {
    let gn = norm(g);
    if !(gn > 1e-12) {
        return Ok(false);
    }
    let mut ybar = vec![0.0; rows.len()];
    rows.mul(g, &mut ybar);
    solve_gram(&mut ybar);
    let by = dot(b, &ybar);
    if by == 0.0 {
        return Ok(false);
    }
    // normalise so that b·y = -1
    let scale = -1.0 / by;
    let mut h = vec![0.0; layout.num_vars];
    rows.mul_t_add(&ybar, scale, &mut h);
    let mut projected = h.clone();
    cone.project(layout, &mut projected)?;
    let dist = h
        .iter()
        .zip(&projected)
        .map(|(a, p)| (a - p) * (a - p))
        .sum::<f64>()
        .sqrt();
    Ok(dist <= 1e-6)
}

fn trivially_infeasible(problem: &ConicProblem, layout: &Layout) -> ConicSolution {
    let blocks: Vec<_> = layout
        .sizes
        .iter()
        .map(|&n| nalgebra::DMatrix::zeros(n, n))
        .collect();
    ConicSolution {
        slacks: problem
            .inequalities
            .iter()
            .map(|con| con.form.evaluate(&blocks) - con.rhs)
            .collect(),
        blocks,
        duals: vec![0.0; problem.equalities.len() + problem.inequalities.len()],
        objective: 0.0,
        dual_objective: 0.0,
        primal_residual: 1.0,
        dual_residual: 0.0,
        gap: 0.0,
        iterations: 0,
        status: SolveStatus::Infeasible,
    }
}
