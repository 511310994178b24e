#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sossr_core::moment::{Atom, MonomialBasis, PolynomialExpr, Pseudoexpectation, VarId};
use sossr_core::sdp::{ConicProblem, LinearForm};

pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut TestRng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn random_symmetric(rng: &mut TestRng, n: usize) -> DMatrix<f64> {
    let g = gaussian(rng, n, n);
    (&g + g.transpose()) * 0.5
}

/// Orthonormal columns spanning the same space as `m`.
pub fn orthonormalize(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().qr().q()
}

pub fn random_orthonormal(rng: &mut TestRng, d: usize, k: usize) -> DMatrix<f64> {
    orthonormalize(&gaussian(rng, d, k))
}

pub fn projection(u: &DMatrix<f64>) -> DMatrix<f64> {
    u * u.transpose()
}

pub fn random_projection(rng: &mut TestRng, d: usize, k: usize) -> DMatrix<f64> {
    projection(&random_orthonormal(rng, d, k))
}

/// A rank-`k` projection obtained by tilting `u` by `scale` Gaussian noise.
pub fn tilted_projection(rng: &mut TestRng, u: &DMatrix<f64>, scale: f64) -> DMatrix<f64> {
    let noise = gaussian(rng, u.nrows(), u.ncols()) * scale;
    projection(&orthonormalize(&(u + noise)))
}

pub fn log_uniform(rng: &mut TestRng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

pub fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.component_mul(b).sum()
}

pub fn frob_sq(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let mut s = 0.0;
    for r in 0..a.nrows() {
        for c in 0..a.ncols() {
            let e = a[(r, c)] - b[(r, c)];
            s += e * e;
        }
    }
    s
}

// ---------------------------------------------------------------------------
// lemma instances

/// Eigenvalues in `[0, 1]` summing to `k`: shift uniform draws and clip.
fn capped_simplex(rng: &mut TestRng, d: usize, k: usize) -> Vec<f64> {
    let u: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
    let total = |t: f64| u.iter().map(|x| (x + t).clamp(0.0, 1.0)).sum::<f64>();
    let (mut lo, mut hi) = (-1.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) < k as f64 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    let mut lam: Vec<f64> = u.iter().map(|x| (x + t).clamp(0.0, 1.0)).collect();
    let err = k as f64 - lam.iter().sum::<f64>();
    // push the bisection residue into an interior eigenvalue
    if let Some(j) = lam.iter().position(|&l| l > 1e-3 && l < 1.0 - 1e-3) {
        lam[j] += err;
    }
    lam
}

/// Spectrum in [0, 1] summing to `k` whose top `k` entries fall short of 1
/// by `deficit` in total.
fn near_projection_spectrum(rng: &mut TestRng, d: usize, k: usize, deficit: f64) -> Vec<f64> {
    let split = |rng: &mut TestRng, n: usize| {
        let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect::<Vec<_>>()
    };
    let top = split(rng, k);
    let rest = split(rng, d - k);
    let mut lam: Vec<f64> = top.iter().map(|a| 1.0 - deficit * a).collect();
    lam.extend(rest.iter().map(|b| deficit * b));
    lam
}

pub struct EigenspaceInstance {
    pub m: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub k: usize,
    /// `1 - ⟨M, P⟩ / k`.
    pub eps: f64,
}

/// `M` with `Tr M = k`, `0 ⪯ M ⪯ I` and a rank-`k` projection `P` with
/// `⟨M, P⟩ ≥ k (1 - eps_max)`.
pub fn eigenspace_instance(rng: &mut TestRng, eps_max: f64) -> EigenspaceInstance {
    loop {
        let k = rng.random_range(1..=3);
        let d = rng.random_range(k + 1..=8);
        let lam = if rng.random_bool(0.5) {
            let deficit = k as f64 * eps_max * rng.random::<f64>();
            near_projection_spectrum(rng, d, k, deficit.min(0.9))
        } else {
            capped_simplex(rng, d, k)
        };
        let v = random_orthonormal(rng, d, d);
        let m = &v * DMatrix::from_diagonal(&DVector::from_vec(lam.clone())) * v.transpose();
        let m = (&m + m.transpose()) * 0.5;
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| lam[b].total_cmp(&lam[a]));
        // anchor either on the top eigenvectors or on a random subspace
        let anchor = if rng.random_bool(0.7) {
            DMatrix::from_columns(&order[..k].iter().map(|&j| v.column(j).into_owned()).collect::<Vec<_>>())
        } else {
            random_orthonormal(rng, d, k)
        };
        for _ in 0..50 {
            let scale = log_uniform(rng, 1e-3, 2.0);
            let p = tilted_projection(rng, &anchor, scale);
            let eps = 1.0 - inner(&m, &p) / k as f64;
            if eps <= eps_max {
                return EigenspaceInstance { m, p, k, eps };
            }
        }
    }
}

pub struct PairInstance {
    pub p: DMatrix<f64>,
    pub pi: DMatrix<f64>,
    pub k: usize,
}

/// Two rank-`k` projections at a random angle, sometimes nearly equal.
pub fn projection_pair(rng: &mut TestRng) -> PairInstance {
    let k = rng.random_range(1..=3);
    let d = rng.random_range(k..=8);
    let u = random_orthonormal(rng, d, k);
    let p = projection(&u);
    let pi = if rng.random_bool(0.5) {
        {
        let scale = log_uniform(rng, 1e-4, 3.0);
        tilted_projection(rng, &u, scale)
    }
    } else {
        random_projection(rng, d, k)
    };
    PairInstance { p, pi, k }
}

/// A pair with `‖P - PΠP‖² ≤ kγ`.
pub fn close_pair(rng: &mut TestRng, gamma: f64) -> PairInstance {
    loop {
        let k = rng.random_range(1..=3);
        let d = rng.random_range(k + 1..=8);
        let u = random_orthonormal(rng, d, k);
        let p = projection(&u);
        for _ in 0..50 {
            let scale = log_uniform(rng, 1e-3, 3.0);
            let pi = tilted_projection(rng, &u, scale);
            let ppp = &p * &pi * &p;
            if frob_sq(&p, &ppp) <= k as f64 * gamma {
                return PairInstance { p, pi, k };
            }
        }
    }
}

// ---------------------------------------------------------------------------
// pseudoexpectations

pub fn random_atom(rng: &mut TestRng, n: usize, d: usize, projections: bool) -> Atom {
    let params = if projections {
        let k = rng.random_range(1..=d);
        random_projection(rng, d, k)
    } else {
        random_symmetric(rng, d)
    };
    Atom {
        weight: rng.random::<f64>() + 0.05,
        selectors: (0..n).map(|_| rng.random_bool(0.5)).collect(),
        params,
    }
}

pub fn random_distribution(
    rng: &mut TestRng,
    basis: &Arc<MonomialBasis>,
    atoms: usize,
    projections: bool,
) -> Pseudoexpectation {
    let atoms: Vec<Atom> = (0..atoms)
        .map(|_| random_atom(rng, basis.num_samples(), basis.dim(), projections))
        .collect();
    Pseudoexpectation::from_distribution(Arc::clone(basis), &atoms).unwrap()
}

/// A valid degree-2 pseudoexpectation that is generally not the moment
/// sequence of any distribution: a rich mixture pushed along a random
/// direction of the moment space until just inside the PSD cone.
pub fn random_pseudoexpectation(rng: &mut TestRng) -> Pseudoexpectation {
    let n = rng.random_range(1..=4);
    let d = rng.random_range(1..=3);
    let basis = Arc::new(MonomialBasis::new(n, d, 2).unwrap());
    let atoms = basis.len() + rng.random_range(1..=6);
    let projections = rng.random_bool(0.5);
    let base = random_distribution(rng, &basis, atoms, projections);
    let m0 = base.moment_matrix().unwrap();
    if rng.random_bool(0.2) {
        return base;
    }
    let dir: Vec<f64> = (0..basis.num_moments())
        .map(|id| if basis.moments()[id].is_one() { 0.0 } else { rng.sample(StandardNormal) })
        .collect();
    let size = basis.len();
    let r = DMatrix::from_fn(size, size, |i, j| dir[basis.entry_moment(i, j)]);
    let min_eig = |t: f64| (&m0 + &r * t).symmetric_eigenvalues().min();
    let (mut lo, mut hi) = (0.0, 1.0);
    while min_eig(hi) > 0.0 && hi < 1e6 {
        hi *= 2.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if min_eig(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = lo * rng.random_range(0.5..0.999);
    Pseudoexpectation::from_moment_matrix(basis, &(&m0 + &r * t), 1e-9).unwrap()
}

/// A random unit-norm combination of the basis rows.
pub fn random_row_polynomial(rng: &mut TestRng, basis: &MonomialBasis) -> PolynomialExpr {
    let coeffs: Vec<f64> = basis.rows().iter().map(|_| rng.sample(StandardNormal)).collect();
    let norm = coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
    let mut p = PolynomialExpr::zero();
    for (row, c) in basis.rows().iter().zip(&coeffs) {
        p.push_term(c / norm, row.ids().to_vec());
    }
    p
}

/// A random polynomial of degree at most one in the basis variables.
pub fn random_linear(rng: &mut TestRng, basis: &MonomialBasis) -> PolynomialExpr {
    let vars: Vec<VarId> = (1..basis.num_vars() as VarId).collect();
    let coeffs: Vec<f64> = vars.iter().map(|_| rng.sample(StandardNormal)).collect();
    PolynomialExpr::linear(&coeffs, &vars) + PolynomialExpr::constant(rng.sample(StandardNormal))
}

// ---------------------------------------------------------------------------
// reference SDP

/// `min Σ⟨C_b, X_b⟩` subject to `Σ⟨A_b, X_b⟩ = b`, `Σ⟨G_b, X_b⟩ ≥ h`,
/// `X_b ⪰ 0`, with dense symmetric coefficient blocks.
#[derive(Debug, Clone)]
pub struct DenseSdp {
    pub sizes: Vec<usize>,
    pub objective: Vec<DMatrix<f64>>,
    pub equalities: Vec<(Vec<DMatrix<f64>>, f64)>,
    pub inequalities: Vec<(Vec<DMatrix<f64>>, f64)>,
}

fn form_of(blocks: &[DMatrix<f64>]) -> LinearForm {
    let mut f = LinearForm::new();
    for (b, m) in blocks.iter().enumerate() {
        for r in 0..m.nrows() {
            for c in 0..=r {
                if m[(r, c)] != 0.0 {
                    f.add_symmetric(b, r, c, m[(r, c)]);
                }
            }
        }
    }
    f
}

fn dot(a: &[DMatrix<f64>], x: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(x).map(|(a, x)| inner(a, x)).sum()
}

impl DenseSdp {
    pub fn to_conic(&self) -> ConicProblem {
        let mut p = ConicProblem::new();
        for &s in &self.sizes {
            p.add_block(s);
        }
        for (a, b) in &self.equalities {
            p.add_equality(form_of(a), *b);
        }
        for (g, h) in &self.inequalities {
            p.add_inequality(form_of(g), *h);
        }
        p.set_objective(form_of(&self.objective));
        p
    }

    pub fn value(&self, x: &[DMatrix<f64>]) -> f64 {
        dot(&self.objective, x)
    }
}

pub struct PlantedSdp {
    pub sdp: DenseSdp,
    pub optimum: f64,
}

/// A random SDP whose optimum is known from a planted KKT point: a
/// low-rank primal `X*`, a complementary dual slack `S*`, random
/// equality multipliers and a mix of active and inactive inequalities.
pub fn planted_sdp(rng: &mut TestRng) -> PlantedSdp {
    let nb = rng.random_range(1..=3);
    let sizes: Vec<usize> = (0..nb).map(|_| rng.random_range(1..=8)).collect();
    let total = rng.random_range(1..=10);
    let n_in = rng.random_range(0..=(total - 1).min(4));
    let n_eq = total - n_in;

    let mut x_star = Vec::new();
    let mut s_star = Vec::new();
    for &n in &sizes {
        let v = random_orthonormal(rng, n, n);
        let rank = rng.random_range(1..=n);
        let mut lx = vec![0.0; n];
        let mut ls = vec![0.0; n];
        for j in 0..n {
            if j < rank {
                lx[j] = rng.random_range(0.2..2.0);
            } else {
                ls[j] = rng.random_range(0.2..2.0);
            }
        }
        let build = |l: &[f64]| {
            let m = &v * DMatrix::from_diagonal(&DVector::from_column_slice(l)) * v.transpose();
            (&m + m.transpose()) * 0.5
        };
        x_star.push(build(&lx));
        s_star.push(build(&ls));
    }
    let random_blocks = |rng: &mut TestRng| -> Vec<DMatrix<f64>> {
        sizes.iter().map(|&n| random_symmetric(rng, n)).collect()
    };

    let mut c = s_star;
    let mut equalities = Vec::new();
    for _ in 0..n_eq {
        let a = random_blocks(rng);
        let y: f64 = rng.sample(StandardNormal);
        for (cb, ab) in c.iter_mut().zip(&a) {
            *cb += ab * y;
        }
        let b = dot(&a, &x_star);
        equalities.push((a, b));
    }
    let mut inequalities = Vec::new();
    for _ in 0..n_in {
        let g = random_blocks(rng);
        let at = dot(&g, &x_star);
        if rng.random_bool(0.5) {
            let z = rng.random_range(0.3..1.5);
            for (cb, gb) in c.iter_mut().zip(&g) {
                *cb += gb * z;
            }
            inequalities.push((g, at));
        } else {
            inequalities.push((g, at - rng.random_range(0.3..1.5)));
        }
    }
    let sdp = DenseSdp {
        sizes,
        objective: c,
        equalities,
        inequalities,
    };
    let optimum = sdp.value(&x_star);
    PlantedSdp { sdp, optimum }
}

fn project_psd_dense(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let e = SymmetricEigen::new(sym);
    let lam = e.eigenvalues.map(|l| l.max(0.0));
    let v = &e.eigenvectors;
    let out = v * DMatrix::from_diagonal(&lam) * v.transpose();
    (&out + out.transpose()) * 0.5
}

pub struct ReferenceSolution {
    pub blocks: Vec<DMatrix<f64>>,
    pub objective: f64,
    /// Largest absolute constraint violation.
    pub violation: f64,
    pub outer_iterations: usize,
}

/// Augmented Lagrangian method with an accelerated projected-gradient inner
/// loop over `PSD × R₊` (inequalities carry explicit slacks).
pub fn reference_solve(sdp: &DenseSdp) -> ReferenceSolution {
    // rows normalised to unit norm, objective to unit norm
    let mut rows: Vec<(Vec<DMatrix<f64>>, f64, bool)> = Vec::new();
    for (a, b) in &sdp.equalities {
        let norm = dot(a, a).sqrt();
        if norm > 0.0 {
            rows.push((a.iter().map(|m| m / norm).collect(), b / norm, false));
        }
    }
    for (g, h) in &sdp.inequalities {
        let norm = (dot(g, g) + 1.0).sqrt();
        rows.push((g.iter().map(|m| m / norm).collect(), h / norm, true));
    }
    let c_norm = dot(&sdp.objective, &sdp.objective).sqrt().max(1e-300);
    let c: Vec<DMatrix<f64>> = sdp.objective.iter().map(|m| m / c_norm).collect();
    let m = rows.len();
    let slack_scale: Vec<f64> = sdp
        .inequalities
        .iter()
        .map(|(g, _)| 1.0 / (dot(g, g) + 1.0).sqrt())
        .collect();

    // Lipschitz constant of the constraint map
    let mut gram = DMatrix::zeros(m, m);
    let mut slack_of = vec![None; m];
    let mut s_count = 0;
    for (i, r) in rows.iter().enumerate() {
        if r.2 {
            slack_of[i] = Some(s_count);
            s_count += 1;
        }
    }
    for i in 0..m {
        for j in 0..m {
            gram[(i, j)] = dot(&rows[i].0, &rows[j].0);
        }
        if let Some(s) = slack_of[i] {
            gram[(i, i)] += slack_scale[s] * slack_scale[s];
        }
    }
    let lip = if m > 0 { gram.symmetric_eigenvalues().max().max(1e-12) } else { 1.0 };
    let mu = 10.0;
    let step = 1.0 / (mu * lip);

    let residual = |x: &[DMatrix<f64>], s: &[f64]| -> Vec<f64> {
        (0..m)
            .map(|i| {
                let mut v = dot(&rows[i].0, x) - rows[i].1;
                if let Some(k) = slack_of[i] {
                    v -= slack_scale[k] * s[k];
                }
                v
            })
            .collect()
    };

    let mut x: Vec<DMatrix<f64>> = sdp.sizes.iter().map(|&n| DMatrix::zeros(n, n)).collect();
    let mut s = vec![0.0; s_count];
    let mut y = vec![0.0; m];
    let mut outer = 0;
    let mut last_obj = f64::INFINITY;
    for it in 0..4000 {
        outer = it + 1;
        // FISTA on the augmented Lagrangian for fixed y
        let (mut xk, mut sk) = (x.clone(), s.clone());
        let (mut zx, mut zs) = (x.clone(), s.clone());
        let mut t = 1.0f64;
        for _ in 0..3000 {
            let r = residual(&zx, &zs);
            let coef: Vec<f64> = (0..m).map(|i| mu * r[i] - y[i]).collect();
            let mut nx = Vec::with_capacity(zx.len());
            for b in 0..zx.len() {
                let mut g = c[b].clone();
                for i in 0..m {
                    g += &rows[i].0[b] * coef[i];
                }
                nx.push(project_psd_dense(&(&zx[b] - g * step)));
            }
            let mut ns = zs.clone();
            for i in 0..m {
                if let Some(k) = slack_of[i] {
                    ns[k] = (zs[k] + step * coef[i] * slack_scale[k]).max(0.0);
                }
            }
            let change: f64 = nx.iter().zip(&xk).map(|(a, b)| frob_sq(a, b)).sum::<f64>()
                + ns.iter().zip(&sk).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let beta = (t - 1.0) / t_next;
            // restart momentum when the step grows against the direction of travel
            let mut along = 0.0;
            for b in 0..nx.len() {
                along += inner(&(&zx[b] - &nx[b]), &(&nx[b] - &xk[b]));
            }
            for k in 0..ns.len() {
                along += (zs[k] - ns[k]) * (ns[k] - sk[k]);
            }
            if along > 0.0 {
                t = 1.0;
                zx = nx.clone();
                zs = ns.clone();
            } else {
                zx = nx.iter().zip(&xk).map(|(n, o)| n + (n - o) * beta).collect();
                zs = ns.iter().zip(&sk).map(|(n, o)| n + (n - o) * beta).collect();
                t = t_next;
            }
            xk = nx;
            sk = ns;
            if change.sqrt() < 1e-13 {
                break;
            }
        }
        x = xk;
        s = sk;
        let r = residual(&x, &s);
        for i in 0..m {
            y[i] -= mu * r[i];
        }
        let obj = dot(&c, &x);
        let viol = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if viol < 1e-10 && (obj - last_obj).abs() < 1e-11 * (1.0 + obj.abs()) {
            break;
        }
        last_obj = obj;
    }
    let violation = {
        let eq = sdp.equalities.iter().map(|(a, b)| (dot(a, &x) - b).abs());
        let ineq = sdp.inequalities.iter().map(|(g, h)| (h - dot(g, &x)).max(0.0));
        eq.chain(ineq).fold(0.0f64, f64::max)
    };
    ReferenceSolution {
        objective: sdp.value(&x),
        blocks: x,
        violation,
        outer_iterations: outer,
    }
}
