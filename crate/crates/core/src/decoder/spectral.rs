use nalgebra::{DMatrix, DVector};

/// Relative width of an eigenvalue tie.
const TIE_TOLERANCE: f64 = 1e-10;

fn sign_normalize(v: &mut DVector<f64>) {
    if let Some(&first) = v.iter().find(|x| x.abs() > 1e-12) {
        if first < 0.0 {
            v.neg_mut();
        }
    }
}

fn lex_desc(a: &DVector<f64>, b: &DVector<f64>) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        match y.total_cmp(x) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    std::cmp::Ordering::Equal
}

/// Eigenpairs of the symmetric part of `m`, eigenvalues descending.
///
/// Eigenvectors have their first nonzero component positive, and within a
/// run of (numerically) equal eigenvalues they are ordered lexicographically
/// largest first.
pub fn sorted_eigen(m: &DMatrix<f64>) -> Vec<(f64, DVector<f64>)> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut pairs: Vec<(f64, DVector<f64>)> = (0..eig.eigenvalues.len())
        .map(|j| {
            let mut v = eig.eigenvectors.column(j).into_owned();
            sign_normalize(&mut v);
            (eig.eigenvalues[j], v)
        })
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let scale = pairs.iter().map(|p| p.0.abs()).fold(1.0, f64::max);
    let mut start = 0;
    while start < pairs.len() {
        let mut end = start + 1;
        while end < pairs.len() && pairs[end - 1].0 - pairs[end].0 <= TIE_TOLERANCE * scale {
            end += 1;
        }
        pairs[start..end].sort_by(|a, b| lex_desc(&a.1, &b.1));
        start = end;
    }
    pairs
}

/// Projection onto the span of the top `k` eigenvectors of `m`.
pub fn eigenspace_round(m: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let d = m.nrows();
    let k = k.min(d);
    let pairs = sorted_eigen(m);
    let basis = DMatrix::from_columns(&pairs[..k].iter().map(|p| p.1.clone()).collect::<Vec<_>>());
    // re-orthonormalise so the result is a projection to rounding error
    let q = basis.qr().q();
    let p = &q * q.transpose();
    (&p + p.transpose()) * 0.5
}
