use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, Par, Side};
use nalgebra::DMatrix;

use super::SdpError;

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Position of `(row, col)`, `row ≥ col`, in a packed lower triangle.
#[inline]
pub(crate) fn tri_index(row: usize, col: usize) -> usize {
    row * (row + 1) / 2 + col
}

/// Unpacks a scaled lower triangle (off-diagonals carry a `√2` factor) into `out`.
pub(crate) fn unpack(seg: &[f64], n: usize, out: &mut Mat<f64>) {
    for r in 0..n {
        for c in 0..r {
            let v = seg[tri_index(r, c)] / SQRT2;
            out[(r, c)] = v;
            out[(c, r)] = v;
        }
        out[(r, r)] = seg[tri_index(r, r)];
    }
}

pub(crate) fn pack(m: &Mat<f64>, n: usize, seg: &mut [f64]) {
    for r in 0..n {
        for c in 0..r {
            seg[tri_index(r, c)] = 0.5 * (m[(r, c)] + m[(c, r)]) * SQRT2;
        }
        seg[tri_index(r, r)] = m[(r, r)];
    }
}

pub(crate) fn to_dmatrix(seg: &[f64], n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |r, c| {
        let (a, b) = if r >= c { (r, c) } else { (c, r) };
        let v = seg[tri_index(a, b)];
        if a == b {
            v
        } else {
            v / SQRT2
        }
    })
}

/// Workspace for repeated projections of one block size.
pub(crate) struct PsdWork {
    n: usize,
    mat: Mat<f64>,
    scaled: Mat<f64>,
    out: Mat<f64>,
}

impl PsdWork {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            n,
            mat: Mat::zeros(n, n),
            scaled: Mat::zeros(n, n),
            out: Mat::zeros(n, n),
        }
    }

    /// Projects the packed block in place onto the PSD cone.
    pub(crate) fn project(&mut self, seg: &mut [f64], block: usize) -> Result<(), SdpError> {
        let n = self.n;
        if n == 1 {
            seg[0] = seg[0].max(0.0);
            return Ok(());
        }
        unpack(seg, n, &mut self.mat);
        let evd = self
            .mat
            .self_adjoint_eigen(Side::Lower)
            .map_err(|_| SdpError::Eigen(block))?;
        let s = evd.S().column_vector();
        let u = evd.U();
        // eigenvalues ascending
        let npos = (0..n).filter(|&j| s[j] > 0.0).count();
        if npos == 0 {
            seg.iter_mut().for_each(|v| *v = 0.0);
            return Ok(());
        }
        if npos == n {
            return Ok(());
        }
        // reconstruct from whichever side has fewer eigenpairs
        let (start, count, sign) = if npos <= n - npos {
            (n - npos, npos, 1.0)
        } else {
            (0, n - npos, -1.0)
        };
        let mut scaled = self.scaled.as_mut().subcols_mut(0, count);
        for j in 0..count {
            let lam = s[start + j];
            for r in 0..n {
                scaled[(r, j)] = u[(r, start + j)] * lam;
            }
        }
        let vecs = u.subcols(start, count);
        matmul(
            self.out.as_mut(),
            Accum::Replace,
            self.scaled.as_ref().subcols(0, count),
            vecs.transpose(),
            1.0,
            Par::Seq,
        );
        if sign < 0.0 {
            // X₊ = X - V₋ Λ₋ V₋ᵀ
            for r in 0..n {
                for c in 0..n {
                    self.out[(r, c)] = self.mat[(r, c)] - self.out[(r, c)];
                }
            }
        }
        pack(&self.out, n, seg);
        Ok(())
    }
}

/// Nearest PSD matrix in Frobenius norm.
pub fn project_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "project_psd needs a square matrix");
    let mut seg = vec![0.0; n * (n + 1) / 2];
    for r in 0..n {
        for c in 0..=r {
            let v = 0.5 * (m[(r, c)] + m[(c, r)]);
            seg[tri_index(r, c)] = if r == c { v } else { v * SQRT2 };
        }
    }
    let mut work = PsdWork::new(n);
    work.project(&mut seg, 0)
        .expect("symmetric eigendecomposition failed");
    to_dmatrix(&seg, n)
}
