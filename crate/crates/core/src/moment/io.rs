//! Moment matrices on disk: a JSON header listing the row basis and a raw
//! little-endian `f64` file holding the lower triangle row by row.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Monomial, MomentError, MonomialBasis, Pseudoexpectation};

const FORMAT: &str = "sossr-moments";
const LAYOUT: &str = "lower-triangle-row-major-f64-le";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentHeader {
    pub format: String,
    pub version: u32,
    pub num_samples: usize,
    pub dim: usize,
    pub degree: usize,
    pub tolerance: f64,
    pub layout: String,
    /// File name of the binary payload, relative to the header.
    pub data: String,
    pub entries: usize,
    /// Row monomials as variable id lists.
    pub rows: Vec<Monomial>,
    /// The same rows rendered as `w3*pi_1_2`.
    pub row_names: Vec<String>,
}

/// Path of the payload written next to `header`.
pub fn data_path(header: &Path) -> PathBuf {
    header.with_extension("bin")
}

pub fn encode_lower(matrix: &DMatrix<f64>) -> Vec<u8> {
    let n = matrix.nrows();
    let mut out = Vec::with_capacity(n * (n + 1) / 2 * 8);
    for r in 0..n {
        for c in 0..=r {
            out.extend_from_slice(&matrix[(r, c)].to_le_bytes());
        }
    }
    out
}

pub fn decode_lower(bytes: &[u8], n: usize) -> Result<DMatrix<f64>, MomentError> {
    let expected = n * (n + 1) / 2 * 8;
    if bytes.len() != expected {
        return Err(MomentError::Format(format!(
            "payload has {} bytes, expected {expected}",
            bytes.len()
        )));
    }
    let mut m = DMatrix::zeros(n, n);
    let mut chunks = bytes.chunks_exact(8);
    for r in 0..n {
        for c in 0..=r {
            let v = f64::from_le_bytes(chunks.next().unwrap().try_into().unwrap());
            m[(r, c)] = v;
            m[(c, r)] = v;
        }
    }
    Ok(m)
}

/// Writes `pe` to `header` and its payload to [`data_path`].
pub fn save(pe: &Pseudoexpectation, header: &Path) -> Result<(), MomentError> {
    let matrix = pe.moment_matrix()?;
    let basis = pe.basis();
    let bin = data_path(header);
    let meta = MomentHeader {
        format: FORMAT.to_string(),
        version: 1,
        num_samples: basis.num_samples(),
        dim: basis.dim(),
        degree: basis.degree(),
        tolerance: pe.tolerance(),
        layout: LAYOUT.to_string(),
        data: bin
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        entries: basis.len() * (basis.len() + 1) / 2,
        rows: basis.rows().to_vec(),
        row_names: basis.rows().iter().map(|m| basis.monomial_name(m)).collect(),
    };
    fs::write(header, serde_json::to_vec_pretty(&meta)?)?;
    fs::write(bin, encode_lower(&matrix))?;
    Ok(())
}

pub fn load(header: &Path) -> Result<Pseudoexpectation, MomentError> {
    let meta: MomentHeader = serde_json::from_slice(&fs::read(header)?)?;
    if meta.format != FORMAT || meta.layout != LAYOUT {
        return Err(MomentError::Format(format!(
            "unsupported format {} / {}",
            meta.format, meta.layout
        )));
    }
    let basis = MonomialBasis::new(meta.num_samples, meta.dim, meta.degree)?;
    if basis.rows() != meta.rows.as_slice() {
        return Err(MomentError::Format("row listing does not match the basis".into()));
    }
    let bin = header
        .parent()
        .map(|p| p.join(&meta.data))
        .unwrap_or_else(|| PathBuf::from(&meta.data));
    let matrix = decode_lower(&fs::read(bin)?, basis.len())?;
    Pseudoexpectation::from_moment_matrix(Arc::new(basis), &matrix, meta.tolerance)
}
