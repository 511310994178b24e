//! Datasets on disk: a header-less CSV with one point per row and an
//! optional JSON sidecar (same stem, `.json`) carrying the ground truth.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{DataError, Dataset, GroundTruth, Origin};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Sidecar {
    pub version: u32,
    pub n: usize,
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<GroundTruth>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<Origin>,
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

pub fn write_points(points: &DMatrix<f64>, path: &Path) -> Result<(), DataError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for r in 0..points.nrows() {
        w.write_record(points.row(r).iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_points(path: &Path) -> Result<DMatrix<f64>, DataError> {
    let fmt = |message: String| DataError::Format {
        path: path.display().to_string(),
        message,
    };
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| fmt(format!("line {}: {f:?} is not a finite number", line + 1)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(fmt(format!(
                    "line {} has {} columns, expected {}",
                    line + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() || rows[0].is_empty() {
        return Err(fmt("no points".into()));
    }
    let d = rows[0].len();
    Ok(DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]))
}

/// Writes the CSV and, when the dataset carries any metadata, its sidecar.
pub fn save(data: &Dataset, csv: &Path) -> Result<(), DataError> {
    write_points(&data.points, csv)?;
    if data.truth.is_some() || data.origin.is_some() {
        let side = Sidecar {
            version: 1,
            n: data.len(),
            d: data.dim(),
            truth: data.truth.clone(),
            origin: data.origin.clone(),
        };
        std::fs::write(sidecar_path(csv), serde_json::to_string_pretty(&side)?)?;
    }
    Ok(())
}

/// Reads the CSV and the sidecar next to it, if present.
pub fn load(csv: &Path) -> Result<Dataset, DataError> {
    let points = read_points(csv)?;
    let side_path = sidecar_path(csv);
    if !side_path.exists() {
        return Ok(Dataset::from_points(points));
    }
    let side: Sidecar = serde_json::from_str(&std::fs::read_to_string(&side_path)?)?;
    let fmt = |message: String| DataError::Format {
        path: side_path.display().to_string(),
        message,
    };
    if side.n != points.nrows() || side.d != points.ncols() {
        return Err(fmt(format!(
            "sidecar describes {}x{} points, CSV holds {}x{}",
            side.n,
            side.d,
            points.nrows(),
            points.ncols()
        )));
    }
    if let Some(t) = &side.truth {
        if t.inlier_mask.len() != side.n || t.plant.shape() != (side.d, side.d) {
            return Err(fmt("ground truth dimensions disagree with the points".into()));
        }
    }
    Ok(Dataset {
        points,
        truth: side.truth,
        origin: side.origin,
    })
}
