//! Serde adapters writing `DMatrix<f64>` as `{rows, cols, data}` with
//! row-major data.

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Serialize, Deserialize)]
struct Dense {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl From<&DMatrix<f64>> for Dense {
    fn from(m: &DMatrix<f64>) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                data.push(m[(r, c)]);
            }
        }
        Dense {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }
}

impl Dense {
    fn into_matrix<E: serde::de::Error>(self) -> Result<DMatrix<f64>, E> {
        if self.data.len() != self.rows * self.cols {
            return Err(E::custom(format!(
                "matrix data has {} entries, expected {}x{}",
                self.data.len(),
                self.rows,
                self.cols
            )));
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
    Dense::from(m).serialize(s)
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
    Dense::deserialize(d)?.into_matrix()
}

pub mod vec {
    use super::*;

    pub fn serialize<S: Serializer>(ms: &[DMatrix<f64>], s: S) -> Result<S::Ok, S::Error> {
        let dense: Vec<Dense> = ms.iter().map(Dense::from).collect();
        dense.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<DMatrix<f64>>, D::Error> {
        Vec::<Dense>::deserialize(d)?
            .into_iter()
            .map(Dense::into_matrix)
            .collect()
    }
}
