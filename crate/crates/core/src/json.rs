//! JSON encodings shared by the library types and the CLI.
//!
//! A complex matrix is stored as `{"rows": r, "cols": c, "data": [[re, im], ...]}`
//! with `data` in row-major order. Empty dimensions are allowed so that
//! memoryless realizations (zero states) round-trip.

use serde::{Deserialize, Serialize};

use crate::matrix::{c, CMat, Hermitian, LinalgError};

/// Format version written into every structured output.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<[f64; 2]>,
}

impl From<&CMat> for MatrixJson {
    fn from(m: &CMat) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let z = m[(i, j)];
                data.push([z.re, z.im]);
            }
        }
        MatrixJson { rows: m.nrows(), cols: m.ncols(), data }
    }
}

impl TryFrom<MatrixJson> for CMat {
    type Error = LinalgError;
    fn try_from(j: MatrixJson) -> Result<Self, Self::Error> {
        if j.data.len() != j.rows * j.cols {
            return Err(LinalgError::DimensionMismatch(format!(
                "matrix json declares {}x{} but holds {} entries",
                j.rows,
                j.cols,
                j.data.len()
            )));
        }
        if j.data.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(LinalgError::DimensionMismatch("non-finite matrix entry".into()));
        }
        Ok(CMat::from_fn(j.rows, j.cols, |r, k| {
            let p = j.data[r * j.cols + k];
            c(p[0], p[1])
        }))
    }
}

impl From<Hermitian> for MatrixJson {
    fn from(h: Hermitian) -> Self {
        MatrixJson::from(h.matrix())
    }
}

impl TryFrom<MatrixJson> for Hermitian {
    type Error = LinalgError;
    fn try_from(j: MatrixJson) -> Result<Self, Self::Error> {
        Hermitian::new(CMat::try_from(j)?)
    }
}

/// Serde adapter for `CMat` fields: `#[serde(with = "crate::json::cmat")]`.
pub mod cmat {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &CMat, s: S) -> Result<S::Ok, S::Error> {
        MatrixJson::from(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMat, D::Error> {
        let j = MatrixJson::deserialize(d)?;
        CMat::try_from(j).map_err(serde::de::Error::custom)
    }
}
