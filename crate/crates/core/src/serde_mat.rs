//! Row-major JSON representations for nalgebra matrices and vectors.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Builds a matrix from rows. An empty row list gives a 0x0 matrix.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, String> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some((k, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(format!("row {k} has {} entries, expected {ncols}", r.len()));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub mod matrix {
    use super::*;

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        matrix_to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        matrix_from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

pub mod vector {
    use super::*;

    pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<f64>, D::Error> {
        Ok(DVector::from_vec(Vec::<f64>::deserialize(d)?))
    }
}

pub mod vectors {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[DVector<f64>], s: S) -> Result<S::Ok, S::Error> {
        let raw: Vec<&[f64]> = v.iter().map(|x| x.as_slice()).collect();
        raw.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<DVector<f64>>, D::Error> {
        let raw = Vec::<Vec<f64>>::deserialize(d)?;
        Ok(raw.into_iter().map(DVector::from_vec).collect())
    }
}

pub mod vectors2 {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Vec<DVector<f64>>], s: S) -> Result<S::Ok, S::Error> {
        let raw: Vec<Vec<&[f64]>> = v
            .iter()
            .map(|row| row.iter().map(|x| x.as_slice()).collect())
            .collect();
        raw.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<Vec<Vec<DVector<f64>>>, D::Error> {
        let raw = Vec::<Vec<Vec<f64>>>::deserialize(d)?;
        Ok(raw
            .into_iter()
            .map(|row| row.into_iter().map(DVector::from_vec).collect())
            .collect())
    }
}

pub mod matrices2 {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Vec<DMatrix<f64>>], s: S) -> Result<S::Ok, S::Error> {
        let raw: Vec<Vec<Vec<Vec<f64>>>> = v
            .iter()
            .map(|row| row.iter().map(matrix_to_rows).collect())
            .collect();
        raw.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<Vec<Vec<DMatrix<f64>>>, D::Error> {
        let raw = Vec::<Vec<Vec<Vec<f64>>>>::deserialize(d)?;
        raw.into_iter()
            .map(|row| {
                row.iter()
                    .map(|m| matrix_from_rows(m).map_err(serde::de::Error::custom))
                    .collect()
            })
            .collect()
    }
}
