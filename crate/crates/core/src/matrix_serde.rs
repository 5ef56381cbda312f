//! Serde adapters for dense matrices.
//!
//! A matrix is written as a list of rows. On input a bare number is also
//! accepted and read as a 1×1 matrix, which keeps scalar configs short.

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Deserialize)]
#[serde(untagged)]
enum Repr {
    Scalar(f64),
    Rows(Vec<Vec<f64>>),
}

fn from_repr<E: serde::de::Error>(repr: Repr) -> Result<DMatrix<f64>, E> {
    match repr {
        Repr::Scalar(v) => Ok(DMatrix::from_element(1, 1, v)),
        Repr::Rows(rows) => {
            let nrows = rows.len();
            if nrows == 0 {
                return Err(E::custom("matrix must have at least one row"));
            }
            let ncols = rows[0].len();
            if ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
                return Err(E::custom("matrix rows must be non-empty and of equal length"));
            }
            Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
        }
    }
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
    to_rows(m).serialize(s)
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
    from_repr(Repr::deserialize(d)?)
}

pub mod option {
    use super::*;

    pub fn serialize<S: Serializer>(m: &Option<DMatrix<f64>>, s: S) -> Result<S::Ok, S::Error> {
        m.as_ref().map(to_rows).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<DMatrix<f64>>, D::Error> {
        Option::<Repr>::deserialize(d)?.map(from_repr).transpose()
    }
}

pub mod vec {
    use super::*;

    pub fn serialize<S: Serializer>(ms: &[DMatrix<f64>], s: S) -> Result<S::Ok, S::Error> {
        ms.iter().map(to_rows).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<DMatrix<f64>>, D::Error> {
        Vec::<Repr>::deserialize(d)?.into_iter().map(from_repr::<D::Error>).collect()
    }
}
