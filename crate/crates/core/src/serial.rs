//! Serde adapters: complex numbers as `[re, im]` pairs, matrices as row lists.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::linalg::{c64, CMatrix, RMatrix};

pub type ComplexRows = Vec<Vec<[f64; 2]>>;

pub fn complex_rows(m: &CMatrix) -> ComplexRows {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn from_complex_rows(rows: &[Vec<[f64; 2]>]) -> Result<CMatrix, String> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != nc) {
        return Err("matrix rows have unequal lengths".into());
    }
    Ok(CMatrix::from_fn(nr, nc, |i, j| c64(rows[i][j][0], rows[i][j][1])))
}

pub fn real_rows(m: &RMatrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<RMatrix, String> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != nc) {
        return Err("matrix rows have unequal lengths".into());
    }
    Ok(RMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}

/// `#[serde(with = "complex_matrix")]`
pub mod complex_matrix {
    use super::*;

    pub fn serialize<S: Serializer>(m: &CMatrix, s: S) -> Result<S::Ok, S::Error> {
        complex_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMatrix, D::Error> {
        let rows = ComplexRows::deserialize(d)?;
        from_complex_rows(&rows).map_err(D::Error::custom)
    }
}

/// Fixed-width scientific formatting with 17 significant digits.
pub fn format_number(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_rows_round_trip() {
        let m = CMatrix::from_fn(2, 3, |i, j| c64(i as f64, -(j as f64) * 0.5));
        assert_eq!(from_complex_rows(&complex_rows(&m)).unwrap(), m);
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(from_real_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn number_format_round_trips_exactly() {
        for x in [0.1, -1.0 / 3.0, 6.02214076e23, 5e-324] {
            assert_eq!(format_number(x).parse::<f64>().unwrap(), x);
        }
    }
}
