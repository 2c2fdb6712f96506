//! JSON container for complexes and vectors.
//!
//! ```json
//! {
//!   "degrees": [0, 1],
//!   "labels": ["H1", "L2"],
//!   "gram": [ {"format": "dense", "rows": 2, "cols": 2, "data": [[1, 0], [0, 1]]},
//!             {"format": "coo", "rows": 1, "cols": 1, "entries": [[0, 0, 2.0]]} ],
//!   "diff": [ {"format": "coo", "rows": 1, "cols": 2, "entries": [[0, 0, -1], [0, 1, 1]]} ]
//! }
//! ```
//!
//! `gram` holds one matrix per degree, `diff` one per degree except the last.

use std::path::Path;

use nalgebra::DVector;
use nalgebra_sparse::CsrMatrix;
use serde::{Deserialize, Serialize};

use super::{Degree, HilbertComplex};
use crate::error::{Error, Result};
use crate::linalg;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "lowercase")]
pub enum MatrixJson {
    Dense {
        rows: usize,
        cols: usize,
        data: Vec<Vec<f64>>,
    },
    Coo {
        rows: usize,
        cols: usize,
        entries: Vec<(usize, usize, f64)>,
    },
}

impl MatrixJson {
    pub fn to_csr(&self) -> Result<CsrMatrix<f64>> {
        match self {
            MatrixJson::Dense { rows, cols, data } => {
                if data.len() != *rows || data.iter().any(|r| r.len() != *cols) {
                    return Err(Error::Config(format!("dense matrix data does not match {rows}x{cols}")));
                }
                let trips = data
                    .iter()
                    .enumerate()
                    .flat_map(|(i, r)| r.iter().enumerate().filter(|(_, v)| **v != 0.0).map(move |(j, v)| (i, j, *v)));
                Ok(linalg::csr_from_triplets(*rows, *cols, trips))
            }
            MatrixJson::Coo { rows, cols, entries } => {
                if let Some(&(i, j, _)) = entries.iter().find(|(i, j, _)| i >= rows || j >= cols) {
                    return Err(Error::Config(format!("entry ({i}, {j}) outside a {rows}x{cols} matrix")));
                }
                Ok(linalg::csr_from_triplets(*rows, *cols, entries.iter().copied()))
            }
        }
    }

    pub fn from_csr(a: &CsrMatrix<f64>) -> Self {
        MatrixJson::Coo {
            rows: a.nrows(),
            cols: a.ncols(),
            entries: a.triplet_iter().map(|(i, j, v)| (i, j, *v)).collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexJson {
    pub degrees: [Degree; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    pub gram: Vec<MatrixJson>,
    pub diff: Vec<MatrixJson>,
}

impl ComplexJson {
    pub fn into_complex(self) -> Result<HilbertComplex> {
        let [lo, hi] = self.degrees;
        if hi < lo {
            return Err(Error::Config(format!("degrees [{lo}, {hi}] are not increasing")));
        }
        let count = (hi - lo + 1) as usize;
        if self.gram.len() != count {
            return Err(Error::Config(format!("{} gram matrices for {count} degrees", self.gram.len())));
        }
        let gram = self.gram.iter().map(MatrixJson::to_csr).collect::<Result<_>>()?;
        let diff = self.diff.iter().map(MatrixJson::to_csr).collect::<Result<_>>()?;
        HilbertComplex::new(lo, gram, diff, self.labels)
    }

    pub fn from_complex(c: &HilbertComplex) -> Self {
        Self {
            degrees: [c.k_min(), c.k_max()],
            labels: c.labels().map(|l| l.to_vec()),
            gram: c.degrees().map(|k| MatrixJson::from_csr(c.gram(k))).collect(),
            diff: (c.k_min()..c.k_max()).map(|k| MatrixJson::from_csr(c.diff(k))).collect(),
        }
    }
}

pub fn read_complex(path: impl AsRef<Path>) -> Result<HilbertComplex> {
    let text = std::fs::read_to_string(path)?;
    let raw: ComplexJson = serde_json::from_str(&text)?;
    raw.into_complex()
}

pub fn write_complex(c: &HilbertComplex, path: impl AsRef<Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(&ComplexJson::from_complex(c))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// Reads a plain JSON array of numbers.
pub fn read_vector(path: impl AsRef<Path>) -> Result<DVector<f64>> {
    let text = std::fs::read_to_string(path)?;
    let v: Vec<f64> = serde_json::from_str(&text)?;
    Ok(DVector::from_vec(v))
}
