//! Matrix and vector files: JSON `{"dim": n, "entries": [[re, im], …]}`, row-major.

use serde::{Deserialize, Serialize};

use crate::error::{LchsError, Result};
use crate::linalg::ComplexMatrix;
use crate::scalar::{cplx, Cplx, Real};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenseFile {
    pub dim: usize,
    pub entries: Vec<[f64; 2]>,
}

fn pack<T: Real>(entries: &[Cplx<T>]) -> Vec<[f64; 2]> {
    entries
        .iter()
        .map(|z| [z.re.to_f64_lossy(), z.im.to_f64_lossy()])
        .collect()
}

fn unpack<T: Real>(entries: &[[f64; 2]]) -> Result<Vec<Cplx<T>>> {
    entries
        .iter()
        .map(|&[re, im]| {
            if re.is_finite() && im.is_finite() {
                Ok(cplx(T::lit(re), T::lit(im)))
            } else {
                Err(LchsError::Format("non-finite entry".into()))
            }
        })
        .collect()
}

fn parse(text: &str) -> Result<DenseFile> {
    serde_json::from_str(text).map_err(|e| LchsError::Format(format!("line {} column {}: {e}", e.line(), e.column())))
}

pub fn matrix_to_json<T: Real>(m: &ComplexMatrix<T>) -> String {
    let file = DenseFile {
        dim: m.dim(),
        entries: pack(m.entries()),
    };
    serde_json::to_string_pretty(&file).expect("plain data serializes")
}

pub fn matrix_from_json<T: Real>(text: &str) -> Result<ComplexMatrix<T>> {
    let file = parse(text)?;
    if file.entries.len() != file.dim * file.dim {
        return Err(LchsError::Format(format!(
            "matrix of dim {} needs {} entries, found {}",
            file.dim,
            file.dim * file.dim,
            file.entries.len()
        )));
    }
    ComplexMatrix::from_entries(file.dim, unpack(&file.entries)?)
}

pub fn vector_to_json<T: Real>(v: &[Cplx<T>]) -> String {
    let file = DenseFile {
        dim: v.len(),
        entries: pack(v),
    };
    serde_json::to_string_pretty(&file).expect("plain data serializes")
}

pub fn vector_from_json<T: Real>(text: &str) -> Result<Vec<Cplx<T>>> {
    let file = parse(text)?;
    if file.entries.len() != file.dim {
        return Err(LchsError::Format(format!(
            "vector of dim {} has {} entries",
            file.dim,
            file.entries.len()
        )));
    }
    unpack(&file.entries)
}

/// `# key=value` comment lines for a CSV header, in the given order.
pub fn csv_header(pairs: &[(&str, String)]) -> String {
    pairs.iter().map(|(k, v)| format!("# {k}={v}\n")).collect()
}
