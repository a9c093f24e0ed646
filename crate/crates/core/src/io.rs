//! Plain-text matrix files.
//!
//! Format: a header line `rows cols`, then `rows` lines of `cols`
//! whitespace-separated reals written with 17 significant digits. The same
//! format stores frames, measurement matrices and (as `len 1`) vectors.
//! Writing then reading reproduces every entry bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, Vector};
use crate::serde17;

pub fn format_matrix(m: &DenseMatrix) -> String {
    let mut out = String::with_capacity(24 * m.len() + 16);
    let _ = writeln!(out, "{} {}", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| serde17::fmt(m[(i, j)])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_matrix(text: &str) -> Result<DenseMatrix> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty matrix file".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Parse(format!("bad header {header:?}: {e}")))?;
    let [rows, cols] = dims[..] else {
        return Err(Error::Parse(format!("header must be `rows cols`, got {header:?}")));
    };
    let mut data = Vec::with_capacity(rows * cols);
    for (i, line) in lines.enumerate() {
        if i >= rows {
            return Err(Error::Parse(format!("more than {rows} data rows")));
        }
        let before = data.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|e| Error::Parse(format!("row {}: bad number {tok:?}: {e}", i + 1)))?;
            if !v.is_finite() {
                return Err(Error::Parse(format!("row {}: non-finite entry", i + 1)));
            }
            data.push(v);
        }
        if data.len() - before != cols {
            return Err(Error::Parse(format!(
                "row {} has {} entries, expected {cols}",
                i + 1,
                data.len() - before
            )));
        }
    }
    if data.len() != rows * cols {
        return Err(Error::Parse(format!(
            "expected {rows} rows, found {}",
            data.len() / cols.max(1)
        )));
    }
    Ok(DenseMatrix::from_row_slice(rows, cols, &data))
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    parse_matrix(&fs::read_to_string(path)?)
}

pub fn write_matrix(path: impl AsRef<Path>, m: &DenseMatrix) -> Result<()> {
    fs::write(path, format_matrix(m))?;
    Ok(())
}

pub fn read_vector(path: impl AsRef<Path>) -> Result<Vector> {
    let m = read_matrix(path)?;
    if m.ncols() != 1 {
        return Err(Error::Parse(format!(
            "vector file must have one column, found {}",
            m.ncols()
        )));
    }
    Ok(m.column(0).into_owned())
}

pub fn write_vector(path: impl AsRef<Path>, v: &Vector) -> Result<()> {
    write_matrix(path, &DenseMatrix::from_column_slice(v.len(), 1, v.as_slice()))
}
