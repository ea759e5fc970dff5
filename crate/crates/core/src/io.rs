//! Matrix CSV files: a header line `n=<dim>` followed by `dim` rows of
//! comma-separated reals. Values are written in shortest round-trip form,
//! so a write/read cycle is exact.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

fn fmt_value(v: f64) -> String {
    let a = v.abs();
    if v != 0.0 && !(1e-4..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

pub fn write_matrix_csv<W: Write>(m: &DMatrix<f64>, mut w: W) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Shape(format!(
            "matrix CSV holds square matrices, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    writeln!(w, "n={}", m.nrows())?;
    let mut line = String::new();
    for i in 0..m.nrows() {
        line.clear();
        for j in 0..m.ncols() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&fmt_value(m[(i, j)]));
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_csv<R: Read>(r: R) -> Result<DMatrix<f64>> {
    let mut lines = BufReader::new(r).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty matrix file".into()))??;
    let n: usize = header
        .trim()
        .strip_prefix("n=")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::Parse(format!("expected header n=<dim>, got {header:?}")))?;
    let mut m = DMatrix::zeros(n, n);
    let mut row = 0;
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if row == n {
            return Err(Error::Parse(format!("more than {n} rows in matrix file")));
        }
        let mut cols = 0;
        for (j, field) in line.split(',').enumerate() {
            if j >= n {
                return Err(Error::Parse(format!(
                    "row {} has more than {n} entries",
                    row + 1
                )));
            }
            m[(row, j)] = field.trim().parse().map_err(|_| {
                Error::Parse(format!(
                    "row {} column {}: bad number {field:?}",
                    row + 1,
                    j + 1
                ))
            })?;
            cols += 1;
        }
        if cols != n {
            return Err(Error::Parse(format!(
                "row {} has {cols} entries, expected {n}",
                row + 1
            )));
        }
        row += 1;
    }
    if row != n {
        return Err(Error::Parse(format!(
            "matrix file has {row} rows, expected {n}"
        )));
    }
    Ok(m)
}

pub fn load_matrix(path: &Path) -> Result<DMatrix<f64>> {
    read_matrix_csv(fs::File::open(path)?)
}

pub fn save_matrix(m: &DMatrix<f64>, path: &Path) -> Result<()> {
    write_matrix_csv(m, std::io::BufWriter::new(fs::File::create(path)?))
}
