//! Plain-text matrix fixtures.
//!
//! ```text
//! <rows> <cols>
//! <row 0 values, space separated>
//! ...
//! ```
//!
//! Values use the shortest decimal form that parses back to the same `f64`,
//! so a write/read cycle is bit exact. Readers accept any whitespace layout
//! after the header.

use std::io::{self, BufRead, Write};

use crate::linalg::DenseMatrix;

pub fn write_matrix<W: Write>(mut out: W, m: &DenseMatrix) -> io::Result<()> {
    writeln!(out, "{} {}", m.rows(), m.cols())?;
    for i in 0..m.rows() {
        let row: Vec<String> = (0..m.cols()).map(|j| format!("{:?}", m.get(i, j))).collect();
        writeln!(out, "{}", row.join(" "))?;
    }
    Ok(())
}

pub fn matrix_to_string(m: &DenseMatrix) -> String {
    let mut buf = Vec::new();
    write_matrix(&mut buf, m).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("fixture output is ASCII")
}

fn invalid(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

pub fn read_matrix<R: BufRead>(input: R) -> io::Result<DenseMatrix> {
    let mut tokens = Vec::new();
    for line in input.lines() {
        let line = line?;
        tokens.extend(line.split_whitespace().map(str::to_owned));
    }
    let mut it = tokens.into_iter();
    let rows: usize = it
        .next()
        .ok_or_else(|| invalid("missing header"))?
        .parse()
        .map_err(|e| invalid(format!("bad row count: {e}")))?;
    let cols: usize = it
        .next()
        .ok_or_else(|| invalid("missing column count"))?
        .parse()
        .map_err(|e| invalid(format!("bad column count: {e}")))?;
    let values = it
        .map(|t| t.parse::<f64>().map_err(|e| invalid(format!("bad value {t:?}: {e}"))))
        .collect::<io::Result<Vec<_>>>()?;
    DenseMatrix::from_row_major(rows, cols, values).map_err(|e| invalid(e.to_string()))
}
