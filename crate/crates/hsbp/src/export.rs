//! Matrix Market output and sparsity patterns.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sparse::Csr;

/// Coordinate real general Matrix Market text, 1-based indices.
pub fn write_matrix_market(m: &Csr, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(out, "{} {} {}", m.nrows, m.ncols, m.nnz())?;
    for (i, j, v) in m.iter() {
        writeln!(out, "{} {} {:.17e}", i + 1, j + 1, v)?;
    }
    Ok(())
}

pub fn save_matrix_market(m: &Csr, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |source| Error::Io {
        path: path.display().to_string(),
        source,
    };
    let f = std::fs::File::create(path).map_err(io)?;
    let mut w = std::io::BufWriter::new(f);
    write_matrix_market(m, &mut w).map_err(io)?;
    w.flush().map_err(io)
}

/// Parses coordinate real Matrix Market text; duplicate entries are summed.
pub fn read_matrix_market(text: &str) -> Result<Csr> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.starts_with('%') && !l.trim().is_empty());
    let parse_err = |line: usize, msg: &str| Error::Parse {
        line: line + 1,
        msg: msg.to_string(),
    };
    let (hl, header) = lines.next().ok_or_else(|| parse_err(0, "missing size line"))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| parse_err(hl, "bad size line")))
        .collect::<Result<_>>()?;
    if dims.len() != 3 {
        return Err(parse_err(hl, "size line needs rows cols nnz"));
    }
    let mut e = Vec::with_capacity(dims[2]);
    for (ln, l) in lines {
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.len() != 3 {
            return Err(parse_err(ln, "entry needs row col value"));
        }
        let i: usize = t[0].parse().map_err(|_| parse_err(ln, "bad row"))?;
        let j: usize = t[1].parse().map_err(|_| parse_err(ln, "bad column"))?;
        let v: f64 = t[2].parse().map_err(|_| parse_err(ln, "bad value"))?;
        if i == 0 || j == 0 || i > dims[0] || j > dims[1] {
            return Err(parse_err(ln, "index out of range"));
        }
        e.push((i - 1, j - 1, v));
    }
    if e.len() != dims[2] {
        return Err(parse_err(hl, "entry count differs from header"));
    }
    Ok(Csr::from_triplets(dims[0], dims[1], e))
}

/// (row, col) pairs as CSV lines, 0-based.
pub fn write_sparsity(m: &Csr, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "row,col")?;
    for (i, j) in m.pattern() {
        writeln!(out, "{i},{j}")?;
    }
    Ok(())
}
