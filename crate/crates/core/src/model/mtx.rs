//! Matrix Market reader and writer (real `coordinate` general/symmetric and
//! real `array` general).

use crate::error::{Error, Result};
use crate::linalg::{CooBuilder, CsrMatrix, DenseBlock};
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Coordinate,
    Array,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
}

/// Parsed contents in coordinate form; `array` files are converted.
#[derive(Debug, Clone)]
pub struct MtxData {
    pub n_rows: usize,
    pub n_cols: usize,
    /// Zero-based `(row, col, value)` entries with symmetric storage expanded.
    pub entries: Vec<(usize, usize, f64)>,
}

impl MtxData {
    pub fn to_csr(&self) -> Result<CsrMatrix> {
        let mut coo = CooBuilder::with_capacity(self.n_rows, self.n_cols, self.entries.len());
        for &(i, j, v) in &self.entries {
            coo.push(i, j, v)?;
        }
        Ok(coo.build())
    }

    pub fn to_dense(&self) -> DenseBlock {
        let mut d = DenseBlock::zeros(self.n_rows, self.n_cols);
        for &(i, j, v) in &self.entries {
            d[(i, j)] += v;
        }
        d
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

pub fn parse_mtx(text: &str, path: &Path) -> Result<MtxData> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let fields: Vec<String> = header
        .split_whitespace()
        .map(str::to_ascii_lowercase)
        .collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(parse_err(
            path,
            1,
            "expected `%%MatrixMarket matrix <format> real <symmetry>`",
        ));
    }
    let format = match fields[2].as_str() {
        "coordinate" => Format::Coordinate,
        "array" => Format::Array,
        other => return Err(parse_err(path, 1, format!("unsupported format `{other}`"))),
    };
    if fields[3] != "real" && fields[3] != "integer" {
        return Err(parse_err(
            path,
            1,
            format!("unsupported field `{}`", fields[3]),
        ));
    }
    let symmetry = match fields[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => {
            return Err(parse_err(
                path,
                1,
                format!("unsupported symmetry `{other}`"),
            ))
        }
    };

    let mut body = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (size_no, size_line) = body
        .next()
        .ok_or_else(|| parse_err(path, 2, "missing size line"))?;
    let nums: Vec<usize> = size_line
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| parse_err(path, size_no + 1, format!("bad size line: {e}")))?;
    let parse_f = |tok: Option<&str>, no: usize| -> Result<f64> {
        tok.ok_or_else(|| parse_err(path, no + 1, "missing value"))?
            .parse::<f64>()
            .map_err(|e| parse_err(path, no + 1, format!("bad value: {e}")))
    };

    match format {
        Format::Coordinate => {
            let [n_rows, n_cols, nnz] = nums[..] else {
                return Err(parse_err(path, size_no + 1, "expected `rows cols nnz`"));
            };
            let mut entries = Vec::with_capacity(
                nnz * if symmetry == Symmetry::Symmetric {
                    2
                } else {
                    1
                },
            );
            let mut seen = 0;
            for (no, line) in body {
                let mut toks = line.split_whitespace();
                let mut index = |name: &str, bound: usize| -> Result<usize> {
                    let v: usize = toks
                        .next()
                        .ok_or_else(|| parse_err(path, no + 1, format!("missing {name} index")))?
                        .parse()
                        .map_err(|e| parse_err(path, no + 1, format!("bad {name} index: {e}")))?;
                    if v == 0 || v > bound {
                        return Err(parse_err(
                            path,
                            no + 1,
                            format!("{name} index {v} out of range 1..={bound}"),
                        ));
                    }
                    Ok(v - 1)
                };
                let i = index("row", n_rows)?;
                let j = index("column", n_cols)?;
                let v = parse_f(toks.next(), no)?;
                entries.push((i, j, v));
                if symmetry == Symmetry::Symmetric && i != j {
                    entries.push((j, i, v));
                }
                seen += 1;
            }
            if seen != nnz {
                return Err(parse_err(
                    path,
                    size_no + 1,
                    format!("declared {nnz} entries, found {seen}"),
                ));
            }
            Ok(MtxData {
                n_rows,
                n_cols,
                entries,
            })
        }
        Format::Array => {
            let [n_rows, n_cols] = nums[..] else {
                return Err(parse_err(path, size_no + 1, "expected `rows cols`"));
            };
            if symmetry != Symmetry::General {
                return Err(parse_err(path, 1, "only general array files are supported"));
            }
            let mut entries = Vec::with_capacity(n_rows * n_cols);
            let mut t = 0;
            for (no, line) in body {
                for tok in line.split_whitespace() {
                    if t >= n_rows * n_cols {
                        return Err(parse_err(path, no + 1, "too many values"));
                    }
                    let v = parse_f(Some(tok), no)?;
                    entries.push((t % n_rows, t / n_rows, v));
                    t += 1;
                }
            }
            if t != n_rows * n_cols {
                return Err(parse_err(
                    path,
                    size_no + 1,
                    format!("expected {} values, found {t}", n_rows * n_cols),
                ));
            }
            Ok(MtxData {
                n_rows,
                n_cols,
                entries,
            })
        }
    }
}

pub fn read_mtx(path: &Path) -> Result<MtxData> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_mtx(&text, path)
}

/// Coordinate format; `symmetric` stores the lower triangle only.
pub fn format_sparse(a: &CsrMatrix, symmetric: bool) -> String {
    let mut body = String::new();
    let mut count = 0;
    for i in 0..a.n_rows() {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            if symmetric && j > i {
                continue;
            }
            let _ = writeln!(body, "{} {} {:e}", i + 1, j + 1, v);
            count += 1;
        }
    }
    let kind = if symmetric { "symmetric" } else { "general" };
    format!(
        "%%MatrixMarket matrix coordinate real {kind}\n{} {} {count}\n{body}",
        a.n_rows(),
        a.n_cols()
    )
}

/// Column-major `array` format.
pub fn format_dense(a: &DenseBlock) -> String {
    let mut out = format!(
        "%%MatrixMarket matrix array real general\n{} {}\n",
        a.n_rows(),
        a.n_cols()
    );
    for v in a.values() {
        let _ = writeln!(out, "{v:e}");
    }
    out
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn write_sparse(path: &Path, a: &CsrMatrix, symmetric: bool) -> Result<()> {
    write_text(path, &format_sparse(a, symmetric))
}

pub fn write_dense(path: &Path, a: &DenseBlock) -> Result<()> {
    write_text(path, &format_dense(a))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_lower_triangle_expands() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n% comment\n3 3 4\n1 1 2\n2 1 -1\n2 2 2\n3 2 -1\n";
        let a = parse_mtx(text, Path::new("m.mtx"))
            .unwrap()
            .to_csr()
            .unwrap();
        assert_eq!(a, a.transpose());
        assert_eq!(a.get(0, 1), -1.0);
        assert_eq!(a.get(2, 2), 0.0);
    }

    #[test]
    fn array_is_column_major() {
        let text = "%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n";
        let d = parse_mtx(text, Path::new("a.mtx")).unwrap().to_dense();
        assert_eq!(d, DenseBlock::from_rows(&[&[1.0, 3.0], &[2.0, 4.0]]));
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let a = CsrMatrix::tridiagonal(5, -1.0 / 3.0, 2.0e-300, 0.1);
        let back = parse_mtx(&format_sparse(&a, false), Path::new("x"))
            .unwrap()
            .to_csr()
            .unwrap();
        assert_eq!(a, back);
        let d = DenseBlock::from_rows(&[&[std::f64::consts::PI, -0.0], &[1e308, 5e-324]]);
        let back = parse_mtx(&format_dense(&d), Path::new("x"))
            .unwrap()
            .to_dense();
        assert_eq!(d, back);
    }

    #[test]
    fn bad_index_reports_line() {
        let text = "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n";
        match parse_mtx(text, Path::new("bad.mtx")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }
}
