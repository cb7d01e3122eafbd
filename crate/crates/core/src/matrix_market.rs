//! Matrix Market exchange format (real matrices).
//!
//! Supported headers: `%%MatrixMarket matrix {coordinate|array}
//! {real|integer|pattern} {general|symmetric|skew-symmetric}`. Complex and
//! hermitian files are rejected.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::CsMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Coordinate,
    Array,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Real,
    Pattern,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    Skew,
}

fn err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::MatrixMarket(format!("line {line}: {msg}"))
}

fn parse_header(line: &str) -> Result<(Layout, Field, Symmetry)> {
    let tokens: Vec<String> = line.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(err(1, format!("unrecognized header `{line}`")));
    }
    let layout = match tokens[2].as_str() {
        "coordinate" => Layout::Coordinate,
        "array" => Layout::Array,
        other => return Err(err(1, format!("unsupported layout `{other}`"))),
    };
    let field = match tokens[3].as_str() {
        "real" | "integer" | "double" => Field::Real,
        "pattern" if layout == Layout::Coordinate => Field::Pattern,
        other => return Err(err(1, format!("unsupported field `{other}`"))),
    };
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::Skew,
        other => return Err(err(1, format!("unsupported symmetry `{other}`"))),
    };
    Ok((layout, field, symmetry))
}

fn number(tok: Option<&str>, line: usize) -> Result<f64> {
    let tok = tok.ok_or_else(|| err(line, "missing value"))?;
    tok.parse::<f64>()
        .map_err(|_| err(line, format!("cannot parse `{tok}` as a number")))
}

fn index(tok: Option<&str>, bound: usize, line: usize) -> Result<usize> {
    let tok = tok.ok_or_else(|| err(line, "missing index"))?;
    let i: usize = tok
        .parse()
        .map_err(|_| err(line, format!("cannot parse `{tok}` as an index")))?;
    if i == 0 || i > bound {
        return Err(err(line, format!("index {i} outside 1..={bound}")));
    }
    Ok(i - 1)
}

/// Parses a Matrix Market stream into a sparse matrix.
pub fn read<R: Read>(reader: R) -> Result<CsMatrix> {
    let mut lines = BufReader::new(reader).lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty file"))?;
    let (layout, field, symmetry) = parse_header(&header?)?;

    let mut data = lines.filter_map(|(i, l)| match l {
        Ok(l) => {
            let t = l.trim();
            (!t.is_empty() && !t.starts_with('%')).then(|| Ok((i + 1, t.to_owned())))
        }
        Err(e) => Some(Err(Error::Io(e))),
    });

    let (size_line, size) = data.next().ok_or_else(|| err(2, "missing size line"))??;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| err(size_line, format!("bad size token `{t}`"))))
        .collect::<Result<_>>()?;
    let (nrows, ncols) = match (layout, dims.as_slice()) {
        (Layout::Coordinate, [r, c, _]) | (Layout::Array, [r, c]) => (*r, *c),
        _ => return Err(err(size_line, "malformed size line")),
    };
    if symmetry != Symmetry::General && nrows != ncols {
        return Err(err(size_line, "symmetric storage requires a square matrix"));
    }

    let mut triplets = Vec::new();
    let mut push = |r: usize, c: usize, v: f64| {
        triplets.push((r, c, v));
        if r != c {
            match symmetry {
                Symmetry::General => {}
                Symmetry::Symmetric => triplets.push((c, r, v)),
                Symmetry::Skew => triplets.push((c, r, -v)),
            }
        }
    };

    match layout {
        Layout::Coordinate => {
            let nnz = dims[2];
            let mut seen = 0;
            for item in data {
                let (ln, text) = item?;
                let mut toks = text.split_whitespace();
                let r = index(toks.next(), nrows, ln)?;
                let c = index(toks.next(), ncols, ln)?;
                let v = match field {
                    Field::Pattern => 1.0,
                    Field::Real => number(toks.next(), ln)?,
                };
                if symmetry != Symmetry::General && r < c {
                    return Err(err(ln, "entry above the diagonal in symmetric storage"));
                }
                push(r, c, v);
                seen += 1;
                if seen > nnz {
                    return Err(err(ln, format!("more than the declared {nnz} entries")));
                }
            }
            if seen != nnz {
                return Err(err(size_line, format!("declared {nnz} entries, found {seen}")));
            }
        }
        Layout::Array => {
            // column-major; symmetric storage lists only the lower triangle
            let mut cells = Vec::new();
            for c in 0..ncols {
                let start = match symmetry {
                    Symmetry::General => 0,
                    Symmetry::Symmetric => c,
                    Symmetry::Skew => c + 1,
                };
                cells.extend((start..nrows).map(|r| (r, c)));
            }
            let mut values = Vec::with_capacity(cells.len());
            let mut last_line = size_line;
            for item in data {
                let (ln, text) = item?;
                last_line = ln;
                for tok in text.split_whitespace() {
                    values.push(number(Some(tok), ln)?);
                }
            }
            if values.len() != cells.len() {
                return Err(err(
                    last_line,
                    format!("expected {} values, found {}", cells.len(), values.len()),
                ));
            }
            for ((r, c), v) in cells.into_iter().zip(values) {
                if v != 0.0 {
                    push(r, c, v);
                }
            }
        }
    }
    CsMatrix::from_triplets(nrows, ncols, triplets)
}

pub fn read_file(path: impl AsRef<Path>) -> Result<CsMatrix> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| Error::MatrixMarket(format!("{}: {e}", path.display())))?;
    read(file).map_err(|e| match e {
        Error::MatrixMarket(m) => Error::MatrixMarket(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Serializes in `coordinate real general` form.
pub fn to_string(m: &CsMatrix) -> String {
    let mut out = String::from("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(out, "{} {} {}", m.nrows(), m.ncols(), m.nnz());
    for (r, c, v) in m.triplets() {
        let _ = writeln!(out, "{} {} {:e}", r + 1, c + 1, v);
    }
    out
}
