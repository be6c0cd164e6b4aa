//! Matrix Market and LIBSVM readers/writers, plus the `key = value` report.
//!
//! Floats are written with Rust's shortest round-trip formatting.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::builders::LabeledDataset;
use crate::error::{Result, SspError};
use crate::linalg::Matrix;

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> SspError {
    SspError::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Field {
    Real,
    Pattern,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    SkewSymmetric,
}

/// Parses Matrix Market text. Coordinate files give a sparse matrix, array
/// files a dense one. `path` only labels errors.
pub fn parse_matrix_market(text: &str, path: &Path) -> Result<Matrix> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (hline, header) = lines.next().ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let tokens: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_err(
            path,
            hline,
            "expected `%%MatrixMarket matrix <format> <field> <symmetry>`",
        ));
    }
    let coordinate = match tokens[2].as_str() {
        "coordinate" => true,
        "array" => false,
        other => return Err(parse_err(path, hline, format!("unknown format `{other}`"))),
    };
    let field = match tokens[3].as_str() {
        "real" | "integer" | "double" => Field::Real,
        "pattern" if coordinate => Field::Pattern,
        other => return Err(parse_err(path, hline, format!("unsupported field `{other}`"))),
    };
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::SkewSymmetric,
        other => return Err(parse_err(path, hline, format!("unsupported symmetry `{other}`"))),
    };
    let mut body = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (sline, size) = body.next().ok_or_else(|| parse_err(path, hline, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| parse_err(path, sline, "malformed size line"))?;
    let expected = if coordinate { 3 } else { 2 };
    if dims.len() != expected {
        return Err(parse_err(path, sline, format!("size line needs {expected} integers")));
    }
    let (rows, cols) = (dims[0], dims[1]);
    if symmetry != Symmetry::General && rows != cols {
        return Err(parse_err(path, sline, "symmetric matrix must be square"));
    }
    let parse_value = |t: &str, line: usize| -> Result<f64> {
        let v: f64 = t
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad value `{t}`")))?;
        if !v.is_finite() {
            return Err(parse_err(path, line, "non-finite value"));
        }
        Ok(v)
    };

    if !coordinate {
        let mut col_major = Vec::with_capacity(rows * cols);
        for (line, text) in body {
            let mut it = text.split_whitespace();
            let t = it.next().expect("line is not blank");
            if it.next().is_some() {
                return Err(parse_err(path, line, "array entries take one value per line"));
            }
            if col_major.len() == rows * cols {
                return Err(parse_err(path, line, "more entries than the size line declares"));
            }
            col_major.push(parse_value(t, line)?);
        }
        if symmetry != Symmetry::General {
            return Err(parse_err(path, hline, "only general array files are supported"));
        }
        if col_major.len() != rows * cols {
            return Err(parse_err(
                path,
                sline,
                format!("expected {} entries, found {}", rows * cols, col_major.len()),
            ));
        }
        let mut data = vec![0.0; rows * cols];
        for j in 0..cols {
            for i in 0..rows {
                data[i * cols + j] = col_major[j * rows + i];
            }
        }
        return Matrix::from_dense(rows, cols, data);
    }

    let nnz = dims[2];
    let mut seen = HashSet::with_capacity(nnz);
    let mut trip = Vec::with_capacity(nnz);
    let mut count = 0;
    for (line, text) in body {
        let toks: Vec<&str> = text.split_whitespace().collect();
        let want = if field == Field::Pattern { 2 } else { 3 };
        if toks.len() != want {
            return Err(parse_err(path, line, format!("expected {want} tokens per entry")));
        }
        let idx = |t: &str| -> Result<usize> {
            t.parse::<usize>()
                .map_err(|_| parse_err(path, line, format!("bad index `{t}`")))
        };
        let (i, j) = (idx(toks[0])?, idx(toks[1])?);
        if i == 0 || j == 0 || i > rows || j > cols {
            return Err(parse_err(path, line, format!("index ({i},{j}) outside {rows}x{cols}")));
        }
        let (i, j) = (i - 1, j - 1);
        if symmetry != Symmetry::General && j > i {
            return Err(parse_err(path, line, "symmetric files store the lower triangle only"));
        }
        if symmetry == Symmetry::SkewSymmetric && i == j {
            return Err(parse_err(path, line, "skew-symmetric files have no diagonal entries"));
        }
        if !seen.insert((i, j)) {
            return Err(parse_err(path, line, format!("duplicate entry ({},{})", i + 1, j + 1)));
        }
        let v = if field == Field::Pattern {
            1.0
        } else {
            parse_value(toks[2], line)?
        };
        trip.push((i, j, v));
        match symmetry {
            Symmetry::Symmetric if i != j => trip.push((j, i, v)),
            Symmetry::SkewSymmetric => trip.push((j, i, -v)),
            _ => {}
        }
        count += 1;
        if count > nnz {
            return Err(parse_err(path, line, "more entries than the size line declares"));
        }
    }
    if count != nnz {
        return Err(parse_err(path, sline, format!("expected {nnz} entries, found {count}")));
    }
    Matrix::from_triplets(rows, cols, &trip)
}

pub fn read_matrix_market(path: &Path) -> Result<Matrix> {
    let text = fs::read_to_string(path)?;
    parse_matrix_market(&text, path)
}

/// Sparse matrices in coordinate format, dense ones in array format.
pub fn format_matrix_market(m: &Matrix) -> String {
    let mut out = String::new();
    if m.is_sparse() {
        let trip = m.triplets();
        out.push_str("%%MatrixMarket matrix coordinate real general\n");
        let _ = writeln!(out, "{} {} {}", m.nrows(), m.ncols(), trip.len());
        for (i, j, v) in trip {
            let _ = writeln!(out, "{} {} {}", i + 1, j + 1, v);
        }
    } else {
        out.push_str("%%MatrixMarket matrix array real general\n");
        let _ = writeln!(out, "{} {}", m.nrows(), m.ncols());
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let _ = writeln!(out, "{}", m.get(i, j));
            }
        }
    }
    out
}

pub fn write_matrix_market(path: &Path, m: &Matrix) -> Result<()> {
    fs::write(path, format_matrix_market(m))?;
    Ok(())
}

/// A Matrix Market file holding a single row or column.
pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let m = read_matrix_market(path)?;
    if m.ncols() != 1 && m.nrows() != 1 {
        return Err(parse_err(
            path,
            2,
            format!("expected a vector, found {}x{}", m.nrows(), m.ncols()),
        ));
    }
    let dense = m.to_dense();
    Ok(if m.ncols() == 1 {
        (0..m.nrows()).map(|i| dense.get(i, 0)).collect()
    } else {
        (0..m.ncols()).map(|j| dense.get(0, j)).collect()
    })
}

pub fn write_vector(path: &Path, v: &[f64]) -> Result<()> {
    write_matrix_market(path, &Matrix::from_dense(v.len(), 1, v.to_vec())?)
}

/// How raw LIBSVM labels become ±1.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum LabelMap {
    /// Labels must already be `+1` or `-1`.
    #[default]
    Signed,
    /// `1 → +1`, `0 → −1`.
    ZeroOne,
    /// The given value maps to +1, anything else to −1.
    PositiveClass(f64),
}

impl LabelMap {
    fn apply(&self, raw: f64) -> Option<f64> {
        match *self {
            LabelMap::Signed if raw == 1.0 || raw == -1.0 => Some(raw),
            LabelMap::Signed => None,
            LabelMap::ZeroOne if raw == 1.0 => Some(1.0),
            LabelMap::ZeroOne if raw == 0.0 => Some(-1.0),
            LabelMap::ZeroOne => None,
            LabelMap::PositiveClass(p) => Some(if raw == p { 1.0 } else { -1.0 }),
        }
    }
}

/// Parses LIBSVM text. Feature count is the largest index seen unless
/// `n_features` is given.
pub fn parse_libsvm(text: &str, path: &Path, labels: LabelMap, n_features: Option<usize>) -> Result<LabeledDataset> {
    let mut features = Vec::new();
    let mut ys = Vec::new();
    let mut max_index = 0;
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut toks = content.split_whitespace();
        let label_tok = toks.next().expect("content is not blank");
        let raw_label: f64 = label_tok
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad label `{label_tok}`")))?;
        let y = labels
            .apply(raw_label)
            .ok_or_else(|| parse_err(path, line, format!("label `{label_tok}` not allowed by the label map")))?;
        let mut row: Vec<(usize, f64)> = Vec::new();
        for t in toks {
            let (i, v) = t
                .split_once(':')
                .ok_or_else(|| parse_err(path, line, format!("expected `index:value`, found `{t}`")))?;
            let i: usize = i
                .parse()
                .map_err(|_| parse_err(path, line, format!("bad index `{i}`")))?;
            let v: f64 = v
                .parse()
                .map_err(|_| parse_err(path, line, format!("bad value `{v}`")))?;
            if i == 0 {
                return Err(parse_err(path, line, "feature indices are 1-based"));
            }
            if !v.is_finite() {
                return Err(parse_err(path, line, "non-finite value"));
            }
            if row.last().is_some_and(|&(prev, _)| prev >= i - 1) {
                return Err(parse_err(path, line, "feature indices must be strictly ascending"));
            }
            max_index = max_index.max(i);
            row.push((i - 1, v));
        }
        features.push(row);
        ys.push(y);
    }
    let n = match n_features {
        Some(n) if n < max_index => {
            return Err(parse_err(
                path,
                0,
                format!("feature index {max_index} exceeds the declared {n} features"),
            ))
        }
        Some(n) => n,
        None => max_index,
    };
    LabeledDataset::new(n, features, ys)
}

pub fn read_libsvm(path: &Path, labels: LabelMap) -> Result<LabeledDataset> {
    let text = fs::read_to_string(path)?;
    parse_libsvm(&text, path, labels, None)
}

pub fn format_libsvm(data: &LabeledDataset) -> String {
    let mut out = String::new();
    for i in 0..data.len() {
        out.push_str(if data.label(i) > 0.0 { "+1" } else { "-1" });
        for &(j, v) in data.sparse_row(i) {
            let _ = write!(out, " {}:{}", j + 1, v);
        }
        out.push('\n');
    }
    out
}

pub fn write_libsvm(path: &Path, data: &LabeledDataset) -> Result<()> {
    fs::write(path, format_libsvm(data))?;
    Ok(())
}

/// Ordered `key = value` summary.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    entries: Vec<(String, String)>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.entries.push((key.to_string(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn parse(text: &str) -> Self {
        let entries = text
            .lines()
            .filter_map(|l| l.split_once(" = "))
            .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
            .collect();
        Self { entries }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render())?;
        Ok(())
    }
}

/// `path` with `suffix` inserted before the extension.
pub fn suffixed_path(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}{suffix}"),
    };
    path.with_file_name(name)
}
