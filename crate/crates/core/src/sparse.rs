//! Compressed sparse row storage and the plain-text triplet format used for
//! every matrix artifact.
//!
//! The triplet format is line oriented:
//!
//! ```text
//! %%triplet
//! <rows> <cols> <nnz>
//! <row> <col> <value>
//! ...
//! ```
//!
//! Indices are zero based and entries are written in row-major order. Values
//! use the shortest representation that round-trips exactly.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

const MAGIC: &str = "%%triplet";

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        CsrMatrix {
            n_rows,
            n_cols,
            indptr: vec![0; n_rows + 1],
            indices: Vec::new(),
            data: Vec::new(),
        }
    }

    /// Builds a matrix from per-row `(column, value)` lists. Entries are sorted
    /// by column, explicit zeros are dropped and duplicate columns are summed.
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        for (r, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|&(c, _)| c);
            let start = indices.len();
            for (c, v) in row {
                if c >= n_cols {
                    return Err(Error::ShapeMismatch(format!(
                        "row {r} references column {c} but the matrix has {n_cols} columns"
                    )));
                }
                if indices.len() > start && *indices.last().unwrap() == c {
                    *data.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    data.push(v);
                }
            }
            // drop entries that are (or summed to) exact zeros
            let mut w = start;
            for i in start..indices.len() {
                if data[i] != 0.0 {
                    indices[w] = indices[i];
                    data[w] = data[i];
                    w += 1;
                }
            }
            indices.truncate(w);
            data.truncate(w);
            indptr.push(indices.len());
        }
        Ok(CsrMatrix {
            n_rows: indptr.len() - 1,
            n_cols,
            indptr,
            indices,
            data,
        })
    }

    pub fn from_dense(dense: &Array2<f64>) -> Self {
        let rows = dense
            .rows()
            .into_iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(c, &v)| (c, v))
                    .collect()
            })
            .collect();
        Self::from_rows(dense.ncols(), rows).expect("columns are in range")
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.indptr[r]..self.indptr[r + 1];
        (&self.indices[span.clone()], &self.data[span])
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n_rows, self.n_cols));
        for (r, c, v) in self.iter() {
            out[[r, c]] = v;
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn row_norm(&self, r: usize) -> f64 {
        self.row(r).1.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Number of rows holding a non-zero entry in each column.
    pub fn column_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_cols];
        for &c in &self.indices {
            counts[c] += 1;
        }
        counts
    }

    /// `self * rhs` where `rhs` is `n_cols x k`.
    pub fn mul_dense(&self, rhs: &Array2<f64>) -> Array2<f64> {
        assert_eq!(rhs.nrows(), self.n_cols, "inner dimensions disagree");
        let k = rhs.ncols();
        let mut out = Array2::zeros((self.n_rows, k));
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            let mut acc = out.row_mut(r);
            for (&c, &v) in cols.iter().zip(vals) {
                acc.scaled_add(v, &rhs.row(c));
            }
        }
        out
    }

    /// `self^T * rhs` where `rhs` is `n_rows x k`.
    pub fn t_mul_dense(&self, rhs: &Array2<f64>) -> Array2<f64> {
        assert_eq!(rhs.nrows(), self.n_rows, "inner dimensions disagree");
        let k = rhs.ncols();
        let mut out = Array2::zeros((self.n_cols, k));
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            let src = rhs.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                out.row_mut(c).scaled_add(v, &src);
            }
        }
        out
    }

    /// Scales every non-empty row to unit L2 norm.
    pub fn normalize_rows(&mut self) {
        for r in 0..self.n_rows {
            let norm = self.row_norm(r);
            if norm > 0.0 {
                for v in &mut self.data[self.indptr[r]..self.indptr[r + 1]] {
                    *v /= norm;
                }
            }
        }
    }

    pub fn write_triplets<W: Write>(&self, out: W) -> std::io::Result<()> {
        write_triplet_entries(out, self.n_rows, self.n_cols, self.nnz(), self.iter())
    }

    pub fn to_triplet_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_triplets(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn read_triplets<R: BufRead>(input: R, source: &str) -> Result<Self> {
        let mut lines = input.lines().enumerate().filter_map(|(i, l)| match l {
            Ok(l) if l.trim().is_empty() || l.starts_with('%') => None,
            other => Some((i + 1, other)),
        });
        let (line_no, header) = lines
            .next()
            .ok_or_else(|| Error::parse(source, 1, "missing dimension header"))?;
        let header = header.map_err(|e| Error::parse(source, line_no, e.to_string()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(source, line_no, format!("bad header: {e}")))?;
        let [n_rows, n_cols, nnz] = dims[..] else {
            return Err(Error::parse(source, line_no, "header must be `rows cols nnz`"));
        };
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_rows];
        let mut seen = 0;
        for (line_no, line) in lines {
            let line = line.map_err(|e| Error::parse(source, line_no, e.to_string()))?;
            let mut parts = line.split_whitespace();
            let (Some(r), Some(c), Some(v), None) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(Error::parse(source, line_no, "expected `row col value`"));
            };
            let bad = |what: &str| Error::parse(source, line_no, format!("bad {what}"));
            let r: usize = r.parse().map_err(|_| bad("row"))?;
            let c: usize = c.parse().map_err(|_| bad("column"))?;
            let v: f64 = v.parse().map_err(|_| bad("value"))?;
            if r >= n_rows || c >= n_cols {
                return Err(Error::parse(source, line_no, "index out of range"));
            }
            rows[r].push((c, v));
            seen += 1;
        }
        if seen != nnz {
            return Err(Error::parse(
                source,
                0,
                format!("header announces {nnz} entries, found {seen}"),
            ));
        }
        Self::from_rows(n_cols, rows)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_triplets(std::io::BufReader::new(file), &path.display().to_string())
    }
}

/// Writes the non-zero entries of a dense matrix in triplet format.
pub fn write_dense_triplets<W: Write>(out: W, dense: &Array2<f64>) -> std::io::Result<()> {
    let nnz = dense.iter().filter(|&&v| v != 0.0).count();
    let entries = dense
        .indexed_iter()
        .filter(|(_, &v)| v != 0.0)
        .map(|((r, c), &v)| (r, c, v));
    write_triplet_entries(out, dense.nrows(), dense.ncols(), nnz, entries)
}

pub fn dense_to_triplet_string(dense: &Array2<f64>) -> String {
    let mut buf = Vec::new();
    write_dense_triplets(&mut buf, dense).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

fn write_triplet_entries<W: Write>(
    mut out: W,
    n_rows: usize,
    n_cols: usize,
    nnz: usize,
    entries: impl Iterator<Item = (usize, usize, f64)>,
) -> std::io::Result<()> {
    let mut line = String::new();
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "{n_rows} {n_cols} {nnz}")?;
    for (r, c, v) in entries {
        line.clear();
        let _ = write!(line, "{r} {c} {v:?}");
        writeln!(out, "{line}")?;
    }
    Ok(())
}
