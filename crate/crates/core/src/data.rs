//! Row-sparse datasets, LibSVM text I/O and the feature block partition.
//!
//! Rows are stored in CSR layout with 0-based, strictly increasing column
//! indices. A [`Dataset`] is immutable once built and can be shared freely
//! between concurrent solver runs.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::ops::Range;
use std::path::Path;

use flate2::read::MultiGzDecoder;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Immutable sparse design matrix plus labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
    labels: Vec<f64>,
    dim: usize,
}

/// Borrowed view of one sample's stored entries.
#[derive(Debug, Clone, Copy)]
pub struct Row<'a> {
    pub indices: &'a [usize],
    pub values: &'a [f64],
}

impl<'a> Row<'a> {
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn dot(&self, v: &[f64]) -> f64 {
        self.indices
            .iter()
            .zip(self.values)
            .map(|(&j, &a)| a * v[j])
            .sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|a| a * a).sum()
    }

    /// The stored entries whose column falls in `range`.
    pub fn restrict(&self, range: Range<usize>) -> Row<'a> {
        let lo = self.indices.partition_point(|&j| j < range.start);
        let hi = lo + self.indices[lo..].partition_point(|&j| j < range.end);
        Row {
            indices: &self.indices[lo..hi],
            values: &self.values[lo..hi],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + 'a {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }
}

impl Dataset {
    /// Builds a dataset from raw CSR arrays, checking every invariant.
    pub fn from_csr(
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
        labels: Vec<f64>,
        dim: usize,
    ) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyInput);
        }
        if dim == 0 {
            return Err(Error::invalid("feature dimension must be at least 1"));
        }
        if indptr.len() != labels.len() + 1 {
            return Err(Error::DimensionMismatch {
                expected: labels.len() + 1,
                got: indptr.len(),
            });
        }
        if indices.len() != values.len() || indptr.last() != Some(&indices.len()) || indptr[0] != 0
        {
            return Err(Error::invalid("inconsistent CSR arrays"));
        }
        for (i, w) in indptr.windows(2).enumerate() {
            if w[0] > w[1] {
                return Err(Error::invalid(format!("row {i}: decreasing row pointer")));
            }
            let cols = &indices[w[0]..w[1]];
            if cols.windows(2).any(|c| c[0] >= c[1]) {
                return Err(Error::invalid(format!("row {i}: indices not strictly increasing")));
            }
            if cols.last().is_some_and(|&j| j >= dim) {
                return Err(Error::invalid(format!("row {i}: index out of range")));
            }
        }
        Ok(Self {
            indptr,
            indices,
            values,
            labels,
            dim,
        })
    }

    /// Builds a dataset from dense rows, storing only the nonzero entries.
    pub fn from_dense(rows: &[Vec<f64>], labels: Vec<f64>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            for (j, &a) in row.iter().enumerate() {
                if a != 0.0 {
                    indices.push(j);
                    values.push(a);
                }
            }
            indptr.push(indices.len());
        }
        Self::from_csr(indptr, indices, values, labels, dim)
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn row(&self, i: usize) -> Row<'_> {
        let (lo, hi) = (self.indptr[i], self.indptr[i + 1]);
        Row {
            indices: &self.indices[lo..hi],
            values: &self.values[lo..hi],
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = Row<'_>> + '_ {
        (0..self.n_samples()).map(move |i| self.row(i))
    }

    /// Fraction of stored entries, `nnz / (n * d)`.
    pub fn sparsity(&self) -> f64 {
        self.nnz() as f64 / (self.n_samples() as f64 * self.dim as f64)
    }

    /// Grows the feature dimension, e.g. to align a test file with its
    /// training file. Shrinking is rejected.
    pub fn with_dim(mut self, dim: usize) -> Result<Self> {
        if dim < self.dim {
            return Err(Error::invalid(format!(
                "cannot shrink dimension from {} to {dim}",
                self.dim
            )));
        }
        self.dim = dim;
        Ok(self)
    }

    /// `<[a_i]_l, [v]_l>`, touching only the stored entries of row `i` in block `l`.
    pub fn row_block_dot(
        &self,
        i: usize,
        v: &[f64],
        partition: &BlockPartition,
        l: usize,
    ) -> Result<f64> {
        if i >= self.n_samples() {
            return Err(Error::invalid(format!("sample index {i} out of range")));
        }
        if l >= partition.blocks() {
            return Err(Error::invalid(format!("block index {l} out of range")));
        }
        if v.len() != self.dim || partition.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        Ok(self.row(i).restrict(partition.range(l)).dot(v))
    }

    pub fn max_row_norm_sq(&self) -> f64 {
        self.rows().map(|r| r.norm_sq()).fold(0.0, f64::max)
    }

    /// `max_i max_l ||[a_i]_l||^2`.
    pub fn max_block_row_norm_sq(&self, partition: &BlockPartition) -> f64 {
        let mut best = 0.0f64;
        for row in self.rows() {
            let mut acc = 0.0;
            let mut current = None;
            for (j, a) in row.iter() {
                let b = partition.block_of(j);
                if current != Some(b) {
                    best = best.max(acc);
                    acc = 0.0;
                    current = Some(b);
                }
                acc += a * a;
            }
            best = best.max(acc);
        }
        best
    }

    /// Returns a copy with rows permuted by a seeded shuffle.
    pub fn shuffle_rows(&self, seed: u64) -> Dataset {
        let mut order: Vec<usize> = (0..self.n_samples()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut indptr = Vec::with_capacity(self.indptr.len());
        let mut indices = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        let mut labels = Vec::with_capacity(self.n_samples());
        indptr.push(0);
        for &i in &order {
            let row = self.row(i);
            indices.extend_from_slice(row.indices);
            values.extend_from_slice(row.values);
            indptr.push(indices.len());
            labels.push(self.labels[i]);
        }
        Dataset {
            indptr,
            indices,
            values,
            labels,
            dim: self.dim,
        }
    }

    /// Serializes back to LibSVM text (1-based indices, shortest round-trip floats).
    pub fn to_libsvm(&self) -> String {
        let mut out = String::new();
        for (i, row) in self.rows().enumerate() {
            write!(out, "{}", self.labels[i]).unwrap();
            for (j, a) in row.iter() {
                write!(out, " {}:{}", j + 1, a).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Parses LibSVM text: `label idx:val idx:val ...` per line, 1-based
/// ascending indices, `#` starts a comment.
pub fn parse_libsvm<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut indptr = vec![0];
    let mut indices = Vec::new();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut dim = 0usize;

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let content = match line.find('#') {
            Some(pos) => &line[..pos],
            None => &line,
        };
        let mut tokens = content.split_whitespace();
        let Some(label_tok) = tokens.next() else {
            continue;
        };
        let label: f64 = label_tok
            .parse()
            .map_err(|_| Error::parse(lineno, format!("malformed label `{label_tok}`")))?;
        if !label.is_finite() {
            return Err(Error::parse(lineno, format!("non-finite label `{label_tok}`")));
        }
        let row_start = indices.len();
        for tok in tokens {
            let (idx_str, val_str) = tok
                .split_once(':')
                .ok_or_else(|| Error::parse(lineno, format!("malformed token `{tok}`")))?;
            let idx: i64 = idx_str
                .parse()
                .map_err(|_| Error::parse(lineno, format!("malformed index `{idx_str}`")))?;
            if idx < 1 {
                return Err(Error::parse(lineno, format!("index {idx} < 1")));
            }
            let val: f64 = val_str
                .parse()
                .map_err(|_| Error::parse(lineno, format!("malformed value `{val_str}`")))?;
            if !val.is_finite() {
                return Err(Error::parse(lineno, format!("non-finite value `{val_str}`")));
            }
            let col = (idx - 1) as usize;
            if let Some(&prev) = indices[row_start..].last() {
                if col == prev {
                    return Err(Error::parse(lineno, format!("duplicate index {idx}")));
                }
                if col < prev {
                    return Err(Error::parse(lineno, format!("non-ascending index {idx}")));
                }
            }
            indices.push(col);
            values.push(val);
            dim = dim.max(col + 1);
        }
        indptr.push(indices.len());
        labels.push(label);
    }

    if labels.is_empty() {
        return Err(Error::EmptyInput);
    }
    if dim == 0 {
        return Err(Error::parse(labels.len(), "no feature entries in input"));
    }
    Dataset::from_csr(indptr, indices, values, labels, dim)
}

pub fn parse_libsvm_str(text: &str) -> Result<Dataset> {
    parse_libsvm(text.as_bytes())
}

/// Loads a LibSVM file, transparently decompressing names ending in `.gz`.
pub fn load_libsvm(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path)?;
    let reader: Box<dyn Read> = if path.extension().is_some_and(|e| e == "gz") {
        Box::new(MultiGzDecoder::new(file))
    } else {
        Box::new(file)
    };
    parse_libsvm(BufReader::new(reader))
}

/// Contiguous equal-width split of `[0, d)` into `B` blocks of width
/// `ceil(d / B)`; trailing blocks may be short (or empty when `B` is close to `d`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockPartition {
    dim: usize,
    blocks: usize,
    size: usize,
}

impl BlockPartition {
    pub fn new(dim: usize, blocks: usize) -> Result<Self> {
        if blocks == 0 || blocks > dim {
            return Err(Error::invalid(format!(
                "block count {blocks} must satisfy 1 <= B <= d = {dim}"
            )));
        }
        Ok(Self {
            dim,
            blocks,
            size: dim.div_ceil(blocks),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    /// Nominal block width Ω.
    pub fn block_size(&self) -> usize {
        self.size
    }

    pub fn range(&self, l: usize) -> Range<usize> {
        let lo = (l * self.size).min(self.dim);
        let hi = ((l + 1) * self.size).min(self.dim);
        lo..hi
    }

    pub fn block_of(&self, j: usize) -> usize {
        j / self.size
    }
}

pub fn make_partition(dim: usize, blocks: usize) -> Result<BlockPartition> {
    BlockPartition::new(dim, blocks)
}
