//! Sample containers, CSV ingestion, ranks, and covariate scaling.
//!
//! Matrices are stored row-major since every consumer (nearest-neighbor
//! search, resampling, basis evaluation) walks the data one observation at a
//! time.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Dense row-major real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                what: "matrix buffer",
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::RaggedRow {
                    row: i,
                    expected: cols,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.data[i * self.cols + k]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Rows picked by `indices`, in that order (repeats allowed).
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    /// Applies `f` to every row and returns the mapped matrix.
    pub fn map_rows<F>(&self, out_cols: usize, mut f: F) -> Matrix
    where
        F: FnMut(&[f64], &mut [f64]),
    {
        let mut data = vec![0.0; self.rows * out_cols];
        for i in 0..self.rows {
            f(self.row(i), &mut data[i * out_cols..(i + 1) * out_cols]);
        }
        Matrix {
            rows: self.rows,
            cols: out_cols,
            data,
        }
    }

    fn check_finite(&self, what: &'static str) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(Error::NonFinite { what, index }),
            None => Ok(()),
        }
    }
}

/// Paired covariates `x` (n × d) and responses `y` (length n).
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    x: Matrix,
    y: Vec<f64>,
}

impl Sample {
    pub fn new(x: Matrix, y: Vec<f64>) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::DimensionMismatch {
                what: "sample rows",
                expected: x.rows(),
                found: y.len(),
            });
        }
        if y.len() < 2 {
            return Err(Error::InsufficientRows(y.len()));
        }
        if x.cols() == 0 {
            return Err(Error::NoCovariates);
        }
        x.check_finite("covariates")?;
        if let Some(index) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "response",
                index,
            });
        }
        Ok(Self { x, y })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn d(&self) -> usize {
        self.x.cols()
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Subsample built from row indices. Requires at least two indices.
    pub fn select(&self, indices: &[usize]) -> Result<Sample> {
        if indices.len() < 2 {
            return Err(Error::InsufficientRows(indices.len()));
        }
        Ok(Sample {
            x: self.x.select_rows(indices),
            y: indices.iter().map(|&i| self.y[i]).collect(),
        })
    }
}

/// Which CSV column holds the response.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum YColumn {
    Index(usize),
    Last,
}

impl std::str::FromStr for YColumn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("last") {
            return Ok(YColumn::Last);
        }
        s.parse::<usize>()
            .map(YColumn::Index)
            .map_err(|_| Error::InvalidYColumn(s.to_string()))
    }
}

impl std::fmt::Display for YColumn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            YColumn::Index(i) => write!(f, "{i}"),
            YColumn::Last => f.write_str("last"),
        }
    }
}

/// Reads a comma-separated file. A single leading header line is detected
/// when any of its tokens fails to parse as a number.
pub fn load_csv(path: impl AsRef<Path>, y_column: YColumn) -> Result<Sample> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_csv(&text, y_column)
}

/// Parses CSV text; see [`load_csv`].
pub fn parse_csv(text: &str, y_column: YColumn) -> Result<Sample> {
    let mut lines: Vec<(usize, Vec<&str>)> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i, l.split(',').map(str::trim).collect()))
        .collect();

    if let Some((_, first)) = lines.first() {
        if first.iter().any(|tok| tok.parse::<f64>().is_err()) {
            lines.remove(0);
        }
    }
    if lines.len() < 2 {
        return Err(Error::InsufficientRows(lines.len()));
    }

    let arity = lines[0].1.len();
    let y_idx = match y_column {
        YColumn::Last => arity - 1,
        YColumn::Index(i) if i < arity => i,
        YColumn::Index(i) => return Err(Error::InvalidYColumn(i.to_string())),
    };
    if arity < 2 {
        return Err(Error::NoCovariates);
    }

    let n = lines.len();
    let d = arity - 1;
    let mut x = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    for (line_no, tokens) in &lines {
        if tokens.len() != arity {
            return Err(Error::RaggedRow {
                row: *line_no,
                expected: arity,
                found: tokens.len(),
            });
        }
        for (col, tok) in tokens.iter().enumerate() {
            let v: f64 = tok.parse().map_err(|_| Error::NonNumericCell {
                row: *line_no,
                col,
                token: tok.to_string(),
            })?;
            if col == y_idx {
                y.push(v);
            } else {
                x.push(v);
            }
        }
    }
    Sample::new(Matrix::from_row_major(n, d, x)?, y)
}

/// Ranks `r_i = #{j : y_j <= y_i}`; ties share their maximal rank.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankVector(Vec<usize>);

impl RankVector {
    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn compute_ranks(y: &[f64]) -> Result<RankVector> {
    if y.len() < 2 {
        return Err(Error::InsufficientRows(y.len()));
    }
    if let Some(index) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "response",
            index,
        });
    }
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_unstable_by(|&a, &b| y[a].total_cmp(&y[b]));

    let mut ranks = vec![0; y.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && y[order[end]] == y[order[start]] {
            end += 1;
        }
        for &i in &order[start..end] {
            ranks[i] = end;
        }
        start = end;
    }
    Ok(RankVector(ranks))
}

/// Covariates mapped column-wise onto [0, 1], with the affine map kept so
/// that new points can be transformed identically.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledMatrix {
    pub xs: Matrix,
    pub offsets: Vec<f64>,
    pub scales: Vec<f64>,
}

impl ScaledMatrix {
    /// Wraps data assumed to be in [0, 1] already (identity map).
    pub fn identity(x: Matrix) -> Self {
        let d = x.cols();
        Self {
            xs: x,
            offsets: vec![0.0; d],
            scales: vec![1.0; d],
        }
    }

    /// Applies the stored map to a new point.
    pub fn transform_point(&self, point: &[f64]) -> Vec<f64> {
        point
            .iter()
            .zip(self.offsets.iter().zip(&self.scales))
            .map(|(v, (o, s))| (v - o) / s)
            .collect()
    }
}

/// How covariates are mapped before basis evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum CovariateMap {
    Identity,
    /// Min-max scaling fitted to the data at hand.
    MinMax,
    /// A previously fitted affine map, e.g. from the full sample.
    Fixed { offsets: Vec<f64>, scales: Vec<f64> },
}

impl CovariateMap {
    pub fn apply(&self, x: &Matrix) -> Result<ScaledMatrix> {
        match self {
            CovariateMap::Identity => Ok(ScaledMatrix::identity(x.clone())),
            CovariateMap::MinMax => minmax_scale(x),
            CovariateMap::Fixed { offsets, scales } => {
                let d = x.cols();
                if offsets.len() != d || scales.len() != d {
                    return Err(Error::DimensionMismatch {
                        what: "covariate map",
                        expected: d,
                        found: offsets.len(),
                    });
                }
                let xs = x.map_rows(d, |row, out| {
                    for k in 0..d {
                        out[k] = (row[k] - offsets[k]) / scales[k];
                    }
                });
                Ok(ScaledMatrix {
                    xs,
                    offsets: offsets.clone(),
                    scales: scales.clone(),
                })
            }
        }
    }
}

pub fn minmax_scale(x: &Matrix) -> Result<ScaledMatrix> {
    x.check_finite("covariates")?;
    let d = x.cols();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for i in 0..x.rows() {
        for (k, &v) in x.row(i).iter().enumerate() {
            lo[k] = lo[k].min(v);
            hi[k] = hi[k].max(v);
        }
    }
    let offsets = lo;
    let scales: Vec<f64> = hi
        .iter()
        .zip(&offsets)
        .map(|(h, l)| if h > l { h - l } else { 1.0 })
        .collect();
    let xs = x.map_rows(d, |row, out| {
        for k in 0..d {
            out[k] = (row[k] - offsets[k]) / scales[k];
        }
    });
    Ok(ScaledMatrix {
        xs,
        offsets,
        scales,
    })
}
