//! Dense symmetric matrices and their plain-text file format.
//!
//! The text format is line 1 = `n`, followed by `n` rows of `n`
//! whitespace-separated decimals. Symmetry is checked on load with an
//! absolute tolerance of `1e-12 * max(1, |a_ij|, |a_ji|)` and the stored matrix
//! is then symmetrized exactly.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Symmetry tolerance applied when loading matrices from text or dense storage.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// An `n x n` real symmetric matrix with finite entries.
///
/// Storage is a full dense matrix; every constructor mirrors the upper triangle
/// so `a[i][j] == a[j][i]` holds bit-for-bit.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    inner: DMatrix<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            inner: DMatrix::zeros(n, n),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            inner: DMatrix::identity(n, n),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            inner: DMatrix::from_fn(n, n, |i, j| if i == j { diag[i] } else { 0.0 }),
        }
    }

    /// Builds a matrix from `f(i, j)` evaluated on the upper triangle (`i <= j`).
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut inner = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in 0..=j {
                let v = f(i, j);
                if !v.is_finite() {
                    return Err(Error::NonFinite(i, j));
                }
                inner[(i, j)] = v;
                inner[(j, i)] = v;
            }
        }
        Ok(Self { inner })
    }

    /// Validates symmetry within [`SYMMETRY_TOL`] and symmetrizes exactly.
    pub fn from_dmatrix(m: DMatrix<f64>) -> Result<Self> {
        Self::from_dmatrix_with_tol(m, SYMMETRY_TOL)
    }

    pub fn from_dmatrix_with_tol(mut m: DMatrix<f64>, tol: f64) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        let n = m.nrows();
        for j in 0..n {
            for i in 0..=j {
                let (a, b) = (m[(i, j)], m[(j, i)]);
                if !a.is_finite() {
                    return Err(Error::NonFinite(i, j));
                }
                if !b.is_finite() {
                    return Err(Error::NonFinite(j, i));
                }
                let diff = (a - b).abs();
                if diff > tol * 1f64.max(a.abs()).max(b.abs()) {
                    return Err(Error::NotSymmetric { i, j, diff });
                }
                let avg = 0.5 * (a + b);
                m[(i, j)] = avg;
                m[(j, i)] = avg;
            }
        }
        Ok(Self { inner: m })
    }

    /// Symmetrizes `(m + m^T) / 2` without a tolerance check.
    pub(crate) fn symmetrized(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        let mut inner = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in 0..=j {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                inner[(i, j)] = v;
                inner[(j, i)] = v;
            }
        }
        Self { inner }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner[(i, j)]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.inner[(i, j)] = value;
        self.inner[(j, i)] = value;
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.inner
    }

    pub fn diagonal(&self) -> DVector<f64> {
        self.inner.diagonal()
    }

    pub fn trace(&self) -> f64 {
        self.inner.trace()
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.inner * x
    }

    /// `y <- self * x`.
    pub fn mul_vec_into(&self, x: &DVector<f64>, y: &mut DVector<f64>) {
        self.inner.mul_to(x, y);
    }

    /// Returns `self + scale * v v^T`.
    pub fn add_rank_one(&self, v: &DVector<f64>, scale: f64) -> Self {
        let mut out = self.clone();
        out.add_rank_one_mut(v, scale);
        out
    }

    pub fn add_rank_one_mut(&mut self, v: &DVector<f64>, scale: f64) {
        let n = self.dim();
        for j in 0..n {
            let vj = scale * v[j];
            for i in 0..n {
                self.inner[(i, j)] += v[i] * vj;
            }
        }
        // v_i * (s v_j) and v_j * (s v_i) can round differently.
        *self = Self::symmetrized(&self.inner);
    }

    /// Returns `self + diag(w)`.
    pub fn add_diagonal(&self, w: &DVector<f64>) -> Self {
        let mut out = self.clone();
        for i in 0..self.dim() {
            out.inner[(i, i)] += w[i];
        }
        out
    }

    pub fn add(&self, other: &SymMatrix) -> Self {
        Self {
            inner: &self.inner + &other.inner,
        }
    }

    pub fn sub(&self, other: &SymMatrix) -> Self {
        Self {
            inner: &self.inner - &other.inner,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            inner: &self.inner * c,
        }
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: f64, other: &SymMatrix) {
        self.inner += &other.inner * c;
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.norm()
    }

    /// Frobenius inner product `Tr(self * other)`.
    pub fn dot(&self, other: &SymMatrix) -> f64 {
        self.inner.dot(&other.inner)
    }

    /// Quadratic form `x^T self x`.
    pub fn quad_form(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.inner * x))
    }

    /// `O self O^T` for a square `O`.
    pub fn conjugate(&self, o: &DMatrix<f64>) -> Self {
        Self::symmetrized(&(o * &self.inner * o.transpose()))
    }

    /// Applies `f` to every stored entry; the result stays symmetric because
    /// `f` sees identical values at mirrored positions.
    pub fn map_entries(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            inner: self.inner.map(f),
        }
    }

    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        (&self.inner - &other.inner).amax()
    }

    /// Parses the plain-text matrix format.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (first_line, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "empty input, expected dimension".into(),
        })?;
        let n: usize = header.parse().map_err(|_| Error::Parse {
            line: first_line,
            msg: format!("expected a single dimension, found {header:?}"),
        })?;
        if n == 0 {
            return Err(Error::Parse {
                line: first_line,
                msg: "dimension must be positive".into(),
            });
        }
        let mut m = DMatrix::zeros(n, n);
        let mut row = 0;
        let mut last_line = first_line;
        for (line_no, line) in lines {
            last_line = line_no;
            if row == n {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("unexpected extra row; matrix has {n} rows"),
                });
            }
            let values = parse_row(line, line_no)?;
            if values.len() != n {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected {n} values, found {}", values.len()),
                });
            }
            for (j, v) in values.into_iter().enumerate() {
                m[(row, j)] = v;
            }
            row += 1;
        }
        if row != n {
            return Err(Error::Parse {
                line: last_line + 1,
                msg: format!("expected {n} rows, found {row}"),
            });
        }
        Self::from_dmatrix(m)
    }

    /// Serializes to the plain-text format with round-trip decimal output.
    pub fn to_text(&self) -> String {
        let n = self.dim();
        let mut out = String::with_capacity(n * n * 24);
        let _ = writeln!(out, "{n}");
        for i in 0..n {
            for j in 0..n {
                if j > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{}", self.inner[(i, j)]);
            }
            out.push('\n');
        }
        out
    }

    pub fn read_from(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_text(&std::fs::read_to_string(path)?)
    }

    pub fn write_to(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

pub(crate) fn parse_row(line: &str, line_no: usize) -> Result<Vec<f64>> {
    line.split_whitespace()
        .map(|tok| {
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("invalid number {tok:?}"),
            })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Parse {
                    line: line_no,
                    msg: format!("non-finite value {tok:?}"),
                })
            }
        })
        .collect()
}
