//! Dense matrices over exact rationals.
//!
//! Carrier for covariance matrices and parameter matrices. Solving and rank
//! go through fraction-free (Bareiss) elimination on integer-cleared rows to
//! keep coefficient growth under control.

use crate::rational::{format_rational, integer_rank, parse_rational, Rational};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MatrixError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is singular")]
    Singular,
    #[error("invalid matrix entry at row {row}, column {col}")]
    InvalidEntry { row: usize, col: usize },
    #[error("rows have unequal lengths")]
    RaggedRows,
}

/// Row-major matrix of [`Rational`] entries.
#[derive(Clone, PartialEq, Eq)]
pub struct RMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Rational>,
}

impl RMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Rational::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Rational::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Rational>>) -> Result<Self, MatrixError> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(MatrixError::RaggedRows);
        }
        Ok(Self {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Rational) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].clone())
    }

    pub fn mul(&self, other: &Self) -> Result<Self, MatrixError> {
        if self.cols != other.rows {
            return Err(MatrixError::DimensionMismatch(format!(
                "{}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Self::from_fn(self.rows, other.cols, |r, c| {
            (0..self.cols).map(|k| &self[(r, k)] * &other[(k, c)]).sum()
        }))
    }

    pub fn add(&self, other: &Self) -> Result<Self, MatrixError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(MatrixError::DimensionMismatch(format!(
                "{}x{} + {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Self::from_fn(self.rows, self.cols, |r, c| {
            &self[(r, c)] + &other[(r, c)]
        }))
    }

    pub fn sub(&self, other: &Self) -> Result<Self, MatrixError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(MatrixError::DimensionMismatch(format!(
                "{}x{} - {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Self::from_fn(self.rows, self.cols, |r, c| {
            &self[(r, c)] - &other[(r, c)]
        }))
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|r| (0..r).all(|c| self[(r, c)] == self[(c, r)]))
    }

    /// Clears denominators row by row, returning an integer matrix with the
    /// same rank and, for square matrices, a determinant of the same sign
    /// pattern up to positive row factors.
    fn cleared_rows(&self) -> Vec<Vec<BigInt>> {
        (0..self.rows)
            .map(|r| {
                let lcm = (0..self.cols).fold(BigInt::one(), |acc, c| {
                    acc.lcm(self[(r, c)].denom())
                });
                (0..self.cols)
                    .map(|c| {
                        let e = &self[(r, c)];
                        e.numer() * (&lcm / e.denom())
                    })
                    .collect()
            })
            .collect()
    }

    /// Exact rank by fraction-free elimination.
    pub fn rank(&self) -> usize {
        if self.rows == 0 || self.cols == 0 {
            return 0;
        }
        integer_rank(self.cleared_rows())
    }

    /// Exact determinant by fraction-free elimination over rationals.
    pub fn determinant(&self) -> Result<Rational, MatrixError> {
        if self.rows != self.cols {
            return Err(MatrixError::DimensionMismatch(format!(
                "determinant of {}x{}",
                self.rows, self.cols
            )));
        }
        let n = self.rows;
        if n == 0 {
            return Ok(Rational::one());
        }
        // clear row denominators and track the correction factor
        let mut scale = Rational::one();
        let mut m = Vec::with_capacity(n);
        for r in 0..n {
            let lcm = (0..n).fold(BigInt::one(), |acc, c| acc.lcm(self[(r, c)].denom()));
            scale *= Rational::from_integer(lcm.clone());
            m.push(
                (0..n)
                    .map(|c| {
                        let e = &self[(r, c)];
                        e.numer() * (&lcm / e.denom())
                    })
                    .collect::<Vec<_>>(),
            );
        }
        let det = crate::rational::integer_determinant(m);
        Ok(Rational::from_integer(det) / scale)
    }

    /// Solves `self * x = rhs` for square `self`, one column per rhs column.
    ///
    /// Gaussian elimination with exact rational pivots; errors on singular
    /// systems.
    pub fn solve(&self, rhs: &RMatrix) -> Result<RMatrix, MatrixError> {
        if self.rows != self.cols {
            return Err(MatrixError::DimensionMismatch(format!(
                "solve with {}x{} coefficient matrix",
                self.rows, self.cols
            )));
        }
        if rhs.rows != self.rows {
            return Err(MatrixError::DimensionMismatch(format!(
                "solve: rhs has {} rows, expected {}",
                rhs.rows, self.rows
            )));
        }
        let n = self.rows;
        let k = rhs.cols;
        // fraction-free forward elimination on the integer-cleared augmented matrix
        let mut aug: Vec<Vec<BigInt>> = (0..n)
            .map(|r| {
                let lcm = (0..n)
                    .fold(BigInt::one(), |acc, c| acc.lcm(self[(r, c)].denom()));
                let lcm = (0..k).fold(lcm, |acc, c| acc.lcm(rhs[(r, c)].denom()));
                let mut row: Vec<BigInt> = (0..n)
                    .map(|c| self[(r, c)].numer() * (&lcm / self[(r, c)].denom()))
                    .collect();
                row.extend((0..k).map(|c| rhs[(r, c)].numer() * (&lcm / rhs[(r, c)].denom())));
                row
            })
            .collect();
        let width = n + k;
        let mut prev = BigInt::one();
        for p in 0..n {
            if aug[p][p].is_zero() {
                let Some(pr) = (p + 1..n).find(|&r| !aug[r][p].is_zero()) else {
                    return Err(MatrixError::Singular);
                };
                aug.swap(p, pr);
            }
            for r in p + 1..n {
                for c in p + 1..width {
                    let num = &aug[p][p] * &aug[r][c] - &aug[r][p] * &aug[p][c];
                    aug[r][c] = num / &prev;
                }
                aug[r][p] = BigInt::zero();
            }
            prev = aug[p][p].clone();
        }
        // back substitution in rationals
        let mut x = RMatrix::zeros(n, k);
        for col in 0..k {
            for r in (0..n).rev() {
                let mut acc = Rational::from_integer(aug[r][n + col].clone());
                for c in r + 1..n {
                    acc -= Rational::from_integer(aug[r][c].clone()) * &x[(c, col)];
                }
                x[(r, col)] = acc / Rational::from_integer(aug[r][r].clone());
            }
        }
        Ok(x)
    }

    pub fn inverse(&self) -> Result<RMatrix, MatrixError> {
        self.solve(&RMatrix::identity(self.rows))
    }

    /// Positive definiteness of a symmetric matrix via leading principal
    /// minors, all computed exactly.
    pub fn is_positive_definite(&self) -> bool {
        if !self.is_symmetric() {
            return false;
        }
        for k in 1..=self.rows {
            let minor = Self::from_fn(k, k, |r, c| self[(r, c)].clone());
            match minor.determinant() {
                Ok(d) if d.is_positive() => {}
                _ => return false,
            }
        }
        true
    }

    /// Serializes into the JSON array-of-arrays format: integers where exact,
    /// `"p/q"` strings otherwise.
    pub fn to_json(&self) -> Value {
        Value::Array(
            (0..self.rows)
                .map(|r| {
                    Value::Array((0..self.cols).map(|c| entry_to_json(&self[(r, c)])).collect())
                })
                .collect(),
        )
    }

    /// Parses the JSON array-of-arrays format accepted by the CLI.
    pub fn from_json(v: &Value) -> Result<Self, MatrixError> {
        let rows = v.as_array().ok_or(MatrixError::RaggedRows)?;
        let mut out = Vec::with_capacity(rows.len());
        for (r, row) in rows.iter().enumerate() {
            let row = row.as_array().ok_or(MatrixError::RaggedRows)?;
            let mut parsed = Vec::with_capacity(row.len());
            for (c, e) in row.iter().enumerate() {
                parsed.push(entry_from_json(e).ok_or(MatrixError::InvalidEntry { row: r, col: c })?);
            }
            out.push(parsed);
        }
        Self::from_rows(out)
    }
}

pub fn entry_to_json(r: &Rational) -> Value {
    if r.denom().is_one() {
        if let Ok(i) = i64::try_from(r.numer().clone()) {
            return Value::from(i);
        }
    }
    Value::String(format_rational(r))
}

pub fn entry_from_json(v: &Value) -> Option<Rational> {
    match v {
        Value::Number(n) => {
            let i = n.as_i64()?;
            Some(Rational::from_integer(BigInt::from(i)))
        }
        Value::String(s) => parse_rational(s),
        _ => None,
    }
}

impl std::ops::Index<(usize, usize)> for RMatrix {
    type Output = Rational;
    fn index(&self, (r, c): (usize, usize)) -> &Rational {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for RMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Rational {
        &mut self.data[r * self.cols + c]
    }
}

impl std::fmt::Debug for RMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "RMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|c| format_rational(&self[(r, c)])).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        write!(f, "]")
    }
}
