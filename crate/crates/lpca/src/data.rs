//! Binary data matrices, exponential-family definitions, and the
//! saturated-model natural parameters they induce.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{r, LpcaError, Real, Result};

/// An n x d matrix of {0, 1} observations. Entries are validated on
/// construction; there are no missing values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMatrix {
    entries: DMatrix<u8>,
}

impl BinaryMatrix {
    pub fn new(entries: DMatrix<u8>) -> Result<Self> {
        if entries.nrows() < 1 || entries.ncols() < 1 {
            return Err(LpcaError::InvalidData(format!(
                "binary matrix must be at least 1x1, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        for j in 0..entries.ncols() {
            for i in 0..entries.nrows() {
                let v = entries[(i, j)];
                if v > 1 {
                    return Err(LpcaError::NotBinary {
                        row: i,
                        col: j,
                        value: f64::from(v),
                    });
                }
            }
        }
        Ok(Self { entries })
    }

    /// Builds from a real matrix, rejecting any entry that is not exactly 0 or 1.
    pub fn from_real<T: Real>(m: &DMatrix<T>) -> Result<Self> {
        let mut entries = DMatrix::<u8>::zeros(m.nrows(), m.ncols());
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let v = m[(i, j)];
                if v == T::zero() {
                    entries[(i, j)] = 0;
                } else if v == T::one() {
                    entries[(i, j)] = 1;
                } else {
                    return Err(LpcaError::NotBinary {
                        row: i,
                        col: j,
                        value: crate::f(v),
                    });
                }
            }
        }
        Self::new(entries)
    }

    pub fn nrows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.entries[(i, j)]
    }

    pub fn entries(&self) -> &DMatrix<u8> {
        &self.entries
    }

    /// The data as a real matrix of 0.0 / 1.0 entries.
    pub fn to_real<T: Real>(&self) -> DMatrix<T> {
        self.entries
            .map(|v| if v == 1 { T::one() } else { T::zero() })
    }

    /// Q = 2X - 1, with entries in {-1, +1}.
    pub fn to_q<T: Real>(&self) -> DMatrix<T> {
        self.entries
            .map(|v| if v == 1 { T::one() } else { -T::one() })
    }

    /// Column means of the 0/1 entries.
    pub fn column_means<T: Real>(&self) -> DVector<T> {
        let n = r::<T>(self.nrows() as f64);
        DVector::from_iterator(
            self.ncols(),
            (0..self.ncols()).map(|j| {
                let ones: u32 = (0..self.nrows()).map(|i| u32::from(self.entries[(i, j)])).sum();
                r::<T>(f64::from(ones)) / n
            }),
        )
    }

    /// Selects the given rows into a new matrix.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(LpcaError::InvalidData("row selection is empty".into()));
        }
        let mut out = DMatrix::<u8>::zeros(rows.len(), self.ncols());
        for (oi, &i) in rows.iter().enumerate() {
            for j in 0..self.ncols() {
                out[(oi, j)] = self.entries[(i, j)];
            }
        }
        Self::new(out)
    }
}

/// One-parameter exponential family used for the generalized formulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    Bernoulli,
    Gaussian,
    Poisson,
}

impl Family {
    /// Cumulant function b(theta).
    pub fn b<T: Real>(&self, theta: T) -> T {
        match self {
            Family::Bernoulli => crate::deviance::log1p_exp(theta),
            Family::Gaussian => theta * theta / r(2.0),
            Family::Poisson => theta.exp(),
        }
    }

    /// Mean function b'(theta).
    pub fn mean<T: Real>(&self, theta: T) -> T {
        match self {
            Family::Bernoulli => crate::deviance::sigmoid(theta),
            Family::Gaussian => theta,
            Family::Poisson => theta.exp(),
        }
    }

    /// Saturated natural parameter for a single datum. The Bernoulli case
    /// uses the m-approximation m(2x - 1); the Poisson parameter at x = 0
    /// is clamped to -m since log 0 is not finite.
    pub fn satpar<T: Real>(&self, x: T, m: T) -> Result<T> {
        match self {
            Family::Bernoulli => {
                if x == T::zero() {
                    Ok(-m)
                } else if x == T::one() {
                    Ok(m)
                } else {
                    Err(LpcaError::InvalidData(format!(
                        "Bernoulli datum must be 0 or 1, got {}",
                        crate::f(x)
                    )))
                }
            }
            Family::Gaussian => Ok(x),
            Family::Poisson => {
                if x < T::zero() {
                    Err(LpcaError::InvalidData(
                        "Poisson datum must be nonnegative".into(),
                    ))
                } else if x < T::one() {
                    Ok(-m)
                } else {
                    Ok(x.ln())
                }
            }
        }
    }

    /// Upper bound on the variance function, used as the MM working weight.
    /// `None` for families with unbounded variance (Poisson).
    pub fn variance_bound<T: Real>(&self) -> Option<T> {
        match self {
            Family::Bernoulli => Some(r(0.25)),
            Family::Gaussian => Some(T::one()),
            Family::Poisson => None,
        }
    }
}

/// Scale m together with the implied matrix of approximate saturated
/// natural parameters (mQ in the Bernoulli case).
#[derive(Debug, Clone, PartialEq)]
pub struct SaturatedParams<T: Real> {
    m: T,
    matrix: DMatrix<T>,
}

impl<T: Real> SaturatedParams<T> {
    /// Bernoulli saturated parameters mQ for a binary matrix.
    pub fn bernoulli(x: &BinaryMatrix, m: T) -> Result<Self> {
        if m <= T::zero() {
            return Err(LpcaError::InvalidConfig(format!(
                "scale m must be positive, got {}",
                crate::f(m)
            )));
        }
        Ok(Self {
            m,
            matrix: x.to_q::<T>() * m,
        })
    }

    /// Saturated parameters of a real data matrix under the given family.
    pub fn from_family(x: &DMatrix<T>, family: Family, m: T) -> Result<Self> {
        if m <= T::zero() {
            return Err(LpcaError::InvalidConfig(format!(
                "scale m must be positive, got {}",
                crate::f(m)
            )));
        }
        let mut matrix = DMatrix::zeros(x.nrows(), x.ncols());
        for j in 0..x.ncols() {
            for i in 0..x.nrows() {
                matrix[(i, j)] = family.satpar(x[(i, j)], m)?;
            }
        }
        Ok(Self { m, matrix })
    }

    pub fn m(&self) -> T {
        self.m
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.matrix
    }

    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    /// The column-centered matrix (theta-tilde - 1 mu^T).
    pub fn centered(&self, mu: &DVector<T>) -> DMatrix<T> {
        center_columns(&self.matrix, mu)
    }
}

/// Subtracts mu_j from every entry of column j.
pub(crate) fn center_columns<T: Real>(m: &DMatrix<T>, mu: &DVector<T>) -> DMatrix<T> {
    let mut out = m.clone();
    for j in 0..m.ncols() {
        let mut col = out.column_mut(j);
        col.add_scalar_mut(-mu[j]);
    }
    out
}
