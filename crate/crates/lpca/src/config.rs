//! Solver configuration.

use nalgebra::DMatrix;

use crate::{f, r, LpcaError, Real, Result};

/// Loading initialization strategy.
#[derive(Debug, Clone, PartialEq)]
pub enum Init<T: Real> {
    /// Top-k right singular vectors of Q (or of the centered saturated
    /// parameters for the Fantope solver).
    Svd,
    /// Uniform random orthonormal frame drawn from the seeded PRNG.
    Random,
    /// Caller-supplied d x k orthonormal matrix.
    Provided(DMatrix<T>),
}

/// Shared configuration for the iterative solvers. `k` is a positive real
/// so the Fantope solver can use a non-integer rank; the integer solvers
/// reject fractional values.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig<T: Real> {
    pub k: T,
    pub m: T,
    pub max_iter: usize,
    pub tol: T,
    pub seed: u64,
    pub init: Init<T>,
    pub include_mu: bool,
    /// Optional backtracking line search for the Fantope solver; the
    /// default fixed step 1/L is the provable contract.
    pub line_search: bool,
}

impl<T: Real> FitConfig<T> {
    pub fn new(k: usize, m: T) -> Self {
        Self {
            k: r(k as f64),
            m,
            max_iter: 1000,
            tol: r(1e-5),
            seed: 0,
            init: Init::Svd,
            include_mu: true,
            line_search: false,
        }
    }

    pub fn with_fractional_k(k: T, m: T) -> Self {
        Self {
            k,
            ..Self::new(1, m)
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if self.m <= T::zero() {
            return Err(LpcaError::InvalidConfig(format!(
                "m must be positive, got {}",
                f(self.m)
            )));
        }
        if self.tol <= T::zero() {
            return Err(LpcaError::InvalidConfig("tol must be positive".into()));
        }
        if self.max_iter < 1 {
            return Err(LpcaError::InvalidConfig("max_iter must be at least 1".into()));
        }
        if self.k <= T::zero() || self.k > r(d as f64) {
            return Err(LpcaError::InvalidConfig(format!(
                "k must satisfy 0 < k <= d = {d}, got {}",
                f(self.k)
            )));
        }
        if let Init::Provided(u) = &self.init {
            if u.nrows() != d {
                return Err(LpcaError::InvalidConfig(format!(
                    "provided init has {} rows, expected {d}",
                    u.nrows()
                )));
            }
        }
        Ok(())
    }

    /// The target dimension as an integer, rejecting fractional k.
    pub fn integer_k(&self) -> Result<usize> {
        let k = f(self.k);
        if k.fract() != 0.0 || k < 1.0 {
            return Err(LpcaError::InvalidConfig(format!(
                "this solver requires a positive integer k, got {k}"
            )));
        }
        Ok(k as usize)
    }
}
