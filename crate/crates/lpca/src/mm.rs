//! Majorization-minimization solver for logistic PCA over orthonormal
//! loadings U and main effects mu.
//!
//! Each iteration majorizes the deviance by a quadratic with curvature
//! bound 1/4 (the Bernoulli variance bound), forms working variables
//! z = theta + 4(x - sigma(theta)), solves the resulting least-squares
//! problem for mu, and takes U as the top-k eigenvectors of
//! S_c^T Z_c + Z_c^T S_c - S_c^T S_c. The deviance trace is non-increasing.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{FitConfig, Init};
use crate::data::center_columns;
use crate::deviance::{assemble_theta_unchecked, family_deviance, fitted_probabilities};
use crate::linalg::{random_orthonormal, top_k_eigvecs, top_right_singular};
use crate::{f, r, BinaryMatrix, Family, LpcaError, Real, Result, SaturatedParams};

/// Fitted logistic PCA model: orthonormal d x k loadings, main effects,
/// scale m, and the family it was fit under.
#[derive(Debug, Clone, PartialEq)]
pub struct LpcaModel<T: Real> {
    pub u: DMatrix<T>,
    pub mu: DVector<T>,
    pub m: T,
    pub k: usize,
    pub family: Family,
}

/// Per-fit diagnostics. `deviance_trace` holds average deviance D/(nd)
/// per iteration, starting at the initial value, so its length is
/// `iterations + 1`. The Fantope solver additionally fills `best_trace`
/// with the best-so-far values its stopping rule runs on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport<T> {
    pub deviance_trace: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
    pub elapsed_secs: f64,
    pub best_trace: Option<Vec<T>>,
}

impl<T: Real> LpcaModel<T> {
    fn check_columns(&self, x_new: &BinaryMatrix) -> Result<()> {
        if x_new.ncols() != self.u.nrows() {
            return Err(LpcaError::ShapeMismatch {
                expected: format!("{} columns", self.u.nrows()),
                got: format!("{} columns", x_new.ncols()),
            });
        }
        Ok(())
    }

    fn saturated_for(&self, x_new: &BinaryMatrix) -> Result<SaturatedParams<T>> {
        match self.family {
            Family::Bernoulli => SaturatedParams::bernoulli(x_new, self.m),
            _ => SaturatedParams::from_family(&x_new.to_real(), self.family, self.m),
        }
    }

    /// Principal component scores (theta-tilde* - 1 mu^T) U for new data;
    /// pure matrix arithmetic.
    pub fn scores(&self, x_new: &BinaryMatrix) -> Result<DMatrix<T>> {
        self.check_columns(x_new)?;
        let sat = self.saturated_for(x_new)?;
        Ok(sat.centered(&self.mu) * &self.u)
    }

    /// Predicted natural parameters 1 mu^T + (theta-tilde* - 1 mu^T) U U^T.
    pub fn predict_theta(&self, x_new: &BinaryMatrix) -> Result<DMatrix<T>> {
        self.check_columns(x_new)?;
        let sat = self.saturated_for(x_new)?;
        Ok(assemble_theta_unchecked(sat.matrix(), &self.mu, &self.u))
    }

    /// Fitted probabilities on new data (Bernoulli family).
    pub fn predict_probabilities(&self, x_new: &BinaryMatrix) -> Result<DMatrix<T>> {
        Ok(fitted_probabilities(&self.predict_theta(x_new)?))
    }
}

/// MM working variables z = theta + (x - mean(theta)) / w, with w the
/// family's variance bound (1/4 for Bernoulli, giving z = theta + 4(x - sigma)).
pub fn working_variables<T: Real>(
    x: &DMatrix<T>,
    theta: &DMatrix<T>,
    family: Family,
) -> Result<DMatrix<T>> {
    if x.shape() != theta.shape() {
        return Err(LpcaError::ShapeMismatch {
            expected: format!("{}x{}", x.nrows(), x.ncols()),
            got: format!("{}x{}", theta.nrows(), theta.ncols()),
        });
    }
    let w = family.variance_bound::<T>().ok_or_else(|| {
        LpcaError::InvalidConfig(format!(
            "family {family:?} has unbounded variance; no MM working weight"
        ))
    })?;
    let inv_w = T::one() / w;
    let mut z = theta.clone();
    for ((zv, xv), tv) in z.iter_mut().zip(x.iter()).zip(theta.iter()) {
        *zv = *tv + inv_w * (*xv - family.mean(*tv));
    }
    Ok(z)
}

/// mu = (1/n) (Z - S U U^T)^T 1_n, the minimizer of the majorizing
/// function over the main effects with U fixed.
pub fn mm_update_mu<T: Real>(
    z: &DMatrix<T>,
    sat: &DMatrix<T>,
    u: &DMatrix<T>,
) -> DVector<T> {
    let n = r::<T>(z.nrows() as f64);
    let proj = sat * (u * u.transpose());
    let diff = z - proj;
    DVector::from_iterator(
        z.ncols(),
        (0..z.ncols()).map(|j| diff.column(j).sum() / n),
    )
}

/// Top-k eigenvectors of S_c^T Z_c + Z_c^T S_c - S_c^T S_c, the minimizer
/// of the majorizing function over orthonormal U with mu fixed.
pub fn mm_update_u<T: Real>(
    sat_c: &DMatrix<T>,
    z_c: &DMatrix<T>,
    k: usize,
) -> Result<DMatrix<T>> {
    let cross = sat_c.transpose() * z_c;
    let m = &cross + cross.transpose() - sat_c.transpose() * sat_c;
    top_k_eigvecs(&m, k)
}

/// Initial main effects: clamp(logit x-bar_j, +-m) for Bernoulli, column
/// means for Gaussian. The clamp handles all-zero / all-one columns.
pub fn initial_mu<T: Real>(x: &DMatrix<T>, family: Family, m: T) -> DVector<T> {
    let n = r::<T>(x.nrows() as f64);
    DVector::from_iterator(
        x.ncols(),
        (0..x.ncols()).map(|j| {
            let mean = x.column(j).sum() / n;
            match family {
                Family::Gaussian => mean,
                _ => {
                    if mean <= T::zero() {
                        -m
                    } else if mean >= T::one() {
                        m
                    } else {
                        (mean / (T::one() - mean)).ln().min(m).max(-m)
                    }
                }
            }
        }),
    )
}

fn initial_u<T: Real>(
    sat: &DMatrix<T>,
    k: usize,
    config: &FitConfig<T>,
) -> Result<DMatrix<T>> {
    match &config.init {
        Init::Svd => Ok(top_right_singular(sat, k)?.1),
        Init::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            random_orthonormal(sat.ncols(), k, &mut rng)
        }
        Init::Provided(u) => {
            if u.ncols() != k {
                return Err(LpcaError::InvalidConfig(format!(
                    "provided init has {} columns, expected {k}",
                    u.ncols()
                )));
            }
            let res = crate::deviance::orthonormality_residual(u);
            if res > r(1e-8) {
                return Err(LpcaError::NotOrthonormal { residual: f(res) });
            }
            Ok(u.clone())
        }
    }
}

/// Fits logistic PCA by majorization-minimization (Bernoulli family).
pub fn fit_lpca<T: Real>(
    x: &BinaryMatrix,
    config: &FitConfig<T>,
) -> Result<(LpcaModel<T>, FitReport<T>)> {
    fit_generalized_pca(&x.to_real(), Family::Bernoulli, config)
}

/// Generalized PCA over the natural parameters of the saturated model,
/// for any exponential family with a bounded variance function.
pub fn fit_generalized_pca<T: Real>(
    x: &DMatrix<T>,
    family: Family,
    config: &FitConfig<T>,
) -> Result<(LpcaModel<T>, FitReport<T>)> {
    let start = Instant::now();
    let (n, d) = x.shape();
    config.validate(d)?;
    let k = config.integer_k()?;
    let m = config.m;
    let nd = r::<T>((n * d) as f64);

    let sat = SaturatedParams::from_family(x, family, m)?;
    let sat_m = sat.matrix();

    let mut mu = if config.include_mu {
        initial_mu(x, family, m)
    } else {
        DVector::zeros(d)
    };
    let mut u = initial_u(sat_m, k, config)?;

    let mut theta = assemble_theta_unchecked(sat_m, &mu, &u);
    let mut avg_dev = family_deviance(x, &theta, family)? / nd;
    let mut trace = vec![avg_dev];
    let mut converged = false;
    let mut iterations = 0;

    for _ in 1..=config.max_iter {
        let z = working_variables(x, &theta, family)?;
        if config.include_mu {
            mu = mm_update_mu(&z, sat_m, &u);
        }
        let sat_c = center_columns(sat_m, &mu);
        let z_c = center_columns(&z, &mu);
        u = mm_update_u(&sat_c, &z_c, k)?;

        theta = assemble_theta_unchecked(sat_m, &mu, &u);
        let next = family_deviance(x, &theta, family)? / nd;
        iterations += 1;
        let delta = (avg_dev - next).abs();
        avg_dev = next;
        trace.push(next);
        if delta < config.tol {
            converged = true;
            break;
        }
    }

    let model = LpcaModel {
        u,
        mu,
        m,
        k,
        family,
    };
    let report = FitReport {
        deviance_trace: trace,
        iterations,
        converged,
        elapsed_secs: start.elapsed().as_secs_f64(),
        best_trace: None,
    };
    Ok((model, report))
}
