//! Logistic SVD (matrix-factorization formulation) and standard PCA,
//! used as comparison baselines.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{FitConfig, Init};
use crate::data::center_columns;
use crate::deviance::{bernoulli_deviance_real, log1p_exp, sigmoid};
use crate::linalg::{random_orthonormal, top_k_eigvecs, top_right_singular};
use crate::mm::{initial_mu, working_variables, FitReport};
use crate::{r, BinaryMatrix, Family, LpcaError, Real, Result};

/// Logistic SVD model theta = 1 mu^T + A B^T. B has orthonormal columns;
/// A absorbs the singular values, so its columns are mutually orthogonal.
#[derive(Debug, Clone, PartialEq)]
pub struct LsvdModel<T: Real> {
    pub a: DMatrix<T>,
    pub b: DMatrix<T>,
    pub mu: DVector<T>,
    pub k: usize,
}

/// Standard PCA model: orthonormal loadings plus column means.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel<T: Real> {
    pub u: DMatrix<T>,
    pub mu: DVector<T>,
    pub k: usize,
}

/// Extra free parameters LSVD carries over LPCA at equal rank:
/// kn - k(k-1)/2 (the A matrix, orthogonality constraints discounted).
pub fn lsvd_extra_params(k: usize, n: usize) -> usize {
    k * n - k * (k - 1) / 2
}

impl<T: Real> PcaModel<T> {
    /// Scores (X - 1 mu^T) U for new data.
    pub fn scores(&self, x: &DMatrix<T>) -> Result<DMatrix<T>> {
        if x.ncols() != self.u.nrows() {
            return Err(LpcaError::ShapeMismatch {
                expected: format!("{} columns", self.u.nrows()),
                got: format!("{} columns", x.ncols()),
            });
        }
        Ok(center_columns(x, &self.mu) * &self.u)
    }

    /// Reconstruction 1 mu^T + (X - 1 mu^T) U U^T.
    pub fn reconstruct(&self, x: &DMatrix<T>) -> Result<DMatrix<T>> {
        let scores = self.scores(x)?;
        let mut rec = scores * self.u.transpose();
        for j in 0..rec.ncols() {
            rec.column_mut(j).add_scalar_mut(self.mu[j]);
        }
        Ok(rec)
    }
}

/// Standard PCA: column means plus the top-k eigenvectors of the sample
/// covariance.
pub fn fit_pca<T: Real>(x: &DMatrix<T>, k: usize) -> Result<PcaModel<T>> {
    let (n, d) = x.shape();
    if n < 2 {
        return Err(LpcaError::InvalidData("PCA requires at least 2 rows".into()));
    }
    if k < 1 || k > d.min(n) {
        return Err(LpcaError::InvalidConfig(format!(
            "k = {k} out of range for {n}x{d} data"
        )));
    }
    let nvec = r::<T>(n as f64);
    let mu = DVector::from_iterator(d, (0..d).map(|j| x.column(j).sum() / nvec));
    let xc = center_columns(x, &mu);
    let cov = xc.transpose() * &xc / r::<T>((n - 1) as f64);
    let u = top_k_eigvecs(&cov, k)?;
    Ok(PcaModel { u, mu, k })
}

/// PCA reconstruction of binary data clipped into [1e-10, 1 - 1e-10] so it
/// can be scored with the Bernoulli deviance.
pub fn pca_probability_estimate<T: Real>(
    model: &PcaModel<T>,
    x: &DMatrix<T>,
) -> Result<DMatrix<T>> {
    let rec = model.reconstruct(x)?;
    let lo = r::<T>(1e-10);
    let hi = T::one() - lo;
    Ok(rec.map(|v| v.max(lo).min(hi)))
}

impl<T: Real> LsvdModel<T> {
    /// In-sample natural parameters 1 mu^T + A B^T.
    pub fn theta(&self) -> DMatrix<T> {
        let mut theta = &self.a * self.b.transpose();
        for j in 0..theta.ncols() {
            theta.column_mut(j).add_scalar_mut(self.mu[j]);
        }
        theta
    }
}

/// Iterative-SVD solver for logistic SVD: alternates the MM working
/// matrix, the main-effect update, and a rank-k truncated SVD. Shares the
/// MM monotonicity guarantee and stopping rule with the LPCA solver.
pub fn fit_lsvd<T: Real>(
    x: &BinaryMatrix,
    config: &FitConfig<T>,
) -> Result<(LsvdModel<T>, FitReport<T>)> {
    let start = Instant::now();
    let (n, d) = (x.nrows(), x.ncols());
    config.validate(d)?;
    let k = config.integer_k()?;
    if k > n.min(d) {
        return Err(LpcaError::InvalidConfig(format!(
            "k = {k} exceeds min(n, d) = {}",
            n.min(d)
        )));
    }
    let nd = r::<T>((n * d) as f64);
    let x_real = x.to_real::<T>();
    let q = x.to_q::<T>();

    let mut mu = if config.include_mu {
        initial_mu(&x_real, Family::Bernoulli, config.m)
    } else {
        DVector::zeros(d)
    };
    // B0 mirrors the LPCA init (right singular vectors of Q) for fair
    // iteration-count comparisons; A0 holds the corresponding scores.
    let mut b = match &config.init {
        Init::Svd => top_right_singular(&q, k)?.1,
        Init::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            random_orthonormal(d, k, &mut rng)?
        }
        Init::Provided(m) => m.clone(),
    };
    let mut a = &q * &b;

    let theta_of = |a: &DMatrix<T>, b: &DMatrix<T>, mu: &DVector<T>| {
        let mut theta = a * b.transpose();
        for j in 0..theta.ncols() {
            theta.column_mut(j).add_scalar_mut(mu[j]);
        }
        theta
    };

    let mut theta = theta_of(&a, &b, &mu);
    let mut avg_dev = bernoulli_deviance_real(&x_real, &theta)? / nd;
    let mut trace = vec![avg_dev];
    let mut converged = false;
    let mut iterations = 0;

    for _ in 1..=config.max_iter {
        let z = working_variables(&x_real, &theta, Family::Bernoulli)?;
        if config.include_mu {
            let low_rank = &a * b.transpose();
            let diff = &z - low_rank;
            let nvec = r::<T>(n as f64);
            mu = DVector::from_iterator(d, (0..d).map(|j| diff.column(j).sum() / nvec));
        }
        let z_c = center_columns(&z, &mu);
        let svd = z_c.clone().svd(true, true);
        let u_s = svd
            .u
            .ok_or_else(|| LpcaError::Numerical("SVD failed to produce U".into()))?;
        let v_t = svd
            .v_t
            .ok_or_else(|| LpcaError::Numerical("SVD failed to produce V^T".into()))?;
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&i, &j| {
            svd.singular_values[j]
                .partial_cmp(&svd.singular_values[i])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut new_b = DMatrix::zeros(d, k);
        let mut new_a = DMatrix::zeros(n, k);
        for (out_j, &j) in order.iter().take(k).enumerate() {
            new_b.set_column(out_j, &v_t.row(j).transpose());
            new_a.set_column(out_j, &(u_s.column(j) * svd.singular_values[j]));
        }
        // sign convention on B; flip the matching A columns to preserve AB^T
        for j in 0..k {
            let col = new_b.column(j);
            let mut best = 0;
            let mut best_abs = T::zero();
            for i in 0..d {
                if col[i].abs() > best_abs {
                    best_abs = col[i].abs();
                    best = i;
                }
            }
            if new_b[(best, j)] < T::zero() {
                new_b.column_mut(j).neg_mut();
                new_a.column_mut(j).neg_mut();
            }
        }
        a = new_a;
        b = new_b;

        theta = theta_of(&a, &b, &mu);
        let next = bernoulli_deviance_real(&x_real, &theta)? / nd;
        iterations += 1;
        let delta = (avg_dev - next).abs();
        avg_dev = next;
        trace.push(next);
        if delta < config.tol {
            converged = true;
            break;
        }
    }

    let model = LsvdModel { a, b, mu, k };
    let report = FitReport {
        deviance_trace: trace,
        iterations,
        converged,
        elapsed_secs: start.elapsed().as_secs_f64(),
        best_trace: None,
    };
    Ok((model, report))
}

// Box clamp applied to new-data LSVD coefficients; perfect separation
// (common for binary d-vectors) would otherwise diverge.
const SCORE_CLAMP: f64 = 1e3;

/// Principal component scores for a new binary observation under LSVD:
/// a logistic regression of x* on B with offset mu, solved by Newton
/// iterations with step-halving and a box clamp at ||a||_inf <= 1e3.
pub fn lsvd_new_scores<T: Real>(model: &LsvdModel<T>, x_new: &[u8]) -> Result<DVector<T>> {
    let d = model.b.nrows();
    let k = model.k;
    if x_new.len() != d {
        return Err(LpcaError::ShapeMismatch {
            expected: format!("{d} entries"),
            got: format!("{} entries", x_new.len()),
        });
    }
    if x_new.iter().any(|&v| v > 1) {
        return Err(LpcaError::InvalidData("new observation must be binary".into()));
    }
    let x: DVector<T> = DVector::from_iterator(
        d,
        x_new.iter().map(|&v| if v == 1 { T::one() } else { T::zero() }),
    );
    let clamp = r::<T>(SCORE_CLAMP);

    let objective = |a: &DVector<T>| -> T {
        let eta = &model.b * a + &model.mu;
        let mut obj = T::zero();
        for j in 0..d {
            obj += log1p_exp(eta[j]) - x[j] * eta[j];
        }
        obj
    };

    let mut a = DVector::<T>::zeros(k);
    let mut obj = objective(&a);
    for _ in 0..100 {
        let eta = &model.b * &a + &model.mu;
        let p = eta.map(sigmoid);
        let grad = model.b.transpose() * (&p - &x);
        if grad.norm() < r(1e-8) {
            break;
        }
        // Hessian B^T W B with W = diag(p(1-p)); ridge floor keeps it
        // invertible under separation
        let mut hess = DMatrix::<T>::zeros(k, k);
        for j in 0..d {
            let w = p[j] * (T::one() - p[j]);
            let bj = model.b.row(j);
            for s in 0..k {
                for t in 0..k {
                    hess[(s, t)] += w * bj[s] * bj[t];
                }
            }
        }
        for s in 0..k {
            hess[(s, s)] += r(1e-12);
        }
        let step = hess
            .lu()
            .solve(&grad)
            .ok_or_else(|| LpcaError::Numerical("singular Hessian in new-data scoring".into()))?;
        let mut scale = T::one();
        let mut accepted = false;
        for _ in 0..30 {
            let cand = (&a - &step * scale).map(|v| v.max(-clamp).min(clamp));
            let cand_obj = objective(&cand);
            if !cand_obj.is_finite() {
                return Err(LpcaError::Numerical(
                    "non-finite objective in new-data scoring".into(),
                ));
            }
            if cand_obj <= obj {
                a = cand;
                obj = cand_obj;
                accepted = true;
                break;
            }
            scale = scale / r(2.0);
        }
        if !accepted {
            break;
        }
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(LpcaError::Numerical(
            "non-finite coefficients in new-data scoring".into(),
        ));
    }
    Ok(a)
}

/// Per-row new-data scores for a whole binary matrix.
pub fn lsvd_new_scores_matrix<T: Real>(
    model: &LsvdModel<T>,
    x_new: &BinaryMatrix,
) -> Result<DMatrix<T>> {
    let mut out = DMatrix::zeros(x_new.nrows(), model.k);
    let mut row = vec![0u8; x_new.ncols()];
    for i in 0..x_new.nrows() {
        for j in 0..x_new.ncols() {
            row[j] = x_new.get(i, j);
        }
        let a = lsvd_new_scores(model, &row)?;
        out.set_row(i, &a.transpose());
    }
    Ok(out)
}
