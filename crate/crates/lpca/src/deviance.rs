//! Deviance and probability kernels shared by all solvers.
//!
//! Deviance is always measured against the exact saturated model, whose
//! Bernoulli log-likelihood is 0. Fitting with the m-approximated saturated
//! parameters therefore leaves a floor of 2nd*log(1 + e^-m) even at full
//! rank; this is reported as-is rather than rescaled away.

use nalgebra::{DMatrix, DVector};

use crate::data::center_columns;
use crate::{r, BinaryMatrix, Family, LpcaError, Real, Result, SaturatedParams};

/// Numerically stable log(1 + exp(t)).
pub fn log1p_exp<T: Real>(t: T) -> T {
    if t > T::zero() {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// The inverse logit, computed without overflow for large |t|.
pub fn sigmoid<T: Real>(t: T) -> T {
    if t >= T::zero() {
        T::one() / (T::one() + (-t).exp())
    } else {
        let e = t.exp();
        e / (T::one() + e)
    }
}

fn check_shapes<T: Real>(x: &DMatrix<T>, theta: &DMatrix<T>) -> Result<()> {
    if x.shape() != theta.shape() {
        return Err(LpcaError::ShapeMismatch {
            expected: format!("{}x{}", x.nrows(), x.ncols()),
            got: format!("{}x{}", theta.nrows(), theta.ncols()),
        });
    }
    Ok(())
}

/// Bernoulli deviance of natural parameters theta against binary data,
/// sum_ij [-2 x theta + 2 log(1 + exp(theta))].
pub fn bernoulli_deviance<T: Real>(x: &BinaryMatrix, theta: &DMatrix<T>) -> Result<T> {
    bernoulli_deviance_real(&x.to_real(), theta)
}

/// Same as [`bernoulli_deviance`] but over a pre-converted 0/1 real matrix.
pub fn bernoulli_deviance_real<T: Real>(x: &DMatrix<T>, theta: &DMatrix<T>) -> Result<T> {
    check_shapes(x, theta)?;
    let two = r::<T>(2.0);
    let mut dev = T::zero();
    for (xv, tv) in x.iter().zip(theta.iter()) {
        dev += two * (log1p_exp(*tv) - *xv * *tv);
    }
    Ok(dev)
}

/// Deviance of theta against data x under the given exponential family.
/// The Gaussian case is the squared error; Poisson data must be
/// nonnegative (x log x is taken as 0 at x = 0).
pub fn family_deviance<T: Real>(
    x: &DMatrix<T>,
    theta: &DMatrix<T>,
    family: Family,
) -> Result<T> {
    check_shapes(x, theta)?;
    match family {
        Family::Bernoulli => bernoulli_deviance_real(x, theta),
        Family::Gaussian => {
            let mut dev = T::zero();
            for (xv, tv) in x.iter().zip(theta.iter()) {
                let d = *xv - *tv;
                dev += d * d;
            }
            Ok(dev)
        }
        Family::Poisson => {
            let two = r::<T>(2.0);
            let mut dev = T::zero();
            for (xv, tv) in x.iter().zip(theta.iter()) {
                if *xv < T::zero() {
                    return Err(LpcaError::InvalidData(
                        "Poisson datum must be nonnegative".into(),
                    ));
                }
                let xlogx = if *xv == T::zero() {
                    T::zero()
                } else {
                    *xv * xv.ln()
                };
                dev += two * (xlogx - *xv * *tv - *xv + tv.exp());
            }
            Ok(dev)
        }
    }
}

/// Entrywise sigmoid of the natural parameters.
pub fn fitted_probabilities<T: Real>(theta: &DMatrix<T>) -> DMatrix<T> {
    theta.map(sigmoid)
}

/// Frobenius norm of U^T U - I.
pub fn orthonormality_residual<T: Real>(u: &DMatrix<T>) -> T {
    let k = u.ncols();
    let gram = u.transpose() * u;
    (gram - DMatrix::<T>::identity(k, k)).norm()
}

/// Theta = 1 mu^T + (theta-tilde - 1 mu^T) U U^T, requiring U orthonormal.
pub fn assemble_theta<T: Real>(
    sat: &SaturatedParams<T>,
    mu: &DVector<T>,
    u: &DMatrix<T>,
) -> Result<DMatrix<T>> {
    if mu.len() != sat.ncols() || u.nrows() != sat.ncols() || u.ncols() == 0 {
        return Err(LpcaError::ShapeMismatch {
            expected: format!("mu len {} and U with {} rows", sat.ncols(), sat.ncols()),
            got: format!("mu len {}, U {}x{}", mu.len(), u.nrows(), u.ncols()),
        });
    }
    let res = orthonormality_residual(u);
    if res > r(1e-8) {
        return Err(LpcaError::NotOrthonormal {
            residual: crate::f(res),
        });
    }
    Ok(assemble_theta_unchecked(sat.matrix(), mu, u))
}

/// Same model form without the orthonormality check; used internally where
/// U comes from an eigendecomposition and is orthonormal by construction.
pub(crate) fn assemble_theta_unchecked<T: Real>(
    sat: &DMatrix<T>,
    mu: &DVector<T>,
    u: &DMatrix<T>,
) -> DMatrix<T> {
    let centered = center_columns(sat, mu);
    let mut theta = &centered * (u * u.transpose());
    for j in 0..theta.ncols() {
        theta.column_mut(j).add_scalar_mut(mu[j]);
    }
    theta
}

/// Natural parameters 1 mu^T + (theta-tilde - 1 mu^T) H for a Fantope matrix.
pub(crate) fn assemble_theta_h<T: Real>(
    sat: &DMatrix<T>,
    mu: &DVector<T>,
    h: &DMatrix<T>,
) -> DMatrix<T> {
    let centered = center_columns(sat, mu);
    let mut theta = centered * h;
    for j in 0..theta.ncols() {
        theta.column_mut(j).add_scalar_mut(mu[j]);
    }
    theta
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, dvector};

    fn bm(rows: &[&[u8]]) -> BinaryMatrix {
        let n = rows.len();
        let d = rows[0].len();
        BinaryMatrix::new(DMatrix::from_fn(n, d, |i, j| rows[i][j])).unwrap()
    }

    #[test]
    fn deviance_at_theta_zero_is_two_log_two() {
        let x = bm(&[&[1]]);
        let dev = bernoulli_deviance(&x, &dmatrix![0.0]).unwrap();
        assert_relative_eq!(dev, 2.0 * 2.0f64.ln(), max_relative = 1e-14);
    }

    #[test]
    fn deviance_near_perfect_fit_vanishes() {
        let x = bm(&[&[1]]);
        let dev = bernoulli_deviance(&x, &dmatrix![30.0]).unwrap();
        assert!(dev >= 0.0 && dev < 1e-12, "dev = {dev}");
    }

    #[test]
    fn deviance_hand_computed_two_cell() {
        // X = [[0],[1]], theta = [[-1],[1]]: 4 log(1 + e^-1)
        let x = bm(&[&[0], &[1]]);
        let dev = bernoulli_deviance(&x, &dmatrix![-1.0; 1.0]).unwrap();
        assert_relative_eq!(dev, 4.0 * (1.0 + (-1.0f64).exp()).ln(), max_relative = 1e-14);
    }

    #[test]
    fn deviance_stable_for_huge_theta() {
        let x = bm(&[&[0, 1]]);
        let dev: f64 = bernoulli_deviance(&x, &dmatrix![1e4, -1e4]).unwrap();
        assert!(dev.is_finite());
        assert_relative_eq!(dev, 4e4, max_relative = 1e-12);
    }

    #[test]
    fn deviance_shape_mismatch() {
        let x = bm(&[&[0, 1]]);
        assert!(bernoulli_deviance(&x, &dmatrix![0.0]).is_err());
    }

    #[test]
    fn gaussian_saturated_and_unit_errors() {
        let x = dmatrix![1.0, 0.0];
        assert_eq!(family_deviance(&x, &x, Family::Gaussian).unwrap(), 0.0);
        let theta = dmatrix![0.0, 0.0];
        assert_eq!(family_deviance(&x, &theta, Family::Gaussian).unwrap(), 1.0);
    }

    #[test]
    fn poisson_zero_datum() {
        let x = dmatrix![0.0];
        let dev = family_deviance(&x, &dmatrix![0.0], Family::Poisson).unwrap();
        assert_relative_eq!(dev, 2.0, max_relative = 1e-14);
        assert!(family_deviance(&dmatrix![-1.0], &dmatrix![0.0], Family::Poisson).is_err());
    }

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_relative_eq!(sigmoid(3.0f64.ln()), 0.75, max_relative = 1e-14);
        for t in [-20.0, -1.3, 0.7, 15.0] {
            assert_relative_eq!(sigmoid(t) + sigmoid(-t), 1.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn assemble_theta_identity_projection_recovers_satpars() {
        let x = bm(&[&[0, 1], &[1, 1], &[1, 0]]);
        let sat = SaturatedParams::bernoulli(&x, 3.0).unwrap();
        let theta = assemble_theta(&sat, &dvector![0.0, 0.0], &DMatrix::identity(2, 2)).unwrap();
        assert!((theta - sat.matrix()).norm() <= 1e-12);
    }

    #[test]
    fn assemble_theta_basis_vector_projection() {
        let x = bm(&[&[1, 0]]);
        let sat = SaturatedParams::bernoulli(&x, 2.0).unwrap();
        let theta = assemble_theta(&sat, &dvector![0.0, 0.0], &dmatrix![1.0; 0.0]).unwrap();
        assert_eq!(theta, dmatrix![2.0, 0.0]);
    }

    #[test]
    fn assemble_theta_rejects_non_orthonormal() {
        let x = bm(&[&[1, 0]]);
        let sat = SaturatedParams::bernoulli(&x, 2.0).unwrap();
        let err = assemble_theta(&sat, &dvector![0.0, 0.0], &dmatrix![1.0; 1.0]).unwrap_err();
        assert!(matches!(err, LpcaError::NotOrthonormal { .. }));
        // zero column is likewise rejected
        let err = assemble_theta(&sat, &dvector![0.0, 0.0], &dmatrix![0.0; 0.0]).unwrap_err();
        assert!(matches!(err, LpcaError::NotOrthonormal { .. }));
    }

    #[test]
    fn deviance_at_satpars_equals_floor() {
        // D at theta-tilde = 2nd log(1 + e^-m)
        let x = bm(&[&[0, 1, 1], &[1, 0, 0]]);
        let m = 4.0;
        let sat = SaturatedParams::bernoulli(&x, m).unwrap();
        let dev = bernoulli_deviance(&x, sat.matrix()).unwrap();
        let floor = 2.0 * 6.0 * (1.0 + (-m as f64).exp()).ln();
        assert_relative_eq!(dev, floor, max_relative = 1e-10);
    }

    #[test]
    fn sigma_shrinkage_lemma() {
        // 4|sigma(a) - sigma(b)| <= |a - b| over many random pairs.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100_000 {
            let a: f64 = rng.gen_range(-50.0..50.0);
            let b: f64 = rng.gen_range(-50.0..50.0);
            assert!(4.0 * (sigmoid(a) - sigmoid(b)).abs() <= (a - b).abs() + 1e-15);
        }
    }
}
