//! Dense linear algebra helpers: ordered symmetric eigendecompositions,
//! truncated right singular vectors, and random orthonormal frames.
//!
//! Loading columns follow a deterministic sign convention: the entry of
//! largest magnitude in each column is positive, ties broken by lowest
//! index. Eigenpairs are ordered by eigenvalue descending; repeated
//! eigenvalues keep the decomposition's ordering, which is arbitrary but
//! deterministic for fixed input.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{LpcaError, Real, Result};

/// Applies the sign convention to each column in place.
pub fn fix_column_signs<T: Real>(u: &mut DMatrix<T>) {
    for j in 0..u.ncols() {
        let mut best = 0;
        let mut best_abs = T::zero();
        for i in 0..u.nrows() {
            let a = u[(i, j)].abs();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if u[(best, j)] < T::zero() {
            for i in 0..u.nrows() {
                u[(i, j)] = -u[(i, j)];
            }
        }
    }
}

/// Cyclic Jacobi eigendecomposition. Slower than the QR-based solver but
/// backward stable on clustered spectra, where `SymmetricEigen` can pair
/// eigenvalues with inaccurate vectors.
fn jacobi_eigen<T: Real>(m: &DMatrix<T>) -> (DVector<T>, DMatrix<T>) {
    let d = m.nrows();
    let mut a = m.clone();
    let mut v = DMatrix::<T>::identity(d, d);
    let norm = m.norm();
    let stop = crate::r::<T>(1e-30) * (T::one() + norm * norm);
    for _ in 0..100 {
        let mut off = T::zero();
        for p in 0..d {
            for q in (p + 1)..d {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off <= stop {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (apq + apq);
                let t = {
                    let abs_t = T::one() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    if theta < T::zero() {
                        -abs_t
                    } else {
                        abs_t
                    }
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for i in 0..d {
                    let aip = a[(i, p)];
                    let aiq = a[(i, q)];
                    a[(i, p)] = c * aip - s * aiq;
                    a[(i, q)] = s * aip + c * aiq;
                }
                for j in 0..d {
                    let apj = a[(p, j)];
                    let aqj = a[(q, j)];
                    a[(p, j)] = c * apj - s * aqj;
                    a[(q, j)] = s * apj + c * aqj;
                }
                for i in 0..d {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = c * vip - s * viq;
                    v[(i, q)] = s * vip + c * viq;
                }
            }
        }
    }
    (a.diagonal(), v)
}

fn sort_desc<T: Real>(values: &DVector<T>, vectors: &DMatrix<T>) -> (DVector<T>, DMatrix<T>) {
    let d = values.len();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let sorted_values = DVector::from_iterator(d, order.iter().map(|&i| values[i]));
    let mut sorted_vectors = DMatrix::zeros(d, d);
    for (out_j, &j) in order.iter().enumerate() {
        sorted_vectors.set_column(out_j, &vectors.column(j));
    }
    (sorted_values, sorted_vectors)
}

/// Full symmetric eigendecomposition with eigenvalues sorted descending.
/// Eigenvector signs are left untouched; callers that expose loadings
/// apply [`fix_column_signs`]. Falls back to Jacobi rotations when the
/// QR-based decomposition reconstructs the input poorly.
pub fn sym_eigen_desc<T: Real>(m: &DMatrix<T>) -> Result<(DVector<T>, DMatrix<T>)> {
    if m.nrows() != m.ncols() {
        return Err(LpcaError::ShapeMismatch {
            expected: "square matrix".into(),
            got: format!("{}x{}", m.nrows(), m.ncols()),
        });
    }
    let sym = nalgebra::SymmetricEigen::new(m.clone());
    let (values, vectors) = sort_desc(&sym.eigenvalues, &sym.eigenvectors);
    if values.iter().any(|v| !v.is_finite()) {
        return Err(LpcaError::Numerical(
            "eigendecomposition produced non-finite eigenvalues".into(),
        ));
    }
    let recon = &vectors * DMatrix::from_diagonal(&values) * vectors.transpose();
    if (recon - m).norm() > crate::r::<T>(1e-9) * (T::one() + m.norm()) {
        let (jv, jw) = jacobi_eigen(m);
        return Ok(sort_desc(&jv, &jw));
    }
    Ok((values, vectors))
}

/// Top-k eigenvectors of a symmetric matrix, sign convention applied.
pub fn top_k_eigvecs<T: Real>(m: &DMatrix<T>, k: usize) -> Result<DMatrix<T>> {
    if k < 1 || k > m.nrows() {
        return Err(LpcaError::InvalidConfig(format!(
            "k = {k} out of range for {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    let (_, vectors) = sym_eigen_desc(m)?;
    let mut u = vectors.columns(0, k).into_owned();
    fix_column_signs(&mut u);
    Ok(u)
}

/// Top-k right singular vectors of a rectangular matrix, sign convention
/// applied, plus the corresponding singular values.
pub fn top_right_singular<T: Real>(
    a: &DMatrix<T>,
    k: usize,
) -> Result<(DVector<T>, DMatrix<T>)> {
    let d = a.ncols();
    if k < 1 || k > d.min(a.nrows()) {
        return Err(LpcaError::InvalidConfig(format!(
            "k = {k} out of range for {}x{} matrix",
            a.nrows(),
            d
        )));
    }
    let svd = a.clone().svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| LpcaError::Numerical("SVD failed to produce V^T".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .partial_cmp(&svd.singular_values[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = DVector::from_iterator(k, order.iter().take(k).map(|&i| svd.singular_values[i]));
    let mut v = DMatrix::zeros(d, k);
    for (out_j, &j) in order.iter().take(k).enumerate() {
        v.set_column(out_j, &v_t.row(j).transpose());
    }
    fix_column_signs(&mut v);
    Ok((values, v))
}

/// A d x k orthonormal frame drawn uniformly (Haar) via QR of a Gaussian
/// matrix, sign convention applied.
pub fn random_orthonormal<T: Real, R: Rng>(d: usize, k: usize, rng: &mut R) -> Result<DMatrix<T>> {
    if k < 1 || k > d {
        return Err(LpcaError::InvalidConfig(format!(
            "k = {k} out of range for dimension {d}"
        )));
    }
    let g = DMatrix::<T>::from_fn(d, k, |_, _| crate::r(rng.sample::<f64, _>(StandardNormal)));
    let qr = g.qr();
    let mut q = qr.q();
    fix_column_signs(&mut q);
    Ok(q)
}

/// Principal angles (radians, ascending) between the column spaces of two
/// orthonormal matrices of equal column count.
pub fn principal_angles<T: Real>(u1: &DMatrix<T>, u2: &DMatrix<T>) -> Result<Vec<T>> {
    if u1.nrows() != u2.nrows() || u1.ncols() != u2.ncols() {
        return Err(LpcaError::ShapeMismatch {
            expected: format!("{}x{}", u1.nrows(), u1.ncols()),
            got: format!("{}x{}", u2.nrows(), u2.ncols()),
        });
    }
    let cross = u1.transpose() * u2;
    let svd = cross.svd(false, false);
    let mut cosines: Vec<T> = svd.singular_values.iter().copied().collect();
    cosines.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    Ok(cosines
        .into_iter()
        .map(|c| c.min(T::one()).max(-T::one()).acos())
        .collect())
}
