//! Numerical verification of the first-order optimality theory:
//! stationarity residuals, the C^m matrix, basis-vector and
//! compound-symmetry special cases, and a brute-force grid-search oracle
//! for low-dimensional problems.

use nalgebra::{DMatrix, DVector};

use crate::deviance::{assemble_theta_unchecked, fitted_probabilities};
use crate::mm::{initial_mu, LpcaModel};
use crate::{f, r, BinaryMatrix, Family, LpcaError, Real, Result, SaturatedParams};

/// Residuals of the three first-order optimality conditions, evaluated at
/// a fitted or candidate (U, mu).
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalityReport<T> {
    /// ||C^m U - U (U^T C^m U)||_F; the symmetric multiplier Lambda is
    /// taken as U^T C^m U.
    pub stationarity_residual: T,
    /// ||(I - U U^T)(X - P-hat)^T 1||
    pub mu_residual: T,
    /// ||U^T U - I||_F
    pub ortho_residual: T,
}

/// C^m = (X - P-hat)^T (S - 1 mu^T) + (S - 1 mu^T)^T (X - P-hat), the
/// symmetric matrix of the stationarity condition, evaluated at the
/// model's (U, mu, m).
pub fn cm_matrix<T: Real>(x: &BinaryMatrix, model: &LpcaModel<T>) -> Result<DMatrix<T>> {
    let sat = SaturatedParams::bernoulli(x, model.m)?;
    let theta = assemble_theta_unchecked(sat.matrix(), &model.mu, &model.u);
    let p_hat = fitted_probabilities(&theta);
    let resid = x.to_real::<T>() - p_hat;
    let sat_c = sat.centered(&model.mu);
    let half = resid.transpose() * sat_c;
    Ok(&half + half.transpose())
}

/// The symmetric Lagrange multiplier Lambda = U^T C^m U.
pub fn lagrange_multiplier<T: Real>(x: &BinaryMatrix, model: &LpcaModel<T>) -> Result<DMatrix<T>> {
    let c = cm_matrix(x, model)?;
    Ok(model.u.transpose() * c * &model.u)
}

pub fn optimality_residuals<T: Real>(
    x: &BinaryMatrix,
    model: &LpcaModel<T>,
) -> Result<OptimalityReport<T>> {
    let c = cm_matrix(x, model)?;
    let u = &model.u;
    let lambda = u.transpose() * &c * u;
    let stationarity_residual = (&c * u - u * lambda).norm();

    let sat = SaturatedParams::bernoulli(x, model.m)?;
    let theta = assemble_theta_unchecked(sat.matrix(), &model.mu, u);
    let p_hat = fitted_probabilities(&theta);
    let resid_sum = (x.to_real::<T>() - p_hat).transpose() * DVector::from_element(x.nrows(), T::one());
    let proj = DMatrix::<T>::identity(u.nrows(), u.nrows()) - u * u.transpose();
    let mu_residual = (proj * resid_sum).norm();

    let ortho_residual = crate::deviance::orthonormality_residual(u);
    Ok(OptimalityReport {
        stationarity_residual,
        mu_residual,
        ortho_residual,
    })
}

/// Unconstrained deviance gradient in U: dD/dU = -2 C^m U.
pub fn gradient_u<T: Real>(x: &BinaryMatrix, model: &LpcaModel<T>) -> Result<DMatrix<T>> {
    Ok(cm_matrix(x, model)? * &model.u * r::<T>(-2.0))
}

/// Deviance gradient in mu: dD/dmu = 2 (I - U U^T)(P-hat - X)^T 1.
pub fn gradient_mu<T: Real>(x: &BinaryMatrix, model: &LpcaModel<T>) -> Result<DVector<T>> {
    let sat = SaturatedParams::bernoulli(x, model.m)?;
    let theta = assemble_theta_unchecked(sat.matrix(), &model.mu, &model.u);
    let p_hat = fitted_probabilities(&theta);
    let resid_sum = (p_hat - x.to_real::<T>()).transpose() * DVector::from_element(x.nrows(), T::one());
    let u = &model.u;
    let proj = DMatrix::<T>::identity(u.nrows(), u.nrows()) - u * u.transpose();
    Ok(proj * resid_sum * r::<T>(2.0))
}

/// Outcome of the exhaustive basis search over uncorrelated columns.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisOrderingReport<T> {
    /// argmin of the deviance over U = e_j.
    pub best_column: usize,
    /// index of the column with mean closest to 1/2 (ties: lowest index).
    pub closest_to_half: usize,
    pub deviances: Vec<T>,
}

/// Exhaustively evaluates the rank-1 basis-vector solutions on data with
/// mutually uncorrelated columns, returning the deviance-minimizing
/// column. The uncorrelatedness precondition is verified to 1e-8 on the
/// sample cross-moments.
pub fn basis_ordering<T: Real>(x: &BinaryMatrix, m: T) -> Result<BasisOrderingReport<T>> {
    let (n, d) = (x.nrows(), x.ncols());
    let x_real = x.to_real::<T>();
    let means = x.column_means::<T>();
    let nvec = r::<T>(n as f64);
    for j in 0..d {
        for l in (j + 1)..d {
            let cross = x_real.column(j).dot(&x_real.column(l)) / nvec;
            if (cross - means[j] * means[l]).abs() > r(1e-8) {
                return Err(LpcaError::Precondition(format!(
                    "columns {j} and {l} are correlated (cross moment {}, product of means {})",
                    f(cross),
                    f(means[j] * means[l])
                )));
            }
        }
    }
    let sat = SaturatedParams::bernoulli(x, m)?;
    let mu = initial_mu(&x_real, Family::Bernoulli, m);
    let mut deviances = Vec::with_capacity(d);
    for j in 0..d {
        let mut e = DMatrix::<T>::zeros(d, 1);
        e[(j, 0)] = T::one();
        let theta = assemble_theta_unchecked(sat.matrix(), &mu, &e);
        deviances.push(crate::deviance::bernoulli_deviance_real(&x_real, &theta)?);
    }
    let mut best_column = 0;
    for j in 1..d {
        if deviances[j] < deviances[best_column] {
            best_column = j;
        }
    }
    let mut closest_to_half = 0;
    let half = r::<T>(0.5);
    for j in 1..d {
        if (means[j] - half).abs() < (means[closest_to_half] - half).abs() {
            closest_to_half = j;
        }
    }
    Ok(BasisOrderingReport {
        best_column,
        closest_to_half,
        deviances,
    })
}

/// Per-column deviance of a non-selected column under the basis solution:
/// -2n (xbar log xbar + (1 - xbar) log(1 - xbar)).
pub fn basis_offcolumn_deviance<T: Real>(n: usize, mean: T) -> T {
    let nv = r::<T>(n as f64);
    let one = T::one();
    let term = |p: T| if p <= T::zero() { T::zero() } else { p * p.ln() };
    -r::<T>(2.0) * nv * (term(mean) + term(one - mean))
}

/// Compound-symmetry verification at u = 1/sqrt(d) 1 with mu pinned to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct CompoundSymmetryReport<T> {
    pub stationarity_residual: T,
    /// The affine coefficient (sigma(m/2) - 1/2)/2 of the d = 4 case
    /// (also valid at d = 3 with a single remaining coordinate at d <= 4).
    pub beta: Option<T>,
    pub lambda: T,
}

/// Verifies Q^T Q compound symmetry and evaluates the stationarity
/// residual at u = 1/sqrt(d) 1. Only d <= 4 carries the closed-form
/// guarantee; larger d is evaluated but not certified.
pub fn compound_symmetry_check<T: Real>(x: &BinaryMatrix, m: T) -> Result<CompoundSymmetryReport<T>> {
    let d = x.ncols();
    let q = x.to_q::<T>();
    let gram = q.transpose() * &q;
    let diag = gram[(0, 0)];
    let mut off: Option<T> = None;
    for j in 0..d {
        if (gram[(j, j)] - diag).abs() > r(1e-8) {
            return Err(LpcaError::Precondition(format!(
                "Q^T Q diagonal is not constant: entry ({j},{j}) = {}, expected {}",
                f(gram[(j, j)]),
                f(diag)
            )));
        }
        for l in 0..d {
            if j == l {
                continue;
            }
            match off {
                None => off = Some(gram[(j, l)]),
                Some(v) => {
                    if (gram[(j, l)] - v).abs() > r(1e-8) {
                        return Err(LpcaError::Precondition(format!(
                            "Q^T Q off-diagonal is not constant: entry ({j},{l}) = {}, expected {}",
                            f(gram[(j, l)]),
                            f(v)
                        )));
                    }
                }
            }
        }
    }
    let u = DMatrix::<T>::from_element(d, 1, T::one() / r::<T>(d as f64).sqrt());
    let model = LpcaModel {
        u,
        mu: DVector::zeros(d),
        m,
        k: 1,
        family: Family::Bernoulli,
    };
    let c = cm_matrix(x, &model)?;
    let lambda = (model.u.transpose() * &c * &model.u)[(0, 0)];
    let stationarity_residual = (&c * &model.u - &model.u * lambda).norm();
    let beta = if d >= 3 && d <= 4 {
        Some((crate::deviance::sigmoid(m / r(2.0)) - r(0.5)) / r(2.0))
    } else {
        None
    };
    Ok(CompoundSymmetryReport {
        stationarity_residual,
        beta,
        lambda,
    })
}

/// Brute-force rank-1 grid-search oracle for d in {2, 3}. Deliberately
/// self-contained: the deviance is evaluated from first principles so the
/// oracle shares no code path with the solvers.
pub fn grid_oracle_rank1(
    x: &BinaryMatrix,
    m: f64,
    mu: Option<&DVector<f64>>,
    angle_step: f64,
) -> Result<(DVector<f64>, f64)> {
    let (n, d) = (x.nrows(), x.ncols());
    if d != 2 && d != 3 {
        return Err(LpcaError::InvalidConfig(format!(
            "grid oracle supports d in {{2, 3}}, got d = {d}"
        )));
    }
    if angle_step <= 0.0 {
        return Err(LpcaError::InvalidConfig("angle step must be positive".into()));
    }
    let mu_vec = match mu {
        Some(v) => {
            if v.len() != d {
                return Err(LpcaError::ShapeMismatch {
                    expected: format!("mu of length {d}"),
                    got: format!("length {}", v.len()),
                });
            }
            v.clone()
        }
        None => DVector::zeros(d),
    };
    let log1p_exp = |t: f64| {
        if t > 0.0 {
            t + (-t).exp().ln_1p()
        } else {
            t.exp().ln_1p()
        }
    };
    let deviance_at = |u: &[f64]| {
        let mut dev = 0.0;
        for i in 0..n {
            // u u^T (satpar_i - mu) projection, written out longhand
            let mut inner = 0.0;
            for l in 0..d {
                let q = if x.get(i, l) == 1 { 1.0 } else { -1.0 };
                inner += u[l] * (m * q - mu_vec[l]);
            }
            for j in 0..d {
                let theta = mu_vec[j] + u[j] * inner;
                let xv = f64::from(x.get(i, j));
                dev += -2.0 * xv * theta + 2.0 * log1p_exp(theta);
            }
        }
        dev
    };
    let mut best_u = vec![0.0; d];
    let mut best_dev = f64::INFINITY;
    if d == 2 {
        let steps = (std::f64::consts::PI / angle_step).ceil() as usize;
        for s in 0..steps {
            let a = s as f64 * angle_step;
            let u = [a.cos(), a.sin()];
            let dev = deviance_at(&u);
            if dev < best_dev {
                best_dev = dev;
                best_u = u.to_vec();
            }
        }
    } else {
        // hemisphere: azimuth in [0, pi), inclination in [-pi/2, pi/2]
        let a_steps = (std::f64::consts::PI / angle_step).ceil() as usize;
        let b_steps = (std::f64::consts::PI / angle_step).ceil() as usize + 1;
        for sa in 0..a_steps {
            let a = sa as f64 * angle_step;
            for sb in 0..b_steps {
                let b = -std::f64::consts::FRAC_PI_2 + sb as f64 * angle_step;
                let u = [a.cos() * b.cos(), a.sin() * b.cos(), b.sin()];
                let dev = deviance_at(&u);
                if dev < best_dev {
                    best_dev = dev;
                    best_u = u.to_vec();
                }
            }
        }
    }
    Ok((DVector::from_vec(best_u), best_dev))
}
