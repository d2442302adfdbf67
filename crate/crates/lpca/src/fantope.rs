//! Accelerated projected gradient over the Fantope, the convex hull of
//! rank-k projection matrices.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{FitConfig, Init};
use crate::data::center_columns;
use crate::deviance::{assemble_theta_h, bernoulli_deviance_real, fitted_probabilities};
use crate::linalg::{random_orthonormal, sym_eigen_desc, top_k_eigvecs, top_right_singular};
use crate::mm::{initial_mu, FitReport, LpcaModel};
use crate::{f, r, BinaryMatrix, Family, LpcaError, Real, Result, SaturatedParams};

/// Fantope-relaxed model: a d x d symmetric H with eigenvalues in [0, 1]
/// and trace k, plus fixed main effects and scale.
#[derive(Debug, Clone, PartialEq)]
pub struct FantopeModel<T: Real> {
    pub h: DMatrix<T>,
    pub mu: DVector<T>,
    pub m: T,
    pub k: T,
}

impl<T: Real> FantopeModel<T> {
    /// Predicted natural parameters 1 mu^T + (theta-tilde* - 1 mu^T) H.
    pub fn predict_theta(&self, x_new: &BinaryMatrix) -> Result<DMatrix<T>> {
        if x_new.ncols() != self.h.nrows() {
            return Err(LpcaError::ShapeMismatch {
                expected: format!("{} columns", self.h.nrows()),
                got: format!("{} columns", x_new.ncols()),
            });
        }
        let sat = SaturatedParams::bernoulli(x_new, self.m)?;
        Ok(assemble_theta_h(sat.matrix(), &self.mu, &self.h))
    }
}

/// Lipschitz constant of the deviance gradient in H:
/// L = ||theta-tilde - 1 mu^T||_F^2. Rejects the all-centered degenerate
/// case L = 0, for which 1/L steps are undefined.
pub fn lipschitz_constant<T: Real>(sat: &SaturatedParams<T>, mu: &DVector<T>) -> Result<T> {
    if mu.len() != sat.ncols() {
        return Err(LpcaError::ShapeMismatch {
            expected: format!("mu of length {}", sat.ncols()),
            got: format!("length {}", mu.len()),
        });
    }
    let l = sat.centered(mu).norm_squared();
    if l <= T::zero() {
        return Err(LpcaError::Degenerate(
            "centered saturated parameters are identically zero; Lipschitz constant is 0".into(),
        ));
    }
    Ok(l)
}

/// Symmetrized deviance gradient in H: with G = 2 (P-hat - X)^T (theta-tilde
/// - 1 mu^T) evaluated at theta = 1 mu^T + (theta-tilde - 1 mu^T) H, returns
/// G + G^T - diag(G).
pub fn fantope_gradient<T: Real>(
    x: &DMatrix<T>,
    sat: &DMatrix<T>,
    mu: &DVector<T>,
    h: &DMatrix<T>,
) -> Result<DMatrix<T>> {
    if x.shape() != sat.shape() || h.nrows() != x.ncols() || h.ncols() != x.ncols() {
        return Err(LpcaError::ShapeMismatch {
            expected: format!("X and satpars {}x{}, H {1}x{1}", x.nrows(), x.ncols()),
            got: format!(
                "satpars {}x{}, H {}x{}",
                sat.nrows(),
                sat.ncols(),
                h.nrows(),
                h.ncols()
            ),
        });
    }
    let theta = assemble_theta_h(sat, mu, h);
    let p_hat = fitted_probabilities(&theta);
    let sat_c = center_columns(sat, mu);
    let g = (p_hat - x).transpose() * sat_c * r::<T>(2.0);
    let mut sym = &g + g.transpose();
    for j in 0..sym.nrows() {
        sym[(j, j)] = g[(j, j)];
    }
    Ok(sym)
}

/// Euclidean projection onto the rank-k Fantope: eigendecompose, clip the
/// spectrum to lambda+ = min(max(lambda - nu, 0), 1) with nu found by
/// bisection so the clipped trace equals k, and reassemble.
pub fn fantope_project<T: Real>(m: &DMatrix<T>, k: T) -> Result<DMatrix<T>> {
    let d = m.nrows();
    if m.ncols() != d {
        return Err(LpcaError::ShapeMismatch {
            expected: "square matrix".into(),
            got: format!("{}x{}", m.nrows(), m.ncols()),
        });
    }
    if k <= T::zero() || k > r(d as f64) {
        return Err(LpcaError::InvalidConfig(format!(
            "Fantope rank must satisfy 0 < k <= d = {d}, got {}",
            f(k)
        )));
    }
    let (vals, vecs) = sym_eigen_desc(m)?;
    let clipped_trace = |nu: T| -> T {
        vals.iter()
            .map(|&l| (l - nu).max(T::zero()).min(T::one()))
            .fold(T::zero(), |a, b| a + b)
    };
    let mut lo = vals[d - 1] - k / r(d as f64);
    let mut hi = vals[0];
    let tol = r::<T>(1e-10);
    let mut nu = (lo + hi) / r(2.0);
    for _ in 0..200 {
        nu = (lo + hi) / r(2.0);
        let t = clipped_trace(nu);
        if (t - k).abs() < tol {
            break;
        }
        if t > k {
            lo = nu;
        } else {
            hi = nu;
        }
    }
    let clipped = DVector::from_iterator(
        d,
        vals.iter().map(|&l| (l - nu).max(T::zero()).min(T::one())),
    );
    Ok(&vecs * DMatrix::from_diagonal(&clipped) * vecs.transpose())
}

/// Extracts a rank-k projection model from the Fantope solution by taking
/// the top k_int eigenvectors of H (the "projected" upper bound).
pub fn fantope_to_projection<T: Real>(
    model: &FantopeModel<T>,
    k_int: usize,
) -> Result<LpcaModel<T>> {
    let u = top_k_eigvecs(&model.h, k_int)?;
    Ok(LpcaModel {
        u,
        mu: model.mu.clone(),
        m: model.m,
        k: k_int,
        family: Family::Bernoulli,
    })
}

// Consecutive sub-tolerance improvements of the best-so-far deviance
// required before the non-monotone accelerated sequence is declared
// converged.
const BEST_PATIENCE: usize = 25;

/// Fits the Fantope relaxation by accelerated projected gradient with
/// fixed step 1/L. Main effects are set once from the column means and
/// not updated. The iterate sequence is not monotone; convergence is
/// measured on the best-so-far average deviance.
pub fn fit_fantope<T: Real>(
    x: &BinaryMatrix,
    config: &FitConfig<T>,
) -> Result<(FantopeModel<T>, FitReport<T>)> {
    let start = Instant::now();
    let (n, d) = (x.nrows(), x.ncols());
    config.validate(d)?;
    let k = config.k;
    let nd = r::<T>((n * d) as f64);
    let x_real = x.to_real::<T>();

    let sat = SaturatedParams::bernoulli(x, config.m)?;
    let mu = if config.include_mu {
        initial_mu(&x_real, Family::Bernoulli, config.m)
    } else {
        DVector::zeros(d)
    };
    let l = lipschitz_constant(&sat, &mu)?;
    let sat_m = sat.matrix();
    let sat_c = center_columns(sat_m, &mu);

    let k_ceil = (f(k).ceil() as usize).min(d);
    let u0 = match &config.init {
        Init::Svd => top_right_singular(&sat_c, k_ceil)?.1,
        Init::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            random_orthonormal(d, k_ceil, &mut rng)?
        }
        Init::Provided(u) => u.clone(),
    };
    let mut h_prev = &u0 * u0.transpose();
    // fractional k: the projection-matrix start has trace ceil(k), so pull
    // it back into the Fantope first
    if (h_prev.trace() - k).abs() > r(1e-12) {
        h_prev = fantope_project(&h_prev, k)?;
    }
    let mut h = h_prev.clone();

    let avg = |hm: &DMatrix<T>| -> Result<T> {
        let theta = assemble_theta_h(sat_m, &mu, hm);
        Ok(bernoulli_deviance_real(&x_real, &theta)? / nd)
    };

    let mut dev = avg(&h)?;
    let mut best = dev;
    let mut trace = vec![dev];
    let mut best_trace = vec![best];
    let mut best_h = h.clone();
    let mut converged = false;
    let mut iterations = 0;
    let mut quiet = 0usize;

    let mut t_eff = 1usize;
    for _ in 1..=config.max_iter {
        let momentum = r::<T>((t_eff as f64 - 2.0) / (t_eff as f64 + 1.0));
        t_eff += 1;
        let f_mat = &h + (&h - &h_prev) * momentum;
        let grad = fantope_gradient(&x_real, sat_m, &mu, &f_mat)?;
        let mut step = T::one() / l;
        let mut next = fantope_project(&(&f_mat - &grad * step), k)?;
        if config.line_search {
            // backtracking from a larger trial step; accepts on simple
            // decrease against the current iterate
            step = r::<T>(16.0) / l;
            loop {
                let cand = fantope_project(&(&f_mat - &grad * step), k)?;
                if avg(&cand)? <= dev || step <= T::one() / l {
                    next = cand;
                    break;
                }
                step = step / r(2.0);
            }
        }
        h_prev = std::mem::replace(&mut h, next);
        let prev_dev = dev;
        dev = avg(&h)?;
        // adaptive restart: drop the accumulated momentum whenever the
        // objective rises, so the accelerated sequence cannot stall on an
        // oscillation plateau
        if dev > prev_dev {
            t_eff = 1;
        }
        iterations += 1;
        trace.push(dev);
        let prev_best = best;
        if dev < best {
            best = dev;
            best_h = h.clone();
        }
        best_trace.push(best);
        if (prev_best - best).abs() < config.tol {
            quiet += 1;
            if quiet >= BEST_PATIENCE {
                converged = true;
                break;
            }
        } else {
            quiet = 0;
        }
    }

    let model = FantopeModel {
        h: best_h,
        mu,
        m: config.m,
        k,
    };
    let report = FitReport {
        deviance_trace: trace,
        iterations,
        converged,
        elapsed_secs: start.elapsed().as_secs_f64(),
        best_trace: Some(best_trace),
    };
    Ok((model, report))
}

/// The three Fantope membership residuals of H: max eigenvalue excess
/// below 0, above 1, and |trace - k|.
pub fn fantope_residuals<T: Real>(h: &DMatrix<T>, k: T) -> Result<(T, T, T)> {
    let (vals, _) = sym_eigen_desc(h)?;
    let below = vals
        .iter()
        .map(|&v| (-v).max(T::zero()))
        .fold(T::zero(), T::max);
    let above = vals
        .iter()
        .map(|&v| (v - T::one()).max(T::zero()))
        .fold(T::zero(), T::max);
    let trace_err = (h.trace() - k).abs();
    Ok((below, above, trace_err))
}
