//! Rank selection via deviance explained and five-fold cross-validation
//! for the scale parameter m.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::FitConfig;
use crate::deviance::{bernoulli_deviance, family_deviance};
use crate::mm::{fit_lpca, initial_mu, LpcaModel};
use crate::{r, BinaryMatrix, Family, LpcaError, Real, Result};

/// One row of a scree table: deviance and cumulative/marginal percent
/// explained at rank k.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreeRow<T> {
    pub k: usize,
    pub cumulative_pct: T,
    /// (D_{k-1} - D_k)/D_0; may be negative because the solutions at
    /// different ranks are not nested. Reported as-is.
    pub marginal_pct: T,
    pub deviance: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreeTable<T> {
    pub rows: Vec<ScreeRow<T>>,
    pub baseline_deviance: T,
}

/// One grid cell of a cross-validation run.
#[derive(Debug, Clone, PartialEq)]
pub struct CvEntry<T> {
    pub m: T,
    pub mean_deviance: T,
    pub fold_deviances: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult<T> {
    pub entries: Vec<CvEntry<T>>,
    pub chosen_m: T,
    pub folds: usize,
}

/// D(X; 1 mu-hat^T) with mu-hat the clamped logit of the column means:
/// the main-effects-only deviance every percentage is measured against.
pub fn baseline_deviance<T: Real>(x: &BinaryMatrix, m: T) -> Result<T> {
    let x_real = x.to_real::<T>();
    baseline_deviance_family(&x_real, Family::Bernoulli, m)
}

fn baseline_deviance_family<T: Real>(
    x: &nalgebra::DMatrix<T>,
    family: Family,
    m: T,
) -> Result<T> {
    let mu = initial_mu(x, family, m);
    let theta = nalgebra::DMatrix::from_fn(x.nrows(), x.ncols(), |_, j| mu[j]);
    family_deviance(x, &theta, family)
}

/// Fraction of deviance explained, 1 - D(X; theta-hat)/D(X; 1 mu-hat^T).
pub fn deviance_explained<T: Real>(x: &BinaryMatrix, model: &LpcaModel<T>) -> Result<T> {
    let x_real = x.to_real::<T>();
    let d0 = baseline_deviance_family(&x_real, model.family, model.m)?;
    if d0 <= T::zero() {
        return Err(LpcaError::Degenerate(
            "main-effects baseline deviance is zero; no deviance to explain".into(),
        ));
    }
    let theta = model.predict_theta(x)?;
    let dev = family_deviance(&x_real, &theta, model.family)?;
    Ok(T::one() - dev / d0)
}

/// Marginal fraction (D_{k-1} - D_k)/D_0. Pass `None` for the k = 1 case,
/// where D_0 itself plays the role of D_{k-1}.
pub fn marginal_deviance_explained<T: Real>(
    x: &BinaryMatrix,
    model_k: &LpcaModel<T>,
    model_km1: Option<&LpcaModel<T>>,
) -> Result<T> {
    let x_real = x.to_real::<T>();
    let d0 = baseline_deviance_family(&x_real, model_k.family, model_k.m)?;
    if d0 <= T::zero() {
        return Err(LpcaError::Degenerate(
            "main-effects baseline deviance is zero; no deviance to explain".into(),
        ));
    }
    let dk = family_deviance(&x_real, &model_k.predict_theta(x)?, model_k.family)?;
    let dkm1 = match model_km1 {
        Some(prev) => family_deviance(&x_real, &prev.predict_theta(x)?, prev.family)?,
        None => d0,
    };
    Ok((dkm1 - dk) / d0)
}

/// Fits ranks 1..=k_max with the MM solver and tabulates deviance
/// explained. `base` supplies m, tolerance, and initialization; its k is
/// overridden per row.
pub fn scree<T: Real>(
    x: &BinaryMatrix,
    k_max: usize,
    base: &FitConfig<T>,
) -> Result<ScreeTable<T>> {
    if k_max < 1 || k_max > x.ncols() {
        return Err(LpcaError::InvalidConfig(format!(
            "k_max = {k_max} out of range for {} columns",
            x.ncols()
        )));
    }
    let d0 = baseline_deviance(x, base.m)?;
    if d0 <= T::zero() {
        return Err(LpcaError::Degenerate(
            "main-effects baseline deviance is zero; no deviance to explain".into(),
        ));
    }
    let mut rows = Vec::with_capacity(k_max);
    let mut prev_dev = d0;
    for k in 1..=k_max {
        let mut config = base.clone();
        config.k = r(k as f64);
        let (model, _) = fit_lpca(x, &config)?;
        let dev = bernoulli_deviance(x, &model.predict_theta(x)?)?;
        rows.push(ScreeRow {
            k,
            cumulative_pct: T::one() - dev / d0,
            marginal_pct: (prev_dev - dev) / d0,
            deviance: dev,
        });
        prev_dev = dev;
    }
    Ok(ScreeTable {
        rows,
        baseline_deviance: d0,
    })
}

/// Smallest k whose cumulative percent explained reaches `gamma`
/// (default 0.9), or `None` if no row does.
pub fn choose_k<T: Real>(table: &ScreeTable<T>, gamma: Option<T>) -> Option<usize> {
    let gamma = gamma.unwrap_or_else(|| r(0.9));
    table
        .rows
        .iter()
        .find(|row| row.cumulative_pct >= gamma)
        .map(|row| row.k)
}

/// Seeded fold assignment: uniform shuffle of row indices, then contiguous
/// blocks of near-equal size. Returns per-fold index lists.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 || n < folds {
        return Err(LpcaError::InvalidConfig(format!(
            "need 2 <= folds <= n, got folds = {folds}, n = {n}"
        )));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let mut out = Vec::with_capacity(folds);
    for fold in 0..folds {
        let lo = fold * n / folds;
        let hi = (fold + 1) * n / folds;
        out.push(indices[lo..hi].to_vec());
    }
    Ok(out)
}

/// Five-fold (by default) cross-validation over an ascending grid of m
/// values at fixed rank k. Each fold fits on the remaining rows and
/// accumulates the predictive Bernoulli deviance of the held-out rows.
/// Ties on the mean are broken toward the smallest m.
pub fn cross_validate_m<T: Real>(
    x: &BinaryMatrix,
    k: usize,
    m_grid: &[T],
    folds: usize,
    seed: u64,
) -> Result<CvResult<T>> {
    if m_grid.is_empty() {
        return Err(LpcaError::InvalidConfig("m grid is empty".into()));
    }
    for w in m_grid.windows(2) {
        if w[1] <= w[0] {
            return Err(LpcaError::InvalidConfig(
                "m grid must be strictly ascending".into(),
            ));
        }
    }
    let assignment = fold_assignment(x.nrows(), folds, seed)?;
    let all: Vec<usize> = (0..x.nrows()).collect();
    let mut entries = Vec::with_capacity(m_grid.len());
    for &m in m_grid {
        let mut fold_deviances = Vec::with_capacity(folds);
        let mut total = T::zero();
        for held_out in &assignment {
            let train_idx: Vec<usize> = all
                .iter()
                .copied()
                .filter(|i| !held_out.contains(i))
                .collect();
            let x_train = x.select_rows(&train_idx)?;
            let x_test = x.select_rows(held_out)?;
            let config = FitConfig::new(k, m);
            let (model, _) = fit_lpca(&x_train, &config)?;
            let dev = bernoulli_deviance(&x_test, &model.predict_theta(&x_test)?)?;
            total += dev;
            fold_deviances.push(dev);
        }
        entries.push(CvEntry {
            m,
            mean_deviance: total / r(folds as f64),
            fold_deviances,
        });
    }
    let mut chosen = 0;
    for (i, e) in entries.iter().enumerate().skip(1) {
        if e.mean_deviance < entries[chosen].mean_deviance {
            chosen = i;
        }
    }
    Ok(CvResult {
        chosen_m: entries[chosen].m,
        entries,
        folds,
    })
}

/// Predictive deviance of a fitted model on new data, plus the percent
/// form 1 - D_new/D_new,0 against the new data's own main-effects baseline.
pub fn predictive_deviance<T: Real>(
    model: &LpcaModel<T>,
    x_new: &BinaryMatrix,
) -> Result<(T, T)> {
    let dev = bernoulli_deviance(x_new, &model.predict_theta(x_new)?)?;
    let d0 = baseline_deviance(x_new, model.m)?;
    if d0 <= T::zero() {
        return Err(LpcaError::Degenerate(
            "main-effects baseline deviance of the new data is zero".into(),
        ));
    }
    Ok((dev, T::one() - dev / d0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};

    fn random_binary(n: usize, d: usize, seed: u64) -> BinaryMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        BinaryMatrix::new(DMatrix::from_fn(n, d, |_, _| u8::from(rng.gen_bool(0.5)))).unwrap()
    }

    #[test]
    fn full_rank_explained_is_one_minus_floor_ratio() {
        let x = random_binary(12, 4, 3);
        let m = 4.0;
        let config = FitConfig::new(4, m);
        let (model, _) = fit_lpca(&x, &config).unwrap();
        let frac = deviance_explained(&x, &model).unwrap();
        let d0 = baseline_deviance(&x, m).unwrap();
        let floor = 2.0 * 48.0 * (1.0 + (-m as f64).exp()).ln();
        assert_relative_eq!(frac, 1.0 - floor / d0, epsilon = 1e-8);
        assert!(frac < 1.0 && frac > 0.9);
    }

    #[test]
    fn baseline_model_explains_nothing() {
        // a model whose projection contributes nothing: U orthogonal to the
        // centered satpars cannot be built directly, so check the marginal
        // definition at k = 1 instead: D_0 - D_1 over D_0 equals cumulative
        let x = random_binary(15, 5, 8);
        let config = FitConfig::new(1, 4.0_f64);
        let (model, _) = fit_lpca(&x, &config).unwrap();
        let cum = deviance_explained(&x, &model).unwrap();
        let marg = marginal_deviance_explained(&x, &model, None).unwrap();
        assert_relative_eq!(cum, marg, epsilon = 1e-12);
    }

    #[test]
    fn gaussian_family_matches_pca_variance_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let x = DMatrix::<f64>::from_fn(40, 6, |_, _| rng.gen_range(-1.0..1.0));
        let k = 2;
        let config = FitConfig::new(k, 1.0_f64);
        let (model, _) =
            crate::mm::fit_generalized_pca(&x, Family::Gaussian, &config).unwrap();
        let theta = crate::deviance::assemble_theta_unchecked(
            &crate::SaturatedParams::from_family(&x, Family::Gaussian, 1.0)
                .unwrap()
                .matrix()
                .clone(),
            &model.mu,
            &model.u,
        );
        let dev = crate::deviance::family_deviance(&x, &theta, Family::Gaussian).unwrap();
        let mu = initial_mu(&x, Family::Gaussian, 1.0);
        let d0 = {
            let base = DMatrix::from_fn(40, 6, |_, j| mu[j]);
            crate::deviance::family_deviance(&x, &base, Family::Gaussian).unwrap()
        };
        let explained = 1.0 - dev / d0;
        // eigenvalue ratio of the centered gram matrix
        let xc = crate::data::center_columns(&x, &mu);
        let (evals, _) = crate::linalg::sym_eigen_desc(&(xc.transpose() * &xc)).unwrap();
        let ratio = (evals[0] + evals[1]) / evals.sum();
        assert_relative_eq!(explained, ratio, epsilon = 1e-6);
    }

    #[test]
    fn scree_rows_consistent() {
        let x = random_binary(25, 6, 5);
        let base = FitConfig::new(1, 4.0_f64);
        let table = scree(&x, 4, &base).unwrap();
        assert_eq!(table.rows.len(), 4);
        // cumulative is the running sum of marginals
        let mut acc = 0.0;
        for row in &table.rows {
            acc += row.marginal_pct;
            assert_relative_eq!(row.cumulative_pct, acc, epsilon = 1e-10);
            assert!(row.deviance >= 0.0);
        }
        // threshold helper picks the first crossing
        let gamma = table.rows[1].cumulative_pct;
        assert_eq!(choose_k(&table, Some(gamma)), Some(2));
        assert_eq!(choose_k(&table, Some(2.0)), None);
    }

    #[test]
    fn marginal_can_use_explicit_previous_model() {
        let x = random_binary(20, 5, 6);
        let (m1, _) = fit_lpca(&x, &FitConfig::new(1, 4.0_f64)).unwrap();
        let (m2, _) = fit_lpca(&x, &FitConfig::new(2, 4.0_f64)).unwrap();
        let marg2 = marginal_deviance_explained(&x, &m2, Some(&m1)).unwrap();
        let c1 = deviance_explained(&x, &m1).unwrap();
        let c2 = deviance_explained(&x, &m2).unwrap();
        assert_relative_eq!(marg2, c2 - c1, epsilon = 1e-10);
    }

    #[test]
    fn fold_assignment_partitions_and_is_seeded() {
        let a1 = fold_assignment(23, 5, 42).unwrap();
        let a2 = fold_assignment(23, 5, 42).unwrap();
        assert_eq!(a1, a2);
        let mut all: Vec<usize> = a1.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        for fold in &a1 {
            assert!(fold.len() == 4 || fold.len() == 5);
        }
        let a3 = fold_assignment(23, 5, 43).unwrap();
        assert_ne!(a1, a3);
        assert!(fold_assignment(3, 5, 0).is_err());
    }

    #[test]
    fn cv_singleton_grid_and_determinism() {
        let x = random_binary(20, 5, 9);
        let res = cross_validate_m(&x, 2, &[4.0], 5, 1).unwrap();
        assert_eq!(res.chosen_m, 4.0);
        assert_eq!(res.entries.len(), 1);
        assert_eq!(res.entries[0].fold_deviances.len(), 5);
        let res2 = cross_validate_m(&x, 2, &[4.0], 5, 1).unwrap();
        assert_eq!(res, res2);
        assert!(cross_validate_m(&x, 2, &[] as &[f64], 5, 1).is_err());
        assert!(cross_validate_m(&x, 2, &[4.0, 3.0], 5, 1).is_err());
    }

    #[test]
    fn cv_tie_breaks_to_smallest_m() {
        let entries = vec![
            CvEntry {
                m: 1.0,
                mean_deviance: 5.0,
                fold_deviances: vec![],
            },
            CvEntry {
                m: 2.0,
                mean_deviance: 5.0,
                fold_deviances: vec![],
            },
        ];
        // replicate the argmin logic on a constructed tie
        let mut chosen = 0;
        for (i, e) in entries.iter().enumerate().skip(1) {
            if e.mean_deviance < entries[chosen].mean_deviance {
                chosen = i;
            }
        }
        assert_eq!(entries[chosen].m, 1.0);
    }

    #[test]
    fn predictive_deviance_on_training_matches() {
        let x = random_binary(18, 5, 12);
        let (model, _) = fit_lpca(&x, &FitConfig::new(2, 4.0_f64)).unwrap();
        let (dev, pct) = predictive_deviance(&model, &x).unwrap();
        let direct = bernoulli_deviance(&x, &model.predict_theta(&x).unwrap()).unwrap();
        assert_relative_eq!(dev, direct, epsilon = 1e-12);
        assert_relative_eq!(
            pct,
            deviance_explained(&x, &model).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn heldout_rank1_beats_main_effects() {
        // rank-1 structure: rows repeat one of two complementary patterns
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let base: Vec<u8> = (0..8).map(|_| u8::from(rng.gen_bool(0.5))).collect();
        let x = BinaryMatrix::new(DMatrix::from_fn(30, 8, |i, j| {
            if i % 2 == 0 {
                base[j]
            } else {
                1 - base[j]
            }
        }))
        .unwrap();
        let train: Vec<usize> = (1..30).collect();
        let x_train = x.select_rows(&train).unwrap();
        let x_test = x.select_rows(&[0]).unwrap();
        let mut config = FitConfig::new(1, 5.0_f64);
        config.include_mu = false;
        let (model, _) = fit_lpca(&x_train, &config).unwrap();
        let (dev, _) = predictive_deviance(&model, &x_test).unwrap();
        let d0 = baseline_deviance(&x_test, 5.0).unwrap();
        // the held-out row's own baseline is separable; compare against the
        // training-mu baseline instead
        let mu = initial_mu(&x_train.to_real::<f64>(), Family::Bernoulli, 5.0);
        let base_theta = DMatrix::from_fn(1, 8, |_, j| mu[j]);
        let main_effects = bernoulli_deviance(&x_test, &base_theta).unwrap();
        assert!(dev < main_effects, "dev {dev} vs main effects {main_effects}");
        let _ = (d0, DVector::<f64>::zeros(1));
    }
}
