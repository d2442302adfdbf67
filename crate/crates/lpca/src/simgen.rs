//! Bernoulli-mixture data generator, the element-wise probability MSE
//! metric, parameter sweeps, and the principal-component-regression
//! overfitting experiment.
//!
//! Generation is f64 throughout; fitted models may use any scalar.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::baselines::{fit_lsvd, fit_pca, lsvd_new_scores_matrix};
use crate::config::FitConfig;
use crate::deviance::sigmoid;
use crate::mm::fit_lpca;
use crate::{BinaryMatrix, LpcaError, Result};

/// A k-cluster Bernoulli mixture: cluster probability vectors are iid
/// Beta(alpha, beta) per coordinate with alpha = 2 phi pbar and
/// beta = 2 phi (1 - pbar), rows are assigned uniformly.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    pub n: usize,
    pub d: usize,
    pub k_true: usize,
    /// Beta mean in (0, 1).
    pub pbar: f64,
    /// Concentration (alpha + beta)/2 > 0. Values below 1 put mass near
    /// {0, 1}; large values concentrate the probabilities around pbar.
    pub phi: f64,
    pub seed: u64,
}

impl MixtureSpec {
    pub fn new(n: usize, d: usize, k_true: usize, pbar: f64, phi: f64, seed: u64) -> Self {
        Self {
            n,
            d,
            k_true,
            pbar,
            phi,
            seed,
        }
    }

    pub fn alpha(&self) -> f64 {
        2.0 * self.phi * self.pbar
    }

    pub fn beta(&self) -> f64 {
        2.0 * self.phi * (1.0 - self.pbar)
    }

    /// Main effects belong in the fit exactly when the Beta mean is off
    /// center.
    pub fn include_mu(&self) -> bool {
        self.pbar != 0.5
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 || self.k_true == 0 {
            return Err(LpcaError::InvalidConfig(
                "n, d, and k_true must be positive".into(),
            ));
        }
        if !(self.pbar > 0.0 && self.pbar < 1.0) {
            return Err(LpcaError::InvalidConfig(format!(
                "pbar must lie in (0, 1), got {}",
                self.pbar
            )));
        }
        if !(self.phi > 0.0) {
            return Err(LpcaError::InvalidConfig(format!(
                "phi must be positive, got {}",
                self.phi
            )));
        }
        Ok(())
    }
}

/// A generated dataset together with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedDataset {
    pub x: BinaryMatrix,
    /// True n x d probability matrix, P = A B*^T with A one-hot.
    pub p: DMatrix<f64>,
    /// Cluster label of each row.
    pub assignments: Vec<usize>,
    /// The k_true x d cluster probability vectors B*^T.
    pub cluster_probs: DMatrix<f64>,
}

/// Draws a dataset from the mixture, fully determined by the seed in `MixtureSpec`.
pub fn simulate(spec: &MixtureSpec) -> Result<SimulatedDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let beta = Beta::new(spec.alpha(), spec.beta())
        .map_err(|e| LpcaError::InvalidConfig(format!("Beta parameters invalid: {e}")))?;
    let cluster_probs =
        DMatrix::<f64>::from_fn(spec.k_true, spec.d, |_, _| beta.sample(&mut rng));
    let assignments: Vec<usize> = (0..spec.n)
        .map(|_| rng.gen_range(0..spec.k_true))
        .collect();
    let p = DMatrix::from_fn(spec.n, spec.d, |i, j| cluster_probs[(assignments[i], j)]);
    let x = BinaryMatrix::new(DMatrix::from_fn(spec.n, spec.d, |i, j| {
        u8::from(rng.gen_bool(p[(i, j)]))
    }))?;
    Ok(SimulatedDataset {
        x,
        p,
        assignments,
        cluster_probs,
    })
}

/// Element-wise mean squared error ||P-hat - P||_F^2 / (nd).
pub fn probability_mse(p_hat: &DMatrix<f64>, p: &DMatrix<f64>) -> Result<f64> {
    if p_hat.shape() != p.shape() {
        return Err(LpcaError::ShapeMismatch {
            expected: format!("{}x{}", p.nrows(), p.ncols()),
            got: format!("{}x{}", p_hat.nrows(), p_hat.ncols()),
        });
    }
    Ok((p_hat - p).norm_squared() / (p.nrows() * p.ncols()) as f64)
}

/// Fitting method identifier used across sweeps and experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Lpca,
    Lsvd,
    Pca,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Lpca => "lpca",
            Method::Lsvd => "lsvd",
            Method::Pca => "pca",
        }
    }
}

/// One cell of a sweep: scenario, method, and its in-sample results.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub phi: f64,
    pub pbar: f64,
    pub k: usize,
    pub m: f64,
    pub method: Method,
    /// Probability MSE against the generating P.
    pub mse: f64,
    /// Final average in-sample deviance D/(nd).
    pub avg_deviance: f64,
    pub iterations: usize,
}

/// Fits LPCA and LSVD over a grid of (phi, k, m) cells on freshly
/// simulated data. LSVD has no m; it is refit per cell so the pairing at
/// each (phi, k, m) stays exact, with the m only entering its mu clamp.
pub fn run_sweep(
    base: &MixtureSpec,
    phis: &[f64],
    ks: &[usize],
    ms: &[f64],
) -> Result<Vec<SweepCell>> {
    let mut cells = Vec::new();
    for (pi, &phi) in phis.iter().enumerate() {
        let spec = MixtureSpec {
            phi,
            seed: base.seed.wrapping_add(pi as u64),
            ..base.clone()
        };
        let sim = simulate(&spec)?;
        for &k in ks {
            for &m in ms {
                let mut config = FitConfig::new(k, m);
                config.include_mu = spec.include_mu();
                let (lpca_model, lpca_report) = fit_lpca(&sim.x, &config)?;
                let p_hat = lpca_model.predict_probabilities(&sim.x)?;
                cells.push(SweepCell {
                    phi,
                    pbar: spec.pbar,
                    k,
                    m,
                    method: Method::Lpca,
                    mse: probability_mse(&p_hat, &sim.p)?,
                    avg_deviance: *lpca_report.deviance_trace.last().unwrap(),
                    iterations: lpca_report.iterations,
                });
                let (lsvd_model, lsvd_report) = fit_lsvd(&sim.x, &config)?;
                let p_hat = lsvd_model.theta().map(sigmoid);
                cells.push(SweepCell {
                    phi,
                    pbar: spec.pbar,
                    k,
                    m,
                    method: Method::Lsvd,
                    mse: probability_mse(&p_hat, &sim.p)?,
                    avg_deviance: *lsvd_report.deviance_trace.last().unwrap(),
                    iterations: lsvd_report.iterations,
                });
            }
        }
    }
    Ok(cells)
}

/// CSV rendering of sweep cells (header included).
pub fn sweep_csv(base: &MixtureSpec, cells: &[SweepCell]) -> String {
    let mut out = String::from("n,d,k_true,pbar,phi,method,k,m,mse,avg_deviance,iterations\n");
    for c in cells {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            base.n,
            base.d,
            base.k_true,
            c.pbar,
            c.phi,
            c.method.as_str(),
            c.k,
            c.m,
            c.mse,
            c.avg_deviance,
            c.iterations
        ));
    }
    out
}

/// One row of the PCR experiment: regression MSE of a response on the
/// method's k scores. k = 0 denotes the intercept-only baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct PcrRow {
    pub method: Method,
    pub k: usize,
    pub snr: f64,
    pub in_mse: f64,
    pub out_mse: f64,
}

fn least_squares(design: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let gram = design.transpose() * design;
    let rhs = design.transpose() * y;
    if let Some(sol) = gram.clone().lu().solve(&rhs) {
        if sol.iter().all(|v| v.is_finite()) {
            return Ok(sol);
        }
    }
    // ridge fallback for singular designs
    let mut ridged = gram;
    for i in 0..ridged.nrows() {
        ridged[(i, i)] += 1e-8;
    }
    ridged
        .lu()
        .solve(&rhs)
        .ok_or_else(|| LpcaError::Numerical("ridge-regularized normal equations singular".into()))
}

fn with_intercept(scores: &DMatrix<f64>) -> DMatrix<f64> {
    let mut design = DMatrix::from_element(scores.nrows(), scores.ncols() + 1, 1.0);
    design.columns_mut(1, scores.ncols()).copy_from(scores);
    design
}

fn regression_mse(
    train_scores: &DMatrix<f64>,
    test_scores: &DMatrix<f64>,
    y_train: &DVector<f64>,
    y_test: &DVector<f64>,
) -> Result<(f64, f64)> {
    let design = with_intercept(train_scores);
    let coef = least_squares(&design, y_train)?;
    let in_res = y_train - design * &coef;
    let out_res = y_test - with_intercept(test_scores) * &coef;
    Ok((
        in_res.norm_squared() / y_train.len() as f64,
        out_res.norm_squared() / y_test.len() as f64,
    ))
}

/// Principal component regression: draw beta ~ N(0, I), generate
/// y = X beta + noise at each signal-to-noise ratio var(x^T beta)/sigma^2,
/// regress y on each method's training scores, and report in/out-of-sample
/// MSE. An intercept-only baseline row is emitted per SNR.
pub fn pcr_experiment(
    x_train: &BinaryMatrix,
    x_test: &BinaryMatrix,
    methods: &[Method],
    k_grid: &[usize],
    snr_grid: &[f64],
    m: f64,
    seed: u64,
) -> Result<Vec<PcrRow>> {
    if x_train.ncols() != x_test.ncols() {
        return Err(LpcaError::ShapeMismatch {
            expected: format!("{} columns", x_train.ncols()),
            got: format!("{} columns", x_test.ncols()),
        });
    }
    let d = x_train.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta = DVector::<f64>::from_fn(d, |_, _| rng.sample(StandardNormal));
    let xt_real = x_train.to_real::<f64>();
    let xs_real = x_test.to_real::<f64>();
    let signal_train = &xt_real * &beta;
    let signal_test = &xs_real * &beta;
    let signal_mean = signal_train.mean();
    let signal_var = signal_train
        .iter()
        .map(|v| (v - signal_mean).powi(2))
        .sum::<f64>()
        / signal_train.len() as f64;

    // fit every (method, k) once; responses vary only by noise scale
    let mut score_pairs: Vec<(Method, usize, DMatrix<f64>, DMatrix<f64>)> = Vec::new();
    for &method in methods {
        for &k in k_grid {
            let (train_scores, test_scores) = match method {
                Method::Lpca => {
                    let config = FitConfig::new(k, m);
                    let (model, _) = fit_lpca(x_train, &config)?;
                    (model.scores(x_train)?, model.scores(x_test)?)
                }
                Method::Lsvd => {
                    let config = FitConfig::new(k, m);
                    let (model, _) = fit_lsvd(x_train, &config)?;
                    (model.a.clone(), lsvd_new_scores_matrix(&model, x_test)?)
                }
                Method::Pca => {
                    let model = fit_pca(&xt_real, k)?;
                    (model.scores(&xt_real)?, model.scores(&xs_real)?)
                }
            };
            score_pairs.push((method, k, train_scores, test_scores));
        }
    }

    let mut rows = Vec::new();
    for &snr in snr_grid {
        if !(snr > 0.0) {
            return Err(LpcaError::InvalidConfig(format!(
                "SNR must be positive, got {snr}"
            )));
        }
        let sigma = (signal_var / snr).sqrt();
        let y_train = DVector::from_fn(signal_train.len(), |i, _| {
            signal_train[i] + sigma * rng.sample::<f64, _>(StandardNormal)
        });
        let y_test = DVector::from_fn(signal_test.len(), |i, _| {
            signal_test[i] + sigma * rng.sample::<f64, _>(StandardNormal)
        });

        // intercept-only baseline (k = 0)
        let empty_train = DMatrix::<f64>::zeros(y_train.len(), 0);
        let empty_test = DMatrix::<f64>::zeros(y_test.len(), 0);
        let (in_mse, out_mse) = regression_mse(&empty_train, &empty_test, &y_train, &y_test)?;
        rows.push(PcrRow {
            method: methods.first().copied().unwrap_or(Method::Lpca),
            k: 0,
            snr,
            in_mse,
            out_mse,
        });

        for (method, k, train_scores, test_scores) in &score_pairs {
            let (in_mse, out_mse) =
                regression_mse(train_scores, test_scores, &y_train, &y_test)?;
            rows.push(PcrRow {
                method: *method,
                k: *k,
                snr,
                in_mse,
                out_mse,
            });
        }
    }
    Ok(rows)
}
