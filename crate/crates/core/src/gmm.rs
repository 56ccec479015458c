//! Gaussian mixture density estimation by expectation-maximization, with
//! BIC-driven component-count selection.
//!
//! Mixtures use full covariances with a diagonal regularization floor added
//! at every M-step. Fits run a configurable number of restarts from seeded
//! k-means++-style initializations and keep the highest final log-likelihood.
//! Densities are evaluated on raw (unstandardized) feature values because
//! the downstream gate applies an absolute threshold to them.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmmConfig {
    pub max_iter: usize,
    /// Stop when the total log-likelihood improves by less than this.
    pub tol: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Diagonal floor added to every covariance at each M-step.
    pub reg: f64,
}

impl Default for GmmConfig {
    fn default() -> Self {
        GmmConfig {
            max_iter: 500,
            tol: 1e-6,
            restarts: 5,
            seed: 0,
            reg: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    /// Row-major symmetric covariance matrix.
    pub covariance: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Set when the input rows were all identical; the covariance floor
    /// keeps EM defined in that case.
    pub degenerate_data: bool,
    /// Per-iteration log-likelihood of the winning restart.
    #[serde(skip)]
    pub loglik_trace: Vec<f64>,
    /// Per-iteration log-likelihoods of every restart, in restart order.
    #[serde(skip)]
    pub restart_traces: Vec<Vec<f64>>,
}

/// Weighted Gaussian mixture over a named feature subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub components: Vec<GmmComponent>,
    pub feature_names: Vec<String>,
    pub diagnostics: FitDiagnostics,
}

impl GmmModel {
    pub fn dim(&self) -> usize {
        self.components[0].mean.len()
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    /// Free-parameter count: `(k−1) + k·d + k·d(d+1)/2` for full covariances.
    pub fn n_parameters(&self) -> usize {
        let k = self.n_components();
        let d = self.dim();
        (k - 1) + k * d + k * d * (d + 1) / 2
    }
}

struct Component {
    weight: f64,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    log_det: f64,
}

impl Component {
    /// Builds a component, escalating the diagonal jitter until the
    /// covariance factorizes. Returns the possibly-jittered covariance.
    fn new(weight: f64, mean: DVector<f64>, mut cov: DMatrix<f64>, reg: f64) -> Result<Component> {
        let d = cov.nrows();
        let mut jitter = 0.0;
        for _ in 0..8 {
            if let Some(chol) = Cholesky::new(cov.clone()) {
                let log_det = 2.0 * (0..d).map(|i| chol.l_dirty()[(i, i)].ln()).sum::<f64>();
                return Ok(Component {
                    weight,
                    mean,
                    cov,
                    chol,
                    log_det,
                });
            }
            jitter = if jitter == 0.0 { reg.max(1e-12) } else { jitter * 10.0 };
            for i in 0..d {
                cov[(i, i)] += jitter;
            }
        }
        Err(Error::Numerical(
            "covariance failed to factorize despite jitter".into(),
        ))
    }

    fn log_normal(&self, x: &DVector<f64>) -> f64 {
        let d = x.len() as f64;
        let diff = x - &self.mean;
        let quad = diff.dot(&self.chol.solve(&diff));
        -0.5 * (d * (2.0 * std::f64::consts::PI).ln() + self.log_det + quad)
    }
}

fn rows_to_vectors(x: &[Vec<f64>]) -> Result<Vec<DVector<f64>>> {
    if x.is_empty() {
        return Err(Error::Numerical("cannot fit a mixture on zero rows".into()));
    }
    let d = x[0].len();
    if d == 0 {
        return Err(Error::InvalidParam("rows have zero dimensions".into()));
    }
    x.iter()
        .map(|row| {
            if row.len() != d {
                return Err(Error::Schema(format!(
                    "inconsistent row length {} vs {d}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical("non-finite value in mixture input".into()));
            }
            Ok(DVector::from_row_slice(row))
        })
        .collect()
}

/// k-means++-style seeding: first center uniform, each next drawn with
/// probability proportional to the squared distance to its nearest center.
fn kmeanspp_centers(
    rows: &[DVector<f64>],
    k: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Vec<DVector<f64>> {
    let n = rows.len();
    let mut centers = Vec::with_capacity(k);
    centers.push(rows[rng.random_range(0..n)].clone());
    let mut dist2: Vec<f64> = rows
        .iter()
        .map(|r| (r - &centers[0]).norm_squared())
        .collect();
    while centers.len() < k {
        let total: f64 = dist2.iter().sum();
        let idx = if total > 0.0 {
            let u: f64 = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &d2) in dist2.iter().enumerate() {
                acc += d2;
                if u < acc {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            // all points coincide with a center; fall back to uniform
            rng.random_range(0..n)
        };
        let center = rows[idx].clone();
        for (d2, row) in dist2.iter_mut().zip(rows) {
            *d2 = d2.min((row - &center).norm_squared());
        }
        centers.push(center);
    }
    centers
}

fn sample_covariance(rows: &[DVector<f64>]) -> DMatrix<f64> {
    let n = rows.len() as f64;
    let d = rows[0].len();
    let mean = rows.iter().fold(DVector::zeros(d), |acc, r| acc + r) / n;
    let mut cov = DMatrix::zeros(d, d);
    for r in rows {
        let diff = r - &mean;
        cov += &diff * diff.transpose();
    }
    cov / n
}

struct EmRun {
    components: Vec<Component>,
    log_likelihood: f64,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
}

/// Log-likelihood and responsibilities for the current parameters.
fn e_step(rows: &[DVector<f64>], components: &[Component]) -> (f64, Vec<Vec<f64>>) {
    let k = components.len();
    let mut ll = 0.0;
    let resp: Vec<Vec<f64>> = rows
        .iter()
        .map(|x| {
            let logs: Vec<f64> = components
                .iter()
                .map(|c| c.weight.ln() + c.log_normal(x))
                .collect();
            let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = logs.iter().map(|l| (l - m).exp()).sum();
            let lse = m + sum.ln();
            ll += lse;
            (0..k).map(|c| (logs[c] - lse).exp()).collect()
        })
        .collect();
    (ll, resp)
}

fn m_step(
    rows: &[DVector<f64>],
    resp: &[Vec<f64>],
    k: usize,
    reg: f64,
) -> Result<Vec<Component>> {
    let n = rows.len();
    let d = rows[0].len();
    let mut components = Vec::with_capacity(k);
    for c in 0..k {
        let nk: f64 = resp.iter().map(|r| r[c]).sum::<f64>().max(1e-12);
        let mut mean = DVector::zeros(d);
        for (r, x) in resp.iter().zip(rows) {
            mean += x * r[c];
        }
        mean /= nk;
        let mut cov = DMatrix::zeros(d, d);
        for (r, x) in resp.iter().zip(rows) {
            let diff = x - &mean;
            cov += (&diff * diff.transpose()) * r[c];
        }
        cov /= nk;
        for i in 0..d {
            cov[(i, i)] += reg;
        }
        components.push(Component::new(nk / n as f64, mean, cov, reg)?);
    }
    Ok(components)
}

fn em_single_run(
    rows: &[DVector<f64>],
    k: usize,
    cfg: &GmmConfig,
    run_seed: u64,
) -> Result<EmRun> {
    let mut rng = seeding::rng(run_seed);
    let d = rows[0].len();
    let base_cov = {
        let mut cov = sample_covariance(rows);
        for i in 0..d {
            cov[(i, i)] += cfg.reg;
        }
        cov
    };
    let mut components = kmeanspp_centers(rows, k, &mut rng)
        .into_iter()
        .map(|mean| Component::new(1.0 / k as f64, mean, base_cov.clone(), cfg.reg))
        .collect::<Result<Vec<Component>>>()?;

    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut ll = f64::NEG_INFINITY;
    for iter in 0..cfg.max_iter {
        let (new_ll, resp) = e_step(rows, &components);
        trace.push(new_ll);
        if iter > 0 && new_ll - ll < cfg.tol {
            ll = new_ll;
            converged = true;
            break;
        }
        ll = new_ll;
        iterations = iter + 1;
        components = m_step(rows, &resp, k, cfg.reg)?;
    }
    if !converged {
        // evaluate the final M-step so the reported likelihood matches the
        // stored parameters
        let (final_ll, _) = e_step(rows, &components);
        trace.push(final_ll);
        ll = final_ll;
    }
    Ok(EmRun {
        components,
        log_likelihood: ll,
        iterations,
        converged,
        trace,
    })
}

fn all_rows_identical(rows: &[DVector<f64>]) -> bool {
    rows.windows(2).all(|w| w[0] == w[1])
}

/// Fits a k-component mixture, keeping the best of `cfg.restarts` seeded
/// EM runs by final log-likelihood.
pub fn fit_gmm(x: &[Vec<f64>], k: usize, cfg: &GmmConfig) -> Result<GmmModel> {
    fit_gmm_named(x, k, cfg, Vec::new())
}

/// As [`fit_gmm`], recording the names of the features the mixture is over.
pub fn fit_gmm_named(
    x: &[Vec<f64>],
    k: usize,
    cfg: &GmmConfig,
    feature_names: Vec<String>,
) -> Result<GmmModel> {
    if k == 0 {
        return Err(Error::InvalidParam("component count must be at least 1".into()));
    }
    if k > x.len() {
        return Err(Error::InvalidParam(format!(
            "component count {k} exceeds row count {}",
            x.len()
        )));
    }
    if cfg.restarts == 0 || cfg.max_iter == 0 {
        return Err(Error::InvalidParam("restarts and max_iter must be positive".into()));
    }
    if !(cfg.reg > 0.0) || !(cfg.tol > 0.0) {
        return Err(Error::InvalidParam("reg and tol must be positive".into()));
    }
    let rows = rows_to_vectors(x)?;
    let degenerate = all_rows_identical(&rows) && k > 1;

    let runs: Vec<EmRun> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| em_single_run(&rows, k, cfg, seeding::derive_index(cfg.seed, r as u64)))
        .collect::<Result<Vec<_>>>()?;
    let restart_traces: Vec<Vec<f64>> = runs.iter().map(|r| r.trace.clone()).collect();
    // strict comparison keeps the earliest restart on ties
    let best = runs
        .into_iter()
        .reduce(|a, b| if b.log_likelihood > a.log_likelihood { b } else { a })
        .expect("at least one restart");

    Ok(GmmModel {
        components: best
            .components
            .iter()
            .map(|c| GmmComponent {
                weight: c.weight,
                mean: c.mean.iter().cloned().collect(),
                covariance: (0..c.cov.nrows())
                    .map(|i| (0..c.cov.ncols()).map(|j| c.cov[(i, j)]).collect())
                    .collect(),
            })
            .collect(),
        feature_names,
        diagnostics: FitDiagnostics {
            log_likelihood: best.log_likelihood,
            iterations: best.iterations,
            converged: best.converged,
            degenerate_data: degenerate,
            loglik_trace: best.trace,
            restart_traces,
        },
    })
}

fn model_components(m: &GmmModel) -> Result<Vec<Component>> {
    m.components
        .iter()
        .map(|c| {
            let d = c.mean.len();
            let mut cov = DMatrix::zeros(d, d);
            for i in 0..d {
                for j in 0..d {
                    cov[(i, j)] = c.covariance[i][j];
                }
            }
            // the stored covariance already carries the fit-time floor
            Component::new(c.weight, DVector::from_row_slice(&c.mean), cov, 1e-12)
        })
        .collect()
}

/// `ln Σ_c w_c · N(x; μ_c, Σ_c)` via log-sum-exp.
pub fn log_density(m: &GmmModel, x: &[f64]) -> Result<f64> {
    if x.len() != m.dim() {
        return Err(Error::Schema(format!(
            "input dimension {} does not match mixture dimension {}",
            x.len(),
            m.dim()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite input to log_density".into()));
    }
    let components = model_components(m)?;
    let v = DVector::from_row_slice(x);
    let logs: Vec<f64> = components
        .iter()
        .map(|c| c.weight.ln() + c.log_normal(&v))
        .collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln())
}

/// Total log-likelihood of `x` under the model.
pub fn log_likelihood(m: &GmmModel, x: &[Vec<f64>]) -> Result<f64> {
    x.iter().map(|row| log_density(m, row)).sum()
}

/// Bayesian information criterion: `−2·lnL + n_parameters·ln(n)`.
pub fn bic(m: &GmmModel, x: &[Vec<f64>]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::InvalidParam("bic needs at least one row".into()));
    }
    let ll = log_likelihood(m, x)?;
    Ok(-2.0 * ll + m.n_parameters() as f64 * (x.len() as f64).ln())
}

/// Fits every k in `k_range` and returns the minimum-BIC model with the
/// per-k BIC table; ties go to the smaller k.
pub fn select_components(
    x: &[Vec<f64>],
    k_range: &[usize],
    cfg: &GmmConfig,
) -> Result<(GmmModel, Vec<(usize, f64)>)> {
    select_components_named(x, k_range, cfg, Vec::new())
}

pub fn select_components_named(
    x: &[Vec<f64>],
    k_range: &[usize],
    cfg: &GmmConfig,
    feature_names: Vec<String>,
) -> Result<(GmmModel, Vec<(usize, f64)>)> {
    if k_range.is_empty() {
        return Err(Error::InvalidParam("k_range is empty".into()));
    }
    let fits: Vec<(usize, GmmModel, f64)> = k_range
        .par_iter()
        .map(|&k| {
            let model = fit_gmm_named(x, k, &GmmConfig {
                seed: seeding::derive_index(cfg.seed, k as u64),
                ..*cfg
            }, feature_names.clone())?;
            let score = bic(&model, x)?;
            Ok((k, model, score))
        })
        .collect::<Result<Vec<_>>>()?;
    let table: Vec<(usize, f64)> = fits.iter().map(|(k, _, b)| (*k, *b)).collect();
    let best = fits
        .into_iter()
        .reduce(|a, b| if b.2 < a.2 { b } else { a })
        .expect("non-empty k_range");
    Ok((best.1, table))
}
