//! Tuning: λ/d/γ grids, K-fold cross-validation, the post-fit magnitude
//! threshold and the search for a λ that selects exactly k variables.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{CoefficientVector, Dataset};
use crate::seeds;
use crate::solvers::{best_iterate, fit_method, FitResult, Hyper, InitialEstimate, Method, Solver};

/// Hyperparameter grid. Only the axes a method uses are searched: λ for all,
/// d for SACE/GSACE, γ for MCP/GSACE and λ₂ for the Elastic Net.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    pub lambdas: Vec<f64>,
    pub ds: Vec<f64>,
    pub gammas: Vec<f64>,
    pub lambda2s: Vec<f64>,
}

pub fn default_ds() -> Vec<f64> {
    (0..=10).map(|k| k as f64 / 10.0).collect()
}

pub const DEFAULT_GAMMAS: [f64; 3] = [1.5, 3.0, 6.0];

/// Elastic Net ℓ2 levels; 0.5 is the ridge weight built into SACE.
pub const DEFAULT_LAMBDA2S: [f64; 4] = [0.05, 0.5, 5.0, 50.0];

/// Log-spaced λ from `λ_max` down to `λ_max · lambda_min_ratio`. Empty
/// `ds`/`gammas` select the defaults.
pub fn make_grid(
    data: &Dataset,
    n_lambda: usize,
    lambda_min_ratio: f64,
    ds: &[f64],
    gammas: &[f64],
) -> Result<Grid> {
    if n_lambda < 2 {
        return Err(Error::InvalidInput("n_lambda must be at least 2".into()));
    }
    if !(lambda_min_ratio > 0.0 && lambda_min_ratio < 1.0) {
        return Err(Error::InvalidInput(format!(
            "lambda_min_ratio must lie in (0, 1), got {lambda_min_ratio}"
        )));
    }
    let lmax = data.lambda_max();
    if !(lmax > 0.0) {
        return Err(Error::InvalidInput("response is orthogonal to every column".into()));
    }
    let step = lambda_min_ratio.ln() / (n_lambda - 1) as f64;
    let mut lambdas: Vec<f64> = (0..n_lambda).map(|k| lmax * (step * k as f64).exp()).collect();
    lambdas[0] = lmax;
    lambdas[n_lambda - 1] = lmax * lambda_min_ratio;
    let ds = if ds.is_empty() { default_ds() } else { ds.to_vec() };
    if let Some(bad) = ds.iter().find(|d| !(0.0..=1.0).contains(*d)) {
        return Err(Error::BadD(*bad));
    }
    let gammas = if gammas.is_empty() { DEFAULT_GAMMAS.to_vec() } else { gammas.to_vec() };
    Ok(Grid {
        lambdas,
        ds,
        gammas,
        lambda2s: DEFAULT_LAMBDA2S.to_vec(),
    })
}

impl Grid {
    /// Grid with a single fixed λ, used to tune d (and γ) after λ is pinned.
    pub fn fixed_lambda(lambda: f64, ds: Vec<f64>, gammas: Vec<f64>) -> Self {
        Self {
            lambdas: vec![lambda],
            ds,
            gammas,
            lambda2s: DEFAULT_LAMBDA2S.to_vec(),
        }
    }

    fn outer(&self, method: Method) -> Vec<(f64, f64)> {
        match method {
            Method::Mcp | Method::Gsace => self.gammas.iter().map(|g| (*g, 0.0)).collect(),
            Method::ElasticNet => self.lambda2s.iter().map(|l| (3.0, *l)).collect(),
            _ => vec![(3.0, 0.0)],
        }
    }

    fn d_axis(&self, method: Method) -> Vec<f64> {
        if method.uses_d() {
            self.ds.clone()
        } else {
            vec![0.0]
        }
    }

    /// Grid cells searched for `method`, ordered outer axis (γ or λ₂), then
    /// λ descending, then d ascending.
    pub fn cells(&self, method: Method) -> Vec<Hyper> {
        let ds = self.d_axis(method);
        let mut out = Vec::new();
        for (gamma, lambda2) in self.outer(method) {
            for &lambda in &self.lambdas {
                for &d in &ds {
                    out.push(Hyper {
                        lambda,
                        d,
                        gamma,
                        lambda2,
                    });
                }
            }
        }
        out
    }
}

/// Held-out error of one grid cell across folds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvCell {
    pub hyper: Hyper,
    pub mean: f64,
    pub std: f64,
    /// Folds in which the fit did not converge or could not be computed.
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvResult {
    pub method: Method,
    pub table: Vec<CvCell>,
    pub best: Hyper,
    pub best_index: usize,
    pub folds: usize,
    pub seed: u64,
}

/// Fold label of each row: a seeded shuffle of `0, 1, …, k−1, 0, 1, …`.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    labels.shuffle(&mut seeds::rng(seed));
    labels
}

/// Per-cell held-out mean squared error of one train/test split.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldOutcome {
    pub errors: Vec<f64>,
    pub failed: Vec<bool>,
}

/// Fits every grid cell on `train` rows and scores it on `test` rows.
///
/// Only training rows enter a [`Dataset`]; the training data are centered
/// with their own means and the same means are applied to the held-out rows.
/// The initial estimate of SACE/GSACE is refit inside the training rows.
pub fn fold_errors(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    train: &[usize],
    test: &[usize],
    method: Method,
    grid: &Grid,
    solver: &Solver,
) -> Result<FoldOutcome> {
    let mut xt = x.select_rows(train);
    let mut yt = y.select_rows(train);
    let y_mean = yt.mean();
    yt.add_scalar_mut(-y_mean);
    let x_means: Vec<f64> = xt.column_iter().map(|c| c.mean()).collect();
    for (mut col, m) in xt.column_iter_mut().zip(&x_means) {
        col.add_scalar_mut(-m);
    }
    let train_data = Dataset::new(xt, yt)?;

    let mut xv = x.select_rows(test);
    for (mut col, m) in xv.column_iter_mut().zip(&x_means) {
        col.add_scalar_mut(-m);
    }
    let yv = y.select_rows(test).add_scalar(-y_mean);
    let score = |beta: &CoefficientVector| (&yv - &xv * beta.values()).norm_squared() / yv.len() as f64;

    // Warm starts along the path trap the concave penalties in poor local
    // minima; they start cold, like the final refit.
    let nonconvex = method.uses_gamma();
    let ds = grid.d_axis(method);
    let mut errors = Vec::new();
    let mut failed = Vec::new();
    for (gamma, lambda2) in grid.outer(method) {
        let mut init_warm: Option<CoefficientVector> = None;
        let mut warm: Vec<Option<CoefficientVector>> = vec![None; ds.len()];
        for &lambda in &grid.lambdas {
            let init = if method.uses_d() {
                let res = match method {
                    Method::Sace => InitialEstimate::lasso_with(solver, &train_data, lambda, init_warm.as_ref()),
                    _ => InitialEstimate::mcp_with(solver, &train_data, lambda, gamma, None),
                };
                match res {
                    Ok(init) => {
                        init_warm = Some(init.beta0.clone());
                        Some(init)
                    }
                    Err(_) => {
                        errors.extend(std::iter::repeat(f64::NAN).take(ds.len()));
                        failed.extend(std::iter::repeat(true).take(ds.len()));
                        continue;
                    }
                }
            } else {
                None
            };
            for (k, &d) in ds.iter().enumerate() {
                let h = Hyper {
                    lambda,
                    d,
                    gamma,
                    lambda2,
                };
                let start = if nonconvex {
                    None
                } else {
                    warm[k].as_ref().or(if k > 0 { warm[k - 1].as_ref() } else { None })
                };
                match fit_method(solver, &train_data, method, &h, init.as_ref(), start) {
                    Ok((fit, _)) => {
                        errors.push(score(&fit.beta));
                        failed.push(false);
                        warm[k] = Some(fit.beta);
                    }
                    Err(Error::NoConvergence(fit)) => {
                        errors.push(score(&fit.beta));
                        failed.push(true);
                        warm[k] = Some(fit.beta);
                    }
                    Err(_) => {
                        errors.push(f64::NAN);
                        failed.push(true);
                    }
                }
            }
        }
    }
    Ok(FoldOutcome { errors, failed })
}

/// K-fold cross-validation of `method` over `grid` (K = 10, or leave-one-out
/// when n < 10). The error is held-out mean squared prediction error. The
/// best cell has the smallest mean error; ties go to larger λ, then smaller d.
pub fn cross_validate(data: &Dataset, method: Method, grid: &Grid, seed: u64) -> Result<CvResult> {
    cross_validate_with(&Solver::default(), data, method, grid, 10, seed)
}

pub fn cross_validate_with(
    solver: &Solver,
    data: &Dataset,
    method: Method,
    grid: &Grid,
    folds: usize,
    seed: u64,
) -> Result<CvResult> {
    let n = data.n();
    if folds < 2 {
        return Err(Error::InvalidInput("need at least 2 folds".into()));
    }
    let k = if n < folds { n } else { folds };
    let labels = fold_assignment(n, k, seed);
    let outcomes: Vec<FoldOutcome> = (0..k)
        .into_par_iter()
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|i| labels[*i] == f);
            fold_errors(data.x(), data.y(), &train, &test, method, grid, solver)
        })
        .collect::<Result<_>>()?;

    let cells = grid.cells(method);
    let mut table = Vec::with_capacity(cells.len());
    for (c, hyper) in cells.into_iter().enumerate() {
        let errs: Vec<f64> = outcomes.iter().map(|o| o.errors[c]).collect();
        let failures = outcomes.iter().filter(|o| o.failed[c]).count();
        let mean = errs.iter().sum::<f64>() / k as f64;
        let var = errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
        table.push(CvCell {
            hyper,
            mean,
            std: var.sqrt(),
            failures,
        });
    }
    let best_index = best_cell(&table)
        .ok_or_else(|| Error::InvalidInput("every cross-validation cell failed".into()))?;
    Ok(CvResult {
        method,
        best: table[best_index].hyper,
        best_index,
        table,
        folds: k,
        seed,
    })
}

fn best_cell(table: &[CvCell]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, cell) in table.iter().enumerate() {
        if !cell.mean.is_finite() {
            continue;
        }
        let better = match best {
            None => true,
            Some(b) => {
                let cur = &table[b];
                cell.mean < cur.mean
                    || (cell.mean == cur.mean
                        && (cell.hyper.lambda > cur.hyper.lambda
                            || (cell.hyper.lambda == cur.hyper.lambda && cell.hyper.d < cur.hyper.d)))
            }
        };
        if better {
            best = Some(i);
        }
    }
    best
}

/// The magnitude threshold `σ̂·√(2 ln p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdRule {
    pub sigma_hat: f64,
    pub cutoff: f64,
    pub small_fraction: f64,
}

/// σ̂ is the sample standard deviation of the entries whose magnitude lies at
/// or below the `small_fraction` quantile (nearest rank) of `|β̂|`. A fit
/// with more than that fraction of exact zeros gets σ̂ = 0 and is left as is.
pub fn threshold_rule(beta: &CoefficientVector, p: usize, small_fraction: f64) -> ThresholdRule {
    let mut mags: Vec<f64> = beta.values().iter().map(|v| v.abs()).collect();
    mags.sort_by(f64::total_cmp);
    let sigma_hat = if mags.is_empty() {
        0.0
    } else {
        let rank = ((small_fraction * mags.len() as f64).ceil() as usize).clamp(1, mags.len());
        let q = mags[rank - 1];
        let small: Vec<f64> = beta.values().iter().copied().filter(|v| v.abs() <= q).collect();
        sample_std(&small)
    };
    ThresholdRule {
        sigma_hat,
        cutoff: sigma_hat * (2.0 * (p.max(1) as f64).ln()).sqrt(),
        small_fraction,
    }
}

fn sample_std(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Zeroes entries with `|β̂_j| ≤ σ̂√(2 ln p)`, repeating until no entry
/// changes so that a second application is a no-op. Returns the rule of
/// the first pass.
pub fn apply_threshold(
    beta: &CoefficientVector,
    p: usize,
    small_fraction: f64,
) -> Result<(CoefficientVector, ThresholdRule)> {
    if !(small_fraction > 0.0 && small_fraction < 1.0) {
        return Err(Error::InvalidInput(format!(
            "small_fraction must lie in (0, 1), got {small_fraction}"
        )));
    }
    let first = threshold_rule(beta, p, small_fraction);
    let mut out = beta.clone();
    let mut rule = first;
    loop {
        let mut changed = false;
        for v in out.values_mut().iter_mut() {
            if *v != 0.0 && v.abs() <= rule.cutoff {
                *v = 0.0;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        rule = threshold_rule(&out, p, small_fraction);
    }
    Ok((out, first))
}

/// Outcome of [`select_exact_k`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactK {
    pub lambda: f64,
    pub fit: FitResult,
    /// Bisection steps used.
    pub steps: usize,
}

/// Settings shared by the fits of an exact-k search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactKOptions {
    pub d: f64,
    pub gamma: f64,
    pub lambda2: f64,
    pub max_bisect: usize,
}

impl Default for ExactKOptions {
    fn default() -> Self {
        Self {
            d: 0.0,
            gamma: 3.0,
            lambda2: 0.5,
            max_bisect: 60,
        }
    }
}

/// Fit at λ from a cold start, with the default initial estimate.
fn cold_fit(solver: &Solver, data: &Dataset, method: Method, lambda: f64, o: &ExactKOptions) -> Result<FitResult> {
    let h = Hyper {
        lambda,
        d: o.d,
        gamma: o.gamma,
        lambda2: o.lambda2,
    };
    best_iterate(fit_method(solver, data, method, &h, None, None).map(|(f, _)| f))
}

/// Bisection on log λ for a fit with exactly `k` nonzeros. Every fit starts
/// cold, so refitting at the returned λ reproduces the reported support.
/// When the cardinality jumps over `k`, fails with `Unachievable` carrying
/// the closest fit seen (ties go to the larger λ).
pub fn select_exact_k(
    solver: &Solver,
    data: &Dataset,
    method: Method,
    k: usize,
    opts: &ExactKOptions,
) -> Result<ExactK> {
    let p = data.p();
    if k > p {
        return Err(Error::InvalidInput(format!("k = {k} exceeds p = {p}")));
    }
    let lmax = data.lambda_max();
    let mut hi = if lmax > 0.0 { lmax } else { 1.0 };
    let hi_fit = cold_fit(solver, data, method, hi, opts)?;
    let mut closest = (hi_fit.beta.nnz().abs_diff(k), hi, hi_fit);
    if closest.2.beta.nnz() == k {
        return Ok(ExactK {
            lambda: hi,
            fit: closest.2,
            steps: 0,
        });
    }

    // Lower end: shrink λ until at least k variables enter.
    let mut lo = hi * 1e-2;
    let mut steps = 0;
    loop {
        let fit = cold_fit(solver, data, method, lo, opts)?;
        let nnz = fit.beta.nnz();
        if nnz == k {
            return Ok(ExactK { lambda: lo, fit, steps });
        }
        consider(&mut closest, k, lo, fit);
        if nnz > k {
            break;
        }
        hi = lo;
        lo *= 1e-2;
        steps += 1;
        if lo < lmax * 1e-12 || steps > opts.max_bisect {
            return Err(unachievable(k, closest));
        }
    }

    while steps < opts.max_bisect {
        steps += 1;
        let mid = (lo * hi).sqrt();
        let fit = cold_fit(solver, data, method, mid, opts)?;
        let nnz = fit.beta.nnz();
        if nnz == k {
            return Ok(ExactK { lambda: mid, fit, steps });
        }
        consider(&mut closest, k, mid, fit);
        if nnz > k {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-12 {
            break;
        }
    }
    Err(unachievable(k, closest))
}

fn consider(closest: &mut (usize, f64, FitResult), k: usize, lambda: f64, fit: FitResult) {
    let gap = fit.beta.nnz().abs_diff(k);
    if gap < closest.0 || (gap == closest.0 && lambda > closest.1) {
        *closest = (gap, lambda, fit);
    }
}

fn unachievable(k: usize, closest: (usize, f64, FitResult)) -> Error {
    Error::Unachievable {
        k,
        closest: closest.2.beta.nnz(),
        lambda: closest.1,
        fit: Box::new(closest.2),
    }
}
