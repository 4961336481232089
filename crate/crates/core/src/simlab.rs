//! Monte Carlo laboratory: the two correlated-design generators, selection
//! and estimation metrics, replicated scenario runs and coefficient
//! profiles for plotting.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_len, standardize, CoefficientVector, Dataset};
use crate::seeds::{self, tag};
use crate::solvers::{fit_method, Hyper, Method, Solver};
use crate::tuning::{apply_threshold, cross_validate_with, make_grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Example {
    /// Three groups of five near-duplicate columns, then independent or
    /// AR(1) tail predictors.
    Ex1,
    /// All columns equicorrelated.
    Ex2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TailCov {
    Identity,
    /// `Σ_ij = ρ^{|i−j|}`.
    Ar(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BetaMode {
    Const3,
    /// Nonzero entries drawn from U[0.5, 1].
    Unif05_1,
}

/// Everything that determines a scenario run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub example: Example,
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub tail_cov: TailCov,
    pub beta_mode: BetaMode,
    pub noise_sigma: f64,
    /// Standard deviation of the perturbation added to the group factor in
    /// Example 1 (standard deviation, default 0.01).
    pub group_noise_sd: f64,
    /// Pairwise correlation in Example 2.
    pub equicorrelation: f64,
    pub reps: usize,
    pub seed: u64,
    pub folds: usize,
    pub n_lambda: usize,
    pub lambda_min_ratio: f64,
    pub ds: Vec<f64>,
    pub gammas: Vec<f64>,
    pub small_fraction: f64,
}

impl ScenarioConfig {
    /// Case 1–4 of an example: Example 1 varies σ ∈ {0.4, 2} and the tail
    /// covariance (identity, AR 0.5); Example 2 varies σ and β (constant 3,
    /// uniform).
    pub fn case(example: Example, case: usize, reps: usize, seed: u64) -> Result<Self> {
        if !(1..=4).contains(&case) {
            return Err(Error::InvalidInput(format!("case must be 1-4, got {case}")));
        }
        let noise_sigma = if case <= 2 { 0.4 } else { 2.0 };
        let odd = case % 2 == 1;
        let (tail_cov, beta_mode) = match example {
            Example::Ex1 => (if odd { TailCov::Identity } else { TailCov::Ar(0.5) }, BetaMode::Const3),
            Example::Ex2 => (TailCov::Identity, if odd { BetaMode::Const3 } else { BetaMode::Unif05_1 }),
        };
        Ok(Self {
            example,
            n: 50,
            p: 400,
            q: 15,
            tail_cov,
            beta_mode,
            noise_sigma,
            group_noise_sd: 0.01,
            equicorrelation: 0.1,
            reps,
            seed,
            folds: 10,
            n_lambda: 30,
            lambda_min_ratio: 0.01,
            ds: crate::tuning::default_ds(),
            gammas: crate::tuning::DEFAULT_GAMMAS.to_vec(),
            small_fraction: 0.75,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.p < 1 || self.q > self.p {
            return Err(Error::InvalidInput(format!(
                "need n >= 2 and q <= p, got n = {}, p = {}, q = {}",
                self.n, self.p, self.q
            )));
        }
        if self.example == Example::Ex1 && self.q > 15 {
            return Err(Error::InvalidInput("Example 1 has at most 15 grouped signals".into()));
        }
        if !(self.noise_sigma >= 0.0) || !(self.group_noise_sd >= 0.0) {
            return Err(Error::InvalidInput("noise levels must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.equicorrelation) {
            return Err(Error::InvalidInput("equicorrelation must lie in [0, 1)".into()));
        }
        if let TailCov::Ar(r) = self.tail_cov {
            if !(r.abs() < 1.0) {
                return Err(Error::InvalidInput(format!("AR coefficient {r} must be < 1 in magnitude")));
            }
        }
        Ok(())
    }

    /// Seed of replication `rep`.
    pub fn rep_seed(&self, rep: usize) -> u64 {
        seeds::derive(self.seed, tag::REP_BASE + rep as u64)
    }
}

fn true_beta(cfg: &ScenarioConfig, rng: &mut impl Rng) -> CoefficientVector {
    let mut b = DVector::zeros(cfg.p);
    let unif = Uniform::new_inclusive(0.5, 1.0).expect("valid bounds");
    for j in 0..cfg.q {
        b[j] = match cfg.beta_mode {
            BetaMode::Const3 => 3.0,
            BetaMode::Unif05_1 => rng.sample(unif),
        };
    }
    CoefficientVector::new(b)
}

fn respond(x: &DMatrix<f64>, beta: &CoefficientVector, sigma: f64, rng: &mut impl Rng) -> DVector<f64> {
    let mut y = x * beta.values();
    for v in y.iter_mut() {
        *v += sigma * rng.sample::<f64, _>(StandardNormal);
    }
    y
}

/// Example 1 on the raw scale: columns 0–14 are `Z_g + e` for three
/// standard normal factors with `e ~ N(0, group_noise_sd²)`; the remaining
/// columns follow the tail covariance. Signals sit on the first q columns.
pub fn gen_example1(cfg: &ScenarioConfig, rep_seed: u64) -> Result<(Dataset, CoefficientVector)> {
    cfg.validate()?;
    let mut rng = seeds::rng(seeds::derive(rep_seed, tag::DATA));
    let beta = true_beta(cfg, &mut rng);
    let grouped = cfg.p.min(15);
    let mut x = DMatrix::zeros(cfg.n, cfg.p);
    for i in 0..cfg.n {
        let z: [f64; 3] = std::array::from_fn(|_| rng.sample(StandardNormal));
        for j in 0..grouped {
            x[(i, j)] = z[j / 5] + cfg.group_noise_sd * rng.sample::<f64, _>(StandardNormal);
        }
        let mut prev = 0.0;
        for j in grouped..cfg.p {
            let e: f64 = rng.sample(StandardNormal);
            x[(i, j)] = match cfg.tail_cov {
                TailCov::Identity => e,
                TailCov::Ar(_) if j == grouped => e,
                TailCov::Ar(r) => r * prev + (1.0 - r * r).sqrt() * e,
            };
            prev = x[(i, j)];
        }
    }
    let y = respond(&x, &beta, cfg.noise_sigma, &mut rng);
    Ok((Dataset::new(x, y)?, beta))
}

/// Example 2 on the raw scale: all columns share a factor so that every
/// pair has correlation `equicorrelation`.
pub fn gen_example2(cfg: &ScenarioConfig, rep_seed: u64) -> Result<(Dataset, CoefficientVector)> {
    cfg.validate()?;
    let mut rng = seeds::rng(seeds::derive(rep_seed, tag::DATA));
    let beta = true_beta(cfg, &mut rng);
    let (a, b) = (cfg.equicorrelation.sqrt(), (1.0 - cfg.equicorrelation).sqrt());
    let mut x = DMatrix::zeros(cfg.n, cfg.p);
    for i in 0..cfg.n {
        let w: f64 = rng.sample(StandardNormal);
        for j in 0..cfg.p {
            x[(i, j)] = a * w + b * rng.sample::<f64, _>(StandardNormal);
        }
    }
    let y = respond(&x, &beta, cfg.noise_sigma, &mut rng);
    Ok((Dataset::new(x, y)?, beta))
}

pub fn generate(cfg: &ScenarioConfig, rep_seed: u64) -> Result<(Dataset, CoefficientVector)> {
    match cfg.example {
        Example::Ex1 => gen_example1(cfg, rep_seed),
        Example::Ex2 => gen_example2(cfg, rep_seed),
    }
}

/// Estimation and selection quality of one estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricRow {
    pub l2_error: f64,
    pub tpr: f64,
    pub tnr: f64,
}

/// ℓ2 error, true positive rate and true negative rate. A rate over an
/// empty class is 1.
pub fn compute_metrics(beta_hat: &CoefficientVector, beta_true: &CoefficientVector) -> Result<MetricRow> {
    check_len(beta_true.len(), beta_hat.len())?;
    let (mut pos, mut tp, mut neg, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for (h, t) in beta_hat.values().iter().zip(beta_true.values().iter()) {
        if *t != 0.0 {
            pos += 1;
            tp += usize::from(*h != 0.0);
        } else {
            neg += 1;
            tn += usize::from(*h == 0.0);
        }
    }
    let rate = |a: usize, b: usize| if b == 0 { 1.0 } else { a as f64 / b as f64 };
    Ok(MetricRow {
        l2_error: (beta_hat.values() - beta_true.values()).norm(),
        tpr: rate(tp, pos),
        tnr: rate(tn, neg),
    })
}

/// One method on one replication.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepRecord {
    pub rep: usize,
    pub method: Method,
    pub hyper: Hyper,
    pub raw: MetricRow,
    pub thresholded: MetricRow,
    pub converged: bool,
    pub cv_failures: usize,
    /// Estimate on the original scale of the predictors.
    #[serde(skip)]
    pub beta: CoefficientVector,
}

/// Average and standard error over successful replications.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub se: f64,
}

impl Summary {
    fn of(v: &[f64]) -> Self {
        let k = v.len();
        if k == 0 {
            return Self {
                mean: f64::NAN,
                se: f64::NAN,
            };
        }
        let mean = v.iter().sum::<f64>() / k as f64;
        let se = if k < 2 {
            0.0
        } else {
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
            (var / k as f64).sqrt()
        };
        Self { mean, se }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: Method,
    pub thresholded: bool,
    pub l2_error: Summary,
    pub tpr: Summary,
    pub tnr: Summary,
    /// Replications that produced no estimate.
    pub failures: usize,
    /// Replications whose final fit hit the sweep limit.
    pub not_converged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub config: ScenarioConfig,
    pub summaries: Vec<MethodSummary>,
    pub records: Vec<RepRecord>,
    /// `(rep, method, message)` for every failed replication.
    pub failures: Vec<(usize, Method, String)>,
}

impl ScenarioReport {
    pub fn summary(&self, method: Method, thresholded: bool) -> Option<&MethodSummary> {
        self.summaries
            .iter()
            .find(|s| s.method == method && s.thresholded == thresholded)
    }
}

/// Generates, standardizes, tunes by CV, refits on the full replication,
/// maps back to the raw scale and scores one method.
pub fn run_replication(
    cfg: &ScenarioConfig,
    rep: usize,
    method: Method,
    solver: &Solver,
) -> Result<RepRecord> {
    let rep_seed = cfg.rep_seed(rep);
    let (raw, beta_true) = generate(cfg, rep_seed)?;
    let (data, record) = standardize(&raw)?;
    let grid = make_grid(&data, cfg.n_lambda, cfg.lambda_min_ratio, &cfg.ds, &cfg.gammas)?;
    let fold_seed = seeds::derive(rep_seed, tag::FOLDS);
    let cv = cross_validate_with(solver, &data, method, &grid, cfg.folds, fold_seed)?;
    let cv_failures = cv.table[cv.best_index].failures;
    let (fit, converged) = match fit_method(solver, &data, method, &cv.best, None, None) {
        Ok((fit, _)) => (fit, true),
        Err(Error::NoConvergence(fit)) => (*fit, false),
        Err(e) => return Err(e),
    };
    let (_, beta) = record.destandardize(&fit.beta);
    let (thr, _) = apply_threshold(&beta, cfg.p, cfg.small_fraction)?;
    Ok(RepRecord {
        rep,
        method,
        hyper: cv.best,
        raw: compute_metrics(&beta, &beta_true)?,
        thresholded: compute_metrics(&thr, &beta_true)?,
        converged,
        cv_failures,
        beta,
    })
}

/// Runs every replication of `cfg` for each method. Replications run in
/// parallel; results are gathered in (rep, method) order so the report is
/// identical for any thread count. Summaries are unthresholded, followed by
/// thresholded ones when `with_threshold` is set.
pub fn run_scenario(cfg: &ScenarioConfig, methods: &[Method], with_threshold: bool) -> Result<ScenarioReport> {
    cfg.validate()?;
    let solver = Solver::default();
    let jobs: Vec<(usize, Method)> = (0..cfg.reps)
        .flat_map(|r| methods.iter().map(move |m| (r, *m)))
        .collect();
    let results: Vec<Result<RepRecord>> = jobs
        .par_iter()
        .map(|(r, m)| {
            log::debug!("replication {r} method {m}");
            run_replication(cfg, *r, *m, &solver)
        })
        .collect();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for ((r, m), res) in jobs.iter().zip(results) {
        match res {
            Ok(rec) => records.push(rec),
            Err(e) => failures.push((*r, *m, e.to_string())),
        }
    }
    let mut summaries = Vec::new();
    let modes: &[bool] = if with_threshold { &[false, true] } else { &[false] };
    for &thresholded in modes {
        for &method in methods {
            let rows: Vec<&RepRecord> = records.iter().filter(|r| r.method == method).collect();
            let pick = |f: fn(&MetricRow) -> f64| -> Vec<f64> {
                rows.iter()
                    .map(|r| f(if thresholded { &r.thresholded } else { &r.raw }))
                    .collect()
            };
            summaries.push(MethodSummary {
                method,
                thresholded,
                l2_error: Summary::of(&pick(|m| m.l2_error)),
                tpr: Summary::of(&pick(|m| m.tpr)),
                tnr: Summary::of(&pick(|m| m.tnr)),
                failures: failures.iter().filter(|f| f.1 == method).count(),
                not_converged: rows.iter().filter(|r| !r.converged).count(),
            });
        }
    }
    Ok(ScenarioReport {
        config: cfg.clone(),
        summaries,
        records,
        failures,
    })
}

/// One point of a coefficient profile plot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRecord {
    pub method: String,
    pub index: usize,
    pub estimate: f64,
    pub truth: f64,
}

/// Long-format profile: one row per (method, coefficient), then the truth
/// itself under the method name `truth`.
pub fn export_estimate_profile(
    fits: &[(String, CoefficientVector)],
    beta_true: &CoefficientVector,
) -> Result<Vec<ProfileRecord>> {
    let truth = beta_true.values();
    let mut out = Vec::with_capacity(truth.len() * (fits.len() + 1));
    let series = fits
        .iter()
        .map(|(name, b)| (name.as_str(), b.values()))
        .chain(std::iter::once(("truth", truth)));
    for (name, values) in series {
        check_len(truth.len(), values.len())?;
        for (index, (e, t)) in values.iter().zip(truth.iter()).enumerate() {
            out.push(ProfileRecord {
                method: name.to_owned(),
                index,
                estimate: *e,
                truth: *t,
            });
        }
    }
    Ok(out)
}

/// Writes records with shortest round-trip float formatting.
pub fn write_profile_csv(path: impl AsRef<Path>, records: &[ProfileRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_profile_csv(path: impl AsRef<Path>) -> Result<Vec<ProfileRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|rec| rec.map_err(Error::from)).collect()
}

/// Full-data fits of each method at one replication, for profile plots.
pub fn profile_fits(
    cfg: &ScenarioConfig,
    rep: usize,
    methods: &[Method],
) -> Result<(Vec<(String, CoefficientVector)>, CoefficientVector)> {
    let solver = Solver::default();
    let (_, beta_true) = generate(cfg, cfg.rep_seed(rep))?;
    let fits = methods
        .iter()
        .map(|m| {
            let rec = run_replication(cfg, rep, *m, &solver)?;
            Ok((m.name().to_owned(), rec.beta))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((fits, beta_true))
}
