//! Sparse index tracking: replicate an index from a fixed number of its
//! constituents over rolling train/test windows.

use std::collections::BTreeSet;
use std::ops::Range;
use std::path::Path;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{StandardNormal, Uniform};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{round_sig, standardize, Dataset};
use crate::seeds::{self, tag};
use crate::solvers::{FitResult, Method, Solver};
use crate::tuning::{cross_validate_with, select_exact_k, ExactK, ExactKOptions, Grid, DEFAULT_LAMBDA2S};

/// Default d candidates when tuning for tracking. Each one costs a full
/// exact-k search, hence coarser than the simulation grid.
pub const TRACK_DS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// Trading days per year in the annualization of tracking errors.
pub const TRADING_DAYS: f64 = 250.0;

/// Daily prices of `m` assets and of the index they make up.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    dates: Vec<NaiveDate>,
    tickers: Vec<String>,
    prices: DMatrix<f64>,
    index: DVector<f64>,
}

impl PricePanel {
    pub fn new(
        dates: Vec<NaiveDate>,
        tickers: Vec<String>,
        prices: DMatrix<f64>,
        index: DVector<f64>,
    ) -> Result<Self> {
        let t = dates.len();
        if t == 0 || tickers.is_empty() {
            return Err(Error::EmptyPanel);
        }
        if prices.nrows() != t || index.len() != t {
            return Err(Error::DimensionMismatch {
                expected: t,
                found: if prices.nrows() != t { prices.nrows() } else { index.len() },
            });
        }
        if prices.ncols() != tickers.len() {
            return Err(Error::DimensionMismatch {
                expected: tickers.len(),
                found: prices.ncols(),
            });
        }
        if let Some(i) = dates.windows(2).position(|w| w[1] <= w[0]) {
            // Line numbers count the header.
            return Err(Error::NonMonotoneDates(i + 3));
        }
        if prices.iter().chain(index.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            dates,
            tickers,
            prices,
            index,
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn prices(&self) -> &DMatrix<f64> {
        &self.prices
    }

    pub fn index(&self) -> &DVector<f64> {
        &self.index
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn m(&self) -> usize {
        self.tickers.len()
    }

    /// Regression data for a block of consecutive rows.
    pub fn dataset(&self, rows: Range<usize>) -> Result<Dataset> {
        let x = self.prices.rows(rows.start, rows.len()).into_owned();
        let y = self.index.rows(rows.start, rows.len()).into_owned();
        Dataset::new(x, y)
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Reads a panel from a CSV with header `date,index,ticker1,...`. Tickers
/// with a blank cell are dropped; their names come back as warnings.
pub fn load_prices(path: impl AsRef<Path>) -> Result<(PricePanel, Vec<String>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.len() < 3 {
        return Err(parse_err(1, "need date, index and at least one ticker column"));
    }
    let names: Vec<String> = headers.iter().skip(2).map(str::to_owned).collect();
    let m = names.len();

    let mut dates = Vec::new();
    let mut index = Vec::new();
    let mut cells: Vec<Option<f64>> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != m + 2 {
            return Err(parse_err(line, format!("expected {} fields, found {}", m + 2, rec.len())));
        }
        let date = NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d")
            .map_err(|_| parse_err(line, format!("bad date {:?}", &rec[0])))?;
        let value = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(line, format!("not a number: {s:?}")))
        };
        dates.push(date);
        index.push(value(&rec[1])?);
        for field in rec.iter().skip(2) {
            cells.push(if field.is_empty() { None } else { Some(value(field)?) });
        }
    }
    let t = dates.len();
    if t == 0 {
        return Err(Error::EmptyPanel);
    }

    let keep: Vec<usize> = (0..m)
        .filter(|&j| (0..t).all(|i| cells[i * m + j].is_some()))
        .collect();
    let dropped: Vec<String> = (0..m)
        .filter(|j| !keep.contains(j))
        .map(|j| names[j].clone())
        .collect();
    for name in &dropped {
        log::warn!("dropping ticker {name}: missing prices");
    }
    if keep.is_empty() {
        return Err(Error::EmptyPanel);
    }
    let prices = DMatrix::from_fn(t, keep.len(), |i, k| cells[i * m + keep[k]].unwrap_or(f64::NAN));
    let tickers = keep.iter().map(|&j| names[j].clone()).collect();
    let panel = PricePanel::new(dates, tickers, prices, DVector::from_vec(index))?;
    Ok((panel, dropped))
}

/// Writes a panel in the format read by [`load_prices`].
pub fn write_prices(path: impl AsRef<Path>, panel: &PricePanel) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["date".to_owned(), "index".to_owned()];
    header.extend(panel.tickers.iter().cloned());
    w.write_record(&header)?;
    for i in 0..panel.len() {
        let mut row = vec![panel.dates[i].format("%Y-%m-%d").to_string(), fmt(panel.index[i])];
        row.extend(panel.prices.row(i).iter().map(|v| fmt(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn fmt(v: f64) -> String {
    format!("{}", round_sig(v, 10))
}

/// One rolling split: `train` rows followed directly by `test` rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WindowSplit {
    pub id: usize,
    pub train: Range<usize>,
    pub test: Range<usize>,
}

/// All windows of the given shape whose start advances by `stride` rows.
pub fn make_windows(t: usize, train: usize, test: usize, stride: usize) -> Result<Vec<WindowSplit>> {
    if train < 2 || test < 2 || stride == 0 {
        return Err(Error::InvalidInput(format!(
            "bad window shape: train {train}, test {test}, stride {stride}"
        )));
    }
    let span = train + test;
    if t < span {
        return Err(Error::TooShort { len: t, needed: span });
    }
    Ok((0..=(t - span) / stride)
        .map(|id| {
            let s = id * stride;
            WindowSplit {
                id,
                train: s..s + train,
                test: s + train..s + span,
            }
        })
        .collect())
}

/// `√250` times the sample standard deviation of `err`.
pub fn tracking_error(err: &[f64]) -> Result<f64> {
    let t = err.len();
    if t < 2 {
        return Err(Error::TooFewSamples(t));
    }
    let mean = err.iter().sum::<f64>() / t as f64;
    let ss: f64 = err.iter().map(|e| (e - mean).powi(2)).sum();
    Ok(TRADING_DAYS.sqrt() * (ss / (t - 1) as f64).sqrt())
}

/// Replication errors of a segment: `y − ŷ` on levels, or the difference of
/// simple returns when `returns` is set.
pub fn replication_errors(y: &[f64], yhat: &[f64], returns: bool) -> Vec<f64> {
    if !returns {
        return y.iter().zip(yhat).map(|(a, b)| a - b).collect();
    }
    (1..y.len())
        .map(|t| (y[t] / y[t - 1] - 1.0) - (yhat[t] / yhat[t - 1] - 1.0))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackConfig {
    pub train: usize,
    pub test: usize,
    pub stride: usize,
    /// Target number of assets.
    pub k: usize,
    /// Tune d, γ or λ₂: every candidate gets its own exact-k λ and the
    /// candidate with the lowest cross-validated error on the training
    /// window wins.
    pub tune: bool,
    pub ds: Vec<f64>,
    pub gammas: Vec<f64>,
    pub folds: usize,
    /// Compute tracking errors on returns instead of price levels.
    pub returns: bool,
    pub seed: u64,
    /// d, γ and λ₂ used when not tuning, and for the first λ search.
    #[serde(skip)]
    pub defaults: ExactKOptions,
}

impl Default for TrackConfig {
    fn default() -> Self {
        Self {
            train: 100,
            test: 20,
            stride: 20,
            k: 50,
            tune: true,
            ds: TRACK_DS.to_vec(),
            gammas: crate::tuning::DEFAULT_GAMMAS.to_vec(),
            folds: 10,
            returns: false,
            seed: 1,
            defaults: ExactKOptions::default(),
        }
    }
}

/// Result of one method on one window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackReport {
    pub window: usize,
    pub method: Method,
    pub train_start: usize,
    pub test_start: usize,
    pub selected: Vec<String>,
    /// Selected asset count; differs from the target only when `flagged`.
    pub k: usize,
    /// No λ gave exactly the target count; the closest fit was used.
    pub flagged: bool,
    pub lambda: f64,
    pub d: f64,
    pub gamma: Option<f64>,
    pub lambda2: Option<f64>,
    pub fitted_te: f64,
    pub predicted_te: f64,
    /// Replication ŷ on the training rows.
    pub fitted: Vec<f64>,
    /// Replication ŷ on the test rows.
    pub predicted: Vec<f64>,
    pub intercept: f64,
    pub weights: Vec<f64>,
    pub error: Option<String>,
}

impl TrackReport {
    fn failed(w: &WindowSplit, method: Method, err: &Error) -> Self {
        Self {
            window: w.id,
            method,
            train_start: w.train.start,
            test_start: w.test.start,
            selected: Vec::new(),
            k: 0,
            flagged: false,
            lambda: f64::NAN,
            d: f64::NAN,
            gamma: None,
            lambda2: None,
            fitted_te: f64::NAN,
            predicted_te: f64::NAN,
            fitted: Vec::new(),
            predicted: Vec::new(),
            intercept: f64::NAN,
            weights: Vec::new(),
            error: Some(err.to_string()),
        }
    }

    pub fn is_failure(&self) -> bool {
        self.error.is_some()
    }
}

fn exact_k_or_closest(
    solver: &Solver,
    data: &Dataset,
    method: Method,
    k: usize,
    opts: &ExactKOptions,
) -> Result<(f64, FitResult, bool)> {
    match select_exact_k(solver, data, method, k, opts) {
        Ok(ExactK { lambda, fit, .. }) => Ok((lambda, fit, false)),
        Err(Error::Unachievable { lambda, fit, .. }) => Ok((lambda, *fit, true)),
        Err(e) => Err(e),
    }
}

fn has_tunables(method: Method) -> bool {
    method.uses_d() || method.uses_gamma() || method == Method::ElasticNet
}

fn candidates(method: Method, cfg: &TrackConfig) -> Vec<ExactKOptions> {
    let base = cfg.defaults;
    let ds = if method.uses_d() { cfg.ds.clone() } else { vec![base.d] };
    let gammas = if method.uses_gamma() { cfg.gammas.clone() } else { vec![base.gamma] };
    let lambda2s = if method == Method::ElasticNet {
        DEFAULT_LAMBDA2S.to_vec()
    } else {
        vec![base.lambda2]
    };
    let mut out = Vec::new();
    for &lambda2 in &lambda2s {
        for &gamma in &gammas {
            for &d in &ds {
                out.push(ExactKOptions { d, gamma, lambda2, ..base });
            }
        }
    }
    out
}

/// For each candidate (d, γ, λ₂), finds the exact-k λ and scores that cell
/// by cross-validation on the training window. Returns the best candidate,
/// preferring ones that hit k exactly.
fn tune_exact_k(
    solver: &Solver,
    data: &Dataset,
    method: Method,
    cfg: &TrackConfig,
    window: usize,
) -> Result<(ExactKOptions, f64, FitResult, bool)> {
    let fold_seed = seeds::derive_path(cfg.seed, &[tag::WINDOW_BASE + window as u64, tag::FOLDS]);
    let mut best: Option<((bool, f64), (ExactKOptions, f64, FitResult, bool))> = None;
    for opts in candidates(method, cfg) {
        let (lambda, fit, flagged) = exact_k_or_closest(solver, data, method, cfg.k, &opts)?;
        let grid = Grid {
            lambdas: vec![lambda],
            ds: vec![opts.d],
            gammas: vec![opts.gamma],
            lambda2s: vec![opts.lambda2],
        };
        let cv = cross_validate_with(solver, data, method, &grid, cfg.folds, fold_seed)?;
        let score = (flagged, cv.table[cv.best_index].mean);
        let better = match &best {
            None => true,
            Some((s, _)) => score.0 < s.0 || (score.0 == s.0 && score.1 < s.1),
        };
        if better {
            best = Some((score, (opts, lambda, fit, flagged)));
        }
    }
    best.map(|(_, b)| b)
        .ok_or_else(|| Error::InvalidInput("no tuning candidates".into()))
}

/// Fits `method` on the training rows of `w` with exactly `cfg.k` assets and
/// evaluates the replication on both segments. Only training rows are read
/// for fitting.
pub fn track_window(
    solver: &Solver,
    panel: &PricePanel,
    w: &WindowSplit,
    method: Method,
    cfg: &TrackConfig,
) -> Result<TrackReport> {
    let raw = panel.dataset(w.train.clone())?;
    let (data, rec) = standardize(&raw)?;
    let (opts, lambda, fit, flagged) = if cfg.tune && has_tunables(method) {
        tune_exact_k(solver, &data, method, cfg, w.id)?
    } else {
        let (lambda, fit, flagged) = exact_k_or_closest(solver, &data, method, cfg.k, &cfg.defaults)?;
        (cfg.defaults, lambda, fit, flagged)
    };

    let (intercept, slopes) = rec.destandardize(&fit.beta);
    let replicate = |rows: &Range<usize>| -> Vec<f64> {
        let x = panel.prices.rows(rows.start, rows.len());
        (x * slopes.values()).iter().map(|v| v + intercept).collect()
    };
    let fitted = replicate(&w.train);
    let predicted = replicate(&w.test);
    let y_train: Vec<f64> = panel.index.rows(w.train.start, w.train.len()).iter().copied().collect();
    let y_test: Vec<f64> = panel.index.rows(w.test.start, w.test.len()).iter().copied().collect();
    let fitted_te = tracking_error(&replication_errors(&y_train, &fitted, cfg.returns))?;
    let predicted_te = tracking_error(&replication_errors(&y_test, &predicted, cfg.returns))?;

    let support = fit.beta.support();
    Ok(TrackReport {
        window: w.id,
        method,
        train_start: w.train.start,
        test_start: w.test.start,
        selected: support.indices().iter().map(|&j| panel.tickers[j].clone()).collect(),
        k: support.q(),
        flagged,
        lambda,
        d: if method.uses_d() { opts.d } else { 0.0 },
        gamma: method.uses_gamma().then_some(opts.gamma),
        lambda2: (method == Method::ElasticNet).then_some(opts.lambda2),
        fitted_te,
        predicted_te,
        fitted,
        predicted,
        intercept,
        weights: slopes.values().iter().copied().collect(),
        error: None,
    })
}

/// Per-method averages over the windows that did not fail.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackSummary {
    pub method: Method,
    pub windows: usize,
    pub flagged: usize,
    pub failed: usize,
    pub mean_fitted_te: f64,
    pub max_fitted_te: f64,
    pub mean_predicted_te: f64,
    pub max_predicted_te: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackingRun {
    pub config: TrackConfig,
    pub windows: Vec<WindowSplit>,
    /// Window-major, methods in the order given.
    pub reports: Vec<TrackReport>,
    pub summaries: Vec<TrackSummary>,
}

/// Runs every method on every window. A failing window is recorded in its
/// report and does not stop the run.
pub fn run_tracking(solver: &Solver, panel: &PricePanel, methods: &[Method], cfg: &TrackConfig) -> Result<TrackingRun> {
    if cfg.k == 0 || cfg.k > panel.m() {
        return Err(Error::InvalidInput(format!("k = {} must lie in 1..={}", cfg.k, panel.m())));
    }
    let windows = make_windows(panel.len(), cfg.train, cfg.test, cfg.stride)?;
    let jobs: Vec<(usize, Method)> = (0..windows.len())
        .flat_map(|w| methods.iter().map(move |m| (w, *m)))
        .collect();
    let reports: Vec<TrackReport> = jobs
        .par_iter()
        .map(|&(wi, method)| {
            let w = &windows[wi];
            log::debug!("window {} method {}", w.id, method.name());
            track_window(solver, panel, w, method, cfg).unwrap_or_else(|e| TrackReport::failed(w, method, &e))
        })
        .collect();
    let summaries = methods.iter().map(|&m| summarize(m, &reports)).collect();
    Ok(TrackingRun {
        config: cfg.clone(),
        windows,
        reports,
        summaries,
    })
}

fn summarize(method: Method, reports: &[TrackReport]) -> TrackSummary {
    let rows: Vec<&TrackReport> = reports.iter().filter(|r| r.method == method).collect();
    let ok: Vec<&&TrackReport> = rows.iter().filter(|r| !r.is_failure()).collect();
    let stat = |f: fn(&TrackReport) -> f64| {
        let v: Vec<f64> = ok.iter().map(|r| f(r)).collect();
        if v.is_empty() {
            return (f64::NAN, f64::NAN);
        }
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        (mean, v.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    };
    let (mean_fitted_te, max_fitted_te) = stat(|r| r.fitted_te);
    let (mean_predicted_te, max_predicted_te) = stat(|r| r.predicted_te);
    TrackSummary {
        method,
        windows: rows.len(),
        flagged: ok.iter().filter(|r| r.flagged).count(),
        failed: rows.len() - ok.len(),
        mean_fitted_te,
        max_fitted_te,
        mean_predicted_te,
        max_predicted_te,
    }
}

/// One row per window and method, numbers to 10 significant digits.
pub fn write_windows_csv(path: impl AsRef<Path>, reports: &[TrackReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "window",
        "method",
        "train_start",
        "test_start",
        "k",
        "flagged",
        "lambda",
        "d",
        "gamma",
        "lambda2",
        "fitted_te",
        "predicted_te",
        "selected",
        "error",
    ])?;
    for r in reports {
        w.write_record([
            r.window.to_string(),
            r.method.name().to_owned(),
            r.train_start.to_string(),
            r.test_start.to_string(),
            r.k.to_string(),
            r.flagged.to_string(),
            fmt(r.lambda),
            fmt(r.d),
            r.gamma.map(fmt).unwrap_or_default(),
            r.lambda2.map(fmt).unwrap_or_default(),
            fmt(r.fitted_te),
            fmt(r.predicted_te),
            r.selected.join(";"),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Knobs of the synthetic panel: assets in correlated blocks, the first
/// `constituents` of which make up the index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyntheticPanelConfig {
    pub t: usize,
    pub blocks: usize,
    pub block_size: usize,
    pub constituents: usize,
    /// Correlation of daily returns inside a block, net of the market.
    pub block_corr: f64,
    pub market_vol: f64,
    pub asset_vol: f64,
    /// Standard deviation of the noise added to the index level.
    pub index_noise: f64,
    /// Pull of each log price back to its starting level per day; 0 gives
    /// random walks.
    pub reversion: f64,
    pub seed: u64,
}

impl Default for SyntheticPanelConfig {
    fn default() -> Self {
        Self {
            t: 1160,
            blocks: 30,
            block_size: 5,
            constituents: 50,
            block_corr: 0.9,
            market_vol: 0.005,
            asset_vol: 0.01,
            index_noise: 0.5,
            reversion: 0.0,
            seed: 1,
        }
    }
}

fn business_days(start: NaiveDate, count: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(count);
    let mut d = start;
    while out.len() < count {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d + Days::new(1);
    }
    out
}

/// Log prices driven by a market factor and one factor per block, random
/// walks unless `reversion` is set; the index is a positive-weighted sum of the constituents plus
/// noise.
/// Returns the panel and the true weights.
pub fn synthetic_panel(cfg: &SyntheticPanelConfig) -> Result<(PricePanel, Vec<f64>)> {
    if cfg.t == 0 || cfg.blocks == 0 || cfg.block_size == 0 {
        return Err(Error::EmptyPanel);
    }
    if !(0.0..=1.0).contains(&cfg.block_corr) {
        return Err(Error::InvalidInput(format!("block_corr {} outside [0, 1]", cfg.block_corr)));
    }
    let m = cfg.blocks * cfg.block_size;
    if cfg.constituents == 0 || cfg.constituents > m {
        return Err(Error::InvalidInput(format!("constituents must lie in 1..={m}")));
    }
    let mut rng = seeds::rng(seeds::derive(cfg.seed, tag::DATA));
    let start_level = Uniform::new(-0.5, 0.5).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let weight = Uniform::new(0.5, 1.5).map_err(|e| Error::InvalidInput(e.to_string()))?;

    if !(0.0..=1.0).contains(&cfg.reversion) {
        return Err(Error::InvalidInput(format!("reversion {} outside [0, 1]", cfg.reversion)));
    }
    let anchor: Vec<f64> = (0..m).map(|_| 100f64.ln() + rng.sample(start_level)).collect();
    let mut log_p = anchor.clone();
    let raw_w: Vec<f64> = (0..m)
        .map(|j| if j < cfg.constituents { rng.sample(weight) } else { 0.0 })
        .collect();
    let total: f64 = raw_w.iter().sum();
    let weights: Vec<f64> = raw_w.iter().map(|w| w / total).collect();

    let (a, b) = (cfg.block_corr.sqrt(), (1.0 - cfg.block_corr).sqrt());
    let mut prices = DMatrix::zeros(cfg.t, m);
    let mut index = DVector::zeros(cfg.t);
    for t in 0..cfg.t {
        if t > 0 {
            let market: f64 = rng.sample(StandardNormal);
            let factors: Vec<f64> = (0..cfg.blocks).map(|_| rng.sample(StandardNormal)).collect();
            for (j, lp) in log_p.iter_mut().enumerate() {
                let e: f64 = rng.sample(StandardNormal);
                *lp += cfg.reversion * (anchor[j] - *lp) + cfg.market_vol * market + cfg.asset_vol * (a * factors[j / cfg.block_size] + b * e);
            }
        }
        for j in 0..m {
            prices[(t, j)] = log_p[j].exp();
        }
        let noise: f64 = rng.sample(StandardNormal);
        index[t] = (0..m).map(|j| weights[j] * prices[(t, j)]).sum::<f64>() + cfg.index_noise * noise;
    }

    let start = NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date");
    let tickers = (0..m).map(|j| format!("A{j:03}")).collect();
    Ok((PricePanel::new(business_days(start, cfg.t), tickers, prices, index)?, weights))
}

/// Tickers selected in every non-failed window of `method`.
pub fn always_selected(reports: &[TrackReport], method: Method) -> BTreeSet<String> {
    let mut it = reports
        .iter()
        .filter(|r| r.method == method && !r.is_failure())
        .map(|r| r.selected.iter().cloned().collect::<BTreeSet<_>>());
    let first = it.next().unwrap_or_default();
    it.fold(first, |acc, s| acc.intersection(&s).cloned().collect())
}
