use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::{json, Value};

use sace_core::model::{load_dataset_csv, round_sig, standardize};
use sace_core::seeds::{self, tag};
use sace_core::simlab::{self, Example, MethodSummary, ScenarioConfig};
use sace_core::solvers::{fit_method, FitResult, Hyper};
use sace_core::tracker::{self, SyntheticPanelConfig, TrackConfig};
use sace_core::tuning::{self, cross_validate_with, make_grid, ExactKOptions};
use sace_core::{CoefficientVector, Error, Method, Solver, StandardizationRecord};

use crate::settings::{parse_list, usage, Settings};
use crate::{Common, CvArgs, FitArgs, SimulateArgs, TrackArgs};

/// The final fit hit the sweep limit; its best iterate was still written.
#[derive(Debug)]
pub struct NotConverged(pub usize);

impl fmt::Display for NotConverged {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "solver did not converge within {} sweeps; best iterate written", self.0)
    }
}

impl std::error::Error for NotConverged {}

const SIG: usize = 10;

fn num(v: f64) -> String {
    format!("{}", round_sig(v, SIG))
}

/// Rounds every non-integer number in a JSON tree to 10 significant digits.
fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => n.as_f64().map_or(Value::Null, |x| json!(round_sig(x, SIG))),
        Value::Array(a) => Value::Array(a.into_iter().map(round_json).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

fn write_json(path: &Path, value: Value) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut w, &round_json(value))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Settings, output directory and seed of one invocation.
struct Run {
    settings: Settings,
    out: PathBuf,
    seed: u64,
}

impl Run {
    fn start(common: &Common) -> Result<Self> {
        let mut settings = Settings::load(common.config.as_deref())?;
        let seed = settings.get("seed", common.seed, 1u64)?;
        // Neither jobs nor the output path changes any output byte, so they
        // stay out of the manifest.
        let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
        let jobs = settings.unrecorded("jobs", common.jobs)?.unwrap_or(cores);
        if jobs == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        let out: String = settings
            .unrecorded("out", common.out.as_ref().map(|p| p.display().to_string()))?
            .unwrap_or_else(|| "out".into());
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
        Ok(Self {
            settings,
            out: PathBuf::from(out),
            seed,
        })
    }

    /// Rejects unknown config keys, creates the output directory and writes
    /// the manifest.
    fn begin(&mut self, command: &str) -> Result<()> {
        self.settings.check_unused()?;
        std::fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        let manifest = json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "seed": self.seed,
            "config": self.settings.resolved(),
        });
        write_json(&self.out.join("manifest.json"), manifest)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn method_of(raw: &str) -> Result<Method> {
    raw.parse::<Method>().map_err(|e| usage(e.to_string()))
}

fn methods_of(raw: &str) -> Result<Vec<Method>> {
    let names: Vec<String> = parse_list("method", raw)?;
    if names.is_empty() {
        return Err(usage("no methods given"));
    }
    names.iter().map(|n| method_of(n)).collect()
}

fn input_path(s: &mut Settings, flag: Option<PathBuf>) -> Result<Option<String>> {
    s.opt("input", flag.map(|p| p.display().to_string()))
}

/// Final fit, keeping the best iterate when the sweep limit is hit.
fn final_fit(solver: &Solver, data: &sace_core::Dataset, method: Method, h: &Hyper) -> Result<(FitResult, bool)> {
    match fit_method(solver, data, method, h, None, None) {
        Ok((fit, _)) => Ok((fit, true)),
        Err(Error::NoConvergence(fit)) => Ok((*fit, false)),
        Err(e) => Err(e.into()),
    }
}

fn write_coefficients(
    path: &Path,
    names: &[String],
    beta: &CoefficientVector,
    rec: Option<&StandardizationRecord>,
) -> Result<()> {
    let raw = rec.map(|r| r.destandardize(beta).1);
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["index", "name", "value", "selected"];
    if raw.is_some() {
        header.push("raw_value");
    }
    w.write_record(&header)?;
    for (j, v) in beta.values().iter().enumerate() {
        let mut row = vec![j.to_string(), names[j].clone(), num(*v), (*v != 0.0).to_string()];
        if let Some(r) = &raw {
            row.push(num(r.values()[j]));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn fit_json(fit: &FitResult, h: &Hyper, converged: bool) -> Value {
    let xi = fit.kkt.equicorrelation_set.indices();
    json!({
        "method": fit.method.name(),
        "lambda": h.lambda,
        "d": h.d,
        "gamma": h.gamma,
        "lambda2": h.lambda2,
        "converged": converged,
        "iterations": fit.iterations,
        "objective": fit.objective,
        "max_violation": fit.kkt.max_violation,
        "eq_tol": fit.kkt.eq_tol,
        "xi": xi,
        "tau": xi.iter().map(|&j| fit.kkt.tau[j]).collect::<Vec<_>>(),
    })
}

pub fn fit(a: FitArgs) -> Result<()> {
    let mut run = Run::start(&a.common)?;
    let s = &mut run.settings;
    let input = input_path(s, a.input)?.ok_or_else(|| usage("--input is required"))?;
    let method = method_of(&s.get("method", a.method, "sace".to_owned())?)?;
    let lambda = s.opt("lambda", a.lambda)?.ok_or_else(|| usage("--lambda is required"))?;
    let h = Hyper {
        lambda,
        d: s.get("d", a.d, 0.0)?,
        gamma: s.get("gamma", a.gamma, 3.0)?,
        lambda2: s.get("lambda2", a.lambda2, 0.5)?,
    };
    let scale = s.switch("standardize", a.standardize, false)?;
    let mut solver = Solver::default();
    solver.options.max_iter = s.get("max-iter", a.max_iter, solver.options.max_iter)?;
    if solver.options.max_iter == 0 {
        return Err(usage("max-iter must be at least 1"));
    }
    run.begin("fit")?;

    let (raw, names) = load_dataset_csv(&input).with_context(|| format!("reading {input}"))?;
    let (data, rec) = if scale {
        let (d, r) = standardize(&raw)?;
        (d, Some(r))
    } else {
        (raw, None)
    };
    let (fit, converged) = final_fit(&solver, &data, method, &h)?;
    write_coefficients(&run.path("coefficients.csv"), &names, &fit.beta, rec.as_ref())?;
    let mut report = fit_json(&fit, &h, converged);
    if let Some(r) = &rec {
        report["intercept"] = json!(r.destandardize(&fit.beta).0);
    }
    write_json(&run.path("kkt.json"), report)?;
    if !converged {
        return Err(NotConverged(fit.iterations).into());
    }
    println!(
        "{} at lambda {}: {} nonzero, max KKT violation {:.3e}",
        method.name(),
        num(lambda),
        fit.beta.nnz(),
        fit.kkt.max_violation
    );
    Ok(())
}

pub fn cv(a: CvArgs) -> Result<()> {
    let mut run = Run::start(&a.common)?;
    let s = &mut run.settings;
    let input = input_path(s, a.input)?.ok_or_else(|| usage("--input is required"))?;
    let method = method_of(&s.get("method", a.method, "sace".to_owned())?)?;
    let folds = s.get("folds", a.folds, 10usize)?;
    let n_lambda = s.get("n-lambda", a.n_lambda, 30usize)?;
    let ratio = s.get("lambda-min-ratio", a.lambda_min_ratio, 0.01)?;
    let ds: Vec<f64> = match s.opt("ds", a.ds)? {
        Some(raw) => parse_list("ds", &raw)?,
        None => tuning::default_ds(),
    };
    let gammas: Vec<f64> = match s.opt("gammas", a.gammas)? {
        Some(raw) => parse_list("gammas", &raw)?,
        None => tuning::DEFAULT_GAMMAS.to_vec(),
    };
    let seed = run.seed;
    run.begin("cv")?;

    let (raw, names) = load_dataset_csv(&input).with_context(|| format!("reading {input}"))?;
    let (data, rec) = standardize(&raw)?;
    let grid = make_grid(&data, n_lambda, ratio, &ds, &gammas)?;
    let solver = Solver::default();
    let result = cross_validate_with(&solver, &data, method, &grid, folds, seeds::derive(seed, tag::FOLDS))?;

    let mut w = csv::Writer::from_path(run.path("cv.csv"))?;
    w.write_record(["lambda", "d", "gamma", "lambda2", "mean", "std", "failures"])?;
    for c in &result.table {
        let h = c.hyper;
        w.write_record([
            num(h.lambda),
            num(h.d),
            num(h.gamma),
            num(h.lambda2),
            num(c.mean),
            num(c.std),
            c.failures.to_string(),
        ])?;
    }
    w.flush()?;

    let best = result.best;
    let (fit, converged) = final_fit(&solver, &data, method, &best)?;
    write_coefficients(&run.path("coefficients.csv"), &names, &fit.beta, Some(&rec))?;
    let mut report = fit_json(&fit, &best, converged);
    report["cv_error"] = json!(result.table[result.best_index].mean);
    report["folds"] = json!(result.folds);
    report["intercept"] = json!(rec.destandardize(&fit.beta).0);
    write_json(&run.path("best.json"), report)?;
    if !converged {
        return Err(NotConverged(fit.iterations).into());
    }
    println!(
        "{}: lambda {} d {} gamma {} lambda2 {}, cv error {}",
        method.name(),
        num(best.lambda),
        num(best.d),
        num(best.gamma),
        num(best.lambda2),
        num(result.table[result.best_index].mean)
    );
    Ok(())
}

fn summary_row(case: usize, m: &MethodSummary) -> Vec<String> {
    vec![
        case.to_string(),
        m.method.name().to_owned(),
        num(m.l2_error.mean),
        num(m.l2_error.se),
        num(m.tpr.mean),
        num(m.tpr.se),
        num(m.tnr.mean),
        num(m.tnr.se),
        m.failures.to_string(),
        m.not_converged.to_string(),
    ]
}

const TABLE_HEADER: [&str; 10] = [
    "case",
    "method",
    "l2_error",
    "l2_error_se",
    "tpr",
    "tpr_se",
    "tnr",
    "tnr_se",
    "failures",
    "not_converged",
];

pub fn simulate(a: SimulateArgs) -> Result<()> {
    let mut run = Run::start(&a.common)?;
    let s = &mut run.settings;
    let example = match s.get("example", a.example, 1u8)? {
        1 => Example::Ex1,
        2 => Example::Ex2,
        other => return Err(usage(format!("example must be 1 or 2, got {other}"))),
    };
    let case = s.get("case", a.case, 0usize)?;
    if case > 4 {
        return Err(usage(format!("case must be 0-4, got {case}")));
    }
    let reps = s.get("reps", a.reps, 100usize)?;
    if reps == 0 {
        return Err(usage("reps must be at least 1"));
    }
    let methods = methods_of(&s.get("method", a.method, "lasso,en,mcp,sace,gsace".to_owned())?)?;
    let folds = s.get("folds", a.folds, 10usize)?;
    let n_lambda = s.get("n-lambda", a.n_lambda, 30usize)?;
    let seed = run.seed;
    run.begin("simulate")?;

    let cases: Vec<usize> = if case == 0 { (1..=4).collect() } else { vec![case] };
    let base = if example == Example::Ex1 { 1 } else { 3 };
    let mut raw_table = csv::Writer::from_path(run.path(&format!("table{base}.csv")))?;
    let mut thr_table = csv::Writer::from_path(run.path(&format!("table{}.csv", base + 1)))?;
    raw_table.write_record(TABLE_HEADER)?;
    thr_table.write_record(TABLE_HEADER)?;
    let mut profiles = csv::Writer::from_path(run.path("profiles.csv"))?;
    profiles.write_record(["case", "method", "index", "estimate", "truth"])?;
    let mut summary = Vec::new();

    for &c in &cases {
        // Case k draws from its own child of the master seed.
        let mut cfg = ScenarioConfig::case(example, c, reps, seeds::derive(seed, tag::CASE_BASE + c as u64))?;
        cfg.folds = folds;
        cfg.n_lambda = n_lambda;
        let report = simlab::run_scenario(&cfg, &methods, true)?;
        for (rep, method, msg) in &report.failures {
            log::warn!("case {c} replication {rep} {}: {msg}", method.name());
        }
        for m in &report.summaries {
            let table = if m.thresholded { &mut thr_table } else { &mut raw_table };
            table.write_record(summary_row(c, m))?;
        }

        let (_, truth) = simlab::generate(&cfg, cfg.rep_seed(0))?;
        let fits: Vec<(String, CoefficientVector)> = report
            .records
            .iter()
            .filter(|r| r.rep == 0)
            .map(|r| (r.method.name().to_owned(), r.beta.clone()))
            .collect();
        for p in simlab::export_estimate_profile(&fits, &truth)? {
            profiles.write_record([c.to_string(), p.method, p.index.to_string(), num(p.estimate), num(p.truth)])?;
        }

        let line: Vec<String> = report
            .summaries
            .iter()
            .filter(|m| !m.thresholded)
            .map(|m| format!("{} {}", m.method.name(), num(m.l2_error.mean)))
            .collect();
        println!("case {c}: mean l2 error {}", line.join(", "));
        summary.push(json!({
            "case": c,
            "noise_sigma": cfg.noise_sigma,
            "reps": cfg.reps,
            "summaries": report.summaries,
            "failures": report.failures.len(),
        }));
    }
    raw_table.flush()?;
    thr_table.flush()?;
    profiles.flush()?;
    write_json(&run.path("summary.json"), json!({ "example": if base == 1 { 1 } else { 2 }, "cases": summary }))
}

pub fn track(a: TrackArgs) -> Result<()> {
    let mut run = Run::start(&a.common)?;
    let s = &mut run.settings;
    let input = input_path(s, a.input)?;
    let synthetic = s.switch("synthetic", a.synthetic, false)?;
    if synthetic == input.is_some() {
        return Err(usage("give exactly one of --input and --synthetic"));
    }
    let methods = methods_of(&s.get("method", a.method, "lasso,sace".to_owned())?)?;
    let defaults = ExactKOptions {
        d: s.get("d", a.d, 0.0)?,
        gamma: s.get("gamma", a.gamma, 3.0)?,
        ..ExactKOptions::default()
    };
    let cfg = TrackConfig {
        k: s.get("k", a.k, 50usize)?,
        train: s.get("train", a.train, 100usize)?,
        test: s.get("test", a.test, 20usize)?,
        stride: s.get("stride", a.stride, 20usize)?,
        tune: !s.switch("no-tune", a.no_tune, false)?,
        returns: s.switch("returns", a.returns, false)?,
        seed: run.seed,
        defaults,
        ..TrackConfig::default()
    };
    run.begin("track")?;

    let (panel, dropped) = match &input {
        Some(path) => tracker::load_prices(path).with_context(|| format!("reading {path}"))?,
        None => {
            let (panel, _) = tracker::synthetic_panel(&SyntheticPanelConfig {
                seed: run.seed,
                ..SyntheticPanelConfig::default()
            })?;
            tracker::write_prices(run.path("panel.csv"), &panel)?;
            (panel, Vec::new())
        }
    };
    for t in &dropped {
        eprintln!("warning: dropped ticker {t}: missing prices");
    }

    let result = tracker::run_tracking(&Solver::default(), &panel, &methods, &cfg)?;
    for r in &result.reports {
        let note = match (&r.error, r.flagged) {
            (Some(e), _) => format!(" failed: {e}"),
            (None, true) => " (closest cardinality)".to_owned(),
            (None, false) => String::new(),
        };
        println!("window {:>3} {:<5} k={}{note}", r.window, r.method.name(), r.k);
    }
    tracker::write_windows_csv(run.path("windows.csv"), &result.reports)?;
    write_json(
        &run.path("summary.json"),
        json!({
            "windows": result.windows.len(),
            "assets": panel.m(),
            "dropped": dropped,
            "summaries": result.summaries,
        }),
    )
}
