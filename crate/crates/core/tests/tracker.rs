use nalgebra::DVector;
use sace_core::model::standardize;
use sace_core::tracker::*;
use sace_core::{Method, Solver};

fn fixed_cfg(k: usize) -> TrackConfig {
    TrackConfig {
        k,
        tune: false,
        ..Default::default()
    }
}

fn small_panel(t: usize, blocks: usize, constituents: usize, noise: f64, corr: f64) -> (PricePanel, Vec<f64>) {
    synthetic_panel(&SyntheticPanelConfig {
        t,
        blocks,
        block_size: 5,
        constituents,
        block_corr: corr,
        index_noise: noise,
        seed: 11,
        ..Default::default()
    })
    .unwrap()
}

#[test]
fn low_noise_index_recovers_constituents() {
    // Independent mean-reverting assets, so the constituents are
    // identifiable; random-walk levels correlate spuriously.
    let (panel, weights) = synthetic_panel(&SyntheticPanelConfig {
        t: 120,
        blocks: 30,
        block_size: 5,
        constituents: 5,
        block_corr: 0.0,
        market_vol: 0.0,
        index_noise: 0.001,
        reversion: 0.5,
        seed: 11,
        ..Default::default()
    })
    .unwrap();
    let w = &make_windows(panel.len(), 100, 20, 20).unwrap()[0];
    let r = track_window(&Solver::default(), &panel, w, Method::Lasso, &fixed_cfg(5)).unwrap();
    assert_eq!(r.k, 5);
    assert!(!r.flagged);
    let truth: Vec<&String> = panel.tickers().iter().zip(&weights).filter(|(_, w)| **w > 0.0).map(|(t, _)| t).collect();
    let hits = truth.iter().filter(|t| r.selected.contains(t)).count();
    assert!(hits >= 4, "only {hits} of 5 constituents selected");
    assert!(r.predicted_te <= r.fitted_te + 0.1, "fitted {} predicted {}", r.fitted_te, r.predicted_te);
}

#[test]
fn pure_noise_index_completes() {
    let (mut panel, _) = small_panel(120, 12, 10, 0.1, 0.5);
    let noise = synthetic_panel(&SyntheticPanelConfig {
        t: 120,
        blocks: 1,
        block_size: 1,
        constituents: 1,
        index_noise: 30.0,
        seed: 99,
        ..Default::default()
    })
    .unwrap()
    .0;
    panel = PricePanel::new(
        panel.dates().to_vec(),
        panel.tickers().to_vec(),
        panel.prices().clone(),
        noise.index().clone(),
    )
    .unwrap();
    let w = &make_windows(panel.len(), 100, 20, 20).unwrap()[0];
    let r = track_window(&Solver::default(), &panel, w, Method::Sace, &fixed_cfg(20)).unwrap();
    assert!(r.k == 20 || r.flagged);
    assert!(r.fitted_te >= 0.0 && r.predicted_te >= 0.0);
    assert!(r.predicted_te > 10.0);
}

#[test]
fn destandardized_replication_matches_standardized() {
    let (panel, _) = small_panel(120, 10, 20, 0.2, 0.8);
    let w = &make_windows(panel.len(), 100, 20, 20).unwrap()[0];
    let r = track_window(&Solver::default(), &panel, w, Method::Lasso, &fixed_cfg(10)).unwrap();

    let raw = panel.dataset(w.train.clone()).unwrap();
    let (std, rec) = standardize(&raw).unwrap();
    // Slopes back on the standardized scale.
    let beta_std: Vec<f64> = r.weights.iter().zip(&rec.column_scales).map(|(b, s)| b * s).collect();
    let yhat_std = std.x() * DVector::from_vec(beta_std);
    for (i, v) in yhat_std.iter().enumerate() {
        assert!((v + rec.y_mean - r.fitted[i]).abs() < 1e-8);
    }
}

#[test]
fn test_rows_do_not_influence_fit() {
    let (panel, _) = small_panel(140, 10, 20, 0.2, 0.8);
    let w = &make_windows(panel.len(), 100, 20, 20).unwrap()[0];
    let cfg = TrackConfig {
        k: 10,
        ds: vec![0.0, 1.0],
        ..Default::default()
    };
    let a = track_window(&Solver::default(), &panel, w, Method::Sace, &cfg).unwrap();

    let mut prices = panel.prices().clone();
    let mut index = panel.index().clone();
    for i in w.test.start..panel.len() {
        prices.row_mut(i).apply(|v| *v *= 7.0);
        index[i] = -1e4;
    }
    let poisoned = PricePanel::new(panel.dates().to_vec(), panel.tickers().to_vec(), prices, index).unwrap();
    let b = track_window(&Solver::default(), &poisoned, w, Method::Sace, &cfg).unwrap();
    assert_eq!(a.selected, b.selected);
    assert_eq!(a.weights, b.weights);
    assert_eq!(a.fitted, b.fitted);
    assert_ne!(a.predicted, b.predicted);
}

#[test]
fn all_assets_fit_no_worse_in_sample() {
    let (panel, _) = small_panel(120, 2, 10, 0.2, 0.5);
    let w = &make_windows(panel.len(), 100, 20, 20).unwrap()[0];
    let all = track_window(&Solver::default(), &panel, w, Method::Lasso, &fixed_cfg(10)).unwrap();
    let few = track_window(&Solver::default(), &panel, w, Method::Lasso, &fixed_cfg(5)).unwrap();
    assert_eq!(all.k, 10);
    assert!(all.fitted_te <= few.fitted_te);
}

#[test]
fn run_is_deterministic_and_complete() {
    let (panel, _) = small_panel(160, 6, 15, 0.2, 0.8);
    let cfg = TrackConfig {
        k: 8,
        ds: vec![0.0, 1.0],
        ..Default::default()
    };
    let methods = [Method::Lasso, Method::Sace];
    let a = run_tracking(&Solver::default(), &panel, &methods, &cfg).unwrap();
    let b = run_tracking(&Solver::default(), &panel, &methods, &cfg).unwrap();
    assert_eq!(a.windows.len(), 3);
    assert_eq!(a.reports.len(), a.windows.len() * methods.len());
    assert_eq!(a.reports, b.reports);
    for r in &a.reports {
        assert!(r.k == 8 || r.flagged);
        assert!(r.fitted_te >= 0.0 && r.predicted_te >= 0.0);
    }

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("windows.csv");
    write_windows_csv(&path, &a.reports).unwrap();
    let body = std::fs::read_to_string(&path).unwrap();
    assert_eq!(body.lines().count(), 1 + a.reports.len());
}

#[test]
fn failing_window_is_recorded() {
    let (panel, _) = small_panel(140, 4, 10, 0.2, 0.8);
    let mut prices = panel.prices().clone();
    // A constant price in the first window's training rows.
    for i in 0..100 {
        prices[(i, 3)] = 50.0;
    }
    let panel = PricePanel::new(panel.dates().to_vec(), panel.tickers().to_vec(), prices, panel.index().clone()).unwrap();
    let run = run_tracking(&Solver::default(), &panel, &[Method::Lasso], &fixed_cfg(5)).unwrap();
    assert_eq!(run.reports.len(), 2);
    assert!(run.reports[0].is_failure());
    assert!(!run.reports[1].is_failure());
    assert_eq!(run.summaries[0].failed, 1);
}
