use nalgebra::DVector;
use serde::Serialize;

use super::{FitResult, InitialEstimate};
use crate::error::{Error, Result};
use crate::model::{check_len, sign, CoefficientVector, Dataset, SupportSet};
use crate::penalties::PenaltySpec;

/// Stationarity diagnostics of a fit.
///
/// `correlations` are `c_j = X_jᵀ(y − Xβ̂) − w·β̂_j + d·β̂⁰_j`. At a stationary
/// point active coordinates satisfy `c_j = pen'(|β̂_j|)·sign(β̂_j)` and
/// inactive ones `|c_j| ≤ λ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KktReport {
    pub correlations: DVector<f64>,
    /// Active coordinates plus inactive ones whose `|c_j|` sits within
    /// `eq_tol` of λ.
    pub equicorrelation_set: SupportSet,
    /// `sign(c_j)` on the equicorrelation set, 0 elsewhere.
    pub tau: Vec<i8>,
    pub max_violation: f64,
    pub eq_tol: f64,
}

impl KktReport {
    pub(crate) fn from_correlations(
        beta: &DVector<f64>,
        correlations: DVector<f64>,
        spec: &PenaltySpec,
        n: usize,
    ) -> Self {
        let lambda = spec.lambda;
        let eq_tol = (1e-6 * lambda).max(1e-10);
        let mut members = Vec::new();
        let mut max_violation = 0.0f64;
        for (j, (b, c)) in beta.iter().zip(correlations.iter()).enumerate() {
            if *b != 0.0 {
                members.push(j);
                let level = spec.derivative(*b, n) * b.signum();
                max_violation = max_violation.max((c - level).abs());
            } else {
                if lambda - c.abs() <= eq_tol {
                    members.push(j);
                }
                max_violation = max_violation.max(c.abs() - lambda);
            }
        }
        let equicorrelation_set = SupportSet::new(members);
        let tau = (0..beta.len())
            .map(|j| {
                if equicorrelation_set.contains(j) {
                    sign(correlations[j])
                } else {
                    0
                }
            })
            .collect();
        Self {
            correlations,
            equicorrelation_set,
            tau,
            max_violation: max_violation.max(0.0),
            eq_tol,
        }
    }
}

/// Recomputes the KKT report of `fit` on `data`. `init` must be the initial
/// estimate the fit used when `fit.spec.d > 0`.
pub fn kkt_check(
    data: &Dataset,
    fit: &FitResult,
    init: Option<&InitialEstimate>,
) -> Result<KktReport> {
    let beta = fit.beta.values();
    check_len(data.p(), beta.len())?;
    let r = data.y() - data.x() * beta;
    let mut c = data.x().transpose() * r;
    c.axpy(-fit.spec.ridge_weight, beta, 1.0);
    if fit.spec.d != 0.0 {
        let init = init.ok_or_else(|| {
            Error::InvalidInput("fit uses d > 0 but no initial estimate was given".into())
        })?;
        check_len(data.p(), init.beta0.len())?;
        c.axpy(fit.spec.d, init.beta0.values(), 1.0);
    }
    Ok(KktReport::from_correlations(beta, c, &fit.spec, data.n()))
}

/// Closed-form SACE solution on a given set ξ with signs τ:
/// `β̂_ξ = (X_ξᵀX_ξ + I)⁻¹(X_ξᵀy + d·β̂⁰_ξ − λτ_ξ)`, zero elsewhere.
/// `tau` is indexed over all p coordinates.
pub fn explicit_solution_on_set(
    data: &Dataset,
    xi: &SupportSet,
    lambda: f64,
    d: f64,
    tau: &[i8],
    init: &InitialEstimate,
) -> Result<CoefficientVector> {
    let p = data.p();
    check_len(p, tau.len())?;
    check_len(p, init.beta0.len())?;
    let mut out = DVector::zeros(p);
    if xi.is_empty() {
        return Ok(CoefficientVector::new(out));
    }
    let idx = xi.indices();
    let xs = data.x().select_columns(idx);
    let mut gram = xs.transpose() * &xs;
    for i in 0..idx.len() {
        gram[(i, i)] += 1.0;
    }
    let mut rhs = xs.transpose() * data.y();
    for (i, &j) in idx.iter().enumerate() {
        rhs[i] += d * init.beta0.values()[j] - lambda * f64::from(tau[j]);
    }
    let sol = gram
        .cholesky()
        .ok_or_else(|| Error::RankDeficient(idx.to_vec()))?
        .solve(&rhs);
    for (i, &j) in idx.iter().enumerate() {
        out[j] = sol[i];
    }
    Ok(CoefficientVector::new(out))
}
