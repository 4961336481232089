//! Reference estimators on the true support and desk-scale checks of the
//! estimators' theoretical guarantees.
//!
//! Nothing here is a certificate. [`re_probe`] in particular samples the
//! restricted-eigenvalue cone, so its output is an upper bound on the true
//! constant κ, never a lower bound.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{check_len, CoefficientVector, Dataset, SupportSet};
use crate::seeds;

/// OLS and Liu estimates on a support S.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleEstimates {
    pub beta_ols: CoefficientVector,
    pub beta_liu: CoefficientVector,
    /// `Λ_min((1/n) X_SᵀX_S)`; NaN when S is empty.
    pub lambda_min_s: f64,
    pub d: f64,
}

fn support_gram(data: &Dataset, s: &SupportSet) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if let Some(&j) = s.indices().last() {
        if j >= data.p() {
            return Err(Error::InvalidInput(format!("support index {j} out of range")));
        }
    }
    s.check_fits(data.n())?;
    let xs = data.x().select_columns(s.indices());
    let gram = xs.transpose() * &xs;
    Ok((xs, gram))
}

/// Least squares restricted to S, zero elsewhere.
pub fn ols_on_support(data: &Dataset, s: &SupportSet) -> Result<CoefficientVector> {
    let mut out = DVector::zeros(data.p());
    if s.is_empty() {
        return Ok(CoefficientVector::new(out));
    }
    let (xs, gram) = support_gram(data, s)?;
    let rank_deficient = || Error::RankDeficient(s.indices().to_vec());
    let chol = gram.clone().cholesky().ok_or_else(rank_deficient)?;
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = diag
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    if lo * lo <= 1e-12 * hi * hi {
        return Err(rank_deficient());
    }
    let sol = chol.solve(&(xs.transpose() * data.y()));
    for (k, &j) in s.indices().iter().enumerate() {
        out[j] = sol[k];
    }
    Ok(CoefficientVector::new(out))
}

/// `β̂* = (X_SᵀX_S + I)⁻¹(X_SᵀX_S + dI) β̂ᴼᴸˢ` on S.
pub fn liu_oracle(data: &Dataset, s: &SupportSet, d: f64) -> Result<OracleEstimates> {
    if !(0.0..=1.0).contains(&d) {
        return Err(Error::BadD(d));
    }
    let beta_ols = ols_on_support(data, s)?;
    if s.is_empty() {
        return Ok(OracleEstimates {
            beta_liu: beta_ols.clone(),
            beta_ols,
            lambda_min_s: f64::NAN,
            d,
        });
    }
    let (_, gram) = support_gram(data, s)?;
    let q = s.q();
    let b_s = DVector::from_iterator(q, s.indices().iter().map(|j| beta_ols.values()[*j]));
    let shifted = &gram + DMatrix::identity(q, q) * d;
    let rhs = shifted * &b_s;
    let lhs = &gram + DMatrix::identity(q, q);
    let sol = lhs
        .cholesky()
        .ok_or_else(|| Error::RankDeficient(s.indices().to_vec()))?
        .solve(&rhs);
    let mut liu = DVector::zeros(data.p());
    for (k, &j) in s.indices().iter().enumerate() {
        liu[j] = sol[k];
    }
    let lambda_min_s = SymmetricEigen::new(gram / data.n() as f64).eigenvalues.min();
    Ok(OracleEstimates {
        beta_ols,
        beta_liu: CoefficientVector::new(liu),
        lambda_min_s,
        d,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RecoveryEvent {
    SignMatch,
    OracleMatch,
    Neither,
}

/// Classifies a fit: signs agree with the truth everywhere, or the fit is
/// within `tol` (ℓ∞) of the Liu oracle. Sign agreement takes precedence.
pub fn recovery_event(
    beta_hat: &CoefficientVector,
    beta_true: &CoefficientVector,
    oracle: &OracleEstimates,
    tol: f64,
) -> Result<RecoveryEvent> {
    check_len(beta_true.len(), beta_hat.len())?;
    check_len(beta_true.len(), oracle.beta_liu.len())?;
    if beta_hat.signs() == beta_true.signs() {
        Ok(RecoveryEvent::SignMatch)
    } else if (beta_hat.values() - oracle.beta_liu.values()).amax() <= tol {
        Ok(RecoveryEvent::OracleMatch)
    } else {
        Ok(RecoveryEvent::Neither)
    }
}

/// Whether an instance meets the GSACE oracle-property assumptions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecoveryAssumptions {
    /// `min_{j∈S} |β_j| ≥ γλ/n`.
    pub signal_ok: bool,
    /// `Λ_min((1/n) X_SᵀX_S) ≥ 1/γ`.
    pub eigen_ok: bool,
    pub lambda_min_s: f64,
    pub min_signal: f64,
}

pub fn recovery_assumptions(
    oracle: &OracleEstimates,
    beta_true: &CoefficientVector,
    lambda: f64,
    gamma: f64,
    n: usize,
) -> RecoveryAssumptions {
    let min_signal = beta_true
        .values()
        .iter()
        .filter(|b| **b != 0.0)
        .fold(f64::INFINITY, |m, b| m.min(b.abs()));
    RecoveryAssumptions {
        signal_ok: min_signal >= gamma * lambda / n as f64,
        eigen_ok: oracle.lambda_min_s >= 1.0 / gamma,
        lambda_min_s: oracle.lambda_min_s,
        min_signal,
    }
}

/// `K·√(q·ln p / n)`.
pub fn l2_bound(q: usize, p: usize, n: usize, k: f64) -> f64 {
    k * (q as f64 * (p as f64).ln() / n as f64).sqrt()
}

/// `λ = 4σ√(n·ln p)`, the level used by the error-bound and oracle results.
pub fn theoretical_lambda(n: usize, p: usize, sigma: f64) -> f64 {
    4.0 * sigma * (n as f64 * (p as f64).ln()).sqrt()
}

/// Monte Carlo estimate of the restricted-eigenvalue constant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReProbe {
    /// Smallest `vᵀCv/‖v‖²` seen; an upper bound on the certified κ.
    pub kappa_estimate: f64,
    pub samples: usize,
}

/// Cone ratio bound `‖v_Oᶜ‖₁ ≤ 7‖v_O‖₁`.
pub const CONE_RATIO: f64 = 7.0;

/// Evaluates `vᵀCv/‖v‖²` with `C = (1/n)XᵀX` over the eigenvectors of
/// `C_OO` (padded with zeros) followed by `samples` random cone vectors, and
/// returns the running minimum. Draws are sequential, so more samples with
/// the same seed never raise the estimate.
pub fn re_probe(data: &Dataset, o: &SupportSet, samples: usize, seed: u64) -> Result<ReProbe> {
    if samples == 0 {
        return Err(Error::InvalidInput("re_probe needs at least one sample".into()));
    }
    if o.is_empty() {
        return Err(Error::InvalidInput("re_probe needs a nonempty set O".into()));
    }
    let (p, n) = (data.p(), data.n() as f64);
    let x = data.x();
    let rayleigh = |v: &DVector<f64>| (x * v).norm_squared() / n / v.norm_squared();
    let mut best = f64::INFINITY;

    let (_, gram) = support_gram(data, o)?;
    let eig = SymmetricEigen::new(gram / n);
    for k in 0..o.q() {
        let mut v = DVector::zeros(p);
        for (i, &j) in o.indices().iter().enumerate() {
            v[j] = eig.eigenvectors[(i, k)];
        }
        best = best.min(rayleigh(&v));
    }

    let outside: Vec<usize> = (0..p).filter(|j| !o.contains(*j)).collect();
    let mut rng = seeds::rng(seed);
    for _ in 0..samples {
        let mut v = DVector::zeros(p);
        let mut inner_l1 = 0.0;
        for &j in o.indices() {
            let z: f64 = rng.sample(StandardNormal);
            v[j] = z;
            inner_l1 += z.abs();
        }
        let budget = rng.random::<f64>() * CONE_RATIO * inner_l1;
        let w: Vec<f64> = outside.iter().map(|_| rng.sample(StandardNormal)).collect();
        let w_l1: f64 = w.iter().map(|t| t.abs()).sum();
        if w_l1 > 0.0 {
            for (&j, wj) in outside.iter().zip(&w) {
                v[j] = wj * budget / w_l1;
            }
        }
        if v.norm_squared() > 0.0 {
            best = best.min(rayleigh(&v));
        }
    }
    Ok(ReProbe {
        kappa_estimate: best,
        samples,
    })
}

/// ℓ2 error of a fit compared with `K√(q log p / n)`, with the RE estimate
/// on the true support alongside.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheck {
    pub kappa_estimate: f64,
    pub bound_value: f64,
    pub k: f64,
    pub error: f64,
    pub holds: bool,
}

pub fn bound_check(
    data: &Dataset,
    beta_hat: &CoefficientVector,
    beta_true: &CoefficientVector,
    k: f64,
    probe_samples: usize,
    seed: u64,
) -> Result<BoundCheck> {
    check_len(beta_true.len(), beta_hat.len())?;
    let support = beta_true.support();
    let kappa_estimate = if support.is_empty() {
        f64::NAN
    } else {
        re_probe(data, &support, probe_samples, seed)?.kappa_estimate
    };
    let bound_value = l2_bound(support.q(), data.p(), data.n(), k);
    let error = (beta_hat.values() - beta_true.values()).norm();
    Ok(BoundCheck {
        kappa_estimate,
        bound_value,
        k,
        error,
        holds: error <= bound_value,
    })
}
