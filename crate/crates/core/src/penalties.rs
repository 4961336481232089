//! Scalar penalties, their derivatives and full objective evaluators.
//!
//! The MCP here carries the sample count `n` inside the concavity term,
//! `ρ(t; λ, γ) = λ∫₀^|t| (1 − n x/(γλ))₊ dx`, because the loss is the raw
//! residual sum of squares rather than its mean.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_len, residual, CoefficientVector, Dataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PenaltyFamily {
    L1,
    Mcp,
}

/// Penalty family and hyperparameters of one estimator.
///
/// The objective is
/// `½‖y − Xβ‖² + ½·ridge_weight·‖β‖² + Σ pen(β_j) − d·β̂⁰ᵀβ`.
/// `ridge_weight` multiplies `½‖β‖²`: it is 1 for SACE/GSACE, 0 for plain
/// Lasso/MCP and `2λ₂` for a naive Elastic Net written as `λ₂‖β‖²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub family: PenaltyFamily,
    pub lambda: f64,
    pub gamma: Option<f64>,
    pub d: f64,
    pub ridge_weight: f64,
}

impl PenaltySpec {
    pub fn lasso(lambda: f64) -> Self {
        Self {
            family: PenaltyFamily::L1,
            lambda,
            gamma: None,
            d: 0.0,
            ridge_weight: 0.0,
        }
    }

    /// Naive Elastic Net `λ₁‖β‖₁ + λ₂‖β‖²`.
    pub fn elastic_net(lambda1: f64, lambda2: f64) -> Self {
        Self {
            ridge_weight: 2.0 * lambda2,
            ..Self::lasso(lambda1)
        }
    }

    pub fn mcp(lambda: f64, gamma: f64) -> Self {
        Self {
            family: PenaltyFamily::Mcp,
            lambda,
            gamma: Some(gamma),
            d: 0.0,
            ridge_weight: 0.0,
        }
    }

    pub fn sace(lambda: f64, d: f64) -> Self {
        Self {
            d,
            ridge_weight: 1.0,
            ..Self::lasso(lambda)
        }
    }

    pub fn gsace(lambda: f64, gamma: f64, d: f64) -> Self {
        Self {
            d,
            ridge_weight: 1.0,
            ..Self::mcp(lambda, gamma)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidInput(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        if !(0.0..=1.0).contains(&self.d) {
            return Err(Error::BadD(self.d));
        }
        if !(self.ridge_weight >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "ridge weight must be >= 0, got {}",
                self.ridge_weight
            )));
        }
        if self.family == PenaltyFamily::Mcp {
            match self.gamma {
                Some(g) if g > 0.0 => {}
                other => {
                    return Err(Error::InvalidInput(format!(
                        "MCP needs gamma > 0, got {other:?}"
                    )))
                }
            }
        }
        Ok(())
    }

    /// Penalty value `pen(t)` for one coordinate.
    pub fn value(&self, t: f64, n: usize) -> f64 {
        match self.family {
            PenaltyFamily::L1 => self.lambda * t.abs(),
            PenaltyFamily::Mcp => mcp_value(t, self.lambda, self.gamma.unwrap_or(f64::INFINITY), n),
        }
    }

    /// Derivative of the penalty in `|t|`; `pen'(0+)` at zero.
    pub fn derivative(&self, t: f64, n: usize) -> f64 {
        match self.family {
            PenaltyFamily::L1 => self.lambda,
            PenaltyFamily::Mcp => {
                mcp_derivative(t, self.lambda, self.gamma.unwrap_or(f64::INFINITY), n)
            }
        }
    }
}

/// `sign(z)·max(|z| − t, 0)`, the proximal map of `t|·|`.
#[inline]
pub fn soft_threshold(z: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Closed form of `λ∫₀^|t| (1 − n x/(γλ))₊ dx`.
pub fn mcp_value(t: f64, lambda: f64, gamma: f64, n: usize) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    let n = n as f64;
    let a = t.abs();
    if a <= gamma * lambda / n {
        lambda * a - n * a * a / (2.0 * gamma)
    } else {
        gamma * lambda * lambda / (2.0 * n)
    }
}

/// `λ(1 − n|t|/(γλ))₊`.
pub fn mcp_derivative(t: f64, lambda: f64, gamma: f64, n: usize) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    lambda * (1.0 - n as f64 * t.abs() / (gamma * lambda)).max(0.0)
}

/// Objective of any estimator described by a [`PenaltySpec`]. `beta0` is the
/// initial estimate feeding `−d·β̂⁰ᵀβ`; `None` means the term is absent.
pub fn penalized_objective(
    data: &Dataset,
    beta: &CoefficientVector,
    spec: &PenaltySpec,
    beta0: Option<&CoefficientVector>,
) -> Result<f64> {
    let r = residual(data, beta)?;
    let b = beta.values();
    let n = data.n();
    let mut obj = 0.5 * r.norm_squared() + 0.5 * spec.ridge_weight * b.norm_squared();
    obj += b.iter().map(|t| spec.value(*t, n)).sum::<f64>();
    if let Some(b0) = beta0 {
        check_len(b.len(), b0.len())?;
        obj -= spec.d * b0.values().dot(b);
    }
    Ok(obj)
}

/// `½‖y − Xβ‖² + ½‖β‖² + λ‖β‖₁ − d·β̂⁰ᵀβ`.
pub fn sace_objective(
    data: &Dataset,
    beta: &CoefficientVector,
    spec: &PenaltySpec,
    beta0: &CoefficientVector,
) -> Result<f64> {
    if spec.family != PenaltyFamily::L1 || spec.ridge_weight != 1.0 {
        return Err(Error::InvalidInput(
            "SACE objective needs an L1 penalty with unit ridge weight".into(),
        ));
    }
    penalized_objective(data, beta, spec, Some(beta0))
}

/// `½‖y − Xβ‖² + ½‖β‖² + Σρ(β_j; λ, γ) − d·β̂⁰ᵀβ`.
pub fn gsace_objective(
    data: &Dataset,
    beta: &CoefficientVector,
    spec: &PenaltySpec,
    beta0: &CoefficientVector,
) -> Result<f64> {
    if spec.family != PenaltyFamily::Mcp {
        return Err(Error::InvalidInput("GSACE objective needs an MCP penalty".into()));
    }
    penalized_objective(data, beta, spec, Some(beta0))
}

/// Per-coordinate penalty levels `λ* = λ𝟏 − d·β̂⁰∘τ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptiveWeightVector {
    pub values: DVector<f64>,
}

/// `λ*_j = λ − d·β̂⁰_j·τ_j`. `tau` normally comes from the KKT report of a
/// finished fit, so the weights are diagnostic output only.
pub fn adaptive_weights(
    spec: &PenaltySpec,
    beta0: &CoefficientVector,
    tau: &[i8],
) -> Result<AdaptiveWeightVector> {
    check_len(beta0.len(), tau.len())?;
    if let Some(t) = tau.iter().find(|t| !(-1..=1).contains(*t)) {
        return Err(Error::InvalidInput(format!("tau entry {t} not in {{-1, 0, 1}}")));
    }
    Ok(AdaptiveWeightVector {
        values: DVector::from_iterator(
            tau.len(),
            beta0
                .values()
                .iter()
                .zip(tau)
                .map(|(b, t)| spec.lambda - spec.d * b * f64::from(*t)),
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-0.5, 1.0), 0.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
    }

    #[test]
    fn mcp_value_cases() {
        assert_eq!(mcp_value(0.0, 1.3, 2.0, 5), 0.0);
        // ∫₀¹ (1 − x/2) dx = 3/4
        assert_abs_diff_eq!(mcp_value(1.0, 1.0, 2.0, 1), 0.75, epsilon = 1e-15);
        // Flat beyond γλ/n: plateau γλ²/(2n).
        let (l, g, n) = (2.0, 3.0, 4);
        let kink = g * l / n as f64;
        for t in [kink, kink + 0.1, -5.0 * kink] {
            assert_abs_diff_eq!(mcp_value(t, l, g, n), g * l * l / (2.0 * n as f64), epsilon = 1e-14);
        }
    }

    #[test]
    fn mcp_derivative_cases() {
        assert_abs_diff_eq!(mcp_derivative(1e-14, 1.7, 3.0, 10), 1.7, epsilon = 1e-12);
        let kink = 3.0 * 1.7 / 10.0;
        assert_eq!(mcp_derivative(kink, 1.7, 3.0, 10), 0.0);
        assert_eq!(mcp_derivative(-2.0 * kink, 1.7, 3.0, 10), 0.0);
        assert_abs_diff_eq!(mcp_derivative(1.0, 1.0, 2.0, 1), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn mcp_grid_shape() {
        let (l, g, n) = (1.5, 2.5, 3);
        let ts: Vec<f64> = (0..=400).map(|i| i as f64 * 0.005).collect();
        let vals: Vec<f64> = ts.iter().map(|t| mcp_value(*t, l, g, n)).collect();
        for w in vals.windows(2) {
            assert!(w[1] >= w[0] - 1e-15, "nondecreasing");
            assert!((w[1] - w[0]).abs() < 0.01, "continuous on the grid");
        }
        for w in vals.windows(3) {
            assert!(w[0] + w[2] <= 2.0 * w[1] + 1e-12, "concave");
        }
    }

    #[test]
    fn mcp_derivative_matches_finite_difference() {
        let (l, g, n) = (0.8, 3.0, 7);
        let kink = g * l / n as f64;
        let h = 1e-7;
        for i in 1..200 {
            let t = i as f64 * 0.004 - 0.4;
            if (t.abs() - kink).abs() < 1e-3 || t.abs() < 1e-3 {
                continue;
            }
            let fd = (mcp_value(t + h, l, g, n) - mcp_value(t - h, l, g, n)) / (2.0 * h);
            let analytic = mcp_derivative(t, l, g, n) * t.signum();
            assert!((fd - analytic).abs() < 1e-6, "t={t} fd={fd} an={analytic}");
        }
    }

    proptest! {
        #[test]
        fn soft_threshold_minimizes_prox_objective(z in -3.0f64..3.0, t in 0.0f64..2.0) {
            let x_star = soft_threshold(z, t);
            let f = |x: f64| 0.5 * (x - z).powi(2) + t * x.abs();
            let bound = 2.0 * z.abs();
            let steps = (2.0 * bound / 1e-4) as usize;
            let mut best = f(0.0);
            for i in 0..=steps {
                best = best.min(f(-bound + i as f64 * 1e-4));
            }
            prop_assert!(f(x_star) <= best + 1e-12);
        }
    }

    fn instance(seed: u64, n: usize, p: usize) -> (Dataset, CoefficientVector, CoefficientVector) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
        let y = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
        let beta = DVector::from_fn(p, |_, _| rng.random_range(-1.0..1.0));
        let beta0 = DVector::from_fn(p, |_, _| rng.random_range(-1.0..1.0));
        (
            Dataset::new(x, y).unwrap(),
            CoefficientVector::new(beta),
            CoefficientVector::new(beta0),
        )
    }

    #[test]
    fn sace_objective_term_by_term() {
        let (d, b, b0) = instance(11, 6, 4);
        let spec = PenaltySpec::sace(0.7, 0.4);
        let mut expect = 0.0;
        for i in 0..6 {
            let mut fit = 0.0;
            for j in 0..4 {
                fit += d.x()[(i, j)] * b.values()[j];
            }
            expect += 0.5 * (d.y()[i] - fit).powi(2);
        }
        for j in 0..4 {
            let bj = b.values()[j];
            expect += 0.5 * bj * bj + 0.7 * bj.abs() - 0.4 * b0.values()[j] * bj;
        }
        let got = sace_objective(&d, &b, &spec, &b0).unwrap();
        assert_abs_diff_eq!(got, expect, epsilon = 1e-12);

        let zero = CoefficientVector::zeros(4);
        assert_abs_diff_eq!(
            sace_objective(&d, &zero, &spec, &b0).unwrap(),
            0.5 * d.y().norm_squared(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn sace_objective_at_d0_is_naive_elastic_net_half_ridge() {
        let (d, b, b0) = instance(12, 5, 3);
        let sace = sace_objective(&d, &b, &PenaltySpec::sace(0.9, 0.0), &b0).unwrap();
        let en = penalized_objective(&d, &b, &PenaltySpec::elastic_net(0.9, 0.5), None).unwrap();
        assert_abs_diff_eq!(sace, en, epsilon = 1e-13);
    }

    #[test]
    fn gsace_objective_term_by_term_and_limit() {
        let (d, b, b0) = instance(13, 6, 4);
        let spec = PenaltySpec::gsace(0.6, 2.5, 0.3);
        let mut expect = 0.5 * (d.y() - d.x() * b.values()).norm_squared();
        for j in 0..4 {
            let bj = b.values()[j];
            expect += 0.5 * bj * bj + mcp_value(bj, 0.6, 2.5, 6) - 0.3 * b0.values()[j] * bj;
        }
        assert_abs_diff_eq!(gsace_objective(&d, &b, &spec, &b0).unwrap(), expect, epsilon = 1e-12);

        let zero = CoefficientVector::zeros(4);
        assert_abs_diff_eq!(
            gsace_objective(&d, &zero, &spec, &b0).unwrap(),
            0.5 * d.y().norm_squared(),
            epsilon = 1e-14
        );

        let gamma = 1e6;
        let g = gsace_objective(&d, &b, &PenaltySpec::gsace(0.6, gamma, 0.3), &b0).unwrap();
        let s = sace_objective(&d, &b, &PenaltySpec::sace(0.6, 0.3), &b0).unwrap();
        let bound: f64 = b.values().iter().map(|t| 6.0 * t * t / (2.0 * gamma)).sum();
        assert!(s - g >= -1e-12 && s - g <= bound + 1e-12);
    }

    #[test]
    fn objective_family_checked() {
        let (d, b, b0) = instance(14, 4, 2);
        assert!(sace_objective(&d, &b, &PenaltySpec::lasso(1.0), &b0).is_err());
        assert!(gsace_objective(&d, &b, &PenaltySpec::sace(1.0, 0.0), &b0).is_err());
        let short = CoefficientVector::zeros(3);
        assert!(matches!(
            sace_objective(&d, &short, &PenaltySpec::sace(1.0, 0.0), &b0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn sace_objective_midpoint_convex() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let (d, _, b0) = instance(15, 8, 5);
        let spec = PenaltySpec::sace(0.5, 0.8);
        for _ in 0..100 {
            let a = DVector::from_fn(5, |_, _| rng.random_range(-3.0..3.0));
            let b = DVector::from_fn(5, |_, _| rng.random_range(-3.0..3.0));
            let mid = CoefficientVector::new((&a + &b) * 0.5);
            let fa = sace_objective(&d, &CoefficientVector::new(a), &spec, &b0).unwrap();
            let fb = sace_objective(&d, &CoefficientVector::new(b), &spec, &b0).unwrap();
            let fm = sace_objective(&d, &mid, &spec, &b0).unwrap();
            assert!(fm <= 0.5 * (fa + fb) + 1e-10);
        }
    }

    #[test]
    fn adaptive_weight_cases() {
        let b0 = CoefficientVector::from_slice(&[0.5, -1.0, 0.0]);
        let w = adaptive_weights(&PenaltySpec::sace(2.0, 0.0), &b0, &[1, -1, 0]).unwrap();
        assert_eq!(w.values.as_slice(), &[2.0, 2.0, 2.0]);
        let w = adaptive_weights(&PenaltySpec::sace(2.0, 1.0), &CoefficientVector::zeros(3), &[1, 1, -1]).unwrap();
        assert_eq!(w.values.as_slice(), &[2.0, 2.0, 2.0]);
        let w = adaptive_weights(&PenaltySpec::sace(2.0, 1.0), &b0, &[1, 1, 0]).unwrap();
        assert_abs_diff_eq!(w.values[0], 1.5);
        assert_abs_diff_eq!(w.values[1], 3.0);
        assert!(adaptive_weights(&PenaltySpec::sace(2.0, 1.0), &b0, &[2, 0, 0]).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(matches!(PenaltySpec::sace(1.0, 1.5).validate(), Err(Error::BadD(_))));
        assert!(PenaltySpec::sace(-1.0, 0.5).validate().is_err());
        assert!(PenaltySpec::gsace(1.0, 3.0, 0.5).validate().is_ok());
    }
}
