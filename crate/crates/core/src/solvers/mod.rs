//! Coordinate-descent fitters for the Lasso, the naive Elastic Net, MCP,
//! SACE and GSACE, with KKT and equicorrelation diagnostics.

mod cd;
mod kkt;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

pub use cd::SolverOptions;
pub use kkt::{explicit_solution_on_set, kkt_check, KktReport};

use crate::error::{Error, Result};
use crate::model::{CoefficientVector, Dataset, SupportSet};
use crate::penalties::{PenaltyFamily, PenaltySpec};
use cd::Engine;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    Lasso,
    ElasticNet,
    Mcp,
    Sace,
    Gsace,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Lasso,
        Method::ElasticNet,
        Method::Mcp,
        Method::Sace,
        Method::Gsace,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Lasso => "lasso",
            Method::ElasticNet => "en",
            Method::Mcp => "mcp",
            Method::Sace => "sace",
            Method::Gsace => "gsace",
        }
    }

    pub fn uses_d(self) -> bool {
        matches!(self, Method::Sace | Method::Gsace)
    }

    pub fn uses_gamma(self) -> bool {
        matches!(self, Method::Mcp | Method::Gsace)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lasso" => Ok(Method::Lasso),
            "en" | "elasticnet" | "elastic-net" => Ok(Method::ElasticNet),
            "mcp" => Ok(Method::Mcp),
            "sace" => Ok(Method::Sace),
            "gsace" => Ok(Method::Gsace),
            other => Err(Error::InvalidInput(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitSource {
    LassoSameLambda,
    McpSameSettings,
    UserSupplied,
}

/// Initial estimate β̂⁰ feeding the reversed penalty, with its support ξ⁰.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitialEstimate {
    pub beta0: CoefficientVector,
    pub source: InitSource,
    pub support0: SupportSet,
}

impl InitialEstimate {
    pub fn user(beta0: CoefficientVector) -> Self {
        let support0 = beta0.support();
        Self {
            beta0,
            source: InitSource::UserSupplied,
            support0,
        }
    }

    /// Lasso at the same λ; the default for SACE. A non-converged Lasso
    /// still yields its best iterate.
    pub fn lasso(data: &Dataset, lambda: f64, warm: Option<&CoefficientVector>) -> Result<Self> {
        Self::lasso_with(&Solver::default(), data, lambda, warm)
    }

    pub fn lasso_with(
        solver: &Solver,
        data: &Dataset,
        lambda: f64,
        warm: Option<&CoefficientVector>,
    ) -> Result<Self> {
        let fit = best_iterate(solver.lasso(data, lambda, warm))?;
        Ok(Self::from_fit(fit.beta, InitSource::LassoSameLambda))
    }

    /// MCP with the same (λ, γ); the default for GSACE.
    pub fn mcp(
        data: &Dataset,
        lambda: f64,
        gamma: f64,
        warm: Option<&CoefficientVector>,
    ) -> Result<Self> {
        Self::mcp_with(&Solver::default(), data, lambda, gamma, warm)
    }

    pub fn mcp_with(
        solver: &Solver,
        data: &Dataset,
        lambda: f64,
        gamma: f64,
        warm: Option<&CoefficientVector>,
    ) -> Result<Self> {
        let fit = best_iterate(solver.mcp(data, lambda, gamma, warm))?;
        Ok(Self::from_fit(fit.beta, InitSource::McpSameSettings))
    }

    fn from_fit(beta0: CoefficientVector, source: InitSource) -> Self {
        let support0 = beta0.support();
        Self {
            beta0,
            source,
            support0,
        }
    }
}

/// Unwraps `NoConvergence` into its best iterate.
pub fn best_iterate(res: Result<FitResult>) -> Result<FitResult> {
    match res {
        Err(Error::NoConvergence(fit)) => Ok(*fit),
        other => other,
    }
}

/// Outcome of one solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub beta: CoefficientVector,
    pub spec: PenaltySpec,
    pub method: Method,
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    pub kkt: KktReport,
    /// Objective after each sweep, when requested through [`SolverOptions`].
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
}

/// Coordinate-descent solver with fixed options.
#[derive(Debug, Clone, Copy, Default)]
pub struct Solver {
    pub options: SolverOptions,
}

impl Solver {
    pub fn new(options: SolverOptions) -> Self {
        Self { options }
    }

    /// Fits any supported estimator. `beta0` feeds the reversed penalty and
    /// is required when `spec.d > 0`.
    pub fn fit(
        &self,
        data: &Dataset,
        spec: PenaltySpec,
        method: Method,
        beta0: Option<&CoefficientVector>,
        warm: Option<&CoefficientVector>,
    ) -> Result<FitResult> {
        let p = data.p();
        for v in beta0.iter().chain(warm.iter()) {
            crate::model::check_len(p, v.len())?;
        }
        let linear = match beta0 {
            Some(b0) if spec.d != 0.0 => Some(b0.values() * spec.d),
            None if spec.d != 0.0 => {
                return Err(Error::InvalidInput(
                    "an initial estimate is required when d > 0".into(),
                ))
            }
            _ => None,
        };
        let engine = Engine::new(data.x(), data.y(), spec, linear.clone(), self.options)?;
        let mut out = engine.run(warm.map(|w| w.values()));
        let mut r = data.y() - data.x() * &out.beta;
        let mut objective = engine.objective(&out.beta, &r);
        if spec.family == PenaltyFamily::Mcp && self.options.restarts {
            let relaxed = PenaltySpec {
                family: PenaltyFamily::L1,
                gamma: None,
                ..spec
            };
            let relaxed = Engine::new(data.x(), data.y(), relaxed, linear, self.options)?
                .run(None)
                .beta;
            let mut starts = vec![relaxed];
            if warm.is_some() {
                starts.push(DVector::zeros(p));
            }
            for start in starts {
                let cand = engine.run(Some(&start));
                let cand_r = data.y() - data.x() * &cand.beta;
                let cand_obj = engine.objective(&cand.beta, &cand_r);
                let better = (cand.converged && !out.converged)
                    || (cand.converged == out.converged
                        && cand_obj < objective - 1e-12 * objective.abs().max(1.0));
                if better {
                    out = cand;
                    r = cand_r;
                    objective = cand_obj;
                }
            }
        }
        let correlations = engine.correlations(&out.beta, &r);
        let kkt = KktReport::from_correlations(&out.beta, correlations, &spec, data.n());
        let fit = FitResult {
            beta: CoefficientVector::new(out.beta),
            spec,
            method,
            iterations: out.iterations,
            converged: out.converged,
            objective,
            kkt,
            objective_trace: out.trace,
        };
        if fit.converged {
            Ok(fit)
        } else {
            Err(Error::NoConvergence(Box::new(fit)))
        }
    }

    pub fn lasso(
        &self,
        data: &Dataset,
        lambda: f64,
        warm: Option<&CoefficientVector>,
    ) -> Result<FitResult> {
        self.fit(data, PenaltySpec::lasso(lambda), Method::Lasso, None, warm)
    }

    /// Naive Elastic Net with penalty `λ₁‖β‖₁ + λ₂‖β‖²`.
    pub fn elastic_net(
        &self,
        data: &Dataset,
        lambda1: f64,
        lambda2: f64,
        warm: Option<&CoefficientVector>,
    ) -> Result<FitResult> {
        if !(lambda2 >= 0.0) {
            return Err(Error::InvalidInput(format!("lambda2 must be >= 0, got {lambda2}")));
        }
        self.fit(
            data,
            PenaltySpec::elastic_net(lambda1, lambda2),
            Method::ElasticNet,
            None,
            warm,
        )
    }

    pub fn mcp(
        &self,
        data: &Dataset,
        lambda: f64,
        gamma: f64,
        warm: Option<&CoefficientVector>,
    ) -> Result<FitResult> {
        if !(gamma > 1.0) {
            return Err(Error::BadGamma {
                gamma,
                curvature: f64::NAN,
            });
        }
        self.fit(data, PenaltySpec::mcp(lambda, gamma), Method::Mcp, None, warm)
    }

    pub fn sace(
        &self,
        data: &Dataset,
        lambda: f64,
        d: f64,
        init: &InitialEstimate,
        warm: Option<&CoefficientVector>,
    ) -> Result<FitResult> {
        if !(0.0..=1.0).contains(&d) {
            return Err(Error::BadD(d));
        }
        self.fit(
            data,
            PenaltySpec::sace(lambda, d),
            Method::Sace,
            Some(&init.beta0),
            warm,
        )
    }

    pub fn gsace(
        &self,
        data: &Dataset,
        lambda: f64,
        gamma: f64,
        d: f64,
        init: &InitialEstimate,
        warm: Option<&CoefficientVector>,
    ) -> Result<FitResult> {
        if !(0.0..=1.0).contains(&d) {
            return Err(Error::BadD(d));
        }
        let n = data.n() as f64;
        let curvature = n + 1.0 - n / gamma;
        if !(gamma > 0.0) || !(curvature > 0.0) {
            return Err(Error::BadGamma { gamma, curvature });
        }
        self.fit(
            data,
            PenaltySpec::gsace(lambda, gamma, d),
            Method::Gsace,
            Some(&init.beta0),
            warm,
        )
    }
}

pub fn fit_lasso(data: &Dataset, lambda: f64, warm: Option<&CoefficientVector>) -> Result<FitResult> {
    Solver::default().lasso(data, lambda, warm)
}

pub fn fit_elastic_net(
    data: &Dataset,
    lambda1: f64,
    lambda2: f64,
    warm: Option<&CoefficientVector>,
) -> Result<FitResult> {
    Solver::default().elastic_net(data, lambda1, lambda2, warm)
}

pub fn fit_mcp(
    data: &Dataset,
    lambda: f64,
    gamma: f64,
    warm: Option<&CoefficientVector>,
) -> Result<FitResult> {
    Solver::default().mcp(data, lambda, gamma, warm)
}

pub fn fit_sace(
    data: &Dataset,
    lambda: f64,
    d: f64,
    init: &InitialEstimate,
    warm: Option<&CoefficientVector>,
) -> Result<FitResult> {
    Solver::default().sace(data, lambda, d, init, warm)
}

pub fn fit_gsace(
    data: &Dataset,
    lambda: f64,
    gamma: f64,
    d: f64,
    init: &InitialEstimate,
    warm: Option<&CoefficientVector>,
) -> Result<FitResult> {
    Solver::default().gsace(data, lambda, gamma, d, init, warm)
}

/// Hyperparameters of one estimator, as searched by cross-validation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub lambda: f64,
    pub d: f64,
    pub gamma: f64,
    pub lambda2: f64,
}

impl Hyper {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            d: 0.0,
            gamma: 3.0,
            lambda2: 0.0,
        }
    }
}

/// Fits `method` at `h`, computing the default initial estimate (Lasso at
/// the same λ for SACE, MCP at the same (λ, γ) for GSACE) when none is
/// supplied. Returns the fit and the initial estimate that was used.
pub fn fit_method(
    solver: &Solver,
    data: &Dataset,
    method: Method,
    h: &Hyper,
    init: Option<&InitialEstimate>,
    warm: Option<&CoefficientVector>,
) -> Result<(FitResult, Option<InitialEstimate>)> {
    match method {
        Method::Lasso => Ok((solver.lasso(data, h.lambda, warm)?, None)),
        Method::ElasticNet => Ok((solver.elastic_net(data, h.lambda, h.lambda2, warm)?, None)),
        Method::Mcp => Ok((solver.mcp(data, h.lambda, h.gamma, warm)?, None)),
        Method::Sace => {
            let init = match init {
                Some(i) => i.clone(),
                None => InitialEstimate::lasso_with(solver, data, h.lambda, None)?,
            };
            let fit = solver.sace(data, h.lambda, h.d, &init, warm);
            wrap_with_init(fit, init)
        }
        Method::Gsace => {
            let init = match init {
                Some(i) => i.clone(),
                None => InitialEstimate::mcp_with(solver, data, h.lambda, h.gamma, None)?,
            };
            let fit = solver.gsace(data, h.lambda, h.gamma, h.d, &init, warm);
            wrap_with_init(fit, init)
        }
    }
}

fn wrap_with_init(
    fit: Result<FitResult>,
    init: InitialEstimate,
) -> Result<(FitResult, Option<InitialEstimate>)> {
    fit.map(|f| (f, Some(init)))
}
