//! Cyclic coordinate descent shared by every estimator.
//!
//! One engine minimizes
//! `½‖y − Xβ‖² + ½·w‖β‖² + Σ pen(β_j) − lᵀβ`
//! where `w` is the ridge weight and `l = d·β̂⁰` the reversed-penalty term.
//! Sweeps alternate between the full coordinate set and the current active
//! set; once the active set settles, the stationarity system restricted to
//! it is solved directly and accepted only if it is sign- and
//! region-consistent and does not raise the objective.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::penalties::{soft_threshold, PenaltyFamily, PenaltySpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Stop once a full sweep moves no coefficient by more than this.
    pub tol: f64,
    /// Sweep budget (full and active-set sweeps both count).
    pub max_iter: usize,
    /// Required KKT accuracy before a fit is reported as converged.
    pub kkt_tol: f64,
    /// Record the objective after every sweep.
    pub record_trace: bool,
    /// For concave penalties, also start from zero and from the ℓ1
    /// relaxation's solution and keep the lowest objective.
    pub restarts: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 10_000,
            kkt_tol: 1e-6,
            record_trace: false,
            restarts: true,
        }
    }
}

enum Step {
    Stuck,
    /// Reached the active-set solution.
    Full,
    /// Stopped where a coefficient hit zero.
    Partial,
}

pub(crate) struct Outcome {
    pub beta: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<f64>,
}

pub(crate) struct Engine<'a> {
    x: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
    n: usize,
    col_sq: Vec<f64>,
    spec: PenaltySpec,
    linear: Option<DVector<f64>>,
    opts: SolverOptions,
}

impl<'a> Engine<'a> {
    pub fn new(
        x: &'a DMatrix<f64>,
        y: &'a DVector<f64>,
        spec: PenaltySpec,
        linear: Option<DVector<f64>>,
        opts: SolverOptions,
    ) -> Result<Self> {
        spec.validate()?;
        let col_sq: Vec<f64> = x.column_iter().map(|c| c.norm_squared()).collect();
        let n = x.nrows();
        if let (PenaltyFamily::Mcp, Some(gamma)) = (spec.family, spec.gamma) {
            let worst = col_sq.iter().cloned().fold(f64::INFINITY, f64::min);
            let curvature = worst + spec.ridge_weight - n as f64 / gamma;
            if !(curvature > 0.0) {
                return Err(Error::BadGamma { gamma, curvature });
            }
        }
        Ok(Self {
            x,
            y,
            n,
            col_sq,
            spec,
            linear,
            opts,
        })
    }

    #[inline]
    fn lin(&self, j: usize) -> f64 {
        self.linear.as_ref().map_or(0.0, |l| l[j])
    }

    /// Exact minimizer of the one-dimensional subproblem
    /// `½·a·b² − z·b + pen(b)` with `a = ‖X_j‖² + w`.
    #[inline]
    fn update(&self, j: usize, z: f64) -> f64 {
        let a = self.col_sq[j] + self.spec.ridge_weight;
        if a <= 0.0 {
            return 0.0;
        }
        let lambda = self.spec.lambda;
        // |z| exceeding λ by rounding alone (as at λ = λ_max) stays at zero.
        if z.abs() <= lambda * (1.0 + 1e-12) {
            return 0.0;
        }
        match self.spec.family {
            PenaltyFamily::L1 => soft_threshold(z, lambda) / a,
            PenaltyFamily::Mcp => {
                let gamma = self.spec.gamma.unwrap_or(f64::INFINITY);
                let n = self.n as f64;
                let candidate = soft_threshold(z, lambda) / (a - n / gamma);
                if candidate.abs() <= gamma * lambda / n {
                    candidate
                } else {
                    z / a
                }
            }
        }
    }

    fn sweep(
        &self,
        coords: impl Iterator<Item = usize>,
        beta: &mut DVector<f64>,
        r: &mut DVector<f64>,
    ) -> f64 {
        let mut max_change = 0.0f64;
        for j in coords {
            let xj = self.x.column(j);
            let old = beta[j];
            let z = xj.dot(r) + self.col_sq[j] * old + self.lin(j);
            let new = self.update(j, z);
            if new != old {
                r.axpy(old - new, &xj, 1.0);
                beta[j] = new;
                max_change = max_change.max((new - old).abs());
            }
        }
        max_change
    }

    pub fn objective(&self, beta: &DVector<f64>, r: &DVector<f64>) -> f64 {
        let mut obj = 0.5 * r.norm_squared() + 0.5 * self.spec.ridge_weight * beta.norm_squared();
        for (j, b) in beta.iter().enumerate() {
            if *b != 0.0 {
                obj += self.spec.value(*b, self.n) - self.lin(j) * b;
            }
        }
        obj
    }

    /// Generalized correlations `c = Xᵀr − w·β + l`.
    pub fn correlations(&self, beta: &DVector<f64>, r: &DVector<f64>) -> DVector<f64> {
        let mut c = self.x.transpose() * r;
        c.axpy(-self.spec.ridge_weight, beta, 1.0);
        if let Some(l) = &self.linear {
            c += l;
        }
        c
    }

    /// Largest deviation from the stationarity conditions.
    pub fn violation(&self, beta: &DVector<f64>, c: &DVector<f64>) -> f64 {
        beta.iter()
            .zip(c.iter())
            .map(|(b, cj)| {
                if *b != 0.0 {
                    (cj - self.spec.derivative(*b, self.n) * b.signum()).abs()
                } else {
                    (cj.abs() - self.spec.lambda).max(0.0)
                }
            })
            .fold(0.0, f64::max)
    }

    /// Solves the stationarity system on the active set, dropping blocking
    /// coordinates and re-solving in the convex case. Returns whether the
    /// iterate moved.
    fn polish(&self, beta: &mut DVector<f64>, r: &mut DVector<f64>) -> bool {
        let mut moved = false;
        for _ in 0..=beta.len() {
            match self.polish_step(beta, r) {
                Step::Stuck => break,
                Step::Full => return true,
                Step::Partial => moved = true,
            }
        }
        moved
    }

    fn polish_step(&self, beta: &mut DVector<f64>, r: &mut DVector<f64>) -> Step {
        let active: Vec<usize> = (0..beta.len()).filter(|j| beta[*j] != 0.0).collect();
        if active.is_empty() {
            return Step::Stuck;
        }
        let k = active.len();
        let xa = self.x.select_columns(&active);
        let mut gram = xa.transpose() * &xa;
        let mut rhs = xa.transpose() * self.y;
        let lambda = self.spec.lambda;
        let n = self.n as f64;
        let (gamma, kink) = match (self.spec.family, self.spec.gamma) {
            (PenaltyFamily::Mcp, Some(g)) => (g, g * lambda / n),
            _ => (f64::INFINITY, f64::INFINITY),
        };
        let mut concave = vec![false; k];
        for (i, &j) in active.iter().enumerate() {
            let s = beta[j].signum();
            gram[(i, i)] += self.spec.ridge_weight;
            rhs[i] += self.lin(j);
            let in_concave_region = beta[j].abs() < kink;
            concave[i] = in_concave_region;
            if in_concave_region {
                rhs[i] -= lambda * s;
                if gamma.is_finite() {
                    gram[(i, i)] -= n / gamma;
                }
            }
        }
        let mut partial = false;
        let Some(mut sol) = gram.lu().solve(&rhs) else {
            return Step::Stuck;
        };
        if sol.iter().any(|v| !v.is_finite()) {
            return Step::Stuck;
        }
        if !kink.is_finite() {
            // Convex case: the objective restricted to the current sign
            // pattern is a quadratic, so stepping toward its minimizer and
            // stopping where the first coefficient reaches zero cannot
            // increase it.
            let mut t = 1.0f64;
            partial = false;
            for (i, &j) in active.iter().enumerate() {
                let (b, v) = (beta[j], sol[i]);
                if v.signum() != b.signum() || v == 0.0 {
                    t = t.min(b / (b - v));
                }
            }
            if t < 1.0 {
                partial = true;
                for (i, &j) in active.iter().enumerate() {
                    let (b, v) = (beta[j], sol[i]);
                    let moved = b + t * (v - b);
                    let crosses = v.signum() != b.signum() || v == 0.0;
                    sol[i] = if crosses && b / (b - v) <= t { 0.0 } else { moved };
                }
            }
        } else {
            for (i, &j) in active.iter().enumerate() {
                let v = sol[i];
                if v.signum() != beta[j].signum() || v == 0.0 {
                    return Step::Stuck;
                }
                let ok = if concave[i] { v.abs() <= kink } else { v.abs() >= kink };
                if !ok {
                    return Step::Stuck;
                }
            }
        }
        let mut candidate = beta.clone();
        for (i, &j) in active.iter().enumerate() {
            candidate[j] = sol[i];
        }
        let new_r = self.y - &xa * &sol;
        let before = self.objective(beta, r);
        let after = self.objective(&candidate, &new_r);
        if after > before + 1e-12 * before.abs().max(1.0) {
            return Step::Stuck;
        }
        *beta = candidate;
        *r = new_r;
        if partial {
            Step::Partial
        } else {
            Step::Full
        }
    }

    pub fn run(&self, warm: Option<&DVector<f64>>) -> Outcome {
        let p = self.x.ncols();
        let mut beta = warm.cloned().unwrap_or_else(|| DVector::zeros(p));
        let mut r = self.y - self.x * &beta;
        let mut iterations = 0;
        let mut converged = false;
        let mut trace = Vec::new();
        let record = |beta: &DVector<f64>, r: &DVector<f64>, trace: &mut Vec<f64>| {
            if self.opts.record_trace {
                trace.push(self.objective(beta, r));
            }
        };
        record(&beta, &r, &mut trace);

        while iterations < self.opts.max_iter {
            let change = self.sweep(0..p, &mut beta, &mut r);
            iterations += 1;
            record(&beta, &r, &mut trace);
            if change <= self.opts.tol {
                // Refresh the residual so rounding drift cannot mask a violation.
                r = self.y - self.x * &beta;
                let c = self.correlations(&beta, &r);
                if self.violation(&beta, &c) <= self.opts.kkt_tol {
                    converged = true;
                    break;
                }
                if self.polish(&mut beta, &mut r) {
                    record(&beta, &r, &mut trace);
                }
                continue;
            }
            let active: Vec<usize> = (0..p).filter(|j| beta[*j] != 0.0).collect();
            let mut since_polish = 0;
            while iterations < self.opts.max_iter {
                let change = self.sweep(active.iter().copied(), &mut beta, &mut r);
                iterations += 1;
                since_polish += 1;
                record(&beta, &r, &mut trace);
                if change <= self.opts.tol {
                    if self.polish(&mut beta, &mut r) {
                        record(&beta, &r, &mut trace);
                    }
                    break;
                }
                if since_polish >= 25 {
                    since_polish = 0;
                    if self.polish(&mut beta, &mut r) {
                        record(&beta, &r, &mut trace);
                        break;
                    }
                }
            }
        }
        Outcome {
            beta,
            iterations,
            converged,
            trace,
        }
    }
}
