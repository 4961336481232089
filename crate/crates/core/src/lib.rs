//! Sparse linear regression with a reversed adaptive penalty.
//!
//! SACE minimizes `½‖y − Xβ‖² + ½‖β‖² + λ‖β‖₁ − d·β̂⁰ᵀβ` and GSACE swaps the
//! ℓ1 term for the minimax concave penalty. The crate also carries the
//! Lasso, naive Elastic Net and MCP baselines, oracle estimators,
//! cross-validation, a simulation laboratory and an index-tracking pipeline.

pub mod error;
pub mod model;
pub mod oracles;
pub mod penalties;
pub mod seeds;
pub mod simlab;
pub mod solvers;
pub mod tracker;
pub mod transform;
pub mod tuning;

pub use error::{Error, Result};
pub use model::{CoefficientVector, Dataset, StandardizationRecord, SupportSet};
pub use penalties::{PenaltyFamily, PenaltySpec};
pub use solvers::{FitResult, InitialEstimate, KktReport, Method, Solver, SolverOptions};
