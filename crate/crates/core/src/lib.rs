#![allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail these guards

//! Density estimation with Tsallis entropy bias correction.
//!
//! The expected Tsallis entropy (`q = 2`) of a size-`n` sampling distribution
//! falls short of the entropy of the distribution it was drawn from by a
//! closed-form amount. The crate turns that shortfall into estimators:
//!
//! - [`teb`]: frequentist, bootstrap and uniform-prior Bayesian bias
//!   estimates, plus the Shannon (Miller) correction used for comparison;
//! - [`solver`]: a log-barrier interior-point engine for convex programs on
//!   the simplex with linear equalities, boxes and an entropy floor;
//! - [`maxent`]: builders for the bias-compensating Maxent models, their
//!   Shannon counterparts and standard Maxent;
//! - [`smoothing`]: Lidstone estimators with a bias-matched correction rate,
//!   and Good-Turing baselines;
//! - [`eval`], [`harness`]: criteria, performance scores, data synthesis and
//!   the benchmark driver;
//! - [`validate`]: enumeration and Monte Carlo checks of the closed forms.

pub mod error;
pub mod eval;
pub mod harness;
pub mod maxent;
pub mod prob;
pub mod rng;
pub mod smoothing;
pub mod solver;
pub mod teb;
pub mod validate;

pub use error::{Error, Result};
pub use prob::{
    js_divergence, kl_divergence, shannon_entropy, tsallis_entropy, CountSample, Distribution,
};
pub use teb::{BiasEstimate, BiasKind, BootstrapConfig};
pub use eval::{Criterion, PsMode, ScoreRow, ScoreTable};
pub use harness::{BenchmarkReport, ExperimentConfig, MaxentMethod, SourceSpec, Track};
pub use maxent::{BoxSpec, CertainConstraint, MaxentVariant};
pub use smoothing::SmoothingMethod;
pub use solver::{
    ConvexProgram, EntropyKind, Objective, SolveReport, SolveStatus, SolverConfig,
};
pub use validate::ValidationReport;
