//! Analysis of linear path models with a designated unmeasured confounder.
//!
//! Given a recursive linear structural equation model and a role assignment
//! (exposure, mediator, outcome, covariates, unmeasured set), this crate
//! determines which causal effect estimates are biased and which are not,
//! quantifies the bias exactly from the model-implied covariance matrix,
//! reproduces it by seeded simulation, and applies sensitivity-analysis
//! corrections that shift estimates and confidence intervals by a
//! user-specified bias factor.
//!
//! Module map:
//! - [`model`]: path-model types, validation, topological order, position
//!   classification.
//! - [`dsl`]: the line-oriented text format and its canonical serializer.
//! - [`graph`]: d-separation, backdoor and single-door criteria, the bias
//!   classifier, and the confounder-placement grid.
//! - [`covariance`]: implied covariance, population regression, partial
//!   correlation — the analytic oracle.
//! - [`estimation`]: datasets, CSV, and per-equation least squares.
//! - [`effects`]: total/direct/indirect effects with intervals.
//! - [`sensitivity`]: bias factors, corrections, explain-away solving, and
//!   sweep verdicts.
//! - [`simulation`]: seeded data generation and fitting experiments.
//! - [`scenarios`]: the canonical confounding scenario models.

pub mod covariance;
pub mod dsl;
pub mod effects;
pub mod estimation;
pub mod graph;
pub mod model;
pub mod scenarios;
pub mod sensitivity;
pub mod simulation;

pub use covariance::{implied_covariance, partial_correlation, population_regression};
pub use effects::{EffectEstimate, EffectKind, EffectTriple};
pub use graph::{backdoor_open, biased_edges, classify_bias, d_connected, edge_identified};
pub use model::{Edge, PathModel, RoleAssignment, Variable};
pub use sensitivity::{bias_factor, correct, explain_away, sweep, Scenario, SensitivityParams};
