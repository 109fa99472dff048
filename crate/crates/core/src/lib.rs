//! Inference for test-negative studies with added controls.
//!
//! Three exposure comparisons are formed from aggregate counts: (i)
//! test-positives vs test-negatives, (ii) test-positives vs controls and
//! (iii) all tested individuals vs controls. This crate provides
//!
//! * exact tests for the three 2×2 tables ([`exact_tests`], [`study_model`]),
//! * the Bonferroni baseline and two gatekeeping procedures that control the
//!   familywise error rate across all three comparisons ([`procedures`]),
//! * confidence sets for attributable effects by test inversion
//!   ([`confidence`]),
//! * a reproducible Monte Carlo engine for error rates, p-value dependence
//!   and power ([`simulation`]).

pub mod confidence;
pub mod error;
pub mod procedures;
pub mod simulation;
pub mod study_model;

pub use error::{Error, Result};
pub use exact_tests::TwoByTwoTable;
pub use procedures::{DecisionSet, Level, Method2Variant, Procedure};
pub use study_model::{NetEffectCounts, PValueSet, StudyCounts};
