//! Parameter-free stochastic convex optimization under local differential
//! privacy.
//!
//! [`banco::Banco`] combines a coin-betting magnitude learner
//! ([`magnitude`]) with a projected scale-free direction learner
//! ([`direction`]). Gradients are released through the mechanisms in
//! [`noise`] and every release is counted by [`ledger`]. [`baselines`] holds
//! the SGD references and [`problems`] the synthetic test risks.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod banco;
pub mod baselines;
pub mod direction;
pub mod error;
pub mod ledger;
pub mod magnitude;
pub mod noise;
pub mod optimizer;
pub mod problems;
pub mod quadrature;
pub mod special;
pub mod vecops;

pub use banco::{banco_run, regret_decomposition_check, Banco, BancoRun, Decomposition, RunConfig, Trace};
pub use baselines::{grid_tune, sgd_run, sgd_step, GridTuneResult, Sgd, SgdConfig, StepSchedule};
pub use direction::{direction_regret, DirectionState, StepSign};
pub use error::{Error, Result};
pub use ledger::{LedgerReport, PrivacyLedger, SharedLedger};
pub use magnitude::{betting_fraction_range, ln_magnitude, magnitude_closed_form, BettingState, SignedLog, K1};
pub use noise::{ldp_ratio_check, NoiseKind, NoiseModel, NoiseSampler};
pub use optimizer::{run_one_pass, GradientOracle, OnlineOptimizer, SanitizedGradient};
pub use problems::{sanitized_oracle, EvalSet, Problem, ProblemKind, ProblemSpec, RiskEstimate, SanitizedOracle};
