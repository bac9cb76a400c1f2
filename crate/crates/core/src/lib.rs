//! Portfolio optimization for a large investor who sways market sentiment.
//!
//! The market regime is a finite-state Markov chain whose transition
//! intensities depend on the investor's position; the risky asset is a
//! pure-jump process whose jump intensities depend on the regime. This
//! crate solves the resulting stochastic control problem for logarithmic
//! and power utility, under full observation of the regime and under
//! partial information (price observations only), and validates the
//! solutions by Monte Carlo simulation of the controlled system.
//!
//! Module map:
//! - [`model`]: market/impact/utility parameters, controlled generator,
//!   jump compensator, wealth arithmetic.
//! - [`filter`]: regime-probability filter: deterministic drift between
//!   price jumps, Bayes update at each jump.
//! - [`full_info`]: observed-regime solvers: closed-form/root-found
//!   log strategies and backward-swept ODE systems with impact.
//! - [`partial_info`]: explicit upwind finite-difference solver for the
//!   two-state belief PIDE, plus fixed-strategy evaluation.
//! - [`simulate`]: exact event simulation of the controlled system by
//!   thinning; Monte Carlo value estimation.
//! - [`experiments`]: the end-to-end study emitting figure-ready CSV.
//! - [`config`]: JSON configuration, validation, policy specs.

pub mod config;
pub mod error;
pub mod experiments;
pub mod filter;
pub mod full_info;
pub mod model;
pub mod opt;
pub mod output;
pub mod partial_info;
pub mod simulate;

pub use error::Error;
pub use model::{DiscreteCompensator, ImpactPair, JumpAtom, ModelParams, Utility};
