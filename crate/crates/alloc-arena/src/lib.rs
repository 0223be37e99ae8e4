//! Simulation framework and policy library for allocating a fixed budget of
//! test units across configuration types whose failure probabilities drift
//! over time.
//!
//! The crate models a pre-production testing loop: at each step a policy
//! splits `N` test units over `C` configuration types, observes binomially
//! distributed failure signals, and adapts. Four policies are provided —
//! a one-shot static baseline, a rolling Lagrangian re-optimizer, a tabular
//! Q-learning agent with hybrid simulated/observed rewards, and an oracle
//! with access to the true probabilities — together with an experiment
//! harness that runs replicated simulations under common random numbers and
//! compares strategies with a Wilcoxon signed-rank test.

pub mod agent;
pub mod cli;
pub mod config;
pub mod coverage;
pub mod env;
pub mod error;
pub mod estimation;
pub mod harness;
pub mod lagrangian;
pub mod plot;
pub mod rng;
pub mod stats;
pub mod strategy;

pub use error::{ArenaError, Result};
