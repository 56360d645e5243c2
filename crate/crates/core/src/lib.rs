//! Stochastic budgeted multi-round submodular maximization.
//!
//! A policy spends a single budget of `B` item selections over `T` independent
//! rounds. In each round the environment draws a hidden state; selecting an item
//! reveals its local state, and the round objective is a monotone function of the
//! selected set and the hidden state.
//!
//! The crate provides:
//!
//! * [`env`]: instances, partial states, exact conditioning and live rounds;
//!   [`probing`] and [`influence`] are the two concrete instance families.
//! * [`exact`]: the optimal fully adaptive policy by backward induction over
//!   (round, budget) with a per-round game-tree solver.
//! * [`oracle`] and [`greedy`]: Monte-Carlo increment oracles and the greedy
//!   partially adaptive policy (budget allocation followed by adaptive greedy).
//! * [`harness`]: independent brute-force oracles, rollout estimation, property
//!   checkers and the constructive worst-case instances.
//!
//! Rounds are indexed from 0 in the API; serialized policies, traces and reports
//! use 1-based rounds.

pub mod env;
pub mod error;
pub mod exact;
pub mod greedy;
pub mod harness;
pub mod influence;
pub mod io;
pub mod oracle;
pub mod par;
pub mod probing;
pub mod rng;
pub mod stats;

pub use env::{Instance, InstanceHeader, Item, LiveRound, LocalState, ModelKind, PartialState};
pub use error::{Error, Result};
