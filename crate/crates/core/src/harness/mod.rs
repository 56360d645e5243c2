//! Verification harness: independent oracles, rollout estimation, property
//! checks and constructive instances.

pub mod brute;
pub mod checks;
pub mod constructions;
pub mod estimate;
pub mod gap;
pub mod generate;
pub mod rounding;
pub mod usage;

pub use brute::{brute_force_opt, BruteGuards};
pub use constructions::{
    concentrated_round_instance, cross_round_restricted_greedy, decoy_round_instance, uniform_budget,
};
pub use estimate::{estimate_policy_value, CiMethod, ValueEstimate};
pub use gap::{gap_instance, gap_report, GapReport};
pub use rounding::round_fractional_budget;
pub use usage::policy_round_usage;
