//! Domain types: outcomes, costs, profiles, contracts and Luce specs.

pub mod classify;
pub mod contract;
pub mod cost;
pub mod luce_spec;
pub mod profile;
pub mod subset;

pub use classify::{classify, Classification, DEFAULT_CLASSIFY_TOL};
pub use contract::Contract;
pub use cost::{CostFn, CostModel};
pub use luce_spec::LuceSpec;
pub use profile::Profile;
pub use subset::{all_subsets, outcome_prob, outcome_table, prob_hits, Subset, MAX_AGENTS};
