//! Processes, policies, instances and the structural constructions between
//! them.

pub mod constructions;
pub mod distribution;
pub mod instances;
pub mod msp;
pub mod policy;

pub use constructions::{
    convert_cabinets_to_cms, convert_noi_to_cabinets, induced_bandit, min_first_advance_cost,
    tree_msp, InducedBandit, DEFAULT_TREE_BUDGET,
};
pub use distribution::DiscreteDistribution;
pub use instances::{
    Cabinet, CabinetsInstance, CmsInstance, NoiPandoraInstance, PandoraBox,
    PandoraCabinetsInstance, Scenario,
};
pub use msp::{Action, Msp, State, StateId, Violation};
pub use policy::{
    claim_probability, expected_performance, simulate_policy, simulate_with, Decision,
    StationaryPolicy, Terminal, Transcript,
};
