//! Site-graph rewriting with static and dynamic causal analysis: DPO rules,
//! influence detection, trace causality, poset abstraction/concretization,
//! and a first-order logic over event posets.

pub mod catops;
pub mod concretize;
pub mod causality;
pub mod frontend;
pub mod influence;
pub mod logic;
pub mod morphism;
pub mod poset;
pub mod rewrite;
pub mod sitegraph;
