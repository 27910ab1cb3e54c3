//! Decentralized trust-driven slope adaptation for pairwise separation constraints.

mod agent;
mod pairwise;
mod trust;
mod world;

pub use agent::{decentralized_agent_step, pair_trust, AgentStepOutcome, AgentStepSettings, EgoAgent};
pub use pairwise::{AgentKind, NeighborObservation, PairSplit, PairwiseBarrier};
pub use trust::{
    alpha_rate_from_trust, best_case_ego, combine_trust, neighbor_halfspace_and_margin, trust_branches, trust_scores, Halfspace,
    TrustParams, TrustScore,
};
pub use world::{run_multi_agent, AgentConfig, Behavior, MultiAgentConfig};
