//! Diffusion auction mechanisms and property audits.
//!
//! A seller offers a single item on a social network: agents hear about the
//! sale only if someone already informed invites them, so every report is a
//! bid *and* a choice of which neighbors to tell. This crate implements six
//! single-item mechanisms over that model (network VCG, PVCG, IVCG,
//! delta-IVCG, IDM and single-unit DAN-MU) with exact rational arithmetic,
//! plus an audit harness that exhaustively checks individual rationality,
//! incentive compatibility, budget balance, efficiency and false-name
//! proofness over bounded instance families and produces replayable
//! counterexamples when a property fails.
//!
//! Layering:
//! * [`money`], [`model`]: exact arithmetic and the world model.
//! * [`rewards`]: the two marginal-contribution quantities (`rwd`, `prwd`)
//!   and the critical/interruption structure derived from them.
//! * [`mechanisms`]: the six mechanisms, all pure functions of a profile.
//! * [`audit`]: bounded-exhaustive property checking with witness replay.
//! * [`format`], [`cli`]: instance JSON and the command-line front end.

pub mod audit;
pub mod cli;
pub mod format;
pub mod mechanisms;
pub mod model;
pub mod money;
pub mod rewards;

use model::AgentId;
use money::Money;

/// Domain errors shared across modules. Parse errors live in [`format`].
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("unknown agent {0}")]
    UnknownAgent(AgentId),
    #[error("no activated agent placed a bid")]
    NoActivatedBidder,
    #[error("agent {0} is not critical")]
    NotCritical(AgentId),
    #[error("the highest bid is shared by more than one activated agent")]
    AmbiguousHighestBidder,
    #[error("delta must be positive, got {0}")]
    InvalidDelta(Money),
    #[error("malformed false-name attack: {0}")]
    MalformedAttack(String),
    #[error("unsupported audit family: {0}")]
    UnsupportedFamily(String),
}

#[cfg(test)]
pub(crate) mod testutil {
    //! Small worked instances shared by unit tests across modules.

    use std::collections::BTreeSet;
    use std::sync::Arc;

    use crate::model::{Agent, AgentId, GlobalProfile, Instance};
    use crate::money::Money;

    pub fn agent(valuation: i64, neighbors: &[&str]) -> Agent {
        Agent {
            valuation: Money::from_int(valuation),
            neighbors: neighbors.iter().copied().map(AgentId::new).collect(),
        }
    }

    /// Two-link chain: seller -> a(0) -> b(1).
    pub fn e1() -> Instance {
        Instance::new(
            [AgentId::new("a")],
            [
                (AgentId::new("a"), agent(0, &["b"])),
                (AgentId::new("b"), agent(1, &[])),
            ],
        )
    }

    /// Two-link chain with a profitable relay: seller -> a(10) -> b(100).
    pub fn f3() -> Instance {
        Instance::new(
            [AgentId::new("a")],
            [
                (AgentId::new("a"), agent(10, &["b"])),
                (AgentId::new("b"), agent(100, &[])),
            ],
        )
    }

    /// Small tree: seller -> {a(1), b(1)}, a -> {c(4), d(2)}.
    pub fn t2() -> Instance {
        Instance::new(
            [AgentId::new("a"), AgentId::new("b")],
            [
                (AgentId::new("a"), agent(1, &["c", "d"])),
                (AgentId::new("b"), agent(1, &[])),
                (AgentId::new("c"), agent(4, &[])),
                (AgentId::new("d"), agent(2, &[])),
            ],
        )
    }

    /// Deeper chain with a side branch:
    /// seller -> j1(4) -> {x(7), a(20)}, a -> j2(100) -> b(30).
    pub fn w() -> Instance {
        Instance::new(
            [AgentId::new("j1")],
            [
                (AgentId::new("j1"), agent(4, &["x", "a"])),
                (AgentId::new("x"), agent(7, &[])),
                (AgentId::new("a"), agent(20, &["j2"])),
                (AgentId::new("j2"), agent(100, &["b"])),
                (AgentId::new("b"), agent(30, &[])),
            ],
        )
    }

    pub fn profile_of(instance: Instance) -> GlobalProfile {
        GlobalProfile::truthful(Arc::new(instance))
    }

    pub fn two_seller_adjacent(bid_p: i64, bid_q: i64) -> GlobalProfile {
        profile_of(Instance::new(
            [AgentId::new("p"), AgentId::new("q")],
            [
                (AgentId::new("p"), agent(bid_p, &[])),
                (AgentId::new("q"), agent(bid_q, &[])),
            ],
        ))
    }

    pub fn ids(names: &[&str]) -> BTreeSet<AgentId> {
        names.iter().copied().map(AgentId::new).collect()
    }
}
