//! Marginal-contribution rewards and the critical-agent structure.
//!
//! Two counterfactual drops measure each agent's influence on the sale:
//!
//! * `rwd(i)  = H(a') - H(a'(-[i]))`: how much the top bid falls when `i`
//!   is erased outright (bid and relayed edges).
//! * `prwd(i) = H(a'(-(i))) - H(a'(-[i]))`: the part of that drop `i`
//!   causes just by showing up, i.e. keeping her bid while relaying nothing.
//!
//! `rwd(i) > 0` makes `i` *critical*: the top bid cannot be reached without
//! her. `prwd(i) > 0` makes her an *interruption* agent: she could lower the
//! surviving top bid below her own by cutting her edges, which is exactly
//! the leverage that lets an agent profit from strategic silence. Every
//! interruption agent is critical, critical agents sit on a single chain
//! toward the top bidder, and the interruption agent closest to the seller
//! is called the *leading agent*.

use std::collections::BTreeMap;

use crate::model::{AgentId, CounterfactualMode, GlobalProfile};
use crate::money::Money;
use crate::Error;

/// Per-agent diagnostics for one profile: what `explain` prints and what the
/// chain mechanisms consume.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RewardRow {
    /// Reported bid; `None` for an activated agent who stayed absent.
    pub bid: Option<Money>,
    /// BFS distance from the seller in the spreading graph.
    pub distance: u32,
    pub rwd: Money,
    pub prwd: Money,
    pub critical: bool,
    pub interruption: bool,
}

/// Diagnostics for every activated agent, plus the leading agent if any.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RewardTable {
    pub highest_bid: Money,
    pub rows: BTreeMap<AgentId, RewardRow>,
    pub leading: Option<AgentId>,
}

impl RewardTable {
    pub fn critical_agents(&self) -> impl Iterator<Item = &AgentId> {
        self.rows.iter().filter(|(_, r)| r.critical).map(|(id, _)| id)
    }

    pub fn interruption_agents(&self) -> impl Iterator<Item = &AgentId> {
        self.rows
            .iter()
            .filter(|(_, r)| r.interruption)
            .map(|(id, _)| id)
    }
}

/// `rwd(i)`: the drop in the highest bid when `i` is removed.
pub fn reward(profile: &GlobalProfile, id: &AgentId) -> Result<Money, Error> {
    let removed = profile.counterfactual(id, CounterfactualMode::Removed)?;
    Ok(profile.highest_bid() - removed.highest_bid())
}

/// `prwd(i)`: the part of `rwd(i)` due to `i`'s own presence, measured by
/// letting her keep the bid but relay nothing.
pub fn participation_reward(profile: &GlobalProfile, id: &AgentId) -> Result<Money, Error> {
    let removed = profile.counterfactual(id, CounterfactualMode::Removed)?;
    let detached = profile.counterfactual(id, CounterfactualMode::Detached)?;
    Ok(detached.highest_bid() - removed.highest_bid())
}

/// Builds the full table for a profile with at least one activated bidder.
pub fn reward_table(profile: &GlobalProfile) -> Result<RewardTable, Error> {
    let graph = profile.spreading_graph();
    if profile.activated_bidders().is_empty() {
        return Err(Error::NoActivatedBidder);
    }
    let h = profile.highest_bid();
    let mut rows = BTreeMap::new();
    for (id, distance) in &graph.distance {
        let removed = profile.counterfactual(id, CounterfactualMode::Removed)?;
        let detached = profile.counterfactual(id, CounterfactualMode::Detached)?;
        let h_removed = removed.highest_bid();
        let h_detached = detached.highest_bid();
        let rwd = &h - &h_removed;
        let prwd = &h_detached - &h_removed;
        rows.insert(
            id.clone(),
            RewardRow {
                bid: profile.report(id)?.bid().cloned(),
                distance: *distance,
                critical: !rwd.is_zero(),
                interruption: !prwd.is_zero(),
                rwd,
                prwd,
            },
        );
    }
    let leading = leading_agent(&rows);
    Ok(RewardTable {
        highest_bid: h,
        rows,
        leading,
    })
}

/// The interruption agent closest to the seller. Interruption agents always
/// lie on one seller-to-top-bidder chain, so distances never tie; a tie here
/// would mean the reward computation itself is broken.
fn leading_agent(rows: &BTreeMap<AgentId, RewardRow>) -> Option<AgentId> {
    let mut best: Option<(&AgentId, u32)> = None;
    for (id, row) in rows {
        if !row.interruption {
            continue;
        }
        match best {
            None => best = Some((id, row.distance)),
            Some((_, d)) => {
                assert_ne!(
                    row.distance, d,
                    "two interruption agents share distance {d}; impossible on a valid profile"
                );
                if row.distance < d {
                    best = Some((id, row.distance));
                }
            }
        }
    }
    best.map(|(id, _)| id.clone())
}

/// True iff removing critical agent `i` deactivates critical agent `j`.
/// Both endpoints must be critical; the relation is what orders the chain.
pub fn is_critical_ancestor(
    profile: &GlobalProfile,
    i: &AgentId,
    j: &AgentId,
) -> Result<bool, Error> {
    for agent in [i, j] {
        if reward(profile, agent)?.is_zero() {
            return Err(Error::NotCritical(agent.clone()));
        }
    }
    if i == j {
        return Ok(false);
    }
    let removed = profile.counterfactual(i, CounterfactualMode::Removed)?;
    Ok(!removed.activated().contains(j))
}

/// All critical agents ordered by increasing distance from the seller,
/// ending at the unique top bidder. Requires an untied top bid. The target
/// appears even in the degenerate case where she is the sole bidder at 0
/// and technically not critical.
pub fn critical_sequence(
    profile: &GlobalProfile,
    target: &AgentId,
) -> Result<Vec<AgentId>, Error> {
    let top = profile.unique_highest_bidder()?;
    assert_eq!(
        &top, target,
        "critical_sequence target must be the unique highest bidder"
    );
    let table = reward_table(profile)?;
    let mut critical: Vec<(u32, AgentId)> = table
        .rows
        .iter()
        .filter(|(_, row)| row.critical)
        .map(|(id, row)| (row.distance, id.clone()))
        .collect();
    if !critical.iter().any(|(_, id)| id == target) {
        critical.push((table.rows[target].distance, target.clone()));
    }
    critical.sort();
    for pair in critical.windows(2) {
        assert_ne!(
            pair[0].0, pair[1].0,
            "critical agents share a distance; impossible with a unique top bid"
        );
    }
    let sequence: Vec<AgentId> = critical.into_iter().map(|(_, id)| id).collect();
    assert_eq!(
        sequence.last(),
        Some(target),
        "the unique top bidder must close the critical sequence"
    );
    Ok(sequence)
}
