//! Auction world model.
//!
//! A seller `s` owns one item. Each agent knows a private valuation and a set
//! of neighbors; a report is either a bid plus a relayed neighbor subset, or
//! absence. The spreading graph wires `s` to its own neighbors and every
//! Present agent to the neighbors she reported; only agents reachable from
//! `s` take part. The two counterfactuals (full removal vs. keeping the bid
//! while relaying nothing) are the primitives every mechanism here is built
//! from.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use crate::money::Money;
use crate::Error;

/// Opaque agent name. Ordering is lexicographic and is the tie-break order
/// used everywhere a deterministic choice among agents is needed.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AgentId(String);

impl AgentId {
    pub fn new(id: impl Into<String>) -> Self {
        AgentId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl From<&str> for AgentId {
    fn from(s: &str) -> Self {
        AgentId::new(s)
    }
}

/// Ground truth for one agent: her valuation and who she could tell.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Agent {
    pub valuation: Money,
    pub neighbors: BTreeSet<AgentId>,
}

/// Ground truth for one auction: the seller's neighbors and every agent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub seller_neighbors: BTreeSet<AgentId>,
    pub agents: BTreeMap<AgentId, Agent>,
}

impl Instance {
    pub fn new(
        seller_neighbors: impl IntoIterator<Item = AgentId>,
        agents: impl IntoIterator<Item = (AgentId, Agent)>,
    ) -> Self {
        let instance = Instance {
            seller_neighbors: seller_neighbors.into_iter().collect(),
            agents: agents.into_iter().collect(),
        };
        instance.validate().expect("malformed instance");
        instance
    }

    /// Structural soundness: referenced ids are declared, nobody lists
    /// herself, valuations are non-negative. The parser establishes these by
    /// dropping or rejecting offending input; programmatic construction must
    /// arrive clean.
    pub fn validate(&self) -> Result<(), String> {
        for id in &self.seller_neighbors {
            if !self.agents.contains_key(id) {
                return Err(format!("seller neighbor {id} is not a declared agent"));
            }
        }
        for (id, agent) in &self.agents {
            if agent.valuation.is_negative() {
                return Err(format!("agent {id} has a negative valuation"));
            }
            for n in &agent.neighbors {
                if n == id {
                    return Err(format!("agent {id} lists herself as a neighbor"));
                }
                if !self.agents.contains_key(n) {
                    return Err(format!("agent {id} lists undeclared neighbor {n}"));
                }
            }
        }
        Ok(())
    }

    pub fn agent(&self, id: &AgentId) -> Result<&Agent, Error> {
        self.agents.get(id).ok_or_else(|| Error::UnknownAgent(id.clone()))
    }
}

/// What one agent tells the mechanism: a bid and a relayed neighbor subset,
/// or nothing at all. An Absent agent neither bids nor spreads information,
/// but can still be reached (she heard about the sale and ignored it).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Report {
    Absent,
    Present {
        bid: Money,
        neighbors: BTreeSet<AgentId>,
    },
}

impl Report {
    pub fn truthful(agent: &Agent) -> Report {
        Report::Present {
            bid: agent.valuation.clone(),
            neighbors: agent.neighbors.clone(),
        }
    }

    pub fn is_present(&self) -> bool {
        matches!(self, Report::Present { .. })
    }

    pub fn bid(&self) -> Option<&Money> {
        match self {
            Report::Absent => None,
            Report::Present { bid, .. } => Some(bid),
        }
    }

    pub fn neighbors(&self) -> Option<&BTreeSet<AgentId>> {
        match self {
            Report::Absent => None,
            Report::Present { neighbors, .. } => Some(neighbors),
        }
    }
}

/// How a counterfactual treats the singled-out agent.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CounterfactualMode {
    /// The agent is erased: no bid, no edges.
    Removed,
    /// The agent keeps her bid but relays to nobody.
    Detached,
}

/// One report per declared agent, against a fixed instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GlobalProfile {
    instance: Arc<Instance>,
    reports: BTreeMap<AgentId, Report>,
}

/// Spreading graph restricted to activated nodes, with BFS distances from
/// the seller. The seller itself is implicit (distance 0).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpreadingGraph {
    pub seller_edges: BTreeSet<AgentId>,
    pub edges: BTreeMap<AgentId, BTreeSet<AgentId>>,
    pub distance: BTreeMap<AgentId, u32>,
}

impl GlobalProfile {
    /// Everyone reports her true valuation and full neighbor set.
    pub fn truthful(instance: Arc<Instance>) -> GlobalProfile {
        let reports = instance
            .agents
            .iter()
            .map(|(id, agent)| (id.clone(), Report::truthful(agent)))
            .collect();
        GlobalProfile { instance, reports }
    }

    pub fn from_reports(
        instance: Arc<Instance>,
        reports: BTreeMap<AgentId, Report>,
    ) -> Result<GlobalProfile, Error> {
        for id in reports.keys() {
            if !instance.agents.contains_key(id) {
                return Err(Error::UnknownAgent(id.clone()));
            }
        }
        let mut profile = GlobalProfile::truthful(instance);
        for (id, report) in reports {
            profile.set_report(&id, report)?;
        }
        Ok(profile)
    }

    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    pub fn instance_arc(&self) -> Arc<Instance> {
        Arc::clone(&self.instance)
    }

    pub fn report(&self, id: &AgentId) -> Result<&Report, Error> {
        self.reports.get(id).ok_or_else(|| Error::UnknownAgent(id.clone()))
    }

    pub fn reports(&self) -> &BTreeMap<AgentId, Report> {
        &self.reports
    }

    fn set_report(&mut self, id: &AgentId, report: Report) -> Result<(), Error> {
        if !self.instance.agents.contains_key(id) {
            return Err(Error::UnknownAgent(id.clone()));
        }
        if let Report::Present { neighbors, .. } = &report {
            for n in neighbors {
                if n == id || !self.instance.agents.contains_key(n) {
                    return Err(Error::UnknownAgent(n.clone()));
                }
            }
        }
        self.reports.insert(id.clone(), report);
        Ok(())
    }

    /// A copy with one report replaced. Rejects undeclared agents and
    /// neighbor entries naming the reporter or an undeclared id.
    pub fn with_report(&self, id: &AgentId, report: Report) -> Result<GlobalProfile, Error> {
        let mut next = self.clone();
        next.set_report(id, report)?;
        Ok(next)
    }

    /// Agents reachable from the seller. Absent agents propagate nothing but
    /// are themselves reachable through edges pointing at them.
    pub fn activated(&self) -> BTreeSet<AgentId> {
        let mut seen: BTreeSet<AgentId> = BTreeSet::new();
        let mut queue: VecDeque<&AgentId> = VecDeque::new();
        for id in &self.instance.seller_neighbors {
            if seen.insert(id.clone()) {
                queue.push_back(id);
            }
        }
        while let Some(id) = queue.pop_front() {
            if let Some(Report::Present { neighbors, .. }) = self.reports.get(id) {
                for n in neighbors {
                    if seen.insert(n.clone()) {
                        queue.push_back(n);
                    }
                }
            }
        }
        seen
    }

    /// Activated agents that actually bid: the set every price in this crate
    /// is computed over.
    pub fn activated_bidders(&self) -> BTreeSet<AgentId> {
        self.activated()
            .into_iter()
            .filter(|id| self.reports[id].is_present())
            .collect()
    }

    /// Spreading graph restricted to activated nodes, plus BFS distances.
    pub fn spreading_graph(&self) -> SpreadingGraph {
        let mut distance: BTreeMap<AgentId, u32> = BTreeMap::new();
        let mut edges: BTreeMap<AgentId, BTreeSet<AgentId>> = BTreeMap::new();
        let mut queue: VecDeque<(AgentId, u32)> = VecDeque::new();
        for id in &self.instance.seller_neighbors {
            if !distance.contains_key(id) {
                distance.insert(id.clone(), 1);
                queue.push_back((id.clone(), 1));
            }
        }
        while let Some((id, d)) = queue.pop_front() {
            if let Some(Report::Present { neighbors, .. }) = self.reports.get(&id) {
                for n in neighbors {
                    if !distance.contains_key(n) {
                        distance.insert(n.clone(), d + 1);
                        queue.push_back((n.clone(), d + 1));
                    }
                }
                edges.insert(id.clone(), neighbors.clone());
            }
        }
        SpreadingGraph {
            seller_edges: self.instance.seller_neighbors.clone(),
            edges,
            distance,
        }
    }

    /// Same profile with every unactivated agent's report forced to Absent.
    /// Idempotent; activation is unchanged because unactivated agents never
    /// contribute edges in the first place.
    pub fn trimmed(&self) -> GlobalProfile {
        let activated = self.activated();
        let reports = self
            .reports
            .iter()
            .map(|(id, report)| {
                let kept = if activated.contains(id) {
                    report.clone()
                } else {
                    Report::Absent
                };
                (id.clone(), kept)
            })
            .collect();
        GlobalProfile {
            instance: Arc::clone(&self.instance),
            reports,
        }
    }

    pub fn is_trimmed(&self) -> bool {
        let activated = self.activated();
        self.reports
            .iter()
            .all(|(id, report)| activated.contains(id) || !report.is_present())
    }

    /// H: the highest bid among activated bidders, zero when nobody bids.
    /// The zero default keeps counterfactuals on empty markets well-defined.
    pub fn highest_bid(&self) -> Money {
        self.activated_bidders()
            .into_iter()
            .map(|id| self.reports[&id].bid().unwrap().clone())
            .max()
            .unwrap_or_else(Money::zero)
    }

    /// The activated bidder with the highest bid, smallest id on ties.
    pub fn highest_bidder(&self) -> Result<AgentId, Error> {
        let mut best: Option<(&AgentId, &Money)> = None;
        let bidders = self.activated_bidders();
        for id in &bidders {
            let bid = self.reports[id].bid().unwrap();
            // Ids iterate in ascending order, so strict improvement keeps the
            // smallest id among equal bids.
            if best.map_or(true, |(_, top)| bid > top) {
                best = Some((id, bid));
            }
        }
        best.map(|(id, _)| id.clone()).ok_or(Error::NoActivatedBidder)
    }

    /// Like `highest_bidder`, but refuses ties outright.
    pub fn unique_highest_bidder(&self) -> Result<AgentId, Error> {
        let h = self.highest_bid();
        let bidders = self.activated_bidders();
        let mut at_top = bidders
            .iter()
            .filter(|id| self.reports[*id].bid().unwrap() == &h);
        match (at_top.next(), at_top.next()) {
            (None, _) => Err(Error::NoActivatedBidder),
            (Some(_), Some(_)) => Err(Error::AmbiguousHighestBidder),
            (Some(id), None) => Ok(id.clone()),
        }
    }

    /// The profile with agent `i`'s influence altered, then trimmed.
    /// Removed erases her report; Detached keeps her bid (when she has one)
    /// and drops her relayed edges. Never activates anyone new.
    pub fn counterfactual(
        &self,
        id: &AgentId,
        mode: CounterfactualMode,
    ) -> Result<GlobalProfile, Error> {
        let current = self.report(id)?;
        let replacement = match (mode, current) {
            (CounterfactualMode::Removed, _) => Report::Absent,
            (CounterfactualMode::Detached, Report::Absent) => Report::Absent,
            (CounterfactualMode::Detached, Report::Present { bid, .. }) => Report::Present {
                bid: bid.clone(),
                neighbors: BTreeSet::new(),
            },
        };
        Ok(self.with_report(id, replacement)?.trimmed())
    }
}
