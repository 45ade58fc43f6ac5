//! Bounded-exhaustive mechanism audits.
//!
//! A family pairs every seller-rooted network with up to `max_agents`
//! non-seller agents (one representative per relabeling class) with every
//! integer bid vector capped at `bid_max`. Audits scan a family in one fixed
//! order, so the first counterexample found is stable across runs and can be
//! replayed without the scanning engine. Every witness is re-run through the
//! exact rational mechanisms before it is reported; a disagreement panics,
//! because it means the integer engine and the reference implementation no
//! longer compute the same auction.

pub mod engine;
pub mod falsename;
pub mod family;
pub mod sweeps;

use std::fmt;
use std::ops::ControlFlow;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};

pub use self::falsename::AttackModel;

use self::engine::{
    bit, evaluate, evaluate_with, iter_bits, quantities, FastMechanism, FastProfile, FastRun,
    GraphView, Mask, Quantities, MAX_N,
};
use self::falsename::{coalition_mask, extended_profile, lift_attack, submasks, wirings};
use self::family::{
    enumerate_shapes, for_each_instance, instance_count, lift_instance, mask_ids, node_id,
    MAX_FAMILY_AGENTS,
};
use crate::mechanisms::{self, Mechanism};
use crate::model::{AgentId, GlobalProfile, Report};
use crate::money::Money;
use crate::Error;

/// One auditable property of a mechanism.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Property {
    /// The item goes to an activated agent with a highest valuation.
    Efficiency,
    /// No truthful activated agent ends up with negative utility.
    IndividualRationality,
    /// No single agent profits from any misreport, bid or relay set.
    IncentiveCompatibility,
    /// No single agent profits from a misreport that never overbids.
    WeakIncentiveCompatibility,
    /// The seller never pays out more than she collects.
    WeakBudgetBalance,
    /// No agent profits from splitting into fake identities.
    FalseNameProofness(AttackModel),
}

impl Property {
    pub const ALL: [Property; 8] = [
        Property::Efficiency,
        Property::IndividualRationality,
        Property::IncentiveCompatibility,
        Property::WeakIncentiveCompatibility,
        Property::WeakBudgetBalance,
        Property::FalseNameProofness(AttackModel::Replica),
        Property::FalseNameProofness(AttackModel::Chain),
        Property::FalseNameProofness(AttackModel::General),
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Property::Efficiency => "efficiency",
            Property::IndividualRationality => "ir",
            Property::IncentiveCompatibility => "ic",
            Property::WeakIncentiveCompatibility => "wic",
            Property::WeakBudgetBalance => "wbb",
            Property::FalseNameProofness(AttackModel::Replica) => "fnp-replica",
            Property::FalseNameProofness(AttackModel::Chain) => "fnp-chain",
            Property::FalseNameProofness(AttackModel::General) => "fnp-general",
        }
    }

    pub fn parse(name: &str) -> Option<Property> {
        Property::ALL.iter().copied().find(|p| p.name() == name)
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Outcome of one audited cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VerdictStatus {
    /// The family was exhausted without finding a counterexample.
    Holds,
    /// A counterexample was found; the verdict carries its witness.
    Fails,
    /// The instance budget ran out before the family did.
    Inconclusive,
}

impl VerdictStatus {
    pub fn name(&self) -> &'static str {
        match self {
            VerdictStatus::Holds => "holds",
            VerdictStatus::Fails => "fails",
            VerdictStatus::Inconclusive => "inconclusive",
        }
    }
}

impl fmt::Display for VerdictStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Largest bid cap a family may use.
pub const MAX_FAMILY_BID: u32 = 16;

/// An audit family: every network with at most `max_agents` agents besides
/// the seller, crossed with every bid vector drawn from `0..=bid_max`, one
/// instance per relabeling class.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FamilySpec {
    pub max_agents: u8,
    pub bid_max: u32,
}

impl FamilySpec {
    pub fn new(max_agents: u8, bid_max: u32) -> Result<FamilySpec, Error> {
        let spec = FamilySpec { max_agents, bid_max };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.max_agents == 0
            || self.max_agents > MAX_FAMILY_AGENTS
            || self.bid_max == 0
            || self.bid_max > MAX_FAMILY_BID
        {
            return Err(Error::UnsupportedFamily(format!(
                "families cover 1..={MAX_FAMILY_AGENTS} agents and bid caps 1..={MAX_FAMILY_BID}, \
                 got {} agents with bids to {}",
                self.max_agents, self.bid_max
            )));
        }
        Ok(())
    }

    /// Number of instances in the family.
    pub fn size(&self) -> u64 {
        instance_count(&enumerate_shapes(self.max_agents), self.bid_max)
    }
}

impl fmt::Display for FamilySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} agents, bids 0..={})", self.max_agents, self.bid_max)
    }
}

/// Result of auditing one property of one mechanism over a family.
#[derive(Clone, Debug)]
pub struct PropertyVerdict {
    pub mechanism: Mechanism,
    pub property: Property,
    pub family: FamilySpec,
    /// Total number of instances in the family.
    pub family_size: u64,
    pub status: VerdictStatus,
    /// Instances examined, always a prefix of the canonical order.
    pub instances_checked: u64,
    /// Dishonest profiles evaluated. Profiles that spread the item
    /// identically to an earlier one are evaluated once.
    pub deviations_checked: u64,
    /// Instances skipped because the mechanism could not score the truthful
    /// profile (a top-bid tie it cannot break).
    pub skipped_instances: u64,
    /// Dishonest profiles skipped for the same reason.
    pub skipped_deviations: u64,
    pub witness: Option<Witness>,
}

/// Replayable counterexample. `honest` is the truthful profile of the
/// violating instance; the detail pins down the violation and, where one
/// exists, the dishonest profile that realizes it.
#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub mechanism: Mechanism,
    pub property: Property,
    pub family: FamilySpec,
    pub instance_index: u64,
    pub honest: GlobalProfile,
    pub detail: WitnessDetail,
}

#[derive(Clone, Debug, PartialEq)]
pub enum WitnessDetail {
    NegativeUtility {
        agent: AgentId,
        utility: Money,
    },
    NegativeRevenue {
        revenue: Money,
    },
    Inefficient {
        winner: AgentId,
        winner_value: Money,
        best: AgentId,
        best_value: Money,
    },
    ProfitableDeviation {
        agent: AgentId,
        deviant: GlobalProfile,
        honest_utility: Money,
        deviant_utility: Money,
    },
    ProfitableSplit {
        agent: AgentId,
        replicas: Vec<AgentId>,
        attacked: GlobalProfile,
        honest_utility: Money,
        coalition_utility: Money,
    },
}

impl Witness {
    /// Re-run the exact rational mechanism over the stored profiles and
    /// confirm the recorded violation field by field.
    pub fn verify(&self) -> Result<(), String> {
        let run = |profile: &GlobalProfile| {
            mechanisms::run(&self.mechanism, profile).map_err(|e| e.to_string())
        };
        match &self.detail {
            WitnessDetail::NegativeUtility { agent, utility } => {
                if !utility.is_negative() {
                    return Err("recorded utility is not negative".into());
                }
                let outcome = run(&self.honest)?;
                let instance = self.honest.instance();
                let valuation = &instance.agent(agent).map_err(|e| e.to_string())?.valuation;
                let actual = outcome.utility(agent, valuation);
                if actual != *utility {
                    return Err(format!(
                        "agent {agent} has utility {actual}, witness recorded {utility}"
                    ));
                }
                Ok(())
            }
            WitnessDetail::NegativeRevenue { revenue } => {
                if !revenue.is_negative() {
                    return Err("recorded revenue is not negative".into());
                }
                let actual = run(&self.honest)?.revenue();
                if actual != *revenue {
                    return Err(format!(
                        "revenue is {actual}, witness recorded {revenue}"
                    ));
                }
                Ok(())
            }
            WitnessDetail::Inefficient {
                winner,
                winner_value,
                best,
                best_value,
            } => {
                let outcome = run(&self.honest)?;
                if outcome.winner != *winner {
                    return Err(format!(
                        "the item goes to {}, witness recorded {winner}",
                        outcome.winner
                    ));
                }
                let instance = self.honest.instance();
                let err = |e: Error| e.to_string();
                if instance.agent(winner).map_err(err)?.valuation != *winner_value {
                    return Err("winner valuation does not match the instance".into());
                }
                if instance.agent(best).map_err(err)?.valuation != *best_value {
                    return Err("best valuation does not match the instance".into());
                }
                for id in self.honest.activated_bidders() {
                    if instance.agent(&id).map_err(err)?.valuation > *best_value {
                        return Err(format!("agent {id} outvalues the recorded best"));
                    }
                }
                if winner_value >= best_value {
                    return Err("the winner already holds a top valuation".into());
                }
                Ok(())
            }
            WitnessDetail::ProfitableDeviation {
                agent,
                deviant,
                honest_utility,
                deviant_utility,
            } => {
                if deviant_utility <= honest_utility {
                    return Err("recorded deviation does not profit".into());
                }
                if deviant.instance() != self.honest.instance() {
                    return Err("deviant profile changes the underlying instance".into());
                }
                for (id, report) in deviant.reports() {
                    if id != agent && self.honest.report(id).map_err(|e| e.to_string())? != report
                    {
                        return Err(format!("report of {id} changed, only {agent} may deviate"));
                    }
                }
                let instance = self.honest.instance();
                let valuation = &instance.agent(agent).map_err(|e| e.to_string())?.valuation;
                if run(&self.honest)?.utility(agent, valuation) != *honest_utility {
                    return Err("honest utility does not replay".into());
                }
                let actual = match mechanisms::run(&self.mechanism, deviant) {
                    Ok(outcome) => outcome.utility(agent, valuation),
                    Err(Error::NoActivatedBidder) => Money::zero(),
                    Err(e) => return Err(e.to_string()),
                };
                if actual != *deviant_utility {
                    return Err(format!(
                        "deviation yields {actual}, witness recorded {deviant_utility}"
                    ));
                }
                Ok(())
            }
            WitnessDetail::ProfitableSplit {
                agent,
                replicas,
                attacked,
                honest_utility,
                coalition_utility,
            } => {
                if coalition_utility <= honest_utility {
                    return Err("recorded split does not profit".into());
                }
                if replicas.is_empty() {
                    return Err("a split needs at least one fake identity".into());
                }
                let instance = self.honest.instance();
                for replica in replicas {
                    if instance.agent(replica).is_ok() {
                        return Err(format!("replica {replica} collides with a real agent"));
                    }
                    attacked
                        .instance()
                        .agent(replica)
                        .map_err(|e| e.to_string())?;
                }
                let valuation = &instance.agent(agent).map_err(|e| e.to_string())?.valuation;
                if run(&self.honest)?.utility(agent, valuation) != *honest_utility {
                    return Err("honest utility does not replay".into());
                }
                let outcome = run(attacked)?;
                let coalition_wins =
                    outcome.winner == *agent || replicas.contains(&outcome.winner);
                let mut actual = if coalition_wins {
                    valuation.clone()
                } else {
                    Money::zero()
                };
                actual -= &outcome.payment(agent);
                for replica in replicas {
                    actual -= &outcome.payment(replica);
                }
                if actual != *coalition_utility {
                    return Err(format!(
                        "split yields {actual}, witness recorded {coalition_utility}"
                    ));
                }
                Ok(())
            }
        }
    }
}

/// Common denominator for the integer engine. Bids are integers, deviation
/// grids take midpoints, and gap mechanisms shift bids by delta, so twice
/// the least common multiple of 2 and every delta denominator keeps every
/// probed value an even integer with exact midpoints.
fn scale_for(mechs: &[Mechanism]) -> Result<i64, Error> {
    let mut lcm: i64 = 2;
    for mech in mechs {
        if let Mechanism::DeltaIvcg { delta } = mech {
            if delta.is_zero() || delta.is_negative() {
                return Err(Error::InvalidDelta(delta.clone()));
            }
            let den = delta.denom().to_i64().filter(|d| *d <= 1_000_000);
            let num = delta.numer().to_i64().filter(|n| n.abs() <= 1_000_000_000);
            let (Some(den), Some(_)) = (den, num) else {
                return Err(Error::UnsupportedFamily(format!(
                    "delta {delta} is too fine for the integer audit engine"
                )));
            };
            lcm = lcm.lcm(&den);
            if lcm > 2_000_000 {
                return Err(Error::UnsupportedFamily(
                    "combined delta denominators exceed the audit engine's range".into(),
                ));
            }
        }
    }
    Ok(lcm * 2)
}

/// `m` in grid units. Callers pick the scale so this always divides evenly.
fn money_scaled(m: &Money, scale: i64) -> i64 {
    let scaled = m.numer() * BigInt::from(scale);
    let (q, r) = scaled.div_rem(m.denom());
    assert!(r.is_zero(), "scale {scale} does not clear the denominator of {m}");
    q.to_i64().expect("scaled money fits in 64 bits")
}

fn money_from_scaled(value: i64, scale: i64) -> Money {
    Money::from_ratio(value, scale)
}

fn fast_mech(mech: &Mechanism, scale: i64) -> FastMechanism {
    match mech {
        Mechanism::Vcg => FastMechanism::Vcg,
        Mechanism::Pvcg => FastMechanism::Pvcg,
        Mechanism::Ivcg => FastMechanism::Ivcg,
        Mechanism::DeltaIvcg { delta } => FastMechanism::DeltaIvcg {
            delta: money_scaled(delta, scale),
        },
        Mechanism::Idm => FastMechanism::Idm,
        Mechanism::DanMu => FastMechanism::DanMu,
    }
}

fn lift_truthful(p: &FastProfile, scale: i64) -> GlobalProfile {
    GlobalProfile::truthful(Arc::new(lift_instance(p, scale)))
}

/// Deviation bids worth probing against a fixed set of standing bids: the
/// bids themselves, the midpoint of every adjacent pair, zero, and one unit
/// past the maximum. An agent's utility is piecewise affine in her own bid
/// with breakpoints only at standing bids, so whenever any bid beats her
/// truthful utility some grid point does.
pub fn bid_grid(bids: &[Money]) -> Vec<Money> {
    let mut sorted = bids.to_vec();
    sorted.sort();
    sorted.dedup();
    let mut out = sorted.clone();
    for pair in sorted.windows(2) {
        out.push(pair[0].midpoint(&pair[1]));
    }
    out.push(Money::zero());
    if let Some(max) = sorted.last() {
        out.push(max.clone() + Money::from_int(1));
    }
    out.sort();
    out.dedup();
    out
}

/// Integer-engine deviation grid. With `delta`, every bid shifted by the gap
/// parameter joins the breakpoints before midpoints are taken: the gap test
/// compares removal maxima against a bid plus delta, so utility can also
/// change regime at shifted bids.
fn scaled_grid(bids: &[i64], scale: i64, delta: Option<i64>) -> Vec<i64> {
    let mut base = bids.to_vec();
    base.sort_unstable();
    base.dedup();
    if let Some(d) = delta {
        for i in 0..base.len() {
            let b = base[i];
            base.push(b + d);
            if b - d > 0 {
                base.push(b - d);
            }
        }
        base.sort_unstable();
        base.dedup();
    }
    let mut out = base.clone();
    for pair in base.windows(2) {
        debug_assert!((pair[0] + pair[1]) % 2 == 0, "grid values must share parity");
        out.push((pair[0] + pair[1]) / 2);
    }
    out.push(0);
    out.push(base.last().copied().unwrap_or(0) + scale);
    out.sort_unstable();
    out.dedup();
    out
}

/// Mechanisms sharing one deviation grid: all non-gap mechanisms together,
/// plus one group per distinct gap parameter.
struct ScanGroup {
    slots: Vec<usize>,
    fasts: Vec<FastMechanism>,
    delta: Option<i64>,
}

fn scan_groups(mechs: &[Mechanism], scale: i64) -> Vec<ScanGroup> {
    let mut groups: Vec<ScanGroup> = Vec::new();
    for (slot, mech) in mechs.iter().enumerate() {
        let fast = fast_mech(mech, scale);
        let delta = match fast {
            FastMechanism::DeltaIvcg { delta } => Some(delta),
            _ => None,
        };
        if let Some(group) = groups.iter_mut().find(|g| g.delta == delta) {
            group.slots.push(slot);
            group.fasts.push(fast);
        } else {
            groups.push(ScanGroup {
                slots: vec![slot],
                fasts: vec![fast],
                delta,
            });
        }
    }
    groups
}

#[derive(Default)]
struct CellState {
    failed_at: Option<u64>,
    witness: Option<Witness>,
    deviations: u64,
    skipped_instances: u64,
    skipped_deviations: u64,
}

impl CellState {
    fn live(&self) -> bool {
        self.failed_at.is_none()
    }

    fn fail(&mut self, index: u64, witness: Witness) {
        if let Err(e) = witness.verify() {
            panic!("audit witness failed exact replay at instance {index}: {e}");
        }
        self.failed_at = Some(index);
        self.witness = Some(witness);
    }

    fn finish(
        self,
        mechanism: &Mechanism,
        property: Property,
        family: FamilySpec,
        family_size: u64,
        visited: u64,
        exhausted: bool,
    ) -> PropertyVerdict {
        let (status, instances_checked) = match self.failed_at {
            Some(at) => (VerdictStatus::Fails, at + 1),
            None if exhausted => (VerdictStatus::Holds, visited),
            None => (VerdictStatus::Inconclusive, visited),
        };
        PropertyVerdict {
            mechanism: mechanism.clone(),
            property,
            family,
            family_size,
            status,
            instances_checked,
            deviations_checked: self.deviations,
            skipped_instances: self.skipped_instances,
            skipped_deviations: self.skipped_deviations,
            witness: self.witness,
        }
    }
}

fn honest_utilities(
    groups: &[ScanGroup],
    count: usize,
    p: &FastProfile,
    view: &GraphView,
    q: &Quantities,
    out: &mut Vec<Option<[i64; MAX_N]>>,
) {
    out.clear();
    out.resize(count, None);
    for group in groups {
        for (fast, &slot) in group.fasts.iter().zip(&group.slots) {
            out[slot] = match evaluate_with(*fast, p, view, q) {
                FastRun::Ambiguous => None,
                FastRun::NoBidders => unreachable!("family instances always have a bidder"),
                FastRun::Outcome(o) => {
                    let mut u = [0i64; MAX_N];
                    for i in iter_bits(o.bidders) {
                        u[i] = o.utility(i, p.bid[i]);
                    }
                    Some(u)
                }
            };
        }
    }
}

/// Audit the allocation-level properties, one family pass for all the given
/// mechanisms. Each row comes back as efficiency, individual rationality,
/// weak budget balance.
pub fn scan_outcome_cells(
    mechs: &[Mechanism],
    family: FamilySpec,
    budget: Option<u64>,
) -> Result<Vec<[PropertyVerdict; 3]>, Error> {
    family.validate()?;
    let scale = scale_for(mechs)?;
    let fasts: Vec<FastMechanism> = mechs.iter().map(|m| fast_mech(m, scale)).collect();
    let shapes = enumerate_shapes(family.max_agents);
    let family_size = instance_count(&shapes, family.bid_max);
    let mut cells: Vec<[CellState; 3]> = mechs.iter().map(|_| Default::default()).collect();
    let mut view: Option<GraphView> = None;
    let (visited, exhausted) =
        for_each_instance(&shapes, family.bid_max, scale, budget, |idx, _, fresh, p| {
            if cells.iter().all(|row| row.iter().all(|c| !c.live())) {
                return ControlFlow::Break(());
            }
            if fresh {
                view = Some(GraphView::build(p));
            }
            let v = view.as_ref().unwrap();
            let q = quantities(p, v).expect("family instances always have a bidder");
            for (slot, fast) in fasts.iter().enumerate() {
                if cells[slot].iter().all(|c| !c.live()) {
                    continue;
                }
                match evaluate_with(*fast, p, v, &q) {
                    FastRun::NoBidders => unreachable!("family instances always have a bidder"),
                    FastRun::Ambiguous => {
                        for cell in cells[slot].iter_mut().filter(|c| c.live()) {
                            cell.skipped_instances += 1;
                        }
                    }
                    FastRun::Outcome(o) => {
                        if cells[slot][0].live() && p.bid[o.winner] != q.h {
                            let witness = Witness {
                                mechanism: mechs[slot].clone(),
                                property: Property::Efficiency,
                                family,
                                instance_index: idx,
                                honest: lift_truthful(p, scale),
                                detail: WitnessDetail::Inefficient {
                                    winner: node_id(o.winner),
                                    winner_value: money_from_scaled(p.bid[o.winner], scale),
                                    best: node_id(q.top),
                                    best_value: money_from_scaled(q.h, scale),
                                },
                            };
                            cells[slot][0].fail(idx, witness);
                        }
                        if cells[slot][1].live() {
                            for i in iter_bits(o.bidders) {
                                let u = o.utility(i, p.bid[i]);
                                if u < 0 {
                                    let witness = Witness {
                                        mechanism: mechs[slot].clone(),
                                        property: Property::IndividualRationality,
                                        family,
                                        instance_index: idx,
                                        honest: lift_truthful(p, scale),
                                        detail: WitnessDetail::NegativeUtility {
                                            agent: node_id(i),
                                            utility: money_from_scaled(u, scale),
                                        },
                                    };
                                    cells[slot][1].fail(idx, witness);
                                    break;
                                }
                            }
                        }
                        if cells[slot][2].live() {
                            let revenue = o.revenue();
                            if revenue < 0 {
                                let witness = Witness {
                                    mechanism: mechs[slot].clone(),
                                    property: Property::WeakBudgetBalance,
                                    family,
                                    instance_index: idx,
                                    honest: lift_truthful(p, scale),
                                    detail: WitnessDetail::NegativeRevenue {
                                        revenue: money_from_scaled(revenue, scale),
                                    },
                                };
                                cells[slot][2].fail(idx, witness);
                            }
                        }
                    }
                }
            }
            ControlFlow::Continue(())
        });
    Ok(cells
        .into_iter()
        .zip(mechs)
        .map(|(row, mech)| {
            let [eff, ir, wbb] = row;
            [
                eff.finish(mech, Property::Efficiency, family, family_size, visited, exhausted),
                ir.finish(
                    mech,
                    Property::IndividualRationality,
                    family,
                    family_size,
                    visited,
                    exhausted,
                ),
                wbb.finish(
                    mech,
                    Property::WeakBudgetBalance,
                    family,
                    family_size,
                    visited,
                    exhausted,
                ),
            ]
        })
        .collect())
}

struct DevCand {
    key: (usize, usize),
    bid: i64,
    subset: Mask,
    absent: bool,
    utility: i64,
}

/// Audit truthfulness, one family pass for all the given mechanisms. Each
/// row comes back as full incentive compatibility, then the weakening that
/// only forbids profitable deviations at or below the true value. Per agent
/// the menu crosses every relay subset with every grid bid; staying away
/// entirely closes the full menu. Witnesses take the first profitable entry
/// in (bid, subset) order with absence last.
pub fn scan_deviation_cells(
    mechs: &[Mechanism],
    family: FamilySpec,
    budget: Option<u64>,
) -> Result<Vec<[PropertyVerdict; 2]>, Error> {
    family.validate()?;
    let scale = scale_for(mechs)?;
    let groups = scan_groups(mechs, scale);
    let shapes = enumerate_shapes(family.max_agents);
    let family_size = instance_count(&shapes, family.bid_max);
    let mut cells: Vec<[CellState; 2]> = mechs.iter().map(|_| Default::default()).collect();
    let mut view: Option<GraphView> = None;
    let mut honest: Vec<Option<[i64; MAX_N]>> = Vec::new();
    let mut grids: Vec<Vec<i64>> = Vec::new();
    let mut live: Vec<[bool; 2]> = vec![[false; 2]; mechs.len()];
    let mut best: Vec<[Option<DevCand>; 2]> = Vec::new();
    let mut seen: Vec<GraphView> = Vec::new();
    let (visited, exhausted) =
        for_each_instance(&shapes, family.bid_max, scale, budget, |idx, _, fresh, p| {
            if cells.iter().all(|row| row.iter().all(|c| !c.live())) {
                return ControlFlow::Break(());
            }
            if fresh {
                view = Some(GraphView::build(p));
            }
            let tv = view.as_ref().unwrap();
            let tq = quantities(p, tv).expect("family instances always have a bidder");
            honest_utilities(&groups, mechs.len(), p, tv, &tq, &mut honest);
            let mut any = false;
            for slot in 0..mechs.len() {
                for d in 0..2 {
                    live[slot][d] = false;
                    if cells[slot][d].live() {
                        if honest[slot].is_some() {
                            live[slot][d] = true;
                            any = true;
                        } else {
                            cells[slot][d].skipped_instances += 1;
                        }
                    }
                }
            }
            if !any {
                return ControlFlow::Continue(());
            }
            let n = p.n as usize;
            grids.clear();
            for group in &groups {
                grids.push(scaled_grid(&p.bid[..n], scale, group.delta));
            }
            for agent in 0..n {
                if live.iter().all(|l| !l[0] && !l[1]) {
                    break;
                }
                let truth_bid = p.bid[agent];
                let r_mask = p.adj[agent];
                best.clear();
                best.resize_with(mechs.len(), || [None, None]);
                seen.clear();
                let subs = submasks(r_mask);
                let mut dev = *p;
                for (s_rank, &subset) in subs.iter().enumerate() {
                    dev.adj[agent] = subset;
                    let dview = GraphView::build(&dev);
                    if seen.contains(&dview) {
                        // Same spread as an earlier subset: same outcome at
                        // every bid, and the earlier rank wins the witness.
                        continue;
                    }
                    for (gi, group) in groups.iter().enumerate() {
                        if group.slots.iter().all(|&s| !live[s][0] && !live[s][1]) {
                            continue;
                        }
                        for (b_rank, &b) in grids[gi].iter().enumerate() {
                            dev.bid[agent] = b;
                            let dq = quantities(&dev, &dview)
                                .expect("a deviating agent stays reachable");
                            for (gslot, &slot) in group.slots.iter().enumerate() {
                                let want_ic = live[slot][0];
                                let want_wic = live[slot][1] && b <= truth_bid;
                                if !want_ic && !want_wic {
                                    continue;
                                }
                                let run = evaluate_with(group.fasts[gslot], &dev, &dview, &dq);
                                match run.utility(agent, truth_bid) {
                                    None => {
                                        if want_ic {
                                            cells[slot][0].skipped_deviations += 1;
                                        }
                                        if want_wic {
                                            cells[slot][1].skipped_deviations += 1;
                                        }
                                    }
                                    Some(du) => {
                                        let hu = honest[slot].unwrap()[agent];
                                        for (d, want) in [(0, want_ic), (1, want_wic)] {
                                            if !want {
                                                continue;
                                            }
                                            cells[slot][d].deviations += 1;
                                            if du > hu {
                                                let key = (b_rank, s_rank);
                                                let cand = &mut best[slot][d];
                                                if cand.as_ref().map_or(true, |c| key < c.key) {
                                                    *cand = Some(DevCand {
                                                        key,
                                                        bid: b,
                                                        subset,
                                                        absent: false,
                                                        utility: du,
                                                    });
                                                }
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                    seen.push(dview);
                }
                dev.adj[agent] = 0;
                dev.bid[agent] = 0;
                dev.present = p.present & !bit(agent);
                let aview = GraphView::build(&dev);
                for group in &groups {
                    for (gslot, &slot) in group.slots.iter().enumerate() {
                        if !live[slot][0] {
                            continue;
                        }
                        let run = evaluate(group.fasts[gslot], &dev, &aview);
                        match run.utility(agent, truth_bid) {
                            None => cells[slot][0].skipped_deviations += 1,
                            Some(du) => {
                                cells[slot][0].deviations += 1;
                                let hu = honest[slot].unwrap()[agent];
                                if du > hu {
                                    let key = (usize::MAX, 0);
                                    let cand = &mut best[slot][0];
                                    if cand.as_ref().map_or(true, |c| key < c.key) {
                                        *cand = Some(DevCand {
                                            key,
                                            bid: 0,
                                            subset: 0,
                                            absent: true,
                                            utility: du,
                                        });
                                    }
                                }
                            }
                        }
                    }
                }
                for slot in 0..mechs.len() {
                    for d in 0..2 {
                        let Some(cand) = best[slot][d].take() else {
                            continue;
                        };
                        let honest_profile = lift_truthful(p, scale);
                        let report = if cand.absent {
                            Report::Absent
                        } else {
                            Report::Present {
                                bid: money_from_scaled(cand.bid, scale),
                                neighbors: mask_ids(cand.subset),
                            }
                        };
                        let deviant = honest_profile
                            .with_report(&node_id(agent), report)
                            .expect("deviation reports stay inside the instance");
                        let property = if d == 0 {
                            Property::IncentiveCompatibility
                        } else {
                            Property::WeakIncentiveCompatibility
                        };
                        let witness = Witness {
                            mechanism: mechs[slot].clone(),
                            property,
                            family,
                            instance_index: idx,
                            honest: honest_profile,
                            detail: WitnessDetail::ProfitableDeviation {
                                agent: node_id(agent),
                                deviant,
                                honest_utility: money_from_scaled(
                                    honest[slot].unwrap()[agent],
                                    scale,
                                ),
                                deviant_utility: money_from_scaled(cand.utility, scale),
                            },
                        };
                        cells[slot][d].fail(idx, witness);
                        live[slot][d] = false;
                    }
                }
            }
            ControlFlow::Continue(())
        });
    Ok(cells
        .into_iter()
        .zip(mechs)
        .map(|(row, mech)| {
            let [ic, wic] = row;
            [
                ic.finish(
                    mech,
                    Property::IncentiveCompatibility,
                    family,
                    family_size,
                    visited,
                    exhausted,
                ),
                wic.finish(
                    mech,
                    Property::WeakIncentiveCompatibility,
                    family,
                    family_size,
                    visited,
                    exhausted,
                ),
            ]
        })
        .collect())
}

#[allow(clippy::too_many_arguments)]
fn split_attack_step(
    mechs: &[Mechanism],
    model: AttackModel,
    group: &ScanGroup,
    live: &mut [bool],
    cells: &mut [CellState],
    honest: &[Option<[i64; MAX_N]>],
    p: &FastProfile,
    ext: &FastProfile,
    eview: &GraphView,
    attacker: usize,
    k: usize,
    scale: i64,
    family: FamilySpec,
    idx: u64,
) {
    let q = quantities(ext, eview).expect("the attacker stays reachable");
    let cmask = coalition_mask(p.n as usize, attacker, k);
    let truth_bid = p.bid[attacker];
    for (gslot, &slot) in group.slots.iter().enumerate() {
        if !live[slot] {
            continue;
        }
        let o = match evaluate_with(group.fasts[gslot], ext, eview, &q) {
            FastRun::Ambiguous => {
                cells[slot].skipped_deviations += 1;
                continue;
            }
            FastRun::NoBidders => unreachable!("the attacker stays reachable"),
            FastRun::Outcome(o) => o,
        };
        cells[slot].deviations += 1;
        let mut gain = if bit(o.winner) & cmask != 0 { truth_bid } else { 0 };
        for member in iter_bits(cmask) {
            gain -= o.pay[member];
        }
        let hu = honest[slot].unwrap()[attacker];
        if gain > hu {
            let (attacked, replicas) =
                lift_attack(ext, p.n as usize, attacker, p.adj[attacker], k, scale);
            let witness = Witness {
                mechanism: mechs[slot].clone(),
                property: Property::FalseNameProofness(model),
                family,
                instance_index: idx,
                honest: lift_truthful(p, scale),
                detail: WitnessDetail::ProfitableSplit {
                    agent: node_id(attacker),
                    replicas,
                    attacked,
                    honest_utility: money_from_scaled(hu, scale),
                    coalition_utility: money_from_scaled(gain, scale),
                },
            };
            cells[slot].fail(idx, witness);
            live[slot] = false;
        }
    }
}

/// Audit resistance to identity splits under one attack model, one family
/// pass for all the given mechanisms. The attacker keeps her true bid, adds
/// one or two fresh identities wired per the model, and draws their bids
/// from the deviation grid; the coalition profits when her item value minus
/// everything the coalition pays beats her truthful utility. The first
/// profitable attack in (attacker, split size, wiring, bids) order is the
/// witness.
pub fn scan_falsename_cells(
    mechs: &[Mechanism],
    model: AttackModel,
    family: FamilySpec,
    budget: Option<u64>,
) -> Result<Vec<PropertyVerdict>, Error> {
    family.validate()?;
    let scale = scale_for(mechs)?;
    let groups = scan_groups(mechs, scale);
    let shapes = enumerate_shapes(family.max_agents);
    let family_size = instance_count(&shapes, family.bid_max);
    let mut cells: Vec<CellState> = mechs.iter().map(|_| Default::default()).collect();
    let mut view: Option<GraphView> = None;
    let mut honest: Vec<Option<[i64; MAX_N]>> = Vec::new();
    let mut grids: Vec<Vec<i64>> = Vec::new();
    let mut live: Vec<bool> = vec![false; mechs.len()];
    let mut seen: Vec<GraphView> = Vec::new();
    let (visited, exhausted) =
        for_each_instance(&shapes, family.bid_max, scale, budget, |idx, _, fresh, p| {
            if cells.iter().all(|c| !c.live()) {
                return ControlFlow::Break(());
            }
            if fresh {
                view = Some(GraphView::build(p));
            }
            let tv = view.as_ref().unwrap();
            let tq = quantities(p, tv).expect("family instances always have a bidder");
            honest_utilities(&groups, mechs.len(), p, tv, &tq, &mut honest);
            let mut any = false;
            for slot in 0..mechs.len() {
                live[slot] = false;
                if cells[slot].live() {
                    if honest[slot].is_some() {
                        live[slot] = true;
                        any = true;
                    } else {
                        cells[slot].skipped_instances += 1;
                    }
                }
            }
            if !any {
                return ControlFlow::Continue(());
            }
            let n = p.n as usize;
            grids.clear();
            for group in &groups {
                grids.push(scaled_grid(&p.bid[..n], scale, group.delta));
            }
            'attackers: for attacker in 0..n {
                for k in 1..=2usize {
                    seen.clear();
                    for wiring in wirings(model, n, attacker, p.adj[attacker], k) {
                        if live.iter().all(|l| !l) {
                            break 'attackers;
                        }
                        let mut ext = extended_profile(p, attacker, &wiring, k);
                        let eview = GraphView::build(&ext);
                        if seen.contains(&eview) {
                            continue;
                        }
                        for (gi, group) in groups.iter().enumerate() {
                            if group.slots.iter().all(|&s| !live[s]) {
                                continue;
                            }
                            let grid = &grids[gi];
                            if k == 1 {
                                for &b0 in grid {
                                    ext.bid[n] = b0;
                                    split_attack_step(
                                        mechs, model, group, &mut live, &mut cells, &honest,
                                        p, &ext, &eview, attacker, k, scale, family, idx,
                                    );
                                }
                            } else {
                                for &b0 in grid {
                                    ext.bid[n] = b0;
                                    for &b1 in grid {
                                        ext.bid[n + 1] = b1;
                                        split_attack_step(
                                            mechs, model, group, &mut live, &mut cells, &honest,
                                            p, &ext, &eview, attacker, k, scale, family, idx,
                                        );
                                    }
                                }
                            }
                        }
                        seen.push(eview);
                    }
                }
            }
            ControlFlow::Continue(())
        });
    Ok(cells
        .into_iter()
        .zip(mechs)
        .map(|(cell, mech)| {
            cell.finish(
                mech,
                Property::FalseNameProofness(model),
                family,
                family_size,
                visited,
                exhausted,
            )
        })
        .collect())
}

/// Audit one property of one mechanism over a family. `budget` caps how many
/// instances are examined; `None` scans the whole family.
pub fn check_property(
    mechanism: &Mechanism,
    property: Property,
    family: FamilySpec,
    budget: Option<u64>,
) -> Result<PropertyVerdict, Error> {
    let one = std::slice::from_ref(mechanism);
    match property {
        Property::Efficiency => {
            let [eff, _, _] = scan_outcome_cells(one, family, budget)?.swap_remove(0);
            Ok(eff)
        }
        Property::IndividualRationality => {
            let [_, ir, _] = scan_outcome_cells(one, family, budget)?.swap_remove(0);
            Ok(ir)
        }
        Property::WeakBudgetBalance => {
            let [_, _, wbb] = scan_outcome_cells(one, family, budget)?.swap_remove(0);
            Ok(wbb)
        }
        Property::IncentiveCompatibility => {
            let [ic, _] = scan_deviation_cells(one, family, budget)?.swap_remove(0);
            Ok(ic)
        }
        Property::WeakIncentiveCompatibility => {
            let [_, wic] = scan_deviation_cells(one, family, budget)?.swap_remove(0);
            Ok(wic)
        }
        Property::FalseNameProofness(model) => {
            Ok(scan_falsename_cells(one, model, family, budget)?.swap_remove(0))
        }
    }
}

/// Columns of the property matrix, in display order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixColumn {
    Efficiency,
    IndividualRationality,
    IncentiveCompatibility,
    WeakIncentiveCompatibility,
    WeakBudgetBalance,
    FalseNameProofness,
}

impl MatrixColumn {
    pub const ALL: [MatrixColumn; 6] = [
        MatrixColumn::Efficiency,
        MatrixColumn::IndividualRationality,
        MatrixColumn::IncentiveCompatibility,
        MatrixColumn::WeakIncentiveCompatibility,
        MatrixColumn::WeakBudgetBalance,
        MatrixColumn::FalseNameProofness,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MatrixColumn::Efficiency => "efficiency",
            MatrixColumn::IndividualRationality => "ir",
            MatrixColumn::IncentiveCompatibility => "ic",
            MatrixColumn::WeakIncentiveCompatibility => "wic",
            MatrixColumn::WeakBudgetBalance => "wbb",
            MatrixColumn::FalseNameProofness => "fnp",
        }
    }
}

impl fmt::Display for MatrixColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-column family caps. Deviation scans multiply instances by relay
/// subsets and grid bids, split scans by wirings and bid tuples, so the
/// costlier columns run on smaller prefixes of the agent range.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MatrixCaps {
    pub outcome: u8,
    pub deviation: u8,
    pub replica_chain: u8,
    pub general: u8,
}

impl MatrixCaps {
    pub fn for_family(max_agents: u8) -> MatrixCaps {
        MatrixCaps {
            outcome: max_agents,
            deviation: max_agents.min(4),
            replica_chain: max_agents.min(3),
            general: max_agents.min(2),
        }
    }
}

/// One matrix cell: the folded status plus every verdict feeding it (one for
/// most columns, up to three for the split column).
#[derive(Clone, Debug)]
pub struct MatrixCell {
    pub status: VerdictStatus,
    pub verdicts: Vec<PropertyVerdict>,
}

/// Mechanisms on the matrix rows, in row order.
pub fn matrix_mechanisms(delta: &Money) -> Vec<Mechanism> {
    vec![
        Mechanism::Vcg,
        Mechanism::Idm,
        Mechanism::Pvcg,
        Mechanism::Ivcg,
        Mechanism::DeltaIvcg {
            delta: delta.clone(),
        },
    ]
}

#[derive(Clone, Debug)]
pub struct MatrixReport {
    pub family: FamilySpec,
    pub delta: Money,
    pub caps: MatrixCaps,
    pub rows: Vec<(Mechanism, Vec<MatrixCell>)>,
}

impl MatrixReport {
    pub fn cell(&self, mechanism: &Mechanism, column: MatrixColumn) -> &MatrixCell {
        let row = self
            .rows
            .iter()
            .find(|(m, _)| m == mechanism)
            .expect("mechanism is on a matrix row");
        let i = MatrixColumn::ALL
            .iter()
            .position(|c| *c == column)
            .unwrap();
        &row.1[i]
    }

    fn cells_matching(&self, f: impl Fn(Option<bool>, VerdictStatus) -> bool) -> Vec<(Mechanism, MatrixColumn)> {
        let mut out = Vec::new();
        for (mech, cells) in &self.rows {
            for (column, cell) in MatrixColumn::ALL.iter().zip(cells) {
                if f(expected_cell(mech, *column), cell.status) {
                    out.push((mech.clone(), *column));
                }
            }
        }
        out
    }

    /// Cells where a property that should hold produced a counterexample.
    pub fn contradictions(&self) -> Vec<(Mechanism, MatrixColumn)> {
        self.cells_matching(|expected, status| {
            expected == Some(true) && status == VerdictStatus::Fails
        })
    }

    /// Cells where a known failure did not show up within this family. The
    /// family is simply too small to exhibit it; nothing is wrong.
    pub fn unexhibited(&self) -> Vec<(Mechanism, MatrixColumn)> {
        self.cells_matching(|expected, status| {
            expected == Some(false) && status == VerdictStatus::Holds
        })
    }

    /// Cells whose scan ran out of budget.
    pub fn inconclusive_cells(&self) -> Vec<(Mechanism, MatrixColumn)> {
        self.cells_matching(|_, status| status == VerdictStatus::Inconclusive)
    }

    /// True when nothing contradicts the established verdicts and every cell
    /// came back conclusive.
    pub fn matches_expected(&self) -> bool {
        self.contradictions().is_empty() && self.inconclusive_cells().is_empty()
    }
}

/// Run the whole audit matrix. Allocation and deviation columns scan jointly
/// per family pass; the split column folds all three attack models, dropping
/// a mechanism from later models once one already fails it.
pub fn property_matrix(
    family: FamilySpec,
    delta: &Money,
    budget: Option<u64>,
) -> Result<MatrixReport, Error> {
    family.validate()?;
    let mechs = matrix_mechanisms(delta);
    let caps = MatrixCaps::for_family(family.max_agents);
    let sub = |max_agents: u8| FamilySpec {
        max_agents,
        bid_max: family.bid_max,
    };
    let outcome = scan_outcome_cells(&mechs, sub(caps.outcome), budget)?;
    let deviation = scan_deviation_cells(&mechs, sub(caps.deviation), budget)?;

    let mut split: Vec<Vec<PropertyVerdict>> = mechs.iter().map(|_| Vec::new()).collect();
    let mut split_status = vec![VerdictStatus::Holds; mechs.len()];
    for model in [AttackModel::Replica, AttackModel::Chain, AttackModel::General] {
        let slots: Vec<usize> = (0..mechs.len())
            .filter(|&s| split_status[s] != VerdictStatus::Fails)
            .collect();
        if slots.is_empty() {
            break;
        }
        let subset: Vec<Mechanism> = slots.iter().map(|&s| mechs[s].clone()).collect();
        let agents = match model {
            AttackModel::General => caps.general,
            _ => caps.replica_chain,
        };
        let verdicts = scan_falsename_cells(&subset, model, sub(agents), budget)?;
        for (&slot, verdict) in slots.iter().zip(verdicts) {
            match verdict.status {
                VerdictStatus::Fails => split_status[slot] = VerdictStatus::Fails,
                VerdictStatus::Inconclusive => {
                    if split_status[slot] == VerdictStatus::Holds {
                        split_status[slot] = VerdictStatus::Inconclusive;
                    }
                }
                VerdictStatus::Holds => {}
            }
            split[slot].push(verdict);
        }
    }

    let mut rows = Vec::with_capacity(mechs.len());
    let mut outcome = outcome.into_iter();
    let mut deviation = deviation.into_iter();
    let mut split = split.into_iter();
    let mut split_status = split_status.into_iter();
    for mech in &mechs {
        let [eff, ir, wbb] = outcome.next().unwrap();
        let [ic, wic] = deviation.next().unwrap();
        let single = |v: PropertyVerdict| MatrixCell {
            status: v.status,
            verdicts: vec![v],
        };
        rows.push((
            mech.clone(),
            vec![
                single(eff),
                single(ir),
                single(ic),
                single(wic),
                single(wbb),
                MatrixCell {
                    status: split_status.next().unwrap(),
                    verdicts: split.next().unwrap(),
                },
            ],
        ));
    }
    Ok(MatrixReport {
        family,
        delta: delta.clone(),
        caps,
        rows,
    })
}

///// Established verdict for a matrix cell: `Some(true)` when the property is
/// proven for the mechanism, `Some(false)` when a counterexample is known to
/// exist, `None` when neither is pinned down.
///
/// The gap variant is often presented as truthful, but it is not, and the
/// audits find replayable counterexamples for both incentive columns. Its
/// side payment to the entry agent equals the gap partner's counterfactual
/// price minus the gap, and the entry agent can steer that partner choice:
/// a worthless entry agent overbids into the leading slot to switch the
/// side payment on (values (0,2,3), gap 1, overbid to 1 earns 1), and an
/// entry agent with two branches hides the one propping up the near
/// partner's counterfactual price, pushing the partnership to a richer,
/// deeper agent (values (1,2,3,4), relay only the (3)-branch, side payment
/// 1 becomes 2). The second move never raises the bid and relays a subset,
/// so both the strict and the weak incentive cells are pinned false here.
pub fn expected_cell(mechanism: &Mechanism, column: MatrixColumn) -> Option<bool> {
    let row: [bool; 6] = match mechanism {
        Mechanism::Vcg => [true, true, true, true, false, false],
        Mechanism::Idm => [false, true, true, true, true, false],
        Mechanism::Pvcg => [true, true, false, true, true, false],
        Mechanism::Ivcg => [false, true, true, true, true, true],
        Mechanism::DeltaIvcg { .. } => [false, true, false, false, true, false],
        Mechanism::DanMu => return None,
    };
    let i = MatrixColumn::ALL
        .iter()
        .position(|c| c == &column)
        .unwrap();
    Some(row[i])
}

/// Expected verdict for one audited property. A split column marked as
/// failing pins down no single attack model, so per-model expectations stay
/// open except where the mechanism resists every model.
pub fn expected_verdict(mechanism: &Mechanism, property: Property) -> Option<bool> {
    match property {
        Property::Efficiency => expected_cell(mechanism, MatrixColumn::Efficiency),
        Property::IndividualRationality => {
            expected_cell(mechanism, MatrixColumn::IndividualRationality)
        }
        Property::IncentiveCompatibility => {
            expected_cell(mechanism, MatrixColumn::IncentiveCompatibility)
        }
        Property::WeakIncentiveCompatibility => {
            expected_cell(mechanism, MatrixColumn::WeakIncentiveCompatibility)
        }
        Property::WeakBudgetBalance => expected_cell(mechanism, MatrixColumn::WeakBudgetBalance),
        Property::FalseNameProofness(_) => match mechanism {
            Mechanism::Ivcg => Some(true),
            _ => None,
        },
    }
}
