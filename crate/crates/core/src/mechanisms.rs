//! The six single-item diffusion mechanisms.
//!
//! All of them decide a winner and a signed payment per activated bidder
//! (negative = the mechanism pays the agent, e.g. to reward relaying).
//! They differ in which marginal contribution they rebate:
//!
//! * `Vcg` rebates `rwd(i)` to everyone, so relays are paid in full and the
//!   seller can end up deep underwater.
//! * `Pvcg` rebates only `prwd(i)`, the presence part, which restores a
//!   non-negative revenue but lets agents inflate `prwd` by overbidding.
//! * `Ivcg` sells to the leading agent at her removal price (first price to
//!   the top bidder when nobody can interrupt).
//! * `DeltaIvcg` splits an interruption gap of at least `delta` between the
//!   leading agent and a deeper interruption agent, lifting revenue by
//!   exactly `delta` on gap profiles.
//! * `Idm` walks the critical chain toward the top bidder, paying each
//!   relay the resale margin to the next link.
//! * `DanMu` (single-unit) scans outward and sells to the first agent whose
//!   bid survives her own removal.

use std::collections::BTreeMap;

use crate::model::{AgentId, CounterfactualMode, GlobalProfile};
use crate::money::Money;
use crate::rewards::{self, RewardTable};
use crate::Error;

/// Mechanism selector. `DeltaIvcg` carries its gap parameter.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Mechanism {
    Vcg,
    Pvcg,
    Ivcg,
    DeltaIvcg { delta: Money },
    Idm,
    DanMu,
}

impl Mechanism {
    pub fn name(&self) -> &'static str {
        match self {
            Mechanism::Vcg => "vcg",
            Mechanism::Pvcg => "pvcg",
            Mechanism::Ivcg => "ivcg",
            Mechanism::DeltaIvcg { .. } => "delta-ivcg",
            Mechanism::Idm => "idm",
            Mechanism::DanMu => "danmu",
        }
    }
}

impl std::fmt::Display for Mechanism {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mechanism::DeltaIvcg { delta } => write!(f, "delta-ivcg(delta={delta})"),
            other => f.write_str(other.name()),
        }
    }
}

/// Winner plus signed payments. Agents missing from `payments` pay zero;
/// mechanisms record a payment for every activated bidder so callers can
/// print complete tables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub winner: AgentId,
    pub payments: BTreeMap<AgentId, Money>,
}

impl Outcome {
    pub fn payment(&self, id: &AgentId) -> Money {
        self.payments.get(id).cloned().unwrap_or_else(Money::zero)
    }

    /// Seller revenue: the sum of all payments.
    pub fn revenue(&self) -> Money {
        self.payments.values().cloned().sum()
    }

    /// Quasi-linear utility for an agent whose true valuation is given.
    pub fn utility(&self, id: &AgentId, valuation: &Money) -> Money {
        let value = if &self.winner == id {
            valuation.clone()
        } else {
            Money::zero()
        };
        value - self.payment(id)
    }
}

/// Runs a mechanism on a trimmed profile with at least one activated bidder.
pub fn run(mechanism: &Mechanism, profile: &GlobalProfile) -> Result<Outcome, Error> {
    match mechanism {
        Mechanism::Vcg => marginal_rebate(profile, |row| row.rwd.clone()),
        Mechanism::Pvcg => marginal_rebate(profile, |row| row.prwd.clone()),
        Mechanism::Ivcg => ivcg(profile),
        Mechanism::DeltaIvcg { delta } => delta_ivcg(profile, delta),
        Mechanism::Idm => idm(profile),
        Mechanism::DanMu => dan_mu(profile),
    }
}

/// Zero payments for every activated bidder; the mechanisms fill these in.
fn zero_payments(profile: &GlobalProfile) -> BTreeMap<AgentId, Money> {
    profile
        .activated_bidders()
        .into_iter()
        .map(|id| (id, Money::zero()))
        .collect()
}

/// Shared shape of VCG and PVCG: the top bidder buys at her bid and every
/// activated bidder is rebated some marginal contribution.
fn marginal_rebate(
    profile: &GlobalProfile,
    rebate: impl Fn(&rewards::RewardRow) -> Money,
) -> Result<Outcome, Error> {
    let table = rewards::reward_table(profile)?;
    let winner = profile.highest_bidder()?;
    let mut payments = zero_payments(profile);
    for (id, paid) in payments.iter_mut() {
        let row = &table.rows[id];
        let charge = if id == &winner {
            row.bid.clone().expect("winner bids")
        } else {
            Money::zero()
        };
        *paid = charge - rebate(row);
    }
    Ok(Outcome { winner, payments })
}

fn h_removed(table: &RewardTable, id: &AgentId) -> Money {
    &table.highest_bid - &table.rows[id].rwd
}

fn ivcg(profile: &GlobalProfile) -> Result<Outcome, Error> {
    let table = rewards::reward_table(profile)?;
    let mut payments = zero_payments(profile);
    let winner = match &table.leading {
        // Nobody can interrupt: first price to the top bidder.
        None => {
            let winner = profile.highest_bidder()?;
            let bid = table.rows[&winner].bid.clone().expect("winner bids");
            payments.insert(winner.clone(), bid);
            winner
        }
        // The leading agent buys at her own removal price.
        Some(j1) => {
            payments.insert(j1.clone(), h_removed(&table, j1));
            j1.clone()
        }
    };
    Ok(Outcome { winner, payments })
}

/// Detects the gap pattern `DeltaIvcg` monetizes: the leading agent `j1` is
/// the seller's only neighbor, and some deeper interruption agent `j2`,
/// unreachable without `j1`, would still leave a top bid at least `delta`
/// above `j1`'s own bid after her removal. Returns the closest such `j2`
/// (smallest id on equal distance).
pub fn delta_gap(
    profile: &GlobalProfile,
    delta: &Money,
) -> Result<Option<(AgentId, AgentId)>, Error> {
    if delta.is_negative() || delta.is_zero() {
        return Err(Error::InvalidDelta(delta.clone()));
    }
    if profile.activated_bidders().is_empty() {
        return Ok(None);
    }
    let table = rewards::reward_table(profile)?;
    let j1 = match &table.leading {
        None => return Ok(None),
        Some(j1) => j1.clone(),
    };
    let seller = &profile.instance().seller_neighbors;
    if !(seller.len() == 1 && seller.contains(&j1)) {
        return Ok(None);
    }
    let without_j1 = profile
        .counterfactual(&j1, CounterfactualMode::Removed)?
        .activated();
    let j1_bid = table.rows[&j1].bid.clone().expect("leading agent bids");
    let floor = j1_bid + delta.clone();
    let mut best: Option<(u32, &AgentId)> = None;
    for (id, row) in &table.rows {
        if id == &j1 || !row.interruption || without_j1.contains(id) {
            continue;
        }
        if h_removed(&table, id) < floor {
            continue;
        }
        // Ascending id iteration: strict distance improvement keeps the
        // smallest id among equals.
        if best.map_or(true, |(d, _)| row.distance < d) {
            best = Some((row.distance, id));
        }
    }
    Ok(best.map(|(_, j2)| (j1, j2.clone())))
}

fn delta_ivcg(profile: &GlobalProfile, delta: &Money) -> Result<Outcome, Error> {
    let (j1, j2) = match delta_gap(profile, delta)? {
        None => return ivcg(profile),
        Some(pair) => pair,
    };
    let table = rewards::reward_table(profile)?;
    let mut payments = zero_payments(profile);
    let sale_price = h_removed(&table, &j2);
    // j1 pockets the gap above delta; the seller keeps her removal price
    // plus delta.
    let j1_rebate = &(&sale_price - delta) - &h_removed(&table, &j1);
    payments.insert(j2.clone(), sale_price);
    payments.insert(j1, -j1_rebate);
    Ok(Outcome {
        winner: j2,
        payments,
    })
}

fn idm(profile: &GlobalProfile) -> Result<Outcome, Error> {
    let target = profile.unique_highest_bidder()?;
    let sequence = rewards::critical_sequence(profile, &target)?;
    let table = rewards::reward_table(profile)?;
    // Removal price of each link, with the full top bid as sentinel past the
    // end: the target trivially "survives" her own successor slot.
    let mut floors: Vec<Money> = sequence.iter().map(|id| h_removed(&table, id)).collect();
    floors.push(table.highest_bid.clone());
    let mut winner_at = sequence.len() - 1;
    for (m, id) in sequence.iter().enumerate() {
        let bid = table.rows[id].bid.as_ref().expect("critical agents bid");
        if bid == &floors[m + 1] {
            winner_at = m;
            break;
        }
    }
    let winner = sequence[winner_at].clone();
    let mut payments = zero_payments(profile);
    for (i, id) in sequence.iter().enumerate().take(winner_at) {
        // Relay margin: buy at your removal price, resell at the next one.
        payments.insert(id.clone(), &floors[i] - &floors[i + 1]);
    }
    payments.insert(winner.clone(), floors[winner_at].clone());
    Ok(Outcome { winner, payments })
}

fn dan_mu(profile: &GlobalProfile) -> Result<Outcome, Error> {
    let table = rewards::reward_table(profile)?;
    let mut order: Vec<(&AgentId, u32)> = table
        .rows
        .iter()
        .filter(|(_, row)| row.bid.is_some())
        .map(|(id, row)| (id, row.distance))
        .collect();
    order.sort_by_key(|(id, d)| (*d, (*id).clone()));
    for (id, _) in order {
        let bid = table.rows[id].bid.as_ref().unwrap();
        let price = h_removed(&table, id);
        // First agent (closest, then smallest id) whose bid survives every
        // bid still alive once she is removed.
        if bid >= &price {
            let mut payments = zero_payments(profile);
            payments.insert(id.clone(), price);
            return Ok(Outcome {
                winner: id.clone(),
                payments,
            });
        }
    }
    // The top bidder always qualifies, so the scan cannot fall through.
    Err(Error::NoActivatedBidder)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Instance, Report};
    use crate::testutil::{agent, e1, f3, ids, profile_of, t2, two_seller_adjacent, w};

    fn id(s: &str) -> AgentId {
        AgentId::new(s)
    }

    fn m(v: i64) -> Money {
        Money::from_int(v)
    }

    fn outcome(mech: &Mechanism, p: &GlobalProfile) -> Outcome {
        run(mech, p).unwrap()
    }

    #[test]
    fn vcg_degenerates_to_second_price_without_a_network() {
        let o = outcome(&Mechanism::Vcg, &two_seller_adjacent(5, 3));
        assert_eq!(o.winner, id("p"));
        assert_eq!(o.payment(&id("p")), m(3));
        assert_eq!(o.payment(&id("q")), m(0));
        assert_eq!(o.revenue(), m(3));
    }

    #[test]
    fn vcg_pays_relays_their_full_marginal_value() {
        let o = outcome(&Mechanism::Vcg, &profile_of(e1()));
        assert_eq!(o.winner, id("b"));
        assert_eq!(o.payment(&id("b")), m(0));
        assert_eq!(o.payment(&id("a")), m(-1));
        assert_eq!(o.revenue(), m(-1));

        let o = outcome(&Mechanism::Vcg, &profile_of(f3()));
        assert_eq!(o.winner, id("b"));
        assert_eq!(o.payment(&id("b")), m(10));
        assert_eq!(o.payment(&id("a")), m(-100));
        assert_eq!(o.revenue(), m(-90));
    }

    #[test]
    fn pvcg_rebates_only_presence() {
        let o = outcome(&Mechanism::Pvcg, &profile_of(f3()));
        assert_eq!(o.winner, id("b"));
        assert_eq!(o.payment(&id("b")), m(10));
        assert_eq!(o.payment(&id("a")), m(-10));
        assert_eq!(o.revenue(), m(0));

        let o = outcome(&Mechanism::Pvcg, &profile_of(w()));
        assert_eq!(o.winner, id("j2"));
        assert_eq!(o.payment(&id("j2")), m(20));
        assert_eq!(o.payment(&id("j1")), m(-4));
        assert_eq!(o.payment(&id("a")), m(-13));
        assert_eq!(o.payment(&id("x")), m(0));
        assert_eq!(o.payment(&id("b")), m(0));
        assert_eq!(o.revenue(), m(3));
    }

    #[test]
    fn ivcg_sells_to_the_leading_agent() {
        let o = outcome(&Mechanism::Ivcg, &profile_of(t2()));
        assert_eq!(o.winner, id("c"));
        assert_eq!(o.payment(&id("c")), m(2));
        assert_eq!(o.revenue(), m(2));

        let o = outcome(&Mechanism::Ivcg, &profile_of(w()));
        assert_eq!(o.winner, id("j1"));
        assert_eq!(o.payment(&id("j1")), m(0));
        assert_eq!(o.revenue(), m(0));
    }

    #[test]
    fn ivcg_is_first_price_without_interruption() {
        let o = outcome(&Mechanism::Ivcg, &two_seller_adjacent(5, 5));
        assert_eq!(o.winner, id("p"));
        assert_eq!(o.payment(&id("p")), m(5));
        assert_eq!(o.revenue(), m(5));
    }

    #[test]
    fn delta_gap_picks_the_closest_qualifying_agent() {
        let p = profile_of(w());
        assert_eq!(
            delta_gap(&p, &m(3)).unwrap(),
            Some((id("j1"), id("a")))
        );
        assert_eq!(
            delta_gap(&p, &m(10)).unwrap(),
            Some((id("j1"), id("j2")))
        );
        assert_eq!(delta_gap(&p, &m(17)).unwrap(), None);
        assert_eq!(delta_gap(&profile_of(t2()), &m(1)).unwrap(), None);
        assert_eq!(delta_gap(&p, &m(0)), Err(Error::InvalidDelta(m(0))));
    }

    #[test]
    fn delta_ivcg_splits_the_gap() {
        let p = profile_of(w());
        let o = outcome(&Mechanism::DeltaIvcg { delta: m(3) }, &p);
        assert_eq!(o.winner, id("a"));
        assert_eq!(o.payment(&id("a")), m(7));
        assert_eq!(o.payment(&id("j1")), m(-4));
        assert_eq!(o.revenue(), m(3));

        let o = outcome(&Mechanism::DeltaIvcg { delta: m(10) }, &p);
        assert_eq!(o.winner, id("j2"));
        assert_eq!(o.payment(&id("j2")), m(20));
        assert_eq!(o.payment(&id("j1")), m(-10));
        assert_eq!(o.revenue(), m(10));
    }

    #[test]
    fn delta_ivcg_falls_back_to_ivcg_off_gap() {
        let p = profile_of(t2());
        assert_eq!(
            outcome(&Mechanism::DeltaIvcg { delta: m(1) }, &p),
            outcome(&Mechanism::Ivcg, &p)
        );
    }

    // The entry agent's side payment equals her gap partner's removal price
    // minus the gap, and she can steer who that partner is without ever
    // bidding above her value: hiding the branch that props up the near
    // candidate's removal price disqualifies it and hands the partnership
    // to a deeper, richer agent. The audits surface this same profile.
    #[test]
    fn delta_ivcg_rewards_hiding_a_branch() {
        let mech = Mechanism::DeltaIvcg { delta: m(1) };
        let truthful = profile_of(Instance::new(
            [id("n1")],
            [
                (id("n1"), agent(1, &["n2", "n3"])),
                (id("n2"), agent(2, &[])),
                (id("n3"), agent(3, &["n4"])),
                (id("n4"), agent(4, &[])),
            ],
        ));
        let o = outcome(&mech, &truthful);
        assert_eq!(o.winner, id("n3"));
        assert_eq!(o.payment(&id("n3")), m(2));
        assert_eq!(o.utility(&id("n1"), &m(1)), m(1));

        let hiding = truthful
            .with_report(
                &id("n1"),
                Report::Present { bid: m(1), neighbors: ids(&["n3"]) },
            )
            .unwrap()
            .trimmed();
        let o = outcome(&mech, &hiding);
        assert_eq!(o.winner, id("n4"));
        assert_eq!(o.payment(&id("n4")), m(3));
        assert_eq!(o.utility(&id("n1"), &m(1)), m(2));
        assert_eq!(o.revenue(), m(1));
    }

    #[test]
    fn idm_resells_down_the_critical_chain() {
        let o = outcome(&Mechanism::Idm, &profile_of(t2()));
        assert_eq!(o.winner, id("c"));
        assert_eq!(o.payment(&id("c")), m(2));
        assert_eq!(o.payment(&id("a")), m(-1));
        assert_eq!(o.revenue(), m(1));

        let o = outcome(&Mechanism::Idm, &profile_of(w()));
        assert_eq!(o.winner, id("a"));
        assert_eq!(o.payment(&id("a")), m(7));
        assert_eq!(o.payment(&id("j1")), m(-7));
        assert_eq!(o.payment(&id("j2")), m(0));
        assert_eq!(o.revenue(), m(0));
    }

    #[test]
    fn idm_lets_an_early_relay_keep_the_item() {
        // a's bid matches the market without b, so a buys at her own
        // removal price and the item never reaches the top bidder.
        let o = outcome(&Mechanism::Idm, &profile_of(f3()));
        assert_eq!(o.winner, id("a"));
        assert_eq!(o.payment(&id("a")), m(0));
        assert_eq!(o.payment(&id("b")), m(0));
        assert_eq!(o.revenue(), m(0));
    }

    #[test]
    fn idm_refuses_tied_top_bids() {
        assert_eq!(
            run(&Mechanism::Idm, &two_seller_adjacent(5, 5)),
            Err(Error::AmbiguousHighestBidder)
        );
    }

    #[test]
    fn idm_single_bidder_pays_nothing() {
        let o = outcome(&Mechanism::Idm, &two_seller_adjacent(5, 0));
        assert_eq!(o.winner, id("p"));
        assert_eq!(o.revenue(), m(0));
    }

    #[test]
    fn dan_mu_sells_to_the_first_survivor() {
        let o = outcome(&Mechanism::DanMu, &profile_of(t2()));
        assert_eq!(o.winner, id("a"));
        assert_eq!(o.payment(&id("a")), m(1));
        assert_eq!(o.revenue(), m(1));

        let o = outcome(&Mechanism::DanMu, &profile_of(w()));
        assert_eq!(o.winner, id("j1"));
        assert_eq!(o.payment(&id("j1")), m(0));
        assert_eq!(o.revenue(), m(0));

        let o = outcome(&Mechanism::DanMu, &two_seller_adjacent(5, 3));
        assert_eq!(o.winner, id("p"));
        assert_eq!(o.payment(&id("p")), m(3));
    }

    #[test]
    fn empty_market_errors() {
        let p = profile_of(e1())
            .with_report(&id("a"), Report::Absent)
            .unwrap()
            .trimmed();
        for mech in [
            Mechanism::Vcg,
            Mechanism::Pvcg,
            Mechanism::Ivcg,
            Mechanism::DeltaIvcg { delta: m(1) },
            Mechanism::Idm,
            Mechanism::DanMu,
        ] {
            assert_eq!(run(&mech, &p), Err(Error::NoActivatedBidder), "{mech}");
        }
    }

    #[test]
    fn revenue_sums_payments() {
        for mech in [Mechanism::Vcg, Mechanism::Pvcg, Mechanism::Ivcg, Mechanism::Idm] {
            let o = outcome(&mech, &profile_of(w()));
            let total: Money = o.payments.values().cloned().sum();
            assert_eq!(o.revenue(), total);
        }
    }
}
