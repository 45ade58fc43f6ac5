//! Split-identity attacks for the false-name audits.
//!
//! An attacker detaches up to two fresh identities from herself. Her own bid
//! stays put (bid manipulation belongs to the incentive audits); what varies
//! is the wiring and the new identities' bids. Three attack models of
//! increasing generality are enumerated:
//!
//! * replica: the attacker points at every new identity plus a kept subset
//!   of her true neighbors; each new identity relays some subset of those
//!   true neighbors and never another new identity.
//! * chain: the new identities form a path hanging off the attacker, inner
//!   links relay only the next link, and the far end relays a subset of the
//!   attacker's true neighbors.
//! * general: every coalition member relays an arbitrary subset of the
//!   attacker's true neighbors and the other coalition members.
//!
//! New identities occupy engine slots `n..n+k` and lift to ids `z1`, `z2`,
//! which sort after every family id, keeping tie-breaks aligned between the
//! engine and the exact layer.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::audit::engine::{bit, iter_bits, FastProfile, Mask};
use crate::audit::family::{mask_ids, node_id, replica_id};
use crate::model::{Agent, AgentId, GlobalProfile, Instance, Report};
use crate::money::Money;

/// Which attack space to enumerate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AttackModel {
    Replica,
    Chain,
    General,
}

impl AttackModel {
    pub fn name(&self) -> &'static str {
        match self {
            AttackModel::Replica => "replica",
            AttackModel::Chain => "chain",
            AttackModel::General => "general",
        }
    }
}

impl std::fmt::Display for AttackModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One wiring choice; new-identity bids are filled in separately so a graph
/// view can be shared across every bid combination.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AttackWiring {
    Replica { kept: Mask, replica_adj: [Mask; 2] },
    Chain { kept: Mask, tail: Mask },
    /// Extended-index masks, `member_adj[0]` being the attacker's row.
    General { member_adj: [Mask; 3] },
}

pub(crate) fn submasks(sup: Mask) -> Vec<Mask> {
    (0..=sup).filter(|m| m & !sup == 0).collect()
}

/// All wirings for `k` new identities in deterministic order: each mask
/// tuple ascends lexicographically, which fixes the audit's witness choice.
pub fn wirings(model: AttackModel, n: usize, attacker: usize, r_mask: Mask, k: usize) -> Vec<AttackWiring> {
    debug_assert!(k == 1 || k == 2);
    let mut out = Vec::new();
    match model {
        AttackModel::Replica => {
            for kept in submasks(r_mask) {
                for first in submasks(r_mask) {
                    if k == 1 {
                        out.push(AttackWiring::Replica {
                            kept,
                            replica_adj: [first, 0],
                        });
                    } else {
                        for second in submasks(r_mask) {
                            out.push(AttackWiring::Replica {
                                kept,
                                replica_adj: [first, second],
                            });
                        }
                    }
                }
            }
        }
        AttackModel::Chain => {
            for kept in submasks(r_mask) {
                for tail in submasks(r_mask) {
                    out.push(AttackWiring::Chain { kept, tail });
                }
            }
        }
        AttackModel::General => {
            let reps: Mask = (((1u16 << k) - 1) << n) as Mask;
            let attacker_allowed = r_mask | reps;
            for own in submasks(attacker_allowed) {
                let first_allowed = r_mask | bit(attacker) | (reps & !bit(n));
                for first in submasks(first_allowed) {
                    if k == 1 {
                        out.push(AttackWiring::General {
                            member_adj: [own, first, 0],
                        });
                    } else {
                        let second_allowed = r_mask | bit(attacker) | bit(n);
                        for second in submasks(second_allowed) {
                            out.push(AttackWiring::General {
                                member_adj: [own, first, second],
                            });
                        }
                    }
                }
            }
        }
    }
    out
}

/// Engine mask of the whole coalition.
pub fn coalition_mask(n: usize, attacker: usize, k: usize) -> Mask {
    let reps: Mask = (((1u16 << k) - 1) << n) as Mask;
    bit(attacker) | reps
}

/// The reported profile after the attack: base agents unchanged except the
/// attacker's relay row, plus `k` present new identities. Their bids start
/// at zero; set them per combination via `bid[n..n+k]`.
pub fn extended_profile(
    base: &FastProfile,
    attacker: usize,
    wiring: &AttackWiring,
    k: usize,
) -> FastProfile {
    let n = base.n as usize;
    let reps: Mask = (((1u16 << k) - 1) << n) as Mask;
    let mut p = *base;
    p.n = (n + k) as u8;
    p.present |= reps;
    match *wiring {
        AttackWiring::Replica { kept, replica_adj } => {
            p.adj[attacker] = kept | reps;
            for j in 0..k {
                p.adj[n + j] = replica_adj[j];
            }
        }
        AttackWiring::Chain { kept, tail } => {
            p.adj[attacker] = kept | bit(n);
            for j in 0..k - 1 {
                p.adj[n + j] = bit(n + j + 1);
            }
            p.adj[n + k - 1] = tail;
        }
        AttackWiring::General { member_adj } => {
            p.adj[attacker] = member_adj[0];
            for j in 0..k {
                p.adj[n + j] = member_adj[j + 1];
            }
        }
    }
    for j in 0..k {
        p.bid[n + j] = 0;
    }
    p
}

fn ext_mask_ids(mask: Mask, n: usize) -> BTreeSet<AgentId> {
    iter_bits(mask)
        .map(|i| if i < n { node_id(i) } else { replica_id(i - n) })
        .collect()
}

/// Exact replayable profile for an attack found by the engine. The extended
/// instance declares the new identities as real agents valuing the item at
/// their bid, with true neighbor sets equal to what they relay, so every
/// report in the document is feasible and the whole thing can be fed back
/// through the exact mechanisms.
pub fn lift_attack(
    ext: &FastProfile,
    base_n: usize,
    attacker: usize,
    attacker_true_row: Mask,
    k: usize,
    scale: i64,
) -> (GlobalProfile, Vec<AgentId>) {
    let mut agents = BTreeMap::new();
    for i in 0..base_n {
        let neighbors = if i == attacker {
            // The attacker's knowledge is unchanged by the attack: her true
            // neighborhood is the base row plus the identities she created.
            let mut ns = mask_ids(attacker_true_row);
            for j in 0..k {
                ns.insert(replica_id(j));
            }
            ns
        } else {
            mask_ids(ext.adj[i])
        };
        agents.insert(
            node_id(i),
            Agent {
                valuation: Money::from_ratio(ext.bid[i], scale),
                neighbors,
            },
        );
    }
    for j in 0..k {
        agents.insert(
            replica_id(j),
            Agent {
                valuation: Money::from_ratio(ext.bid[base_n + j], scale),
                neighbors: ext_mask_ids(ext.adj[base_n + j], base_n),
            },
        );
    }
    let instance = Instance::new(ext_mask_ids(ext.seller, base_n), agents);
    let mut overrides = BTreeMap::new();
    overrides.insert(
        node_id(attacker),
        Report::Present {
            bid: Money::from_ratio(ext.bid[attacker], scale),
            neighbors: ext_mask_ids(ext.adj[attacker], base_n),
        },
    );
    let profile = GlobalProfile::from_reports(Arc::new(instance), overrides)
        .expect("lifted attack profile is internally consistent");
    let replicas = (0..k).map(replica_id).collect();
    (profile, replicas)
}
