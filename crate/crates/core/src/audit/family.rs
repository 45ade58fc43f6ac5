//! Enumeration of the bounded instance family the audits sweep.
//!
//! A shape is a seller-neighbor set plus a reported-adjacency table over `n`
//! agents in which everyone is activated. Shapes are deduplicated up to
//! agent relabeling: we keep exactly the representatives whose packed
//! encoding `(seller, adj[0], ..., adj[n-1])` is lexicographically minimal
//! over all permutations, which also forces the seller set onto the lowest
//! index bits. Bid vectors over `0..=bid_max` are deduplicated the same way
//! under each shape's automorphism group, so the family is a list of
//! pairwise non-isomorphic instances in one fixed, reproducible order:
//! agent count ascending, then shape encoding, then bid vector.
//!
//! Instance indices inside that order are the coordinates every audit
//! verdict and witness uses, so a budgeted run checks exactly the first
//! `budget` instances no matter how it is invoked.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::ControlFlow;

use crate::audit::engine::{full_mask, iter_bits, reach_set, FastProfile, Mask, MAX_N};
use crate::model::{Agent, AgentId, Instance};
use crate::money::Money;

/// Hard ceiling on family size; seven engine slots must fit the largest
/// family member plus two split identities.
pub const MAX_FAMILY_AGENTS: u8 = 5;

/// One agent relabeling, stored with its inverse so both mask images and
/// position pullbacks are cheap.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Perm {
    pub fwd: [u8; MAX_N],
    pub inv: [u8; MAX_N],
}

impl Perm {
    fn from_fwd(n: usize, fwd: [u8; MAX_N]) -> Perm {
        let mut inv = [0u8; MAX_N];
        for i in 0..n {
            inv[fwd[i] as usize] = i as u8;
        }
        Perm { fwd, inv }
    }

    pub fn apply_mask(&self, m: Mask) -> Mask {
        let mut out = 0;
        for i in iter_bits(m) {
            out |= 1 << self.fwd[i];
        }
        out
    }

    fn cycles(&self, n: usize) -> u32 {
        let mut seen = [false; MAX_N];
        let mut count = 0;
        for start in 0..n {
            if seen[start] {
                continue;
            }
            count += 1;
            let mut at = start;
            while !seen[at] {
                seen[at] = true;
                at = self.fwd[at] as usize;
            }
        }
        count
    }
}

fn all_perms(n: usize) -> Vec<Perm> {
    let mut base: [u8; MAX_N] = [0, 1, 2, 3, 4, 5, 6];
    let mut out = Vec::new();
    fn rec(k: usize, n: usize, arr: &mut [u8; MAX_N], out: &mut Vec<Perm>) {
        if k == n {
            out.push(Perm::from_fwd(n, *arr));
            return;
        }
        for i in k..n {
            arr.swap(k, i);
            rec(k + 1, n, arr, out);
            arr.swap(k, i);
        }
    }
    rec(0, n, &mut base, &mut out);
    out
}

/// A canonical shape plus its non-identity automorphisms.
#[derive(Clone, Debug)]
pub struct Shape {
    pub n: u8,
    pub seller: Mask,
    pub adj: [Mask; MAX_N],
    pub auts: Vec<Perm>,
}

#[derive(Clone, Debug)]
pub struct ShapeSet {
    pub max_agents: u8,
    pub shapes: Vec<Shape>,
}

/// All canonical shapes with up to `max_agents` agents, in iteration order.
pub fn enumerate_shapes(max_agents: u8) -> ShapeSet {
    assert!(
        (1..=MAX_FAMILY_AGENTS).contains(&max_agents),
        "family size must be between 1 and {MAX_FAMILY_AGENTS}"
    );
    let mut shapes = Vec::new();
    for n in 1..=max_agents as usize {
        let perms = all_perms(n);
        // Per-position admissible adjacency rows: every mask over the n
        // agents that does not point back at the row's own agent, ascending.
        let rows: Vec<Vec<Mask>> = (0..n)
            .map(|i| {
                (0..=full_mask(n))
                    .filter(|m| m & (1 << i) == 0)
                    .collect()
            })
            .collect();
        let full = full_mask(n);
        for k in 1..=n {
            let seller: Mask = full_mask(k);
            // Only permutations that keep the seller set on the low bits can
            // produce an encoding with an equal first component; all others
            // yield a strictly larger seller mask and never beat it.
            let stab: Vec<&Perm> = perms
                .iter()
                .filter(|p| (0..k).all(|i| (p.fwd[i] as usize) < k))
                .filter(|p| p.fwd[..n] != [0, 1, 2, 3, 4, 5, 6][..n])
                .collect();
            let mut idx = [0usize; MAX_N];
            let mut adj = [0 as Mask; MAX_N];
            'outer: loop {
                for i in 0..n {
                    adj[i] = rows[i][idx[i]];
                }
                if reach_set(seller, &adj, full) == full {
                    if let Some(auts) = canonical_auts(n, &adj, &stab) {
                        shapes.push(Shape {
                            n: n as u8,
                            seller,
                            adj,
                            auts,
                        });
                    }
                }
                // Odometer step, last position fastest: emits adjacency
                // tables in ascending lexicographic encoding order.
                let mut pos = n;
                loop {
                    if pos == 0 {
                        break 'outer;
                    }
                    pos -= 1;
                    idx[pos] += 1;
                    if idx[pos] < rows[pos].len() {
                        break;
                    }
                    idx[pos] = 0;
                }
            }
        }
    }
    ShapeSet { max_agents, shapes }
}

/// `Some(automorphisms)` when `adj` is the lexicographically least encoding
/// in its relabeling orbit, `None` otherwise.
fn canonical_auts(n: usize, adj: &[Mask; MAX_N], stab: &[&Perm]) -> Option<Vec<Perm>> {
    let mut auts = Vec::new();
    'perms: for p in stab {
        for pos in 0..n {
            let image = p.apply_mask(adj[p.inv[pos] as usize]);
            match image.cmp(&adj[pos]) {
                std::cmp::Ordering::Less => return None,
                std::cmp::Ordering::Greater => continue 'perms,
                std::cmp::Ordering::Equal => {}
            }
        }
        auts.push(**p);
    }
    Some(auts)
}

/// Lex-least representative test for a bid vector under the shape's
/// automorphisms.
fn bids_canonical(n: usize, bids: &[u32; MAX_N], auts: &[Perm]) -> bool {
    'perms: for p in auts {
        for pos in 0..n {
            let image = bids[p.inv[pos] as usize];
            match image.cmp(&bids[pos]) {
                std::cmp::Ordering::Less => return false,
                std::cmp::Ordering::Greater => continue 'perms,
                std::cmp::Ordering::Equal => {}
            }
        }
    }
    true
}

/// Number of instances in the family: canonical bid vectors summed over
/// shapes, counted orbit-wise through the automorphism groups.
pub fn instance_count(shapes: &ShapeSet, bid_max: u32) -> u64 {
    let k = (bid_max + 1) as u64;
    shapes
        .shapes
        .iter()
        .map(|s| {
            let n = s.n as usize;
            if s.auts.is_empty() {
                return k.pow(n as u32);
            }
            let group = s.auts.len() as u64 + 1;
            let mut total = k.pow(n as u32); // identity fixes everything
            for p in &s.auts {
                total += k.pow(p.cycles(n));
            }
            total / group
        })
        .sum()
}

/// Visit family instances in canonical order, handing each one to `f`
/// together with its index and shape. `fresh_shape` is true on a shape's
/// first bid vector so callers can recompute shape-level caches. A `limit`
/// stops the walk after that many instances, making budgeted audits scan
/// exactly the family prefix. Returns the number visited and whether the
/// family was exhausted.
pub fn for_each_instance<F>(
    shapes: &ShapeSet,
    bid_max: u32,
    scale: i64,
    limit: Option<u64>,
    mut f: F,
) -> (u64, bool)
where
    F: FnMut(u64, &Shape, bool, &FastProfile) -> ControlFlow<()>,
{
    let mut index = 0u64;
    let limit = limit.unwrap_or(u64::MAX);
    for shape in &shapes.shapes {
        let n = shape.n as usize;
        let mut bids = [0u32; MAX_N];
        let mut fresh = true;
        'vectors: loop {
            if bids_canonical(n, &bids, &shape.auts) {
                if index == limit {
                    return (index, false);
                }
                let mut profile = FastProfile {
                    n: shape.n,
                    seller: shape.seller,
                    adj: shape.adj,
                    present: full_mask(n),
                    bid: [0; MAX_N],
                };
                for i in 0..n {
                    profile.bid[i] = bids[i] as i64 * scale;
                }
                let flow = f(index, shape, fresh, &profile);
                fresh = false;
                index += 1;
                if flow.is_break() {
                    return (index, false);
                }
            }
            let mut pos = n;
            loop {
                if pos == 0 {
                    break 'vectors;
                }
                pos -= 1;
                bids[pos] += 1;
                if bids[pos] <= bid_max {
                    break;
                }
                bids[pos] = 0;
            }
        }
    }
    (index, true)
}

pub fn node_id(i: usize) -> AgentId {
    AgentId::new(format!("n{}", i + 1))
}

/// Split identities sort after every family id, so engine index order and
/// exact id order agree on extended profiles too.
pub fn replica_id(j: usize) -> AgentId {
    AgentId::new(format!("z{}", j + 1))
}

pub fn mask_ids(mask: Mask) -> BTreeSet<AgentId> {
    iter_bits(mask).map(node_id).collect()
}

/// Exact truthful instance for a family member: valuations are the bids,
/// true neighbor sets are the reported rows.
pub fn lift_instance(profile: &FastProfile, scale: i64) -> Instance {
    let n = profile.n as usize;
    let mut agents = BTreeMap::new();
    for i in 0..n {
        agents.insert(
            node_id(i),
            Agent {
                valuation: Money::from_ratio(profile.bid[i], scale),
                neighbors: mask_ids(profile.adj[i]),
            },
        );
    }
    Instance::new(mask_ids(profile.seller), agents)
}
