//! Bit-twiddled mirror of the exact layer for exhaustive audits.
//!
//! Instances with at most [`MAX_N`] agents are packed into bitmask adjacency
//! rows and integer bids (rationals scaled by a shared denominator), which
//! turns activation and both counterfactual reaches into a handful of word
//! ops. The audit sweeps bulk-run mechanisms here and lift back into exact
//! arithmetic only when a candidate witness must be verified.
//!
//! Every function mirrors one exact-layer definition. Differential tests in
//! the parent module hold the two layers equal over whole families, so any
//! divergence is a bug, never a rounding artifact: all arithmetic here is
//! integer-exact by construction. Bids are assumed non-negative, matching
//! the model's "empty market tops out at zero" convention.

pub const MAX_N: usize = 7;
pub type Mask = u8;

#[inline]
pub fn bit(i: usize) -> Mask {
    1 << i
}

#[inline]
pub fn full_mask(n: usize) -> Mask {
    ((1u16 << n) - 1) as Mask
}

#[derive(Clone, Copy)]
pub struct BitIter(Mask);

impl Iterator for BitIter {
    type Item = usize;
    #[inline]
    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            None
        } else {
            let i = self.0.trailing_zeros() as usize;
            self.0 &= self.0 - 1;
            Some(i)
        }
    }
}

#[inline]
pub fn iter_bits(mask: Mask) -> BitIter {
    BitIter(mask)
}

/// One packed reported profile: agent `i` relays to `adj[i]`, bids `bid[i]`
/// (ignored unless the `present` bit is set), and the seller knocks on
/// `seller`. Indices play the role of ids; index order must equal the id
/// order of the lifted exact instance or tie-breaks diverge.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FastProfile {
    pub n: u8,
    pub seller: Mask,
    pub adj: [Mask; MAX_N],
    pub present: Mask,
    pub bid: [i64; MAX_N],
}

/// Reachable set when information spreads from the seller: absent agents can
/// be reached but relay nothing.
pub fn reach_set(seller: Mask, adj: &[Mask; MAX_N], present: Mask) -> Mask {
    let mut reach: Mask = 0;
    let mut frontier = seller;
    while frontier & !reach != 0 {
        let new = frontier & !reach;
        reach |= new;
        let mut next = 0;
        for i in iter_bits(new & present) {
            next |= adj[i];
        }
        frontier = next;
    }
    reach
}

/// Bid-independent precomputation for one profile shape: the reach set, BFS
/// distances, the reach with each agent muted, and activated bidders sorted
/// by (distance, index). Reusing a view across every bid vector of a shape
/// is what makes full-family sweeps affordable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphView {
    pub reach: Mask,
    /// Distance from the seller; `u8::MAX` when unreachable.
    pub dist: [u8; MAX_N],
    /// Reach when agent `i` relays nothing. The agent herself may still be
    /// in the set (someone else points at her); a removal counterfactual
    /// additionally ignores her bid, a detachment keeps it.
    pub reach_minus: [Mask; MAX_N],
    pub order: [u8; MAX_N],
    pub order_len: u8,
}

impl GraphView {
    pub fn build(p: &FastProfile) -> GraphView {
        let mut dist = [u8::MAX; MAX_N];
        let mut reach: Mask = 0;
        let mut frontier = p.seller;
        let mut level = 1u8;
        while frontier & !reach != 0 {
            let new = frontier & !reach;
            reach |= new;
            let mut next = 0;
            for i in iter_bits(new) {
                dist[i] = level;
            }
            for i in iter_bits(new & p.present) {
                next |= p.adj[i];
            }
            frontier = next;
            level += 1;
        }
        let mut reach_minus = [reach; MAX_N];
        for i in iter_bits(reach & p.present) {
            if p.adj[i] == 0 {
                continue;
            }
            let mut r: Mask = 0;
            let mut fr = p.seller;
            while fr & !r != 0 {
                let new = fr & !r;
                r |= new;
                let mut next = 0;
                for j in iter_bits(new & p.present) {
                    if j != i {
                        next |= p.adj[j];
                    }
                }
                fr = next;
            }
            reach_minus[i] = r;
        }
        let mut order = [0u8; MAX_N];
        let mut len = 0;
        for i in iter_bits(reach & p.present) {
            order[len] = i as u8;
            len += 1;
        }
        // Insertion sort by distance; starting from ascending indices keeps
        // the (distance, index) tie-break stable.
        for a in 1..len {
            let mut b = a;
            while b > 0 && dist[order[b - 1] as usize] > dist[order[b] as usize] {
                order.swap(b - 1, b);
                b -= 1;
            }
        }
        GraphView {
            reach,
            dist,
            reach_minus,
            order,
            order_len: len as u8,
        }
    }

    #[inline]
    pub fn bidder_order(&self) -> &[u8] {
        &self.order[..self.order_len as usize]
    }
}

/// Bid-dependent per-profile quantities every mechanism reads: the top bid
/// and holder, plus the removal and detachment markets per bidder.
#[derive(Clone, Copy, Debug)]
pub struct Quantities {
    pub bidders: Mask,
    pub h: i64,
    /// Lowest-index agent at the top bid.
    pub top: usize,
    pub top_tied: bool,
    pub h_rm: [i64; MAX_N],
    pub h_dt: [i64; MAX_N],
}

impl Quantities {
    #[inline]
    pub fn rwd(&self, i: usize) -> i64 {
        self.h - self.h_rm[i]
    }

    #[inline]
    pub fn prwd(&self, i: usize) -> i64 {
        self.h_dt[i] - self.h_rm[i]
    }

    #[inline]
    pub fn interruption(&self, i: usize) -> bool {
        self.h_dt[i] > self.h_rm[i]
    }
}

pub fn quantities(p: &FastProfile, v: &GraphView) -> Option<Quantities> {
    let bidders = v.reach & p.present;
    if bidders == 0 {
        return None;
    }
    let mut h = i64::MIN;
    let mut top = 0usize;
    let mut top_tied = false;
    for i in iter_bits(bidders) {
        let b = p.bid[i];
        if b > h {
            h = b;
            top = i;
            top_tied = false;
        } else if b == h {
            top_tied = true;
        }
    }
    let mut h_rm = [0i64; MAX_N];
    let mut h_dt = [0i64; MAX_N];
    for i in iter_bits(bidders) {
        let mut m = 0i64;
        for j in iter_bits(v.reach_minus[i] & p.present & !bit(i)) {
            m = m.max(p.bid[j]);
        }
        h_rm[i] = m;
        h_dt[i] = if v.reach_minus[i] & bit(i) != 0 {
            m.max(p.bid[i])
        } else {
            m
        };
    }
    Some(Quantities {
        bidders,
        h,
        top,
        top_tied,
        h_rm,
        h_dt,
    })
}

/// Scaled-integer twin of `mechanisms::Mechanism`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FastMechanism {
    Vcg,
    Pvcg,
    Ivcg,
    DeltaIvcg { delta: i64 },
    Idm,
    DanMu,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FastOutcome {
    pub winner: usize,
    pub pay: [i64; MAX_N],
    pub bidders: Mask,
}

impl FastOutcome {
    pub fn revenue(&self) -> i64 {
        iter_bits(self.bidders).map(|i| self.pay[i]).sum()
    }

    #[inline]
    pub fn utility(&self, i: usize, valuation: i64) -> i64 {
        let value = if self.winner == i { valuation } else { 0 };
        let paid = if self.bidders & bit(i) != 0 {
            self.pay[i]
        } else {
            0
        };
        value - paid
    }
}

/// A mechanism run either produces an outcome or hits one of the two
/// conditions the exact layer reports as errors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FastRun {
    Outcome(FastOutcome),
    NoBidders,
    Ambiguous,
}

impl FastRun {
    pub fn outcome(&self) -> Option<&FastOutcome> {
        match self {
            FastRun::Outcome(o) => Some(o),
            _ => None,
        }
    }

    /// Utility of agent `i` under this run; `None` when the mechanism was
    /// undefined (the caller skips), zero when the market emptied out.
    pub fn utility(&self, i: usize, valuation: i64) -> Option<i64> {
        match self {
            FastRun::Outcome(o) => Some(o.utility(i, valuation)),
            FastRun::NoBidders => Some(0),
            FastRun::Ambiguous => None,
        }
    }
}

pub fn evaluate(mech: FastMechanism, p: &FastProfile, v: &GraphView) -> FastRun {
    match quantities(p, v) {
        None => FastRun::NoBidders,
        Some(q) => evaluate_with(mech, p, v, &q),
    }
}

pub fn evaluate_with(
    mech: FastMechanism,
    p: &FastProfile,
    v: &GraphView,
    q: &Quantities,
) -> FastRun {
    match mech {
        FastMechanism::Vcg => rebate_run(p, q, false),
        FastMechanism::Pvcg => rebate_run(p, q, true),
        FastMechanism::Ivcg => FastRun::Outcome(ivcg(p, v, q)),
        FastMechanism::DeltaIvcg { delta } => FastRun::Outcome(delta_ivcg(p, v, q, delta)),
        FastMechanism::Idm => idm(p, v, q),
        FastMechanism::DanMu => FastRun::Outcome(dan_mu(p, v, q)),
    }
}

fn rebate_run(p: &FastProfile, q: &Quantities, presence_only: bool) -> FastRun {
    let mut pay = [0i64; MAX_N];
    for i in iter_bits(q.bidders) {
        let rebate = if presence_only { q.prwd(i) } else { q.rwd(i) };
        let charge = if i == q.top { p.bid[i] } else { 0 };
        pay[i] = charge - rebate;
    }
    FastRun::Outcome(FastOutcome {
        winner: q.top,
        pay,
        bidders: q.bidders,
    })
}

/// Interruption agent closest to the seller, if any. Distances cannot tie
/// among interruption agents on a valid profile.
pub fn leading(v: &GraphView, q: &Quantities) -> Option<usize> {
    let mut best: Option<(u8, usize)> = None;
    for i in iter_bits(q.bidders) {
        if !q.interruption(i) {
            continue;
        }
        let d = v.dist[i];
        match best {
            None => best = Some((d, i)),
            Some((bd, _)) => {
                debug_assert_ne!(d, bd, "interruption agents share a distance");
                if d < bd {
                    best = Some((d, i));
                }
            }
        }
    }
    best.map(|(_, i)| i)
}

fn ivcg(p: &FastProfile, v: &GraphView, q: &Quantities) -> FastOutcome {
    let mut pay = [0i64; MAX_N];
    let winner = match leading(v, q) {
        None => {
            pay[q.top] = p.bid[q.top];
            q.top
        }
        Some(j1) => {
            pay[j1] = q.h_rm[j1];
            j1
        }
    };
    FastOutcome {
        winner,
        pay,
        bidders: q.bidders,
    }
}

/// Gap detection: the leading agent `j1` is the seller's only neighbor and
/// some interruption agent unreachable without her would still leave a top
/// bid at least `delta` above `j1`'s own. Returns (j1, closest such j2).
pub fn delta_gap_fast(
    p: &FastProfile,
    v: &GraphView,
    q: &Quantities,
    delta: i64,
) -> Option<(usize, usize)> {
    let j1 = leading(v, q)?;
    if p.seller != bit(j1) {
        return None;
    }
    let floor = p.bid[j1] + delta;
    let mut best: Option<(u8, usize)> = None;
    for i in iter_bits(q.bidders & !v.reach_minus[j1]) {
        if i == j1 || !q.interruption(i) || q.h_rm[i] < floor {
            continue;
        }
        let d = v.dist[i];
        if best.map_or(true, |(bd, _)| d < bd) {
            best = Some((d, i));
        }
    }
    best.map(|(_, j2)| (j1, j2))
}

fn delta_ivcg(p: &FastProfile, v: &GraphView, q: &Quantities, delta: i64) -> FastOutcome {
    match delta_gap_fast(p, v, q, delta) {
        None => ivcg(p, v, q),
        Some((j1, j2)) => {
            let mut pay = [0i64; MAX_N];
            pay[j2] = q.h_rm[j2];
            pay[j1] = -(q.h_rm[j2] - delta - q.h_rm[j1]);
            FastOutcome {
                winner: j2,
                pay,
                bidders: q.bidders,
            }
        }
    }
}

fn idm(p: &FastProfile, v: &GraphView, q: &Quantities) -> FastRun {
    if q.top_tied {
        return FastRun::Ambiguous;
    }
    let mut seq = [0usize; MAX_N];
    let mut len = 0;
    for &iu in v.bidder_order() {
        let i = iu as usize;
        if q.h_rm[i] < q.h {
            debug_assert!(
                len == 0 || v.dist[seq[len - 1]] < v.dist[i],
                "critical agents share a distance"
            );
            seq[len] = i;
            len += 1;
        }
    }
    if len == 0 {
        // Sole bidder at zero: nobody is critical, the top bidder still
        // closes the sequence.
        seq[0] = q.top;
        len = 1;
    }
    debug_assert_eq!(seq[len - 1], q.top, "top bidder must close the sequence");
    let mut floors = [0i64; MAX_N + 1];
    for (k, &i) in seq[..len].iter().enumerate() {
        floors[k] = q.h_rm[i];
    }
    floors[len] = q.h;
    let mut win_at = len - 1;
    for (k, &i) in seq[..len].iter().enumerate() {
        if p.bid[i] == floors[k + 1] {
            win_at = k;
            break;
        }
    }
    let mut pay = [0i64; MAX_N];
    for k in 0..win_at {
        pay[seq[k]] = floors[k] - floors[k + 1];
    }
    pay[seq[win_at]] = floors[win_at];
    FastRun::Outcome(FastOutcome {
        winner: seq[win_at],
        pay,
        bidders: q.bidders,
    })
}

fn dan_mu(p: &FastProfile, v: &GraphView, q: &Quantities) -> FastOutcome {
    for &iu in v.bidder_order() {
        let i = iu as usize;
        if p.bid[i] >= q.h_rm[i] {
            let mut pay = [0i64; MAX_N];
            pay[i] = q.h_rm[i];
            return FastOutcome {
                winner: i,
                pay,
                bidders: q.bidders,
            };
        }
    }
    unreachable!("the top bidder always survives her own removal price");
}
