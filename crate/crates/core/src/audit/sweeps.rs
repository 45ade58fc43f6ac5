//! Structural sweeps over whole families.
//!
//! Where the property audits hunt counterexamples, the sweep checks exact
//! identities that should hold on every truthful instance: reward bounds,
//! rebate accounting, the revenue ordering across mechanisms, and the gap
//! mechanism's split of the surplus. Failures are collected as text rather
//! than witnesses; a non-empty list means an implementation bug, not an
//! interesting mechanism.

use std::ops::ControlFlow;

use super::engine::{evaluate_with, iter_bits, quantities, FastMechanism, FastOutcome, FastRun, GraphView};
use super::family::{enumerate_shapes, for_each_instance, node_id};
use super::{money_scaled, scale_for, FamilySpec};
use crate::mechanisms::Mechanism;
use crate::money::Money;
use crate::Error;

const FAILURE_CAP: usize = 8;

/// What a sweep saw. `gap_hits` counts, per delta, the instances where the
/// gap mechanism actually departed from its fallback.
#[derive(Clone, Debug)]
pub struct SweepOutcome {
    pub family: FamilySpec,
    pub deltas: Vec<Money>,
    pub instances: u64,
    /// Instances with a single top bid, where the tie-refusing mechanisms
    /// also take part in the revenue comparisons.
    pub unique_top_instances: u64,
    /// First instance whose participation rebates sum exactly to the top
    /// bid, showing the rebate bound cannot be tightened.
    pub participation_tight_at: Option<u64>,
    pub gap_hits: Vec<u64>,
    /// Descriptions of broken identities, capped at a handful.
    pub failures: Vec<String>,
}

fn note(failures: &mut Vec<String>, idx: u64, msg: String) {
    if failures.len() < FAILURE_CAP {
        failures.push(format!("instance {idx}: {msg}"));
    }
}

fn outcome_of(mech: FastMechanism, p: &super::engine::FastProfile, v: &GraphView, q: &super::engine::Quantities) -> FastOutcome {
    match evaluate_with(mech, p, v, q) {
        FastRun::Outcome(o) => o,
        other => unreachable!("{mech:?} cannot refuse a profile with bidders: {other:?}"),
    }
}

/// Sweep a family and verify, instance by instance:
///
/// * removal and detachment maxima are sandwiched, `0 <= rm <= dt <= h`;
/// * participation rebates sum to at most the top bid;
/// * the rebate mechanisms pay every truthful agent exactly her reward
///   (full or participation-only), so their revenues order accordingly and
///   the participation variant never runs a deficit;
/// * with a unique top bid, the interruption sale raises at least as much as
///   the diffusion sale, which raises at least zero, and at least as much as
///   the first-qualifying sale;
/// * each gap mechanism either matches its fallback outcome exactly or sells
///   to a different buyer at her removal price, raising the fallback revenue
///   plus the gap.
pub fn revenue_and_bounds_sweep(
    family: FamilySpec,
    deltas: &[Money],
) -> Result<SweepOutcome, Error> {
    family.validate()?;
    let mechs: Vec<Mechanism> = deltas
        .iter()
        .map(|d| Mechanism::DeltaIvcg { delta: d.clone() })
        .collect();
    let scale = scale_for(&mechs)?;
    let scaled_deltas: Vec<i64> = deltas.iter().map(|d| money_scaled(d, scale)).collect();
    let shapes = enumerate_shapes(family.max_agents);
    let mut out = SweepOutcome {
        family,
        deltas: deltas.to_vec(),
        instances: 0,
        unique_top_instances: 0,
        participation_tight_at: None,
        gap_hits: vec![0; deltas.len()],
        failures: Vec::new(),
    };
    let mut view: Option<GraphView> = None;
    for_each_instance(&shapes, family.bid_max, scale, None, |idx, _, fresh, p| {
        if fresh {
            view = Some(GraphView::build(p));
        }
        let v = view.as_ref().unwrap();
        let q = quantities(p, v).expect("family instances always have a bidder");
        out.instances += 1;

        let mut rebate_sum = 0i64;
        for i in iter_bits(q.bidders) {
            let (rm, dt) = (q.h_rm[i], q.h_dt[i]);
            // dt <= h doubles as prwd <= rwd.
            if !(0 <= rm && rm <= dt && dt <= q.h) {
                note(
                    &mut out.failures,
                    idx,
                    format!(
                        "maxima out of order for {}: removal {rm}, detachment {dt}, top {}",
                        node_id(i),
                        q.h
                    ),
                );
            }
            rebate_sum += q.prwd(i);
        }
        if rebate_sum > q.h {
            note(
                &mut out.failures,
                idx,
                format!("participation rebates {rebate_sum} exceed the top bid {}", q.h),
            );
        }
        if q.h > 0 && rebate_sum == q.h && out.participation_tight_at.is_none() {
            out.participation_tight_at = Some(idx);
        }

        let vcg = outcome_of(FastMechanism::Vcg, p, v, &q);
        let pvcg = outcome_of(FastMechanism::Pvcg, p, v, &q);
        for i in iter_bits(q.bidders) {
            if vcg.utility(i, p.bid[i]) != q.rwd(i) {
                note(
                    &mut out.failures,
                    idx,
                    format!("full rebate shortchanges {}", node_id(i)),
                );
            }
            if pvcg.utility(i, p.bid[i]) != q.prwd(i) {
                note(
                    &mut out.failures,
                    idx,
                    format!("participation rebate shortchanges {}", node_id(i)),
                );
            }
        }
        let rev_pvcg = pvcg.revenue();
        if rev_pvcg < vcg.revenue() {
            note(
                &mut out.failures,
                idx,
                "trimming rebates to participation lowered revenue".into(),
            );
        }
        if rev_pvcg < 0 {
            note(
                &mut out.failures,
                idx,
                format!("participation rebates run a deficit of {rev_pvcg}"),
            );
        }

        let ivcg = outcome_of(FastMechanism::Ivcg, p, v, &q);
        let rev_ivcg = ivcg.revenue();
        if !q.top_tied {
            out.unique_top_instances += 1;
            match evaluate_with(FastMechanism::Idm, p, v, &q) {
                FastRun::Outcome(idm) => {
                    let rev_idm = idm.revenue();
                    if !(0 <= rev_idm && rev_idm <= rev_ivcg) {
                        note(
                            &mut out.failures,
                            idx,
                            format!(
                                "diffusion revenue {rev_idm} escapes [0, {rev_ivcg}]"
                            ),
                        );
                    }
                }
                other => note(
                    &mut out.failures,
                    idx,
                    format!("a unique top bid still left the diffusion sale undecided: {other:?}"),
                ),
            }
            let danmu = outcome_of(FastMechanism::DanMu, p, v, &q);
            if danmu.revenue() > rev_ivcg {
                note(
                    &mut out.failures,
                    idx,
                    format!(
                        "first-qualifying revenue {} beats interruption revenue {rev_ivcg}",
                        danmu.revenue()
                    ),
                );
            }
        }

        for (k, &d) in scaled_deltas.iter().enumerate() {
            let run = outcome_of(FastMechanism::DeltaIvcg { delta: d }, p, v, &q);
            if run.winner == ivcg.winner && run.pay == ivcg.pay {
                continue;
            }
            out.gap_hits[k] += 1;
            if run.winner == ivcg.winner {
                note(
                    &mut out.failures,
                    idx,
                    "gap rewired payments without moving the item".into(),
                );
            }
            if run.pay[run.winner] != q.h_rm[run.winner] {
                note(
                    &mut out.failures,
                    idx,
                    "gap buyer does not pay her removal price".into(),
                );
            }
            if run.revenue() != rev_ivcg + d {
                note(
                    &mut out.failures,
                    idx,
                    format!(
                        "gap revenue {} is not fallback {rev_ivcg} plus {d}",
                        run.revenue()
                    ),
                );
            }
        }
        ControlFlow::Continue(())
    });
    Ok(out)
}
