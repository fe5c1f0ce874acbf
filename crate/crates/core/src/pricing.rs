//! Pricing problem: an elementary-enough shortest path with resource
//! constraints, solved by label setting under 2-cycle elimination.
//!
//! Arcs carry modified costs (original cost minus the duals collected by the
//! head customer), labels accumulate reduced cost and per-resource usage,
//! and columns are read off the sink labels whose reduced cost is
//! sufficiently negative.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use crate::net::{ArcData, Network, NUM_RES, R_TIME, ResVec};
use crate::rmp::Column;

/// A sink-label reduced cost must fall below `-EPS_NEG` before the path is
/// treated as an improving column.
pub const EPS_NEG: f64 = 1e-6;

/// An arc together with its dual-adjusted cost for the current iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PricedArc {
    pub arc_id: usize,
    pub modified_cost: f64,
}

/// Applies the duals to every arc: `modified = cost - dual(head row)`; arcs
/// into the sink keep their original cost.
pub fn price_arcs(net: &Network, duals: &[f64]) -> Vec<PricedArc> {
    assert_eq!(duals.len(), net.n_customers(), "one dual per customer row");
    net.arcs
        .iter()
        .map(|a| PricedArc {
            arc_id: a.id,
            modified_cost: match a.covered_row {
                Some(row) => a.cost - duals[row],
                None => a.cost,
            },
        })
        .collect()
}

/// A partial path ending at `node`.
#[derive(Debug, Clone)]
pub struct Label {
    pub node: usize,
    /// Sum of modified costs along the path.
    pub rcost: f64,
    /// Resource values after arrival, window-clamped at every step.
    pub res: ResVec,
    /// Index of the predecessor label in the solver's arena.
    pub pred: Option<usize>,
    /// Node the path visited immediately before `node`; extensions back to
    /// it are forbidden (2-cycle elimination).
    pub pred_node: Option<usize>,
    /// Arc that produced this label.
    pub arc_in: Option<usize>,
}

/// Extends `label` along `arc` (whose tail must be the label's node) using
/// the clamped recurrence `res' = max(window_lo(head), res + consumption)`.
/// Returns `None` when any resource overshoots the head's window.
pub fn extend(net: &Network, label: &Label, arc: &ArcData, modified_cost: f64) -> Option<Label> {
    debug_assert_eq!(arc.tail, label.node);
    let head = &net.nodes[arc.head];
    let mut res = [0.0; NUM_RES];
    for r in 0..NUM_RES {
        let v = (label.res[r] + arc.consumption[r]).max(head.window_lo[r]);
        if v > head.window_hi[r] {
            return None;
        }
        res[r] = v;
    }
    Some(Label {
        node: arc.head,
        rcost: label.rcost + modified_cost,
        res,
        pred: None,
        pred_node: Some(label.node),
        arc_in: Some(arc.id),
    })
}

/// Componentwise dominance between labels at the same node: `a` dominates
/// `b` when it is no worse in reduced cost and in every resource.
pub fn dominates(a: &Label, b: &Label) -> bool {
    debug_assert_eq!(a.node, b.node);
    if a.rcost > b.rcost {
        return false;
    }
    (0..NUM_RES).all(|r| a.res[r] <= b.res[r])
}

#[derive(Debug, Clone)]
pub struct PricingLimits {
    /// Upper bound on returned columns; the most negative survive.
    pub max_columns: usize,
    /// Disable only to cross-check results; the label count explodes.
    pub use_dominance: bool,
}

impl Default for PricingLimits {
    fn default() -> Self {
        PricingLimits {
            max_columns: 200,
            use_dominance: true,
        }
    }
}

#[derive(Debug)]
pub struct PricingResult {
    /// Improving columns, most negative reduced cost first, ties broken by
    /// lexicographic route; at most `max_columns`.
    pub columns: Vec<Column>,
    pub labels_created: usize,
    pub labels_dominated: usize,
    /// Wall-clock seconds spent in the solver.
    pub time_spent: f64,
}

/// Queue entry ordered by (arrival time, creation index) ascending.
struct QueueEntry {
    time: f64,
    id: usize,
}

impl PartialEq for QueueEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for QueueEntry {}
impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for QueueEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap, we pop the earliest time.
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.id.cmp(&self.id))
    }
}

/// Runs label setting over the network and returns the improving columns.
///
/// Labels are processed in nondecreasing arrival time. At every customer
/// node the kept set follows the two-predecessor rule matching 2-cycle
/// elimination: a label is discarded only when a dominating label with the
/// same predecessor node exists, or when two dominating labels with
/// distinct predecessor nodes do. Sink labels are never dominated away;
/// each one with reduced cost below `-EPS_NEG` yields a column candidate.
pub fn solve_pricing(net: &Network, priced: &[PricedArc], limits: &PricingLimits) -> PricingResult {
    assert_eq!(priced.len(), net.arcs.len(), "one priced entry per arc");
    assert!(limits.max_columns >= 1, "max_columns must be at least 1");
    let started = Instant::now();

    let source = net.source();
    let sink = net.sink();
    let mut arena: Vec<Label> = Vec::new();
    let mut alive: Vec<bool> = Vec::new();
    // Kept (nondominated) label ids per node.
    let mut kept: Vec<Vec<usize>> = vec![Vec::new(); net.nodes.len()];
    let mut queue = BinaryHeap::new();
    let mut sink_labels: Vec<usize> = Vec::new();
    let mut created = 0usize;
    let mut dominated = 0usize;

    let root = Label {
        node: source,
        rcost: 0.0,
        res: [net.nodes[source].window_lo[R_TIME], 0.0],
        pred: None,
        pred_node: None,
        arc_in: None,
    };
    created += 1;
    arena.push(root);
    alive.push(true);
    kept[source].push(0);
    queue.push(QueueEntry {
        time: arena[0].res[R_TIME],
        id: 0,
    });

    while let Some(QueueEntry { id, .. }) = queue.pop() {
        if !alive[id] {
            continue;
        }
        let node = arena[id].node;
        for &arc_id in &net.out_arcs[node] {
            let arc = &net.arcs[arc_id];
            if Some(arc.head) == arena[id].pred_node {
                continue;
            }
            let Some(mut label) = extend(net, &arena[id], arc, priced[arc_id].modified_cost)
            else {
                continue;
            };
            label.pred = Some(id);
            created += 1;
            if arc.head == sink {
                let lid = arena.len();
                arena.push(label);
                alive.push(true);
                sink_labels.push(lid);
                continue;
            }
            if limits.use_dominance && rejects(&arena, &kept[arc.head], &label) {
                dominated += 1;
                continue;
            }
            let lid = arena.len();
            arena.push(label);
            alive.push(true);
            if limits.use_dominance {
                dominated += evict(&mut arena, &mut alive, &mut kept[arc.head], lid);
            }
            kept[arc.head].push(lid);
            queue.push(QueueEntry {
                time: arena[lid].res[R_TIME],
                id: lid,
            });
        }
    }

    // Materialize improving sink labels as columns.
    let mut candidates: Vec<Column> = Vec::new();
    for &lid in &sink_labels {
        let label = &arena[lid];
        if label.rcost >= -EPS_NEG {
            continue;
        }
        candidates.push(column_from(net, &arena, lid));
    }
    candidates.sort_by(|a, b| {
        a.rcost_at_birth
            .total_cmp(&b.rcost_at_birth)
            .then_with(|| a.route.cmp(&b.route))
    });
    candidates.truncate(limits.max_columns);

    PricingResult {
        columns: candidates,
        labels_created: created,
        labels_dominated: dominated,
        time_spent: started.elapsed().as_secs_f64(),
    }
}

/// Should `label` be discarded given the labels currently kept at its node?
/// Yes when some kept label with the same predecessor dominates it, or when
/// two kept labels with distinct predecessors both dominate it.
fn rejects(arena: &[Label], kept: &[usize], label: &Label) -> bool {
    let mut first_pred: Option<usize> = None;
    for &k in kept {
        let other = &arena[k];
        if !dominates(other, label) {
            continue;
        }
        if other.pred_node == label.pred_node {
            return true;
        }
        match first_pred {
            None => first_pred = Some(other.pred_node.unwrap_or(usize::MAX)),
            Some(p) if p != other.pred_node.unwrap_or(usize::MAX) => return true,
            Some(_) => {}
        }
    }
    false
}

/// Removes kept labels made redundant by the newly accepted `lid`: a kept
/// label goes when `lid` shares its predecessor and dominates it, or when
/// `lid` plus another kept dominator with a different predecessor than
/// `lid`'s jointly dominate it. Returns how many were evicted.
fn evict(arena: &mut [Label], alive: &mut [bool], kept: &mut Vec<usize>, lid: usize) -> usize {
    let mut removed = 0;
    let mut i = 0;
    while i < kept.len() {
        let k = kept[i];
        let doomed = {
            let new = &arena[lid];
            let old = &arena[k];
            if !dominates(new, old) {
                false
            } else if new.pred_node == old.pred_node {
                true
            } else {
                kept.iter().any(|&k2| {
                    k2 != k
                        && arena[k2].pred_node != new.pred_node
                        && dominates(&arena[k2], &arena[k])
                })
            }
        };
        if doomed {
            alive[k] = false;
            kept.swap_remove(i);
            removed += 1;
        } else {
            i += 1;
        }
    }
    removed
}

/// Walks the predecessor chain into a master column.
fn column_from(net: &Network, arena: &[Label], sink_label: usize) -> Column {
    let mut nodes = Vec::new();
    let mut cost = 0.0;
    let mut visits: Vec<usize> = vec![0; net.n_customers()];
    let mut cur = Some(sink_label);
    while let Some(id) = cur {
        let l = &arena[id];
        nodes.push(l.node);
        if let Some(arc_in) = l.arc_in {
            let arc = &net.arcs[arc_in];
            cost += arc.cost;
            if let Some(row) = arc.covered_row {
                visits[row] += 1;
            }
        }
        cur = l.pred;
    }
    nodes.reverse();
    let coeffs = visits
        .iter()
        .enumerate()
        .filter(|&(_, &v)| v > 0)
        .map(|(row, &v)| (row, v as f64))
        .collect();
    Column {
        id: usize::MAX,
        route: nodes,
        cost,
        coeffs,
        rcost_at_birth: arena[sink_label].rcost,
    }
}
