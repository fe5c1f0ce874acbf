//! Exhaustive enumeration of feasible routes on small networks.
//!
//! Depth-first search driven by the same clamped extension rule and 2-cycle
//! elimination as the label solver. Exponential in the customer count: this
//! exists to cross-check the label solver and the column-generation loop on
//! networks of a dozen customers or fewer, not to solve anything.

use crate::net::{Network, R_TIME};
use crate::pricing::{extend, Label, PricedArc};
use crate::rmp::Column;

/// Returns every feasible 2-cycle-free source-to-sink route as a master
/// column whose `rcost_at_birth` carries the reduced cost under `priced`.
///
/// Reduced costs accumulate in path order through [`extend`] and column
/// costs accumulate sink-to-source, matching the label solver's float
/// operation order exactly, so agreement checks can use `==` rather than a
/// tolerance.
pub fn enumerate_routes(net: &Network, priced: &[PricedArc]) -> Vec<Column> {
    assert_eq!(priced.len(), net.arcs.len(), "one priced entry per arc");
    let source = net.source();
    let root = Label {
        node: source,
        rcost: 0.0,
        res: [net.nodes[source].window_lo[R_TIME], 0.0],
        pred: None,
        pred_node: None,
        arc_in: None,
    };
    let mut out = Vec::new();
    let mut taken = Vec::new();
    dfs(net, priced, &root, &mut taken, &mut out);
    out
}

/// The smallest reduced cost over all feasible routes, or `None` on a
/// network with no source-to-sink route.
pub fn best_reduced_cost(net: &Network, priced: &[PricedArc]) -> Option<f64> {
    enumerate_routes(net, priced)
        .into_iter()
        .map(|c| c.rcost_at_birth)
        .min_by(f64::total_cmp)
}

fn dfs(
    net: &Network,
    priced: &[PricedArc],
    label: &Label,
    taken: &mut Vec<usize>,
    out: &mut Vec<Column>,
) {
    if label.node == net.sink() {
        out.push(column_of(net, taken, label.rcost));
        return;
    }
    for &arc_id in &net.out_arcs[label.node] {
        let arc = &net.arcs[arc_id];
        if Some(arc.head) == label.pred_node {
            continue;
        }
        let Some(next) = extend(net, label, arc, priced[arc_id].modified_cost) else {
            continue;
        };
        taken.push(arc_id);
        dfs(net, priced, &next, taken, out);
        taken.pop();
    }
}

fn column_of(net: &Network, taken: &[usize], rcost: f64) -> Column {
    let mut route = Vec::with_capacity(taken.len() + 1);
    route.push(net.source());
    for &a in taken {
        route.push(net.arcs[a].head);
    }
    let mut cost = 0.0;
    let mut visits = vec![0usize; net.n_customers()];
    for &a in taken.iter().rev() {
        let arc = &net.arcs[a];
        cost += arc.cost;
        if let Some(row) = arc.covered_row {
            visits[row] += 1;
        }
    }
    let coeffs = visits
        .iter()
        .enumerate()
        .filter(|&(_, &v)| v > 0)
        .map(|(row, &v)| (row, v as f64))
        .collect();
    Column {
        id: usize::MAX,
        route,
        cost,
        coeffs,
        rcost_at_birth: rcost,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{generate_random, GenParams};
    use crate::net::build_network;
    use crate::pricing::{price_arcs, solve_pricing, PricingLimits, EPS_NEG};
    use crate::seed::rng_for;
    use rand::Rng;

    fn zero_duals(net: &Network) -> Vec<f64> {
        vec![0.0; net.n_customers()]
    }

    #[test]
    fn routes_are_two_cycle_free_and_end_to_end() {
        let inst = generate_random(5, 11, &GenParams::default());
        let net = build_network(&inst).unwrap();
        let priced = price_arcs(&net, &zero_duals(&net));
        let routes = enumerate_routes(&net, &priced);
        assert!(!routes.is_empty());
        for col in &routes {
            assert_eq!(col.route[0], net.source());
            assert_eq!(*col.route.last().unwrap(), net.sink());
            for w in col.route.windows(3) {
                assert_ne!(w[0], w[2], "2-cycle in {:?}", col.route);
            }
        }
    }

    #[test]
    fn column_fields_match_route_arithmetic() {
        let inst = generate_random(4, 3, &GenParams::default());
        let net = build_network(&inst).unwrap();
        let priced = price_arcs(&net, &zero_duals(&net));
        for col in enumerate_routes(&net, &priced) {
            assert!((col.cost - net.route_cost(&col.route)).abs() < 1e-9);
            let covered: f64 = col.coeffs.iter().map(|&(_, v)| v).sum();
            assert_eq!(covered as usize, col.route.len() - 2);
            // Zero duals make the reduced cost the raw cost.
            assert!((col.rcost_at_birth - col.cost).abs() < 1e-9);
        }
    }

    #[test]
    fn label_solver_agrees_exactly_on_a_small_network() {
        let inst = generate_random(6, 29, &GenParams::default());
        let net = build_network(&inst).unwrap();
        let mut rng = rng_for(29, "enum-duals", 0);
        let duals: Vec<f64> = (0..net.n_customers())
            .map(|_| rng.gen_range(0.0..200.0))
            .collect();
        let priced = price_arcs(&net, &duals);
        let result = solve_pricing(&net, &priced, &PricingLimits::default());
        let best = best_reduced_cost(&net, &priced).unwrap();
        match result.columns.first() {
            Some(col) => assert_eq!(col.rcost_at_birth, best),
            None => assert!(best >= -EPS_NEG),
        }
    }
}
