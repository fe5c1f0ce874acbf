//! Cross-checks of the fast paths against exhaustive references: the label
//! solver against route enumeration, and the column-generation loop against
//! an LP built over every feasible route at once.

use std::collections::HashMap;

use rand::Rng;

use cg_core::cg::{run_baseline, CgConfig};
use cg_core::enumerate::{best_reduced_cost, enumerate_routes};
use cg_core::ingest::{generate_random, tighten_windows, GenParams};
use cg_core::net::{build_network, Network};
use cg_core::pricing::{price_arcs, solve_pricing, PricingLimits, EPS_NEG};
use cg_core::seed::rng_for;

fn random_duals(net: &Network, seed: u64, scale: f64) -> Vec<f64> {
    let mut rng = rng_for(seed, "oracle-duals", 0);
    (0..net.n_customers())
        .map(|_| rng.gen_range(0.0..scale))
        .collect()
}

#[test]
fn label_solver_matches_enumeration_exactly() {
    let mut networks = 0;
    let mut with_columns = 0;
    for seed in 0..20u64 {
        for customers in 2..=8usize {
            let inst = generate_random(customers, 1000 + seed * 31 + customers as u64, &GenParams::default());
            let net = build_network(&inst).unwrap();
            for (variant, scale) in [(0u64, 0.0), (1, 150.0), (2, 500.0)] {
                let duals = if scale == 0.0 {
                    vec![0.0; net.n_customers()]
                } else {
                    random_duals(&net, seed * 10 + variant, scale)
                };
                let priced = price_arcs(&net, &duals);
                let result = solve_pricing(&net, &priced, &PricingLimits::default());
                let reference = enumerate_routes(&net, &priced);
                let by_route: HashMap<&[usize], f64> = reference
                    .iter()
                    .map(|c| (c.route.as_slice(), c.rcost_at_birth))
                    .collect();
                let best = best_reduced_cost(&net, &priced).unwrap();

                match result.columns.first() {
                    Some(top) => {
                        assert_eq!(
                            top.rcost_at_birth, best,
                            "best reduced cost differs on seed {seed} n {customers} variant {variant}"
                        );
                        with_columns += 1;
                    }
                    None => assert!(
                        best >= -EPS_NEG,
                        "solver found nothing but enumeration has {best} (seed {seed} n {customers})"
                    ),
                }
                for col in &result.columns {
                    let reference_rcost = by_route
                        .get(col.route.as_slice())
                        .unwrap_or_else(|| panic!("route {:?} not in enumeration", col.route));
                    assert_eq!(col.rcost_at_birth, *reference_rcost);
                    assert!(col.rcost_at_birth < -EPS_NEG);
                }
                for pair in result.columns.windows(2) {
                    assert!(
                        pair[0].rcost_at_birth < pair[1].rcost_at_birth
                            || (pair[0].rcost_at_birth == pair[1].rcost_at_birth
                                && pair[0].route <= pair[1].route),
                        "columns out of order"
                    );
                }
                networks += 1;
            }
        }
    }
    assert_eq!(networks, 20 * 7 * 3);
    assert!(with_columns > networks / 2, "too few networks produced columns");
}

#[test]
fn dominance_prunes_without_changing_the_answer() {
    for seed in 0..6u64 {
        let inst = generate_random(5, 400 + seed, &GenParams::default());
        let net = build_network(&inst).unwrap();
        let duals = random_duals(&net, seed, 300.0);
        let priced = price_arcs(&net, &duals);
        let with = solve_pricing(&net, &priced, &PricingLimits::default());
        let without = solve_pricing(
            &net,
            &priced,
            &PricingLimits {
                use_dominance: false,
                ..PricingLimits::default()
            },
        );
        assert!(with.labels_created <= without.labels_created);
        match (with.columns.first(), without.columns.first()) {
            (Some(a), Some(b)) => assert_eq!(a.rcost_at_birth, b.rcost_at_birth),
            (None, None) => {}
            _ => panic!("dominance changed whether columns exist"),
        }
    }
}

#[test]
fn baseline_reaches_the_optimum_over_all_feasible_routes() {
    let cfg = CgConfig::default();
    let mut checked = 0;
    for seed in 0..10u64 {
        for customers in [4usize, 5, 6] {
            let mut inst =
                generate_random(customers, 7000 + seed * 13 + customers as u64, &GenParams::default());
            if seed % 2 == 1 {
                inst = tighten_windows(&inst, 0.6).unwrap();
            }
            let net = build_network(&inst).unwrap();
            let outcome = run_baseline(&net, &cfg).unwrap();

            let zero = vec![0.0; net.n_customers()];
            let all_routes = enumerate_routes(&net, &price_arcs(&net, &zero));
            let mut rmp = cg_core::rmp::init_rmp(&net);
            rmp.add_columns(all_routes).unwrap();
            let reference = rmp.solve_lp().unwrap();

            let gap = (outcome.solution.objective - reference.objective).abs();
            assert!(
                gap <= 1e-6,
                "seed {seed} n {customers}: colgen {} vs all-routes {} (gap {gap:.3e})",
                outcome.solution.objective,
                reference.objective
            );
            checked += 1;
        }
    }
    assert_eq!(checked, 30);
}
