//! Property-based checks over randomly generated instances, masks, and
//! counts.

use proptest::prelude::*;

use cg_core::cg::{format_levels, parse_levels, select_cost, select_random};
use cg_core::ingest::{generate_random, parse_instance, tighten_windows, write_instance, GenParams,
    Layout};
use cg_core::learn::Metrics;
use cg_core::net::build_network;

fn layout_for(tag: u8) -> Layout {
    match tag % 3 {
        0 => Layout::Random,
        1 => Layout::Clustered,
        _ => Layout::Mixed,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn instances_round_trip_through_text(
        n in 1usize..30,
        seed in any::<u64>(),
        layout in any::<u8>(),
    ) {
        let params = GenParams { layout: layout_for(layout), ..GenParams::default() };
        let inst = generate_random(n, seed, &params);
        let text = write_instance(&inst);
        let back = parse_instance(&text).unwrap();
        prop_assert_eq!(inst, back);
    }

    #[test]
    fn tightening_keeps_single_customer_routes_feasible(
        n in 1usize..20,
        seed in any::<u64>(),
        factor in 0.05f64..=1.0,
    ) {
        let inst = generate_random(n, seed, &GenParams::default());
        if let Ok(tight) = tighten_windows(&inst, factor) {
            for (orig, cust) in inst.customers.iter().zip(&tight.customers) {
                prop_assert!(cust.ready >= orig.ready - 1e-9);
                prop_assert!(cust.due <= orig.due + 1e-9);
                let width = cust.due - cust.ready;
                let orig_width = orig.due - orig.ready;
                prop_assert!(width <= orig_width * factor + 1e-9);
            }
            let net = build_network(&tight);
            prop_assert!(net.is_ok(), "tightened instance lost its network: {:?}", net.err());
        }
    }

    #[test]
    fn untightened_instances_always_build(
        n in 1usize..25,
        seed in any::<u64>(),
        layout in any::<u8>(),
    ) {
        let params = GenParams { layout: layout_for(layout), ..GenParams::default() };
        let inst = generate_random(n, seed, &params);
        let net = build_network(&inst).unwrap();
        prop_assert_eq!(net.n_customers(), n);
        for node in 1..=n {
            prop_assert!(net.find_arc(net.source(), node).is_some());
            prop_assert!(net.find_arc(node, net.sink()).is_some());
        }
    }

    #[test]
    fn random_selection_hits_the_requested_count(
        arc_count in 1usize..500,
        frac in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        let keep_count = (frac * arc_count as f64).round() as usize;
        let mask = select_random(keep_count, arc_count, seed);
        prop_assert_eq!(mask.len(), arc_count);
        prop_assert_eq!(mask.iter().filter(|&&b| b).count(), keep_count.min(arc_count));
    }

    #[test]
    fn cost_selection_meets_its_target_minimally(
        n in 2usize..12,
        seed in any::<u64>(),
        frac in 0.1f64..=1.0,
    ) {
        let inst = generate_random(n, seed, &GenParams::default());
        let net = build_network(&inst).unwrap();
        let selectable = net.selectable_arc_ids();
        let target = ((selectable.len() as f64 * frac).round() as usize)
            .clamp(1, selectable.len());
        let mask = select_cost(&net, target);
        let kept = selectable.iter().filter(|&&a| mask[a]).count();
        prop_assert!(kept >= target, "kept {kept} < target {target}");
        for a in 0..net.arcs.len() {
            if !net.is_selectable(a) {
                prop_assert!(!mask[a], "depot arc {a} marked kept");
            }
        }
    }

    #[test]
    fn level_lists_round_trip(levels in proptest::collection::vec(1usize..100_000, 0..6)) {
        let mut levels = levels;
        levels.sort_unstable();
        levels.dedup();
        levels.push(cg_core::cg::UNLIMITED);
        let text = format_levels(&levels);
        prop_assert_eq!(parse_levels(&text).unwrap(), levels);
    }

    #[test]
    fn metric_identities_hold(tp in 0u64..5000, fp in 0u64..5000, tn in 0u64..5000, fn_ in 0u64..5000) {
        let m = Metrics::from_counts(tp as usize, fp as usize, tn as usize, fn_ as usize);
        if tp + fn_ > 0 {
            let recall = tp as f64 / (tp + fn_) as f64;
            prop_assert_eq!(m.recall, recall);
        } else {
            prop_assert!(m.recall.is_nan());
        }
        if tn + fp > 0 {
            let tnr = tn as f64 / (tn + fp) as f64;
            prop_assert_eq!(m.tnr, tnr);
        } else {
            prop_assert!(m.tnr.is_nan());
        }
        if tp + fn_ > 0 && tn + fp > 0 {
            prop_assert_eq!(m.balanced_accuracy, (m.recall + m.tnr) / 2.0);
        }
    }
}
