mod common;

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use seclink_core::format::{parse_repository, serialize_repository};
use seclink_core::library::{classify, instantiate, MechanismKind};
use seclink_core::metrics::{cyclomatic, halstead, maintainability_index, MetricsError};
use seclink_core::model::{ConnectionKind, ControlFlowGraph, FanOutPolicy};
use seclink_core::trace::{trace_back, trace_forward};

use common::strategies::{graph, recipe, token, trace_graph};
use common::{build, library};
use common::{close, closure, cycle_rank, halstead_oracle};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn halstead_matches_counting_oracle(tokens in proptest::collection::vec(token(), 1..60)) {
        let h = halstead(&tokens).unwrap();
        let o = halstead_oracle(&tokens);
        let got = [h.length as f64, h.vocabulary as f64, h.estimated_length, h.purity_ratio,
                   h.volume, h.difficulty, h.effort, h.n1 as f64, h.n2 as f64];
        for (g, w) in got.iter().zip(o) {
            prop_assert!(close(*g, w), "{:?} vs {:?}", got, o);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn cyclomatic_matches_traversal((nodes, edges) in graph()) {
        let (p, extra) = cycle_rank(nodes, &edges);
        let cfg = ControlFlowGraph::new(nodes as i64, edges.len() as i64, p);
        prop_assert_eq!(cyclomatic(&cfg).unwrap(), extra + p);
    }

    #[test]
    fn cyclomatic_rejects_impossible_graphs(nodes in -2i64..10, edges in -2i64..10, comps in -2i64..12) {
        let cfg = ControlFlowGraph::new(nodes, edges, comps);
        let possible = nodes >= 1 && edges >= 0 && comps >= 1 && comps <= nodes && edges >= nodes - comps;
        match cyclomatic(&cfg) {
            Ok(v) => prop_assert!(possible && v == edges - nodes + 2 * comps && v >= comps),
            Err(MetricsError::MalformedGraph(_)) => prop_assert!(!possible),
            Err(e) => prop_assert!(false, "unexpected {}", e),
        }
    }

    #[test]
    fn trace_reachability_is_dual_and_complete(g in trace_graph()) {
        let r = closure(&g);
        let ids: Vec<String> = g.nodes().iter().map(|n| n.id.clone()).collect();
        for (i, x) in ids.iter().enumerate() {
            let fwd = trace_forward(&g, x).unwrap();
            let want: BTreeSet<String> = ids.iter().enumerate().filter(|(j, _)| r[i][*j] && *j != i).map(|(_, y)| y.clone()).collect();
            prop_assert_eq!(&fwd, &want);
            for y in &ids {
                prop_assert_eq!(fwd.contains(y), trace_back(&g, y).unwrap().contains(x));
            }
        }
    }

    #[test]
    fn repository_round_trip(g in trace_graph()) {
        let text = serialize_repository(&g);
        let back = parse_repository(text.as_bytes()).unwrap();
        prop_assert_eq!(&back, &g);
        prop_assert_eq!(serialize_repository(&back), text);
    }

    #[test]
    fn fan_out_counts_outgoing_connections(r in recipe(6, 10)) {
        let sys = build(&r);
        let fbn = &sys.network;
        let table = fbn.fan_out_table(FanOutPolicy::DataOnly);
        for inst in &fbn.instances {
            let mut data = 0;
            let mut all = 0;
            for c in &fbn.connections {
                if c.src.to_string().split('.').next() == Some(inst.name.as_str()) {
                    all += 1;
                    if c.kind == ConnectionKind::Data {
                        data += 1;
                    }
                }
            }
            prop_assert_eq!(fbn.fan_out(&inst.name, FanOutPolicy::DataOnly).unwrap(), data);
            prop_assert_eq!(fbn.fan_out(&inst.name, FanOutPolicy::All).unwrap(), all);
            prop_assert_eq!(table[inst.name.as_str()], data);
        }
    }

    #[test]
    fn classification_follows_empty_partition(which in 0..5usize, split in proptest::collection::vec(0..2usize, 32)) {
        let lib = library();
        let mut sm = lib.mechanisms.values().nth(which).unwrap().clone();
        let names: Vec<String> = sm.network.instances.iter().map(|i| i.name.clone()).collect();
        sm.partition_a.clear();
        sm.partition_b.clear();
        for (name, side) in names.iter().zip(split.iter().cycle()) {
            if *side == 0 { sm.partition_a.insert(name.clone()); } else { sm.partition_b.insert(name.clone()); }
        }
        let want = match (sm.partition_a.is_empty(), sm.partition_b.is_empty()) {
            (true, _) => MechanismKind::Receive,
            (_, true) => MechanismKind::Send,
            _ => MechanismKind::SendReceive,
        };
        prop_assert_eq!(classify(&sm), want);
    }

    #[test]
    fn instantiation_preserves_shape(which in 0..5usize, a in "[A-Z][a-z0-9]{0,4}", b in "[A-Z][a-z0-9]{0,4}") {
        prop_assume!(a != b);
        let lib = library();
        let sm = lib.mechanisms.values().nth(which).unwrap();
        let fa = instantiate(sm, &a, &BTreeMap::new()).unwrap();
        let fb = instantiate(sm, &b, &BTreeMap::new()).unwrap();
        prop_assert_eq!(fa.network.instances.len(), sm.network.instances.len());
        prop_assert_eq!(fa.network.connections.len(), sm.network.connections.len());
        prop_assert_eq!(fa.partition_a.len(), sm.partition_a.len());
        prop_assert_eq!(fa.partition_b.len(), sm.partition_b.len());
        for (orig, inst) in sm.network.instances.iter().zip(&fa.network.instances) {
            prop_assert_eq!(inst.name.clone(), format!("{}_{}", orig.name, a));
            prop_assert_eq!(&inst.type_name, &orig.type_name);
        }
        let names_a: BTreeSet<_> = fa.instance_names().into_iter().collect();
        let names_b: BTreeSet<_> = fb.instance_names().into_iter().collect();
        prop_assert_eq!(names_a.len(), sm.network.instances.len());
        prop_assert!(names_a.is_disjoint(&names_b));
    }
}

#[test]
fn loc_search_recovers_twenty_and_twenty_three() {
    let best = |v: f64, mm: f64, target: f64| {
        (1..=100u32)
            .min_by(|x, y| {
                let rx = (maintainability_index(v, mm, *x as f64).unwrap().mi - target).abs();
                let ry = (maintainability_index(v, mm, *y as f64).unwrap().mi - target).abs();
                rx.total_cmp(&ry)
            })
            .unwrap()
    };
    assert_eq!(best(183.94, 8.0, 93.51), 20);
    assert_eq!(best(213.94, 13.0, 89.31), 23);
    assert!((maintainability_index(183.94, 8.0, 20.0).unwrap().mi - 93.51).abs() <= 0.05);
    assert!((maintainability_index(213.94, 13.0, 23.0).unwrap().mi - 89.31).abs() <= 0.2);
    assert!(matches!(
        maintainability_index(0.0, 1.0, 1.0),
        Err(MetricsError::DomainError(_))
    ));
    assert!(matches!(
        maintainability_index(1.0, 1.0, 0.0),
        Err(MetricsError::DomainError(_))
    ));
}
