mod common;

use chipdse::flitsim::{self, SimError, SimParams, Workload};
use chipdse::model::{DesignBundle, Endpoint, Trace, TraceMessage};
use chipdse::netgen::{generate_design, DesignPoint, RoutingAlgorithm, TopologyKind, TrafficPattern};
use chipdse::proxy;

/// Hand count of one packet's latency: every node on the path costs its
/// vertex weight or the four pipeline stages, whichever is larger, and every
/// link its rounded-up wire and PHY cycles.
fn analytic(bundle: &DesignBundle, src: usize, dst: usize) -> u64 {
    let graph = proxy::build_ici_graph(bundle).unwrap();
    let route = proxy::route(&graph, &bundle.routing_table, src, dst).unwrap();
    let nodes: u64 = route.nodes.iter().map(|&v| (graph.vertices[v].weight.ceil() as u64).max(4)).sum();
    let links: u64 = route
        .links
        .iter()
        .map(|&l| graph.edges[l].link_cycles.ceil() as u64 + graph.edges[l].phy_cycles.ceil() as u64)
        .sum();
    nodes + links
}

fn single_message(src: usize, dst: usize) -> Trace {
    Trace {
        messages: vec![TraceMessage {
            id: 0,
            earliest_injection_cycle: 5,
            src,
            dst,
            size_flits: 1,
            deps: vec![],
        }],
    }
}

#[test]
fn single_packets_match_the_hand_count_on_every_pair() {
    let mut designs = common::corpus();
    designs.extend(common::small_generated(9).into_iter().step_by(5));
    let params = SimParams::default();
    for (name, bundle) in &designs {
        let n = bundle.chiplet_count();
        for src in 0..n {
            for dst in (0..n).filter(|&d| d != src) {
                let r = flitsim::replay_trace(bundle, &bundle.routing_table, &single_message(src, dst), &params).unwrap();
                assert_eq!(
                    r.avg_packet_latency_cycles,
                    analytic(bundle, src, dst) as f64,
                    "{name}: {src}->{dst}"
                );
            }
        }
    }
}

fn with_internal_latency(mut bundle: DesignBundle, cycles: f64) -> DesignBundle {
    for def in bundle.chiplets.values_mut() {
        def.internal_latency_cycles = cycles;
    }
    bundle
}

#[test]
fn doubling_internal_latency_raises_zero_load_latency() {
    // Below four cycles the pipeline dominates, so start at four.
    let params = SimParams::default();
    for kind in [TopologyKind::Mesh, TopologyKind::Torus, TopologyKind::Hexamesh] {
        let base = generate_design(&DesignPoint::new(kind, 3, 3, TrafficPattern::Uniform)).unwrap();
        let b4 = with_internal_latency(base.clone(), 4.0);
        let b8 = with_internal_latency(base, 8.0);
        let l4 = flitsim::zero_load_latency(&b4, &b4.routing_table, &b4.traffic, &params).unwrap();
        let l8 = flitsim::zero_load_latency(&b8, &b8.routing_table, &b8.traffic, &params).unwrap();
        // Every path crosses at least source and destination.
        assert!(l8 - l4 >= 2.0 * 4.0 - 0.5, "{}: {l4} -> {l8}", kind.name());
    }
}

#[test]
fn zero_load_stays_above_the_proxy_minus_pipeline_overhead() {
    let params = SimParams::default();
    for (name, bundle) in common::corpus() {
        let graph = proxy::build_ici_graph(&bundle).unwrap();
        let p = proxy::latency_proxy(&graph, &bundle.routing_table, &bundle.traffic).unwrap();
        let s = flitsim::zero_load_latency(&bundle, &bundle.routing_table, &bundle.traffic, &params).unwrap();
        // Rounding only ever adds cycles; the pipeline floor adds at most
        // four per node.
        assert!(s >= p - 0.5, "{name}: sim {s} proxy {p}");
    }
}

#[test]
fn runs_are_bit_reproducible() {
    let b = generate_design(&DesignPoint::new(TopologyKind::Mesh, 3, 3, TrafficPattern::Permutation)).unwrap();
    let params = SimParams {
        measurement_cycles: Some(2000),
        ..SimParams::default()
    };
    let w = Workload::Synthetic {
        traffic: &b.traffic,
        rate: 0.2,
    };
    let a = flitsim::simulate(&b, &b.routing_table, w, &params).unwrap();
    let c = flitsim::simulate(&b, &b.routing_table, w, &params).unwrap();
    assert_eq!(a, c);
    let other = SimParams { seed: 2, ..params };
    assert_ne!(flitsim::simulate(&b, &b.routing_table, w, &other).unwrap(), a);
}

#[test]
fn low_load_mesh_is_stable() {
    let b = generate_design(&DesignPoint::new(TopologyKind::Mesh, 4, 4, TrafficPattern::Uniform)).unwrap();
    let w = Workload::Synthetic {
        traffic: &b.traffic,
        rate: 0.001,
    };
    let r = flitsim::simulate(&b, &b.routing_table, w, &SimParams::default()).unwrap();
    assert!(!r.saturated);
    assert!(r.delivered_packets > 0);
    assert!(r.accepted_rate <= r.offered_rate * 1.5 + 0.001, "{r:?}");
}

#[test]
fn accepted_rate_tracks_offered_rate_below_saturation() {
    let b = generate_design(&DesignPoint::new(TopologyKind::Torus, 4, 4, TrafficPattern::Uniform)).unwrap();
    for rate in [0.05, 0.2] {
        let w = Workload::Synthetic { traffic: &b.traffic, rate };
        let r = flitsim::simulate(&b, &b.routing_table, w, &SimParams::default()).unwrap();
        assert!(!r.saturated, "{rate}: {r:?}");
        assert!((r.accepted_rate - rate).abs() < 0.25 * rate, "{rate}: {r:?}");
        let min_hops = 2.0 * 4.0 + 24.0;
        assert!(r.avg_packet_latency_cycles >= min_hops, "{r:?}");
    }
}

#[test]
fn cyclic_routing_deadlocks_and_names_blocked_channels() {
    // A ring of four with every route forced clockwise. Four long packets
    // each going two hops hold one channel and wait for the next.
    let mut b = generate_design(&DesignPoint::new(TopologyKind::Torus, 1, 4, TrafficPattern::Uniform)).unwrap();
    let clockwise = |v: usize| {
        b.topology
            .links
            .iter()
            .position(|l| {
                let (x, y) = (l.a.node(4), l.b.node(4));
                (x, y) == (v, (v + 1) % 4) || (y, x) == (v, (v + 1) % 4)
            })
            .unwrap()
    };
    let hops: Vec<usize> = (0..4).map(clockwise).collect();
    for (v, m) in b.routing_table.nodes.iter_mut().enumerate() {
        for link in m.values_mut() {
            *link = hops[v];
        }
    }
    let trace = Trace {
        messages: (0..4)
            .map(|i| TraceMessage {
                id: i as u64,
                earliest_injection_cycle: 0,
                src: i,
                dst: (i + 2) % 4,
                size_flits: 8,
                deps: vec![],
            })
            .collect(),
    };
    let params = SimParams {
        vcs_per_port: 1,
        buffer_flits_per_vc: 1,
        ..SimParams::default()
    };
    match flitsim::replay_trace(&b, &b.routing_table, &trace, &params) {
        Err(SimError::Deadlock { blocked, .. }) => {
            assert!(blocked.len() >= 4, "{blocked:?}");
            assert!(blocked.iter().all(|v| v.node < 4 && v.flits > 0));
        }
        other => panic!("expected a deadlock, got {other:?}"),
    }
}

#[test]
fn deadlock_free_tables_survive_the_same_stress() {
    let mut p = DesignPoint::new(TopologyKind::Torus, 1, 6, TrafficPattern::Uniform);
    p.routing = RoutingAlgorithm::TurnRandom;
    let b = generate_design(&p).unwrap();
    let params = SimParams {
        vcs_per_port: 1,
        buffer_flits_per_vc: 1,
        packet_size_flits: 8,
        measurement_cycles: Some(3000),
        ..SimParams::default()
    };
    let w = Workload::Synthetic {
        traffic: &b.traffic,
        rate: 1.0,
    };
    let r = flitsim::simulate(&b, &b.routing_table, w, &params);
    assert!(!matches!(r, Err(SimError::Deadlock { .. })), "{r:?}");
}

#[test]
fn trace_makespan_respects_dependencies() {
    let path = common::repo_root().join("designs/chain3/design.json");
    let b = chipdse::model::load_design(path).unwrap();
    let trace = b.trace.clone().unwrap();
    let r = flitsim::replay_trace(&b, &b.routing_table, &trace, &SimParams::default()).unwrap();
    // Message 3 waits for 1, which waits for 0: three serialized transfers.
    let single = |s, d| analytic(&b, s, d) + 3; // four flits add three cycles
    let bound = single(0, 2) + 1 + single(2, 0) + 1 + single(0, 1);
    assert!(r.makespan_cycles.unwrap() >= bound, "{r:?} bound {bound}");
    assert_eq!(r.delivered_packets, 4);
}

#[test]
fn router_endpoints_do_not_change_the_hand_count_rule() {
    let b = chipdse::fixtures::via_router_bundle();
    assert!(b.topology.links.iter().any(|l| matches!(l.b, Endpoint::InterposerRouter { .. })));
    let r = flitsim::replay_trace(&b, &b.routing_table, &single_message(0, 1), &SimParams::default()).unwrap();
    assert_eq!(r.avg_packet_latency_cycles, analytic(&b, 0, 1) as f64);
}
