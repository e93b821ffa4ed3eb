//! The proxies must agree exactly with a naive recomputation.

mod common;

use chipdse::model::DesignBundle;
use chipdse::proxy::{build_ici_graph, edge_flows, latency_proxy, throughput_proxy};

fn check(name: &str, bundle: &DesignBundle) {
    let graph = build_ici_graph(bundle).unwrap();
    let expect = common::naive_proxies(bundle);
    let (table, traffic) = (&bundle.routing_table, &bundle.traffic);
    assert_eq!(edge_flows(&graph, table, traffic).unwrap(), expect.flows, "{name}");
    assert_eq!(latency_proxy(&graph, table, traffic).unwrap(), expect.latency, "{name}");
    assert_eq!(throughput_proxy(&graph, table, traffic).unwrap().throughput, expect.throughput, "{name}");
}

#[test]
fn corpus_designs_match() {
    let corpus = common::corpus();
    for (name, bundle) in &corpus {
        check(name, bundle);
    }
}

#[test]
fn generated_designs_up_to_12_nodes_match() {
    let designs = common::small_generated(12);
    assert!(designs.len() > 200, "{}", designs.len());
    for (name, bundle) in &designs {
        check(name, bundle);
    }
}
