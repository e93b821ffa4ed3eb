#![allow(dead_code)]

use std::path::{Path, PathBuf};

use chipdse::model::{load_design, DesignBundle, Endpoint};
use chipdse::proxy::build_ici_graph;
use chipdse::netgen::{generate_design, DesignPoint, RoutingAlgorithm, TopologyKind, TrafficPattern};

pub const PATTERNS: [TrafficPattern; 4] = [
    TrafficPattern::Uniform,
    TrafficPattern::Transpose,
    TrafficPattern::Permutation,
    TrafficPattern::Hotspot,
];

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// Every `design.json` under the repository's `designs/` directory.
pub fn corpus_paths() -> Vec<PathBuf> {
    let mut out = Vec::new();
    let dir = repo_root().join("designs");
    for entry in std::fs::read_dir(&dir).expect("designs directory") {
        let path = entry.unwrap().path().join("design.json");
        if path.is_file() {
            out.push(path);
        }
    }
    out.sort();
    out
}

pub fn corpus() -> Vec<(String, DesignBundle)> {
    corpus_paths()
        .into_iter()
        .map(|p| (p.display().to_string(), load_design(&p).unwrap()))
        .collect()
}

/// Generated designs with at most `max_nodes` chiplets: every kind, grid,
/// traffic pattern and routing algorithm the generators support.
pub fn small_generated(max_nodes: usize) -> Vec<(String, DesignBundle)> {
    let mut out = Vec::new();
    for kind in TopologyKind::GENERATED {
        for rows in 1..=max_nodes {
            for cols in 1..=max_nodes {
                if rows * cols < 2 || rows * cols > max_nodes {
                    continue;
                }
                for traffic in PATTERNS {
                    for routing in [RoutingAlgorithm::LowestId, RoutingAlgorithm::TurnRandom] {
                        let mut p = DesignPoint::new(kind, rows, cols, traffic);
                        p.routing = routing;
                        p.seed = 11;
                        if let Ok(b) = generate_design(&p) {
                            let name = format!("{} {rows}x{cols} {} {}", kind.name(), traffic.name(), routing.name());
                            out.push((name, b));
                        }
                    }
                }
            }
        }
    }
    out
}

pub struct Naive {
    pub flows: Vec<f64>,
    pub latency: f64,
    pub throughput: f64,
}

/// Naive recomputation of the proxies: every traffic entry is routed hop by
/// hop straight from the routing table and its amount added to each link on
/// the way. Path latency is summed from the destination backwards.
pub fn naive_proxies(bundle: &DesignBundle) -> Naive {
    let graph = build_ici_graph(bundle).unwrap();
    let chiplets = bundle.chiplet_count();
    let node_weight = |v: usize| {
        if v < chiplets {
            bundle.chiplets[&bundle.placement.chiplets[v].chiplet].internal_latency_cycles
        } else {
            bundle.packaging.router_latency_cycles
        }
    };
    let node_of = |e: &Endpoint| match *e {
        Endpoint::Chiplet { index, .. } => index,
        Endpoint::InterposerRouter { index } => chiplets + index,
    };
    let mut flows = vec![0.0; bundle.topology.links.len()];
    let mut weighted = 0.0;
    let mut total = 0.0;
    for e in &bundle.traffic.entries {
        let mut nodes = vec![e.src];
        let mut links = Vec::new();
        while *nodes.last().unwrap() != e.dst {
            let here = *nodes.last().unwrap();
            let link = bundle.routing_table.nodes[here][&e.dst];
            let l = &bundle.topology.links[link];
            let (a, b) = (node_of(&l.a), node_of(&l.b));
            nodes.push(if a == here { b } else { a });
            links.push(link);
            assert!(links.len() <= graph.node_count(), "routing loop");
        }
        for &l in &links {
            flows[l] += e.amount;
        }
        let mut latency = node_weight(e.dst);
        for i in (0..links.len()).rev() {
            latency += node_weight(nodes[i]) + graph.edges[links[i]].weight;
        }
        weighted += e.amount * latency;
        total += e.amount;
    }
    let mut ratio = f64::INFINITY;
    for (l, &f) in flows.iter().enumerate() {
        if f > 0.0 {
            ratio = ratio.min(graph.edges[l].bandwidth / f);
        }
    }
    Naive {
        flows,
        latency: weighted / total,
        throughput: ratio * total,
    }
}
