//! Weighted interconnect graph and the analytical latency/throughput proxies.
//!
//! Conventions: a link's weight is its link latency plus the PHY latency of
//! every chiplet endpoint; path latency sums every vertex and edge weight on
//! the route; flows are aggregated per undirected link; one wire carries one
//! traffic unit per cycle.

use serde::Serialize;
use thiserror::Error;

use crate::geometry::{self, GeometryError};
use crate::model::{DesignBundle, Endpoint, LinkLatency, RoutingTable, Traffic};
use crate::reports::{AreaReport, CostBreakdown, ReportError};

#[derive(Debug, Error, PartialEq)]
pub enum ProxyError {
    #[error("link {link} has no data wires (bandwidth {bandwidth})")]
    NoDataWires { link: usize, bandwidth: i64 },
    #[error("bump count {bandwidth} leaves no data wires")]
    NonPositiveBandwidth { bandwidth: i64 },
    #[error("node {node} has no routing entry for destination {dst}")]
    MissingEntry { node: usize, dst: usize },
    #[error("routing table entry at node {node} for destination {dst} uses link {link}, which is not incident")]
    BadEntry { node: usize, dst: usize, link: usize },
    #[error("routing loop detected from {src} to {dst}")]
    Loop { src: usize, dst: usize },
    #[error("route requested from {0} to itself")]
    SelfRoute(usize),
    #[error("total traffic is zero")]
    ZeroTraffic,
    #[error("no link carries any flow")]
    NoFlow,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Report(#[from] ReportError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Vertex {
    /// Chiplet internal latency or interposer router latency, cycles.
    pub weight: f64,
    pub is_chiplet: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    /// Total edge weight in cycles: `link_cycles + phy_cycles`.
    pub weight: f64,
    pub link_cycles: f64,
    pub phy_cycles: f64,
    pub length_mm: f64,
    /// Data wires; infinite for links without a chiplet endpoint.
    pub bandwidth: f64,
}

impl Edge {
    pub fn other(&self, node: usize) -> usize {
        if self.u == node {
            self.v
        } else {
            self.u
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IciGraph {
    pub vertices: Vec<Vertex>,
    /// Indexed like the topology's links.
    pub edges: Vec<Edge>,
    pub chiplet_count: usize,
    /// Per node: (neighbor, edge index).
    pub adjacency: Vec<Vec<(usize, usize)>>,
}

impl IciGraph {
    pub fn node_count(&self) -> usize {
        self.vertices.len()
    }
}

/// Bump-limited data wires of one chiplet-side of a link.
pub fn edge_bandwidth(area_mm2: f64, fraction: f64, pitch_mm: f64, non_data_wires: u64) -> Result<i64, ProxyError> {
    let bumps = area_mm2 * fraction / (pitch_mm * pitch_mm);
    // Guard against products that are integral in exact arithmetic landing just below.
    let bumps = (bumps * (1.0 + 1e-12)).floor() as i64;
    let bandwidth = bumps - non_data_wires as i64;
    if bandwidth <= 0 {
        return Err(ProxyError::NonPositiveBandwidth { bandwidth });
    }
    Ok(bandwidth)
}

pub fn build_ici_graph(bundle: &DesignBundle) -> Result<IciGraph, ProxyError> {
    let chiplets = bundle.chiplet_count();
    let packaging = &bundle.packaging;
    let mut vertices: Vec<Vertex> = (0..chiplets)
        .map(|i| Vertex {
            weight: bundle.instance_def(i).internal_latency_cycles,
            is_chiplet: true,
        })
        .collect();
    vertices.extend(bundle.placement.interposer_routers.iter().map(|_| Vertex {
        weight: packaging.router_latency_cycles,
        is_chiplet: false,
    }));

    let mut adjacency = vec![Vec::new(); vertices.len()];
    let mut edges = Vec::with_capacity(bundle.topology.links.len());
    for (li, link) in bundle.topology.links.iter().enumerate() {
        let pa = geometry::endpoint_position(bundle, &link.a)?;
        let pb = geometry::endpoint_position(bundle, &link.b)?;
        let length_mm = geometry::link_length(pa, pb, packaging.link_routing);
        let link_cycles = match packaging.link_latency {
            LinkLatency::Constant(c) => c,
            LinkLatency::PerMm(k) => k * length_mm,
        };
        let mut phy_cycles = 0.0;
        let mut bandwidth = f64::INFINITY;
        for ep in [&link.a, &link.b] {
            if let Endpoint::Chiplet { index, phy } = *ep {
                let def = bundle.instance_def(index);
                phy_cycles += def.phy_latency_cycles;
                let fraction = def.phys[phy].area_fraction;
                let b = edge_bandwidth(def.area_mm2(), fraction, def.bump_pitch_mm, packaging.non_data_wires)
                    .map_err(|e| match e {
                        ProxyError::NonPositiveBandwidth { bandwidth } => ProxyError::NoDataWires { link: li, bandwidth },
                        other => other,
                    })?;
                bandwidth = bandwidth.min(b as f64);
            }
        }
        let (u, v) = (link.a.node(chiplets), link.b.node(chiplets));
        adjacency[u].push((v, li));
        adjacency[v].push((u, li));
        edges.push(Edge {
            u,
            v,
            weight: link_cycles + phy_cycles,
            link_cycles,
            phy_cycles,
            length_mm,
            bandwidth,
        });
    }
    Ok(IciGraph {
        vertices,
        edges,
        chiplet_count: chiplets,
        adjacency,
    })
}

/// Vertex and edge sequence of one routed path, source and destination included.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Route {
    pub nodes: Vec<usize>,
    pub links: Vec<usize>,
}

fn next_hop(graph: &IciGraph, table: &RoutingTable, node: usize, dst: usize) -> Result<(usize, usize), ProxyError> {
    let link = table.next_link(node, dst).ok_or(ProxyError::MissingEntry { node, dst })?;
    let edge = graph.edges.get(link).ok_or(ProxyError::BadEntry { node, dst, link })?;
    if edge.u != node && edge.v != node {
        return Err(ProxyError::BadEntry { node, dst, link });
    }
    Ok((edge.other(node), link))
}

/// Follows the routing table from `src` to `dst`.
pub fn route(graph: &IciGraph, table: &RoutingTable, src: usize, dst: usize) -> Result<Route, ProxyError> {
    if src == dst {
        return Err(ProxyError::SelfRoute(src));
    }
    let mut nodes = vec![src];
    let mut links = Vec::new();
    let mut node = src;
    while node != dst {
        if links.len() >= graph.node_count() {
            return Err(ProxyError::Loop { src, dst });
        }
        let (next, link) = next_hop(graph, table, node, dst)?;
        links.push(link);
        nodes.push(next);
        node = next;
    }
    Ok(Route { nodes, links })
}

/// Per-destination view of a routing table: next hop and path latency of
/// every node that routes towards `dst`, computed once and shared by all
/// sources.
struct DestinationTree {
    latency: Vec<f64>,
    next: Vec<(usize, usize)>,
    known: Vec<bool>,
}

impl DestinationTree {
    fn new(graph: &IciGraph, dst: usize) -> Self {
        let n = graph.node_count();
        let mut tree = DestinationTree {
            latency: vec![0.0; n],
            next: vec![(usize::MAX, usize::MAX); n],
            known: vec![false; n],
        };
        tree.latency[dst] = graph.vertices[dst].weight;
        tree.known[dst] = true;
        tree
    }

    fn resolve(&mut self, graph: &IciGraph, table: &RoutingTable, src: usize, dst: usize) -> Result<(), ProxyError> {
        let mut pending = Vec::new();
        let mut node = src;
        while !self.known[node] {
            if pending.len() >= graph.node_count() {
                return Err(ProxyError::Loop { src, dst });
            }
            let hop = next_hop(graph, table, node, dst)?;
            self.next[node] = hop;
            pending.push(node);
            node = hop.0;
        }
        for &v in pending.iter().rev() {
            let (next, link) = self.next[v];
            self.latency[v] = graph.vertices[v].weight + graph.edges[link].weight + self.latency[next];
            self.known[v] = true;
        }
        Ok(())
    }
}

/// Destination trees resolved on demand while the traffic is walked in entry
/// order. Sums therefore follow one fixed order: entries as listed, path
/// latencies accumulated from the destination backwards.
struct Trees<'a> {
    graph: &'a IciGraph,
    table: &'a RoutingTable,
    trees: Vec<Option<DestinationTree>>,
}

impl<'a> Trees<'a> {
    fn new(graph: &'a IciGraph, table: &'a RoutingTable) -> Self {
        Trees {
            graph,
            table,
            trees: (0..graph.chiplet_count).map(|_| None).collect(),
        }
    }

    fn get(&mut self, src: usize, dst: usize) -> Result<&DestinationTree, ProxyError> {
        if src == dst {
            return Err(ProxyError::SelfRoute(src));
        }
        let graph = self.graph;
        let tree = self.trees[dst].get_or_insert_with(|| DestinationTree::new(graph, dst));
        tree.resolve(graph, self.table, src, dst)?;
        Ok(tree)
    }
}

/// Traffic-weighted average path latency in cycles.
pub fn latency_proxy(graph: &IciGraph, table: &RoutingTable, traffic: &Traffic) -> Result<f64, ProxyError> {
    let total = traffic.total();
    if total <= 0.0 {
        return Err(ProxyError::ZeroTraffic);
    }
    let mut trees = Trees::new(graph, table);
    let mut weighted = 0.0;
    for e in &traffic.entries {
        weighted += e.amount * trees.get(e.src, e.dst)?.latency[e.src];
    }
    Ok(weighted / total)
}

/// Traffic routed over each link, both directions combined.
pub fn edge_flows(graph: &IciGraph, table: &RoutingTable, traffic: &Traffic) -> Result<Vec<f64>, ProxyError> {
    let mut flows = vec![0.0; graph.edges.len()];
    let mut trees = Trees::new(graph, table);
    for e in &traffic.entries {
        let tree = trees.get(e.src, e.dst)?;
        let mut node = e.src;
        while node != e.dst {
            let (next, link) = tree.next[node];
            flows[link] += e.amount;
            node = next;
        }
    }
    Ok(flows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThroughputEstimate {
    /// Traffic units per cycle the whole interconnect can sustain.
    pub throughput: f64,
    /// Link with the smallest bandwidth-to-flow ratio.
    pub bottleneck_link: usize,
    pub flows: Vec<f64>,
}

/// `min over loaded links of B/F`, scaled by the total traffic.
pub fn throughput_proxy(graph: &IciGraph, table: &RoutingTable, traffic: &Traffic) -> Result<ThroughputEstimate, ProxyError> {
    let total = traffic.total();
    if total <= 0.0 {
        return Err(ProxyError::ZeroTraffic);
    }
    let flows = edge_flows(graph, table, traffic)?;
    let mut best: Option<(f64, usize)> = None;
    for (i, (&f, e)) in flows.iter().zip(&graph.edges).enumerate() {
        if f > 0.0 {
            let ratio = e.bandwidth / f;
            if best.is_none_or(|(r, _)| ratio < r) {
                best = Some((ratio, i));
            }
        }
    }
    let (ratio, bottleneck_link) = best.ok_or(ProxyError::NoFlow)?;
    Ok(ThroughputEstimate {
        throughput: ratio * total,
        bottleneck_link,
        flows,
    })
}

/// Highest injection rate, in flits per chiplet per cycle, that a chiplet's
/// single injection channel accepts.
pub const MAX_INJECTION_RATE: f64 = 1.0;

/// Proxy throughput expressed as flits per chiplet per cycle, so it can be
/// compared with a simulated saturation injection rate. The bottleneck
/// link's wires are split evenly between its two directions and each
/// direction moves one flit per cycle; the result is capped at what the
/// chiplets can inject.
pub fn throughput_as_injection_rate(graph: &IciGraph, estimate: &ThroughputEstimate) -> f64 {
    uncapped_injection_rate(graph, estimate).min(MAX_INJECTION_RATE)
}

/// The same conversion without the injection cap.
pub fn uncapped_injection_rate(graph: &IciGraph, estimate: &ThroughputEstimate) -> f64 {
    let flit_wires = graph.edges[estimate.bottleneck_link].bandwidth / 2.0;
    if !flit_wires.is_finite() {
        // only router-to-router links carry traffic
        return f64::INFINITY;
    }
    estimate.throughput / (graph.chiplet_count as f64 * flit_wires)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeRow {
    pub link: usize,
    pub u: usize,
    pub v: usize,
    pub length_mm: f64,
    pub weight_cycles: f64,
    pub bandwidth: f64,
    pub flow: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerfReport {
    pub avg_latency_cycles: f64,
    pub throughput_units: f64,
    pub throughput_rate: f64,
    pub bottleneck_link: usize,
    pub area: AreaReport,
    pub power_w: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost: Option<CostBreakdown>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<EdgeRow>>,
}

/// Runs both proxies and every report on a validated bundle.
pub fn estimate(bundle: &DesignBundle, include_edges: bool) -> Result<PerfReport, ProxyError> {
    let graph = build_ici_graph(bundle)?;
    let latency = latency_proxy(&graph, &bundle.routing_table, &bundle.traffic)?;
    let tp = throughput_proxy(&graph, &bundle.routing_table, &bundle.traffic)?;
    let area = crate::reports::area_report(bundle)?;
    let power_w = crate::reports::power_report_with_graph(bundle, &graph);
    let cost = match &bundle.technology {
        Some(tech) => Some(crate::reports::cost_report(bundle, tech)?),
        None => None,
    };
    let edges = include_edges.then(|| {
        graph
            .edges
            .iter()
            .enumerate()
            .map(|(i, e)| EdgeRow {
                link: i,
                u: e.u,
                v: e.v,
                length_mm: e.length_mm,
                weight_cycles: e.weight,
                bandwidth: e.bandwidth,
                flow: tp.flows[i],
            })
            .collect()
    });
    Ok(PerfReport {
        avg_latency_cycles: latency,
        throughput_units: tp.throughput,
        throughput_rate: throughput_as_injection_rate(&graph, &tp),
        bottleneck_link: tp.bottleneck_link,
        area,
        power_w,
        cost,
        edges,
    })
}
