//! Destination-based routing tables for arbitrary topologies.
//!
//! `lowest_id` follows BFS shortest paths and breaks ties towards the lowest
//! neighbor id. `turn_random` forbids every turn from a down hop into an up
//! hop (with respect to a fixed node order), which keeps the channel
//! dependency graph acyclic, then samples next hops among the shortest
//! permitted continuations.

use std::collections::{BTreeMap, VecDeque};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::GenError;
use crate::model::{RoutingTable, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoutingAlgorithm {
    LowestId,
    TurnRandom,
}

impl RoutingAlgorithm {
    pub fn name(self) -> &'static str {
        match self {
            RoutingAlgorithm::LowestId => "lowest_id",
            RoutingAlgorithm::TurnRandom => "turn_random",
        }
    }
}

/// Adjacency view of a topology over network node ids.
#[derive(Debug, Clone)]
pub struct NetGraph {
    /// Per node: (neighbor, link) sorted by neighbor id.
    pub adjacency: Vec<Vec<(usize, usize)>>,
    /// Per link: its two node ids.
    pub ends: Vec<(usize, usize)>,
}

impl NetGraph {
    pub fn from_topology(topology: &Topology, chiplet_count: usize, node_count: usize) -> Self {
        let mut adjacency = vec![Vec::new(); node_count];
        let mut ends = Vec::with_capacity(topology.links.len());
        for (li, link) in topology.links.iter().enumerate() {
            let (u, v) = (link.a.node(chiplet_count), link.b.node(chiplet_count));
            adjacency[u].push((v, li));
            adjacency[v].push((u, li));
            ends.push((u, v));
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        NetGraph { adjacency, ends }
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    /// Hop distances from `src` (usize::MAX when unreachable).
    pub fn bfs(&self, src: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.node_count()];
        dist[src] = 0;
        let mut queue = VecDeque::from([src]);
        while let Some(n) = queue.pop_front() {
            for &(m, _) in &self.adjacency[n] {
                if dist[m] == usize::MAX {
                    dist[m] = dist[n] + 1;
                    queue.push_back(m);
                }
            }
        }
        dist
    }

    /// Directed channel id of `link` traversed starting at `from`.
    pub fn channel(&self, link: usize, from: usize) -> usize {
        if self.ends[link].0 == from {
            2 * link
        } else {
            2 * link + 1
        }
    }

    /// (source node, target node) of a directed channel.
    pub fn channel_ends(&self, channel: usize) -> (usize, usize) {
        let (u, v) = self.ends[channel / 2];
        if channel.is_multiple_of(2) {
            (u, v)
        } else {
            (v, u)
        }
    }
}

pub fn generate_routing_table(
    topology: &Topology,
    chiplet_count: usize,
    node_count: usize,
    algorithm: RoutingAlgorithm,
    seed: u64,
) -> Result<RoutingTable, GenError> {
    let graph = NetGraph::from_topology(topology, chiplet_count, node_count);
    match algorithm {
        RoutingAlgorithm::LowestId => lowest_id(&graph, chiplet_count),
        RoutingAlgorithm::TurnRandom => turn_random(&graph, chiplet_count, seed),
    }
}

fn lowest_id(graph: &NetGraph, chiplet_count: usize) -> Result<RoutingTable, GenError> {
    let n = graph.node_count();
    let mut nodes = vec![BTreeMap::new(); n];
    for dst in 0..chiplet_count {
        let dist = graph.bfs(dst);
        for v in 0..n {
            if v == dst {
                continue;
            }
            if dist[v] == usize::MAX {
                return Err(GenError::Unroutable { src: v, dst });
            }
            // adjacency is sorted by neighbor id, so the first match is the lowest
            let &(_, link) = graph.adjacency[v]
                .iter()
                .find(|&&(w, _)| dist[w] + 1 == dist[v])
                .expect("a BFS predecessor exists");
            nodes[v].insert(dst, link);
        }
    }
    Ok(RoutingTable { nodes })
}

/// Cycle-breaking order over nodes: BFS level from node 0, then node id.
/// A hop is "up" when it moves to an earlier node in this order.
pub fn node_order(graph: &NetGraph) -> Vec<(usize, usize)> {
    let level = graph.bfs(0);
    (0..graph.node_count()).map(|v| (level[v], v)).collect()
}

/// True when the turn `a -> b -> c` is permitted: every turn except an up
/// hop that follows a down hop. Any route built from permitted turns has an
/// acyclic channel dependency graph.
pub fn turn_permitted(order: &[(usize, usize)], a: usize, b: usize, c: usize) -> bool {
    let down_then = order[b] > order[a];
    let up_next = order[c] < order[b];
    !(down_then && up_next)
}

fn turn_random(graph: &NetGraph, chiplet_count: usize, seed: u64) -> Result<RoutingTable, GenError> {
    let n = graph.node_count();
    let order = node_order(graph);
    let mut by_order: Vec<usize> = (0..n).collect();
    by_order.sort_by_key(|&v| order[v]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = vec![BTreeMap::new(); n];
    for dst in 0..chiplet_count {
        // Nodes with an all-down path to dst keep going down; once a packet
        // took a down hop it may not turn up again, so these nodes never
        // hand packets to an up hop.
        let mut down = vec![usize::MAX; n];
        down[dst] = 0;
        let mut queue = VecDeque::from([dst]);
        while let Some(x) = queue.pop_front() {
            for &(y, _) in &graph.adjacency[x] {
                if order[y] < order[x] && down[y] == usize::MAX {
                    down[y] = down[x] + 1;
                    queue.push_back(y);
                }
            }
        }
        // Everyone else first climbs; up neighbors come earlier in the order.
        let mut len = down.clone();
        for &v in &by_order {
            if len[v] != usize::MAX {
                continue;
            }
            len[v] = graph.adjacency[v]
                .iter()
                .filter(|&&(w, _)| order[w] < order[v] && len[w] != usize::MAX)
                .map(|&(w, _)| len[w] + 1)
                .min()
                .ok_or(GenError::Unroutable { src: v, dst })?;
        }
        for v in (0..n).filter(|&v| v != dst) {
            let options: Vec<usize> = graph.adjacency[v]
                .iter()
                .filter(|&&(w, _)| {
                    let climbing = order[w] < order[v];
                    let allowed = if down[v] != usize::MAX { !climbing && down[w] != usize::MAX } else { climbing };
                    allowed && len[w] + 1 == len[v]
                })
                .map(|&(_, link)| link)
                .collect();
            let &link = options.choose(&mut rng).ok_or(GenError::Unroutable { src: v, dst })?;
            nodes[v].insert(dst, link);
        }
    }
    Ok(RoutingTable { nodes })
}

/// Channel dependency graph induced by the table's chiplet-to-chiplet routes.
/// Returns a channel on a dependency cycle, if one exists.
pub fn dependency_cycle(graph: &NetGraph, table: &RoutingTable, chiplet_count: usize) -> Option<usize> {
    let channels = graph.ends.len() * 2;
    let mut deps: Vec<Vec<usize>> = vec![Vec::new(); channels];
    for dst in 0..chiplet_count {
        // Every node's route to dst continues with its own next hop, so the
        // dependencies are exactly (into w) -> (w's next hop) for each hop.
        for v in 0..graph.node_count() {
            if v == dst {
                continue;
            }
            let Some(link) = table.next_link(v, dst) else { continue };
            let (a, b) = graph.ends[link];
            let w = if a == v { b } else { a };
            if w == dst {
                continue;
            }
            let Some(out) = table.next_link(w, dst) else { continue };
            deps[graph.channel(link, v)].push(graph.channel(out, w));
        }
    }
    for d in &mut deps {
        d.sort_unstable();
        d.dedup();
    }
    let mut color = vec![0u8; channels];
    for root in 0..channels {
        if color[root] != 0 {
            continue;
        }
        color[root] = 1;
        let mut stack = vec![(root, 0usize)];
        while let Some(top) = stack.last_mut() {
            let (c, i) = *top;
            if i < deps[c].len() {
                top.1 += 1;
                let next = deps[c][i];
                match color[next] {
                    0 => {
                        color[next] = 1;
                        stack.push((next, 0));
                    }
                    1 => return Some(next),
                    _ => {}
                }
            } else {
                color[c] = 2;
                stack.pop();
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgen::topology::{generate_topology, TopologyKind};
    use crate::netgen::unbound_topology;

    fn table(kind: TopologyKind, rows: usize, cols: usize, alg: RoutingAlgorithm, seed: u64) -> (NetGraph, RoutingTable) {
        let set = generate_topology(kind, rows, cols).unwrap();
        let topo = unbound_topology(&set);
        let n = rows * cols;
        let t = generate_routing_table(&topo, n, n, alg, seed).unwrap();
        (NetGraph::from_topology(&topo, n, n), t)
    }

    fn next_node(g: &NetGraph, t: &RoutingTable, v: usize, d: usize) -> usize {
        let (a, b) = g.ends[t.next_link(v, d).unwrap()];
        if a == v {
            b
        } else {
            a
        }
    }

    #[test]
    fn mesh_lowest_id_first_hop() {
        let (g, t) = table(TopologyKind::Mesh, 3, 3, RoutingAlgorithm::LowestId, 0);
        assert_eq!(next_node(&g, &t, 0, 8), 1);
    }

    #[test]
    fn turn_random_depends_on_seed_but_stays_minimal() {
        let (g, t1) = table(TopologyKind::Mesh, 4, 4, RoutingAlgorithm::TurnRandom, 1);
        let (_, t1b) = table(TopologyKind::Mesh, 4, 4, RoutingAlgorithm::TurnRandom, 1);
        let (_, t2) = table(TopologyKind::Mesh, 4, 4, RoutingAlgorithm::TurnRandom, 2);
        assert_eq!(t1, t1b);
        for t in [&t1, &t2] {
            assert!(dependency_cycle(&g, t, 16).is_none());
            for d in 0..16 {
                let dist = g.bfs(d);
                for s in 0..16 {
                    let mut v = s;
                    let mut hops = 0;
                    while v != d {
                        v = next_node(&g, t, v, d);
                        hops += 1;
                        assert!(hops <= 16);
                    }
                    assert_eq!(hops, dist[s]);
                }
            }
        }
    }

    #[test]
    fn ring_shortest_paths_have_cyclic_dependencies() {
        // A minimal table on a 6-ring cannot avoid a dependency cycle.
        let (g, t) = table(TopologyKind::Torus, 1, 6, RoutingAlgorithm::LowestId, 0);
        assert!(dependency_cycle(&g, &t, 6).is_some());
    }
}
