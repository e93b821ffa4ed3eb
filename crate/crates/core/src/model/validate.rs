use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::Serialize;

use super::{DesignBundle, Endpoint};
use crate::geometry;

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    Chiplets,
    Placement,
    Topology,
    Packaging,
    RoutingTable,
    Traffic,
    Trace,
    Technology,
    SimConfig,
}

impl fmt::Display for InputKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            InputKind::Chiplets => "chiplets",
            InputKind::Placement => "placement",
            InputKind::Topology => "topology",
            InputKind::Packaging => "packaging",
            InputKind::RoutingTable => "routing_table",
            InputKind::Traffic => "traffic",
            InputKind::Trace => "trace",
            InputKind::Technology => "technology",
            InputKind::SimConfig => "sim_config",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: InputKind,
    pub index: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.index {
            Some(i) => write!(f, "{}[{}]: {}", self.kind, i, self.message),
            None => write!(f, "{}: {}", self.kind, self.message),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, kind: InputKind, index: Option<usize>, message: impl Into<String>) {
        self.violations.push(Violation {
            kind,
            index,
            message: message.into(),
        });
    }
}

/// Checks every invariant of the input model, including cross-file references.
pub fn validate(bundle: &DesignBundle) -> ValidationReport {
    let mut report = ValidationReport::default();
    check_chiplets(bundle, &mut report);
    let placement_ok = check_placement(bundle, &mut report);
    check_packaging(bundle, &mut report);
    let topology_ok = placement_ok && check_topology(bundle, &mut report);
    if topology_ok {
        check_routing(bundle, &mut report);
    }
    check_traffic(bundle, &mut report);
    check_trace(bundle, &mut report);
    check_technology(bundle, &mut report);
    check_sim_config(bundle, &mut report);
    report
}

fn check_chiplets(bundle: &DesignBundle, report: &mut ValidationReport) {
    use InputKind::Chiplets as K;
    for (i, def) in bundle.chiplets.values().enumerate() {
        let name = &def.name;
        let positive = [("width_mm", def.width_mm), ("height_mm", def.height_mm), ("bump_pitch_mm", def.bump_pitch_mm)];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                report.push(K, Some(i), format!("chiplet {name:?}: {field} must be > 0, got {v}"));
            }
        }
        let nonneg = [
            ("internal_latency_cycles", def.internal_latency_cycles),
            ("phy_latency_cycles", def.phy_latency_cycles),
            ("power_w", def.power_w),
        ];
        for (field, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                report.push(K, Some(i), format!("chiplet {name:?}: {field} must be >= 0, got {v}"));
            }
        }
        let mut fraction_sum = 0.0;
        for (p, phy) in def.phys.iter().enumerate() {
            let pos = phy.position;
            if !pos.is_finite()
                || pos.x < -EPS
                || pos.y < -EPS
                || pos.x > def.width_mm + EPS
                || pos.y > def.height_mm + EPS
            {
                report.push(K, Some(i), format!("chiplet {name:?}: PHY {p} lies outside the footprint"));
            }
            if !(phy.area_fraction > 0.0 && phy.area_fraction <= 1.0) {
                report.push(
                    K,
                    Some(i),
                    format!("chiplet {name:?}: PHY {p} area_fraction must be in (0, 1], got {}", phy.area_fraction),
                );
            }
            fraction_sum += phy.area_fraction;
        }
        if fraction_sum > 1.0 + EPS {
            report.push(K, Some(i), format!("chiplet {name:?}: PHY area fractions sum to {fraction_sum} > 1"));
        }
    }
}

/// Returns false when instances reference unknown chiplets, in which case the
/// checks that depend on geometry are skipped.
fn check_placement(bundle: &DesignBundle, report: &mut ValidationReport) -> bool {
    use InputKind::Placement as K;
    let mut ok = true;
    if bundle.placement.chiplets.is_empty() {
        report.push(K, None, "placement has no chiplets");
        ok = false;
    }
    let mut rects = Vec::new();
    for (i, inst) in bundle.placement.chiplets.iter().enumerate() {
        if !inst.position.is_finite() {
            report.push(K, Some(i), "position is not finite");
        }
        match bundle.chiplets.get(&inst.chiplet) {
            Some(def) => rects.push((i, geometry::footprint(def, inst))),
            None => {
                report.push(K, Some(i), format!("unknown chiplet {:?}", inst.chiplet));
                ok = false;
            }
        }
    }
    for (a, (i, ra)) in rects.iter().enumerate() {
        for (j, rb) in rects.iter().skip(a + 1) {
            if ra.overlaps_interior(rb, EPS) {
                report.push(K, Some(*j), format!("chiplet instance {j} overlaps instance {i}"));
            }
        }
    }
    for (i, r) in bundle.placement.interposer_routers.iter().enumerate() {
        if !r.position.is_finite() {
            report.push(K, Some(bundle.placement.chiplets.len() + i), "router position is not finite");
        }
    }
    if !bundle.placement.interposer_routers.is_empty() && !bundle.packaging.has_active_interposer {
        report.push(K, None, "interposer routers require an active interposer");
    }
    ok
}

fn check_packaging(bundle: &DesignBundle, report: &mut ValidationReport) {
    use super::LinkLatency;
    use InputKind::Packaging as K;
    let p = &bundle.packaging;
    let latency = match p.link_latency {
        LinkLatency::Constant(c) => c,
        LinkLatency::PerMm(c) => c,
    };
    let fields = [
        ("router_latency_cycles", p.router_latency_cycles),
        ("link_latency", latency),
        ("link_power_per_mm_w", p.link_power_per_mm_w),
        ("interposer_power_w", p.interposer_power_w),
        ("packaging_cost", p.packaging_cost),
    ];
    for (field, v) in fields {
        if !(v.is_finite() && v >= 0.0) {
            report.push(K, None, format!("{field} must be >= 0, got {v}"));
        }
    }
}

fn check_topology(bundle: &DesignBundle, report: &mut ValidationReport) -> bool {
    use InputKind::Topology as K;
    let chiplets = bundle.chiplet_count();
    let nodes = bundle.node_count();
    let mut ok = true;
    let mut used_phys: HashMap<(usize, usize), usize> = HashMap::new();
    let mut pairs: HashMap<(usize, usize), usize> = HashMap::new();
    let mut adjacency = vec![Vec::new(); nodes];

    for (li, link) in bundle.topology.links.iter().enumerate() {
        let mut endpoint_ok = true;
        for ep in [&link.a, &link.b] {
            match *ep {
                Endpoint::Chiplet { index, phy } => {
                    if index >= chiplets {
                        report.push(K, Some(li), format!("chiplet index {index} out of range"));
                        endpoint_ok = false;
                        continue;
                    }
                    let def = bundle.instance_def(index);
                    if phy >= def.phys.len() {
                        report.push(K, Some(li), format!("chiplet {index} has no PHY {phy}"));
                        endpoint_ok = false;
                        continue;
                    }
                    if let Some(prev) = used_phys.insert((index, phy), li) {
                        report.push(K, Some(li), format!("PHY {phy} of chiplet {index} already used by link {prev}"));
                    }
                }
                Endpoint::InterposerRouter { index } => {
                    if index >= bundle.placement.interposer_routers.len() {
                        report.push(K, Some(li), format!("interposer router {index} out of range"));
                        endpoint_ok = false;
                    }
                }
            }
        }
        if !endpoint_ok {
            ok = false;
            continue;
        }
        let (u, v) = (link.a.node(chiplets), link.b.node(chiplets));
        if u == v {
            report.push(K, Some(li), format!("self-link on node {u}"));
            ok = false;
            continue;
        }
        let key = (u.min(v), u.max(v));
        if let Some(prev) = pairs.insert(key, li) {
            report.push(K, Some(li), format!("duplicate of link {prev} between nodes {} and {}", key.0, key.1));
            ok = false;
            continue;
        }
        adjacency[u].push(v);
        adjacency[v].push(u);
    }

    if ok && nodes > 0 {
        let mut seen = vec![false; nodes];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(n) = stack.pop() {
            for &m in &adjacency[n] {
                if !seen[m] {
                    seen[m] = true;
                    stack.push(m);
                }
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            report.push(K, None, format!("network is disconnected: node {missing} unreachable from node 0"));
            ok = false;
        }
    }
    ok
}

fn check_routing(bundle: &DesignBundle, report: &mut ValidationReport) {
    use InputKind::RoutingTable as K;
    let chiplets = bundle.chiplet_count();
    let nodes = bundle.node_count();
    let table = &bundle.routing_table;
    let links = &bundle.topology.links;
    if table.nodes.len() != nodes {
        report.push(K, None, format!("table has {} node entries, design has {nodes} nodes", table.nodes.len()));
        return;
    }
    let mut entries_ok = true;
    for (n, map) in table.nodes.iter().enumerate() {
        for (&dst, &link) in map {
            if dst >= chiplets {
                report.push(K, Some(n), format!("destination {dst} is not a chiplet index (design has {chiplets})"));
                entries_ok = false;
            } else if link >= links.len() {
                report.push(K, Some(n), format!("destination {dst}: link {link} out of range"));
                entries_ok = false;
            } else {
                let l = &links[link];
                if l.a.node(chiplets) != n && l.b.node(chiplets) != n {
                    report.push(K, Some(n), format!("destination {dst}: link {link} is not incident to node {n}"));
                    entries_ok = false;
                }
            }
        }
    }
    if !entries_ok {
        return;
    }
    // Walk every chiplet pair; memoize nodes already known to reach each destination.
    let mut reported: HashSet<(usize, usize)> = HashSet::new();
    for dst in 0..chiplets {
        let mut reaches = vec![false; nodes];
        reaches[dst] = true;
        for src in 0..chiplets {
            if src == dst || reaches[src] {
                continue;
            }
            let mut visited = Vec::new();
            let mut node = src;
            let mut failure = None;
            while !reaches[node] {
                if visited.len() > nodes {
                    failure = Some(format!("routing loop from {src} to {dst}"));
                    break;
                }
                visited.push(node);
                match table.next_link(node, dst) {
                    Some(li) => {
                        let l = &links[li];
                        let (a, b) = (l.a.node(chiplets), l.b.node(chiplets));
                        node = if a == node { b } else { a };
                    }
                    None => {
                        failure = Some(format!("node {node} has no entry for destination {dst} (route from {src})"));
                        break;
                    }
                }
            }
            match failure {
                None => visited.iter().for_each(|&v| reaches[v] = true),
                Some(msg) => {
                    if reported.insert((node, dst)) {
                        report.push(K, Some(node), msg);
                    }
                }
            }
        }
    }
}

fn check_traffic(bundle: &DesignBundle, report: &mut ValidationReport) {
    use InputKind::Traffic as K;
    let chiplets = bundle.chiplet_count();
    let mut total = 0.0;
    for (i, e) in bundle.traffic.entries.iter().enumerate() {
        if e.src >= chiplets || e.dst >= chiplets {
            report.push(K, Some(i), format!("entry ({}, {}) references a missing chiplet", e.src, e.dst));
        }
        if e.src == e.dst {
            report.push(K, Some(i), format!("entry has src == dst == {}", e.src));
        }
        if !(e.amount.is_finite() && e.amount >= 0.0) {
            report.push(K, Some(i), format!("amount must be finite and >= 0, got {}", e.amount));
        } else {
            total += e.amount;
        }
    }
    if total <= 0.0 {
        report.push(K, None, "total traffic must be > 0");
    }
}

fn check_trace(bundle: &DesignBundle, report: &mut ValidationReport) {
    use InputKind::Trace as K;
    let Some(trace) = &bundle.trace else { return };
    let chiplets = bundle.chiplet_count();
    let mut ids: HashMap<u64, usize> = HashMap::new();
    for (i, m) in trace.messages.iter().enumerate() {
        if ids.insert(m.id, i).is_some() {
            report.push(K, Some(i), format!("duplicate message id {}", m.id));
        }
        if m.src >= chiplets || m.dst >= chiplets {
            report.push(K, Some(i), format!("message {} references a missing chiplet", m.id));
        }
        if m.src == m.dst {
            report.push(K, Some(i), format!("message {} has src == dst", m.id));
        }
        if m.size_flits == 0 {
            report.push(K, Some(i), format!("message {} has zero size", m.id));
        }
    }
    for (i, m) in trace.messages.iter().enumerate() {
        for d in &m.deps {
            if !ids.contains_key(d) {
                report.push(K, Some(i), format!("message {} depends on unknown message {d}", m.id));
            }
        }
    }
    if let Some(id) = dependency_cycle(trace) {
        report.push(K, ids.get(&id).copied(), format!("dependency cycle through message {id}"));
    }
}

/// Returns a message id on a dependency cycle, if any.
pub(crate) fn dependency_cycle(trace: &super::Trace) -> Option<u64> {
    let deps: BTreeMap<u64, &Vec<u64>> = trace.messages.iter().map(|m| (m.id, &m.deps)).collect();
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state: HashMap<u64, u8> = HashMap::new();
    for &root in deps.keys() {
        if state.get(&root).copied().unwrap_or(0) != 0 {
            continue;
        }
        let mut stack: Vec<(u64, usize)> = vec![(root, 0)];
        state.insert(root, 1);
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            let children = deps.get(&node).map(|v| v.as_slice()).unwrap_or(&[]);
            if *next < children.len() {
                let child = children[*next];
                *next += 1;
                if !deps.contains_key(&child) {
                    continue;
                }
                match state.get(&child).copied().unwrap_or(0) {
                    0 => {
                        state.insert(child, 1);
                        stack.push((child, 0));
                    }
                    1 => return Some(child),
                    _ => {}
                }
            } else {
                state.insert(node, 2);
                stack.pop();
            }
        }
    }
    None
}

fn check_technology(bundle: &DesignBundle, report: &mut ValidationReport) {
    use InputKind::Technology as K;
    let Some(tech) = &bundle.technology else { return };
    for (i, n) in tech.nodes.iter().enumerate() {
        let positive = [
            ("wafer_diameter_mm", n.wafer_diameter_mm),
            ("wafer_cost", n.wafer_cost),
            ("clustering_parameter", n.clustering_parameter),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                report.push(K, Some(i), format!("node {:?}: {field} must be > 0, got {v}", n.name));
            }
        }
        if !(n.defect_density_per_mm2.is_finite() && n.defect_density_per_mm2 >= 0.0) {
            report.push(K, Some(i), format!("node {:?}: defect_density_per_mm2 must be >= 0", n.name));
        }
    }
    for name in bundle.chiplets.keys() {
        match tech.assignment.get(name) {
            None => report.push(K, None, format!("chiplet {name:?} has no technology assignment")),
            Some(node) if !tech.nodes.iter().any(|n| &n.name == node) => {
                report.push(K, None, format!("chiplet {name:?} assigned to unknown node {node:?}"))
            }
            Some(_) => {}
        }
    }
}

fn check_sim_config(bundle: &DesignBundle, report: &mut ValidationReport) {
    if let Some(params) = &bundle.sim_config {
        if let Err(msg) = params.check() {
            report.push(InputKind::SimConfig, None, msg);
        }
    }
}
