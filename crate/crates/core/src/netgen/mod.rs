//! Input generators: chiplets, placements, topologies, routing tables and
//! synthetic traffic, plus `generate_design`, which assembles them into one
//! validated design point.

mod chiplet;
mod placement;
mod routing;
mod topology;
mod traffic;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use chiplet::{generate_chiplet, phy_positions, ChipletParams, PhyPlacementStyle};
pub use placement::{generate_mixed_placement, generate_placement, PlacementKind};
pub use routing::{dependency_cycle, generate_routing_table, node_order, turn_permitted, NetGraph, RoutingAlgorithm};
pub use topology::{bind_phys, generate_shg, generate_topology, LinkSet, ShgBits, TopologyKind};
pub use traffic::{derangement, generate_traffic, HotspotParams, TrafficPattern};

use crate::model::{DesignBundle, Endpoint, Link, LinkLatency, LinkRouting, Packaging, Topology};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("turn restrictions leave no route from {src} to {dst}")]
    Unroutable { src: usize, dst: usize },
}

/// Packaging of the evaluation setup: passive interposer, Manhattan links at
/// 0.25 cycles/mm.
pub fn default_packaging() -> Packaging {
    Packaging {
        has_active_interposer: false,
        router_latency_cycles: 0.0,
        link_routing: LinkRouting::Manhattan,
        link_latency: LinkLatency::PerMm(0.25),
        link_power_per_mm_w: 0.01,
        interposer_power_w: 5.0,
        packaging_cost: 100.0,
        non_data_wires: 2,
    }
}

/// Everything needed to materialize one generated design point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignPoint {
    pub topology: TopologyKind,
    pub rows: usize,
    pub cols: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shg_bits: Option<String>,
    pub traffic: TrafficPattern,
    #[serde(default = "default_routing")]
    pub routing: RoutingAlgorithm,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub chiplet: ChipletParams,
    #[serde(default = "default_packaging")]
    pub packaging: Packaging,
    #[serde(default)]
    pub spacing_mm: f64,
    #[serde(default)]
    pub hotspot: HotspotParams,
}

fn default_routing() -> RoutingAlgorithm {
    RoutingAlgorithm::LowestId
}

impl DesignPoint {
    pub fn new(topology: TopologyKind, rows: usize, cols: usize, traffic: TrafficPattern) -> Self {
        DesignPoint {
            topology,
            rows,
            cols,
            shg_bits: None,
            traffic,
            routing: RoutingAlgorithm::LowestId,
            seed: 0,
            chiplet: ChipletParams::default(),
            packaging: default_packaging(),
            spacing_mm: 0.0,
            hotspot: HotspotParams::default(),
        }
    }
}

/// PHY placement for a chiplet of the given degree: corners when the degree
/// allows it on grid-aligned kinds, otherwise evenly around the perimeter.
pub fn auto_phy_style(kind: TopologyKind, degree: usize) -> PhyPlacementStyle {
    if degree <= 4 && !kind.uses_hex_placement() {
        PhyPlacementStyle::Corners
    } else {
        PhyPlacementStyle::PerimeterEven
    }
}

pub fn link_set_for(point: &DesignPoint) -> Result<LinkSet, GenError> {
    match point.topology {
        TopologyKind::Shg => {
            let bits = match &point.shg_bits {
                Some(s) => ShgBits::parse(s)?,
                None => ShgBits::zeros(point.rows, point.cols),
            };
            generate_shg(point.rows, point.cols, &bits)
        }
        kind => generate_topology(kind, point.rows, point.cols),
    }
}

/// Generates every input of a design point. Each chiplet carries exactly as
/// many PHYs as it has links, so chiplet variants are named by PHY count.
pub fn generate_design(point: &DesignPoint) -> Result<DesignBundle, GenError> {
    let links = link_set_for(point)?;
    let degrees = links.degrees();
    let mut library = BTreeMap::new();
    for &deg in &degrees {
        if let std::collections::btree_map::Entry::Vacant(e) = library.entry(deg) {
            let style = auto_phy_style(point.topology, deg);
            let def = generate_chiplet(&format!("chiplet_p{deg}"), &point.chiplet, deg.max(1), style)?;
            e.insert(def);
        }
    }
    let defs: Vec<_> = degrees.iter().map(|d| &library[d]).collect();
    let kind = if point.topology.uses_hex_placement() {
        PlacementKind::Hex
    } else {
        PlacementKind::Grid
    };
    let placement = generate_mixed_placement(kind, point.rows, point.cols, &defs, point.spacing_mm);
    let topology = bind_phys(&links, &placement, &defs)?;
    let n = point.rows * point.cols;
    let routing_table = generate_routing_table(&topology, n, n, point.routing, point.seed)?;
    let traffic = generate_traffic(point.traffic, point.rows, point.cols, point.seed, point.hotspot)?;
    Ok(DesignBundle {
        chiplets: library.into_values().map(|d| (d.name.clone(), d)).collect(),
        placement,
        topology,
        packaging: point.packaging.clone(),
        routing_table,
        traffic,
        trace: None,
        technology: None,
        sim_config: None,
    })
}

/// Topology whose links all use PHY 0; only meaningful for graph algorithms
/// that ignore PHY binding.
pub fn unbound_topology(set: &LinkSet) -> Topology {
    Topology {
        links: set
            .pairs
            .iter()
            .map(|&(a, b)| Link {
                a: Endpoint::Chiplet { index: a, phy: 0 },
                b: Endpoint::Chiplet { index: b, phy: 0 },
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate;

    #[test]
    fn generated_mesh_validates() {
        let b = generate_design(&DesignPoint::new(TopologyKind::Mesh, 3, 3, TrafficPattern::Uniform)).unwrap();
        let report = validate(&b);
        assert!(report.is_valid(), "{:?}", report.violations);
        assert_eq!(b.chiplets.len(), 3); // corner, edge and interior variants
    }
}
