//! Small hand-built designs with hand-checkable latencies. Used by the test
//! suites, the CLI examples and the browser demo.

use std::collections::BTreeMap;

use crate::model::{
    ChipletDef, ChipletInstance, DesignBundle, Endpoint, InterposerRouter, Link, LinkLatency, LinkRouting, Packaging,
    PhyDef, Placement, Point, Rotation, RoutingTable, TechNode, Technology, Topology, Traffic, TrafficEntry,
};

/// 4×4 mm chiplet, internal latency 3, PHY latency 12, with a west PHY (0)
/// and an east PHY (1) at mid-height.
pub fn relay_chiplet() -> ChipletDef {
    ChipletDef {
        name: "cpu".into(),
        width_mm: 4.0,
        height_mm: 4.0,
        internal_latency_cycles: 3.0,
        phy_latency_cycles: 12.0,
        power_w: 5.0,
        bump_pitch_mm: 0.04,
        phys: vec![
            PhyDef {
                position: Point::new(0.0, 2.0),
                area_fraction: 0.25,
            },
            PhyDef {
                position: Point::new(4.0, 2.0),
                area_fraction: 0.25,
            },
        ],
        kind: "compute".into(),
    }
}

fn packaging(link_latency: LinkLatency) -> Packaging {
    Packaging {
        has_active_interposer: false,
        router_latency_cycles: 0.0,
        link_routing: LinkRouting::Manhattan,
        link_latency,
        link_power_per_mm_w: 0.0,
        interposer_power_w: 0.0,
        packaging_cost: 0.0,
        non_data_wires: 2,
    }
}

/// `n` chiplets in a row, 8 mm between facing PHYs, linked east-to-west,
/// constant link latency 2 and shortest-path routing. Traffic: 0 → n−1.
pub fn chain_bundle(n: usize) -> DesignBundle {
    assert!(n >= 2);
    let def = relay_chiplet();
    let chiplets = BTreeMap::from([(def.name.clone(), def)]);
    let placement = Placement {
        chiplets: (0..n)
            .map(|i| ChipletInstance {
                chiplet: "cpu".into(),
                position: Point::new(12.0 * i as f64, 0.0),
                rotation: Rotation::R0,
            })
            .collect(),
        interposer_routers: vec![],
    };
    let topology = Topology {
        links: (0..n - 1)
            .map(|i| Link {
                a: Endpoint::Chiplet { index: i, phy: 1 },
                b: Endpoint::Chiplet { index: i + 1, phy: 0 },
            })
            .collect(),
    };
    // Link i joins nodes i and i+1.
    let routing_table = RoutingTable {
        nodes: (0..n)
            .map(|node| {
                (0..n)
                    .filter(|&d| d != node)
                    .map(|d| (d, if d > node { node } else { node - 1 }))
                    .collect()
            })
            .collect(),
    };
    DesignBundle {
        chiplets,
        placement,
        topology,
        packaging: packaging(LinkLatency::Constant(2.0)),
        routing_table,
        traffic: Traffic {
            entries: vec![TrafficEntry {
                src: 0,
                dst: n - 1,
                amount: 1.0,
            }],
        },
        trace: None,
        technology: None,
        sim_config: None,
    }
}

/// Two linked chiplets; latency proxy 3 + (12 + 2 + 12) + 3 = 32 cycles.
pub fn two_chiplet_bundle() -> DesignBundle {
    chain_bundle(2)
}

/// Two chiplets joined through one interposer router (router latency 5).
pub fn via_router_bundle() -> DesignBundle {
    let mut b = chain_bundle(2);
    b.packaging.has_active_interposer = true;
    b.packaging.router_latency_cycles = 5.0;
    b.placement.interposer_routers = vec![InterposerRouter {
        position: Point::new(8.0, 2.0),
    }];
    b.topology = Topology {
        links: vec![
            Link {
                a: Endpoint::Chiplet { index: 0, phy: 1 },
                b: Endpoint::InterposerRouter { index: 0 },
            },
            Link {
                a: Endpoint::InterposerRouter { index: 0 },
                b: Endpoint::Chiplet { index: 1, phy: 0 },
            },
        ],
    };
    b.routing_table = RoutingTable {
        nodes: vec![
            BTreeMap::from([(1, 0)]),
            BTreeMap::from([(0, 1)]),
            BTreeMap::from([(0, 0), (1, 1)]),
        ],
    };
    b
}

/// Assigns every chiplet in the bundle's library to `node`.
pub fn technology(bundle: &DesignBundle, node: TechNode) -> Technology {
    Technology {
        assignment: bundle.chiplets.keys().map(|k| (k.clone(), node.name.clone())).collect(),
        nodes: vec![node],
    }
}

pub fn default_tech_node() -> TechNode {
    TechNode {
        name: "n7".into(),
        wafer_diameter_mm: 300.0,
        wafer_cost: 10_000.0,
        defect_density_per_mm2: 0.001,
        clustering_parameter: 3.0,
    }
}
