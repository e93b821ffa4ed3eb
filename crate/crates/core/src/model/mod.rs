//! Declarative design model: the input documents, their loader and the
//! cross-file validator.
//!
//! Node numbering used everywhere else in the crate: placed chiplet instances
//! come first in placement order, followed by the interposer routers in
//! declaration order.

mod load;
mod validate;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use load::{load_design, save_design, DesignFile, LoadError};
pub use validate::{validate, InputKind, ValidationReport, Violation};
pub(crate) use validate::dependency_cycle;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// A die-to-die interface on a chiplet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhyDef {
    /// Relative to the unrotated lower-left corner of the chiplet, in mm.
    pub position: Point,
    /// Share of the chiplet area whose bumps serve this PHY's link.
    pub area_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChipletDef {
    pub name: String,
    pub width_mm: f64,
    pub height_mm: f64,
    pub internal_latency_cycles: f64,
    pub phy_latency_cycles: f64,
    pub power_w: f64,
    pub bump_pitch_mm: f64,
    pub phys: Vec<PhyDef>,
    #[serde(default)]
    pub kind: String,
}

impl ChipletDef {
    pub fn area_mm2(&self) -> f64 {
        self.width_mm * self.height_mm
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum Rotation {
    R0,
    R90,
    R180,
    R270,
}

impl Rotation {
    pub fn degrees(self) -> u32 {
        match self {
            Rotation::R0 => 0,
            Rotation::R90 => 90,
            Rotation::R180 => 180,
            Rotation::R270 => 270,
        }
    }

    /// Number of quarter turns counter-clockwise.
    pub fn quarter_turns(self) -> u32 {
        self.degrees() / 90
    }

    pub fn next(self) -> Rotation {
        match self {
            Rotation::R0 => Rotation::R90,
            Rotation::R90 => Rotation::R180,
            Rotation::R180 => Rotation::R270,
            Rotation::R270 => Rotation::R0,
        }
    }

    pub fn swaps_axes(self) -> bool {
        matches!(self, Rotation::R90 | Rotation::R270)
    }
}

impl TryFrom<u32> for Rotation {
    type Error = String;

    fn try_from(value: u32) -> Result<Self, Self::Error> {
        match value {
            0 => Ok(Rotation::R0),
            90 => Ok(Rotation::R90),
            180 => Ok(Rotation::R180),
            270 => Ok(Rotation::R270),
            other => Err(format!("rotation must be 0, 90, 180 or 270, got {other}")),
        }
    }
}

impl From<Rotation> for u32 {
    fn from(r: Rotation) -> u32 {
        r.degrees()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChipletInstance {
    pub chiplet: String,
    pub position: Point,
    #[serde(default = "rotation_zero")]
    pub rotation: Rotation,
}

fn rotation_zero() -> Rotation {
    Rotation::R0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterposerRouter {
    pub position: Point,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Placement {
    pub chiplets: Vec<ChipletInstance>,
    #[serde(default)]
    pub interposer_routers: Vec<InterposerRouter>,
}

impl Placement {
    pub fn node_count(&self) -> usize {
        self.chiplets.len() + self.interposer_routers.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Endpoint {
    Chiplet { index: usize, phy: usize },
    InterposerRouter { index: usize },
}

impl Endpoint {
    /// Network node id of this endpoint given the number of placed chiplets.
    pub fn node(&self, chiplet_count: usize) -> usize {
        match *self {
            Endpoint::Chiplet { index, .. } => index,
            Endpoint::InterposerRouter { index } => chiplet_count + index,
        }
    }

    pub fn is_chiplet(&self) -> bool {
        matches!(self, Endpoint::Chiplet { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Link {
    pub a: Endpoint,
    pub b: Endpoint,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Topology {
    pub links: Vec<Link>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkRouting {
    Manhattan,
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LinkLatency {
    Constant(f64),
    PerMm(f64),
}

impl LinkLatency {
    pub fn cycles(&self, length_mm: f64) -> f64 {
        match *self {
            LinkLatency::Constant(c) => c,
            LinkLatency::PerMm(k) => k * length_mm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Packaging {
    pub has_active_interposer: bool,
    #[serde(default)]
    pub router_latency_cycles: f64,
    pub link_routing: LinkRouting,
    pub link_latency: LinkLatency,
    #[serde(default)]
    pub link_power_per_mm_w: f64,
    #[serde(default)]
    pub interposer_power_w: f64,
    #[serde(default)]
    pub packaging_cost: f64,
    #[serde(default)]
    pub non_data_wires: u64,
}

/// Per network node: destination chiplet index -> outgoing link index.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoutingTable {
    pub nodes: Vec<BTreeMap<usize, usize>>,
}

impl RoutingTable {
    pub fn next_link(&self, node: usize, dst: usize) -> Option<usize> {
        self.nodes.get(node).and_then(|m| m.get(&dst).copied())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficEntry {
    pub src: usize,
    pub dst: usize,
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Traffic {
    pub entries: Vec<TrafficEntry>,
}

impl Traffic {
    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.amount).sum()
    }

    pub fn scaled(&self, factor: f64) -> Traffic {
        Traffic {
            entries: self
                .entries
                .iter()
                .map(|e| TrafficEntry { amount: e.amount * factor, ..*e })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceMessage {
    pub id: u64,
    pub earliest_injection_cycle: u64,
    pub src: usize,
    pub dst: usize,
    pub size_flits: u32,
    #[serde(default)]
    pub deps: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trace {
    pub messages: Vec<TraceMessage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TechNode {
    pub name: String,
    pub wafer_diameter_mm: f64,
    pub wafer_cost: f64,
    pub defect_density_per_mm2: f64,
    pub clustering_parameter: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Technology {
    pub nodes: Vec<TechNode>,
    /// Chiplet name -> technology node name.
    pub assignment: BTreeMap<String, String>,
}

impl Technology {
    pub fn node_for(&self, chiplet: &str) -> Option<&TechNode> {
        let node = self.assignment.get(chiplet)?;
        self.nodes.iter().find(|n| &n.name == node)
    }
}

/// One fully resolved design point.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignBundle {
    pub chiplets: BTreeMap<String, ChipletDef>,
    pub placement: Placement,
    pub topology: Topology,
    pub packaging: Packaging,
    pub routing_table: RoutingTable,
    pub traffic: Traffic,
    pub trace: Option<Trace>,
    pub technology: Option<Technology>,
    pub sim_config: Option<crate::flitsim::SimParams>,
}

impl DesignBundle {
    pub fn chiplet_count(&self) -> usize {
        self.placement.chiplets.len()
    }

    pub fn node_count(&self) -> usize {
        self.placement.node_count()
    }

    /// Definition of placed instance `index`. Panics on a dangling name, which
    /// `validate` reports beforehand.
    pub fn instance_def(&self, index: usize) -> &ChipletDef {
        let name = &self.placement.chiplets[index].chiplet;
        self.chiplets
            .get(name)
            .unwrap_or_else(|| panic!("placement instance {index} references unknown chiplet {name:?}"))
    }
}
