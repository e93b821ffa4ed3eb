//! Area, power and manufacturing-cost reports.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::Serialize;
use thiserror::Error;

use crate::geometry::{self, GeometryError};
use crate::model::{DesignBundle, TechNode, Technology};
use crate::proxy::IciGraph;

#[derive(Debug, Error, PartialEq)]
pub enum ReportError {
    #[error("chiplet {chiplet:?} ({area_mm2} mm²) yields no dies on a {diameter_mm} mm wafer")]
    NoDiesPerWafer {
        chiplet: String,
        area_mm2: f64,
        diameter_mm: f64,
    },
    #[error("chiplet {0:?} has no technology node")]
    MissingTechnology(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AreaReport {
    pub chiplet_area_sum_mm2: f64,
    pub interposer_area_mm2: f64,
}

pub fn area_report(bundle: &DesignBundle) -> Result<AreaReport, ReportError> {
    let chiplet_area_sum_mm2 = (0..bundle.chiplet_count()).map(|i| bundle.instance_def(i).area_mm2()).sum();
    let (w, h) = geometry::enclosing_rectangle(&bundle.placement, &bundle.chiplets)?;
    Ok(AreaReport {
        chiplet_area_sum_mm2,
        interposer_area_mm2: w * h,
    })
}

/// Chiplet power + interposer power + length-proportional link power, in W.
pub fn power_report(bundle: &DesignBundle) -> Result<f64, ReportError> {
    let rule = bundle.packaging.link_routing;
    let mut link_mm = 0.0;
    for link in &bundle.topology.links {
        let a = geometry::endpoint_position(bundle, &link.a)?;
        let b = geometry::endpoint_position(bundle, &link.b)?;
        link_mm += geometry::link_length(a, b, rule);
    }
    Ok(static_power(bundle) + link_mm * bundle.packaging.link_power_per_mm_w)
}

pub(crate) fn power_report_with_graph(bundle: &DesignBundle, graph: &IciGraph) -> f64 {
    let link_mm: f64 = graph.edges.iter().map(|e| e.length_mm).sum();
    static_power(bundle) + link_mm * bundle.packaging.link_power_per_mm_w
}

fn static_power(bundle: &DesignBundle) -> f64 {
    let chiplets: f64 = (0..bundle.chiplet_count()).map(|i| bundle.instance_def(i).power_w).sum();
    chiplets + bundle.packaging.interposer_power_w
}

/// Negative-binomial die yield.
pub fn die_yield(area_mm2: f64, tech: &TechNode) -> f64 {
    let alpha = tech.clustering_parameter;
    (1.0 + area_mm2 * tech.defect_density_per_mm2 / alpha).powf(-alpha)
}

/// Gross dies on a round wafer with the usual edge-loss correction.
pub fn dies_per_wafer(area_mm2: f64, wafer_diameter_mm: f64) -> i64 {
    let d = wafer_diameter_mm;
    let r = d / 2.0;
    (PI * r * r / area_mm2 - PI * d / (2.0 * area_mm2).sqrt()).floor() as i64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChipletCost {
    pub die_cost: f64,
    #[serde(rename = "yield")]
    pub yield_fraction: f64,
    pub dies_per_wafer: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostBreakdown {
    pub per_chiplet: BTreeMap<String, ChipletCost>,
    pub packaging_cost: f64,
    pub total_cost: f64,
}

pub fn chiplet_cost(name: &str, area_mm2: f64, tech: &TechNode) -> Result<ChipletCost, ReportError> {
    let dies = dies_per_wafer(area_mm2, tech.wafer_diameter_mm);
    if dies <= 0 {
        return Err(ReportError::NoDiesPerWafer {
            chiplet: name.to_string(),
            area_mm2,
            diameter_mm: tech.wafer_diameter_mm,
        });
    }
    let yield_fraction = die_yield(area_mm2, tech);
    Ok(ChipletCost {
        die_cost: tech.wafer_cost / (dies as f64 * yield_fraction),
        yield_fraction,
        dies_per_wafer: dies,
    })
}

/// Sum of per-instance die costs plus the packaging cost.
pub fn cost_report(bundle: &DesignBundle, tech: &Technology) -> Result<CostBreakdown, ReportError> {
    let mut per_chiplet = BTreeMap::new();
    let mut total = bundle.packaging.packaging_cost;
    for inst in &bundle.placement.chiplets {
        if !per_chiplet.contains_key(&inst.chiplet) {
            let def = &bundle.chiplets[&inst.chiplet];
            let node = tech
                .node_for(&inst.chiplet)
                .ok_or_else(|| ReportError::MissingTechnology(inst.chiplet.clone()))?;
            per_chiplet.insert(inst.chiplet.clone(), chiplet_cost(&def.name, def.area_mm2(), node)?);
        }
        total += per_chiplet[&inst.chiplet].die_cost;
    }
    Ok(CostBreakdown {
        per_chiplet,
        packaging_cost: bundle.packaging.packaging_cost,
        total_cost: total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::{ChipletInstance, Point, Rotation};
    use proptest::prelude::*;

    fn node(d0: f64) -> TechNode {
        TechNode {
            name: "n7".into(),
            wafer_diameter_mm: 300.0,
            wafer_cost: 6400.0,
            defect_density_per_mm2: d0,
            clustering_parameter: 5.0,
        }
    }

    #[test]
    fn yield_values() {
        assert_eq!(die_yield(100.0, &node(0.0)), 1.0);
        assert!((die_yield(100.0, &node(0.001)) - 1.02f64.powi(-5)).abs() < 1e-12);
        assert!((die_yield(100.0, &node(0.001)) - 0.9057).abs() < 1e-4);
    }

    #[test]
    fn wafer_dies_and_cost() {
        assert_eq!(dies_per_wafer(100.0, 300.0), 640);
        let c = chiplet_cost("c", 100.0, &node(0.0)).unwrap();
        assert_eq!(c.dies_per_wafer, 640);
        assert!((c.die_cost - 10.0).abs() < 1e-12);
        assert!(matches!(
            chiplet_cost("huge", 80_000.0, &node(0.0)),
            Err(ReportError::NoDiesPerWafer { .. })
        ));
    }

    #[test]
    fn instances_are_counted_individually() {
        let mut b = fixtures::two_chiplet_bundle();
        b.packaging.packaging_cost = 3.0;
        let tech = fixtures::technology(&b, node(0.0));
        let cost = cost_report(&b, &tech).unwrap();
        let die = cost.per_chiplet["cpu"].die_cost;
        assert_eq!(cost.per_chiplet.len(), 1);
        assert!((cost.total_cost - (2.0 * die + 3.0)).abs() < 1e-9);
    }

    #[test]
    fn areas() {
        let mut b = fixtures::two_chiplet_bundle();
        let a = area_report(&b).unwrap();
        // two 4x4 chiplets at x = 0 and x = 12
        assert_eq!(a.chiplet_area_sum_mm2, 32.0);
        assert_eq!(a.interposer_area_mm2, 64.0);

        b.placement.chiplets.truncate(1);
        b.placement.chiplets[0].rotation = Rotation::R90;
        let a = area_report(&b).unwrap();
        assert_eq!(a.chiplet_area_sum_mm2, a.interposer_area_mm2);
    }

    #[test]
    fn hundred_instances_area_sum() {
        let mut b = fixtures::two_chiplet_bundle();
        let mut def = b.chiplets["cpu"].clone();
        def.width_mm = 77.4f64.sqrt();
        def.height_mm = 77.4f64.sqrt();
        def.phys.iter_mut().for_each(|p| p.position = Point::new(0.0, 0.0));
        b.chiplets.insert("cpu".into(), def);
        b.placement.chiplets = (0..100)
            .map(|i| ChipletInstance {
                chiplet: "cpu".into(),
                position: Point::new(10.0 * (i % 10) as f64, 10.0 * (i / 10) as f64),
                rotation: Rotation::R0,
            })
            .collect();
        let a = area_report(&b).unwrap();
        assert!((a.chiplet_area_sum_mm2 - 7740.0).abs() < 1e-9);
    }

    #[test]
    fn power_sums() {
        let mut b = fixtures::two_chiplet_bundle();
        b.chiplets.get_mut("cpu").unwrap().power_w = 5.0;
        b.packaging.interposer_power_w = 1.0;
        b.packaging.link_power_per_mm_w = 0.0;
        assert!((power_report(&b).unwrap() - 11.0).abs() < 1e-12);
        // The fixture link is 8 mm long.
        b.packaging.link_power_per_mm_w = 0.05;
        assert!((power_report(&b).unwrap() - 11.4).abs() < 1e-12);
        b.topology.links.clear();
        assert!((power_report(&b).unwrap() - 11.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn yield_decreases_with_area(a in 1.0..1000.0f64, extra in 0.1..1000.0f64, d0 in 1e-4..0.01f64) {
            let n = node(d0);
            prop_assert!(die_yield(a + extra, &n) < die_yield(a, &n));
            prop_assert!(die_yield(a, &n) > 0.0 && die_yield(a, &n) <= 1.0);
        }

        #[test]
        fn cost_increases_with_defects_and_packaging(d0 in 0.0..0.01f64, step in 1e-4..0.01f64, pkg in 0.0..100.0f64) {
            let mut b = fixtures::two_chiplet_bundle();
            b.packaging.packaging_cost = pkg;
            let low = cost_report(&b, &fixtures::technology(&b, node(d0))).unwrap().total_cost;
            let high = cost_report(&b, &fixtures::technology(&b, node(d0 + step))).unwrap().total_cost;
            prop_assert!(high > low);
            b.packaging.packaging_cost = pkg + 1.0;
            let more = cost_report(&b, &fixtures::technology(&b, node(d0))).unwrap().total_cost;
            prop_assert!(more > low);
        }
    }
}
