//! Browser bindings: generate a grid design, estimate it and draw it.
//! The plain functions return `Result<String, String>` so they can be tested
//! natively; the exported wrappers turn errors into JS exceptions.

use chipdse::dse::mesh_area_overhead;
use chipdse::netgen::{generate_design, DesignPoint, ShgBits, TopologyKind, TrafficPattern};
use chipdse::{proxy, render, reports};
use serde_json::json;
use wasm_bindgen::prelude::*;

fn parse<T: serde::de::DeserializeOwned>(what: &str, name: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(name.to_string())).map_err(|_| format!("unknown {what} {name:?}"))
}

fn point(topology: &str, rows: usize, cols: usize, traffic: &str) -> Result<DesignPoint, String> {
    let kind: TopologyKind = parse("topology", topology)?;
    let traffic: TrafficPattern = parse("traffic pattern", traffic)?;
    Ok(DesignPoint::new(kind, rows, cols, traffic))
}

fn summarize(p: &DesignPoint) -> Result<serde_json::Value, String> {
    let bundle = generate_design(p).map_err(|e| e.to_string())?;
    let report = proxy::estimate(&bundle, false).map_err(|e| e.to_string())?;
    let area = reports::area_report(&bundle).map_err(|e| e.to_string())?;
    let overhead = mesh_area_overhead(p.rows, p.cols, &p.chiplet, area.chiplet_area_sum_mm2);
    Ok(json!({
        "topology": p.topology.name(),
        "rows": p.rows,
        "cols": p.cols,
        "links": bundle.topology.links.len(),
        "avg_latency_cycles": report.avg_latency_cycles,
        "throughput_rate": report.throughput_rate,
        "chiplet_area_mm2": area.chiplet_area_sum_mm2,
        "area_overhead": overhead,
        "power_w": report.power_w,
    }))
}

pub fn estimate_grid_json(topology: &str, rows: usize, cols: usize, traffic: &str) -> Result<String, String> {
    Ok(summarize(&point(topology, rows, cols, traffic)?)?.to_string())
}

pub fn render_grid_svg(topology: &str, rows: usize, cols: usize) -> Result<String, String> {
    let bundle = generate_design(&point(topology, rows, cols, "uniform")?).map_err(|e| e.to_string())?;
    render::render_svg(&bundle).map_err(|e| e.to_string())
}

/// `bits` holds one '0' or '1' per upgradeable row, then per column.
pub fn shg_point_json(rows: usize, cols: usize, bits: &str) -> Result<String, String> {
    let parsed = ShgBits::parse(bits).map_err(|e| e.to_string())?;
    if parsed.0.len() + 4 != rows + cols {
        return Err(format!("a {rows}x{cols} grid takes {} bits", (rows + cols).saturating_sub(4)));
    }
    let mut p = point("shg", rows, cols, "uniform")?;
    p.shg_bits = Some(bits.to_string());
    Ok(summarize(&p)?.to_string())
}

#[wasm_bindgen]
pub fn estimate_grid(topology: &str, rows: usize, cols: usize, traffic: &str) -> Result<String, JsError> {
    estimate_grid_json(topology, rows, cols, traffic).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn render_grid(topology: &str, rows: usize, cols: usize) -> Result<String, JsError> {
    render_grid_svg(topology, rows, cols).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn shg_point(rows: usize, cols: usize, bits: &str) -> Result<String, JsError> {
    shg_point_json(rows, cols, bits).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mesh_estimate() {
        let v: serde_json::Value = serde_json::from_str(&estimate_grid_json("mesh", 3, 3, "uniform").unwrap()).unwrap();
        assert_eq!(v["links"], 12);
        assert_eq!(v["area_overhead"], 0.0);
        assert!(v["avg_latency_cycles"].as_f64().unwrap() > 0.0);
    }

    #[test]
    fn unknown_names_are_rejected() {
        assert!(estimate_grid_json("ring", 3, 3, "uniform").unwrap_err().contains("unknown topology"));
        assert!(estimate_grid_json("mesh", 3, 3, "bursty").is_err());
    }

    #[test]
    fn svg_has_one_rect_per_chiplet() {
        let svg = render_grid_svg("torus", 3, 4).unwrap();
        assert_eq!(svg.matches("class=\"chiplet\"").count(), 12);
    }

    #[test]
    fn shg_endpoints() {
        let zero: serde_json::Value = serde_json::from_str(&shg_point_json(4, 4, "0000").unwrap()).unwrap();
        assert_eq!(zero["links"], 24);
        assert!(shg_point_json(4, 4, "000").is_err());
    }
}
