use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{DseError, PointSpec};

/// One evaluated design point. Parameter columns come first, then proxy
/// metrics, simulator metrics and wall-clock timings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub index: usize,
    pub topology: String,
    pub rows: usize,
    pub cols: usize,
    pub shg_bits: String,
    pub traffic: String,
    pub routing: String,
    pub seed: u64,
    pub packaging_variant: usize,
    pub chiplet_variant: usize,
    pub status: String,
    pub error: String,
    pub latency_cycles: Option<f64>,
    pub throughput_units: Option<f64>,
    /// Proxy throughput converted to flits per chiplet per cycle.
    pub throughput_rate: Option<f64>,
    pub throughput_rate_uncapped: Option<f64>,
    pub bottleneck_link: Option<usize>,
    pub link_count: Option<usize>,
    pub chiplet_area_mm2: Option<f64>,
    pub interposer_area_mm2: Option<f64>,
    /// Chiplet area relative to a mesh of the same grid, minus one.
    pub area_overhead: Option<f64>,
    pub power_w: Option<f64>,
    pub total_cost: Option<f64>,
    pub sim_latency_cycles: Option<f64>,
    pub sim_saturation_rate: Option<f64>,
    pub sim_runs: Option<usize>,
    pub proxy_time_s: Option<f64>,
    pub sim_latency_time_s: Option<f64>,
    pub sim_throughput_time_s: Option<f64>,
}

pub const RESULT_COLUMNS: &[&str] = &[
    "index",
    "topology",
    "rows",
    "cols",
    "shg_bits",
    "traffic",
    "routing",
    "seed",
    "packaging_variant",
    "chiplet_variant",
    "status",
    "error",
    "latency_cycles",
    "throughput_units",
    "throughput_rate",
    "throughput_rate_uncapped",
    "bottleneck_link",
    "link_count",
    "chiplet_area_mm2",
    "interposer_area_mm2",
    "area_overhead",
    "power_w",
    "total_cost",
    "sim_latency_cycles",
    "sim_saturation_rate",
    "sim_runs",
    "proxy_time_s",
    "sim_latency_time_s",
    "sim_throughput_time_s",
];

impl ResultRow {
    pub(crate) fn from_spec(index: usize, spec: &PointSpec) -> Self {
        ResultRow {
            index,
            topology: spec.topology.name().to_string(),
            rows: spec.rows,
            cols: spec.cols,
            shg_bits: spec.shg_bits.clone().unwrap_or_default(),
            traffic: spec.traffic.name().to_string(),
            routing: spec.routing.name().to_string(),
            seed: spec.seed,
            packaging_variant: spec.packaging,
            chiplet_variant: spec.chiplet,
            status: "ok".into(),
            error: String::new(),
            latency_cycles: None,
            throughput_units: None,
            throughput_rate: None,
            throughput_rate_uncapped: None,
            bottleneck_link: None,
            link_count: None,
            chiplet_area_mm2: None,
            interposer_area_mm2: None,
            area_overhead: None,
            power_w: None,
            total_cost: None,
            sim_latency_cycles: None,
            sim_saturation_rate: None,
            sim_runs: None,
            proxy_time_s: None,
            sim_latency_time_s: None,
            sim_throughput_time_s: None,
        }
    }

    pub(crate) fn failed(mut self, message: String) -> Self {
        self.status = "error".into();
        self.error = message;
        self
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    /// The row with wall-clock columns cleared, for reproducibility checks.
    pub fn without_timings(&self) -> ResultRow {
        ResultRow {
            proxy_time_s: None,
            sim_latency_time_s: None,
            sim_throughput_time_s: None,
            ..self.clone()
        }
    }
}

pub fn write_results<W: Write>(writer: W, rows: &[ResultRow]) -> Result<(), DseError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(RESULT_COLUMNS)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_results<R: Read>(reader: R) -> Result<Vec<ResultRow>, DseError> {
    let mut r = csv::Reader::from_reader(reader);
    let mut rows = Vec::new();
    for row in r.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}
