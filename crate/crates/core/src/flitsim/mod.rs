//! Cycle-level, flit-level network simulator used as the accuracy reference
//! for the proxies.
//!
//! Input-queued routers with a four-stage pipeline (route, VC allocation,
//! switch allocation, crossbar), virtual channels and credit flow control.
//! Chiplet internal latency and interposer router latency stretch the
//! pipeline of their node; link and PHY latencies delay the link.

mod engine;
mod search;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use engine::{link_delay, node_delay, PIPELINE_STAGES};
pub use search::{search_saturation, SearchOutcome, MAX_PERMILLE};

use crate::model::{DesignBundle, RoutingTable, Trace, Traffic};
use crate::proxy::{self, IciGraph, ProxyError};
use engine::{Source, Window};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimParams {
    pub vcs_per_port: u32,
    pub buffer_flits_per_vc: u32,
    pub packet_size_flits: u32,
    /// Defaults to 1000 cycles.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warmup_cycles: Option<u64>,
    /// Defaults to 1000 + 100 cycles per network node.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measurement_cycles: Option<u64>,
    /// Cycles after the measurement window in which measured packets must
    /// arrive. Defaults to four measurement windows.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drain_cycle_limit: Option<u64>,
    pub latency_saturation_factor: f64,
    pub seed: u64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            vcs_per_port: 4,
            buffer_flits_per_vc: 16,
            packet_size_flits: 1,
            warmup_cycles: None,
            measurement_cycles: None,
            drain_cycle_limit: None,
            latency_saturation_factor: 10.0,
            seed: 1,
        }
    }
}

impl SimParams {
    pub fn check(&self) -> Result<(), String> {
        let counts = [
            ("vcs_per_port", Some(self.vcs_per_port as u64)),
            ("buffer_flits_per_vc", Some(self.buffer_flits_per_vc as u64)),
            ("packet_size_flits", Some(self.packet_size_flits as u64)),
            ("warmup_cycles", self.warmup_cycles),
            ("measurement_cycles", self.measurement_cycles),
            ("drain_cycle_limit", self.drain_cycle_limit),
        ];
        for (name, value) in counts {
            if value == Some(0) {
                return Err(format!("{name} must be at least 1"));
            }
        }
        if !(self.latency_saturation_factor > 1.0) {
            return Err(format!(
                "latency_saturation_factor must exceed 1, got {}",
                self.latency_saturation_factor
            ));
        }
        Ok(())
    }

    pub fn warmup(&self) -> u64 {
        self.warmup_cycles.unwrap_or(1000)
    }

    pub fn measurement(&self, node_count: usize) -> u64 {
        self.measurement_cycles.unwrap_or(1000 + 100 * node_count as u64)
    }

    pub fn drain_limit(&self, node_count: usize) -> u64 {
        self.drain_cycle_limit.unwrap_or(4 * self.measurement(node_count))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimSample {
    pub cycle: u64,
    /// Created but not yet delivered packets.
    pub backlog_packets: u64,
    pub delivered_flits: u64,
    /// Flits still waiting in source queues.
    pub queued_flits: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub avg_packet_latency_cycles: f64,
    pub offered_rate: f64,
    /// Flits ejected per chiplet per cycle during the measurement window.
    pub accepted_rate: f64,
    pub delivered_packets: u64,
    pub saturated: bool,
    /// Cycle of the last delivery, for trace replay.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub makespan_cycles: Option<u64>,
    pub simulated_cycles: u64,
    #[serde(skip)]
    pub samples: Vec<SimSample>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockedVc {
    pub node: usize,
    pub port: usize,
    pub vc: usize,
    /// Upstream neighbor feeding this VC; None for the injection port.
    pub from_node: Option<usize>,
    /// Neighbor the front packet waits for, once it holds an output VC.
    pub waiting_for: Option<usize>,
    pub flits: usize,
}

impl std::fmt::Display for BlockedVc {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "node {} port {} vc {} ({} flits", self.node, self.port, self.vc, self.flits)?;
        if let Some(w) = self.waiting_for {
            write!(f, ", waiting for node {w}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("deadlock at cycle {cycle}: {} blocked VCs, first {}", blocked.len(), blocked.first().map(|b| b.to_string()).unwrap_or_default())]
    Deadlock { cycle: u64, blocked: Vec<BlockedVc> },
    #[error("invalid simulation input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Proxy(#[from] ProxyError),
}

/// What the network is fed with.
#[derive(Debug, Clone, Copy)]
pub enum Workload<'a> {
    /// Bernoulli injection; `rate` is in flits per chiplet per cycle and is
    /// spread over sources in proportion to their traffic.
    Synthetic { traffic: &'a Traffic, rate: f64 },
    Trace(&'a Trace),
}

pub fn simulate(
    bundle: &DesignBundle,
    table: &RoutingTable,
    workload: Workload<'_>,
    params: &SimParams,
) -> Result<SimResult, SimError> {
    params.check().map_err(SimError::Invalid)?;
    let graph = proxy::build_ici_graph(bundle)?;
    match workload {
        Workload::Synthetic { traffic, rate } => simulate_synthetic(&graph, table, traffic, rate, params, None),
        Workload::Trace(trace) => replay(&graph, table, trace, params),
    }
}

fn simulate_synthetic(
    graph: &IciGraph,
    table: &RoutingTable,
    traffic: &Traffic,
    rate: f64,
    params: &SimParams,
    min_packets: Option<u64>,
) -> Result<SimResult, SimError> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(SimError::Invalid(format!("injection rate must be in (0, 1], got {rate}")));
    }
    if traffic.total() <= 0.0 {
        return Err(SimError::Invalid("traffic has no positive entries".into()));
    }
    let zero_load = proxy::latency_proxy(graph, table, traffic)?;
    let n = graph.node_count();
    let mut measurement = params.measurement(n);
    if let Some(min) = min_packets {
        let expected_per_cycle = rate * graph.chiplet_count as f64 / params.packet_size_flits as f64;
        measurement = measurement.max((min as f64 / expected_per_cycle).ceil() as u64);
    }
    let window = Window {
        warmup: params.warmup(),
        measurement,
        drain_limit: params.drain_limit(n),
    };
    let stats = engine::run(graph, table, Source::Synthetic { traffic, rate }, params, &window)?;
    let avg = if stats.measured_delivered > 0 {
        stats.latency_sum / stats.measured_delivered as f64
    } else {
        0.0
    };
    let saturated = !stats.all_delivered || stats.backlog_growing || avg > params.latency_saturation_factor * zero_load;
    Ok(SimResult {
        avg_packet_latency_cycles: avg,
        offered_rate: rate,
        accepted_rate: stats.window_flits as f64 / (graph.chiplet_count as f64 * window.measurement as f64),
        delivered_packets: stats.measured_delivered,
        saturated,
        makespan_cycles: None,
        simulated_cycles: stats.cycles,
        samples: stats.samples,
    })
}

fn replay(graph: &IciGraph, table: &RoutingTable, trace: &Trace, params: &SimParams) -> Result<SimResult, SimError> {
    if let Some(id) = crate::model::dependency_cycle(trace) {
        return Err(SimError::Invalid(format!("trace message {id} is on a dependency cycle")));
    }
    for m in &trace.messages {
        if m.src >= graph.chiplet_count || m.dst >= graph.chiplet_count || m.size_flits == 0 {
            return Err(SimError::Invalid(format!("trace message {} is malformed", m.id)));
        }
    }
    let window = Window {
        warmup: 0,
        measurement: 0,
        drain_limit: 0,
    };
    let stats = engine::run(graph, table, Source::Trace(trace), params, &window)?;
    let delivered = stats.measured_delivered;
    let makespan = stats.makespan.unwrap_or(0);
    Ok(SimResult {
        avg_packet_latency_cycles: if delivered > 0 { stats.latency_sum / delivered as f64 } else { 0.0 },
        offered_rate: 0.0,
        accepted_rate: if makespan > 0 {
            stats.window_flits as f64 / (graph.chiplet_count as f64 * makespan as f64)
        } else {
            0.0
        },
        delivered_packets: delivered,
        saturated: false,
        makespan_cycles: Some(makespan),
        simulated_cycles: stats.cycles,
        samples: Vec::new(),
    })
}

pub fn replay_trace(
    bundle: &DesignBundle,
    table: &RoutingTable,
    trace: &Trace,
    params: &SimParams,
) -> Result<SimResult, SimError> {
    simulate(bundle, table, Workload::Trace(trace), params)
}

/// Injection rate of the zero-load run.
pub const ZERO_LOAD_RATE: f64 = 0.001;
/// The zero-load run is stretched until this many packets are expected in
/// the measurement window, so the average covers the traffic mix.
pub const ZERO_LOAD_MIN_PACKETS: u64 = 4000;

pub fn zero_load_latency(
    bundle: &DesignBundle,
    table: &RoutingTable,
    traffic: &Traffic,
    params: &SimParams,
) -> Result<f64, SimError> {
    params.check().map_err(SimError::Invalid)?;
    let graph = proxy::build_ici_graph(bundle)?;
    let result = simulate_synthetic(&graph, table, traffic, ZERO_LOAD_RATE, params, Some(ZERO_LOAD_MIN_PACKETS))?;
    Ok(result.avg_packet_latency_cycles)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateAttempt {
    pub rate: f64,
    pub saturated: bool,
    pub avg_latency_cycles: f64,
    pub accepted_rate: f64,
    /// Set when the run ended in a deadlock (counted as saturated).
    pub deadlock: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SaturationResult {
    /// Highest stable injection rate in flits per chiplet per cycle.
    pub rate: f64,
    pub attempts: Vec<RateAttempt>,
}

pub fn saturation_throughput(
    bundle: &DesignBundle,
    table: &RoutingTable,
    traffic: &Traffic,
    params: &SimParams,
) -> Result<SaturationResult, SimError> {
    params.check().map_err(SimError::Invalid)?;
    let graph = proxy::build_ici_graph(bundle)?;
    // Fail early on inputs the simulator rejects regardless of rate.
    proxy::latency_proxy(&graph, table, traffic)?;
    let mut attempts = Vec::new();
    let mut failure = None;
    let outcome = search_saturation(|permille| {
        if failure.is_some() {
            return true;
        }
        let rate = permille as f64 / 1000.0;
        match simulate_synthetic(&graph, table, traffic, rate, params, None) {
            Ok(r) => {
                log::info!("rate {rate:.3}: latency {:.2}, saturated {}", r.avg_packet_latency_cycles, r.saturated);
                attempts.push(RateAttempt {
                    rate,
                    saturated: r.saturated,
                    avg_latency_cycles: r.avg_packet_latency_cycles,
                    accepted_rate: r.accepted_rate,
                    deadlock: false,
                });
                r.saturated
            }
            Err(SimError::Deadlock { cycle, blocked }) => {
                log::warn!("rate {rate:.3}: deadlock at cycle {cycle} ({} blocked VCs)", blocked.len());
                attempts.push(RateAttempt {
                    rate,
                    saturated: true,
                    avg_latency_cycles: f64::NAN,
                    accepted_rate: f64::NAN,
                    deadlock: true,
                });
                true
            }
            Err(e) => {
                failure = Some(e);
                true
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(SaturationResult {
        rate: outcome.stable_permille as f64 / 1000.0,
        attempts,
    })
}
