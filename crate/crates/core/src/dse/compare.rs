use std::collections::BTreeMap;

use serde::Serialize;

use super::ResultRow;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub index: usize,
    pub topology: String,
    pub rows: usize,
    pub cols: usize,
    pub traffic: String,
    /// |proxy - sim| / sim, as a fraction.
    pub latency_error: Option<f64>,
    pub throughput_error: Option<f64>,
    pub latency_speedup: Option<f64>,
    pub throughput_speedup: Option<f64>,
    /// Set when a simulator value is missing or zero; the row is left out of
    /// the averages.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct ErrorAverages {
    pub rows: usize,
    pub latency_error: Option<f64>,
    pub throughput_error: Option<f64>,
    pub latency_speedup: Option<f64>,
    pub throughput_speedup: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub per_traffic: BTreeMap<String, ErrorAverages>,
    pub overall: ErrorAverages,
}

fn relative_error(proxy: Option<f64>, sim: Option<f64>) -> Option<f64> {
    let (p, s) = (proxy?, sim?);
    (s != 0.0).then(|| (p - s).abs() / s)
}

fn ratio(num: Option<f64>, den: Option<f64>) -> Option<f64> {
    let (n, d) = (num?, den?);
    (d > 0.0).then(|| n / d)
}

pub fn compare_proxy_vs_sim(rows: &[ResultRow]) -> Comparison {
    let table: Vec<ComparisonRow> = rows
        .iter()
        .filter(|r| r.is_ok())
        .map(|r| {
            let latency_error = relative_error(r.latency_cycles, r.sim_latency_cycles);
            let throughput_error = relative_error(r.throughput_rate, r.sim_saturation_rate);
            ComparisonRow {
                index: r.index,
                topology: r.topology.clone(),
                rows: r.rows,
                cols: r.cols,
                traffic: r.traffic.clone(),
                latency_error,
                throughput_error,
                latency_speedup: ratio(r.sim_latency_time_s, r.proxy_time_s),
                throughput_speedup: ratio(r.sim_throughput_time_s, r.proxy_time_s),
                flagged: latency_error.is_none() || throughput_error.is_none(),
            }
        })
        .collect();
    let mut per_traffic = BTreeMap::new();
    let mut traffics: Vec<&str> = table.iter().map(|r| r.traffic.as_str()).collect();
    traffics.sort_unstable();
    traffics.dedup();
    for t in traffics {
        per_traffic.insert(t.to_string(), averages(table.iter().filter(|r| r.traffic == t)));
    }
    Comparison {
        overall: averages(table.iter()),
        rows: table,
        per_traffic,
    }
}

fn averages<'a>(rows: impl Iterator<Item = &'a ComparisonRow>) -> ErrorAverages {
    let kept: Vec<&ComparisonRow> = rows.filter(|r| !r.flagged).collect();
    let mean = |f: fn(&ComparisonRow) -> Option<f64>| {
        let vals: Vec<f64> = kept.iter().filter_map(|r| f(r)).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    };
    ErrorAverages {
        rows: kept.len(),
        latency_error: mean(|r| r.latency_error),
        throughput_error: mean(|r| r.throughput_error),
        latency_speedup: mean(|r| r.latency_speedup),
        throughput_speedup: mean(|r| r.throughput_speedup),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dse::PointSpec;
    use crate::netgen::{RoutingAlgorithm, TopologyKind, TrafficPattern};

    fn row(lat: f64, sim_lat: f64, rate: f64, sim_rate: f64) -> ResultRow {
        let spec = PointSpec {
            topology: TopologyKind::Mesh,
            rows: 3,
            cols: 3,
            shg_bits: None,
            traffic: TrafficPattern::Uniform,
            routing: RoutingAlgorithm::LowestId,
            seed: 0,
            packaging: 0,
            chiplet: 0,
        };
        let mut r = ResultRow::from_spec(0, &spec);
        r.latency_cycles = Some(lat);
        r.sim_latency_cycles = Some(sim_lat);
        r.throughput_rate = Some(rate);
        r.sim_saturation_rate = Some(sim_rate);
        r.proxy_time_s = Some(0.001);
        r.sim_latency_time_s = Some(0.5);
        r.sim_throughput_time_s = Some(2.0);
        r
    }

    #[test]
    fn identical_values_have_no_error() {
        let c = compare_proxy_vs_sim(&[row(40.0, 40.0, 0.3, 0.3)]);
        assert_eq!(c.rows[0].latency_error, Some(0.0));
        assert_eq!(c.rows[0].throughput_error, Some(0.0));
        assert_eq!(c.rows[0].latency_speedup, Some(500.0));
        assert_eq!(c.rows[0].throughput_speedup, Some(2000.0));
    }

    #[test]
    fn thirty_two_versus_thirty_three() {
        let c = compare_proxy_vs_sim(&[row(32.0, 33.0, 0.3, 0.3)]);
        let e = c.rows[0].latency_error.unwrap();
        assert!((e * 100.0 - 3.03).abs() < 0.005, "{e}");
    }

    #[test]
    fn zero_simulated_rate_is_flagged() {
        let c = compare_proxy_vs_sim(&[row(32.0, 33.0, 0.3, 0.0), row(30.0, 30.0, 0.2, 0.2)]);
        assert!(c.rows[0].flagged);
        assert_eq!(c.overall.rows, 1);
        assert_eq!(c.overall.latency_error, Some(0.0));
        assert_eq!(c.per_traffic["uniform"].rows, 1);
    }
}
