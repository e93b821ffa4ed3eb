//! Exhaustive design-space sweeps: an experiment names parameter ranges,
//! every combination is generated, validated and evaluated, and the rows
//! are collected into a results table.

mod compare;
mod pareto;
mod plotdata;
mod results;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use compare::{compare_proxy_vs_sim, Comparison, ComparisonRow, ErrorAverages};
pub use pareto::{area_overhead, find_baseline, pareto_front};
pub use plotdata::{plot_data, PlotKind};
pub use results::{read_results, write_results, ResultRow, RESULT_COLUMNS};

use crate::flitsim::{self, SimParams};
use crate::model::{self, Packaging, TechNode, Technology};
use crate::netgen::{
    self, default_packaging, ChipletParams, DesignPoint, HotspotParams, RoutingAlgorithm, ShgBits, TopologyKind,
    TrafficPattern,
};
use crate::proxy;
use crate::reports;

#[derive(Debug, Error)]
pub enum DseError {
    #[error("invalid experiment: {0}")]
    InvalidExperiment(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Save(#[from] model::LoadError),
    #[error("{0}")]
    Plot(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EvaluationMode {
    #[default]
    ProxyOnly,
    ProxyPlusSim,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub topologies: Vec<TopologyKind>,
    /// (rows, cols) pairs.
    pub grid_sizes: Vec<(usize, usize)>,
    pub traffic_patterns: Vec<TrafficPattern>,
    #[serde(default = "default_packaging_variants")]
    pub packaging_variants: Vec<Packaging>,
    #[serde(default = "default_chiplet_variants")]
    pub chiplet_variants: Vec<ChipletParams>,
    #[serde(default = "default_routing_algorithms")]
    pub routing_algorithms: Vec<RoutingAlgorithm>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub evaluation: EvaluationMode,
    /// Enumerate every SHG upgrade-bit vector of each grid.
    #[serde(default)]
    pub shg_sweep: bool,
    #[serde(default)]
    pub sim_params: SimParams,
    #[serde(default)]
    pub hotspot: HotspotParams,
    #[serde(default)]
    pub spacing_mm: f64,
    /// When set, every chiplet is costed in this node.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub technology: Option<TechNode>,
    /// Also write every generated design as input files.
    #[serde(default)]
    pub materialize_designs: bool,
}

fn default_packaging_variants() -> Vec<Packaging> {
    vec![default_packaging()]
}
fn default_chiplet_variants() -> Vec<ChipletParams> {
    vec![ChipletParams::default()]
}
fn default_routing_algorithms() -> Vec<RoutingAlgorithm> {
    vec![RoutingAlgorithm::LowestId]
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}

impl Experiment {
    pub fn new(topologies: Vec<TopologyKind>, grid_sizes: Vec<(usize, usize)>, traffic_patterns: Vec<TrafficPattern>) -> Self {
        Experiment {
            topologies,
            grid_sizes,
            traffic_patterns,
            packaging_variants: default_packaging_variants(),
            chiplet_variants: default_chiplet_variants(),
            routing_algorithms: default_routing_algorithms(),
            seeds: default_seeds(),
            evaluation: EvaluationMode::ProxyOnly,
            shg_sweep: false,
            sim_params: SimParams::default(),
            hotspot: HotspotParams::default(),
            spacing_mm: 0.0,
            technology: None,
            materialize_designs: false,
        }
    }

    pub fn load(path: &Path) -> Result<Self, DseError> {
        let text = std::fs::read_to_string(path).map_err(|source| DseError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| DseError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn check(&self) -> Result<(), DseError> {
        let ranges = [
            ("topologies", self.topologies.len()),
            ("grid_sizes", self.grid_sizes.len()),
            ("traffic_patterns", self.traffic_patterns.len()),
            ("packaging_variants", self.packaging_variants.len()),
            ("chiplet_variants", self.chiplet_variants.len()),
            ("routing_algorithms", self.routing_algorithms.len()),
            ("seeds", self.seeds.len()),
        ];
        for (name, len) in ranges {
            if len == 0 {
                return Err(DseError::InvalidExperiment(format!("{name} must not be empty")));
            }
        }
        if self.shg_sweep && self.topologies.iter().any(|&k| k != TopologyKind::Shg) {
            return Err(DseError::InvalidExperiment("shg_sweep requires every topology to be shg".into()));
        }
        self.sim_params.check().map_err(DseError::InvalidExperiment)?;
        Ok(())
    }

    /// Every combination, in a fixed nesting order (topology outermost,
    /// SHG bits innermost).
    pub fn expand(&self) -> Vec<PointSpec> {
        let mut out = Vec::new();
        for &topology in &self.topologies {
            for &(rows, cols) in &self.grid_sizes {
                let bit_vectors: Vec<Option<String>> = if self.shg_sweep {
                    let nbits = (rows + cols).saturating_sub(4);
                    if rows < 3 || cols < 3 || nbits >= 63 {
                        vec![None]
                    } else {
                        (0..1u64 << nbits)
                            .map(|i| Some(ShgBits::from_index(rows, cols, i).as_string()))
                            .collect()
                    }
                } else {
                    vec![None]
                };
                for &traffic in &self.traffic_patterns {
                    for packaging in 0..self.packaging_variants.len() {
                        for chiplet in 0..self.chiplet_variants.len() {
                            for &routing in &self.routing_algorithms {
                                for &seed in &self.seeds {
                                    for bits in &bit_vectors {
                                        out.push(PointSpec {
                                            topology,
                                            rows,
                                            cols,
                                            shg_bits: bits.clone(),
                                            traffic,
                                            routing,
                                            seed,
                                            packaging,
                                            chiplet,
                                        });
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub fn design_point(&self, spec: &PointSpec) -> DesignPoint {
        DesignPoint {
            topology: spec.topology,
            rows: spec.rows,
            cols: spec.cols,
            shg_bits: spec.shg_bits.clone(),
            traffic: spec.traffic,
            routing: spec.routing,
            seed: spec.seed,
            chiplet: self.chiplet_variants[spec.chiplet].clone(),
            packaging: self.packaging_variants[spec.packaging].clone(),
            spacing_mm: self.spacing_mm,
            hotspot: self.hotspot,
        }
    }
}

/// One parameter assignment; variant fields index into the experiment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointSpec {
    pub topology: TopologyKind,
    pub rows: usize,
    pub cols: usize,
    pub shg_bits: Option<String>,
    pub traffic: TrafficPattern,
    pub routing: RoutingAlgorithm,
    pub seed: u64,
    pub packaging: usize,
    pub chiplet: usize,
}

/// Chiplet area of a mesh with the same grid and chiplet parameters: the
/// zero-overhead reference for area comparisons.
pub fn mesh_chiplet_area(rows: usize, cols: usize, params: &ChipletParams) -> Option<f64> {
    let set = netgen::generate_topology(TopologyKind::Mesh, rows, cols).ok()?;
    Some(
        set.degrees()
            .iter()
            .map(|&d| params.base_area_mm2 + d.max(1) as f64 * params.phy_area_overhead_mm2)
            .sum(),
    )
}

/// Chiplet-area overhead over the same-grid mesh (0.16 = 16% more). Values
/// within rounding noise of zero are reported as exactly zero.
pub fn mesh_area_overhead(rows: usize, cols: usize, params: &ChipletParams, chiplet_area_mm2: f64) -> Option<f64> {
    let o = chiplet_area_mm2 / mesh_chiplet_area(rows, cols, params)? - 1.0;
    Some(if o.abs() < 1e-9 { 0.0 } else { o })
}

fn seconds_since(start: Instant) -> f64 {
    start.elapsed().as_secs_f64().max(1e-9)
}

/// Generates, validates and evaluates one design point. Failures end up in
/// the row's status and error columns.
pub fn evaluate_point(experiment: &Experiment, index: usize, spec: &PointSpec, designs_dir: Option<&Path>) -> ResultRow {
    let mut row = ResultRow::from_spec(index, spec);
    let point = experiment.design_point(spec);
    let bundle = match netgen::generate_design(&point) {
        Ok(b) => b,
        Err(e) => return row.failed(format!("generation: {e}")),
    };
    let bundle = match &experiment.technology {
        Some(node) => {
            let mut b = bundle;
            b.technology = Some(Technology {
                nodes: vec![node.clone()],
                assignment: b.chiplets.keys().map(|k| (k.clone(), node.name.clone())).collect(),
            });
            b
        }
        None => bundle,
    };
    let report = model::validate(&bundle);
    if !report.is_valid() {
        let first = &report.violations[0];
        return row.failed(format!("validation: {} violations, first: {first}", report.violations.len()));
    }
    if let Some(dir) = designs_dir {
        if let Err(e) = model::save_design(&bundle, dir.join(format!("{index:06}"))) {
            return row.failed(format!("materialize: {e}"));
        }
    }

    let start = Instant::now();
    let evaluated = (|| -> Result<_, String> {
        let graph = proxy::build_ici_graph(&bundle).map_err(|e| e.to_string())?;
        let latency = proxy::latency_proxy(&graph, &bundle.routing_table, &bundle.traffic).map_err(|e| e.to_string())?;
        let tp = proxy::throughput_proxy(&graph, &bundle.routing_table, &bundle.traffic).map_err(|e| e.to_string())?;
        let rate = proxy::throughput_as_injection_rate(&graph, &tp);
        let uncapped = proxy::uncapped_injection_rate(&graph, &tp);
        let area = reports::area_report(&bundle).map_err(|e| e.to_string())?;
        let power = reports::power_report(&bundle).map_err(|e| e.to_string())?;
        let cost = match &bundle.technology {
            Some(t) => Some(reports::cost_report(&bundle, t).map_err(|e| e.to_string())?.total_cost),
            None => None,
        };
        Ok((latency, tp, rate, uncapped, area, power, cost, graph.edges.len()))
    })();
    let proxy_time = seconds_since(start);
    let (latency, tp, rate, uncapped, area, power, cost, links) = match evaluated {
        Ok(v) => v,
        Err(e) => return row.failed(format!("proxy: {e}")),
    };
    row.latency_cycles = Some(latency);
    row.throughput_units = Some(tp.throughput);
    row.throughput_rate = Some(rate);
    row.throughput_rate_uncapped = Some(uncapped);
    row.bottleneck_link = Some(tp.bottleneck_link);
    row.link_count = Some(links);
    row.chiplet_area_mm2 = Some(area.chiplet_area_sum_mm2);
    row.interposer_area_mm2 = Some(area.interposer_area_mm2);
    row.area_overhead = mesh_area_overhead(spec.rows, spec.cols, &point.chiplet, area.chiplet_area_sum_mm2);
    row.power_w = Some(power);
    row.total_cost = cost;
    row.proxy_time_s = Some(proxy_time);

    if experiment.evaluation == EvaluationMode::ProxyPlusSim {
        let params = &experiment.sim_params;
        let start = Instant::now();
        match flitsim::zero_load_latency(&bundle, &bundle.routing_table, &bundle.traffic, params) {
            Ok(l) => row.sim_latency_cycles = Some(l),
            Err(e) => return row.failed(format!("simulation: {e}")),
        }
        row.sim_latency_time_s = Some(seconds_since(start));
        let start = Instant::now();
        match flitsim::saturation_throughput(&bundle, &bundle.routing_table, &bundle.traffic, params) {
            Ok(s) => {
                row.sim_saturation_rate = Some(s.rate);
                row.sim_runs = Some(s.attempts.len());
            }
            Err(e) => return row.failed(format!("simulation: {e}")),
        }
        row.sim_throughput_time_s = Some(seconds_since(start));
    }
    row
}

/// Runs every combination of the experiment in parallel. Rows come back in
/// expansion order. With an output directory, `results.csv` and
/// `summary.json` are written there (and designs, if requested).
pub fn run_experiments(experiment: &Experiment, output_dir: Option<&Path>) -> Result<Vec<ResultRow>, DseError> {
    experiment.check()?;
    let designs_dir = match output_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|source| DseError::Io {
                path: dir.to_path_buf(),
                source,
            })?;
            experiment.materialize_designs.then(|| dir.join("designs"))
        }
        None => None,
    };
    let specs = experiment.expand();
    log::info!("evaluating {} design points", specs.len());
    let rows: Vec<ResultRow> = specs
        .par_iter()
        .enumerate()
        .map(|(i, spec)| evaluate_point(experiment, i, spec, designs_dir.as_deref()))
        .collect();
    if let Some(dir) = output_dir {
        let path = dir.join("results.csv");
        let file = std::fs::File::create(&path).map_err(|source| DseError::Io { path: path.clone(), source })?;
        write_results(std::io::BufWriter::new(file), &rows)?;
        let summary = summarize(&rows);
        let path = dir.join("summary.json");
        let text = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
        std::fs::write(&path, text).map_err(|source| DseError::Io { path, source })?;
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub rows: usize,
    pub ok_rows: usize,
    pub error_rows: usize,
    pub mean_latency_cycles: Option<f64>,
    pub mean_throughput_rate: Option<f64>,
    /// Row indices on the latency/throughput front, without an area limit.
    pub pareto_front: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<ErrorAverages>,
}

pub fn summarize(rows: &[ResultRow]) -> Summary {
    let ok: Vec<&ResultRow> = rows.iter().filter(|r| r.is_ok()).collect();
    let mean = |f: fn(&ResultRow) -> Option<f64>| {
        let vals: Vec<f64> = ok.iter().filter_map(|r| f(r)).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    };
    let front = pareto_front(rows, None, f64::INFINITY).into_iter().map(|i| rows[i].index).collect();
    let with_sim = ok.iter().any(|r| r.sim_latency_cycles.is_some());
    Summary {
        rows: rows.len(),
        ok_rows: ok.len(),
        error_rows: rows.len() - ok.len(),
        mean_latency_cycles: mean(|r| r.latency_cycles),
        mean_throughput_rate: mean(|r| r.throughput_rate),
        pareto_front: front,
        comparison: with_sim.then(|| compare_proxy_vs_sim(rows).overall),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_counting() {
        let e = Experiment::new(
            vec![TopologyKind::Mesh, TopologyKind::Torus],
            vec![(3, 3), (4, 4)],
            vec![TrafficPattern::Uniform],
        );
        let rows = run_experiments(&e, None).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.is_ok()), "{rows:?}");
        assert_eq!(rows[0].area_overhead, Some(0.0));
    }

    #[test]
    fn shg_sweep_size() {
        let mut e = Experiment::new(vec![TopologyKind::Shg], vec![(4, 4)], vec![TrafficPattern::Uniform]);
        e.shg_sweep = true;
        assert_eq!(e.expand().len(), 16);
        e.grid_sizes = vec![(10, 10)];
        assert_eq!(e.expand().len(), 65536);
    }

    #[test]
    fn experiment_checks() {
        let mut e = Experiment::new(vec![TopologyKind::Mesh], vec![], vec![TrafficPattern::Uniform]);
        assert!(e.check().is_err());
        e.grid_sizes = vec![(3, 3)];
        e.shg_sweep = true;
        assert!(e.check().is_err());
    }

    #[test]
    fn failing_combination_is_isolated() {
        let base = Experiment::new(vec![TopologyKind::Mesh], vec![(3, 3), (4, 4)], vec![TrafficPattern::Uniform]);
        let mut bad = base.clone();
        bad.topologies.push(TopologyKind::Hypercube); // 3x3 hypercube is unsupported
        let a = run_experiments(&base, None).unwrap();
        let b = run_experiments(&bad, None).unwrap();
        assert_eq!(b.len(), 4);
        assert_eq!(b.iter().filter(|r| !r.is_ok()).count(), 1);
        assert!(b[2].error.contains("power-of-two"), "{:?}", b[2]);
        assert!(b[3].is_ok());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.without_timings(), y.without_timings());
        }
    }

    #[test]
    fn deterministic_modulo_timings() {
        let e = Experiment::new(
            vec![TopologyKind::Hexamesh, TopologyKind::FlattenedButterfly],
            vec![(3, 4)],
            vec![TrafficPattern::Permutation, TrafficPattern::Hotspot],
        );
        let a: Vec<_> = run_experiments(&e, None).unwrap().into_iter().map(|r| r.without_timings()).collect();
        let b: Vec<_> = run_experiments(&e, None).unwrap().into_iter().map(|r| r.without_timings()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn experiment_json_defaults() {
        let e: Experiment = serde_json::from_str(
            r#"{"topologies": ["mesh"], "grid_sizes": [[2, 3]], "traffic_patterns": ["uniform"]}"#,
        )
        .unwrap();
        assert_eq!(e.seeds, vec![0]);
        assert_eq!(e.evaluation, EvaluationMode::ProxyOnly);
        assert!(serde_json::from_str::<Experiment>(r#"{"topologies": [], "grid": []}"#).is_err());
    }
}
