use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use chipdse::dse::{self, Experiment, PlotKind};
use chipdse::flitsim::{self, SimError, SimParams, Workload};
use chipdse::model::{self, DesignBundle, LoadError};
use chipdse::netgen::{self, DesignPoint};
use chipdse::{proxy, render, reports};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

#[derive(Parser)]
#[command(name = "chipdse", version, about = "Latency, throughput, area, power and cost estimation for chiplet interconnects")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a design against every structural and cross-file rule.
    Validate { design: PathBuf },
    /// Proxy latency and throughput plus area, power and cost.
    Estimate {
        design: PathBuf,
        /// Include the per-link bandwidth and flow table.
        #[arg(long)]
        edges: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Area, power and (with a technology file) cost.
    Report {
        design: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write the input files of one generated design point.
    Generate {
        /// JSON design point: topology, rows, cols, traffic, ...
        point: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run the flit-level simulator.
    Simulate(SimulateArgs),
    /// Evaluate every combination of an experiment file.
    Sweep {
        experiment: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Latency/throughput front of a results table under an area limit.
    Pareto {
        results: PathBuf,
        /// Allowed chiplet-area overhead over the baseline, as a fraction.
        #[arg(long)]
        max_area_overhead: f64,
        /// Index of the baseline row; defaults to the first mesh-like row.
        #[arg(long)]
        baseline: Option<usize>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Proxy-versus-simulator errors and speedups of a results table.
    Compare {
        results: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Draw a design as SVG.
    Render {
        design: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Reshape a results table or search log into plot-ready CSV.
    Plotdata {
        input: PathBuf,
        #[arg(long)]
        kind: PlotKind,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false, id = "mode")]
struct SimulateMode {
    /// Synthetic traffic at this many flits per chiplet per cycle.
    #[arg(long)]
    rate: Option<f64>,
    /// Search for the highest stable injection rate.
    #[arg(long)]
    saturation: bool,
    /// Replay the design's trace.
    #[arg(long)]
    trace: bool,
    /// Average packet latency at near-zero load.
    #[arg(long)]
    zero_load: bool,
}

#[derive(Args)]
struct SimulateArgs {
    design: PathBuf,
    #[command(flatten)]
    mode: SimulateMode,
    /// Simulator parameters (JSON); overrides the design's own.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Write the saturation search attempts as CSV.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

/// Failure classes mapped to exit statuses.
enum Failure {
    Invalid(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // Usage errors are invalid input, so they share exit status 1.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(u8::from(e.use_stderr()));
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(2)
        }
    }
}

/// The error chain, skipping causes whose text the outer message already
/// repeats.
fn describe(e: &anyhow::Error) -> String {
    let mut text = String::new();
    let mut last = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !last.contains(&msg) {
            if !text.is_empty() {
                text.push_str(": ");
            }
            text.push_str(&msg);
        }
        last = msg;
    }
    text
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Validate { design } => {
            let bundle = load_valid(&design)?;
            println!(
                "valid: {} chiplets, {} routers, {} links",
                bundle.placement.chiplets.len(),
                bundle.placement.interposer_routers.len(),
                bundle.topology.links.len()
            );
            Ok(())
        }
        Command::Estimate { design, edges, output } => {
            let bundle = load_valid(&design)?;
            let report = proxy::estimate(&bundle, edges).context("estimation failed")?;
            emit_json(&report, output.as_deref())
        }
        Command::Report { design, output } => {
            let bundle = load_valid(&design)?;
            let area = reports::area_report(&bundle).context("area report")?;
            let power = reports::power_report(&bundle).context("power report")?;
            let cost = match &bundle.technology {
                Some(t) => Some(reports::cost_report(&bundle, t).context("cost report")?),
                None => None,
            };
            emit_json(&json!({ "area": area, "power_w": power, "cost": cost }), output.as_deref())
        }
        Command::Generate { point, output } => {
            let text = std::fs::read_to_string(&point).with_context(|| format!("cannot read {}", point.display()))?;
            let point: DesignPoint = serde_json::from_str(&text).map_err(|e| Failure::Invalid(format!("{}: {e}", point.display())))?;
            let bundle = netgen::generate_design(&point).map_err(|e| Failure::Invalid(e.to_string()))?;
            let report = model::validate(&bundle);
            if !report.is_valid() {
                return Err(violations(&report));
            }
            let path = model::save_design(&bundle, &output).map_err(|e| Failure::Runtime(e.into()))?;
            println!("{}", path.display());
            Ok(())
        }
        Command::Simulate(args) => simulate(args),
        Command::Sweep { experiment, output } => {
            let experiment = Experiment::load(&experiment).map_err(|e| match e {
                dse::DseError::Io { .. } => Failure::Runtime(e.into()),
                other => Failure::Invalid(other.to_string()),
            })?;
            experiment.check().map_err(|e| Failure::Invalid(e.to_string()))?;
            let rows = dse::run_experiments(&experiment, Some(&output)).map_err(|e| Failure::Runtime(e.into()))?;
            let failed = rows.iter().filter(|r| !r.is_ok()).count();
            println!("{} rows ({} failed) written to {}", rows.len(), failed, output.join("results.csv").display());
            Ok(())
        }
        Command::Pareto {
            results,
            max_area_overhead,
            baseline,
            output,
        } => {
            let rows = read_rows(&results)?;
            let base = match baseline {
                Some(i) => rows.iter().find(|r| r.index == i),
                None => dse::find_baseline(&rows),
            }
            .ok_or_else(|| Failure::Invalid("no baseline row: pass --baseline or include a mesh".into()))?;
            let front = dse::pareto_front(&rows, Some(base), max_area_overhead);
            let chosen: Vec<_> = front.into_iter().map(|i| rows[i].clone()).collect();
            let sink = writer(output.as_deref())?;
            dse::write_results(sink, &chosen).map_err(|e| Failure::Runtime(e.into()))
        }
        Command::Compare { results, output } => {
            let rows = read_rows(&results)?;
            let comparison = dse::compare_proxy_vs_sim(&rows);
            if comparison.overall.rows == 0 {
                return Err(Failure::Invalid("no rows carry both proxy and simulator results".into()));
            }
            emit_json(&comparison, output.as_deref())
        }
        Command::Render { design, output } => {
            let bundle = load_valid(&design)?;
            let svg = render::render_svg(&bundle).context("render")?;
            std::fs::write(&output, svg).with_context(|| format!("cannot write {}", output.display()))?;
            Ok(())
        }
        Command::Plotdata { input, kind, output } => {
            let file = File::open(&input).with_context(|| format!("cannot read {}", input.display()))?;
            let sink = writer(output.as_deref())?;
            dse::plot_data(BufReader::new(file), kind, sink).map_err(|e| match e {
                dse::DseError::Plot(msg) => Failure::Invalid(msg),
                other => Failure::Invalid(other.to_string()),
            })
        }
    }
}

fn simulate(args: SimulateArgs) -> Outcome {
    let bundle = load_valid(&args.design)?;
    let params = match &args.params {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            serde_json::from_str(&text).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?
        }
        None => bundle.sim_config.clone().unwrap_or_default(),
    };
    let params: SimParams = params;
    params.check().map_err(Failure::Invalid)?;
    let table = &bundle.routing_table;
    let mode = &args.mode;
    let value = if let Some(rate) = mode.rate {
        let workload = Workload::Synthetic {
            traffic: &bundle.traffic,
            rate,
        };
        serde_json::to_value(flitsim::simulate(&bundle, table, workload, &params).map_err(sim_failure)?)
    } else if mode.saturation {
        let result = flitsim::saturation_throughput(&bundle, table, &bundle.traffic, &params).map_err(sim_failure)?;
        if let Some(log) = &args.log {
            write_search_log(log, &args.design, &result)?;
        }
        serde_json::to_value(result)
    } else if mode.trace {
        let trace = bundle
            .trace
            .as_ref()
            .ok_or_else(|| Failure::Invalid("the design has no trace file".into()))?;
        serde_json::to_value(flitsim::replay_trace(&bundle, table, trace, &params).map_err(sim_failure)?)
    } else {
        let latency = flitsim::zero_load_latency(&bundle, table, &bundle.traffic, &params).map_err(sim_failure)?;
        Ok(json!({ "zero_load_latency_cycles": latency }))
    }
    .context("serialize result")?;
    emit_json(&value, args.output.as_deref())
}

fn sim_failure(e: SimError) -> Failure {
    match e {
        SimError::Invalid(msg) => Failure::Invalid(msg),
        SimError::Deadlock { cycle, blocked } => {
            let mut msg = format!("deadlock at cycle {cycle}; blocked virtual channels:");
            for b in &blocked {
                msg.push_str(&format!("\n  {b}"));
            }
            Failure::Runtime(anyhow::anyhow!(msg))
        }
        other => Failure::Runtime(other.into()),
    }
}

fn write_search_log(path: &Path, design: &Path, result: &flitsim::SaturationResult) -> Outcome {
    let file = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    let mut w = csv::Writer::from_writer(file);
    let name = design.display().to_string();
    let io = |e: csv::Error| Failure::Runtime(e.into());
    w.write_record(["design", "rate", "saturated", "avg_latency_cycles", "accepted_rate", "deadlock"])
        .map_err(io)?;
    for a in &result.attempts {
        w.write_record([
            name.clone(),
            a.rate.to_string(),
            a.saturated.to_string(),
            a.avg_latency_cycles.to_string(),
            a.accepted_rate.to_string(),
            a.deadlock.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Accepts a design file or the directory holding `design.json`.
fn load_valid(path: &Path) -> Result<DesignBundle, Failure> {
    let file = if path.is_dir() { path.join("design.json") } else { path.to_path_buf() };
    let bundle = model::load_design(&file).map_err(|e| match e {
        LoadError::Io { .. } | LoadError::Write { .. } => Failure::Runtime(e.into()),
        other => Failure::Invalid(other.to_string()),
    })?;
    let report = model::validate(&bundle);
    if report.is_valid() {
        Ok(bundle)
    } else {
        Err(violations(&report))
    }
}

fn violations(report: &model::ValidationReport) -> Failure {
    let mut msg = format!("{} violation(s):", report.violations.len());
    for v in &report.violations {
        msg.push_str(&format!("\n  {v}"));
    }
    Failure::Invalid(msg)
}

fn read_rows(path: &Path) -> Result<Vec<dse::ResultRow>, Failure> {
    let file = File::open(path).with_context(|| format!("cannot read {}", path.display()))?;
    let rows = dse::read_results(BufReader::new(file)).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
    if rows.is_empty() {
        return Err(Failure::Invalid("no rows".into()));
    }
    Ok(rows)
}

fn writer(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot write {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit_json<T: serde::Serialize>(value: &T, path: Option<&Path>) -> Outcome {
    let mut text = serde_json::to_string_pretty(value).context("serialize output")?;
    text.push('\n');
    let mut sink = writer(path)?;
    sink.write_all(text.as_bytes())?;
    sink.flush()?;
    Ok(())
}
