use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ChipletDef, DesignBundle, Packaging, Placement, RoutingTable, Technology, Topology, Trace, Traffic};
use crate::flitsim::SimParams;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: duplicate chiplet name {name:?}")]
    DuplicateChiplet { path: PathBuf, name: String },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// The top-level design document: relative paths of the other inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignFile {
    pub chiplets: String,
    pub placement: String,
    pub topology: String,
    pub packaging: String,
    pub routing_table: String,
    pub traffic: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub technology: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim_config: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChipletsFile {
    chiplets: Vec<ChipletDef>,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, LoadError> {
    let text = fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| LoadError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), LoadError> {
    let mut text = serde_json::to_string_pretty(value).expect("model types always serialize");
    text.push('\n');
    fs::write(path, text).map_err(|source| LoadError::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads a design document and every input file it references. Paths inside
/// the design file are relative to the design file's directory.
pub fn load_design(design_path: impl AsRef<Path>) -> Result<DesignBundle, LoadError> {
    let design_path = design_path.as_ref();
    let design: DesignFile = read_json(design_path)?;
    let base = design_path.parent().unwrap_or_else(|| Path::new("."));
    let resolve = |rel: &str| base.join(rel);

    let chiplets_path = resolve(&design.chiplets);
    let chiplets_file: ChipletsFile = read_json(&chiplets_path)?;
    let mut chiplets = BTreeMap::new();
    for def in chiplets_file.chiplets {
        if chiplets.contains_key(&def.name) {
            return Err(LoadError::DuplicateChiplet {
                path: chiplets_path,
                name: def.name,
            });
        }
        chiplets.insert(def.name.clone(), def);
    }

    let placement: Placement = read_json(&resolve(&design.placement))?;
    let topology: Topology = read_json(&resolve(&design.topology))?;
    let packaging: Packaging = read_json(&resolve(&design.packaging))?;
    let routing_table: RoutingTable = read_json(&resolve(&design.routing_table))?;
    let traffic: Traffic = read_json(&resolve(&design.traffic))?;
    let trace: Option<Trace> = design.trace.as_deref().map(|p| read_json(&resolve(p))).transpose()?;
    let technology: Option<Technology> = design
        .technology
        .as_deref()
        .map(|p| read_json(&resolve(p)))
        .transpose()?;
    let sim_config: Option<SimParams> = design
        .sim_config
        .as_deref()
        .map(|p| read_json(&resolve(p)))
        .transpose()?;

    Ok(DesignBundle {
        chiplets,
        placement,
        topology,
        packaging,
        routing_table,
        traffic,
        trace,
        technology,
        sim_config,
    })
}

/// Writes every slot of `bundle` as its own JSON document inside `dir`, plus a
/// `design.json` referencing them. Returns the design file path.
pub fn save_design(bundle: &DesignBundle, dir: impl AsRef<Path>) -> Result<PathBuf, LoadError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|source| LoadError::Write {
        path: dir.to_path_buf(),
        source,
    })?;

    let chiplets = ChipletsFile {
        chiplets: bundle.chiplets.values().cloned().collect(),
    };
    write_json(&dir.join("chiplets.json"), &chiplets)?;
    write_json(&dir.join("placement.json"), &bundle.placement)?;
    write_json(&dir.join("topology.json"), &bundle.topology)?;
    write_json(&dir.join("packaging.json"), &bundle.packaging)?;
    write_json(&dir.join("routing_table.json"), &bundle.routing_table)?;
    write_json(&dir.join("traffic.json"), &bundle.traffic)?;

    let mut design = DesignFile {
        chiplets: "chiplets.json".into(),
        placement: "placement.json".into(),
        topology: "topology.json".into(),
        packaging: "packaging.json".into(),
        routing_table: "routing_table.json".into(),
        traffic: "traffic.json".into(),
        trace: None,
        technology: None,
        sim_config: None,
    };
    if let Some(trace) = &bundle.trace {
        write_json(&dir.join("trace.json"), trace)?;
        design.trace = Some("trace.json".into());
    }
    if let Some(tech) = &bundle.technology {
        write_json(&dir.join("technology.json"), tech)?;
        design.technology = Some("technology.json".into());
    }
    if let Some(sim) = &bundle.sim_config {
        write_json(&dir.join("sim_config.json"), sim)?;
        design.sim_config = Some("sim_config.json".into());
    }
    let design_path = dir.join("design.json");
    write_json(&design_path, &design)?;
    Ok(design_path)
}
