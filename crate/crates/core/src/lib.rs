//! Fast latency, throughput, area, power and cost estimation for chiplet
//! based systems, with a flit-level simulator as reference and a
//! design-space exploration driver.

pub mod dse;
pub mod fixtures;
pub mod flitsim;
pub mod geometry;
pub mod model;
pub mod netgen;
pub mod proxy;
pub mod render;
pub mod reports;
