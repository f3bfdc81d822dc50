//! Topology and readout-noise files.
//!
//! Topology: `{"qubits": 2, "edges": [[0, 1]]}`.
//! Noise: `{"qubits": 2, "readout": [{"p0": 0.05, "p1": 0.05}, ...]}` with one
//! entry per qubit.

use std::path::Path;

use hqc_core::accel::{NoiseModel, ReadoutError};
use hqc_core::passes::Topology;
use serde::{Deserialize, Serialize};

use crate::error::{read_file, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyDoc {
    pub qubits: usize,
    #[serde(default)]
    pub edges: Vec<[usize; 2]>,
}

impl TopologyDoc {
    pub fn to_topology(&self) -> Result<Topology> {
        Ok(Topology::new(self.qubits, self.edges.iter().map(|&[a, b]| (a, b)))?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutDoc {
    pub p0: f64,
    pub p1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseDoc {
    pub qubits: usize,
    pub readout: Vec<ReadoutDoc>,
}

impl NoiseDoc {
    pub fn to_model(&self) -> Result<NoiseModel> {
        if self.readout.len() != self.qubits {
            return Err(Error::Config {
                what: "noise model",
                message: format!("{} readout entries for {} qubits", self.readout.len(), self.qubits),
            });
        }
        Ok(NoiseModel::new(self.readout.iter().map(|r| ReadoutError { p0: r.p0, p1: r.p1 }).collect())?)
    }

    pub fn from_model(model: &NoiseModel) -> Self {
        Self {
            qubits: model.readout().len(),
            readout: model.readout().iter().map(|r| ReadoutDoc { p0: r.p0, p1: r.p1 }).collect(),
        }
    }
}

pub fn parse_topology(text: &str) -> Result<Topology> {
    let doc: TopologyDoc = serde_json::from_str(text).map_err(|e| Error::json("topology", &e))?;
    doc.to_topology()
}

pub fn parse_noise(text: &str) -> Result<NoiseModel> {
    let doc: NoiseDoc = serde_json::from_str(text).map_err(|e| Error::json("noise model", &e))?;
    doc.to_model()
}

pub fn load_topology(path: &Path) -> Result<Topology> {
    parse_topology(&read_file(path)?)
}

pub fn load_noise(path: &Path) -> Result<NoiseModel> {
    parse_noise(&read_file(path)?)
}
