use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::qcnn::{build_qcnn_with_block, Ansatz, Classifier, ConvBlock, QcnnArchitecture};
use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// On-disk form of a trained QCNN. Angles are written with the shortest
/// decimal that parses back to the same `f64`, so a save/load cycle is
/// bit-exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub version: u32,
    pub n: usize,
    pub stages: usize,
    pub block: ConvBlock,
    pub theta: Vec<f64>,
    pub measured_qubit: usize,
}

/// An architecture together with its trained parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub arch: QcnnArchitecture,
    pub theta: Vec<f64>,
}

impl Model {
    pub fn new(arch: QcnnArchitecture, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != arch.num_params() {
            return Err(Error::ParameterLength {
                expected: arch.num_params(),
                found: theta.len(),
            });
        }
        Ok(Self { arch, theta })
    }

    pub fn classifier(&self) -> Result<Classifier> {
        self.arch.bind(&self.theta)
    }

    pub fn to_file(&self) -> ModelFile {
        ModelFile {
            version: MODEL_FORMAT_VERSION,
            n: self.arch.n(),
            stages: self.arch.stages().len(),
            block: self.arch.block(),
            theta: self.theta.clone(),
            measured_qubit: self.arch.measured_qubit(),
        }
    }

    pub fn from_file(file: ModelFile) -> Result<Self> {
        if file.version != MODEL_FORMAT_VERSION {
            return Err(Error::Model(format!(
                "unsupported format version {} (expected {MODEL_FORMAT_VERSION})",
                file.version
            )));
        }
        let arch = build_qcnn_with_block(file.n, file.stages, file.block)?;
        if arch.measured_qubit() != file.measured_qubit {
            return Err(Error::Model(format!(
                "measured_qubit {} inconsistent with architecture ({})",
                file.measured_qubit,
                arch.measured_qubit()
            )));
        }
        if file.theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::Model("non-finite parameter".into()));
        }
        Self::new(arch, file.theta)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("model file serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::Model(e.to_string()))?;
        Self::from_file(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
