//! Self-describing JSON checkpoints.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::Model;
use super::train::{Standardizer, TrainConfig, TrainedModel};
use crate::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &str = "affect-checkpoint";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub schema_hash: String,
    pub feature_set: String,
    pub config: TrainConfig,
    pub architecture: super::Architecture,
    pub standardizer: Option<Standardizer>,
    pub tensors: Vec<Tensor>,
}

impl Checkpoint {
    pub fn new(
        trained: &TrainedModel,
        config: &TrainConfig,
        schema_hash: &str,
        feature_set: &str,
    ) -> Checkpoint {
        let m = &trained.model;
        Checkpoint {
            format: MAGIC.into(),
            version: CHECKPOINT_VERSION,
            schema_hash: schema_hash.into(),
            feature_set: feature_set.into(),
            config: config.clone(),
            architecture: m.architecture().clone(),
            standardizer: trained.standardizer.clone(),
            tensors: m
                .layout()
                .specs()
                .iter()
                .map(|s| Tensor {
                    name: s.name.clone(),
                    rows: s.rows,
                    cols: s.cols,
                    values: m.params()[s.range()].to_vec(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Checkpoint> {
        let c: Checkpoint =
            serde_json::from_str(text).map_err(|e| Error::format("checkpoint", e.to_string()))?;
        if c.format != MAGIC || c.version != CHECKPOINT_VERSION {
            return Err(Error::format(
                "checkpoint",
                format!("unsupported format {} v{}", c.format, c.version),
            ));
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::from_json(&text)
    }

    /// Rebuilds the model, refusing features produced under another schema.
    pub fn restore(&self, schema_hash: &str) -> Result<TrainedModel> {
        if schema_hash != self.schema_hash {
            return Err(Error::SchemaMismatch {
                expected: self.schema_hash.clone(),
                found: schema_hash.into(),
            });
        }
        let mut params = Vec::new();
        for t in &self.tensors {
            if t.values.len() != t.rows * t.cols {
                return Err(Error::format("checkpoint", format!("tensor {} has wrong size", t.name)));
            }
            params.extend_from_slice(&t.values);
        }
        let model = Model::from_params(self.architecture.clone(), params)?;
        for (spec, t) in model.layout().specs().iter().zip(&self.tensors) {
            if spec.name != t.name || spec.rows != t.rows || spec.cols != t.cols {
                return Err(Error::format(
                    "checkpoint",
                    format!("tensor {} does not match the architecture", t.name),
                ));
            }
        }
        if model.layout().specs().len() != self.tensors.len() {
            return Err(Error::format("checkpoint", "tensor count mismatch"));
        }
        Ok(TrainedModel {
            model,
            standardizer: self.standardizer.clone(),
            loss_history: Vec::new(),
        })
    }
}
