//! Hand-written recurrent + MLP classifier.
//!
//! The network has two branches. The recurrent branch (stacked LSTM with
//! peepholes, vanilla RNN or GRU) reads the per-frame feature rows and emits
//! the top layer's last hidden state; the MLP branch maps the global vector
//! through ReLU layers. Their outputs are concatenated and passed through a
//! dense layer and softmax. Gradients are derived by hand (backpropagation
//! through time for the recurrent stack) and checked against central finite
//! differences in [`gradcheck`].

mod cell;
pub mod checkpoint;
pub mod gradcheck;
mod layout;
mod mlp;
mod model;
mod optim;
mod recurrent;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use cell::{
    gru_cell_step, lstm_cell_step, rnn_cell_step, GruLayerParams, LstmLayerParams,
    RnnLayerParams,
};
pub use layout::{Layout, TensorSpec};
pub use model::{Architecture, Batch, Forward, Masks, Model};
pub use optim::clip_global_norm;
pub use optim::{AdaGrad, Optimizer, OptimizerKind, RmsProp};
pub use train::{fit, Standardizer, TrainConfig, TrainedModel};

use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Lstm,
    Rnn,
    Gru,
}

impl CellKind {
    /// Number of stacked pre-activation blocks per layer.
    pub fn gates(self) -> usize {
        match self {
            CellKind::Lstm => 4,
            CellKind::Rnn => 1,
            CellKind::Gru => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CellKind::Lstm => "lstm",
            CellKind::Rnn => "rnn",
            CellKind::Gru => "gru",
        }
    }
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CellKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lstm" => Ok(CellKind::Lstm),
            "rnn" => Ok(CellKind::Rnn),
            "gru" => Ok(CellKind::Gru),
            other => Err(Error::Config(format!("unknown cell kind `{other}`"))),
        }
    }
}

/// Which branches feed the fusion layer: B1 = recurrent, B2 = MLP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BranchMode {
    B1,
    B2,
    #[serde(rename = "B1+B2")]
    Both,
}

impl BranchMode {
    pub fn recurrent(self) -> bool {
        matches!(self, BranchMode::B1 | BranchMode::Both)
    }

    pub fn mlp(self) -> bool {
        matches!(self, BranchMode::B2 | BranchMode::Both)
    }

    pub fn name(self) -> &'static str {
        match self {
            BranchMode::B1 => "B1",
            BranchMode::B2 => "B2",
            BranchMode::Both => "B1+B2",
        }
    }
}

impl fmt::Display for BranchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BranchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim().to_ascii_uppercase().replace(' ', "").as_str() {
            "B1" => Ok(BranchMode::B1),
            "B2" => Ok(BranchMode::B2),
            "B1+B2" | "BOTH" => Ok(BranchMode::Both),
            other => Err(Error::Config(format!("unknown branch mode `{other}`"))),
        }
    }
}

/// Activation of the fusion layer, applied before the softmax.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadActivation {
    Relu,
    Linear,
}

/// Class scores for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub logits: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl Prediction {
    pub fn from_logits(logits: Vec<f64>) -> Self {
        let probabilities = softmax(&logits);
        Prediction {
            logits,
            probabilities,
        }
    }

    /// Index of the largest probability; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        argmax(&self.probabilities)
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|&y| (y - max).exp()).sum::<f64>().ln()
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&y| (y - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `-log softmax(logits)[label]`, evaluated as `logsumexp(logits) - logits[label]`.
pub fn cross_entropy_loss(logits: &[f64], label: usize) -> f64 {
    log_sum_exp(logits) - logits[label]
}
