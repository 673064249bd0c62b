use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::{Architecture, Batch, Masks, Model};
use super::optim::{clip_global_norm, AdaGrad, Optimizer, OptimizerKind, RmsProp};
use super::{BranchMode, CellKind, HeadActivation, Prediction};
use crate::features::FeatureWindow;
use crate::matrix::Matrix;
use crate::rng::{key_of, stream};
use crate::{AffectLabel, Error, Result};

/// Hyperparameters for one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub dropout_rate: f64,
    pub rms_decay: f64,
    pub rms_epsilon: f64,
    /// Starting value of the RMSprop second-moment accumulator.
    pub rms_initial_accumulator: f64,
    pub seed: u64,
    pub cell: CellKind,
    pub branches: BranchMode,
    pub hidden: usize,
    pub layers: usize,
    pub mlp_hidden: Vec<usize>,
    pub mlp_out: usize,
    pub head: HeadActivation,
    pub optimizer: OptimizerKind,
    /// Global-norm gradient clip; `0` disables clipping.
    pub clip_norm: f64,
    /// Z-score every feature column with statistics of the training split.
    pub standardize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            epochs: 1500,
            batch_size: 5,
            dropout_rate: 0.3,
            rms_decay: 0.9,
            rms_epsilon: 1e-8,
            rms_initial_accumulator: 0.0,
            seed: 0,
            cell: CellKind::Lstm,
            branches: BranchMode::Both,
            hidden: 64,
            layers: 3,
            mlp_hidden: vec![64; 3],
            mlp_out: 64,
            head: HeadActivation::Relu,
            optimizer: OptimizerKind::RmsProp,
            clip_norm: 5.0,
            standardize: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout_rate must lie in [0, 1)");
        }
        if self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(0.0..1.0).contains(&self.rms_decay) || self.rms_epsilon <= 0.0 {
            return bad("rms_decay must lie in [0, 1) and rms_epsilon be positive");
        }
        if self.rms_initial_accumulator < 0.0 || !self.rms_initial_accumulator.is_finite() {
            return bad("rms_initial_accumulator must be non-negative");
        }
        if self.clip_norm < 0.0 {
            return bad("clip_norm must be non-negative");
        }
        Ok(())
    }

    pub fn architecture(&self, local_dim: usize, global_dim: usize) -> Architecture {
        Architecture {
            cell: self.cell,
            branches: self.branches,
            local_dim,
            global_dim,
            hidden: self.hidden,
            layers: self.layers,
            mlp_hidden: self.mlp_hidden.clone(),
            mlp_out: self.mlp_out,
            classes: AffectLabel::COUNT,
            head: self.head,
        }
    }
}

/// Per-column affine normalization `(x - mean) * scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub local_mean: Vec<f64>,
    pub local_scale: Vec<f64>,
    pub global_mean: Vec<f64>,
    pub global_scale: Vec<f64>,
}

fn column_stats<'a>(width: usize, rows: impl Iterator<Item = &'a [f64]>) -> (Vec<f64>, Vec<f64>) {
    let mut n = 0usize;
    let mut mean = vec![0.0; width];
    let mut m2 = vec![0.0; width];
    for row in rows {
        n += 1;
        for (j, &x) in row.iter().enumerate() {
            let d = x - mean[j];
            mean[j] += d / n as f64;
            m2[j] += d * (x - mean[j]);
        }
    }
    let scale = m2
        .iter()
        .map(|&s| {
            let sd = if n > 0 { (s / n as f64).sqrt() } else { 0.0 };
            if sd > 1e-8 {
                1.0 / sd
            } else {
                1.0
            }
        })
        .collect();
    (mean, scale)
}

impl Standardizer {
    pub fn fit(windows: &[&FeatureWindow]) -> Standardizer {
        let local_width = windows
            .iter()
            .find_map(|w| w.local.as_ref().map(Matrix::cols))
            .unwrap_or(0);
        let global_width = windows
            .iter()
            .find_map(|w| w.global.as_ref().map(Vec::len))
            .unwrap_or(0);
        let (local_mean, local_scale) = column_stats(
            local_width,
            windows
                .iter()
                .filter_map(|w| w.local.as_ref())
                .flat_map(|m| m.iter_rows()),
        );
        let (global_mean, global_scale) = column_stats(
            global_width,
            windows.iter().filter_map(|w| w.global.as_deref()),
        );
        Standardizer {
            local_mean,
            local_scale,
            global_mean,
            global_scale,
        }
    }

    fn apply(v: &mut [f64], mean: &[f64], scale: &[f64]) {
        for ((x, m), s) in v.iter_mut().zip(mean).zip(scale) {
            *x = (*x - m) * s;
        }
    }

    pub fn local(&self, m: &Matrix) -> Matrix {
        let mut out = m.clone();
        for r in 0..out.rows() {
            Self::apply(out.row_mut(r), &self.local_mean, &self.local_scale);
        }
        out
    }

    pub fn global(&self, g: &[f64]) -> Vec<f64> {
        let mut out = g.to_vec();
        Self::apply(&mut out, &self.global_mean, &self.global_scale);
        out
    }
}

/// A fitted model together with the input normalization it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub model: Model,
    pub standardizer: Option<Standardizer>,
    /// Mean training loss per epoch.
    pub loss_history: Vec<f64>,
}

struct Prepared {
    locals: Vec<Matrix>,
    globals: Vec<Vec<f64>>,
    labels: Vec<usize>,
}

fn prepare(
    windows: &[&FeatureWindow],
    branches: BranchMode,
    norm: Option<&Standardizer>,
) -> Result<Prepared> {
    let mut p = Prepared {
        locals: Vec::new(),
        globals: Vec::new(),
        labels: Vec::new(),
    };
    for w in windows {
        if branches.recurrent() {
            let m = w.local.as_ref().ok_or_else(|| {
                Error::ShapeMismatch(format!("{}: recurrent branch needs local features", w.source_id))
            })?;
            p.locals.push(norm.map_or_else(|| m.clone(), |n| n.local(m)));
        }
        if branches.mlp() {
            let g = w.global.as_ref().ok_or_else(|| {
                Error::ShapeMismatch(format!("{}: MLP branch needs global features", w.source_id))
            })?;
            p.globals.push(norm.map_or_else(|| g.clone(), |n| n.global(g)));
        }
        p.labels.push(w.label.index());
    }
    Ok(p)
}

impl Prepared {
    fn batch(&self, idx: &[usize]) -> Result<Batch> {
        let locals: Vec<&Matrix> = if self.locals.is_empty() {
            Vec::new()
        } else {
            idx.iter().map(|&i| &self.locals[i]).collect()
        };
        let globals: Vec<&[f64]> = if self.globals.is_empty() {
            Vec::new()
        } else {
            idx.iter().map(|&i| self.globals[i].as_slice()).collect()
        };
        Batch::new(&locals, &globals, idx.iter().map(|&i| self.labels[i]).collect())
    }
}

/// Trains a fresh model on `train`. Initialization, shuffling and dropout
/// all derive from `config.seed`.
pub fn fit(train: &[&FeatureWindow], config: &TrainConfig) -> Result<TrainedModel> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::TooFewSamples("empty training set".into()));
    }
    let standardizer = config.standardize.then(|| Standardizer::fit(train));
    let data = prepare(train, config.branches, standardizer.as_ref())?;
    let local_dim = data.locals.first().map_or(0, Matrix::cols);
    let global_dim = data.globals.first().map_or(0, Vec::len);
    let arch = config.architecture(local_dim, global_dim);
    let mut model = Model::new(arch.clone(), config.seed)?;
    let n_params = model.params().len();
    let mut optimizer: Box<dyn Optimizer> = match config.optimizer {
        OptimizerKind::RmsProp => Box::new(RmsProp::new(
            n_params,
            config.learning_rate,
            config.rms_decay,
            config.rms_epsilon,
        )
        .with_initial_accumulator(config.rms_initial_accumulator)),
        OptimizerKind::AdaGrad => {
            Box::new(AdaGrad::new(n_params, config.learning_rate, config.rms_epsilon))
        }
    };
    let mut rng = stream(config.seed, &[key_of("train")]);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut loss_history = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch = data.batch(chunk)?;
            let masks = Masks::sample(&arch, chunk.len(), config.dropout_rate, &mut rng);
            let (loss, mut grad) = model.loss_and_gradient(&batch, Some(&masks))?;
            if config.clip_norm > 0.0 {
                clip_global_norm(&mut grad, config.clip_norm);
            }
            optimizer.step(model.params_mut(), &grad);
            total += loss * chunk.len() as f64;
        }
        loss_history.push(total / train.len() as f64);
    }
    Ok(TrainedModel {
        model,
        standardizer,
        loss_history,
    })
}

impl TrainedModel {
    /// Evaluation-mode predictions, processed in fixed-size chunks.
    pub fn predict(&self, windows: &[&FeatureWindow]) -> Result<Vec<Prediction>> {
        let branches = self.model.architecture().branches;
        let data = prepare(windows, branches, self.standardizer.as_ref())?;
        let idx: Vec<usize> = (0..windows.len()).collect();
        let mut out = Vec::with_capacity(windows.len());
        for chunk in idx.chunks(32) {
            out.extend(self.model.predict(&data.batch(chunk)?)?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        TrainConfig::default().validate().unwrap();
        let mut c = TrainConfig::default();
        c.dropout_rate = 1.0;
        assert!(c.validate().is_err());
        c.dropout_rate = 0.0;
        c.learning_rate = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn standardizer_centers_columns() {
        let rows = [vec![1.0, 5.0], vec![3.0, 5.0]];
        let (mean, scale) = column_stats(2, rows.iter().map(Vec::as_slice));
        assert_eq!(mean, vec![2.0, 5.0]);
        assert_eq!(scale, vec![1.0, 1.0]);
        let rows = [vec![0.0], vec![4.0]];
        let (_, scale) = column_stats(1, rows.iter().map(Vec::as_slice));
        assert_eq!(scale, vec![0.5]);
    }
}
