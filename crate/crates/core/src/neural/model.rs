use rand::Rng;
use serde::{Deserialize, Serialize};

use super::cell::{GruLayerParams, LstmLayerParams, RnnLayerParams};
use super::layout::Layout;
use super::mlp::{Dense, Mlp, MlpCache};
use super::recurrent::{Init, LayerCache, RecurrentLayer};
use super::{cross_entropy_loss, softmax, BranchMode, CellKind, HeadActivation, Prediction};
use crate::matrix::Matrix;
use crate::rng::{key_of, stream};
use crate::{Error, Result};

/// Shape of the classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub cell: CellKind,
    pub branches: BranchMode,
    /// Width of one per-frame row (recurrent branch input).
    pub local_dim: usize,
    /// Width of the global vector (MLP branch input).
    pub global_dim: usize,
    pub hidden: usize,
    pub layers: usize,
    pub mlp_hidden: Vec<usize>,
    pub mlp_out: usize,
    pub classes: usize,
    pub head: HeadActivation,
}

impl Architecture {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.classes < 2 {
            return bad("need at least two classes");
        }
        if self.branches.recurrent() && (self.local_dim == 0 || self.hidden == 0 || self.layers == 0)
        {
            return bad("recurrent branch needs local_dim, hidden and layers > 0");
        }
        if self.branches.mlp() {
            if self.global_dim == 0 || self.mlp_out == 0 || self.mlp_hidden.contains(&0) {
                return bad("MLP branch needs non-zero widths");
            }
            if self
                .mlp_hidden
                .iter()
                .chain([&self.mlp_out])
                .any(|&w| w >= self.global_dim)
            {
                return bad("MLP widths must be smaller than the global dimension");
            }
        }
        Ok(())
    }

    /// Width of the concatenated branch outputs.
    pub fn fusion_width(&self) -> usize {
        let mut w = 0;
        if self.branches.recurrent() {
            w += self.hidden;
        }
        if self.branches.mlp() {
            w += self.mlp_out;
        }
        w
    }
}

/// A minibatch. Local rows are time-major: row `t * size + b` is frame `t`
/// of sample `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub size: usize,
    pub steps: usize,
    pub local_dim: usize,
    pub local: Vec<f64>,
    pub global_dim: usize,
    pub global: Vec<f64>,
    pub labels: Vec<usize>,
}

impl Batch {
    /// Either `locals` or `globals` may be empty when the matching branch is
    /// unused; otherwise both hold one entry per label.
    pub fn new(locals: &[&Matrix], globals: &[&[f64]], labels: Vec<usize>) -> Result<Batch> {
        let size = labels.len();
        if size == 0 {
            return Err(Error::ShapeMismatch("empty batch".into()));
        }
        let mut batch = Batch {
            size,
            steps: 0,
            local_dim: 0,
            local: Vec::new(),
            global_dim: 0,
            global: Vec::new(),
            labels,
        };
        if !locals.is_empty() {
            if locals.len() != size {
                return Err(Error::ShapeMismatch(format!(
                    "{} sequences for {size} labels",
                    locals.len()
                )));
            }
            let (steps, dim) = locals[0].shape();
            if steps == 0 || locals.iter().any(|m| m.shape() != (steps, dim)) {
                return Err(Error::ShapeMismatch(
                    "sequences in a batch must share a non-empty shape".into(),
                ));
            }
            batch.steps = steps;
            batch.local_dim = dim;
            batch.local.reserve(steps * size * dim);
            for t in 0..steps {
                for m in locals {
                    batch.local.extend_from_slice(m.row(t));
                }
            }
        }
        if !globals.is_empty() {
            let dim = globals[0].len();
            if globals.len() != size || globals.iter().any(|g| g.len() != dim) {
                return Err(Error::ShapeMismatch(
                    "global vectors must match the batch size and share a width".into(),
                ));
            }
            batch.global_dim = dim;
            batch.global = globals.concat();
        }
        Ok(batch)
    }
}

/// Dropout masks for one minibatch, already scaled by `1 / (1 - rate)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Masks {
    /// One `batch x hidden` mask per recurrent layer, fixed over time.
    pub recurrent: Vec<Vec<f64>>,
    /// One `batch x width` mask per MLP hidden layer.
    pub mlp: Vec<Vec<f64>>,
}

impl Masks {
    pub fn sample<R: Rng + ?Sized>(
        arch: &Architecture,
        batch: usize,
        rate: f64,
        rng: &mut R,
    ) -> Masks {
        let keep = 1.0 - rate;
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n)
                .map(|_| {
                    if rate <= 0.0 || rng.random::<f64>() < keep {
                        1.0 / keep
                    } else {
                        0.0
                    }
                })
                .collect()
        };
        let recurrent = if arch.branches.recurrent() {
            (0..arch.layers).map(|_| draw(batch * arch.hidden)).collect()
        } else {
            Vec::new()
        };
        let mlp = if arch.branches.mlp() {
            arch.mlp_hidden.iter().map(|&w| draw(batch * w)).collect()
        } else {
            Vec::new()
        };
        Masks { recurrent, mlp }
    }
}

/// Result of a forward pass, with the activations backpropagation needs.
#[derive(Debug, Clone)]
pub struct Forward {
    /// `batch x classes` logits after the head activation.
    pub logits: Matrix,
    pre: Vec<f64>,
    fused: Vec<f64>,
    rec: Vec<LayerCache>,
    mlp: Option<MlpCache>,
}

impl Forward {
    pub fn predictions(&self) -> Vec<Prediction> {
        self.logits
            .iter_rows()
            .map(|r| Prediction::from_logits(r.to_vec()))
            .collect()
    }
}

/// The two-branch classifier: parameters live in one flat buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    arch: Architecture,
    layout: Layout,
    params: Vec<f64>,
    rec: Vec<RecurrentLayer>,
    mlp: Option<Mlp>,
    fusion: Dense,
}

struct Parts {
    layout: Layout,
    inits: Vec<Init>,
    rec: Vec<RecurrentLayer>,
    mlp: Option<Mlp>,
    fusion: Dense,
}

fn build(arch: &Architecture) -> Result<Parts> {
    arch.validate()?;
    let mut layout = Layout::default();
    let mut inits = Vec::new();
    let mut rec = Vec::new();
    if arch.branches.recurrent() {
        let mut input = arch.local_dim;
        for l in 0..arch.layers {
            rec.push(RecurrentLayer::register(
                &mut layout,
                &mut inits,
                arch.cell,
                l,
                input,
                arch.hidden,
            ));
            input = arch.hidden;
        }
    }
    let mlp = arch.branches.mlp().then(|| {
        Mlp::register(
            &mut layout,
            &mut inits,
            arch.global_dim,
            &arch.mlp_hidden,
            arch.mlp_out,
        )
    });
    let fusion = Dense::register(&mut layout, &mut inits, "fusion", arch.fusion_width(), arch.classes);
    Ok(Parts {
        layout,
        inits,
        rec,
        mlp,
        fusion,
    })
}

impl Model {
    /// Glorot-uniform weights, zero biases and peepholes, LSTM forget bias 1.
    pub fn new(arch: Architecture, seed: u64) -> Result<Model> {
        let s = build(&arch)?;
        let mut rng = stream(seed, &[key_of("init")]);
        let mut params = vec![0.0; s.layout.len()];
        for (spec, init) in s.layout.specs().iter().zip(&s.inits) {
            let dst = &mut params[spec.range()];
            match init {
                Init::Zero => {}
                Init::One => dst.fill(1.0),
                Init::Glorot => {
                    let a = (6.0 / (spec.rows + spec.cols) as f64).sqrt();
                    for v in dst {
                        *v = rng.random_range(-a..a);
                    }
                }
            }
        }
        Ok(Model::assemble(arch, s, params))
    }

    pub fn from_params(arch: Architecture, params: Vec<f64>) -> Result<Model> {
        let s = build(&arch)?;
        if params.len() != s.layout.len() {
            return Err(Error::ShapeMismatch(format!(
                "architecture needs {} parameters, got {}",
                s.layout.len(),
                params.len()
            )));
        }
        Ok(Model::assemble(arch, s, params))
    }

    fn assemble(arch: Architecture, s: Parts, params: Vec<f64>) -> Model {
        Model {
            arch,
            layout: s.layout,
            params,
            rec: s.rec,
            mlp: s.mlp,
            fusion: s.fusion,
        }
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn lstm_layer(&self, l: usize) -> Option<LstmLayerParams> {
        self.rec
            .get(l)
            .filter(|r| r.kind == CellKind::Lstm)
            .map(|r| LstmLayerParams::from_flat(r, &self.params))
    }

    pub fn gru_layer(&self, l: usize) -> Option<GruLayerParams> {
        self.rec
            .get(l)
            .filter(|r| r.kind == CellKind::Gru)
            .map(|r| GruLayerParams::from_flat(r, &self.params))
    }

    pub fn rnn_layer(&self, l: usize) -> Option<RnnLayerParams> {
        self.rec
            .get(l)
            .filter(|r| r.kind == CellKind::Rnn)
            .map(|r| RnnLayerParams::from_flat(r, &self.params))
    }

    fn check(&self, batch: &Batch, masks: Option<&Masks>) -> Result<()> {
        let a = &self.arch;
        if a.branches.recurrent() && (batch.local_dim != a.local_dim || batch.steps == 0) {
            return Err(Error::ShapeMismatch(format!(
                "local rows have width {}, model expects {}",
                batch.local_dim, a.local_dim
            )));
        }
        if a.branches.mlp() && batch.global_dim != a.global_dim {
            return Err(Error::ShapeMismatch(format!(
                "global vector has width {}, model expects {}",
                batch.global_dim, a.global_dim
            )));
        }
        if batch.labels.iter().any(|&l| l >= a.classes) {
            return Err(Error::ShapeMismatch("label out of range".into()));
        }
        if let Some(m) = masks {
            let rec_ok = m.recurrent.len() == self.rec.len()
                && m.recurrent.iter().all(|v| v.len() == batch.size * a.hidden);
            let mlp_ok = match &self.mlp {
                Some(mlp) => {
                    m.mlp.len() == mlp.hidden.len()
                        && m.mlp
                            .iter()
                            .zip(&mlp.hidden)
                            .all(|(v, d)| v.len() == batch.size * d.output)
                }
                None => m.mlp.is_empty(),
            };
            if !rec_ok || !mlp_ok {
                return Err(Error::ShapeMismatch("dropout masks do not fit the batch".into()));
            }
        }
        Ok(())
    }

    /// Forward pass. `masks = None` means evaluation mode (no dropout).
    pub fn forward(&self, batch: &Batch, masks: Option<&Masks>) -> Result<Forward> {
        self.check(batch, masks)?;
        let p = &self.params;
        let n = batch.size;
        let width = self.arch.fusion_width();
        let mut fused = vec![0.0; n * width];
        let mut rec = Vec::with_capacity(self.rec.len());
        for (l, layer) in self.rec.iter().enumerate() {
            let x = if l == 0 {
                &batch.local
            } else {
                &rec.last().map(|c: &LayerCache| &c.h).unwrap()[..]
            };
            let cache = layer.forward(
                p,
                x,
                batch.steps,
                n,
                masks.map(|m| m.recurrent[l].as_slice()),
            );
            rec.push(cache);
        }
        let mut offset = 0;
        if let Some(top) = rec.last() {
            let h = self.arch.hidden;
            let last = &top.h[(batch.steps - 1) * n * h..];
            for b in 0..n {
                fused[b * width..b * width + h].copy_from_slice(&last[b * h..(b + 1) * h]);
            }
            offset = h;
        }
        let mut mlp_cache = None;
        if let Some(mlp) = &self.mlp {
            let (out, cache) =
                mlp.forward(p, &batch.global, n, masks.map(|m| m.mlp.as_slice()));
            let w = mlp.out.output;
            for b in 0..n {
                fused[b * width + offset..b * width + offset + w]
                    .copy_from_slice(&out[b * w..(b + 1) * w]);
            }
            mlp_cache = Some(cache);
        }
        let pre = self.fusion.forward(p, &fused, n);
        let logits = match self.arch.head {
            HeadActivation::Relu => pre.iter().map(|v| v.max(0.0)).collect(),
            HeadActivation::Linear => pre.clone(),
        };
        Ok(Forward {
            logits: Matrix::from_vec(n, self.arch.classes, logits),
            pre,
            fused,
            rec,
            mlp: mlp_cache,
        })
    }

    /// Mean cross-entropy over the batch.
    pub fn loss(&self, batch: &Batch, masks: Option<&Masks>) -> Result<f64> {
        let fwd = self.forward(batch, masks)?;
        Ok(mean_loss(&fwd, &batch.labels))
    }

    pub fn predict(&self, batch: &Batch) -> Result<Vec<Prediction>> {
        Ok(self.forward(batch, None)?.predictions())
    }

    /// Mean cross-entropy and its gradient with respect to every parameter.
    pub fn loss_and_gradient(&self, batch: &Batch, masks: Option<&Masks>) -> Result<(f64, Vec<f64>)> {
        let fwd = self.forward(batch, masks)?;
        let loss = mean_loss(&fwd, &batch.labels);
        let p = &self.params;
        let n = batch.size;
        let k = self.arch.classes;
        let mut grad = vec![0.0; p.len()];

        let mut dpre = vec![0.0; n * k];
        for (b, &label) in batch.labels.iter().enumerate() {
            let probs = softmax(fwd.logits.row(b));
            for c in 0..k {
                let d = (probs[c] - if c == label { 1.0 } else { 0.0 }) / n as f64;
                let active = match self.arch.head {
                    HeadActivation::Relu => fwd.pre[b * k + c] > 0.0,
                    HeadActivation::Linear => true,
                };
                dpre[b * k + c] = if active { d } else { 0.0 };
            }
        }
        let dfused = self
            .fusion
            .backward(p, &mut grad, &fwd.fused, &dpre, n, true)
            .unwrap();
        let width = self.arch.fusion_width();

        let mut offset = 0;
        if !self.rec.is_empty() {
            let h = self.arch.hidden;
            let steps = batch.steps;
            let mut dh = vec![0.0; steps * n * h];
            let last = (steps - 1) * n * h;
            for b in 0..n {
                dh[last + b * h..last + (b + 1) * h]
                    .copy_from_slice(&dfused[b * width..b * width + h]);
            }
            for l in (0..self.rec.len()).rev() {
                let x = if l == 0 { &batch.local } else { &fwd.rec[l - 1].h };
                let dx = self.rec[l].backward(
                    p,
                    &mut grad,
                    x,
                    &fwd.rec[l],
                    &dh,
                    steps,
                    n,
                    masks.map(|m| m.recurrent[l].as_slice()),
                    l > 0,
                );
                if let Some(dx) = dx {
                    dh = dx;
                }
            }
            offset = h;
        }
        if let (Some(mlp), Some(cache)) = (&self.mlp, &fwd.mlp) {
            let w = mlp.out.output;
            let mut dout = vec![0.0; n * w];
            for b in 0..n {
                dout[b * w..(b + 1) * w]
                    .copy_from_slice(&dfused[b * width + offset..b * width + offset + w]);
            }
            mlp.backward(p, &mut grad, cache, &dout, n, masks.map(|m| m.mlp.as_slice()));
        }
        Ok((loss, grad))
    }
}

fn mean_loss(fwd: &Forward, labels: &[usize]) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(b, &l)| cross_entropy_loss(fwd.logits.row(b), l))
        .sum::<f64>()
        / labels.len() as f64
}
