use super::layout::Layout;
use super::recurrent::{register, Init};
use crate::matrix::{gemm, Op, View};

/// Fully connected layer `y = x W^T + b` over row-major batches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Dense {
    pub input: usize,
    pub output: usize,
    pub w: usize,
    pub b: usize,
}

impl Dense {
    pub fn register(
        layout: &mut Layout,
        inits: &mut Vec<Init>,
        prefix: &str,
        input: usize,
        output: usize,
    ) -> Self {
        let w = register(layout, inits, format!("{prefix}.W"), output, input, Init::Glorot);
        let b = register(layout, inits, format!("{prefix}.b"), 1, output, Init::Zero);
        Dense {
            input,
            output,
            w,
            b,
        }
    }

    pub fn forward(&self, p: &[f64], x: &[f64], rows: usize) -> Vec<f64> {
        let mut out = vec![0.0; rows * self.output];
        for row in out.chunks_exact_mut(self.output) {
            row.copy_from_slice(&p[self.b..self.b + self.output]);
        }
        gemm(
            1.0,
            View::new(x, rows, self.input),
            Op::N,
            View::new(&p[self.w..], self.output, self.input),
            Op::T,
            1.0,
            &mut out,
        );
        out
    }

    pub fn backward(
        &self,
        p: &[f64],
        grad: &mut [f64],
        x: &[f64],
        dpre: &[f64],
        rows: usize,
        need_dx: bool,
    ) -> Option<Vec<f64>> {
        gemm(
            1.0,
            View::new(dpre, rows, self.output),
            Op::T,
            View::new(x, rows, self.input),
            Op::N,
            1.0,
            &mut grad[self.w..self.w + self.output * self.input],
        );
        let db = &mut grad[self.b..self.b + self.output];
        for row in dpre.chunks_exact(self.output) {
            for (g, d) in db.iter_mut().zip(row) {
                *g += d;
            }
        }
        need_dx.then(|| {
            let mut dx = vec![0.0; rows * self.input];
            gemm(
                1.0,
                View::new(dpre, rows, self.output),
                Op::N,
                View::new(&p[self.w..], self.output, self.input),
                Op::N,
                0.0,
                &mut dx,
            );
            dx
        })
    }
}

/// ReLU hidden layers with dropout after each, then a ReLU output layer.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Mlp {
    pub hidden: Vec<Dense>,
    pub out: Dense,
}

#[derive(Debug, Clone)]
pub(crate) struct MlpCache {
    /// Input of every dense layer (after dropout), output layer last.
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

fn relu(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| x.max(0.0)).collect()
}

fn relu_grad(d: &[f64], pre: &[f64]) -> Vec<f64> {
    d.iter()
        .zip(pre)
        .map(|(d, p)| if *p > 0.0 { *d } else { 0.0 })
        .collect()
}

impl Mlp {
    pub fn register(
        layout: &mut Layout,
        inits: &mut Vec<Init>,
        input: usize,
        widths: &[usize],
        out: usize,
    ) -> Self {
        let mut hidden = Vec::new();
        let mut prev = input;
        for (l, &w) in widths.iter().enumerate() {
            hidden.push(Dense::register(layout, inits, &format!("mlp.{l}"), prev, w));
            prev = w;
        }
        let out = Dense::register(layout, inits, "mlp.out", prev, out);
        Mlp { hidden, out }
    }

    pub fn forward(
        &self,
        p: &[f64],
        x: &[f64],
        rows: usize,
        masks: Option<&[Vec<f64>]>,
    ) -> (Vec<f64>, MlpCache) {
        let mut inputs = vec![x.to_vec()];
        let mut pre = Vec::new();
        for (l, layer) in self.hidden.iter().enumerate() {
            let a = layer.forward(p, inputs.last().unwrap(), rows);
            let mut act = relu(&a);
            if let Some(m) = masks {
                for (v, k) in act.iter_mut().zip(&m[l]) {
                    *v *= k;
                }
            }
            pre.push(a);
            inputs.push(act);
        }
        let a = self.out.forward(p, inputs.last().unwrap(), rows);
        let out = relu(&a);
        pre.push(a);
        (out, MlpCache { inputs, pre })
    }

    pub fn backward(
        &self,
        p: &[f64],
        grad: &mut [f64],
        cache: &MlpCache,
        dout: &[f64],
        rows: usize,
        masks: Option<&[Vec<f64>]>,
    ) {
        let n = self.hidden.len();
        let dpre = relu_grad(dout, &cache.pre[n]);
        let mut d = self
            .out
            .backward(p, grad, &cache.inputs[n], &dpre, rows, n > 0);
        for l in (0..n).rev() {
            let mut da = d.take().unwrap();
            if let Some(m) = masks {
                for (v, k) in da.iter_mut().zip(&m[l]) {
                    *v *= k;
                }
            }
            let dpre = relu_grad(&da, &cache.pre[l]);
            d = self.hidden[l].backward(p, grad, &cache.inputs[l], &dpre, rows, l > 0);
        }
    }
}
