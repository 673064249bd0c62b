//! Batched recurrent layers over time-major sequences.
//!
//! Inputs are `steps * batch` rows (row `t * batch + b` is step `t` of
//! sequence `b`). Input projections for every step are computed with one
//! GEMM; only the recurrent product runs step by step. Hidden state starts at
//! zero. Recurrent dropout multiplies `h_{t-1}` by a per-sequence mask before
//! it enters the recurrent weights.

use super::layout::Layout;
use super::{sigmoid, CellKind};
use crate::matrix::{gemm, gemm_rows, Op, View};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Init {
    Glorot,
    Zero,
    One,
}

pub(crate) fn register(
    layout: &mut Layout,
    inits: &mut Vec<Init>,
    name: String,
    rows: usize,
    cols: usize,
    init: Init,
) -> usize {
    inits.push(init);
    layout.push(name, rows, cols)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct RecurrentLayer {
    pub kind: CellKind,
    pub input: usize,
    pub hidden: usize,
    pub w_x: usize,
    pub w_h: usize,
    /// LSTM only: `W_ci | W_cf | W_co`.
    pub peep: usize,
    pub b: usize,
}

/// Forward activations kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct LayerCache {
    /// Post-activation gates, `rows x gates*hidden` (LSTM: i f g o;
    /// GRU: z r n; RNN: unused).
    gates: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    pub h: Vec<f64>,
    /// Masked previous hidden state fed to the recurrent weights.
    hm: Vec<f64>,
    /// GRU only: `r * hm`.
    rh: Vec<f64>,
}

fn transpose(m: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut t = vec![0.0; m.len()];
    for r in 0..rows {
        for c in 0..cols {
            t[c * rows + r] = m[r * cols + c];
        }
    }
    t
}

impl RecurrentLayer {
    pub fn register(
        layout: &mut Layout,
        inits: &mut Vec<Init>,
        kind: CellKind,
        index: usize,
        input: usize,
        hidden: usize,
    ) -> Self {
        let mut reg = |name: &str, rows, cols, init| {
            register(layout, inits, format!("recurrent.{index}.{name}"), rows, cols, init)
        };
        let gate_names: &[&str] = match kind {
            CellKind::Lstm => &["i", "f", "c", "o"],
            CellKind::Gru => &["z", "r", "n"],
            CellKind::Rnn => &[""],
        };
        let mut w_x = None;
        for g in gate_names {
            let o = reg(&format!("W_x{g}"), hidden, input, Init::Glorot);
            w_x.get_or_insert(o);
        }
        let mut w_h = None;
        for g in gate_names {
            let o = reg(&format!("W_h{g}"), hidden, hidden, Init::Glorot);
            w_h.get_or_insert(o);
        }
        let mut peep = 0;
        if kind == CellKind::Lstm {
            peep = reg("W_ci", 1, hidden, Init::Zero);
            reg("W_cf", 1, hidden, Init::Zero);
            reg("W_co", 1, hidden, Init::Zero);
        }
        let mut b = None;
        for g in gate_names {
            let init = if kind == CellKind::Lstm && *g == "f" {
                Init::One
            } else {
                Init::Zero
            };
            let o = reg(&format!("b{}{g}", if g.is_empty() { "" } else { "_" }), 1, hidden, init);
            b.get_or_insert(o);
        }
        RecurrentLayer {
            kind,
            input,
            hidden,
            w_x: w_x.unwrap(),
            w_h: w_h.unwrap(),
            peep,
            b: b.unwrap(),
        }
    }

    fn width(&self) -> usize {
        self.kind.gates() * self.hidden
    }

    fn w_x<'a>(&self, p: &'a [f64]) -> View<'a> {
        View::new(&p[self.w_x..], self.width(), self.input)
    }

    /// Input projections plus bias for every row.
    fn project(&self, p: &[f64], x: &[f64], rows: usize) -> Vec<f64> {
        let gw = self.width();
        let mut out = vec![0.0; rows * gw];
        gemm(1.0, View::new(x, rows, self.input), Op::N, self.w_x(p), Op::T, 0.0, &mut out);
        let bias = &p[self.b..self.b + gw];
        for row in out.chunks_exact_mut(gw) {
            for (v, b) in row.iter_mut().zip(bias) {
                *v += b;
            }
        }
        out
    }

    pub fn forward(
        &self,
        p: &[f64],
        x: &[f64],
        steps: usize,
        batch: usize,
        mask: Option<&[f64]>,
    ) -> LayerCache {
        let rows = steps * batch;
        let h_len = self.hidden;
        let bh = batch * h_len;
        let gw = self.width();
        let mut gates = self.project(p, x, rows);
        let mut c = Vec::new();
        let mut tanh_c = Vec::new();
        let mut h = vec![0.0; rows * h_len];
        let mut hm = vec![0.0; rows * h_len];
        let mut rh = Vec::new();
        if self.kind == CellKind::Lstm {
            c = vec![0.0; rows * h_len];
            tanh_c = vec![0.0; rows * h_len];
        }
        if self.kind == CellKind::Gru {
            rh = vec![0.0; rows * h_len];
        }
        let mut scratch = vec![0.0; bh * 2];
        let w_ht = transpose(&p[self.w_h..self.w_h + gw * h_len], gw, h_len);
        for t in 0..steps {
            let cur = t * bh..(t + 1) * bh;
            if t > 0 {
                let (prev_h, _) = h.split_at(t * bh);
                let prev_h = &prev_h[(t - 1) * bh..];
                for (i, dst) in hm[cur.clone()].iter_mut().enumerate() {
                    *dst = prev_h[i] * mask.map_or(1.0, |m| m[i]);
                }
            }
            let g_rows = &mut gates[t * batch * gw..(t + 1) * batch * gw];
            match self.kind {
                CellKind::Lstm => {
                    if t > 0 {
                        gemm_rows(batch, h_len, gw, &hm[cur.clone()], h_len, &w_ht, gw, true, g_rows);
                    }
                    let pi = &p[self.peep..self.peep + h_len];
                    let pf = &p[self.peep + h_len..self.peep + 2 * h_len];
                    let po = &p[self.peep + 2 * h_len..self.peep + 3 * h_len];
                    for b in 0..batch {
                        let row = &mut g_rows[b * gw..(b + 1) * gw];
                        for k in 0..h_len {
                            let idx = t * bh + b * h_len + k;
                            let cp = if t > 0 { c[idx - bh] } else { 0.0 };
                            let i = sigmoid(row[k] + pi[k] * cp);
                            let f = sigmoid(row[h_len + k] + pf[k] * cp);
                            let g = row[2 * h_len + k].tanh();
                            let o = sigmoid(row[3 * h_len + k] + po[k] * cp);
                            row[k] = i;
                            row[h_len + k] = f;
                            row[2 * h_len + k] = g;
                            row[3 * h_len + k] = o;
                            let cn = f * cp + i * g;
                            let tc = cn.tanh();
                            c[idx] = cn;
                            tanh_c[idx] = tc;
                            h[idx] = o * tc;
                        }
                    }
                }
                CellKind::Rnn => {
                    if t > 0 {
                        gemm_rows(batch, h_len, gw, &hm[cur.clone()], h_len, &w_ht, gw, true, g_rows);
                    }
                    for (dst, a) in h[cur.clone()].iter_mut().zip(g_rows.iter()) {
                        *dst = a.tanh();
                    }
                }
                CellKind::Gru => {
                    let zr = &mut scratch[..];
                    if t > 0 {
                        let hm_t = &hm[cur.clone()];
                        gemm_rows(batch, h_len, 2 * h_len, hm_t, h_len, &w_ht, gw, false, zr);
                    } else {
                        zr.iter_mut().for_each(|v| *v = 0.0);
                    }
                    for b in 0..batch {
                        let row = &mut g_rows[b * gw..(b + 1) * gw];
                        let rec = &zr[b * 2 * h_len..(b + 1) * 2 * h_len];
                        for k in 0..h_len {
                            let idx = t * bh + b * h_len + k;
                            let z = sigmoid(row[k] + rec[k]);
                            let r = sigmoid(row[h_len + k] + rec[h_len + k]);
                            row[k] = z;
                            row[h_len + k] = r;
                            rh[idx] = r * hm[idx];
                        }
                    }
                    let ghn = &mut zr[..bh];
                    if t > 0 {
                        let rh_t = &rh[cur.clone()];
                        gemm_rows(batch, h_len, h_len, rh_t, h_len, &w_ht[2 * h_len..], gw, false, ghn);
                    }
                    for b in 0..batch {
                        let row = &mut g_rows[b * gw..(b + 1) * gw];
                        for k in 0..h_len {
                            let idx = t * bh + b * h_len + k;
                            let n = (row[2 * h_len + k] + ghn[b * h_len + k]).tanh();
                            row[2 * h_len + k] = n;
                            let z = row[k];
                            let hp = if t > 0 { h[idx - bh] } else { 0.0 };
                            h[idx] = (1.0 - z) * n + z * hp;
                        }
                    }
                }
            }
        }
        LayerCache {
            gates,
            c,
            tanh_c,
            h,
            hm,
            rh,
        }
    }

    /// Accumulates parameter gradients into `grad` given `dh`, the loss
    /// gradient with respect to every hidden output. Returns the gradient
    /// with respect to the layer input when `need_dx` is set.
    #[allow(clippy::too_many_arguments)]
    pub fn backward(
        &self,
        p: &[f64],
        grad: &mut [f64],
        x: &[f64],
        cache: &LayerCache,
        dh: &[f64],
        steps: usize,
        batch: usize,
        mask: Option<&[f64]>,
        need_dx: bool,
    ) -> Option<Vec<f64>> {
        let rows = steps * batch;
        let h_len = self.hidden;
        let bh = batch * h_len;
        let gw = self.width();
        let mut dgates = vec![0.0; rows * gw];
        let mut dh_rec = vec![0.0; bh];
        let mut carry = vec![0.0; bh];
        let mut scratch = vec![0.0; bh];
        let gates = &cache.gates;
        let masked = |buf: &mut [f64]| {
            if let Some(m) = mask {
                for (v, k) in buf.iter_mut().zip(m) {
                    *v *= k;
                }
            }
        };
        match self.kind {
            CellKind::Lstm => {
                let pi = &p[self.peep..self.peep + h_len];
                let pf = &p[self.peep + h_len..self.peep + 2 * h_len];
                let po = &p[self.peep + 2 * h_len..self.peep + 3 * h_len];
                let mut dpeep = vec![0.0; 3 * h_len];
                // `carry` holds dL/dc_t flowing back from step t + 1
                for t in (0..steps).rev() {
                    for b in 0..batch {
                        let r = (t * batch + b) * gw;
                        for k in 0..h_len {
                            let local = b * h_len + k;
                            let idx = t * bh + local;
                            let (i, f, g, o) = (
                                gates[r + k],
                                gates[r + h_len + k],
                                gates[r + 2 * h_len + k],
                                gates[r + 3 * h_len + k],
                            );
                            let cp = if t > 0 { cache.c[idx - bh] } else { 0.0 };
                            let tc = cache.tanh_c[idx];
                            let dht = dh[idx] + dh_rec[local];
                            let dc = carry[local] + dht * o * (1.0 - tc * tc);
                            let dao = dht * tc * o * (1.0 - o);
                            let dai = dc * g * i * (1.0 - i);
                            let daf = dc * cp * f * (1.0 - f);
                            let dag = dc * i * (1.0 - g * g);
                            dgates[r + k] = dai;
                            dgates[r + h_len + k] = daf;
                            dgates[r + 2 * h_len + k] = dag;
                            dgates[r + 3 * h_len + k] = dao;
                            dpeep[k] += dai * cp;
                            dpeep[h_len + k] += daf * cp;
                            dpeep[2 * h_len + k] += dao * cp;
                            carry[local] = dc * f + dai * pi[k] + daf * pf[k] + dao * po[k];
                        }
                    }
                    if t > 0 {
                        let dg = &dgates[t * batch * gw..];
                        gemm_rows(batch, gw, h_len, dg, gw, &p[self.w_h..], h_len, false, &mut dh_rec);
                        masked(&mut dh_rec);
                    }
                }
                for (g, d) in grad[self.peep..self.peep + 3 * h_len].iter_mut().zip(&dpeep) {
                    *g += d;
                }
                gemm(
                    1.0,
                    View::new(&dgates, rows, gw),
                    Op::T,
                    View::new(&cache.hm, rows, h_len),
                    Op::N,
                    1.0,
                    &mut grad[self.w_h..self.w_h + gw * h_len],
                );
            }
            CellKind::Rnn => {
                for t in (0..steps).rev() {
                    for local in 0..bh {
                        let idx = t * bh + local;
                        let ht = cache.h[idx];
                        dgates[idx] = (dh[idx] + dh_rec[local]) * (1.0 - ht * ht);
                    }
                    if t > 0 {
                        let dg = &dgates[t * bh..];
                        gemm_rows(batch, h_len, h_len, dg, h_len, &p[self.w_h..], h_len, false, &mut dh_rec);
                        masked(&mut dh_rec);
                    }
                }
                gemm(
                    1.0,
                    View::new(&dgates, rows, gw),
                    Op::T,
                    View::new(&cache.hm, rows, h_len),
                    Op::N,
                    1.0,
                    &mut grad[self.w_h..self.w_h + gw * h_len],
                );
            }
            CellKind::Gru => {
                let w_hn = self.w_h + 2 * h_len * h_len;
                for t in (0..steps).rev() {
                    // `carry` holds the direct path dL/dh_{t-1} = dh_t * z
                    for b in 0..batch {
                        let r = (t * batch + b) * gw;
                        for k in 0..h_len {
                            let local = b * h_len + k;
                            let idx = t * bh + local;
                            let (z, n) = (gates[r + k], gates[r + 2 * h_len + k]);
                            let hp = if t > 0 { cache.h[idx - bh] } else { 0.0 };
                            let dht = dh[idx] + dh_rec[local];
                            dgates[r + k] = dht * (hp - n) * z * (1.0 - z);
                            dgates[r + 2 * h_len + k] = dht * (1.0 - z) * (1.0 - n * n);
                            carry[local] = dht * z;
                        }
                    }
                    if t == 0 {
                        continue;
                    }
                    // d(r * hm)
                    let dg = &dgates[t * batch * gw..];
                    gemm_rows(batch, h_len, h_len, &dg[2 * h_len..], gw, &p[w_hn..], h_len, false, &mut scratch);
                    for b in 0..batch {
                        let r = (t * batch + b) * gw;
                        for k in 0..h_len {
                            let local = b * h_len + k;
                            let idx = t * bh + local;
                            let rg = gates[r + h_len + k];
                            let drh = scratch[local];
                            dgates[r + h_len + k] = drh * cache.hm[idx] * rg * (1.0 - rg);
                            scratch[local] = drh * rg;
                        }
                    }
                    let dg = &dgates[t * batch * gw..];
                    gemm_rows(batch, 2 * h_len, h_len, dg, gw, &p[self.w_h..], h_len, true, &mut scratch);
                    masked(&mut scratch);
                    for ((d, c), s) in dh_rec.iter_mut().zip(&carry).zip(&scratch) {
                        *d = c + s;
                    }
                }
                gemm(
                    1.0,
                    View::strided(&dgates, rows, 2 * h_len, gw),
                    Op::T,
                    View::new(&cache.hm, rows, h_len),
                    Op::N,
                    1.0,
                    &mut grad[self.w_h..self.w_h + 2 * h_len * h_len],
                );
                gemm(
                    1.0,
                    View::strided(&dgates[2 * h_len..], rows, h_len, gw),
                    Op::T,
                    View::new(&cache.rh, rows, h_len),
                    Op::N,
                    1.0,
                    &mut grad[w_hn..w_hn + h_len * h_len],
                );
            }
        }
        gemm(
            1.0,
            View::new(&dgates, rows, gw),
            Op::T,
            View::new(x, rows, self.input),
            Op::N,
            1.0,
            &mut grad[self.w_x..self.w_x + gw * self.input],
        );
        let db = &mut grad[self.b..self.b + gw];
        for row in dgates.chunks_exact(gw) {
            for (g, d) in db.iter_mut().zip(row) {
                *g += d;
            }
        }
        need_dx.then(|| {
            let mut dx = vec![0.0; rows * self.input];
            gemm(1.0, View::new(&dgates, rows, gw), Op::N, self.w_x(p), Op::N, 0.0, &mut dx);
            dx
        })
    }
}
