//! Single-step cell functions over explicit per-gate parameters.
//!
//! These are the readable reference form of the recurrent cells. The batched
//! engine used for training computes the same maps; the two are tested
//! against each other.

use super::recurrent::RecurrentLayer;
use super::sigmoid;
use crate::matrix::Matrix;
use crate::{Error, Result};

fn matvec(m: &Matrix, v: &[f64]) -> Vec<f64> {
    m.iter_rows()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

fn check(what: &str, found: usize, expected: usize) -> Result<()> {
    if found == expected {
        Ok(())
    } else {
        Err(Error::ShapeMismatch(format!(
            "{what}: expected length {expected}, found {found}"
        )))
    }
}

fn check_matrix(what: &str, m: &Matrix, rows: usize, cols: usize) -> Result<()> {
    if m.shape() == (rows, cols) {
        Ok(())
    } else {
        Err(Error::ShapeMismatch(format!(
            "{what}: expected {rows}x{cols}, found {}x{}",
            m.rows(),
            m.cols()
        )))
    }
}

fn slice_matrix(p: &[f64], offset: usize, rows: usize, cols: usize) -> Matrix {
    Matrix::from_vec(rows, cols, p[offset..offset + rows * cols].to_vec())
}

/// One LSTM layer with peepholes. Gate order is input, forget, cell, output.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayerParams {
    pub w_x: [Matrix; 4],
    pub w_h: [Matrix; 4],
    /// Peepholes for the input, forget and output gates.
    pub peephole: [Vec<f64>; 3],
    pub b: [Vec<f64>; 4],
}

/// One GRU layer. Gate order is update, reset, candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct GruLayerParams {
    pub w_x: [Matrix; 3],
    pub w_h: [Matrix; 3],
    pub b: [Vec<f64>; 3],
}

/// One Elman layer.
#[derive(Debug, Clone, PartialEq)]
pub struct RnnLayerParams {
    pub w_x: Matrix,
    pub w_h: Matrix,
    pub b: Vec<f64>,
}

impl LstmLayerParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmLayerParams {
            w_x: std::array::from_fn(|_| Matrix::zeros(hidden, input)),
            w_h: std::array::from_fn(|_| Matrix::zeros(hidden, hidden)),
            peephole: std::array::from_fn(|_| vec![0.0; hidden]),
            b: std::array::from_fn(|_| vec![0.0; hidden]),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_x[0].rows()
    }

    pub fn input(&self) -> usize {
        self.w_x[0].cols()
    }

    pub fn validate(&self) -> Result<()> {
        let (h, i) = (self.hidden(), self.input());
        for m in &self.w_x {
            check_matrix("W_x", m, h, i)?;
        }
        for m in &self.w_h {
            check_matrix("W_h", m, h, h)?;
        }
        for v in self.peephole.iter().chain(&self.b) {
            check("peephole/bias", v.len(), h)?;
        }
        Ok(())
    }

    pub(crate) fn from_flat(layer: &RecurrentLayer, p: &[f64]) -> Self {
        let (h, i) = (layer.hidden, layer.input);
        LstmLayerParams {
            w_x: std::array::from_fn(|g| slice_matrix(p, layer.w_x + g * h * i, h, i)),
            w_h: std::array::from_fn(|g| slice_matrix(p, layer.w_h + g * h * h, h, h)),
            peephole: std::array::from_fn(|g| p[layer.peep + g * h..][..h].to_vec()),
            b: std::array::from_fn(|g| p[layer.b + g * h..][..h].to_vec()),
        }
    }
}

impl GruLayerParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        GruLayerParams {
            w_x: std::array::from_fn(|_| Matrix::zeros(hidden, input)),
            w_h: std::array::from_fn(|_| Matrix::zeros(hidden, hidden)),
            b: std::array::from_fn(|_| vec![0.0; hidden]),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_x[0].rows()
    }

    pub fn input(&self) -> usize {
        self.w_x[0].cols()
    }

    pub fn validate(&self) -> Result<()> {
        let (h, i) = (self.hidden(), self.input());
        for m in &self.w_x {
            check_matrix("W_x", m, h, i)?;
        }
        for m in &self.w_h {
            check_matrix("W_h", m, h, h)?;
        }
        for v in &self.b {
            check("bias", v.len(), h)?;
        }
        Ok(())
    }

    pub(crate) fn from_flat(layer: &RecurrentLayer, p: &[f64]) -> Self {
        let (h, i) = (layer.hidden, layer.input);
        GruLayerParams {
            w_x: std::array::from_fn(|g| slice_matrix(p, layer.w_x + g * h * i, h, i)),
            w_h: std::array::from_fn(|g| slice_matrix(p, layer.w_h + g * h * h, h, h)),
            b: std::array::from_fn(|g| p[layer.b + g * h..][..h].to_vec()),
        }
    }
}

impl RnnLayerParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        RnnLayerParams {
            w_x: Matrix::zeros(hidden, input),
            w_h: Matrix::zeros(hidden, hidden),
            b: vec![0.0; hidden],
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_x.rows()
    }

    pub fn input(&self) -> usize {
        self.w_x.cols()
    }

    pub fn validate(&self) -> Result<()> {
        let (h, i) = (self.hidden(), self.input());
        check_matrix("W_x", &self.w_x, h, i)?;
        check_matrix("W_h", &self.w_h, h, h)?;
        check("bias", self.b.len(), h)
    }

    pub(crate) fn from_flat(layer: &RecurrentLayer, p: &[f64]) -> Self {
        let (h, i) = (layer.hidden, layer.input);
        RnnLayerParams {
            w_x: slice_matrix(p, layer.w_x, h, i),
            w_h: slice_matrix(p, layer.w_h, h, h),
            b: p[layer.b..layer.b + h].to_vec(),
        }
    }
}

/// One LSTM step. Returns `(h, c)`.
pub fn lstm_cell_step(
    params: &LstmLayerParams,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    params.validate()?;
    let hidden = params.hidden();
    check("x", x.len(), params.input())?;
    check("h_prev", h_prev.len(), hidden)?;
    check("c_prev", c_prev.len(), hidden)?;
    let pre = |g: usize| -> Vec<f64> {
        let a = matvec(&params.w_x[g], x);
        let b = matvec(&params.w_h[g], h_prev);
        (0..hidden).map(|k| a[k] + b[k] + params.b[g][k]).collect()
    };
    let (ai, af, ag, ao) = (pre(0), pre(1), pre(2), pre(3));
    let [pi, pf, po] = &params.peephole;
    let mut h = vec![0.0; hidden];
    let mut c = vec![0.0; hidden];
    for k in 0..hidden {
        let i = sigmoid(ai[k] + pi[k] * c_prev[k]);
        let f = sigmoid(af[k] + pf[k] * c_prev[k]);
        let g = ag[k].tanh();
        let o = sigmoid(ao[k] + po[k] * c_prev[k]);
        c[k] = f * c_prev[k] + i * g;
        h[k] = o * c[k].tanh();
    }
    Ok((h, c))
}

/// One GRU step.
pub fn gru_cell_step(params: &GruLayerParams, x: &[f64], h_prev: &[f64]) -> Result<Vec<f64>> {
    params.validate()?;
    let hidden = params.hidden();
    check("x", x.len(), params.input())?;
    check("h_prev", h_prev.len(), hidden)?;
    let input_part: Vec<Vec<f64>> = (0..3).map(|g| matvec(&params.w_x[g], x)).collect();
    let hz = matvec(&params.w_h[0], h_prev);
    let hr = matvec(&params.w_h[1], h_prev);
    let z: Vec<f64> = (0..hidden)
        .map(|k| sigmoid(input_part[0][k] + hz[k] + params.b[0][k]))
        .collect();
    let r: Vec<f64> = (0..hidden)
        .map(|k| sigmoid(input_part[1][k] + hr[k] + params.b[1][k]))
        .collect();
    let rh: Vec<f64> = r.iter().zip(h_prev).map(|(r, h)| r * h).collect();
    let hn = matvec(&params.w_h[2], &rh);
    Ok((0..hidden)
        .map(|k| {
            let n = (input_part[2][k] + hn[k] + params.b[2][k]).tanh();
            (1.0 - z[k]) * n + z[k] * h_prev[k]
        })
        .collect())
}

/// One Elman step.
pub fn rnn_cell_step(params: &RnnLayerParams, x: &[f64], h_prev: &[f64]) -> Result<Vec<f64>> {
    params.validate()?;
    check("x", x.len(), params.input())?;
    check("h_prev", h_prev.len(), params.hidden())?;
    let a = matvec(&params.w_x, x);
    let b = matvec(&params.w_h, h_prev);
    Ok((0..params.hidden())
        .map(|k| (a[k] + b[k] + params.b[k]).tanh())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_lstm_step() {
        let p = LstmLayerParams::zeros(3, 2);
        let (h, c) = lstm_cell_step(&p, &[1.0, 2.0, 3.0], &[0.0; 2], &[0.0; 2]).unwrap();
        assert_eq!(h, vec![0.0; 2]);
        assert_eq!(c, vec![0.0; 2]);
    }

    #[test]
    fn lstm_forget_bias_keeps_cell() {
        let mut p = LstmLayerParams::zeros(1, 1);
        p.b[1] = vec![1.0];
        let (h, c) = lstm_cell_step(&p, &[0.0], &[0.0], &[1.0]).unwrap();
        let f = sigmoid(1.0);
        assert!((c[0] - f).abs() < 1e-15);
        assert!((c[0] - 0.7311).abs() < 1e-4);
        assert!((h[0] - 0.5 * f.tanh()).abs() < 1e-15);
    }

    #[test]
    fn zero_gru_halves_state() {
        let p = GruLayerParams::zeros(2, 3);
        let h = gru_cell_step(&p, &[5.0, -1.0], &[1.0, -2.0, 0.5]).unwrap();
        assert_eq!(h, vec![0.5, -1.0, 0.25]);
    }

    #[test]
    fn rnn_identity_step() {
        let mut p = RnnLayerParams::zeros(1, 1);
        p.w_x = Matrix::from_vec(1, 1, vec![1.0]);
        let h = rnn_cell_step(&p, &[0.5], &[0.0]).unwrap();
        assert!((h[0] - 0.5f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn shape_errors() {
        let p = RnnLayerParams::zeros(2, 2);
        assert!(matches!(
            rnn_cell_step(&p, &[1.0], &[0.0, 0.0]),
            Err(Error::ShapeMismatch(_))
        ));
        let mut q = LstmLayerParams::zeros(2, 2);
        q.b[3] = vec![0.0];
        assert!(lstm_cell_step(&q, &[0.0; 2], &[0.0; 2], &[0.0; 2]).is_err());
    }
}
