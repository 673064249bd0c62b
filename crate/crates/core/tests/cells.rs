//! Cell steps and whole-model forward passes against scalar-loop oracles.

use affect_core::matrix::Matrix;
use affect_core::neural::{
    gru_cell_step, lstm_cell_step, rnn_cell_step, Architecture, Batch, BranchMode, CellKind,
    GruLayerParams, HeadActivation, LstmLayerParams, Model, RnnLayerParams,
};
use affect_core::rng::stream;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const CASES: u64 = 120;
const TOL: f64 = 1e-12;

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn rand_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

fn rand_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_vec(rows, cols, rand_vec(rng, rows * cols, 1.0))
}

/// `sum_j m[k][j] v[j]` by explicit indexing.
fn dot_row(m: &Matrix, k: usize, v: &[f64]) -> f64 {
    let mut s = 0.0;
    for (j, vj) in v.iter().enumerate() {
        s += m.get(k, j) * vj;
    }
    s
}

fn assert_close(a: &[f64], b: &[f64], what: &str) {
    assert_eq!(a.len(), b.len(), "{what}: length");
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        assert!((x - y).abs() <= TOL, "{what}[{i}]: {x} vs {y}");
    }
}

fn dims(rng: &mut ChaCha8Rng) -> (usize, usize) {
    (rng.random_range(1..7), rng.random_range(1..6))
}

#[test]
fn lstm_step_matches_scalar_oracle() {
    for case in 0..CASES {
        let mut rng = stream(case, &[1]);
        let (d, h) = dims(&mut rng);
        let p = LstmLayerParams {
            w_x: std::array::from_fn(|_| rand_matrix(&mut rng, h, d)),
            w_h: std::array::from_fn(|_| rand_matrix(&mut rng, h, h)),
            peephole: std::array::from_fn(|_| rand_vec(&mut rng, h, 1.0)),
            b: std::array::from_fn(|_| rand_vec(&mut rng, h, 1.0)),
        };
        let x = rand_vec(&mut rng, d, 2.0);
        let hp = rand_vec(&mut rng, h, 1.0);
        let cp = rand_vec(&mut rng, h, 2.0);
        let (hn, cn) = lstm_cell_step(&p, &x, &hp, &cp).unwrap();

        let mut h_ref = vec![0.0; h];
        let mut c_ref = vec![0.0; h];
        for k in 0..h {
            let a = |g: usize| dot_row(&p.w_x[g], k, &x) + dot_row(&p.w_h[g], k, &hp) + p.b[g][k];
            let i = sig(a(0) + p.peephole[0][k] * cp[k]);
            let f = sig(a(1) + p.peephole[1][k] * cp[k]);
            let g = a(2).tanh();
            let o = sig(a(3) + p.peephole[2][k] * cp[k]);
            c_ref[k] = f * cp[k] + i * g;
            h_ref[k] = o * c_ref[k].tanh();
        }
        assert_close(&hn, &h_ref, &format!("lstm h case {case}"));
        assert_close(&cn, &c_ref, &format!("lstm c case {case}"));
    }
}

#[test]
fn gru_step_matches_scalar_oracle() {
    for case in 0..CASES {
        let mut rng = stream(case, &[2]);
        let (d, h) = dims(&mut rng);
        let p = GruLayerParams {
            w_x: std::array::from_fn(|_| rand_matrix(&mut rng, h, d)),
            w_h: std::array::from_fn(|_| rand_matrix(&mut rng, h, h)),
            b: std::array::from_fn(|_| rand_vec(&mut rng, h, 1.0)),
        };
        let x = rand_vec(&mut rng, d, 2.0);
        let hp = rand_vec(&mut rng, h, 1.0);
        let out = gru_cell_step(&p, &x, &hp).unwrap();

        let mut r = vec![0.0; h];
        for k in 0..h {
            r[k] = sig(dot_row(&p.w_x[1], k, &x) + dot_row(&p.w_h[1], k, &hp) + p.b[1][k]);
        }
        let rh: Vec<f64> = (0..h).map(|k| r[k] * hp[k]).collect();
        let mut expect = vec![0.0; h];
        for k in 0..h {
            let z = sig(dot_row(&p.w_x[0], k, &x) + dot_row(&p.w_h[0], k, &hp) + p.b[0][k]);
            let n = (dot_row(&p.w_x[2], k, &x) + dot_row(&p.w_h[2], k, &rh) + p.b[2][k]).tanh();
            expect[k] = z * hp[k] + (1.0 - z) * n;
        }
        assert_close(&out, &expect, &format!("gru case {case}"));
    }
}

#[test]
fn rnn_step_matches_scalar_oracle() {
    for case in 0..CASES {
        let mut rng = stream(case, &[3]);
        let (d, h) = dims(&mut rng);
        let p = RnnLayerParams {
            w_x: rand_matrix(&mut rng, h, d),
            w_h: rand_matrix(&mut rng, h, h),
            b: rand_vec(&mut rng, h, 1.0),
        };
        let x = rand_vec(&mut rng, d, 2.0);
        let hp = rand_vec(&mut rng, h, 1.0);
        let out = rnn_cell_step(&p, &x, &hp).unwrap();
        let expect: Vec<f64> = (0..h)
            .map(|k| (dot_row(&p.w_x, k, &x) + dot_row(&p.w_h, k, &hp) + p.b[k]).tanh())
            .collect();
        assert_close(&out, &expect, &format!("rnn case {case}"));
    }
}

#[test]
fn lstm_saturated_gates_reach_closed_form() {
    let mut p = LstmLayerParams::zeros(1, 1);
    p.b[0][0] = 10.0;
    p.b[3][0] = 10.0;
    p.b[1][0] = -10.0;
    p.b[2][0] = 0.5f64.atanh();
    let (h, c) = lstm_cell_step(&p, &[0.0], &[0.0], &[0.0]).unwrap();
    assert!((c[0] - 0.5).abs() < 1e-4);
    assert!((h[0] - 0.5f64.tanh()).abs() < 1e-4);
}

#[test]
fn gru_update_gate_saturated_keeps_state() {
    let mut rng = stream(11, &[]);
    let mut p = GruLayerParams {
        w_x: std::array::from_fn(|_| rand_matrix(&mut rng, 3, 2)),
        w_h: std::array::from_fn(|_| rand_matrix(&mut rng, 3, 3)),
        b: std::array::from_fn(|_| vec![0.0; 3]),
    };
    p.b[0] = vec![30.0; 3];
    let hp = [0.3, -0.7, 0.1];
    let out = gru_cell_step(&p, &[0.4, -0.2], &hp).unwrap();
    for (a, b) in out.iter().zip(&hp) {
        assert!((a - b).abs() < 1e-4);
    }
}

fn random_batch(rng: &mut ChaCha8Rng, n: usize, steps: usize, d: usize, g: usize) -> Batch {
    let locals: Vec<Matrix> = if d == 0 {
        Vec::new()
    } else {
        (0..n).map(|_| rand_matrix(rng, steps, d)).collect()
    };
    let globals: Vec<Vec<f64>> = if g == 0 {
        Vec::new()
    } else {
        (0..n).map(|_| rand_vec(rng, g, 1.5)).collect()
    };
    Batch::new(
        &locals.iter().collect::<Vec<_>>(),
        &globals.iter().map(Vec::as_slice).collect::<Vec<_>>(),
        vec![0; n],
    )
    .unwrap()
}

fn tensor<'a>(model: &'a Model, name: &str) -> &'a [f64] {
    let spec = model.layout().get(name).unwrap_or_else(|| panic!("missing {name}"));
    &model.params()[spec.range()]
}

/// `y = W x + b` with `W` stored row-major as `out x in`.
fn dense(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let n_in = x.len();
    (0..b.len())
        .map(|o| b[o] + (0..n_in).map(|i| w[o * n_in + i] * x[i]).sum::<f64>())
        .collect()
}

/// Runs the stacked branch one sample at a time through the cell steps and
/// returns the top layer's final hidden state.
fn iterate_cells(model: &Model, local: &[Vec<f64>]) -> Vec<f64> {
    let arch = model.architecture();
    let mut seq: Vec<Vec<f64>> = local.to_vec();
    for l in 0..arch.layers {
        let mut h = vec![0.0; arch.hidden];
        let mut c = vec![0.0; arch.hidden];
        let mut out = Vec::with_capacity(seq.len());
        for x in &seq {
            h = match arch.cell {
                CellKind::Lstm => {
                    let (hn, cn) = lstm_cell_step(&model.lstm_layer(l).unwrap(), x, &h, &c).unwrap();
                    c = cn;
                    hn
                }
                CellKind::Gru => gru_cell_step(&model.gru_layer(l).unwrap(), x, &h).unwrap(),
                CellKind::Rnn => rnn_cell_step(&model.rnn_layer(l).unwrap(), x, &h).unwrap(),
            };
            out.push(h.clone());
        }
        seq = out;
    }
    seq.pop().unwrap()
}

#[test]
fn engine_matches_iterated_cell_steps() {
    let (steps, d) = (6, 4);
    for cell in [CellKind::Lstm, CellKind::Gru, CellKind::Rnn] {
        for seed in 0..5u64 {
            let arch = Architecture {
                cell,
                branches: BranchMode::B1,
                local_dim: d,
                global_dim: 0,
                hidden: 5,
                layers: 3,
                mlp_hidden: vec![],
                mlp_out: 0,
                classes: 4,
                head: HeadActivation::Linear,
            };
            let mut model = Model::new(arch, seed).unwrap();
            let mut rng = stream(seed, &[4]);
            for p in model.params_mut() {
                *p += rng.random_range(-0.3..0.3);
            }
            let batch = random_batch(&mut rng, 3, steps, d, 0);
            let logits = model.forward(&batch, None).unwrap().logits;
            for b in 0..3 {
                // Batches are time-major: row t * size + b.
                let local: Vec<Vec<f64>> = (0..steps)
                    .map(|t| batch.local[(t * 3 + b) * d..(t * 3 + b + 1) * d].to_vec())
                    .collect();
                let z = iterate_cells(&model, &local);
                let y = dense(tensor(&model, "fusion.W"), tensor(&model, "fusion.b"), &z);
                assert_close(logits.row(b), &y, &format!("{cell} seed {seed} sample {b}"));
            }
        }
    }
}

#[test]
fn mlp_branch_matches_scalar_oracle() {
    let arch = Architecture {
        cell: CellKind::Lstm,
        branches: BranchMode::B2,
        local_dim: 0,
        global_dim: 4,
        hidden: 0,
        layers: 0,
        mlp_hidden: vec![3, 3],
        mlp_out: 3,
        classes: 2,
        head: HeadActivation::Relu,
    };
    let relu = |v: Vec<f64>| v.into_iter().map(|x| x.max(0.0)).collect::<Vec<_>>();
    for seed in 0..CASES {
        let mut model = Model::new(arch.clone(), seed).unwrap();
        let mut rng = stream(seed, &[6]);
        for p in model.params_mut() {
            *p += rng.random_range(-0.5..0.5);
        }
        let batch = random_batch(&mut rng, 2, 1, 0, 4);
        let logits = model.forward(&batch, None).unwrap().logits;
        for b in 0..2 {
            let mut z = batch.global[b * 4..(b + 1) * 4].to_vec();
            for layer in ["mlp.0", "mlp.1", "mlp.out"] {
                let w = tensor(&model, &format!("{layer}.W"));
                let bias = tensor(&model, &format!("{layer}.b"));
                z = relu(dense(w, bias, &z));
            }
            let y = relu(dense(tensor(&model, "fusion.W"), tensor(&model, "fusion.b"), &z));
            assert_close(logits.row(b), &y, &format!("mlp seed {seed} sample {b}"));
        }
    }
}

#[test]
fn fusion_bias_gradient_is_softmax_minus_onehot() {
    // All-zero weights make every logit equal, so the softmax is uniform.
    let arch = Architecture {
        cell: CellKind::Lstm,
        branches: BranchMode::Both,
        local_dim: 3,
        global_dim: 4,
        hidden: 2,
        layers: 1,
        mlp_hidden: vec![3],
        mlp_out: 2,
        classes: 4,
        head: HeadActivation::Linear,
    };
    let n = Model::new(arch.clone(), 0).unwrap().params().len();
    let model = Model::from_params(arch, vec![0.0; n]).unwrap();
    let mut rng = stream(8, &[]);
    let locals: Vec<Matrix> = (0..4).map(|_| rand_matrix(&mut rng, 5, 3)).collect();
    let globals: Vec<Vec<f64>> = (0..4).map(|_| rand_vec(&mut rng, 4, 1.0)).collect();
    let labels = vec![0, 2, 2, 3];
    let batch = Batch::new(
        &locals.iter().collect::<Vec<_>>(),
        &globals.iter().map(Vec::as_slice).collect::<Vec<_>>(),
        labels.clone(),
    )
    .unwrap();
    let (loss, grad) = model.loss_and_gradient(&batch, None).unwrap();
    assert!((loss - 4f64.ln()).abs() < 1e-12);
    let spec = model.layout().get("fusion.b").unwrap();
    let gb = &grad[spec.range()];
    for (k, g) in gb.iter().enumerate() {
        let hits = labels.iter().filter(|&&l| l == k).count() as f64;
        let expect = 0.25 - hits / 4.0;
        assert!((g - expect).abs() < 1e-12, "class {k}: {g} vs {expect}");
    }
}
