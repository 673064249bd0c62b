use affect_core::matrix::Matrix;
use affect_core::neural::gradcheck::check_gradients;
use affect_core::neural::{
    Architecture, Batch, BranchMode, CellKind, HeadActivation, Masks, Model,
};
use affect_core::rng::stream;
use rand::Rng;

const CELLS: [CellKind; 3] = [CellKind::Lstm, CellKind::Rnn, CellKind::Gru];
const MODES: [BranchMode; 3] = [BranchMode::B1, BranchMode::B2, BranchMode::Both];

fn tiny(cell: CellKind, branches: BranchMode, head: HeadActivation) -> Architecture {
    Architecture {
        cell,
        branches,
        local_dim: 5,
        global_dim: 6,
        hidden: 3,
        layers: 2,
        mlp_hidden: vec![4, 4],
        mlp_out: 3,
        classes: 4,
        head,
    }
}

fn random_batch(seed: u64, size: usize, steps: usize) -> Batch {
    let mut rng = stream(seed, &[77]);
    let locals: Vec<Matrix> = (0..size)
        .map(|_| Matrix::from_vec(steps, 5, (0..steps * 5).map(|_| rng.random_range(-1.0..1.0)).collect()))
        .collect();
    let globals: Vec<Vec<f64>> = (0..size)
        .map(|_| (0..6).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let labels = (0..size).map(|_| rng.random_range(0..4)).collect();
    Batch::new(
        &locals.iter().collect::<Vec<_>>(),
        &globals.iter().map(Vec::as_slice).collect::<Vec<_>>(),
        labels,
    )
    .unwrap()
}

/// Perturbs every parameter so peepholes and biases are exercised too.
fn jitter(model: &mut Model, seed: u64) {
    let mut rng = stream(seed, &[5]);
    for p in model.params_mut() {
        *p += rng.random_range(-0.5..0.5);
    }
}

#[test]
fn analytic_gradients_match_finite_differences() {
    for cell in CELLS {
        for mode in MODES {
            let mut worst = 0.0f64;
            for seed in 0..20u64 {
                let arch = tiny(cell, mode, HeadActivation::Relu);
                let mut model = Model::new(arch.clone(), seed).unwrap();
                jitter(&mut model, seed);
                let batch = random_batch(seed, 3, 4);
                let mut rng = stream(seed, &[9]);
                let masks = Masks::sample(&arch, 3, 0.3, &mut rng);
                let r = check_gradients(&model, &batch, Some(&masks), 1e-5).unwrap();
                assert!(
                    r.max_relative_error < 1e-4,
                    "{cell} {mode} seed {seed}: {r:?}"
                );
                worst = worst.max(r.max_relative_error);
            }
            eprintln!("{cell} {mode}: worst relative error {worst:.2e}");
        }
    }
}

#[test]
fn linear_head_gradients_match_finite_differences() {
    for cell in CELLS {
        let arch = tiny(cell, BranchMode::Both, HeadActivation::Linear);
        let mut model = Model::new(arch, 3).unwrap();
        jitter(&mut model, 3);
        let batch = random_batch(3, 2, 4);
        let r = check_gradients(&model, &batch, None, 1e-5).unwrap();
        assert!(r.max_relative_error < 1e-4, "{cell}: {r:?}");
    }
}
