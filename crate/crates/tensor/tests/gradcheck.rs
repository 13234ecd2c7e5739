//! Finite-difference checks of every differentiable op, 100 seeds each.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vehreid_tensor::gradcheck::check;
use vehreid_tensor::ops::norm::ChannelStats;
use vehreid_tensor::{Result, Tape, Tensor, Var};

const SEEDS: u64 = 100;
const EPS: f64 = 1e-6;
const TOL: f64 = 1e-5;

fn random(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-scale..scale)).collect()).unwrap()
}

/// `Σ r ⊙ y` with a fixed random `r`, so every output element matters.
fn project(tape: &mut Tape, y: Var, seed: u64) -> Result<Var> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let r = random(&mut rng, tape.value(y).shape(), 1.0);
    let r = tape.constant(r);
    let m = tape.mul(y, r)?;
    Ok(tape.sum(m))
}

fn run<G, F>(name: &str, mut gen: G, f: F)
where
    G: FnMut(&mut ChaCha8Rng) -> Vec<Tensor>,
    F: Fn(&mut Tape, &[Var], u64) -> Result<Var>,
{
    let mut worst = 0.0f64;
    for seed in 0..SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs = gen(&mut rng);
        let report = check(&inputs, EPS, None, |tape, vars| f(tape, vars, seed)).unwrap();
        assert!(
            report.max_rel < TOL,
            "{name} seed {seed}: rel {:e} at {:?}",
            report.max_rel,
            report.worst
        );
        worst = worst.max(report.max_rel);
    }
    eprintln!("{name}: worst rel {worst:e}");
}

#[test]
fn conv2d_all_inputs() {
    run(
        "conv2d",
        |rng| {
            let cin = rng.gen_range(1..3);
            let k = [1, 3][rng.gen_range(0..2)];
            let batch = rng.gen_range(1..3);
            vec![
                random(rng, &[batch, cin, 5, 5], 1.0),
                random(rng, &[2, cin, k, k], 1.0),
                random(rng, &[2], 1.0),
            ]
        },
        |tape, v, seed| {
            let (stride, pad) = [(1, 0), (1, 1), (2, 1), (2, 0)][seed as usize % 4];
            let y = tape.conv2d(v[0], v[1], v[2], stride, pad)?;
            project(tape, y, seed)
        },
    );
}

#[test]
fn conv2d_sum_wrt_kernel() {
    // Plain sum of the output, 1×2×5×5 input.
    run(
        "conv2d-sum",
        |rng| vec![random(rng, &[1, 2, 5, 5], 1.0), random(rng, &[3, 2, 3, 3], 1.0), random(rng, &[3], 1.0)],
        |tape, v, _| {
            let y = tape.conv2d(v[0], v[1], v[2], 1, 0)?;
            Ok(tape.sum(y))
        },
    );
}

#[test]
fn elu_and_relu() {
    run(
        "elu",
        |rng| vec![random(rng, &[2, 3, 4], 2.0)],
        |tape, v, seed| {
            let y = tape.elu(v[0], [1.0, 0.5, 2.0][seed as usize % 3])?;
            project(tape, y, seed)
        },
    );
    run(
        "relu",
        |rng| vec![random(rng, &[2, 3, 4], 2.0)],
        |tape, v, seed| {
            let y = tape.relu(v[0]);
            project(tape, y, seed)
        },
    );
}

#[test]
fn znorm_through_statistics() {
    run(
        "znorm",
        |rng| vec![random(rng, &[2, 3, 3, 3], 2.0)],
        |tape, v, seed| {
            let y = tape.znorm(v[0], 1e-5)?;
            project(tape, y, seed)
        },
    );
}

#[test]
fn standardize_with_fixed_stats() {
    run(
        "standardize",
        |rng| vec![random(rng, &[2, 3, 2, 2], 2.0)],
        |tape, v, seed| {
            let stats = ChannelStats {
                mean: vec![0.1, -0.3, 0.7],
                var: vec![1.5, 0.2, 3.0],
            };
            let y = tape.standardize(v[0], stats, 1e-5)?;
            project(tape, y, seed)
        },
    );
}

#[test]
fn concat_slice_add_mul() {
    run(
        "concat",
        |rng| vec![random(rng, &[2, 1, 3, 3], 1.0), random(rng, &[2, 3, 3, 3], 1.0)],
        |tape, v, seed| {
            let y = tape.concat_channels(&[v[0], v[1], v[0]])?;
            project(tape, y, seed)
        },
    );
    run(
        "slice",
        |rng| vec![random(rng, &[2, 4, 2, 3], 1.0)],
        |tape, v, seed| {
            let y = tape.slice_channels(v[0], 1, 2)?;
            project(tape, y, seed)
        },
    );
    run(
        "add-mul",
        |rng| vec![random(rng, &[3, 4], 1.0), random(rng, &[3, 4], 1.0)],
        |tape, v, seed| {
            let s = tape.add(v[0], v[1])?;
            let y = tape.mul(s, v[0])?;
            project(tape, y, seed)
        },
    );
}

#[test]
fn pooling() {
    run(
        "maxpool",
        |rng| vec![random(rng, &[2, 2, 5, 5], 1.0)],
        |tape, v, seed| {
            let (k, s, p) = [(2, 2, 0), (3, 1, 1), (3, 2, 1)][seed as usize % 3];
            let y = tape.maxpool(v[0], k, s, p)?;
            project(tape, y, seed)
        },
    );
    run(
        "global-avg-pool",
        |rng| vec![random(rng, &[2, 3, 3, 4], 1.0)],
        |tape, v, seed| {
            let y = tape.global_avg_pool(v[0])?;
            project(tape, y, seed)
        },
    );
}

#[test]
fn dense_and_chain() {
    run(
        "dense",
        |rng| vec![random(rng, &[3, 4], 1.0), random(rng, &[4, 5], 1.0), random(rng, &[5], 1.0)],
        |tape, v, seed| {
            let y = tape.dense(v[0], v[1], v[2])?;
            project(tape, y, seed)
        },
    );
    run(
        "elu∘dense",
        |rng| vec![random(rng, &[3, 4], 1.0), random(rng, &[4, 5], 1.0), random(rng, &[5], 1.0)],
        |tape, v, seed| {
            let d = tape.dense(v[0], v[1], v[2])?;
            let y = tape.elu(d, 1.0)?;
            project(tape, y, seed)
        },
    );
}

#[test]
fn cross_entropy_logits() {
    run(
        "cross-entropy",
        |rng| vec![random(rng, &[4, 6], 3.0)],
        |tape, v, seed| {
            let targets: Vec<usize> = (0..4).map(|i| (i + seed as usize) % 6).collect();
            tape.cross_entropy(v[0], &targets)
        },
    );
}

#[test]
fn cross_entropy_gradient_is_softmax_minus_onehot() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let logits = random(&mut rng, &[3, 5], 2.0);
    let targets = [4, 0, 2];
    let mut tape = Tape::new();
    let x = tape.leaf(logits.clone(), true);
    let loss = tape.cross_entropy(x, &targets).unwrap();
    tape.backward(loss).unwrap();
    let p = vehreid_tensor::ops::loss::softmax_rows(&logits).unwrap();
    for (i, g) in tape.grad(x).unwrap().data().iter().enumerate() {
        let (row, col) = (i / 5, i % 5);
        let expect = (p.data()[i] - if targets[row] == col { 1.0 } else { 0.0 }) / 3.0;
        assert!((g - expect).abs() < 1e-15);
    }
}
