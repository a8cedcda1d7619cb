//! Finite-difference verification of every tape op.
//!
//! For each op kind, 50 random shapes/seeds: the analytic gradient from
//! `backward` must match central differences (h = 1e-3, double precision)
//! within a max relative error of 1e-4, where the relative error denominator
//! is max(|a|, |b|, 1e-8).
//!
//! Inputs are sampled away from the non-differentiable sets (relu kinks,
//! pooling/row-max ties) so that the finite-difference oracle is valid.

use advlab::tensor::gradcheck::{finite_diff_grad, max_rel_err};
use advlab::tensor::{Tape, Tensor, Var};
use advlab::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-3;
const TOL: f64 = 1e-4;
const CASES: usize = 50;

/// Uniform values in [-2, 2] kept at least `margin` away from zero.
fn sample_away_from_zero(rng: &mut ChaCha8Rng, n: usize, margin: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let mut v: f64 = rng.gen_range(-2.0..2.0);
            if v.abs() < margin {
                v = margin * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            }
            v
        })
        .collect()
}

fn sample(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect()
}

/// Spread values in a window so that no two are within `gap` (keeps argmax
/// stable under the FD probe).
fn separate(vals: &mut [f64], gap: f64) {
    loop {
        let mut idx: Vec<usize> = (0..vals.len()).collect();
        idx.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap());
        let mut moved = false;
        for w in idx.windows(2) {
            if vals[w[1]] - vals[w[0]] < gap {
                vals[w[1]] = vals[w[0]] + gap;
                moved = true;
            }
        }
        if !moved {
            return;
        }
    }
}

struct Case {
    /// Shapes of the differentiated inputs.
    inputs: Vec<Tensor<f64>>,
    /// Builds the op under test; result is contracted to a scalar by the
    /// harness via a fixed random weighting.
    build: Box<dyn Fn(&mut Tape<f64>, &[Var]) -> Result<Var>>,
}

fn contract(tape: &mut Tape<f64>, out: Var, weights: &Tensor<f64>) -> Result<Var> {
    let w = tape.constant(weights.clone());
    let prod = tape.mul(out, w)?;
    tape.sum(prod)
}

fn run_case(case: &Case, rng: &mut ChaCha8Rng) -> f64 {
    // Forward once to learn the output shape for the contraction weights.
    let out_shape = {
        let mut tape = Tape::new();
        let vars: Vec<Var> = case
            .inputs
            .iter()
            .map(|t| tape.leaf(t.clone().with_grad()))
            .collect();
        let out = (case.build)(&mut tape, &vars).expect("forward failed");
        tape.value(out).shape().to_vec()
    };
    let weights = Tensor::from_vec(
        out_shape.clone(),
        sample(rng, out_shape.iter().product()),
    )
    .unwrap();

    // Analytic gradients.
    let mut tape = Tape::new();
    let vars: Vec<Var> = case
        .inputs
        .iter()
        .map(|t| tape.leaf(t.clone().with_grad()))
        .collect();
    let out = (case.build)(&mut tape, &vars).unwrap();
    let loss = contract(&mut tape, out, &weights).unwrap();
    let grads = tape.backward(loss).unwrap();

    // Numeric gradients, one input at a time.
    let mut worst = 0.0f64;
    for (i, input) in case.inputs.iter().enumerate() {
        let loss_fn = |probe: &Tensor<f64>| -> Result<f64> {
            let mut tape = Tape::new();
            let vars: Vec<Var> = case
                .inputs
                .iter()
                .enumerate()
                .map(|(j, t)| {
                    if j == i {
                        tape.leaf(probe.clone())
                    } else {
                        tape.leaf(t.clone())
                    }
                })
                .collect();
            let out = (case.build)(&mut tape, &vars)?;
            let loss = contract(&mut tape, out, &weights)?;
            Ok(tape.value(loss).item())
        };
        let numeric = finite_diff_grad(loss_fn, input, H).unwrap();
        let analytic = grads
            .wrt(vars[i])
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(input.shape().to_vec()));
        worst = worst.max(max_rel_err(&analytic, &numeric, 1e-8));
    }
    worst
}

fn t(shape: Vec<usize>, data: Vec<f64>) -> Tensor<f64> {
    Tensor::from_vec(shape, data).unwrap()
}

fn check_op(name: &str, make: impl Fn(&mut ChaCha8Rng) -> Case) {
    let mut worst = 0.0f64;
    for seed in 0..CASES as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE + seed);
        let case = make(&mut rng);
        let err = run_case(&case, &mut rng);
        assert!(
            err < TOL,
            "{name}: seed {seed} max rel err {err:.3e} >= {TOL:.0e}"
        );
        worst = worst.max(err);
    }
    println!("gradcheck {name}: worst rel err {worst:.3e} over {CASES} cases");
}

#[test]
fn gradcheck_add_sub_mul() {
    for (name, which) in [("add", 0u8), ("sub", 1), ("mul", 2)] {
        check_op(name, move |rng| {
            let n = rng.gen_range(1..=4);
            let m = rng.gen_range(1..=5);
            let a = t(vec![n, m], sample(rng, n * m));
            let b = t(vec![n, m], sample(rng, n * m));
            Case {
                inputs: vec![a, b],
                build: Box::new(move |tape, v| match which {
                    0 => tape.add(v[0], v[1]),
                    1 => tape.sub(v[0], v[1]),
                    _ => tape.mul(v[0], v[1]),
                }),
            }
        });
    }
}

#[test]
fn gradcheck_matmul() {
    check_op("matmul", |rng| {
        let (m, k, n) = (
            rng.gen_range(1..=4),
            rng.gen_range(1..=4),
            rng.gen_range(1..=4),
        );
        Case {
            inputs: vec![
                t(vec![m, k], sample(rng, m * k)),
                t(vec![k, n], sample(rng, k * n)),
            ],
            build: Box::new(|tape, v| tape.matmul(v[0], v[1])),
        }
    });
}

#[test]
fn gradcheck_conv2d() {
    check_op("conv2d", |rng| {
        let (b, ci, co) = (
            rng.gen_range(1..=2),
            rng.gen_range(1..=2),
            rng.gen_range(1..=3),
        );
        let (h, w) = (rng.gen_range(3..=5), rng.gen_range(3..=5));
        Case {
            inputs: vec![
                t(vec![b, ci, h, w], sample(rng, b * ci * h * w)),
                t(vec![co, ci, 3, 3], sample(rng, co * ci * 9)),
            ],
            build: Box::new(|tape, v| tape.conv2d(v[0], v[1])),
        }
    });
}

#[test]
fn gradcheck_relu() {
    check_op("relu", |rng| {
        let n = rng.gen_range(1..=12);
        Case {
            inputs: vec![t(vec![n], sample_away_from_zero(rng, n, 50.0 * H))],
            build: Box::new(|tape, v| tape.relu(v[0])),
        }
    });
}

#[test]
fn gradcheck_max_pool() {
    check_op("max-pool", |rng| {
        let (b, c) = (rng.gen_range(1..=2), rng.gen_range(1..=2));
        let (h, w) = (2 * rng.gen_range(1..=2usize), 2 * rng.gen_range(1..=2usize));
        let mut data = sample(rng, b * c * h * w);
        // keep window maxima unique so FD probes cannot flip the argmax
        for bc in 0..b * c {
            for i in 0..h / 2 {
                for j in 0..w / 2 {
                    let idx = [
                        bc * h * w + (2 * i) * w + 2 * j,
                        bc * h * w + (2 * i) * w + 2 * j + 1,
                        bc * h * w + (2 * i + 1) * w + 2 * j,
                        bc * h * w + (2 * i + 1) * w + 2 * j + 1,
                    ];
                    let mut vals = [data[idx[0]], data[idx[1]], data[idx[2]], data[idx[3]]];
                    separate(&mut vals, 100.0 * H);
                    for (p, &q) in idx.iter().enumerate() {
                        data[q] = vals[p];
                    }
                }
            }
        }
        Case {
            inputs: vec![t(vec![b, c, h, w], data)],
            build: Box::new(|tape, v| tape.max_pool(v[0])),
        }
    });
}

#[test]
fn gradcheck_flatten() {
    check_op("flatten", |rng| {
        let (b, c, h, w) = (
            rng.gen_range(1..=2),
            rng.gen_range(1..=2),
            rng.gen_range(1..=3),
            rng.gen_range(1..=3),
        );
        Case {
            inputs: vec![t(vec![b, c, h, w], sample(rng, b * c * h * w))],
            build: Box::new(|tape, v| tape.flatten(v[0])),
        }
    });
}

#[test]
fn gradcheck_affine_bias() {
    check_op("affine-bias-2d", |rng| {
        let (b, f) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
        Case {
            inputs: vec![t(vec![b, f], sample(rng, b * f)), t(vec![f], sample(rng, f))],
            build: Box::new(|tape, v| tape.affine_bias(v[0], v[1])),
        }
    });
    check_op("affine-bias-4d", |rng| {
        let (b, c, h, w) = (
            rng.gen_range(1..=2),
            rng.gen_range(1..=3),
            rng.gen_range(1..=3),
            rng.gen_range(1..=3),
        );
        Case {
            inputs: vec![
                t(vec![b, c, h, w], sample(rng, b * c * h * w)),
                t(vec![c], sample(rng, c)),
            ],
            build: Box::new(|tape, v| tape.affine_bias(v[0], v[1])),
        }
    });
}

#[test]
fn gradcheck_scale_mean_sum_exp_rowsum() {
    let unary: [(&str, fn(&mut Tape<f64>, Var) -> Result<Var>); 5] = [
        ("scale", |tape, v| tape.scale(v, -1.75)),
        ("mean", |tape, v| tape.mean(v)),
        ("sum", |tape, v| tape.sum(v)),
        ("exp", |tape, v| tape.exp(v)),
        ("row-sum", |tape, v| tape.row_sum(v)),
    ];
    for (name, f) in unary {
        check_op(name, move |rng| {
            let (b, k) = (rng.gen_range(1..=4), rng.gen_range(1..=5));
            Case {
                inputs: vec![t(vec![b, k], sample(rng, b * k))],
                build: Box::new(move |tape, v| f(tape, v[0])),
            }
        });
    }
}

#[test]
fn gradcheck_log_softmax() {
    check_op("log-softmax", |rng| {
        let (b, k) = (rng.gen_range(1..=4), rng.gen_range(2..=6));
        let tau = rng.gen_range(0.25..5.0);
        Case {
            inputs: vec![t(vec![b, k], sample(rng, b * k))],
            build: Box::new(move |tape, v| tape.log_softmax(v[0], tau)),
        }
    });
}

#[test]
fn gradcheck_row_max() {
    check_op("row-max", |rng| {
        let (b, k) = (rng.gen_range(1..=4), rng.gen_range(2..=6));
        let mut data = sample(rng, b * k);
        for i in 0..b {
            separate(&mut data[i * k..(i + 1) * k], 100.0 * H);
        }
        Case {
            inputs: vec![t(vec![b, k], data)],
            build: Box::new(|tape, v| tape.row_max(v[0])),
        }
    });
}
