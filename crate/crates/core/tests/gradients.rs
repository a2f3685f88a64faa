mod common;

use common::{bptt_gradients, central_differences, max_relative_error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use swarmcl::autodiff::{Tape, Tensor, Var};

type Build = fn(&mut Tape<f64>, Var) -> Var;

/// Checks `sum(w ⊙ op(x))` for a fixed random `w`, so every output
/// component carries a distinct weight.
fn check_op(name: &str, shape: &[usize], sample: impl Fn(&mut ChaCha8Rng) -> f64, build: Build) {
    let mut rng = ChaCha8Rng::seed_from_u64(name.len() as u64 * 7919);
    let numel: usize = shape.iter().product();
    let x: Vec<f64> = (0..numel).map(|_| sample(&mut rng)).collect();
    let out_numel = {
        let mut tape = Tape::new();
        let v = tape.leaf(Tensor::new(shape.to_vec(), x.clone()).unwrap()).unwrap();
        let out = build(&mut tape, v);
        tape.value(out).numel()
    };
    let w: Vec<f64> = (0..out_numel).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let eval = |x: &[f64], grad: bool| {
        let mut tape = Tape::new();
        let v = tape.leaf(Tensor::new(shape.to_vec(), x.to_vec()).unwrap()).unwrap();
        let out = build(&mut tape, v);
        let out_shape = tape.value(out).shape().to_vec();
        let wv = tape.constant(Tensor::new(out_shape, w.clone()).unwrap()).unwrap();
        let prod = tape.mul(out, wv).unwrap();
        let root = tape.sum(prod).unwrap();
        let value = tape.value(root).item().unwrap();
        let g = grad.then(|| tape.backward(root).unwrap().wrt(v).unwrap().data().to_vec());
        (value, g)
    };
    let analytic = eval(&x, true).1.unwrap();
    let numeric = central_differences(|p| eval(p, false).0, &x, 1e-5);
    let err = max_relative_error(&analytic, &numeric, 1e-6);
    assert!(err < 1e-5, "{name}: max relative error {err:e}");
}

fn signed(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(-2.0..2.0)
}

fn away_from_zero(rng: &mut ChaCha8Rng) -> f64 {
    let v = rng.gen_range(0.1..2.0);
    if rng.gen_bool(0.5) {
        v
    } else {
        -v
    }
}

fn positive(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(0.2..3.0)
}

fn constant(tape: &mut Tape<f64>, rows: usize, cols: usize, seed: u64) -> Var {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
    tape.constant(Tensor::matrix(rows, cols, data).unwrap()).unwrap()
}

#[test]
fn elementwise_ops_match_finite_differences() {
    check_op("add", &[3, 4], signed, |t, x| {
        let c = constant(t, 3, 4, 1);
        let y = t.add(x, c).unwrap();
        t.add(y, x).unwrap()
    });
    check_op("sub", &[3, 4], signed, |t, x| {
        let c = constant(t, 3, 4, 2);
        let y = t.sub(c, x).unwrap();
        t.sub(y, x).unwrap()
    });
    check_op("mul", &[3, 4], signed, |t, x| {
        let c = constant(t, 3, 4, 3);
        let y = t.mul(x, c).unwrap();
        t.mul(y, x).unwrap()
    });
    check_op("scale", &[5], signed, |t, x| t.scale(x, -1.75).unwrap());
    check_op("tanh", &[2, 5], signed, |t, x| t.tanh(x).unwrap());
    check_op("relu", &[2, 5], away_from_zero, |t, x| t.relu(x).unwrap());
    check_op("square", &[7], signed, |t, x| t.square(x).unwrap());
    check_op("sqrt", &[7], positive, |t, x| t.sqrt(x).unwrap());
}

#[test]
fn reductions_match_finite_differences() {
    check_op("sum", &[3, 3], signed, |t, x| t.sum(x).unwrap());
    check_op("mean", &[2, 6], signed, |t, x| t.mean(x).unwrap());
    check_op("softmax", &[3, 5], signed, |t, x| t.softmax(x).unwrap());
    check_op("softmax-row", &[1, 4], signed, |t, x| t.softmax(x).unwrap());
}

#[test]
fn structural_ops_match_finite_differences() {
    check_op("matmul-left", &[3, 4], signed, |t, x| {
        let c = constant(t, 4, 2, 4);
        t.matmul(x, c).unwrap()
    });
    check_op("matmul-right", &[4, 2], signed, |t, x| {
        let c = constant(t, 3, 4, 5);
        t.matmul(c, x).unwrap()
    });
    check_op("matmul-self", &[3, 3], signed, |t, x| t.matmul(x, x).unwrap());
    check_op("concat-rows", &[2, 3], signed, |t, x| {
        let c = constant(t, 1, 3, 6);
        t.concat(&[x, c, x], 0).unwrap()
    });
    check_op("concat-cols", &[2, 3], signed, |t, x| {
        let c = constant(t, 2, 2, 7);
        t.concat(&[c, x], 1).unwrap()
    });
    check_op("slice-rows", &[4, 3], signed, |t, x| t.slice(x, 0, 1, 2).unwrap());
    check_op("slice-cols", &[4, 3], signed, |t, x| t.slice(x, 1, 1, 2).unwrap());
    check_op("reshape", &[2, 6], signed, |t, x| {
        let r = t.reshape(x, &[3, 4]).unwrap();
        t.tanh(r).unwrap()
    });
    check_op("transpose", &[2, 3], signed, |t, x| {
        let y = t.transpose(x).unwrap();
        let c = constant(t, 2, 2, 8);
        t.matmul(y, c).unwrap()
    });
    check_op("gather", &[3, 2], signed, |t, x| t.gather_rows(x, &[2, 0, 2, 1, 2]).unwrap());
}

#[test]
fn two_layer_tanh_network_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let (batch, d_in, d_hidden, d_out) = (5, 4, 8, 3);
    let x: Vec<f64> = (0..batch * d_in).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let y: Vec<f64> = (0..batch * d_out).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let sizes = [d_in * d_hidden, d_hidden, d_hidden * d_out, d_out];
    let theta: Vec<f64> = (0..sizes.iter().sum()).map(|_| rng.gen_range(-0.8..0.8)).collect();

    let eval = |theta: &[f64], grad: bool| {
        let mut tape = Tape::new();
        let p = tape.leaf(Tensor::vector(theta.to_vec())).unwrap();
        let mut offset = 0;
        let mut take = |tape: &mut Tape<f64>, rows: usize, cols: usize| {
            let s = tape.slice(p, 0, offset, rows * cols).unwrap();
            offset += rows * cols;
            tape.reshape(s, &[rows, cols]).unwrap()
        };
        let w1 = take(&mut tape, d_in, d_hidden);
        let b1 = take(&mut tape, 1, d_hidden);
        let w2 = take(&mut tape, d_hidden, d_out);
        let b2 = take(&mut tape, 1, d_out);
        let xv = tape.constant(Tensor::matrix(batch, d_in, x.clone()).unwrap()).unwrap();
        let yv = tape.constant(Tensor::matrix(batch, d_out, y.clone()).unwrap()).unwrap();
        let ones = tape.constant(Tensor::filled(&[batch, 1], 1.0)).unwrap();
        let h = tape.matmul(xv, w1).unwrap();
        let bias = tape.matmul(ones, b1).unwrap();
        let h = tape.add(h, bias).unwrap();
        let h = tape.tanh(h).unwrap();
        let o = tape.matmul(h, w2).unwrap();
        let bias = tape.matmul(ones, b2).unwrap();
        let o = tape.add(o, bias).unwrap();
        let o = tape.tanh(o).unwrap();
        let d = tape.sub(o, yv).unwrap();
        let sq = tape.square(d).unwrap();
        let loss = tape.mean(sq).unwrap();
        let value = tape.value(loss).item().unwrap();
        (value, grad.then(|| tape.backward(loss).unwrap().wrt(p).unwrap().data().to_vec()))
    };
    let analytic = eval(&theta, true).1.unwrap();
    let numeric = central_differences(|t| eval(t, false).0, &theta, 1e-5);
    let err = max_relative_error(&analytic, &numeric, 1e-7);
    assert!(err < 1e-6, "max relative error {err:e}");
}

#[test]
fn bptt_gradient_with_goal_token() {
    let (analytic, numeric) = bptt_gradients(11, 3, 3, true, 1e-5);
    let err = max_relative_error(&analytic, &numeric, 1e-7);
    assert!(err < 1e-4, "max relative error {err:e}");
}

#[test]
fn backward_is_bitwise_reproducible() {
    let (a, _) = bptt_gradients(5, 3, 4, false, 1e-5);
    let (b, _) = bptt_gradients(5, 3, 4, false, 1e-5);
    assert_eq!(a, b);
}
