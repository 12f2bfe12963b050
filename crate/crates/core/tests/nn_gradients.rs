//! Finite-difference checks for every layer's backward pass.
//!
//! Each check perturbs entries with a central difference on a scalar loss
//! and compares against the analytic gradient.

use diarize_core::nn::{
    Activation, BatchNorm1d, Conv1d, InstanceNorm1d, LayerNorm, Linear, Mat, Mode,
    MultiHeadAttention, log_softmax, log_softmax_backward, seeded_rng,
};
use rand::Rng;

const H: f64 = 1e-5;
const TOL: f64 = 1e-6;

fn rand_mat(rows: usize, cols: usize, seed: u64) -> Mat {
    let mut rng = seeded_rng(seed);
    Mat::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

/// Scalar loss with fixed random coefficients so every output entry matters.
fn loss_of(y: &Mat, coef: &Mat) -> f64 {
    (y * coef).sum()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

fn fd_input_grad<FF>(x: &Mat, coef: &Mat, mut fwd: FF) -> Mat
where
    FF: FnMut(&Mat) -> Mat,
{
    let mut g = Mat::zeros(x.raw_dim());
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            let mut xp = x.clone();
            xp[[i, j]] += H;
            let lp = loss_of(&fwd(&xp), coef);
            let mut xm = x.clone();
            xm[[i, j]] -= H;
            let lm = loss_of(&fwd(&xm), coef);
            g[[i, j]] = (lp - lm) / (2.0 * H);
        }
    }
    g
}

/// Central-difference gradient for one parameter tensor of a cloneable layer.
fn fd_param_grad<L, GetP, FF>(layer: &L, x: &Mat, coef: &Mat, shape: (usize, usize), get: GetP, fwd: FF) -> Mat
where
    L: Clone,
    GetP: Fn(&mut L) -> &mut Mat,
    FF: Fn(&mut L, &Mat) -> Mat,
{
    let mut g = Mat::zeros(shape);
    for i in 0..shape.0 {
        for j in 0..shape.1 {
            let mut lp = layer.clone();
            get(&mut lp)[[i, j]] += H;
            let up = loss_of(&fwd(&mut lp, x), coef);
            let mut lm = layer.clone();
            get(&mut lm)[[i, j]] -= H;
            let dn = loss_of(&fwd(&mut lm, x), coef);
            g[[i, j]] = (up - dn) / (2.0 * H);
        }
    }
    g
}

fn assert_close(analytic: &Mat, numeric: &Mat, what: &str) {
    for (a, n) in analytic.iter().zip(numeric.iter()) {
        assert!(
            rel_err(*a, *n) < TOL || (a - n).abs() < 1e-7,
            "{what}: analytic {a} vs numeric {n}"
        );
    }
}

#[test]
fn linear_gradients() {
    let mut rng = seeded_rng(1);
    let mut layer = Linear::new(5, 3, &mut rng);
    let x = rand_mat(4, 5, 2);
    let y = layer.forward(&x);
    let coef = rand_mat(y.nrows(), y.ncols(), 3);
    let gx = layer.backward(&coef);

    let num_gx = fd_input_grad(&x, &coef, |xv| layer.clone().forward(xv));
    assert_close(&gx, &num_gx, "linear input grad");

    let gw = layer.weight.grad.clone().unwrap();
    let num_gw = fd_param_grad(&layer, &x, &coef, (5, 3), |l| &mut l.weight.value, |l, xv| l.forward(xv));
    assert_close(&gw, &num_gw, "linear weight grad");

    let gb = layer.bias.grad.clone().unwrap();
    let num_gb = fd_param_grad(&layer, &x, &coef, (1, 3), |l| &mut l.bias.value, |l, xv| l.forward(xv));
    assert_close(&gb, &num_gb, "linear bias grad");
}

#[test]
fn layer_norm_gradients() {
    let mut layer = LayerNorm::new(6);
    layer.gamma.value = rand_mat(1, 6, 4).mapv(|v| 1.0 + 0.3 * v);
    layer.beta.value = rand_mat(1, 6, 5);
    let x = rand_mat(3, 6, 6);
    let y = layer.forward(&x);
    let coef = rand_mat(y.nrows(), y.ncols(), 7);
    let gx = layer.backward(&coef);

    let num_gx = fd_input_grad(&x, &coef, |xv| layer.clone().forward(xv));
    assert_close(&gx, &num_gx, "layernorm input grad");

    let gg = layer.gamma.grad.clone().unwrap();
    let num_gg = fd_param_grad(&layer, &x, &coef, (1, 6), |l| &mut l.gamma.value, |l, xv| l.forward(xv));
    assert_close(&gg, &num_gg, "layernorm gamma grad");

    let gb = layer.beta.grad.clone().unwrap();
    let num_gb = fd_param_grad(&layer, &x, &coef, (1, 6), |l| &mut l.beta.value, |l, xv| l.forward(xv));
    assert_close(&gb, &num_gb, "layernorm beta grad");
}

#[test]
fn batch_norm_gradients() {
    let mut layer = BatchNorm1d::new(4);
    layer.gamma.value = rand_mat(1, 4, 8).mapv(|v| 1.0 + 0.2 * v);
    layer.beta.value = rand_mat(1, 4, 9);
    let x = rand_mat(7, 4, 10);
    let y = layer.forward(&x, Mode::Train);
    let coef = rand_mat(y.nrows(), y.ncols(), 11);
    let gx = layer.backward(&coef);

    let num_gx = fd_input_grad(&x, &coef, |xv| layer.clone().forward(xv, Mode::Train));
    assert_close(&gx, &num_gx, "batchnorm input grad");

    let gg = layer.gamma.grad.clone().unwrap();
    let num_gg = fd_param_grad(&layer, &x, &coef, (1, 4), |l| &mut l.gamma.value, |l, xv| {
        l.forward(xv, Mode::Train)
    });
    assert_close(&gg, &num_gg, "batchnorm gamma grad");

    let gb = layer.beta.grad.clone().unwrap();
    let num_gb = fd_param_grad(&layer, &x, &coef, (1, 4), |l| &mut l.beta.value, |l, xv| {
        l.forward(xv, Mode::Train)
    });
    assert_close(&gb, &num_gb, "batchnorm beta grad");
}

#[test]
fn batch_norm_eval_uses_running_stats() {
    let mut layer = BatchNorm1d::new(2);
    let x = rand_mat(50, 2, 40);
    for _ in 0..200 {
        layer.forward(&x, Mode::Train);
    }
    let y_eval = layer.forward(&x, Mode::Eval);
    let y_train = layer.forward(&x, Mode::Train);
    // after convergence of running stats the two modes agree closely
    for (a, b) in y_eval.iter().zip(y_train.iter()) {
        assert!((a - b).abs() < 1e-2, "{a} vs {b}");
    }
}

#[test]
fn instance_norm_gradients() {
    let mut layer = InstanceNorm1d::new(3);
    layer.gamma.value = rand_mat(1, 3, 12).mapv(|v| 1.0 + 0.2 * v);
    let x = rand_mat(6, 3, 13);
    let y = layer.forward(&x);
    let coef = rand_mat(y.nrows(), y.ncols(), 14);
    let gx = layer.backward(&coef);
    let num_gx = fd_input_grad(&x, &coef, |xv| layer.clone().forward(xv));
    assert_close(&gx, &num_gx, "instancenorm input grad");
}

#[test]
fn activation_gradients() {
    for act in [Activation::swish(), Activation::gelu(), Activation::relu()] {
        let mut layer = act;
        let x = rand_mat(4, 5, 15).mapv(|v| v * 2.0 + 0.1); // keep away from relu kink
        let y = layer.forward(&x);
        let coef = rand_mat(y.nrows(), y.ncols(), 16);
        let gx = layer.backward(&coef);
        let num_gx = fd_input_grad(&x, &coef, |xv| layer.clone().forward(xv));
        assert_close(&gx, &num_gx, "activation input grad");
    }
}

#[test]
fn glu_gradients() {
    let mut layer = Activation::glu();
    let x = rand_mat(4, 6, 17);
    let y = layer.forward(&x);
    assert_eq!(y.ncols(), 3);
    let coef = rand_mat(y.nrows(), y.ncols(), 18);
    let gx = layer.backward(&coef);
    let num_gx = fd_input_grad(&x, &coef, |xv| layer.clone().forward(xv));
    assert_close(&gx, &num_gx, "glu input grad");
}

#[test]
fn conv1d_gradients() {
    // depthwise same, grouped strided, dense no-pad variants
    let cases = [
        (6, 6, 3, 1, 1usize, 1usize, 6, true),
        (4, 8, 3, 2, 1, 0, 2, true),
        (3, 5, 2, 2, 0, 0, 1, false),
    ];
    for (ci, co, k, stride, pl, pr, groups, bias) in cases {
        let mut rng = seeded_rng(20);
        let mut layer = Conv1d::new(ci, co, k, stride, pl, pr, groups, bias, &mut rng);
        let x = rand_mat(9, ci, 21);
        let y = layer.forward(&x);
        let coef = rand_mat(y.nrows(), y.ncols(), 22);
        let gx = layer.backward(&coef);

        let num_gx = fd_input_grad(&x, &coef, |xv| layer.clone().forward(xv));
        assert_close(&gx, &num_gx, "conv input grad");

        let gw = layer.weight.grad.clone().unwrap();
        let wshape = (layer.weight.value.nrows(), layer.weight.value.ncols());
        let num_gw =
            fd_param_grad(&layer, &x, &coef, wshape, |l| &mut l.weight.value, |l, xv| l.forward(xv));
        assert_close(&gw, &num_gw, "conv weight grad");

        if bias {
            let gb = layer.bias.as_ref().unwrap().grad.clone().unwrap();
            let num_gb = fd_param_grad(
                &layer,
                &x,
                &coef,
                (1, co),
                |l| &mut l.bias.as_mut().unwrap().value,
                |l, xv| l.forward(xv),
            );
            assert_close(&gb, &num_gb, "conv bias grad");
        }
    }
}

#[test]
fn attention_gradients() {
    let mut rng = seeded_rng(23);
    let mut layer = MultiHeadAttention::new(6, 2, &mut rng);
    let x = rand_mat(5, 6, 24);
    let y = layer.forward(&x);
    let coef = rand_mat(y.nrows(), y.ncols(), 25);
    let gx = layer.backward(&coef);

    let num_gx = fd_input_grad(&x, &coef, |xv| layer.clone().forward(xv));
    assert_close(&gx, &num_gx, "attention input grad");

    let gq = layer.q.weight.grad.clone().unwrap();
    let num_gq = fd_param_grad(&layer, &x, &coef, (6, 6), |l| &mut l.q.weight.value, |l, xv| {
        l.forward(xv)
    });
    assert_close(&gq, &num_gq, "attention q weight grad");

    let gk = layer.k.weight.grad.clone().unwrap();
    let num_gk = fd_param_grad(&layer, &x, &coef, (6, 6), |l| &mut l.k.weight.value, |l, xv| {
        l.forward(xv)
    });
    assert_close(&gk, &num_gk, "attention k weight grad");

    let gv = layer.v.weight.grad.clone().unwrap();
    let num_gv = fd_param_grad(&layer, &x, &coef, (6, 6), |l| &mut l.v.weight.value, |l, xv| {
        l.forward(xv)
    });
    assert_close(&gv, &num_gv, "attention v weight grad");

    let go = layer.out.weight.grad.clone().unwrap();
    let num_go = fd_param_grad(&layer, &x, &coef, (6, 6), |l| &mut l.out.weight.value, |l, xv| {
        l.forward(xv)
    });
    assert_close(&go, &num_go, "attention out weight grad");
}

#[test]
fn log_softmax_gradients() {
    let x = rand_mat(4, 7, 26);
    let coef = rand_mat(4, 7, 27);
    let logp = log_softmax(&x);
    let gx = log_softmax_backward(&logp, &coef);
    let num_gx = fd_input_grad(&x, &coef, |xv| log_softmax(xv));
    assert_close(&gx, &num_gx, "log_softmax input grad");

    for row in logp.rows() {
        let s: f64 = row.iter().map(|v| v.exp()).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }
}
