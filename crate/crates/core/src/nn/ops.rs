use super::{Mat, Mode, seeded_rng};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Pointwise activations with cached inputs for the backward pass.
#[derive(Debug, Clone)]
pub enum Activation {
    Swish { cache: Option<Mat> },
    Gelu { cache: Option<Mat> },
    Relu { cache: Option<Mat> },
    /// Gated linear unit: splits features in half, a * sigmoid(b).
    Glu { cache: Option<Mat> },
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

// tanh form of GELU; the exact-erf variant differs below 1e-3 and the
// backward here matches this forward.
fn gelu(x: f64) -> f64 {
    const C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
    0.5 * x * (1.0 + (C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    const C: f64 = 0.797_884_560_802_865_4;
    let inner = C * (x + 0.044715 * x * x * x);
    let t = inner.tanh();
    let dinner = C * (1.0 + 3.0 * 0.044715 * x * x);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner
}

impl Activation {
    pub fn swish() -> Self {
        Activation::Swish { cache: None }
    }
    pub fn gelu() -> Self {
        Activation::Gelu { cache: None }
    }
    pub fn relu() -> Self {
        Activation::Relu { cache: None }
    }
    pub fn glu() -> Self {
        Activation::Glu { cache: None }
    }

    pub fn forward(&mut self, x: &Mat) -> Mat {
        match self {
            Activation::Swish { cache } => {
                *cache = Some(x.clone());
                x.mapv(|v| v * sigmoid(v))
            }
            Activation::Gelu { cache } => {
                *cache = Some(x.clone());
                x.mapv(gelu)
            }
            Activation::Relu { cache } => {
                *cache = Some(x.clone());
                x.mapv(|v| v.max(0.0))
            }
            Activation::Glu { cache } => {
                *cache = Some(x.clone());
                let d = x.ncols() / 2;
                let a = x.slice(ndarray::s![.., ..d]);
                let b = x.slice(ndarray::s![.., d..]);
                let mut y = a.to_owned();
                y.zip_mut_with(&b, |av, bv| *av *= sigmoid(*bv));
                y
            }
        }
    }

    pub fn backward(&mut self, gy: &Mat) -> Mat {
        match self {
            Activation::Swish { cache } => {
                let x = cache.as_ref().expect("backward before forward");
                let mut gx = x.mapv(|v| {
                    let s = sigmoid(v);
                    s + v * s * (1.0 - s)
                });
                gx *= gy;
                gx
            }
            Activation::Gelu { cache } => {
                let x = cache.as_ref().expect("backward before forward");
                let mut gx = x.mapv(gelu_grad);
                gx *= gy;
                gx
            }
            Activation::Relu { cache } => {
                let x = cache.as_ref().expect("backward before forward");
                let mut gx = x.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
                gx *= gy;
                gx
            }
            Activation::Glu { cache } => {
                let x = cache.as_ref().expect("backward before forward");
                let d = x.ncols() / 2;
                let a = x.slice(ndarray::s![.., ..d]);
                let b = x.slice(ndarray::s![.., d..]);
                let mut gx = Mat::zeros(x.raw_dim());
                for t in 0..x.nrows() {
                    for c in 0..d {
                        let s = sigmoid(b[[t, c]]);
                        let g = gy[[t, c]];
                        gx[[t, c]] = g * s;
                        gx[[t, d + c]] = g * a[[t, c]] * s * (1.0 - s);
                    }
                }
                gx
            }
        }
    }
}

/// Inverted dropout with a per-layer deterministic RNG stream.
#[derive(Debug, Clone)]
pub struct Dropout {
    pub rate: f64,
    rng: ChaCha8Rng,
    mask: Option<Mat>,
}

impl Dropout {
    pub fn new(rate: f64, seed: u64) -> Self {
        Dropout {
            rate,
            rng: seeded_rng(seed),
            mask: None,
        }
    }

    pub fn forward(&mut self, x: &Mat, mode: Mode) -> Mat {
        if mode == Mode::Eval || self.rate <= 0.0 {
            self.mask = None;
            return x.clone();
        }
        let keep = 1.0 - self.rate;
        let mask = Mat::from_shape_fn(x.raw_dim(), |_| {
            if self.rng.random_range(0.0..1.0) < keep {
                1.0 / keep
            } else {
                0.0
            }
        });
        let y = x * &mask;
        self.mask = Some(mask);
        y
    }

    pub fn backward(&mut self, gy: &Mat) -> Mat {
        match &self.mask {
            Some(mask) => gy * mask,
            None => gy.clone(),
        }
    }
}

/// Row-wise softmax.
pub fn softmax_rows(x: &Mat) -> Mat {
    let mut y = x.clone();
    for mut row in y.rows_mut() {
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    y
}

/// Row-wise log-softmax: x - logsumexp(x).
pub fn log_softmax(x: &Mat) -> Mat {
    let mut y = x.clone();
    for mut row in y.rows_mut() {
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        row.mapv_inplace(|v| v - lse);
    }
    y
}

/// Backward through log-softmax given its output `logp` and upstream grad.
pub fn log_softmax_backward(logp: &Mat, gy: &Mat) -> Mat {
    let mut gx = gy.clone();
    for t in 0..gx.nrows() {
        let gsum: f64 = gy.row(t).sum();
        for c in 0..gx.ncols() {
            gx[[t, c]] -= logp[[t, c]].exp() * gsum;
        }
    }
    gx
}
