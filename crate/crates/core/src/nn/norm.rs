use super::{Mat, Mode, Param, TensorKind, Visit};
use ndarray::Axis;

/// Per-frame layer normalization over the feature axis.
#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gamma: Param,
    pub beta: Param,
    pub eps: f64,
    cache: Option<(Mat, Vec<f64>)>, // (x_hat, inv_std per row)
}

impl LayerNorm {
    pub fn new(dim: usize) -> Self {
        LayerNorm {
            gamma: Param::new(Mat::ones((1, dim))),
            beta: Param::zeros(1, dim),
            eps: 1e-5,
            cache: None,
        }
    }

    pub fn forward(&mut self, x: &Mat) -> Mat {
        let d = x.ncols() as f64;
        let mut x_hat = x.clone();
        let mut inv_stds = Vec::with_capacity(x.nrows());
        for mut row in x_hat.rows_mut() {
            let mean = row.sum() / d;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
            let inv_std = 1.0 / (var + self.eps).sqrt();
            row.mapv_inplace(|v| (v - mean) * inv_std);
            inv_stds.push(inv_std);
        }
        let y = &x_hat * &self.gamma.value + &self.beta.value;
        self.cache = Some((x_hat, inv_stds));
        y
    }

    pub fn backward(&mut self, gy: &Mat) -> Mat {
        let (x_hat, inv_stds) = self.cache.as_ref().expect("backward before forward");
        let d = gy.ncols() as f64;
        self.gamma
            .acc_grad(&(gy * x_hat).sum_axis(Axis(0)).insert_axis(Axis(0)));
        self.beta
            .acc_grad(&gy.sum_axis(Axis(0)).insert_axis(Axis(0)));

        let g_hat = gy * &self.gamma.value;
        let mut gx = Mat::zeros(gy.raw_dim());
        for t in 0..gy.nrows() {
            let gh = g_hat.row(t);
            let xh = x_hat.row(t);
            let sum_g: f64 = gh.sum();
            let sum_gx: f64 = gh.iter().zip(xh.iter()).map(|(a, b)| a * b).sum();
            let inv_std = inv_stds[t];
            for c in 0..gy.ncols() {
                gx[[t, c]] = inv_std * (gh[c] - sum_g / d - xh[c] * sum_gx / d);
            }
        }
        gx
    }
}

impl Visit for LayerNorm {
    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(String, TensorKind, &mut Param)) {
        f(format!("{prefix}.gamma"), TensorKind::Param, &mut self.gamma);
        f(format!("{prefix}.beta"), TensorKind::Param, &mut self.beta);
    }
}

/// Batch normalization over the frame axis (one statistic per channel),
/// as used inside the convolution module. Running statistics feed Eval mode.
#[derive(Debug, Clone)]
pub struct BatchNorm1d {
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Param,
    pub running_var: Param,
    pub eps: f64,
    pub momentum: f64,
    cache: Option<(Mat, Vec<f64>)>, // (x_hat, inv_std per channel)
}

impl BatchNorm1d {
    pub fn new(dim: usize) -> Self {
        BatchNorm1d {
            gamma: Param::new(Mat::ones((1, dim))),
            beta: Param::zeros(1, dim),
            running_mean: Param::zeros(1, dim),
            running_var: Param::new(Mat::ones((1, dim))),
            eps: 1e-5,
            momentum: 0.1,
            cache: None,
        }
    }

    pub fn forward(&mut self, x: &Mat, mode: Mode) -> Mat {
        let n = x.nrows() as f64;
        match mode {
            Mode::Train => {
                let mut x_hat = x.clone();
                let mut inv_stds = Vec::with_capacity(x.ncols());
                for c in 0..x.ncols() {
                    let col = x.column(c);
                    let mean = col.sum() / n;
                    let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                    let inv_std = 1.0 / (var + self.eps).sqrt();
                    for t in 0..x.nrows() {
                        x_hat[[t, c]] = (x[[t, c]] - mean) * inv_std;
                    }
                    inv_stds.push(inv_std);
                    let m = self.momentum;
                    self.running_mean.value[[0, c]] =
                        (1.0 - m) * self.running_mean.value[[0, c]] + m * mean;
                    self.running_var.value[[0, c]] =
                        (1.0 - m) * self.running_var.value[[0, c]] + m * var;
                }
                let y = &x_hat * &self.gamma.value + &self.beta.value;
                self.cache = Some((x_hat, inv_stds));
                y
            }
            Mode::Eval => {
                let mut y = x.clone();
                for c in 0..x.ncols() {
                    let mean = self.running_mean.value[[0, c]];
                    let inv_std = 1.0 / (self.running_var.value[[0, c]] + self.eps).sqrt();
                    let g = self.gamma.value[[0, c]];
                    let b = self.beta.value[[0, c]];
                    for t in 0..x.nrows() {
                        y[[t, c]] = (x[[t, c]] - mean) * inv_std * g + b;
                    }
                }
                self.cache = None;
                y
            }
        }
    }

    pub fn backward(&mut self, gy: &Mat) -> Mat {
        let (x_hat, inv_stds) = self
            .cache
            .as_ref()
            .expect("backward requires a Train-mode forward");
        let n = gy.nrows() as f64;
        self.gamma
            .acc_grad(&(gy * x_hat).sum_axis(Axis(0)).insert_axis(Axis(0)));
        self.beta
            .acc_grad(&gy.sum_axis(Axis(0)).insert_axis(Axis(0)));

        let mut gx = Mat::zeros(gy.raw_dim());
        for c in 0..gy.ncols() {
            let g = self.gamma.value[[0, c]];
            let inv_std = inv_stds[c];
            let sum_g: f64 = gy.column(c).sum();
            let sum_gx: f64 = gy
                .column(c)
                .iter()
                .zip(x_hat.column(c).iter())
                .map(|(a, b)| a * b)
                .sum();
            for t in 0..gy.nrows() {
                let gh = gy[[t, c]] * g;
                gx[[t, c]] =
                    inv_std * (gh - g * sum_g / n - x_hat[[t, c]] * g * sum_gx / n);
            }
        }
        gx
    }
}

impl Visit for BatchNorm1d {
    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(String, TensorKind, &mut Param)) {
        f(format!("{prefix}.gamma"), TensorKind::Param, &mut self.gamma);
        f(format!("{prefix}.beta"), TensorKind::Param, &mut self.beta);
        f(
            format!("{prefix}.running_mean"),
            TensorKind::Buffer,
            &mut self.running_mean,
        );
        f(
            format!("{prefix}.running_var"),
            TensorKind::Buffer,
            &mut self.running_var,
        );
    }
}

/// Per-channel normalization over the time axis with no running state,
/// used by the SSL feature extractor's first convolution.
#[derive(Debug, Clone)]
pub struct InstanceNorm1d {
    pub gamma: Param,
    pub beta: Param,
    pub eps: f64,
    cache: Option<(Mat, Vec<f64>)>,
}

impl InstanceNorm1d {
    pub fn new(dim: usize) -> Self {
        InstanceNorm1d {
            gamma: Param::new(Mat::ones((1, dim))),
            beta: Param::zeros(1, dim),
            eps: 1e-5,
            cache: None,
        }
    }

    pub fn forward(&mut self, x: &Mat) -> Mat {
        let n = x.nrows() as f64;
        let mut x_hat = x.clone();
        let mut inv_stds = Vec::with_capacity(x.ncols());
        for c in 0..x.ncols() {
            let col = x.column(c);
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let inv_std = 1.0 / (var + self.eps).sqrt();
            for t in 0..x.nrows() {
                x_hat[[t, c]] = (x[[t, c]] - mean) * inv_std;
            }
            inv_stds.push(inv_std);
        }
        let y = &x_hat * &self.gamma.value + &self.beta.value;
        self.cache = Some((x_hat, inv_stds));
        y
    }

    pub fn backward(&mut self, gy: &Mat) -> Mat {
        let (x_hat, inv_stds) = self.cache.as_ref().expect("backward before forward");
        let n = gy.nrows() as f64;
        self.gamma
            .acc_grad(&(gy * x_hat).sum_axis(Axis(0)).insert_axis(Axis(0)));
        self.beta
            .acc_grad(&gy.sum_axis(Axis(0)).insert_axis(Axis(0)));
        let mut gx = Mat::zeros(gy.raw_dim());
        for c in 0..gy.ncols() {
            let g = self.gamma.value[[0, c]];
            let inv_std = inv_stds[c];
            let sum_g: f64 = gy.column(c).sum();
            let sum_gx: f64 = gy
                .column(c)
                .iter()
                .zip(x_hat.column(c).iter())
                .map(|(a, b)| a * b)
                .sum();
            for t in 0..gy.nrows() {
                gx[[t, c]] = g * inv_std * (gy[[t, c]] - sum_g / n - x_hat[[t, c]] * sum_gx / n);
            }
        }
        gx
    }
}

impl Visit for InstanceNorm1d {
    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(String, TensorKind, &mut Param)) {
        f(format!("{prefix}.gamma"), TensorKind::Param, &mut self.gamma);
        f(format!("{prefix}.beta"), TensorKind::Param, &mut self.beta);
    }
}
