use super::{Mat, Param, TensorKind, Visit, uniform_fan_in};
use rand_chacha::ChaCha8Rng;

/// Grouped 1-D convolution over the frame axis via im2col.
///
/// Input is (T, c_in), output (T_out, c_out). `groups == c_in == c_out`
/// gives the depthwise case. The weight is stored as a single matrix of
/// shape (kernel * c_in/groups, c_out); row `ki * ing + ci` holds tap `ki`
/// of within-group input channel `ci`.
#[derive(Debug, Clone)]
pub struct Conv1d {
    pub weight: Param,
    pub bias: Option<Param>,
    pub kernel: usize,
    pub stride: usize,
    pub pad_left: usize,
    pub pad_right: usize,
    pub groups: usize,
    in_channels: usize,
    out_channels: usize,
    cache: Option<(usize, Vec<Mat>)>, // (padded length, im2col per group)
}

impl Conv1d {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        pad_left: usize,
        pad_right: usize,
        groups: usize,
        bias: bool,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        assert!(in_channels % groups == 0 && out_channels % groups == 0);
        let ing = in_channels / groups;
        let fan_in = kernel * ing;
        Conv1d {
            weight: Param::new(uniform_fan_in(fan_in, out_channels, fan_in, rng)),
            bias: bias.then(|| Param::new(uniform_fan_in(1, out_channels, fan_in, rng))),
            kernel,
            stride,
            pad_left,
            pad_right,
            groups,
            in_channels,
            out_channels,
            cache: None,
        }
    }

    /// Odd-kernel same-length convolution, stride 1.
    pub fn same(channels_in: usize, channels_out: usize, kernel: usize, groups: usize, bias: bool, rng: &mut ChaCha8Rng) -> Self {
        assert!(kernel % 2 == 1, "same-padding requires an odd kernel");
        let pad = (kernel - 1) / 2;
        Conv1d::new(channels_in, channels_out, kernel, 1, pad, pad, groups, bias, rng)
    }

    pub fn output_len(&self, t_in: usize) -> usize {
        let padded = t_in + self.pad_left + self.pad_right;
        if padded < self.kernel {
            0
        } else {
            (padded - self.kernel) / self.stride + 1
        }
    }

    pub fn forward(&mut self, x: &Mat) -> Mat {
        assert_eq!(x.ncols(), self.in_channels);
        let t_in = x.nrows();
        let padded_len = t_in + self.pad_left + self.pad_right;
        let t_out = self.output_len(t_in);
        let ing = self.in_channels / self.groups;
        let outg = self.out_channels / self.groups;

        let mut y = Mat::zeros((t_out, self.out_channels));
        let mut cols = Vec::with_capacity(self.groups);
        for g in 0..self.groups {
            let mut xg = Mat::zeros((t_out, self.kernel * ing));
            for t in 0..t_out {
                for ki in 0..self.kernel {
                    let src = t * self.stride + ki;
                    if src < self.pad_left || src >= self.pad_left + t_in {
                        continue; // zero padding
                    }
                    let src_t = src - self.pad_left;
                    for ci in 0..ing {
                        xg[[t, ki * ing + ci]] = x[[src_t, g * ing + ci]];
                    }
                }
            }
            let wg = self.weight.value.slice(ndarray::s![.., g * outg..(g + 1) * outg]);
            let yg = xg.dot(&wg);
            y.slice_mut(ndarray::s![.., g * outg..(g + 1) * outg])
                .assign(&yg);
            cols.push(xg);
        }
        if let Some(b) = &self.bias {
            y += &b.value;
        }
        self.cache = Some((padded_len, cols));
        y
    }

    pub fn backward(&mut self, gy: &Mat) -> Mat {
        let (padded_len, cols) = self.cache.take().expect("backward before forward");
        let t_in = padded_len - self.pad_left - self.pad_right;
        let t_out = gy.nrows();
        let ing = self.in_channels / self.groups;
        let outg = self.out_channels / self.groups;

        if let Some(b) = &mut self.bias {
            let gb = gy.sum_axis(ndarray::Axis(0)).insert_axis(ndarray::Axis(0));
            b.acc_grad(&gb);
        }

        let mut gw = Mat::zeros(self.weight.value.raw_dim());
        let mut gx = Mat::zeros((t_in, self.in_channels));
        for g in 0..self.groups {
            let gyg = gy.slice(ndarray::s![.., g * outg..(g + 1) * outg]);
            gw.slice_mut(ndarray::s![.., g * outg..(g + 1) * outg])
                .assign(&cols[g].t().dot(&gyg));
            let wg = self.weight.value.slice(ndarray::s![.., g * outg..(g + 1) * outg]);
            let gcols = gyg.dot(&wg.t()); // (t_out, kernel*ing)
            for t in 0..t_out {
                for ki in 0..self.kernel {
                    let src = t * self.stride + ki;
                    if src < self.pad_left || src >= self.pad_left + t_in {
                        continue;
                    }
                    let src_t = src - self.pad_left;
                    for ci in 0..ing {
                        gx[[src_t, g * ing + ci]] += gcols[[t, ki * ing + ci]];
                    }
                }
            }
        }
        self.weight.acc_grad(&gw);
        gx
    }
}

impl Visit for Conv1d {
    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(String, TensorKind, &mut Param)) {
        f(format!("{prefix}.weight"), TensorKind::Param, &mut self.weight);
        if let Some(b) = &mut self.bias {
            f(format!("{prefix}.bias"), TensorKind::Param, b);
        }
    }
}
