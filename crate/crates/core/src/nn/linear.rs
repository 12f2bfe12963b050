use super::{Mat, Param, TensorKind, Visit, uniform_fan_in};
use rand_chacha::ChaCha8Rng;

/// Affine map y = x W + b with W of shape (in, out).
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: Param,
    pub bias: Param,
    cache_x: Option<Mat>,
}

impl Linear {
    pub fn new(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        Linear {
            weight: Param::new(uniform_fan_in(in_dim, out_dim, in_dim, rng)),
            bias: Param::new(uniform_fan_in(1, out_dim, in_dim, rng)),
            cache_x: None,
        }
    }

    pub fn forward(&mut self, x: &Mat) -> Mat {
        let y = x.dot(&self.weight.value) + &self.bias.value;
        self.cache_x = Some(x.clone());
        y
    }

    /// Forward without caching, for inference-only paths.
    pub fn forward_nocache(&self, x: &Mat) -> Mat {
        x.dot(&self.weight.value) + &self.bias.value
    }

    pub fn backward(&mut self, gy: &Mat) -> Mat {
        let x = self.cache_x.as_ref().expect("backward before forward");
        self.weight.acc_grad(&x.t().dot(gy));
        let gb = gy.sum_axis(ndarray::Axis(0)).insert_axis(ndarray::Axis(0));
        self.bias.acc_grad(&gb);
        gy.dot(&self.weight.value.t())
    }
}

impl Visit for Linear {
    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(String, TensorKind, &mut Param)) {
        f(format!("{prefix}.weight"), TensorKind::Param, &mut self.weight);
        f(format!("{prefix}.bias"), TensorKind::Param, &mut self.bias);
    }
}
