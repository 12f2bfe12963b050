use super::{Mat, Param, TensorKind, Visit, linear::Linear, ops::softmax_rows};
use ndarray::s;
use rand_chacha::ChaCha8Rng;

/// Multi-head self-attention without positional encoding
/// (full bidirectional context, no masking).
#[derive(Debug, Clone)]
pub struct MultiHeadAttention {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub out: Linear,
    pub heads: usize,
    head_dim: usize,
    cache: Option<AttnCache>,
}

#[derive(Debug, Clone)]
struct AttnCache {
    q: Mat,
    k: Mat,
    v: Mat,
    attn: Vec<Mat>, // per-head softmax weights (T x T)
}

impl MultiHeadAttention {
    pub fn new(dim: usize, heads: usize, rng: &mut ChaCha8Rng) -> Self {
        assert!(dim % heads == 0, "model dim must divide into heads");
        MultiHeadAttention {
            q: Linear::new(dim, dim, rng),
            k: Linear::new(dim, dim, rng),
            v: Linear::new(dim, dim, rng),
            out: Linear::new(dim, dim, rng),
            heads,
            head_dim: dim / heads,
            cache: None,
        }
    }

    pub fn forward(&mut self, x: &Mat) -> Mat {
        let q = self.q.forward(x);
        let k = self.k.forward(x);
        let v = self.v.forward(x);
        let scale = 1.0 / (self.head_dim as f64).sqrt();

        let t = x.nrows();
        let mut concat = Mat::zeros((t, self.heads * self.head_dim));
        let mut attn_per_head = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let cols = s![.., h * self.head_dim..(h + 1) * self.head_dim];
            let qh = q.slice(cols);
            let kh = k.slice(cols);
            let vh = v.slice(cols);
            let scores = qh.dot(&kh.t()) * scale;
            let attn = softmax_rows(&scores);
            let oh = attn.dot(&vh);
            concat.slice_mut(cols).assign(&oh);
            attn_per_head.push(attn);
        }
        let y = self.out.forward(&concat);
        self.cache = Some(AttnCache {
            q,
            k,
            v,
            attn: attn_per_head,
        });
        y
    }

    pub fn backward(&mut self, gy: &Mat) -> Mat {
        let g_concat = self.out.backward(gy);
        let cache = self.cache.take().expect("backward before forward");
        let scale = 1.0 / (self.head_dim as f64).sqrt();

        let mut gq = Mat::zeros(cache.q.raw_dim());
        let mut gk = Mat::zeros(cache.k.raw_dim());
        let mut gv = Mat::zeros(cache.v.raw_dim());
        for h in 0..self.heads {
            let cols = s![.., h * self.head_dim..(h + 1) * self.head_dim];
            let qh = cache.q.slice(cols);
            let kh = cache.k.slice(cols);
            let vh = cache.v.slice(cols);
            let attn = &cache.attn[h];
            let go = g_concat.slice(cols);

            let g_attn = go.dot(&vh.t());
            gv.slice_mut(cols).assign(&attn.t().dot(&go));

            // softmax backward per row: a .* (g - sum(g .* a))
            let mut g_scores = g_attn.to_owned();
            for r in 0..g_scores.nrows() {
                let dot: f64 = g_scores
                    .row(r)
                    .iter()
                    .zip(attn.row(r).iter())
                    .map(|(a, b)| a * b)
                    .sum();
                for c in 0..g_scores.ncols() {
                    g_scores[[r, c]] = attn[[r, c]] * (g_scores[[r, c]] - dot);
                }
            }
            g_scores *= scale;
            gq.slice_mut(cols).assign(&g_scores.dot(&kh));
            gk.slice_mut(cols).assign(&g_scores.t().dot(&qh));
        }

        let gx_q = self.q.backward(&gq);
        let gx_k = self.k.backward(&gk);
        let gx_v = self.v.backward(&gv);
        gx_q + gx_k + gx_v
    }
}

impl Visit for MultiHeadAttention {
    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(String, TensorKind, &mut Param)) {
        self.q.visit(&format!("{prefix}.q"), f);
        self.k.visit(&format!("{prefix}.k"), f);
        self.v.visit(&format!("{prefix}.v"), f);
        self.out.visit(&format!("{prefix}.out"), f);
    }
}
