//! Differentiable building blocks over token matrices.
//!
//! Activations are `T × c` matrices holding one token per row; a batch of
//! sequences is stored back to back and described by [`Seqs`]. Every
//! operation returns its output plus a cache, and its `backward` consumes
//! the cache, accumulates parameter gradients into a flat gradient vector
//! and returns the gradient with respect to the input.

use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;

use super::params::{Init, ParamLayout, ParamRef};

/// Sequence boundaries inside a stacked token matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Seqs {
    pub starts: Vec<usize>,
    pub lens: Vec<usize>,
}

impl Seqs {
    pub fn uniform(count: usize, len: usize) -> Self {
        Seqs {
            starts: (0..count).map(|s| s * len).collect(),
            lens: vec![len; count],
        }
    }

    pub fn from_lens(lens: Vec<usize>) -> Self {
        let mut starts = Vec::with_capacity(lens.len());
        let mut acc = 0;
        for &l in &lens {
            starts.push(acc);
            acc += l;
        }
        Seqs { starts, lens }
    }

    pub fn count(&self) -> usize {
        self.lens.len()
    }

    pub fn total(&self) -> usize {
        self.lens.iter().sum()
    }

    pub fn range(&self, s: usize) -> std::ops::Range<usize> {
        self.starts[s]..self.starts[s] + self.lens[s]
    }
}

// ---------------------------------------------------------------- linear

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Linear {
    pub weight: ParamRef,
    pub bias: ParamRef,
}

pub struct LinearCache {
    input: Array2<f64>,
}

impl Linear {
    pub fn new(layout: &mut ParamLayout, name: &str, fan_in: usize, fan_out: usize, decay: bool) -> Self {
        Linear {
            weight: layout.add_with_decay(
                format!("{name}.weight"),
                fan_in,
                fan_out,
                Init::FanInUniform(fan_in),
                decay,
            ),
            bias: layout.add(format!("{name}.bias"), 1, fan_out, Init::Zeros),
        }
    }

    pub fn forward(&self, p: &[f64], x: Array2<f64>) -> (Array2<f64>, LinearCache) {
        let mut y = x.dot(&self.weight.mat(p));
        y += &self.bias.vec(p);
        (y, LinearCache { input: x })
    }

    pub fn backward(&self, p: &[f64], g: &mut [f64], cache: LinearCache, dy: &Array2<f64>) -> Array2<f64> {
        let dw = cache.input.t().dot(dy);
        self.weight.mat_mut(g).scaled_add(1.0, &dw);
        self.bias.vec_mut(g).scaled_add(1.0, &dy.sum_axis(Axis(0)));
        dy.dot(&self.weight.mat(p).t())
    }
}

// ------------------------------------------------------------ layer norm

pub const LN_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerNorm {
    pub scale: ParamRef,
    pub shift: ParamRef,
}

pub struct LayerNormCache {
    normed: Array2<f64>,
    rstd: Array1<f64>,
}

impl LayerNorm {
    pub fn new(layout: &mut ParamLayout, name: &str, width: usize) -> Self {
        LayerNorm {
            scale: layout.add(format!("{name}.scale"), 1, width, Init::Ones),
            shift: layout.add(format!("{name}.shift"), 1, width, Init::Zeros),
        }
    }

    pub fn forward(&self, p: &[f64], x: &Array2<f64>) -> (Array2<f64>, LayerNormCache) {
        let (t, c) = x.dim();
        let mut normed = Array2::zeros((t, c));
        let mut rstd = Array1::zeros(t);
        for ((xr, mut nr), r) in x.rows().into_iter().zip(normed.rows_mut()).zip(rstd.iter_mut()) {
            let mean = xr.sum() / c as f64;
            let var = xr.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
            let inv = 1.0 / (var + LN_EPS).sqrt();
            *r = inv;
            Zip::from(&mut nr).and(&xr).for_each(|n, &v| *n = (v - mean) * inv);
        }
        let y = &normed * &self.scale.vec(p) + &self.shift.vec(p);
        (y, LayerNormCache { normed, rstd })
    }

    pub fn backward(&self, p: &[f64], g: &mut [f64], cache: LayerNormCache, dy: &Array2<f64>) -> Array2<f64> {
        let c = dy.ncols() as f64;
        self.scale
            .vec_mut(g)
            .scaled_add(1.0, &(dy * &cache.normed).sum_axis(Axis(0)));
        self.shift.vec_mut(g).scaled_add(1.0, &dy.sum_axis(Axis(0)));
        let dn = dy * &self.scale.vec(p);
        let mut dx = Array2::zeros(dy.dim());
        for (((dnr, nr), mut dxr), &r) in dn
            .rows()
            .into_iter()
            .zip(cache.normed.rows())
            .zip(dx.rows_mut())
            .zip(cache.rstd.iter())
        {
            let sum_dn = dnr.sum();
            let sum_dn_n = dnr.dot(&nr);
            Zip::from(&mut dxr)
                .and(&dnr)
                .and(&nr)
                .for_each(|o, &a, &b| *o = r / c * (c * a - sum_dn - b * sum_dn_n));
        }
        dx
    }
}

// ------------------------------------------------------------------ gelu

const INV_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[inline]
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x * INV_SQRT2))
}

#[inline]
pub fn gelu_grad(x: f64) -> f64 {
    gelu_grad_from_cdf(x, normal_cdf(x))
}

/// `Φ(x)`, shared by the forward value `x·Φ(x)` and the derivative.
#[inline]
fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x * INV_SQRT2))
}

#[inline]
fn gelu_grad_from_cdf(x: f64, cdf: f64) -> f64 {
    cdf + x * INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// GELU of every entry, with `(x, Φ(x))` kept for the backward pass.
fn gelu_forward(pre: Array2<f64>) -> (Array2<f64>, GeluCache) {
    let cdf = pre.mapv(normal_cdf);
    let act = &pre * &cdf;
    (act, GeluCache { pre, cdf })
}

#[derive(Debug, Clone)]
struct GeluCache {
    pre: Array2<f64>,
    cdf: Array2<f64>,
}

impl GeluCache {
    fn backward(&self, d: &mut Array2<f64>) {
        Zip::from(d)
            .and(&self.pre)
            .and(&self.cdf)
            .for_each(|d, &u, &c| *d *= gelu_grad_from_cdf(u, c));
    }
}

// --------------------------------------------------------------- dropout

/// Inverted dropout scale factors (`0` or `1/(1-p)`), or `None` when off.
pub fn dropout_mask<R: Rng + ?Sized>(dim: (usize, usize), p: f64, rng: Option<&mut R>) -> Option<Array2<f64>> {
    let rng = rng?;
    if p <= 0.0 {
        return None;
    }
    let keep = 1.0 / (1.0 - p);
    Some(Array2::from_shape_fn(dim, |_| if rng.gen::<f64>() < p { 0.0 } else { keep }))
}

// ----------------------------------------------------------- channel MLP

/// Position-wise two-layer perceptron over the channel axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelMlp {
    pub fc1: Linear,
    pub fc2: Linear,
}

pub struct ChannelMlpCache {
    fc1: LinearCache,
    gelu: GeluCache,
    drop1: Option<Array2<f64>>,
    fc2: LinearCache,
    drop2: Option<Array2<f64>>,
}

impl ChannelMlp {
    pub fn new(layout: &mut ParamLayout, name: &str, width: usize, hidden: usize) -> Self {
        ChannelMlp {
            fc1: Linear::new(layout, &format!("{name}.fc1"), width, hidden, false),
            fc2: Linear::new(layout, &format!("{name}.fc2"), hidden, width, false),
        }
    }

    pub fn forward<R: Rng + ?Sized>(
        &self,
        p: &[f64],
        x: Array2<f64>,
        dropout: f64,
        mut rng: Option<&mut R>,
    ) -> (Array2<f64>, ChannelMlpCache) {
        let (pre, fc1) = self.fc1.forward(p, x);
        let (mut h, gelu) = gelu_forward(pre);
        let drop1 = dropout_mask(h.dim(), dropout, rng.as_deref_mut());
        if let Some(m) = &drop1 {
            h *= m;
        }
        let (mut y, fc2) = self.fc2.forward(p, h);
        let drop2 = dropout_mask(y.dim(), dropout, rng.as_deref_mut());
        if let Some(m) = &drop2 {
            y *= m;
        }
        (y, ChannelMlpCache { fc1, gelu, drop1, fc2, drop2 })
    }

    pub fn backward(&self, p: &[f64], g: &mut [f64], cache: ChannelMlpCache, dy: &Array2<f64>) -> Array2<f64> {
        let mut dy = dy.clone();
        if let Some(m) = &cache.drop2 {
            dy *= m;
        }
        let mut dh = self.fc2.backward(p, g, cache.fc2, &dy);
        if let Some(m) = &cache.drop1 {
            dh *= m;
        }
        cache.gelu.backward(&mut dh);
        self.fc1.backward(p, g, cache.fc1, &dh)
    }
}

// -------------------------------------------------------- self-attention

/// Multi-head self-attention within each sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Attention {
    pub qkv: Linear,
    pub proj: Linear,
    pub heads: usize,
}

pub struct AttentionCache {
    qkv_cache: LinearCache,
    qkv: Array2<f64>,
    /// Attention weights per sequence and head.
    probs: Vec<Vec<Array2<f64>>>,
    proj_cache: LinearCache,
}

impl Attention {
    pub fn new(layout: &mut ParamLayout, name: &str, width: usize, heads: usize) -> Self {
        Attention {
            qkv: Linear::new(layout, &format!("{name}.qkv"), width, 3 * width, false),
            proj: Linear::new(layout, &format!("{name}.proj"), width, width, false),
            heads,
        }
    }

    pub fn forward(&self, p: &[f64], x: Array2<f64>, seqs: &Seqs) -> (Array2<f64>, AttentionCache) {
        let c = x.ncols();
        let dh = c / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let (qkv, qkv_cache) = self.qkv.forward(p, x);
        let mut out = Array2::zeros((qkv.nrows(), c));
        let mut probs = Vec::with_capacity(seqs.count());
        for s in 0..seqs.count() {
            let r = seqs.range(s);
            let mut per_head = Vec::with_capacity(self.heads);
            for h in 0..self.heads {
                let q = qkv.slice(s![r.clone(), h * dh..(h + 1) * dh]);
                let k = qkv.slice(s![r.clone(), c + h * dh..c + (h + 1) * dh]);
                let v = qkv.slice(s![r.clone(), 2 * c + h * dh..2 * c + (h + 1) * dh]);
                let mut a = q.dot(&k.t());
                a *= scale;
                softmax_rows(&mut a);
                out.slice_mut(s![r.clone(), h * dh..(h + 1) * dh]).assign(&a.dot(&v));
                per_head.push(a);
            }
            probs.push(per_head);
        }
        let (y, proj_cache) = self.proj.forward(p, out);
        (y, AttentionCache { qkv_cache, qkv, probs, proj_cache })
    }

    pub fn backward(
        &self,
        p: &[f64],
        g: &mut [f64],
        cache: AttentionCache,
        dy: &Array2<f64>,
        seqs: &Seqs,
    ) -> Array2<f64> {
        let c = dy.ncols();
        let dh = c / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let d_out = self.proj.backward(p, g, cache.proj_cache, dy);
        let qkv = &cache.qkv;
        let mut d_qkv = Array2::zeros(qkv.dim());
        for s in 0..seqs.count() {
            let r = seqs.range(s);
            for h in 0..self.heads {
                let a = &cache.probs[s][h];
                let q = qkv.slice(s![r.clone(), h * dh..(h + 1) * dh]);
                let k = qkv.slice(s![r.clone(), c + h * dh..c + (h + 1) * dh]);
                let v = qkv.slice(s![r.clone(), 2 * c + h * dh..2 * c + (h + 1) * dh]);
                let d_o = d_out.slice(s![r.clone(), h * dh..(h + 1) * dh]);
                let d_a = d_o.dot(&v.t());
                let d_v = a.t().dot(&d_o);
                let mut d_s = Array2::zeros(a.dim());
                for ((mut ds, ar), dar) in d_s.rows_mut().into_iter().zip(a.rows()).zip(d_a.rows()) {
                    let inner = ar.dot(&dar);
                    Zip::from(&mut ds).and(&ar).and(&dar).for_each(|o, &pa, &pd| *o = pa * (pd - inner));
                }
                d_s *= scale;
                let d_q = d_s.dot(&k);
                let d_k = d_s.t().dot(&q);
                d_qkv.slice_mut(s![r.clone(), h * dh..(h + 1) * dh]).assign(&d_q);
                d_qkv.slice_mut(s![r.clone(), c + h * dh..c + (h + 1) * dh]).assign(&d_k);
                d_qkv
                    .slice_mut(s![r.clone(), 2 * c + h * dh..2 * c + (h + 1) * dh])
                    .assign(&d_v);
            }
        }
        self.qkv.backward(p, g, cache.qkv_cache, &d_qkv)
    }
}

fn softmax_rows(a: &mut Array2<f64>) {
    for mut row in a.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
}

// ------------------------------------------------------ token-mixing MLP

/// Two-layer perceptron applied along the token axis, independently per
/// channel. All sequences must have exactly `tokens` entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TokenMlp {
    /// `hidden × tokens`
    pub w1: ParamRef,
    pub b1: ParamRef,
    /// `tokens × hidden`
    pub w2: ParamRef,
    pub b2: ParamRef,
    pub tokens: usize,
}

pub struct TokenMlpCache {
    xt: Array2<f64>,
    gelu: GeluCache,
    act: Array2<f64>,
    count: usize,
}

impl TokenMlp {
    pub fn new(layout: &mut ParamLayout, name: &str, tokens: usize, hidden: usize, decay: bool) -> Self {
        TokenMlp {
            w1: layout.add_with_decay(format!("{name}.w1"), hidden, tokens, Init::FanInUniform(tokens), decay),
            b1: layout.add(format!("{name}.b1"), hidden, 1, Init::Zeros),
            w2: layout.add_with_decay(format!("{name}.w2"), tokens, hidden, Init::FanInUniform(hidden), decay),
            b2: layout.add(format!("{name}.b2"), tokens, 1, Init::Zeros),
            tokens,
        }
    }

    /// `(count·L) × c` → `L × (count·c)`: each column is one channel of one sequence.
    fn to_token_major(&self, x: &Array2<f64>, count: usize) -> Array2<f64> {
        let l = self.tokens;
        let c = x.ncols();
        let mut out = Array2::zeros((l, count * c));
        for s in 0..count {
            out.slice_mut(s![.., s * c..(s + 1) * c])
                .assign(&x.slice(s![s * l..(s + 1) * l, ..]));
        }
        out
    }

    fn from_token_major(&self, xt: &Array2<f64>, count: usize, c: usize) -> Array2<f64> {
        let l = self.tokens;
        let mut out = Array2::zeros((count * l, c));
        for s in 0..count {
            out.slice_mut(s![s * l..(s + 1) * l, ..])
                .assign(&xt.slice(s![.., s * c..(s + 1) * c]));
        }
        out
    }

    pub fn check(&self, seqs: &Seqs) -> bool {
        seqs.lens.iter().all(|&l| l == self.tokens)
    }

    pub fn forward(&self, p: &[f64], x: &Array2<f64>, seqs: &Seqs) -> (Array2<f64>, TokenMlpCache) {
        assert!(self.check(seqs), "token-mixing MLP needs sequences of length {}", self.tokens);
        let count = seqs.count();
        let c = x.ncols();
        let xt = self.to_token_major(x, count);
        let mut pre = self.w1.mat(p).dot(&xt);
        pre += &self.b1.mat(p);
        let (act, gelu) = gelu_forward(pre);
        let mut yt = self.w2.mat(p).dot(&act);
        yt += &self.b2.mat(p);
        let y = self.from_token_major(&yt, count, c);
        (y, TokenMlpCache { xt, gelu, act, count })
    }

    pub fn backward(&self, p: &[f64], g: &mut [f64], cache: TokenMlpCache, dy: &Array2<f64>) -> Array2<f64> {
        let c = dy.ncols();
        let dyt = self.to_token_major(dy, cache.count);
        self.w2.mat_mut(g).scaled_add(1.0, &dyt.dot(&cache.act.t()));
        add_row_sums(self.b2, g, &dyt.view());
        let mut d_act = self.w2.mat(p).t().dot(&dyt);
        cache.gelu.backward(&mut d_act);
        self.w1.mat_mut(g).scaled_add(1.0, &d_act.dot(&cache.xt.t()));
        add_row_sums(self.b1, g, &d_act.view());
        let dxt = self.w1.mat(p).t().dot(&d_act);
        self.from_token_major(&dxt, cache.count, c)
    }
}

fn add_row_sums(bias: ParamRef, g: &mut [f64], m: &ArrayView2<f64>) {
    let sums = m.sum_axis(Axis(1));
    bias.vec_mut(g).scaled_add(1.0, &sums);
}
