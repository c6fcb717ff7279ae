use ndarray::Array2;
use rand::Rng;

use super::config::{BlockKind, ResidualForm};
use super::ops::{
    Attention, AttentionCache, ChannelMlp, ChannelMlpCache, LayerNorm, LayerNormCache, Seqs,
    TokenMlp, TokenMlpCache,
};
use super::params::ParamLayout;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TokenMixing {
    Attention(Attention),
    Mlp(TokenMlp),
}

enum MixingCache {
    Attention(AttentionCache),
    Mlp(TokenMlpCache),
}

impl TokenMixing {
    fn forward(&self, p: &[f64], x: Array2<f64>, seqs: &Seqs) -> (Array2<f64>, MixingCache) {
        match self {
            TokenMixing::Attention(a) => {
                let (y, c) = a.forward(p, x, seqs);
                (y, MixingCache::Attention(c))
            }
            TokenMixing::Mlp(m) => {
                let (y, c) = m.forward(p, &x, seqs);
                (y, MixingCache::Mlp(c))
            }
        }
    }

    fn backward(&self, p: &[f64], g: &mut [f64], cache: MixingCache, dy: &Array2<f64>, seqs: &Seqs) -> Array2<f64> {
        match (self, cache) {
            (TokenMixing::Attention(a), MixingCache::Attention(c)) => a.backward(p, g, c, dy, seqs),
            (TokenMixing::Mlp(m), MixingCache::Mlp(c)) => m.backward(p, g, c, dy),
            _ => unreachable!("cache kind matches mixing kind"),
        }
    }
}

/// A residual sub-block: `x + LN_out(x + f(LN_in(x)))` in the double-norm
/// form, `x + f(LN_in(x))` in the pre-norm form.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Residual {
    ln_in: LayerNorm,
    ln_out: Option<LayerNorm>,
}

struct ResidualCache {
    ln_in: LayerNormCache,
    ln_out: Option<LayerNormCache>,
}

impl Residual {
    fn new(layout: &mut ParamLayout, name: &str, width: usize, form: ResidualForm) -> Self {
        Residual {
            ln_in: LayerNorm::new(layout, &format!("{name}.ln_in"), width),
            ln_out: match form {
                ResidualForm::DoubleNorm => Some(LayerNorm::new(layout, &format!("{name}.ln_out"), width)),
                ResidualForm::PreNorm => None,
            },
        }
    }

    /// Applies the wrapper around `f`, returning the output and the caches
    /// of both the wrapper and `f`.
    fn forward<C>(
        &self,
        p: &[f64],
        x: Array2<f64>,
        f: impl FnOnce(Array2<f64>) -> (Array2<f64>, C),
    ) -> (Array2<f64>, ResidualCache, C) {
        let (a, ln_in) = self.ln_in.forward(p, &x);
        let (s, inner) = f(a);
        match &self.ln_out {
            Some(ln_out) => {
                let t = &x + &s;
                let (u, c_out) = ln_out.forward(p, &t);
                (x + u, ResidualCache { ln_in, ln_out: Some(c_out) }, inner)
            }
            None => (x + s, ResidualCache { ln_in, ln_out: None }, inner),
        }
    }

    fn backward(
        &self,
        p: &[f64],
        g: &mut [f64],
        cache: ResidualCache,
        dy: &Array2<f64>,
        f_back: impl FnOnce(&mut [f64], &Array2<f64>) -> Array2<f64>,
    ) -> Array2<f64> {
        let mut dx = dy.clone();
        let ds = match (&self.ln_out, cache.ln_out) {
            (Some(ln_out), Some(c_out)) => {
                let dt = ln_out.backward(p, g, c_out, dy);
                dx += &dt;
                dt
            }
            _ => dy.clone(),
        };
        let da = f_back(g, &ds);
        dx += &self.ln_in.backward(p, g, cache.ln_in, &da);
        dx
    }
}

/// Token-mixing sub-block followed by a channel-MLP sub-block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Block {
    mix_wrap: Residual,
    pub mixing: TokenMixing,
    mlp_wrap: Residual,
    mlp: ChannelMlp,
}

pub struct BlockCache {
    mix_wrap: ResidualCache,
    mixing: MixingCache,
    mlp_wrap: ResidualCache,
    mlp: ChannelMlpCache,
    /// Input to the token-mixing sub-block and its output, for magnitude
    /// diagnostics.
    pub mix_in: Option<Array2<f64>>,
    pub mix_out: Option<Array2<f64>>,
}

pub struct BlockSpec {
    pub kind: BlockKind,
    pub width: usize,
    pub heads: usize,
    pub expansion: usize,
    /// Sequence length; required by MLP token mixing.
    pub tokens: usize,
    pub residual: ResidualForm,
    pub token_decay: bool,
}

impl Block {
    pub fn new(layout: &mut ParamLayout, name: &str, spec: &BlockSpec) -> Self {
        let mix_wrap = Residual::new(layout, &format!("{name}.mix"), spec.width, spec.residual);
        let mixing = match spec.kind {
            BlockKind::Transformer => {
                TokenMixing::Attention(Attention::new(layout, &format!("{name}.attn"), spec.width, spec.heads))
            }
            BlockKind::Mixer => TokenMixing::Mlp(TokenMlp::new(
                layout,
                &format!("{name}.token_mlp"),
                spec.tokens,
                spec.expansion * spec.tokens,
                spec.token_decay,
            )),
        };
        let mlp_wrap = Residual::new(layout, &format!("{name}.chan"), spec.width, spec.residual);
        let mlp = ChannelMlp::new(layout, &format!("{name}.channel_mlp"), spec.width, spec.expansion * spec.width);
        Block { mix_wrap, mixing, mlp_wrap, mlp }
    }

    pub fn forward<R: Rng + ?Sized>(
        &self,
        p: &[f64],
        x: Array2<f64>,
        seqs: &Seqs,
        dropout: f64,
        rng: Option<&mut R>,
        record: bool,
    ) -> (Array2<f64>, BlockCache) {
        let mix_in = record.then(|| x.clone());
        let (h, mix_wrap, mixing) = self.mix_wrap.forward(p, x, |a| self.mixing.forward(p, a, seqs));
        let mix_out = record.then(|| h.clone());
        let (y, mlp_wrap, mlp) = self.mlp_wrap.forward(p, h, |a| self.mlp.forward(p, a, dropout, rng));
        (y, BlockCache { mix_wrap, mixing, mlp_wrap, mlp, mix_in, mix_out })
    }

    pub fn backward(&self, p: &[f64], g: &mut [f64], cache: BlockCache, dy: &Array2<f64>, seqs: &Seqs) -> Array2<f64> {
        let BlockCache { mix_wrap, mixing, mlp_wrap, mlp, .. } = cache;
        let dh = self
            .mlp_wrap
            .backward(p, g, mlp_wrap, dy, |g, ds| self.mlp.backward(p, g, mlp, ds));
        self.mix_wrap
            .backward(p, g, mix_wrap, &dh, |g, ds| self.mixing.backward(p, g, mixing, ds, seqs))
    }
}
