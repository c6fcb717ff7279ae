use ndarray::{Array2, ArrayView2};
use rand::Rng;

use super::block::{Block, BlockCache, BlockSpec};
use super::config::{BlockKind, ModelConfig};
use super::ops::{LayerNorm, LayerNormCache, Linear, LinearCache, Seqs};
use super::params::{l2_norm, Init, ParamLayout, ParamRef};
use crate::error::{Error, Result};
use crate::missingness::MaskMatrix;

/// Embedding std for positional embeddings and special tokens.
const EMBED_STD: f64 = 0.02;

/// Layout of every learnable tensor for a given column count and config.
#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    pub config: ModelConfig,
    pub d: usize,
    pub layout: ParamLayout,
    value_weight: ParamRef,
    value_bias: ParamRef,
    enc_pos: ParamRef,
    cls: ParamRef,
    enc_mask_token: Option<ParamRef>,
    encoder: Vec<Block>,
    enc_norm: LayerNorm,
    dec_embed: Linear,
    dec_mask_token: ParamRef,
    dec_pos: ParamRef,
    decoder: Vec<Block>,
    dec_norm: LayerNorm,
    head_weight: ParamRef,
    head_bias: ParamRef,
}

/// What one encoder token holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenSource {
    Cls,
    /// Embedded value of column `j`.
    Value(usize),
    /// Mask token standing at column `j` (Mixer encoder only).
    Masked(usize),
}

pub struct ForwardCache {
    enc_seqs: Seqs,
    /// Row and content of every encoder token.
    pub enc_tokens: Vec<(usize, TokenSource)>,
    enc_blocks: Vec<BlockCache>,
    enc_norm: LayerNormCache,
    dec_embed: LinearCache,
    /// Index of the encoder token feeding each decoder position, if any.
    dec_source: Vec<Option<usize>>,
    dec_seqs: Seqs,
    dec_blocks: Vec<BlockCache>,
    dec_norm: LayerNormCache,
    dec_out: Array2<f64>,
    values: Array2<f64>,
}

impl ForwardCache {
    pub fn encoder_blocks(&self) -> &[BlockCache] {
        &self.enc_blocks
    }

    pub fn decoder_blocks(&self) -> &[BlockCache] {
        &self.dec_blocks
    }
}

impl Architecture {
    pub fn new(d: usize, config: ModelConfig) -> Result<Self> {
        config.validate()?;
        if d < 2 {
            return Err(Error::InvalidArgument(format!("need d >= 2 columns, got {d}")));
        }
        let c = config.width;
        let l = d + 1;
        let mut layout = ParamLayout::default();
        let value_weight = layout.add("embed.value_weight", d, c, Init::FanInUniform(1));
        let value_bias = layout.add("embed.value_bias", d, c, Init::Zeros);
        let enc_pos = layout.add("embed.enc_pos", l, c, Init::TruncNormal(EMBED_STD));
        let cls = layout.add("embed.cls", 1, c, Init::TruncNormal(EMBED_STD));
        let enc_mask_token = (config.block_kind == BlockKind::Mixer)
            .then(|| layout.add("embed.enc_mask_token", 1, c, Init::TruncNormal(EMBED_STD)));
        let spec = BlockSpec {
            kind: config.block_kind,
            width: c,
            heads: config.heads,
            expansion: config.expansion_ratio,
            tokens: l,
            residual: config.residual,
            token_decay: true,
        };
        let encoder = (0..config.encoder_depth)
            .map(|b| Block::new(&mut layout, &format!("encoder.{b}"), &spec))
            .collect();
        let enc_norm = LayerNorm::new(&mut layout, "encoder.norm", c);
        let dec_embed = Linear::new(&mut layout, "decoder.embed", c, c, false);
        let dec_mask_token = layout.add("decoder.mask_token", 1, c, Init::TruncNormal(EMBED_STD));
        let dec_pos = layout.add("decoder.pos", l, c, Init::TruncNormal(EMBED_STD));
        let decoder = (0..config.decoder_depth)
            .map(|b| Block::new(&mut layout, &format!("decoder.{b}"), &spec))
            .collect();
        let dec_norm = LayerNorm::new(&mut layout, "decoder.norm", c);
        let head_weight = layout.add("head.weight", d, c, Init::FanInUniform(c));
        let head_bias = layout.add("head.bias", 1, d, Init::Zeros);
        Ok(Architecture {
            config,
            d,
            layout,
            value_weight,
            value_bias,
            enc_pos,
            cls,
            enc_mask_token,
            encoder,
            enc_norm,
            dec_embed,
            dec_mask_token,
            dec_pos,
            decoder,
            dec_norm,
            head_weight,
            head_bias,
        })
    }

    pub fn n_params(&self) -> usize {
        self.layout.len()
    }

    pub fn encoder_depth(&self) -> usize {
        self.encoder.len()
    }

    pub fn decoder_depth(&self) -> usize {
        self.decoder.len()
    }

    /// Builds the encoder token matrix: `[CLS]` then one token per visible
    /// column (Transformer) or per column with mask tokens at hidden
    /// positions (Mixer).
    pub fn tokenize(
        &self,
        p: &[f64],
        x: ArrayView2<f64>,
        visible: &MaskMatrix,
    ) -> (Array2<f64>, Seqs, Vec<(usize, TokenSource)>) {
        let (b, d) = x.dim();
        let c = self.config.width;
        let mut tokens: Vec<(usize, TokenSource)> = Vec::new();
        let mut lens = Vec::with_capacity(b);
        for i in 0..b {
            tokens.push((i, TokenSource::Cls));
            let mut len = 1;
            for j in 0..d {
                if visible.get(i, j) {
                    tokens.push((i, TokenSource::Value(j)));
                    len += 1;
                } else if self.enc_mask_token.is_some() {
                    tokens.push((i, TokenSource::Masked(j)));
                    len += 1;
                }
            }
            lens.push(len);
        }
        let mut out = Array2::zeros((tokens.len(), c));
        for (t, &(i, src)) in tokens.iter().enumerate() {
            let mut row = out.row_mut(t);
            match src {
                TokenSource::Cls => {
                    row.assign(&self.cls.row(p, 0));
                    row += &self.enc_pos.row(p, 0);
                }
                TokenSource::Value(j) => {
                    row.scaled_add(x[[i, j]], &self.value_weight.row(p, j));
                    row += &self.value_bias.row(p, j);
                    row += &self.enc_pos.row(p, j + 1);
                }
                TokenSource::Masked(j) => {
                    let mask = self.enc_mask_token.expect("mixer encoder");
                    row.assign(&mask.row(p, 0));
                    row += &self.enc_pos.row(p, j + 1);
                }
            }
        }
        (out, Seqs::from_lens(lens), tokens)
    }

    /// Runs encoder and decoder. `x` is the batch (`B × d`); only entries
    /// with `visible = 1` are read. Passing an `rng` enables dropout.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        p: &[f64],
        x: ArrayView2<f64>,
        visible: &MaskMatrix,
        mut rng: Option<&mut R>,
        record: bool,
    ) -> (Array2<f64>, ForwardCache) {
        let (b, d) = x.dim();
        assert_eq!(d, self.d, "column count");
        assert_eq!(visible.dim(), (b, d), "visibility shape");
        let c = self.config.width;
        let l = d + 1;
        let dropout = self.config.dropout;

        let (mut h, enc_seqs, enc_tokens) = self.tokenize(p, x, visible);
        let mut enc_blocks = Vec::with_capacity(self.encoder.len());
        for block in &self.encoder {
            let (y, cache) = block.forward(p, h, &enc_seqs, dropout, rng.as_deref_mut(), record);
            h = y;
            enc_blocks.push(cache);
        }
        let (h, enc_norm) = self.enc_norm.forward(p, &h);
        let (e, dec_embed) = self.dec_embed.forward(p, h);

        // Decoder input: encoder outputs at visible positions, mask token elsewhere.
        let mut dec_source = vec![None; b * l];
        for (t, &(i, src)) in enc_tokens.iter().enumerate() {
            match src {
                TokenSource::Cls => dec_source[i * l] = Some(t),
                TokenSource::Value(j) => dec_source[i * l + j + 1] = Some(t),
                TokenSource::Masked(_) => {}
            }
        }
        let mut h = Array2::zeros((b * l, c));
        for (pos, src) in dec_source.iter().enumerate() {
            let mut row = h.row_mut(pos);
            match src {
                Some(t) => row.assign(&e.row(*t)),
                None => row.assign(&self.dec_mask_token.row(p, 0)),
            }
            row += &self.dec_pos.row(p, pos % l);
        }
        let dec_seqs = Seqs::uniform(b, l);
        let mut dec_blocks = Vec::with_capacity(self.decoder.len());
        for block in &self.decoder {
            let (y, cache) = block.forward(p, h, &dec_seqs, dropout, rng.as_deref_mut(), record);
            h = y;
            dec_blocks.push(cache);
        }
        let (dec_out, dec_norm) = self.dec_norm.forward(p, &h);

        let mut pred = Array2::zeros((b, d));
        for i in 0..b {
            for j in 0..d {
                pred[[i, j]] = dec_out.row(i * l + j + 1).dot(&self.head_weight.row(p, j))
                    + p[self.head_bias.offset + j];
            }
        }
        let cache = ForwardCache {
            enc_seqs,
            enc_tokens,
            enc_blocks,
            enc_norm,
            dec_embed,
            dec_source,
            dec_seqs,
            dec_blocks,
            dec_norm,
            dec_out,
            values: x.to_owned(),
        };
        (pred, cache)
    }

    /// Accumulates into `g` the gradient of a scalar loss whose gradient
    /// with respect to the predictions is `d_pred`.
    pub fn backward(&self, p: &[f64], g: &mut [f64], cache: ForwardCache, d_pred: &Array2<f64>) {
        let (b, d) = d_pred.dim();
        let c = self.config.width;
        let l = d + 1;
        let ForwardCache {
            enc_seqs,
            enc_tokens,
            enc_blocks,
            enc_norm,
            dec_embed,
            dec_source,
            dec_seqs,
            dec_blocks,
            dec_norm,
            dec_out,
            values,
        } = cache;

        let mut d_dec_out = Array2::zeros((b * l, c));
        for i in 0..b {
            for j in 0..d {
                let gp = d_pred[[i, j]];
                if gp == 0.0 {
                    continue;
                }
                let pos = i * l + j + 1;
                self.head_weight.row_mut(g, j).scaled_add(gp, &dec_out.row(pos));
                g[self.head_bias.offset + j] += gp;
                d_dec_out.row_mut(pos).scaled_add(gp, &self.head_weight.row(p, j));
            }
        }
        let mut dh = self.dec_norm.backward(p, g, dec_norm, &d_dec_out);
        for (block, cache) in self.decoder.iter().zip(dec_blocks).rev() {
            dh = block.backward(p, g, cache, &dh, &dec_seqs);
        }

        let mut d_e = Array2::zeros((enc_tokens.len(), c));
        for (pos, src) in dec_source.iter().enumerate() {
            let row = dh.row(pos);
            self.dec_pos.row_mut(g, pos % l).scaled_add(1.0, &row);
            match src {
                Some(t) => d_e.row_mut(*t).scaled_add(1.0, &row),
                None => self.dec_mask_token.row_mut(g, 0).scaled_add(1.0, &row),
            }
        }
        let d_h = self.dec_embed.backward(p, g, dec_embed, &d_e);
        let mut dh = self.enc_norm.backward(p, g, enc_norm, &d_h);
        for (block, cache) in self.encoder.iter().zip(enc_blocks).rev() {
            dh = block.backward(p, g, cache, &dh, &enc_seqs);
        }

        for (t, &(i, src)) in enc_tokens.iter().enumerate() {
            let row = dh.row(t);
            match src {
                TokenSource::Cls => {
                    self.cls.row_mut(g, 0).scaled_add(1.0, &row);
                    self.enc_pos.row_mut(g, 0).scaled_add(1.0, &row);
                }
                TokenSource::Value(j) => {
                    self.value_weight.row_mut(g, j).scaled_add(values[[i, j]], &row);
                    self.value_bias.row_mut(g, j).scaled_add(1.0, &row);
                    self.enc_pos.row_mut(g, j + 1).scaled_add(1.0, &row);
                }
                TokenSource::Masked(j) => {
                    let mask = self.enc_mask_token.expect("mixer encoder");
                    mask.row_mut(g, 0).scaled_add(1.0, &row);
                    self.enc_pos.row_mut(g, j + 1).scaled_add(1.0, &row);
                }
            }
        }
    }

    /// Encoder output (after the final norm) for every encoder token.
    pub fn encode(&self, p: &[f64], x: ArrayView2<f64>, visible: &MaskMatrix) -> (Array2<f64>, Vec<(usize, TokenSource)>) {
        let (mut h, seqs, tokens) = self.tokenize(p, x, visible);
        for block in &self.encoder {
            h = block.forward::<crate::rng::Rng>(p, h, &seqs, 0.0, None, false).0;
        }
        (self.enc_norm.forward(p, &h).0, tokens)
    }
}

/// A model architecture together with its parameter values.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    pub arch: Architecture,
    pub values: Vec<f64>,
}

impl ModelParameters {
    pub fn init<R: Rng + ?Sized>(d: usize, config: ModelConfig, rng: &mut R) -> Result<Self> {
        let arch = Architecture::new(d, config)?;
        let values = arch.layout.initialise(rng);
        Ok(ModelParameters { arch, values })
    }

    pub fn n_params(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.values)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Inference-mode predictions for every column of every row.
    pub fn predict(&self, x: ArrayView2<f64>, visible: &MaskMatrix) -> Result<Array2<f64>> {
        let (pred, _) = self
            .arch
            .forward::<crate::rng::Rng>(&self.values, x, visible, None, false);
        if pred.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                stage: "forward".into(),
                param_norm: self.norm(),
            });
        }
        Ok(pred)
    }
}
