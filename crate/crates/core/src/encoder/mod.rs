//! Dual-modality encoder with optional parameter sharing.
//!
//! Images are split into patches, embedded, prefixed with a class token and
//! run through a pre-norm transformer trunk; the class-token output is
//! projected and normalized. Texts are token-embedded, run through a trunk
//! (masked attention over valid positions), max-pooled over valid positions,
//! projected and normalized. In [`Sharing::Shared`] mode both modalities use
//! the same trunk and projection tensors; input embeddings and positional
//! tables are always modality-specific.

mod config;
mod layers;
mod params;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

pub use config::{Sharing, SharedEncoderConfig, MLP_RATIO};
pub use params::{init_params, Owner, ParamGrads, SharedEncoderParams, TensorInfo, INIT_STD};

use crate::error::{Error, Result};
use crate::geometry::{l2_normalize_rows, EmbeddingBatch, MIN_ROW_NORM};
use crate::linalg::{dot, Matrix};
use crate::math;
use crate::objectives::{loss_gradients, LossBreakdown, LossConfig, PairedBatch};
use layers::{AttnShape, NormCache};
use params::TrunkIds;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Modality {
    Image,
    Text,
}

/// `count` square grayscale images with pixel values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageBatch {
    count: usize,
    size: usize,
    pixels: Vec<f64>,
}

impl ImageBatch {
    pub fn new(count: usize, size: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != count * size * size {
            return Err(Error::ShapeMismatch(format!(
                "{} pixels for {count} images of {size}x{size}",
                pixels.len()
            )));
        }
        if count == 0 {
            return Err(Error::ShapeMismatch("empty image batch".into()));
        }
        Ok(Self { count, size, pixels })
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.pixels
    }

    pub fn image(&self, i: usize) -> &[f64] {
        let n = self.size * self.size;
        &self.pixels[i * n..(i + 1) * n]
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        let mut pixels = Vec::with_capacity(indices.len() * self.size * self.size);
        for &i in indices {
            pixels.extend_from_slice(self.image(i));
        }
        Self {
            count: indices.len(),
            size: self.size,
            pixels,
        }
    }
}

/// Padded token sequences with a validity mask.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenBatch {
    count: usize,
    seq_len: usize,
    tokens: Vec<u32>,
    mask: Vec<bool>,
}

impl TokenBatch {
    pub fn new(count: usize, seq_len: usize, tokens: Vec<u32>, mask: Vec<bool>) -> Result<Self> {
        if tokens.len() != count * seq_len || mask.len() != count * seq_len {
            return Err(Error::ShapeMismatch(format!(
                "{} tokens / {} mask entries for {count} sequences of {seq_len}",
                tokens.len(),
                mask.len()
            )));
        }
        if count == 0 {
            return Err(Error::ShapeMismatch("empty token batch".into()));
        }
        if let Some(row) = (0..count).find(|&r| !mask[r * seq_len..(r + 1) * seq_len].iter().any(|&m| m)) {
            return Err(Error::EmptySequence { row });
        }
        Ok(Self {
            count,
            seq_len,
            tokens,
            mask,
        })
    }

    /// Builds a batch from variable-length sequences, padding with token 0.
    pub fn from_sequences<S: AsRef<[u32]>>(seqs: &[S], seq_len: usize) -> Result<Self> {
        let mut tokens = vec![0u32; seqs.len() * seq_len];
        let mut mask = vec![false; seqs.len() * seq_len];
        for (r, s) in seqs.iter().enumerate() {
            let s = s.as_ref();
            if s.len() > seq_len {
                return Err(Error::ShapeMismatch(format!(
                    "sequence {r} has {} tokens, limit is {seq_len}",
                    s.len()
                )));
            }
            tokens[r * seq_len..r * seq_len + s.len()].copy_from_slice(s);
            mask[r * seq_len..r * seq_len + s.len()].iter_mut().for_each(|m| *m = true);
        }
        Self::new(seqs.len(), seq_len, tokens, mask)
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn tokens(&self) -> &[u32] {
        &self.tokens
    }

    pub fn tokens_mut(&mut self) -> &mut [u32] {
        &mut self.tokens
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        let l = self.seq_len;
        let mut tokens = Vec::with_capacity(indices.len() * l);
        let mut mask = Vec::with_capacity(indices.len() * l);
        for &i in indices {
            tokens.extend_from_slice(&self.tokens[i * l..(i + 1) * l]);
            mask.extend_from_slice(&self.mask[i * l..(i + 1) * l]);
        }
        Self {
            count: indices.len(),
            seq_len: l,
            tokens,
            mask,
        }
    }
}

/// Raw inputs of one training batch: row `i` of each field belongs to pair `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairedInputs {
    pub images: ImageBatch,
    pub tokens: TokenBatch,
    /// Fixed semantic embeddings of the captions; never differentiated.
    pub semantic: EmbeddingBatch,
}

impl PairedInputs {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

struct BlockCache {
    ln1: NormCache,
    ln1_out: Vec<f64>,
    qkv: Vec<f64>,
    probs: Vec<f64>,
    ctx: Vec<f64>,
    ln2: NormCache,
    ln2_out: Vec<f64>,
    pre_act: Vec<f64>,
    act: Vec<f64>,
}

enum InputCache {
    Image { patches: Vec<f64> },
    Text { tokens: Vec<u32> },
}

/// Everything the backward pass of one modality needs.
struct ForwardCache {
    modality: Modality,
    batch: usize,
    seq: usize,
    input: InputCache,
    blocks: Vec<BlockCache>,
    lnf: NormCache,
    /// Row of the trunk output feeding each pooled entry (`batch × model_dim`).
    pool_rows: Vec<usize>,
    pooled: Vec<f64>,
    embedding: EmbeddingBatch,
    norms: Vec<f64>,
}

fn check_image_shape(imgs: &ImageBatch, cfg: &SharedEncoderConfig) -> Result<()> {
    if imgs.size != cfg.image_size {
        return Err(Error::ShapeMismatch(format!(
            "images are {0}x{0}, encoder expects {1}x{1}",
            imgs.size, cfg.image_size
        )));
    }
    Ok(())
}

fn check_token_shape(toks: &TokenBatch, cfg: &SharedEncoderConfig) -> Result<()> {
    if toks.seq_len != cfg.max_seq_len {
        return Err(Error::ShapeMismatch(format!(
            "token sequences have length {}, encoder expects {}",
            toks.seq_len, cfg.max_seq_len
        )));
    }
    if let Some(&t) = toks.tokens.iter().find(|&&t| t as usize >= cfg.vocab_size) {
        return Err(Error::ShapeMismatch(format!(
            "token {t} is outside the vocabulary of {}",
            cfg.vocab_size
        )));
    }
    Ok(())
}

/// Patch-major layout: row `b·P + p` holds the pixels of patch `p` of image `b`.
fn patchify(imgs: &ImageBatch, cfg: &SharedEncoderConfig) -> Vec<f64> {
    let (size, ps, side) = (cfg.image_size, cfg.patch_size, cfg.patches_per_side());
    let pd = cfg.patch_dim();
    let np = cfg.num_patches();
    let mut out = vec![0.0; imgs.count * np * pd];
    for b in 0..imgs.count {
        let img = imgs.image(b);
        for py in 0..side {
            for px in 0..side {
                let row = &mut out[(b * np + py * side + px) * pd..][..pd];
                for dy in 0..ps {
                    let src = &img[(py * ps + dy) * size + px * ps..][..ps];
                    row[dy * ps..(dy + 1) * ps].copy_from_slice(src);
                }
            }
        }
    }
    out
}

fn embed_image(imgs: &ImageBatch, p: &SharedEncoderParams) -> (Vec<f64>, Vec<f64>) {
    let cfg = p.config();
    let l = &p.layout;
    let d = cfg.model_dim;
    let np = cfg.num_patches();
    let seq = cfg.image_tokens();
    let patches = patchify(imgs, cfg);
    let emb = layers::linear(&patches, imgs.count * np, cfg.patch_dim(), p.tensor(l.patch_w), Some(p.tensor(l.patch_b)), d);
    let pos = p.tensor(l.image_pos);
    let cls = p.tensor(l.cls);
    let mut x = vec![0.0; imgs.count * seq * d];
    for b in 0..imgs.count {
        for t in 0..seq {
            let dst = &mut x[(b * seq + t) * d..][..d];
            let src = if t == 0 { cls } else { &emb[(b * np + t - 1) * d..][..d] };
            for k in 0..d {
                dst[k] = src[k] + pos[t * d + k];
            }
        }
    }
    (x, patches)
}

fn embed_text(toks: &TokenBatch, p: &SharedEncoderParams) -> Vec<f64> {
    let cfg = p.config();
    let l = &p.layout;
    let d = cfg.model_dim;
    let seq = toks.seq_len;
    let table = p.tensor(l.token_embed);
    let pos = p.tensor(l.text_pos);
    let mut x = vec![0.0; toks.count * seq * d];
    for r in 0..toks.count * seq {
        let t = r % seq;
        let tok = toks.tokens[r] as usize;
        let dst = &mut x[r * d..][..d];
        for k in 0..d {
            dst[k] = table[tok * d + k] + pos[t * d + k];
        }
    }
    x
}

fn trunk_forward(
    mut x: Vec<f64>,
    p: &SharedEncoderParams,
    trunk: &TrunkIds,
    batch: usize,
    seq: usize,
    valid: Option<&[bool]>,
) -> (Vec<f64>, Vec<BlockCache>, NormCache) {
    let cfg = p.config();
    let d = cfg.model_dim;
    let hidden = cfg.mlp_dim();
    let rows = batch * seq;
    let shape = AttnShape {
        batch,
        seq,
        heads: cfg.heads,
        head_dim: cfg.head_dim(),
    };
    let mut caches = Vec::with_capacity(trunk.blocks.len());
    for blk in &trunk.blocks {
        let (ln1_out, ln1) = layers::layer_norm(&x, rows, d, p.tensor(blk.ln1_g), p.tensor(blk.ln1_b));
        let qkv = layers::linear(&ln1_out, rows, d, p.tensor(blk.w_qkv), Some(p.tensor(blk.b_qkv)), 3 * d);
        let (ctx, probs) = layers::attention(&qkv, shape, valid);
        let attn_out = layers::linear(&ctx, rows, d, p.tensor(blk.w_o), Some(p.tensor(blk.b_o)), d);
        let mut mid = x.clone();
        mid.iter_mut().zip(&attn_out).for_each(|(a, b)| *a += b);
        let (ln2_out, ln2) = layers::layer_norm(&mid, rows, d, p.tensor(blk.ln2_g), p.tensor(blk.ln2_b));
        let pre_act = layers::linear(&ln2_out, rows, d, p.tensor(blk.w_fc), Some(p.tensor(blk.b_fc)), hidden);
        let act = layers::gelu(&pre_act);
        let mlp_out = layers::linear(&act, rows, hidden, p.tensor(blk.w_out), Some(p.tensor(blk.b_out)), d);
        x = mid;
        x.iter_mut().zip(&mlp_out).for_each(|(a, b)| *a += b);
        caches.push(BlockCache {
            ln1,
            ln1_out,
            qkv,
            probs,
            ctx,
            ln2,
            ln2_out,
            pre_act,
            act,
        });
    }
    let (out, lnf) = layers::layer_norm(&x, rows, d, p.tensor(trunk.lnf_g), p.tensor(trunk.lnf_b));
    (out, caches, lnf)
}

fn trunk_backward(
    dout: &[f64],
    caches: &[BlockCache],
    lnf: &NormCache,
    p: &SharedEncoderParams,
    trunk: &TrunkIds,
    grads: &mut ParamGrads,
    batch: usize,
    seq: usize,
) -> Vec<f64> {
    let cfg = p.config();
    let d = cfg.model_dim;
    let hidden = cfg.mlp_dim();
    let rows = batch * seq;
    let shape = AttnShape {
        batch,
        seq,
        heads: cfg.heads,
        head_dim: cfg.head_dim(),
    };
    let mut dx = {
        let (g, b) = two_mut(grads, trunk.lnf_g, trunk.lnf_b);
        layers::layer_norm_backward(dout, lnf, rows, d, p.tensor(trunk.lnf_g), g, b)
    };
    for (blk, c) in trunk.blocks.iter().zip(caches).rev() {
        // MLP branch.
        let dact = {
            let (dw, db) = two_mut(grads, blk.w_out, blk.b_out);
            layers::linear_backward(&dx, &c.act, rows, hidden, p.tensor(blk.w_out), d, dw, Some(db), true)
        };
        let dpre = layers::gelu_backward(&dact, &c.pre_act);
        let dln2 = {
            let (dw, db) = two_mut(grads, blk.w_fc, blk.b_fc);
            layers::linear_backward(&dpre, &c.ln2_out, rows, d, p.tensor(blk.w_fc), hidden, dw, Some(db), true)
        };
        let dmid = {
            let (g, b) = two_mut(grads, blk.ln2_g, blk.ln2_b);
            layers::layer_norm_backward(&dln2, &c.ln2, rows, d, p.tensor(blk.ln2_g), g, b)
        };
        dx.iter_mut().zip(&dmid).for_each(|(a, b)| *a += b);
        // Attention branch.
        let dctx = {
            let (dw, db) = two_mut(grads, blk.w_o, blk.b_o);
            layers::linear_backward(&dx, &c.ctx, rows, d, p.tensor(blk.w_o), d, dw, Some(db), true)
        };
        let dqkv = layers::attention_backward(&dctx, &c.qkv, &c.probs, shape);
        let dln1 = {
            let (dw, db) = two_mut(grads, blk.w_qkv, blk.b_qkv);
            layers::linear_backward(&dqkv, &c.ln1_out, rows, d, p.tensor(blk.w_qkv), 3 * d, dw, Some(db), true)
        };
        let din = {
            let (g, b) = two_mut(grads, blk.ln1_g, blk.ln1_b);
            layers::layer_norm_backward(&dln1, &c.ln1, rows, d, p.tensor(blk.ln1_g), g, b)
        };
        dx.iter_mut().zip(&din).for_each(|(a, b)| *a += b);
    }
    dx
}

/// Mutable access to two distinct gradient tensors.
fn two_mut(g: &mut ParamGrads, a: usize, b: usize) -> (&mut [f64], &mut [f64]) {
    assert_ne!(a, b);
    let vals = g.values_mut();
    if a < b {
        let (lo, hi) = vals.split_at_mut(b);
        (&mut lo[a], &mut hi[0])
    } else {
        let (lo, hi) = vals.split_at_mut(a);
        (&mut hi[0], &mut lo[b])
    }
}

fn forward(
    modality: Modality,
    imgs: Option<&ImageBatch>,
    toks: Option<&TokenBatch>,
    p: &SharedEncoderParams,
) -> Result<ForwardCache> {
    let cfg = p.config();
    let d = cfg.model_dim;
    let branch = p.layout.branch(modality);
    let trunk = &p.layout.trunks[branch];
    let (x, batch, seq, input, valid) = match modality {
        Modality::Image => {
            let imgs = imgs.expect("image batch");
            check_image_shape(imgs, cfg)?;
            let (x, patches) = embed_image(imgs, p);
            (x, imgs.count, cfg.image_tokens(), InputCache::Image { patches }, None)
        }
        Modality::Text => {
            let toks = toks.expect("token batch");
            check_token_shape(toks, cfg)?;
            let x = embed_text(toks, p);
            (x, toks.count, toks.seq_len, InputCache::Text { tokens: toks.tokens.clone() }, Some(toks.mask.as_slice()))
        }
    };
    let (out, blocks, lnf) = trunk_forward(x, p, trunk, batch, seq, valid);

    let mut pooled = vec![0.0; batch * d];
    let mut pool_rows = vec![0usize; batch * d];
    for b in 0..batch {
        match valid {
            None => {
                let r = b * seq;
                pooled[b * d..(b + 1) * d].copy_from_slice(&out[r * d..(r + 1) * d]);
                pool_rows[b * d..(b + 1) * d].iter_mut().for_each(|v| *v = r);
            }
            Some(mask) => {
                for k in 0..d {
                    let mut best = f64::NEG_INFINITY;
                    let mut arg = usize::MAX;
                    for t in 0..seq {
                        let r = b * seq + t;
                        if mask[r] && out[r * d + k] > best {
                            best = out[r * d + k];
                            arg = r;
                        }
                    }
                    if arg == usize::MAX {
                        return Err(Error::EmptySequence { row: b });
                    }
                    pooled[b * d + k] = best;
                    pool_rows[b * d + k] = arg;
                }
            }
        }
    }
    let proj = layers::linear(&pooled, batch, d, p.tensor(p.layout.projections[branch]), None, cfg.proj_dim);
    let raw = Matrix::from_vec(batch, cfg.proj_dim, proj)?;
    if !raw.is_finite() {
        return Err(Error::NonFinite(format!("{modality:?} encoder output")));
    }
    let norms = (0..batch).map(|i| math::sqrt(dot(raw.row(i), raw.row(i)))).collect::<Vec<_>>();
    if let Some((row, &norm)) = norms.iter().enumerate().find(|(_, &n)| !(n > MIN_ROW_NORM)) {
        return Err(Error::ZeroRow { row, norm });
    }
    let embedding = l2_normalize_rows(&raw)?;
    Ok(ForwardCache {
        modality,
        batch,
        seq,
        input,
        blocks,
        lnf,
        pool_rows,
        pooled,
        embedding,
        norms,
    })
}

fn backward(cache: &ForwardCache, dembed: &Matrix, p: &SharedEncoderParams, grads: &mut ParamGrads) {
    let cfg = p.config();
    let d = cfg.model_dim;
    let pd = cfg.proj_dim;
    let (batch, seq) = (cache.batch, cache.seq);
    let branch = p.layout.branch(cache.modality);
    let trunk = &p.layout.trunks[branch];
    let proj_id = p.layout.projections[branch];

    // Through the row normalization: (g − e(e·g)) / ‖raw‖.
    let mut draw = vec![0.0; batch * pd];
    for i in 0..batch {
        let e = cache.embedding.row(i);
        let g = dembed.row(i);
        let eg = dot(e, g);
        for k in 0..pd {
            draw[i * pd + k] = (g[k] - e[k] * eg) / cache.norms[i];
        }
    }
    let dpooled = layers::linear_backward(&draw, &cache.pooled, batch, d, p.tensor(proj_id), pd, grads.tensor_mut(proj_id), None, true);
    let mut dout = vec![0.0; batch * seq * d];
    for b in 0..batch {
        for k in 0..d {
            dout[cache.pool_rows[b * d + k] * d + k] += dpooled[b * d + k];
        }
    }
    let dx = trunk_backward(&dout, &cache.blocks, &cache.lnf, p, trunk, grads, batch, seq);

    let l = &p.layout;
    match &cache.input {
        InputCache::Image { patches } => {
            let np = cfg.num_patches();
            let mut demb = vec![0.0; batch * np * d];
            {
                let dpos = grads.tensor_mut(l.image_pos);
                for b in 0..batch {
                    for t in 0..seq {
                        let src = &dx[(b * seq + t) * d..][..d];
                        for k in 0..d {
                            dpos[t * d + k] += src[k];
                        }
                        if t > 0 {
                            demb[(b * np + t - 1) * d..][..d].copy_from_slice(src);
                        }
                    }
                }
            }
            {
                let dcls = grads.tensor_mut(l.cls);
                for b in 0..batch {
                    for k in 0..d {
                        dcls[k] += dx[b * seq * d + k];
                    }
                }
            }
            let (dw, db) = two_mut(grads, l.patch_w, l.patch_b);
            layers::linear_backward(&demb, patches, batch * np, cfg.patch_dim(), p.tensor(l.patch_w), d, dw, Some(db), false);
        }
        InputCache::Text { tokens } => {
            let (dtab, dpos) = two_mut(grads, l.token_embed, l.text_pos);
            for r in 0..batch * seq {
                let t = r % seq;
                let tok = tokens[r] as usize;
                let src = &dx[r * d..][..d];
                for k in 0..d {
                    dtab[tok * d + k] += src[k];
                    dpos[t * d + k] += src[k];
                }
            }
        }
    }
}

/// Unit-norm image embeddings, `count × proj_dim`.
pub fn encode_image(imgs: &ImageBatch, p: &SharedEncoderParams) -> Result<EmbeddingBatch> {
    Ok(forward(Modality::Image, Some(imgs), None, p)?.embedding)
}

/// Unit-norm text embeddings, `count × proj_dim`.
pub fn encode_text(toks: &TokenBatch, p: &SharedEncoderParams) -> Result<EmbeddingBatch> {
    Ok(forward(Modality::Text, None, Some(toks), p)?.embedding)
}

/// Options of [`encoder_gradients_with`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GradientOptions {
    /// Treat one modality's embeddings as constants.
    pub detach: Option<Modality>,
    /// Run the two modality paths concurrently (needs the `parallel` feature).
    pub parallel: bool,
}

/// Result of a full forward/backward pass over one batch.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderGradients {
    pub grads: ParamGrads,
    pub breakdown: LossBreakdown,
    pub image: EmbeddingBatch,
    pub text: EmbeddingBatch,
}

/// Gradients of the total loss for every learnable tensor. Shared tensors
/// receive the sum of the image-path and text-path contributions.
pub fn encoder_gradients(batch: &PairedInputs, p: &SharedEncoderParams, cfg: &LossConfig) -> Result<EncoderGradients> {
    encoder_gradients_with(batch, p, cfg, GradientOptions::default())
}

pub fn encoder_gradients_with(
    batch: &PairedInputs,
    p: &SharedEncoderParams,
    cfg: &LossConfig,
    opts: GradientOptions,
) -> Result<EncoderGradients> {
    cfg.validate()?;
    if batch.tokens.len() != batch.images.len() || batch.semantic.rows() != batch.images.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} images, {} captions, {} semantic rows",
            batch.images.len(),
            batch.tokens.len(),
            batch.semantic.rows()
        )));
    }
    let (img_cache, txt_cache) = join(
        opts.parallel,
        || forward(Modality::Image, Some(&batch.images), None, p),
        || forward(Modality::Text, None, Some(&batch.tokens), p),
    );
    let (img_cache, txt_cache) = (img_cache?, txt_cache?);
    let paired = PairedBatch::new(img_cache.embedding.clone(), txt_cache.embedding.clone(), batch.semantic.clone())?;
    let lg = loss_gradients(&paired, p.temperature(), cfg)?;

    let run = |cache: &ForwardCache, d: &Matrix, skip: bool| {
        let mut g = p.zeros_like();
        if !skip {
            backward(cache, d, p, &mut g);
        }
        g
    };
    let (mut grads, text_grads) = join(
        opts.parallel,
        || run(&img_cache, &lg.image, opts.detach == Some(Modality::Image)),
        || run(&txt_cache, &lg.text, opts.detach == Some(Modality::Text)),
    );
    grads.add_assign(&text_grads);
    grads.tensor_mut(p.logit_scale_id())[0] = lg.log_scale;
    if !grads.is_finite() {
        return Err(Error::NonFinite("parameter gradients".into()));
    }
    Ok(EncoderGradients {
        grads,
        breakdown: lg.breakdown,
        image: img_cache.embedding,
        text: txt_cache.embedding,
    })
}

#[cfg(feature = "parallel")]
fn join<A: Send, B: Send>(parallel: bool, a: impl FnOnce() -> A + Send, b: impl FnOnce() -> B + Send) -> (A, B) {
    if parallel {
        rayon::join(a, b)
    } else {
        (a(), b())
    }
}

#[cfg(not(feature = "parallel"))]
fn join<A, B>(_parallel: bool, a: impl FnOnce() -> A, b: impl FnOnce() -> B) -> (A, B) {
    (a(), b())
}
