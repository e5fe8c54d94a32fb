//! Contrastive objectives: the symmetric cross-modal loss, semantically
//! re-scaled intra-modality separation, their weighted total, and exact
//! gradients with respect to both embedding batches and the log-temperature.
//!
//! Logits for the cross-modal terms are `s·Ev·Etᵀ` with `s = min(exp(t), clamp)`.
//! The separation logits keep the paired image–text similarity on the
//! diagonal and put same-modality similarities, multiplied by the semantic
//! distance `𝒟 = 1 − 𝒮`, off the diagonal.

use alloc::format;

use crate::error::{Error, Result};
use crate::geometry::{
    l2_normalize_rows, similarity, softmax_cross_entropy, softmax_cross_entropy_with_grad,
    EmbeddingBatch, LabelVector, SimilarityMatrix,
};
use crate::linalg::{gemm, Matrix, Trans};
use crate::math;

/// Logit scale used at initialization, `1 / 0.07`.
pub const INIT_LOGIT_SCALE: f64 = 1.0 / 0.07;
/// Default upper bound on the effective logit scale.
pub const DEFAULT_SCALE_CLAMP: f64 = 100.0;
/// Largest diagonal entry tolerated in a semantic distance matrix.
pub const DIAGONAL_TOLERANCE: f64 = 1e-12;

/// Learnable log-scale `t` with effective scale `s = min(exp(t), clamp_max)`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Temperature {
    pub log_scale: f64,
    pub clamp_max: f64,
}

impl Default for Temperature {
    fn default() -> Self {
        Self::from_log_scale(math::ln(INIT_LOGIT_SCALE))
    }
}

impl Temperature {
    pub fn from_log_scale(log_scale: f64) -> Self {
        Self {
            log_scale,
            clamp_max: DEFAULT_SCALE_CLAMP,
        }
    }

    /// A temperature whose effective scale is exactly `scale` (below the clamp).
    pub fn from_scale(scale: f64) -> Self {
        Self::from_log_scale(math::ln(scale))
    }

    pub fn scale(&self) -> f64 {
        math::exp(self.log_scale).min(self.clamp_max)
    }

    /// True when the clamp decides the scale, so `t` receives no gradient.
    pub fn is_clamped(&self) -> bool {
        math::exp(self.log_scale) >= self.clamp_max
    }
}

/// Which modalities receive an intra-modality separation term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SeparationMode {
    None,
    ImageOnly,
    TextOnly,
    Both,
}

impl SeparationMode {
    pub fn separates_images(self) -> bool {
        matches!(self, Self::ImageOnly | Self::Both)
    }

    pub fn separates_texts(self) -> bool {
        matches!(self, Self::TextOnly | Self::Both)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::ImageOnly => "image_only",
            Self::TextOnly => "text_only",
            Self::Both => "both",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "none" => Self::None,
            "image_only" => Self::ImageOnly,
            "text_only" => Self::TextOnly,
            "both" => Self::Both,
            _ => return None,
        })
    }

    pub const ALL: [Self; 4] = [Self::None, Self::ImageOnly, Self::TextOnly, Self::Both];
}

/// Weights of the objective and the separation variant.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossConfig {
    pub alpha: f64,
    pub beta: f64,
    pub separation_mode: SeparationMode,
    pub rescaling_enabled: bool,
}

impl LossConfig {
    /// Cross-modal loss only.
    pub fn clip() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.0,
            separation_mode: SeparationMode::None,
            rescaling_enabled: true,
        }
    }

    /// `α = 1`, `β = ½`, image–image separation with semantic re-scaling.
    pub fn alignclip() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.5,
            separation_mode: SeparationMode::ImageOnly,
            rescaling_enabled: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidConfig(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidConfig(format!("beta must be >= 0, got {}", self.beta)));
        }
        if self.separation_mode == SeparationMode::None && self.beta > 0.0 {
            return Err(Error::InvalidConfig(
                "beta > 0 requires a separation mode other than none".into(),
            ));
        }
        Ok(())
    }
}

/// Value of every term of the objective for one batch.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossBreakdown {
    /// Mean of the two cross-modal cross-entropies.
    pub clip: f64,
    /// Sum of the two cross-modal cross-entropies.
    pub crsep: f64,
    /// Image–image separation term, zero when disabled.
    pub imsep_image: f64,
    /// Text–text separation term, zero when disabled.
    pub imsep_text: f64,
    pub total: f64,
}

/// Row-aligned image, text and semantic embeddings with their labels.
#[derive(Clone, Debug, PartialEq)]
pub struct PairedBatch {
    pub image: EmbeddingBatch,
    pub text: EmbeddingBatch,
    pub semantic: EmbeddingBatch,
    pub labels: LabelVector,
}

impl PairedBatch {
    /// Builds a batch with identity labels.
    pub fn new(image: EmbeddingBatch, text: EmbeddingBatch, semantic: EmbeddingBatch) -> Result<Self> {
        let b = image.rows();
        if text.rows() != b || semantic.rows() != b || image.dim() != text.dim() {
            return Err(Error::DimensionMismatch(format!(
                "image {}x{}, text {}x{}, semantic {} rows",
                image.rows(),
                image.dim(),
                text.rows(),
                text.dim(),
                semantic.rows()
            )));
        }
        Ok(Self {
            image,
            text,
            semantic,
            labels: LabelVector::identity(b),
        })
    }

    pub fn len(&self) -> usize {
        self.image.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn check_pair(ev: &EmbeddingBatch, et: &EmbeddingBatch) -> Result<()> {
    if ev.rows() != et.rows() || ev.dim() != et.dim() {
        return Err(Error::DimensionMismatch(format!(
            "image {}x{} against text {}x{}",
            ev.rows(),
            ev.dim(),
            et.rows(),
            et.dim()
        )));
    }
    Ok(())
}

/// Visual logits `s·Ev·Etᵀ` and textual logits, their transpose.
pub fn clip_logits(
    ev: &EmbeddingBatch,
    et: &EmbeddingBatch,
    temp: Temperature,
) -> Result<(SimilarityMatrix, SimilarityMatrix)> {
    check_pair(ev, et)?;
    let mut v = similarity(ev, et)?;
    v.0.scale(temp.scale());
    let t = v.transpose();
    Ok((v, t))
}

/// `½[H(ŷ_v, Y) + H(ŷ_t, Y)]` with identity labels.
pub fn clip_loss(ev: &EmbeddingBatch, et: &EmbeddingBatch, temp: Temperature) -> Result<f64> {
    Ok(0.5 * crsep_loss(ev, et, temp)?)
}

/// `H(ŷ_v, Y) + H(ŷ_t, Y)`; twice [`clip_loss`].
pub fn crsep_loss(ev: &EmbeddingBatch, et: &EmbeddingBatch, temp: Temperature) -> Result<f64> {
    let (v, t) = clip_logits(ev, et, temp)?;
    let labels = LabelVector::identity(ev.rows());
    Ok(softmax_cross_entropy(&v, &labels)? + softmax_cross_entropy(&t, &labels)?)
}

/// Row-wise cosine similarity `𝒮` of the semantic embeddings and the
/// distance `𝒟 = 1 − 𝒮`. The diagonals are set to exactly 1 and 0.
pub fn semantic_distance(es: &EmbeddingBatch) -> Result<(SimilarityMatrix, SimilarityMatrix)> {
    let unit = l2_normalize_rows(es.matrix())?;
    let mut s = similarity(&unit, &unit)?;
    let b = s.size();
    let mut d = Matrix::zeros(b, b);
    for i in 0..b {
        s.0.set(i, i, 1.0);
        for j in 0..b {
            if i != j {
                d.set(i, j, 1.0 - s.get(i, j));
            }
        }
    }
    Ok((s, SimilarityMatrix(d)))
}

/// Elementwise product `𝒱 ⊙ 𝒟`.
pub fn rescale(v: &SimilarityMatrix, d: &SimilarityMatrix) -> Result<SimilarityMatrix> {
    let (a, b) = (v.matrix(), d.matrix());
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} against {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let mut out = a.clone();
    for (o, &w) in out.as_mut_slice().iter_mut().zip(b.as_slice()) {
        *o *= w;
    }
    Ok(SimilarityMatrix(out))
}

/// Distance matrix used by the ablation: 1 off the diagonal, 0 on it.
pub fn neutral_distance(b: usize) -> SimilarityMatrix {
    let mut m = Matrix::filled(b, b, 1.0);
    for i in 0..b {
        m.set(i, i, 0.0);
    }
    SimilarityMatrix(m)
}

fn check_distance(d: &SimilarityMatrix, b: usize) -> Result<()> {
    if d.size() != b || d.matrix().cols() != b {
        return Err(Error::DimensionMismatch(format!(
            "distance matrix {}x{} for a batch of {b}",
            d.size(),
            d.matrix().cols()
        )));
    }
    for i in 0..b {
        let v = d.get(i, i);
        if v.abs() > DIAGONAL_TOLERANCE {
            return Err(Error::NonZeroDiagonal { index: i, value: v });
        }
    }
    Ok(())
}

/// Separation logits with `anchor` supplying the off-diagonal similarities.
///
/// Entry `(i, i)` is `s·(anchor_i · other_i)`; entry `(i, j)` is
/// `s·(anchor_i · anchor_j)·𝒟_ij`.
fn separation_logits(
    anchor: &EmbeddingBatch,
    other: &EmbeddingBatch,
    d: &SimilarityMatrix,
    temp: Temperature,
    rescaling_enabled: bool,
) -> Result<SimilarityMatrix> {
    check_pair(anchor, other)?;
    let b = anchor.rows();
    check_distance(d, b)?;
    let neutral;
    let weights = if rescaling_enabled {
        d
    } else {
        neutral = neutral_distance(b);
        &neutral
    };
    let same = similarity(anchor, anchor)?;
    let mut z = rescale(&same, weights)?;
    for i in 0..b {
        let paired: f64 = anchor.row(i).iter().zip(other.row(i)).map(|(x, y)| x * y).sum();
        z.0.set(i, i, paired);
    }
    z.0.scale(temp.scale());
    Ok(z)
}

/// Vision–vision logits `s·[diag(Ev·Etᵀ) + (Ev·Evᵀ)⊙𝒟]`.
///
/// With `rescaling_enabled == false`, `𝒟` is replaced by the all-ones
/// off-diagonal matrix (the distance argument is still validated).
pub fn vsep_logits(
    ev: &EmbeddingBatch,
    et: &EmbeddingBatch,
    d: &SimilarityMatrix,
    temp: Temperature,
    rescaling_enabled: bool,
) -> Result<SimilarityMatrix> {
    separation_logits(ev, et, d, temp, rescaling_enabled)
}

/// Text–text mirror of [`vsep_logits`].
pub fn tsep_logits(
    ev: &EmbeddingBatch,
    et: &EmbeddingBatch,
    d: &SimilarityMatrix,
    temp: Temperature,
    rescaling_enabled: bool,
) -> Result<SimilarityMatrix> {
    separation_logits(et, ev, d, temp, rescaling_enabled)
}

/// `H(ŷ_vsep, Y)`.
pub fn imsep_loss(
    ev: &EmbeddingBatch,
    et: &EmbeddingBatch,
    es: &EmbeddingBatch,
    temp: Temperature,
    rescaling_enabled: bool,
) -> Result<f64> {
    let (_, d) = semantic_distance(es)?;
    let z = vsep_logits(ev, et, &d, temp, rescaling_enabled)?;
    softmax_cross_entropy(&z, &LabelVector::identity(ev.rows()))
}

/// `H(ŷ_tsep, Y)`: off-diagonal from `Et·Etᵀ ⊙ 𝒟`.
pub fn tsep_loss(
    ev: &EmbeddingBatch,
    et: &EmbeddingBatch,
    es: &EmbeddingBatch,
    temp: Temperature,
    rescaling_enabled: bool,
) -> Result<f64> {
    let (_, d) = semantic_distance(es)?;
    let z = tsep_logits(ev, et, &d, temp, rescaling_enabled)?;
    softmax_cross_entropy(&z, &LabelVector::identity(ev.rows()))
}

/// `α·L_CRsep + β·(enabled separation terms)`.
pub fn total_loss(batch: &PairedBatch, temp: Temperature, cfg: &LossConfig) -> Result<LossBreakdown> {
    Ok(evaluate(batch, temp, cfg, false)?.breakdown)
}

/// Gradients of [`LossBreakdown::total`].
#[derive(Clone, Debug, PartialEq)]
pub struct LossGradients {
    /// `∂total/∂Ev`, `b × d`.
    pub image: Matrix,
    /// `∂total/∂Et`, `b × d`.
    pub text: Matrix,
    /// `∂total/∂t`; zero while the scale clamp is active.
    pub log_scale: f64,
    pub breakdown: LossBreakdown,
}

/// Exact gradients of the total loss. Semantic embeddings are constants.
pub fn loss_gradients(batch: &PairedBatch, temp: Temperature, cfg: &LossConfig) -> Result<LossGradients> {
    evaluate(batch, temp, cfg, true)
}

fn evaluate(batch: &PairedBatch, temp: Temperature, cfg: &LossConfig, with_grad: bool) -> Result<LossGradients> {
    cfg.validate()?;
    let (ev, et) = (&batch.image, &batch.text);
    check_pair(ev, et)?;
    let b = ev.rows();
    let dim = ev.dim();
    let s = temp.scale();
    let labels = &batch.labels;
    if labels.len() != b {
        return Err(Error::DimensionMismatch(format!("{} labels for {b} rows", labels.len())));
    }

    let mut grad_image = Matrix::zeros(b, dim);
    let mut grad_text = Matrix::zeros(b, dim);
    // Accumulates ∂total/∂s.
    let mut grad_scale = 0.0;

    let (zv, zt) = clip_logits(ev, et, temp)?;
    let (hv, gv) = softmax_cross_entropy_with_grad(&zv, labels)?;
    let (ht, gt) = softmax_cross_entropy_with_grad(&zt, labels)?;
    let crsep = hv + ht;
    let mut breakdown = LossBreakdown {
        clip: 0.5 * crsep,
        crsep,
        ..LossBreakdown::default()
    };

    if with_grad {
        // ∂/∂ŷ_v of α(H(ŷ_v) + H(ŷ_vᵀ)).
        let mut dz = Matrix::zeros(b, b);
        for i in 0..b {
            for j in 0..b {
                dz.set(i, j, cfg.alpha * (gv.get(i, j) + gt.get(j, i)));
            }
        }
        let zs = zv.matrix().as_slice();
        grad_scale += dz.as_slice().iter().zip(zs).map(|(g, z)| g * z).sum::<f64>() / s;
        gemm(b, b, dim, s, dz.as_slice(), Trans::No, et.matrix().as_slice(), Trans::No, 1.0, grad_image.as_mut_slice());
        gemm(b, b, dim, s, dz.as_slice(), Trans::Yes, ev.matrix().as_slice(), Trans::No, 1.0, grad_text.as_mut_slice());
    }

    let mode = cfg.separation_mode;
    if mode != SeparationMode::None {
        let (_, d) = semantic_distance(&batch.semantic)?;
        let weights = if cfg.rescaling_enabled { d.clone() } else { neutral_distance(b) };
        if mode.separates_images() {
            let z = vsep_logits(ev, et, &d, temp, cfg.rescaling_enabled)?;
            let (h, g) = softmax_cross_entropy_with_grad(&z, labels)?;
            breakdown.imsep_image = h;
            if with_grad {
                grad_scale += separation_backward(
                    cfg.beta, &g, &z, &weights, s, ev, et, &mut grad_image, &mut grad_text,
                );
            }
        }
        if mode.separates_texts() {
            let z = tsep_logits(ev, et, &d, temp, cfg.rescaling_enabled)?;
            let (h, g) = softmax_cross_entropy_with_grad(&z, labels)?;
            breakdown.imsep_text = h;
            if with_grad {
                grad_scale += separation_backward(
                    cfg.beta, &g, &z, &weights, s, et, ev, &mut grad_text, &mut grad_image,
                );
            }
        }
    }

    breakdown.total = cfg.alpha * breakdown.crsep + cfg.beta * (breakdown.imsep_image + breakdown.imsep_text);
    if !breakdown.total.is_finite() {
        return Err(Error::NonFinite("total loss".into()));
    }
    let log_scale = if temp.is_clamped() { 0.0 } else { grad_scale * s };
    Ok(LossGradients {
        image: grad_image,
        text: grad_text,
        log_scale,
        breakdown,
    })
}

/// Backpropagates `weight·H(z)` through separation logits built from
/// `anchor` (off-diagonal) and `other` (diagonal pairing). Returns the
/// contribution to `∂/∂s`.
#[allow(clippy::too_many_arguments)]
fn separation_backward(
    weight: f64,
    g: &Matrix,
    z: &SimilarityMatrix,
    distance: &SimilarityMatrix,
    s: f64,
    anchor: &EmbeddingBatch,
    other: &EmbeddingBatch,
    grad_anchor: &mut Matrix,
    grad_other: &mut Matrix,
) -> f64 {
    let b = anchor.rows();
    let dim = anchor.dim();
    let dscale = weight * g.as_slice().iter().zip(z.matrix().as_slice()).map(|(a, c)| a * c).sum::<f64>() / s;
    // Off-diagonal: z_ij = s·𝒟_ij·(a_i·a_j), so ∂/∂a = s·(W + Wᵀ)·A with W = g ⊙ 𝒟.
    let mut w = Matrix::zeros(b, b);
    for i in 0..b {
        for j in 0..b {
            if i != j {
                let v = weight * g.get(i, j) * distance.get(i, j);
                w.set(i, j, w.get(i, j) + v);
                w.set(j, i, w.get(j, i) + v);
            }
        }
    }
    gemm(b, b, dim, s, w.as_slice(), Trans::No, anchor.matrix().as_slice(), Trans::No, 1.0, grad_anchor.as_mut_slice());
    // Diagonal: z_ii = s·(a_i·o_i).
    for i in 0..b {
        let gi = weight * s * g.get(i, i);
        for k in 0..dim {
            let gi_o = gi * other.row(i)[k];
            let gi_a = gi * anchor.row(i)[k];
            grad_anchor.row_mut(i)[k] += gi_o;
            grad_other.row_mut(i)[k] += gi_a;
        }
    }
    dscale
}
