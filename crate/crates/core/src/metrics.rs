//! Geometry of a trained embedding space and the downstream evaluation
//! protocols: alignment, modality gap, positive-pair cosine distribution,
//! zero-shot classification, retrieval and a 3D sphere projection.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{Dataset, Split, SyntheticScene, NUM_CONCEPTS};
use crate::encoder::{encode_image, encode_text, Modality, SharedEncoderParams, TokenBatch};
use crate::error::{Error, Result};
use crate::geometry::{l2_normalize_rows, similarity, EmbeddingBatch};
use crate::linalg::{dot, gemm, Matrix, Trans};
use crate::math;

/// Retrieval cut-offs reported by default.
pub const DEFAULT_KS: [usize; 3] = [1, 5, 10];
/// Points in the default cosine CDF grid.
pub const DEFAULT_CDF_POINTS: usize = 41;

fn check_pairs(ev: &EmbeddingBatch, et: &EmbeddingBatch) -> Result<()> {
    if ev.rows() != et.rows() || ev.dim() != et.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} images vs {}x{} texts",
            ev.rows(),
            ev.dim(),
            et.rows(),
            et.dim()
        )));
    }
    Ok(())
}

/// Mean positive-pair cosine and the angle it corresponds to.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Alignment {
    pub score: f64,
    pub angle_deg: f64,
}

pub fn alignment_score(ev: &EmbeddingBatch, et: &EmbeddingBatch) -> Result<Alignment> {
    let cos = positive_cosines(ev, et)?;
    let score = cos.iter().sum::<f64>() / cos.len() as f64;
    Ok(Alignment {
        score,
        angle_deg: math::acos(score.clamp(-1.0, 1.0)).to_degrees(),
    })
}

/// `dot(ev[i], et[i])` for every row.
pub fn positive_cosines(ev: &EmbeddingBatch, et: &EmbeddingBatch) -> Result<Vec<f64>> {
    check_pairs(ev, et)?;
    Ok((0..ev.rows()).map(|i| dot(ev.row(i), et.row(i))).collect())
}

fn centroid(e: &EmbeddingBatch) -> Vec<f64> {
    let mut c = vec![0.0; e.dim()];
    for i in 0..e.rows() {
        for (a, v) in c.iter_mut().zip(e.row(i)) {
            *a += v;
        }
    }
    c.iter_mut().for_each(|a| *a /= e.rows() as f64);
    c
}

/// Euclidean distance between the two modality centroids.
pub fn modality_gap(ev: &EmbeddingBatch, et: &EmbeddingBatch) -> Result<f64> {
    if ev.dim() != et.dim() {
        return Err(Error::DimensionMismatch(format!("dims {} vs {}", ev.dim(), et.dim())));
    }
    let (a, b) = (centroid(ev), centroid(et));
    Ok(math::sqrt(a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum()))
}

/// `n` evenly spaced thresholds from −1 to 1 inclusive.
pub fn cdf_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![1.0],
        _ => (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Fraction of positive pairs whose cosine is at most each threshold.
/// Cosines are clamped to `[-1, 1]` first, so the `+1` threshold always
/// yields 1.
pub fn positive_cosine_cdf(ev: &EmbeddingBatch, et: &EmbeddingBatch, thresholds: &[f64]) -> Result<Vec<(f64, f64)>> {
    let mut cos = positive_cosines(ev, et)?;
    cos.iter_mut().for_each(|c| *c = c.clamp(-1.0, 1.0));
    Ok(cdf_of(&cos, thresholds))
}

pub fn cdf_of(values: &[f64], thresholds: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    thresholds
        .iter()
        .map(|&t| (t, sorted.partition_point(|&v| v <= t) as f64 / sorted.len().max(1) as f64))
        .collect()
}

pub fn median(values: &[f64]) -> f64 {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => s[n / 2],
        _ => 0.5 * (s[n / 2 - 1] + s[n / 2]),
    }
}

/// Zero-based rank of `scores[truth]`; equal scores at lower indices rank first.
fn rank_of(scores: &[f64], truth: usize) -> usize {
    let t = scores[truth];
    scores
        .iter()
        .enumerate()
        .filter(|&(j, &s)| s > t || (s == t && j < truth))
        .count()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZeroShot {
    pub top1: f64,
    pub top5: f64,
}

/// Normalized mean of each class's caption embeddings.
pub fn class_embeddings(captions: &[EmbeddingBatch]) -> Result<EmbeddingBatch> {
    if captions.is_empty() {
        return Err(Error::EmptyClassSet);
    }
    let d = captions[0].dim();
    let mut m = Matrix::zeros(captions.len(), d);
    for (c, set) in captions.iter().enumerate() {
        if set.rows() == 0 {
            return Err(Error::EmptyClassSet);
        }
        if set.dim() != d {
            return Err(Error::DimensionMismatch(format!("class {c} has dim {}, expected {d}", set.dim())));
        }
        for i in 0..set.rows() {
            for (a, v) in m.row_mut(c).iter_mut().zip(set.row(i)) {
                *a += v / set.rows() as f64;
            }
        }
    }
    l2_normalize_rows(&m)
}

/// Nearest-class prediction by cosine. With fewer than five classes top-5
/// degrades to top-C.
pub fn zero_shot_from_embeddings(images: &EmbeddingBatch, labels: &[usize], classes: &EmbeddingBatch) -> Result<ZeroShot> {
    if classes.rows() == 0 {
        return Err(Error::EmptyClassSet);
    }
    if images.rows() != labels.len() || images.dim() != classes.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{} images with {} labels, dims {} vs {}",
            images.rows(),
            labels.len(),
            images.dim(),
            classes.dim()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes.rows()) {
        return Err(Error::DimensionMismatch(format!("label {bad} outside {} classes", classes.rows())));
    }
    let scores = images.matrix().matmul_transposed(classes.matrix())?;
    let k5 = classes.rows().min(5);
    let (mut top1, mut top5) = (0usize, 0usize);
    for (i, &l) in labels.iter().enumerate() {
        let r = rank_of(scores.row(i), l);
        top1 += usize::from(r == 0);
        top5 += usize::from(r < k5);
    }
    let n = labels.len().max(1) as f64;
    Ok(ZeroShot {
        top1: top1 as f64 / n,
        top5: top5 as f64 / n,
    })
}

/// Encodes images and class captions, then classifies.
pub fn zero_shot_classify(
    params: &SharedEncoderParams,
    images: &crate::encoder::ImageBatch,
    labels: &[usize],
    class_captions: &[TokenBatch],
) -> Result<ZeroShot> {
    if class_captions.is_empty() {
        return Err(Error::EmptyClassSet);
    }
    let ev = encode_image(images, params)?;
    let sets = class_captions
        .iter()
        .map(|t| if t.is_empty() { Err(Error::EmptyClassSet) } else { encode_text(t, params) })
        .collect::<Result<Vec<_>>>()?;
    zero_shot_from_embeddings(&ev, labels, &class_embeddings(&sets)?)
}

/// Recall@k in both retrieval directions.
#[derive(Clone, Debug, PartialEq)]
pub struct RecallAtK {
    pub ks: Vec<usize>,
    pub image_to_text: Vec<f64>,
    pub text_to_image: Vec<f64>,
}

impl RecallAtK {
    pub fn get(&self, k: usize, dir: Modality) -> Option<f64> {
        let i = self.ks.iter().position(|&x| x == k)?;
        Some(match dir {
            Modality::Image => self.image_to_text[i],
            Modality::Text => self.text_to_image[i],
        })
    }
}

/// Rows of `ev` and `et` are pairs; every other row is a distractor.
pub fn retrieval_recall(ev: &EmbeddingBatch, et: &EmbeddingBatch, ks: &[usize]) -> Result<RecallAtK> {
    check_pairs(ev, et)?;
    let b = ev.rows();
    let max_k = ks.iter().copied().max().unwrap_or(0);
    if b <= max_k {
        return Err(Error::BatchTooSmall { got: b, min: max_k + 1 });
    }
    let sim = similarity(ev, et)?;
    let simt = sim.transpose();
    let recall = |m: &Matrix| {
        let ranks: Vec<usize> = (0..b).map(|i| rank_of(m.row(i), i)).collect();
        ks.iter()
            .map(|&k| ranks.iter().filter(|&&r| r < k).count() as f64 / b as f64)
            .collect::<Vec<_>>()
    };
    Ok(RecallAtK {
        ks: ks.to_vec(),
        image_to_text: recall(sim.matrix()),
        text_to_image: recall(simt.matrix()),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectedPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub modality: Modality,
}

const RANK_TOLERANCE: f64 = 1e-9;
const MAX_POWER_ITERS: usize = 5000;

/// Joint PCA of both modalities to three components, each point then pushed
/// onto the unit sphere. The principal subspace comes from orthogonal
/// iteration started at seeded Gaussian vectors.
pub fn sphere_projection(ev: &EmbeddingBatch, et: &EmbeddingBatch, seed: u64) -> Result<Vec<ProjectedPoint>> {
    if ev.dim() != et.dim() {
        return Err(Error::DimensionMismatch(format!("dims {} vs {}", ev.dim(), et.dim())));
    }
    let n = ev.rows() + et.rows();
    let d = ev.dim();
    if n < 3 || d < 3 {
        return Err(Error::DegenerateRank { rank: n.min(d).saturating_sub(1).min(2) });
    }
    let mut x = Matrix::zeros(n, d);
    for i in 0..n {
        let src = if i < ev.rows() { ev.row(i) } else { et.row(i - ev.rows()) };
        x.row_mut(i).copy_from_slice(src);
    }
    let mean: Vec<f64> = (0..d).map(|j| (0..n).map(|i| x.get(i, j)).sum::<f64>() / n as f64).collect();
    for i in 0..n {
        for (v, m) in x.row_mut(i).iter_mut().zip(&mean) {
            *v -= m;
        }
    }
    let mut cov = Matrix::zeros(d, d);
    gemm(d, n, d, 1.0 / n as f64, x.as_slice(), Trans::Yes, x.as_slice(), Trans::No, 0.0, cov.as_mut_slice());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = Matrix::zeros(3, d);
    for v in q.as_mut_slice() {
        *v = StandardNormal.sample(&mut rng);
    }
    let scale = cov.as_slice().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if scale == 0.0 {
        return Err(Error::DegenerateRank { rank: 0 });
    }
    orthonormalize(&mut q, f64::MIN_POSITIVE).map_err(|rank| Error::DegenerateRank { rank })?;
    for _ in 0..MAX_POWER_ITERS {
        // Rows of q are the current basis; z = q·C.
        let mut z = q.matmul(&cov)?;
        orthonormalize(&mut z, RANK_TOLERANCE * scale).map_err(|rank| Error::DegenerateRank { rank })?;
        let change = z.as_slice().iter().zip(q.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        q = z;
        if change < 1e-13 {
            break;
        }
    }
    let coords = x.matmul_transposed(&q)?;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let r = coords.row(i);
        let norm = math::sqrt(dot(r, r));
        if norm <= crate::geometry::MIN_ROW_NORM {
            return Err(Error::ZeroRow { row: i, norm });
        }
        out.push(ProjectedPoint {
            x: r[0] / norm,
            y: r[1] / norm,
            z: r[2] / norm,
            modality: if i < ev.rows() { Modality::Image } else { Modality::Text },
        });
    }
    Ok(out)
}

/// Gram–Schmidt on the rows; `Err(rank)` when a row collapses below `tol`.
fn orthonormalize(m: &mut Matrix, tol: f64) -> core::result::Result<(), usize> {
    let cols = m.cols();
    for i in 0..m.rows() {
        let (head, tail) = m.as_mut_slice().split_at_mut(i * cols);
        let row = &mut tail[..cols];
        for prev in head.chunks_exact(cols) {
            let p = dot(prev, row);
            row.iter_mut().zip(prev).for_each(|(r, q)| *r -= p * q);
        }
        let norm = math::sqrt(dot(row, row));
        if norm <= tol {
            return Err(i);
        }
        row.iter_mut().for_each(|v| *v /= norm);
    }
    Ok(())
}

/// Identifies what a report was computed from.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Provenance {
    pub model: String,
    pub dataset: String,
    pub seed: u64,
    pub split: String,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricsReport {
    pub provenance: Provenance,
    pub samples: usize,
    pub alignment: f64,
    pub mean_angle_deg: f64,
    /// Centroid distance between the modalities.
    pub gap_norm: f64,
    pub median_positive_cosine: f64,
    pub cdf: Vec<(f64, f64)>,
    pub zeroshot_top1: f64,
    pub zeroshot_top5: f64,
    pub recall_ks: Vec<usize>,
    pub recall_image_to_text: Vec<f64>,
    pub recall_text_to_image: Vec<f64>,
}

impl MetricsReport {
    pub fn validate(&self) -> Result<()> {
        let p = &self.provenance;
        if p.model.trim().is_empty() || p.dataset.trim().is_empty() || p.split.trim().is_empty() {
            return Err(Error::InvalidConfig("report provenance needs model, dataset and split tags".into()));
        }
        let monotone = |v: &[f64]| v.windows(2).all(|w| w[0] <= w[1]);
        let fr: Vec<f64> = self.cdf.iter().map(|c| c.1).collect();
        if !monotone(&fr) || !monotone(&self.recall_image_to_text) || !monotone(&self.recall_text_to_image) {
            return Err(Error::InvalidConfig("report cdf and recall columns must be non-decreasing".into()));
        }
        Ok(())
    }
}

/// Rows encoded in this many samples at a time.
pub const EVAL_CHUNK: usize = 256;

/// Image and text embeddings of `rows`, encoded in chunks.
pub fn embed_rows(params: &SharedEncoderParams, dataset: &Dataset, rows: &[usize]) -> Result<(EmbeddingBatch, EmbeddingBatch)> {
    let d = params.config().proj_dim;
    let mut ev = Matrix::zeros(rows.len(), d);
    let mut et = Matrix::zeros(rows.len(), d);
    for (c, chunk) in rows.chunks(EVAL_CHUNK).enumerate() {
        let i = encode_image(&dataset.image_batch(chunk)?, params)?;
        let t = encode_text(&dataset.token_batch(chunk, params.config().max_seq_len)?, params)?;
        let off = c * EVAL_CHUNK * d;
        ev.as_mut_slice()[off..off + chunk.len() * d].copy_from_slice(i.matrix().as_slice());
        et.as_mut_slice()[off..off + chunk.len() * d].copy_from_slice(t.matrix().as_slice());
    }
    Ok((EmbeddingBatch::from_normalized_unchecked(ev), EmbeddingBatch::from_normalized_unchecked(et)))
}

/// One prompt per concept, mentioning every attribute.
pub fn concept_captions(dataset: &Dataset) -> Vec<Vec<u32>> {
    (0..NUM_CONCEPTS)
        .map(|c| dataset.config.vocab.caption(&SyntheticScene::from_concept(c), [true; 4]))
        .collect()
}

/// Every metric on one split.
pub fn evaluate(params: &SharedEncoderParams, dataset: &Dataset, split: Split, provenance: Provenance) -> Result<MetricsReport> {
    let rows = dataset.split_indices(split);
    if rows.is_empty() {
        return Err(Error::BatchTooSmall { got: 0, min: 1 });
    }
    let (ev, et) = embed_rows(params, dataset, &rows)?;
    let al = alignment_score(&ev, &et)?;
    let cos = positive_cosines(&ev, &et)?;
    let cdf = positive_cosine_cdf(&ev, &et, &cdf_grid(DEFAULT_CDF_POINTS))?;
    let seq_len = params.config().max_seq_len;
    let prompts = concept_captions(dataset);
    let mut cm = Matrix::zeros(NUM_CONCEPTS, params.config().proj_dim);
    for (c, chunk) in prompts.chunks(EVAL_CHUNK).enumerate() {
        let e = encode_text(&TokenBatch::from_sequences(chunk, seq_len)?, params)?;
        let off = c * EVAL_CHUNK * e.dim();
        cm.as_mut_slice()[off..off + e.matrix().as_slice().len()].copy_from_slice(e.matrix().as_slice());
    }
    let labels: Vec<usize> = rows.iter().map(|&i| dataset.scenes[i].concept()).collect();
    let zs = zero_shot_from_embeddings(&ev, &labels, &EmbeddingBatch::from_normalized_unchecked(cm))?;
    let ks: Vec<usize> = DEFAULT_KS.iter().copied().filter(|&k| k < rows.len()).collect();
    let rec = retrieval_recall(&ev, &et, &ks)?;
    Ok(MetricsReport {
        provenance,
        samples: rows.len(),
        alignment: al.score,
        mean_angle_deg: al.angle_deg,
        gap_norm: modality_gap(&ev, &et)?,
        median_positive_cosine: median(&cos),
        cdf,
        zeroshot_top1: zs.top1,
        zeroshot_top5: zs.top5,
        recall_ks: rec.ks,
        recall_image_to_text: rec.image_to_text,
        recall_text_to_image: rec.text_to_image,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch(rows: &[&[f64]]) -> EmbeddingBatch {
        l2_normalize_rows(&Matrix::from_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn alignment_anchors() {
        let e = batch(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let a = alignment_score(&e, &e).unwrap();
        assert!((a.score - 1.0).abs() < 1e-12 && a.angle_deg.abs() < 1e-6);
        let o = batch(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let a = alignment_score(&e, &o).unwrap();
        assert!(a.score.abs() < 1e-12 && (a.angle_deg - 90.0).abs() < 1e-9);
    }

    #[test]
    fn antipodal_gap_is_two() {
        let u = batch(&[&[0.6, 0.8], &[0.6, 0.8]]);
        let v = batch(&[&[-0.6, -0.8], &[-0.6, -0.8]]);
        assert!((modality_gap(&u, &v).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(modality_gap(&u, &u).unwrap(), 0.0);
    }

    #[test]
    fn cdf_counts() {
        let c = cdf_of(&[0.1, 0.3, 0.5, 0.7], &[0.4, 1.0, -1.0]);
        assert_eq!(c, vec![(0.4, 0.5), (1.0, 1.0), (-1.0, 0.0)]);
        let e = batch(&[&[1.0, 2.0], &[3.0, -1.0]]);
        let grid = cdf_grid(5);
        let c = positive_cosine_cdf(&e, &e, &grid).unwrap();
        assert_eq!(c.iter().map(|p| p.1).collect::<Vec<_>>(), vec![0.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn zero_shot_single_class_and_exact_match() {
        let imgs = batch(&[&[1.0, 0.0], &[0.3, 0.2]]);
        let one = batch(&[&[0.0, 1.0]]);
        let z = zero_shot_from_embeddings(&imgs, &[0, 0], &one).unwrap();
        assert_eq!((z.top1, z.top5), (1.0, 1.0));
        let classes = batch(&[&[1.0, 0.0], &[0.0, 1.0], &[-1.0, 0.0]]);
        let z = zero_shot_from_embeddings(&batch(&[&[0.0, 1.0], &[-1.0, 0.0]]), &[1, 2], &classes).unwrap();
        assert_eq!(z.top1, 1.0);
        assert!(matches!(class_embeddings(&[]), Err(Error::EmptyClassSet)));
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let classes = batch(&[&[1.0, 0.0], &[1.0, 0.0]]);
        let img = batch(&[&[1.0, 0.0]]);
        assert_eq!(zero_shot_from_embeddings(&img, &[0], &classes).unwrap().top1, 1.0);
        assert_eq!(zero_shot_from_embeddings(&img, &[1], &classes).unwrap().top1, 0.0);
    }

    #[test]
    fn retrieval_identity_and_errors() {
        let rows: Vec<Vec<f64>> = (0..12).map(|i| (0..12).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        let e = EmbeddingBatch::from_rows(&rows).unwrap();
        let r = retrieval_recall(&e, &e, &DEFAULT_KS).unwrap();
        assert_eq!(r.image_to_text, vec![1.0; 3]);
        assert_eq!(r.text_to_image, vec![1.0; 3]);
        let small = e.select(&[0, 1, 2]);
        assert!(matches!(retrieval_recall(&small, &small, &DEFAULT_KS), Err(Error::BatchTooSmall { .. })));
    }

    #[test]
    fn projection_is_on_the_sphere() {
        let e = batch(&[&[1.0, 0.1, 0.0, 0.3], &[0.2, 1.0, 0.1, 0.0], &[0.0, 0.3, 1.0, 0.2]]);
        let t = batch(&[&[-1.0, 0.2, 0.1, 0.0], &[0.1, -1.0, 0.0, 0.4], &[0.3, 0.0, -1.0, 0.1]]);
        let pts = sphere_projection(&e, &t, 7).unwrap();
        assert_eq!(pts.len(), 6);
        for p in &pts {
            assert!(((p.x * p.x + p.y * p.y + p.z * p.z).sqrt() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn rank_two_input_is_degenerate() {
        let e = batch(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.6, 0.8, 0.0]]);
        let t = batch(&[&[-1.0, 0.0, 0.0], &[0.0, -1.0, 0.0], &[0.8, 0.6, 0.0]]);
        assert!(matches!(sphere_projection(&e, &t, 0), Err(Error::DegenerateRank { .. })));
    }
}
