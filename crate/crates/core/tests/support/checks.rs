//! Measurements behind the loss and gradient tests; each returns the worst
//! error it saw.

#![allow(dead_code)]

use alignclip_core::encoder::{
    encode_image, encode_text, encoder_gradients, init_params, ImageBatch, PairedInputs, Sharing, SharedEncoderConfig,
    SharedEncoderParams, TokenBatch,
};
use alignclip_core::geometry::similarity;
use alignclip_core::metrics::alignment_score;
use alignclip_core::objectives::{
    clip_logits, clip_loss, crsep_loss, imsep_loss, loss_gradients, rescale, semantic_distance, total_loss, tsep_logits,
    tsep_loss, vsep_logits, LossConfig, PairedBatch, SeparationMode, Temperature,
};
use alignclip_core::{EmbeddingBatch, Matrix, SimilarityMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::oracle::{self, Rows};

pub fn gaussian_rows(rng: &mut ChaCha8Rng, b: usize, d: usize) -> Rows {
    (0..b).map(|_| (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()).collect()
}

pub fn unit_rows(rng: &mut ChaCha8Rng, b: usize, d: usize) -> Rows {
    oracle::normalize(&gaussian_rows(rng, b, d))
}

pub fn batch(rows: &Rows) -> EmbeddingBatch {
    EmbeddingBatch::from_rows(rows).unwrap()
}

pub fn to_rows(m: &Matrix) -> Rows {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

fn max_diff(a: &SimilarityMatrix, b: &Rows) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, row) in b.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            worst = worst.max((a.get(i, j) - v).abs());
        }
    }
    worst
}

pub fn all_loss_configs() -> Vec<LossConfig> {
    let mut out = Vec::new();
    for mode in SeparationMode::ALL {
        for rescaling_enabled in [true, false] {
            let beta = if mode == SeparationMode::None { 0.0 } else { 0.5 };
            out.push(LossConfig {
                alpha: 1.0,
                beta,
                separation_mode: mode,
                rescaling_enabled,
            });
        }
    }
    out
}

/// Largest absolute gap between the library and the scalar oracle over
/// `batches` random batches with `b ∈ {2,3}` and `d ∈ {2,8}`.
pub fn oracle_max_error(batches: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut track = |e: f64| {
        assert!(e.is_finite());
        worst = worst.max(e);
    };
    for n in 0..batches {
        let b = [2, 3][n % 2];
        let d = [2, 8][(n / 2) % 2];
        let (ev, et) = (unit_rows(&mut rng, b, d), unit_rows(&mut rng, b, d));
        let sd = rng.random_range(2..6);
        let es = gaussian_rows(&mut rng, b, sd);
        let t = rng.random_range(-1.0..5.0);
        let s = f64::exp(t).min(100.0);
        let temp = Temperature::from_log_scale(t);
        let (bv, bt, bs) = (batch(&ev), batch(&et), batch(&es));

        let (lv, lt) = clip_logits(&bv, &bt, temp).unwrap();
        let (ov, ot) = oracle::clip_logits(&ev, &et, s);
        track(max_diff(&lv, &ov));
        track(max_diff(&lt, &ot));
        track((clip_loss(&bv, &bt, temp).unwrap() - oracle::clip_loss(&ev, &et, s)).abs());
        track((crsep_loss(&bv, &bt, temp).unwrap() - oracle::crsep_loss(&ev, &et, s)).abs());

        let (sim, dist) = semantic_distance(&bs).unwrap();
        let (osim, odist) = oracle::semantic(&es);
        track(max_diff(&sim, &osim));
        track(max_diff(&dist, &odist));
        let vv = similarity(&bv, &bv).unwrap();
        track(max_diff(&vv, &oracle::gram(&ev, &ev)));
        let vd = rescale(&vv, &dist).unwrap();
        track(max_diff(&vd, &oracle::rescaled(&oracle::gram(&ev, &ev), &odist)));

        for r in [true, false] {
            let zv = vsep_logits(&bv, &bt, &dist, temp, r).unwrap();
            track(max_diff(&zv, &oracle::sep_logits(&ev, &et, &es, s, r)));
            let zt = tsep_logits(&bv, &bt, &dist, temp, r).unwrap();
            track(max_diff(&zt, &oracle::sep_logits(&et, &ev, &es, s, r)));
            track((imsep_loss(&bv, &bt, &bs, temp, r).unwrap() - oracle::vsep_loss(&ev, &et, &es, s, r)).abs());
            track((tsep_loss(&bv, &bt, &bs, temp, r).unwrap() - oracle::tsep_loss(&ev, &et, &es, s, r)).abs());
        }

        let pb = PairedBatch::new(bv.clone(), bt.clone(), bs.clone()).unwrap();
        for cfg in all_loss_configs() {
            let got = total_loss(&pb, temp, &cfg).unwrap();
            let m = cfg.separation_mode;
            let want = oracle::total(
                &ev,
                &et,
                &es,
                s,
                cfg.alpha,
                cfg.beta,
                m.separates_images(),
                m.separates_texts(),
                cfg.rescaling_enabled,
            );
            track((got.total - want).abs());
            track((got.clip - oracle::clip_loss(&ev, &et, s)).abs());
        }
        track((alignment_score(&bv, &bt).unwrap().score - oracle::alignment(&ev, &et)).abs());
    }
    worst
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Worst relative error of the batch-level gradients (embeddings and the
/// log scale) against central differences, across every loss variant.
pub fn loss_gradient_max_rel_err(h: f64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for cfg in all_loss_configs() {
        for b in [2, 4] {
            let d = 5;
            let ev = unit_rows(&mut rng, b, d);
            let et = unit_rows(&mut rng, b, d);
            let es = gaussian_rows(&mut rng, b, 4);
            let t = rng.random_range(0.5..2.5);
            let eval = |ev: &Rows, et: &Rows, t: f64| {
                let pb = PairedBatch::new(batch(ev), batch(et), batch(&es)).unwrap();
                total_loss(&pb, Temperature::from_log_scale(t), &cfg).unwrap().total
            };
            let pb = PairedBatch::new(batch(&ev), batch(&et), batch(&es)).unwrap();
            let g = loss_gradients(&pb, Temperature::from_log_scale(t), &cfg).unwrap();
            let (gi, gt) = (to_rows(&g.image), to_rows(&g.text));
            for i in 0..b {
                for k in 0..d {
                    let fd = |which: usize| {
                        let (mut p, mut m) = (
                            [ev.clone(), et.clone()],
                            [ev.clone(), et.clone()],
                        );
                        p[which][i][k] += h;
                        m[which][i][k] -= h;
                        (eval(&p[0], &p[1], t) - eval(&m[0], &m[1], t)) / (2.0 * h)
                    };
                    worst = worst.max(rel_err(fd(0), gi[i][k]));
                    worst = worst.max(rel_err(fd(1), gt[i][k]));
                }
            }
            let fd_t = (eval(&ev, &et, t + h) - eval(&ev, &et, t - h)) / (2.0 * h);
            worst = worst.max(rel_err(fd_t, g.log_scale));
        }
    }
    worst
}

pub fn small_encoder(sharing: Sharing) -> SharedEncoderConfig {
    SharedEncoderConfig {
        layers: 2,
        heads: 2,
        model_dim: 16,
        proj_dim: 8,
        image_size: 8,
        patch_size: 4,
        vocab_size: 16,
        max_seq_len: 6,
        sharing,
    }
}

pub fn random_inputs(cfg: &SharedEncoderConfig, b: usize, seed: u64) -> PairedInputs {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = cfg.image_size * cfg.image_size;
    let pixels = (0..b * n).map(|_| rng.random::<f64>()).collect();
    let images = ImageBatch::new(b, cfg.image_size, pixels).unwrap();
    let seqs: Vec<Vec<u32>> = (0..b)
        .map(|_| {
            let len = rng.random_range(1..=cfg.max_seq_len);
            (0..len).map(|_| rng.random_range(1..cfg.vocab_size as u32)).collect()
        })
        .collect();
    let tokens = TokenBatch::from_sequences(&seqs, cfg.max_seq_len).unwrap();
    let sem: Vec<Vec<f64>> = (0..b).map(|_| (0..5).map(|_| rng.random::<f64>() + 0.05).collect()).collect();
    PairedInputs {
        images,
        tokens,
        semantic: batch(&sem),
    }
}

/// Parameters moved away from the near-zero init so every path carries signal.
pub fn spread_params(cfg: &SharedEncoderConfig, seed: u64) -> SharedEncoderParams {
    let mut p = init_params(cfg, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
    let scale_id = p.logit_scale_id();
    for id in 0..p.num_tensors() {
        if id != scale_id {
            for v in p.tensor_mut(id) {
                *v += rng.random_range(-0.3..0.3);
            }
        }
    }
    p.set_log_scale(1.2);
    p
}

fn encoder_loss(p: &SharedEncoderParams, inputs: &PairedInputs, cfg: &LossConfig) -> f64 {
    let ev = encode_image(&inputs.images, p).unwrap();
    let et = encode_text(&inputs.tokens, p).unwrap();
    let pb = PairedBatch::new(ev, et, inputs.semantic.clone()).unwrap();
    total_loss(&pb, p.temperature(), cfg).unwrap().total
}

/// Worst relative error over `samples` randomly chosen encoder parameters
/// per loss variant and sharing mode.
pub fn encoder_gradient_max_rel_err(samples: usize, h: f64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for sharing in [Sharing::Shared, Sharing::Unshared] {
        let ecfg = small_encoder(sharing);
        let p = spread_params(&ecfg, seed);
        let inputs = random_inputs(&ecfg, 4, seed + 1);
        for cfg in all_loss_configs() {
            let g = encoder_gradients(&inputs, &p, &cfg).unwrap().grads;
            for _ in 0..samples {
                let id = rng.random_range(0..p.num_tensors());
                let k = rng.random_range(0..p.tensor(id).len());
                let mut q = p.clone();
                q.tensor_mut(id)[k] += h;
                let up = encoder_loss(&q, &inputs, &cfg);
                q.tensor_mut(id)[k] -= 2.0 * h;
                let down = encoder_loss(&q, &inputs, &cfg);
                worst = worst.max(rel_err((up - down) / (2.0 * h), g.tensor(id)[k]));
            }
        }
    }
    worst
}

/// Results of the closed-form loss identities.
pub struct Anchors {
    /// `|clip_loss − ln b|` with identical rows.
    pub uniform_rows: f64,
    /// Largest off-diagonal separation logit with `𝒟 = 0`.
    pub zero_distance_offdiag: f64,
    /// `|imsep(rescaled) − imsep(plain)|` with orthogonal semantic rows.
    pub orthogonal_neutrality: f64,
    /// `|crsep − 2·clip|`.
    pub crsep_twice_clip: f64,
}

pub fn anchors(seed: u64) -> Anchors {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Anchors {
        uniform_rows: 0.0,
        zero_distance_offdiag: 0.0,
        orthogonal_neutrality: 0.0,
        crsep_twice_clip: 0.0,
    };
    for b in 2..=8 {
        let d = 8;
        let temp = Temperature::from_log_scale(rng.random_range(0.0..4.0));
        let v = unit_rows(&mut rng, 1, d).remove(0);
        let w = unit_rows(&mut rng, 1, d).remove(0);
        let same_v = batch(&vec![v; b]);
        let same_t = batch(&vec![w; b]);
        let l = clip_loss(&same_v, &same_t, temp).unwrap();
        out.uniform_rows = out.uniform_rows.max((l - (b as f64).ln()).abs());

        let ev = batch(&unit_rows(&mut rng, b, d));
        let et = batch(&unit_rows(&mut rng, b, d));
        let dist = SimilarityMatrix(Matrix::zeros(b, b));
        for z in [
            vsep_logits(&ev, &et, &dist, temp, true).unwrap(),
            tsep_logits(&ev, &et, &dist, temp, true).unwrap(),
        ] {
            for i in 0..b {
                for j in 0..b {
                    if i != j {
                        out.zero_distance_offdiag = out.zero_distance_offdiag.max(z.get(i, j).abs());
                    }
                }
            }
        }

        let mut ortho = vec![vec![0.0; b]; b];
        for (i, row) in ortho.iter_mut().enumerate() {
            row[i] = rng.random_range(0.5..3.0);
        }
        let es = batch(&ortho);
        for f in [imsep_loss, tsep_loss] {
            let a = f(&ev, &et, &es, temp, true).unwrap();
            let c = f(&ev, &et, &es, temp, false).unwrap();
            out.orthogonal_neutrality = out.orthogonal_neutrality.max((a - c).abs());
        }

        let c = clip_loss(&ev, &et, temp).unwrap();
        let cr = crsep_loss(&ev, &et, temp).unwrap();
        out.crsep_twice_clip = out.crsep_twice_clip.max((cr - 2.0 * c).abs());
    }
    out
}
