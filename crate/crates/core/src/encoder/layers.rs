//! Forward and backward kernels of the transformer building blocks.
//!
//! Activations are row-major `rows × width` slices where each sample of a
//! batch occupies `seq` consecutive rows.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{gemm, Trans};
use crate::math;

pub(crate) const LN_EPS: f64 = 1e-5;

/// `y = x·W + b` for `x: rows × fan_in`, `W: fan_in × fan_out`.
pub(crate) fn linear(x: &[f64], rows: usize, fan_in: usize, w: &[f64], b: Option<&[f64]>, fan_out: usize) -> Vec<f64> {
    let mut y = vec![0.0; rows * fan_out];
    if let Some(b) = b {
        for r in 0..rows {
            y[r * fan_out..(r + 1) * fan_out].copy_from_slice(b);
        }
        gemm(rows, fan_in, fan_out, 1.0, x, Trans::No, w, Trans::No, 1.0, &mut y);
    } else {
        gemm(rows, fan_in, fan_out, 1.0, x, Trans::No, w, Trans::No, 0.0, &mut y);
    }
    y
}

/// Backward of [`linear`]: accumulates `∂W`, `∂b` and returns `∂x`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn linear_backward(
    dy: &[f64],
    x: &[f64],
    rows: usize,
    fan_in: usize,
    w: &[f64],
    fan_out: usize,
    dw: &mut [f64],
    db: Option<&mut [f64]>,
    want_dx: bool,
) -> Vec<f64> {
    gemm(fan_in, rows, fan_out, 1.0, x, Trans::Yes, dy, Trans::No, 1.0, dw);
    if let Some(db) = db {
        for r in 0..rows {
            for (g, v) in db.iter_mut().zip(&dy[r * fan_out..(r + 1) * fan_out]) {
                *g += v;
            }
        }
    }
    if !want_dx {
        return Vec::new();
    }
    let mut dx = vec![0.0; rows * fan_in];
    gemm(rows, fan_out, fan_in, 1.0, dy, Trans::No, w, Trans::Yes, 0.0, &mut dx);
    dx
}

/// Layer-norm cache: normalized input and per-row reciprocal std.
pub(crate) struct NormCache {
    pub xhat: Vec<f64>,
    pub rstd: Vec<f64>,
}

pub(crate) fn layer_norm(x: &[f64], rows: usize, width: usize, gain: &[f64], bias: &[f64]) -> (Vec<f64>, NormCache) {
    let mut y = vec![0.0; rows * width];
    let mut xhat = vec![0.0; rows * width];
    let mut rstd = vec![0.0; rows];
    let inv_w = 1.0 / width as f64;
    for r in 0..rows {
        let row = &x[r * width..(r + 1) * width];
        let mean = row.iter().sum::<f64>() * inv_w;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() * inv_w;
        let rs = 1.0 / math::sqrt(var + LN_EPS);
        rstd[r] = rs;
        let xh = &mut xhat[r * width..(r + 1) * width];
        let yr = &mut y[r * width..(r + 1) * width];
        for k in 0..width {
            xh[k] = (row[k] - mean) * rs;
            yr[k] = xh[k] * gain[k] + bias[k];
        }
    }
    (y, NormCache { xhat, rstd })
}

pub(crate) fn layer_norm_backward(
    dy: &[f64],
    cache: &NormCache,
    rows: usize,
    width: usize,
    gain: &[f64],
    dgain: &mut [f64],
    dbias: &mut [f64],
) -> Vec<f64> {
    let mut dx = vec![0.0; rows * width];
    let inv_w = 1.0 / width as f64;
    let mut dxhat = vec![0.0; width];
    for r in 0..rows {
        let dyr = &dy[r * width..(r + 1) * width];
        let xh = &cache.xhat[r * width..(r + 1) * width];
        let mut mean_d = 0.0;
        let mut mean_dx = 0.0;
        for k in 0..width {
            dgain[k] += dyr[k] * xh[k];
            dbias[k] += dyr[k];
            dxhat[k] = dyr[k] * gain[k];
            mean_d += dxhat[k];
            mean_dx += dxhat[k] * xh[k];
        }
        mean_d *= inv_w;
        mean_dx *= inv_w;
        let rs = cache.rstd[r];
        let dxr = &mut dx[r * width..(r + 1) * width];
        for k in 0..width {
            dxr[k] = rs * (dxhat[k] - mean_d - xh[k] * mean_dx);
        }
    }
    dx
}

const INV_SQRT_2: f64 = core::f64::consts::FRAC_1_SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Exact GELU, `x·Φ(x)`.
pub(crate) fn gelu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| 0.5 * v * (1.0 + math::erf(v * INV_SQRT_2))).collect()
}

pub(crate) fn gelu_backward(dy: &[f64], x: &[f64]) -> Vec<f64> {
    dy.iter()
        .zip(x)
        .map(|(&g, &v)| {
            let cdf = 0.5 * (1.0 + math::erf(v * INV_SQRT_2));
            let pdf = INV_SQRT_2PI * math::exp(-0.5 * v * v);
            g * (cdf + v * pdf)
        })
        .collect()
}

/// Shape of a multi-head attention call.
#[derive(Clone, Copy)]
pub(crate) struct AttnShape {
    pub batch: usize,
    pub seq: usize,
    pub heads: usize,
    pub head_dim: usize,
}

impl AttnShape {
    fn width(&self) -> usize {
        self.heads * self.head_dim
    }
}

/// Scaled dot-product attention over packed `[q | k | v]` rows.
///
/// `valid[s·seq + j] == false` removes key `j` of sample `s` from every
/// softmax. Returns the concatenated head outputs and the probabilities
/// (`batch × heads × seq × seq`).
pub(crate) fn attention(qkv: &[f64], shape: AttnShape, valid: Option<&[bool]>) -> (Vec<f64>, Vec<f64>) {
    let AttnShape { batch, seq, heads, head_dim } = shape;
    let d = shape.width();
    let stride = 3 * d;
    let scale = 1.0 / math::sqrt(head_dim as f64);
    let mut ctx = vec![0.0; batch * seq * d];
    let mut probs = vec![0.0; batch * heads * seq * seq];
    let mut scores = vec![0.0; seq];
    for s in 0..batch {
        let base = s * seq;
        for h in 0..heads {
            let (qo, ko, vo) = (h * head_dim, d + h * head_dim, 2 * d + h * head_dim);
            for i in 0..seq {
                let qrow = &qkv[(base + i) * stride + qo..][..head_dim];
                let mut max = f64::NEG_INFINITY;
                for j in 0..seq {
                    if valid.is_some_and(|v| !v[base + j]) {
                        scores[j] = f64::NEG_INFINITY;
                        continue;
                    }
                    let krow = &qkv[(base + j) * stride + ko..][..head_dim];
                    let sc = qrow.iter().zip(krow).map(|(a, b)| a * b).sum::<f64>() * scale;
                    scores[j] = sc;
                    max = max.max(sc);
                }
                let p = &mut probs[((s * heads + h) * seq + i) * seq..][..seq];
                let mut sum = 0.0;
                for j in 0..seq {
                    let e = if scores[j] == f64::NEG_INFINITY { 0.0 } else { math::exp(scores[j] - max) };
                    p[j] = e;
                    sum += e;
                }
                let out = &mut ctx[(base + i) * d + h * head_dim..][..head_dim];
                for j in 0..seq {
                    p[j] /= sum;
                    if p[j] != 0.0 {
                        let vrow = &qkv[(base + j) * stride + vo..][..head_dim];
                        for (o, v) in out.iter_mut().zip(vrow) {
                            *o += p[j] * v;
                        }
                    }
                }
            }
        }
    }
    (ctx, probs)
}

pub(crate) fn attention_backward(dctx: &[f64], qkv: &[f64], probs: &[f64], shape: AttnShape) -> Vec<f64> {
    let AttnShape { batch, seq, heads, head_dim } = shape;
    let d = shape.width();
    let stride = 3 * d;
    let scale = 1.0 / math::sqrt(head_dim as f64);
    let mut dqkv = vec![0.0; batch * seq * stride];
    let mut dp = vec![0.0; seq];
    for s in 0..batch {
        let base = s * seq;
        for h in 0..heads {
            let (qo, ko, vo) = (h * head_dim, d + h * head_dim, 2 * d + h * head_dim);
            for i in 0..seq {
                let p = &probs[((s * heads + h) * seq + i) * seq..][..seq];
                let dout = &dctx[(base + i) * d + h * head_dim..][..head_dim];
                let mut weighted = 0.0;
                for j in 0..seq {
                    if p[j] == 0.0 {
                        dp[j] = 0.0;
                        continue;
                    }
                    let vrow = &qkv[(base + j) * stride + vo..][..head_dim];
                    dp[j] = dout.iter().zip(vrow).map(|(a, b)| a * b).sum();
                    weighted += p[j] * dp[j];
                    let dv = &mut dqkv[(base + j) * stride + vo..][..head_dim];
                    for (g, o) in dv.iter_mut().zip(dout) {
                        *g += p[j] * o;
                    }
                }
                for j in 0..seq {
                    if p[j] == 0.0 {
                        continue;
                    }
                    let ds = p[j] * (dp[j] - weighted) * scale;
                    for k in 0..head_dim {
                        let kv = qkv[(base + j) * stride + ko + k];
                        let qv = qkv[(base + i) * stride + qo + k];
                        dqkv[(base + i) * stride + qo + k] += ds * kv;
                        dqkv[(base + j) * stride + ko + k] += ds * qv;
                    }
                }
            }
        }
    }
    dqkv
}
