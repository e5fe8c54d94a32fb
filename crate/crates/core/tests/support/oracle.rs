//! Scalar-loop reference implementations of every loss term.

#![allow(dead_code)]

pub type Rows = Vec<Vec<f64>>;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..a.len() {
        s += a[k] * b[k];
    }
    s
}

pub fn normalize(rows: &Rows) -> Rows {
    rows.iter()
        .map(|r| {
            let n = dot(r, r).sqrt();
            r.iter().map(|v| v / n).collect()
        })
        .collect()
}

pub fn gram(a: &Rows, b: &Rows) -> Rows {
    let mut out = vec![vec![0.0; b.len()]; a.len()];
    for i in 0..a.len() {
        for j in 0..b.len() {
            out[i][j] = dot(&a[i], &b[j]);
        }
    }
    out
}

pub fn transpose(m: &Rows) -> Rows {
    let mut out = vec![vec![0.0; m.len()]; m[0].len()];
    for i in 0..m.len() {
        for j in 0..m[0].len() {
            out[j][i] = m[i][j];
        }
    }
    out
}

/// Mean over rows of `-log softmax(row)[i]`, with the label on the diagonal.
pub fn cross_entropy(logits: &Rows) -> f64 {
    let b = logits.len();
    let mut total = 0.0;
    for i in 0..b {
        let mut sum = 0.0;
        for j in 0..b {
            sum += logits[i][j].exp();
        }
        total += sum.ln() - logits[i][i];
    }
    total / b as f64
}

pub fn clip_logits(ev: &Rows, et: &Rows, s: f64) -> (Rows, Rows) {
    let v: Rows = gram(ev, et).into_iter().map(|r| r.into_iter().map(|x| s * x).collect()).collect();
    let t = transpose(&v);
    (v, t)
}

pub fn clip_loss(ev: &Rows, et: &Rows, s: f64) -> f64 {
    let (v, t) = clip_logits(ev, et, s);
    0.5 * (cross_entropy(&v) + cross_entropy(&t))
}

pub fn crsep_loss(ev: &Rows, et: &Rows, s: f64) -> f64 {
    let (v, t) = clip_logits(ev, et, s);
    cross_entropy(&v) + cross_entropy(&t)
}

/// Cosine similarity and distance of the semantic rows.
pub fn semantic(es: &Rows) -> (Rows, Rows) {
    let b = es.len();
    let mut sim = vec![vec![0.0; b]; b];
    let mut dist = vec![vec![0.0; b]; b];
    for i in 0..b {
        for j in 0..b {
            let c = if i == j {
                1.0
            } else {
                dot(&es[i], &es[j]) / (dot(&es[i], &es[i]).sqrt() * dot(&es[j], &es[j]).sqrt())
            };
            sim[i][j] = c;
            dist[i][j] = 1.0 - c;
        }
    }
    (sim, dist)
}

pub fn rescaled(same: &Rows, dist: &Rows) -> Rows {
    let b = same.len();
    let mut out = vec![vec![0.0; b]; b];
    for i in 0..b {
        for j in 0..b {
            out[i][j] = same[i][j] * dist[i][j];
        }
    }
    out
}

/// Logits with the paired similarity on the diagonal and re-scaled
/// same-modality similarities elsewhere.
pub fn sep_logits(anchor: &Rows, other: &Rows, es: &Rows, s: f64, rescale: bool) -> Rows {
    let b = anchor.len();
    let (_, dist) = semantic(es);
    let mut z = vec![vec![0.0; b]; b];
    for i in 0..b {
        for j in 0..b {
            z[i][j] = if i == j {
                s * dot(&anchor[i], &other[i])
            } else {
                let w = if rescale { dist[i][j] } else { 1.0 };
                s * dot(&anchor[i], &anchor[j]) * w
            };
        }
    }
    z
}

pub fn vsep_loss(ev: &Rows, et: &Rows, es: &Rows, s: f64, rescale: bool) -> f64 {
    cross_entropy(&sep_logits(ev, et, es, s, rescale))
}

pub fn tsep_loss(ev: &Rows, et: &Rows, es: &Rows, s: f64, rescale: bool) -> f64 {
    cross_entropy(&sep_logits(et, ev, es, s, rescale))
}

pub fn total(ev: &Rows, et: &Rows, es: &Rows, s: f64, alpha: f64, beta: f64, image: bool, text: bool, rescale: bool) -> f64 {
    let mut sep = 0.0;
    if image {
        sep += vsep_loss(ev, et, es, s, rescale);
    }
    if text {
        sep += tsep_loss(ev, et, es, s, rescale);
    }
    alpha * crsep_loss(ev, et, s) + beta * sep
}

/// Mean cosine of paired rows.
pub fn alignment(ev: &Rows, et: &Rows) -> f64 {
    let mut s = 0.0;
    for i in 0..ev.len() {
        s += dot(&ev[i], &et[i]) / (dot(&ev[i], &ev[i]).sqrt() * dot(&et[i], &et[i]).sqrt());
    }
    s / ev.len() as f64
}
