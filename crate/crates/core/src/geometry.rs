//! Batch-level vector and matrix kernels shared by the objectives and metrics.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::math;

/// Rows whose norm is at or below this are treated as degenerate.
pub const MIN_ROW_NORM: f64 = 1e-12;

/// A `b × d` batch of embeddings, one sample per row.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingBatch {
    values: Matrix,
    normalized: bool,
}

impl EmbeddingBatch {
    /// Wraps raw rows without normalizing them.
    pub fn new(values: Matrix) -> Result<Self> {
        if values.rows() == 0 || values.cols() == 0 {
            return Err(Error::ShapeMismatch(format!(
                "embedding batch must be non-empty, got {}x{}",
                values.rows(),
                values.cols()
            )));
        }
        if !values.is_finite() {
            return Err(Error::NonFinite("embedding batch".into()));
        }
        Ok(Self {
            values,
            normalized: false,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    #[inline]
    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        self.values.row(i)
    }

    #[inline]
    pub fn matrix(&self) -> &Matrix {
        &self.values
    }

    pub fn into_matrix(self) -> Matrix {
        self.values
    }

    /// Rows picked by `indices`, keeping the normalized flag.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut m = Matrix::zeros(indices.len(), self.dim());
        for (r, &i) in indices.iter().enumerate() {
            m.row_mut(r).copy_from_slice(self.row(i));
        }
        Self {
            values: m,
            normalized: self.normalized,
        }
    }

    pub(crate) fn from_normalized_unchecked(values: Matrix) -> Self {
        Self {
            values,
            normalized: true,
        }
    }
}

/// A `b × b` matrix of pairwise similarities or logits.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityMatrix(pub Matrix);

impl SimilarityMatrix {
    #[inline]
    pub fn size(&self) -> usize {
        self.0.rows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }
}

/// Target index of every row of a logits matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelVector(Vec<usize>);

impl LabelVector {
    /// Labels `0..b`: sample `i` of one modality pairs with sample `i` of the other.
    pub fn identity(b: usize) -> Self {
        Self((0..b).collect())
    }

    pub fn new(values: Vec<usize>) -> Result<Self> {
        let b = values.len();
        if let Some((i, &v)) = values.iter().enumerate().find(|(_, &v)| v >= b) {
            return Err(Error::ShapeMismatch(format!(
                "label {v} at position {i} is outside [0, {b})"
            )));
        }
        Ok(Self(values))
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

/// Divides each row by its Euclidean norm.
pub fn l2_normalize_rows(m: &Matrix) -> Result<EmbeddingBatch> {
    let mut out = m.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let norm = math::sqrt(dot(row, row));
        if !(norm > MIN_ROW_NORM) {
            return Err(Error::ZeroRow { row: i, norm });
        }
        row.iter_mut().for_each(|v| *v /= norm);
    }
    if !out.is_finite() {
        return Err(Error::NonFinite("normalized rows".into()));
    }
    if out.rows() == 0 || out.cols() == 0 {
        return Err(Error::ShapeMismatch("cannot normalize an empty matrix".into()));
    }
    Ok(EmbeddingBatch::from_normalized_unchecked(out))
}

/// Pairwise dot products `a · bᵀ`.
pub fn similarity(a: &EmbeddingBatch, b: &EmbeddingBatch) -> Result<SimilarityMatrix> {
    if a.dim() != b.dim() || a.rows() != b.rows() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} against {}x{}",
            a.rows(),
            a.dim(),
            b.rows(),
            b.dim()
        )));
    }
    Ok(SimilarityMatrix(a.matrix().matmul_transposed(b.matrix())?))
}

fn check_logits(logits: &Matrix, labels: &LabelVector) -> Result<()> {
    if logits.rows() != logits.cols() || logits.rows() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} logits with {} labels",
            logits.rows(),
            logits.cols(),
            labels.len()
        )));
    }
    if logits.rows() == 0 {
        return Err(Error::ShapeMismatch("empty logits".into()));
    }
    if !logits.is_finite() {
        return Err(Error::NonFinite("logits".into()));
    }
    Ok(())
}

/// Mean over rows of `-log softmax(row)[label]`.
pub fn softmax_cross_entropy(logits: &SimilarityMatrix, labels: &LabelVector) -> Result<f64> {
    cross_entropy_impl(logits.matrix(), labels, None)
}

/// Cross-entropy together with `∂loss/∂logits`, which is `(softmax − onehot)/b`.
pub fn softmax_cross_entropy_with_grad(
    logits: &SimilarityMatrix,
    labels: &LabelVector,
) -> Result<(f64, Matrix)> {
    let m = logits.matrix();
    let mut grad = Matrix::zeros(m.rows(), m.cols());
    let loss = cross_entropy_impl(m, labels, Some(&mut grad))?;
    Ok((loss, grad))
}

fn cross_entropy_impl(m: &Matrix, labels: &LabelVector, mut grad: Option<&mut Matrix>) -> Result<f64> {
    check_logits(m, labels)?;
    let b = m.rows();
    let inv_b = 1.0 / b as f64;
    let mut total = 0.0;
    for i in 0..b {
        let row = m.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|&z| math::exp(z - max)).sum();
        let lse = max + math::ln(sum);
        let y = labels.as_slice()[i];
        total += lse - row[y];
        if let Some(g) = grad.as_deref_mut() {
            let grow = g.row_mut(i);
            for (gj, &z) in grow.iter_mut().zip(row) {
                *gj = math::exp(z - lse) * inv_b;
            }
            grow[y] -= inv_b;
        }
    }
    Ok(total * inv_b)
}
