//! Semantic-layout fusion kernels.
//!
//! Block embeddings attend over the page's global tokens, the attended
//! context is concatenated to the block embedding and projected into the
//! text space, and the layout-tag embedding rows are appended to form the
//! block's multi-vector representation. Everything here is f64.

pub mod loss;

use thiserror::Error;

pub use loss::{contrastive_loss, contrastive_loss_grad, LossBatch, LossGrad, QueryScores};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FusionError {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("matrix must have at least one row and one column")]
    Empty,
    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("temperature must be positive, got {0}")]
    Temperature(f64),
    #[error("query {0} has no positive scores")]
    NoPositives(usize),
    #[error("empty batch")]
    EmptyBatch,
    #[error("positive index {index} out of range for query {query}")]
    PositiveIndex { query: usize, index: usize },
}

fn shape(op: &'static str, detail: String) -> FusionError {
    FusionError::Shape { op, detail }
}

/// Dense row-major f64 matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// A `D_out × D_in` projection applied to column vectors.
pub type ProjectionMatrix = EmbeddingMatrix;

impl EmbeddingMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, FusionError> {
        if cols == 0 {
            return Err(FusionError::Empty);
        }
        if data.len() != rows * cols {
            return Err(shape("new", format!("{} values for {rows}x{cols}", data.len())));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(FusionError::NonFinite { row: i / cols, col: i % cols });
        }
        Ok(EmbeddingMatrix { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, FusionError> {
        let cols = rows.first().map(|r| r.as_ref().len()).ok_or(FusionError::Empty)?;
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(shape("from_rows", format!("row {i} has {} columns, expected {cols}", r.len())));
            }
            data.extend_from_slice(r);
        }
        EmbeddingMatrix::new(rows.len(), cols, data)
    }

    /// Widens single-precision values.
    pub fn from_f32(rows: usize, cols: usize, data: &[f32]) -> Result<Self, FusionError> {
        EmbeddingMatrix::new(rows, cols, data.iter().map(|&v| f64::from(v)).collect())
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        EmbeddingMatrix { rows: n, cols: n, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        EmbeddingMatrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    /// Returns a copy whose rows have unit L2 norm (zero rows are kept).
    pub fn l2_normalized(&self) -> Self {
        let mut out = self.clone();
        for row in out.data.chunks_exact_mut(self.cols) {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter_mut().for_each(|v| *v /= norm);
            }
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Numerically stable softmax, in place.
fn softmax_in_place(xs: &mut [f64]) {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in xs.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    xs.iter_mut().for_each(|x| *x /= total);
}

/// Row-wise `softmax(Q Kᵀ / √d)`, shape `n × m`.
pub fn attention_weights(q: &EmbeddingMatrix, k: &EmbeddingMatrix) -> Result<EmbeddingMatrix, FusionError> {
    if q.cols != k.cols {
        return Err(shape("attention", format!("Q has d={}, K has d={}", q.cols, k.cols)));
    }
    if k.rows == 0 {
        return Err(shape("attention", "K has no rows".into()));
    }
    let scale = 1.0 / (q.cols as f64).sqrt();
    let mut weights = Vec::with_capacity(q.rows * k.rows);
    for qi in q.iter_rows() {
        let start = weights.len();
        weights.extend(k.iter_rows().map(|kj| dot(qi, kj) * scale));
        softmax_in_place(&mut weights[start..]);
    }
    Ok(EmbeddingMatrix { rows: q.rows, cols: k.rows, data: weights })
}

/// Scaled dot-product attention `softmax(Q Kᵀ / √d) V`.
pub fn attention(
    q: &EmbeddingMatrix,
    k: &EmbeddingMatrix,
    v: &EmbeddingMatrix,
) -> Result<EmbeddingMatrix, FusionError> {
    if k.rows != v.rows {
        return Err(shape("attention", format!("K has {} rows, V has {}", k.rows, v.rows)));
    }
    let weights = attention_weights(q, k)?;
    let mut out = vec![0.0; q.rows * v.cols];
    for (i, w) in weights.iter_rows().enumerate() {
        let dst = &mut out[i * v.cols..(i + 1) * v.cols];
        for (wj, vj) in w.iter().zip(v.iter_rows()) {
            for (o, x) in dst.iter_mut().zip(vj) {
                *o += wj * x;
            }
        }
    }
    Ok(EmbeddingMatrix { rows: q.rows, cols: v.cols, data: out })
}

/// Stacks the block embeddings and lets them attend over the page's global
/// tokens, which serve as both keys and values. One context row per block.
pub fn contextualize(
    block_embs: &[Vec<f64>],
    global: &EmbeddingMatrix,
) -> Result<Vec<Vec<f64>>, FusionError> {
    if block_embs.is_empty() {
        return Ok(Vec::new());
    }
    let stacked = EmbeddingMatrix::from_rows(block_embs)?;
    let ctx = attention(&stacked, global, global)?;
    Ok(ctx.iter_rows().map(<[f64]>::to_vec).collect())
}

/// `W_p (h ∥ ctx)`.
pub fn fuse_and_project(h: &[f64], ctx: &[f64], w_p: &ProjectionMatrix) -> Result<Vec<f64>, FusionError> {
    if w_p.cols != h.len() + ctx.len() {
        return Err(shape(
            "fuse_and_project",
            format!("W_p has {} columns, concatenation has {}", w_p.cols, h.len() + ctx.len()),
        ));
    }
    Ok(w_p
        .iter_rows()
        .map(|w| dot(&w[..h.len()], h) + dot(&w[h.len()..], ctx))
        .collect())
}

/// Prepends the projected visual row to the tag-embedding rows.
pub fn assemble_block_rep(h_tilde: &[f64], tag_emb: &EmbeddingMatrix) -> Result<EmbeddingMatrix, FusionError> {
    if h_tilde.len() != tag_emb.cols {
        return Err(shape(
            "assemble_block_rep",
            format!("projected row has D={}, tag embedding has D={}", h_tilde.len(), tag_emb.cols),
        ));
    }
    let mut data = Vec::with_capacity((tag_emb.rows + 1) * tag_emb.cols);
    data.extend_from_slice(h_tilde);
    data.extend_from_slice(&tag_emb.data);
    EmbeddingMatrix::new(tag_emb.rows + 1, tag_emb.cols, data)
}

/// Full fusion chain for one page: block rows, the page's global tokens, the
/// projection and one tag embedding per block.
pub fn encode_page_blocks(
    block_embs: &[Vec<f64>],
    global: &EmbeddingMatrix,
    w_p: &ProjectionMatrix,
    tag_embs: &[EmbeddingMatrix],
) -> Result<Vec<EmbeddingMatrix>, FusionError> {
    if tag_embs.len() != block_embs.len() {
        return Err(shape(
            "encode_page_blocks",
            format!("{} blocks but {} tag embeddings", block_embs.len(), tag_embs.len()),
        ));
    }
    let ctx = contextualize(block_embs, global)?;
    block_embs
        .iter()
        .zip(&ctx)
        .zip(tag_embs)
        .map(|((h, c), t)| assemble_block_rep(&fuse_and_project(h, c, w_p)?, t))
        .collect()
}
