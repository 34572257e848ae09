//! Exhaustive multi-vector block index with late-interaction scoring.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::layout::LayoutTag;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IndexError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("multi-vector needs at least one row and D > 0 (got {rows} rows, {len} values)")]
    Shape { rows: usize, len: usize },
    #[error("non-finite embedding value at index {0}")]
    NonFinite(usize),
    #[error("duplicate block id {0:?}")]
    DuplicateBlock(String),
    #[error("page id of block {0:?} is empty")]
    EmptyPageId(String),
    #[error("k must be at least 1")]
    ZeroK,
}

/// `N × D` token embeddings stored as f32, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiVector {
    dim: usize,
    data: Vec<f32>,
}

impl MultiVector {
    pub fn new(dim: usize, data: Vec<f32>) -> Result<Self, IndexError> {
        if dim == 0 || data.is_empty() || !data.len().is_multiple_of(dim) {
            return Err(IndexError::Shape { rows: data.len().checked_div(dim).unwrap_or(0), len: data.len() });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(IndexError::NonFinite(i));
        }
        Ok(MultiVector { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self, IndexError> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.len() != dim {
                return Err(IndexError::Dimension { expected: dim, got: r.len() });
            }
            data.extend_from_slice(r);
        }
        MultiVector::new(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    /// Copy with every row scaled to unit L2 norm; zero rows stay zero.
    pub fn l2_normalized(&self) -> MultiVector {
        let mut data = self.data.clone();
        for row in data.chunks_exact_mut(self.dim) {
            let norm = row.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter_mut().for_each(|v| *v = (f64::from(*v) / norm) as f32);
            }
        }
        MultiVector { dim: self.dim, data }
    }
}

#[inline]
fn dot_f64(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        acc += f64::from(*x) * f64::from(*y);
    }
    acc
}

/// Sum over query tokens of the best dot product against any block token.
pub fn maxsim(q: &MultiVector, b: &MultiVector) -> Result<f64, IndexError> {
    if q.dim != b.dim {
        return Err(IndexError::Dimension { expected: b.dim, got: q.dim });
    }
    Ok(maxsim_unchecked(q, b))
}

fn maxsim_unchecked(q: &MultiVector, b: &MultiVector) -> f64 {
    let mut total = 0.0f64;
    for qi in q.rows() {
        let mut best = f64::NEG_INFINITY;
        for bj in b.rows() {
            let s = dot_f64(qi, bj);
            if s > best {
                best = s;
            }
        }
        total += best;
    }
    total
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry {
    pub block_id: String,
    pub page_id: String,
    pub doc_id: String,
    pub tag: LayoutTag,
    /// Marks the auxiliary masked-page block.
    pub is_mask: bool,
    pub vectors: MultiVector,
    /// Generation-prompt tokens this block contributes.
    pub token_cost: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Equal scores ordered by block id; independent of insertion order.
    #[default]
    BlockIdAsc,
    /// Equal scores keep insertion order.
    Insertion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoreOptions {
    /// L2-normalize query and block rows before scoring.
    pub normalize: bool,
    pub tie_break: TieBreak,
    /// Let the masked-page block take part in page scores.
    pub include_mask_in_pages: bool,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        ScoreOptions { normalize: false, tie_break: TieBreak::BlockIdAsc, include_mask_in_pages: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockHit {
    pub block_id: String,
    pub page_id: String,
    pub score: f64,
    pub token_cost: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageHit {
    pub page_id: String,
    pub score: f64,
}

/// Ranked block hits, best first.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SearchResult {
    pub hits: Vec<BlockHit>,
}

impl SearchResult {
    pub fn total_token_cost(&self) -> u64 {
        self.hits.iter().map(|h| u64::from(h.token_cost)).sum()
    }
}

/// Single-writer build phase. `seal` produces the read-only index.
#[derive(Debug, Clone)]
pub struct IndexBuilder {
    dim: usize,
    entries: Vec<IndexEntry>,
    ids: HashMap<String, usize>,
}

impl IndexBuilder {
    pub fn new(dim: usize) -> Self {
        IndexBuilder { dim, entries: Vec::new(), ids: HashMap::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn add_block(&mut self, entry: IndexEntry) -> Result<(), IndexError> {
        if entry.vectors.dim() != self.dim {
            return Err(IndexError::Dimension { expected: self.dim, got: entry.vectors.dim() });
        }
        if entry.page_id.is_empty() {
            return Err(IndexError::EmptyPageId(entry.block_id));
        }
        if self.ids.contains_key(&entry.block_id) {
            return Err(IndexError::DuplicateBlock(entry.block_id));
        }
        self.ids.insert(entry.block_id.clone(), self.entries.len());
        self.entries.push(entry);
        Ok(())
    }

    pub fn seal(self) -> BlockIndex {
        BlockIndex { dim: self.dim, entries: self.entries, ids: self.ids }
    }
}

/// Immutable block corpus; safe to share across reader threads.
#[derive(Debug, Clone)]
pub struct BlockIndex {
    dim: usize,
    entries: Vec<IndexEntry>,
    ids: HashMap<String, usize>,
}

impl BlockIndex {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in insertion order.
    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn get(&self, block_id: &str) -> Option<&IndexEntry> {
        self.ids.get(block_id).map(|&i| &self.entries[i])
    }

    /// MaxSim of `q` against every entry, in insertion order.
    pub fn score_all(&self, q: &MultiVector, opts: &ScoreOptions) -> Result<Vec<f64>, IndexError> {
        if q.dim() != self.dim {
            return Err(IndexError::Dimension { expected: self.dim, got: q.dim() });
        }
        let scores = if opts.normalize {
            let qn = q.l2_normalized();
            self.entries
                .par_iter()
                .map(|e| maxsim_unchecked(&qn, &e.vectors.l2_normalized()))
                .collect()
        } else {
            self.entries.par_iter().map(|e| maxsim_unchecked(q, &e.vectors)).collect()
        };
        Ok(scores)
    }

    fn compare(&self, scores: &[f64], tie: TieBreak, a: usize, b: usize) -> Ordering {
        scores[b].total_cmp(&scores[a]).then_with(|| match tie {
            TieBreak::BlockIdAsc => self.entries[a].block_id.cmp(&self.entries[b].block_id),
            TieBreak::Insertion => a.cmp(&b),
        })
    }

    /// Top-`k` blocks by MaxSim, exhaustive.
    pub fn search_topk(&self, q: &MultiVector, k: usize, opts: &ScoreOptions) -> Result<SearchResult, IndexError> {
        if k == 0 {
            return Err(IndexError::ZeroK);
        }
        let scores = self.score_all(q, opts)?;
        let mut order: Vec<usize> = (0..self.entries.len()).collect();
        let cmp = |a: &usize, b: &usize| self.compare(&scores, opts.tie_break, *a, *b);
        if k < order.len() {
            order.select_nth_unstable_by(k - 1, cmp);
            order.truncate(k);
        }
        order.sort_unstable_by(cmp);
        let hits = order
            .into_iter()
            .map(|i| {
                let e = &self.entries[i];
                BlockHit { block_id: e.block_id.clone(), page_id: e.page_id.clone(), score: scores[i], token_cost: e.token_cost }
            })
            .collect();
        Ok(SearchResult { hits })
    }

    /// Page score = best block score on the page.
    pub fn page_scores(&self, q: &MultiVector, opts: &ScoreOptions) -> Result<BTreeMap<String, f64>, IndexError> {
        let scores = self.score_all(q, opts)?;
        let mut pages: BTreeMap<String, f64> = BTreeMap::new();
        for (e, s) in self.entries.iter().zip(scores) {
            if e.is_mask && !opts.include_mask_in_pages {
                continue;
            }
            pages
                .entry(e.page_id.clone())
                .and_modify(|best| {
                    if s > *best {
                        *best = s
                    }
                })
                .or_insert(s);
        }
        Ok(pages)
    }

    /// Pages ranked by score, ties by page id.
    pub fn search_pages(&self, q: &MultiVector, k: usize, opts: &ScoreOptions) -> Result<Vec<PageHit>, IndexError> {
        if k == 0 {
            return Err(IndexError::ZeroK);
        }
        let mut pages: Vec<PageHit> = self
            .page_scores(q, opts)?
            .into_iter()
            .map(|(page_id, score)| PageHit { page_id, score })
            .collect();
        pages.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.page_id.cmp(&b.page_id)));
        pages.truncate(k);
        Ok(pages)
    }

    /// Top-`k` blocks for the generator together with their summed token cost.
    pub fn retrieve_for_generation(
        &self,
        q: &MultiVector,
        k: usize,
        opts: &ScoreOptions,
    ) -> Result<(SearchResult, u64), IndexError> {
        let result = self.search_topk(q, k, opts)?;
        let cost = result.total_token_cost();
        Ok((result, cost))
    }
}
