//! Multi-positive softmax contrastive objective over in-batch blocks.
//!
//! For query `k` with positive scores `P` and negative scores `N`:
//!
//! ```text
//! L_k = logsumexp((P ∪ N) / τ) − logsumexp(P / τ)
//! L   = mean_k L_k
//! ```

use super::FusionError;

/// Default contrastive temperature.
pub const DEFAULT_TEMPERATURE: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct QueryScores {
    pub positives: Vec<f64>,
    pub negatives: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossBatch {
    pub queries: Vec<QueryScores>,
    pub temperature: f64,
}

/// `∂L/∂s` laid out like the batch.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub queries: Vec<QueryScores>,
}

impl LossBatch {
    pub fn new(queries: Vec<QueryScores>, temperature: f64) -> Self {
        LossBatch { queries, temperature }
    }

    /// Splits a `b × |batch blocks|` score matrix into positive and negative
    /// lists. Every block not listed as positive for a query is a negative
    /// for it, whichever page it came from.
    pub fn from_score_matrix(
        scores: &[Vec<f64>],
        positives: &[Vec<usize>],
        temperature: f64,
    ) -> Result<Self, FusionError> {
        if scores.len() != positives.len() {
            return Err(FusionError::Shape {
                op: "from_score_matrix",
                detail: format!("{} score rows but {} positive sets", scores.len(), positives.len()),
            });
        }
        let mut queries = Vec::with_capacity(scores.len());
        for (q, (row, pos)) in scores.iter().zip(positives).enumerate() {
            let mut is_pos = vec![false; row.len()];
            for &i in pos {
                *is_pos.get_mut(i).ok_or(FusionError::PositiveIndex { query: q, index: i })? = true;
            }
            let (mut p, mut n) = (Vec::new(), Vec::new());
            for (s, flag) in row.iter().zip(is_pos) {
                if flag { p.push(*s) } else { n.push(*s) }
            }
            queries.push(QueryScores { positives: p, negatives: n });
        }
        let batch = LossBatch { queries, temperature };
        batch.validate()?;
        Ok(batch)
    }

    fn validate(&self) -> Result<(), FusionError> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(FusionError::Temperature(self.temperature));
        }
        if self.queries.is_empty() {
            return Err(FusionError::EmptyBatch);
        }
        for (k, q) in self.queries.iter().enumerate() {
            if q.positives.is_empty() {
                return Err(FusionError::NoPositives(k));
            }
            let all = q.positives.iter().chain(&q.negatives);
            if let Some(i) = all.clone().position(|s| !s.is_finite()) {
                return Err(FusionError::NonFinite { row: k, col: i });
            }
        }
        Ok(())
    }
}

/// `max + ln Σ exp(x − max)` over the scaled values.
fn log_sum_exp<'a>(values: impl Iterator<Item = &'a f64> + Clone, inv_tau: f64) -> f64 {
    let max = values.clone().map(|s| s * inv_tau).fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = values.map(|s| (s * inv_tau - max).exp()).sum();
    max + sum.ln()
}

fn query_loss(q: &QueryScores, inv_tau: f64) -> f64 {
    let all = log_sum_exp(q.positives.iter().chain(&q.negatives), inv_tau);
    let pos = log_sum_exp(q.positives.iter(), inv_tau);
    // rounding can leave a tiny negative when negatives vanish
    (all - pos).max(0.0)
}

pub fn contrastive_loss(batch: &LossBatch) -> Result<f64, FusionError> {
    batch.validate()?;
    let inv_tau = 1.0 / batch.temperature;
    let total: f64 = batch.queries.iter().map(|q| query_loss(q, inv_tau)).sum();
    Ok(total / batch.queries.len() as f64)
}

pub fn contrastive_loss_grad(batch: &LossBatch) -> Result<LossGrad, FusionError> {
    batch.validate()?;
    let inv_tau = 1.0 / batch.temperature;
    let scale = inv_tau / batch.queries.len() as f64;
    let queries = batch
        .queries
        .iter()
        .map(|q| {
            let all = log_sum_exp(q.positives.iter().chain(&q.negatives), inv_tau);
            let pos = log_sum_exp(q.positives.iter(), inv_tau);
            let share = |s: f64, lse: f64| (s * inv_tau - lse).exp();
            QueryScores {
                positives: q.positives.iter().map(|&s| scale * (share(s, all) - share(s, pos))).collect(),
                negatives: q.negatives.iter().map(|&s| scale * share(s, all)).collect(),
            }
        })
        .collect();
    Ok(LossGrad { queries })
}
