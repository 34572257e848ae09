//! Retrieval and answer-quality metrics.

use std::collections::{HashMap, HashSet};
use std::hash::Hash;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("gold set is empty")]
    EmptyGold,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("ranked list contains {0:?} more than once")]
    DuplicateRanked(String),
    #[error("gold text has no tokens")]
    EmptyGoldText,
    #[error("rouge beta must be positive and finite, got {0}")]
    Beta(f64),
}

/// Shared tokenizer for every text metric: lowercase, split on Unicode
/// whitespace, trim non-alphanumeric characters from both ends of each token.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

fn check_ranked<T: AsRef<str> + Eq + Hash>(ranked: &[T]) -> Result<(), MetricError> {
    let mut seen = HashSet::with_capacity(ranked.len());
    for id in ranked {
        if !seen.insert(id) {
            return Err(MetricError::DuplicateRanked(id.as_ref().to_string()));
        }
    }
    Ok(())
}

fn check_args<T: AsRef<str> + Eq + Hash>(ranked: &[T], gold: &HashSet<T>, k: usize) -> Result<(), MetricError> {
    if gold.is_empty() {
        return Err(MetricError::EmptyGold);
    }
    if k == 0 {
        return Err(MetricError::ZeroK);
    }
    check_ranked(ranked)
}

/// Binary-relevance nDCG over the first `k` ranks.
pub fn ndcg_at_k<T: AsRef<str> + Eq + Hash>(ranked: &[T], gold: &HashSet<T>, k: usize) -> Result<f64, MetricError> {
    check_args(ranked, gold, k)?;
    let discount = |rank: usize| 1.0 / ((rank + 1) as f64).log2();
    let dcg: f64 = ranked
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, id)| gold.contains(*id))
        .map(|(i, _)| discount(i + 1))
        .sum();
    let ideal: f64 = (1..=gold.len().min(k)).map(discount).sum();
    Ok(dcg / ideal)
}

/// Fraction of gold items found in the first `k` ranks.
pub fn recall_at_k<T: AsRef<str> + Eq + Hash>(ranked: &[T], gold: &HashSet<T>, k: usize) -> Result<f64, MetricError> {
    check_args(ranked, gold, k)?;
    let hits = ranked.iter().take(k).filter(|id| gold.contains(*id)).count();
    Ok(hits as f64 / gold.len() as f64)
}

/// Longest common subsequence length, two-row DP.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    let mut prev = vec![0usize; short.len() + 1];
    let mut cur = vec![0usize; short.len() + 1];
    for x in long {
        for (j, y) in short.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[short.len()]
}

/// LCS-based F-measure over word tokens.
pub fn rouge_l_beta(candidate: &str, reference: &str, beta: f64) -> Result<f64, MetricError> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(MetricError::Beta(beta));
    }
    let (c, r) = (tokenize(candidate), tokenize(reference));
    match (c.is_empty(), r.is_empty()) {
        (true, true) => return Ok(1.0),
        (true, false) | (false, true) => return Ok(0.0),
        _ => {}
    }
    let lcs = lcs_len(&c, &r);
    if lcs == 0 {
        return Ok(0.0);
    }
    let p = lcs as f64 / c.len() as f64;
    let rec = lcs as f64 / r.len() as f64;
    let b2 = beta * beta;
    Ok((1.0 + b2) * p * rec / (rec + b2 * p))
}

pub fn rouge_l(candidate: &str, reference: &str) -> f64 {
    rouge_l_beta(candidate, reference, 1.0).expect("beta = 1 is valid")
}

/// LCS between gold evidence and retrieved text, normalized by gold length.
pub fn anlcs(retrieved: &str, gold: &str) -> Result<f64, MetricError> {
    let g = tokenize(gold);
    if g.is_empty() {
        return Err(MetricError::EmptyGoldText);
    }
    Ok(lcs_len(&tokenize(retrieved), &g) as f64 / g.len() as f64)
}

/// Multiset token-overlap F1.
pub fn word_overlap_f1(candidate: &str, reference: &str) -> f64 {
    let (c, r) = (tokenize(candidate), tokenize(reference));
    match (c.is_empty(), r.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in &r {
        *counts.entry(t).or_default() += 1;
    }
    let mut overlap = 0usize;
    for t in &c {
        if let Some(n) = counts.get_mut(t.as_str()) {
            if *n > 0 {
                *n -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let p = overlap as f64 / c.len() as f64;
    let rec = overlap as f64 / r.len() as f64;
    2.0 * p * rec / (p + rec)
}
