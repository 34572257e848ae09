//! Run-level evaluation: macro-averaged retrieval metrics at block and page
//! granularity, evidence ANLCS, answer metrics and token accounting.

use std::collections::{BTreeMap, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::index::{BlockHit, PageHit};
use crate::metrics::{self, MetricError};

pub const DEFAULT_KS: [usize; 4] = [1, 3, 5, 10];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("no result for query {0:?}")]
    MissingResult(String),
    #[error("result for unknown query {0:?}")]
    UnknownResult(String),
    #[error("query {0:?} appears more than once")]
    Duplicate(String),
    #[error("page-level results missing for query {0:?}")]
    MissingPages(String),
    #[error("query {query_id:?}: {source}")]
    Metric { query_id: String, source: MetricError },
    #[error("no samples to evaluate")]
    NoSamples,
    #[error("metric cutoffs must be non-empty and positive")]
    BadCutoffs,
}

/// One benchmark record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSample {
    pub query_id: String,
    pub query_text: String,
    pub gold_block_ids: Vec<String>,
    pub gold_page_id: String,
    pub answer_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub page_token_cost: Option<u32>,
}

/// What the system produced for one query.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QueryRun {
    pub query_id: String,
    /// Ranked blocks, best first.
    pub blocks: Vec<BlockHit>,
    /// Ranked pages, when page-level retrieval was run.
    pub pages: Option<Vec<PageHit>>,
    pub answer: Option<String>,
    /// Externally supplied judge score (any scale).
    pub judge_score: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct EvalOptions<'a> {
    pub ks: Vec<usize>,
    /// Blocks (or pages) handed to the generator; drives token accounting.
    pub retrieval_k: usize,
    pub rouge_beta: f64,
    /// Block id → text, for evidence ANLCS.
    pub block_texts: Option<&'a HashMap<String, String>>,
    /// Page id → tokens of the whole page, for the page-level token baseline.
    pub page_token_costs: Option<&'a HashMap<String, u32>>,
}

impl Default for EvalOptions<'_> {
    fn default() -> Self {
        EvalOptions { ks: DEFAULT_KS.to_vec(), retrieval_k: 3, rouge_beta: 1.0, block_texts: None, page_token_costs: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub ndcg: BTreeMap<usize, f64>,
    pub recall: BTreeMap<usize, f64>,
    /// Mean generator input tokens per query at this granularity.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_tokens: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationReport {
    pub samples: usize,
    pub rouge_l: f64,
    pub word_f1: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub judge: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub samples: usize,
    pub block: LevelReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub page: Option<LevelReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anlcs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generation: Option<GenerationReport>,
    /// `1 − block tokens / page tokens`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub token_reduction: Option<f64>,
}

fn round_to(x: f64, places: i32) -> f64 {
    let f = 10f64.powi(places);
    (x * f).round() / f
}

impl LevelReport {
    fn rounded(&self, places: i32) -> Self {
        let r = |m: &BTreeMap<usize, f64>| m.iter().map(|(k, v)| (*k, round_to(*v, places))).collect();
        LevelReport { ndcg: r(&self.ndcg), recall: r(&self.recall), mean_tokens: self.mean_tokens.map(|v| round_to(v, places)) }
    }
}

impl MetricReport {
    /// Copy with every value rounded to `places` decimals.
    pub fn rounded(&self, places: i32) -> Self {
        let r = |v: f64| round_to(v, places);
        MetricReport {
            samples: self.samples,
            block: self.block.rounded(places),
            page: self.page.as_ref().map(|p| p.rounded(places)),
            anlcs: self.anlcs.map(r),
            generation: self.generation.as_ref().map(|g| GenerationReport {
                samples: g.samples,
                rouge_l: r(g.rouge_l),
                word_f1: r(g.word_f1),
                judge: g.judge.map(r),
            }),
            token_reduction: self.token_reduction.map(r),
        }
    }
}

#[derive(Debug)]
struct SampleMetrics<'a> {
    query_id: &'a str,
    block_ndcg: Vec<f64>,
    block_recall: Vec<f64>,
    block_tokens: u64,
    page: Option<(Vec<f64>, Vec<f64>, Option<u64>)>,
    anlcs: Option<f64>,
    generation: Option<(f64, f64)>,
    judge: Option<f64>,
}

fn metric_err(query_id: &str) -> impl Fn(MetricError) -> EvalError + '_ {
    move |source| EvalError::Metric { query_id: query_id.to_string(), source }
}

fn score_sample<'a>(
    sample: &'a EvalSample,
    run: &QueryRun,
    opts: &EvalOptions<'_>,
    with_pages: bool,
) -> Result<SampleMetrics<'a>, EvalError> {
    let qid = sample.query_id.as_str();
    let gold: HashSet<&str> = sample.gold_block_ids.iter().map(String::as_str).collect();
    let ranked: Vec<&str> = run.blocks.iter().map(|h| h.block_id.as_str()).collect();
    let mut block_ndcg = Vec::with_capacity(opts.ks.len());
    let mut block_recall = Vec::with_capacity(opts.ks.len());
    for &k in &opts.ks {
        block_ndcg.push(metrics::ndcg_at_k(&ranked, &gold, k).map_err(metric_err(qid))?);
        block_recall.push(metrics::recall_at_k(&ranked, &gold, k).map_err(metric_err(qid))?);
    }
    let top = &run.blocks[..run.blocks.len().min(opts.retrieval_k)];
    let block_tokens = top.iter().map(|h| u64::from(h.token_cost)).sum();

    let page = if with_pages {
        let pages = run.pages.as_ref().ok_or_else(|| EvalError::MissingPages(qid.to_string()))?;
        let ranked: Vec<&str> = pages.iter().map(|p| p.page_id.as_str()).collect();
        let gold: HashSet<&str> = [sample.gold_page_id.as_str()].into_iter().collect();
        let mut ndcg = Vec::with_capacity(opts.ks.len());
        let mut recall = Vec::with_capacity(opts.ks.len());
        for &k in &opts.ks {
            ndcg.push(metrics::ndcg_at_k(&ranked, &gold, k).map_err(metric_err(qid))?);
            recall.push(metrics::recall_at_k(&ranked, &gold, k).map_err(metric_err(qid))?);
        }
        let tokens = opts.page_token_costs.and_then(|costs| {
            ranked
                .iter()
                .take(opts.retrieval_k)
                .map(|p| costs.get(*p).map(|&c| u64::from(c)))
                .sum::<Option<u64>>()
        });
        Some((ndcg, recall, tokens))
    } else {
        None
    };

    let anlcs = match opts.block_texts {
        Some(texts) => {
            let gold_text = join_texts(sample.gold_block_ids.iter().map(String::as_str), texts);
            if metrics::tokenize(&gold_text).is_empty() {
                None
            } else {
                let retrieved = join_texts(top.iter().map(|h| h.block_id.as_str()), texts);
                Some(metrics::anlcs(&retrieved, &gold_text).map_err(metric_err(qid))?)
            }
        }
        None => None,
    };

    let generation = match &run.answer {
        Some(answer) => Some((
            metrics::rouge_l_beta(answer, &sample.answer_text, opts.rouge_beta).map_err(metric_err(qid))?,
            metrics::word_overlap_f1(answer, &sample.answer_text),
        )),
        None => None,
    };

    Ok(SampleMetrics { query_id: qid, block_ndcg, block_recall, block_tokens, page, anlcs, generation, judge: run.judge_score })
}

fn join_texts<'a>(ids: impl Iterator<Item = &'a str>, texts: &HashMap<String, String>) -> String {
    ids.filter_map(|id| texts.get(id).map(String::as_str)).collect::<Vec<_>>().join("\n")
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Macro-averages every metric over `samples`. Per-sample work runs in
/// parallel; reductions run in query-id order, so the report does not depend
/// on thread count or sample order.
pub fn evaluate_run(samples: &[EvalSample], runs: &[QueryRun], opts: &EvalOptions<'_>) -> Result<MetricReport, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::NoSamples);
    }
    if opts.ks.is_empty() || opts.ks.contains(&0) {
        return Err(EvalError::BadCutoffs);
    }
    let mut by_id: HashMap<&str, &QueryRun> = HashMap::with_capacity(runs.len());
    for r in runs {
        if by_id.insert(r.query_id.as_str(), r).is_some() {
            return Err(EvalError::Duplicate(r.query_id.clone()));
        }
    }
    let mut seen = HashSet::with_capacity(samples.len());
    for s in samples {
        if !seen.insert(s.query_id.as_str()) {
            return Err(EvalError::Duplicate(s.query_id.clone()));
        }
        if !by_id.contains_key(s.query_id.as_str()) {
            return Err(EvalError::MissingResult(s.query_id.clone()));
        }
    }
    let mut extra: Vec<&str> = by_id.keys().filter(|id| !seen.contains(*id)).copied().collect();
    extra.sort_unstable();
    if let Some(id) = extra.first() {
        return Err(EvalError::UnknownResult(id.to_string()));
    }
    let with_pages = runs.iter().any(|r| r.pages.is_some());

    let mut per_sample: Vec<SampleMetrics> = samples
        .par_iter()
        .map(|s| score_sample(s, by_id[s.query_id.as_str()], opts, with_pages))
        .collect::<Result<_, _>>()?;
    per_sample.sort_by(|a, b| a.query_id.cmp(b.query_id));

    let n = per_sample.len();
    let per_k = |f: fn(&SampleMetrics, usize) -> f64| -> BTreeMap<usize, f64> {
        opts.ks
            .iter()
            .enumerate()
            .map(|(i, &k)| (k, per_sample.iter().map(|m| f(m, i)).sum::<f64>() / n as f64))
            .collect()
    };
    let block_tokens = mean(per_sample.iter().map(|m| m.block_tokens as f64)).unwrap_or(0.0);
    let block = LevelReport {
        ndcg: per_k(|m, i| m.block_ndcg[i]),
        recall: per_k(|m, i| m.block_recall[i]),
        mean_tokens: Some(block_tokens),
    };
    let page = with_pages.then(|| {
        let tokens: Option<Vec<u64>> = per_sample.iter().map(|m| m.page.as_ref().and_then(|p| p.2)).collect();
        LevelReport {
            ndcg: per_k(|m, i| m.page.as_ref().expect("page metrics present").0[i]),
            recall: per_k(|m, i| m.page.as_ref().expect("page metrics present").1[i]),
            mean_tokens: tokens.map(|t| t.iter().sum::<u64>() as f64 / n as f64),
        }
    });
    let generation = {
        let scored: Vec<(f64, f64)> = per_sample.iter().filter_map(|m| m.generation).collect();
        (!scored.is_empty()).then(|| GenerationReport {
            samples: scored.len(),
            rouge_l: scored.iter().map(|g| g.0).sum::<f64>() / scored.len() as f64,
            word_f1: scored.iter().map(|g| g.1).sum::<f64>() / scored.len() as f64,
            judge: mean(per_sample.iter().filter_map(|m| m.judge)),
        })
    };
    let token_reduction = page
        .as_ref()
        .and_then(|p| p.mean_tokens)
        .filter(|&t| t > 0.0)
        .map(|page_tokens| 1.0 - block_tokens / page_tokens);

    Ok(MetricReport {
        samples: n,
        block,
        page,
        anlcs: mean(per_sample.iter().filter_map(|m| m.anlcs)),
        generation,
        token_reduction,
    })
}
