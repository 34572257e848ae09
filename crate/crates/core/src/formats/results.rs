//! Ranking, answer and report JSON documents.

use serde::{Deserialize, Serialize};

use crate::eval::{MetricReport, QueryRun};
use crate::index::{BlockHit, PageHit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankLevel {
    Block,
    Page,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryRanking {
    pub query_id: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub blocks: Vec<BlockHit>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pages: Vec<PageHit>,
    /// Tokens of the first `retrieval_k` entries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_cost: Option<u64>,
}

/// Output of one search run; queries sorted by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankingFile {
    pub level: RankLevel,
    pub depth: usize,
    pub retrieval_k: usize,
    pub results: Vec<QueryRanking>,
}

/// A generated answer with an optional external judge score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnswerRecord {
    pub query_id: String,
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judge_score: Option<f64>,
}

/// Merges block rankings with optional page rankings and answers into the
/// per-query runs the evaluator consumes.
pub fn merge_runs(blocks: &RankingFile, pages: Option<&RankingFile>, answers: &[AnswerRecord]) -> Vec<QueryRun> {
    let mut runs: Vec<QueryRun> = blocks
        .results
        .iter()
        .map(|r| QueryRun { query_id: r.query_id.clone(), blocks: r.blocks.clone(), ..Default::default() })
        .collect();
    if let Some(pages) = pages {
        for r in &pages.results {
            match runs.iter_mut().find(|q| q.query_id == r.query_id) {
                Some(q) => q.pages = Some(r.pages.clone()),
                None => runs.push(QueryRun { query_id: r.query_id.clone(), pages: Some(r.pages.clone()), ..Default::default() }),
            }
        }
    }
    for a in answers {
        if let Some(q) = runs.iter_mut().find(|q| q.query_id == a.query_id) {
            q.answer = Some(a.answer.clone());
            q.judge_score = a.judge_score;
        }
    }
    runs
}

/// Report on disk: effective config, rounded metrics for tables and the
/// full-precision values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument<C> {
    pub config: C,
    pub metrics: MetricReport,
    pub raw: MetricReport,
}

impl<C> ReportDocument<C> {
    pub fn new(config: C, report: MetricReport) -> Self {
        ReportDocument { config, metrics: report.rounded(4), raw: report }
    }
}
