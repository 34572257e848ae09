//! Effective run configuration shared by the pipeline commands.

use serde::{Deserialize, Serialize};

use crate::eval::DEFAULT_KS;
use crate::fusion::loss::DEFAULT_TEMPERATURE;
use crate::index::ScoreOptions;
use crate::layout::AggregationConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub aggregation: AggregationConfig,
    /// Cutoffs for nDCG@k and Recall@k.
    pub metric_ks: Vec<usize>,
    /// Blocks (or pages) passed to the generator.
    pub retrieval_k: usize,
    /// Ranking depth written by search.
    pub depth: usize,
    pub scoring: ScoreOptions,
    /// Contrastive temperature.
    pub temperature: f64,
    pub rouge_beta: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            aggregation: AggregationConfig::default(),
            metric_ks: DEFAULT_KS.to_vec(),
            retrieval_k: 3,
            depth: 10,
            scoring: ScoreOptions::default(),
            temperature: DEFAULT_TEMPERATURE,
            rouge_beta: 1.0,
        }
    }
}
