//! Layout-aware fine-grained retrieval.
//!
//! Layout-detected regions are aggregated into semantic blocks
//! ([`layout`]), block multi-vectors are indexed and searched with
//! late-interaction MaxSim at block and page granularity ([`index`]), and
//! runs are scored with IR and answer-quality metrics ([`metrics`],
//! [`eval`]). [`fusion`] holds the encoder's fusion kernels and the
//! contrastive objective as verifiable numeric code.

pub mod config;
pub mod eval;
pub mod formats;
pub mod fusion;
pub mod index;
pub mod layout;
pub mod metrics;
pub mod synth;
pub mod verify;

pub use config::RunConfig;
pub use eval::{evaluate_run, EvalOptions, EvalSample, MetricReport, QueryRun};
pub use index::{maxsim, BlockIndex, IndexBuilder, IndexEntry, MultiVector, ScoreOptions, SearchResult};
pub use layout::{aggregate_blocks, AggregationConfig, BBox, Block, LayoutTag, Region};
