//! Effective configuration: built-in defaults, then the config file, then flags.

use std::path::Path;

use anyhow::{Context, Result};
use blockrag_core::layout::SemanticMode;
use blockrag_core::RunConfig;

use crate::AggregationFlags;

pub fn load(path: Option<&Path>) -> Result<RunConfig> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let cfg: RunConfig = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?
    } else {
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?
    };
    cfg.aggregation.validate().with_context(|| format!("config {}", path.display()))?;
    Ok(cfg)
}

pub fn apply_aggregation(cfg: &mut RunConfig, flags: &AggregationFlags) -> Result<()> {
    let agg = &mut cfg.aggregation;
    if let Some(v) = flags.tau_x {
        agg.tau_x = v;
    }
    if let Some(v) = flags.tau_y {
        agg.tau_y = v;
    }
    if let Some(v) = flags.tau_o {
        agg.tau_o = v;
    }
    if let Some(v) = flags.delta {
        agg.delta = v;
    }
    if flags.exact_tags {
        agg.semantic_mode = SemanticMode::ExactTag;
    }
    agg.validate()?;
    Ok(())
}
