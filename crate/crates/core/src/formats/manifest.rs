//! Benchmark manifests: pages (inline or by path), QA samples with gold
//! blocks, optional whole-page token costs.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::layout_json::PageLayout;
use super::{read_file, FormatError};
use crate::eval::EvalSample;
use crate::layout::{AggregationConfig, Block};
use crate::metrics::tokenize;

/// A page given inline or as a path relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PageSource {
    Path { path: String },
    Inline(PageLayout),
}

/// The manifest document as stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestFile {
    pub dataset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggregation: Option<AggregationConfig>,
    pub pages: Vec<PageSource>,
    pub samples: Vec<EvalSample>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub page_token_costs: Option<BTreeMap<String, u32>>,
}

impl ManifestFile {
    /// Parses the document. `path` entries are recognised by their single
    /// `path` key so inline pages report their own schema errors.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FormatError> {
        let mut value: serde_json::Value = serde_json::from_slice(bytes)?;
        if let Some(pages) = value.get_mut("pages").and_then(|p| p.as_array_mut()) {
            for page in pages.iter_mut() {
                let is_path = page.as_object().is_some_and(|o| o.len() == 1 && o.contains_key("path"));
                if !is_path {
                    // force the inline branch so errors name the real problem
                    let _: PageLayout = serde_json::from_value(page.clone())?;
                }
            }
        }
        Ok(serde_json::from_value(value)?)
    }
}

/// A validated manifest with every page loaded and aggregated.
#[derive(Debug, Clone)]
pub struct BenchmarkManifest {
    pub file: ManifestFile,
    pub config: AggregationConfig,
    pub pages: Vec<PageLayout>,
    /// Page id → aggregated blocks (auxiliary block last).
    pub blocks: BTreeMap<String, Vec<Block>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestStats {
    pub qa_pairs: usize,
    pub pages: usize,
    /// Mean question length in words.
    pub avg_question_len: f64,
    /// Mean answer length in words.
    pub avg_answer_len: f64,
    /// Mean content blocks per page, auxiliary block excluded.
    pub avg_blocks_per_page: f64,
    /// Mean gold blocks per sample.
    pub avg_relevant_blocks: f64,
}

impl BenchmarkManifest {
    /// Resolves page paths against `base_dir`, aggregates each page and
    /// checks every cross reference. Reports the first violation found.
    pub fn from_file(file: ManifestFile, base_dir: &Path) -> Result<Self, FormatError> {
        let config = file.aggregation.clone().unwrap_or_default();
        config.validate()?;
        let mut pages = Vec::with_capacity(file.pages.len());
        for src in &file.pages {
            pages.push(match src {
                PageSource::Inline(p) => p.clone(),
                PageSource::Path { path } => {
                    let full: PathBuf = base_dir.join(path);
                    serde_json::from_slice(&read_file(&full)?)?
                }
            });
        }
        let mut blocks = BTreeMap::new();
        for page in &pages {
            if blocks.contains_key(&page.page_id) {
                return Err(FormatError::DuplicatePage(page.page_id.clone()));
            }
            blocks.insert(page.page_id.clone(), page.aggregate(&config)?);
        }
        let mut seen = HashSet::new();
        for s in &file.samples {
            if !seen.insert(s.query_id.as_str()) {
                return Err(FormatError::DuplicateQuery(s.query_id.clone()));
            }
            if s.gold_block_ids.is_empty() {
                return Err(FormatError::EmptyGold(s.query_id.clone()));
            }
            let page_blocks = blocks.get(&s.gold_page_id).ok_or_else(|| FormatError::DanglingPage {
                query_id: s.query_id.clone(),
                page_id: s.gold_page_id.clone(),
            })?;
            for gold in &s.gold_block_ids {
                if !page_blocks.iter().any(|b| &b.id == gold) {
                    return Err(FormatError::DanglingGoldBlock {
                        query_id: s.query_id.clone(),
                        block_id: gold.clone(),
                        page_id: s.gold_page_id.clone(),
                    });
                }
            }
        }
        if let Some(costs) = &file.page_token_costs {
            if let Some(p) = costs.keys().find(|p| !blocks.contains_key(*p)) {
                return Err(FormatError::DanglingCostPage(p.clone()));
            }
        }
        Ok(BenchmarkManifest { file, config, pages, blocks })
    }

    pub fn samples(&self) -> &[EvalSample] {
        &self.file.samples
    }

    /// Block id → concatenated member text.
    pub fn block_texts(&self) -> HashMap<String, String> {
        self.blocks
            .values()
            .flatten()
            .filter_map(|b| b.text.as_ref().map(|t| (b.id.clone(), t.clone())))
            .collect()
    }

    /// Whole-page token costs: the explicit table, else per-sample values.
    pub fn page_token_costs(&self) -> Option<HashMap<String, u32>> {
        if let Some(costs) = &self.file.page_token_costs {
            return Some(costs.iter().map(|(k, v)| (k.clone(), *v)).collect());
        }
        let from_samples: HashMap<String, u32> = self
            .file
            .samples
            .iter()
            .filter_map(|s| s.page_token_cost.map(|c| (s.gold_page_id.clone(), c)))
            .collect();
        (!from_samples.is_empty()).then_some(from_samples)
    }

    pub fn stats(&self) -> ManifestStats {
        let n = self.file.samples.len().max(1) as f64;
        let pages = self.pages.len();
        let content: usize = self.blocks.values().map(|b| b.iter().filter(|b| !b.is_mask()).count()).sum();
        ManifestStats {
            qa_pairs: self.file.samples.len(),
            pages,
            avg_question_len: self.file.samples.iter().map(|s| tokenize(&s.query_text).len()).sum::<usize>() as f64 / n,
            avg_answer_len: self.file.samples.iter().map(|s| tokenize(&s.answer_text).len()).sum::<usize>() as f64 / n,
            avg_blocks_per_page: content as f64 / pages.max(1) as f64,
            avg_relevant_blocks: self.file.samples.iter().map(|s| s.gold_block_ids.len()).sum::<usize>() as f64 / n,
        }
    }
}

pub fn load_manifest(path: &Path) -> Result<BenchmarkManifest, FormatError> {
    let file = ManifestFile::from_bytes(&read_file(path)?)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    BenchmarkManifest::from_file(file, base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::to_json_bytes;

    fn minimal(gold: &str, page: &str) -> String {
        format!(
            r#"{{
            "dataset": "tiny",
            "pages": [{{"page_id": "p1", "width": 100, "height": 100,
                        "regions": [{{"id": 0, "bbox": [10, 10, 90, 40], "tag": "plain_text", "text": "alpha beta"}}]}}],
            "samples": [{{"query_id": "q1", "query_text": "what is alpha", "gold_block_ids": ["{gold}"],
                          "gold_page_id": "{page}", "answer_text": "beta"}}]
        }}"#
        )
    }

    fn load(s: &str) -> Result<BenchmarkManifest, FormatError> {
        BenchmarkManifest::from_file(ManifestFile::from_bytes(s.as_bytes())?, Path::new("."))
    }

    #[test]
    fn minimal_manifest_loads() {
        let m = load(&minimal("p1/b1", "p1")).unwrap();
        assert_eq!(m.blocks["p1"].len(), 2);
        let st = m.stats();
        assert_eq!((st.qa_pairs, st.pages), (1, 1));
        assert_eq!((st.avg_question_len, st.avg_answer_len), (3.0, 1.0));
        assert_eq!((st.avg_blocks_per_page, st.avg_relevant_blocks), (1.0, 1.0));
        assert_eq!(m.block_texts()["p1/b1"], "alpha beta");
        assert!(m.page_token_costs().is_none());
    }

    #[test]
    fn dangling_references_are_named() {
        match load(&minimal("p1/b7", "p1")) {
            Err(FormatError::DanglingGoldBlock { query_id, block_id, .. }) => {
                assert_eq!((query_id.as_str(), block_id.as_str()), ("q1", "p1/b7"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(load(&minimal("p1/b1", "p9")), Err(FormatError::DanglingPage { page_id, .. }) if page_id == "p9"));
        // the masked block is a legal gold target
        assert!(load(&minimal("p1/mask", "p1")).is_ok());
    }

    #[test]
    fn schema_errors() {
        let bad = minimal("p1/b1", "p1").replace("\"plain_text\"", "\"banner\"");
        assert!(load(&bad).unwrap_err().to_string().contains("banner"));
        let bad = minimal("p1/b1", "p1").replace("\"dataset\"", "\"name\"");
        assert!(matches!(load(&bad), Err(FormatError::Json(_))));
        let bad = minimal("p1/b1", "p1").replace("[\"p1/b1\"]", "[]");
        assert!(matches!(load(&bad), Err(FormatError::EmptyGold(_))));
    }

    #[test]
    fn paths_resolve_relative_to_manifest() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("p1.json"),
            r#"{"page_id": "p1", "width": 100, "height": 100, "regions": []}"#,
        )
        .unwrap();
        let manifest = r#"{"dataset": "x", "pages": [{"path": "p1.json"}],
            "samples": [{"query_id": "q", "query_text": "t", "gold_block_ids": ["p1/mask"],
                         "gold_page_id": "p1", "answer_text": "a"}],
            "page_token_costs": {"p1": 900}}"#;
        let path = dir.path().join("m.json");
        std::fs::write(&path, manifest).unwrap();
        let m = load_manifest(&path).unwrap();
        assert_eq!(m.page_token_costs().unwrap()["p1"], 900);
        assert!(matches!(m.file.pages[0], PageSource::Path { .. }));
        let bytes = to_json_bytes(&m.file).unwrap();
        assert_eq!(to_json_bytes(&ManifestFile::from_bytes(&bytes).unwrap()).unwrap(), bytes);

        std::fs::remove_file(dir.path().join("p1.json")).unwrap();
        assert!(load_manifest(&path).unwrap_err().is_io());
    }
}
