//! Per-page layout input and aggregated-block output.

use serde::{Deserialize, Serialize};

use super::FormatError;
use crate::layout::{aggregate_blocks, AggregationConfig, BBox, Block, LayoutTag, Region};

/// Detector output for one page.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PageLayout {
    pub page_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc_id: Option<String>,
    pub width: f64,
    pub height: f64,
    pub regions: Vec<Region>,
}

impl PageLayout {
    pub fn page_bbox(&self) -> Result<BBox, FormatError> {
        BBox::new(0.0, 0.0, self.width, self.height).map_err(|_| FormatError::BadPageSize(self.page_id.clone()))
    }

    pub fn doc_id(&self) -> &str {
        self.doc_id.as_deref().unwrap_or(&self.page_id)
    }

    pub fn aggregate(&self, cfg: &AggregationConfig) -> Result<Vec<Block>, FormatError> {
        let page = self.page_bbox()?;
        aggregate_blocks(&self.page_id, &self.regions, &page, cfg)
            .map_err(|source| FormatError::Page { page_id: self.page_id.clone(), source })
    }

    pub fn to_blocks_page(&self, cfg: &AggregationConfig) -> Result<BlocksPage, FormatError> {
        Ok(BlocksPage {
            page_id: self.page_id.clone(),
            doc_id: self.doc_id.clone(),
            width: self.width,
            height: self.height,
            blocks: self.aggregate(cfg)?.into_iter().map(BlockRecord::from).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockRecord {
    pub id: String,
    pub bbox: BBox,
    pub tag: LayoutTag,
    pub members: Vec<u32>,
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_of: Option<Vec<BBox>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_cost: Option<u32>,
}

impl BlockRecord {
    pub fn is_mask(&self) -> bool {
        self.mask_of.is_some()
    }
}

impl From<Block> for BlockRecord {
    fn from(b: Block) -> Self {
        BlockRecord { id: b.id, bbox: b.bbox, tag: b.tag, members: b.member_region_ids, text: b.text, mask_of: b.mask_of, token_cost: None }
    }
}

/// Aggregation output for one page.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlocksPage {
    pub page_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc_id: Option<String>,
    pub width: f64,
    pub height: f64,
    pub blocks: Vec<BlockRecord>,
}

impl BlocksPage {
    pub fn doc_id(&self) -> &str {
        self.doc_id.as_deref().unwrap_or(&self.page_id)
    }
}

/// A JSON document holding either one page or a list of pages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    Many(Vec<T>),
    One(T),
}

impl<T> OneOrMany<T> {
    pub fn as_slice(&self) -> &[T] {
        match self {
            OneOrMany::Many(v) => v,
            OneOrMany::One(t) => std::slice::from_ref(t),
        }
    }

    pub fn map<U, E>(self, mut f: impl FnMut(T) -> Result<U, E>) -> Result<OneOrMany<U>, E> {
        Ok(match self {
            OneOrMany::Many(v) => OneOrMany::Many(v.into_iter().map(f).collect::<Result<_, _>>()?),
            OneOrMany::One(t) => OneOrMany::One(f(t)?),
        })
    }
}

/// Parses layout input; a single page object or an array of them. Tag errors
/// surface with the offending tag string.
pub fn parse_layouts(bytes: &[u8]) -> Result<OneOrMany<PageLayout>, FormatError> {
    let value: serde_json::Value = serde_json::from_slice(bytes)?;
    Ok(if value.is_array() {
        OneOrMany::Many(serde_json::from_value(value)?)
    } else {
        OneOrMany::One(serde_json::from_value(value)?)
    })
}

pub fn parse_blocks(bytes: &[u8]) -> Result<OneOrMany<BlocksPage>, FormatError> {
    let value: serde_json::Value = serde_json::from_slice(bytes)?;
    Ok(if value.is_array() {
        OneOrMany::Many(serde_json::from_value(value)?)
    } else {
        OneOrMany::One(serde_json::from_value(value)?)
    })
}
