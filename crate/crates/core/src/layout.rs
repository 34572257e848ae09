//! Semantic block aggregation over layout-detected regions.
//!
//! Regions from one page become nodes of an undirected graph. Two regions are
//! linked when they are semantically compatible and spatially aligned, or when
//! one physically covers most of the other. Connected components become
//! blocks: the component's bounding box is the coordinate-wise union of its
//! members and its tag is the highest-ranked member tag under the priority
//! table. Each page also receives one auxiliary block that stands for the page
//! with every content block masked out.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LayoutError {
    #[error("invalid bbox [{x1}, {y1}, {x2}, {y2}]: need finite, non-negative x1<x2 and y1<y2")]
    InvalidBBox { x1: f64, y1: f64, x2: f64, y2: f64 },
    #[error("unknown layout tag {0:?}")]
    UnknownTag(String),
    #[error("region ids must be unique and increase in reading order (id {id} follows {prev})")]
    RegionOrder { prev: u32, id: u32 },
    #[error("region {0} lies outside the page bounds")]
    OutsidePage(u32),
    #[error("tag priority needs at least one tag")]
    EmptyTagSet,
    #[error("priority table must list every layout tag exactly once")]
    BadPriority,
    #[error("threshold {name} = {value} is out of range")]
    BadThreshold { name: &'static str, value: f64 },
}

/// Axis-aligned box in page pixels, origin top-left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self, LayoutError> {
        let ok = [x1, y1, x2, y2].iter().all(|v| v.is_finite() && *v >= 0.0) && x1 < x2 && y1 < y2;
        if ok {
            Ok(BBox { x1, y1, x2, y2 })
        } else {
            Err(LayoutError::InvalidBBox { x1, y1, x2, y2 })
        }
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, other: &BBox) -> bool {
        self.x1 <= other.x1 && self.y1 <= other.y1 && self.x2 >= other.x2 && self.y2 >= other.y2
    }

    /// Smallest box enclosing both.
    pub fn union(&self, other: &BBox) -> BBox {
        BBox {
            x1: self.x1.min(other.x1),
            y1: self.y1.min(other.y1),
            x2: self.x2.max(other.x2),
            y2: self.y2.max(other.y2),
        }
    }
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = LayoutError;
    fn try_from(v: [f64; 4]) -> Result<Self, Self::Error> {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x1, b.y1, b.x2, b.y2]
    }
}

/// Layout classes emitted by the upstream detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "&'static str")]
pub enum LayoutTag {
    Abandon,
    Title,
    Figure,
    FigureCaption,
    Table,
    TableCaption,
    TableFootnote,
    PlainText,
    IsolateFormula,
    FormulaCaption,
}

impl LayoutTag {
    pub const ALL: [LayoutTag; 10] = [
        LayoutTag::Abandon,
        LayoutTag::Title,
        LayoutTag::Figure,
        LayoutTag::FigureCaption,
        LayoutTag::Table,
        LayoutTag::TableCaption,
        LayoutTag::TableFootnote,
        LayoutTag::PlainText,
        LayoutTag::IsolateFormula,
        LayoutTag::FormulaCaption,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            LayoutTag::Abandon => "abandon",
            LayoutTag::Title => "title",
            LayoutTag::Figure => "figure",
            LayoutTag::FigureCaption => "figure_caption",
            LayoutTag::Table => "table",
            LayoutTag::TableCaption => "table_caption",
            LayoutTag::TableFootnote => "table_footnote",
            LayoutTag::PlainText => "plain_text",
            LayoutTag::IsolateFormula => "isolate_formula",
            LayoutTag::FormulaCaption => "formula_caption",
        }
    }

    pub fn group(&self) -> SemanticGroup {
        match self {
            LayoutTag::Abandon => SemanticGroup::Abandon,
            LayoutTag::Title => SemanticGroup::Title,
            LayoutTag::Figure | LayoutTag::FigureCaption => SemanticGroup::Figure,
            LayoutTag::Table | LayoutTag::TableCaption | LayoutTag::TableFootnote => SemanticGroup::Table,
            LayoutTag::PlainText | LayoutTag::IsolateFormula | LayoutTag::FormulaCaption => {
                SemanticGroup::Text
            }
        }
    }
}

impl fmt::Display for LayoutTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl TryFrom<String> for LayoutTag {
    type Error = LayoutError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<LayoutTag> for &'static str {
    fn from(t: LayoutTag) -> Self {
        t.as_str()
    }
}

impl FromStr for LayoutTag {
    type Err = LayoutError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LayoutTag::ALL
            .iter()
            .copied()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| LayoutError::UnknownTag(s.to_string()))
    }
}

/// Equivalence classes of layout tags that may merge with each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SemanticGroup {
    Abandon,
    Title,
    Figure,
    Table,
    Text,
}

/// How semantic consistency between two regions is decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemanticMode {
    /// Same semantic group, plus Title and Text may merge with each other.
    #[default]
    Group,
    /// Literal tag equality.
    ExactTag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub id: u32,
    pub bbox: BBox,
    pub tag: LayoutTag,
    #[serde(default)]
    pub text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AggregationConfig {
    /// Minimum horizontal IoU for spatial compatibility.
    pub tau_x: f64,
    /// Maximum vertical gap in pixels.
    pub tau_y: f64,
    /// Overlap ratio above which two regions are merged regardless of type.
    pub tau_o: f64,
    /// Tolerated vertical overlap in pixels.
    pub delta: f64,
    /// Tag ranking, highest priority first.
    pub priority: Vec<LayoutTag>,
    pub semantic_mode: SemanticMode,
}

impl Default for AggregationConfig {
    fn default() -> Self {
        AggregationConfig {
            tau_x: 0.7,
            tau_y: 40.0,
            tau_o: 0.9,
            delta: 5.0,
            priority: vec![
                LayoutTag::Title,
                LayoutTag::Table,
                LayoutTag::Figure,
                LayoutTag::TableCaption,
                LayoutTag::FigureCaption,
                LayoutTag::TableFootnote,
                LayoutTag::IsolateFormula,
                LayoutTag::FormulaCaption,
                LayoutTag::PlainText,
                LayoutTag::Abandon,
            ],
            semantic_mode: SemanticMode::Group,
        }
    }
}

impl AggregationConfig {
    pub fn validate(&self) -> Result<(), LayoutError> {
        let ratio = |name, value: f64| {
            if (0.0..=1.0).contains(&value) {
                Ok(())
            } else {
                Err(LayoutError::BadThreshold { name, value })
            }
        };
        let pixels = |name, value: f64| {
            if value.is_finite() && value >= 0.0 {
                Ok(())
            } else {
                Err(LayoutError::BadThreshold { name, value })
            }
        };
        ratio("tau_x", self.tau_x)?;
        ratio("tau_o", self.tau_o)?;
        pixels("tau_y", self.tau_y)?;
        pixels("delta", self.delta)?;
        let mut seen = self.priority.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != LayoutTag::ALL.len() || self.priority.len() != LayoutTag::ALL.len() {
            return Err(LayoutError::BadPriority);
        }
        Ok(())
    }

    fn rank(&self, tag: LayoutTag) -> usize {
        self.priority.iter().position(|t| *t == tag).unwrap_or(usize::MAX)
    }
}

/// An aggregated retrieval unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub id: String,
    pub bbox: BBox,
    pub tag: LayoutTag,
    pub member_region_ids: Vec<u32>,
    /// Set only on the auxiliary masked-page block: the boxes masked out.
    pub mask_of: Option<Vec<BBox>>,
    pub text: Option<String>,
}

impl Block {
    pub fn is_mask(&self) -> bool {
        self.mask_of.is_some()
    }

    /// Content blocks built from discarded regions only.
    pub fn is_abandoned(&self) -> bool {
        !self.is_mask() && self.tag == LayoutTag::Abandon
    }
}

pub fn content_block_id(page_id: &str, ordinal: usize) -> String {
    format!("{page_id}/b{ordinal}")
}

pub fn mask_block_id(page_id: &str) -> String {
    format!("{page_id}/mask")
}

/// Horizontal IoU of the two x-intervals.
pub fn iou_x(a: &BBox, b: &BBox) -> f64 {
    let inter = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let union = a.x2.max(b.x2) - a.x1.min(b.x1);
    inter / union
}

/// Vertical gap between the boxes; negative when their y-intervals overlap.
pub fn delta_y(a: &BBox, b: &BBox) -> f64 {
    a.y1.max(b.y1) - a.y2.min(b.y2)
}

/// Intersection area over the smaller box's area.
pub fn overlap_ratio(a: &BBox, b: &BBox) -> f64 {
    let w = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let h = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    (w * h) / a.area().min(b.area())
}

pub fn semantically_consistent(a: LayoutTag, b: LayoutTag, mode: SemanticMode) -> bool {
    match mode {
        SemanticMode::ExactTag => a == b,
        SemanticMode::Group => {
            let (ga, gb) = (a.group(), b.group());
            ga == gb
                || matches!(
                    (ga, gb),
                    (SemanticGroup::Title, SemanticGroup::Text) | (SemanticGroup::Text, SemanticGroup::Title)
                )
        }
    }
}

pub fn spatially_compatible(a: &BBox, b: &BBox, cfg: &AggregationConfig) -> bool {
    let dy = delta_y(a, b);
    iou_x(a, b) > cfg.tau_x && -cfg.delta < dy && dy < cfg.tau_y
}

/// Edge rule of the region graph.
pub fn merge_predicate(a: &Region, b: &Region, cfg: &AggregationConfig) -> bool {
    (semantically_consistent(a.tag, b.tag, cfg.semantic_mode) && spatially_compatible(&a.bbox, &b.bbox, cfg))
        || overlap_ratio(&a.bbox, &b.bbox) > cfg.tau_o
}

/// Highest-priority tag among `tags`.
pub fn tag_priority<I>(tags: I, cfg: &AggregationConfig) -> Result<LayoutTag, LayoutError>
where
    I: IntoIterator<Item = LayoutTag>,
{
    tags.into_iter()
        .min_by_key(|t| (cfg.rank(*t), *t))
        .ok_or(LayoutError::EmptyTagSet)
}

/// Connected components of the graph on `0..n` whose edges are given by
/// `linked(i, j)` for `i < j`. Components are listed by smallest member and
/// each member list is ascending.
pub(crate) fn connected_components<F>(n: usize, mut linked: F) -> Vec<Vec<usize>>
where
    F: FnMut(usize, usize) -> bool,
{
    let mut adjacency = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if linked(i, j) {
                adjacency[i].push(j);
                adjacency[j].push(i);
            }
        }
    }
    let mut seen = vec![false; n];
    let mut components = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut stack = vec![start];
        let mut members = Vec::new();
        while let Some(node) = stack.pop() {
            members.push(node);
            for &next in &adjacency[node] {
                if !seen[next] {
                    seen[next] = true;
                    stack.push(next);
                }
            }
        }
        members.sort_unstable();
        components.push(members);
    }
    components
}

fn check_regions(regions: &[Region], page_bbox: &BBox) -> Result<(), LayoutError> {
    for pair in regions.windows(2) {
        if pair[1].id <= pair[0].id {
            return Err(LayoutError::RegionOrder { prev: pair[0].id, id: pair[1].id });
        }
    }
    for r in regions {
        BBox::new(r.bbox.x1, r.bbox.y1, r.bbox.x2, r.bbox.y2)?;
        if !page_bbox.contains(&r.bbox) {
            return Err(LayoutError::OutsidePage(r.id));
        }
    }
    Ok(())
}

/// Aggregates one page's regions into content blocks followed by the
/// auxiliary masked-page block.
pub fn aggregate_blocks(
    page_id: &str,
    regions: &[Region],
    page_bbox: &BBox,
    cfg: &AggregationConfig,
) -> Result<Vec<Block>, LayoutError> {
    cfg.validate()?;
    check_regions(regions, page_bbox)?;

    let components = connected_components(regions.len(), |i, j| merge_predicate(&regions[i], &regions[j], cfg));

    let mut blocks = Vec::with_capacity(components.len() + 1);
    for (k, members) in components.iter().enumerate() {
        let bbox = members
            .iter()
            .map(|&i| regions[i].bbox)
            .reduce(|acc, b| acc.union(&b))
            .expect("components are non-empty");
        let tag = tag_priority(members.iter().map(|&i| regions[i].tag), cfg)?;
        let texts: Vec<&str> = members.iter().filter_map(|&i| regions[i].text.as_deref()).collect();
        blocks.push(Block {
            id: content_block_id(page_id, k + 1),
            bbox,
            tag,
            member_region_ids: members.iter().map(|&i| regions[i].id).collect(),
            mask_of: None,
            text: (!texts.is_empty()).then(|| texts.join("\n")),
        });
    }

    let mask_of = blocks.iter().map(|b| b.bbox).collect();
    blocks.push(Block {
        id: mask_block_id(page_id),
        bbox: *page_bbox,
        tag: LayoutTag::Abandon,
        member_region_ids: Vec::new(),
        mask_of: Some(mask_of),
        text: None,
    });
    Ok(blocks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bb(x1: f64, y1: f64, x2: f64, y2: f64) -> BBox {
        BBox::new(x1, y1, x2, y2).unwrap()
    }

    fn region(id: u32, b: BBox, tag: LayoutTag) -> Region {
        Region { id, bbox: b, tag, text: None }
    }

    #[test]
    fn bbox_rejects_degenerate() {
        assert!(BBox::new(5.0, 0.0, 5.0, 1.0).is_err());
        assert!(BBox::new(0.0, 2.0, 1.0, 1.0).is_err());
        assert!(BBox::new(-1.0, 0.0, 1.0, 1.0).is_err());
        assert!(BBox::new(0.0, 0.0, f64::NAN, 1.0).is_err());
        assert!(serde_json::from_str::<BBox>("[0, 0, 0, 1]").is_err());
    }

    #[test]
    fn iou_x_cases() {
        assert_eq!(iou_x(&bb(0., 0., 10., 5.), &bb(0., 10., 10., 15.)), 1.0);
        assert_eq!(iou_x(&bb(0., 0., 10., 5.), &bb(20., 0., 30., 5.)), 0.0);
        let v = iou_x(&bb(0., 0., 10., 5.), &bb(5., 0., 15., 5.));
        assert!((v - 5.0 / 15.0).abs() < 1e-15);
    }

    #[test]
    fn delta_y_cases() {
        assert_eq!(delta_y(&bb(0., 0., 10., 10.), &bb(0., 10., 10., 20.)), 0.0);
        assert_eq!(delta_y(&bb(0., 0., 10., 10.), &bb(0., 30., 10., 40.)), 20.0);
        assert_eq!(delta_y(&bb(0., 0., 10., 10.), &bb(0., 5., 10., 15.)), -5.0);
        assert_eq!(delta_y(&bb(0., 30., 10., 40.), &bb(0., 0., 10., 10.)), 20.0);
    }

    #[test]
    fn overlap_ratio_cases() {
        assert_eq!(overlap_ratio(&bb(0., 0., 10., 10.), &bb(2., 2., 8., 8.)), 1.0);
        assert_eq!(overlap_ratio(&bb(0., 0., 10., 10.), &bb(20., 20., 30., 30.)), 0.0);
        assert_eq!(overlap_ratio(&bb(0., 0., 10., 10.), &bb(5., 5., 15., 15.)), 0.25);
    }

    #[test]
    fn merge_predicate_cases() {
        let cfg = AggregationConfig::default();
        // iou_x = 90/100 = 0.9, gap 10
        let a = region(0, bb(0., 0., 100., 50.), LayoutTag::PlainText);
        let b = region(1, bb(10., 60., 100., 100.), LayoutTag::PlainText);
        assert!((iou_x(&a.bbox, &b.bbox) - 0.9).abs() < 1e-12);
        assert_eq!(delta_y(&a.bbox, &b.bbox), 10.0);
        assert!(merge_predicate(&a, &b, &cfg));

        let fig = region(0, a.bbox, LayoutTag::Figure);
        assert!(!merge_predicate(&fig, &b, &cfg));

        // 95% of the smaller box covered
        let big = region(0, bb(0., 0., 100., 100.), LayoutTag::Figure);
        let small = region(1, bb(5., 0., 105., 100.), LayoutTag::PlainText);
        assert!((overlap_ratio(&big.bbox, &small.bbox) - 0.95).abs() < 1e-12);
        assert!(merge_predicate(&big, &small, &cfg));
    }

    #[test]
    fn title_text_exception_and_exact_mode() {
        let mut cfg = AggregationConfig::default();
        let t = region(0, bb(0., 0., 100., 20.), LayoutTag::Title);
        let p = region(1, bb(0., 30., 100., 80.), LayoutTag::PlainText);
        let f = region(2, bb(0., 90., 100., 120.), LayoutTag::IsolateFormula);
        assert!(merge_predicate(&t, &p, &cfg));
        assert!(merge_predicate(&p, &f, &cfg));
        cfg.semantic_mode = SemanticMode::ExactTag;
        assert!(!merge_predicate(&t, &p, &cfg));
        assert!(!merge_predicate(&p, &f, &cfg));
    }

    #[test]
    fn vertical_overlap_tolerance() {
        let cfg = AggregationConfig::default();
        let a = region(0, bb(0., 0., 100., 50.), LayoutTag::PlainText);
        let slight = region(1, bb(0., 46., 100., 90.), LayoutTag::PlainText);
        let deep = region(1, bb(0., 44., 100., 90.), LayoutTag::PlainText);
        let far = region(1, bb(0., 90., 100., 120.), LayoutTag::PlainText);
        assert!(merge_predicate(&a, &slight, &cfg));
        assert!(!merge_predicate(&a, &deep, &cfg));
        assert!(!merge_predicate(&a, &far, &cfg));
    }

    #[test]
    fn tag_priority_cases() {
        let cfg = AggregationConfig::default();
        assert_eq!(tag_priority([LayoutTag::PlainText], &cfg).unwrap(), LayoutTag::PlainText);
        assert_eq!(
            tag_priority([LayoutTag::FigureCaption, LayoutTag::Figure], &cfg).unwrap(),
            LayoutTag::Figure
        );
        assert_eq!(
            tag_priority([LayoutTag::PlainText, LayoutTag::Title, LayoutTag::PlainText], &cfg).unwrap(),
            LayoutTag::Title
        );
        assert_eq!(tag_priority([], &cfg), Err(LayoutError::EmptyTagSet));
    }

    #[test]
    fn every_tag_has_a_group() {
        use SemanticGroup::*;
        let expect = [Abandon, Title, Figure, Figure, Table, Table, Table, Text, Text, Text];
        for (tag, g) in LayoutTag::ALL.iter().zip(expect) {
            assert_eq!(tag.group(), g, "{tag}");
            assert_eq!(tag.as_str().parse::<LayoutTag>().unwrap(), *tag);
        }
        assert!(matches!("header".parse::<LayoutTag>(), Err(LayoutError::UnknownTag(s)) if s == "header"));
    }

    #[test]
    fn single_region_page() {
        let page = bb(0., 0., 200., 200.);
        let r = Region { id: 7, bbox: bb(10., 10., 50., 50.), tag: LayoutTag::Table, text: Some("x".into()) };
        let blocks = aggregate_blocks("p", std::slice::from_ref(&r), &page, &AggregationConfig::default()).unwrap();
        assert_eq!(blocks.len(), 2);
        assert_eq!(blocks[0].bbox, r.bbox);
        assert_eq!(blocks[0].tag, LayoutTag::Table);
        assert_eq!(blocks[0].member_region_ids, vec![7]);
        assert_eq!(blocks[0].text.as_deref(), Some("x"));
        assert_eq!(blocks[0].id, "p/b1");
        assert_eq!(blocks[1].id, "p/mask");
        assert_eq!(blocks[1].bbox, page);
        assert_eq!(blocks[1].mask_of.as_deref(), Some(&[r.bbox][..]));
    }

    #[test]
    fn empty_page_yields_only_mask() {
        let page = bb(0., 0., 200., 200.);
        let blocks = aggregate_blocks("p", &[], &page, &AggregationConfig::default()).unwrap();
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].mask_of.as_deref(), Some(&[][..]));
    }

    #[test]
    fn stacked_fragments_merge() {
        let page = bb(0., 0., 500., 500.);
        let regions: Vec<Region> = (0..3)
            .map(|i| {
                let y = 10.0 + 40.0 * i as f64;
                Region {
                    id: i,
                    bbox: bb(20., y, 300., y + 30.),
                    tag: LayoutTag::PlainText,
                    text: Some(format!("frag{i}")),
                }
            })
            .collect();
        let blocks = aggregate_blocks("p", &regions, &page, &AggregationConfig::default()).unwrap();
        assert_eq!(blocks.len(), 2);
        assert_eq!(blocks[0].bbox, bb(20., 10., 300., 120.));
        assert_eq!(blocks[0].member_region_ids, vec![0, 1, 2]);
        assert_eq!(blocks[0].text.as_deref(), Some("frag0\nfrag1\nfrag2"));
    }

    #[test]
    fn figure_with_caption() {
        let page = bb(0., 0., 500., 500.);
        let regions = vec![
            region(0, bb(0., 0., 100., 80.), LayoutTag::Figure),
            region(1, bb(0., 82., 100., 95.), LayoutTag::FigureCaption),
        ];
        let blocks = aggregate_blocks("p", &regions, &page, &AggregationConfig::default()).unwrap();
        assert_eq!(blocks.len(), 2);
        assert_eq!(blocks[0].tag, LayoutTag::Figure);
        assert_eq!(blocks[0].bbox, bb(0., 0., 100., 95.));
    }

    #[test]
    fn blocks_ordered_by_first_member() {
        let page = bb(0., 0., 500., 500.);
        // 0 and 2 merge, 1 stands alone: order is {0,2}, {1}
        let regions = vec![
            region(0, bb(0., 0., 100., 40.), LayoutTag::PlainText),
            region(1, bb(300., 0., 400., 40.), LayoutTag::Table),
            region(2, bb(0., 50., 100., 90.), LayoutTag::PlainText),
        ];
        let blocks = aggregate_blocks("p", &regions, &page, &AggregationConfig::default()).unwrap();
        assert_eq!(blocks[0].member_region_ids, vec![0, 2]);
        assert_eq!(blocks[1].member_region_ids, vec![1]);
    }

    #[test]
    fn abandon_blocks_are_flagged() {
        let page = bb(0., 0., 500., 500.);
        let regions = vec![region(0, bb(0., 0., 100., 40.), LayoutTag::Abandon)];
        let blocks = aggregate_blocks("p", &regions, &page, &AggregationConfig::default()).unwrap();
        assert!(blocks[0].is_abandoned());
        assert!(!blocks[1].is_abandoned());
    }

    #[test]
    fn input_validation() {
        let page = bb(0., 0., 100., 100.);
        let cfg = AggregationConfig::default();
        let out = vec![region(0, bb(50., 50., 150., 90.), LayoutTag::Table)];
        assert_eq!(aggregate_blocks("p", &out, &page, &cfg), Err(LayoutError::OutsidePage(0)));
        let unordered = vec![
            region(3, bb(0., 0., 10., 10.), LayoutTag::Table),
            region(3, bb(0., 20., 10., 30.), LayoutTag::Table),
        ];
        assert!(matches!(
            aggregate_blocks("p", &unordered, &page, &cfg),
            Err(LayoutError::RegionOrder { .. })
        ));
        let mut bad = cfg.clone();
        bad.priority.pop();
        assert_eq!(bad.validate(), Err(LayoutError::BadPriority));
        let mut bad = cfg.clone();
        bad.tau_x = 1.5;
        assert!(matches!(bad.validate(), Err(LayoutError::BadThreshold { name: "tau_x", .. })));
    }

    #[test]
    fn default_thresholds() {
        let cfg = AggregationConfig::default();
        assert_eq!(cfg.tau_y, 40.0);
        assert_eq!(cfg.tau_x, 0.7);
        assert_eq!(cfg.tau_o, 0.9);
        assert_eq!(cfg.delta, 5.0);
        cfg.validate().unwrap();
    }

    #[test]
    fn components_of_a_path_and_isolated_node() {
        let comps = connected_components(4, |i, j| (i, j) == (0, 3) || (i, j) == (2, 3));
        assert_eq!(comps, vec![vec![0, 2, 3], vec![1]]);
    }
}
