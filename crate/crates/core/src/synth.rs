//! Deterministic synthetic corpora for tests, fixtures and self-checks.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::eval::EvalSample;
use crate::formats::manifest::{ManifestFile, PageSource};
use crate::formats::results::AnswerRecord;
use crate::formats::vectors::VectorFile;
use crate::formats::PageLayout;
use crate::index::MultiVector;
use crate::layout::{AggregationConfig, BBox, LayoutTag, Region};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Up to `max_regions` random regions on a 1000×1000 page, in reading order.
/// Positions snap to a coarse grid so that alignments, small gaps and heavy
/// overlaps all occur often.
pub fn random_regions<R: Rng>(rng: &mut R, max_regions: usize) -> Vec<Region> {
    let m = rng.gen_range(0..=max_regions);
    let mut boxes: Vec<(BBox, LayoutTag)> = (0..m)
        .map(|_| {
            let x1 = 100.0 * rng.gen_range(0..5) as f64 + rng.gen_range(0.0..20.0);
            let w = 150.0 + rng.gen_range(0.0..250.0);
            let y1 = 20.0 * rng.gen_range(0..45) as f64 + rng.gen_range(0.0..5.0);
            let h = 15.0 + rng.gen_range(0.0..80.0);
            let tag = *LayoutTag::ALL.choose(rng).expect("non-empty");
            (BBox::new(x1, y1, x1 + w, y1 + h).expect("positive extent"), tag)
        })
        .collect();
    boxes.sort_by(|a, b| a.0.y1.total_cmp(&b.0.y1).then(a.0.x1.total_cmp(&b.0.x1)));
    boxes
        .into_iter()
        .enumerate()
        .map(|(i, (bbox, tag))| Region { id: i as u32, bbox, tag, text: None })
        .collect()
}

pub fn random_multivector<R: Rng>(rng: &mut R, rows: usize, dim: usize) -> MultiVector {
    MultiVector::new(dim, (0..rows * dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect()).expect("finite")
}

const SYLLABLES: [&str; 16] = ["ka", "lo", "mi", "re", "su", "ta", "ven", "dor", "pi", "qua", "nel", "so", "ru", "ba", "tek", "ion"];

fn word<R: Rng>(rng: &mut R) -> String {
    let n = rng.gen_range(2..4);
    (0..n).map(|_| *SYLLABLES.choose(rng).expect("non-empty")).collect()
}

fn sentence<R: Rng>(rng: &mut R, words: usize) -> String {
    (0..words).map(|_| word(rng)).collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone)]
pub struct SynthOptions {
    pub seed: u64,
    pub pages: usize,
    pub samples_per_page: usize,
    pub dim: usize,
    /// Whole-page generator tokens; every block costs a third of it.
    pub page_tokens: u32,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions { seed: 20, pages: 10, samples_per_page: 2, dim: 16, page_tokens: 768 }
    }
}

/// Everything needed to run the pipeline end to end.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub layouts: Vec<PageLayout>,
    pub manifest: ManifestFile,
    pub block_vectors: VectorFile,
    pub query_vectors: VectorFile,
    pub token_costs: BTreeMap<String, u32>,
    pub answers: Vec<AnswerRecord>,
}

enum Plan {
    Text { title: bool, fragments: usize },
    Figure,
    Table { footnote: bool },
}

fn plan_regions<R: Rng>(rng: &mut R, plan: &Plan, y: &mut f64, next_id: &mut u32, out: &mut Vec<Region>) {
    let x1 = 80.0 + rng.gen_range(0.0..10.0);
    let x2 = 920.0 - rng.gen_range(0.0..10.0);
    let mut push = |rng: &mut R, tag: LayoutTag, height: f64, words: usize, y: &mut f64| {
        out.push(Region {
            id: *next_id,
            bbox: BBox::new(x1, *y, x2, *y + height).expect("positive extent"),
            tag,
            text: Some(sentence(rng, words)),
        });
        *next_id += 1;
        *y += height + rng.gen_range(4.0..12.0);
    };
    match plan {
        Plan::Text { title, fragments } => {
            if *title {
                push(rng, LayoutTag::Title, 30.0, 3, y);
            }
            for _ in 0..*fragments {
                let h = rng.gen_range(30.0..60.0);
                push(rng, LayoutTag::PlainText, h, 12, y);
            }
        }
        Plan::Figure => {
            let h = rng.gen_range(120.0..200.0);
            push(rng, LayoutTag::Figure, h, 4, y);
            push(rng, LayoutTag::FigureCaption, 24.0, 8, y);
        }
        Plan::Table { footnote } => {
            push(rng, LayoutTag::TableCaption, 24.0, 8, y);
            let h = rng.gen_range(100.0..180.0);
            push(rng, LayoutTag::Table, h, 16, y);
            if *footnote {
                push(rng, LayoutTag::TableFootnote, 20.0, 6, y);
            }
        }
    }
}

fn synth_page<R: Rng>(rng: &mut R, page_id: &str, doc_id: &str) -> PageLayout {
    let mut regions = vec![Region {
        id: 0,
        bbox: BBox::new(80.0, 12.0, 300.0, 30.0).expect("positive extent"),
        tag: LayoutTag::Abandon,
        text: Some(sentence(rng, 2)),
    }];
    let mut next_id = 1;
    let mut y = 60.0;
    for _ in 0..rng.gen_range(3..=4) {
        let plan = match rng.gen_range(0..3) {
            0 => Plan::Text { title: rng.gen_bool(0.5), fragments: rng.gen_range(1..=3) },
            1 => Plan::Figure,
            _ => Plan::Table { footnote: rng.gen_bool(0.5) },
        };
        plan_regions(rng, &plan, &mut y, &mut next_id, &mut regions);
        // keeps consecutive blocks further apart than the vertical threshold
        y += 80.0;
    }
    PageLayout { page_id: page_id.into(), doc_id: Some(doc_id.into()), width: 1000.0, height: 1400.0, regions }
}

/// Builds a corpus whose queries are noisy copies of their gold blocks' rows.
pub fn synth_corpus(opts: &SynthOptions) -> SynthCorpus {
    let mut rng = rng(opts.seed);
    let cfg = AggregationConfig::default();
    let block_cost = opts.page_tokens / 3;
    let mut layouts = Vec::new();
    let mut block_vectors = VectorFile::new(opts.dim);
    let mut query_vectors = VectorFile::new(opts.dim);
    let mut token_costs = BTreeMap::new();
    let mut samples = Vec::new();
    let mut answers = Vec::new();
    let mut page_costs = BTreeMap::new();

    for p in 0..opts.pages {
        let page_id = format!("p{:02}", p + 1);
        let layout = synth_page(&mut rng, &page_id, &format!("doc{}", p / 5 + 1));
        let blocks = layout.aggregate(&cfg).expect("synthetic pages are valid");
        let mut content = Vec::new();
        for b in &blocks {
            let rows = 4 + b.member_region_ids.len();
            let mv = random_multivector(&mut rng, rows, opts.dim);
            block_vectors.entries.push((b.id.clone(), mv.clone()));
            token_costs.insert(b.id.clone(), block_cost);
            if !b.is_mask() && !b.is_abandoned() {
                content.push((b, mv));
            }
        }
        page_costs.insert(page_id.clone(), opts.page_tokens);

        for s in 0..opts.samples_per_page {
            let query_id = format!("q{:03}", p * opts.samples_per_page + s + 1);
            let n_gold = if rng.gen_bool(1.0 / 3.0) { 2 } else { 1 };
            let gold: Vec<_> = content.choose_multiple(&mut rng, n_gold.min(content.len())).collect();
            let mut rows = Vec::new();
            for i in 0..4 {
                let (_, mv) = gold[i % gold.len()];
                let src = mv.row(rng.gen_range(0..mv.len()));
                rows.extend(src.iter().map(|v| v + rng.gen_range(-0.3f32..0.3)));
            }
            query_vectors.entries.push((query_id.clone(), MultiVector::new(opts.dim, rows).expect("finite")));

            let gold_words: Vec<String> = gold
                .iter()
                .flat_map(|(b, _)| b.text.as_deref().unwrap_or("").split_whitespace().map(String::from).collect::<Vec<_>>())
                .collect();
            let take = |rng: &mut ChaCha8Rng, n: usize| -> String {
                let start = rng.gen_range(0..gold_words.len().saturating_sub(n).max(1));
                gold_words.iter().skip(start).take(n).cloned().collect::<Vec<_>>().join(" ")
            };
            let query_text = format!("what does the page say about {}", take(&mut rng, 3));
            let answer_text = take(&mut rng, 6);
            let mut generated: Vec<String> = answer_text.split_whitespace().map(String::from).collect();
            if generated.len() > 2 {
                let i = rng.gen_range(0..generated.len());
                generated[i] = word(&mut rng);
            }
            answers.push(AnswerRecord { query_id: query_id.clone(), answer: generated.join(" "), judge_score: None });
            samples.push(EvalSample {
                query_id,
                query_text,
                gold_block_ids: gold.iter().map(|(b, _)| b.id.clone()).collect(),
                gold_page_id: page_id.clone(),
                answer_text,
                page_token_cost: Some(opts.page_tokens),
            });
        }
        layouts.push(layout);
    }

    let manifest = ManifestFile {
        dataset: format!("synthetic-{}", samples.len()),
        aggregation: None,
        pages: layouts.iter().cloned().map(PageSource::Inline).collect(),
        samples,
        page_token_costs: Some(page_costs),
    };
    SynthCorpus { layouts, manifest, block_vectors, query_vectors, token_costs, answers }
}
