use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use blockrag_core::formats::layout_json::{parse_blocks, parse_layouts};
use blockrag_core::formats::manifest::{BenchmarkManifest, ManifestFile};
use blockrag_core::formats::{
    self, read_index, read_vector_file, write_index, write_json, write_vector_file, AnswerRecord, QueryRanking,
    RankLevel, RankingFile, ReportDocument,
};
use blockrag_core::synth::{synth_corpus, SynthOptions};
use blockrag_core::verify::{self, Suite};
use blockrag_core::{evaluate_run, EvalOptions, IndexBuilder, IndexEntry, RunConfig};
use serde::Serialize;

use crate::settings;
use crate::{AggregateArgs, EvalArgs, IndexArgs, SearchArgs, StatsArgs, SynthArgs, VerifyArgs};

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => write_json(path, value)?,
        None => {
            let bytes = formats::to_json_bytes(value)?;
            std::io::stdout().lock().write_all(&bytes)?;
        }
    }
    Ok(())
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("reading {}", path.display()))
}

pub fn aggregate(mut cfg: RunConfig, args: AggregateArgs) -> Result<()> {
    settings::apply_aggregation(&mut cfg, &args.aggregation)?;
    let layouts = parse_layouts(&read_bytes(&args.input)?).with_context(|| format!("{}", args.input.display()))?;
    let pages = layouts.map(|p| p.to_blocks_page(&cfg.aggregation))?;
    emit(&pages, args.output.as_deref())
}

pub fn index(args: IndexArgs) -> Result<()> {
    let pages = parse_blocks(&read_bytes(&args.blocks)?).with_context(|| format!("{}", args.blocks.display()))?;
    let vectors = read_vector_file(&args.vectors).with_context(|| format!("{}", args.vectors.display()))?;
    let costs: HashMap<String, u32> = match &args.token_costs {
        Some(p) => formats::read_json(p).with_context(|| format!("{}", p.display()))?,
        None => HashMap::new(),
    };
    let dim = vectors.dim;
    let mut by_id = vectors.into_map();
    let mut builder = IndexBuilder::new(dim);
    let mut missing = Vec::new();
    for page in pages.as_slice() {
        for block in &page.blocks {
            let Some(v) = by_id.remove(&block.id) else {
                missing.push(block.id.clone());
                continue;
            };
            let token_cost = block.token_cost.or_else(|| costs.get(&block.id).copied()).unwrap_or(v.len() as u32);
            builder.add_block(IndexEntry {
                block_id: block.id.clone(),
                page_id: page.page_id.clone(),
                doc_id: page.doc_id().to_string(),
                tag: block.tag,
                is_mask: block.is_mask(),
                vectors: v,
                token_cost,
            })?;
        }
    }
    if !missing.is_empty() {
        bail!("{} block(s) have no vectors: {}", missing.len(), missing.join(", "));
    }
    ensure!(!builder.is_empty(), "no blocks to index");
    write_index(&builder.seal(), &args.output)?;
    Ok(())
}

pub fn search(mut cfg: RunConfig, args: SearchArgs) -> Result<()> {
    if let Some(d) = args.depth {
        cfg.depth = d;
    }
    if let Some(k) = args.k {
        cfg.retrieval_k = k;
    }
    cfg.scoring.normalize |= args.normalize;
    if args.exclude_mask {
        cfg.scoring.include_mask_in_pages = false;
    }
    ensure!(cfg.depth > 0 && cfg.retrieval_k > 0, "depth and k must be positive");

    let idx = read_index(&args.index).with_context(|| format!("{}", args.index.display()))?;
    ensure!(!idx.is_empty(), "index {} is empty", args.index.display());
    let queries = read_vector_file(&args.queries).with_context(|| format!("{}", args.queries.display()))?;
    let mut selected: Vec<_> = if args.query_ids.is_empty() {
        queries.entries.iter().collect()
    } else {
        args.query_ids
            .iter()
            .map(|id| queries.entries.iter().find(|(q, _)| q == id).with_context(|| format!("unknown query id {id:?}")))
            .collect::<Result<_>>()?
    };
    selected.sort_by(|a, b| a.0.cmp(&b.0));
    selected.dedup_by(|a, b| a.0 == b.0);

    let level = if args.page_level { RankLevel::Page } else { RankLevel::Block };
    let mut results = Vec::with_capacity(selected.len());
    for (qid, q) in selected {
        let ranking = if args.page_level {
            let pages = idx.search_pages(q, cfg.depth, &cfg.scoring).with_context(|| format!("query {qid:?}"))?;
            QueryRanking { query_id: qid.clone(), blocks: Vec::new(), pages, token_cost: None }
        } else {
            let mut hits = idx
                .search_topk(q, cfg.depth.max(cfg.retrieval_k), &cfg.scoring)
                .with_context(|| format!("query {qid:?}"))?
                .hits;
            let tokens = hits.iter().take(cfg.retrieval_k).map(|h| u64::from(h.token_cost)).sum();
            hits.truncate(cfg.depth);
            QueryRanking { query_id: qid.clone(), blocks: hits, pages: Vec::new(), token_cost: Some(tokens) }
        };
        results.push(ranking);
    }
    let file = RankingFile { level, depth: cfg.depth, retrieval_k: cfg.retrieval_k, results };
    emit(&file, args.output.as_deref())
}

/// Loads a manifest; the run configuration supplies the aggregation
/// thresholds unless the manifest pins its own.
fn load_manifest(cfg: &RunConfig, path: &Path) -> Result<BenchmarkManifest> {
    let mut file = ManifestFile::from_bytes(&read_bytes(path)?).with_context(|| format!("{}", path.display()))?;
    if file.aggregation.is_none() {
        file.aggregation = Some(cfg.aggregation.clone());
    }
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    BenchmarkManifest::from_file(file, base).with_context(|| format!("{}", path.display()))
}

fn read_ranking(path: &Path, want: RankLevel) -> Result<RankingFile> {
    let file: RankingFile = formats::read_json(path).with_context(|| format!("{}", path.display()))?;
    ensure!(file.level == want, "{}: expected a {want:?}-level ranking, found {:?}", path.display(), file.level);
    Ok(file)
}

#[derive(Debug, Serialize)]
struct EchoedConfig<'a> {
    dataset: &'a str,
    #[serde(flatten)]
    run: &'a RunConfig,
}

pub fn eval(mut cfg: RunConfig, args: EvalArgs) -> Result<()> {
    if let Some(ks) = args.ks {
        cfg.metric_ks = ks;
    }
    if let Some(k) = args.k {
        cfg.retrieval_k = k;
    }
    if let Some(b) = args.rouge_beta {
        cfg.rouge_beta = b;
    }
    let manifest = load_manifest(&cfg, &args.manifest)?;
    cfg.aggregation = manifest.config.clone();
    let blocks = read_ranking(&args.results, RankLevel::Block)?;
    let pages = args.page_results.as_deref().map(|p| read_ranking(p, RankLevel::Page)).transpose()?;
    let answers: Vec<AnswerRecord> = match &args.answers {
        Some(p) => formats::read_json(p).with_context(|| format!("{}", p.display()))?,
        None => Vec::new(),
    };
    let runs = formats::results::merge_runs(&blocks, pages.as_ref(), &answers);
    let texts = manifest.block_texts();
    let page_costs = manifest.page_token_costs();
    let opts = EvalOptions {
        ks: cfg.metric_ks.clone(),
        retrieval_k: cfg.retrieval_k,
        rouge_beta: cfg.rouge_beta,
        block_texts: Some(&texts),
        page_token_costs: page_costs.as_ref(),
    };
    let report = evaluate_run(manifest.samples(), &runs, &opts)?;
    let doc = ReportDocument::new(EchoedConfig { dataset: &manifest.file.dataset, run: &cfg }, report);
    emit(&doc, args.output.as_deref())
}

pub fn verify(args: VerifyArgs) -> Result<()> {
    let suites: Vec<Suite> = match args.suite {
        Some(s) => vec![s],
        None => Suite::ALL.to_vec(),
    };
    let mut failed = 0;
    for s in suites {
        let r = verify::run(s, args.seed);
        println!("{r}");
        failed += usize::from(!r.passed);
    }
    ensure!(failed == 0, "{failed} suite(s) failed");
    Ok(())
}

pub fn stats(cfg: RunConfig, args: StatsArgs) -> Result<()> {
    let manifest = load_manifest(&cfg, &args.manifest)?;
    emit(&manifest.stats(), None)
}

pub fn synth(args: SynthArgs) -> Result<()> {
    ensure!(args.dim > 0 && args.pages > 0, "dim and pages must be positive");
    let corpus = synth_corpus(&SynthOptions {
        seed: args.seed,
        pages: args.pages,
        samples_per_page: args.samples_per_page,
        dim: args.dim,
        ..SynthOptions::default()
    });
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let at = |name: &str| -> PathBuf { args.out.join(name) };
    write_json(&at("layouts.json"), &corpus.layouts)?;
    write_json(&at("manifest.json"), &corpus.manifest)?;
    write_json(&at("token_costs.json"), &corpus.token_costs)?;
    write_json(&at("answers.json"), &corpus.answers)?;
    write_vector_file(&corpus.block_vectors, &at("vectors.lfve"))?;
    write_vector_file(&corpus.query_vectors, &at("queries.lfve"))?;
    let listing: BTreeMap<&str, usize> = [
        ("pages", corpus.layouts.len()),
        ("samples", corpus.manifest.samples.len()),
        ("block_vectors", corpus.block_vectors.entries.len()),
    ]
    .into_iter()
    .collect();
    emit(&listing, None)
}
