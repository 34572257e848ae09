//! Randomized self-checks of the numeric kernels against straight-line
//! reference evaluations. The references here never call the code they
//! check.

use std::fmt;

use rand::Rng;
use serde::Serialize;

use crate::fusion::{self, EmbeddingMatrix, LossBatch, QueryScores};
use crate::index::{self, IndexBuilder, IndexEntry, MultiVector, ScoreOptions};
use crate::layout::{self, AggregationConfig, BBox, LayoutTag};
use crate::synth;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Fusion,
    Loss,
    Maxsim,
    Aggregate,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Fusion, Suite::Loss, Suite::Maxsim, Suite::Aggregate];
}

impl std::str::FromStr for Suite {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fusion" => Ok(Suite::Fusion),
            "loss" => Ok(Suite::Loss),
            "maxsim" => Ok(Suite::Maxsim),
            "aggregate" => Ok(Suite::Aggregate),
            other => Err(format!("unknown suite {other:?} (fusion|loss|maxsim|aggregate)")),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub cases: usize,
    pub mismatches: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:?}: {} cases, {} mismatches, max error {:.3e} (tolerance {:.0e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.suite,
            self.cases,
            self.mismatches,
            self.max_error,
            self.tolerance
        )
    }
}

pub fn run(suite: Suite, seed: u64) -> SuiteReport {
    match suite {
        Suite::Fusion => fusion_suite(seed),
        Suite::Loss => loss_suite(seed),
        Suite::Maxsim => maxsim_suite(seed),
        Suite::Aggregate => aggregate_suite(seed),
    }
}

fn report(suite: Suite, cases: usize, mismatches: usize, max_error: f64, tolerance: f64) -> SuiteReport {
    SuiteReport { suite, cases, mismatches, max_error, tolerance, passed: mismatches == 0 && max_error <= tolerance }
}

fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> EmbeddingMatrix {
    EmbeddingMatrix::new(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-scale..scale)).collect()).expect("finite")
}

/// Row sums of the attention weights and convex-hull membership of outputs
/// (every output coordinate within the per-column range of V).
fn fusion_suite(seed: u64) -> SuiteReport {
    let mut rng = synth::rng(seed);
    let (mut max_err, mut bad) = (0.0f64, 0usize);
    let cases = 200;
    for _ in 0..cases {
        let (n, m, d, dv) = (rng.gen_range(1..6), rng.gen_range(1..8), rng.gen_range(1..9), rng.gen_range(1..6));
        let q = random_matrix(&mut rng, n, d, 3.0);
        let k = random_matrix(&mut rng, m, d, 3.0);
        let v = random_matrix(&mut rng, m, dv, 5.0);
        let w = fusion::attention_weights(&q, &k).expect("shapes agree");
        for row in w.iter_rows() {
            max_err = max_err.max((row.iter().sum::<f64>() - 1.0).abs());
            if row.iter().any(|x| *x < 0.0) {
                bad += 1;
            }
        }
        let out = fusion::attention(&q, &k, &v).expect("shapes agree");
        for row in out.iter_rows() {
            for (c, x) in row.iter().enumerate() {
                let lo = (0..m).map(|j| v.get(j, c)).fold(f64::INFINITY, f64::min);
                let hi = (0..m).map(|j| v.get(j, c)).fold(f64::NEG_INFINITY, f64::max);
                if *x < lo - 1e-12 || *x > hi + 1e-12 {
                    bad += 1;
                }
            }
        }
    }
    report(Suite::Fusion, cases, bad, max_err, 1e-12)
}

/// Analytic gradient against central differences.
fn loss_suite(seed: u64) -> SuiteReport {
    let mut rng = synth::rng(seed);
    let cases = 100;
    let h = 1e-5;
    let mut max_rel = 0.0f64;
    let mut bad = 0;
    for case in 0..cases {
        let tau = if case % 2 == 0 { 0.02 } else { rng.gen_range(0.05..1.0) };
        let b = rng.gen_range(1..5);
        let queries = (0..b)
            .map(|_| QueryScores {
                positives: (0..rng.gen_range(1..4)).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                negatives: (0..rng.gen_range(0..6)).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            })
            .collect();
        let batch = LossBatch::new(queries, tau);
        let grad = fusion::contrastive_loss_grad(&batch).expect("valid batch");
        let loss_at = |bt: &LossBatch| fusion::contrastive_loss(bt).expect("valid batch");
        if !loss_at(&batch).is_finite() {
            bad += 1;
        }
        for qi in 0..b {
            for (is_pos, len) in [(true, batch.queries[qi].positives.len()), (false, batch.queries[qi].negatives.len())] {
                for j in 0..len {
                    let bump = |delta: f64| {
                        let mut bt = batch.clone();
                        let list = if is_pos { &mut bt.queries[qi].positives } else { &mut bt.queries[qi].negatives };
                        list[j] += delta;
                        loss_at(&bt)
                    };
                    let fd = (bump(h) - bump(-h)) / (2.0 * h);
                    let an = if is_pos { grad.queries[qi].positives[j] } else { grad.queries[qi].negatives[j] };
                    let rel = (fd - an).abs() / an.abs().max(fd.abs()).max(1e-3);
                    max_rel = max_rel.max(rel);
                }
            }
        }
    }
    report(Suite::Loss, cases, bad, max_rel, 1e-5)
}

fn brute_maxsim(q: &MultiVector, b: &MultiVector) -> f64 {
    let mut total = 0.0f64;
    for i in 0..q.len() {
        let mut best = f64::NEG_INFINITY;
        for j in 0..b.len() {
            let mut s = 0.0f64;
            for d in 0..q.dim() {
                s += q.row(i)[d] as f64 * b.row(j)[d] as f64;
            }
            if s > best {
                best = s;
            }
        }
        total += best;
    }
    total
}

/// Engine scores bitwise-equal to the triple loop; top-k equal to a full sort.
fn maxsim_suite(seed: u64) -> SuiteReport {
    let mut rng = synth::rng(seed);
    let dim = 8;
    let mut bad = 0;
    let pairs = 1000;
    for _ in 0..pairs {
        let q = { let rows = rng.gen_range(1..6); synth::random_multivector(&mut rng, rows, dim) };
        let b = { let rows = rng.gen_range(1..9); synth::random_multivector(&mut rng, rows, dim) };
        if index::maxsim(&q, &b).expect("same dim").to_bits() != brute_maxsim(&q, &b).to_bits() {
            bad += 1;
        }
    }
    let mut builder = IndexBuilder::new(dim);
    for i in 0..1000 {
        let v = { let rows = rng.gen_range(1..6); synth::random_multivector(&mut rng, rows, dim) };
        builder
            .add_block(IndexEntry {
                block_id: format!("b{i:04}"),
                page_id: format!("p{}", i / 5),
                doc_id: "d".into(),
                tag: LayoutTag::PlainText,
                is_mask: false,
                vectors: v,
                token_cost: 1,
            })
            .expect("unique ids");
    }
    let idx = builder.seal();
    let q = synth::random_multivector(&mut rng, 4, dim);
    let mut oracle: Vec<(f64, &str)> =
        idx.entries().iter().map(|e| (brute_maxsim(&q, &e.vectors), e.block_id.as_str())).collect();
    oracle.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
    let got = idx.search_topk(&q, 1000, &ScoreOptions::default()).expect("valid query");
    for (hit, (s, id)) in got.hits.iter().zip(&oracle) {
        if hit.block_id != *id || hit.score.to_bits() != s.to_bits() {
            bad += 1;
        }
    }
    report(Suite::Maxsim, pairs + 1, bad, 0.0, 0.0)
}

/// Union-find over all region pairs.
pub(crate) fn union_find_components(n: usize, linked: impl Fn(usize, usize) -> bool) -> Vec<Vec<usize>> {
    fn find(parent: &mut [usize], x: usize) -> usize {
        let mut root = x;
        while parent[root] != root {
            root = parent[root];
        }
        let mut cur = x;
        while parent[cur] != root {
            let next = parent[cur];
            parent[cur] = root;
            cur = next;
        }
        root
    }
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in 0..n {
            if i != j && linked(i, j) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    out.sort_by_key(|g| g[0]);
    out
}

fn aggregate_suite(seed: u64) -> SuiteReport {
    let mut rng = synth::rng(seed);
    let cfg = AggregationConfig::default();
    let page = BBox::new(0.0, 0.0, 1000.0, 1000.0).expect("valid");
    let cases = 500;
    let mut bad = 0;
    for _ in 0..cases {
        let regions = synth::random_regions(&mut rng, 30);
        let blocks = layout::aggregate_blocks("p", &regions, &page, &cfg).expect("valid page");
        let got: Vec<Vec<u32>> = blocks.iter().filter(|b| !b.is_mask()).map(|b| b.member_region_ids.clone()).collect();
        let want: Vec<Vec<u32>> = union_find_components(regions.len(), |i, j| layout::merge_predicate(&regions[i], &regions[j], &cfg))
            .into_iter()
            .map(|g| g.into_iter().map(|i| regions[i].id).collect())
            .collect();
        if got != want {
            bad += 1;
        }
    }
    report(Suite::Aggregate, cases, bad, 0.0, 0.0)
}
