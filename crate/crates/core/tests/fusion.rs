use blockrag_core::fusion::{self, EmbeddingMatrix, LossBatch, QueryScores};
use blockrag_core::synth;
use proptest::prelude::*;
use rand::Rng;

fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> EmbeddingMatrix {
    let data = (0..rows * cols).map(|_| rng.gen_range(-scale..scale)).collect();
    EmbeddingMatrix::new(rows, cols, data).unwrap()
}

// Textbook attention with no max-shift, fine for the small magnitudes used here.
fn naive_attention(q: &EmbeddingMatrix, k: &EmbeddingMatrix, v: &EmbeddingMatrix) -> Vec<Vec<f64>> {
    let d = q.cols() as f64;
    (0..q.rows())
        .map(|i| {
            let logits: Vec<f64> = (0..k.rows())
                .map(|j| (0..q.cols()).map(|c| q.get(i, c) * k.get(j, c)).sum::<f64>() / d.sqrt())
                .collect();
            let z: f64 = logits.iter().map(|l| l.exp()).sum();
            (0..v.cols()).map(|c| (0..k.rows()).map(|j| logits[j].exp() / z * v.get(j, c)).sum()).collect()
        })
        .collect()
}

#[test]
fn attention_rows_are_stochastic() {
    let mut rng = synth::rng(1);
    for _ in 0..500 {
        let (n, m, d) = (rng.gen_range(1..6), rng.gen_range(1..10), rng.gen_range(1..12));
        let w = fusion::attention_weights(&random_matrix(&mut rng, n, d, 4.0), &random_matrix(&mut rng, m, d, 4.0)).unwrap();
        assert_eq!((w.rows(), w.cols()), (n, m));
        for row in w.iter_rows() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            assert!(row.iter().all(|x| *x >= 0.0 && *x <= 1.0));
        }
    }
}

#[test]
fn attention_matches_textbook_formula() {
    let mut rng = synth::rng(2);
    for _ in 0..300 {
        let (n, m, d, dv) = (rng.gen_range(1..5), rng.gen_range(1..8), rng.gen_range(1..10), rng.gen_range(1..6));
        let (q, k, v) = (
            random_matrix(&mut rng, n, d, 1.0),
            random_matrix(&mut rng, m, d, 1.0),
            random_matrix(&mut rng, m, dv, 3.0),
        );
        let got = fusion::attention(&q, &k, &v).unwrap();
        for (row, want) in got.iter_rows().zip(naive_attention(&q, &k, &v)) {
            for (a, b) in row.iter().zip(want) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }
}

#[test]
fn outputs_lie_in_value_hull() {
    let mut rng = synth::rng(3);
    for _ in 0..300 {
        let (n, m, d, dv) = (rng.gen_range(1..5), rng.gen_range(1..8), rng.gen_range(1..10), rng.gen_range(1..6));
        let v = random_matrix(&mut rng, m, dv, 10.0);
        let out = fusion::attention(&random_matrix(&mut rng, n, d, 5.0), &random_matrix(&mut rng, m, d, 5.0), &v).unwrap();
        for row in out.iter_rows() {
            for (c, x) in row.iter().enumerate() {
                let col: Vec<f64> = (0..m).map(|j| v.get(j, c)).collect();
                let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                assert!(*x >= lo - 1e-12 && *x <= hi + 1e-12);
            }
        }
    }
}

#[test]
fn single_key_is_exact() {
    let mut rng = synth::rng(4);
    for _ in 0..100 {
        let d = rng.gen_range(1..8);
        let v = random_matrix(&mut rng, 1, 5, 100.0);
        let out = fusion::attention(&random_matrix(&mut rng, 3, d, 50.0), &random_matrix(&mut rng, 1, d, 50.0), &v).unwrap();
        for row in out.iter_rows() {
            assert_eq!(row, v.row(0));
        }
    }
}

#[test]
fn large_logits_stay_finite() {
    let q = EmbeddingMatrix::from_rows(&[[1e4, -1e4]]).unwrap();
    let k = EmbeddingMatrix::from_rows(&[[1e4, 0.0], [-1e4, 0.0], [0.0, 1e4]]).unwrap();
    let w = fusion::attention_weights(&q, &k).unwrap();
    assert!(w.as_slice().iter().all(|x| x.is_finite()));
    assert_eq!(w.row(0)[0], 1.0);
}

#[test]
fn shape_errors_are_reported() {
    let a = EmbeddingMatrix::zeros(2, 3);
    let b = EmbeddingMatrix::zeros(2, 4);
    assert!(fusion::attention_weights(&a, &b).is_err());
    assert!(fusion::attention(&a, &a, &EmbeddingMatrix::zeros(3, 2)).is_err());
    assert!(fusion::attention_weights(&a, &EmbeddingMatrix::zeros(0, 3)).is_err());
    assert!(fusion::fuse_and_project(&[1.0], &[1.0], &EmbeddingMatrix::zeros(2, 3)).is_err());
    assert!(fusion::assemble_block_rep(&[1.0, 2.0], &EmbeddingMatrix::zeros(3, 4)).is_err());
    assert!(EmbeddingMatrix::new(1, 2, vec![0.0, f64::NAN]).is_err());
}

#[test]
fn contextualize_uses_global_as_keys_and_values() {
    let mut rng = synth::rng(5);
    let global = random_matrix(&mut rng, 6, 4, 1.0);
    let blocks: Vec<Vec<f64>> = (0..3).map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let ctx = fusion::contextualize(&blocks, &global).unwrap();
    let stacked = EmbeddingMatrix::from_rows(&blocks).unwrap();
    let want = naive_attention(&stacked, &global, &global);
    assert_eq!(ctx.len(), 3);
    for (a, b) in ctx.iter().zip(&want) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-12);
        }
    }
    // each block attends on its own: results don't depend on the other rows
    let alone = fusion::contextualize(&blocks[1..2], &global).unwrap();
    assert_eq!(alone[0], ctx[1]);
    assert!(fusion::contextualize(&[], &global).unwrap().is_empty());
}

#[test]
fn encode_chain_layout() {
    let mut rng = synth::rng(6);
    let (d, out_d) = (4, 3);
    let global = random_matrix(&mut rng, 5, d, 1.0);
    let w_p = random_matrix(&mut rng, out_d, 2 * d, 1.0);
    let blocks: Vec<Vec<f64>> = (0..2).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let tags = vec![random_matrix(&mut rng, 2, out_d, 1.0), random_matrix(&mut rng, 3, out_d, 1.0)];
    let reps = fusion::encode_page_blocks(&blocks, &global, &w_p, &tags).unwrap();
    let ctx = fusion::contextualize(&blocks, &global).unwrap();
    for (i, rep) in reps.iter().enumerate() {
        assert_eq!(rep.rows(), tags[i].rows() + 1);
        assert_eq!(rep.row(0), fusion::fuse_and_project(&blocks[i], &ctx[i], &w_p).unwrap().as_slice());
        for r in 0..tags[i].rows() {
            assert_eq!(rep.row(r + 1), tags[i].row(r));
        }
    }
    assert!(fusion::encode_page_blocks(&blocks, &global, &w_p, &tags[..1]).is_err());
}

proptest! {
    #[test]
    fn projection_is_linear(
        seed in 0u64..10_000,
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let mut rng = synth::rng(seed);
        let (dh, dc, out) = (rng.gen_range(1..6), rng.gen_range(1..6), rng.gen_range(1..5));
        let w = random_matrix(&mut rng, out, dh + dc, 2.0);
        let v = |rng: &mut rand_chacha::ChaCha8Rng, n| (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect::<Vec<f64>>();
        let (h1, c1, h2, c2) = (v(&mut rng, dh), v(&mut rng, dc), v(&mut rng, dh), v(&mut rng, dc));
        let mix = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| a * p + b * q).collect::<Vec<f64>>();
        let lhs = fusion::fuse_and_project(&mix(&h1, &h2), &mix(&c1, &c2), &w).unwrap();
        let f1 = fusion::fuse_and_project(&h1, &c1, &w).unwrap();
        let f2 = fusion::fuse_and_project(&h2, &c2, &w).unwrap();
        for i in 0..out {
            prop_assert!((lhs[i] - (a * f1[i] + b * f2[i])).abs() < 1e-10);
        }
    }

    // Adding the same vector to every key shifts each logit row by a constant.
    #[test]
    fn weights_ignore_common_key_offset(seed in 0u64..10_000) {
        let mut rng = synth::rng(seed);
        let (n, m, d) = (rng.gen_range(1..4), rng.gen_range(1..6), rng.gen_range(1..6));
        let q = random_matrix(&mut rng, n, d, 2.0);
        let k = random_matrix(&mut rng, m, d, 2.0);
        let shift: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let rows: Vec<Vec<f64>> = k.iter_rows().map(|r| r.iter().zip(&shift).map(|(x, s)| x + s).collect()).collect();
        let k2 = EmbeddingMatrix::from_rows(&rows).unwrap();
        let (w1, w2) = (fusion::attention_weights(&q, &k).unwrap(), fusion::attention_weights(&q, &k2).unwrap());
        for (x, y) in w1.as_slice().iter().zip(w2.as_slice()) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }
}

// ---- contrastive objective ----

fn reference_loss(batch: &LossBatch) -> f64 {
    let t = batch.temperature;
    let per: Vec<f64> = batch
        .queries
        .iter()
        .map(|q| {
            let pos: f64 = q.positives.iter().map(|s| (s / t).exp()).sum();
            let neg: f64 = q.negatives.iter().map(|s| (s / t).exp()).sum();
            -(pos / (pos + neg)).ln()
        })
        .collect();
    per.iter().sum::<f64>() / per.len() as f64
}

fn random_batch<R: Rng>(rng: &mut R, tau: f64) -> LossBatch {
    let b = rng.gen_range(1..6);
    let queries = (0..b)
        .map(|_| {
            let np = rng.gen_range(1..4);
            let nn = rng.gen_range(0..8);
            QueryScores {
                positives: (0..np).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                negatives: (0..nn).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            }
        })
        .collect();
    LossBatch::new(queries, tau)
}

fn bumped(batch: &LossBatch, qi: usize, pos: bool, j: usize, delta: f64) -> LossBatch {
    let mut b = batch.clone();
    let list = if pos { &mut b.queries[qi].positives } else { &mut b.queries[qi].negatives };
    list[j] += delta;
    b
}

#[test]
fn loss_matches_direct_formula() {
    let mut rng = synth::rng(7);
    for case in 0..300 {
        let tau = if case % 3 == 0 { 0.02 } else { rng.gen_range(0.05..2.0) };
        let batch = random_batch(&mut rng, tau);
        let got = fusion::contrastive_loss(&batch).unwrap();
        let want = reference_loss(&batch);
        assert!((got - want).abs() <= 1e-10 * want.abs().max(1.0), "{got} vs {want}");
    }
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = synth::rng(8);
    let h = 1e-6;
    let mut worst = 0.0f64;
    for case in 0..100 {
        let tau = if case % 2 == 0 { 0.02 } else { rng.gen_range(0.05..1.0) };
        let batch = random_batch(&mut rng, tau);
        let grad = fusion::contrastive_loss_grad(&batch).unwrap();
        for qi in 0..batch.queries.len() {
            for pos in [true, false] {
                let n = if pos { batch.queries[qi].positives.len() } else { batch.queries[qi].negatives.len() };
                for j in 0..n {
                    let fd = (reference_loss(&bumped(&batch, qi, pos, j, h)) - reference_loss(&bumped(&batch, qi, pos, j, -h)))
                        / (2.0 * h);
                    let an = if pos { grad.queries[qi].positives[j] } else { grad.queries[qi].negatives[j] };
                    worst = worst.max((fd - an).abs() / fd.abs().max(an.abs()).max(1e-3));
                }
            }
        }
    }
    assert!(worst < 1e-5, "max relative gradient error {worst:e}");
}

#[test]
fn loss_is_finite_nonnegative_and_monotone() {
    let mut rng = synth::rng(9);
    for case in 0..500 {
        let tau = if case % 2 == 0 { 0.02 } else { rng.gen_range(0.01..1.0) };
        let batch = random_batch(&mut rng, tau);
        let base = fusion::contrastive_loss(&batch).unwrap();
        assert!(base.is_finite() && base >= 0.0);
        let qi = rng.gen_range(0..batch.queries.len());
        let up_pos = fusion::contrastive_loss(&bumped(&batch, qi, true, 0, 0.05)).unwrap();
        // tolerance covers rounding when the bumped positive carries ~no weight
        let slack = 1e-12 * base.max(1.0);
        assert!(up_pos <= base + slack, "{up_pos} > {base} (case {case})");
        if !batch.queries[qi].negatives.is_empty() {
            let up_neg = fusion::contrastive_loss(&bumped(&batch, qi, false, 0, 0.05)).unwrap();
            assert!(up_neg >= base - slack);
        }
        let grad = fusion::contrastive_loss_grad(&batch).unwrap();
        for g in &grad.queries {
            assert!(g.positives.iter().all(|v| *v <= 0.0 && v.is_finite()));
            assert!(g.negatives.iter().all(|v| *v >= 0.0 && v.is_finite()));
        }
    }
}

#[test]
fn score_matrix_split() {
    let scores = vec![vec![0.9, 0.1, 0.4], vec![0.2, 0.8, 0.7]];
    let b = LossBatch::from_score_matrix(&scores, &[vec![0], vec![1, 2]], 0.02).unwrap();
    assert_eq!(b.queries[0].positives, vec![0.9]);
    assert_eq!(b.queries[0].negatives, vec![0.1, 0.4]);
    assert_eq!(b.queries[1].positives, vec![0.8, 0.7]);
    assert!((fusion::contrastive_loss(&b).unwrap() - reference_loss(&b)).abs() < 1e-12);
    assert!(LossBatch::from_score_matrix(&scores, &[vec![0], vec![]], 0.02).is_err());
    assert!(LossBatch::from_score_matrix(&scores, &[vec![3], vec![1]], 0.02).is_err());
    assert!(LossBatch::from_score_matrix(&scores, &[vec![0]], 0.02).is_err());
    assert!(fusion::contrastive_loss(&LossBatch::new(b.queries.clone(), 0.0)).is_err());
    assert!(fusion::contrastive_loss(&LossBatch::new(vec![], 0.02)).is_err());
}
