mod common;

use common::{naive_maxsim, naive_ward, norm, Gen};
use mvseq::compress::hierarchical::{ward_agglomerate, DistanceMatrix};
use mvseq::compress::kmeans::{spherical_kmeans, KMeansOptions};
use mvseq::compress::{budget, compress_document, compress_records, CompressionConfig, Method};
use mvseq::importance::{score_tokens, IdfTable, ScoringMethod};
use mvseq::{maxsim, DocumentRecord, TokenMatrix};
use proptest::prelude::*;

const RATIOS: [f64; 5] = [0.10, 0.20, 0.33, 0.50, 0.75];

fn all_methods() -> Vec<Method> {
    std::iter::once(Method::None).chain(Method::COMPRESSING).collect()
}

fn idf_for(doc: &DocumentRecord) -> IdfTable {
    IdfTable::from_token_lists([doc.token_ids.as_deref().unwrap()])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn budget_protection_and_norms(seed in any::<u64>(), len in 1usize..60, dim in 2usize..8,
                                   ri in 0usize..5, mi in 0usize..9) {
        let mut g = Gen::new(seed);
        let doc = g.document("d", len, dim);
        let method = all_methods()[mi];
        let ratio = RATIOS[ri];
        let config = CompressionConfig::new(method, ratio).with_seed(seed);
        let out = compress_document(&doc, &config, Some(&idf_for(&doc))).unwrap();
        let c = budget(len, ratio);

        let expected = match method {
            Method::None => len,
            m if m.is_pruning() => c.min(len),
            _ => c.max(2).min(len),
        };
        prop_assert_eq!(out.len(), expected);
        prop_assert_eq!(&out.provenance[0], &vec![0]);
        let first = common::normalize(doc.embeddings.row(0));
        prop_assert_eq!(out.embeddings.row(0), first.as_slice());
        for row in out.embeddings.iter_rows() {
            prop_assert!((norm(row) - 1.0).abs() < 1e-5);
        }

        let mut covered: Vec<usize> = out.provenance.iter().flatten().copied().collect();
        covered.sort_unstable();
        if method.is_pruning() {
            prop_assert!(out.provenance.iter().all(|p| p.len() == 1));
            prop_assert!(covered.windows(2).all(|w| w[0] < w[1]));
            let unit = doc.embeddings.normalized().unwrap();
            for (row, p) in out.embeddings.iter_rows().zip(&out.provenance) {
                prop_assert_eq!(row, unit.row(p[0]));
            }
        } else {
            prop_assert_eq!(covered, (0..len).collect::<Vec<_>>());
        }
    }

    #[test]
    fn pruning_never_beats_uncompressed(seed in any::<u64>(), len in 2usize..40, ri in 0usize..5,
                                        mi in 0usize..3) {
        let mut g = Gen::new(seed);
        let doc = g.document("d", len, 6);
        let method = [Method::PruneRandom, Method::PruneAttention, Method::PruneIdf][mi];
        let config = CompressionConfig::new(method, RATIOS[ri]).with_seed(seed);
        let pruned = compress_document(&doc, &config, Some(&idf_for(&doc))).unwrap();
        let full = doc.embeddings.normalized().unwrap();
        let q = g.matrix_in(1, 6, 6);
        prop_assert!(maxsim(&q, &pruned.embeddings).unwrap() <= maxsim(&q, &full).unwrap() + 1e-12);
    }

    #[test]
    fn pooling_is_lossless_on_duplicated_values(seed in any::<u64>(), k in 1usize..6, copies in 1usize..5,
                                                use_kmeans in any::<bool>()) {
        let mut g = Gen::new(seed);
        let dim = 8;
        let values: Vec<Vec<f32>> = (0..k).map(|_| g.vector(dim)).collect();
        let mut rows = vec![g.vector(dim)];
        let mut order: Vec<usize> = (0..k).flat_map(|v| std::iter::repeat_n(v, copies)).collect();
        g.shuffle(&mut order);
        rows.extend(order.iter().map(|&v| values[v].clone()));
        let doc = DocumentRecord::new("d", TokenMatrix::from_rows(&rows).unwrap());
        let len = rows.len();
        // smallest ratio whose budget is exactly k + 1
        let ratio = (k as f64 + 1.0) / len as f64;
        prop_assume!(budget(len, ratio) == k + 1);
        let method = if use_kmeans { Method::PoolKmeans } else { Method::PoolHierarchical };
        let out = compress_document(&doc, &CompressionConfig::new(method, ratio).with_seed(seed), None).unwrap();
        let full = doc.embeddings.normalized().unwrap();
        for _ in 0..5 {
            let q = g.matrix_in(1, 4, dim);
            let a = maxsim(&q, &out.embeddings).unwrap();
            let b = maxsim(&q, &full).unwrap();
            prop_assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
    }

    #[test]
    fn hierarchical_matches_brute_force(seed in any::<u64>(), n in 1usize..9, dim in 2usize..6) {
        let mut g = Gen::new(seed);
        let points: Vec<Vec<f32>> = (0..n).map(|_| g.unit_vector(dim)).collect();
        for target in 1..=n {
            let fast = ward_agglomerate(DistanceMatrix::cosine(&points), target);
            let (merges, clusters) = naive_ward(&points, target);
            prop_assert_eq!(&fast.merges, &merges);
            prop_assert_eq!(&fast.clusters, &clusters);
        }
    }

    #[test]
    fn kmeans_objective_non_decreasing(seed in any::<u64>(), n in 2usize..40, dim in 2usize..6) {
        let mut g = Gen::new(seed);
        let points: Vec<Vec<f32>> = (0..n).map(|_| g.unit_vector(dim)).collect();
        let k = g.range(1, n);
        let fit = spherical_kmeans(&points, k, seed, KMeansOptions::default());
        for w in fit.objective_trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9);
        }
        let mut sizes = vec![0; k];
        for &a in &fit.assignments { sizes[a] += 1; }
        prop_assert!(sizes.iter().all(|&s| s > 0));
    }

    #[test]
    fn attention_scores_follow_permutation(seed in any::<u64>(), len in 2usize..20) {
        let mut g = Gen::new(seed);
        let doc = g.document("d", len, 3);
        let mut perm: Vec<usize> = (1..len).collect();
        g.shuffle(&mut perm);
        let att = doc.attention.clone().unwrap();
        let mut permuted_att = vec![att[0]];
        permuted_att.extend(perm.iter().map(|&p| att[p]));
        let permuted = DocumentRecord::new("d", doc.embeddings.clone()).with_attention(permuted_att);
        let a = score_tokens(&doc, ScoringMethod::Attention, None, 0).unwrap();
        let b = score_tokens(&permuted, ScoringMethod::Attention, None, 0).unwrap();
        for (i, &p) in perm.iter().enumerate() {
            prop_assert_eq!(b.scores[i], a.scores[p - 1]);
        }
    }
}

#[test]
fn idf_scores_ignore_embeddings() {
    let mut g = Gen::new(3);
    let doc = g.document("d", 12, 4);
    let table = idf_for(&doc);
    let mut other = doc.clone();
    other.embeddings = g.matrix(12, 4);
    assert_eq!(
        score_tokens(&doc, ScoringMethod::Idf, Some(&table), 0).unwrap(),
        score_tokens(&other, ScoringMethod::Idf, Some(&table), 0).unwrap()
    );
}

#[test]
fn mixed_length_budgets() {
    let mut g = Gen::new(9);
    let docs: Vec<_> = [4, 10, 301]
        .iter()
        .enumerate()
        .map(|(i, &l)| g.document(&format!("d{i}"), l, 4))
        .collect();
    let out = compress_records(&docs, &CompressionConfig::new(Method::PruneRandom, 0.75), None).unwrap();
    let lens: Vec<_> = out.iter().map(|d| d.len()).collect();
    assert_eq!(lens, [3, 8, 226]);
}

#[test]
fn uniform_corpus_prunes_to_sixty() {
    let mut g = Gen::new(4);
    let docs: Vec<_> = (0..5).map(|i| g.document(&format!("d{i}"), 300, 4)).collect();
    let table = IdfTable::from_token_lists(docs.iter().map(|d| d.token_ids.as_deref().unwrap()));
    for m in [Method::PruneRandom, Method::PruneAttention, Method::PruneIdf] {
        let out = compress_records(&docs, &CompressionConfig::new(m, 0.2), Some(&table)).unwrap();
        assert!(out.iter().all(|d| d.len() == 60), "{m}");
    }
}

#[test]
fn budget_one_pooling_keeps_two_rows_pruning_one() {
    let mut g = Gen::new(5);
    let doc = g.document("d", 5, 4);
    let table = idf_for(&doc);
    for m in Method::COMPRESSING {
        let out = compress_document(&doc, &CompressionConfig::new(m, 0.1), Some(&table)).unwrap();
        let expected = if m.is_pooling() { 2 } else { 1 };
        assert_eq!(out.len(), expected, "{m}");
    }
}

#[test]
fn naive_maxsim_sanity() {
    let q = TokenMatrix::from_rows(&[[1.0f32, 0.0], [0.0, 1.0]]).unwrap();
    let d = TokenMatrix::from_rows(&[[0.6f32, 0.8]]).unwrap();
    assert!((naive_maxsim(&q, &d) - 1.4).abs() < 1e-7);
}
