//! Shared generators and brute-force oracles for the integration suites.
#![allow(dead_code)]

use std::collections::BTreeMap;

use mvseq::compress::hierarchical::Merge;
use mvseq::rng::SplitMix64;
use mvseq::{DocumentRecord, Qrels, TokenMatrix};

pub struct Gen(pub SplitMix64);

impl Gen {
    pub fn new(seed: u64) -> Self {
        Gen(SplitMix64::new(seed))
    }

    pub fn uniform(&mut self) -> f64 {
        self.0.next_f64()
    }

    pub fn range(&mut self, lo: usize, hi_inclusive: usize) -> usize {
        lo + (self.uniform() * (hi_inclusive - lo + 1) as f64) as usize
    }

    pub fn gaussian(&mut self) -> f64 {
        let u1 = self.uniform().max(1e-300);
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn vector(&mut self, dim: usize) -> Vec<f32> {
        loop {
            let v: Vec<f32> = (0..dim).map(|_| self.gaussian() as f32).collect();
            if v.iter().any(|x| *x != 0.0) {
                return v;
            }
        }
    }

    pub fn unit_vector(&mut self, dim: usize) -> Vec<f32> {
        normalize(&self.vector(dim))
    }

    pub fn matrix(&mut self, rows: usize, dim: usize) -> TokenMatrix {
        let values = (0..rows).flat_map(|_| self.vector(dim)).collect();
        TokenMatrix::new(rows, dim, values).unwrap()
    }

    pub fn matrix_in(&mut self, lo: usize, hi: usize, dim: usize) -> TokenMatrix {
        let rows = self.range(lo, hi);
        self.matrix(rows, dim)
    }

    pub fn document_in(&mut self, id: &str, lo: usize, hi: usize, dim: usize) -> DocumentRecord {
        let len = self.range(lo, hi);
        self.document(id, len, dim)
    }

    pub fn shuffle<T>(&mut self, v: &mut [T]) {
        for i in (1..v.len()).rev() {
            let j = self.range(0, i);
            v.swap(i, j);
        }
    }

    /// Random document with token ids and non-negative attention.
    pub fn document(&mut self, id: &str, len: usize, dim: usize) -> DocumentRecord {
        let embeddings = self.matrix(len, dim);
        let ids = (0..len).map(|_| self.range(0, 200) as u32).collect();
        let att = (0..len).map(|_| self.gaussian().abs() as f32).collect();
        DocumentRecord::new(id, embeddings)
            .with_token_ids(ids)
            .with_attention(att)
    }
}

pub fn normalize(v: &[f32]) -> Vec<f32> {
    let n = v.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    v.iter().map(|&x| (x as f64 / n) as f32).collect()
}

pub fn norm(v: &[f32]) -> f64 {
    v.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt()
}

/// Plain double loop over query and document rows.
pub fn naive_maxsim(q: &TokenMatrix, d: &TokenMatrix) -> f64 {
    let mut total = 0.0;
    for i in 0..q.rows() {
        let mut best = f64::NEG_INFINITY;
        for j in 0..d.rows() {
            let mut s = 0.0;
            for c in 0..q.dim() {
                s += q.row(i)[c] as f64 * d.row(j)[c] as f64;
            }
            if s > best {
                best = s;
            }
        }
        total += best;
    }
    total
}

/// Brute-force Ward agglomeration: every step scans all live cluster pairs
/// and merges the one with the smallest (distance, min member a, min member b).
/// Cluster distances come from the Lance–Williams recurrence applied to a
/// map keyed by cluster ids.
pub fn naive_ward(points: &[Vec<f32>], target: usize) -> (Vec<Merge>, Vec<Vec<usize>>) {
    let n = points.len();
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut dist: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for i in 0..n {
        for j in i + 1..n {
            let dot: f64 = points[i]
                .iter()
                .zip(&points[j])
                .map(|(&a, &b)| a as f64 * b as f64)
                .sum();
            dist.insert((i, j), (1.0 - dot).max(0.0));
        }
    }
    let key = |a: usize, b: usize| if a < b { (a, b) } else { (b, a) };
    let mut merges = Vec::new();
    while clusters.len() > target {
        let mut best: Option<(f64, usize, usize)> = None;
        for x in 0..clusters.len() {
            for y in 0..clusters.len() {
                let (a, b) = (clusters[x][0], clusters[y][0]);
                if a >= b {
                    continue;
                }
                let d = dist[&key(a, b)];
                let better = match best {
                    None => true,
                    Some((bd, ba, bb)) => d < bd || (d == bd && (a, b) < (ba, bb)),
                };
                if better {
                    best = Some((d, a, b));
                }
            }
        }
        let (d_ab, a, b) = best.unwrap();
        let ia = clusters.iter().position(|c| c[0] == a).unwrap();
        let ib = clusters.iter().position(|c| c[0] == b).unwrap();
        let (na, nb) = (clusters[ia].len() as f64, clusters[ib].len() as f64);
        for c in &clusters {
            let k = c[0];
            if k == a || k == b {
                continue;
            }
            let nk = c.len() as f64;
            let v = ((na + nk) * dist[&key(a, k)] + (nb + nk) * dist[&key(b, k)] - nk * d_ab)
                / (na + nb + nk);
            dist.insert(key(a, k), v);
        }
        let moved = clusters.remove(ib);
        let ia = clusters.iter().position(|c| c[0] == a).unwrap();
        clusters[ia].extend(moved);
        clusters[ia].sort_unstable();
        merges.push(Merge { a, b, distance: d_ab });
    }
    clusters.sort_by_key(|c| c[0]);
    (merges, clusters)
}

/// Synthetic corpus where every document holds `bundles` distinct unit
/// directions, each repeated `copies` times in shuffled order after a shared
/// protected row. Query `q{i}` is one direction of document `d{i}`.
pub struct BundleCorpus {
    pub docs: Vec<DocumentRecord>,
    pub queries: Vec<DocumentRecord>,
    pub qrels: Qrels,
}

pub fn bundle_corpus(
    seed: u64,
    n_docs: usize,
    bundles: usize,
    copies: usize,
    n_queries: usize,
    dim: usize,
) -> BundleCorpus {
    let mut g = Gen::new(seed);
    let marker = g.unit_vector(dim);
    let mut docs = Vec::with_capacity(n_docs);
    let mut directions = Vec::with_capacity(n_docs);
    for d in 0..n_docs {
        let dirs: Vec<Vec<f32>> = (0..bundles).map(|_| g.unit_vector(dim)).collect();
        let vocab: Vec<u32> = (0..bundles).map(|_| 1 + g.range(0, 5000) as u32).collect();
        let mut slots: Vec<usize> = (0..bundles).flat_map(|b| std::iter::repeat_n(b, copies)).collect();
        g.shuffle(&mut slots);
        let mut rows = vec![marker.clone()];
        let mut ids = vec![0u32];
        let mut att = vec![g.uniform() as f32];
        for &s in &slots {
            rows.push(dirs[s].clone());
            ids.push(vocab[s]);
            att.push(g.uniform() as f32);
        }
        docs.push(
            DocumentRecord::new(format!("d{d:03}"), TokenMatrix::from_rows(&rows).unwrap())
                .with_token_ids(ids)
                .with_attention(att),
        );
        directions.push(dirs);
    }
    let mut queries = Vec::with_capacity(n_queries);
    let mut qrels = Qrels::default();
    for q in 0..n_queries {
        let target = q % n_docs;
        let b = g.range(0, bundles - 1);
        let row = directions[target][b].clone();
        let id = format!("q{q:03}");
        queries.push(DocumentRecord::new(id.clone(), TokenMatrix::from_rows(&[row]).unwrap()));
        qrels.insert(&id, &format!("d{target:03}"), 1);
    }
    BundleCorpus { docs, queries, qrels }
}

/// Round-half-up of `percent/100 * len` in integer arithmetic, at least 1.
pub fn budget_oracle(len: usize, percent_times_10: usize) -> usize {
    // ratio = percent_times_10 / 1000
    ((percent_times_10 * len + 500) / 1000).clamp(1, len)
}
