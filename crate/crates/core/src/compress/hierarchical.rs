//! Agglomerative pooling with Ward linkage over cosine distances.
//!
//! Distances between clusters are maintained with the Lance–Williams Ward
//! recurrence
//!
//! ```text
//! d(i∪j, k) = ((n_i + n_k) d(i,k) + (n_j + n_k) d(j,k) − n_k d(i,j)) / (n_i + n_j + n_k)
//! ```
//!
//! fed with `1 − cos` as the base dissimilarity. At every step the closest
//! pair is merged; ties go to the pair with the smallest
//! `(min position of a, min position of b)`.
//!
//! Clusters live in slots indexed by their smallest member, so the merged
//! cluster always keeps the lower slot. Each live slot caches its nearest
//! live neighbour among higher slots; only caches touched by a merge are
//! recomputed, which keeps the usual cost near `O(n²)`.

use crate::error::Result;
use crate::matrix::dot;
use crate::store::DocumentRecord;

use super::{identity, pool_clusters, pooled_output, unit_rows, CompressedDocument};

/// Symmetric dense `n × n` dissimilarity matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    d: Vec<f64>,
}

impl DistanceMatrix {
    /// `1 − cos` between unit vectors, clamped at zero.
    pub fn cosine(points: &[Vec<f32>]) -> Self {
        let n = points.len();
        let mut d = vec![0f64; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = (1.0 - dot(&points[i], &points[j])).max(0.0);
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        Self { n, d }
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut d = vec![0f64; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j);
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        Self { n, d }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.d[i * self.n + j] = v;
        self.d[j * self.n + i] = v;
    }
}

/// One agglomeration step: clusters whose smallest members are `a < b`
/// merged at linkage distance `distance`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub distance: f64,
}

/// Lance–Williams update for Ward linkage.
pub fn ward_update(d_ik: f64, d_jk: f64, d_ij: f64, n_i: usize, n_j: usize, n_k: usize) -> f64 {
    let (ni, nj, nk) = (n_i as f64, n_j as f64, n_k as f64);
    ((ni + nk) * d_ik + (nj + nk) * d_jk - nk * d_ij) / (ni + nj + nk)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    pub merges: Vec<Merge>,
    /// Members of each remaining cluster, ordered by smallest member.
    pub clusters: Vec<Vec<usize>>,
}

/// Agglomerates until `target` clusters remain (`1 <= target`).
pub fn ward_agglomerate(mut dist: DistanceMatrix, target: usize) -> Dendrogram {
    let n = dist.len();
    let target = target.max(1);
    let mut live = vec![true; n];
    let mut size = vec![1usize; n];
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut nn = vec![usize::MAX; n];
    let mut nn_d = vec![f64::INFINITY; n];

    let nearest_above = |dist: &DistanceMatrix, live: &[bool], i: usize| -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for j in (i + 1..dist.len()).filter(|&j| live[j]) {
            let v = dist.get(i, j);
            if v < best.1 || best.0 == usize::MAX {
                best = (j, v);
            }
        }
        best
    };
    for i in 0..n {
        (nn[i], nn_d[i]) = nearest_above(&dist, &live, i);
    }

    let mut merges = Vec::with_capacity(n.saturating_sub(target));
    let mut remaining = n;
    while remaining > target {
        let mut a = usize::MAX;
        for i in 0..n {
            if live[i] && nn[i] != usize::MAX && (a == usize::MAX || nn_d[i] < nn_d[a]) {
                a = i;
            }
        }
        let b = nn[a];
        let d_ab = dist.get(a, b);
        merges.push(Merge { a, b, distance: d_ab });

        for k in 0..n {
            if live[k] && k != a && k != b {
                let v = ward_update(dist.get(a, k), dist.get(b, k), d_ab, size[a], size[b], size[k]);
                dist.set(a, k, v);
            }
        }
        live[b] = false;
        size[a] += size[b];
        let moved = std::mem::take(&mut members[b]);
        members[a].extend(moved);
        remaining -= 1;

        for i in 0..b {
            if !live[i] {
                continue;
            }
            if i == a || nn[i] == a || nn[i] == b {
                (nn[i], nn_d[i]) = nearest_above(&dist, &live, i);
            } else if i < a {
                let v = dist.get(i, a);
                if v < nn_d[i] || (v == nn_d[i] && a < nn[i]) {
                    nn[i] = a;
                    nn_d[i] = v;
                }
            }
        }
    }

    let clusters = (0..n)
        .filter(|&i| live[i])
        .map(|i| {
            let mut m = std::mem::take(&mut members[i]);
            m.sort_unstable();
            m
        })
        .collect();
    Dendrogram { merges, clusters }
}

/// Pools non-protected tokens into `c - 1` Ward clusters; output rows follow
/// each cluster's first token position.
pub fn pool_hierarchical(doc: &DocumentRecord, c: usize) -> Result<CompressedDocument> {
    let unit = unit_rows(doc)?;
    let len = doc.len();
    if c >= len || len <= 2 {
        return identity(doc, unit);
    }
    let k = pool_clusters(len, c);
    let tree = ward_agglomerate(DistanceMatrix::cosine(&unit[1..]), k);
    let mut groups = Vec::with_capacity(k + 1);
    groups.push(vec![0]);
    groups.extend(
        tree.clusters
            .into_iter()
            .map(|g| g.into_iter().map(|i| i + 1).collect()),
    );
    pooled_output(doc, &unit, groups)
}
