//! Spherical k-means over unit-normalized token embeddings.

use crate::error::Result;
use crate::matrix::dot;
use crate::rng::{self, SplitMix64};
use crate::store::DocumentRecord;

use super::{identity, pool_clusters, pooled_output, unit_rows, CompressedDocument};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansOptions {
    pub max_iters: usize,
    pub tolerance: f64,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            max_iters: 20,
            tolerance: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    /// Cluster index per point.
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Objective `Σ_i <x_i, centroid(x_i)>` after each update step.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl KMeansFit {
    pub fn objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(f64::NEG_INFINITY)
    }
}

/// Fits `k` unit centroids to unit-norm `points` (`1 <= k <= points.len()`),
/// seeding with k-means++ drawn from `rng_key`.
pub fn spherical_kmeans(points: &[Vec<f32>], k: usize, rng_key: u64, opts: KMeansOptions) -> KMeansFit {
    let n = points.len();
    assert!(k >= 1 && k <= n, "k = {k} out of range for {n} points");
    let mut centroids = seed_plus_plus(points, k, &mut SplitMix64::new(rng_key));

    let mut assignments = vec![usize::MAX; n];
    let mut sims = vec![0f64; n];
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iters {
        let mut next = vec![0usize; n];
        for (i, x) in points.iter().enumerate() {
            let (mut best, mut best_sim) = (0, f64::NEG_INFINITY);
            for (c, centroid) in centroids.iter().enumerate() {
                let s = dot64(x, centroid);
                if s > best_sim {
                    best = c;
                    best_sim = s;
                }
            }
            next[i] = best;
            sims[i] = best_sim;
        }
        repair_empty(&mut next, &mut sims, k);

        if next == assignments {
            converged = true;
            break;
        }
        assignments = next;
        iterations += 1;
        update_centroids(points, &assignments, &mut centroids);

        let objective: f64 = points
            .iter()
            .zip(&assignments)
            .map(|(x, &c)| dot64(x, &centroids[c]))
            .sum();
        let gain = trace.last().map(|prev| objective - prev);
        trace.push(objective);
        if opts.tolerance > 0.0 && gain.is_some_and(|g| g < opts.tolerance) {
            converged = true;
            break;
        }
    }

    KMeansFit {
        assignments,
        centroids,
        objective_trace: trace,
        iterations,
        converged,
    }
}

fn dot64(x: &[f32], c: &[f64]) -> f64 {
    x.iter().zip(c).map(|(&a, &b)| a as f64 * b).sum()
}

/// k-means++ on cosine distance: each new centre is drawn with probability
/// proportional to `1 - max cos` to the centres chosen so far, which is half
/// the squared Euclidean distance between unit vectors.
fn seed_plus_plus(points: &[Vec<f32>], k: usize, rng: &mut SplitMix64) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen = vec![false; n];
    let first = ((rng.next_f64() * n as f64) as usize).min(n - 1);
    chosen[first] = true;
    let mut centres = vec![first];
    let mut weight: Vec<f64> = points
        .iter()
        .map(|x| (1.0 - dot(x, &points[first])).max(0.0))
        .collect();

    while centres.len() < k {
        let total: f64 = weight.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.next_f64() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in weight.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                acc += w;
                pick = Some(i);
                if acc > target {
                    break;
                }
            }
            pick.expect("positive total weight")
        } else {
            // Fewer distinct directions than clusters.
            (0..n).find(|&i| !chosen[i]).expect("k <= n")
        };
        chosen[pick] = true;
        centres.push(pick);
        for (w, x) in weight.iter_mut().zip(points) {
            *w = w.min((1.0 - dot(x, &points[pick])).max(0.0));
        }
        weight[pick] = 0.0;
    }
    centres
        .into_iter()
        .map(|i| points[i].iter().map(|&v| v as f64).collect())
        .collect()
}

/// Gives every empty cluster the point with the lowest similarity to its
/// current centroid, taken from a cluster that can spare one.
fn repair_empty(assign: &mut [usize], sims: &mut [f64], k: usize) {
    let mut sizes = vec![0usize; k];
    for &a in assign.iter() {
        sizes[a] += 1;
    }
    for c in 0..k {
        if sizes[c] > 0 {
            continue;
        }
        let donor = (0..assign.len())
            .filter(|&i| sizes[assign[i]] > 1)
            .min_by(|&a, &b| sims[a].total_cmp(&sims[b]).then(a.cmp(&b)))
            .expect("k <= n guarantees a donor");
        sizes[assign[donor]] -= 1;
        assign[donor] = c;
        sizes[c] = 1;
        sims[donor] = f64::INFINITY;
    }
}

fn update_centroids(points: &[Vec<f32>], assign: &[usize], centroids: &mut [Vec<f64>]) {
    let dim = points[0].len();
    let mut sums = vec![vec![0f64; dim]; centroids.len()];
    let mut first = vec![usize::MAX; centroids.len()];
    for (i, (x, &c)) in points.iter().zip(assign).enumerate() {
        first[c] = first[c].min(i);
        for (s, &v) in sums[c].iter_mut().zip(x) {
            *s += v as f64;
        }
    }
    for (c, sum) in sums.into_iter().enumerate() {
        let n = sum.iter().map(|v| v * v).sum::<f64>().sqrt();
        centroids[c] = if n > 0.0 {
            sum.into_iter().map(|v| v / n).collect()
        } else {
            // antipodal members cancel; fall back to the first member
            points[first[c]].iter().map(|&v| v as f64).collect()
        };
    }
}

/// Pools non-protected tokens into `c - 1` spherical k-means clusters.
/// Output rows are the normalized raw means of each cluster, ordered by the
/// cluster's first token position.
pub fn pool_kmeans(
    doc: &DocumentRecord,
    c: usize,
    seed: u64,
    opts: KMeansOptions,
) -> Result<CompressedDocument> {
    let unit_all = unit_rows(doc)?;
    let len = doc.len();
    if c >= len || len <= 2 {
        return identity(doc, unit_all);
    }
    let k = pool_clusters(len, c);
    let points = &unit_all[1..];
    let fit = spherical_kmeans(points, k, rng::derive(seed, &doc.doc_id), opts);

    let mut groups = vec![Vec::new(); k];
    for (i, &a) in fit.assignments.iter().enumerate() {
        groups[a].push(i + 1);
    }
    groups.sort_by_key(|g| g[0]);
    let mut all = Vec::with_capacity(k + 1);
    all.push(vec![0]);
    all.extend(groups);
    pooled_output(doc, &unit_all, all)
}
