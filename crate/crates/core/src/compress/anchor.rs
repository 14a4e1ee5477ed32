//! Anchor pooling: the top-scoring tokens seed clusters and every other
//! token joins the anchor it is most cosine-similar to.

use crate::error::Result;
use crate::importance::ImportanceScores;
use crate::matrix::dot;
use crate::store::DocumentRecord;

use super::prune::check_alignment;
use super::{identity, pool_clusters, pooled_output, unit_rows, CompressedDocument};

pub fn pool_by_anchors(
    doc: &DocumentRecord,
    scores: &ImportanceScores,
    c: usize,
) -> Result<CompressedDocument> {
    check_alignment(doc, scores)?;
    let unit = unit_rows(doc)?;
    let len = doc.len();
    if c >= len || len <= 2 {
        return identity(doc, unit);
    }
    let k = pool_clusters(len, c);
    let anchors = scores.top_positions(k);

    let mut groups: Vec<Vec<usize>> = anchors.iter().map(|&a| vec![a]).collect();
    let mut is_anchor = vec![false; len];
    for &a in &anchors {
        is_anchor[a] = true;
    }
    // Anchors always seed their own cluster, even when a duplicate anchor
    // is equally similar.
    for p in (1..len).filter(|&p| !is_anchor[p]) {
        let mut best = 0;
        let mut best_sim = f64::NEG_INFINITY;
        for (i, &a) in anchors.iter().enumerate() {
            let s = dot(&unit[p], &unit[a]);
            if s > best_sim {
                best_sim = s;
                best = i;
            }
        }
        groups[best].push(p);
    }
    for g in &mut groups {
        g.sort_unstable();
    }

    let mut all = Vec::with_capacity(groups.len() + 1);
    all.push(vec![0]);
    all.extend(groups);
    pooled_output(doc, &unit, all)
}
