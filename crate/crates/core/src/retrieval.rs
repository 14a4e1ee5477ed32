//! Exhaustive late-interaction (MaxSim) scoring and top-k search.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{dot, TokenMatrix};
use crate::store::DocumentRecord;

/// `Σ_i max_j <q_i, d_j>`, accumulated in f64.
pub fn maxsim(query: &TokenMatrix, doc: &TokenMatrix) -> Result<f64> {
    if query.dim() != doc.dim() {
        return Err(Error::DimMismatch {
            expected: doc.dim(),
            actual: query.dim(),
        });
    }
    if query.rows() == 0 || doc.rows() == 0 {
        return Err(Error::EmptyMatrix);
    }
    Ok(maxsim_unchecked(query, doc))
}

fn maxsim_unchecked(query: &TokenMatrix, doc: &TokenMatrix) -> f64 {
    query
        .iter_rows()
        .map(|q| {
            doc.iter_rows()
                .map(|d| dot(q, d))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredDoc {
    pub doc_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub query_id: String,
    /// Descending score, ties by ascending doc_id.
    pub entries: Vec<ScoredDoc>,
}

fn rank_order(a: &ScoredDoc, b: &ScoredDoc) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.doc_id.cmp(&b.doc_id))
}

impl RankedList {
    /// Sorts `entries` into rank order and keeps the first `k`.
    pub fn from_scores(query_id: impl Into<String>, mut entries: Vec<ScoredDoc>, k: usize) -> Self {
        entries.sort_by(rank_order);
        entries.truncate(k);
        Self {
            query_id: query_id.into(),
            entries,
        }
    }
}

/// Scores every query against every document and keeps the top `k` per query.
/// Results follow query input order.
pub fn search(queries: &[DocumentRecord], docs: &[DocumentRecord], k: usize) -> Result<Vec<RankedList>> {
    let first = docs.first().ok_or(Error::EmptyCorpus)?;
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    let dim = first.embeddings.dim();
    for r in docs.iter().chain(queries) {
        if r.embeddings.dim() != dim {
            return Err(Error::DimMismatch {
                expected: dim,
                actual: r.embeddings.dim(),
            });
        }
    }
    Ok(queries
        .par_iter()
        .map(|q| {
            let scored = docs
                .iter()
                .map(|d| ScoredDoc {
                    doc_id: d.doc_id.clone(),
                    score: maxsim_unchecked(&q.embeddings, &d.embeddings),
                })
                .collect();
            RankedList::from_scores(q.doc_id.clone(), scored, k)
        })
        .collect())
}
