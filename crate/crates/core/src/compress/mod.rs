//! Token-sequence compressors.
//!
//! Every method keeps row 0 (the document marker) untouched apart from
//! normalization and maps the remaining rows to at most `C - 1` output rows,
//! where `C = budget(L, r)`. All output rows are ℓ2-normalized.

pub mod anchor;
pub mod hierarchical;
pub mod kmeans;
pub mod prune;

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::importance::{build_idf_table, score_tokens, IdfTable, ScoringMethod};
use crate::matrix::{self, TokenMatrix};
use crate::store::{write_corpus, Corpus, DocumentRecord};

pub use anchor::pool_by_anchors;
pub use hierarchical::pool_hierarchical;
pub use kmeans::pool_kmeans;
pub use prune::prune;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    None,
    PruneRandom,
    PruneAttention,
    PruneIdf,
    PoolRandom,
    PoolAttention,
    PoolIdf,
    PoolKmeans,
    PoolHierarchical,
}

impl Method {
    /// The eight compression methods, excluding the `none` baseline.
    pub const COMPRESSING: [Method; 8] = [
        Method::PruneRandom,
        Method::PruneAttention,
        Method::PruneIdf,
        Method::PoolRandom,
        Method::PoolAttention,
        Method::PoolIdf,
        Method::PoolKmeans,
        Method::PoolHierarchical,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::None => "none",
            Method::PruneRandom => "prune_random",
            Method::PruneAttention => "prune_attention",
            Method::PruneIdf => "prune_idf",
            Method::PoolRandom => "pool_random",
            Method::PoolAttention => "pool_attention",
            Method::PoolIdf => "pool_idf",
            Method::PoolKmeans => "pool_kmeans",
            Method::PoolHierarchical => "pool_hierarchical",
        }
    }

    /// Importance scoring used by the method, if any.
    pub fn scoring(self) -> Option<ScoringMethod> {
        match self {
            Method::PruneRandom | Method::PoolRandom => Some(ScoringMethod::Random),
            Method::PruneAttention | Method::PoolAttention => Some(ScoringMethod::Attention),
            Method::PruneIdf | Method::PoolIdf => Some(ScoringMethod::Idf),
            _ => None,
        }
    }

    pub fn is_pooling(self) -> bool {
        matches!(
            self,
            Method::PoolRandom
                | Method::PoolAttention
                | Method::PoolIdf
                | Method::PoolKmeans
                | Method::PoolHierarchical
        )
    }

    pub fn is_pruning(self) -> bool {
        matches!(
            self,
            Method::PruneRandom | Method::PruneAttention | Method::PruneIdf
        )
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        std::iter::once(Method::None)
            .chain(Method::COMPRESSING)
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressionConfig {
    pub method: Method,
    pub ratio: f64,
    pub seed: u64,
    pub kmeans_max_iters: usize,
    /// Minimum objective gain per k-means iteration; 0 stops only on a
    /// stable assignment or the iteration cap.
    pub kmeans_tolerance: f64,
}

impl CompressionConfig {
    pub fn new(method: Method, ratio: f64) -> Self {
        Self {
            method,
            ratio,
            seed: 0,
            kmeans_max_iters: 20,
            kmeans_tolerance: 0.0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_ratio(self.ratio)?;
        if self.kmeans_max_iters == 0 {
            return Err(Error::InvalidArgument("kmeans iterations must be >= 1".into()));
        }
        if self.kmeans_tolerance.is_nan() || self.kmeans_tolerance < 0.0 {
            return Err(Error::InvalidArgument("kmeans tolerance must be >= 0".into()));
        }
        Ok(())
    }
}

pub fn check_ratio(r: f64) -> Result<()> {
    if r > 0.0 && r <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("ratio {r} must be in (0, 1]")))
    }
}

/// Number of vectors kept for a document of `len` tokens at keep ratio `ratio`,
/// counting the protected token: `max(1, round_half_up(ratio * len))`.
pub fn budget(len: usize, ratio: f64) -> usize {
    // The epsilon absorbs binary representation error in decimal ratios,
    // e.g. 0.35 * 10 = 3.4999999999999996.
    let c = (ratio * len as f64 + 0.5 + 1e-9).floor() as usize;
    c.clamp(1, len.max(1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressedDocument {
    pub doc_id: String,
    pub embeddings: TokenMatrix,
    /// Original token positions behind each output row: one position per
    /// row for pruning, the cluster members for pooling.
    pub provenance: Vec<Vec<usize>>,
}

impl CompressedDocument {
    pub fn len(&self) -> usize {
        self.embeddings.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.embeddings.rows() == 0
    }

    pub fn into_record(self) -> DocumentRecord {
        DocumentRecord::new(self.doc_id, self.embeddings)
    }
}

/// Checks every row for a usable norm and returns the unit-normalized rows.
pub(crate) fn unit_rows(doc: &DocumentRecord) -> Result<Vec<Vec<f32>>> {
    doc.embeddings
        .iter_rows()
        .enumerate()
        .map(|(row, r)| {
            matrix::unit(r).ok_or_else(|| Error::ZeroNorm {
                doc_id: doc.doc_id.clone(),
                row,
            })
        })
        .collect()
}

/// Output with one row per group: the normalized mean of the members' raw
/// embeddings. Group 0 must be `[0]`, the protected token.
pub(crate) fn pooled_output(
    doc: &DocumentRecord,
    unit: &[Vec<f32>],
    groups: Vec<Vec<usize>>,
) -> Result<CompressedDocument> {
    debug_assert_eq!(groups.first().map(Vec::as_slice), Some(&[0usize][..]));
    let dim = doc.embeddings.dim();
    let mut values = Vec::with_capacity(groups.len() * dim);
    let mut mean = vec![0f64; dim];
    for g in &groups {
        mean.iter_mut().for_each(|m| *m = 0.0);
        for &p in g {
            for (m, &x) in mean.iter_mut().zip(doc.embeddings.row(p)) {
                *m += x as f64;
            }
        }
        let raw: Vec<f32> = mean.iter().map(|m| (m / g.len() as f64) as f32).collect();
        // Members whose raw vectors cancel out fall back to the first
        // member's direction.
        let row = matrix::unit(&raw).unwrap_or_else(|| unit[g[0]].clone());
        values.extend(row);
    }
    Ok(CompressedDocument {
        doc_id: doc.doc_id.clone(),
        embeddings: TokenMatrix::new(groups.len(), dim, values)?,
        provenance: groups,
    })
}

/// Every row kept and normalized.
pub(crate) fn identity(doc: &DocumentRecord, unit: Vec<Vec<f32>>) -> Result<CompressedDocument> {
    let rows = unit.len();
    let dim = doc.embeddings.dim();
    Ok(CompressedDocument {
        doc_id: doc.doc_id.clone(),
        embeddings: TokenMatrix::new(rows, dim, unit.into_iter().flatten().collect())?,
        provenance: (0..rows).map(|p| vec![p]).collect(),
    })
}

/// Number of pooled clusters for a budget of `c` vectors over `len` tokens.
/// A budget of one still pools all content tokens into a single row.
pub(crate) fn pool_clusters(len: usize, c: usize) -> usize {
    c.saturating_sub(1).max(1).min(len.saturating_sub(1))
}

/// Compresses one document according to `config`.
pub fn compress_document(
    doc: &DocumentRecord,
    config: &CompressionConfig,
    idf: Option<&IdfTable>,
) -> Result<CompressedDocument> {
    let c = budget(doc.len(), config.ratio);
    let result = match config.method {
        Method::None => unit_rows(doc).and_then(|u| identity(doc, u)),
        Method::PoolKmeans => pool_kmeans(
            doc,
            c,
            config.seed,
            kmeans::KMeansOptions {
                max_iters: config.kmeans_max_iters,
                tolerance: config.kmeans_tolerance,
            },
        ),
        Method::PoolHierarchical => pool_hierarchical(doc, c),
        m => {
            let scoring = m.scoring().expect("scored method");
            let scores = score_tokens(doc, scoring, idf, config.seed)?;
            if m.is_pruning() {
                prune(doc, &scores, c)
            } else {
                pool_by_anchors(doc, &scores, c)
            }
        }
    };
    result.map_err(|e| e.in_doc(&doc.doc_id))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompressionSummary {
    pub method: String,
    pub ratio: f64,
    pub docs: usize,
    pub input_tokens: usize,
    pub output_tokens: usize,
    pub achieved_ratio: f64,
    /// Pooled documents that kept two rows although their budget was one.
    pub over_budget_docs: usize,
    pub wall_time: f64,
}

/// Resolves the IDF table a method needs, building it from the corpus when
/// none is supplied.
pub fn require_inputs(
    corpus: &Corpus,
    method: Method,
    idf: Option<IdfTable>,
) -> Result<Option<IdfTable>> {
    match method.scoring() {
        Some(ScoringMethod::Idf) => match idf {
            Some(t) => {
                if !corpus.has_token_ids() {
                    return Err(Error::MissingField("idf requires token ids".into()));
                }
                Ok(Some(t))
            }
            None => build_idf_table(corpus).map(Some),
        },
        Some(ScoringMethod::Attention) if !corpus.has_attention() => Err(Error::MissingField(
            "attention scoring requires attention".into(),
        )),
        _ => Ok(idf),
    }
}

/// Compresses every document of `corpus` and writes the result as a new
/// corpus at `out`. Documents are processed in parallel on the current rayon
/// pool; output order always follows the input manifest.
pub fn compress_corpus(
    corpus: &Corpus,
    config: &CompressionConfig,
    idf: Option<IdfTable>,
    out: &Path,
) -> Result<CompressionSummary> {
    config.validate()?;
    let start = Instant::now();
    let idf = require_inputs(corpus, config.method, idf)?;
    let docs = corpus.load_all()?;
    let compressed = compress_records(&docs, config, idf.as_ref())?;

    let input_tokens: usize = docs.iter().map(DocumentRecord::len).sum();
    let output_tokens: usize = compressed.iter().map(CompressedDocument::len).sum();
    let over_budget_docs = docs
        .iter()
        .zip(&compressed)
        .filter(|(d, c)| c.len() > budget(d.len(), config.ratio))
        .count();
    let records: Vec<DocumentRecord> = compressed
        .into_iter()
        .map(CompressedDocument::into_record)
        .collect();
    write_corpus(&records, out)?;

    Ok(CompressionSummary {
        method: config.method.to_string(),
        ratio: config.ratio,
        docs: docs.len(),
        input_tokens,
        output_tokens,
        achieved_ratio: output_tokens as f64 / input_tokens as f64,
        over_budget_docs,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// In-memory counterpart of [`compress_corpus`].
pub fn compress_records(
    docs: &[DocumentRecord],
    config: &CompressionConfig,
    idf: Option<&IdfTable>,
) -> Result<Vec<CompressedDocument>> {
    config.validate()?;
    docs.par_iter()
        .map(|d| compress_document(d, config, idf))
        .collect()
}
