//! Per-token importance scores over the non-protected positions of a document.
//!
//! Position 0 (the document marker) never receives a score: `scores[i]`
//! belongs to token position `i + 1`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::store::{Corpus, DocumentRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScoringMethod {
    Random,
    Attention,
    Idf,
}

/// Corpus-level document frequencies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdfTable {
    pub doc_count: u64,
    pub df: BTreeMap<u32, u64>,
}

impl IdfTable {
    /// Builds a table from per-document token id lists.
    pub fn from_token_lists<'a, I>(docs: I) -> Self
    where
        I: IntoIterator<Item = &'a [u32]>,
    {
        let mut df = BTreeMap::new();
        let mut doc_count = 0;
        for ids in docs {
            doc_count += 1;
            let unique: HashSet<u32> = ids.iter().copied().collect();
            for t in unique {
                *df.entry(t).or_insert(0) += 1;
            }
        }
        Self { doc_count, df }
    }

    pub fn df(&self, token: u32) -> u64 {
        self.df.get(&token).copied().unwrap_or(0)
    }

    /// `ln((N + 1) / (df + 1))`; unseen tokens get the maximum value.
    pub fn idf(&self, token: u32) -> f64 {
        ((self.doc_count as f64 + 1.0) / (self.df(token) as f64 + 1.0)).ln()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_vec(self).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let table: IdfTable = serde_json::from_slice(&bytes).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        if let Some((t, n)) = table
            .df
            .iter()
            .find(|(_, &n)| n == 0 || n > table.doc_count)
        {
            return Err(Error::InvalidArgument(format!(
                "idf table {}: df({t}) = {n} outside [1, {}]",
                path.display(),
                table.doc_count
            )));
        }
        Ok(table)
    }
}

pub fn build_idf_table(corpus: &Corpus) -> Result<IdfTable> {
    if !corpus.has_token_ids() {
        return Err(Error::MissingField("idf requires token ids".into()));
    }
    let mut lists = Vec::with_capacity(corpus.len());
    for rec in corpus.iter() {
        let rec = rec?;
        lists.push(rec.token_ids.unwrap_or_default());
    }
    Ok(IdfTable::from_token_lists(lists.iter().map(Vec::as_slice)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceScores {
    pub doc_id: String,
    pub scores: Vec<f64>,
}

impl ImportanceScores {
    /// Token positions (1-based, i.e. excluding the protected row) of the `k`
    /// highest scores, returned in ascending position order. Ties go to the
    /// lower position.
    pub fn top_positions(&self, k: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.scores.len()).collect();
        order.sort_by(|&a, &b| {
            self.scores[b]
                .partial_cmp(&self.scores[a])
                .unwrap_or(Ordering::Equal)
                .then(a.cmp(&b))
        });
        order.truncate(k);
        order.sort_unstable();
        order.into_iter().map(|i| i + 1).collect()
    }
}

pub fn score_tokens(
    doc: &DocumentRecord,
    method: ScoringMethod,
    idf: Option<&IdfTable>,
    seed: u64,
) -> Result<ImportanceScores> {
    let l = doc.len();
    let scores = match method {
        ScoringMethod::Random => {
            let key = rng::derive(seed, &doc.doc_id);
            (1..l).map(|p| rng::keyed_uniform(key, p as u64)).collect()
        }
        ScoringMethod::Attention => {
            let att = doc
                .attention
                .as_ref()
                .ok_or_else(|| Error::MissingField("attention scoring requires attention".into()))?;
            att[1..].iter().map(|&a| a as f64).collect()
        }
        ScoringMethod::Idf => {
            let ids = doc
                .token_ids
                .as_ref()
                .ok_or_else(|| Error::MissingField("idf requires token ids".into()))?;
            let table =
                idf.ok_or_else(|| Error::MissingField("idf requires an idf table".into()))?;
            ids[1..].iter().map(|&t| table.idf(t)).collect()
        }
    };
    Ok(ImportanceScores {
        doc_id: doc.doc_id.clone(),
        scores,
    })
}
