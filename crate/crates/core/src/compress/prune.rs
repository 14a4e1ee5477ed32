use crate::error::{Error, Result};
use crate::importance::ImportanceScores;
use crate::store::DocumentRecord;

use super::{identity, unit_rows, CompressedDocument};

pub(crate) fn check_alignment(doc: &DocumentRecord, scores: &ImportanceScores) -> Result<()> {
    if scores.scores.len() + 1 != doc.len() {
        return Err(Error::InvalidArgument(format!(
            "misaligned scores: {} scores for {} tokens",
            scores.scores.len(),
            doc.len()
        )));
    }
    Ok(())
}

/// Keeps the protected row plus the `c - 1` highest-scoring rows, in
/// original order.
pub fn prune(doc: &DocumentRecord, scores: &ImportanceScores, c: usize) -> Result<CompressedDocument> {
    check_alignment(doc, scores)?;
    let unit = unit_rows(doc)?;
    if c >= doc.len() {
        return identity(doc, unit);
    }
    let kept: Vec<usize> = std::iter::once(0)
        .chain(scores.top_positions(c.saturating_sub(1)))
        .collect();
    let dim = doc.embeddings.dim();
    let values = kept.iter().flat_map(|&p| unit[p].iter().copied()).collect();
    Ok(CompressedDocument {
        doc_id: doc.doc_id.clone(),
        embeddings: crate::matrix::TokenMatrix::new(kept.len(), dim, values)?,
        provenance: kept.into_iter().map(|p| vec![p]).collect(),
    })
}
