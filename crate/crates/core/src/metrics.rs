//! TREC qrels/run I/O and the nDCG@k / Recall@k evaluation measures.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::retrieval::{RankedList, ScoredDoc};

/// query_id → doc_id → graded relevance.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels(pub BTreeMap<String, BTreeMap<String, u32>>);

impl Qrels {
    pub fn insert(&mut self, query: &str, doc: &str, grade: u32) {
        self.0
            .entry(query.to_string())
            .or_default()
            .insert(doc.to_string(), grade);
    }

    pub fn get(&self, query: &str) -> Option<&BTreeMap<String, u32>> {
        self.0.get(query)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn relevant(&self, query: &str) -> Result<&BTreeMap<String, u32>> {
        let judged = self
            .get(query)
            .ok_or_else(|| Error::QueryNotInQrels(query.to_string()))?;
        if judged.values().all(|&g| g == 0) {
            return Err(Error::InvalidArgument(format!(
                "query {query:?} has no relevant documents"
            )));
        }
        Ok(judged)
    }
}

/// Parses TREC qrels (`query_id 0 doc_id grade`). A repeated (query, doc)
/// pair keeps its last grade.
pub fn parse_qrels(text: &str, source: &Path) -> Result<Qrels> {
    let mut qrels = Qrels::default();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: source.to_path_buf(),
            line: i + 1,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [q, _, d, g] = fields[..] else {
            return Err(err(format!("expected 4 fields, found {}", fields.len())));
        };
        let grade = g
            .parse::<u32>()
            .map_err(|_| err(format!("invalid grade {g:?}")))?;
        qrels.insert(q, d, grade);
    }
    Ok(qrels)
}

pub fn load_qrels(path: &Path) -> Result<Qrels> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_qrels(&text, path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Gain {
    /// `rel` (trec_eval-style).
    #[default]
    Linear,
    /// `2^rel − 1`.
    Exp,
}

impl Gain {
    fn apply(self, grade: u32) -> f64 {
        match self {
            Gain::Linear => grade as f64,
            Gain::Exp => 2f64.powi(grade as i32) - 1.0,
        }
    }
}

impl FromStr for Gain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Gain::Linear),
            "exp" => Ok(Gain::Exp),
            _ => Err(Error::InvalidArgument(format!("unknown gain {s:?}"))),
        }
    }
}

pub fn ndcg_at_k(ranked: &RankedList, qrels: &Qrels, k: usize, gain: Gain) -> Result<f64> {
    let judged = qrels.relevant(&ranked.query_id)?;
    let discount = |i: usize| ((i + 2) as f64).log2();
    let dcg: f64 = ranked
        .entries
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, e)| gain.apply(judged.get(&e.doc_id).copied().unwrap_or(0)) / discount(i))
        .sum();
    let mut ideal: Vec<u32> = judged.values().copied().filter(|&g| g > 0).collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| gain.apply(g) / discount(i))
        .sum();
    Ok(dcg / idcg)
}

pub fn recall_at_k(ranked: &RankedList, qrels: &Qrels, k: usize) -> Result<f64> {
    let judged = qrels.relevant(&ranked.query_id)?;
    let relevant = judged.values().filter(|&&g| g > 0).count();
    let found = ranked
        .entries
        .iter()
        .take(k)
        .filter(|e| judged.get(&e.doc_id).is_some_and(|&g| g > 0))
        .count();
    Ok(found as f64 / relevant as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub k_ndcg: usize,
    pub k_recall: usize,
    pub gain: Gain,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            k_ndcg: 10,
            k_recall: 100,
            gain: Gain::Linear,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryMetrics {
    pub query_id: String,
    pub ndcg: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub k_ndcg: usize,
    pub k_recall: usize,
    pub gain: Gain,
    pub queries: usize,
    /// Run queries that are missing from the qrels or have no relevant document.
    pub skipped: usize,
    pub ndcg: f64,
    pub recall: f64,
    pub per_query: Vec<QueryMetrics>,
}

impl EvaluationReport {
    pub fn csv_header(&self) -> String {
        format!(
            "queries,skipped,ndcg@{},recall@{}",
            self.k_ndcg, self.k_recall
        )
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.6},{:.6}",
            self.queries, self.skipped, self.ndcg, self.recall
        )
    }
}

/// Averages both measures over the run's evaluable queries. Queries judged
/// in the qrels but absent from the run are not counted.
pub fn evaluate_run(run: &[RankedList], qrels: &Qrels, config: EvalConfig) -> Result<EvaluationReport> {
    let mut per_query = Vec::new();
    let mut skipped = 0;
    for list in run {
        let evaluable = qrels
            .get(&list.query_id)
            .is_some_and(|j| j.values().any(|&g| g > 0));
        if !evaluable {
            skipped += 1;
            continue;
        }
        per_query.push(QueryMetrics {
            query_id: list.query_id.clone(),
            ndcg: ndcg_at_k(list, qrels, config.k_ndcg, config.gain)?,
            recall: recall_at_k(list, qrels, config.k_recall)?,
        });
    }
    if per_query.is_empty() {
        return Err(Error::NoEvaluableQueries);
    }
    let n = per_query.len() as f64;
    Ok(EvaluationReport {
        k_ndcg: config.k_ndcg,
        k_recall: config.k_recall,
        gain: config.gain,
        queries: per_query.len(),
        skipped,
        ndcg: per_query.iter().map(|q| q.ndcg).sum::<f64>() / n,
        recall: per_query.iter().map(|q| q.recall).sum::<f64>() / n,
        per_query,
    })
}

/// Renders a run in TREC format: `query_id Q0 doc_id rank score tag`.
pub fn format_run(run: &[RankedList], tag: &str) -> String {
    let mut out = String::new();
    for list in run {
        for (i, e) in list.entries.iter().enumerate() {
            writeln!(out, "{} Q0 {} {} {:.6} {}", list.query_id, e.doc_id, i + 1, e.score, tag)
                .expect("writing to a String");
        }
    }
    out
}

pub fn write_run(path: &Path, run: &[RankedList], tag: &str) -> Result<()> {
    fs::write(path, format_run(run, tag)).map_err(|e| Error::io(path, e))
}

/// Parses a TREC run. Ranks must increase strictly within each query; the
/// lists come back in order of each query's first appearance.
pub fn parse_run(text: &str, source: &Path) -> Result<Vec<RankedList>> {
    let mut lists: Vec<RankedList> = Vec::new();
    let mut index: HashMap<String, (usize, u64, HashSet<String>)> = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: source.to_path_buf(),
            line: i + 1,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [q, _, d, rank, score, _tag] = fields[..] else {
            return Err(err(format!("expected 6 fields, found {}", fields.len())));
        };
        let rank: u64 = rank
            .parse()
            .ok()
            .filter(|&r| r >= 1)
            .ok_or_else(|| err(format!("invalid rank {rank:?}")))?;
        let score: f64 = score
            .parse()
            .ok()
            .filter(|s: &f64| s.is_finite())
            .ok_or_else(|| err(format!("invalid score {score:?}")))?;
        let (slot, last, seen) = index.entry(q.to_string()).or_insert_with(|| {
            lists.push(RankedList {
                query_id: q.to_string(),
                entries: Vec::new(),
            });
            (lists.len() - 1, 0, HashSet::new())
        });
        if rank <= *last {
            return Err(err(format!(
                "rank {rank} does not increase (previous {last}) for query {q:?}"
            )));
        }
        if !seen.insert(d.to_string()) {
            return Err(err(format!("duplicate doc {d:?} for query {q:?}")));
        }
        *last = rank;
        lists[*slot].entries.push(ScoredDoc {
            doc_id: d.to_string(),
            score,
        });
    }
    Ok(lists)
}

pub fn read_run(path: &Path) -> Result<Vec<RankedList>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_run(&text, path)
}
