//! Method × keep-ratio sweeps with a CSV report.
//!
//! Work-dir layout, one directory per cell:
//!
//! ```text
//! <work>/none/1/corpus/        normalized, uncompressed baseline
//! <work>/<method>/<ratio>/corpus/
//! <work>/<method>/<ratio>/run.trec
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::compress::{compress_corpus, CompressionConfig, Method};
use crate::error::{Error, Result};
use crate::importance::{build_idf_table, IdfTable, ScoringMethod};
use crate::metrics::{evaluate_run, write_run, EvalConfig, Qrels};
use crate::retrieval::search;
use crate::rng;
use crate::store::{Corpus, DocumentRecord};

pub const DEFAULT_RATIOS: [f64; 5] = [0.10, 0.20, 0.33, 0.50, 0.75];

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub dataset: String,
    pub methods: Vec<Method>,
    pub ratios: Vec<f64>,
    pub seed: u64,
    /// Retrieval depth; at least the larger metric cutoff.
    pub depth: usize,
    pub eval: EvalConfig,
    pub kmeans_max_iters: usize,
    pub work_dir: PathBuf,
    pub keep_work: bool,
    pub keep_going: bool,
    pub tag: String,
}

impl SweepOptions {
    pub fn new(dataset: impl Into<String>, work_dir: impl Into<PathBuf>) -> Self {
        Self {
            dataset: dataset.into(),
            methods: Method::COMPRESSING.to_vec(),
            ratios: DEFAULT_RATIOS.to_vec(),
            seed: 0,
            depth: 100,
            eval: EvalConfig::default(),
            kmeans_max_iters: 20,
            work_dir: work_dir.into(),
            keep_work: false,
            keep_going: false,
            tag: "mvseq".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub dataset: String,
    pub method: Method,
    pub ratio: f64,
    pub achieved_ratio: f64,
    pub mean_tokens_per_doc: f64,
    pub ndcg: f64,
    pub recall: f64,
    pub relative_ndcg: f64,
    pub relative_recall: f64,
    pub compress_wall_time: f64,
    pub search_wall_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub method: Method,
    pub ratio: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub k_ndcg: usize,
    pub k_recall: usize,
    pub rows: Vec<SweepRow>,
    pub failures: Vec<CellFailure>,
}

impl SweepReport {
    /// Quality columns only, so equal seeds give byte-identical output.
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "dataset,method,ratio,achieved_ratio,mean_tokens_per_doc,ndcg@{k},recall@{r},relative_ndcg,relative_recall\n",
            k = self.k_ndcg,
            r = self.k_recall
        );
        for row in &self.rows {
            writeln!(
                out,
                "{},{},{},{:.6},{:.4},{:.6},{:.6},{:.6},{:.6}",
                row.dataset,
                row.method,
                row.ratio,
                row.achieved_ratio,
                row.mean_tokens_per_doc,
                row.ndcg,
                row.recall,
                row.relative_ndcg,
                row.relative_recall
            )
            .expect("writing to a String");
        }
        out
    }

    /// Wall-clock columns, kept apart from the deterministic report.
    pub fn timings_csv(&self) -> String {
        let mut out = String::from("dataset,method,ratio,compress_wall_time,search_wall_time\n");
        for row in &self.rows {
            writeln!(
                out,
                "{},{},{},{:.6},{:.6}",
                row.dataset, row.method, row.ratio, row.compress_wall_time, row.search_wall_time
            )
            .expect("writing to a String");
        }
        out
    }

    pub fn baseline(&self) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.method == Method::None)
    }
}

/// Path of the timings sidecar for a report written to `report`.
pub fn timings_path(report: &Path) -> PathBuf {
    let stem = report
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "report".into());
    report.with_file_name(format!("{stem}.timings.csv"))
}

struct Cell {
    achieved_ratio: f64,
    mean_tokens: f64,
    ndcg: f64,
    recall: f64,
    compress_time: f64,
    search_time: f64,
}

struct Context<'a> {
    docs: &'a Corpus,
    queries: &'a [DocumentRecord],
    qrels: &'a Qrels,
    idf: Option<IdfTable>,
    opts: &'a SweepOptions,
}

impl Context<'_> {
    fn run_cell(&self, method: Method, ratio: f64) -> Result<Cell> {
        let dir = cell_dir(&self.opts.work_dir, method, ratio);
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        let corpus_dir = dir.join("corpus");
        let config = CompressionConfig {
            method,
            ratio,
            seed: rng::derive(self.opts.seed, method.as_str()),
            kmeans_max_iters: self.opts.kmeans_max_iters,
            kmeans_tolerance: 0.0,
        };
        let idf = match method.scoring() {
            Some(ScoringMethod::Idf) => self.idf.clone(),
            _ => None,
        };
        let summary = compress_corpus(self.docs, &config, idf, &corpus_dir)?;

        let start = Instant::now();
        let compressed = Corpus::open(&corpus_dir)?.load_all()?;
        let run = search(self.queries, &compressed, self.opts.depth)?;
        let search_time = start.elapsed().as_secs_f64();
        write_run(&dir.join("run.trec"), &run, &self.opts.tag)?;
        let report = evaluate_run(&run, self.qrels, self.opts.eval)?;

        Ok(Cell {
            achieved_ratio: summary.achieved_ratio,
            mean_tokens: summary.output_tokens as f64 / summary.docs as f64,
            ndcg: report.ndcg,
            recall: report.recall,
            compress_time: summary.wall_time,
            search_time,
        })
    }
}

pub fn cell_dir(work: &Path, method: Method, ratio: f64) -> PathBuf {
    work.join(method.as_str()).join(format!("{ratio}"))
}

/// Runs the baseline plus every (method, ratio) cell in order.
pub fn run_sweep(docs: &Corpus, queries: &Corpus, qrels: &Qrels, opts: &SweepOptions) -> Result<SweepReport> {
    if opts.ratios.is_empty() {
        return Err(Error::InvalidArgument("no ratios given".into()));
    }
    for &r in &opts.ratios {
        crate::compress::check_ratio(r)?;
    }
    if queries.dim() != docs.dim() {
        return Err(Error::DimMismatch {
            expected: docs.dim(),
            actual: queries.dim(),
        });
    }
    let needs_idf = opts
        .methods
        .iter()
        .any(|m| m.scoring() == Some(ScoringMethod::Idf));
    let idf = if needs_idf {
        Some(build_idf_table(docs)?)
    } else {
        None
    };
    let query_records = queries.load_all()?;
    let ctx = Context {
        docs,
        queries: &query_records,
        qrels,
        idf,
        opts,
    };
    let existed = opts.work_dir.exists();

    let wrap = |method: Method, ratio: f64| {
        move |e: Error| Error::SweepCell {
            method: method.to_string(),
            ratio,
            source: Box::new(e),
        }
    };
    let base = ctx
        .run_cell(Method::None, 1.0)
        .map_err(wrap(Method::None, 1.0))?;
    let row = |method: Method, ratio: f64, c: &Cell| SweepRow {
        dataset: opts.dataset.clone(),
        method,
        ratio,
        achieved_ratio: c.achieved_ratio,
        mean_tokens_per_doc: c.mean_tokens,
        ndcg: c.ndcg,
        recall: c.recall,
        relative_ndcg: relative(c.ndcg, base.ndcg),
        relative_recall: relative(c.recall, base.recall),
        compress_wall_time: c.compress_time,
        search_wall_time: c.search_time,
    };
    let mut rows = vec![row(Method::None, 1.0, &base)];
    let mut failures = Vec::new();

    for &method in opts.methods.iter().filter(|&&m| m != Method::None) {
        for &ratio in &opts.ratios {
            match ctx.run_cell(method, ratio) {
                Ok(cell) => rows.push(row(method, ratio, &cell)),
                Err(e) if opts.keep_going => failures.push(CellFailure {
                    method,
                    ratio,
                    message: e.to_string(),
                }),
                Err(e) => return Err(wrap(method, ratio)(e)),
            }
        }
    }

    if !opts.keep_work {
        let cleanup = if existed {
            opts.methods
                .iter()
                .chain(std::iter::once(&Method::None))
                .map(|m| opts.work_dir.join(m.as_str()))
                .filter(|p| p.exists())
                .try_for_each(fs::remove_dir_all)
        } else {
            fs::remove_dir_all(&opts.work_dir)
        };
        cleanup.map_err(|e| Error::io(&opts.work_dir, e))?;
    }

    Ok(SweepReport {
        k_ndcg: opts.eval.k_ndcg,
        k_recall: opts.eval.k_recall,
        rows,
        failures,
    })
}

fn relative(value: f64, baseline: f64) -> f64 {
    if baseline > 0.0 {
        value / baseline
    } else if value == 0.0 {
        1.0
    } else {
        f64::INFINITY
    }
}
