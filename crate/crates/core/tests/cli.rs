mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::{bundle_corpus, Gen};
use mvseq::metrics::{evaluate_run, EvalConfig};
use mvseq::{search, write_corpus, DocumentRecord, Qrels};
use tempfile::TempDir;

fn mvseq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mvseq"))
        .args(args)
        .env_remove("MVSEQ_WORKDIR")
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_qrels(path: &Path, qrels: &Qrels) {
    let mut text = String::new();
    for (q, docs) in &qrels.0 {
        for (d, g) in docs {
            text.push_str(&format!("{q} 0 {d} {g}\n"));
        }
    }
    fs::write(path, text).unwrap();
}

struct Fixture {
    _dir: TempDir,
    root: PathBuf,
    docs: PathBuf,
    queries: PathBuf,
    qrels: PathBuf,
    corpus: common::BundleCorpus,
}

fn fixture(n_docs: usize, n_queries: usize) -> Fixture {
    let dir = TempDir::new().unwrap();
    let root = dir.path().to_path_buf();
    let corpus = bundle_corpus(11, n_docs, 4, 3, n_queries, 16);
    let docs = root.join("docs");
    let queries = root.join("queries");
    let qrels = root.join("qrels.txt");
    write_corpus(&corpus.docs, &docs).unwrap();
    write_corpus(&corpus.queries, &queries).unwrap();
    write_qrels(&qrels, &corpus.qrels);
    Fixture {
        _dir: dir,
        root,
        docs,
        queries,
        qrels,
        corpus,
    }
}

#[test]
fn compress_none_keeps_every_token() {
    let f = fixture(5, 2);
    let out_dir = f.root.join("out");
    let v = stdout_json(&mvseq(&[
        "compress", "--input", s(&f.docs), "--output", s(&out_dir), "--method", "none",
    ]));
    assert_eq!(v["achieved_ratio"], 1.0);
    assert_eq!(v["input_tokens"], v["output_tokens"]);
}

#[test]
fn compress_prune_idf_needs_token_ids() {
    let dir = TempDir::new().unwrap();
    let mut g = Gen::new(1);
    let docs: Vec<_> = (0..3)
        .map(|i| DocumentRecord::new(format!("d{i}"), g.matrix(6, 4)))
        .collect();
    let input = dir.path().join("in");
    write_corpus(&docs, &input).unwrap();
    let out = mvseq(&[
        "compress", "--input", s(&input), "--output", s(&dir.path().join("out")),
        "--method", "prune_idf", "--ratio", "0.5",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("idf requires token ids"));
}

#[test]
fn ratio_out_of_range_is_a_usage_error() {
    let f = fixture(3, 1);
    for r in ["0", "1.5", "-0.1", "abc"] {
        let out = mvseq(&[
            "compress", "--input", s(&f.docs), "--output", s(&f.root.join("o")),
            "--method", "pool_kmeans", "--ratio", r,
        ]);
        assert_eq!(out.status.code(), Some(1), "ratio {r}");
    }
    assert_eq!(mvseq(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(mvseq(&["--help"]).status.code(), Some(0));
}

#[test]
fn search_depth_is_capped_by_corpus_size() {
    let f = fixture(10, 3);
    let run = f.root.join("run.trec");
    stdout_json(&mvseq(&[
        "search", "--docs", s(&f.docs), "--queries", s(&f.queries), "-k", "1000", "--run", s(&run),
    ]));
    let text = fs::read_to_string(&run).unwrap();
    for q in ["q000", "q001", "q002"] {
        let n = text.lines().filter(|l| l.starts_with(&format!("{q} "))).count();
        assert_eq!(n, 10, "{q}");
    }
}

#[test]
fn search_rejects_dimension_mismatch() {
    let f = fixture(4, 1);
    let mut g = Gen::new(2);
    let q = f.root.join("q3");
    write_corpus(&[DocumentRecord::new("q", g.matrix(2, 3))], &q).unwrap();
    let out = mvseq(&[
        "search", "--docs", s(&f.docs), "--queries", s(&q), "--run", s(&f.root.join("r")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dimension mismatch 16 vs 3"));
}

#[test]
fn eval_of_perfect_run_is_one() {
    let dir = TempDir::new().unwrap();
    let run = dir.path().join("run.trec");
    let qrels = dir.path().join("qrels");
    fs::write(&run, "q1 Q0 a 1 3.0 t\nq1 Q0 b 2 2.0 t\nq1 Q0 c 3 1.0 t\n").unwrap();
    fs::write(&qrels, "q1 0 a 2\nq1 0 b 1\nq1 0 c 0\n").unwrap();
    let csv = dir.path().join("m.csv");
    let v = stdout_json(&mvseq(&[
        "eval", "--run", s(&run), "--qrels", s(&qrels), "--csv", s(&csv), "--per-query",
    ]));
    assert_eq!(v["ndcg"], 1.0);
    assert_eq!(v["recall"], 1.0);
    assert_eq!(v["per_query"].as_array().unwrap().len(), 1);
    assert_eq!(
        fs::read_to_string(&csv).unwrap(),
        "queries,skipped,ndcg@10,recall@100\n1,0,1.000000,1.000000\n"
    );
}

#[test]
fn eval_without_shared_queries_fails() {
    let dir = TempDir::new().unwrap();
    let run = dir.path().join("run.trec");
    let qrels = dir.path().join("qrels");
    fs::write(&run, "q1 Q0 a 1 3.0 t\n").unwrap();
    fs::write(&qrels, "q2 0 a 1\n").unwrap();
    let out = mvseq(&["eval", "--run", s(&run), "--qrels", s(&qrels)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn default_sweep_has_forty_one_rows() {
    let f = fixture(6, 3);
    let report = f.root.join("report.csv");
    let work = f.root.join("work");
    stdout_or_fail(mvseq(&[
        "sweep", "--docs", s(&f.docs), "--queries", s(&f.queries), "--qrels", s(&f.qrels),
        "--report", s(&report), "--work-dir", s(&work),
    ]));
    let text = fs::read_to_string(&report).unwrap();
    assert_eq!(text.lines().count(), 1 + 41);
    assert!(text.starts_with(
        "dataset,method,ratio,achieved_ratio,mean_tokens_per_doc,ndcg@10,recall@100,relative_ndcg,relative_recall\n"
    ));
    assert!(report.with_file_name("report.timings.csv").exists());
    assert!(!work.exists());
}

fn stdout_or_fail(out: Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn single_cell_sweep_and_baseline_row() {
    let f = fixture(8, 5);
    let report = f.root.join("r.csv");
    stdout_or_fail(mvseq(&[
        "sweep", "--docs", s(&f.docs), "--queries", s(&f.queries), "--qrels", s(&f.qrels),
        "--report", s(&report), "--methods", "pool_hierarchical", "--ratios", "0.2",
        "--dataset", "toy",
    ]));
    let text = fs::read_to_string(&report).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[1].starts_with("toy,pool_hierarchical,0.2,"));

    let docs: Vec<DocumentRecord> = f
        .corpus
        .docs
        .iter()
        .map(|d| DocumentRecord::new(d.doc_id.clone(), d.embeddings.normalized().unwrap()))
        .collect();
    let run = search(&f.corpus.queries, &docs, 100).unwrap();
    let m = evaluate_run(&run, &f.corpus.qrels, EvalConfig::default()).unwrap();
    let expected = format!("toy,none,1,1.000000,13.0000,{:.6},{:.6},1.000000,1.000000", m.ndcg, m.recall);
    assert_eq!(rows[0], expected);
}

#[test]
fn sweep_reads_work_dir_from_environment() {
    let f = fixture(4, 2);
    let report = f.root.join("r.csv");
    let work = f.root.join("env-work");
    let out = Command::new(env!("CARGO_BIN_EXE_mvseq"))
        .args([
            "sweep", "--docs", s(&f.docs), "--queries", s(&f.queries), "--qrels", s(&f.qrels),
            "--report", s(&report), "--methods", "prune_random", "--ratios", "0.5", "--keep-work",
        ])
        .env("MVSEQ_WORKDIR", &work)
        .output()
        .unwrap();
    stdout_or_fail(out);
    assert!(work.join("none/1/run.trec").exists());
    assert!(work.join("prune_random/0.5/corpus/manifest.json").exists());
}

#[test]
fn validate_reports_bad_corpus() {
    let f = fixture(3, 1);
    stdout_or_fail(mvseq(&["validate", s(&f.docs)]));
    fs::write(f.docs.join("embeddings.bin"), [0u8; 8]).unwrap();
    assert_eq!(mvseq(&["validate", s(&f.docs)]).status.code(), Some(2));
}

#[test]
fn idf_command_writes_table() {
    let f = fixture(3, 1);
    let table = f.root.join("idf.json");
    let v = stdout_json(&mvseq(&["idf", "--corpus", s(&f.docs), "--output", s(&table)]));
    assert_eq!(v["doc_count"], 3);
    let loaded = mvseq::IdfTable::load(&table).unwrap();
    assert_eq!(loaded.doc_count, 3);
}
