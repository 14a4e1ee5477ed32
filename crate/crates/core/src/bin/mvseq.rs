use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use mvseq::compress::{self, CompressionConfig, Method};
use mvseq::metrics::{self, EvalConfig, Gain};
use mvseq::sweep::{self, SweepOptions};
use mvseq::{Corpus, Error, IdfTable};

#[derive(Parser)]
#[command(name = "mvseq", version, about = "Token-sequence compression for multi-vector retrieval")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compress every document of a corpus into a new corpus directory.
    Compress(CompressArgs),
    /// Exhaustive MaxSim search; writes a TREC run file.
    Search(SearchArgs),
    /// Evaluate a TREC run against qrels.
    Eval(EvalArgs),
    /// Baseline plus a method × ratio grid, reported as CSV.
    Sweep(SweepArgs),
    /// Check a corpus directory against the format invariants.
    Validate {
        corpus: PathBuf,
    },
    /// Build a corpus-level IDF table as JSON.
    Idf {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Args)]
struct CompressArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_parser = parse_method)]
    method: Method,
    #[arg(long, value_parser = parse_ratio, default_value = "1.0")]
    ratio: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Precomputed IDF table; built from the input corpus when omitted.
    #[arg(long)]
    idf_table: Option<PathBuf>,
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    kmeans_iters: u64,
    #[arg(long, default_value_t = 0.0)]
    kmeans_tol: f64,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long)]
    docs: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(short = 'k', long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    k: u64,
    /// Output run file.
    #[arg(long)]
    run: PathBuf,
    #[arg(long, default_value = "mvseq")]
    tag: String,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    qrels: PathBuf,
    #[arg(long, default_value_t = 10)]
    k_ndcg: usize,
    #[arg(long, default_value_t = 100)]
    k_recall: usize,
    #[arg(long, value_parser = parse_gain, default_value = "linear")]
    gain: Gain,
    /// Also write the report as a CSV header plus one row.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Include per-query values in the JSON output.
    #[arg(long)]
    per_query: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    docs: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    qrels: PathBuf,
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    methods: Option<Vec<Method>>,
    #[arg(long, value_delimiter = ',', value_parser = parse_ratio)]
    ratios: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV report path; wall times go to `<stem>.timings.csv` next to it.
    #[arg(long)]
    report: PathBuf,
    /// Dataset label for the report (defaults to the docs directory name).
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long, env = "MVSEQ_WORKDIR")]
    work_dir: Option<PathBuf>,
    /// Keep compressed corpora and run files under the work dir.
    #[arg(long)]
    keep_work: bool,
    /// Record failing cells and continue instead of aborting.
    #[arg(long)]
    keep_going: bool,
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    kmeans_iters: u64,
    #[arg(long, value_parser = parse_gain, default_value = "linear")]
    gain: Gain,
    #[arg(long, default_value = "mvseq")]
    tag: String,
}

fn parse_ratio(s: &str) -> Result<f64, String> {
    let r: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    compress::check_ratio(r).map_err(|_| format!("ratio must be in (0,1], got {s}"))?;
    Ok(r)
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_gain(s: &str) -> Result<Gain, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn compress_cmd(a: CompressArgs) -> mvseq::Result<()> {
    let corpus = Corpus::open(&a.input)?;
    let config = CompressionConfig {
        method: a.method,
        ratio: a.ratio,
        seed: a.seed,
        kmeans_max_iters: a.kmeans_iters as usize,
        kmeans_tolerance: a.kmeans_tol,
    };
    let idf = a.idf_table.as_deref().map(IdfTable::load).transpose()?;
    let summary = compress::compress_corpus(&corpus, &config, idf, &a.output)?;
    print_json(&serde_json::to_value(&summary).expect("serializable"));
    Ok(())
}

fn search_cmd(a: SearchArgs) -> mvseq::Result<()> {
    let start = Instant::now();
    let docs = Corpus::open(&a.docs)?;
    let queries = Corpus::open(&a.queries)?;
    if docs.dim() != queries.dim() {
        return Err(Error::DimMismatch {
            expected: docs.dim(),
            actual: queries.dim(),
        });
    }
    let run = mvseq::search(&queries.load_all()?, &docs.load_all()?, a.k as usize)?;
    metrics::write_run(&a.run, &run, &a.tag)?;
    print_json(&json!({
        "queries": run.len(),
        "docs": docs.len(),
        "k": a.k,
        "run": a.run,
        "wall_time": start.elapsed().as_secs_f64(),
    }));
    Ok(())
}

fn eval_cmd(a: EvalArgs) -> mvseq::Result<()> {
    let run = metrics::read_run(&a.run)?;
    let qrels = metrics::load_qrels(&a.qrels)?;
    let config = EvalConfig {
        k_ndcg: a.k_ndcg,
        k_recall: a.k_recall,
        gain: a.gain,
    };
    let report = metrics::evaluate_run(&run, &qrels, config)?;
    if let Some(path) = &a.csv {
        let text = format!("{}\n{}\n", report.csv_header(), report.csv_row());
        fs::write(path, text).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
    }
    let mut value = serde_json::to_value(&report).expect("serializable");
    if !a.per_query {
        value.as_object_mut().expect("object").remove("per_query");
    }
    print_json(&value);
    Ok(())
}

fn sweep_cmd(a: SweepArgs) -> mvseq::Result<bool> {
    let docs = Corpus::open(&a.docs)?;
    let queries = Corpus::open(&a.queries)?;
    let qrels = metrics::load_qrels(&a.qrels)?;
    let dataset = a.dataset.unwrap_or_else(|| dir_name(&a.docs));
    let work_dir = a.work_dir.unwrap_or_else(|| {
        a.report
            .parent()
            .unwrap_or(Path::new("."))
            .join("mvseq-work")
    });
    let mut opts = SweepOptions::new(dataset, work_dir);
    if let Some(m) = a.methods {
        opts.methods = m;
    }
    if let Some(r) = a.ratios {
        opts.ratios = r;
    }
    opts.seed = a.seed;
    opts.keep_work = a.keep_work;
    opts.keep_going = a.keep_going;
    opts.kmeans_max_iters = a.kmeans_iters as usize;
    opts.eval.gain = a.gain;
    opts.tag = a.tag;

    let report = sweep::run_sweep(&docs, &queries, &qrels, &opts)?;
    let write = |path: &Path, text: String| {
        fs::write(path, text).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    };
    write(&a.report, report.to_csv())?;
    write(&sweep::timings_path(&a.report), report.timings_csv())?;
    for f in &report.failures {
        eprintln!("mvseq: cell {} @ {} failed: {}", f.method, f.ratio, f.message);
    }
    Ok(report.failures.is_empty())
}

fn dir_name(p: &Path) -> String {
    p.canonicalize()
        .ok()
        .and_then(|c| c.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "dataset".into())
}

fn run(cli: Cli) -> mvseq::Result<bool> {
    match cli.command {
        Command::Compress(a) => compress_cmd(a).map(|_| true),
        Command::Search(a) => search_cmd(a).map(|_| true),
        Command::Eval(a) => eval_cmd(a).map(|_| true),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Validate { corpus } => {
            let report = mvseq::validate_corpus(&corpus);
            for v in &report.violations {
                eprintln!("{v}");
            }
            print_json(&serde_json::to_value(&report).expect("serializable"));
            Ok(report.is_valid())
        }
        Command::Idf { corpus, output } => {
            let table = mvseq::build_idf_table(&Corpus::open(&corpus)?)?;
            table.save(&output)?;
            print_json(&json!({ "doc_count": table.doc_count, "vocabulary": table.df.len() }));
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("mvseq: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("mvseq: {e}");
            ExitCode::from(2)
        }
    }
}
