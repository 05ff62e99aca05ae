use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use rankqa::corpus::{read_answers, read_qrels, read_queries, ReferenceAnswers, RelevanceJudgments};
use rankqa::eval::{evaluate_qa, evaluate_run, render_table, EmbeddingTable, EvalReport};
use rankqa::fullranker::{build_index, load_index, save_index};
use rankqa::pipeline::{load_passages, read_predictions, BatchInputs, Pipeline, PipelineConfig, PipelineError};
use rankqa::ranking::read_trec_run;
use rankqa::Execution;

#[derive(Parser)]
#[command(name = "rankqa", version, about = "BM25 full ranking, reranking and answer extraction")]
struct Cli {
    /// Pipeline config (TOML). Command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Log more (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a BM25 index from a passage collection or CORD corpus.
    Index(IndexArgs),
    /// Full-rank one query against a saved index.
    Search(SearchArgs),
    /// Run the full pipeline over a query file.
    Run(RunArgs),
    /// Score a run file or a predictions file.
    Eval(EvalArgs),
    /// Run the pipeline once per rerank size and tabulate the results.
    Sweep(SweepArgs),
}

#[derive(Args, Default)]
struct CorpusArgs {
    /// `pid<TAB>text` collection (optionally .gz).
    #[arg(long)]
    collection: Option<PathBuf>,
    #[arg(long, requires = "cord_fulltext")]
    cord_metadata: Option<PathBuf>,
    #[arg(long, requires = "cord_metadata")]
    cord_fulltext: Option<PathBuf>,
    #[arg(long)]
    chunk_window: Option<usize>,
    #[arg(long)]
    chunk_overlap: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct IndexArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    k1: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    stopwords: bool,
    #[arg(long)]
    stemming: bool,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    query: String,
    #[arg(long, default_value = "q")]
    query_id: String,
    #[arg(long, default_value_t = 10)]
    top_n: usize,
}

#[derive(Args)]
struct PipelineArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    index: Option<PathBuf>,
    /// `qid<TAB>text` queries.
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    qrels: Option<PathBuf>,
    #[arg(long)]
    answers: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// "builtin" or a scoring service URL.
    #[arg(long)]
    scorer: Option<String>,
    /// "builtin" or an extraction service URL.
    #[arg(long)]
    extractor: Option<String>,
    #[arg(long)]
    full_rank_top_n: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    qa_top_k: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long)]
    rerank_size: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Comma-separated rerank sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
}

#[derive(Args)]
struct EvalArgs {
    /// TREC run file.
    #[arg(long, requires = "qrels")]
    run: Option<PathBuf>,
    #[arg(long)]
    qrels: Option<PathBuf>,
    /// Queries missing from the run count as empty rankings.
    #[arg(long)]
    queries: Option<PathBuf>,
    /// Comma-separated cutoffs.
    #[arg(long, value_delimiter = ',', default_value = "10,100")]
    n: Vec<usize>,
    /// Predictions file (`qid<TAB>pid<TAB>text...`).
    #[arg(long, requires = "answers")]
    predictions: Option<PathBuf>,
    #[arg(long)]
    answers: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Print the full JSON report instead of a summary table.
    #[arg(long)]
    json: bool,
}

/// Errors the user fixes by changing configuration; exit status 1.
#[derive(Debug)]
struct ConfigProblem(String);

impl std::fmt::Display for ConfigProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigProblem {}

fn is_config_error(err: &anyhow::Error) -> bool {
    err.chain().any(|e| {
        e.downcast_ref::<ConfigProblem>().is_some()
            || e.downcast_ref::<PipelineError>().is_some_and(PipelineError::is_config)
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_config_error(&e) { 1 } else { 2 })
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    match cli.command {
        Command::Index(a) => cmd_index(config, a),
        Command::Search(a) => cmd_search(a),
        Command::Run(a) => cmd_run(config, a),
        Command::Eval(a) => cmd_eval(a),
        Command::Sweep(a) => cmd_sweep(config, a),
    }
}

fn apply_corpus(config: &mut PipelineConfig, a: &CorpusArgs) {
    if a.collection.is_some() {
        config.collection = a.collection.clone();
        config.cord_metadata = None;
        config.cord_fulltext = None;
    }
    if a.cord_metadata.is_some() {
        config.cord_metadata = a.cord_metadata.clone();
        config.cord_fulltext = a.cord_fulltext.clone();
    }
    if a.chunk_window.is_some() {
        config.chunk_window = a.chunk_window;
    }
    if let Some(o) = a.chunk_overlap {
        config.chunk_overlap = o;
    }
    if let Some(w) = a.workers {
        config.workers = w;
    }
}

fn cmd_index(mut config: PipelineConfig, a: IndexArgs) -> Result<()> {
    apply_corpus(&mut config, &a.corpus);
    if let Some(k1) = a.k1 {
        config.k1 = k1;
    }
    if let Some(b) = a.b {
        config.b = b;
    }
    config.stopwords |= a.stopwords;
    config.stemming |= a.stemming;
    config.validate()?;
    let exec = config.execution();
    let index = exec.install(config.workers, || -> Result<_> {
        let passages = load_passages(&config, exec)?;
        Ok(build_index(passages, config.index_options(), exec)?)
    })?;
    save_index(&index, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    println!(
        "indexed {} passages, {} terms, avg length {:.2} -> {}",
        index.doc_count(),
        index.term_count(),
        index.avg_doc_length(),
        a.out.display()
    );
    Ok(())
}

fn cmd_search(a: SearchArgs) -> Result<()> {
    if a.top_n == 0 {
        return Err(ConfigProblem("--top-n must be at least 1".into()).into());
    }
    let index = load_index(&a.index).with_context(|| format!("loading {}", a.index.display()))?;
    let list = index.search(&a.query_id, &a.query, a.top_n)?;
    let stdout = io::stdout();
    let mut w = stdout.lock();
    list.write_trec(&mut w, "bm25")?;
    w.flush()?;
    Ok(())
}

struct Loaded {
    pipeline: Pipeline,
    queries: Vec<rankqa::corpus::Query>,
    qrels: Option<RelevanceJudgments>,
    answers: Option<ReferenceAnswers>,
    embeddings: Option<EmbeddingTable>,
    out: Option<PathBuf>,
}

fn prepare(mut config: PipelineConfig, a: &PipelineArgs, rerank_size: Option<usize>) -> Result<Loaded> {
    apply_corpus(&mut config, &a.corpus);
    if a.index.is_some() {
        config.index = a.index.clone();
    }
    if let Some(s) = &a.scorer {
        config.scorer = s.clone();
    }
    if let Some(x) = &a.extractor {
        config.extractor = x.clone();
    }
    if let Some(n) = a.full_rank_top_n {
        config.full_rank_top_n = n;
    }
    if let Some(r) = rerank_size {
        config.rerank_size = r;
        if a.full_rank_top_n.is_none() {
            config.full_rank_top_n = config.full_rank_top_n.max(r);
        }
    }
    if let Some(b) = a.batch_size {
        config.rerank_batch_size = b;
    }
    if let Some(k) = a.qa_top_k {
        config.qa_top_k = k;
    }
    if a.embeddings.is_some() {
        config.embeddings = a.embeddings.clone();
    }
    if a.out.is_some() {
        config.output_dir = a.out.clone();
    }
    config.validate()?;

    let queries = read_queries(&a.queries)?;
    let qrels = a.qrels.as_deref().map(read_qrels).transpose()?;
    let answers = a.answers.as_deref().map(read_answers).transpose()?;
    let embeddings = config.embeddings.as_deref().map(EmbeddingTable::load).transpose()?;
    let out = config.output_dir.clone();
    let pipeline = Pipeline::build(config)?;
    Ok(Loaded { pipeline, queries, qrels, answers, embeddings, out })
}

impl Loaded {
    fn inputs(&self) -> BatchInputs<'_> {
        BatchInputs {
            queries: &self.queries,
            qrels: self.qrels.as_ref(),
            answers: self.answers.as_ref(),
            embeddings: self.embeddings.as_ref(),
        }
    }
}

fn cmd_run(config: PipelineConfig, a: RunArgs) -> Result<()> {
    let loaded = prepare(config, &a.pipeline, a.rerank_size)?;
    let result = loaded.pipeline.run_batch(loaded.inputs(), loaded.out.as_deref())?;
    let r = &result.report;
    println!(
        "processed {} queries ({} failed), {:.4}s per query",
        r.queries, r.failed, r.time_per_query_s
    );
    for (name, report) in [("full rank", &r.full_rank), ("rerank", &r.rerank), ("qa", &r.qa)] {
        if let Some(report) = report {
            println!("{name}:\n{}", summary_table(report));
        }
    }
    if let Some(dir) = &loaded.out {
        println!("outputs written to {}", dir.display());
    }
    if r.queries > 0 && r.failed == r.queries {
        anyhow::bail!("every query failed");
    }
    Ok(())
}

fn cmd_sweep(config: PipelineConfig, a: SweepArgs) -> Result<()> {
    if a.sizes.contains(&0) {
        return Err(ConfigProblem("--sizes must all be at least 1".into()).into());
    }
    let max = a.sizes.iter().copied().max().unwrap_or(1);
    let loaded = prepare(config, &a.pipeline, Some(max))?;
    let report = loaded.pipeline.sweep(&a.sizes, loaded.inputs(), loaded.out.as_deref())?;
    println!("{}", report.ranking_table());
    if loaded.answers.is_some() {
        println!("{}", report.qa_table());
    }
    Ok(())
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    if a.run.is_none() && a.predictions.is_none() {
        return Err(ConfigProblem("give --run/--qrels and/or --predictions/--answers".into()).into());
    }
    if a.n.is_empty() || a.n.contains(&0) {
        return Err(ConfigProblem("--n cutoffs must be positive".into()).into());
    }
    let exec = Execution::default();
    let mut reports: Vec<(&str, EvalReport)> = Vec::new();
    if let (Some(run_path), Some(qrels_path)) = (&a.run, &a.qrels) {
        let mut run = read_trec_run(open(run_path)?).with_context(|| run_path.display().to_string())?;
        if let Some(q) = &a.queries {
            for query in read_queries(q)? {
                run.entry(query.query_id).or_default();
            }
        }
        let qrels = read_qrels(qrels_path)?;
        reports.push(("ranking", evaluate_run(&run, &qrels, &a.n, exec)));
    }
    if let (Some(pred_path), Some(ans_path)) = (&a.predictions, &a.answers) {
        let preds = read_predictions(open(pred_path)?)?;
        let answers = read_answers(ans_path)?;
        let table = a.embeddings.as_deref().map(EmbeddingTable::load).transpose()?;
        reports.push(("qa", evaluate_qa(&preds, &answers, table.as_ref(), exec)));
    }
    let stdout = io::stdout();
    let mut w = BufWriter::new(stdout.lock());
    if a.json {
        let map: serde_json::Map<String, serde_json::Value> = reports
            .iter()
            .map(|(k, r)| Ok((k.to_string(), serde_json::to_value(r)?)))
            .collect::<Result<_>>()?;
        serde_json::to_writer_pretty(&mut w, &map)?;
        writeln!(w)?;
    } else {
        for (name, r) in &reports {
            writeln!(w, "{name} ({} evaluated, {} skipped):\n{}", r.evaluated, r.skipped, summary_table(r))?;
        }
    }
    w.flush()?;
    Ok(())
}

fn summary_table(r: &EvalReport) -> String {
    let headers = vec!["metric".to_string(), "value".to_string()];
    let rows: Vec<Vec<String>> = r.aggregate.iter().map(|(k, v)| vec![k.clone(), format!("{v:.4}")]).collect();
    render_table(&headers, &rows)
}
