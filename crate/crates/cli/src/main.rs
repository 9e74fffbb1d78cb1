//! `gar`: corpus graphs, budgeted re-ranking, evaluation and the
//! experiment harnesses, from the command line.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{Context, Result};
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use gar_core::bench::{latency_bench, prepare_cache, BenchConfig, DEFAULT_BUDGETS, DEFAULT_REPEATS};
use gar_core::eval::{cluster_matrix, ils, write_report, Gain, Metric, Qrels, DEFAULT_MIN_REL};
use gar_core::lexical::{Bm25Params, DenseVectors, InvertedIndex};
use gar_core::ranking::read_queries_tsv;
use gar_core::rerank::{
    rerank, trace_rows, write_trace, Bm25Scorer, CachedScorer, Mode, OracleScorer, ScoreCache, Scorer,
    DEFAULT_BATCH_SIZE, DEFAULT_BUDGET,
};
use gar_core::sweep::{default_batch_values, default_k_values, sweep, SweepParam, SweepSetup};
use gar_core::synthetic::{SyntheticCollection, SyntheticSpec};
use gar_core::{CorpusGraph, Ranking, ReRankConfig, RunFile};

#[derive(Parser)]
#[command(name = "gar", version, about = "Graph-based adaptive re-ranking toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a corpus graph from a corpus (BM25) or a vector file (dense).
    BuildGraph(BuildGraphArgs),
    /// BM25 first-stage retrieval into a TREC run file.
    Retrieve(RetrieveArgs),
    /// Re-rank a run with a budgeted scorer, with or without a graph.
    Rerank(RerankArgs),
    /// Evaluate a run against qrels.
    Evaluate(EvaluateArgs),
    /// Label co-occurrence of judged documents and their nearest judged neighbour.
    ClusterTest(ClusterTestArgs),
    /// Re-run adaptive re-ranking over a range of k or b values.
    Sweep(SweepArgs),
    /// Latency overhead of adaptive over typical re-ranking.
    Bench(BenchArgs),
    /// Write a synthetic corpus, queries and qrels with planted clusters.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Bm25,
    Dense,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Typical,
    Gar,
}

#[derive(Args, Clone, Copy)]
struct Bm25Args {
    /// BM25 term-frequency saturation.
    #[arg(long, default_value_t = 0.9)]
    k1: f64,
    /// BM25 length normalization.
    #[arg(long = "bm25-b", default_value_t = 0.4)]
    bm25_b: f64,
}

impl Bm25Args {
    fn params(self) -> Result<Bm25Params> {
        Ok(Bm25Params::new(self.k1, self.bm25_b)?)
    }
}

#[derive(Args)]
struct BuildGraphArgs {
    #[arg(long, value_enum, default_value = "bm25")]
    method: Method,
    /// `docid<TAB>text` corpus (bm25).
    #[arg(long, required_if_eq("method", "bm25"))]
    corpus: Option<PathBuf>,
    /// Binary vector file (dense).
    #[arg(long, required_if_eq("method", "dense"))]
    vectors: Option<PathBuf>,
    /// Neighbours per document.
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u32).range(1..))]
    k: u32,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    bm25: Bm25Args,
}

#[derive(Args)]
struct RetrieveArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// `qid<TAB>text` queries.
    #[arg(long)]
    queries: PathBuf,
    /// Documents kept per query.
    #[arg(long, default_value_t = 1000)]
    top: usize,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    bm25: Bm25Args,
}

#[derive(Args)]
struct ScorerArgs {
    /// `cache:<path>`, `bm25` or `oracle:<qrels>`.
    #[arg(long)]
    scorer: ScorerSpec,
    /// Query texts; needed by the bm25 scorer.
    #[arg(long)]
    queries: Option<PathBuf>,
    /// Corpus for the bm25 scorer.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Score for pairs missing from a cache instead of failing.
    #[arg(long)]
    fallback: Option<f64>,
    /// Standard deviation of the oracle scorer's Gaussian noise.
    #[arg(long, default_value_t = 0.0)]
    noise_sd: f64,
    /// Seed for the oracle scorer's noise.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    bm25: Bm25Args,
}

#[derive(Args)]
struct RerankArgs {
    /// Initial run (TREC format).
    #[arg(long)]
    run: PathBuf,
    #[command(flatten)]
    scorer: ScorerArgs,
    #[arg(long, value_enum, default_value = "gar")]
    mode: ModeArg,
    #[arg(long, required_if_eq("mode", "gar"))]
    graph: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_BATCH_SIZE)]
    batch_size: usize,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: usize,
    #[arg(long)]
    out: PathBuf,
    /// Per-document provenance TSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Run tag written in the last column.
    #[arg(long)]
    tag: Option<String>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    qrels: PathBuf,
    /// Comma-separated, e.g. `ndcg@10,map,recall@1000,rr@10,judged@10,ils`.
    #[arg(long, value_delimiter = ',', default_value = "ndcg@10,map,recall@1000")]
    metrics: Vec<String>,
    #[arg(long, default_value = "exp")]
    gain: Gain,
    /// Lowest label counted as relevant by the binary measures.
    #[arg(long, default_value_t = DEFAULT_MIN_REL)]
    min_rel: u8,
    /// Vector file, needed for ils.
    #[arg(long)]
    vectors: Option<PathBuf>,
    /// Report file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ClusterTestArgs {
    #[arg(long)]
    qrels: PathBuf,
    #[arg(long, value_enum, default_value = "bm25")]
    method: Method,
    #[arg(long, required_if_eq("method", "bm25"))]
    corpus: Option<PathBuf>,
    #[arg(long, required_if_eq("method", "dense"))]
    vectors: Option<PathBuf>,
    #[command(flatten)]
    bm25: Bm25Args,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    qrels: PathBuf,
    #[command(flatten)]
    scorer: ScorerArgs,
    /// Graph built with at least the largest k swept.
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, value_parser = parse_sweep_param)]
    vary: SweepParam,
    /// Comma-separated values. Defaults to k=1..16 (capped at the graph's
    /// k) or b=1,2,4,...,512.
    #[arg(long, value_delimiter = ',')]
    values: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_BATCH_SIZE)]
    batch_size: usize,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: usize,
    #[arg(long, value_delimiter = ',', default_value = "ndcg@10,map,recall@1000")]
    metrics: Vec<String>,
    #[arg(long, default_value = "exp")]
    gain: Gain,
    #[arg(long, default_value_t = DEFAULT_MIN_REL)]
    min_rel: u8,
    /// Table file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    run: PathBuf,
    /// Source of the cached scores. Other scorers are run once up front to
    /// fill a cache.
    #[command(flatten)]
    scorer: ScorerArgs,
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_BUDGETS)]
    budgets: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_BATCH_SIZE)]
    batch_size: usize,
    #[arg(long, default_value_t = DEFAULT_REPEATS)]
    repeats: usize,
    /// Raw timings and summary rows (TSV).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also save the score cache used for timing.
    #[arg(long)]
    save_cache: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Small,
    Large,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum, default_value = "small")]
    preset: Preset,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Receives corpus.tsv, queries.tsv and qrels.txt.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Clone)]
enum ScorerSpec {
    Cache(PathBuf),
    Bm25,
    Oracle(PathBuf),
}

impl FromStr for ScorerSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.split_once(':') {
            Some(("cache", p)) if !p.is_empty() => Ok(ScorerSpec::Cache(p.into())),
            Some(("oracle", p)) if !p.is_empty() => Ok(ScorerSpec::Oracle(p.into())),
            None if s == "bm25" => Ok(ScorerSpec::Bm25),
            _ => Err(format!(
                "expected cache:<path>, bm25 or oracle:<qrels>, got {s:?}"
            )),
        }
    }
}

fn parse_sweep_param(s: &str) -> Result<SweepParam, String> {
    s.parse().map_err(|e: gar_core::Error| e.to_string())
}

/// Exits with a usage error, like a clap parse failure.
fn usage_error(message: impl std::fmt::Display) -> ! {
    Cli::command()
        .error(clap::error::ErrorKind::ArgumentConflict, message)
        .exit()
}

fn parse_metrics(names: &[String]) -> Vec<Metric> {
    names
        .iter()
        .map(|n| n.trim().parse::<Metric>().unwrap_or_else(|e| usage_error(e)))
        .collect()
}

/// Owns whatever a scorer borrows.
struct ScorerHost {
    index: Option<InvertedIndex>,
    cache: Option<ScoreCache>,
    oracle: Option<OracleScorer>,
    fallback: Option<f64>,
    params: Bm25Params,
}

impl ScorerHost {
    fn load(args: &ScorerArgs) -> Result<Self> {
        let mut host = ScorerHost {
            index: None,
            cache: None,
            oracle: None,
            fallback: args.fallback,
            params: args.bm25.params()?,
        };
        match &args.scorer {
            ScorerSpec::Cache(path) => {
                host.cache = Some(
                    ScoreCache::load(path)
                        .with_context(|| format!("loading score cache {}", path.display()))?,
                );
            }
            ScorerSpec::Bm25 => {
                let (Some(corpus), Some(_)) = (&args.corpus, &args.queries) else {
                    usage_error("the bm25 scorer needs --corpus and --queries");
                };
                host.index = Some(InvertedIndex::from_tsv(corpus)?);
            }
            ScorerSpec::Oracle(path) => {
                let seed = match (args.seed, args.noise_sd > 0.0) {
                    (Some(seed), _) => seed,
                    (None, false) => 0,
                    (None, true) => usage_error("--seed is required when --noise-sd is positive"),
                };
                host.oracle = Some(OracleScorer::new(Qrels::load(path)?, args.noise_sd, seed)?);
            }
        }
        Ok(host)
    }

    fn scorer(&self) -> Box<dyn Scorer + Sync + '_> {
        if let Some(index) = &self.index {
            Box::new(Bm25Scorer::new(index, self.params))
        } else if let Some(oracle) = &self.oracle {
            Box::new(oracle)
        } else {
            let cache = self.cache.as_ref().expect("scorer host holds one scorer");
            match self.fallback {
                Some(f) => Box::new(CachedScorer::new(cache.clone()).with_fallback(f)),
                None => Box::new(cache),
            }
        }
    }
}

fn load_queries(path: Option<&Path>) -> Result<BTreeMap<String, String>> {
    match path {
        Some(p) => read_queries_tsv(p).with_context(|| format!("reading queries {}", p.display())),
        None => Ok(BTreeMap::new()),
    }
}

fn load_graph(path: &Path) -> Result<CorpusGraph> {
    CorpusGraph::load(path).with_context(|| format!("loading graph {}", path.display()))
}

fn load_run(path: &Path) -> Result<RunFile> {
    RunFile::load(path).with_context(|| format!("loading run {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

/// Writes to `path`, or to stdout when there is none.
fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn build_graph(args: BuildGraphArgs) -> Result<()> {
    let k = args.k as usize;
    let graph = match args.method {
        Method::Bm25 => {
            let corpus = args.corpus.expect("required by clap");
            InvertedIndex::from_tsv(&corpus)
                .with_context(|| format!("indexing {}", corpus.display()))?
                .build_graph(&args.bm25.params()?, k)?
        }
        Method::Dense => {
            let vectors = args.vectors.expect("required by clap");
            DenseVectors::load(&vectors)
                .with_context(|| format!("loading vectors {}", vectors.display()))?
                .build_graph(k)?
        }
    };
    graph.save(&args.out)?;
    println!(
        "docs\t{}\nk\t{}\nedges\t{}\nbytes\t{}",
        graph.n_docs(),
        graph.k(),
        graph.edge_count(),
        CorpusGraph::file_size(graph.n_docs(), graph.k())
    );
    Ok(())
}

fn retrieve(args: RetrieveArgs) -> Result<()> {
    let index = InvertedIndex::from_tsv(&args.corpus)?;
    let queries = load_queries(Some(&args.queries))?;
    let run = index.run(&args.bm25.params()?, &queries, args.top)?;
    let mut out = create(&args.out)?;
    run.write(&mut out, "bm25")?;
    out.flush()?;
    Ok(())
}

/// Re-ranks every query in parallel. Output order is the run's (sorted)
/// qid order whatever the scheduling.
fn rerank_parallel(
    mode: Mode<'_>,
    run: &RunFile,
    queries: &BTreeMap<String, String>,
    scorer: &(dyn Scorer + Sync),
    config: &ReRankConfig,
) -> Result<RunFile> {
    let pools: Vec<&Ranking> = run.rankings().collect();
    let out: Vec<Ranking> = pools
        .par_iter()
        .map(|r0| {
            let query = queries.get(r0.qid()).map_or("", String::as_str);
            rerank(mode, r0, query, scorer, config)
        })
        .collect::<gar_core::Result<_>>()?;
    Ok(out.into_iter().collect())
}

fn rerank_cmd(args: RerankArgs) -> Result<()> {
    let run = load_run(&args.run)?;
    let queries = load_queries(args.scorer.queries.as_deref())?;
    let host = ScorerHost::load(&args.scorer)?;
    let config = ReRankConfig::new(args.batch_size, args.budget).unwrap_or_else(|e| usage_error(e));
    let graph = match args.mode {
        ModeArg::Gar => Some(load_graph(args.graph.as_deref().expect("required by clap"))?),
        ModeArg::Typical => None,
    };
    let mode = graph.as_ref().map_or(Mode::Typical, Mode::Adaptive);
    let scorer = host.scorer();
    let reranked = rerank_parallel(mode, &run, &queries, scorer.as_ref(), &config)?;

    let mut out = create(&args.out)?;
    reranked.write(&mut out, args.tag.as_deref().unwrap_or(mode.name()))?;
    out.flush()?;
    if let Some(path) = &args.trace {
        let rows: Vec<_> = reranked
            .rankings()
            .flat_map(|r| trace_rows(run.get(r.qid()).expect("same queries"), r))
            .collect();
        let mut out = create(path)?;
        write_trace(&mut out, &rows)?;
        out.flush()?;
    }
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let metrics = parse_metrics(&args.metrics);
    let run = load_run(&args.run)?;
    let qrels = Qrels::load(&args.qrels)?;
    let vectors = match (&args.vectors, metrics.iter().find(|m| m.needs_vectors())) {
        (Some(p), _) => Some(DenseVectors::load(p)?),
        (None, Some(m)) => usage_error(format!("{m} needs --vectors")),
        (None, None) => None,
    };
    let mut results = Vec::new();
    for m in metrics {
        let values = match m {
            Metric::Ils(depth) => ils(
                &run,
                &qrels,
                vectors.as_ref().expect("checked above"),
                args.min_rel,
                depth,
            )?,
            _ => m.evaluate(&run, &qrels, args.gain, args.min_rel)?,
        };
        results.push((m.to_string(), values));
    }
    let mut out = output(args.out.as_deref())?;
    write_report(&mut out, &results)?;
    out.flush()?;
    Ok(())
}

fn cluster_test(args: ClusterTestArgs) -> Result<()> {
    let qrels = Qrels::load(&args.qrels)?;
    let unknown = |d: &str| gar_core::Error::UnknownDocId(d.to_owned());
    let matrix = match args.method {
        Method::Bm25 => {
            let index = InvertedIndex::from_tsv(args.corpus.as_deref().expect("required by clap"))?;
            let params = args.bm25.params()?;
            let dm = index.docmap();
            cluster_matrix(&qrels, |p, q| {
                let p = dm.internal(p).ok_or_else(|| unknown(p))?;
                let q = dm.internal(q).ok_or_else(|| unknown(q))?;
                index.score(&params, index.doc_terms(p)?, q)
            })?
        }
        Method::Dense => {
            let vectors = DenseVectors::load(args.vectors.as_deref().expect("required by clap"))?;
            let dm = vectors.docmap();
            cluster_matrix(&qrels, |p, q| {
                let p = dm.internal(p).ok_or_else(|| unknown(p))?;
                let q = dm.internal(q).ok_or_else(|| unknown(q))?;
                vectors.cosine(p, q)
            })?
        }
    };
    print!("{matrix}");
    Ok(())
}

fn sweep_cmd(args: SweepArgs) -> Result<()> {
    let metrics = parse_metrics(&args.metrics);
    if let Some(m) = metrics.iter().find(|m| m.needs_vectors()) {
        usage_error(format!("{m} is not available in sweeps"));
    }
    let run = load_run(&args.run)?;
    let qrels = Qrels::load(&args.qrels)?;
    let queries = load_queries(args.scorer.queries.as_deref())?;
    let host = ScorerHost::load(&args.scorer)?;
    let graph = load_graph(&args.graph)?;
    let values = if args.values.is_empty() {
        match args.vary {
            SweepParam::K => default_k_values()
                .into_iter()
                .filter(|&k| k <= graph.k())
                .collect(),
            SweepParam::BatchSize => default_batch_values(),
        }
    } else {
        args.values
    };
    if args.vary == SweepParam::K {
        if let Some(&too_big) = values.iter().find(|&&k| k > graph.k()) {
            usage_error(format!("k={too_big} exceeds the graph's k={}", graph.k()));
        }
    }
    let scorer = host.scorer();
    let setup = SweepSetup {
        run: &run,
        queries: &queries,
        scorer: scorer.as_ref(),
        graph: &graph,
        qrels: &qrels,
        config: ReRankConfig::new(args.batch_size, args.budget).unwrap_or_else(|e| usage_error(e)),
        metrics,
        gain: args.gain,
        min_rel: args.min_rel,
    };
    let table = sweep(&setup, args.vary, &values)?;
    let mut out = output(args.out.as_deref())?;
    table.write_tsv(&mut out)?;
    out.flush()?;
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    if args.repeats < 2 {
        usage_error("--repeats must be at least 2");
    }
    let run = load_run(&args.run)?;
    let graph = load_graph(&args.graph)?;
    let config = BenchConfig {
        budgets: args.budgets,
        batch_size: args.batch_size,
        repeats: args.repeats,
    };
    let cache = match &args.scorer.scorer {
        ScorerSpec::Cache(path) if args.scorer.fallback.is_none() => ScoreCache::load(path)?,
        _ => {
            let queries = load_queries(args.scorer.queries.as_deref())?;
            let host = ScorerHost::load(&args.scorer)?;
            let scorer = host.scorer();
            prepare_cache(&run, &queries, scorer.as_ref(), &graph, &config)?
        }
    };
    if let Some(path) = &args.save_cache {
        let mut out = create(path)?;
        cache.write(&mut out)?;
        out.flush()?;
    }
    let report = latency_bench(&run, &cache, &graph, &config)?;
    if let Some(path) = &args.out {
        let mut out = create(path)?;
        report.write_tsv(&mut out)?;
        out.flush()?;
    }
    println!("budget\ttypical_ms\tgar_ms\toverhead_ms\tci_low_ms\tci_high_ms");
    for s in &report.summaries {
        println!(
            "{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}",
            s.budget, s.typical_ms, s.gar_ms, s.overhead_ms, s.ci_low, s.ci_high
        );
    }
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let spec = match args.preset {
        Preset::Small => SyntheticSpec::small(args.seed),
        Preset::Large => SyntheticSpec::large(args.seed),
    };
    let coll = SyntheticCollection::generate(&spec)?;
    fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;
    let mut corpus = create(&args.out_dir.join("corpus.tsv"))?;
    for (id, text) in &coll.corpus {
        writeln!(corpus, "{id}\t{text}")?;
    }
    corpus.flush()?;
    let mut queries = create(&args.out_dir.join("queries.tsv"))?;
    for (qid, text) in &coll.queries {
        writeln!(queries, "{qid}\t{text}")?;
    }
    queries.flush()?;
    fs::write(args.out_dir.join("qrels.txt"), coll.qrels.to_trec())?;
    println!("docs\t{}\nqueries\t{}", coll.corpus.len(), coll.queries.len());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::BuildGraph(a) => build_graph(a),
        Command::Retrieve(a) => retrieve(a),
        Command::Rerank(a) => rerank_cmd(a),
        Command::Evaluate(a) => evaluate(a),
        Command::ClusterTest(a) => cluster_test(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Bench(a) => bench(a),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
