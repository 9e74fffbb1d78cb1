//! Latency overhead of adaptive re-ranking over typical re-ranking.
//!
//! Scores come from a [`ScoreCache`] so that the measured time is the
//! re-ranking bookkeeping alone. For every budget both modes run over all
//! queries `repeats` times after one discarded warm-up pass; the per-run
//! difference of mean per-query latencies is the overhead sample, and the
//! report gives its mean and a 95% Student-t interval.

use std::collections::BTreeMap;
use std::hint::black_box;
use std::io::Write;
use std::time::Instant;

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::graph::CorpusGraph;
use crate::ranking::RunFile;
use crate::rerank::{rerank, rerank_run, Mode, ReRankConfig, RecordingScorer, ScoreCache, Scorer};

/// Budgets of the standard latency protocol.
pub const DEFAULT_BUDGETS: [usize; 5] = [100, 250, 500, 750, 1000];
pub const DEFAULT_REPEATS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub budgets: Vec<usize>,
    pub batch_size: usize,
    pub repeats: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            budgets: DEFAULT_BUDGETS.to_vec(),
            batch_size: crate::rerank::DEFAULT_BATCH_SIZE,
            repeats: DEFAULT_REPEATS,
        }
    }
}

/// One timed re-ranking of one query.
#[derive(Debug, Clone, PartialEq)]
pub struct Timing {
    pub budget: usize,
    pub mode: &'static str,
    pub run_idx: usize,
    pub qid: String,
    pub micros: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetSummary {
    pub budget: usize,
    /// Mean per-query latency of each mode, ms.
    pub typical_ms: f64,
    pub gar_ms: f64,
    /// Per-run mean per-query overhead (GAR minus typical), ms.
    pub run_overheads: Vec<f64>,
    pub overhead_ms: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl BudgetSummary {
    pub fn ci_contains(&self, value: f64) -> bool {
        self.ci_low <= value && value <= self.ci_high
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatencyReport {
    pub timings: Vec<Timing>,
    pub summaries: Vec<BudgetSummary>,
}

impl LatencyReport {
    pub fn summary(&self, budget: usize) -> Option<&BudgetSummary> {
        self.summaries.iter().find(|s| s.budget == budget)
    }

    /// Least-squares slope of overhead (ms) against budget.
    pub fn overhead_slope(&self) -> f64 {
        let n = self.summaries.len() as f64;
        let mx = self.summaries.iter().map(|s| s.budget as f64).sum::<f64>() / n;
        let my = self.summaries.iter().map(|s| s.overhead_ms).sum::<f64>() / n;
        let (sxy, sxx) = self.summaries.iter().fold((0.0, 0.0), |(sxy, sxx), s| {
            let dx = s.budget as f64 - mx;
            (sxy + dx * (s.overhead_ms - my), sxx + dx * dx)
        });
        sxy / sxx
    }

    /// Raw rows `budget mode run_idx qid micros`, then summary rows whose
    /// run_idx and qid are `all`.
    pub fn write_tsv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "budget\tmode\trun_idx\tqid\tmicros")?;
        for t in &self.timings {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{:.3}",
                t.budget, t.mode, t.run_idx, t.qid, t.micros
            )?;
        }
        for s in &self.summaries {
            let rows = [
                ("typical_mean_ms", s.typical_ms),
                ("gar_mean_ms", s.gar_ms),
                ("overhead_mean_ms", s.overhead_ms),
                ("overhead_ci_low_ms", s.ci_low),
                ("overhead_ci_high_ms", s.ci_high),
            ];
            for (name, value) in rows {
                writeln!(out, "{}\t{name}\tall\tall\t{value:.6}", s.budget)?;
            }
        }
        Ok(())
    }
}

/// Runs both modes at every budget with a recording wrapper around
/// `scorer` and returns every score either mode asked for.
pub fn prepare_cache<S: Scorer + ?Sized>(
    runs: &RunFile,
    queries: &BTreeMap<String, String>,
    scorer: &S,
    graph: &CorpusGraph,
    config: &BenchConfig,
) -> Result<ScoreCache> {
    let recorder = RecordingScorer::new(scorer);
    for &budget in &config.budgets {
        let rc = ReRankConfig::new(config.batch_size, budget)?;
        rerank_run(Mode::Typical, runs, queries, &recorder, &rc)?;
        rerank_run(Mode::Adaptive(graph), runs, queries, &recorder, &rc)?;
    }
    let mut cache = ScoreCache::new();
    for (qid, docid, score) in recorder.take_calls() {
        cache.insert(&qid, &docid, score)?;
    }
    Ok(cache)
}

fn time_pass(
    mode: Mode<'_>,
    runs: &RunFile,
    cache: &ScoreCache,
    config: &ReRankConfig,
    mut record: impl FnMut(&str, f64),
) -> Result<()> {
    for r0 in runs.rankings() {
        let start = Instant::now();
        let out = rerank(mode, r0, "", cache, config)?;
        let elapsed = start.elapsed();
        black_box(out);
        record(r0.qid(), elapsed.as_secs_f64() * 1e6);
    }
    Ok(())
}

/// Measures the overhead of adaptive over typical re-ranking with cached
/// scores. A cache miss aborts the benchmark.
pub fn latency_bench(
    runs: &RunFile,
    cache: &ScoreCache,
    graph: &CorpusGraph,
    config: &BenchConfig,
) -> Result<LatencyReport> {
    if config.repeats < 2 {
        return Err(Error::Config("latency bench needs at least 2 repeats".into()));
    }
    if config.budgets.is_empty() {
        return Err(Error::Config("latency bench needs at least one budget".into()));
    }
    if runs.is_empty() {
        return Err(Error::EmptyInput("latency bench needs at least one query".into()));
    }
    let n_queries = runs.len() as f64;
    let t = StudentsT::new(0.0, 1.0, (config.repeats - 1) as f64)
        .map_err(|e| Error::Config(e.to_string()))?
        .inverse_cdf(0.975);

    let mut timings = Vec::new();
    let mut summaries = Vec::new();
    for &budget in &config.budgets {
        let rc = ReRankConfig::new(config.batch_size, budget)?;
        let modes = [Mode::Typical, Mode::Adaptive(graph)];
        for mode in modes {
            time_pass(mode, runs, cache, &rc, |_, _| ())?;
        }

        let mut totals = vec![[0.0f64; 2]; config.repeats];
        for (run_idx, total) in totals.iter_mut().enumerate() {
            // Alternate which mode goes first to cancel drift.
            let order: [usize; 2] = if run_idx % 2 == 0 { [0, 1] } else { [1, 0] };
            for m in order {
                let mode = modes[m];
                time_pass(mode, runs, cache, &rc, |qid, micros| {
                    total[m] += micros;
                    timings.push(Timing {
                        budget,
                        mode: mode.name(),
                        run_idx,
                        qid: qid.to_owned(),
                        micros,
                    });
                })?;
            }
        }

        let per_query_ms = |micros: f64| micros / 1e3 / n_queries;
        let run_overheads: Vec<f64> = totals.iter().map(|[typ, gar]| per_query_ms(gar - typ)).collect();
        let n = run_overheads.len() as f64;
        let mean = run_overheads.iter().sum::<f64>() / n;
        let var = run_overheads.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let half = t * (var / n).sqrt();
        summaries.push(BudgetSummary {
            budget,
            typical_ms: per_query_ms(totals.iter().map(|x| x[0]).sum::<f64>()) / n,
            gar_ms: per_query_ms(totals.iter().map(|x| x[1]).sum::<f64>()) / n,
            run_overheads,
            overhead_ms: mean,
            ci_low: mean - half,
            ci_high: mean + half,
        });
    }
    Ok(LatencyReport { timings, summaries })
}
