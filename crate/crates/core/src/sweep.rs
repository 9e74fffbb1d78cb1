//! Parameter sweeps over the graph degree `k` or the batch size `b`.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::eval::{Gain, Metric, Qrels};
use crate::graph::CorpusGraph;
use crate::ranking::RunFile;
use crate::rerank::{rerank_run, Mode, ReRankConfig, Scorer};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    /// Neighbours per document, taken as a prefix of each graph row.
    K,
    BatchSize,
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "k" => Ok(SweepParam::K),
            "b" | "batch-size" => Ok(SweepParam::BatchSize),
            _ => Err(Error::Config(format!("cannot sweep {s:?} (expected k or b)"))),
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParam::K => "k",
            SweepParam::BatchSize => "b",
        })
    }
}

/// `k` from 1 to 16.
pub fn default_k_values() -> Vec<usize> {
    (1..=16).collect()
}

/// `b` over the powers of two from 1 to 512.
pub fn default_batch_values() -> Vec<usize> {
    (0..=9).map(|p| 1 << p).collect()
}

/// Everything held fixed during a sweep.
pub struct SweepSetup<'a, S: ?Sized> {
    pub run: &'a RunFile,
    pub queries: &'a BTreeMap<String, String>,
    pub scorer: &'a S,
    /// Graph at the largest `k` of interest.
    pub graph: &'a CorpusGraph,
    pub qrels: &'a Qrels,
    pub config: ReRankConfig,
    pub metrics: Vec<Metric>,
    pub gain: Gain,
    pub min_rel: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub param: SweepParam,
    pub metrics: Vec<Metric>,
    /// `(value, mean of each metric)` in sweep order.
    pub rows: Vec<(usize, Vec<f64>)>,
}

impl SweepTable {
    /// Column of one metric across the sweep.
    pub fn column(&self, metric: Metric) -> Option<Vec<f64>> {
        let i = self.metrics.iter().position(|&m| m == metric)?;
        Some(self.rows.iter().map(|(_, v)| v[i]).collect())
    }

    pub fn write_tsv(&self, out: &mut impl Write) -> std::io::Result<()> {
        write!(out, "{}", self.param)?;
        for m in &self.metrics {
            write!(out, "\t{m}")?;
        }
        writeln!(out)?;
        for (value, means) in &self.rows {
            write!(out, "{value}")?;
            for v in means {
                write!(out, "\t{v:.6}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Re-runs adaptive re-ranking once per value and tabulates the mean of
/// every metric.
pub fn sweep<S: Scorer + ?Sized>(
    setup: &SweepSetup<'_, S>,
    param: SweepParam,
    values: &[usize],
) -> Result<SweepTable> {
    if let Some(m) = setup.metrics.iter().find(|m| m.needs_vectors()) {
        return Err(Error::Config(format!("{m} is not available in sweeps")));
    }
    let mut rows = Vec::with_capacity(values.len());
    for &value in values {
        let (graph, config) = match param {
            SweepParam::K => (setup.graph.truncated(value)?, setup.config),
            SweepParam::BatchSize => (
                setup.graph.clone(),
                ReRankConfig::new(value, setup.config.budget)?,
            ),
        };
        let reranked = rerank_run(
            Mode::Adaptive(&graph),
            setup.run,
            setup.queries,
            setup.scorer,
            &config,
        )?;
        let means = setup
            .metrics
            .iter()
            .map(|m| {
                Ok(m.evaluate(&reranked, setup.qrels, setup.gain, setup.min_rel)?
                    .mean)
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push((value, means));
    }
    Ok(SweepTable {
        param,
        metrics: setup.metrics.clone(),
        rows,
    })
}
