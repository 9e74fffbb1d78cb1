//! Ranked-retrieval effectiveness measures.
//!
//! Every measure is computed per query over the queries present in both the
//! run and the qrels, then averaged with an unweighted mean. Binary measures
//! treat a document as relevant when its label is at least `min_rel`; queries
//! without any relevant document are left out of those means.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::ranking::{Ranking, RunFile};

use super::Qrels;

/// Conventional binarization threshold for graded TREC DL labels.
pub const DEFAULT_MIN_REL: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Gain {
    /// `2^rel - 1`
    #[default]
    Exponential,
    /// `rel`
    Linear,
}

impl Gain {
    fn of(self, label: u8) -> f64 {
        match self {
            Gain::Exponential => f64::from((1u32 << label) - 1),
            Gain::Linear => f64::from(label),
        }
    }
}

impl FromStr for Gain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exp" | "exponential" => Ok(Gain::Exponential),
            "lin" | "linear" => Ok(Gain::Linear),
            _ => Err(Error::Config(format!("unknown gain {s:?} (expected exp or lin)"))),
        }
    }
}

/// Per-query values and their mean.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricValues {
    pub per_query: BTreeMap<String, f64>,
    pub mean: f64,
}

impl MetricValues {
    fn from_per_query(name: &str, per_query: BTreeMap<String, f64>) -> Result<Self> {
        if per_query.is_empty() {
            return Err(Error::EmptyInput(format!("{name}: no query could be evaluated")));
        }
        let mean = per_query.values().sum::<f64>() / per_query.len() as f64;
        Ok(MetricValues { per_query, mean })
    }
}

/// Queries of `run` that also have judgments.
fn shared<'a>(
    run: &'a RunFile,
    qrels: &'a Qrels,
) -> Result<impl Iterator<Item = (&'a Ranking, &'a std::collections::HashMap<String, u8>)>> {
    let pairs: Vec<_> = run
        .rankings()
        .filter_map(|r| qrels.query(r.qid()).map(|j| (r, j)))
        .collect();
    if pairs.is_empty() {
        return Err(Error::EmptyInput("run and qrels share no queries".into()));
    }
    Ok(pairs.into_iter())
}

fn depth(ranking: &Ranking, cutoff: Option<usize>) -> usize {
    cutoff.map_or(ranking.len(), |k| k.min(ranking.len()))
}

pub fn ndcg(run: &RunFile, qrels: &Qrels, cutoff: Option<usize>, gain: Gain) -> Result<MetricValues> {
    let mut per_query = BTreeMap::new();
    for (ranking, judged) in shared(run, qrels)? {
        let mut ideal: Vec<u8> = judged.values().copied().collect();
        ideal.sort_unstable_by(|a, b| b.cmp(a));
        ideal.truncate(cutoff.unwrap_or(usize::MAX));
        let idcg: f64 = ideal
            .iter()
            .enumerate()
            .map(|(i, &l)| gain.of(l) / (i as f64 + 2.0).log2())
            .sum();
        if idcg == 0.0 {
            continue;
        }
        let dcg: f64 = ranking.entries()[..depth(ranking, cutoff)]
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let label = judged.get(&e.docid).copied().unwrap_or(0);
                gain.of(label) / (i as f64 + 2.0).log2()
            })
            .sum();
        per_query.insert(ranking.qid().to_owned(), dcg / idcg);
    }
    MetricValues::from_per_query("nDCG", per_query)
}

/// Average precision; the denominator is the number of relevant documents
/// in the qrels, retrieved or not.
pub fn average_precision(
    run: &RunFile,
    qrels: &Qrels,
    cutoff: Option<usize>,
    min_rel: u8,
) -> Result<MetricValues> {
    let mut per_query = BTreeMap::new();
    for (ranking, judged) in shared(run, qrels)? {
        let total = judged.values().filter(|&&l| l >= min_rel).count();
        if total == 0 {
            continue;
        }
        let mut hits = 0usize;
        let mut sum = 0.0;
        for (i, e) in ranking.entries()[..depth(ranking, cutoff)].iter().enumerate() {
            if judged.get(&e.docid).is_some_and(|&l| l >= min_rel) {
                hits += 1;
                sum += hits as f64 / (i + 1) as f64;
            }
        }
        per_query.insert(ranking.qid().to_owned(), sum / total as f64);
    }
    MetricValues::from_per_query("AP", per_query)
}

pub fn recall(run: &RunFile, qrels: &Qrels, k: usize, min_rel: u8) -> Result<MetricValues> {
    let mut per_query = BTreeMap::new();
    for (ranking, judged) in shared(run, qrels)? {
        let total = judged.values().filter(|&&l| l >= min_rel).count();
        if total == 0 {
            continue;
        }
        let found = ranking.entries()[..depth(ranking, Some(k))]
            .iter()
            .filter(|e| judged.get(&e.docid).is_some_and(|&l| l >= min_rel))
            .count();
        per_query.insert(ranking.qid().to_owned(), found as f64 / total as f64);
    }
    MetricValues::from_per_query("recall", per_query)
}

pub fn reciprocal_rank(run: &RunFile, qrels: &Qrels, k: usize, min_rel: u8) -> Result<MetricValues> {
    let mut per_query = BTreeMap::new();
    for (ranking, judged) in shared(run, qrels)? {
        if !judged.values().any(|&l| l >= min_rel) {
            continue;
        }
        let rr = ranking.entries()[..depth(ranking, Some(k))]
            .iter()
            .position(|e| judged.get(&e.docid).is_some_and(|&l| l >= min_rel))
            .map_or(0.0, |i| 1.0 / (i + 1) as f64);
        per_query.insert(ranking.qid().to_owned(), rr);
    }
    MetricValues::from_per_query("RR", per_query)
}

/// Fraction of the top `k` positions holding a judged document. Positions
/// past the end of a short ranking count as unjudged.
pub fn judged(run: &RunFile, qrels: &Qrels, k: usize) -> Result<MetricValues> {
    if k == 0 {
        return Err(Error::Config("judged@k needs k >= 1".into()));
    }
    let mut per_query = BTreeMap::new();
    for (ranking, judged) in shared(run, qrels)? {
        let n = ranking.entries()[..depth(ranking, Some(k))]
            .iter()
            .filter(|e| judged.contains_key(&e.docid))
            .count();
        per_query.insert(ranking.qid().to_owned(), n as f64 / k as f64);
    }
    MetricValues::from_per_query("judged", per_query)
}

/// A named measure, written `ndcg`, `ndcg@10`, `map`, `map@100`,
/// `recall@1000`, `rr@10`, `judged@10` or `ils`/`ils@1000`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Ndcg(Option<usize>),
    Map(Option<usize>),
    Recall(usize),
    Rr(usize),
    Judged(usize),
    Ils(usize),
}

pub const METRIC_SYNTAX: &str = "ndcg, ndcg@K, map, map@K, recall@K, rr@K, judged@K, ils, ils@K";

impl Metric {
    pub fn needs_vectors(self) -> bool {
        matches!(self, Metric::Ils(_))
    }

    /// Evaluates every measure except ILS, which needs embedding vectors.
    pub fn evaluate(self, run: &RunFile, qrels: &Qrels, gain: Gain, min_rel: u8) -> Result<MetricValues> {
        match self {
            Metric::Ndcg(k) => ndcg(run, qrels, k, gain),
            Metric::Map(k) => average_precision(run, qrels, k, min_rel),
            Metric::Recall(k) => recall(run, qrels, k, min_rel),
            Metric::Rr(k) => reciprocal_rank(run, qrels, k, min_rel),
            Metric::Judged(k) => judged(run, qrels, k),
            Metric::Ils(_) => Err(Error::Config("ILS requires embedding vectors".into())),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::Config(format!("unknown metric {s:?}; valid metrics: {METRIC_SYNTAX}"));
        let (name, cutoff) = match s.split_once('@') {
            Some((name, k)) => {
                let k: usize = k.parse().map_err(|_| unknown())?;
                if k == 0 {
                    return Err(unknown());
                }
                (name, Some(k))
            }
            None => (s, None),
        };
        match (name.to_ascii_lowercase().as_str(), cutoff) {
            ("ndcg", k) => Ok(Metric::Ndcg(k)),
            ("map", k) => Ok(Metric::Map(k)),
            ("recall", Some(k)) => Ok(Metric::Recall(k)),
            ("rr", Some(k)) => Ok(Metric::Rr(k)),
            ("judged", Some(k)) => Ok(Metric::Judged(k)),
            ("ils", k) => Ok(Metric::Ils(k.unwrap_or(1000))),
            _ => Err(unknown()),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cut = |f: &mut fmt::Formatter<'_>, name, k: Option<usize>| match k {
            Some(k) => write!(f, "{name}@{k}"),
            None => write!(f, "{name}"),
        };
        match *self {
            Metric::Ndcg(k) => cut(f, "ndcg", k),
            Metric::Map(k) => cut(f, "map", k),
            Metric::Recall(k) => cut(f, "recall", Some(k)),
            Metric::Rr(k) => cut(f, "rr", Some(k)),
            Metric::Judged(k) => cut(f, "judged", Some(k)),
            Metric::Ils(k) => cut(f, "ils", Some(k)),
        }
    }
}

/// Writes `metric qid value` rows followed by an `all` row per metric.
pub fn write_report(out: &mut impl Write, results: &[(String, MetricValues)]) -> std::io::Result<()> {
    for (name, values) in results {
        for (qid, v) in &values.per_query {
            writeln!(out, "{name}\t{qid}\t{v:.6}")?;
        }
        writeln!(out, "{name}\tall\t{:.6}", values.mean)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(qid: &str, docs: &[&str]) -> RunFile {
        let n = docs.len() as f64;
        std::iter::once(
            Ranking::from_pairs(qid, docs.iter().enumerate().map(|(i, d)| (*d, n - i as f64))).unwrap(),
        )
        .collect()
    }

    fn qrels(lines: &str) -> Qrels {
        Qrels::parse("mem", lines.as_bytes()).unwrap()
    }

    #[test]
    fn single_relevant_first_is_perfect() {
        let q = qrels("q 0 a 3\n");
        let v = ndcg(&run("q", &["a", "x", "y"]), &q, None, Gain::Exponential).unwrap();
        assert_eq!(v.mean, 1.0);
    }

    #[test]
    fn reversed_ideal_by_hand() {
        // Labels 1, 2, 3 at ranks 1..3; gains 1, 3, 7.
        let q = qrels("q 0 a 1\nq 0 b 2\nq 0 c 3\n");
        let v = ndcg(&run("q", &["a", "b", "c"]), &q, None, Gain::Exponential).unwrap();
        let dcg = 1.0 + 3.0 / 3f64.log2() + 7.0 / 2.0;
        let idcg = 7.0 + 3.0 / 3f64.log2() + 1.0 / 2.0;
        assert!((v.mean - dcg / idcg).abs() < 1e-12);

        let lin = ndcg(&run("q", &["a", "b", "c"]), &q, None, Gain::Linear).unwrap();
        let dcg = 1.0 + 2.0 / 3f64.log2() + 3.0 / 2.0;
        let idcg = 3.0 + 2.0 / 3f64.log2() + 1.0 / 2.0;
        assert!((lin.mean - dcg / idcg).abs() < 1e-12);
    }

    #[test]
    fn only_unjudged_docs_scores_zero() {
        let q = qrels("q 0 a 2\n");
        let v = ndcg(&run("q", &["x", "y"]), &q, Some(10), Gain::Exponential).unwrap();
        assert_eq!(v.per_query["q"], 0.0);
    }

    #[test]
    fn zero_ideal_queries_skipped() {
        let q = qrels("q 0 a 0\np 0 a 1\n");
        let r: RunFile = [
            Ranking::from_pairs("q", [("a", 1.0)]).unwrap(),
            Ranking::from_pairs("p", [("a", 1.0)]).unwrap(),
        ]
        .into_iter()
        .collect();
        let v = ndcg(&r, &q, None, Gain::Exponential).unwrap();
        assert_eq!(v.per_query.len(), 1);
        assert!(ndcg(&run("q", &["a"]), &q, None, Gain::Exponential).is_err());
    }

    #[test]
    fn disjoint_queries_error() {
        let q = qrels("other 0 a 1\n");
        assert!(matches!(
            ndcg(&run("q", &["a"]), &q, None, Gain::Exponential),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn binary_measures() {
        let q = qrels("q 0 a 1\nq 0 b 2\nq 0 c 3\nq 0 d 0\n");
        let r = run("q", &["x", "a", "b", "d", "c"]);
        assert_eq!(recall(&r, &q, 5, 2).unwrap().mean, 1.0);
        assert_eq!(recall(&r, &q, 3, 2).unwrap().mean, 0.5);
        // First label >= 2 is b at rank 3.
        assert!((reciprocal_rank(&r, &q, 10, 2).unwrap().mean - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(reciprocal_rank(&r, &q, 2, 2).unwrap().mean, 0.0);
        assert_eq!(reciprocal_rank(&r, &q, 10, 1).unwrap().mean, 0.5);
        let ap = (1.0 / 3.0 + 2.0 / 5.0) / 2.0;
        assert!((average_precision(&r, &q, None, 2).unwrap().mean - ap).abs() < 1e-12);
    }

    #[test]
    fn judged_fraction() {
        let q = qrels("q 0 a 0\nq 0 b 0\nq 0 c 1\nq 0 d 3\n");
        let docs = ["a", "x1", "b", "x2", "c", "x3", "d", "x4", "x5", "x6"];
        assert_eq!(judged(&run("q", &docs), &q, 10).unwrap().mean, 0.4);
        assert_eq!(judged(&run("q", &["a"]), &q, 10).unwrap().mean, 0.1);
    }

    #[test]
    fn no_relevant_anywhere_is_an_error() {
        let q = qrels("q 0 a 1\n");
        assert!(recall(&run("q", &["a"]), &q, 10, 2).is_err());
        assert!(average_precision(&run("q", &["a"]), &q, None, 2).is_err());
    }

    #[test]
    fn metric_names() {
        for name in [
            "ndcg",
            "ndcg@10",
            "map",
            "map@100",
            "recall@1000",
            "rr@10",
            "judged@10",
            "ils@1000",
        ] {
            assert_eq!(name.parse::<Metric>().unwrap().to_string(), name);
        }
        let err = "precision@5".parse::<Metric>().unwrap_err().to_string();
        assert!(err.contains("valid metrics"), "{err}");
        assert!("recall".parse::<Metric>().is_err());
        assert!("ndcg@0".parse::<Metric>().is_err());
    }
}
