//! Budgeted re-ranking of an initial pool, with and without a corpus graph.
//!
//! [`typical_rerank`] scores the head of the initial ranking in batches until
//! the budget runs out. [`gar_rerank`] alternates between batches from the
//! initial ranking and batches from a frontier of graph neighbours of the
//! documents scored so far, so documents that the first stage ranked low or
//! missed entirely can still be scored. Both finish by appending the
//! unscored rest of the initial ranking in its original order.

mod frontier;
mod scorer;
mod trace;

use std::collections::{BTreeMap, HashSet};

pub use frontier::{Frontier, FrontierDoc};
pub use scorer::{Bm25Scorer, CachedScorer, OracleScorer, RecordingScorer, ScoreCache, Scorer};
pub use trace::{read_trace, trace_rows, write_trace, TraceRow};

use crate::error::{Error, Result};
use crate::graph::CorpusGraph;
use crate::ranking::{by_score, Provenance, RankedDoc, Ranking, RunFile};

pub const DEFAULT_BATCH_SIZE: usize = 16;
pub const DEFAULT_BUDGET: usize = 1000;
/// The two budgets commonly compared: a tight one and a generous one.
pub const BUDGET_PRESETS: [usize; 2] = [100, 1000];
/// Gap between consecutive backfilled scores.
pub const BACKFILL_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReRankConfig {
    /// Documents per scorer call (b).
    pub batch_size: usize,
    /// Maximum number of documents scored per query (c).
    pub budget: usize,
}

impl ReRankConfig {
    pub fn new(batch_size: usize, budget: usize) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if budget == 0 {
            return Err(Error::Config("budget must be at least 1".into()));
        }
        Ok(ReRankConfig { batch_size, budget })
    }
}

impl Default for ReRankConfig {
    fn default() -> Self {
        ReRankConfig {
            batch_size: DEFAULT_BATCH_SIZE,
            budget: DEFAULT_BUDGET,
        }
    }
}

fn score<S: Scorer + ?Sized>(scorer: &S, qid: &str, query: &str, batch: &[&str]) -> Result<Vec<f64>> {
    let failed = |message: String| Error::Scoring {
        qid: qid.to_owned(),
        batch: batch.iter().map(|d| (*d).to_owned()).collect(),
        message,
    };
    let scores = scorer
        .score_batch(qid, query, batch)
        .map_err(|e| failed(e.to_string()))?;
    if scores.len() != batch.len() {
        return Err(failed(format!(
            "scorer returned {} scores for {} documents",
            scores.len(),
            batch.len()
        )));
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(failed(format!("NaN score for {}", batch[i])));
    }
    Ok(scores)
}

/// Synthetic scores for unscored documents: strictly below `min_scored`
/// and strictly decreasing, in the order given. With nothing scored the
/// scores count down from zero.
pub fn backfill<'a>(remainder: impl IntoIterator<Item = &'a str>, min_scored: Option<f64>) -> Vec<RankedDoc> {
    let base = min_scored.unwrap_or(0.0);
    remainder
        .into_iter()
        .enumerate()
        .map(|(i, docid)| RankedDoc {
            docid: docid.to_owned(),
            score: base - (i + 1) as f64 * BACKFILL_EPSILON,
            provenance: Some(Provenance::Initial),
        })
        .collect()
}

fn finish<'a>(
    qid: &str,
    mut scored: Vec<RankedDoc>,
    remainder: impl IntoIterator<Item = &'a str>,
) -> Result<Ranking> {
    scored.sort_by(by_score);
    let min = scored.last().map(|e| e.score);
    scored.extend(backfill(remainder, min));
    Ranking::new(qid, scored)
}

fn require_pool(r0: &Ranking) -> Result<()> {
    if r0.is_empty() {
        return Err(Error::EmptyInput(format!(
            "initial ranking for query {:?} is empty",
            r0.qid()
        )));
    }
    Ok(())
}

/// Scores the top `min(c, |r0|)` documents of `r0` in batches of at most
/// `b`, sorts them by score and backfills the rest of `r0`.
pub fn typical_rerank<S: Scorer + ?Sized>(
    r0: &Ranking,
    query: &str,
    scorer: &S,
    config: &ReRankConfig,
) -> Result<Ranking> {
    require_pool(r0)?;
    let take = config.budget.min(r0.len());
    let mut scored = Vec::with_capacity(take);
    for chunk in r0.entries()[..take].chunks(config.batch_size) {
        let batch: Vec<&str> = chunk.iter().map(|e| e.docid.as_str()).collect();
        let scores = score(scorer, r0.qid(), query, &batch)?;
        scored.extend(batch.iter().zip(scores).map(|(d, s)| RankedDoc {
            docid: (*d).to_owned(),
            score: s,
            provenance: Some(Provenance::Initial),
        }));
    }
    finish(r0.qid(), scored, r0.docids().skip(take))
}

struct Candidate<'a> {
    docid: &'a str,
    internal: Option<u32>,
    source: Option<u32>,
}

/// Graph-based adaptive re-ranking.
///
/// The first batch comes from `r0`; after each batch the next one is drawn
/// from the other pool (initial ranking or frontier). When the chosen pool
/// is empty the batch comes from the other one, and the loop ends once the
/// budget is spent or both pools are empty. Every scored document pushes its
/// unscored graph neighbours onto the frontier with its own score as their
/// priority. Initial-ranking documents unknown to the graph are scored
/// normally but have no neighbours.
///
/// The output lists scored documents by score, then the unscored remainder
/// of `r0`; it can be longer than `r0` because of frontier discoveries.
pub fn gar_rerank<S: Scorer + ?Sized>(
    r0: &Ranking,
    query: &str,
    scorer: &S,
    graph: &CorpusGraph,
    config: &ReRankConfig,
) -> Result<Ranking> {
    require_pool(r0)?;
    // Without edges the frontier can never be populated.
    if graph.is_edgeless() {
        return typical_rerank(r0, query, scorer, config);
    }

    let docmap = graph.docmap();
    let pool = r0.entries();
    let mut scored_ids: HashSet<u32> = HashSet::with_capacity(config.budget.min(pool.len() * 2));
    let mut scored: Vec<RankedDoc> = Vec::with_capacity(config.budget.min(pool.len() * 2));
    let mut frontier = Frontier::new();
    let mut cursor = 0;
    let mut frontier_turn = false;
    let mut batch: Vec<Candidate> = Vec::with_capacity(config.batch_size);
    let mut ids: Vec<&str> = Vec::with_capacity(config.batch_size);

    let is_scored = |scored_ids: &HashSet<u32>, docid: &str| {
        docmap.internal(docid).is_some_and(|i| scored_ids.contains(&i))
    };

    while scored.len() < config.budget {
        let want = config.batch_size.min(config.budget - scored.len());
        while cursor < pool.len() && is_scored(&scored_ids, &pool[cursor].docid) {
            cursor += 1;
        }
        let initial_left = cursor < pool.len();
        let use_frontier = if frontier_turn {
            !frontier.is_empty() || !initial_left
        } else {
            !initial_left
        };
        if use_frontier && frontier.is_empty() {
            break;
        }

        batch.clear();
        if use_frontier {
            while batch.len() < want {
                let Some(next) = frontier.pop() else { break };
                batch.push(Candidate {
                    docid: docmap
                        .external(next.doc)
                        .expect("frontier ids come from the graph"),
                    internal: Some(next.doc),
                    source: Some(next.source),
                });
            }
        } else {
            while batch.len() < want && cursor < pool.len() {
                let docid = pool[cursor].docid.as_str();
                cursor += 1;
                let internal = docmap.internal(docid);
                if internal.is_some_and(|i| scored_ids.contains(&i)) {
                    continue;
                }
                batch.push(Candidate {
                    docid,
                    internal,
                    source: None,
                });
            }
        }

        ids.clear();
        ids.extend(batch.iter().map(|c| c.docid));
        let scores = score(scorer, r0.qid(), query, &ids)?;

        for c in &batch {
            if let Some(i) = c.internal {
                scored_ids.insert(i);
                frontier.remove(i);
            }
        }
        for (c, &s) in batch.iter().zip(&scores) {
            if let Some(i) = c.internal {
                for n in graph.neighbours(i)? {
                    if !scored_ids.contains(&n) {
                        frontier.push(n, s, i);
                    }
                }
            }
            let provenance = match c.source {
                None => Provenance::Initial,
                Some(src) => Provenance::Frontier {
                    source: docmap.external(src).unwrap_or_default().to_owned(),
                },
            };
            scored.push(RankedDoc {
                docid: c.docid.to_owned(),
                score: s,
                provenance: Some(provenance),
            });
        }
        frontier_turn = !use_frontier;
    }

    let remainder = pool[cursor..]
        .iter()
        .map(|e| e.docid.as_str())
        .filter(|d| !is_scored(&scored_ids, d));
    finish(r0.qid(), scored, remainder)
}

/// Which re-ranker to run.
#[derive(Debug, Clone, Copy)]
pub enum Mode<'g> {
    Typical,
    Adaptive(&'g CorpusGraph),
}

impl Mode<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Typical => "typical",
            Mode::Adaptive(_) => "gar",
        }
    }
}

pub fn rerank<S: Scorer + ?Sized>(
    mode: Mode<'_>,
    r0: &Ranking,
    query: &str,
    scorer: &S,
    config: &ReRankConfig,
) -> Result<Ranking> {
    match mode {
        Mode::Typical => typical_rerank(r0, query, scorer, config),
        Mode::Adaptive(graph) => gar_rerank(r0, query, scorer, graph, config),
    }
}

/// Re-ranks every query of `run`, sequentially. Queries missing from
/// `queries` get empty query text.
pub fn rerank_run<S: Scorer + ?Sized>(
    mode: Mode<'_>,
    run: &RunFile,
    queries: &BTreeMap<String, String>,
    scorer: &S,
    config: &ReRankConfig,
) -> Result<RunFile> {
    run.rankings()
        .map(|r0| {
            let query = queries.get(r0.qid()).map_or("", String::as_str);
            rerank(mode, r0, query, scorer, config)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::docmap::DocMap;
    use crate::graph::Neighbour;

    fn cache(pairs: &[(&str, f64)]) -> ScoreCache {
        let mut c = ScoreCache::new();
        for (d, s) in pairs {
            c.insert("q", d, *s).unwrap();
        }
        c
    }

    fn ids(r: &Ranking) -> Vec<&str> {
        r.docids().collect()
    }

    /// The eight-document example: d0 -> [d4, d5], d1 -> [d6], d2 -> [d7].
    fn toy() -> (Ranking, ScoreCache, CorpusGraph) {
        let r0 = Ranking::from_pairs("q", [("d0", 4.0), ("d1", 3.0), ("d2", 2.0), ("d3", 1.0)]).unwrap();
        let scores = cache(&[
            ("d0", 0.9),
            ("d1", 0.1),
            ("d2", 0.8),
            ("d3", 0.2),
            ("d4", 0.95),
            ("d5", 0.5),
            ("d6", 0.05),
            ("d7", 0.85),
        ]);
        let docmap = DocMap::new((0..8).map(|i| format!("d{i}"))).unwrap();
        let edges: [&[u32]; 8] = [&[4, 5], &[6], &[7], &[], &[], &[], &[], &[]];
        let graph = CorpusGraph::build(docmap, 2, |doc, _| {
            Ok(edges[doc as usize]
                .iter()
                .enumerate()
                .map(|(rank, &n)| Neighbour::new(n, 1.0 - rank as f64 * 0.1))
                .collect())
        })
        .unwrap();
        (r0, scores, graph)
    }

    #[test]
    fn toy_instance() {
        let (r0, scores, graph) = toy();
        let rec = RecordingScorer::new(&scores);
        let out = gar_rerank(&r0, "", &rec, &graph, &ReRankConfig::new(2, 6).unwrap()).unwrap();
        assert_eq!(ids(&out), ["d4", "d0", "d2", "d5", "d3", "d1"]);
        let order: Vec<String> = rec.calls().into_iter().map(|c| c.1).collect();
        assert_eq!(order, ["d0", "d1", "d4", "d5", "d2", "d3"]);
        assert_eq!(rec.batches(), 3);
        let frontier_src = Some(Provenance::Frontier { source: "d0".into() });
        assert_eq!(out.entries()[0].provenance, frontier_src);
        assert_eq!(out.entries()[3].provenance, frontier_src);
        assert_eq!(out.entries()[1].provenance, Some(Provenance::Initial));
    }

    #[test]
    fn typical_hand_example() {
        let r0 = Ranking::from_pairs("q", [("a", 4.0), ("b", 3.0), ("c", 2.0), ("d", 1.0)]).unwrap();
        let scores = cache(&[("a", 0.1), ("b", 0.9)]);
        let out = typical_rerank(&r0, "", &scores, &ReRankConfig::new(16, 2).unwrap()).unwrap();
        assert_eq!(ids(&out), ["b", "a", "c", "d"]);
        let s: Vec<f64> = out.entries().iter().map(|e| e.score).collect();
        assert_eq!(&s[..2], &[0.9, 0.1]);
        assert!((s[2] - (0.1 - 1e-6)).abs() < 1e-15);
        assert!((s[3] - (0.1 - 2e-6)).abs() < 1e-15);
    }

    #[test]
    fn budget_one_scores_one_doc() {
        let r0 = Ranking::from_pairs("q", [("a", 2.0), ("b", 1.0)]).unwrap();
        let rec = RecordingScorer::new(cache(&[("a", 0.5), ("b", 0.7)]));
        typical_rerank(&r0, "", &rec, &ReRankConfig::new(16, 1).unwrap()).unwrap();
        assert_eq!(rec.calls().len(), 1);
    }

    #[test]
    fn full_budget_is_a_pure_sort() {
        let r0 = Ranking::from_pairs("q", [("a", 3.0), ("b", 2.0), ("c", 1.0)]).unwrap();
        let scores = cache(&[("a", 0.2), ("b", 0.2), ("c", 0.9)]);
        let out = typical_rerank(&r0, "", &scores, &ReRankConfig::new(2, 10).unwrap()).unwrap();
        assert_eq!(ids(&out), ["c", "a", "b"]);
    }

    #[test]
    fn backfill_formula() {
        assert!(backfill(std::iter::empty(), Some(0.3)).is_empty());
        let b = backfill(["x", "y"], Some(0.3));
        assert_eq!(b[0].docid, "x");
        assert!((b[0].score - 0.299999).abs() < 1e-12);
        assert!((b[1].score - 0.299998).abs() < 1e-12);
    }

    #[test]
    fn scorer_failures_name_the_batch() {
        let r0 = Ranking::from_pairs("q", [("a", 2.0), ("b", 1.0)]).unwrap();
        let err =
            typical_rerank(&r0, "", &cache(&[("a", 0.5)]), &ReRankConfig::new(2, 2).unwrap()).unwrap_err();
        match err {
            Error::Scoring { qid, batch, message } => {
                assert_eq!(qid, "q");
                assert_eq!(batch, ["a", "b"]);
                assert!(message.contains("\"b\""), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_pool_and_bad_config_rejected() {
        let r0 = Ranking::from_pairs::<_, &str>("q", []).unwrap();
        assert!(typical_rerank(&r0, "", &ScoreCache::new(), &ReRankConfig::default()).is_err());
        assert!(ReRankConfig::new(0, 10).is_err());
        assert!(ReRankConfig::new(1, 0).is_err());
        assert_eq!(
            ReRankConfig::default(),
            ReRankConfig {
                batch_size: 16,
                budget: 1000
            }
        );
    }

    #[test]
    fn frontier_discoveries_extend_the_ranking() {
        let (r0, scores, graph) = toy();
        let out = gar_rerank(&r0, "", &scores, &graph, &ReRankConfig::new(2, 100).unwrap()).unwrap();
        assert_eq!(out.len(), 8);
        assert_eq!(ids(&out), ["d4", "d0", "d7", "d2", "d5", "d3", "d1", "d6"]);
    }

    #[test]
    fn docs_outside_the_graph_are_scored_without_neighbours() {
        let (_, mut scores, graph) = toy();
        scores.insert("q", "ext", 2.0).unwrap();
        let r0 = Ranking::from_pairs("q", [("ext", 5.0), ("d0", 4.0)]).unwrap();
        let out = gar_rerank(&r0, "", &scores, &graph, &ReRankConfig::new(1, 10).unwrap()).unwrap();
        assert_eq!(ids(&out), ["ext", "d4", "d0", "d5"]);
    }

    #[test]
    fn frontier_draws_remove_docs_from_the_initial_pool() {
        // d4 is deep in r0 but reached first through d0's edge.
        let (_, scores, graph) = toy();
        let r0 = Ranking::from_pairs("q", [("d0", 9.0), ("d1", 8.0), ("d4", 1.0)]).unwrap();
        let rec = RecordingScorer::new(&scores);
        let out = gar_rerank(&r0, "", &rec, &graph, &ReRankConfig::new(1, 3).unwrap()).unwrap();
        let order: Vec<String> = rec.calls().into_iter().map(|c| c.1).collect();
        assert_eq!(order, ["d0", "d4", "d1"]);
        assert_eq!(ids(&out), ["d4", "d0", "d1"]);
    }
}
