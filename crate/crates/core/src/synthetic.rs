//! Seeded synthetic collections with planted relevance clusters.
//!
//! Documents belong to topical clusters that share a private vocabulary, so
//! a lexical corpus graph links documents of the same cluster. Each query
//! targets one cluster: its marker term appears in only part of the
//! cluster, and a distractor term appears in documents of other clusters.
//! A BM25 first stage therefore misses the unmarked members, which only
//! the graph can reach.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::eval::Qrels;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_docs: usize,
    pub n_clusters: usize,
    /// Clusters (from the first) that get a query.
    pub n_queries: usize,
    /// Size of each cluster's private vocabulary.
    pub topic_terms: usize,
    /// Tokens per document drawn from its cluster vocabulary.
    pub topic_tokens: usize,
    /// Size of the vocabulary shared by all documents.
    pub background_terms: usize,
    /// Tokens per document drawn from the shared vocabulary.
    pub background_tokens: usize,
    /// Fraction of a cluster carrying its query's marker term.
    pub marker_coverage: f64,
    /// Documents outside the cluster carrying the query's distractor term.
    pub distractors: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    /// 200 documents in 20 clusters of 10, one query per cluster.
    pub fn small(seed: u64) -> Self {
        SyntheticSpec {
            n_docs: 200,
            n_clusters: 20,
            n_queries: 20,
            topic_terms: 8,
            topic_tokens: 6,
            background_terms: 50,
            background_tokens: 4,
            marker_coverage: 0.6,
            distractors: 10,
            seed,
        }
    }

    /// 10,000 documents in 1,000 clusters.
    pub fn large(seed: u64) -> Self {
        SyntheticSpec {
            n_docs: 10_000,
            n_clusters: 1_000,
            n_queries: 50,
            background_terms: 200,
            ..Self::small(seed)
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCollection {
    /// `(docid, text)` in internal-id order.
    pub corpus: Vec<(String, String)>,
    pub queries: BTreeMap<String, String>,
    pub qrels: Qrels,
    /// Cluster of each document.
    pub clusters: Vec<usize>,
}

pub fn doc_id(i: usize) -> String {
    format!("d{i}")
}

pub fn query_id(cluster: usize) -> String {
    format!("q{cluster}")
}

impl SyntheticCollection {
    pub fn generate(spec: &SyntheticSpec) -> Result<Self> {
        if spec.n_clusters == 0 || spec.n_docs < spec.n_clusters {
            return Err(Error::Config("need at least one document per cluster".into()));
        }
        if spec.n_queries > spec.n_clusters {
            return Err(Error::Config("more queries than clusters".into()));
        }
        if spec.topic_terms == 0 || spec.background_terms == 0 {
            return Err(Error::Config("vocabularies must be non-empty".into()));
        }
        if !(0.0..=1.0).contains(&spec.marker_coverage) {
            return Err(Error::Config("marker coverage must lie in [0, 1]".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let clusters: Vec<usize> = (0..spec.n_docs).map(|i| i % spec.n_clusters).collect();
        let mut tokens: Vec<Vec<String>> = clusters
            .iter()
            .map(|&c| {
                let mut words: Vec<String> = (0..spec.topic_tokens)
                    .map(|_| format!("t{c}w{}", rng.random_range(0..spec.topic_terms)))
                    .collect();
                words.extend(
                    (0..spec.background_tokens)
                        .map(|_| format!("b{}", rng.random_range(0..spec.background_terms))),
                );
                words
            })
            .collect();

        let mut queries = BTreeMap::new();
        let mut qrels = Qrels::new();
        for c in 0..spec.n_queries {
            let qid = query_id(c);
            let mut members: Vec<usize> = (c..spec.n_docs).step_by(spec.n_clusters).collect();
            members.shuffle(&mut rng);
            let marked = (spec.marker_coverage * members.len() as f64).round() as usize;
            for &d in &members[..marked] {
                tokens[d].push(format!("m{c}"));
            }
            let mut members_sorted = members.clone();
            members_sorted.sort_unstable();
            for &d in &members_sorted {
                qrels.insert(&qid, &doc_id(d), rng.random_range(2..=3))?;
            }

            let outsiders = spec.n_docs - members.len();
            let mut picked =
                rand::seq::index::sample(&mut rng, outsiders, spec.distractors.min(outsiders)).into_vec();
            picked.sort_unstable();
            for o in picked {
                let d = nth_outside(o, c, spec.n_clusters);
                tokens[d].push(format!("x{c}"));
                qrels.insert(&qid, &doc_id(d), 0)?;
            }
            queries.insert(qid, format!("m{c} x{c}"));
        }

        let corpus = tokens
            .into_iter()
            .enumerate()
            .map(|(i, mut t)| {
                t.shuffle(&mut rng);
                (doc_id(i), t.join(" "))
            })
            .collect();
        Ok(SyntheticCollection {
            corpus,
            queries,
            qrels,
            clusters,
        })
    }
}

/// The `n`-th (0-based) document id whose cluster differs from `cluster`.
fn nth_outside(n: usize, cluster: usize, n_clusters: usize) -> usize {
    let per_round = n_clusters - 1;
    if per_round == 0 {
        return n;
    }
    let round = n / per_round;
    let offset = n % per_round;
    let within = if offset >= cluster { offset + 1 } else { offset };
    round * n_clusters + within
}

/// Queries made of `terms` random background words, for large candidate
/// pools.
pub fn background_queries(
    spec: &SyntheticSpec,
    n: usize,
    terms: usize,
    seed: u64,
) -> BTreeMap<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let text: Vec<String> = (0..terms)
                .map(|_| format!("b{}", rng.random_range(0..spec.background_terms)))
                .collect();
            (format!("bq{i}"), text.join(" "))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let a = SyntheticCollection::generate(&SyntheticSpec::small(3)).unwrap();
        let b = SyntheticCollection::generate(&SyntheticSpec::small(3)).unwrap();
        let c = SyntheticCollection::generate(&SyntheticSpec::small(4)).unwrap();
        assert_eq!(a.corpus, b.corpus);
        assert_eq!(a.qrels, b.qrels);
        assert_ne!(a.corpus, c.corpus);
    }

    #[test]
    fn planted_structure() {
        let spec = SyntheticSpec::small(1);
        let s = SyntheticCollection::generate(&spec).unwrap();
        assert_eq!(s.corpus.len(), 200);
        assert_eq!(s.queries.len(), 20);
        for c in 0..20 {
            let qid = query_id(c);
            let judged = s.qrels.query(&qid).unwrap();
            assert_eq!(s.qrels.n_relevant(&qid, 2), 10);
            assert_eq!(judged.len(), 20);
            let marker = format!("m{c}");
            let marked = s
                .corpus
                .iter()
                .filter(|(_, t)| t.split(' ').any(|w| w == marker))
                .count();
            assert_eq!(marked, 6);
            for (d, &label) in judged {
                let i: usize = d[1..].parse().unwrap();
                assert_eq!(label >= 2, s.clusters[i] == c);
            }
        }
    }

    #[test]
    fn nth_outside_skips_the_cluster() {
        let outside: Vec<usize> = (0..6).map(|n| nth_outside(n, 1, 3)).collect();
        assert_eq!(outside, vec![0, 2, 3, 5, 6, 8]);
    }

    #[test]
    fn invalid_specs() {
        let mut spec = SyntheticSpec::small(0);
        spec.n_queries = 21;
        assert!(SyntheticCollection::generate(&spec).is_err());
        spec = SyntheticSpec::small(0);
        spec.n_docs = 10;
        assert!(SyntheticCollection::generate(&spec).is_err());
    }
}
