//! The scoring contract and the scorers that ship with the engine.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::eval::Qrels;
use crate::lexical::{tokenize, Bm25Params, InvertedIndex};

/// Scores a batch of documents for one query.
///
/// Implementations must be deterministic and return one score per docid in
/// the same order.
pub trait Scorer {
    fn score_batch(&self, qid: &str, query: &str, docids: &[&str]) -> Result<Vec<f64>>;
}

impl<S: Scorer + ?Sized> Scorer for &S {
    fn score_batch(&self, qid: &str, query: &str, docids: &[&str]) -> Result<Vec<f64>> {
        (**self).score_batch(qid, query, docids)
    }
}

impl<S: Scorer + ?Sized> Scorer for Box<S> {
    fn score_batch(&self, qid: &str, query: &str, docids: &[&str]) -> Result<Vec<f64>> {
        (**self).score_batch(qid, query, docids)
    }
}

/// Precomputed `(qid, docid) -> score` table. As a scorer it is strict:
/// a missing pair is an error.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreCache {
    scores: HashMap<String, HashMap<String, f64>>,
}

impl ScoreCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a pair; the same pair with a different score is rejected.
    pub fn insert(&mut self, qid: &str, docid: &str, score: f64) -> Result<()> {
        match self
            .scores
            .entry(qid.to_owned())
            .or_default()
            .entry(docid.to_owned())
        {
            Entry::Vacant(slot) => {
                slot.insert(score);
                Ok(())
            }
            Entry::Occupied(slot) if slot.get().to_bits() == score.to_bits() => Ok(()),
            Entry::Occupied(slot) => Err(Error::Config(format!(
                "conflicting cached scores for ({qid}, {docid}): {} and {score}",
                slot.get()
            ))),
        }
    }

    pub fn get(&self, qid: &str, docid: &str) -> Option<f64> {
        self.scores.get(qid)?.get(docid).copied()
    }

    pub fn len(&self) -> usize {
        self.scores.values().map(HashMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Parses `qid<TAB>docid<TAB>score` lines.
    pub fn parse(origin: &str, reader: impl BufRead) -> Result<Self> {
        let mut cache = ScoreCache::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(origin, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let err = |m: String| Error::parse(origin, n + 1, m);
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(err(format!(
                    "expected 3 tab-separated fields, found {}",
                    fields.len()
                )));
            }
            let score: f64 = fields[2]
                .trim()
                .parse()
                .map_err(|_| err(format!("bad score {:?}", fields[2])))?;
            cache
                .insert(fields[0], fields[1], score)
                .map_err(|e| err(e.to_string()))?;
        }
        Ok(cache)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&path.display().to_string(), BufReader::new(file))
    }

    /// Writes the cache sorted by qid then docid, scores at full precision.
    pub fn write(&self, out: &mut impl Write) -> std::io::Result<()> {
        let mut qids: Vec<&String> = self.scores.keys().collect();
        qids.sort();
        for qid in qids {
            let mut docs: Vec<(&String, &f64)> = self.scores[qid].iter().collect();
            docs.sort_by(|a, b| a.0.cmp(b.0));
            for (docid, score) in docs {
                writeln!(out, "{qid}\t{docid}\t{score}")?;
            }
        }
        Ok(())
    }
}

impl Scorer for ScoreCache {
    fn score_batch(&self, qid: &str, _query: &str, docids: &[&str]) -> Result<Vec<f64>> {
        docids
            .iter()
            .map(|d| {
                self.get(qid, d).ok_or_else(|| Error::MissingScore {
                    qid: qid.to_owned(),
                    docid: (*d).to_owned(),
                })
            })
            .collect()
    }
}

/// Cache lookups with an optional constant for missing pairs.
#[derive(Debug, Clone)]
pub struct CachedScorer {
    cache: ScoreCache,
    fallback: Option<f64>,
}

impl CachedScorer {
    pub fn new(cache: ScoreCache) -> Self {
        CachedScorer {
            cache,
            fallback: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(Self::new(ScoreCache::load(path)?))
    }

    pub fn with_fallback(mut self, score: f64) -> Self {
        self.fallback = Some(score);
        self
    }

    pub fn cache(&self) -> &ScoreCache {
        &self.cache
    }
}

impl Scorer for CachedScorer {
    fn score_batch(&self, qid: &str, query: &str, docids: &[&str]) -> Result<Vec<f64>> {
        match self.fallback {
            None => self.cache.score_batch(qid, query, docids),
            Some(fallback) => Ok(docids
                .iter()
                .map(|d| self.cache.get(qid, d).unwrap_or(fallback))
                .collect()),
        }
    }
}

/// Relevance label plus seeded Gaussian noise. Unjudged documents have
/// label 0. The noise of a pair depends only on `(seed, qid, docid)`.
#[derive(Debug, Clone)]
pub struct OracleScorer {
    qrels: Qrels,
    noise: Option<Normal<f64>>,
    seed: u64,
}

impl OracleScorer {
    pub fn new(qrels: Qrels, noise_sd: f64, seed: u64) -> Result<Self> {
        if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
            return Err(Error::Config(format!("noise sd must be >= 0, got {noise_sd}")));
        }
        let noise = if noise_sd > 0.0 {
            Some(Normal::new(0.0, noise_sd).map_err(|e| Error::Config(e.to_string()))?)
        } else {
            None
        };
        Ok(OracleScorer { qrels, noise, seed })
    }

    pub fn score(&self, qid: &str, docid: &str) -> f64 {
        let label = f64::from(self.qrels.label(qid, docid).unwrap_or(0));
        match &self.noise {
            None => label,
            Some(normal) => {
                let mut rng = ChaCha8Rng::seed_from_u64(pair_hash(self.seed, qid, docid));
                label + normal.sample(&mut rng)
            }
        }
    }
}

impl Scorer for OracleScorer {
    fn score_batch(&self, qid: &str, _query: &str, docids: &[&str]) -> Result<Vec<f64>> {
        Ok(docids.iter().map(|d| self.score(qid, d)).collect())
    }
}

/// 64-bit FNV-1a over the seed and both ids, separated so that
/// `("ab", "c")` and `("a", "bc")` differ.
fn pair_hash(seed: u64, qid: &str, docid: &str) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    let bytes = seed
        .to_le_bytes()
        .into_iter()
        .chain(qid.bytes())
        .chain([0xff])
        .chain(docid.bytes());
    for b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(PRIME);
    }
    h
}

/// BM25 over an in-memory index, using the query text.
#[derive(Debug, Clone, Copy)]
pub struct Bm25Scorer<'a> {
    index: &'a InvertedIndex,
    params: Bm25Params,
}

impl<'a> Bm25Scorer<'a> {
    pub fn new(index: &'a InvertedIndex, params: Bm25Params) -> Self {
        Bm25Scorer { index, params }
    }
}

impl Scorer for Bm25Scorer<'_> {
    fn score_batch(&self, _qid: &str, query: &str, docids: &[&str]) -> Result<Vec<f64>> {
        let terms = tokenize(query);
        docids
            .iter()
            .map(|d| {
                let doc = self
                    .index
                    .docmap()
                    .internal(d)
                    .ok_or_else(|| Error::UnknownDocId((*d).to_owned()))?;
                self.index
                    .score(&self.params, terms.iter().map(String::as_str), doc)
            })
            .collect()
    }
}

/// Wraps a scorer and records every `(qid, docid)` it is asked about, in
/// call order.
#[derive(Debug, Default)]
pub struct RecordingScorer<S> {
    inner: S,
    calls: Mutex<Vec<(String, String, f64)>>,
    batches: Mutex<usize>,
}

impl<S: Scorer> RecordingScorer<S> {
    pub fn new(inner: S) -> Self {
        RecordingScorer {
            inner,
            calls: Mutex::new(Vec::new()),
            batches: Mutex::new(0),
        }
    }

    /// Every scored `(qid, docid, score)`, in call order.
    pub fn calls(&self) -> Vec<(String, String, f64)> {
        self.calls.lock().unwrap().clone()
    }

    pub fn batches(&self) -> usize {
        *self.batches.lock().unwrap()
    }

    pub fn take_calls(&self) -> Vec<(String, String, f64)> {
        std::mem::take(&mut *self.calls.lock().unwrap())
    }
}

impl<S: Scorer> Scorer for RecordingScorer<S> {
    fn score_batch(&self, qid: &str, query: &str, docids: &[&str]) -> Result<Vec<f64>> {
        let scores = self.inner.score_batch(qid, query, docids)?;
        *self.batches.lock().unwrap() += 1;
        let mut calls = self.calls.lock().unwrap();
        for (d, &s) in docids.iter().zip(&scores) {
            calls.push((qid.to_owned(), (*d).to_owned(), s));
        }
        Ok(scores)
    }
}
