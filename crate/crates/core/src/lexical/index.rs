use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::docmap::DocMap;
use crate::error::{Error, Result};
use crate::graph::{by_similarity, CorpusGraph, Neighbour};
use crate::ranking::{Ranking, RunFile};

use super::tokenize;

/// Okapi BM25 constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Bm25Params {
    pub fn new(k1: f64, b: f64) -> Result<Self> {
        if !(k1 >= 0.0 && k1.is_finite()) {
            return Err(Error::Config(format!("BM25 k1 must be >= 0, got {k1}")));
        }
        if !(0.0..=1.0).contains(&b) {
            return Err(Error::Config(format!("BM25 b must lie in [0, 1], got {b}")));
        }
        Ok(Bm25Params { k1, b })
    }
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 0.9, b: 0.4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Posting {
    doc: u32,
    tf: u32,
}

/// A retrieved document and its score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub doc: u32,
    pub score: f64,
}

/// In-memory inverted index.
///
/// Term ids are assigned in lexicographic order of the term strings, and
/// every score is accumulated term-at-a-time in ascending term id order.
/// This pins the floating-point summation order of a document's score, so
/// equal documents always receive bit-identical scores.
#[derive(Debug, Clone)]
pub struct InvertedIndex {
    terms: Vec<String>,
    term_ids: HashMap<String, u32>,
    postings: Vec<Vec<Posting>>,
    doc_terms: Vec<Vec<u32>>,
    doc_lens: Vec<u32>,
    avg_len: f64,
    docmap: DocMap,
}

impl InvertedIndex {
    pub fn from_corpus<I, S, T>(corpus: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: AsRef<str>,
    {
        let mut docmap = DocMap::default();
        let mut by_term: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut doc_lens = Vec::new();
        for (id, text) in corpus {
            let doc = docmap.push(id.into())?;
            let tokens = tokenize(text.as_ref());
            doc_lens.push(tokens.len() as u32);
            let mut tf: HashMap<String, u32> = HashMap::new();
            for token in tokens {
                *tf.entry(token).or_default() += 1;
            }
            for (term, tf) in tf {
                by_term.entry(term).or_default().push(Posting { doc, tf });
            }
        }
        if docmap.is_empty() {
            return Err(Error::EmptyInput("cannot index an empty corpus".into()));
        }

        let mut terms = Vec::with_capacity(by_term.len());
        let mut term_ids = HashMap::with_capacity(by_term.len());
        let mut postings = Vec::with_capacity(by_term.len());
        let mut doc_terms = vec![Vec::new(); docmap.len()];
        for (id, (term, list)) in by_term.into_iter().enumerate() {
            let id = id as u32;
            // Docs were visited in id order, so each list is already sorted.
            for p in &list {
                doc_terms[p.doc as usize].push(id);
            }
            term_ids.insert(term.clone(), id);
            terms.push(term);
            postings.push(list);
        }

        let total: u64 = doc_lens.iter().map(|&l| u64::from(l)).sum();
        let avg_len = total as f64 / docmap.len() as f64;
        Ok(InvertedIndex {
            terms,
            term_ids,
            postings,
            doc_terms,
            doc_lens,
            avg_len,
            docmap,
        })
    }

    /// Reads a `docid<TAB>text` corpus file.
    pub fn from_tsv(path: &Path) -> Result<Self> {
        Self::from_corpus(read_corpus_tsv(path)?)
    }

    pub fn n_docs(&self) -> usize {
        self.docmap.len()
    }

    pub fn docmap(&self) -> &DocMap {
        &self.docmap
    }

    pub fn avg_len(&self) -> f64 {
        self.avg_len
    }

    pub fn doc_len(&self, doc: u32) -> Result<u32> {
        self.check(doc)?;
        Ok(self.doc_lens[doc as usize])
    }

    pub fn vocabulary_size(&self) -> usize {
        self.terms.len()
    }

    /// Document frequency of `term`, 0 when absent.
    pub fn df(&self, term: &str) -> usize {
        self.term_ids
            .get(term)
            .map_or(0, |&t| self.postings[t as usize].len())
    }

    /// `(docid, tf)` postings of `term` in ascending internal-id order.
    pub fn postings(&self, term: &str) -> Vec<(u32, u32)> {
        self.term_ids.get(term).map_or_else(Vec::new, |&t| {
            self.postings[t as usize].iter().map(|p| (p.doc, p.tf)).collect()
        })
    }

    /// The distinct terms of `doc`, sorted.
    pub fn doc_terms(&self, doc: u32) -> Result<Vec<&str>> {
        self.check(doc)?;
        Ok(self.doc_terms[doc as usize]
            .iter()
            .map(|&t| self.terms[t as usize].as_str())
            .collect())
    }

    fn check(&self, doc: u32) -> Result<()> {
        if (doc as usize) < self.n_docs() {
            Ok(())
        } else {
            Err(Error::DocOutOfRange {
                id: doc,
                n_docs: self.n_docs(),
            })
        }
    }

    fn term_weight(&self, params: &Bm25Params, df: usize, tf: u32, len: u32) -> f64 {
        let n = self.n_docs() as f64;
        let df = df as f64;
        let tf = f64::from(tf);
        let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
        let norm = 1.0 - params.b + params.b * f64::from(len) / self.avg_len;
        idf * (tf * (params.k1 + 1.0)) / (tf + params.k1 * norm)
    }

    fn query_term_ids<'a>(&self, terms: impl IntoIterator<Item = &'a str>) -> Vec<u32> {
        let mut ids: Vec<u32> = terms
            .into_iter()
            .filter_map(|t| self.term_ids.get(t).copied())
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// BM25 score of one document for a set of query terms. Repeated query
    /// terms count once.
    pub fn score<'a>(
        &self,
        params: &Bm25Params,
        query_terms: impl IntoIterator<Item = &'a str>,
        doc: u32,
    ) -> Result<f64> {
        self.check(doc)?;
        let len = self.doc_lens[doc as usize];
        let mut score = 0.0;
        for t in self.query_term_ids(query_terms) {
            let list = &self.postings[t as usize];
            if let Ok(i) = list.binary_search_by_key(&doc, |p| p.doc) {
                score += self.term_weight(params, list.len(), list[i].tf, len);
            }
        }
        Ok(score)
    }

    fn accumulate(&self, params: &Bm25Params, term_ids: &[u32]) -> HashMap<u32, f64> {
        let mut acc: HashMap<u32, f64> = HashMap::new();
        for &t in term_ids {
            let list = &self.postings[t as usize];
            for p in list {
                let w = self.term_weight(params, list.len(), p.tf, self.doc_lens[p.doc as usize]);
                *acc.entry(p.doc).or_insert(0.0) += w;
            }
        }
        acc
    }

    fn top(acc: HashMap<u32, f64>, exclude: Option<u32>, n: usize) -> Vec<Hit> {
        let mut hits: Vec<Neighbour> = acc
            .into_iter()
            .filter(|&(doc, _)| Some(doc) != exclude)
            .map(|(doc, score)| Neighbour::new(doc, score))
            .collect();
        hits.sort_by(by_similarity);
        hits.truncate(n);
        hits.into_iter()
            .map(|n| Hit {
                doc: n.doc,
                score: n.similarity,
            })
            .collect()
    }

    /// Top `top_n` documents sharing at least one term with `query`,
    /// by descending score with ties on ascending internal id.
    pub fn retrieve(&self, params: &Bm25Params, query: &str, top_n: usize) -> Vec<Hit> {
        let tokens = tokenize(query);
        let ids = self.query_term_ids(tokens.iter().map(String::as_str));
        Self::top(self.accumulate(params, &ids), None, top_n)
    }

    /// The `count` documents most similar to `doc` when the distinct terms
    /// of `doc` are used as the query. `doc` itself is excluded.
    pub fn doc_topk(&self, params: &Bm25Params, doc: u32, count: usize) -> Result<Vec<Hit>> {
        self.check(doc)?;
        let acc = self.accumulate(params, &self.doc_terms[doc as usize]);
        Ok(Self::top(acc, Some(doc), count))
    }

    /// Lexical corpus graph: every document linked to its `k` best
    /// doc-as-query BM25 matches.
    pub fn build_graph(&self, params: &Bm25Params, k: usize) -> Result<CorpusGraph> {
        CorpusGraph::build(self.docmap.clone(), k, |doc, count| {
            Ok(self
                .doc_topk(params, doc, count)?
                .into_iter()
                .map(|h| Neighbour::new(h.doc, h.score))
                .collect())
        })
    }

    /// First-stage run: the top `top_n` hits of every query. Queries with
    /// no matching document are left out.
    pub fn run(
        &self,
        params: &Bm25Params,
        queries: &BTreeMap<String, String>,
        top_n: usize,
    ) -> Result<RunFile> {
        let mut run = RunFile::new();
        for (qid, text) in queries {
            let hits = self.retrieve(params, text, top_n);
            if hits.is_empty() {
                continue;
            }
            let pairs = hits
                .iter()
                .map(|h| (self.docmap.ids()[h.doc as usize].as_str(), h.score));
            run.insert(Ranking::from_pairs(qid.clone(), pairs)?);
        }
        Ok(run)
    }
}

/// Parses a `docid<TAB>text` file. A line without a tab is a document with
/// empty text.
pub fn read_corpus_tsv(path: &Path) -> Result<Vec<(String, String)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let (id, text) = line.split_once('\t').unwrap_or((line.as_str(), ""));
        if id.is_empty() {
            return Err(Error::parse(path.display().to_string(), n + 1, "empty docid"));
        }
        docs.push((id.to_owned(), text.to_owned()));
    }
    Ok(docs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn index(docs: &[(&str, &str)]) -> InvertedIndex {
        InvertedIndex::from_corpus(docs.iter().copied()).unwrap()
    }

    #[test]
    fn two_doc_postings() {
        let idx = index(&[("a", "x y"), ("b", "y")]);
        assert_eq!(idx.postings("x"), vec![(0, 1)]);
        assert_eq!(idx.postings("y"), vec![(0, 1), (1, 1)]);
        assert_eq!(idx.avg_len(), 1.5);
    }

    #[test]
    fn empty_corpus_and_duplicates_rejected() {
        let none: [(&str, &str); 0] = [];
        assert!(matches!(
            InvertedIndex::from_corpus(none),
            Err(Error::EmptyInput(_))
        ));
        let dup = InvertedIndex::from_corpus([("a", "x"), ("a", "y")]);
        assert!(matches!(dup, Err(Error::DuplicateDocId(id)) if id == "a"));
    }

    #[test]
    fn empty_text_has_zero_length() {
        let idx = index(&[("a", ""), ("b", "word")]);
        assert_eq!(idx.doc_len(0).unwrap(), 0);
        assert!(idx.doc_terms(0).unwrap().is_empty());
        assert!(idx.doc_topk(&Bm25Params::default(), 0, 5).unwrap().is_empty());
    }

    #[test]
    fn single_doc_formula() {
        let idx = index(&[("only", "flea flea")]);
        let p = Bm25Params::default();
        // N = 1, df = 1, tf = 2, len = avglen.
        let idf = ((1.0 - 1.0 + 0.5) / (1.0 + 0.5) + 1.0f64).ln();
        let expected = idf * 2.0 * (p.k1 + 1.0) / (2.0 + p.k1);
        let got = idx.score(&p, ["flea"], 0).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn absent_terms_contribute_nothing() {
        let idx = index(&[("a", "cat dog"), ("b", "fish")]);
        let p = Bm25Params::default();
        assert_eq!(idx.score(&p, ["fish"], 0).unwrap(), 0.0);
        let base = idx.score(&p, ["cat"], 0).unwrap();
        assert_eq!(idx.score(&p, ["cat", "zebra", "fish"], 0).unwrap(), base);
        assert_eq!(idx.score(&p, ["cat", "cat"], 0).unwrap(), base);
    }

    #[test]
    fn shorter_doc_scores_higher() {
        let idx = index(&[("short", "flea"), ("long", "flea a b c d e")]);
        let p = Bm25Params::default();
        assert!(idx.score(&p, ["flea"], 0).unwrap() > idx.score(&p, ["flea"], 1).unwrap());
    }

    #[test]
    fn retrieve_semantics() {
        let idx = index(&[("a", "red fish"), ("b", "blue fish"), ("c", "red red car")]);
        let p = Bm25Params::default();
        let hits = idx.retrieve(&p, "blue", 10);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].doc, 1);
        assert_eq!(idx.retrieve(&p, "fish red", 100).len(), 3);
        assert!(idx.retrieve(&p, "nothing", 10).is_empty());
        assert_eq!(idx.retrieve(&p, "fish", 1).len(), 1);
    }

    #[test]
    fn duplicate_passages_are_mutual_top_one() {
        let idx = index(&[
            ("d0", "life cycle of the flea"),
            ("d1", "life cycle of the flea"),
            ("d2", "the cat sat"),
        ]);
        let p = Bm25Params::default();
        assert_eq!(idx.doc_topk(&p, 0, 1).unwrap()[0].doc, 1);
        assert_eq!(idx.doc_topk(&p, 1, 1).unwrap()[0].doc, 0);
        assert!(idx.doc_topk(&p, 3, 1).is_err());
    }

    #[test]
    fn params_validated() {
        assert!(Bm25Params::new(-0.1, 0.4).is_err());
        assert!(Bm25Params::new(0.9, 1.5).is_err());
        assert!(Bm25Params::new(0.0, 0.0).is_ok());
    }

    #[test]
    fn avg_len_matches_lengths() {
        let idx = index(&[("a", "one two three"), ("b", ""), ("c", "x")]);
        let sum: u32 = (0..3).map(|d| idx.doc_len(d).unwrap()).sum();
        assert!((f64::from(sum) / 3.0 - idx.avg_len()).abs() < 1e-9);
    }
}
