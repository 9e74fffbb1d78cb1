use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};

/// Highest admissible relevance label.
pub const MAX_LABEL: u8 = 3;

/// Graded relevance judgments, `(qid, docid) -> label` with labels 0..=3.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Qrels {
    by_query: BTreeMap<String, HashMap<String, u8>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, qid: &str, docid: &str, label: u8) -> Result<()> {
        if label > MAX_LABEL {
            return Err(Error::Config(format!(
                "label {label} for ({qid}, {docid}) outside 0..={MAX_LABEL}"
            )));
        }
        let judged = self.by_query.entry(qid.to_owned()).or_default();
        if judged.insert(docid.to_owned(), label).is_some() {
            return Err(Error::Config(format!("duplicate judgment for ({qid}, {docid})")));
        }
        Ok(())
    }

    pub fn label(&self, qid: &str, docid: &str) -> Option<u8> {
        self.by_query.get(qid)?.get(docid).copied()
    }

    pub fn query(&self, qid: &str) -> Option<&HashMap<String, u8>> {
        self.by_query.get(qid)
    }

    pub fn qids(&self) -> impl Iterator<Item = &str> {
        self.by_query.keys().map(String::as_str)
    }

    /// All `(qid, judged docs)` pairs, qids ascending.
    pub fn queries(&self) -> impl Iterator<Item = (&str, &HashMap<String, u8>)> {
        self.by_query.iter().map(|(q, d)| (q.as_str(), d))
    }

    pub fn n_relevant(&self, qid: &str, min_rel: u8) -> usize {
        self.by_query
            .get(qid)
            .map_or(0, |d| d.values().filter(|&&l| l >= min_rel).count())
    }

    pub fn len(&self) -> usize {
        self.by_query.values().map(HashMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Parses TREC qrels lines: `qid iteration docid label`.
    pub fn parse(origin: &str, reader: impl BufRead) -> Result<Self> {
        let mut qrels = Qrels::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(origin, e))?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            let err = |m: String| Error::parse(origin, n + 1, m);
            if fields.len() != 4 {
                return Err(err(format!("expected 4 fields, found {}", fields.len())));
            }
            let label: u8 = fields[3]
                .parse()
                .map_err(|_| err(format!("bad label {:?}", fields[3])))?;
            qrels
                .insert(fields[0], fields[2], label)
                .map_err(|e| err(e.to_string()))?;
        }
        Ok(qrels)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&path.display().to_string(), BufReader::new(file))
    }

    /// TREC qrels text, sorted by qid then docid.
    pub fn to_trec(&self) -> String {
        let mut out = String::new();
        for (qid, judged) in &self.by_query {
            let mut docs: Vec<_> = judged.iter().collect();
            docs.sort();
            for (docid, label) in docs {
                out.push_str(&format!("{qid} 0 {docid} {label}\n"));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_lookup() {
        let q = Qrels::parse("mem", "q1 0 a 3\nq1 0 b 0\nq2 0 a 1\n".as_bytes()).unwrap();
        assert_eq!(q.label("q1", "a"), Some(3));
        assert_eq!(q.label("q2", "b"), None);
        assert_eq!(q.n_relevant("q1", 2), 1);
        assert_eq!(q.len(), 3);
        assert_eq!(Qrels::parse("mem", q.to_trec().as_bytes()).unwrap(), q);
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(Qrels::parse("mem", "q1 0 a 4\n".as_bytes()).is_err());
        assert!(Qrels::parse("mem", "q1 0 a -1\n".as_bytes()).is_err());
        assert!(Qrels::parse("mem", "q1 0 a 1\nq1 0 a 2\n".as_bytes()).is_err());
        assert!(Qrels::parse("mem", "q1 a 1\n".as_bytes()).is_err());
    }
}
