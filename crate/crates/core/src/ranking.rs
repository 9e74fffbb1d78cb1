//! Per-query rankings and TREC run files.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// How a re-ranked document entered the scored set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    /// Drawn from the initial ranking (or backfilled from it).
    Initial,
    /// Drawn from the graph frontier; `source` is the scored document whose
    /// edge put it there with its final priority.
    Frontier { source: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedDoc {
    pub docid: String,
    pub score: f64,
    pub provenance: Option<Provenance>,
}

impl RankedDoc {
    pub fn new(docid: impl Into<String>, score: f64) -> Self {
        RankedDoc {
            docid: docid.into(),
            score,
            provenance: None,
        }
    }
}

/// Descending score, then ascending docid.
pub fn by_score(a: &RankedDoc, b: &RankedDoc) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.docid.cmp(&b.docid))
}

/// Ordered documents for one query. Docids are unique.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    qid: String,
    entries: Vec<RankedDoc>,
}

impl Ranking {
    pub fn new(qid: impl Into<String>, entries: Vec<RankedDoc>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(entries.len());
        for e in &entries {
            if !seen.insert(e.docid.as_str()) {
                return Err(Error::DuplicateDocId(e.docid.clone()));
            }
        }
        Ok(Ranking {
            qid: qid.into(),
            entries,
        })
    }

    /// Builds a ranking from `(docid, score)` pairs kept in the given order.
    pub fn from_pairs<I, S>(qid: impl Into<String>, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        Self::new(
            qid,
            pairs.into_iter().map(|(d, s)| RankedDoc::new(d, s)).collect(),
        )
    }

    pub fn qid(&self) -> &str {
        &self.qid
    }

    pub fn entries(&self) -> &[RankedDoc] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn docids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.docid.as_str())
    }

    pub fn into_entries(self) -> Vec<RankedDoc> {
        self.entries
    }
}

/// A set of rankings keyed (and iterated) by qid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunFile {
    rankings: BTreeMap<String, Ranking>,
}

impl RunFile {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds or replaces the ranking for its qid.
    pub fn insert(&mut self, ranking: Ranking) {
        self.rankings.insert(ranking.qid.clone(), ranking);
    }

    pub fn get(&self, qid: &str) -> Option<&Ranking> {
        self.rankings.get(qid)
    }

    pub fn rankings(&self) -> impl Iterator<Item = &Ranking> {
        self.rankings.values()
    }

    pub fn qids(&self) -> impl Iterator<Item = &str> {
        self.rankings.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.rankings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rankings.is_empty()
    }

    /// Parses TREC 6-column lines (`qid Q0 docid rank score tag`). Entries
    /// of each query are ordered by the rank column; the score column is
    /// kept but does not affect order.
    pub fn parse(origin: &str, reader: impl BufRead) -> Result<Self> {
        let mut rows: BTreeMap<String, Vec<(u64, usize, String, f64)>> = BTreeMap::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(origin, e))?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            let err = |m: String| Error::parse(origin, n + 1, m);
            if fields.len() != 6 {
                return Err(err(format!("expected 6 fields, found {}", fields.len())));
            }
            let rank: u64 = fields[3]
                .parse()
                .map_err(|_| err(format!("bad rank {:?}", fields[3])))?;
            let score: f64 = fields[4]
                .parse()
                .map_err(|_| err(format!("bad score {:?}", fields[4])))?;
            rows.entry(fields[0].to_owned())
                .or_default()
                .push((rank, n, fields[2].to_owned(), score));
        }
        let mut run = RunFile::new();
        for (qid, mut list) in rows {
            list.sort_by_key(|&(rank, line, _, _)| (rank, line));
            let ranking = Ranking::from_pairs(&qid, list.into_iter().map(|(_, _, d, s)| (d, s)))
                .map_err(|e| Error::parse(origin, 0, format!("query {qid}: {e}")))?;
            run.insert(ranking);
        }
        Ok(run)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&path.display().to_string(), BufReader::new(file))
    }

    /// Writes TREC 6-column lines, ranks starting at 1, scores with six
    /// decimals.
    pub fn write(&self, out: &mut impl Write, tag: &str) -> std::io::Result<()> {
        for ranking in self.rankings.values() {
            for (i, e) in ranking.entries.iter().enumerate() {
                writeln!(
                    out,
                    "{} Q0 {} {} {:.6} {}",
                    ranking.qid,
                    e.docid,
                    i + 1,
                    e.score,
                    tag
                )?;
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path, tag: &str) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        self.write(&mut out, tag)
            .and_then(|()| out.flush())
            .map_err(|e| Error::io(path, e))
    }
}

impl FromIterator<Ranking> for RunFile {
    fn from_iter<T: IntoIterator<Item = Ranking>>(iter: T) -> Self {
        let mut run = RunFile::new();
        for r in iter {
            run.insert(r);
        }
        run
    }
}

/// Reads a `qid<TAB>text` queries file.
pub fn read_queries_tsv(path: &Path) -> Result<BTreeMap<String, String>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut queries = BTreeMap::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let (qid, text) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path.display().to_string(), n + 1, "expected qid<TAB>text"))?;
        queries.insert(qid.to_owned(), text.to_owned());
    }
    Ok(queries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicate_docids() {
        let err = Ranking::from_pairs("q", [("a", 1.0), ("a", 0.5)]).unwrap_err();
        assert!(matches!(err, Error::DuplicateDocId(d) if d == "a"));
    }

    #[test]
    fn parse_orders_by_rank() {
        let text = "q1 Q0 b 2 0.4 t\nq1 Q0 a 1 0.5 t\nq2 Q0 c 1 9 t\n";
        let run = RunFile::parse("mem", text.as_bytes()).unwrap();
        let q1: Vec<&str> = run.get("q1").unwrap().docids().collect();
        assert_eq!(q1, ["a", "b"]);
        assert_eq!(run.len(), 2);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = RunFile::parse("mem", "q1 Q0 a 1 0.5 t\nq1 Q0 b x 0.4 t\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(RunFile::parse("mem", "q1 a 1 0.5".as_bytes()).is_err());
        assert!(RunFile::parse("mem", "q Q0 a 1 1 t\nq Q0 a 2 1 t\n".as_bytes()).is_err());
    }

    #[test]
    fn write_then_parse() {
        let run: RunFile = [
            Ranking::from_pairs("q2", [("x", 2.5), ("y", -1.0)]).unwrap(),
            Ranking::from_pairs("q1", [("z", 0.299999)]).unwrap(),
        ]
        .into_iter()
        .collect();
        let mut buf = Vec::new();
        run.write(&mut buf, "tag").unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next(), Some("q1 Q0 z 1 0.299999 tag"));
        assert_eq!(RunFile::parse("mem", buf.as_slice()).unwrap(), run);
    }

    #[test]
    fn score_order_breaks_ties_by_docid() {
        let mut v = [
            RankedDoc::new("b", 1.0),
            RankedDoc::new("a", 1.0),
            RankedDoc::new("c", 2.0),
        ];
        v.sort_by(by_score);
        let ids: Vec<&str> = v.iter().map(|e| e.docid.as_str()).collect();
        assert_eq!(ids, ["c", "a", "b"]);
    }
}
