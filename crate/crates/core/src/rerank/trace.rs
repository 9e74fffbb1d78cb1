//! Per-document provenance of a re-ranked list: where each document sat
//! initially, where it ended up, and which graph edge brought it in.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::ranking::{Provenance, Ranking};

const HEADER: &str = "qid\tdocid\tinitial_rank\tfinal_rank\tprovenance\tsource_docid";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRow {
    pub qid: String,
    pub docid: String,
    /// 1-based rank in the initial ranking, if the document was there.
    pub initial_rank: Option<usize>,
    /// 1-based rank in the re-ranked output.
    pub final_rank: usize,
    pub provenance: Provenance,
}

/// Joins an initial ranking with its re-ranked output.
pub fn trace_rows(initial: &Ranking, output: &Ranking) -> Vec<TraceRow> {
    let initial_rank: HashMap<&str, usize> = initial.docids().enumerate().map(|(i, d)| (d, i + 1)).collect();
    output
        .entries()
        .iter()
        .enumerate()
        .map(|(i, e)| TraceRow {
            qid: output.qid().to_owned(),
            docid: e.docid.clone(),
            initial_rank: initial_rank.get(e.docid.as_str()).copied(),
            final_rank: i + 1,
            provenance: e.provenance.clone().unwrap_or(Provenance::Initial),
        })
        .collect()
}

pub fn write_trace(out: &mut impl Write, rows: &[TraceRow]) -> std::io::Result<()> {
    writeln!(out, "{HEADER}")?;
    for r in rows {
        let initial = r.initial_rank.map_or("NA".to_owned(), |x| x.to_string());
        let (kind, source) = match &r.provenance {
            Provenance::Initial => ("initial", "NA"),
            Provenance::Frontier { source } => ("frontier", source.as_str()),
        };
        writeln!(
            out,
            "{}\t{}\t{initial}\t{}\t{kind}\t{source}",
            r.qid, r.docid, r.final_rank
        )?;
    }
    Ok(())
}

pub fn read_trace(origin: &str, reader: impl BufRead) -> Result<Vec<TraceRow>> {
    let mut rows = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.is_empty() || (n == 0 && line == HEADER) {
            continue;
        }
        let err = |m: &str| Error::parse(origin, n + 1, m);
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 6 {
            return Err(err("expected 6 tab-separated fields"));
        }
        let initial_rank = match f[2] {
            "NA" => None,
            x => Some(x.parse().map_err(|_| err("bad initial_rank"))?),
        };
        let final_rank = f[3].parse().map_err(|_| err("bad final_rank"))?;
        let provenance = match (f[4], f[5]) {
            ("initial", "NA") => Provenance::Initial,
            ("frontier", src) if src != "NA" => Provenance::Frontier {
                source: src.to_owned(),
            },
            _ => return Err(err("bad provenance/source pair")),
        };
        rows.push(TraceRow {
            qid: f[0].to_owned(),
            docid: f[1].to_owned(),
            initial_rank,
            final_rank,
            provenance,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranking::RankedDoc;

    #[test]
    fn rows_round_trip() {
        let initial = Ranking::from_pairs("q", [("a", 2.0), ("b", 1.0)]).unwrap();
        let mut new = RankedDoc::new("n", 3.0);
        new.provenance = Some(Provenance::Frontier { source: "a".into() });
        let mut a = RankedDoc::new("a", 2.5);
        a.provenance = Some(Provenance::Initial);
        let output = Ranking::new("q", vec![new, a, RankedDoc::new("b", 0.0)]).unwrap();

        let rows = trace_rows(&initial, &output);
        assert_eq!(rows[0].initial_rank, None);
        assert_eq!(rows[1].initial_rank, Some(1));
        assert_eq!(rows[2].final_rank, 3);

        let mut buf = Vec::new();
        write_trace(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("q\tn\tNA\t1\tfrontier\ta\n"));
        assert_eq!(read_trace("mem", buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn rejects_inconsistent_provenance() {
        assert!(read_trace("mem", "q\td\t1\t1\tfrontier\tNA\n".as_bytes()).is_err());
        assert!(read_trace("mem", "q\td\tx\t1\tinitial\tNA\n".as_bytes()).is_err());
    }
}
