use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::lexical::DenseVectors;
use crate::ranking::RunFile;

use super::metrics::MetricValues;
use super::Qrels;

/// Intra-list similarity: the mean pairwise cosine similarity among the
/// relevant (label >= `min_rel`) documents within the top `depth` of each
/// ranking. Queries with fewer than two such documents are skipped.
pub fn ils(
    run: &RunFile,
    qrels: &Qrels,
    vectors: &DenseVectors,
    min_rel: u8,
    depth: usize,
) -> Result<MetricValues> {
    let mut per_query = BTreeMap::new();
    for ranking in run.rankings() {
        let Some(judged) = qrels.query(ranking.qid()) else {
            continue;
        };
        let mut rows = Vec::new();
        for e in ranking.entries().iter().take(depth) {
            if judged.get(&e.docid).is_some_and(|&l| l >= min_rel) {
                let v = vectors
                    .get(&e.docid)
                    .ok_or_else(|| Error::MissingVector(e.docid.clone()))?;
                rows.push(v);
            }
        }
        if rows.len() < 2 {
            continue;
        }
        let mut sum = 0.0;
        let mut pairs = 0usize;
        for i in 0..rows.len() {
            for j in i + 1..rows.len() {
                sum += crate::lexical::dense_dot(rows[i], rows[j]);
                pairs += 1;
            }
        }
        per_query.insert(ranking.qid().to_owned(), sum / pairs as f64);
    }
    if per_query.is_empty() {
        return Err(Error::EmptyInput(
            "ILS: no query has two relevant retrieved documents".into(),
        ));
    }
    let mean = per_query.values().sum::<f64>() / per_query.len() as f64;
    Ok(MetricValues { per_query, mean })
}
