//! Clustering-hypothesis check: how often is the nearest judged neighbour
//! of a passage judged with the same label?

use std::fmt;

use crate::error::{Error, Result};

use super::qrels::{Qrels, MAX_LABEL};

const LABELS: usize = MAX_LABEL as usize + 1;

/// Counts of `(label of passage, label of its nearest judged neighbour)`,
/// pooled over all queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClusterMatrix {
    counts: [[u64; LABELS]; LABELS],
}

impl ClusterMatrix {
    pub fn counts(&self) -> &[[u64; LABELS]; LABELS] {
        &self.counts
    }

    /// Row `label` as a conditional distribution, or `None` when no passage
    /// carries that label.
    pub fn row(&self, label: usize) -> Option<[f64; LABELS]> {
        let counts = self.counts.get(label)?;
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return None;
        }
        Some(counts.map(|c| c as f64 / total as f64))
    }

    /// Row-stochastic matrix; rows without observations are all zero.
    pub fn probabilities(&self) -> [[f64; LABELS]; LABELS] {
        std::array::from_fn(|x| self.row(x).unwrap_or([0.0; LABELS]))
    }
}

impl fmt::Display for ClusterMatrix {
    /// Percentages, one row per passage label.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rel")?;
        for y in 0..LABELS {
            write!(f, "\tnn={y}")?;
        }
        writeln!(f, "\tcount")?;
        for x in 0..LABELS {
            write!(f, "{x}")?;
            match self.row(x) {
                Some(row) => row.iter().try_for_each(|p| write!(f, "\t{:.2}", 100.0 * p))?,
                None => (0..LABELS).try_for_each(|_| write!(f, "\tNA"))?,
            }
            writeln!(f, "\t{}", self.counts[x].iter().sum::<u64>())?;
        }
        Ok(())
    }
}

/// For every judged passage `p` of every query, finds the judged passage of
/// the same query maximizing `similarity(p, q)` (ties to the smaller docid)
/// and counts the label pair. Queries with fewer than two judged passages
/// are skipped.
pub fn cluster_matrix<F>(qrels: &Qrels, mut similarity: F) -> Result<ClusterMatrix>
where
    F: FnMut(&str, &str) -> Result<f64>,
{
    let mut matrix = ClusterMatrix::default();
    let mut used = 0;
    for (_, judged) in qrels.queries() {
        if judged.len() < 2 {
            continue;
        }
        used += 1;
        let mut docs: Vec<(&str, u8)> = judged.iter().map(|(d, &l)| (d.as_str(), l)).collect();
        docs.sort_unstable();
        for &(p, label) in &docs {
            let mut best: Option<(f64, u8)> = None;
            for &(q, q_label) in &docs {
                if q == p {
                    continue;
                }
                let s = similarity(p, q)?;
                if best.is_none_or(|(b, _)| s > b) {
                    best = Some((s, q_label));
                }
            }
            if let Some((_, nn_label)) = best {
                matrix.counts[label as usize][nn_label as usize] += 1;
            }
        }
    }
    if used == 0 {
        return Err(Error::EmptyInput(
            "no query has at least two judged documents".into(),
        ));
    }
    Ok(matrix)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mutual_pair_counts_twice() {
        let q = Qrels::parse("mem", "q 0 a 3\nq 0 b 3\nsolo 0 z 1\n".as_bytes()).unwrap();
        let m = cluster_matrix(&q, |_, _| Ok(0.5)).unwrap();
        assert_eq!(m.counts()[3][3], 2);
        assert_eq!(m.counts().iter().flatten().sum::<u64>(), 2);
        assert_eq!(m.row(3).unwrap(), [0.0, 0.0, 0.0, 1.0]);
        assert!(m.row(1).is_none());
    }

    #[test]
    fn ties_go_to_smaller_docid() {
        let q = Qrels::parse("mem", "q 0 a 0\nq 0 b 1\nq 0 c 2\n".as_bytes()).unwrap();
        let m = cluster_matrix(&q, |_, _| Ok(0.0)).unwrap();
        // a -> b, b -> a, c -> a
        assert_eq!(m.counts()[0][1], 1);
        assert_eq!(m.counts()[1][0], 1);
        assert_eq!(m.counts()[2][0], 1);
    }

    #[test]
    fn all_queries_too_small() {
        let q = Qrels::parse("mem", "q 0 a 3\n".as_bytes()).unwrap();
        assert!(cluster_matrix(&q, |_, _| Ok(1.0)).is_err());
    }

    #[test]
    fn similarity_errors_propagate() {
        let q = Qrels::parse("mem", "q 0 a 3\nq 0 b 3\n".as_bytes()).unwrap();
        let err = cluster_matrix(&q, |a, _| Err(Error::UnknownDocId(a.into()))).unwrap_err();
        assert!(matches!(err, Error::UnknownDocId(_)));
    }
}
