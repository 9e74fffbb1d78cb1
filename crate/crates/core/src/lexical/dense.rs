//! Dense embedding vectors and exhaustive cosine search.
//!
//! File layout (little-endian): magic `GARV`, `u32` version, `u32` n_docs,
//! `u32` dim, then `n_docs * dim` `f32` values row-major, plus a `<path>.docs`
//! docmap sidecar.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::docmap::{sidecar_path, DocMap};
use crate::error::{Error, Result};
use crate::graph::{by_similarity, CorpusGraph, Neighbour};

const MAGIC: &[u8; 4] = b"GARV";
const VERSION: u32 = 1;

/// Row-major unit-length vectors, one per document.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseVectors {
    dim: usize,
    data: Vec<f32>,
    docmap: DocMap,
}

impl DenseVectors {
    /// Takes ownership of `data` (`docmap.len() * dim` values) and
    /// L2-normalizes every row. Zero rows cannot be normalized and are
    /// rejected.
    pub fn new(docmap: DocMap, dim: usize, mut data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("vector dimension must be at least 1".into()));
        }
        if data.len() != docmap.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: docmap.len() * dim,
                found: data.len(),
            });
        }
        for (i, row) in data.chunks_exact_mut(dim).enumerate() {
            let norm = row
                .iter()
                .map(|&x| f64::from(x) * f64::from(x))
                .sum::<f64>()
                .sqrt();
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(Error::Config(format!(
                    "vector of {:?} has norm {norm} and cannot be normalized",
                    docmap.external(i as u32).unwrap_or_default()
                )));
            }
            for x in row.iter_mut() {
                *x = (f64::from(*x) / norm) as f32;
            }
        }
        Ok(DenseVectors { dim, data, docmap })
    }

    pub fn from_rows(docmap: DocMap, rows: &[Vec<f32>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(docmap, dim, data)
    }

    pub fn n_docs(&self) -> usize {
        self.docmap.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn docmap(&self) -> &DocMap {
        &self.docmap
    }

    pub fn row(&self, doc: u32) -> Result<&[f32]> {
        let i = doc as usize;
        if i >= self.n_docs() {
            return Err(Error::DocOutOfRange {
                id: doc,
                n_docs: self.n_docs(),
            });
        }
        Ok(&self.data[i * self.dim..(i + 1) * self.dim])
    }

    /// Vector of an external docid.
    pub fn get(&self, docid: &str) -> Option<&[f32]> {
        let i = self.docmap.internal(docid)?;
        self.row(i).ok()
    }

    /// Cosine similarity of two stored rows.
    pub fn cosine(&self, a: u32, b: u32) -> Result<f64> {
        Ok(dot(self.row(a)?, self.row(b)?))
    }

    /// Exhaustive search for the `count` rows most similar to `doc`,
    /// excluding `doc`; descending similarity, ties by ascending id.
    pub fn topk(&self, doc: u32, count: usize) -> Result<Vec<Neighbour>> {
        let probe = self.row(doc)?;
        let mut all: Vec<Neighbour> = self
            .data
            .chunks_exact(self.dim)
            .enumerate()
            .filter(|&(i, _)| i as u32 != doc)
            .map(|(i, row)| Neighbour::new(i as u32, dot(probe, row)))
            .collect();
        if count < all.len() {
            all.select_nth_unstable_by(count, by_similarity);
            all.truncate(count);
        }
        all.sort_by(by_similarity);
        Ok(all)
    }

    /// Semantic corpus graph from exact nearest-neighbour search.
    pub fn build_graph(&self, k: usize) -> Result<CorpusGraph> {
        CorpusGraph::build(self.docmap.clone(), k, |doc, count| self.topk(doc, count))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let mut out = BufWriter::new(File::create(path).map_err(io)?);
        out.write_all(MAGIC).map_err(io)?;
        for word in [VERSION, self.n_docs() as u32, self.dim as u32] {
            out.write_all(&word.to_le_bytes()).map_err(io)?;
        }
        for &x in &self.data {
            out.write_all(&x.to_le_bytes()).map_err(io)?;
        }
        out.flush().map_err(io)?;
        self.docmap.save(&sidecar_path(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        let format = |field, message: String| Error::Format {
            path: path.to_owned(),
            field,
            message,
        };
        let word = |at: usize, field| {
            bytes
                .get(at..at + 4)
                .map(|w| u32::from_le_bytes([w[0], w[1], w[2], w[3]]))
                .ok_or_else(|| format(field, "file truncated".into()))
        };

        if bytes.get(..4) != Some(MAGIC.as_slice()) {
            return Err(format("magic", "expected GARV".into()));
        }
        let version = word(4, "version")?;
        if version != VERSION {
            return Err(format("version", format!("unsupported version {version}")));
        }
        let n_docs = word(8, "n_docs")? as usize;
        let dim = word(12, "dim")? as usize;
        let body = &bytes[16..];
        if body.len() != n_docs * dim * 4 {
            return Err(format(
                "vectors",
                format!(
                    "expected {} bytes for {n_docs}x{dim} floats, found {}",
                    n_docs * dim * 4,
                    body.len()
                ),
            ));
        }
        let data = body
            .chunks_exact(4)
            .map(|w| f32::from_le_bytes([w[0], w[1], w[2], w[3]]))
            .collect();
        let docmap = DocMap::load(&sidecar_path(path))?;
        if docmap.len() != n_docs {
            return Err(format(
                "n_docs",
                format!("header says {n_docs} docs but docmap has {}", docmap.len()),
            ));
        }
        Self::new(docmap, dim, data)
    }
}

/// Dot product accumulated in `f64`, left to right.
pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0, |acc, (&x, &y)| acc + f64::from(x) * f64::from(y))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> DocMap {
        DocMap::new((0..n).map(|i| format!("d{i}"))).unwrap()
    }

    #[test]
    fn rows_are_normalized() {
        let v = DenseVectors::from_rows(ids(2), &[vec![3.0, 4.0], vec![0.0, 2.0]]).unwrap();
        for d in 0..2 {
            let norm: f64 = v.row(d).unwrap().iter().map(|&x| f64::from(x).powi(2)).sum();
            assert!((norm.sqrt() - 1.0).abs() < 1e-5);
        }
        assert!((v.cosine(0, 1).unwrap() - 0.8).abs() < 1e-6);
    }

    #[test]
    fn orthonormal_basis_falls_back_to_lowest_ids() {
        let rows: Vec<Vec<f32>> = (0..4)
            .map(|i| (0..4).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let v = DenseVectors::from_rows(ids(4), &rows).unwrap();
        let top: Vec<u32> = v.topk(2, 2).unwrap().iter().map(|n| n.doc).collect();
        assert_eq!(top, vec![0, 1]);
        assert!(v.topk(0, 3).unwrap().iter().all(|n| n.similarity == 0.0));
    }

    #[test]
    fn duplicate_rows_are_mutual_top_one() {
        let v = DenseVectors::from_rows(
            ids(3),
            &[vec![0.3, 0.7, 0.1], vec![1.0, 0.0, 0.0], vec![0.3, 0.7, 0.1]],
        )
        .unwrap();
        let top = v.topk(0, 1).unwrap();
        assert_eq!(top[0].doc, 2);
        assert!((top[0].similarity - 1.0).abs() < 1e-6);
        assert_eq!(v.topk(2, 1).unwrap()[0].doc, 0);
    }

    #[test]
    fn shape_errors() {
        assert!(matches!(
            DenseVectors::from_rows(ids(2), &[vec![1.0, 0.0], vec![1.0]]),
            Err(Error::DimensionMismatch {
                expected: 2,
                found: 1
            })
        ));
        assert!(DenseVectors::from_rows(ids(1), &[vec![0.0, 0.0]]).is_err());
        assert!(DenseVectors::new(ids(2), 3, vec![1.0; 5]).is_err());
    }

    #[test]
    fn file_round_trip_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.bin");
        let v = DenseVectors::from_rows(ids(2), &[vec![1.0, 2.0], vec![-1.0, 0.5]]).unwrap();
        v.save(&path).unwrap();
        assert_eq!(DenseVectors::load(&path).unwrap(), v);

        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 2]).unwrap();
        assert!(matches!(
            DenseVectors::load(&path),
            Err(Error::Format { field: "vectors", .. })
        ));
    }
}
