//! The k-nearest-neighbour corpus graph.
//!
//! Every document owns a fixed row of `k` neighbour slots in one flat table,
//! so a lookup is a slice into that table. Rows hold the most similar other
//! documents in descending similarity order (ties by ascending internal id)
//! and are padded with [`SENTINEL`] when fewer than `k` candidates exist.
//!
//! Binary layout (little-endian): magic `GARG`, `u32` version, `u32` n_docs,
//! `u32` k, then `n_docs * k` `u32` neighbour ids, row-major. The docmap is
//! written next to it as `<path>.docs`.

use std::cmp::Ordering;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::docmap::{sidecar_path, DocMap};
use crate::error::{Error, Result};

/// Marks an empty neighbour slot.
pub const SENTINEL: u32 = u32::MAX;

const MAGIC: &[u8; 4] = b"GARG";
const VERSION: u32 = 1;
pub const HEADER_BYTES: u64 = 16;

/// A candidate neighbour produced by a similarity source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbour {
    pub doc: u32,
    pub similarity: f64,
}

impl Neighbour {
    pub fn new(doc: u32, similarity: f64) -> Self {
        Neighbour { doc, similarity }
    }
}

/// Descending similarity, then ascending id.
pub fn by_similarity(a: &Neighbour, b: &Neighbour) -> Ordering {
    b.similarity.total_cmp(&a.similarity).then(a.doc.cmp(&b.doc))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusGraph {
    k: usize,
    edges: Vec<u32>,
    docmap: DocMap,
    edge_count: usize,
}

impl CorpusGraph {
    /// Builds a graph by asking `provider` for the `k + 1` most similar
    /// documents of every document in `docmap`.
    ///
    /// The provider may or may not include the probe document itself; it is
    /// discarded either way. Returned candidates are re-sorted with
    /// [`by_similarity`], so providers need not sort.
    pub fn build<F>(docmap: DocMap, k: usize, mut provider: F) -> Result<Self>
    where
        F: FnMut(u32, usize) -> Result<Vec<Neighbour>>,
    {
        if k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if k > u32::MAX as usize {
            return Err(Error::Config(format!("k = {k} does not fit the graph format")));
        }
        let n = docmap.len();
        let mut edges = Vec::with_capacity(n * k);
        let mut edge_count = 0;
        for doc in 0..n as u32 {
            let mut candidates = provider(doc, k + 1)?;
            if let Some(bad) = candidates.iter().find(|c| c.doc as usize >= n) {
                return Err(Error::UnknownNeighbour {
                    doc,
                    neighbour: bad.doc,
                });
            }
            candidates.retain(|c| c.doc != doc);
            candidates.sort_by(by_similarity);
            candidates.dedup_by_key(|c| c.doc);
            candidates.truncate(k);
            edge_count += candidates.len();
            edges.extend(candidates.iter().map(|c| c.doc));
            edges.extend(std::iter::repeat_n(SENTINEL, k - candidates.len()));
        }
        Ok(CorpusGraph {
            k,
            edges,
            docmap,
            edge_count,
        })
    }

    /// A graph with no edges at all (every slot is a sentinel).
    pub fn edgeless(docmap: DocMap, k: usize) -> Self {
        let edges = vec![SENTINEL; docmap.len() * k];
        CorpusGraph {
            k,
            edges,
            docmap,
            edge_count: 0,
        }
    }

    pub fn n_docs(&self) -> usize {
        self.docmap.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn docmap(&self) -> &DocMap {
        &self.docmap
    }

    /// Number of non-sentinel edges.
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn is_edgeless(&self) -> bool {
        self.edge_count == 0
    }

    /// The raw neighbour row of `doc`, sentinels included.
    pub fn row(&self, doc: u32) -> Result<&[u32]> {
        let i = doc as usize;
        if i >= self.n_docs() {
            return Err(Error::DocOutOfRange {
                id: doc,
                n_docs: self.n_docs(),
            });
        }
        Ok(&self.edges[i * self.k..(i + 1) * self.k])
    }

    /// Neighbours of `doc` in stored order, sentinels removed.
    pub fn neighbours(&self, doc: u32) -> Result<impl Iterator<Item = u32> + '_> {
        Ok(self.row(doc)?.iter().copied().filter(|&d| d != SENTINEL))
    }

    /// The same graph restricted to the first `k` slots of each row. Because
    /// rows are stored in similarity order this equals building with `k`.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.k {
            return Err(Error::Config(format!(
                "cannot truncate a k={} graph to k={k}",
                self.k
            )));
        }
        let edges: Vec<u32> = self
            .edges
            .chunks_exact(self.k)
            .flat_map(|row| row[..k].iter().copied())
            .collect();
        let edge_count = edges.iter().filter(|&&d| d != SENTINEL).count();
        Ok(CorpusGraph {
            k,
            edges,
            docmap: self.docmap.clone(),
            edge_count,
        })
    }

    /// Size of the edge file for a graph of this shape.
    pub fn file_size(n_docs: usize, k: usize) -> u64 {
        HEADER_BYTES + 4 * (n_docs as u64) * (k as u64)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let mut out = BufWriter::new(File::create(path).map_err(io)?);
        out.write_all(MAGIC).map_err(io)?;
        for word in [VERSION, self.n_docs() as u32, self.k as u32] {
            out.write_all(&word.to_le_bytes()).map_err(io)?;
        }
        for &edge in &self.edges {
            out.write_all(&edge.to_le_bytes()).map_err(io)?;
        }
        out.flush().map_err(io)?;
        self.docmap.save(&sidecar_path(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut input = BufReader::new(file);
        let format = |field, message: String| Error::Format {
            path: path.to_owned(),
            field,
            message,
        };

        let mut magic = [0u8; 4];
        read_exact(&mut input, &mut magic, "magic", path)?;
        if &magic != MAGIC {
            return Err(format("magic", format!("expected GARG, found {magic:?}")));
        }
        let version = read_u32(&mut input, "version", path)?;
        if version != VERSION {
            return Err(format("version", format!("unsupported version {version}")));
        }
        let n_docs = read_u32(&mut input, "n_docs", path)? as usize;
        let k = read_u32(&mut input, "k", path)? as usize;
        if k == 0 {
            return Err(format("k", "k must be at least 1".into()));
        }

        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
        let expected = n_docs * k * 4;
        if bytes.len() != expected {
            return Err(format(
                "edges",
                format!("expected {expected} bytes of edges, found {}", bytes.len()),
            ));
        }
        let edges: Vec<u32> = bytes
            .chunks_exact(4)
            .map(|w| u32::from_le_bytes([w[0], w[1], w[2], w[3]]))
            .collect();
        let mut edge_count = 0;
        for (slot, &target) in edges.iter().enumerate() {
            if target == SENTINEL {
                continue;
            }
            let doc = slot / k;
            if target as usize >= n_docs || target as usize == doc {
                return Err(format(
                    "edges",
                    format!("doc {doc} has invalid neighbour {target}"),
                ));
            }
            edge_count += 1;
        }

        let docmap = DocMap::load(&sidecar_path(path))?;
        if docmap.len() != n_docs {
            return Err(format(
                "n_docs",
                format!("header says {n_docs} docs but docmap has {}", docmap.len()),
            ));
        }
        Ok(CorpusGraph {
            k,
            edges,
            docmap,
            edge_count,
        })
    }
}

fn read_exact(input: &mut impl Read, buf: &mut [u8], field: &'static str, path: &Path) -> Result<()> {
    input.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format {
            path: path.to_owned(),
            field,
            message: "file truncated".into(),
        },
        _ => Error::io(path, e),
    })
}

fn read_u32(input: &mut impl Read, field: &'static str, path: &Path) -> Result<u32> {
    let mut word = [0u8; 4];
    read_exact(input, &mut word, field, path)?;
    Ok(u32::from_le_bytes(word))
}
