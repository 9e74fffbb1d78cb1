//! Graph-based adaptive re-ranking.
//!
//! A re-ranking engine that spends a fixed scoring budget on an initial
//! candidate pool and on the nearest neighbours (in a precomputed corpus
//! graph) of the documents that score well, together with the graph
//! builder, BM25 and dense similarity, evaluation measures, and the latency
//! and parameter-sweep harnesses used to study it.

pub mod bench;
pub mod docmap;
pub mod error;
pub mod eval;
pub mod graph;
pub mod lexical;
pub mod ranking;
pub mod rerank;
pub mod sweep;
pub mod synthetic;

pub use docmap::DocMap;
pub use error::{Error, Result};
pub use graph::{CorpusGraph, Neighbour, SENTINEL};
pub use ranking::{Provenance, RankedDoc, Ranking, RunFile};
pub use rerank::{gar_rerank, typical_rerank, ReRankConfig, Scorer};
