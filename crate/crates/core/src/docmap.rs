//! Bijection between external document identifiers and dense internal ids.
//!
//! Internal id `i` is the zero-based position of the external id in the
//! list. On disk a docmap is a UTF-8 text file with one external id per line.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Largest admissible corpus: `u32::MAX` is reserved as the edge sentinel.
pub const MAX_DOCS: usize = u32::MAX as usize - 1;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DocMap {
    ids: Vec<String>,
    lookup: HashMap<String, u32>,
}

impl DocMap {
    pub fn new<I, S>(ids: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut map = DocMap::default();
        for id in ids {
            map.push(id.into())?;
        }
        Ok(map)
    }

    /// Appends `id`, returning its internal id.
    pub fn push(&mut self, id: String) -> Result<u32> {
        if id.is_empty() || id.chars().any(char::is_whitespace) {
            return Err(Error::InvalidDocId(id));
        }
        if self.ids.len() >= MAX_DOCS {
            return Err(Error::Config(format!(
                "corpus exceeds the maximum of {MAX_DOCS} documents"
            )));
        }
        if self.lookup.contains_key(&id) {
            return Err(Error::DuplicateDocId(id));
        }
        let internal = self.ids.len() as u32;
        self.lookup.insert(id.clone(), internal);
        self.ids.push(id);
        Ok(internal)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn internal(&self, external: &str) -> Option<u32> {
        self.lookup.get(external).copied()
    }

    pub fn external(&self, internal: u32) -> Option<&str> {
        self.ids.get(internal as usize).map(String::as_str)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for id in &self.ids {
            writeln!(out, "{id}").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut map = DocMap::default();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            map.push(line)
                .map_err(|e| Error::parse(path.display().to_string(), n + 1, e.to_string()))?;
        }
        Ok(map)
    }
}

/// Path of the sidecar docmap for a binary file: `<path>.docs`.
pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".docs");
    name.into()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positions_are_internal_ids() {
        let map = DocMap::new(["a", "b", "c"]).unwrap();
        assert_eq!(map.internal("b"), Some(1));
        assert_eq!(map.external(2), Some("c"));
        assert_eq!(map.external(3), None);
        assert_eq!(map.internal("z"), None);
    }

    #[test]
    fn rejects_bad_ids() {
        assert!(matches!(DocMap::new(["a", "a"]), Err(Error::DuplicateDocId(id)) if id == "a"));
        assert!(matches!(DocMap::new([""]), Err(Error::InvalidDocId(_))));
        assert!(matches!(DocMap::new(["a b"]), Err(Error::InvalidDocId(_))));
        assert!(matches!(DocMap::new(["a\tb"]), Err(Error::InvalidDocId(_))));
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.docs");
        let map = DocMap::new(["d0", "d1", "x-7"]).unwrap();
        map.save(&path).unwrap();
        assert_eq!(DocMap::load(&path).unwrap(), map);
    }

    #[test]
    fn sidecar_appends_suffix() {
        assert_eq!(
            sidecar_path(Path::new("/tmp/graph.bin")),
            Path::new("/tmp/graph.bin.docs")
        );
    }
}
