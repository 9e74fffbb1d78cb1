use std::cmp::Ordering;
use std::collections::hash_map::Entry;
use std::collections::{BinaryHeap, HashMap};

/// A document popped from the frontier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontierDoc {
    pub doc: u32,
    pub priority: f64,
    /// The scored document whose edge supplied `priority`.
    pub source: u32,
}

#[derive(Debug, Clone, Copy)]
struct Live {
    priority: f64,
    seq: u64,
    source: u32,
}

#[derive(Debug, Clone, Copy)]
struct HeapEntry {
    priority: f64,
    seq: u64,
    doc: u32,
}

impl Ord for HeapEntry {
    // Max-heap order: higher priority, then earlier insertion, then lower id.
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority
            .total_cmp(&other.priority)
            .then(other.seq.cmp(&self.seq))
            .then(other.doc.cmp(&self.doc))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HeapEntry {}

/// Candidate documents keyed by the score of the document that discovered
/// them.
///
/// Each document is present at most once. Pushing a present document keeps
/// the larger of the two priorities and the original insertion sequence.
/// Pops come out by priority (descending), insertion sequence (ascending),
/// then docid (ascending). Superseded and removed heap entries are skipped
/// lazily on pop.
#[derive(Debug, Clone, Default)]
pub struct Frontier {
    heap: BinaryHeap<HeapEntry>,
    live: HashMap<u32, Live>,
    next_seq: u64,
}

impl Frontier {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.live.len()
    }

    pub fn is_empty(&self) -> bool {
        self.live.is_empty()
    }

    pub fn contains(&self, doc: u32) -> bool {
        self.live.contains_key(&doc)
    }

    pub fn priority(&self, doc: u32) -> Option<f64> {
        self.live.get(&doc).map(|l| l.priority)
    }

    pub fn push(&mut self, doc: u32, priority: f64, source: u32) {
        match self.live.entry(doc) {
            Entry::Occupied(mut slot) => {
                let live = slot.get_mut();
                if priority > live.priority {
                    live.priority = priority;
                    live.source = source;
                    self.heap.push(HeapEntry {
                        priority,
                        seq: live.seq,
                        doc,
                    });
                }
            }
            Entry::Vacant(slot) => {
                let seq = self.next_seq;
                self.next_seq += 1;
                slot.insert(Live {
                    priority,
                    seq,
                    source,
                });
                self.heap.push(HeapEntry { priority, seq, doc });
            }
        }
    }

    pub fn remove(&mut self, doc: u32) -> bool {
        self.live.remove(&doc).is_some()
    }

    pub fn pop(&mut self) -> Option<FrontierDoc> {
        while let Some(top) = self.heap.pop() {
            let current = match self.live.get(&top.doc) {
                Some(l) if l.seq == top.seq && l.priority.to_bits() == top.priority.to_bits() => *l,
                _ => continue,
            };
            self.live.remove(&top.doc);
            return Some(FrontierDoc {
                doc: top.doc,
                priority: current.priority,
                source: current.source,
            });
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn drain(f: &mut Frontier) -> Vec<u32> {
        std::iter::from_fn(|| f.pop()).map(|p| p.doc).collect()
    }

    #[test]
    fn pop_order() {
        let mut f = Frontier::new();
        f.push(9, 0.5, 0);
        f.push(4, 0.9, 0);
        f.push(7, 0.9, 1);
        f.push(1, 0.5, 2);
        assert_eq!(drain(&mut f), vec![4, 7, 9, 1]);
    }

    #[test]
    fn reinsertion_takes_max_and_keeps_sequence() {
        let mut f = Frontier::new();
        f.push(1, 0.2, 10);
        f.push(2, 0.8, 11);
        f.push(1, 0.8, 12);
        f.push(2, 0.1, 13);
        assert_eq!(f.len(), 2);
        assert_eq!(f.priority(1), Some(0.8));
        assert_eq!(f.priority(2), Some(0.8));
        // Equal priorities: doc 1 was inserted first.
        let first = f.pop().unwrap();
        assert_eq!((first.doc, first.source), (1, 12));
        assert_eq!(f.pop().unwrap().source, 11);
        assert!(f.pop().is_none());
    }

    #[test]
    fn removed_docs_never_pop() {
        let mut f = Frontier::new();
        f.push(1, 1.0, 0);
        f.push(2, 0.5, 0);
        assert!(f.remove(1));
        assert!(!f.remove(1));
        assert_eq!(drain(&mut f), vec![2]);
        assert!(f.is_empty());
    }

    #[test]
    fn reinsert_after_removal_gets_new_sequence() {
        let mut f = Frontier::new();
        f.push(1, 0.5, 0);
        f.push(2, 0.5, 0);
        f.remove(1);
        f.push(1, 0.5, 0);
        assert_eq!(drain(&mut f), vec![2, 1]);
    }

    proptest! {
        #[test]
        fn matches_sorted_reference(ops in prop::collection::vec((0u32..20, 0u8..5), 0..60)) {
            let mut f = Frontier::new();
            // doc -> (priority, first insertion index)
            let mut reference: HashMap<u32, (f64, usize)> = HashMap::new();
            for (i, &(doc, p)) in ops.iter().enumerate() {
                let p = f64::from(p);
                f.push(doc, p, 0);
                let e = reference.entry(doc).or_insert((p, i));
                e.0 = e.0.max(p);
            }
            let mut expected: Vec<(u32, f64, usize)> =
                reference.into_iter().map(|(d, (p, s))| (d, p, s)).collect();
            expected.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.2.cmp(&b.2)));
            let got: Vec<u32> = drain(&mut f);
            prop_assert_eq!(got, expected.iter().map(|e| e.0).collect::<Vec<_>>());
        }
    }
}
